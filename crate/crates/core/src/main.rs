fn main() {
    std::process::exit(fluctlab::cli::dispatch(std::env::args_os()));
}
