//! Kolmogorov–Smirnov tests.
//!
//! One-sample null distribution from the Marsaglia–Tsang–Wang matrix
//! recursion; two-sample exact from the lattice-path recursion. Both fall
//! back to the Kolmogorov series when the exact route would be too large.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub exact: bool,
}

/// `sup |F_n − F|` for the given continuous CDF.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d = 0.0f64;
    for (i, v) in x.iter().enumerate() {
        let f = cdf(*v);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    d
}

/// `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} exp(−2k²λ²)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let t = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { t } else { -t };
        if t < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

fn mat_mul(a: &[f64], b: &[f64], m: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * m];
    for i in 0..m {
        for k in 0..m {
            let aik = a[i * m + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..m {
                c[i * m + j] += aik * b[k * m + j];
            }
        }
    }
    c
}

fn mat_pow(a: &[f64], m: usize, n: usize) -> (Vec<f64>, i32) {
    if n == 1 {
        return (a.to_vec(), 0);
    }
    let (v, ev) = mat_pow(a, m, n / 2);
    let b = mat_mul(&v, &v, m);
    let eb = 2 * ev;
    let (mut out, mut e) = if n % 2 == 0 { (b, eb) } else { (mat_mul(a, &b, m), eb) };
    if out[(m / 2) * m + m / 2] > 1e140 {
        out.iter_mut().for_each(|v| *v *= 1e-140);
        e += 140;
    }
    (out, e)
}

/// `P(D_n < d)` for the one-sample statistic, exact.
pub fn kolmogorov_cdf_exact(n: usize, d: f64) -> f64 {
    if d <= 0.5 / n as f64 {
        return 0.0;
    }
    if d >= 1.0 {
        return 1.0;
    }
    let nf = n as f64;
    let k = (nf * d) as usize + 1;
    let m = 2 * k - 1;
    let h = k as f64 - nf * d;
    let mut hm = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            if i + 1 >= j {
                hm[i * m + j] = 1.0;
            }
        }
    }
    for i in 0..m {
        hm[i * m] -= h.powi(i as i32 + 1);
        hm[(m - 1) * m + i] -= h.powi((m - i) as i32);
    }
    if 2.0 * h - 1.0 > 0.0 {
        hm[(m - 1) * m] += (2.0 * h - 1.0).powi(m as i32);
    }
    for i in 0..m {
        for j in 0..m {
            if i + 1 > j {
                for g in 1..=(i + 1 - j) {
                    hm[i * m + j] /= g as f64;
                }
            }
        }
    }
    let (q, mut eq) = mat_pow(&hm, m, n);
    let mut s = q[(k - 1) * m + k - 1];
    for i in 1..=n {
        s = s * i as f64 / nf;
        if s < 1e-140 {
            s *= 1e140;
            eq -= 140;
        }
    }
    (s * 10f64.powi(eq)).clamp(0.0, 1.0)
}

/// Largest matrix order used by the exact one-sample route.
const MAX_EXACT_ORDER: usize = 401;

/// One-sample test against a fully specified continuous CDF.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let n = sample.len();
    let d = ks_statistic(sample, cdf);
    let order = 2 * ((n as f64 * d) as usize + 1) - 1;
    if order <= MAX_EXACT_ORDER {
        KsResult {
            statistic: d,
            p_value: 1.0 - kolmogorov_cdf_exact(n, d),
            exact: true,
        }
    } else {
        let sn = (n as f64).sqrt();
        KsResult {
            statistic: d,
            p_value: kolmogorov_q((sn + 0.12 + 0.11 / sn) * d),
            exact: false,
        }
    }
}

pub fn ks_normal(sample: &[f64], mean: f64, sd: f64) -> KsResult {
    ks_one_sample(sample, |x| super::stats::normal_cdf((x - mean) / sd))
}

/// Two-sample statistic `sup |F_a − F_b|`.
pub fn ks2_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// `P(D_{m,n} < d)` by counting monotone lattice paths.
fn smirnov_cdf_exact(m: usize, n: usize, d: f64) -> f64 {
    let (m, n) = if m > n { (n, m) } else { (m, n) };
    let (md, nd) = (m as f64, n as f64);
    let q = (0.5 + (d * md * nd - 1e-7).floor()) / (md * nd);
    let mut u: Vec<f64> = (0..=n).map(|j| if j as f64 / nd > q { 0.0 } else { 1.0 }).collect();
    for i in 1..=m {
        let w = i as f64 / (i + n) as f64;
        u[0] = if i as f64 / md > q { 0.0 } else { w * u[0] };
        for j in 1..=n {
            u[j] = if (i as f64 / md - j as f64 / nd).abs() > q {
                0.0
            } else {
                w * u[j] + u[j - 1]
            };
        }
    }
    u[n]
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let d = ks2_statistic(a, b);
    let (n, m) = (a.len(), b.len());
    if n.saturating_mul(m) <= 50_000_000 {
        KsResult {
            statistic: d,
            p_value: (1.0 - smirnov_cdf_exact(n, m, d)).clamp(0.0, 1.0),
            exact: true,
        }
    } else {
        let ne = ((n * m) as f64 / (n + m) as f64).sqrt();
        KsResult {
            statistic: d,
            p_value: kolmogorov_q((ne + 0.12 + 0.11 / ne) * d),
            exact: false,
        }
    }
}

/// Smallest `d` with `P(D_n ≥ d) ≤ level`, by bisection on the exact CDF.
pub fn critical_value(n: usize, level: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if 1.0 - kolmogorov_cdf_exact(n, mid) > level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Steck's determinant: `P(l_i < U_(i) < u_i) = n! det[(u_i − l_j)_+^{j−i+1}/(j−i+1)!]`.
    fn steck(n: usize, d: f64) -> f64 {
        let nf = n as f64;
        let l: Vec<f64> = (1..=n).map(|i| (i as f64 / nf - d).max(0.0)).collect();
        let u: Vec<f64> = (1..=n).map(|i| ((i - 1) as f64 / nf + d).min(1.0)).collect();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                if j + 1 >= i {
                    let p = j + 1 - i;
                    let base = (u[i] - l[j]).max(0.0);
                    let fact: f64 = (1..=p).map(|v| v as f64).product();
                    a[i][j] = base.powi(p as i32) / fact;
                }
            }
        }
        // Gaussian elimination with partial pivoting
        let mut det = 1.0;
        for c in 0..n {
            let p = (c..n).max_by(|x, y| a[*x][c].abs().total_cmp(&a[*y][c].abs())).unwrap();
            if a[p][c] == 0.0 {
                return 0.0;
            }
            if p != c {
                a.swap(p, c);
                det = -det;
            }
            det *= a[c][c];
            for r in c + 1..n {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
        det * (1..=n).map(|v| v as f64).product::<f64>()
    }

    #[test]
    fn exact_cdf_matches_determinant_oracle() {
        for n in [1usize, 2, 5, 10, 17] {
            for d in [0.05, 0.12, 0.2, 0.31, 0.45, 0.6, 0.8] {
                let a = kolmogorov_cdf_exact(n, d);
                let b = steck(n, d);
                assert!((a - b).abs() < 1e-9, "n={n} d={d}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn critical_values_match_tables() {
        let table = [(5, 0.05, 0.56328), (5, 0.01, 0.66853), (10, 0.05, 0.40925), (10, 0.01, 0.48893)];
        for (n, level, expected) in table {
            let c = critical_value(n, level);
            assert!((c - expected).abs() < 5e-4, "n={n} level={level}: {c}");
        }
    }

    #[test]
    fn asymptotic_agrees_with_exact_for_moderate_n() {
        let n = 400;
        for d in [0.04, 0.06, 0.08] {
            let exact = 1.0 - kolmogorov_cdf_exact(n, d);
            let sn = (n as f64).sqrt();
            let asym = kolmogorov_q((sn + 0.12 + 0.11 / sn) * d);
            assert!((exact - asym).abs() < 1e-2, "{exact} {asym}");
        }
    }

    #[test]
    fn normal_samples_pass_and_shifted_fail() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
        assert!(ks_normal(&x, 0.0, 1.0).p_value > 0.01);
        assert!(ks_normal(&x, 0.3, 1.0).p_value < 1e-6);
        let y: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
        assert!(ks_two_sample(&x, &y).p_value > 0.01);
        let z: Vec<f64> = y.iter().map(|v| 1.4 * v).collect();
        assert!(ks_two_sample(&x, &z).p_value < 1e-3);
    }

    #[test]
    fn two_sample_exact_small_case() {
        // disjoint samples of sizes 3 and 3: D = 1 and P(D ≥ 1) = 2 / C(6,3)
        let r = ks_two_sample(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]);
        assert_eq!(r.statistic, 1.0);
        assert!((r.p_value - 0.1).abs() < 1e-12);
        assert!(ks_two_sample(&[1.0, 2.0], &[1.5, 2.5]).p_value > 0.5);
    }
}
