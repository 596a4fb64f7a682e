//! One-particle relative entropy proxy: histogram KL between pooled
//! particle positions and the mean-field density.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{wrap_position, Grid};
use crate::meanfield::{solve_path, FpSolver};
use crate::particles::{run_trajectory, CommonNoisePath};
use crate::scenario::Scenario;

use super::campaign::par_replicas;

pub const MIN_POOLED: usize = 10_000;
const SMOOTHING: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlEstimate {
    pub value: f64,
    pub samples: usize,
    pub bins_per_axis: usize,
    pub bin_width: f64,
    /// Some bin with empirical mass had zero reference mass and the
    /// reference was smoothed by `1e-12`.
    pub smoothed: bool,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, f) = (pos.floor() as usize, pos - pos.floor());
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - f) + sorted[i + 1] * f
    } else {
        sorted[i]
    }
}

/// `KL(empirical marginal ‖ ρ)` on a Freedman–Diaconis histogram over the
/// box. The bin width is the smallest over the axes, adjusted to divide
/// the box.
pub fn marginal_kl(positions: &[f64], grid: &Grid, rho: &[f64]) -> Result<KlEstimate> {
    let d = grid.dim();
    let n = positions.len() / d;
    if n < MIN_POOLED {
        return Err(Error::Precondition(format!(
            "the histogram estimator needs at least {MIN_POOLED} pooled samples, got {n}"
        )));
    }
    if rho.len() != grid.len() {
        return Err(Error::Shape("density does not match the grid".into()));
    }
    let l = grid.half_width();
    let width_box = 2.0 * l;
    let mut fd = f64::INFINITY;
    for a in 0..d {
        let mut c: Vec<f64> = positions.chunks_exact(d).map(|x| wrap_position(x[a], l)).collect();
        c.sort_by(f64::total_cmp);
        let iqr = quantile(&c, 0.75) - quantile(&c, 0.25);
        fd = fd.min(2.0 * iqr * (n as f64).powf(-1.0 / 3.0));
    }
    if !(fd > 0.0) {
        fd = grid.spacing();
    }
    let bins = ((width_box / fd).ceil() as usize).max(1);
    let width = width_box / bins as f64;
    let total = bins.pow(d as u32);
    let mut counts = vec![0.0; total];
    for x in positions.chunks_exact(d) {
        let mut flat = 0;
        for xa in x {
            let b = (((wrap_position(*xa, l) + l) / width) as usize).min(bins - 1);
            flat = flat * bins + b;
        }
        counts[flat] += 1.0;
    }
    // reference bin masses by a midpoint rule on the interpolated density
    let k = ((8.0 * width / grid.spacing()).ceil() as usize).max(4);
    let sub = width / k as f64;
    let mut q = vec![0.0; total];
    let mut x = [0.0; 2];
    for (flat, qb) in q.iter_mut().enumerate() {
        let idx = if d == 1 { [flat, 0] } else { [flat / bins, flat % bins] };
        let mut acc = 0.0;
        for s in 0..k.pow(d as u32) {
            let sidx = if d == 1 { [s, 0] } else { [s / k, s % k] };
            for a in 0..d {
                x[a] = -l + idx[a] as f64 * width + (sidx[a] as f64 + 0.5) * sub;
            }
            acc += grid.interpolate(rho, &x[..d]);
        }
        *qb = (acc * sub.powi(d as i32)).max(0.0);
    }
    let smoothed = counts.iter().zip(&q).any(|(c, q)| *c > 0.0 && *q <= 0.0);
    if smoothed {
        q.iter_mut().for_each(|v| *v += SMOOTHING);
    }
    let qs: f64 = q.iter().sum();
    let nf = n as f64;
    let value = counts
        .iter()
        .zip(&q)
        .filter(|(c, _)| **c > 0.0)
        .map(|(c, qb)| {
            let p = c / nf;
            p * (p / (qb / qs)).ln()
        })
        .sum();
    Ok(KlEstimate {
        value,
        samples: n,
        bins_per_axis: bins,
        bin_width: width,
        smoothed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyRow {
    pub n: usize,
    pub estimate: KlEstimate,
}

/// Pools final positions of `replicas` runs per count against `ρ_T`, all
/// runs sharing one common-noise path so the pooled law is the conditional
/// one-particle marginal.
pub fn entropy_campaign(scenario: &Scenario, counts: &[usize], replicas: usize, path_id: u64) -> Result<Vec<EntropyRow>> {
    let steps = scenario.n_steps();
    let solver = FpSolver::from_scenario(scenario);
    let path = CommonNoisePath::for_scenario(scenario, path_id);
    let field = solve_path(scenario, &solver, &path, &[], steps)?;
    let rho = &field.final_field().values;
    let mut rows = Vec::new();
    for &n in counts {
        let pooled: Vec<Vec<f64>> = par_replicas(replicas, |r| {
            Ok(run_trajectory(scenario, n, r, &path, None, &[], steps)?.final_state.positions)
        })?;
        let pooled: Vec<f64> = pooled.into_iter().flatten().collect();
        rows.push(EntropyRow {
            n,
            estimate: marginal_kl(&pooled, &scenario.grid, rho)?,
        });
    }
    Ok(rows)
}

pub fn entropy_to_csv(rows: &[EntropyRow]) -> String {
    let mut s = String::from("n,kl,samples,bins,bin_width,smoothed\n");
    for r in rows {
        let e = &r.estimate;
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.n, e.value, e.samples, e.bins_per_axis, e.bin_width, e.smoothed
        ));
    }
    s
}
