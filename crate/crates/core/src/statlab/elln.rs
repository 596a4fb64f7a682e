//! Exponential moments `log E exp(N |⟨κφ, μ_N⊗μ_N⟩|^p)` for i.i.d. samples.
//!
//! `φ(x, y) = g̃(x) g̃(y)` with `g̃ = s (g − ⟨g, ρ̄⟩)`, so the pairing is
//! `(1/N Σ g̃(X_i))²` and costs `O(N)` per sample.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::spearman;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::meanfield::pair_values;
use crate::scenario::{Domain, InitialDensity, RngPlan, TestFunction};

const BATCHES: usize = 100;

/// `log((1/n) Σ exp(h_i))` by log-sum-exp, through `expm1`/`ln_1p` so
/// exponents near zero keep their relative precision.
pub fn log_mean_exp(h: &[f64]) -> f64 {
    if h.is_empty() {
        return f64::NAN;
    }
    let m = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + (h.iter().map(|v| (v - m).exp_m1()).sum::<f64>() / h.len() as f64).ln_1p()
}

/// `κ = (8 √(e⁹) ‖(1+|·|²)^{-α}‖²_{L¹(ℝ^d)})^{-1}`.
pub fn default_kappa(dim: usize, alpha: f64) -> Result<f64> {
    let l1 = match dim {
        1 if alpha > 0.5 => {
            use statrs::function::gamma::ln_gamma;
            std::f64::consts::PI.sqrt() * (ln_gamma(alpha - 0.5) - ln_gamma(alpha)).exp()
        }
        2 if alpha > 1.0 => std::f64::consts::PI / (alpha - 1.0),
        _ => {
            return Err(Error::Validation(format!(
                "(1+|ξ|²)^(-α) is not integrable for d = {dim}, α = {alpha}"
            )))
        }
    };
    Ok(1.0 / (8.0 * 4.5f64.exp() * l1 * l1))
}

/// The two smallness constants `(α₀, β₀)` for the scaled function with
/// sup-norm `s`: `(e⁹s², 4e s²)` for `p ≤ 2` and `(e¹⁴s⁴, 8e s⁴)` for `p = 4`.
pub fn smallness_constants(p: u32, s: f64) -> (f64, f64) {
    let e = std::f64::consts::E;
    if p == 4 {
        (14f64.exp() * s.powi(4), 8.0 * e * s.powi(4))
    } else {
        (9f64.exp() * s * s, 4.0 * e * s * s)
    }
}

/// `log(1 + α₀/(1−α₀) + β₀/(1−β₀))`, available for `p ∈ {2, 4}`.
pub fn closed_form_bound(p: u32, s: f64) -> Option<f64> {
    if p != 2 && p != 4 {
        return None;
    }
    let (a, b) = smallness_constants(p, s);
    if a >= 1.0 || b >= 1.0 {
        return None;
    }
    Some((1.0 + a / (1.0 - a) + b / (1.0 - b)).ln())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllnOptions {
    pub counts: Vec<usize>,
    pub samples: usize,
    pub p: u32,
    /// Sup-norm of `φ` before `κ`; `g` is rescaled to reach it.
    pub phi_sup: f64,
    pub kappa: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllnRow {
    pub n: usize,
    pub estimate: f64,
    pub ci: (f64, f64),
    /// The top 1% of samples carries more than half the exponential mass.
    pub heavy_tail: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElLnReport {
    pub p: u32,
    pub kappa: f64,
    pub phi_sup: f64,
    pub samples: usize,
    pub rows: Vec<EllnRow>,
    pub bound: Option<f64>,
    pub trend: f64,
    pub increasing: bool,
}

impl ElLnReport {
    pub fn below_bound(&self) -> Option<bool> {
        self.bound.map(|b| self.rows.iter().all(|r| r.estimate <= b))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,p,estimate,ci_low,ci_high,heavy_tail\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{},{},{}\n", r.n, self.p, r.estimate, r.ci.0, r.ci.1, r.heavy_tail));
        }
        s
    }
}

fn estimate(h: &[f64]) -> EllnRow {
    let m = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let per = h.len() / BATCHES;
    let batch: Vec<f64> = h
        .chunks(per.max(1))
        .map(|c| c.iter().map(|v| (v - m).exp_m1()).sum::<f64>() / c.len() as f64)
        .collect();
    let mean = 1.0 + super::stats::mean(&batch);
    let se = (super::stats::variance(&batch) / batch.len() as f64).sqrt() / mean;
    let value = log_mean_exp(h);
    let mut w: Vec<f64> = h.iter().map(|v| (v - m).exp()).collect();
    w.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = w.iter().sum();
    let top = (h.len() / 100).max(1);
    let heavy = total > 0.0 && w[..top].iter().sum::<f64>() > 0.5 * total;
    EllnRow {
        n: 0,
        estimate: value,
        ci: (value - 1.959963984540054 * se, value + 1.959963984540054 * se),
        heavy_tail: heavy,
    }
}

/// Runs every count with `S` i.i.d. draws of `N` samples from `ρ̄`.
/// Refuses to run outside the proven smallness regime.
pub fn elln_campaign(
    rho: &InitialDensity,
    grid: &Grid,
    g: &TestFunction,
    options: &EllnOptions,
    plan: &RngPlan,
) -> Result<ElLnReport> {
    let p = options.p;
    if ![1, 2, 4].contains(&p) {
        return Err(Error::Validation(format!("p must be 1, 2 or 4, got {p}")));
    }
    if options.samples < BATCHES {
        return Err(Error::Validation(format!("at least {BATCHES} samples are required")));
    }
    let scaled = options.kappa * options.phi_sup;
    let (a, b) = smallness_constants(p, scaled);
    if !(a < 1.0 && b < 1.0) {
        return Err(Error::Precondition(format!(
            "smallness condition fails for κ‖φ‖∞ = {scaled}: α₀ = {a}, β₀ = {b}; no bound is available"
        )));
    }
    let values = rho.grid_values(grid)?;
    let g_bar = pair_values(grid, &values, |x| g.value(x));
    // sup |g − ḡ| over the box, on the grid nodes
    let mut node = [0.0; 2];
    let spread = (0..grid.len())
        .map(|f| {
            grid.node(f, &mut node[..grid.dim()]);
            (g.value(&node[..grid.dim()]) - g_bar).abs()
        })
        .fold(0.0, f64::max);
    let s = if spread > 0.0 { options.phi_sup.sqrt() / spread } else { 0.0 };
    let dim = rho.dim();
    let mut rows = Vec::new();
    for &n in &options.counts {
        if n == 0 {
            return Err(Error::Validation("particle counts must be positive".into()));
        }
        let per = options.samples.div_ceil(BATCHES);
        let h: Vec<f64> = (0..BATCHES as u64)
            .into_par_iter()
            .map(|batch| {
                let mut rng = plan.stream(Domain::Elln, n as u64, batch);
                let mut out = Vec::with_capacity(per);
                for _ in 0..per {
                    let x = rho.sample(n, &mut rng);
                    let c = x.chunks_exact(dim).map(|xi| g.value(xi) - g_bar).sum::<f64>() * s / n as f64;
                    out.push(n as f64 * (options.kappa * c * c).powi(p as i32));
                }
                out
            })
            .flatten()
            .collect();
        let mut row = estimate(&h);
        row.n = n;
        rows.push(row);
    }
    let x: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.estimate).collect();
    let trend = if y.iter().all(|v| *v == y[0]) { 0.0 } else { spearman(&x, &y) };
    let increasing = match (rows.first(), rows.last()) {
        (Some(a), Some(b)) if rows.len() > 1 => trend > 0.3 && b.estimate > a.ci.1,
        _ => false,
    };
    Ok(ElLnReport {
        p,
        kappa: options.kappa,
        phi_sup: options.phi_sup,
        samples: per_total(options.samples),
        rows,
        bound: closed_form_bound(p, scaled),
        trend,
        increasing,
    })
}

fn per_total(samples: usize) -> usize {
    samples.div_ceil(BATCHES) * BATCHES
}
