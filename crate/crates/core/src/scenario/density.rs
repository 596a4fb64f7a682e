//! Initial densities `ρ₀`, truncated to the box and renormalized.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Isotropic standard deviation.
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Rho0Spec {
    Gaussian { mean: Vec<f64>, std: f64 },
    Mixture { components: Vec<MixtureComponent> },
    /// Uniform on `[low, high]^d`.
    Uniform { low: f64, high: f64 },
    /// A point mass sitting on a grid node.
    Atom { point: Vec<f64> },
}

impl Rho0Spec {
    pub fn standard_gaussian(dim: usize, std: f64) -> Self {
        Rho0Spec::Gaussian {
            mean: vec![0.0; dim],
            std,
        }
    }

    fn components(&self) -> Option<Vec<MixtureComponent>> {
        match self {
            Rho0Spec::Gaussian { mean, std } => Some(vec![MixtureComponent {
                weight: 1.0,
                mean: mean.clone(),
                std: *std,
            }]),
            Rho0Spec::Mixture { components } => Some(components.clone()),
            _ => None,
        }
    }

    /// Resolves the spec on the box `[-L, L)^d`, checking normalizability.
    pub fn resolve(&self, dim: usize, half_width: f64) -> Result<InitialDensity> {
        let kind = if let Some(components) = self.components() {
            if components.is_empty() {
                return Err(Error::Validation("rho0 mixture needs at least one component".into()));
            }
            let mut masses = Vec::with_capacity(components.len());
            for c in &components {
                if c.mean.len() != dim {
                    return Err(Error::Validation(format!("rho0 mean must have {dim} components")));
                }
                if !(c.std > 0.0) || !(c.weight >= 0.0) {
                    return Err(Error::Validation("rho0 components need std > 0 and weight >= 0".into()));
                }
                let normal = Normal::new(0.0, c.std).map_err(|e| Error::Validation(e.to_string()))?;
                let inside: f64 = c
                    .mean
                    .iter()
                    .map(|m| normal.cdf(half_width - m) - normal.cdf(-half_width - m))
                    .product();
                masses.push(c.weight * inside);
            }
            let total: f64 = masses.iter().sum();
            let weight_sum: f64 = components.iter().map(|c| c.weight).sum();
            if !(total / weight_sum.max(f64::MIN_POSITIVE) >= 1e-12) {
                return Err(Error::Validation(format!(
                    "rho0 is unnormalizable: mass inside the box is {total:.3e}"
                )));
            }
            let selection: Vec<f64> = masses.iter().map(|m| m / total).collect();
            DensityKind::Mixture { components, selection }
        } else {
            match self {
                Rho0Spec::Uniform { low, high } => {
                    let lo = low.max(-half_width);
                    let hi = high.min(half_width);
                    if !(hi - lo >= 1e-12) {
                        return Err(Error::Validation(
                            "rho0 is unnormalizable: uniform support misses the box".into(),
                        ));
                    }
                    DensityKind::Uniform { low: lo, high: hi }
                }
                Rho0Spec::Atom { point } => {
                    if point.len() != dim {
                        return Err(Error::Validation(format!("rho0 atom must have {dim} coordinates")));
                    }
                    if point.iter().any(|p| *p < -half_width || *p >= half_width) {
                        return Err(Error::Validation("rho0 atom lies outside the box".into()));
                    }
                    DensityKind::Atom { point: point.clone() }
                }
                _ => unreachable!(),
            }
        };
        Ok(InitialDensity {
            dim,
            half_width,
            kind,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
enum DensityKind {
    Mixture {
        components: Vec<MixtureComponent>,
        selection: Vec<f64>,
    },
    Uniform {
        low: f64,
        high: f64,
    },
    Atom {
        point: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitialDensity {
    dim: usize,
    half_width: f64,
    kind: DensityKind,
}

impl InitialDensity {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Untruncated density value (not renormalized).
    pub fn raw_density(&self, x: &[f64]) -> f64 {
        match &self.kind {
            DensityKind::Mixture { components, .. } => components
                .iter()
                .map(|c| {
                    let var = c.std * c.std;
                    let r2: f64 = x.iter().zip(&c.mean).map(|(a, m)| (a - m) * (a - m)).sum();
                    c.weight * (-0.5 * r2 / var).exp() / (2.0 * std::f64::consts::PI * var).powf(0.5 * self.dim as f64)
                })
                .sum(),
            DensityKind::Uniform { low, high } => {
                if x.iter().all(|v| *v >= *low && *v <= *high) {
                    1.0 / (high - low).powi(self.dim as i32)
                } else {
                    0.0
                }
            }
            DensityKind::Atom { .. } => 0.0,
        }
    }

    /// Draws `n` i.i.d. positions (row-major `n × d`) from the truncated
    /// density.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let d = self.dim;
        let l = self.half_width;
        let mut out = Vec::with_capacity(n * d);
        let mut x = vec![0.0; d];
        for _ in 0..n {
            match &self.kind {
                DensityKind::Mixture { components, selection } => loop {
                    let u: f64 = rng.gen();
                    let mut acc = 0.0;
                    let mut idx = selection.len() - 1;
                    for (i, w) in selection.iter().enumerate() {
                        acc += w;
                        if u < acc {
                            idx = i;
                            break;
                        }
                    }
                    let c = &components[idx];
                    for (xa, m) in x.iter_mut().zip(&c.mean) {
                        let z: f64 = StandardNormal.sample(rng);
                        *xa = m + c.std * z;
                    }
                    if x.iter().all(|v| *v >= -l && *v < l) {
                        break;
                    }
                },
                DensityKind::Uniform { low, high } => {
                    for xa in x.iter_mut() {
                        *xa = rng.gen_range(*low..*high);
                    }
                }
                DensityKind::Atom { point } => x.copy_from_slice(point),
            }
            out.extend_from_slice(&x);
        }
        out
    }

    /// Grid values normalized to unit discrete mass `h^d Σ ρ_j = 1`.
    pub fn grid_values(&self, grid: &Grid) -> Result<Vec<f64>> {
        let n = grid.len();
        let mut values = vec![0.0; n];
        match &self.kind {
            DensityKind::Atom { point } => {
                let idx = grid.nearest_node(point);
                let mut node = vec![0.0; self.dim];
                grid.node(idx, &mut node);
                if node.iter().zip(point).any(|(a, b)| (a - b).abs() > 1e-12) {
                    return Err(Error::Validation("rho0 atom must sit on a grid node".into()));
                }
                values[idx] = 1.0 / grid.cell_volume();
                return Ok(values);
            }
            _ => {
                let mut x = vec![0.0; self.dim];
                for (j, v) in values.iter_mut().enumerate() {
                    grid.node(j, &mut x);
                    *v = self.raw_density(&x);
                }
            }
        }
        let mass: f64 = values.iter().sum::<f64>() * grid.cell_volume();
        if !(mass >= 1e-12) {
            return Err(Error::Validation(format!(
                "rho0 is unnormalizable on the grid: mass {mass:.3e}"
            )));
        }
        for v in &mut values {
            *v /= mass;
        }
        Ok(values)
    }
}
