//! Synthetic data from the extended deformation model
//!
//! `X_ij(t_k) = A_ij (lambda ∘ psi_j ∘ h_i ∘ r_ij)(t_k) + eps_ijk`
//!
//! with optional shape contamination, plus the integrated error metrics used
//! to score an estimate against the generating truth.

pub mod benchmark;
pub mod generators;
pub mod rng;

use rand::seq::index;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::curves::{Curve, Grid, MultiSample, WarpingCurve};
use crate::error::{LdmError, Result};
use crate::estimation::LdmEstimate;
use generators::{Template, Warp};
use rng::{StreamKind, Substreams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    /// Number of grid intervals; the grid has `k + 1` nodes on `[0, 1]`.
    pub k: usize,
    /// 1: four deterministic beta-mixture distortions, 2: iterated random warps.
    pub psi_setting: u8,
    /// 1: exponential-family warps, 2: iterated random warps.
    pub h_setting: u8,
    pub sigma_w: f64,
    pub eps_w: f64,
    pub sigma_d: f64,
    pub sigma_e: f64,
    /// Fraction of individuals generated from the contaminating amplitude.
    pub contamination: f64,
    /// Iterations of the breakpoint map.
    pub m_iter: usize,
    pub eps_w_psi: f64,
    pub scale_mean: f64,
    pub scale_sd: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n: 50,
            p: 4,
            k: 101,
            psi_setting: 1,
            h_setting: 1,
            sigma_w: 0.5,
            eps_w: 0.005,
            sigma_d: 0.0,
            sigma_e: 0.0,
            contamination: 0.0,
            m_iter: 2500,
            eps_w_psi: 0.005,
            scale_mean: 100.0,
            scale_sd: 2.0,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(LdmError::Argument(m));
        if self.n < 2 {
            return fail(format!("n must be >= 2, got {}", self.n));
        }
        if self.p == 0 {
            return fail("p must be >= 1".into());
        }
        if self.k < 2 {
            return fail(format!("K must be >= 2, got {}", self.k));
        }
        match self.psi_setting {
            1 if self.p != 4 => return fail(format!("psi setting 1 requires p = 4, got {}", self.p)),
            1 | 2 => {}
            s => return fail(format!("unknown psi setting {s}")),
        }
        if !matches!(self.h_setting, 1 | 2) {
            return fail(format!("unknown h setting {}", self.h_setting));
        }
        for (name, v) in [
            ("sigma_W", self.sigma_w),
            ("eps_W", self.eps_w),
            ("sigma_D", self.sigma_d),
            ("sigma_E", self.sigma_e),
            ("eps_W_psi", self.eps_w_psi),
            ("scale_sd", self.scale_sd),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("{name} must be a nonnegative number, got {v}"));
            }
        }
        if self.h_setting == 2 && 10.0 * self.eps_w >= 0.5 {
            return fail(format!("eps_W = {} too large (need 10 eps < 0.5)", self.eps_w));
        }
        if self.psi_setting == 2 && 10.0 * self.eps_w_psi >= 0.5 {
            return fail(format!("eps_W_psi = {} too large", self.eps_w_psi));
        }
        if !(0.0..0.5).contains(&self.contamination) {
            return fail(format!(
                "contamination must lie in [0, 0.5), got {}",
                self.contamination
            ));
        }
        Ok(())
    }

    /// The warping parameter in use: `sigma_W` (h setting 1) or `eps_W`.
    pub fn warp_parameter(&self) -> f64 {
        if self.h_setting == 1 {
            self.sigma_w
        } else {
            self.eps_w
        }
    }

    pub fn outlier_count(&self) -> usize {
        (self.contamination * self.n as f64).round() as usize
    }
}

/// Everything that generated a simulated sample, on the sample grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub lambda: Curve,
    pub gamma: Vec<Curve>,
    pub psi: Vec<WarpingCurve>,
    pub h: Vec<WarpingCurve>,
    /// `r[i][j]`.
    pub r: Vec<Vec<WarpingCurve>>,
    /// `a[i][j]`.
    pub a: Vec<Vec<f64>>,
    pub outlier_mask: Vec<bool>,
}

impl GroundTruth {
    pub fn outliers(&self) -> impl Iterator<Item = usize> + '_ {
        self.outlier_mask
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .map(|(i, _)| i)
    }
}

/// Draws one sample and its ground truth; deterministic in `cfg.seed`.
pub fn simulate(cfg: &SimConfig) -> Result<(MultiSample, GroundTruth)> {
    cfg.validate()?;
    let grid = Grid::unit(cfg.k)?;
    let streams = Substreams::new(cfg.seed);
    let (n, p) = (cfg.n, cfg.p);

    let clean = Template::clean(&grid);
    let contaminated = Template::contaminated(&grid);
    let psi = match cfg.psi_setting {
        1 => generators::gen_psi_setting1(&grid)?,
        _ => generators::gen_psi_setting2(&grid, p, cfg.eps_w_psi, cfg.m_iter, &streams)?,
    };
    let h = match cfg.h_setting {
        1 => generators::gen_h_setting1(cfg.sigma_w, n, &streams)?,
        _ => generators::gen_h_setting2(&grid, cfg.eps_w, cfg.m_iter, n, &streams)?,
    };
    let r = generators::gen_nuisance(cfg.sigma_d, n, p, &streams)?;

    let mut outlier_mask = vec![false; n];
    let n_out = cfg.outlier_count();
    if n_out > 0 {
        let mut rng = streams.stream(StreamKind::Outliers, 0, 0);
        for i in index::sample(&mut rng, n, n_out) {
            outlier_mask[i] = true;
        }
    }

    let scale = Normal::new(cfg.scale_mean, cfg.scale_sd).map_err(|e| LdmError::arg(e.to_string()))?;
    let noise = (cfg.sigma_e > 0.0)
        .then(|| Normal::new(0.0, cfg.sigma_e))
        .transpose()
        .map_err(|e| LdmError::arg(e.to_string()))?;

    let mut rows = Vec::with_capacity(n);
    let mut a = Vec::with_capacity(n);
    for i in 0..n {
        let template = if outlier_mask[i] { &contaminated } else { &clean };
        let mut row = Vec::with_capacity(p);
        let mut a_row = Vec::with_capacity(p);
        for j in 0..p {
            let a_ij = if cfg.scale_sd > 0.0 {
                scale.sample(&mut streams.stream(StreamKind::Scale, i, j))
            } else {
                cfg.scale_mean
            };
            let mut noise_rng = streams.stream(StreamKind::Noise, i, j);
            let r_ij = &r[i * p + j];
            let y: Vec<f64> = grid
                .points()
                .iter()
                .map(|&t| {
                    let g = psi[j].eval(h[i].eval(r_ij.eval(t)));
                    let e = noise.map_or(0.0, |d| d.sample(&mut noise_rng));
                    a_ij * template.eval(g) + e
                })
                .collect();
            row.push(Curve::new(grid.clone(), y)?);
            a_row.push(a_ij);
        }
        rows.push(row);
        a.push(a_row);
    }

    let gamma = psi
        .iter()
        .map(|w| Curve::from_fn(&grid, |t| clean.eval(w.eval(t))))
        .collect::<Result<Vec<_>>>()?;
    let sample_all = |ws: &[Warp]| -> Result<Vec<WarpingCurve>> {
        ws.iter().map(|w| w.sample(&grid)).collect()
    };
    let r_curves = sample_all(&r)?;
    let truth = GroundTruth {
        lambda: clean.sample(&grid)?,
        gamma,
        psi: sample_all(&psi)?,
        h: sample_all(&h)?,
        r: r_curves.chunks(p).map(|c| c.to_vec()).collect(),
        a,
        outlier_mask,
    };
    Ok((MultiSample::new(rows)?, truth))
}

/// Integrated squared errors of an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `∫ (lambda_hat - lambda)^2`
    pub lise: f64,
    /// Mean over individuals of `∫ (h_hat_i - h_i)^2`
    pub hmise: f64,
    /// Mean over curves of `∫ (X_hat_ij - X_ij)^2`, on the observed scale
    pub xmise: f64,
}

fn ise(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    let sq: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).collect();
    grid.integrate(&sq)
}

/// Scores an estimate. Contaminated individuals are left out of HMISE and
/// XMISE; LISE is always measured against the clean amplitude.
pub fn metrics(est: &LdmEstimate, truth: &GroundTruth, observed: &MultiSample) -> Result<Metrics> {
    let grid = observed.grid();
    if est.lambda_hat.grid() != grid || truth.lambda.grid() != grid {
        return Err(LdmError::GridMismatch);
    }
    if est.n() != observed.n() || est.p() != observed.p() || truth.h.len() != observed.n() {
        return Err(LdmError::arg("estimate, truth and sample differ in shape"));
    }
    use crate::curves::Sampled;
    let lise = ise(grid, est.lambda_hat.values(), truth.lambda.values());
    let clean: Vec<usize> = (0..observed.n()).filter(|&i| !truth.outlier_mask[i]).collect();
    if clean.is_empty() {
        return Err(LdmError::arg("no uncontaminated individuals to score"));
    }
    let hmise = clean
        .iter()
        .map(|&i| ise(grid, est.h_hat[i].values(), truth.h[i].values()))
        .sum::<f64>()
        / clean.len() as f64;
    let p = observed.p();
    let xmise = clean
        .iter()
        .flat_map(|&i| (0..p).map(move |j| (i, j)))
        .map(|(i, j)| {
            let xh = est.x_hat_observed_scale(i, j);
            ise(grid, xh.values(), observed.get(i, j).values())
        })
        .sum::<f64>()
        / (clean.len() * p) as f64;
    Ok(Metrics { lise, hmise, xmise })
}
