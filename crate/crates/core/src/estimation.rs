//! Depth-based estimation of every component of the latent deformation model.
//!
//! The pipeline runs in a fixed order on sup-normalized curves:
//!
//! 1. `gamma_hat[j]`: depth median of component `j` (of the monotonized
//!    component when the data are not monotone);
//! 2. `h_hat[i][j] = T(gamma_hat[j])^{-1} ∘ T(X_ij)`, aggregated over `j`
//!    into `h_hat[i]`;
//! 3. `lambda_hat`: depth median of the pooled sample of all curves;
//! 4. `psi_hat[j] = T(lambda_hat)^{-1} ∘ T(gamma_hat[j])`;
//! 5. reconstructions `x_hat[i][j] = gamma_hat[j] ∘ h_hat[i]`.
//!
//! `T` is the cumulative total-variation operator, which commutes with
//! warping. For strictly monotone data `T` is skipped and the curves are
//! inverted directly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::curves::{inverse_at, Curve, Grid, MultiSample, Sampled, WarpingCurve};
use crate::depth::{self, DepthMethod};
use crate::error::{LdmError, Result};
use crate::simulation::rng::{StreamKind, Substreams};

/// Relative slope added to a monotonized template before inversion so that
/// flat stretches become invertible.
pub const FLAT_BREAK_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Monotonize {
    /// Monotonize unless every curve is strictly monotone in the same direction.
    Auto,
    Always,
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LambdaPool {
    /// All `n * p` curves.
    Pooled,
    /// One randomly chosen component per individual.
    RandomPerIndividual,
}

/// How the per-component warps of one individual are combined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Aggregation {
    Mean,
    /// Depth median (configured depth) of the `p` estimates.
    Median,
    /// Mean after dropping the `floor(alpha * p)` estimates of lowest modified
    /// band depth.
    Trimmed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationConfig {
    pub depth_method: DepthMethod,
    pub monotonize: Monotonize,
    pub lambda_pool: LambdaPool,
    pub h_aggregation: Aggregation,
    /// Odd moving-average window applied before normalization; 1 disables.
    pub smoothing_window: usize,
    pub seed: u64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig {
            depth_method: DepthMethod::ModifiedBandDepth,
            monotonize: Monotonize::Auto,
            lambda_pool: LambdaPool::Pooled,
            h_aggregation: Aggregation::Mean,
            smoothing_window: 1,
            seed: 0,
        }
    }
}

impl EstimationConfig {
    pub fn validate(&self) -> Result<()> {
        self.depth_method.validate()?;
        if let Aggregation::Trimmed(alpha) = self.h_aggregation {
            if !(0.0..0.5).contains(&alpha) {
                return Err(LdmError::arg(format!(
                    "trimming proportion must lie in [0, 0.5), got {alpha}"
                )));
            }
        }
        if self.smoothing_window == 0 || self.smoothing_window.is_multiple_of(2) {
            return Err(LdmError::arg(format!(
                "smoothing window must be odd and positive, got {}",
                self.smoothing_window
            )));
        }
        Ok(())
    }
}

/// How curves are made monotone before inversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    /// Total-variation monotonization.
    Monotonized,
    /// Data already strictly increasing.
    Increasing,
    /// Data strictly decreasing; curves are negated.
    Decreasing,
}

impl Shape {
    pub fn transform(self, c: &Curve) -> Curve {
        match self {
            Shape::Monotonized => c.monotonize(),
            Shape::Increasing => c.clone(),
            Shape::Decreasing => c.scaled(-1.0),
        }
    }

    fn detect(sample: &MultiSample, mode: Monotonize) -> Result<Shape> {
        let mut dirs = sample.iter().map(|(_, _, c)| c.strict_direction());
        let first = dirs.next().flatten();
        let uniform = match first {
            Some(d) if dirs.all(|x| x == Some(d)) => Some(d),
            _ => None,
        };
        let raw = match uniform {
            Some(true) => Some(Shape::Increasing),
            Some(false) => Some(Shape::Decreasing),
            None => None,
        };
        match (mode, raw) {
            (Monotonize::Always, _) => Ok(Shape::Monotonized),
            (Monotonize::Auto, Some(s)) => Ok(s),
            (Monotonize::Auto, None) => Ok(Shape::Monotonized),
            (Monotonize::Never, Some(s)) => Ok(s),
            (Monotonize::Never, None) => Err(LdmError::arg(
                "monotonization disabled but the curves are not all strictly monotone",
            )),
        }
    }
}

/// Smoothed, sup-normalized sample together with the normalizing constants.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub normalized: MultiSample,
    /// `scales[i * p + j] = ||X*_ij||_inf` after smoothing.
    pub scales: Vec<f64>,
    pub shape: Shape,
    /// `shape.transform` of every normalized curve, row-major.
    transformed: Vec<Curve>,
}

impl Prepared {
    pub fn new(sample: &MultiSample, cfg: &EstimationConfig) -> Result<Self> {
        cfg.validate()?;
        let smoothed = if cfg.smoothing_window > 1 {
            sample.try_map(|c| c.moving_average(cfg.smoothing_window))?
        } else {
            sample.clone()
        };
        let scales: Vec<f64> = smoothed.iter().map(|(_, _, c)| c.sup_norm()).collect();
        let normalized = smoothed.try_map(|c| c.sup_normalize())?;
        let shape = Shape::detect(&normalized, cfg.monotonize)?;
        let transformed = normalized.iter().map(|(_, _, c)| shape.transform(c)).collect();
        Ok(Prepared {
            normalized,
            scales,
            shape,
            transformed,
        })
    }

    pub fn transformed(&self, i: usize, j: usize) -> &Curve {
        &self.transformed[i * self.normalized.p() + j]
    }

    fn transformed_component(&self, j: usize) -> Vec<&Curve> {
        (0..self.normalized.n())
            .map(|i| self.transformed(i, j))
            .collect()
    }
}

/// Warp `w` with `template ∘ w ≈ target`, both already monotone
/// (non-decreasing). Flat stretches of the template are broken by a tiny
/// linear slope.
pub fn warp_between(template: &Curve, target: &Curve) -> Result<WarpingCurve> {
    let grid = template.grid();
    if target.grid() != grid {
        return Err(LdmError::GridMismatch);
    }
    let xs = grid.points();
    let ys = template.values();
    let (lo, hi) = ys
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let range = hi - lo;
    if range <= 0.0 {
        return Err(LdmError::degenerate("template is flat and cannot be inverted"));
    }
    let strict;
    let ys = if ys.windows(2).all(|w| w[1] > w[0]) {
        ys
    } else {
        let eps = FLAT_BREAK_EPS * range;
        strict = ys
            .iter()
            .zip(xs)
            .map(|(v, t)| v + eps * (t - xs[0]))
            .collect::<Vec<_>>();
        &strict[..]
    };
    let w: Vec<f64> = target
        .values()
        .iter()
        .map(|&v| inverse_at(xs, ys, v))
        .collect();
    WarpingCurve::project(grid, &w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaEstimate {
    pub curves: Vec<Curve>,
    /// Individual selected as median in each component.
    pub indices: Vec<usize>,
    /// Components whose curves are all identical.
    pub degenerate: Vec<usize>,
}

/// Component patterns `gamma_hat[j]` as depth medians of each component.
pub fn estimate_gamma(prep: &Prepared, cfg: &EstimationConfig) -> Result<GammaEstimate> {
    let sample = &prep.normalized;
    if sample.n() < 2 {
        return Err(LdmError::arg("component patterns need at least 2 individuals"));
    }
    let mut curves = Vec::with_capacity(sample.p());
    let mut indices = Vec::with_capacity(sample.p());
    let mut degenerate = Vec::new();
    for j in 0..sample.p() {
        let raw = sample.component(j);
        if raw.iter().all(|c| c.values() == raw[0].values()) {
            degenerate.push(j);
            indices.push(0);
            curves.push(raw[0].clone());
            continue;
        }
        let idx = depth::depth_median(&prep.transformed_component(j), cfg.depth_method)?;
        indices.push(idx);
        curves.push(raw[idx].clone());
    }
    Ok(GammaEstimate {
        curves,
        indices,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarpEstimate {
    pub h: Vec<WarpingCurve>,
    /// `componentwise[i][j]`; identity for skipped components.
    pub componentwise: Vec<Vec<WarpingCurve>>,
    /// Components whose pattern could not be inverted.
    pub skipped: Vec<usize>,
}

/// Individual warps from the component patterns.
pub fn estimate_h(
    prep: &Prepared,
    gamma: &GammaEstimate,
    cfg: &EstimationConfig,
) -> Result<WarpEstimate> {
    let sample = &prep.normalized;
    let grid = sample.grid();
    let (n, p) = (sample.n(), sample.p());
    let templates: Vec<Curve> = gamma.curves.iter().map(|g| prep.shape.transform(g)).collect();

    let mut skipped = Vec::new();
    let mut componentwise = vec![Vec::with_capacity(p); n];
    for (j, template) in templates.iter().enumerate() {
        let mut column = Vec::with_capacity(n);
        let mut ok = true;
        for i in 0..n {
            match warp_between(template, prep.transformed(i, j)) {
                Ok(w) => column.push(w),
                Err(LdmError::Degenerate(_)) => {
                    ok = false;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if !ok {
            skipped.push(j);
            column = vec![WarpingCurve::identity(grid); n];
        }
        for (i, w) in column.into_iter().enumerate() {
            componentwise[i].push(w);
        }
    }
    if skipped.len() == p {
        return Err(LdmError::degenerate(
            "no component pattern is invertible after monotonization",
        ));
    }
    let active: Vec<usize> = (0..p).filter(|j| !skipped.contains(j)).collect();
    let h = componentwise
        .iter()
        .map(|row| {
            let warps: Vec<&WarpingCurve> = active.iter().map(|&j| &row[j]).collect();
            aggregate(grid, &warps, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WarpEstimate {
        h,
        componentwise,
        skipped,
    })
}

fn mean_warp(grid: &Grid, warps: &[&WarpingCurve]) -> Result<WarpingCurve> {
    let m = warps.len() as f64;
    let y: Vec<f64> = (0..grid.len())
        .map(|k| warps.iter().map(|w| w.values()[k]).sum::<f64>() / m)
        .collect();
    WarpingCurve::project(grid, &y)
}

fn aggregate(grid: &Grid, warps: &[&WarpingCurve], cfg: &EstimationConfig) -> Result<WarpingCurve> {
    if warps.len() == 1 {
        return Ok(warps[0].clone());
    }
    match cfg.h_aggregation {
        Aggregation::Mean => mean_warp(grid, warps),
        Aggregation::Median => {
            let idx = depth::depth_median(warps, cfg.depth_method)?;
            Ok(warps[idx].clone())
        }
        Aggregation::Trimmed(alpha) => {
            let drop = (alpha * warps.len() as f64).floor() as usize;
            if drop == 0 {
                return mean_warp(grid, warps);
            }
            let d = depth::modified_band_depth(warps)?;
            let mut order: Vec<usize> = (0..warps.len()).collect();
            order.sort_by(|&a, &b| d.values[a].total_cmp(&d.values[b]));
            let mut keep: Vec<usize> = order[drop..].to_vec();
            keep.sort_unstable();
            let kept: Vec<&WarpingCurve> = keep.iter().map(|&k| warps[k]).collect();
            mean_warp(grid, &kept)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaEstimate {
    pub curve: Curve,
    /// `(individual, component)` of the selected curve.
    pub index: (usize, usize),
}

/// Global amplitude as the depth median of the pooled (or randomly
/// subsampled) curves.
pub fn estimate_lambda(prep: &Prepared, cfg: &EstimationConfig) -> Result<LambdaEstimate> {
    let sample = &prep.normalized;
    let (n, p) = (sample.n(), sample.p());
    let members: Vec<(usize, usize)> = match cfg.lambda_pool {
        LambdaPool::Pooled => (0..n).flat_map(|i| (0..p).map(move |j| (i, j))).collect(),
        LambdaPool::RandomPerIndividual => {
            let streams = Substreams::new(cfg.seed);
            (0..n)
                .map(|i| {
                    let j = streams.stream(StreamKind::LambdaPool, i, 0).random_range(0..p);
                    (i, j)
                })
                .collect()
        }
    };
    if members.len() < 2 {
        return Err(LdmError::arg("amplitude estimation needs at least 2 curves"));
    }
    let pool: Vec<&Curve> = members.iter().map(|&(i, j)| prep.transformed(i, j)).collect();
    let k = depth::depth_median(&pool, cfg.depth_method)?;
    let (i, j) = members[k];
    Ok(LambdaEstimate {
        curve: sample.get(i, j).clone(),
        index: (i, j),
    })
}

/// Component distortions `psi_hat[j] = T(lambda_hat)^{-1} ∘ T(gamma_hat[j])`.
pub fn estimate_psi(lambda_hat: &Curve, gamma_hat: &[Curve], shape: Shape) -> Result<Vec<WarpingCurve>> {
    let template = shape.transform(lambda_hat);
    gamma_hat
        .iter()
        .map(|g| warp_between(&template, &shape.transform(g)))
        .collect()
}

/// `x_hat[i][j] = gamma_hat[j] ∘ h_hat[i]`.
pub fn reconstruct(gamma_hat: &[Curve], h_hat: &[WarpingCurve]) -> Result<Vec<Vec<Curve>>> {
    h_hat
        .iter()
        .map(|h| gamma_hat.iter().map(|g| g.compose(h)).collect())
        .collect()
}

/// Everything estimated from one sample. Curves are on the normalized scale.
#[derive(Debug, Clone, PartialEq)]
pub struct LdmEstimate {
    pub lambda_hat: Curve,
    pub gamma_hat: Vec<Curve>,
    pub psi_hat: Vec<WarpingCurve>,
    pub h_hat: Vec<WarpingCurve>,
    pub h_hat_componentwise: Vec<Vec<WarpingCurve>>,
    pub x_hat: Vec<Vec<Curve>>,
    /// Sup norms used to normalize each observed curve, `[i][j]`.
    pub scales: Vec<Vec<f64>>,
    pub gamma_indices: Vec<usize>,
    pub lambda_index: (usize, usize),
    pub shape: Shape,
    pub degenerate_components: Vec<usize>,
    pub skipped_components: Vec<usize>,
}

impl LdmEstimate {
    pub fn n(&self) -> usize {
        self.h_hat.len()
    }

    pub fn p(&self) -> usize {
        self.gamma_hat.len()
    }

    /// Reconstruction of `X_ij` on the scale of the observed curve.
    pub fn x_hat_observed_scale(&self, i: usize, j: usize) -> Curve {
        self.x_hat[i][j].scaled(self.scales[i][j])
    }

    /// Human-readable warnings about degenerate or skipped components.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        for j in &self.degenerate_components {
            out.push(format!("component {j}: all curves identical, median set to individual 0"));
        }
        for j in &self.skipped_components {
            out.push(format!(
                "component {j}: pattern not invertible, excluded from warp aggregation"
            ));
        }
        out
    }
}

/// Runs the complete estimation pipeline.
pub fn fit_ldm(sample: &MultiSample, cfg: &EstimationConfig) -> Result<LdmEstimate> {
    let prep = Prepared::new(sample, cfg).map_err(|e| e.context("preprocessing"))?;
    let gamma = estimate_gamma(&prep, cfg).map_err(|e| e.context("component patterns"))?;
    let warps = estimate_h(&prep, &gamma, cfg).map_err(|e| e.context("individual warps"))?;
    let lambda = estimate_lambda(&prep, cfg).map_err(|e| e.context("amplitude"))?;
    let psi = estimate_psi(&lambda.curve, &gamma.curves, prep.shape)
        .map_err(|e| e.context("component distortions"))?;
    let x_hat = reconstruct(&gamma.curves, &warps.h).map_err(|e| e.context("reconstruction"))?;
    let p = sample.p();
    let scales = prep.scales.chunks(p).map(|r| r.to_vec()).collect();
    Ok(LdmEstimate {
        lambda_hat: lambda.curve,
        gamma_hat: gamma.curves,
        psi_hat: psi,
        h_hat: warps.h,
        h_hat_componentwise: warps.componentwise,
        x_hat,
        scales,
        gamma_indices: gamma.indices,
        lambda_index: lambda.index,
        shape: prep.shape,
        degenerate_components: gamma.degenerate,
        skipped_components: warps.skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_smoothing() -> EstimationConfig {
        EstimationConfig {
            smoothing_window: 1,
            ..EstimationConfig::default()
        }
    }

    fn panel(rows: Vec<Vec<Curve>>) -> MultiSample {
        MultiSample::new(rows).unwrap()
    }

    #[test]
    fn identical_pair_recovers_curve() {
        let g = Grid::unit(40).unwrap();
        let c = Curve::from_fn(&g, |t| 1.0 + (5.0 * t).sin()).unwrap();
        let s = panel(vec![vec![c.clone()], vec![c.clone()]]);
        let est = fit_ldm(&s, &no_smoothing()).unwrap();
        let normalized = c.sup_normalize().unwrap();
        assert_eq!(est.lambda_hat, normalized);
        assert_eq!(est.gamma_hat[0], normalized);
        for h in &est.h_hat {
            assert!(h.sup_distance(&Curve::identity(&g)) <= 5e-3);
        }
        assert_eq!(est.degenerate_components, vec![0]);
        assert!(!est.diagnostics().is_empty());
    }

    #[test]
    fn identity_warps_give_identity_estimates() {
        let g = Grid::unit(100).unwrap();
        let gammas: Vec<Curve> = [0.7, 1.0, 1.6]
            .iter()
            .map(|&a| Curve::from_fn(&g, |t| 2.0 + (3.0 * t.powf(a)).sin()).unwrap())
            .collect();
        let rows = (0..4).map(|_| gammas.clone()).collect();
        let est = fit_ldm(&panel(rows), &no_smoothing()).unwrap();
        let id = Curve::identity(&g);
        for h in &est.h_hat {
            assert!(h.sup_distance(&id) <= 5e-3);
        }
        for (j, gh) in est.gamma_hat.iter().enumerate() {
            assert!(gh.sup_distance(&gammas[j].sup_normalize().unwrap()) < 1e-15);
        }
        // x_hat = gamma_hat ∘ h_hat exactly as computed
        for i in 0..4 {
            for j in 0..3 {
                assert_eq!(est.x_hat[i][j], est.gamma_hat[j].compose(&est.h_hat[i]).unwrap());
            }
        }
    }

    #[test]
    fn psi_of_lambda_against_itself_is_identity() {
        let g = Grid::unit(100).unwrap();
        let l = Curve::from_fn(&g, |t| (7.0 * t).cos() + t).unwrap();
        let psi = estimate_psi(&l, std::slice::from_ref(&l), Shape::Monotonized).unwrap();
        assert!(psi[0].sup_distance(&Curve::identity(&g)) <= 5e-3);
    }

    #[test]
    fn flat_lambda_is_rejected() {
        let g = Grid::unit(10).unwrap();
        let flat = Curve::constant(&g, 1.0).unwrap();
        let other = Curve::identity(&g);
        assert!(estimate_psi(&flat, &[other], Shape::Monotonized).is_err());
    }

    #[test]
    fn warp_between_recovers_known_warp() {
        let g = Grid::unit(200).unwrap();
        let gamma = Curve::from_fn(&g, |t| (4.0 * t).sin() + 2.0).unwrap();
        let h = WarpingCurve::from_fn(&g, |t| t.powf(1.4)).unwrap();
        let x = gamma.compose(&h).unwrap();
        let w = warp_between(&gamma.monotonize(), &x.monotonize()).unwrap();
        assert!(w.sup_distance(&h) < 1e-2);
        assert_eq!(w.values()[0], 0.0);
        assert_eq!(*w.values().last().unwrap(), 1.0);
    }

    #[test]
    fn config_validation() {
        let mut cfg = EstimationConfig::default();
        cfg.h_aggregation = Aggregation::Trimmed(0.5);
        assert!(cfg.validate().is_err());
        cfg.h_aggregation = Aggregation::Trimmed(0.25);
        cfg.smoothing_window = 4;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn never_monotonize_rejects_non_monotone_data() {
        let g = Grid::unit(20).unwrap();
        let c = Curve::from_fn(&g, |t| (6.0 * t).sin() + 2.0).unwrap();
        let s = panel(vec![vec![c.clone()], vec![c.scaled(1.1)]]);
        let cfg = EstimationConfig {
            monotonize: Monotonize::Never,
            ..no_smoothing()
        };
        assert!(fit_ldm(&s, &cfg).is_err());
    }

    #[test]
    fn decreasing_data_uses_raw_inversion() {
        let g = Grid::unit(50).unwrap();
        let rows = [0.8, 1.0, 1.25]
            .iter()
            .map(|&a| {
                vec![
                    Curve::from_fn(&g, |t| 3.0 - t.powf(a)).unwrap(),
                    Curve::from_fn(&g, |t| 3.0 - t.powf(a).powi(2)).unwrap(),
                ]
            })
            .collect();
        let est = fit_ldm(&panel(rows), &no_smoothing()).unwrap();
        assert_eq!(est.shape, Shape::Decreasing);
        assert_eq!(est.gamma_indices, vec![1, 1]);
    }
}
