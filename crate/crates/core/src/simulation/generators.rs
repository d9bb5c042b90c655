//! Templates and warping-function generators.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use statrs::function::beta::beta_reg;

use super::rng::{StreamKind, Substreams};
use crate::curves::{Curve, Grid, WarpingCurve};
use crate::error::{LdmError, Result};

/// Unnormalized main amplitude `20 + 15 t^2 - 5 cos(4 pi t) + 3 sin(pi t^2)`.
pub fn lambda0(t: f64) -> f64 {
    20.0 + 15.0 * t * t - 5.0 * (4.0 * PI * t).cos() + 3.0 * (PI * t * t).sin()
}

/// Unnormalized contaminating amplitude `t + exp(-25 (t - 0.5)^2)`.
pub fn lambda0_contaminated(t: f64) -> f64 {
    t + (-25.0 * (t - 0.5).powi(2)).exp()
}

/// Closed-form template divided by its sup norm over a grid.
#[derive(Debug, Clone, Copy)]
pub struct Template {
    f: fn(f64) -> f64,
    norm: f64,
}

impl Template {
    pub fn new(f: fn(f64) -> f64, grid: &Grid) -> Self {
        let norm = grid
            .points()
            .iter()
            .fold(0.0_f64, |m, &t| m.max(f(t).abs()));
        Template { f, norm }
    }

    pub fn clean(grid: &Grid) -> Self {
        Template::new(lambda0, grid)
    }

    pub fn contaminated(grid: &Grid) -> Self {
        Template::new(lambda0_contaminated, grid)
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.f)(t) / self.norm
    }

    pub fn sample(&self, grid: &Grid) -> Result<Curve> {
        Curve::from_fn(grid, |t| self.eval(t))
    }
}

/// Normalized main amplitude on `grid`.
pub fn gen_lambda(grid: &Grid) -> Result<Curve> {
    Template::clean(grid).sample(grid)
}

/// Normalized contaminating amplitude on `grid`.
pub fn gen_contaminated_lambda(grid: &Grid) -> Result<Curve> {
    Template::contaminated(grid).sample(grid)
}

/// A warping function of `[0, 1]` that can be evaluated anywhere.
#[derive(Debug, Clone, PartialEq)]
pub enum Warp {
    Identity,
    /// `h^{-1}(t) = (e^{t w} - 1) / (e^w - 1)`, so `h(t) = ln(1 + t (e^w - 1)) / w`.
    Exponential { w: f64 },
    /// `t -> (I_t(a, b) + t) / 2` with `I` the regularized incomplete beta.
    BetaMix { a: f64, b: f64 },
    /// Monotone table interpolated linearly; `xs` spans `[0, 1]`.
    Tabulated { xs: Vec<f64>, ys: Vec<f64> },
}

impl Warp {
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        match self {
            Warp::Identity => t,
            Warp::Exponential { w } => {
                if *w == 0.0 {
                    t
                } else {
                    (t * w.exp_m1()).ln_1p() / w
                }
            }
            Warp::BetaMix { a, b } => 0.5 * beta_reg(*a, *b, t) + 0.5 * t,
            Warp::Tabulated { xs, ys } => {
                let last = xs.len() - 1;
                if t >= xs[last] {
                    return ys[last];
                }
                let m = xs.partition_point(|&x| x <= t).max(1) - 1;
                let dx = xs[m + 1] - xs[m];
                if dx <= 0.0 {
                    return ys[m];
                }
                ys[m] + (t - xs[m]) / dx * (ys[m + 1] - ys[m])
            }
        }
    }

    /// Closed-form inverse where one exists.
    pub fn eval_inverse(&self, t: f64) -> Option<f64> {
        match self {
            Warp::Identity => Some(t),
            Warp::Exponential { w } => Some(exponential_inverse(*w, t)),
            _ => None,
        }
    }

    pub fn sample(&self, grid: &Grid) -> Result<WarpingCurve> {
        WarpingCurve::from_fn(grid, |t| self.eval(t))
    }

    /// Builds the warp whose inverse passes through `(s[m], inv[m])`.
    fn from_inverse_table(s: Vec<f64>, inv: Vec<f64>) -> Warp {
        Warp::Tabulated { xs: inv, ys: s }
    }
}

/// `(e^{t w} - 1) / (e^w - 1)`, the identity for `w = 0`.
pub fn exponential_inverse(w: f64, t: f64) -> f64 {
    if w == 0.0 {
        t
    } else {
        (t * w).exp_m1() / w.exp_m1()
    }
}

fn fine_points(grid: &Grid) -> Vec<f64> {
    let k = 10 * grid.k();
    let mut s: Vec<f64> = (0..=k).map(|m| m as f64 / k as f64).collect();
    s[k] = 1.0;
    s
}

/// The four deterministic component distortions of the first setting: two
/// beta mixtures and two reflections chosen so that the inverses average to
/// the identity.
pub fn gen_psi_setting1(grid: &Grid) -> Result<Vec<Warp>> {
    check_unit(grid)?;
    let base = [Warp::BetaMix { a: 2.0, b: 2.0 }, Warp::BetaMix { a: 2.0, b: 0.5 }];
    // psi_{j+2}^{-1}(u) = 2u - psi_j^{-1}(u); at u = psi_j(s) this is 2 psi_j(s) - s,
    // so the graph of psi_{j+2} passes through (2 psi_j(s) - s, psi_j(s)).
    let s = dense_unit(20_000);
    let reflected: Vec<Warp> = base
        .iter()
        .map(|w| {
            let u: Vec<f64> = s.iter().map(|&x| w.eval(x)).collect();
            let mut xs: Vec<f64> = u.iter().zip(&s).map(|(u, s)| 2.0 * u - s).collect();
            let last = xs.len() - 1;
            xs[0] = 0.0;
            xs[last] = 1.0;
            Warp::Tabulated { xs, ys: u }
        })
        .collect();
    Ok(base.into_iter().chain(reflected).collect())
}

/// Dense grid on `[0, 1]`, refined quadratically toward both endpoints where
/// the beta mixtures change fastest.
fn dense_unit(k: usize) -> Vec<f64> {
    let mut s: Vec<f64> = (0..=k)
        .map(|m| {
            let x = m as f64 / k as f64;
            // smoothstep-like map with zero slope at the ends
            x * x * (3.0 - 2.0 * x)
        })
        .collect();
    s[0] = 0.0;
    s[k] = 1.0;
    s
}

/// One step of the iterative warping procedure: the piecewise-linear map of
/// `[0, 1]` sending `u` to `v`.
pub fn breakpoint_map(u: f64, v: f64, t: f64) -> f64 {
    if t <= u {
        v / u * t
    } else {
        (1.0 - v) / (1.0 - u) * t + (v - u) / (1.0 - u)
    }
}

/// Draws `M` random breakpoints `u ~ U(10 eps, 1 - 10 eps)`,
/// `v ~ U(u - eps, u + eps)`.
pub fn draw_breakpoints(eps: f64, steps: usize, rng: &mut impl Rng) -> Vec<(f64, f64)> {
    (0..steps)
        .map(|_| {
            let u = rng.random_range(10.0 * eps..=1.0 - 10.0 * eps);
            let v = if eps > 0.0 {
                rng.random_range(u - eps..=u + eps)
            } else {
                u
            };
            (u, v)
        })
        .collect()
}

/// Composition of the breakpoint maps applied in order, evaluated at `t`.
pub fn iterate_breakpoints(steps: &[(f64, f64)], t: f64) -> f64 {
    steps.iter().fold(t, |x, &(u, v)| breakpoint_map(u, v, x))
}

/// Warp whose inverse is the `M`-fold random breakpoint iteration, tabulated
/// on a grid ten times finer than `grid`.
pub fn gen_iterated_warp(grid: &Grid, eps: f64, steps: usize, rng: &mut impl Rng) -> Result<Warp> {
    check_unit(grid)?;
    if !(eps >= 0.0 && 10.0 * eps < 0.5) {
        return Err(LdmError::arg(format!(
            "iterated warp needs 0 <= 10 eps < 0.5, got eps = {eps}"
        )));
    }
    if eps == 0.0 {
        return Ok(Warp::Identity);
    }
    let breaks = draw_breakpoints(eps, steps, rng);
    let s = fine_points(grid);
    let mut inv: Vec<f64> = s.iter().map(|&t| iterate_breakpoints(&breaks, t)).collect();
    let last = inv.len() - 1;
    inv[0] = 0.0;
    inv[last] = 1.0;
    Ok(Warp::from_inverse_table(s, inv))
}

/// Component distortions of the second setting, one independent iterated
/// warp per component.
pub fn gen_psi_setting2(
    grid: &Grid,
    p: usize,
    eps: f64,
    steps: usize,
    streams: &Substreams,
) -> Result<Vec<Warp>> {
    (0..p)
        .map(|j| gen_iterated_warp(grid, eps, steps, &mut streams.stream(StreamKind::Psi, j, 0)))
        .collect()
}

fn exponential_family(sigma: f64, rng: &mut impl Rng) -> Result<Warp> {
    if sigma < 0.0 || !sigma.is_finite() {
        return Err(LdmError::arg(format!("warp spread must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(Warp::Identity);
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| LdmError::arg(e.to_string()))?;
    Ok(Warp::Exponential {
        w: normal.sample(rng),
    })
}

/// Individual warps of the first setting, `w_i ~ N(0, sigma^2)`.
pub fn gen_h_setting1(sigma: f64, n: usize, streams: &Substreams) -> Result<Vec<Warp>> {
    (0..n)
        .map(|i| exponential_family(sigma, &mut streams.stream(StreamKind::Warp, i, 0)))
        .collect()
}

/// Individual warps of the second setting (iterated breakpoint maps).
pub fn gen_h_setting2(
    grid: &Grid,
    eps: f64,
    steps: usize,
    n: usize,
    streams: &Substreams,
) -> Result<Vec<Warp>> {
    (0..n)
        .map(|i| gen_iterated_warp(grid, eps, steps, &mut streams.stream(StreamKind::Warp, i, 0)))
        .collect()
}

/// Cross-component nuisance warps `r_ij`, `d_ij ~ N(0, sigma^2)`; row-major.
pub fn gen_nuisance(sigma: f64, n: usize, p: usize, streams: &Substreams) -> Result<Vec<Warp>> {
    (0..n * p)
        .map(|k| exponential_family(sigma, &mut streams.stream(StreamKind::Nuisance, k / p, k % p)))
        .collect()
}

fn check_unit(grid: &Grid) -> Result<()> {
    if grid.start() != 0.0 || grid.end() != 1.0 {
        return Err(LdmError::arg("simulation grids must span [0, 1]"));
    }
    Ok(())
}
