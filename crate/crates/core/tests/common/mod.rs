//! Literal-loop reference implementations and random inputs shared by the
//! integration tests.
#![allow(dead_code)]

use ldm_depth::{Curve, Grid, UnivariateDepth};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn within(a: f64, b: f64, x: f64) -> bool {
    a.min(b) <= x && x <= a.max(b)
}

fn pairs(n: usize) -> f64 {
    (n * (n - 1) / 2) as f64
}

pub fn mbd(s: &[Vec<f64>]) -> Vec<f64> {
    let n = s.len();
    let k = s[0].len();
    (0..n)
        .map(|x| {
            let mut total = 0.0;
            for i in 0..n {
                for j in i + 1..n {
                    let mut inside = 0;
                    for t in 0..k {
                        if within(s[i][t], s[j][t], s[x][t]) {
                            inside += 1;
                        }
                    }
                    total += inside as f64 / k as f64;
                }
            }
            total / pairs(n)
        })
        .collect()
}

pub fn bd(s: &[Vec<f64>]) -> Vec<f64> {
    let n = s.len();
    let k = s[0].len();
    (0..n)
        .map(|x| {
            let mut count = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if (0..k).all(|t| within(s[i][t], s[j][t], s[x][t])) {
                        count += 1;
                    }
                }
            }
            count as f64 / pairs(n)
        })
        .collect()
}

pub fn mhi(s: &[Vec<f64>]) -> Vec<f64> {
    let n = s.len();
    let k = s[0].len();
    (0..n)
        .map(|x| {
            let mut total = 0.0;
            for i in 0..n {
                let le = (0..k).filter(|&t| s[i][t] <= s[x][t]).count();
                total += le as f64 / k as f64;
            }
            total / n as f64
        })
        .collect()
}

pub fn univariate(s: &[Vec<f64>], x: usize, t: usize, u: UnivariateDepth) -> f64 {
    let n = s.len();
    let v = s[x][t];
    match u {
        UnivariateDepth::Simplicial => {
            let mut c = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if within(s[i][t], s[j][t], v) {
                        c += 1;
                    }
                }
            }
            c as f64 / pairs(n)
        }
        UnivariateDepth::Halfspace => {
            let le = (0..n).filter(|&i| s[i][t] <= v).count();
            let ge = (0..n).filter(|&i| s[i][t] >= v).count();
            le.min(ge) as f64 / n as f64
        }
    }
}

/// Mean of the pointwise depths at nodes whose depth does not exceed the
/// lower empirical `fraction`-quantile of the pointwise depths.
pub fn qid(s: &[Vec<f64>], fraction: f64, u: UnivariateDepth) -> Vec<f64> {
    let k = s[0].len();
    (0..s.len())
        .map(|x| {
            let d: Vec<f64> = (0..k).map(|t| univariate(s, x, t, u)).collect();
            let mut sorted = d.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let idx = ((fraction * k as f64).ceil() as usize).max(1) - 1;
            let q = sorted[idx.min(k - 1)];
            let kept: Vec<f64> = d.into_iter().filter(|&v| v <= q).collect();
            kept.iter().sum::<f64>() / kept.len() as f64
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random-walk curves on a coarse lattice so that ties occur.
pub fn lattice_sample(rng: &mut impl Rng, n: usize, nodes: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let mut v = rng.random_range(-8i32..=8);
            (0..nodes)
                .map(|_| {
                    v = (v + rng.random_range(-3i32..=3)).clamp(-64, 64);
                    v as f64 / 32.0
                })
                .collect()
        })
        .collect()
}

pub fn to_curves(grid: &Grid, s: &[Vec<f64>]) -> Vec<Curve> {
    s.iter().map(|y| Curve::new(grid.clone(), y.clone()).unwrap()).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
