//! Sample functional depths and depth-based medians.
//!
//! Every depth here is computed from pointwise rank counts, so any strictly
//! increasing transform applied to all curves leaves the depth values
//! bit-for-bit unchanged. Lebesgue measure on the domain is approximated by
//! the fraction of grid nodes.

use serde::{Deserialize, Serialize};

use crate::curves::{Curve, Sampled};
use crate::error::{LdmError, Result};

impl<T: Sampled + ?Sized> Sampled for &T {
    fn grid(&self) -> &crate::curves::Grid {
        (**self).grid()
    }
    fn values(&self) -> &[f64] {
        (**self).values()
    }
}

/// Rank-based depth of a point within a univariate empirical distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnivariateDepth {
    /// Fraction of sample pairs whose closed interval contains the point.
    Simplicial,
    /// `min(#{x_i <= x}, #{x_i >= x}) / n`.
    Halfspace,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DepthMethod {
    /// Band depth with bands formed by two curves.
    BandDepth,
    ModifiedBandDepth,
    /// Modified hypograph index.
    Mhi,
    /// Average of pointwise univariate depths over the nodes at or below the
    /// `fraction`-quantile of those depths. `fraction = 1` is the integrated
    /// depth, `fraction -> 0` the infimal depth.
    QuantileIntegrated {
        fraction: f64,
        univariate: UnivariateDepth,
    },
}

impl DepthMethod {
    pub fn name(&self) -> String {
        match self {
            DepthMethod::BandDepth => "bd".into(),
            DepthMethod::ModifiedBandDepth => "mbd".into(),
            DepthMethod::Mhi => "mhi".into(),
            DepthMethod::QuantileIntegrated {
                fraction,
                univariate,
            } => {
                let u = match univariate {
                    UnivariateDepth::Simplicial => "simplicial",
                    UnivariateDepth::Halfspace => "halfspace",
                };
                format!("qid:{fraction}:{u}")
            }
        }
    }

    /// Parses `bd`, `mbd`, `mhi`, or `qid:<fraction>[:simplicial|halfspace]`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "bd" | "band" => return Ok(DepthMethod::BandDepth),
            "mbd" | "modified_band" => return Ok(DepthMethod::ModifiedBandDepth),
            "mhi" => return Ok(DepthMethod::Mhi),
            _ => {}
        }
        let mut parts = s.split(':');
        if parts.next() != Some("qid") {
            return Err(LdmError::arg(format!("unknown depth method '{s}'")));
        }
        let fraction: f64 = parts
            .next()
            .unwrap_or("1")
            .parse()
            .map_err(|_| LdmError::arg(format!("bad QID fraction in '{s}'")))?;
        let univariate = match parts.next().unwrap_or("simplicial") {
            "simplicial" => UnivariateDepth::Simplicial,
            "halfspace" => UnivariateDepth::Halfspace,
            other => return Err(LdmError::arg(format!("unknown univariate depth '{other}'"))),
        };
        let m = DepthMethod::QuantileIntegrated {
            fraction,
            univariate,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if let DepthMethod::QuantileIntegrated { fraction, .. } = self {
            if !(*fraction > 0.0 && *fraction <= 1.0) {
                return Err(LdmError::arg(format!(
                    "QID fraction must lie in (0, 1], got {fraction}"
                )));
            }
        }
        Ok(())
    }
}

/// One depth value per sample curve.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthVector {
    pub values: Vec<f64>,
    pub method: DepthMethod,
}

impl DepthVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index of the largest depth; ties resolve to the smallest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate().skip(1) {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }
}

fn check_grids<C: Sampled>(sample: &[C]) -> Result<()> {
    if let Some(first) = sample.first() {
        if sample.iter().any(|c| c.grid() != first.grid()) {
            return Err(LdmError::GridMismatch);
        }
    }
    Ok(())
}

fn require_at_least<C: Sampled>(sample: &[C], min: usize) -> Result<()> {
    if sample.len() < min {
        return Err(LdmError::arg(format!(
            "depth needs at least {min} curves, got {}",
            sample.len()
        )));
    }
    check_grids(sample)
}

/// For every curve and node, the number of sample values strictly below and
/// strictly above it. Layout is `[i * nodes + t]`.
struct NodeCounts {
    nodes: usize,
    below: Vec<u32>,
    above: Vec<u32>,
}

impl NodeCounts {
    fn new<C: Sampled>(sample: &[C]) -> Self {
        let n = sample.len();
        let nodes = sample[0].values().len();
        let mut below = vec![0u32; n * nodes];
        let mut above = vec![0u32; n * nodes];
        let mut column = vec![0.0; n];
        for t in 0..nodes {
            for (slot, c) in column.iter_mut().zip(sample) {
                *slot = c.values()[t];
            }
            column.sort_by(f64::total_cmp);
            for (i, c) in sample.iter().enumerate() {
                let x = c.values()[t];
                let lt = column.partition_point(|&v| v < x);
                let le = column.partition_point(|&v| v <= x);
                below[i * nodes + t] = lt as u32;
                above[i * nodes + t] = (n - le) as u32;
            }
        }
        NodeCounts {
            nodes,
            below,
            above,
        }
    }

    /// Pairs `(a < b)` of sample curves whose band contains curve `i` at node `t`.
    fn pairs_containing(&self, n: usize, i: usize, t: usize) -> u64 {
        let b = self.below[i * self.nodes + t] as u64;
        let a = self.above[i * self.nodes + t] as u64;
        choose2(n as u64) - choose2(b) - choose2(a)
    }
}

fn choose2(m: u64) -> u64 {
    m * m.saturating_sub(1) / 2
}

/// Modified band depth: average over pairs of the fraction of nodes where the
/// curve lies inside the pair's band. Pairs range over the full sample.
pub fn modified_band_depth<C: Sampled>(sample: &[C]) -> Result<DepthVector> {
    require_at_least(sample, 2)?;
    let n = sample.len();
    let counts = NodeCounts::new(sample);
    let denom = (choose2(n as u64) * counts.nodes as u64) as f64;
    let values = (0..n)
        .map(|i| {
            let total: u64 = (0..counts.nodes)
                .map(|t| counts.pairs_containing(n, i, t))
                .sum();
            total as f64 / denom
        })
        .collect();
    Ok(DepthVector {
        values,
        method: DepthMethod::ModifiedBandDepth,
    })
}

/// Band depth: fraction of pairs whose band contains the curve at every node.
pub fn band_depth<C: Sampled>(sample: &[C]) -> Result<DepthVector> {
    require_at_least(sample, 2)?;
    let n = sample.len();
    let nodes = sample[0].values().len();
    let words = nodes.div_ceil(64);
    let mut below = vec![0u64; n * words];
    let mut above = vec![0u64; n * words];
    let pairs = choose2(n as u64) as f64;
    let mut values = Vec::with_capacity(n);
    for x in sample {
        below.iter_mut().for_each(|w| *w = 0);
        above.iter_mut().for_each(|w| *w = 0);
        for (i, c) in sample.iter().enumerate() {
            for (t, (&v, &xv)) in c.values().iter().zip(x.values()).enumerate() {
                let bit = 1u64 << (t % 64);
                if v < xv {
                    below[i * words + t / 64] |= bit;
                } else if v > xv {
                    above[i * words + t / 64] |= bit;
                }
            }
        }
        let mut inside = 0u64;
        for a in 0..n {
            let (ba, aa) = (&below[a * words..][..words], &above[a * words..][..words]);
            for b in a + 1..n {
                let (bb, ab) = (&below[b * words..][..words], &above[b * words..][..words]);
                let escapes = (0..words).any(|w| ba[w] & bb[w] != 0 || aa[w] & ab[w] != 0);
                if !escapes {
                    inside += 1;
                }
            }
        }
        values.push(inside as f64 / pairs);
    }
    Ok(DepthVector {
        values,
        method: DepthMethod::BandDepth,
    })
}

/// Modified hypograph index of `x` with respect to `sample`: average fraction
/// of nodes at which a sample curve lies on or below `x`.
pub fn mhi<C: Sampled, X: Sampled>(sample: &[C], x: &X) -> Result<f64> {
    if sample.is_empty() {
        return Err(LdmError::arg("MHI needs a non-empty sample"));
    }
    check_grids(sample)?;
    if x.grid() != sample[0].grid() {
        return Err(LdmError::GridMismatch);
    }
    let nodes = x.values().len();
    let below: u64 = sample
        .iter()
        .map(|c| {
            c.values()
                .iter()
                .zip(x.values())
                .filter(|(v, xv)| v <= xv)
                .count() as u64
        })
        .sum();
    Ok(below as f64 / (sample.len() * nodes) as f64)
}

/// MHI of every sample member within the sample.
pub fn mhi_all<C: Sampled>(sample: &[C]) -> Result<DepthVector> {
    require_at_least(sample, 1)?;
    let n = sample.len();
    let counts = NodeCounts::new(sample);
    let denom = (n * counts.nodes) as f64;
    let values = (0..n)
        .map(|i| {
            let le: u64 = (0..counts.nodes)
                .map(|t| (n as u64) - counts.above[i * counts.nodes + t] as u64)
                .sum();
            le as f64 / denom
        })
        .collect();
    Ok(DepthVector {
        values,
        method: DepthMethod::Mhi,
    })
}

/// Quantile integrated depth over a rank-based univariate depth.
pub fn quantile_integrated_depth<C: Sampled>(
    sample: &[C],
    fraction: f64,
    univariate: UnivariateDepth,
) -> Result<DepthVector> {
    let method = DepthMethod::QuantileIntegrated {
        fraction,
        univariate,
    };
    method.validate()?;
    require_at_least(sample, 2)?;
    let n = sample.len();
    let counts = NodeCounts::new(sample);
    let nodes = counts.nodes;
    let pairs = choose2(n as u64) as f64;
    let q_index = ((fraction * nodes as f64).ceil() as usize).clamp(1, nodes) - 1;
    let mut pointwise = vec![0.0; nodes];
    let mut sorted = vec![0.0; nodes];
    let values = (0..n)
        .map(|i| {
            for (t, d) in pointwise.iter_mut().enumerate() {
                *d = match univariate {
                    UnivariateDepth::Simplicial => counts.pairs_containing(n, i, t) as f64 / pairs,
                    UnivariateDepth::Halfspace => {
                        let le = n as u32 - counts.above[i * nodes + t];
                        let ge = n as u32 - counts.below[i * nodes + t];
                        le.min(ge) as f64 / n as f64
                    }
                };
            }
            sorted.copy_from_slice(&pointwise);
            sorted.sort_by(f64::total_cmp);
            let q = sorted[q_index];
            let (sum, count) = pointwise
                .iter()
                .filter(|&&d| d <= q)
                .fold((0.0, 0usize), |(s, c), &d| (s + d, c + 1));
            sum / count as f64
        })
        .collect();
    Ok(DepthVector { values, method })
}

/// Depth vector of every sample member under `method`.
pub fn depth<C: Sampled>(sample: &[C], method: DepthMethod) -> Result<DepthVector> {
    match method {
        DepthMethod::BandDepth => band_depth(sample),
        DepthMethod::ModifiedBandDepth => modified_band_depth(sample),
        DepthMethod::Mhi => mhi_all(sample),
        DepthMethod::QuantileIntegrated {
            fraction,
            univariate,
        } => quantile_integrated_depth(sample, fraction, univariate),
    }
}

/// Index of the deepest curve (smallest index among ties).
pub fn depth_median<C: Sampled>(sample: &[C], method: DepthMethod) -> Result<usize> {
    require_at_least(sample, 2)?;
    Ok(depth(sample, method)?.argmax())
}

/// Index of the curve whose total-variation monotonization is deepest within
/// the monotonized sample.
pub fn monotonized_depth_median(sample: &[&Curve], method: DepthMethod) -> Result<usize> {
    require_at_least(sample, 2)?;
    let monotone: Vec<Curve> = sample.iter().map(|c| c.monotonize()).collect();
    depth_median(&monotone, method)
}

/// Pointwise sample median (mean of the two middle values for even `n`).
pub fn pointwise_median<C: Sampled>(sample: &[C]) -> Result<Curve> {
    require_at_least(sample, 1)?;
    let grid = sample[0].grid().clone();
    let n = sample.len();
    let mut column = vec![0.0; n];
    let y = (0..grid.len())
        .map(|t| {
            for (slot, c) in column.iter_mut().zip(sample) {
                *slot = c.values()[t];
            }
            column.sort_by(f64::total_cmp);
            if n % 2 == 1 {
                column[n / 2]
            } else {
                0.5 * (column[n / 2 - 1] + column[n / 2])
            }
        })
        .collect();
    Curve::new(grid, y)
}
