//! Monte Carlo benchmark over a grid of simulation settings.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use super::{metrics, simulate, Metrics, SimConfig};
use crate::error::{LdmError, Result};
use crate::estimation::{fit_ldm, EstimationConfig};

/// Outcome of one simulate-then-fit run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunResult {
    pub seed: u64,
    pub metrics: Metrics,
    /// Wall-clock seconds spent in the fit.
    pub seconds: f64,
    /// Whether the selected amplitude curve belongs to a contaminated individual.
    pub lambda_from_outlier: bool,
}

pub fn run_once(sim: &SimConfig, est: &EstimationConfig) -> Result<RunResult> {
    let (sample, truth) = simulate(sim)?;
    let start = Instant::now();
    let fit = fit_ldm(&sample, est)?;
    let seconds = start.elapsed().as_secs_f64();
    let m = metrics(&fit, &truth, &sample)?;
    Ok(RunResult {
        seed: sim.seed,
        metrics: m,
        seconds,
        lambda_from_outlier: truth.outlier_mask[fit.lambda_index.0],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Lise,
    Hmise,
    Xmise,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Lise, Metric::Hmise, Metric::Xmise];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Lise => "LISE",
            Metric::Hmise => "HMISE",
            Metric::Xmise => "XMISE",
        }
    }

    pub fn of(self, m: &Metrics) -> f64 {
        match self {
            Metric::Lise => m.lise,
            Metric::Hmise => m.hmise,
            Metric::Xmise => m.xmise,
        }
    }
}

/// Mean and sample standard deviation (`N - 1` denominator).
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// All runs of one configuration.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub config: SimConfig,
    pub runs: Vec<RunResult>,
}

impl CellResult {
    pub fn values(&self, metric: Metric) -> Vec<f64> {
        self.runs.iter().map(|r| metric.of(&r.metrics)).collect()
    }

    pub fn summary(&self, metric: Metric) -> (f64, f64) {
        mean_sd(&self.values(metric))
    }

    pub fn seconds_mean(&self) -> f64 {
        self.runs.iter().map(|r| r.seconds).sum::<f64>() / self.runs.len() as f64
    }
}

/// Runs every configuration once per seed (the config's own seed is
/// replaced). Runs are distributed over `jobs` worker threads; results keep
/// the input order.
pub fn benchmark(
    configs: &[SimConfig],
    est: &EstimationConfig,
    seeds: &[u64],
    jobs: usize,
) -> Result<Vec<CellResult>> {
    if seeds.len() < 2 {
        return Err(LdmError::arg("benchmark needs at least 2 runs"));
    }
    for c in configs {
        c.validate()?;
    }
    est.validate()?;
    let tasks: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    let work = |&(c, seed): &(usize, u64)| {
        let sim = SimConfig {
            seed,
            ..configs[c].clone()
        };
        run_once(&sim, est)
    };
    let results: Vec<Result<RunResult>> = if jobs <= 1 {
        tasks.iter().map(work).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| LdmError::arg(format!("cannot start {jobs} workers: {e}")))?;
        pool.install(|| tasks.par_iter().map(work).collect())
    };
    let mut results = results.into_iter();
    configs
        .iter()
        .map(|cfg| {
            let runs = results.by_ref().take(seeds.len()).collect::<Result<Vec<_>>>()?;
            Ok(CellResult {
                config: cfg.clone(),
                runs,
            })
        })
        .collect()
}

pub const CSV_HEADER: [&str; 12] = [
    "psi_setting",
    "h_setting",
    "sigma_or_eps",
    "sigma_D",
    "sigma_E",
    "c",
    "n",
    "p",
    "metric",
    "mean",
    "sd",
    "seconds_mean",
];

/// Writes one row per configuration and metric.
pub fn write_csv<W: Write>(cells: &[CellResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let to_io = |e: csv::Error| LdmError::io("benchmark table", e.into());
    w.write_record(CSV_HEADER).map_err(to_io)?;
    for cell in cells {
        let c = &cell.config;
        let secs = cell.seconds_mean();
        for metric in Metric::ALL {
            let (mean, sd) = cell.summary(metric);
            w.write_record([
                c.psi_setting.to_string(),
                c.h_setting.to_string(),
                c.warp_parameter().to_string(),
                c.sigma_d.to_string(),
                c.sigma_e.to_string(),
                c.contamination.to_string(),
                c.n.to_string(),
                c.p.to_string(),
                metric.name().to_string(),
                mean.to_string(),
                sd.to_string(),
                secs.to_string(),
            ])
            .map_err(to_io)?;
        }
    }
    w.flush().map_err(|e| LdmError::io("benchmark table", e))?;
    Ok(())
}

pub fn write_csv_file(cells: &[CellResult], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| LdmError::io(path, e))?;
    write_csv(cells, f)
}

/// Plain-text summary table: LISE and HMISE scaled by
/// 10^3, XMISE unscaled, each as `mean (sd)`.
pub fn summary_table(cells: &[CellResult]) -> String {
    let mut s = String::from(
        "psi h  warp    sigma_D sigma_E c     n    p  | LISE x1e3      HMISE x1e3     XMISE          | s/fit\n",
    );
    for cell in cells {
        let c = &cell.config;
        let (lm, ls) = cell.summary(Metric::Lise);
        let (hm, hs) = cell.summary(Metric::Hmise);
        let (xm, xs) = cell.summary(Metric::Xmise);
        s.push_str(&format!(
            "{:<3} {:<2} {:<7} {:<7} {:<7} {:<5} {:<4} {:<2} | {:>5.2} ({:>5.2})  {:>5.2} ({:>5.2})  {:>6.2} ({:>5.2}) | {:.3}\n",
            c.psi_setting,
            c.h_setting,
            c.warp_parameter(),
            c.sigma_d,
            c.sigma_e,
            c.contamination,
            c.n,
            c.p,
            lm * 1e3,
            ls * 1e3,
            hm * 1e3,
            hs * 1e3,
            xm,
            xs,
            cell.seconds_mean()
        ));
    }
    s
}
