//! Subcommands of the `ldm` tool.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use ldm_depth::io::{self, fmt_f64, RunConfig};
use ldm_depth::simulation::benchmark::{benchmark, summary_table, write_csv, write_csv_file};
use ldm_depth::simulation::{simulate, SimConfig};
use ldm_depth::whyra::{export_whyra, whyra, Correlation};
use ldm_depth::{fit_ldm, DepthMethod, EstimationConfig, LdmError, MultiSample, Sampled};

#[derive(Debug, Parser)]
#[command(name = "ldm", version, about = "Depth-based estimation for the latent deformation model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw one synthetic panel and its ground truth
    Simulate(SimulateArgs),
    /// Fit the model to a panel file
    Estimate(EstimateArgs),
    /// Monte Carlo error table over a grid of settings
    Benchmark(BenchmarkArgs),
    /// Ranking agreement of per-component warp estimates
    Whyra(WhyraArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Key-value simulation settings; one value per key
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing
    #[arg(long)]
    pub out: PathBuf,
    /// Seed for the simulation streams
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    /// Wide CSV panel: a time column, then columns named i<idx>_c<idx>
    #[arg(long)]
    pub data: PathBuf,
    /// Fill missing cells by linear interpolation
    #[arg(long)]
    pub impute: bool,
    /// Odd moving-average window applied after imputation
    #[arg(long)]
    pub smooth: Option<usize>,
    /// Optional key-value file with estimation settings
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Depth measure: bd, mbd, mhi or qid:<fraction>[:simplicial|halfspace]
    #[arg(long)]
    pub depth: Option<String>,
    /// Output directory, created if missing
    #[arg(long)]
    pub out: PathBuf,
    /// Seed for random amplitude-pool selection
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    /// Key-value settings; comma-separated values expand into a grid
    #[arg(long)]
    pub config: PathBuf,
    /// Monte Carlo runs per cell
    #[arg(long, default_value_t = 100)]
    pub runs: usize,
    /// Worker threads
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Base seed; run r uses seed + r
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV output file; the table goes to stdout when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the expanded settings grid and exit
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Clone, Args)]
pub struct WhyraArgs {
    /// Directory holding h_componentwise.csv from an estimate run
    #[arg(long)]
    pub h_dir: PathBuf,
    /// Output directory, created if missing
    #[arg(long)]
    pub out: PathBuf,
    /// Rank (Spearman) instead of Pearson correlation
    #[arg(long)]
    pub spearman: bool,
    /// Skip the SVG scatter matrix
    #[arg(long)]
    pub no_svg: bool,
}

/// Failure of a subcommand, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(LdmError),
    Numerical(LdmError),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Data(e) => write!(f, "data error: {e}"),
            CliError::Numerical(e) => write!(f, "numerical failure: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

type CliResult<T> = std::result::Result<T, CliError>;

fn config_err(e: LdmError) -> CliError {
    CliError::Usage(format!("configuration error: {e}"))
}

fn data_err(e: LdmError) -> CliError {
    CliError::Data(e)
}

/// Errors raised while computing: bad arguments are usage errors, file
/// trouble is a data error, everything else is numerical.
fn compute_err(e: LdmError) -> CliError {
    match e.root() {
        LdmError::Argument(_) => CliError::Usage(e.to_string()),
        LdmError::Io { .. } | LdmError::Parse { .. } => CliError::Data(e),
        _ => CliError::Numerical(e),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(LdmError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// Record of how an output directory was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub inputs: Vec<String>,
    pub simulation: Option<SimConfig>,
    pub estimation: Option<EstimationConfig>,
    pub impute: Option<bool>,
    pub smooth_window: Option<usize>,
    pub lambda_index: Option<(usize, usize)>,
    pub gamma_indices: Option<Vec<usize>>,
    pub diagnostics: Vec<String>,
    pub files: Vec<String>,
}

impl Manifest {
    fn new(command: &str, seed: u64) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            inputs: Vec::new(),
            simulation: None,
            estimation: None,
            impute: None,
            smooth_window: None,
            lambda_index: None,
            gamma_indices: None,
            diagnostics: Vec::new(),
            files: Vec::new(),
        }
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| {
            CliError::Data(LdmError::Parse {
                path: path.to_path_buf(),
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })
        })
    }

    fn write(&mut self, dir: &Path, files: &[PathBuf]) -> CliResult<PathBuf> {
        self.files = files
            .iter()
            .filter_map(|p| p.file_name())
            .map(|n| n.to_string_lossy().into_owned())
            .collect();
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Usage(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
        Ok(path)
    }
}

fn polyline(points: impl Iterator<Item = (f64, f64)>) -> String {
    let mut s = String::new();
    for (x, y) in points {
        let _ = write!(s, "{x:.2},{y:.2} ");
    }
    s.trim_end().to_string()
}

/// One plot per component with every individual's curve.
pub fn panel_svg(sample: &MultiSample) -> String {
    let (w, h, pad) = (240.0, 180.0, 10.0);
    let p = sample.p();
    let width = w * p as f64;
    let t = sample.grid().points();
    let (t0, t1) = (sample.grid().start(), sample.grid().end());
    let mut s = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{h}" viewBox="0 0 {width} {h}">"#
    );
    s.push('\n');
    let _ = writeln!(s, r#"<rect width="{width}" height="{h}" fill="white"/>"#);
    for j in 0..p {
        let curves = sample.component(j);
        let (lo, hi) = curves
            .iter()
            .flat_map(|c| c.values().iter().copied())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let span = if hi > lo { hi - lo } else { 1.0 };
        let x0 = w * j as f64;
        let _ = writeln!(
            s,
            r##"<rect x="{}" y="{pad}" width="{}" height="{}" fill="none" stroke="#999999"/>"##,
            x0 + pad,
            w - 2.0 * pad,
            h - 2.0 * pad
        );
        for c in curves {
            let pts = t.iter().zip(c.values()).map(|(&tk, &v)| {
                (
                    x0 + pad + (tk - t0) / (t1 - t0) * (w - 2.0 * pad),
                    h - pad - (v - lo) / span * (h - 2.0 * pad),
                )
            });
            let _ = writeln!(
                s,
                r##"<polyline fill="none" stroke="#1f4e99" stroke-opacity="0.4" points="{}"/>"##,
                polyline(pts)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11">component {j}</text>"#,
            x0 + pad + 4.0,
            pad + 12.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// An unreadable file is a data error; anything wrong inside it is usage.
fn config_read_err(e: LdmError) -> CliError {
    match e {
        LdmError::Io { .. } => CliError::Data(e),
        other => config_err(other),
    }
}

fn read_run_config(path: &Path) -> CliResult<RunConfig> {
    RunConfig::read(path).map_err(config_read_err)
}

/// Paths written by `simulate`.
pub fn run_simulate(args: &SimulateArgs) -> CliResult<Vec<PathBuf>> {
    let rc = read_run_config(&args.config)?;
    if rc.sims.len() != 1 {
        return Err(CliError::Usage(format!(
            "simulate needs a single setting, the config expands to {}",
            rc.sims.len()
        )));
    }
    let cfg = SimConfig {
        seed: args.seed,
        ..rc.sims[0].clone()
    };
    let (sample, truth) = simulate(&cfg).map_err(compute_err)?;
    let dir = &args.out;
    create_dir(dir)?;
    let grid = sample.grid();
    let mut files = Vec::new();

    let panel = dir.join("panel.csv");
    io::write_panel(&panel, &sample).map_err(data_err)?;
    files.push(panel);

    let lambda = dir.join("true_lambda.csv");
    io::write_table(&lambda, grid, &["lambda".into()], &[truth.lambda.values()]).map_err(data_err)?;
    files.push(lambda);

    let comp: Vec<String> = (0..cfg.p).map(|j| format!("c{j}")).collect();
    let gamma = dir.join("true_gamma.csv");
    let cols: Vec<&[f64]> = truth.gamma.iter().map(|c| c.values()).collect();
    io::write_table(&gamma, grid, &comp, &cols).map_err(data_err)?;
    files.push(gamma);

    let psi = dir.join("true_psi.csv");
    let cols: Vec<&[f64]> = truth.psi.iter().map(|c| c.values()).collect();
    io::write_table(&psi, grid, &comp, &cols).map_err(data_err)?;
    files.push(psi);

    let h = dir.join("true_h.csv");
    let names: Vec<String> = (0..cfg.n).map(|i| format!("i{i}")).collect();
    let cols: Vec<&[f64]> = truth.h.iter().map(|c| c.values()).collect();
    io::write_table(&h, grid, &names, &cols).map_err(data_err)?;
    files.push(h);

    let r = dir.join("true_r.csv");
    io::write_panel_with(&r, grid, &truth.r).map_err(data_err)?;
    files.push(r);

    let mut text = String::from("individual,component,a,outlier\n");
    for (i, row) in truth.a.iter().enumerate() {
        for (j, a) in row.iter().enumerate() {
            let _ = writeln!(text, "{i},{j},{},{}", fmt_f64(*a), truth.outlier_mask[i]);
        }
    }
    let scales = dir.join("true_scales.csv");
    std::fs::write(&scales, text).map_err(|e| io_err(&scales, e))?;
    files.push(scales);

    let svg = dir.join("panel.svg");
    std::fs::write(&svg, panel_svg(&sample)).map_err(|e| io_err(&svg, e))?;
    files.push(svg);

    let mut manifest = Manifest::new("simulate", args.seed);
    manifest.inputs.push(args.config.display().to_string());
    manifest.simulation = Some(cfg);
    let m = manifest.write(dir, &files)?;
    files.push(m);
    Ok(files)
}

/// Paths written by `estimate`.
pub fn run_estimate(args: &EstimateArgs) -> CliResult<Vec<PathBuf>> {
    let mut est = match &args.config {
        Some(path) => RunConfig::read_estimation(path).map_err(config_read_err)?,
        None => EstimationConfig::default(),
    };
    if let Some(d) = &args.depth {
        est.depth_method = DepthMethod::parse(d).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let smooth = args.smooth.unwrap_or(est.smoothing_window);
    if smooth == 0 || smooth.is_multiple_of(2) {
        return Err(CliError::Usage(format!("--smooth must be odd and positive, got {smooth}")));
    }
    est.seed = args.seed;
    // smoothing happens while loading, after imputation
    est.smoothing_window = 1;
    est.validate().map_err(config_err)?;

    let sample = io::load_panel(&args.data, args.impute, smooth).map_err(data_err)?;
    let fit = fit_ldm(&sample, &est).map_err(compute_err)?;
    create_dir(&args.out)?;
    let mut files = io::write_estimate(&args.out, &fit).map_err(data_err)?;

    let mut manifest = Manifest::new("estimate", args.seed);
    manifest.inputs.push(args.data.display().to_string());
    if let Some(c) = &args.config {
        manifest.inputs.push(c.display().to_string());
    }
    manifest.estimation = Some(est);
    manifest.impute = Some(args.impute);
    manifest.smooth_window = Some(smooth);
    manifest.lambda_index = Some(fit.lambda_index);
    manifest.gamma_indices = Some(fit.gamma_indices.clone());
    manifest.diagnostics = fit.diagnostics();
    let m = manifest.write(&args.out, &files)?;
    files.push(m);
    Ok(files)
}

/// One line per expanded setting.
pub fn describe_grid(sims: &[SimConfig]) -> String {
    let mut s = String::new();
    for (k, c) in sims.iter().enumerate() {
        let _ = writeln!(
            s,
            "{k}: n={} p={} K={} psi_setting={} h_setting={} sigma_W={} eps_W={} sigma_D={} sigma_E={} c={} M={}",
            c.n,
            c.p,
            c.k,
            c.psi_setting,
            c.h_setting,
            c.sigma_w,
            c.eps_w,
            c.sigma_d,
            c.sigma_e,
            c.contamination,
            c.m_iter
        );
    }
    s
}

/// Output of `benchmark`: the human-readable text and, without `--out`,
/// the CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub summary: String,
    pub csv: Option<String>,
}

pub fn run_benchmark(args: &BenchmarkArgs) -> CliResult<BenchmarkReport> {
    let rc = read_run_config(&args.config)?;
    if args.dry_run {
        return Ok(BenchmarkReport {
            summary: describe_grid(&rc.sims),
            csv: None,
        });
    }
    if args.runs < 2 {
        return Err(CliError::Usage("--runs must be at least 2".into()));
    }
    if args.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let seeds: Vec<u64> = (0..args.runs as u64).map(|r| args.seed.wrapping_add(r)).collect();
    let cells = benchmark(&rc.sims, &rc.estimation, &seeds, args.jobs).map_err(compute_err)?;
    let summary = summary_table(&cells);
    match &args.out {
        Some(path) => {
            write_csv_file(&cells, path).map_err(data_err)?;
            Ok(BenchmarkReport { summary, csv: None })
        }
        None => {
            let mut buf = Vec::new();
            write_csv(&cells, &mut buf).map_err(data_err)?;
            Ok(BenchmarkReport {
                summary,
                csv: Some(String::from_utf8_lossy(&buf).into_owned()),
            })
        }
    }
}

/// Paths written by `whyra` and the average correlation.
pub fn run_whyra(args: &WhyraArgs) -> CliResult<(Vec<PathBuf>, f64)> {
    let path = args.h_dir.join("h_componentwise.csv");
    let h = io::read_warp_panel(&path).map_err(data_err)?;
    let corr = if args.spearman {
        Correlation::Spearman
    } else {
        Correlation::Pearson
    };
    let result = whyra(&h, corr).map_err(compute_err)?;
    let files = export_whyra(&result, &args.out, !args.no_svg).map_err(data_err)?;
    Ok((files, result.avg_correlation))
}

/// Runs a parsed command, printing its report to stdout.
pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(a) => {
            for f in run_simulate(&a)? {
                println!("{}", f.display());
            }
        }
        Command::Estimate(a) => {
            for f in run_estimate(&a)? {
                println!("{}", f.display());
            }
        }
        Command::Benchmark(a) => {
            let report = run_benchmark(&a)?;
            match report.csv {
                Some(csv) => {
                    print!("{csv}");
                    eprint!("{}", report.summary);
                }
                None => print!("{}", report.summary),
            }
        }
        Command::Whyra(a) => {
            let (files, avg) = run_whyra(&a)?;
            for f in files {
                println!("{}", f.display());
            }
            println!("average correlation: {}", fmt_f64(avg));
        }
    }
    Ok(())
}
