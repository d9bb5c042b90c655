//! File formats: wide CSV panels, curve tables, estimate bundles and flat
//! `key = value` configuration files.
//!
//! Floats are written in shortest round-trip form unless the
//! `LDM_PRECISION` environment variable asks for a fixed number of
//! significant digits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::curves::{impute_linear_at, Curve, Grid, MultiSample, Sampled, WarpingCurve};
use crate::depth::DepthMethod;
use crate::error::{LdmError, Result};
use crate::estimation::{Aggregation, EstimationConfig, LambdaPool, LdmEstimate, Monotonize};
use crate::simulation::SimConfig;

/// Environment variable holding the number of significant digits to write.
pub const PRECISION_ENV: &str = "LDM_PRECISION";

/// Significant digits requested through [`PRECISION_ENV`], if any.
pub fn precision() -> Option<usize> {
    std::env::var(PRECISION_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&d| (1..=17).contains(&d))
}

/// Formats a float for output.
pub fn fmt_f64(v: f64) -> String {
    fmt_f64_with(v, precision())
}

pub fn fmt_f64_with(v: f64, digits: Option<usize>) -> String {
    match digits {
        Some(d) if v.is_finite() => format!("{:.*e}", d - 1, v),
        _ => format!("{v}"),
    }
}

fn parse_error(path: &Path, line: usize, column: usize, message: impl Into<String>) -> LdmError {
    LdmError::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message: message.into(),
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| LdmError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| LdmError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| LdmError::io(path, e))
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan")
}

/// A CSV table: a time column followed by named value columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    /// `columns[c][k]`; `None` marks a missing cell.
    pub columns: Vec<Vec<Option<f64>>>,
}

/// Reads a CSV table with a header row. Line numbers in errors are 1-based
/// and count the header; columns are 1-based.
pub fn read_table(path: &Path) -> Result<Table> {
    let text = read_text(path)?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_error(path, 1, 1, "empty file"))?;
    let names: Vec<String> = header.split(',').skip(1).map(|s| s.trim().to_string()).collect();
    if names.is_empty() {
        return Err(parse_error(path, 1, 2, "no value columns"));
    }
    let width = names.len() + 1;
    let mut times = Vec::new();
    let mut columns = vec![Vec::new(); names.len()];
    for (line, row) in lines {
        let cells: Vec<&str> = row.split(',').map(str::trim).collect();
        if cells.len() != width {
            return Err(parse_error(
                path,
                line,
                cells.len().min(width) + 1,
                format!("expected {width} fields, found {}", cells.len()),
            ));
        }
        let t: f64 = cells[0]
            .parse()
            .map_err(|_| parse_error(path, line, 1, format!("bad time value '{}'", cells[0])))?;
        if !t.is_finite() {
            return Err(parse_error(path, line, 1, "time value is not finite"));
        }
        if let Some(&prev) = times.last() {
            if t <= prev {
                return Err(parse_error(path, line, 1, "time column is not strictly increasing"));
            }
        }
        times.push(t);
        for (c, cell) in cells[1..].iter().enumerate() {
            let v = if is_missing(cell) {
                None
            } else {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| parse_error(path, line, c + 2, format!("bad value '{cell}'")))?;
                if !v.is_finite() {
                    return Err(parse_error(path, line, c + 2, "value is not finite"));
                }
                Some(v)
            };
            columns[c].push(v);
        }
    }
    Ok(Table {
        times,
        names,
        columns,
    })
}

/// Writes a table of complete columns sampled on `grid`.
pub fn write_table(path: &Path, grid: &Grid, names: &[String], columns: &[&[f64]]) -> Result<()> {
    if names.len() != columns.len() {
        return Err(LdmError::arg("one name per column is required"));
    }
    if columns.iter().any(|c| c.len() != grid.len()) {
        return Err(LdmError::GridMismatch);
    }
    let digits = precision();
    let mut s = String::from("time");
    for n in names {
        s.push(',');
        s.push_str(n);
    }
    s.push('\n');
    for (k, t) in grid.points().iter().enumerate() {
        s.push_str(&fmt_f64_with(*t, digits));
        for c in columns {
            s.push(',');
            s.push_str(&fmt_f64_with(c[k], digits));
        }
        s.push('\n');
    }
    write_text(path, &s)
}

/// Column name of individual `i`, component `j` in a panel file.
pub fn panel_column(i: usize, j: usize) -> String {
    format!("i{i}_c{j}")
}

fn parse_panel_column(name: &str) -> Option<(usize, usize)> {
    let (i, j) = name.strip_prefix('i')?.split_once("_c")?;
    Some((i.parse().ok()?, j.parse().ok()?))
}

/// A panel file before imputation: `cells[i][j][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub times: Vec<f64>,
    pub cells: Vec<Vec<Vec<Option<f64>>>>,
}

impl Panel {
    pub fn n(&self) -> usize {
        self.cells.len()
    }

    pub fn p(&self) -> usize {
        self.cells.first().map_or(0, |r| r.len())
    }

    pub fn missing(&self) -> usize {
        self.cells.iter().flatten().flatten().filter(|v| v.is_none()).count()
    }
}

/// Reads a wide panel file whose value columns are named `i<idx>_c<idx>`.
pub fn read_panel(path: &Path) -> Result<Panel> {
    let table = read_table(path)?;
    let mut index = Vec::with_capacity(table.names.len());
    for (c, name) in table.names.iter().enumerate() {
        let ij = parse_panel_column(name).ok_or_else(|| {
            parse_error(path, 1, c + 2, format!("column '{name}' is not of the form i<idx>_c<idx>"))
        })?;
        index.push(ij);
    }
    let n = index.iter().map(|x| x.0 + 1).max().unwrap_or(0);
    let p = index.iter().map(|x| x.1 + 1).max().unwrap_or(0);
    let mut slots: Vec<Vec<Option<Vec<Option<f64>>>>> = vec![vec![None; p]; n];
    for (c, ((i, j), col)) in index.into_iter().zip(table.columns).enumerate() {
        if slots[i][j].replace(col).is_some() {
            return Err(parse_error(path, 1, c + 2, format!("duplicate column {}", panel_column(i, j))));
        }
    }
    let mut cells = Vec::with_capacity(n);
    for (i, row) in slots.into_iter().enumerate() {
        let mut out = Vec::with_capacity(p);
        for (j, col) in row.into_iter().enumerate() {
            out.push(col.ok_or_else(|| {
                parse_error(path, 1, 0, format!("column {} missing from the panel", panel_column(i, j)))
            })?);
        }
        cells.push(out);
    }
    Ok(Panel {
        times: table.times,
        cells,
    })
}

/// Loads a panel as a [`MultiSample`]. Gaps are filled by linear
/// interpolation when `impute` is set (and are an error otherwise); a moving
/// average of width `smooth_window` is applied afterwards.
pub fn load_panel(path: &Path, impute: bool, smooth_window: usize) -> Result<MultiSample> {
    let panel = read_panel(path)?;
    if panel.times.len() < 3 {
        return Err(parse_error(path, 1, 1, "a panel needs at least 3 time points"));
    }
    let grid = Grid::new(panel.times.clone())?;
    let mut rows = Vec::with_capacity(panel.n());
    for (i, row) in panel.cells.iter().enumerate() {
        let mut curves = Vec::with_capacity(row.len());
        for (j, col) in row.iter().enumerate() {
            let values = if impute {
                impute_linear_at(&panel.times, col).map_err(|e| {
                    parse_error(path, 0, 0, format!("{}: {e}", panel_column(i, j)))
                })?
            } else {
                col.iter()
                    .enumerate()
                    .map(|(k, v)| {
                        v.ok_or_else(|| {
                            parse_error(
                                path,
                                k + 2,
                                0,
                                format!("missing value in {} (enable imputation)", panel_column(i, j)),
                            )
                        })
                    })
                    .collect::<Result<Vec<_>>>()?
            };
            let mut c = Curve::new(grid.clone(), values)?;
            if smooth_window > 1 {
                c = c.moving_average(smooth_window)?;
            }
            curves.push(c);
        }
        rows.push(curves);
    }
    MultiSample::new(rows)
}

/// Writes an `n × p` family of sampled curves in panel layout.
pub fn write_panel_with<S: Sampled>(path: &Path, grid: &Grid, rows: &[Vec<S>]) -> Result<()> {
    let mut names = Vec::new();
    let mut cols: Vec<&[f64]> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            names.push(panel_column(i, j));
            cols.push(c.values());
        }
    }
    write_table(path, grid, &names, &cols)
}

pub fn write_panel(path: &Path, sample: &MultiSample) -> Result<()> {
    let rows: Vec<Vec<&Curve>> = (0..sample.n())
        .map(|i| (0..sample.p()).map(|j| sample.get(i, j)).collect())
        .collect();
    write_panel_with(path, sample.grid(), &rows)
}

/// Reads a panel of warping functions, such as `h_componentwise.csv`.
pub fn read_warp_panel(path: &Path) -> Result<Vec<Vec<WarpingCurve>>> {
    let panel = read_panel(path)?;
    let grid = Grid::new(panel.times.clone())?;
    panel
        .cells
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, col)| {
                    let y = col
                        .iter()
                        .enumerate()
                        .map(|(k, v)| {
                            v.ok_or_else(|| {
                                parse_error(path, k + 2, 0, format!("missing value in {}", panel_column(i, j)))
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    WarpingCurve::new(grid.clone(), y)
                })
                .collect()
        })
        .collect()
}

/// Reads the complete columns of a table as curves on its time grid.
pub fn read_curves(path: &Path) -> Result<(Vec<String>, Vec<Curve>)> {
    let table = read_table(path)?;
    let grid = Grid::new(table.times.clone())?;
    let curves = table
        .columns
        .into_iter()
        .zip(&table.names)
        .map(|(col, name)| {
            let y = col
                .into_iter()
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| parse_error(path, 0, 0, format!("missing value in column {name}")))?;
            Curve::new(grid.clone(), y)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((table.names, curves))
}

/// File names written by [`write_estimate`].
pub const ESTIMATE_FILES: [&str; 7] = [
    "lambda.csv",
    "gamma.csv",
    "psi.csv",
    "h.csv",
    "h_componentwise.csv",
    "xhat.csv",
    "scales.csv",
];

/// Writes every estimated curve into `dir`. `xhat.csv` holds the
/// reconstructions on the normalized scale; `scales.csv` holds the
/// per-curve normalization constants.
pub fn write_estimate(dir: &Path, est: &LdmEstimate) -> Result<Vec<PathBuf>> {
    let grid = est.lambda_hat.grid();
    let component_names: Vec<String> = (0..est.p()).map(|j| format!("c{j}")).collect();
    let paths: Vec<PathBuf> = ESTIMATE_FILES.iter().map(|f| dir.join(f)).collect();

    write_table(&paths[0], grid, &["lambda".to_string()], &[est.lambda_hat.values()])?;
    let gammas: Vec<&[f64]> = est.gamma_hat.iter().map(|c| c.values()).collect();
    write_table(&paths[1], grid, &component_names, &gammas)?;
    let psis: Vec<&[f64]> = est.psi_hat.iter().map(|c| c.values()).collect();
    write_table(&paths[2], grid, &component_names, &psis)?;
    let h_names: Vec<String> = (0..est.n()).map(|i| format!("i{i}")).collect();
    let hs: Vec<&[f64]> = est.h_hat.iter().map(|c| c.values()).collect();
    write_table(&paths[3], grid, &h_names, &hs)?;
    write_panel_with(&paths[4], grid, &est.h_hat_componentwise)?;
    write_panel_with(&paths[5], grid, &est.x_hat)?;

    let mut s = String::from("individual,component,scale\n");
    for (i, row) in est.scales.iter().enumerate() {
        for (j, a) in row.iter().enumerate() {
            let _ = writeln!(s, "{i},{j},{}", fmt_f64(*a));
        }
    }
    write_text(&paths[6], &s)?;
    Ok(paths)
}

/// Parsed `key = value[, value...]` file. Keys are lower-cased; the line
/// number of each key is kept for error messages.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    pub path: PathBuf,
    pub entries: BTreeMap<String, (usize, Vec<String>)>,
}

impl KeyValues {
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| parse_error(path, line, 1, "expected 'key = value'"))?;
            let key = key.trim().to_ascii_lowercase();
            if key.is_empty() {
                return Err(parse_error(path, line, 1, "empty key"));
            }
            let values: Vec<String> = value.split(',').map(|v| v.trim().to_string()).collect();
            if values.iter().any(String::is_empty) {
                return Err(parse_error(path, line, content.find('=').unwrap_or(0) + 2, "empty value"));
            }
            if entries.insert(key.clone(), (line, values)).is_some() {
                return Err(parse_error(path, line, 1, format!("duplicate key '{key}'")));
            }
        }
        Ok(KeyValues {
            path: path.to_path_buf(),
            entries,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(path, &read_text(path)?)
    }

    fn error(&self, key: &str, message: impl Into<String>) -> LdmError {
        let line = self.entries.get(key).map_or(0, |e| e.0);
        parse_error(&self.path, line, 1, format!("{key}: {}", message.into()))
    }
}

/// Keys accepted for simulation settings, with their aliases.
const SIM_KEYS: [(&str, &[&str]); 14] = [
    ("n", &[]),
    ("p", &[]),
    ("k", &[]),
    ("psi_setting", &[]),
    ("h_setting", &[]),
    ("sigma_w", &[]),
    ("eps_w", &[]),
    ("sigma_d", &[]),
    ("sigma_e", &[]),
    ("contamination_c", &["c", "contamination"]),
    ("m", &["m_iter"]),
    ("eps_w_psi", &[]),
    ("scale_mean", &[]),
    ("scale_sd", &[]),
];

const EST_KEYS: [&str; 5] = [
    "depth_method",
    "monotonize_first",
    "lambda_pool",
    "h_aggregation",
    "smoothing_window",
];

fn canonical_sim_key(key: &str) -> Option<&'static str> {
    SIM_KEYS
        .iter()
        .find(|(k, aliases)| *k == key || aliases.contains(&key))
        .map(|(k, _)| *k)
}

fn set_sim_field(cfg: &mut SimConfig, key: &str, value: &str) -> std::result::Result<(), String> {
    fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
        v.parse().map_err(|_| format!("cannot parse '{v}'"))
    }
    match key {
        "n" => cfg.n = num(value)?,
        "p" => cfg.p = num(value)?,
        "k" => cfg.k = num(value)?,
        "psi_setting" => cfg.psi_setting = num(value)?,
        "h_setting" => cfg.h_setting = num(value)?,
        "sigma_w" => cfg.sigma_w = num(value)?,
        "eps_w" => cfg.eps_w = num(value)?,
        "sigma_d" => cfg.sigma_d = num(value)?,
        "sigma_e" => cfg.sigma_e = num(value)?,
        "contamination_c" => cfg.contamination = num(value)?,
        "m" => cfg.m_iter = num(value)?,
        "eps_w_psi" => cfg.eps_w_psi = num(value)?,
        "scale_mean" => cfg.scale_mean = num(value)?,
        "scale_sd" => cfg.scale_sd = num(value)?,
        _ => return Err(format!("unknown key '{key}'")),
    }
    Ok(())
}

/// Simulation and estimation settings read from a configuration file.
/// List-valued simulation keys expand into the Cartesian product of their
/// values, in key order of the file's sorted key set.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sims: Vec<SimConfig>,
    pub estimation: EstimationConfig,
}

impl RunConfig {
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        for key in kv.entries.keys() {
            if key == "seed" {
                return Err(kv.error(key, "the seed is set with --seed, not in the config file"));
            }
            if canonical_sim_key(key).is_none() && !EST_KEYS.contains(&key.as_str()) {
                return Err(kv.error(key, "unknown key"));
            }
        }
        let mut sims = vec![SimConfig::default()];
        for (key, (_, values)) in &kv.entries {
            let Some(field) = canonical_sim_key(key) else {
                continue;
            };
            let mut next = Vec::with_capacity(sims.len() * values.len());
            for base in &sims {
                for v in values {
                    let mut cfg = base.clone();
                    set_sim_field(&mut cfg, field, v).map_err(|m| kv.error(key, m))?;
                    next.push(cfg);
                }
            }
            sims = next;
        }
        for cfg in &sims {
            cfg.validate()
                .map_err(|e| parse_error(&kv.path, 0, 0, format!("invalid setting: {e}")))?;
        }

        let mut est = EstimationConfig::default();
        for key in EST_KEYS {
            let Some((_, values)) = kv.entries.get(key) else {
                continue;
            };
            if values.len() != 1 {
                return Err(kv.error(key, "expects a single value"));
            }
            let v = values[0].to_ascii_lowercase();
            match key {
                "depth_method" => {
                    est.depth_method = DepthMethod::parse(&v).map_err(|e| kv.error(key, e.to_string()))?
                }
                "monotonize_first" => {
                    est.monotonize = match v.as_str() {
                        "auto" => Monotonize::Auto,
                        "true" | "on" | "yes" | "always" => Monotonize::Always,
                        "false" | "off" | "no" | "never" => Monotonize::Never,
                        _ => return Err(kv.error(key, format!("expected auto, true or false, got '{v}'"))),
                    }
                }
                "lambda_pool" => {
                    est.lambda_pool = match v.as_str() {
                        "pooled" => LambdaPool::Pooled,
                        "random" | "random-one-per-individual" => LambdaPool::RandomPerIndividual,
                        _ => return Err(kv.error(key, format!("expected pooled or random, got '{v}'"))),
                    }
                }
                "h_aggregation" => {
                    est.h_aggregation = parse_aggregation(&v).map_err(|m| kv.error(key, m))?
                }
                "smoothing_window" => {
                    est.smoothing_window = v.parse().map_err(|_| kv.error(key, format!("cannot parse '{v}'")))?
                }
                _ => unreachable!(),
            }
        }
        est.validate()
            .map_err(|e| parse_error(&kv.path, 0, 0, format!("invalid estimation setting: {e}")))?;
        Ok(RunConfig {
            sims,
            estimation: est,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_key_values(&KeyValues::read(path)?)
    }

    /// Reads a file that may only hold estimation keys.
    pub fn read_estimation(path: &Path) -> Result<EstimationConfig> {
        let kv = KeyValues::read(path)?;
        if let Some(key) = kv.entries.keys().find(|k| canonical_sim_key(k).is_some()) {
            return Err(kv.error(key, "simulation setting in an estimation config"));
        }
        Ok(Self::from_key_values(&kv)?.estimation)
    }
}

/// Parses `mean`, `median`, `trimmed:<alpha>` or `trimmed(<alpha>)`.
pub fn parse_aggregation(s: &str) -> std::result::Result<Aggregation, String> {
    let s = s.trim().to_ascii_lowercase();
    match s.as_str() {
        "mean" => return Ok(Aggregation::Mean),
        "median" => return Ok(Aggregation::Median),
        _ => {}
    }
    let alpha = s
        .strip_prefix("trimmed:")
        .or_else(|| s.strip_prefix("trimmed(").and_then(|r| r.strip_suffix(')')))
        .ok_or_else(|| format!("expected mean, median or trimmed:<alpha>, got '{s}'"))?;
    alpha
        .trim()
        .parse()
        .map(Aggregation::Trimmed)
        .map_err(|_| format!("bad trimming proportion '{alpha}'"))
}
