//! Warping hypograph ranking agreement (WHyRA).
//!
//! Ranks the per-component warp estimates `h_hat[i][j]` of every individual
//! by modified hypograph index within their component, then measures how well
//! those rankings agree across components. Agreement is expected when every
//! individual carries the same warp in all components.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::curves::WarpingCurve;
use crate::depth::mhi_all;
use crate::error::{LdmError, Result};
use crate::io::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Correlation {
    #[default]
    Pearson,
    Spearman,
}

/// Scatter data for one unordered pair of components.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSeries {
    pub j: usize,
    pub k: usize,
    /// `(mhi[i][j], mhi[i][k])` for every individual.
    pub points: Vec<(f64, f64)>,
    /// `None` when exactly one of the two columns has zero variance.
    pub correlation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WhyraResult {
    /// `mhi_matrix[i][j]`.
    pub mhi_matrix: Vec<Vec<f64>>,
    pub pairs: Vec<PairSeries>,
    pub avg_correlation: f64,
    /// Pairs left out of the average because one column was degenerate.
    pub skipped_pairs: usize,
}

impl WhyraResult {
    pub fn n(&self) -> usize {
        self.mhi_matrix.len()
    }

    pub fn p(&self) -> usize {
        self.mhi_matrix.first().map_or(0, |r| r.len())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.mhi_matrix.iter().map(|r| r[j]).collect()
    }
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    match (sxx > 0.0, syy > 0.0) {
        (true, true) => Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)),
        (false, false) => Some(1.0),
        _ => None,
    }
}

/// Ranks with ties sharing their average rank.
fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && x[order[end + 1]] == x[order[start]] {
            end += 1;
        }
        let avg = (start + end) as f64 / 2.0 + 1.0;
        for &o in &order[start..=end] {
            r[o] = avg;
        }
        start = end + 1;
    }
    r
}

/// Computes the MHI matrix, every pairwise scatter and the average pairwise
/// correlation. `h[i][j]` is the warp estimate of individual `i` in
/// component `j`.
pub fn whyra(h: &[Vec<WarpingCurve>], corr: Correlation) -> Result<WhyraResult> {
    let n = h.len();
    let p = h.first().map_or(0, |r| r.len());
    if p < 2 {
        return Err(LdmError::arg(format!("WHyRA needs p >= 2 components, got {p}")));
    }
    if let Some(i) = h.iter().position(|r| r.len() != p) {
        return Err(LdmError::arg(format!("individual {i} has a different component count")));
    }
    let columns = (0..p)
        .map(|j| {
            let sample: Vec<&WarpingCurve> = h.iter().map(|r| &r[j]).collect();
            mhi_all(&sample).map(|d| d.values)
        })
        .collect::<Result<Vec<_>>>()?;
    let mhi_matrix: Vec<Vec<f64>> = (0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect();

    let ranked: Vec<Vec<f64>> = match corr {
        Correlation::Pearson => columns.clone(),
        Correlation::Spearman => columns.iter().map(|c| ranks(c)).collect(),
    };
    let mut pairs = Vec::with_capacity(p * (p - 1) / 2);
    for j in 0..p {
        for k in j + 1..p {
            pairs.push(PairSeries {
                j,
                k,
                points: columns[j].iter().copied().zip(columns[k].iter().copied()).collect(),
                correlation: pearson(&ranked[j], &ranked[k]),
            });
        }
    }
    let used: Vec<f64> = pairs.iter().filter_map(|s| s.correlation).collect();
    if used.is_empty() {
        return Err(LdmError::degenerate(
            "every component pair has exactly one constant MHI column",
        ));
    }
    Ok(WhyraResult {
        avg_correlation: used.iter().sum::<f64>() / used.len() as f64,
        skipped_pairs: pairs.len() - used.len(),
        mhi_matrix,
        pairs,
    })
}

/// Blue-to-red color for a value in `[0, 1]`.
fn color(v: f64) -> String {
    let v = v.clamp(0.0, 1.0);
    let r = (255.0 * v).round() as u8;
    let b = (255.0 * (1.0 - v)).round() as u8;
    format!("#{r:02x}40{b:02x}")
}

/// Scatter-plot matrix; point colors follow the MHI in the first component.
pub fn render_svg(result: &WhyraResult) -> String {
    let p = result.p();
    let cell = 160.0;
    let pad = 12.0;
    let size = cell * p as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(s, r#"<rect width="{size}" height="{size}" fill="white"/>"#);
    let first = result.column(0);
    for row in 0..p {
        for col in 0..p {
            let (x0, y0) = (col as f64 * cell, row as f64 * cell);
            let _ = writeln!(
                s,
                r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#999999"/>"##,
                x0 + pad,
                y0 + pad,
                cell - 2.0 * pad,
                cell - 2.0 * pad
            );
            if row == col {
                let _ = writeln!(
                    s,
                    r#"<text x="{}" y="{}" font-size="14" text-anchor="middle">component {}</text>"#,
                    x0 + cell / 2.0,
                    y0 + cell / 2.0,
                    row
                );
                continue;
            }
            let span = cell - 2.0 * pad;
            for (i, r) in result.mhi_matrix.iter().enumerate() {
                let cx = x0 + pad + r[col] * span;
                let cy = y0 + pad + (1.0 - r[row]) * span;
                let _ = writeln!(
                    s,
                    r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="2.5" fill="{}"/>"#,
                    color(first[i])
                );
            }
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="4" y="{}" font-size="10">average correlation {:.4}</text>"#,
        size - 2.0,
        result.avg_correlation
    );
    s.push_str("</svg>\n");
    s
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| LdmError::io(path, e))
}

/// Writes `whyra_mhi.csv` (long form, `individual,component,mhi`),
/// `whyra_matrix.csv` (one row per individual), `whyra_pairs.csv` and,
/// optionally, `whyra.svg` into `dir`.
pub fn export_whyra(result: &WhyraResult, dir: &Path, svg: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| LdmError::io(dir, e))?;
    let mut written = Vec::new();

    let mut mhi = String::from("individual,component,mhi\n");
    for (i, row) in result.mhi_matrix.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let _ = writeln!(mhi, "{i},{j},{}", fmt_f64(*v));
        }
    }
    let path = dir.join("whyra_mhi.csv");
    write_file(&path, &mhi)?;
    written.push(path);

    let mut wide = String::from("individual");
    for j in 0..result.p() {
        let _ = write!(wide, ",mhi_c{j}");
    }
    wide.push('\n');
    for (i, row) in result.mhi_matrix.iter().enumerate() {
        let _ = write!(wide, "{i}");
        for v in row {
            let _ = write!(wide, ",{}", fmt_f64(*v));
        }
        wide.push('\n');
    }
    let path = dir.join("whyra_matrix.csv");
    write_file(&path, &wide)?;
    written.push(path);

    let mut pairs = String::from("component_j,component_k,individual,mhi_j,mhi_k\n");
    for series in &result.pairs {
        for (i, (a, b)) in series.points.iter().enumerate() {
            let _ = writeln!(pairs, "{},{},{i},{},{}", series.j, series.k, fmt_f64(*a), fmt_f64(*b));
        }
    }
    let path = dir.join("whyra_pairs.csv");
    write_file(&path, &pairs)?;
    written.push(path);

    if svg {
        let path = dir.join("whyra.svg");
        write_file(&path, &render_svg(result))?;
        written.push(path);
    }
    Ok(written)
}

/// Reads a `whyra_mhi.csv` file back into an `n × p` matrix.
pub fn read_mhi_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| LdmError::io(path, e))?;
    let parse_err = |line: usize, column: usize, message: String| LdmError::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message,
    };
    let mut entries = Vec::new();
    for (ln, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(parse_err(ln + 1, 1, format!("expected 3 fields, got {}", fields.len())));
        }
        let i: usize = fields[0]
            .trim()
            .parse()
            .map_err(|_| parse_err(ln + 1, 1, "bad individual index".into()))?;
        let j: usize = fields[1]
            .trim()
            .parse()
            .map_err(|_| parse_err(ln + 1, 2, "bad component index".into()))?;
        let v: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| parse_err(ln + 1, 3, "bad MHI value".into()))?;
        entries.push((i, j, v));
    }
    let n = entries.iter().map(|e| e.0 + 1).max().unwrap_or(0);
    let p = entries.iter().map(|e| e.1 + 1).max().unwrap_or(0);
    let mut m = vec![vec![f64::NAN; p]; n];
    for (i, j, v) in entries {
        m[i][j] = v;
    }
    if m.iter().flatten().any(|v| v.is_nan()) {
        return Err(parse_err(0, 0, "MHI table is not a complete rectangle".into()));
    }
    Ok(m)
}
