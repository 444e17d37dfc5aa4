//! File output: CSV tables, JSON reports, gnuplot data files, a compact
//! binary grid format, optional SVG scatter plots and the run manifest.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! text file reads back to the identical `f64` values.
//!
//! # Binary grid layout
//!
//! All integers little-endian.
//!
//! | offset | size | content                                   |
//! |--------|------|-------------------------------------------|
//! | 0      | 8    | magic `WSLGRID1`                          |
//! | 8      | 8    | dtype tag `f64le` padded with NUL         |
//! | 16     | 8    | `rows` (u64, time samples)                |
//! | 24     | 8    | `cols` (u64, space samples)               |
//! | 32     | 8    | `fields` (u64)                            |
//! | 40     | ...  | `rows` times, `cols` positions, then each field as `rows x cols` row-major |

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::chaos::{LyapunovEstimate, Thresholds};
use crate::config::RunConfig;
use crate::exact::SolutionRow;
use crate::experiments::{CaseReport, RNG_ALGORITHM};
use crate::gpe::{Grid2, LabFrameDensity};
use crate::modulus::PoincareSection;
use crate::{Error, Result};

pub const GRID_MAGIC: &[u8; 8] = b"WSLGRID1";
const DTYPE_TAG: &[u8; 8] = b"f64le\0\0\0";

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(fs::File::create(path)?))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn write_rows(path: &Path, header: &str, sep: &str, rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{header}")?;
    for r in rows {
        writeln!(w, "{}", r.join(sep))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_exact_table_csv(path: &Path, rows: &[SolutionRow]) -> Result<()> {
    write_rows(
        path,
        "xi,density,phase,velocity,flow",
        ",",
        rows.iter().map(|r| {
            [r.xi, r.density, r.phase, r.velocity, r.flow]
                .iter()
                .map(f64::to_string)
                .collect()
        }),
    )
}

/// Rows `orbit_id,k,R,Rxi` for each section in order.
pub fn write_sections_csv(path: &Path, sections: &[(usize, &PoincareSection)]) -> Result<()> {
    write_rows(
        path,
        "orbit_id,k,R,Rxi",
        ",",
        sections.iter().flat_map(|(id, s)| {
            s.samples
                .iter()
                .map(move |p| vec![id.to_string(), p.k.to_string(), p.r.to_string(), p.r_xi.to_string()])
        }),
    )
}

/// Sidecar describing a section file: everything but the samples.
#[derive(Debug, Clone, Serialize)]
pub struct SectionMeta<'a> {
    pub orbit_id: usize,
    pub params: &'a crate::modulus::OrbitParams,
    pub initial: &'a crate::modulus::ModulusState,
    pub seed: Option<u64>,
    pub requested_periods: usize,
    pub dropped_transient: usize,
    pub samples: usize,
    pub termination: &'a Option<crate::modulus::Termination>,
    pub classification: Option<&'a crate::chaos::OrbitClass>,
}

/// One entry of a classification report.
#[derive(Debug, Clone, Serialize)]
pub struct ClassificationEntry<'a> {
    pub orbit_id: usize,
    pub params: &'a crate::modulus::OrbitParams,
    pub initial: [f64; 2],
    pub seed: u64,
    pub lambda: Option<f64>,
    pub occupancy: Option<f64>,
    pub label: crate::chaos::Label,
    pub thresholds: &'a Thresholds,
}

pub fn classification_entries(report: &CaseReport) -> Vec<ClassificationEntry<'_>> {
    report
        .orbits
        .iter()
        .map(|o| ClassificationEntry {
            orbit_id: o.orbit_id,
            params: &o.params,
            initial: o.initial,
            seed: o.seed,
            lambda: o.lambda,
            occupancy: o.occupancy,
            label: o.label,
            thresholds: &report.settings.thresholds,
        })
        .collect()
}

pub fn write_case_summary_csv(path: &Path, report: &CaseReport) -> Result<()> {
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    write_rows(
        path,
        "orbit_id,set_index,g1d,mu,j0,v0,R0,Rxi0,seed,lambda,occupancy,label,samples",
        ",",
        report.orbits.iter().map(|o| {
            vec![
                o.orbit_id.to_string(),
                o.set_index.to_string(),
                o.params.g1d.to_string(),
                o.params.mu.to_string(),
                o.params.j0.to_string(),
                o.params.v0.to_string(),
                o.initial[0].to_string(),
                o.initial[1].to_string(),
                o.seed.to_string(),
                opt(o.lambda),
                opt(o.occupancy),
                o.label.to_string(),
                o.samples.to_string(),
            ]
        }),
    )
}

/// Long-form `t,x,density,flow` table.
pub fn write_lab_grid_csv(path: &Path, lab: &LabFrameDensity) -> Result<()> {
    write_rows(
        path,
        "t,x,density,flow",
        ",",
        lab.t.iter().enumerate().flat_map(|(i, t)| {
            lab.x.iter().enumerate().map(move |(j, x)| {
                vec![
                    t.to_string(),
                    x.to_string(),
                    lab.density.get(i, j).to_string(),
                    lab.flow.get(i, j).to_string(),
                ]
            })
        }),
    )
}

/// Binary grid file, see the module docs for the layout.
pub fn write_grid_binary(path: &Path, t: &[f64], x: &[f64], fields: &[&Grid2]) -> Result<()> {
    for f in fields {
        if f.rows != t.len() || f.cols != x.len() {
            return Err(Error::InvalidInput(format!(
                "field is {}x{} but axes are {}x{}",
                f.rows,
                f.cols,
                t.len(),
                x.len()
            )));
        }
    }
    let mut w = create(path)?;
    w.write_all(GRID_MAGIC)?;
    w.write_all(DTYPE_TAG)?;
    for n in [t.len(), x.len(), fields.len()] {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for v in t.iter().chain(x).chain(fields.iter().flat_map(|f| f.data.iter())) {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryGrid {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub fields: Vec<Grid2>,
}

pub fn read_grid_binary(path: &Path) -> Result<BinaryGrid> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let bad = |m: &str| Error::Io(io::Error::new(io::ErrorKind::InvalidData, m.to_string()));
    if bytes.len() < 40 || &bytes[..8] != GRID_MAGIC || &bytes[8..16] != DTYPE_TAG {
        return Err(bad("not a grid file"));
    }
    let word = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().expect("8 bytes")) as usize;
    let (rows, cols, nf) = (word(16), word(24), word(32));
    let count = rows
        .checked_mul(cols)
        .and_then(|rc| rc.checked_mul(nf))
        .and_then(|v| v.checked_add(rows + cols))
        .ok_or_else(|| bad("header sizes overflow"))?;
    if bytes.len() != 40 + 8 * count {
        return Err(bad("grid file length does not match its header"));
    }
    let mut vals = bytes[40..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let t: Vec<f64> = vals.by_ref().take(rows).collect();
    let x: Vec<f64> = vals.by_ref().take(cols).collect();
    let fields = (0..nf)
        .map(|_| Grid2 {
            rows,
            cols,
            data: vals.by_ref().take(rows * cols).collect(),
        })
        .collect();
    Ok(BinaryGrid { t, x, fields })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Section,
    DensityMap,
    LyapunovTrace,
    /// Chaotic fraction per sweep cell.
    Sweep,
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            PlotKind::Section => "section",
            PlotKind::DensityMap => "density-map",
            PlotKind::LyapunovTrace => "lyapunov-trace",
            PlotKind::Sweep => "sweep",
        }
    }
}

/// First 12 hex digits of the SHA-256 of the parameters' JSON form.
pub fn params_hash<T: Serialize>(params: &T) -> Result<String> {
    let digest = Sha256::digest(serde_json::to_vec(params)?);
    Ok(digest[..6].iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    }))
}

/// `<kind>_<hash>_s<seed>.dat`
pub fn plot_file_name<T: Serialize>(kind: PlotKind, params: &T, seed: u64) -> Result<String> {
    Ok(format!("{}_{}_s{seed}.dat", kind.name(), params_hash(params)?))
}

/// Whitespace-separated columns with `#` comment header.
pub fn write_dat(path: &Path, comments: &[String], columns: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = create(path)?;
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "# {}", columns.join(" "))?;
    for r in rows {
        let line: Vec<String> = r.iter().map(f64::to_string).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

/// Rows of a `.dat` file, comments and blank lines skipped.
pub fn read_dat(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Config {
                line: i + 1,
                message: format!("bad number in {}: {e}", path.display()),
            })?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn section_rows(sections: &[(usize, &PoincareSection)]) -> Vec<Vec<f64>> {
    sections
        .iter()
        .flat_map(|(id, s)| s.samples.iter().map(move |p| vec![*id as f64, p.k as f64, p.r, p.r_xi]))
        .collect()
}

pub fn density_rows(lab: &LabFrameDensity) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(lab.t.len() * lab.x.len());
    for (i, t) in lab.t.iter().enumerate() {
        for (j, x) in lab.x.iter().enumerate() {
            out.push(vec![*t, *x, lab.density.get(i, j), lab.flow.get(i, j)]);
        }
    }
    out
}

pub fn lyapunov_rows(e: &LyapunovEstimate) -> Vec<Vec<f64>> {
    e.convergence_history
        .iter()
        .enumerate()
        .map(|(i, l)| vec![(i + 1) as f64 * e.renorm_interval, *l])
        .collect()
}

/// Write plot data into `dir` under a name derived from `params` and `seed`.
pub fn emit_plot_data<T: Serialize>(
    dir: &Path,
    kind: PlotKind,
    params: &T,
    seed: u64,
    columns: &[&str],
    rows: &[Vec<f64>],
) -> Result<PathBuf> {
    let path = dir.join(plot_file_name(kind, params, seed)?);
    let comments = vec![
        format!("kind: {}", kind.name()),
        format!("params: {}", serde_json::to_string(params)?),
        format!("seed: {seed}"),
    ];
    write_dat(&path, &comments, columns, rows)?;
    Ok(path)
}

/// Scatter plot of section points, one colour per orbit.
pub fn write_section_svg(path: &Path, sections: &[(usize, &PoincareSection)]) -> Result<()> {
    const SIZE: f64 = 480.0;
    const PAD: f64 = 30.0;
    const COLOURS: [&str; 10] = [
        "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    ];
    let pts = sections.iter().flat_map(|(_, s)| s.points());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (-1.0, 1.0, -1.0, 1.0);
    }
    let sx = (SIZE - 2.0 * PAD) / (x1 - x0).max(1e-12);
    let sy = (SIZE - 2.0 * PAD) / (y1 - y0).max(1e-12);
    let mut w = create(path)?;
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    )?;
    writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    writeln!(
        w,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">R</text>"#,
        SIZE / 2.0,
        SIZE - 8.0
    )?;
    writeln!(w, r#"<text x="10" y="{}" font-size="12">R_xi</text>"#, SIZE / 2.0)?;
    for (n, (_, s)) in sections.iter().enumerate() {
        let colour = COLOURS[n % COLOURS.len()];
        for (x, y) in s.points() {
            writeln!(
                w,
                r#"<circle cx="{:.2}" cy="{:.2}" r="0.7" fill="{colour}"/>"#,
                PAD + (x - x0) * sx,
                SIZE - PAD - (y - y0) * sy
            )?;
        }
    }
    writeln!(w, "</svg>")?;
    w.flush()?;
    Ok(())
}

/// Everything needed to rerun: resolved config with provenance of each value,
/// seed, generator, thresholds and crate version.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: &'a RunConfig,
    pub seed: u64,
    pub rng: &'static str,
    pub thresholds: Option<Thresholds>,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl<'a> Manifest<'a> {
    pub fn new(config: &'a RunConfig) -> Result<Self> {
        Ok(Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: config.command.to_string(),
            config,
            seed: config.seed()?,
            rng: RNG_ALGORITHM,
            thresholds: config.thresholds().ok(),
            outputs: Vec::new(),
            notes: Vec::new(),
        })
    }

    pub fn record(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("{}_manifest.json", self.command));
        write_json(&path, self)?;
        Ok(path)
    }
}
