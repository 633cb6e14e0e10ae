use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use csgraph::chern_simons::{Divergence, Verification};
use csgraph::{SolveStatus, VertexField, Vortex};

/// Pretty JSON with every float written as `{:.16e}` (17 significant digits).
struct SciFormatter<'a>(PrettyFormatter<'a>);

impl Formatter for SciFormatter<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        write!(w, "{:.16e}", value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf)?)
}

/// Writes to `path`, or stdout when absent.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, contents).with_context(|| format!("writing {}", p.display())),
        None => {
            io::stdout().write_all(contents.as_bytes())?;
            Ok(())
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub input_hashes: BTreeMap<String, String>,
    /// 0 unless timing was requested.
    pub wall_ms: u64,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: serde_json::Value) -> Self {
        Self {
            command: command.into(),
            tool_version: concat!("csgraph ", env!("CARGO_PKG_VERSION")).into(),
            seed,
            config,
            input_hashes: BTreeMap::new(),
            wall_ms: 0,
        }
    }
}

const TRACE_CAP: usize = 1000;

/// Trace subsampled to at most ~1000 entries; the last entry is always kept.
#[derive(Debug, Clone, Serialize)]
pub struct Trace {
    pub stride: usize,
    pub len: usize,
    pub values: Vec<f64>,
}

impl Trace {
    pub fn thin(full: &[f64]) -> Self {
        let stride = full.len().div_ceil(TRACE_CAP).max(1);
        let mut values: Vec<f64> = full.iter().step_by(stride).copied().collect();
        if !(full.len() - 1).is_multiple_of(stride) {
            values.extend(full.last());
        }
        Self {
            stride,
            len: full.len(),
            values,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionRecord {
    /// `maximal`, `minimizer` or `mountain_pass`.
    pub kind: &'static str,
    pub status: SolveStatus,
    pub graph_hash: String,
    pub lambda: f64,
    pub vortices: Vec<(usize, u32)>,
    pub u0: Vec<f64>,
    /// Solution, or the last iterate when not converged.
    pub v: Vec<f64>,
    pub residual: f64,
    pub energy: Option<f64>,
    pub energy_gap: Option<f64>,
    pub iterations: usize,
    pub verification: Option<Verification>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monotonicity_certified: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence: Option<Divergence>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_value_trace: Option<Trace>,
}

impl SolutionRecord {
    pub fn new(kind: &'static str, status: SolveStatus, ctx: &RunContext, v: &VertexField) -> Self {
        Self {
            kind,
            status,
            graph_hash: ctx.graph_hash.clone(),
            lambda: ctx.lambda,
            vortices: ctx.vortices.iter().map(|v| (v.vertex, v.multiplicity)).collect(),
            u0: ctx.u0.as_slice().to_vec(),
            v: v.as_slice().to_vec(),
            residual: f64::NAN,
            energy: None,
            energy_gap: None,
            iterations: 0,
            verification: None,
            monotonicity_certified: None,
            divergence: None,
            min_value_trace: None,
        }
    }
}

/// Shared data for the records of one run.
pub struct RunContext {
    pub graph_hash: String,
    pub lambda: f64,
    pub vortices: Vec<Vortex>,
    pub u0: VertexField,
}
