//! The JSON report document and its float formatting.
//!
//! All reals are serialized with 17 significant digits (`{:.16e}`), which
//! round-trips every finite f64 bit-exactly, so re-running a command with
//! the same configuration reproduces byte-identical analysis output.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

pub const SCHEMA: &str = "moment-spectra/1";

#[derive(Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: ConfigEcho,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<GapSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<BetaSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<DecompositionSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flags: Option<FlagsSection>,
    /// Wall-clock diagnostics; only present under --timings since they
    /// are inherently non-reproducible.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<&'static str, f64>>,
}

/// Echo of the fully resolved run configuration.
#[derive(Serialize, Clone)]
pub struct ConfigEcho {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub seed: u64,
    /// Generator behind seeded sampling, pinned for reproducibility.
    pub rng: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_override: Option<f64>,
    pub analytic: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
    pub full_spectrum: bool,
    pub dense_limit: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_dirs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub threads: usize,
}

#[derive(Serialize)]
pub struct SpectrumSection {
    /// D = d(d+1)/2.
    pub count: usize,
    pub trace: f64,
    pub top_eigenvalues: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full: Option<Vec<f64>>,
    pub degenerate_leading_pair: bool,
}

#[derive(Serialize)]
pub struct GapSection {
    pub lambda1: f64,
    pub lambda2: f64,
    pub b_frob_sq: f64,
    pub gamma: f64,
    pub s_upper_normalized_sq: f64,
    pub s_lower_normalized_sq: f64,
    pub beta_used: f64,
    pub beta_is_heuristic: bool,
    pub upper_is_unconditional: bool,
    pub trace: f64,
    pub eigenvalue_slacks: [f64; 3],
}

#[derive(Serialize)]
pub struct BetaSection {
    pub p: u32,
    pub lower: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certified_upper_p4: Option<f64>,
    pub directions_tested: usize,
    pub seed: u64,
}

#[derive(Serialize)]
pub struct DecompositionSection {
    pub b0: f64,
    pub alpha: f64,
    pub achieved: f64,
    pub achieved_normalized: f64,
    pub guarantee: f64,
    pub guarantee_is_heuristic: bool,
    pub beta_used: f64,
    pub degenerate_direction: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assignment_file: Option<String>,
    /// Exact separation from the subset oracle, attached when the input
    /// is small enough to enumerate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_s_exact: Option<f64>,
}

#[derive(Serialize)]
pub struct OracleSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_exact: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_argmax_mask: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_exact: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_argmax_direction: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_supremum: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_argmax_mask: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_bounds_from_s: Option<[f64; 2]>,
    /// Per-instance hashes keyed by method tag, hex encoded.
    pub instance_hashes: BTreeMap<&'static str, String>,
}

#[derive(Serialize)]
pub struct FlagsSection {
    /// Γ vanished: the measure behaves like a single point mass.
    pub near_point_mass: bool,
    pub degenerate_leading_pair: bool,
}

/// serde_json formatter writing every f64 with 17 significant digits.
struct SigDigits17<'a> {
    inner: serde_json::ser::PrettyFormatter<'a>,
}

impl serde_json::ser::Formatter for SigDigits17<'_> {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{value:.16e}")
    }

    // Everything else delegates to the pretty formatter.
    fn begin_array<W>(&mut self, w: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        serde_json::ser::Formatter::begin_array(&mut self.inner, w)
    }
    fn end_array<W>(&mut self, w: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        serde_json::ser::Formatter::end_array(&mut self.inner, w)
    }
    fn begin_array_value<W>(&mut self, w: &mut W, first: bool) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        serde_json::ser::Formatter::begin_array_value(&mut self.inner, w, first)
    }
    fn end_array_value<W>(&mut self, w: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        serde_json::ser::Formatter::end_array_value(&mut self.inner, w)
    }
    fn begin_object<W>(&mut self, w: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        serde_json::ser::Formatter::begin_object(&mut self.inner, w)
    }
    fn end_object<W>(&mut self, w: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        serde_json::ser::Formatter::end_object(&mut self.inner, w)
    }
    fn begin_object_key<W>(&mut self, w: &mut W, first: bool) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        serde_json::ser::Formatter::begin_object_key(&mut self.inner, w, first)
    }
    fn end_object_key<W>(&mut self, w: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        serde_json::ser::Formatter::end_object_key(&mut self.inner, w)
    }
    fn begin_object_value<W>(&mut self, w: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        serde_json::ser::Formatter::begin_object_value(&mut self.inner, w)
    }
    fn end_object_value<W>(&mut self, w: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        serde_json::ser::Formatter::end_object_value(&mut self.inner, w)
    }
}

impl Report {
    pub fn to_json(&self) -> String {
        let formatter = SigDigits17 {
            inner: serde_json::ser::PrettyFormatter::new(),
        };
        let mut buf = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut buf, formatter);
        self.serialize(&mut ser).expect("report serialization");
        buf.push(b'\n');
        String::from_utf8(buf).expect("json is utf-8")
    }
}
