//! Command-line front end: ingest samples or draw them from a model
//! family, compute fourth-moment spectra and gap diagnostics, run the
//! guaranteed decomposition, and expose the brute-force oracles.

mod io;
mod report;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use moment_spectra as ms;
use moment_spectra::{
    AnalyticModel, BetaSpec, Error as MsError, MomentOperator, SampleSet, SymMatrix,
};

use report::{
    BetaSection, ConfigEcho, DecompositionSection, FlagsSection, GapSection, OracleSection, Report,
    SpectrumSection, SCHEMA,
};

/// Exit codes: 1 usage, 2 data, 3 numeric.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<MsError> for CliError {
    fn from(e: MsError) -> Self {
        match e {
            MsError::InvalidParameter(_) => CliError::Usage(e.to_string()),
            MsError::Capacity(_)
            | MsError::Unsupported(_)
            | MsError::InvalidData(_)
            | MsError::InvalidDimension(_)
            | MsError::DimensionMismatch(_) => CliError::Data(e.to_string()),
            MsError::NonConvergence(_)
            | MsError::NotPsd(_)
            | MsError::InconsistentInputs(_)
            | MsError::DegenerateMeasure(_) => CliError::Numeric(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "moment-spectra",
    version,
    about = "Fourth-moment operator spectra, gap diagnostics, and measure decompositions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spectrum, gap statistic, separation bounds, and a β estimate.
    Analyze(AnalyzeArgs),
    /// Median-split decomposition with its guaranteed separation.
    Decompose(DecomposeArgs),
    /// Brute-force ground truth on desk-scale inputs.
    Oracle(OracleArgs),
    /// Draw samples from a model family into a CSV file.
    Synth(SynthArgs),
    /// Eigenvalues of the fourth-moment operator only.
    Spectrum(SpectrumArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelName {
    /// Standard normal coordinates.
    Gaussian,
    /// Uniform on the cube [-√3, √3]^d (unit variance).
    IidCube,
    /// Independent ±1 coordinates.
    IidSigns,
    /// Uniform on the unit sphere.
    Sphere,
    /// Uniform on the 2d points ±e₁…±e_d.
    DiscreteAxes,
    /// Equal mixture of N(0,P) and N(0,I−P), P projecting on the first
    /// d/2 coordinates.
    ProjectionMixture,
}

impl ModelName {
    fn as_str(self) -> &'static str {
        match self {
            ModelName::Gaussian => "gaussian",
            ModelName::IidCube => "iid-cube",
            ModelName::IidSigns => "iid-signs",
            ModelName::Sphere => "sphere",
            ModelName::DiscreteAxes => "discrete-axes",
            ModelName::ProjectionMixture => "projection-mixture",
        }
    }

    fn build(self, dim: usize) -> Result<AnalyticModel, CliError> {
        if dim == 0 {
            return Err(CliError::Usage("--d must be positive".into()));
        }
        Ok(match self {
            ModelName::Gaussian => AnalyticModel::Iid { dim, m4: 3.0 },
            ModelName::IidCube => AnalyticModel::Iid { dim, m4: 1.8 },
            ModelName::IidSigns => AnalyticModel::Iid { dim, m4: 1.0 },
            ModelName::Sphere => AnalyticModel::Sphere { dim },
            ModelName::DiscreteAxes => AnalyticModel::DiscreteAxes { dim },
            ModelName::ProjectionMixture => {
                AnalyticModel::projection_mixture_canonical(dim).map_err(CliError::from)?
            }
        })
    }
}

/// Where the measure comes from: a CSV file or a model family.
#[derive(Args, Clone)]
struct InputArgs {
    /// CSV file of samples (d columns, one row per point, `#` comments).
    #[arg(long, conflicts_with_all = ["model", "d", "n"])]
    input: Option<PathBuf>,

    /// Model family to draw from.
    #[arg(long, value_enum, requires = "d")]
    model: Option<ModelName>,

    /// Ambient dimension for --model.
    #[arg(long)]
    d: Option<usize>,

    /// Sample count for --model (defaults to 2d for discrete-axes).
    #[arg(long)]
    n: Option<usize>,

    /// RNG seed for --model sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl InputArgs {
    fn validate(&self) -> Result<(), CliError> {
        if self.input.is_none() && self.model.is_none() {
            return Err(CliError::Usage(
                "either --input or --model is required".into(),
            ));
        }
        Ok(())
    }

    fn model_with_dim(&self) -> Result<(AnalyticModel, usize), CliError> {
        let name = self.model.expect("checked by caller");
        let dim = self
            .d
            .ok_or_else(|| CliError::Usage("--d is required with --model".into()))?;
        Ok((name.build(dim)?, dim))
    }

    fn sample_count(&self, model: &AnalyticModel) -> usize {
        match (self.n, model) {
            (Some(n), _) => n,
            (None, AnalyticModel::DiscreteAxes { dim }) => 2 * dim,
            (None, _) => 10_000,
        }
    }

    fn resolve_samples(&self) -> Result<SampleSet, CliError> {
        self.validate()?;
        if let Some(path) = &self.input {
            return io::read_samples(path);
        }
        let (model, _) = self.model_with_dim()?;
        let n = self.sample_count(&model);
        ms::sample(&model, n, self.seed).map_err(CliError::from)
    }

    fn echo(&self, analytic: bool, dense_limit: usize, threads: usize) -> ConfigEcho {
        ConfigEcho {
            input: self.input.as_ref().map(|p| p.display().to_string()),
            model: self.model.map(|m| m.as_str().to_string()),
            dim: self.d,
            n: self.n,
            seed: self.seed,
            rng: ms::RNG_ALGORITHM,
            p: None,
            beta_override: None,
            analytic,
            top_k: None,
            full_spectrum: false,
            dense_limit,
            n_dirs: None,
            resolution: None,
            alpha: None,
            threads,
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: InputArgs,

    /// Use the model's closed-form operator instead of sampling.
    #[arg(long, conflicts_with = "input")]
    analytic: bool,

    /// Moment order for the β estimate.
    #[arg(long, default_value_t = 8, value_parser = parse_p)]
    p: u32,

    /// Caller-certified β (skips estimation; the lower bound is then
    /// rigorous rather than heuristic).
    #[arg(long)]
    beta: Option<f64>,

    /// Random directions for the β search.
    #[arg(long, default_value_t = 64)]
    n_dirs: usize,

    /// Emit all D eigenvalues instead of the leading ones.
    #[arg(long)]
    full_spectrum: bool,

    /// How many leading eigenvalues to report.
    #[arg(long, default_value_t = 10)]
    top_k: usize,

    /// Cap on the ambient dimension for dense operator storage.
    #[arg(long, default_value_t = ms::moments::DEFAULT_DENSE_LIMIT)]
    dense_limit: usize,

    #[arg(long)]
    output: Option<PathBuf>,

    /// Include wall-clock timings (non-reproducible) in the report.
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct DecomposeArgs {
    #[command(flatten)]
    input: InputArgs,

    /// Caller-certified β for the guarantee; estimated at p = 8 when
    /// absent (and flagged heuristic).
    #[arg(long)]
    beta: Option<f64>,

    /// Random directions for the β search.
    #[arg(long, default_value_t = 64)]
    n_dirs: usize,

    /// Cap on the ambient dimension for dense operator storage.
    #[arg(long, default_value_t = ms::moments::DEFAULT_DENSE_LIMIT)]
    dense_limit: usize,

    /// Write per-atom masses (w1, w2 columns) to this CSV file.
    #[arg(long)]
    assignment: Option<PathBuf>,

    #[arg(long)]
    output: Option<PathBuf>,

    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    input: InputArgs,

    /// Moment order for the grid β oracle.
    #[arg(long, default_value_t = 4, value_parser = parse_p)]
    p: u32,

    /// Sphere-grid resolution in radians.
    #[arg(long, default_value_t = 1e-3)]
    resolution: f64,

    /// Also compute the α-weighted supremum (α·n must be integral).
    #[arg(long)]
    alpha: Option<f64>,

    #[arg(long)]
    output: Option<PathBuf>,

    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// Model family to draw from.
    #[arg(long, value_enum)]
    model: ModelName,

    #[arg(long)]
    d: usize,

    /// Sample count (defaults to 2d for discrete-axes).
    #[arg(long)]
    n: Option<usize>,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output CSV path.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    input: InputArgs,

    #[arg(long, conflicts_with = "input")]
    analytic: bool,

    #[arg(long)]
    full_spectrum: bool,

    #[arg(long, default_value_t = 10)]
    top_k: usize,

    #[arg(long, default_value_t = ms::moments::DEFAULT_DENSE_LIMIT)]
    dense_limit: usize,

    #[arg(long)]
    output: Option<PathBuf>,

    #[arg(long)]
    timings: bool,
}

fn parse_p(s: &str) -> Result<u32, String> {
    match s {
        "4" => Ok(4),
        "8" => Ok(8),
        other => Err(format!("p must be 4 or 8, got {other}")),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            if e.use_stderr() {
                eprintln!("{e}");
                std::process::exit(1);
            }
            print!("{e}");
            std::process::exit(0);
        }
    };
    let threads = match ms::configure_threads_from_env() {
        Ok(t) => t,
        Err(msg) => {
            eprintln!("error: {msg}");
            std::process::exit(1);
        }
    };
    let result = match cli.command {
        Command::Analyze(args) => cmd_analyze(args, threads),
        Command::Decompose(args) => cmd_decompose(args, threads),
        Command::Oracle(args) => cmd_oracle(args, threads),
        Command::Synth(args) => cmd_synth(args, threads),
        Command::Spectrum(args) => cmd_spectrum(args, threads),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message());
        std::process::exit(e.exit_code());
    }
}

fn emit(report: &Report, output: Option<&PathBuf>) -> Result<(), CliError> {
    let json = report.to_json();
    match output {
        Some(path) => io::write_atomic(path, json.as_bytes()),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

/// Operator + second moment from either samples or the closed-form path.
fn resolve_operator(
    input: &InputArgs,
    analytic: bool,
    dense_limit: usize,
) -> Result<(MomentOperator, SymMatrix, Option<SampleSet>), CliError> {
    input.validate()?;
    if analytic {
        if input.model.is_none() {
            return Err(CliError::Usage("--analytic requires --model".into()));
        }
        let (model, _) = input.model_with_dim()?;
        let t = ms::analytic_operator(&model)?;
        let b = ms::analytic_second_moment(&model)?;
        Ok((t, b, None))
    } else {
        let s = input.resolve_samples()?;
        let t = ms::moments::fourth_moment_operator_with_limit(&s, dense_limit)?;
        let b = ms::second_moment(&s);
        Ok((t, b, Some(s)))
    }
}

fn spectrum_section(
    t: &MomentOperator,
    top_k: usize,
    full: bool,
) -> Result<SpectrumSection, CliError> {
    let dd = t.coord_dim();
    if full {
        let spec = ms::full_spectrum(t)?;
        Ok(SpectrumSection {
            count: dd,
            trace: t.trace(),
            top_eigenvalues: spec.eigenvalues()[..10.min(dd)].to_vec(),
            full: Some(spec.eigenvalues().to_vec()),
            degenerate_leading_pair: spec.is_degenerate(),
        })
    } else {
        let spec = ms::top_eigens(t, top_k.clamp(1, dd))?;
        Ok(SpectrumSection {
            count: dd,
            trace: t.trace(),
            top_eigenvalues: spec.eigenvalues().to_vec(),
            full: None,
            degenerate_leading_pair: spec.is_degenerate(),
        })
    }
}

fn cmd_analyze(args: AnalyzeArgs, threads: usize) -> Result<(), CliError> {
    let start = Instant::now();
    let mut timings: BTreeMap<&'static str, f64> = BTreeMap::new();

    let t0 = Instant::now();
    let (t, b, samples) = resolve_operator(&args.input, args.analytic, args.dense_limit)?;
    timings.insert("build", ms_since(t0));

    let t0 = Instant::now();
    let spectrum = spectrum_section(&t, args.top_k, args.full_spectrum)?;
    timings.insert("spectrum", ms_since(t0));

    let t0 = Instant::now();
    let (beta_section, beta_spec) = match (args.beta, &samples) {
        (Some(beta), _) => (None, BetaSpec::Certified(beta)),
        (None, Some(s)) => {
            let est = ms::estimate_beta(s, args.p, args.n_dirs, args.input.seed)?;
            let spec = BetaSpec::Heuristic(est.lower.max(1.0));
            (
                Some(BetaSection {
                    p: est.p,
                    lower: est.lower,
                    certified_upper_p4: est.certified_upper_p4,
                    directions_tested: est.directions_tested,
                    seed: est.seed,
                }),
                spec,
            )
        }
        // Closed-form path without samples: no estimation possible.
        (None, None) => (None, BetaSpec::Heuristic(1.0)),
    };
    timings.insert("beta", ms_since(t0));

    let t0 = Instant::now();
    let gap = ms::separation_bounds(&t, &b, beta_spec.value())?;
    timings.insert("gap", ms_since(t0));

    let flags = FlagsSection {
        near_point_mass: gap.gamma < 1e-12,
        degenerate_leading_pair: spectrum.degenerate_leading_pair,
    };

    let mut config = args.input.echo(args.analytic, args.dense_limit, threads);
    config.p = Some(args.p);
    config.beta_override = args.beta;
    config.top_k = Some(args.top_k);
    config.full_spectrum = args.full_spectrum;
    config.n_dirs = Some(args.n_dirs);

    timings.insert("total", ms_since(start));
    let report = Report {
        schema: SCHEMA,
        version: env!("CARGO_PKG_VERSION"),
        command: "analyze",
        config,
        spectrum: Some(spectrum),
        gap: Some(GapSection {
            lambda1: gap.lambda1,
            lambda2: gap.lambda2,
            b_frob_sq: gap.b_frob_sq,
            gamma: gap.gamma,
            s_upper_normalized_sq: gap.s_upper_normalized_sq,
            s_lower_normalized_sq: gap.s_lower_normalized_sq,
            beta_used: gap.beta_used,
            beta_is_heuristic: beta_spec.is_heuristic(),
            upper_is_unconditional: gap.upper_is_unconditional,
            trace: gap.trace_t,
            eigenvalue_slacks: gap.eigenvalue_slacks,
        }),
        beta: beta_section,
        decomposition: None,
        oracle: None,
        flags: Some(flags),
        timings_ms: args.timings.then_some(timings),
    };
    emit(&report, args.output.as_ref())
}

fn cmd_decompose(args: DecomposeArgs, threads: usize) -> Result<(), CliError> {
    let start = Instant::now();
    let mut timings: BTreeMap<&'static str, f64> = BTreeMap::new();

    let t0 = Instant::now();
    let s = args.input.resolve_samples()?;
    let t = ms::moments::fourth_moment_operator_with_limit(&s, args.dense_limit)?;
    let b = ms::second_moment(&s);
    timings.insert("build", ms_since(t0));

    let t0 = Instant::now();
    let beta_spec = match args.beta {
        Some(beta) => BetaSpec::Certified(beta),
        None => {
            let est = ms::estimate_beta(&s, 8, args.n_dirs, args.input.seed)?;
            BetaSpec::Heuristic(est.lower.max(1.0))
        }
    };
    timings.insert("beta", ms_since(t0));

    let t0 = Instant::now();
    let lead = ms::leading_direction(&t, &b)?;
    let mut dec = ms::median_split(&s, &lead.matrix)?;
    let guarantee_value = ms::guarantee_lower_bound(&t, &b, beta_spec.value())?;
    dec.degenerate_direction = lead.degenerate;
    timings.insert("decompose", ms_since(t0));

    let assignment_file = match &args.assignment {
        Some(path) => {
            let body = io::assignment_to_csv(&s, &dec.mass1, &dec.mass2);
            io::write_atomic(path, body.as_bytes())?;
            Some(path.display().to_string())
        }
        None => None,
    };

    // Cross-check against the exact enumeration when the input is small
    // enough.
    let oracle_s_exact = if s.len() <= ms::oracle::MAX_SUBSET_N && s.len() % 2 == 0 {
        ms::s_exact_small(&s).ok().map(|r| r.value)
    } else {
        None
    };

    let mut config = args.input.echo(false, args.dense_limit, threads);
    config.beta_override = args.beta;
    config.n_dirs = Some(args.n_dirs);

    timings.insert("total", ms_since(start));
    let report = Report {
        schema: SCHEMA,
        version: env!("CARGO_PKG_VERSION"),
        command: "decompose",
        config,
        spectrum: None,
        gap: None,
        beta: None,
        decomposition: Some(DecompositionSection {
            b0: dec.b0,
            alpha: dec.alpha,
            achieved: dec.achieved,
            achieved_normalized: dec.achieved / b.frobenius_norm(),
            guarantee: guarantee_value,
            guarantee_is_heuristic: beta_spec.is_heuristic(),
            beta_used: beta_spec.value(),
            degenerate_direction: dec.degenerate_direction,
            assignment_file,
            oracle_s_exact,
        }),
        oracle: None,
        flags: None,
        timings_ms: args.timings.then_some(timings),
    };
    emit(&report, args.output.as_ref())
}

fn cmd_oracle(args: OracleArgs, threads: usize) -> Result<(), CliError> {
    let start = Instant::now();
    let mut timings: BTreeMap<&'static str, f64> = BTreeMap::new();
    let s = args.input.resolve_samples()?;

    let mut hashes: BTreeMap<&'static str, String> = BTreeMap::new();
    let mut section = OracleSection {
        s_exact: None,
        s_argmax_mask: None,
        beta_exact: None,
        beta_argmax_direction: None,
        alpha_supremum: None,
        alpha_argmax_mask: None,
        alpha_bounds_from_s: None,
        instance_hashes: BTreeMap::new(),
    };

    let t0 = Instant::now();
    let s_result = ms::s_exact_small(&s)?;
    section.s_exact = Some(s_result.value);
    if let ms::ArgMax::SubsetMask(m) = s_result.argmax {
        section.s_argmax_mask = Some(m);
    }
    hashes.insert(s_result.method, format!("{:016x}", s_result.instance_hash));
    timings.insert("s_exact", ms_since(t0));

    if s.dim() == 2 || s.dim() == 3 {
        let t0 = Instant::now();
        let b_result = ms::beta_exact_small(&s, args.p, args.resolution)?;
        section.beta_exact = Some(b_result.value);
        if let ms::ArgMax::Direction(v) = b_result.argmax {
            section.beta_argmax_direction = Some(v);
        }
        hashes.insert(b_result.method, format!("{:016x}", b_result.instance_hash));
        timings.insert("beta_exact", ms_since(t0));
    }

    if let Some(alpha) = args.alpha {
        let t0 = Instant::now();
        let a_result = ms::s_exact_unequal(&s, alpha)?;
        section.alpha_supremum = Some(a_result.value);
        if let ms::ArgMax::SubsetMask(m) = a_result.argmax {
            section.alpha_argmax_mask = Some(m);
        }
        if let Some(s_exact) = section.s_exact {
            let bounds = ms::unequal_weight_bounds(s_exact, alpha)?;
            section.alpha_bounds_from_s = Some([bounds.lower, bounds.upper]);
        }
        hashes.insert(a_result.method, format!("{:016x}", a_result.instance_hash));
        timings.insert("alpha_supremum", ms_since(t0));
    }
    section.instance_hashes = hashes;

    let mut config = args
        .input
        .echo(false, ms::moments::DEFAULT_DENSE_LIMIT, threads);
    config.p = Some(args.p);
    config.resolution = Some(args.resolution);
    config.alpha = args.alpha;

    timings.insert("total", ms_since(start));
    let report = Report {
        schema: SCHEMA,
        version: env!("CARGO_PKG_VERSION"),
        command: "oracle",
        config,
        spectrum: None,
        gap: None,
        beta: None,
        decomposition: None,
        oracle: Some(section),
        flags: None,
        timings_ms: args.timings.then_some(timings),
    };
    emit(&report, args.output.as_ref())
}

fn cmd_synth(args: SynthArgs, _threads: usize) -> Result<(), CliError> {
    let model = args.model.build(args.d)?;
    let n = match (args.n, &model) {
        (Some(n), _) => n,
        (None, AnalyticModel::DiscreteAxes { dim }) => 2 * dim,
        (None, _) => {
            return Err(CliError::Usage(
                "--n is required for this model family".into(),
            ))
        }
    };
    let s = ms::sample(&model, n, args.seed)?;
    let header = format!(
        "# model={}, d={}, n={}, seed={}, rng={}, version={}\n",
        args.model.as_str(),
        args.d,
        n,
        args.seed,
        ms::RNG_ALGORITHM,
        env!("CARGO_PKG_VERSION"),
    );
    let body = io::samples_to_csv(&header, &s);
    io::write_atomic(&args.output, body.as_bytes())
}

fn cmd_spectrum(args: SpectrumArgs, threads: usize) -> Result<(), CliError> {
    let start = Instant::now();
    let mut timings: BTreeMap<&'static str, f64> = BTreeMap::new();
    let (t, _b, _s) = resolve_operator(&args.input, args.analytic, args.dense_limit)?;
    timings.insert("build", ms_since(start));

    let t0 = Instant::now();
    let spectrum = spectrum_section(&t, args.top_k, args.full_spectrum)?;
    timings.insert("spectrum", ms_since(t0));

    let mut config = args.input.echo(args.analytic, args.dense_limit, threads);
    config.top_k = Some(args.top_k);
    config.full_spectrum = args.full_spectrum;

    timings.insert("total", ms_since(start));
    let report = Report {
        schema: SCHEMA,
        version: env!("CARGO_PKG_VERSION"),
        command: "spectrum",
        config,
        spectrum: Some(spectrum),
        gap: None,
        beta: None,
        decomposition: None,
        oracle: None,
        flags: None,
        timings_ms: args.timings.then_some(timings),
    };
    emit(&report, args.output.as_ref())
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}
