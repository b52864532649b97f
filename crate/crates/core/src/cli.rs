//! Command-line front end: argument parsing, validation, CSV/JSON outputs and run manifests.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fields::moment_vs_gff;
use crate::kasteleyn::{check_faces, inverse_kasteleyn, orient, partition_function, write_matrix_csv, DENSE_LIMIT};
use crate::lattice::{augment_with_mode, AugmentedDomain, CornerMode, Domain, DomainSpec, LatticePoint, MdCover};
use crate::linalg::C64;
use crate::mc::{
    chi_square_test, coloured_walk_experiment, colour_flip_probability, coupling_experiment, coupling_slope,
    enumerate_covers, mcmc_batch, sample_exact_batch, simulate_effective_walk, RngStream, ENUMERATION_CAP,
};
use crate::potential::pk_scaling_check;
use crate::walks::{aux_params, effective_jump_weights, odd_schur, potential_kernel_1d, verify_rw_representation};

pub const THREADS_ENV: &str = "FREEDIMER_THREADS";

#[derive(Parser, Debug)]
#[command(name = "freedimer", version, about = "Free boundary dimer model: exact kernels, walks and samplers")]
pub struct Cli {
    /// Worker threads (default: logical cores; FREEDIMER_THREADS overrides).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
pub enum Command {
    /// Build the augmented graph and dump K, D and K⁻¹.
    Build(BuildArgs),
    /// Partition function and one-edge probabilities.
    Stats(GraphArgs),
    /// Draw covers with the exact or Metropolis sampler.
    Sample(SampleArgs),
    /// Height moments against the Gaussian prediction.
    Heights(HeightsArgs),
    /// Potential-kernel differences against the continuum formula.
    Pk(PkArgs),
    /// Effective jump weights, 1-D potential kernel and walk residuals.
    Walks(WalksArgs),
    /// Monte Carlo experiments.
    Mc(McArgs),
    /// Schur, face-condition and walk-representation checks with a pass/fail table.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum ModeArg {
    /// corner legs carry z′ with no side triangles required
    Explicit,
    /// all legs carry z; use with --nside > 0
    Finite,
}

#[derive(Args, Debug, Serialize)]
pub struct GraphArgs {
    /// `rect:WxH` or a path to a domain JSON file.
    #[arg(long)]
    pub domain: String,
    #[arg(long, default_value_t = 1.0)]
    pub z: f64,
    /// Extra triangle pairs on each side of the free boundary.
    #[arg(long, default_value_t = 0)]
    pub nside: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Explicit)]
    pub mode: ModeArg,
    /// CSV output file; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct BuildArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Directory receiving K.csv, D.csv and Kinv.csv.
    #[arg(long)]
    pub dump_dir: Option<PathBuf>,
    /// Entries with modulus at or below this are omitted from dumps.
    #[arg(long, default_value_t = 1e-14)]
    pub threshold: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum SamplerKind {
    Exact,
    Mcmc,
}

#[derive(Args, Debug, Serialize)]
pub struct SampleArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SamplerKind::Exact)]
    pub method: SamplerKind,
    /// Metropolis steps between recorded covers.
    #[arg(long, default_value_t = 1000)]
    pub thin: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct HeightsArgs {
    /// JSON file `{"pairs": [[[ax, ay], [bx, by]], ...]}` in macroscopic coordinates.
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub z: f64,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also sample covers of `--domain` and write them as edge lists here.
    #[arg(long)]
    pub emit_samples: Option<PathBuf>,
    #[arg(long, requires = "emit_samples")]
    pub domain: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct PkArgs {
    #[arg(long, default_value_t = 1.0)]
    pub z: f64,
    /// Mesh sizes, coarse to fine.
    #[arg(long, num_args = 1.., default_values_t = vec![0.125, 0.0625])]
    pub delta: Vec<f64>,
    /// Minimal macroscopic height of the points.
    #[arg(long, default_value_t = 0.25)]
    pub rho: f64,
    /// JSON file `{"points": [{"x": [re, im], "y": [re, im], "direction": [dx, dy]}, ...]}`.
    #[arg(long)]
    pub points: PathBuf,
    /// Box radius in macroscopic units.
    #[arg(long, default_value_t = 4.0)]
    pub radius: f64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct WalksArgs {
    #[arg(long, default_value_t = 1.0)]
    pub z: f64,
    #[arg(long, default_value_t = 50)]
    pub kmax: usize,
    /// Side triangle pairs for the residual report.
    #[arg(long, default_value_t = 30)]
    pub nside: usize,
    /// Domain for the residual report.
    #[arg(long)]
    pub domain: Option<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// CSV file for the residual report.
    #[arg(long, requires = "domain")]
    pub residuals: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Experiment {
    Sampler,
    Walk,
    Coloured,
    Coupling,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum OutFormat {
    Csv,
    Json,
}

#[derive(Args, Debug, Serialize)]
pub struct McArgs {
    #[arg(long, value_enum)]
    pub experiment: Experiment,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    pub out: OutFormat,
    #[arg(long, default_value_t = 1.0)]
    pub z: f64,
    /// Domain for the sampler experiment.
    #[arg(long)]
    pub domain: Option<String>,
    #[arg(long, value_enum, default_value_t = SamplerKind::Exact)]
    pub method: SamplerKind,
    /// Flip probability of the coloured walk; derived from --z when absent.
    #[arg(long)]
    pub flip: Option<f64>,
    /// Target line of the coloured walk.
    #[arg(long, default_value_t = 4)]
    pub target: i64,
    /// Path length of the walk experiment.
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    /// Burn-in exponent b in r = √t / (ln t)^b.
    #[arg(long, default_value_t = 2.0)]
    pub b: f64,
    /// Horizons are 2^k for k in this inclusive range.
    #[arg(long, default_value_t = 8)]
    pub log2_min: u32,
    #[arg(long, default_value_t = 14)]
    pub log2_max: u32,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct VerifyArgs {
    #[arg(long)]
    pub domain: String,
    #[arg(long, default_value_t = 1.0)]
    pub z: f64,
    #[arg(long, default_value_t = 30)]
    pub nside: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a Command,
    config_hash: String,
    threads: usize,
    tolerances: BTreeMap<&'static str, f64>,
    outputs: Vec<String>,
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<usize> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        return match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Validation(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        };
    }
    match flag {
        Some(0) => Err(Error::Validation("--threads must be positive".into())),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let threads = thread_count(cli.threads)?;
    validate(&cli.command)?;
    // A global pool may already exist when called repeatedly in one process.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    let ctx = Ctx { command: &cli.command, threads };
    match &cli.command {
        Command::Build(a) => cmd_build(&ctx, a),
        Command::Stats(a) => cmd_stats(&ctx, a),
        Command::Sample(a) => cmd_sample(&ctx, a),
        Command::Heights(a) => cmd_heights(&ctx, a),
        Command::Pk(a) => cmd_pk(&ctx, a),
        Command::Walks(a) => cmd_walks(&ctx, a),
        Command::Mc(a) => cmd_mc(&ctx, a),
        Command::Verify(a) => cmd_verify(a),
    }
}

fn check_z(z: f64) -> Result<()> {
    if z > 0.0 && z.is_finite() {
        Ok(())
    } else {
        Err(Error::Validation(format!("--z must be positive and finite, got {z}")))
    }
}

fn check_delta(d: f64) -> Result<()> {
    if d > 0.0 && d < 1.0 {
        Ok(())
    } else {
        Err(Error::Validation(format!("--delta must lie in (0,1), got {d}")))
    }
}

fn validate(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Build(a) => {
            check_z(a.graph.z)?;
            if !(a.threshold >= 0.0) {
                return Err(Error::Validation("--threshold must be nonnegative".into()));
            }
        }
        Command::Stats(g) => check_z(g.z)?,
        Command::Sample(a) => {
            check_z(a.graph.z)?;
            if a.samples == 0 || a.thin == 0 {
                return Err(Error::Validation("--samples and --thin must be positive".into()));
            }
        }
        Command::Heights(a) => {
            check_z(a.z)?;
            check_delta(a.delta)?;
        }
        Command::Pk(a) => {
            check_z(a.z)?;
            if a.delta.is_empty() {
                return Err(Error::Validation("at least one --delta is required".into()));
            }
            for &d in &a.delta {
                check_delta(d)?;
            }
            if !(a.rho > 0.0) || !(a.radius > 0.0) {
                return Err(Error::Validation("--rho and --radius must be positive".into()));
            }
        }
        Command::Walks(a) => {
            check_z(a.z)?;
            if a.kmax == 0 {
                return Err(Error::Validation("--kmax must be positive".into()));
            }
        }
        Command::Mc(a) => {
            check_z(a.z)?;
            if a.trials == 0 {
                return Err(Error::Validation("--trials must be positive".into()));
            }
            if let Some(p) = a.flip {
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::Validation(format!("--flip must lie in (0,1), got {p}")));
                }
            }
            if a.target < 1 {
                return Err(Error::Validation("--target must be at least 1".into()));
            }
            if a.log2_min < 2 || a.log2_min > a.log2_max || a.log2_max > 30 {
                return Err(Error::Validation("need 2 <= --log2-min <= --log2-max <= 30".into()));
            }
            if !(a.b > 0.0) {
                return Err(Error::Validation("--b must be positive".into()));
            }
            if a.experiment == Experiment::Sampler && a.domain.is_none() {
                return Err(Error::Validation("the sampler experiment needs --domain".into()));
            }
        }
        Command::Verify(a) => check_z(a.z)?,
    }
    Ok(())
}

struct Ctx<'a> {
    command: &'a Command,
    threads: usize,
}

impl Ctx<'_> {
    fn config_hash(&self) -> Result<String> {
        let json = serde_json::to_vec(self.command)?;
        Ok(format!("{:x}", Sha256::digest(&json)))
    }

    fn write_manifest(&self, primary: &Path, outputs: &[&Path], tolerances: BTreeMap<&'static str, f64>) -> Result<()> {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            config_hash: self.config_hash()?,
            threads: self.threads,
            tolerances,
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        };
        let mut path = primary.as_os_str().to_owned();
        path.push(".manifest.json");
        let f = File::create(PathBuf::from(path))?;
        serde_json::to_writer_pretty(f, &manifest)?;
        Ok(())
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_rows<S: Serialize>(path: Option<&Path>, rows: &[S]) -> Result<()> {
    let mut w = csv::Writer::from_writer(open_output(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<S: Serialize>(path: Option<&Path>, value: &S) -> Result<()> {
    let mut out = open_output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

/// Writes `rows` and, when writing to a file, its manifest.
fn emit<S: Serialize>(ctx: &Ctx, path: Option<&Path>, rows: &[S], tolerances: BTreeMap<&'static str, f64>) -> Result<()> {
    write_rows(path, rows)?;
    if let Some(p) = path {
        ctx.write_manifest(p, &[p], tolerances)?;
    }
    Ok(())
}

pub fn load_domain(spec: &str) -> Result<Domain> {
    let parsed = if spec.trim_start().starts_with("rect:") {
        DomainSpec::parse(spec)?
    } else {
        DomainSpec::load(Path::new(spec))?
    };
    parsed.build()
}

fn load_graph(g: &GraphArgs) -> Result<AugmentedDomain> {
    let domain = load_domain(&g.domain)?;
    let mode = match g.mode {
        ModeArg::Explicit => CornerMode::ExplicitZPrime,
        ModeArg::Finite => CornerMode::FiniteN,
    };
    augment_with_mode(&domain, g.z, g.nside, mode)
}

#[derive(Serialize)]
struct GraphSummary {
    vertices: usize,
    edges: usize,
    triangles: usize,
    partition_function: f64,
    pfaffian_phase_re: f64,
    pfaffian_phase_im: f64,
}

fn cmd_build(ctx: &Ctx, a: &BuildArgs) -> Result<()> {
    let aug = load_graph(&a.graph)?;
    let (z, phase) = partition_function(&aug)?;
    let summary = GraphSummary {
        vertices: aug.len(),
        edges: aug.edges().len(),
        triangles: aug.k(),
        partition_function: z,
        pfaffian_phase_re: phase.re,
        pfaffian_phase_im: phase.im,
    };
    write_rows(a.graph.output.as_deref(), &[summary])?;
    let mut outputs: Vec<PathBuf> = a.graph.output.iter().cloned().collect();
    if let Some(dir) = &a.dump_dir {
        if aug.len() > DENSE_LIMIT {
            return Err(Error::Validation(format!("{} vertices exceed the dump cap {DENSE_LIMIT}", aug.len())));
        }
        std::fs::create_dir_all(dir)?;
        let inv = inverse_kasteleyn(&aug)?;
        for (name, m) in [("K.csv", inv.k.entries()), ("D.csv", inv.d.as_ref()), ("Kinv.csv", inv.kinv.as_ref())] {
            let path = dir.join(name);
            write_matrix_csv(File::create(&path)?, aug.vertices(), m, a.threshold)?;
            outputs.push(path);
        }
    }
    if let Some(primary) = outputs.first() {
        let refs: Vec<&Path> = outputs.iter().map(|p| p.as_path()).collect();
        ctx.write_manifest(primary, &refs, BTreeMap::from([("inverse_residual", 1e-10), ("dump_threshold", a.threshold)]))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EdgeRow {
    u_x: i64,
    u_y: i64,
    v_x: i64,
    v_y: i64,
    kind: String,
    weight: f64,
    probability: f64,
}

fn cmd_stats(ctx: &Ctx, g: &GraphArgs) -> Result<()> {
    let aug = load_graph(g)?;
    let (z, _) = partition_function(&aug)?;
    let inv = inverse_kasteleyn(&aug)?;
    eprintln!("partition function {z:.15e}; inverse residual {:.2e}", inv.residual);
    let rows: Vec<EdgeRow> = aug
        .edges()
        .iter()
        .map(|e| {
            let (u, v) = (aug.vertices()[e.u], aug.vertices()[e.v]);
            EdgeRow {
                u_x: u.x,
                u_y: u.y,
                v_x: v.x,
                v_y: v.y,
                kind: format!("{:?}", e.kind),
                weight: e.weight,
                probability: inv.edge_probability(e.u, e.v),
            }
        })
        .collect();
    emit(ctx, g.output.as_deref(), &rows, BTreeMap::from([("inverse_residual", 1e-10)]))
}

#[derive(Serialize)]
struct CoverRow {
    sample: usize,
    kind: &'static str,
    x1: i64,
    y1: i64,
    x2: i64,
    y2: i64,
}

fn cover_rows(covers: &[MdCover]) -> Vec<CoverRow> {
    let mut rows = Vec::new();
    for (s, c) in covers.iter().enumerate() {
        for &(a, b) in &c.dimers {
            rows.push(CoverRow { sample: s, kind: "dimer", x1: a.x, y1: a.y, x2: b.x, y2: b.y });
        }
        for &m in &c.monomers {
            rows.push(CoverRow { sample: s, kind: "monomer", x1: m.x, y1: m.y, x2: m.x, y2: m.y });
        }
    }
    rows
}

fn draw(aug: &AugmentedDomain, method: SamplerKind, samples: usize, thin: usize, seed: u64) -> Result<Vec<MdCover>> {
    match method {
        SamplerKind::Exact => sample_exact_batch(aug, samples, seed, 64),
        SamplerKind::Mcmc => mcmc_batch(aug, 1, samples, 10 * thin, thin, seed),
    }
}

fn cmd_sample(ctx: &Ctx, a: &SampleArgs) -> Result<()> {
    let aug = load_graph(&a.graph)?;
    let covers = draw(&aug, a.method, a.samples, a.thin, a.seed)?;
    emit(ctx, a.graph.output.as_deref(), &cover_rows(&covers), BTreeMap::from([("conditional_slack", 1e-9)]))
}

#[derive(Deserialize)]
struct PairsFile {
    pairs: Vec<[[f64; 2]; 2]>,
}

#[derive(Serialize)]
struct MomentRow {
    k: usize,
    measured: f64,
    predicted: f64,
    rel_err: f64,
}

fn cmd_heights(ctx: &Ctx, a: &HeightsArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.pairs)?;
    let file: PairsFile = serde_json::from_str(&text)?;
    let pairs: Vec<(C64, C64)> =
        file.pairs.iter().map(|[p, q]| (C64::new(p[0], p[1]), C64::new(q[0], q[1]))).collect();
    let cmp = moment_vs_gff(a.z, a.delta, &pairs)?;
    let rows = [MomentRow { k: pairs.len(), measured: cmp.measured, predicted: cmp.predicted, rel_err: cmp.rel_err }];
    emit(ctx, a.output.as_deref(), &rows, BTreeMap::from([("moment_rel_err", 0.05)]))?;
    if let Some(path) = &a.emit_samples {
        let spec = a.domain.as_deref().ok_or_else(|| Error::Validation("--emit-samples needs --domain".into()))?;
        let aug = augment_with_mode(&load_domain(spec)?, a.z, 0, CornerMode::ExplicitZPrime)?;
        let covers = sample_exact_batch(&aug, a.samples, a.seed, 16)?;
        write_rows(Some(path), &cover_rows(&covers))?;
        ctx.write_manifest(path, &[path], BTreeMap::new())?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct PointSpec {
    x: [f64; 2],
    y: [f64; 2],
    #[serde(default = "default_direction")]
    direction: [i64; 2],
}

fn default_direction() -> [i64; 2] {
    [1, 0]
}

#[derive(Deserialize)]
struct PointsFile {
    points: Vec<PointSpec>,
}

#[derive(Serialize)]
struct PkRow {
    point: usize,
    delta: f64,
    measured: f64,
    predicted: f64,
    abs_err: f64,
    ratio: Option<f64>,
}

fn cmd_pk(ctx: &Ctx, a: &PkArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.points)?;
    let file: PointsFile = serde_json::from_str(&text)?;
    let mut rows = Vec::new();
    for (i, p) in file.points.iter().enumerate() {
        if !matches!(p.direction, [1, 0] | [-1, 0] | [0, 1] | [0, -1]) {
            return Err(Error::Validation(format!("point {i}: direction must be a unit lattice step")));
        }
        let reports = pk_scaling_check(
            C64::new(p.x[0], p.x[1]),
            C64::new(p.y[0], p.y[1]),
            (p.direction[0], p.direction[1]),
            &a.delta,
            a.rho,
            a.z,
            a.radius,
        )?;
        for r in reports {
            rows.push(PkRow {
                point: i,
                delta: r.delta,
                measured: r.measured,
                predicted: r.predicted,
                abs_err: r.abs_err,
                ratio: r.ratio,
            });
        }
    }
    emit(ctx, a.output.as_deref(), &rows, BTreeMap::from([("error_ratio", 0.6)]))
}

#[derive(Serialize)]
struct JumpRow {
    k: usize,
    q: f64,
    alpha: f64,
}

fn cmd_walks(ctx: &Ctx, a: &WalksArgs) -> Result<()> {
    let prm = aux_params(a.z)?;
    let q = effective_jump_weights(a.z, a.kmax)?;
    let rows: Vec<JumpRow> =
        q.iter().enumerate().map(|(k, &qk)| JumpRow { k, q: qk, alpha: potential_kernel_1d(k as i64, &prm) }).collect();
    emit(ctx, a.output.as_deref(), &rows, BTreeMap::from([("jump_mass", 1e-12), ("decay_ratio", 1e-10)]))?;
    if let Some(spec) = &a.domain {
        let domain = load_domain(spec)?;
        let aug = augment_with_mode(&domain, a.z, a.nside, CornerMode::FiniteN)?;
        let report = verify_rw_representation(&aug)?;
        match &a.residuals {
            Some(path) => {
                write_rows(Some(path), &[report])?;
                ctx.write_manifest(path, &[path], BTreeMap::from([("mixed", 1e-12), ("walk", 1e-8)]))?;
            }
            None => write_rows(None, &[report])?,
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SamplerRow {
    cover: usize,
    monomers: usize,
    probability: f64,
    frequency: f64,
}

#[derive(Serialize)]
struct PathRow {
    step: usize,
    x: i64,
    y: i64,
}

#[derive(Serialize)]
struct ColouredRow {
    visits: usize,
    trials: u64,
    black: u64,
    bias: f64,
    std_err: f64,
    predicted_bias: f64,
}

fn cmd_mc(ctx: &Ctx, a: &McArgs) -> Result<()> {
    let path = a.output.as_deref();
    let json = a.out == OutFormat::Json;
    let mut tolerances = BTreeMap::new();
    match a.experiment {
        Experiment::Sampler => {
            let domain = load_domain(a.domain.as_deref().unwrap_or_default())?;
            let aug = augment_with_mode(&domain, a.z, 0, CornerMode::ExplicitZPrime)?;
            let upper = aug.upper_vertices().count();
            if upper > ENUMERATION_CAP {
                return Err(Error::SizeCap { size: upper, cap: ENUMERATION_CAP });
            }
            let law = enumerate_covers(&aug)?;
            let samples = draw(&aug, a.method, a.trials, 50 * aug.len(), a.seed)?;
            let chi = chi_square_test(&samples, &law)?;
            eprintln!("chi-square {:.3} on {} dof, p = {:.4}", chi.statistic, chi.dof, chi.p_value);
            let total: f64 = law.iter().map(|(_, w)| w).sum();
            let mut counts = std::collections::HashMap::<&MdCover, usize>::new();
            for s in &samples {
                *counts.entry(s).or_default() += 1;
            }
            let rows: Vec<SamplerRow> = law
                .iter()
                .enumerate()
                .map(|(i, (c, w))| SamplerRow {
                    cover: i,
                    monomers: c.monomers.len(),
                    probability: w / total,
                    frequency: counts.get(c).copied().unwrap_or(0) as f64 / samples.len() as f64,
                })
                .collect();
            tolerances.insert("chi_square_p", 1e-3);
            if json {
                write_json(path, &serde_json::json!({ "chi_square": chi, "covers": rows }))?;
            } else {
                write_rows(path, &rows)?;
            }
        }
        Experiment::Walk => {
            let mut rng = RngStream::new(a.seed, 0).rng();
            let walk = simulate_effective_walk(a.z, LatticePoint::new(0, 0), a.steps, true, &mut rng)?;
            let rows: Vec<PathRow> = walk.iter().enumerate().map(|(i, p)| PathRow { step: i, x: p.x, y: p.y }).collect();
            if json {
                write_json(path, &rows)?;
            } else {
                write_rows(path, &rows)?;
            }
        }
        Experiment::Coloured => {
            let p = match a.flip {
                Some(p) => p,
                None => colour_flip_probability(a.z)?,
            };
            let rep = coloured_walk_experiment(p, LatticePoint::new(0, 0), a.target, a.trials, a.seed)?;
            eprintln!("lambda {:.6}, fitted base {:.6}", rep.lambda, rep.fitted_base);
            tolerances.insert("base", 0.05);
            if json {
                write_json(path, &rep)?;
            } else {
                let rows: Vec<ColouredRow> = rep
                    .bins
                    .iter()
                    .map(|b| ColouredRow {
                        visits: b.visits,
                        trials: b.trials,
                        black: b.black,
                        bias: b.bias,
                        std_err: b.std_err,
                        predicted_bias: 0.5 * rep.lambda.abs().powi(b.visits as i32),
                    })
                    .collect();
                write_rows(path, &rows)?;
            }
        }
        Experiment::Coupling => {
            let mut reports = Vec::new();
            for e in a.log2_min..=a.log2_max {
                reports.push(coupling_experiment(
                    a.z,
                    LatticePoint::new(0, 0),
                    LatticePoint::new(2, 0),
                    1usize << e,
                    a.trials,
                    a.b,
                    a.seed,
                )?);
            }
            let slope = coupling_slope(&reports);
            eprintln!("fitted exponent {slope:.4}");
            tolerances.insert("slope", 0.15);
            if json {
                write_json(path, &serde_json::json!({ "slope": slope, "horizons": reports }))?;
            } else {
                write_rows(path, &reports)?;
            }
        }
    }
    if let Some(p) = path {
        ctx.write_manifest(p, &[p], tolerances)?;
    }
    Ok(())
}

struct Check {
    suite: &'static str,
    value: f64,
    tolerance: f64,
}

fn cmd_verify(a: &VerifyArgs) -> Result<()> {
    let domain = load_domain(&a.domain)?;
    let small = augment_with_mode(&domain, a.z, 0, CornerMode::ExplicitZPrime)?;
    let faces = match orient(&small).and_then(|o| check_faces(&small, &o)) {
        Ok(()) => 0.0,
        Err(Error::Numerical(_)) | Err(Error::Validation(_)) => 1.0,
        Err(e) => return Err(e),
    };
    let aug = augment_with_mode(&domain, a.z, a.nside, CornerMode::FiniteN)?;
    let schur = odd_schur(&aug)?;
    let rw = verify_rw_representation(&aug)?;
    let checks = [
        Check { suite: "kasteleyn faces (failures)", value: faces, tolerance: 0.0 },
        Check { suite: "schur identity", value: schur.residual, tolerance: 1e-10 },
        Check { suite: "rw mixed parity", value: rw.mixed_max, tolerance: 1e-12 },
        Check { suite: "rw odd", value: rw.odd_max, tolerance: 1e-8 },
        Check { suite: "rw even", value: rw.even_max, tolerance: 1e-8 },
        Check { suite: "rw odd block", value: rw.odd_block_max, tolerance: 1e-8 },
        Check { suite: "rw even block", value: rw.even_block_max, tolerance: 1e-8 },
    ];
    let mut out = io::stdout().lock();
    writeln!(out, "{:<28} {:>12} {:>10}  status", "suite", "value", "tol")?;
    for c in &checks {
        let status = if c.value <= c.tolerance { "PASS" } else { "FAIL" };
        writeln!(out, "{:<28} {:>12.3e} {:>10.1e}  {status}", c.suite, c.value, c.tolerance)?;
    }
    Ok(())
}
