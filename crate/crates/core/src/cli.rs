//! Command-line front end.
//!
//! Exit codes: 0 success, 1 validation failure or I/O error, 2 usage or
//! parse error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::box_geometry::{bev_iou, iou_3d, Box3D};
use crate::error::Error;
use crate::grad::{validate_gradients, FD_STEP};
use crate::output::{write_records, Format, Provenance};
use crate::rdiou::{rdiou, RdiouConfig};
use crate::sim::{
    fit_benchmark, fit_box, k_sweep, rotation_gradient_sweep, rotation_value_sweep, BenchSpec, FitLoss, FitSpec,
    KSweepSpec, Optimizer, SweepSpec, ANCHOR_SIZE, K_SWEEP_VALUES,
};
use crate::target_codec::RegressionVector;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "rdbox", version, about = "Rotation-decoupled IoU for rotated 3D boxes")]
pub struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true, env = "RDBOX_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// 3D IoU, BEV IoU and RDIoU for pairs of boxes read from a CSV file.
    Iou(IouArgs),
    /// RDIoU and 3D IoU as the prediction rotates away from the target.
    Sweep(SweepArgs),
    /// Like `sweep`, with x, y and theta gradients of both measures.
    GradSweep(SweepArgs),
    /// Fit one box to a ground truth by gradient descent.
    Fit(FitArgs),
    /// Compare fit losses over seeded random box pairs.
    FitBench(BenchArgs),
    /// Per-k landscape (and optionally fit) summaries.
    KSweep(KSweepArgs),
    /// Check analytic gradients against central differences.
    ValidateGrad(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file (stdout when omitted).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct IouArgs {
    /// CSV with header `x,y,z,l,w,h,theta`.
    #[arg(long)]
    pub boxes: PathBuf,
    /// Pair of row indices `i,j`; repeatable. Default: (0,1), or (0,0) for a single box.
    #[arg(long = "pair", value_parser = parse_pair)]
    pub pairs: Vec<(usize, usize)>,
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Box size `l,w,h`.
    #[arg(long, default_value = "3.9,1.6,1.56", value_parser = parse_vec3)]
    pub size: [f64; 3],
    /// Center offset of the rotated box: `x,y,z`, or a single value for `x,0,0`.
    #[arg(long, default_value = "0", value_parser = parse_offset)]
    pub dc: [f64; 3],
    /// Comma-separated k values.
    #[arg(long, default_value = "1", value_delimiter = ',')]
    pub k: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub theta_min: f64,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    pub theta_max: f64,
    #[arg(long, default_value_t = std::f64::consts::PI / 180.0)]
    pub theta_step: f64,
    #[arg(long, default_value_t = FD_STEP)]
    pub fd_step: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct OptimArgs {
    #[arg(long, default_value = "gd", value_parser = ["gd", "adam"])]
    pub optimizer: String,
    /// Step size (default 0.05 for gd, 0.01 for adam).
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, default_value_t = 500)]
    pub iterations: usize,
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
    #[arg(long, default_value_t = FD_STEP)]
    pub fd_step: f64,
}

impl OptimArgs {
    fn optimizer(&self) -> Optimizer {
        match (self.optimizer.as_str(), self.lr) {
            ("adam", lr) => {
                let mut o = Optimizer::adam();
                if let (Optimizer::Adam { lr: slot, .. }, Some(v)) = (&mut o, lr) {
                    *slot = v;
                }
                o
            }
            (_, Some(lr)) => Optimizer::Gd { lr },
            _ => Optimizer::gd(),
        }
    }

    fn describe(&self, p: &mut Provenance) {
        let opt = self.optimizer();
        p.push("optimizer", opt.name())
            .push("lr", opt.lr())
            .push("iterations", self.iterations)
            .push("k", self.k)
            .push("fd_step", self.fd_step);
        if let Optimizer::Adam { beta1, beta2, eps, .. } = opt {
            p.push("adam_beta1", beta1).push("adam_beta2", beta2).push("adam_eps", eps);
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Ground truth `x,y,z,l,w,h,theta` (default: anchor-size box at the origin).
    #[arg(long, value_parser = parse_box)]
    pub gt: Option<Box3D>,
    /// Initial box `x,y,z,l,w,h,theta`.
    #[arg(long, value_parser = parse_box, conflicts_with = "init_iou")]
    pub init: Option<Box3D>,
    /// Build the initial box by shifting the ground truth along x until its 3D IoU equals this.
    #[arg(long)]
    pub init_iou: Option<f64>,
    /// Yaw added to the ground truth when building the initial box from `--init-iou`.
    #[arg(long, default_value_t = 0.0)]
    pub init_dtheta: f64,
    #[arg(long, default_value = "rdiou-diou", value_parser = parse_fit_loss)]
    pub loss: FitLoss,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.1)]
    pub band_lo: f64,
    #[arg(long, default_value_t = 0.5)]
    pub band_hi: f64,
    /// Comma-separated fit losses.
    #[arg(long, default_value = "rdiou-diou,iou3d", value_delimiter = ',', value_parser = parse_fit_loss)]
    pub losses: Vec<FitLoss>,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct KSweepArgs {
    /// Comma-separated k values (default: 0.6 to 1.8 in steps of 0.2).
    #[arg(long, value_delimiter = ',')]
    pub ks: Option<Vec<f64>>,
    #[arg(long, default_value = "3.9,1.6,1.56", value_parser = parse_vec3)]
    pub size: [f64; 3],
    #[arg(long, default_value = "0", value_parser = parse_offset)]
    pub dc: [f64; 3],
    #[arg(long, default_value_t = 0.0)]
    pub theta_min: f64,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    pub theta_max: f64,
    #[arg(long, default_value_t = std::f64::consts::PI / 180.0)]
    pub theta_step: f64,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4)]
    pub probe_dtheta: f64,
    /// Also run the rdiou-diou fit benchmark at every k.
    #[arg(long)]
    pub with_fit: bool,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub iterations: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, default_value_t = FD_STEP)]
    pub step: f64,
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_fit_loss(s: &str) -> Result<FitLoss, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect()
}

fn parse_fixed<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let v = parse_list(s)?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected {N} comma-separated values, got {}", v.len()))
}

fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    parse_fixed::<3>(s)
}

fn parse_offset(s: &str) -> Result<[f64; 3], String> {
    let v = parse_list(s)?;
    match v.as_slice() {
        [d] => Ok([*d, 0.0, 0.0]),
        [x, y, z] => Ok([*x, *y, *z]),
        _ => Err(format!("expected 1 or 3 comma-separated values, got {}", v.len())),
    }
}

fn parse_box(s: &str) -> Result<Box3D, String> {
    let p = parse_fixed::<7>(s)?;
    let b = Box3D::from_array(p);
    b.validate().map_err(|e| e.to_string())?;
    Ok(b)
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `i,j`, got {s:?}"))?;
    let i = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let j = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    Ok((i, j))
}

/// A failure classified by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Failure(_) => EXIT_FAILURE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failure(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Read a box list. Errors cite the 1-based line of the offending row.
pub fn read_boxes(path: &Path) -> CliResult<Vec<Box3D>> {
    let file = File::open(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Usage(format!("{}: line 1: {e}", path.display())))?
        .clone();
    let expected = ["x", "y", "z", "l", "w", "h", "theta"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(CliError::Usage(format!(
            "{}: line 1: header must be `x,y,z,l,w,h,theta`, got `{}`",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut boxes = Vec::new();
    for (row, rec) in rdr.deserialize::<Box3D>().enumerate() {
        // header is line 1, so row r sits on line r + 2 when no blank lines intervene
        let line_of = |e: &csv::Error| e.position().map(|p| p.line()).unwrap_or(row as u64 + 2);
        let b = rec.map_err(|e| {
            CliError::Usage(format!("{}: line {}: row {row}: {e}", path.display(), line_of(&e)))
        })?;
        b.validate()
            .map_err(|e| CliError::Usage(format!("{}: line {}: row {row}: {e}", path.display(), row + 2)))?;
        boxes.push(b);
    }
    Ok(boxes)
}

fn emit<T: Serialize>(out: &OutputArgs, records: &[T], provenance: &Provenance) -> CliResult<()> {
    match &out.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            write_records(&mut w, records, out.format, provenance)?;
            w.flush()?;
            if out.format == Format::Json {
                let meta = path.with_extension("meta.json");
                let mut m = BufWriter::new(File::create(meta)?);
                serde_json::to_writer_pretty(&mut m, &provenance.to_json()).map_err(io::Error::from)?;
                writeln!(m)?;
                m.flush()?;
            }
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            write_records(&mut w, records, out.format, provenance)?;
            if out.format == Format::Json {
                let mut err = io::stderr().lock();
                provenance.write_comments(&mut err)?;
            }
        }
    }
    Ok(())
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Serialize)]
struct IouRow {
    i: usize,
    j: usize,
    iou3d: f64,
    bev_iou: f64,
    rdiou: f64,
}

fn cmd_iou(args: &IouArgs) -> CliResult<()> {
    let cfg = RdiouConfig::new(args.k)?;
    let boxes = read_boxes(&args.boxes)?;
    if boxes.is_empty() {
        return Err(CliError::Usage(format!("{}: no boxes", args.boxes.display())));
    }
    let pairs = if args.pairs.is_empty() {
        vec![if boxes.len() > 1 { (0, 1) } else { (0, 0) }]
    } else {
        args.pairs.clone()
    };
    let mut rows = Vec::with_capacity(pairs.len());
    for (i, j) in pairs {
        let (a, b) = match (boxes.get(i), boxes.get(j)) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(CliError::Usage(format!(
                    "pair ({i},{j}) out of range for {} boxes",
                    boxes.len()
                )))
            }
        };
        rows.push(IouRow {
            i,
            j,
            iou3d: iou_3d(a, b),
            bev_iou: bev_iou(a, b),
            rdiou: rdiou(&RegressionVector::raw(a), &RegressionVector::raw(b), &cfg)?,
        });
    }
    let mut p = Provenance::new();
    p.push("command", "iou").push("boxes", args.boxes.display()).push("k", args.k);
    emit(&args.output, &rows, &p)
}

fn sweep_spec(args: &SweepArgs) -> SweepSpec {
    SweepSpec {
        size: args.size,
        dc: args.dc,
        theta_min: args.theta_min,
        theta_max: args.theta_max,
        theta_step: args.theta_step,
        ks: args.k.clone(),
        fd_step: args.fd_step,
    }
}

fn describe_sweep(p: &mut Provenance, spec: &SweepSpec) {
    p.push("size", fmt_vec(&spec.size))
        .push("dc", fmt_vec(&spec.dc))
        .push("k", fmt_vec(&spec.ks))
        .push("theta_min", spec.theta_min)
        .push("theta_max", spec.theta_max)
        .push("theta_step", spec.theta_step)
        .push("fd_step", spec.fd_step)
        .push("convention", "raw parameters; prediction rotated by dtheta about its own center; target yaw 0");
}

fn cmd_sweep(args: &SweepArgs, gradients: bool) -> CliResult<()> {
    let spec = sweep_spec(args);
    let records = if gradients {
        rotation_gradient_sweep(&spec)?
    } else {
        rotation_value_sweep(&spec)?
    };
    let mut p = Provenance::new();
    p.push("command", if gradients { "grad-sweep" } else { "sweep" });
    describe_sweep(&mut p, &spec);
    emit(&args.output, &records, &p)
}

/// Shift `gt` (yawed by `dtheta`) along x until its 3D IoU with `gt` equals `target`.
fn init_from_iou(gt: &Box3D, target: f64, dtheta: f64) -> CliResult<Box3D> {
    if !(0.0..1.0).contains(&target) {
        return Err(CliError::Usage(format!("--init-iou must lie in [0, 1), got {target}")));
    }
    let at = |s: f64| Box3D { x: gt.x + s, theta: gt.theta + dtheta, ..*gt };
    let far = gt.l + gt.w + 1.0;
    if target == 0.0 {
        return Ok(at(far));
    }
    if iou_3d(&at(0.0), gt) < target {
        return Err(CliError::Usage(format!(
            "--init-iou {target} unreachable with --init-dtheta {dtheta}"
        )));
    }
    let (mut lo, mut hi) = (0.0, far);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if iou_3d(&at(mid), gt) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(at(0.5 * (lo + hi)))
}

fn cmd_fit(args: &FitArgs) -> CliResult<()> {
    let gt = args.gt.unwrap_or(Box3D {
        x: 0.0,
        y: 0.0,
        z: 0.0,
        l: ANCHOR_SIZE[0],
        w: ANCHOR_SIZE[1],
        h: ANCHOR_SIZE[2],
        theta: 0.0,
    });
    let init = match (args.init, args.init_iou) {
        (Some(b), _) => b,
        (None, Some(v)) => init_from_iou(&gt, v, args.init_dtheta)?,
        (None, None) => Box3D { x: gt.x + 0.5, theta: gt.theta + 0.2, ..gt },
    };
    let spec = FitSpec {
        gt,
        init,
        loss: args.loss,
        optimizer: args.optim.optimizer(),
        iterations: args.optim.iterations,
        k: args.optim.k,
        fd_step: args.optim.fd_step,
    };
    let trace = fit_box(&spec)?;
    let mut p = Provenance::new();
    p.push("command", "fit")
        .push("gt", fmt_vec(&gt.to_array()))
        .push("init", fmt_vec(&init.to_array()))
        .push("loss", args.loss);
    if let Some(v) = args.init_iou {
        p.push("init_iou", v).push("init_dtheta", args.init_dtheta);
    }
    args.optim.describe(&mut p);
    p.push("status", trace.status.name())
        .push("initial_iou3d", trace.initial().iou3d)
        .push("final_iou3d", trace.final_iou());
    emit(&args.output, &trace.steps, &p)
}

fn cmd_fit_bench(args: &BenchArgs) -> CliResult<()> {
    let spec = BenchSpec {
        n_pairs: args.n,
        seed: args.seed,
        iou_band: (args.band_lo, args.band_hi),
        losses: args.losses.clone(),
        optimizer: args.optim.optimizer(),
        iterations: args.optim.iterations,
        k: args.optim.k,
        fd_step: args.optim.fd_step,
    };
    let summary = fit_benchmark(&spec)?;
    let mut p = Provenance::new();
    p.push("command", "fit-bench")
        .push("n", args.n)
        .push("seed", args.seed)
        .push("band", format!("{},{}", args.band_lo, args.band_hi))
        .push(
            "losses",
            args.losses.iter().map(|l| l.name()).collect::<Vec<_>>().join(","),
        );
    args.optim.describe(&mut p);
    emit(&args.output, &summary.rows, &p)
}

fn cmd_k_sweep(args: &KSweepArgs) -> CliResult<()> {
    let ks = args.ks.clone().unwrap_or_else(|| K_SWEEP_VALUES.to_vec());
    let sweep = SweepSpec {
        size: args.size,
        dc: args.dc,
        theta_min: args.theta_min,
        theta_max: args.theta_max,
        theta_step: args.theta_step,
        ks,
        fd_step: FD_STEP,
    };
    let bench = args.with_fit.then(|| BenchSpec {
        n_pairs: args.n,
        seed: args.seed,
        losses: vec![FitLoss::RdiouDiou],
        iterations: args.iterations,
        ..BenchSpec::default()
    });
    let spec = KSweepSpec { sweep, probe_dtheta: args.probe_dtheta, bench: bench.clone() };
    let rows = k_sweep(&spec)?;
    let mut p = Provenance::new();
    p.push("command", "k-sweep");
    describe_sweep(&mut p, &spec.sweep);
    p.push("probe_dtheta", args.probe_dtheta);
    if let Some(b) = bench {
        p.push("fit_loss", FitLoss::RdiouDiou)
            .push("n", b.n_pairs)
            .push("seed", b.seed)
            .push("band", format!("{},{}", b.iou_band.0, b.iou_band.1))
            .push("optimizer", b.optimizer.name())
            .push("lr", b.optimizer.lr())
            .push("iterations", b.iterations);
    }
    emit(&args.output, &rows, &p)
}

fn cmd_validate_grad(args: &ValidateArgs) -> CliResult<bool> {
    RdiouConfig::new(args.k)?;
    if !(args.step > 0.0 && args.tol > 0.0) {
        return Err(CliError::Usage("--step and --tol must be positive".into()));
    }
    let rows = validate_gradients(args.n, args.seed, args.step, args.tol, args.k);
    let ok = rows.iter().all(|r| r.passed());
    let mut p = Provenance::new();
    p.push("command", "validate-grad")
        .push("n", args.n)
        .push("seed", args.seed)
        .push("tol", args.tol)
        .push("step", args.step)
        .push("k", args.k)
        .push("passed", ok);
    emit(&args.output, &rows, &p)?;
    Ok(ok)
}

fn dispatch(cli: &Cli) -> CliResult<i32> {
    match &cli.command {
        Command::Iou(a) => cmd_iou(a)?,
        Command::Sweep(a) => cmd_sweep(a, false)?,
        Command::GradSweep(a) => cmd_sweep(a, true)?,
        Command::Fit(a) => cmd_fit(a)?,
        Command::FitBench(a) => cmd_fit_bench(a)?,
        Command::KSweep(a) => cmd_k_sweep(a)?,
        Command::ValidateGrad(a) => {
            if !cmd_validate_grad(a)? {
                eprintln!("gradient validation failed");
                return Ok(EXIT_FAILURE);
            }
        }
    }
    Ok(EXIT_OK)
}

/// Run a parsed command line and return the process exit code.
pub fn run(cli: Cli) -> i32 {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_USAGE;
        }
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAILURE;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_definition() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
        for argv in [
            &["rdbox", "sweep", "--k", "0.6,1.8"][..],
            &["rdbox", "k-sweep", "--ks", "1,2"],
            &["rdbox", "fit-bench", "--losses", "rdiou-ciou,iou3d"],
        ] {
            Cli::try_parse_from(argv).unwrap();
        }
    }

    #[test]
    fn value_parsers() {
        assert_eq!(parse_offset("2").unwrap(), [2.0, 0.0, 0.0]);
        assert_eq!(parse_offset("1,2,3").unwrap(), [1.0, 2.0, 3.0]);
        assert!(parse_offset("1,2").is_err());
        assert_eq!(parse_pair("3, 4").unwrap(), (3, 4));
        assert!(parse_pair("3").is_err());
        assert!(parse_box("0,0,0,1,1,-1,0").is_err());
        assert_eq!(parse_list("0.6,0.8").unwrap(), vec![0.6, 0.8]);
        assert_eq!(parse_fit_loss("iou3d").unwrap(), FitLoss::Iou3dNumeric);
    }

    #[test]
    fn init_iou_bisection() {
        let gt = Box3D::new(0.0, 0.0, 0.0, 3.9, 1.6, 1.56, 0.3).unwrap();
        let b = init_from_iou(&gt, 0.4, 0.0).unwrap();
        assert!((iou_3d(&b, &gt) - 0.4).abs() < 1e-9);
        let z = init_from_iou(&gt, 0.0, 0.2).unwrap();
        assert_eq!(iou_3d(&z, &gt), 0.0);
        assert!(init_from_iou(&gt, 1.2, 0.0).is_err());
    }
}
