//! Diagnostic experiments comparing RDIoU with the exact 3D IoU.
//!
//! All experiments use the raw-parameter convention: a box's parameters
//! are fed to RDIoU verbatim (equivalently, encoded against an identity
//! anchor), so offsets are in meters and sizes are absolute extents.
//!
//! Every experiment is a pure function of its spec. Parallel sections
//! collect into index order, so results do not depend on the thread count.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::box_geometry::{iou_3d, Box3D};
use crate::error::{invalid, Error, Result};
use crate::grad::{grad_iou3d_numeric, value_and_gradient, GradVector7, LossObjective, RdiouObjective, FD_STEP};
use crate::losses::LossKind;

/// Car anchor size `(l, w, h)` in meters.
pub const ANCHOR_SIZE: [f64; 3] = [3.9, 1.6, 1.56];
/// Center offset of the default off-center sweep.
pub const DEFAULT_OFFSET: [f64; 3] = [1.0, 1.0, 0.0];
/// Edge values of the k sweep.
pub const K_SWEEP_VALUES: [f64; 7] = [0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8];
/// Sizes are projected back to at least this extent after every step.
pub const MIN_SIZE: f64 = 1e-3;
/// A fit stops once its loss is at or below this value.
pub const CONVERGED_LOSS: f64 = 1e-12;

/// Wrap an angle into `(−π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a - 2.0 * PI
    } else {
        a
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Shared box size `(l, w, h)`.
    pub size: [f64; 3],
    /// Center of the rotated prediction relative to the target.
    pub dc: [f64; 3],
    pub theta_min: f64,
    pub theta_max: f64,
    pub theta_step: f64,
    pub ks: Vec<f64>,
    /// Step of the central differences on the exact 3D IoU.
    pub fd_step: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            size: ANCHOR_SIZE,
            dc: [0.0; 3],
            theta_min: 0.0,
            theta_max: FRAC_PI_2,
            theta_step: PI / 180.0,
            ks: vec![1.0],
            fd_step: FD_STEP,
        }
    }
}

impl SweepSpec {
    pub fn coincident() -> Self {
        Self::default()
    }

    pub fn offset() -> Self {
        Self { dc: DEFAULT_OFFSET, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta_step > 0.0 && self.theta_step.is_finite()) {
            return Err(invalid(format!("theta step must be positive, got {}", self.theta_step)));
        }
        if !(self.theta_max >= self.theta_min) {
            return Err(invalid(format!(
                "empty rotation range [{}, {}]",
                self.theta_min, self.theta_max
            )));
        }
        if self.ks.is_empty() || self.ks.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
            return Err(invalid(format!("k values must be positive, got {:?}", self.ks)));
        }
        if self.size.iter().any(|s| !(*s > 0.0)) {
            return Err(invalid(format!("box size must be positive, got {:?}", self.size)));
        }
        if !(self.fd_step > 0.0) {
            return Err(invalid("finite-difference step must be positive"));
        }
        Ok(())
    }

    /// Rotation grid `θmin + i·step` up to `θmax` (inclusive within 1e-9 steps).
    pub fn grid(&self) -> Vec<f64> {
        let n = ((self.theta_max - self.theta_min) / self.theta_step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.theta_min + i as f64 * self.theta_step).collect()
    }

    pub fn target(&self) -> Box3D {
        let [l, w, h] = self.size;
        Box3D { x: 0.0, y: 0.0, z: 0.0, l, w, h, theta: 0.0 }
    }

    pub fn prediction(&self, dtheta: f64) -> Box3D {
        Box3D {
            x: self.dc[0],
            y: self.dc[1],
            z: self.dc[2],
            theta: dtheta,
            ..self.target()
        }
    }
}

/// One grid point of a rotation sweep. Gradient columns are empty for
/// value-only sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub index: usize,
    pub dtheta: f64,
    pub k: f64,
    pub rdiou: f64,
    pub iou3d: f64,
    pub grad_rdiou_x: Option<f64>,
    pub grad_rdiou_y: Option<f64>,
    pub grad_rdiou_theta: Option<f64>,
    pub grad_iou3d_x: Option<f64>,
    pub grad_iou3d_y: Option<f64>,
    pub grad_iou3d_theta: Option<f64>,
}

fn sweep(spec: &SweepSpec, with_gradients: bool) -> Result<Vec<SweepRecord>> {
    spec.validate()?;
    let grid = spec.grid();
    let target = spec.target();
    let points: Vec<(usize, f64, f64)> = spec
        .ks
        .iter()
        .flat_map(|&k| grid.iter().map(move |&th| (k, th)))
        .enumerate()
        .map(|(i, (k, th))| (i, k, th))
        .collect();

    Ok(points
        .par_iter()
        .map(|&(index, k, dtheta)| {
            let pred = spec.prediction(dtheta);
            let obj = RdiouObjective { target: target.to_array(), k };
            let iou3d = iou_3d(&pred, &target);
            let (rdiou, g_rd, g_iou) = if with_gradients {
                let (v, g) = value_and_gradient(&obj, &pred.to_array());
                (v, Some(g), Some(grad_iou3d_numeric(&pred, &target, spec.fd_step)))
            } else {
                (crate::grad::Objective::eval(&obj, &pred.to_array()), None, None)
            };
            SweepRecord {
                index,
                dtheta,
                k,
                rdiou,
                iou3d,
                grad_rdiou_x: g_rd.map(|g| g.dx()),
                grad_rdiou_y: g_rd.map(|g| g.dy()),
                grad_rdiou_theta: g_rd.map(|g| g.dtheta()),
                grad_iou3d_x: g_iou.map(|g| g.dx()),
                grad_iou3d_y: g_iou.map(|g| g.dy()),
                grad_iou3d_theta: g_iou.map(|g| g.dtheta()),
            }
        })
        .collect())
}

/// RDIoU and exact 3D IoU as the prediction rotates away from the target.
pub fn rotation_value_sweep(spec: &SweepSpec) -> Result<Vec<SweepRecord>> {
    sweep(spec, false)
}

/// As [`rotation_value_sweep`], plus x, y and θ gradients of both measures.
pub fn rotation_gradient_sweep(spec: &SweepSpec) -> Result<Vec<SweepRecord>> {
    sweep(spec, true)
}

/// Objective minimized by [`fit_box`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FitLoss {
    #[serde(rename = "rdiou-diou")]
    RdiouDiou,
    #[serde(rename = "rdiou-iou")]
    RdiouIou,
    #[serde(rename = "rdiou-ciou")]
    RdiouCiou,
    /// `1 − IoU3D` with central-difference gradients.
    #[serde(rename = "iou3d")]
    Iou3dNumeric,
}

impl FitLoss {
    pub const ALL: [FitLoss; 4] = [FitLoss::RdiouDiou, FitLoss::RdiouIou, FitLoss::RdiouCiou, FitLoss::Iou3dNumeric];

    pub fn name(self) -> &'static str {
        match self {
            FitLoss::RdiouDiou => "rdiou-diou",
            FitLoss::RdiouIou => "rdiou-iou",
            FitLoss::RdiouCiou => "rdiou-ciou",
            FitLoss::Iou3dNumeric => "iou3d",
        }
    }

    fn rdiou_kind(self) -> Option<LossKind> {
        match self {
            FitLoss::RdiouDiou => Some(LossKind::Diou),
            FitLoss::RdiouIou => Some(LossKind::Iou),
            FitLoss::RdiouCiou => Some(LossKind::Ciou),
            FitLoss::Iou3dNumeric => None,
        }
    }
}

impl fmt::Display for FitLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FitLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rdiou-diou" | "diou" => Ok(FitLoss::RdiouDiou),
            "rdiou-iou" => Ok(FitLoss::RdiouIou),
            "rdiou-ciou" | "ciou" => Ok(FitLoss::RdiouCiou),
            "iou3d" | "iou3d-numeric" => Ok(FitLoss::Iou3dNumeric),
            other => Err(invalid(format!("unknown fit loss {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    /// Plain gradient descent.
    Gd { lr: f64 },
    /// Per-parameter adaptive steps from bias-corrected moment estimates.
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn gd() -> Self {
        Optimizer::Gd { lr: 0.05 }
    }

    pub fn adam() -> Self {
        Optimizer::Adam { lr: 0.01, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn lr(&self) -> f64 {
        match *self {
            Optimizer::Gd { lr } | Optimizer::Adam { lr, .. } => lr,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Optimizer::Gd { .. } => "gd",
            Optimizer::Adam { .. } => "adam",
        }
    }
}

impl Default for Optimizer {
    fn default() -> Self {
        Self::gd()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSpec {
    pub gt: Box3D,
    pub init: Box3D,
    pub loss: FitLoss,
    pub optimizer: Optimizer,
    pub iterations: usize,
    pub k: f64,
    pub fd_step: f64,
}

impl FitSpec {
    pub fn new(gt: Box3D, init: Box3D, loss: FitLoss) -> Self {
        Self {
            gt,
            init,
            loss,
            optimizer: Optimizer::default(),
            iterations: 500,
            k: 1.0,
            fd_step: FD_STEP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.gt.validate()?;
        self.init.validate()?;
        if self.iterations == 0 {
            return Err(invalid("iteration count must be at least 1"));
        }
        if !(self.optimizer.lr() > 0.0) {
            return Err(invalid(format!("step size must be positive, got {}", self.optimizer.lr())));
        }
        if !(self.k > 0.0) {
            return Err(invalid(format!("k must be positive, got {}", self.k)));
        }
        if !(self.fd_step > 0.0) {
            return Err(invalid("finite-difference step must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitStatus {
    /// Ran every iteration.
    Completed,
    /// Loss reached [`CONVERGED_LOSS`].
    Converged,
    /// Gradient vanished exactly while the boxes still overlap.
    Stationary,
    /// Gradient vanished because the boxes do not overlap at all.
    NoOverlapStall,
    /// A parameter became non-finite.
    Diverged,
}

impl FitStatus {
    pub fn name(self) -> &'static str {
        match self {
            FitStatus::Completed => "completed",
            FitStatus::Converged => "converged",
            FitStatus::Stationary => "stationary",
            FitStatus::NoOverlapStall => "no-overlap stall",
            FitStatus::Diverged => "diverged",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitStep {
    pub step: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub theta: f64,
    pub loss: f64,
    pub iou3d: f64,
}

impl FitStep {
    pub fn params(&self) -> [f64; 7] {
        [self.x, self.y, self.z, self.l, self.w, self.h, self.theta]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    pub steps: Vec<FitStep>,
    pub status: FitStatus,
}

impl FitTrace {
    pub fn initial(&self) -> &FitStep {
        &self.steps[0]
    }

    pub fn last(&self) -> &FitStep {
        self.steps.last().expect("trace has at least one step")
    }

    /// Exact IoU of the final parameters.
    pub fn final_iou(&self) -> f64 {
        self.last().iou3d
    }
}

fn loss_and_gradient(spec: &FitSpec, p: &[f64; 7]) -> (f64, GradVector7) {
    let gt = spec.gt.to_array();
    match spec.loss.rdiou_kind() {
        Some(kind) => value_and_gradient(&LossObjective { kind, target: gt, k: spec.k }, p),
        None => {
            let b = Box3D::from_array(*p);
            let v = 1.0 - iou_3d(&b, &spec.gt);
            (v, -grad_iou3d_numeric(&b, &spec.gt, spec.fd_step))
        }
    }
}

/// First-order descent of the chosen loss over the prediction's seven
/// parameters, starting from `spec.init`.
///
/// Yaw is wrapped into `(−π, π]` and sizes are kept at or above
/// [`MIN_SIZE`] after each update. The trace holds one row per evaluated
/// step, including step 0.
pub fn fit_box(spec: &FitSpec) -> Result<FitTrace> {
    spec.validate()?;
    let mut p = spec.init.to_array();
    let mut m = [0.0; 7];
    let mut v = [0.0; 7];
    let mut steps = Vec::with_capacity(spec.iterations + 1);
    let mut status = FitStatus::Completed;

    for step in 0..=spec.iterations {
        let (loss, grad) = loss_and_gradient(spec, &p);
        let iou3d = iou_3d(&Box3D::from_array(p), &spec.gt);
        steps.push(FitStep {
            step,
            x: p[0],
            y: p[1],
            z: p[2],
            l: p[3],
            w: p[4],
            h: p[5],
            theta: p[6],
            loss,
            iou3d,
        });
        if step == spec.iterations {
            break;
        }
        if !loss.is_finite() || !grad.is_finite() {
            status = FitStatus::Diverged;
            break;
        }
        if loss <= CONVERGED_LOSS {
            status = FitStatus::Converged;
            break;
        }
        if grad.0.iter().all(|g| *g == 0.0) {
            status = if iou3d == 0.0 { FitStatus::NoOverlapStall } else { FitStatus::Stationary };
            break;
        }

        match spec.optimizer {
            Optimizer::Gd { lr } => {
                for i in 0..7 {
                    p[i] -= lr * grad.0[i];
                }
            }
            Optimizer::Adam { lr, beta1, beta2, eps } => {
                let t = (step + 1) as i32;
                for i in 0..7 {
                    let g = grad.0[i];
                    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                    v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                    let m_hat = m[i] / (1.0 - beta1.powi(t));
                    let v_hat = v[i] / (1.0 - beta2.powi(t));
                    p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }

        if p.iter().any(|x| !x.is_finite()) {
            status = FitStatus::Diverged;
            break;
        }
        p[6] = wrap_angle(p[6]);
        for s in &mut p[3..6] {
            *s = s.max(MIN_SIZE);
        }
    }
    Ok(FitTrace { steps, status })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub n_pairs: usize,
    pub seed: u64,
    /// Open interval the initial IoU must fall in.
    pub iou_band: (f64, f64),
    pub losses: Vec<FitLoss>,
    pub optimizer: Optimizer,
    pub iterations: usize,
    pub k: f64,
    pub fd_step: f64,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self {
            n_pairs: 100,
            seed: 0,
            iou_band: (0.1, 0.5),
            losses: vec![FitLoss::RdiouDiou, FitLoss::Iou3dNumeric],
            optimizer: Optimizer::default(),
            iterations: 500,
            k: 1.0,
            fd_step: FD_STEP,
        }
    }
}

impl BenchSpec {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.iou_band;
        if !(0.0..1.0).contains(&lo) || !(hi > lo && hi <= 1.0) {
            return Err(invalid(format!("invalid initial IoU band ({lo}, {hi})")));
        }
        if self.iterations == 0 {
            return Err(invalid("iteration count must be at least 1"));
        }
        if !(self.optimizer.lr() > 0.0) {
            return Err(invalid("step size must be positive"));
        }
        if !(self.k > 0.0) {
            return Err(invalid("k must be positive"));
        }
        Ok(())
    }
}

/// Maximum rejection-sampling attempts per benchmark pair.
pub const MAX_TRIES: usize = 1000;

fn random_gt<R: Rng>(rng: &mut R) -> Box3D {
    Box3D {
        x: rng.gen_range(-2.0..=2.0),
        y: rng.gen_range(-2.0..=2.0),
        z: rng.gen_range(-0.5..=0.5),
        l: ANCHOR_SIZE[0] * rng.gen_range(0.8..=1.2),
        w: ANCHOR_SIZE[1] * rng.gen_range(0.8..=1.2),
        h: ANCHOR_SIZE[2] * rng.gen_range(0.8..=1.2),
        theta: wrap_angle(rng.gen_range(-PI..PI)),
    }
}

fn perturb<R: Rng>(gt: &Box3D, rng: &mut R) -> Box3D {
    Box3D {
        x: gt.x + rng.gen_range(-2.0..=2.0),
        y: gt.y + rng.gen_range(-2.0..=2.0),
        z: gt.z + rng.gen_range(-0.3..=0.3),
        l: gt.l * rng.gen_range(0.7..=1.3),
        w: gt.w * rng.gen_range(0.7..=1.3),
        h: gt.h * rng.gen_range(0.7..=1.3),
        theta: wrap_angle(gt.theta + rng.gen_range(-FRAC_PI_2..=FRAC_PI_2)),
    }
}

/// Seeded `(gt, init)` pairs whose initial IoU lies strictly inside `band`.
/// A pair that fails [`MAX_TRIES`] times is dropped.
pub fn benchmark_pairs(n: usize, seed: u64, band: (f64, f64)) -> Vec<(Box3D, Box3D)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(n);
    for _ in 0..n {
        let gt = random_gt(&mut rng);
        for _ in 0..MAX_TRIES {
            let init = perturb(&gt, &mut rng);
            let iou = iou_3d(&init, &gt);
            if iou > band.0 && iou < band.1 {
                pairs.push((gt, init));
                break;
            }
        }
    }
    pairs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub loss: FitLoss,
    pub pairs: usize,
    pub mean_initial_iou: f64,
    pub mean_final_iou: f64,
    pub median_final_iou: f64,
    pub reached_07: usize,
    pub frac_reached_07: f64,
    pub diverged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub rows: Vec<BenchRow>,
    /// Final IoU per pair, one vector per entry of `rows`.
    pub final_ious: Vec<Vec<f64>>,
}

impl BenchSummary {
    pub fn row(&self, loss: FitLoss) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.loss == loss)
    }
}

fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Run [`fit_box`] under every requested loss on the same seeded pairs.
pub fn fit_benchmark(spec: &BenchSpec) -> Result<BenchSummary> {
    spec.validate()?;
    if spec.n_pairs == 0 {
        return Ok(BenchSummary { rows: Vec::new(), final_ious: Vec::new() });
    }
    let pairs = benchmark_pairs(spec.n_pairs, spec.seed, spec.iou_band);
    let initial: Vec<f64> = pairs.iter().map(|(gt, init)| iou_3d(init, gt)).collect();

    let mut rows = Vec::with_capacity(spec.losses.len());
    let mut finals = Vec::with_capacity(spec.losses.len());
    for &loss in &spec.losses {
        let traces: Vec<FitTrace> = pairs
            .par_iter()
            .map(|(gt, init)| {
                let fit = FitSpec {
                    gt: *gt,
                    init: *init,
                    loss,
                    optimizer: spec.optimizer,
                    iterations: spec.iterations,
                    k: spec.k,
                    fd_step: spec.fd_step,
                };
                fit_box(&fit)
            })
            .collect::<Result<_>>()?;
        let final_iou: Vec<f64> = traces.iter().map(FitTrace::final_iou).collect();
        let reached = final_iou.iter().filter(|v| **v >= 0.7).count();
        rows.push(BenchRow {
            loss,
            pairs: pairs.len(),
            mean_initial_iou: mean(&initial),
            mean_final_iou: mean(&final_iou),
            median_final_iou: median(&final_iou),
            reached_07: reached,
            frac_reached_07: reached as f64 / pairs.len() as f64,
            diverged: traces.iter().filter(|t| t.status == FitStatus::Diverged).count(),
        });
        finals.push(final_iou);
    }
    Ok(BenchSummary { rows, final_ious: finals })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSweepSpec {
    pub sweep: SweepSpec,
    /// Rotation difference at which per-k values are reported.
    pub probe_dtheta: f64,
    /// Optional fit benchmark repeated at every k (rdiou losses only).
    pub bench: Option<BenchSpec>,
}

impl Default for KSweepSpec {
    fn default() -> Self {
        Self {
            sweep: SweepSpec { ks: K_SWEEP_VALUES.to_vec(), ..SweepSpec::default() },
            probe_dtheta: PI / 4.0,
            bench: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSweepRow {
    pub k: f64,
    pub probe_dtheta: f64,
    pub rdiou_at_probe: f64,
    pub iou3d_at_probe: f64,
    pub grad_rdiou_theta_at_probe: f64,
    /// Mean RDIoU over the sweep grid.
    pub mean_rdiou: f64,
    /// Mean `|RDIoU − IoU3D|` over the sweep grid.
    pub mean_abs_gap: f64,
    pub fit_loss: Option<FitLoss>,
    pub fit_mean_final_iou: Option<f64>,
    pub fit_frac_reached_07: Option<f64>,
}

/// Loss-landscape and fit-quality summaries for each k in `spec.sweep.ks`.
pub fn k_sweep(spec: &KSweepSpec) -> Result<Vec<KSweepRow>> {
    spec.sweep.validate()?;
    let target = spec.sweep.target();
    let probe = spec.sweep.prediction(spec.probe_dtheta);
    let iou3d_at_probe = iou_3d(&probe, &target);

    spec.sweep
        .ks
        .iter()
        .map(|&k| {
            let one = SweepSpec { ks: vec![k], ..spec.sweep.clone() };
            let records = rotation_value_sweep(&one)?;
            let obj = RdiouObjective { target: target.to_array(), k };
            let (rdiou_at_probe, g) = value_and_gradient(&obj, &probe.to_array());
            let rd: Vec<f64> = records.iter().map(|r| r.rdiou).collect();
            let gaps: Vec<f64> = records.iter().map(|r| (r.rdiou - r.iou3d).abs()).collect();

            let (fit_loss, fit_mean, fit_frac) = match &spec.bench {
                Some(b) => {
                    let bench = BenchSpec { k, ..b.clone() };
                    let summary = fit_benchmark(&bench)?;
                    match summary.rows.first() {
                        Some(row) => (Some(row.loss), Some(row.mean_final_iou), Some(row.frac_reached_07)),
                        None => (None, None, None),
                    }
                }
                None => (None, None, None),
            };

            Ok(KSweepRow {
                k,
                probe_dtheta: spec.probe_dtheta,
                rdiou_at_probe,
                iou3d_at_probe,
                grad_rdiou_theta_at_probe: g.dtheta(),
                mean_rdiou: mean(&rd),
                mean_abs_gap: mean(&gaps),
                fit_loss,
                fit_mean_final_iou: fit_mean,
                fit_frac_reached_07: fit_frac,
            })
        })
        .collect()
}
