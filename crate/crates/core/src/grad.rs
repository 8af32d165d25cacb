//! Exact gradients via forward-mode duals, and finite-difference checking.
//!
//! An [`Objective`] is a scalar function of the prediction's seven
//! parameters written once, generic over [`Scalar`]. Evaluating it with
//! `Dual<7>` seeds one tangent per parameter and yields the full gradient in
//! a single pass.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::box_geometry::{iou_3d, Box3D};
use crate::error::Result;
use crate::losses::{aspect_term, ciou_alpha, regression_loss_generic, rqfl_generic, LossKind, QflParams};
use crate::rdiou::{DecoupledPair, RdiouConfig};
use crate::scalar::{Dual, Scalar};
use crate::target_codec::RegressionVector;

pub type Dual7 = Dual<7>;

pub const PARAM_NAMES: [&str; 7] = ["x", "y", "z", "l", "w", "h", "theta"];

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-6;
/// Min/max arguments closer than this count as tied.
pub const TIE_EPS: f64 = 1e-9;
/// Below this magnitude components are compared absolutely.
pub const SMALL_GRAD: f64 = 1e-6;
pub const SMALL_GRAD_ABS_TOL: f64 = 1e-8;

/// Partial derivatives with respect to `x, y, z, l, w, h, theta`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GradVector7(pub [f64; 7]);

impl GradVector7 {
    pub fn dx(&self) -> f64 {
        self.0[0]
    }
    pub fn dy(&self) -> f64 {
        self.0[1]
    }
    pub fn dz(&self) -> f64 {
        self.0[2]
    }
    pub fn dl(&self) -> f64 {
        self.0[3]
    }
    pub fn dw(&self) -> f64 {
        self.0[4]
    }
    pub fn dh(&self) -> f64 {
        self.0[5]
    }
    pub fn dtheta(&self) -> f64 {
        self.0[6]
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|g| g.is_finite())
    }
}

impl std::ops::Neg for GradVector7 {
    type Output = Self;
    fn neg(self) -> Self {
        Self(self.0.map(|g| -g))
    }
}

/// A scalar function of a prediction's seven parameters.
pub trait Objective: Sync {
    fn eval<S: Scalar>(&self, p: &[S; 7]) -> S;

    /// Value used for finite differences around `base`, in double-double
    /// precision. Differs from [`Objective::eval`] only for objectives with
    /// stop-gradient terms, which must be frozen at `base`.
    fn eval_fd(&self, _base: &[f64; 7], p: &[f64; 7]) -> TwoFloat {
        self.eval(&lift(p))
    }

    /// Distance to the nearest non-differentiable tie at `p`.
    fn tie_gap(&self, _p: &[f64; 7]) -> f64 {
        f64::INFINITY
    }

    fn name(&self) -> String;
}

pub fn value_and_gradient<O: Objective + ?Sized>(obj: &O, p: &[f64; 7]) -> (f64, GradVector7) {
    let seeded: [Dual7; 7] = std::array::from_fn(|i| Dual7::variable(p[i], i));
    let out = obj.eval(&seeded);
    (out.re, GradVector7(out.eps))
}

fn lift<S: Scalar>(t: &[f64; 7]) -> [S; 7] {
    t.map(S::cst)
}

/// RDIoU as a function of the prediction.
#[derive(Debug, Clone, Copy)]
pub struct RdiouObjective {
    pub target: [f64; 7],
    pub k: f64,
}

impl Objective for RdiouObjective {
    fn eval<S: Scalar>(&self, p: &[S; 7]) -> S {
        DecoupledPair::from_params(p, &lift(&self.target), self.k).iou()
    }
    fn tie_gap(&self, p: &[f64; 7]) -> f64 {
        DecoupledPair::from_params(p, &self.target, self.k).tie_gap()
    }
    fn name(&self) -> String {
        "rdiou".into()
    }
}

/// One of the RDIoU-guided regression losses.
#[derive(Debug, Clone, Copy)]
pub struct LossObjective {
    pub kind: LossKind,
    pub target: [f64; 7],
    pub k: f64,
}

impl Objective for LossObjective {
    fn eval<S: Scalar>(&self, p: &[S; 7]) -> S {
        regression_loss_generic(self.kind, p, &lift(&self.target), self.k)
    }

    fn eval_fd(&self, base: &[f64; 7], p: &[f64; 7]) -> TwoFloat {
        let wide: [TwoFloat; 7] = lift(p);
        match self.kind {
            LossKind::Ciou => {
                let alpha = {
                    let pair = DecoupledPair::from_params(base, &self.target, self.k);
                    ciou_alpha(1.0 - pair.iou(), aspect_term(base, &self.target))
                };
                let target: [TwoFloat; 7] = lift(&self.target);
                let pair = DecoupledPair::from_params(&wide, &target, self.k);
                -pair.iou() + 1.0 + pair.center_penalty() + aspect_term(&wide, &target) * alpha
            }
            _ => self.eval(&wide),
        }
    }

    fn tie_gap(&self, p: &[f64; 7]) -> f64 {
        DecoupledPair::from_params(p, &self.target, self.k).tie_gap()
    }

    fn name(&self) -> String {
        format!("rdiou_{}_loss", self.kind)
    }
}

/// Quality focal loss with the RDIoU of the prediction as soft target and
/// a fixed classification output `y`.
#[derive(Debug, Clone, Copy)]
pub struct RqflObjective {
    pub target: [f64; 7],
    pub k: f64,
    pub y: f64,
    pub params: QflParams,
}

impl Objective for RqflObjective {
    fn eval<S: Scalar>(&self, p: &[S; 7]) -> S {
        let rd = DecoupledPair::from_params(p, &lift(&self.target), self.k).iou();
        rqfl_generic(rd, S::cst(self.y), &self.params)
    }
    fn tie_gap(&self, p: &[f64; 7]) -> f64 {
        DecoupledPair::from_params(p, &self.target, self.k).tie_gap()
    }
    fn name(&self) -> String {
        "rqfl".into()
    }
}

pub fn grad_rdiou(o: &RegressionVector, t: &RegressionVector, cfg: &RdiouConfig) -> Result<GradVector7> {
    o.validate()?;
    t.validate()?;
    let obj = RdiouObjective { target: t.to_array(), k: cfg.k };
    Ok(value_and_gradient(&obj, &o.to_array()).1)
}

pub fn grad_loss(
    kind: LossKind,
    o: &RegressionVector,
    t: &RegressionVector,
    cfg: &RdiouConfig,
) -> Result<GradVector7> {
    o.validate()?;
    t.validate()?;
    let obj = LossObjective { kind, target: t.to_array(), k: cfg.k };
    Ok(value_and_gradient(&obj, &o.to_array()).1)
}

/// Gradient of the quality focal loss with respect to the prediction box
/// (through its RDIoU), and its partial with respect to `y`.
pub fn grad_rqfl(
    o: &RegressionVector,
    t: &RegressionVector,
    y: f64,
    cfg: &RdiouConfig,
    params: &QflParams,
) -> Result<(GradVector7, f64)> {
    let rd = crate::rdiou::rdiou(o, t, cfg)?;
    crate::losses::rqfl(rd, y, params)?;
    let obj = RqflObjective { target: t.to_array(), k: cfg.k, y, params: *params };
    let g = value_and_gradient(&obj, &o.to_array()).1;
    let dy = rqfl_generic(Dual::<1>::constant(rd), Dual::<1>::variable(y, 0), params).eps[0];
    Ok((g, dy))
}

/// Central-difference gradient of the exact 3D IoU with respect to `a`.
pub fn grad_iou3d_numeric(a: &Box3D, b: &Box3D, step: f64) -> GradVector7 {
    assert!(step > 0.0, "finite-difference step must be positive");
    let base = a.to_array();
    GradVector7(std::array::from_fn(|i| {
        let mut plus = base;
        let mut minus = base;
        plus[i] += step;
        minus[i] -= step;
        let fp = iou_3d(&Box3D::from_array(plus), b);
        let fm = iou_3d(&Box3D::from_array(minus), b);
        (fp - fm) / (2.0 * step)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentCheck {
    pub analytic: f64,
    pub numeric: f64,
    pub abs_err: f64,
    pub rel_err: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kink {
    /// A min/max tie within [`TIE_EPS`]: the analytic value is a subgradient.
    Tie,
    /// A tie lies inside the difference stencil, so the quotient straddles it.
    Straddled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdReport {
    pub components: [ComponentCheck; 7],
    pub kink: Option<Kink>,
    pub tie_gap: f64,
    pub max_rel_err: f64,
    /// All components within tolerance. Always true at kinks, which are
    /// flagged instead of failed.
    pub passed: bool,
}

/// Compare the dual-number gradient of `obj` at `o` with central differences.
pub fn fd_check<O: Objective + ?Sized>(obj: &O, o: &[f64; 7], step: f64, tol: f64) -> FdReport {
    let (_, analytic) = value_and_gradient(obj, o);
    let tie_gap = obj.tie_gap(o);
    let kink = if tie_gap <= TIE_EPS {
        Some(Kink::Tie)
    } else if tie_gap < 2.0 * step {
        Some(Kink::Straddled)
    } else {
        None
    };

    let components: [ComponentCheck; 7] = std::array::from_fn(|i| {
        let mut plus = *o;
        let mut minus = *o;
        plus[i] += step;
        minus[i] -= step;
        // the realized stencil width, exact in f64
        let width = plus[i] - minus[i];
        let numeric = ((obj.eval_fd(o, &plus) - obj.eval_fd(o, &minus)) / width).re();
        let a = analytic.0[i];
        let abs_err = (a - numeric).abs();
        let scale = a.abs().max(numeric.abs());
        let rel_err = if scale > 0.0 { abs_err / scale } else { 0.0 };
        let ok = if a.abs() < SMALL_GRAD {
            abs_err <= SMALL_GRAD_ABS_TOL
        } else {
            rel_err <= tol
        };
        ComponentCheck { analytic: a, numeric, abs_err, rel_err, ok }
    });

    let max_rel_err = components
        .iter()
        .filter(|c| c.analytic.abs() >= SMALL_GRAD)
        .map(|c| c.rel_err)
        .fold(0.0, f64::max);
    let passed = kink.is_some() || components.iter().all(|c| c.ok);
    FdReport { components, kink, tie_gap, max_rel_err, passed }
}

/// A random prediction/target pair with overlapping decoupled boxes.
pub fn random_probe_pair<R: Rng>(rng: &mut R) -> ([f64; 7], [f64; 7]) {
    let t = [
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(0.5..2.0),
        rng.gen_range(0.5..2.0),
        rng.gen_range(0.5..2.0),
        rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
    ];
    let o = [
        t[0] + rng.gen_range(-0.4..0.4),
        t[1] + rng.gen_range(-0.4..0.4),
        t[2] + rng.gen_range(-0.4..0.4),
        t[3] * rng.gen_range(0.7..1.4),
        t[4] * rng.gen_range(0.7..1.4),
        t[5] * rng.gen_range(0.7..1.4),
        t[6] + rng.gen_range(-1.0..1.0),
    ];
    (o, t)
}

/// Outcome of checking one objective family over many random points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub objective: String,
    pub checked: usize,
    pub skipped_kinks: usize,
    pub failures: usize,
    pub max_rel_err: f64,
}

impl ValidationRow {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Names of the objective families covered by [`validate_gradients`].
pub const VALIDATED_OBJECTIVES: [&str; 5] =
    ["rdiou", "rdiou_diou_loss", "rdiou_iou_loss", "rdiou_ciou_loss", "rqfl"];

fn objective_at(name: &str, target: [f64; 7], k: f64, y: f64) -> Box<dyn Fn(&[f64; 7], f64, f64) -> FdReport + Sync> {
    match name {
        "rdiou" => {
            let obj = RdiouObjective { target, k };
            Box::new(move |o, step, tol| fd_check(&obj, o, step, tol))
        }
        "rqfl" => {
            let obj = RqflObjective { target, k, y, params: QflParams::default() };
            Box::new(move |o, step, tol| fd_check(&obj, o, step, tol))
        }
        other => {
            let kind = match other {
                "rdiou_diou_loss" => LossKind::Diou,
                "rdiou_iou_loss" => LossKind::Iou,
                "rdiou_ciou_loss" => LossKind::Ciou,
                _ => unreachable!("unknown objective {other}"),
            };
            let obj = LossObjective { kind, target, k };
            Box::new(move |o, step, tol| fd_check(&obj, o, step, tol))
        }
    }
}

/// Check every objective in [`VALIDATED_OBJECTIVES`] on `n` seeded non-kink
/// points each. Kink points are drawn past and counted, not checked.
pub fn validate_gradients(n: usize, seed: u64, step: f64, tol: f64, k: f64) -> Vec<ValidationRow> {
    VALIDATED_OBJECTIVES
        .iter()
        .enumerate()
        .map(|(idx, name)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(idx as u64);
            let mut skipped = 0usize;
            let mut reports = Vec::with_capacity(n);
            // Draw sequentially so the point set is schedule-independent.
            let mut points = Vec::with_capacity(n);
            while points.len() < n {
                let (o, t) = random_probe_pair(&mut rng);
                let y = rng.gen_range(0.05..0.95);
                let gap = DecoupledPair::from_params(&o, &t, k).tie_gap();
                if gap < 2.0 * step {
                    skipped += 1;
                    continue;
                }
                points.push((o, t, y));
            }
            points
                .par_iter()
                .map(|(o, t, y)| objective_at(name, *t, k, *y)(o, step, tol))
                .collect_into_vec(&mut reports);
            let failures = reports.iter().filter(|r| !r.passed).count();
            let max_rel_err = reports.iter().map(|r| r.max_rel_err).fold(0.0, f64::max);
            ValidationRow {
                objective: name.to_string(),
                checked: n,
                skipped_kinks: skipped,
                failures,
                max_rel_err,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit(x: f64, theta: f64) -> RegressionVector {
        RegressionVector::new(x, 0.0, 0.0, 1.0, 1.0, 1.0, theta)
    }

    #[test]
    fn rdiou_gradient_at_offset_example() {
        let cfg = RdiouConfig::default();
        let g = grad_rdiou(&unit(0.2, 0.0), &unit(0.0, 0.0), &cfg).unwrap();
        // d/dI [I/(2-I)] = 2/(2-I)^2 at I = 0.8, times dF_x/dx = -1
        assert_abs_diff_eq!(g.dx(), -2.0 / 1.44, epsilon = 1e-12);
        assert_abs_diff_eq!(g.dx(), -1.388_889, epsilon = 1e-6);
        assert_eq!(g.dz(), 0.0);
        assert_eq!(g.dy(), 0.0);
    }

    #[test]
    fn rdiou_gradient_rotation_sign() {
        let cfg = RdiouConfig::default();
        let g = grad_rdiou(&unit(0.0, 0.3), &unit(0.0, 0.0), &cfg).unwrap();
        assert!(g.dtheta() < 0.0);
        // fourth overlap 1 - sin θ, Int = that, R = I/(2-I)
        let i = 1.0 - 0.3f64.sin();
        assert_abs_diff_eq!(g.dtheta(), 2.0 / (2.0 - i).powi(2) * -(0.3f64.cos()), epsilon = 1e-12);
    }

    #[test]
    fn loss_gradients() {
        let cfg = RdiouConfig::default();
        let (o, t) = (unit(0.2, 0.0), unit(0.0, 0.0));
        let giou = grad_loss(LossKind::Iou, &o, &t, &cfg).unwrap();
        assert_eq!(giou, -grad_rdiou(&o, &t, &cfg).unwrap());

        let gd = grad_loss(LossKind::Diou, &o, &t, &cfg).unwrap();
        // ρ = dx²/(G(x) + 3) with G(x) = (x + 1)² for x > 0
        let x: f64 = 0.2;
        let drho = 2.0 * x / ((x + 1.0).powi(2) + 3.0) - x * x * 2.0 * (x + 1.0) / ((x + 1.0).powi(2) + 3.0).powi(2);
        assert_abs_diff_eq!(gd.dx(), 2.0 / 1.44 + drho, epsilon = 1e-12);
    }

    #[test]
    fn gradient_near_coincidence_points_home() {
        // IoU-type losses are kinked at their minimum, so the gradient stays
        // O(1/size) nearby; it must still point away from the target.
        let cfg = RdiouConfig::default();
        let t = RegressionVector::new(0.1, -0.2, 0.3, 1.2, 0.9, 1.1, 0.4);
        let o = RegressionVector::new(0.101, -0.199, 0.301, 1.201, 0.901, 1.101, 0.401);
        let delta: Vec<f64> = o.to_array().iter().zip(t.to_array()).map(|(a, b)| a - b).collect();
        for kind in LossKind::ALL {
            let g = grad_loss(kind, &o, &t, &cfg).unwrap();
            let dot: f64 = g.0.iter().zip(&delta).map(|(a, b)| a * b).sum();
            assert!(dot > 0.0, "{kind}: {g:?}");
            assert!(crate::losses::regression_loss(kind, &o, &t, &cfg).unwrap() < 0.01);
        }
    }

    #[test]
    fn rqfl_partial_in_y() {
        let cfg = RdiouConfig::default();
        let p = QflParams::default();
        let (o, t) = (unit(0.2, 0.0), unit(0.0, 0.0));
        let (_, dy) = grad_rqfl(&o, &t, 0.3, &cfg, &p).unwrap();
        let h = 1e-6;
        let rd = crate::rdiou::rdiou(&o, &t, &cfg).unwrap();
        let fd = (crate::losses::rqfl(rd, 0.3 + h, &p).unwrap() - crate::losses::rqfl(rd, 0.3 - h, &p).unwrap()) / (2.0 * h);
        assert_abs_diff_eq!(dy, fd, epsilon = 1e-8);
    }

    #[test]
    fn iou3d_numeric_gradients() {
        let a = Box3D::new(0.0, 0.0, 0.0, 3.9, 1.6, 1.56, 0.0).unwrap();
        assert_abs_diff_eq!(grad_iou3d_numeric(&a, &a, 1e-6).dtheta(), 0.0, epsilon = 1e-6);

        // Axis-aligned 2x2x2 cubes offset by s along x: with u = 2 - s,
        // IoU = 4u/(16 - 4u) = u/(4 - u), dIoU/ds = -4/(4 - u)^2 → -4/9 at s = 1.
        let c = Box3D::new(0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 0.0).unwrap();
        let s = Box3D { x: 1.0, ..c };
        let g = grad_iou3d_numeric(&s, &c, 1e-6);
        assert_abs_diff_eq!(g.dx(), -4.0 / 9.0, epsilon = 1e-6);
        // dIoU/dl at l = 2 for the shifted box: overlap grows by 1/2 per unit l,
        // I = 4(1 + dl/2), U = 8 + 4(2+dl) - I
        let i = 4.0;
        let u = 12.0;
        let expect = (2.0 * u - i * (4.0 - 2.0)) / (u * u);
        assert_abs_diff_eq!(g.dl(), expect, epsilon = 1e-6);

        let u0 = Box3D::new(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        let u3 = Box3D { theta: 0.3, ..u0 };
        assert!(grad_iou3d_numeric(&u3, &u0, 1e-6).dtheta() < 0.0);
    }

    struct Linear;
    impl Objective for Linear {
        fn eval<S: Scalar>(&self, p: &[S; 7]) -> S {
            p[0]
        }
        fn name(&self) -> String {
            "x".into()
        }
    }

    struct AbsX;
    impl Objective for AbsX {
        fn eval<S: Scalar>(&self, p: &[S; 7]) -> S {
            p[0].abs()
        }
        fn tie_gap(&self, p: &[f64; 7]) -> f64 {
            p[0].abs()
        }
        fn name(&self) -> String {
            "|x|".into()
        }
    }

    #[test]
    fn fd_check_linear_is_exact() {
        // x = 0 keeps x ± step exact, so the quotient is exact too
        let r = fd_check(&Linear, &[0.0, 1.0, 2.0, 1.0, 1.0, 1.0, 0.0], FD_STEP, 1e-12);
        assert!(r.passed);
        assert!(r.kink.is_none());
        assert_abs_diff_eq!(r.components[0].numeric, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fd_check_flags_kink() {
        let r = fd_check(&AbsX, &[0.0, 1.0, 2.0, 1.0, 1.0, 1.0, 0.0], FD_STEP, 1e-5);
        assert_eq!(r.kink, Some(Kink::Tie));
        assert!(r.passed);
        assert!(!r.components[0].ok);
        let r = fd_check(&AbsX, &[0.5, 1.0, 2.0, 1.0, 1.0, 1.0, 0.0], FD_STEP, 1e-5);
        assert!(r.kink.is_none() && r.passed);
    }

    #[test]
    fn fd_check_rdiou_small_batch() {
        let rows = validate_gradients(50, 3, FD_STEP, 1e-5, 1.0);
        for row in rows {
            assert!(row.passed(), "{row:?}");
        }
    }
}
