//! Losses guided by the rotation-decoupled IoU.
//!
//! Regression: IoU-, DIoU- and CIoU-style losses over the 4D decoupled
//! boxes. Classification: a quality focal loss whose soft target is the
//! RDIoU. Plus the direction cross-entropy and the weighted total.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rdiou::{DecoupledPair, RdiouConfig};
use crate::scalar::Scalar;
use crate::target_codec::RegressionVector;

/// Weights of the direction and regression terms in [`total_loss`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub gamma1: f64,
    pub gamma2: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { gamma1: 0.2, gamma2: 2.0 }
    }
}

impl LossWeights {
    pub fn new(gamma1: f64, gamma2: f64) -> Result<Self> {
        if !(gamma1 >= 0.0 && gamma2 >= 0.0) {
            return Err(invalid(format!("loss weights must be >= 0, got ({gamma1}, {gamma2})")));
        }
        Ok(Self { gamma1, gamma2 })
    }
}

/// Focal modulation of [`rqfl`]: scale `beta1`, exponent `beta2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QflParams {
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for QflParams {
    fn default() -> Self {
        Self { beta1: 0.25, beta2: 2.0 }
    }
}

impl QflParams {
    pub fn new(beta1: f64, beta2: f64) -> Result<Self> {
        if !(beta1 > 0.0 && beta2 >= 0.0) {
            return Err(invalid(format!("need beta1 > 0 and beta2 >= 0, got ({beta1}, {beta2})")));
        }
        Ok(Self { beta1, beta2 })
    }
}

/// Which RDIoU-guided regression loss to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Iou,
    Diou,
    Ciou,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::Iou, LossKind::Diou, LossKind::Ciou];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Iou => "iou",
            LossKind::Diou => "diou",
            LossKind::Ciou => "ciou",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iou" => Ok(LossKind::Iou),
            "diou" => Ok(LossKind::Diou),
            "ciou" => Ok(LossKind::Ciou),
            other => Err(invalid(format!("unknown loss kind {other:?}"))),
        }
    }
}

/// CIoU aspect-ratio term `(4/π²)(atan(lt/wt) − atan(lo/wo))²`.
pub fn aspect_term<S: Scalar>(o: &[S; 7], t: &[S; 7]) -> S {
    let d = (t[3] / t[4]).atan() - (o[3] / o[4]).atan();
    d.powi2() * (4.0 / (PI * PI))
}

/// Regression loss on raw parameter arrays; shared by values and gradients.
pub fn regression_loss_generic<S: Scalar>(kind: LossKind, o: &[S; 7], t: &[S; 7], k: f64) -> S {
    let pair = DecoupledPair::from_params(o, t, k);
    let iou_term = S::cst(1.0) - pair.iou();
    match kind {
        LossKind::Iou => iou_term,
        LossKind::Diou => iou_term + pair.center_penalty(),
        LossKind::Ciou => {
            let v = aspect_term(o, t);
            let alpha = ciou_alpha(iou_term.re(), v.re());
            iou_term + pair.center_penalty() + v * alpha
        }
    }
}

/// CIoU trade-off weight, held constant under differentiation.
pub fn ciou_alpha(one_minus_iou: f64, v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v / (one_minus_iou + v)
    }
}

pub fn regression_loss(
    kind: LossKind,
    o: &RegressionVector,
    t: &RegressionVector,
    cfg: &RdiouConfig,
) -> Result<f64> {
    o.validate()?;
    t.validate()?;
    Ok(regression_loss_generic(kind, &o.to_array(), &t.to_array(), cfg.k))
}

/// `1 − RDIoU + ρc`.
pub fn rdiou_diou_loss(o: &RegressionVector, t: &RegressionVector, cfg: &RdiouConfig) -> Result<f64> {
    regression_loss(LossKind::Diou, o, t, cfg)
}

/// `1 − RDIoU`.
pub fn rdiou_iou_loss(o: &RegressionVector, t: &RegressionVector, cfg: &RdiouConfig) -> Result<f64> {
    regression_loss(LossKind::Iou, o, t, cfg)
}

/// `1 − RDIoU + ρc + αv` with α treated as a constant.
pub fn rdiou_ciou_loss(o: &RegressionVector, t: &RegressionVector, cfg: &RdiouConfig) -> Result<f64> {
    regression_loss(LossKind::Ciou, o, t, cfg)
}

pub fn rqfl_generic<S: Scalar>(rd: S, y: S, p: &QflParams) -> S {
    let modulation = (rd - y).abs().powf(p.beta2) * p.beta1;
    let bce = (S::cst(1.0) - rd) * (S::cst(1.0) - y).ln() + rd * y.ln();
    -(modulation * bce)
}

/// Quality focal loss with soft target `rd` (the RDIoU) and prediction `y`.
pub fn rqfl(rd: f64, y: f64, p: &QflParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&rd) {
        return Err(invalid(format!("quality target must lie in [0, 1], got {rd}")));
    }
    if !(y > 0.0 && y < 1.0) {
        return Err(invalid(format!("prediction must lie in (0, 1), got {y}")));
    }
    Ok(rqfl_generic(rd, y, p))
}

/// Binary cross-entropy on `sigmoid(logit)` for direction bin `target_bin`.
pub fn direction_ce(logit: f64, target_bin: u8) -> f64 {
    let softplus = logit.max(0.0) + (-logit.abs()).exp().ln_1p();
    if target_bin == 1 {
        softplus - logit
    } else {
        softplus
    }
}

/// Direction bin of a ground-truth yaw: 1 when `sin θ ≥ 0`.
pub fn direction_target(theta_g: f64) -> u8 {
    u8::from(theta_g.sin() >= 0.0)
}

pub fn total_loss(l_rqfl: f64, l_d: f64, l_rl: f64, w: &LossWeights) -> f64 {
    l_rqfl + w.gamma1 * l_d + w.gamma2 * l_rl
}
