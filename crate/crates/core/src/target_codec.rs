//! Anchor-relative regression targets.
//!
//! Centers are offset by the anchor and normalized (x, y by the anchor's
//! base diagonal, z by its height); sizes are plain ratios to the anchor
//! size; yaw is a plain difference with no wrapping.

use serde::{Deserialize, Serialize};

use crate::box_geometry::Box3D;
use crate::error::{invalid, Result};

/// Seven-value encoded box: normalized center offsets, size ratios and
/// yaw residual. Network outputs share the same layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionVector {
    pub xt: f64,
    pub yt: f64,
    pub zt: f64,
    pub lt: f64,
    pub wt: f64,
    pub ht: f64,
    pub thetat: f64,
}

impl RegressionVector {
    pub fn new(xt: f64, yt: f64, zt: f64, lt: f64, wt: f64, ht: f64, thetat: f64) -> Self {
        Self { xt, yt, zt, lt, wt, ht, thetat }
    }

    pub fn to_array(&self) -> [f64; 7] {
        [self.xt, self.yt, self.zt, self.lt, self.wt, self.ht, self.thetat]
    }

    pub fn from_array(p: [f64; 7]) -> Self {
        Self::new(p[0], p[1], p[2], p[3], p[4], p[5], p[6])
    }

    /// Reads a box's parameters verbatim, i.e. encodes it against an
    /// identity anchor (zero center, unit sizes, zero yaw).
    pub fn raw(b: &Box3D) -> Self {
        Self::from_array(b.to_array())
    }

    pub fn validate(&self) -> Result<()> {
        if self.to_array().iter().any(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite regression value in {self:?}")));
        }
        if !(self.lt > 0.0 && self.wt > 0.0 && self.ht > 0.0) {
            return Err(invalid(format!(
                "size ratios must be positive, got ({}, {}, {})",
                self.lt, self.wt, self.ht
            )));
        }
        Ok(())
    }
}

/// Diagonal of the anchor's footprint.
pub fn anchor_diag(a: &Box3D) -> f64 {
    a.l.hypot(a.w)
}

pub fn encode(g: &Box3D, a: &Box3D) -> RegressionVector {
    let d = anchor_diag(a);
    RegressionVector {
        xt: (g.x - a.x) / d,
        yt: (g.y - a.y) / d,
        zt: (g.z - a.z) / a.h,
        lt: g.l / a.l,
        wt: g.w / a.w,
        ht: g.h / a.h,
        thetat: g.theta - a.theta,
    }
}

pub fn decode(r: &RegressionVector, a: &Box3D) -> Result<Box3D> {
    r.validate()?;
    let d = anchor_diag(a);
    Box3D::new(
        r.xt * d + a.x,
        r.yt * d + a.y,
        r.zt * a.h + a.z,
        r.lt * a.l,
        r.wt * a.w,
        r.ht * a.h,
        r.thetat + a.theta,
    )
}
