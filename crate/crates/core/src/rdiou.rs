//! Rotation-decoupled IoU.
//!
//! The yaw of each box is mapped to a fourth coordinate,
//! `θo' = sin θo · cos θt` and `θt' = cos θo · sin θt`, with a fixed edge `k`
//! for both boxes. The IoU of the resulting pair of axis-aligned 4D boxes
//! replaces the rotated 3D IoU. Because `θo' − θt' = sin(θo − θt)` the fourth
//! overlap is `k − |sin Δθ|` and rotation never interacts with the spatial
//! terms.
//!
//! The mapping is not symmetric in `(o, t)` once both yaws are nonzero;
//! it is implemented as written.
//!
//! Everything here is generic over [`Scalar`] so that [`crate::grad`] can
//! differentiate the very same code.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Scalar;
use crate::target_codec::RegressionVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdiouConfig {
    /// Edge length of the rotation dimension.
    pub k: f64,
}

impl RdiouConfig {
    pub fn new(k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(invalid(format!("k must be positive and finite, got {k}")));
        }
        Ok(Self { k })
    }
}

impl Default for RdiouConfig {
    fn default() -> Self {
        Self { k: 1.0 }
    }
}

/// A 4D axis-aligned box: center `(x, y, z, θ')` and extent `(l, w, h, k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoupledBox4<S = f64> {
    pub c: [S; 4],
    pub e: [S; 4],
}

/// Both decoupled boxes of a prediction/target pair.
#[derive(Debug, Clone, Copy)]
pub struct DecoupledPair<S> {
    pub o: DecoupledBox4<S>,
    pub t: DecoupledBox4<S>,
}

impl<S: Scalar> DecoupledPair<S> {
    pub fn from_params(o: &[S; 7], t: &[S; 7], k: f64) -> Self {
        let (so, co) = (o[6].sin(), o[6].cos());
        let (st, ct) = (t[6].sin(), t[6].cos());
        let k = S::cst(k);
        Self {
            o: DecoupledBox4 {
                c: [o[0], o[1], o[2], so * ct],
                e: [o[3], o[4], o[5], k],
            },
            t: DecoupledBox4 {
                c: [t[0], t[1], t[2], co * st],
                e: [t[3], t[4], t[5], k],
            },
        }
    }

    /// Raw per-axis overlaps (negative when disjoint).
    pub fn overlaps(&self) -> [S; 4] {
        std::array::from_fn(|i| overlap_1d(self.o.c[i], self.t.c[i], self.o.e[i], self.t.e[i]))
    }

    pub fn intersection(&self) -> S {
        self.overlaps()
            .into_iter()
            .map(|f| f.max_first(S::cst(0.0)))
            .fold(S::cst(1.0), |acc, f| acc * f)
    }

    pub fn iou(&self) -> S {
        let inter = self.intersection();
        let vol_o = self.o.e[0] * self.o.e[1] * self.o.e[2] * self.o.e[3];
        let vol_t = self.t.e[0] * self.t.e[1] * self.t.e[2] * self.t.e[3];
        inter / (vol_o + vol_t - inter)
    }

    /// Sum over the four axes of the squared enclosing extent.
    pub fn enclosing_diag(&self) -> S {
        (0..4).fold(S::cst(0.0), |acc, i| {
            acc + enclosing_1d(self.o.c[i], self.t.c[i], self.o.e[i], self.t.e[i]).powi2()
        })
    }

    pub fn center_dist_sq(&self) -> S {
        (0..4).fold(S::cst(0.0), |acc, i| acc + (self.o.c[i] - self.t.c[i]).powi2())
    }

    pub fn center_penalty(&self) -> S {
        self.center_dist_sq() / self.enclosing_diag()
    }
}

impl DecoupledPair<f64> {
    /// Distance from the nearest min/max tie in any overlap, clamp or
    /// enclosing term. Zero means the point sits exactly on a kink.
    pub fn tie_gap(&self) -> f64 {
        let mut gap = f64::INFINITY;
        for i in 0..4 {
            let (oc, tc, oe, te) = (self.o.c[i], self.t.c[i], self.o.e[i], self.t.e[i]);
            let hi = ((oc + 0.5 * oe) - (tc + 0.5 * te)).abs();
            let lo = ((oc - 0.5 * oe) - (tc - 0.5 * te)).abs();
            let f = overlap_1d(oc, tc, oe, te).abs();
            gap = gap.min(hi).min(lo).min(f);
        }
        gap
    }
}

/// Signed overlap of `[ac ± ae/2]` and `[tc ± te/2]`.
#[inline]
pub fn overlap_1d<S: Scalar>(ac: S, tc: S, ae: S, te: S) -> S {
    let hi = (ac + ae * 0.5).min_first(tc + te * 0.5);
    let lo = (ac - ae * 0.5).max_first(tc - te * 0.5);
    hi - lo
}

/// Length of the smallest interval enclosing both.
#[inline]
pub fn enclosing_1d<S: Scalar>(ac: S, tc: S, ae: S, te: S) -> S {
    let hi = (ac + ae * 0.5).max_first(tc + te * 0.5);
    let lo = (ac - ae * 0.5).min_first(tc - te * 0.5);
    hi - lo
}

fn pair(o: &RegressionVector, t: &RegressionVector, cfg: &RdiouConfig) -> Result<DecoupledPair<f64>> {
    o.validate()?;
    t.validate()?;
    Ok(DecoupledPair::from_params(&o.to_array(), &t.to_array(), cfg.k))
}

pub fn decouple(
    o: &RegressionVector,
    t: &RegressionVector,
    cfg: &RdiouConfig,
) -> Result<(DecoupledBox4, DecoupledBox4)> {
    let p = pair(o, t, cfg)?;
    Ok((p.o, p.t))
}

pub fn rdiou(o: &RegressionVector, t: &RegressionVector, cfg: &RdiouConfig) -> Result<f64> {
    Ok(pair(o, t, cfg)?.iou())
}

pub fn enclosing_diag(o: &RegressionVector, t: &RegressionVector, cfg: &RdiouConfig) -> Result<f64> {
    Ok(pair(o, t, cfg)?.enclosing_diag())
}

/// Squared 4D center distance over the enclosing diagonal, in `[0, 1)`.
pub fn center_penalty(o: &RegressionVector, t: &RegressionVector, cfg: &RdiouConfig) -> Result<f64> {
    Ok(pair(o, t, cfg)?.center_penalty())
}

pub fn tie_gap(o: &RegressionVector, t: &RegressionVector, cfg: &RdiouConfig) -> Result<f64> {
    Ok(pair(o, t, cfg)?.tie_gap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};

    fn unit(x: f64, theta: f64) -> RegressionVector {
        RegressionVector::new(x, 0.0, 0.0, 1.0, 1.0, 1.0, theta)
    }

    #[test]
    fn decouple_examples() {
        let cfg = RdiouConfig::default();
        let (o, t) = decouple(&unit(0.0, 0.0), &unit(0.0, 0.0), &cfg).unwrap();
        assert_eq!((o.c[3], t.c[3]), (0.0, 0.0));

        let (o, t) = decouple(&unit(0.0, FRAC_PI_2), &unit(0.0, 0.0), &cfg).unwrap();
        assert_abs_diff_eq!(o.c[3], 1.0, epsilon = 1e-15);
        assert_eq!(t.c[3], 0.0);

        let (o, t) = decouple(&unit(0.0, FRAC_PI_3), &unit(0.0, FRAC_PI_3), &cfg).unwrap();
        assert_abs_diff_eq!(o.c[3], 0.433_013, epsilon = 1e-6);
        assert_abs_diff_eq!(t.c[3], 0.433_013, epsilon = 1e-6);
        assert_eq!(o.e, [1.0, 1.0, 1.0, 1.0]);

        let bad = RegressionVector { wt: 0.0, ..unit(0.0, 0.0) };
        assert!(decouple(&bad, &unit(0.0, 0.0), &cfg).is_err());
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(overlap_1d(0.0, 0.0, 1.0, 1.0), 1.0);
        assert_abs_diff_eq!(overlap_1d(0.2, 0.0, 1.0, 1.0), 0.8, epsilon = 1e-15);
        assert_eq!(overlap_1d(3.0, 0.0, 1.0, 1.0), -2.0);
    }

    #[test]
    fn rdiou_examples() {
        let cfg = RdiouConfig::default();
        let t = unit(0.0, 0.0);
        assert_eq!(rdiou(&t, &t, &cfg).unwrap(), 1.0);
        assert_abs_diff_eq!(rdiou(&unit(0.2, 0.0), &t, &cfg).unwrap(), 0.8 / 1.2, epsilon = 1e-15);
        assert_eq!(rdiou(&unit(0.0, FRAC_PI_2), &t, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn two_negative_overlaps_do_not_make_volume() {
        let cfg = RdiouConfig::default();
        let o = RegressionVector::new(3.0, 3.0, 0.0, 1.0, 1.0, 1.0, 0.0);
        assert_eq!(rdiou(&o, &unit(0.0, 0.0), &cfg).unwrap(), 0.0);
    }

    #[test]
    fn diag_examples() {
        let cfg = RdiouConfig::default();
        let t = unit(0.0, 0.0);
        assert_eq!(enclosing_diag(&t, &t, &cfg).unwrap(), 4.0);
        assert_abs_diff_eq!(enclosing_diag(&unit(0.2, 0.0), &t, &cfg).unwrap(), 4.44, epsilon = 1e-12);

        let big = RegressionVector::new(0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 0.0);
        let cfg2 = RdiouConfig::new(2.0).unwrap();
        assert_eq!(enclosing_diag(&big, &big, &cfg2).unwrap(), 16.0);
    }

    #[test]
    fn penalty_examples() {
        let cfg = RdiouConfig::default();
        let t = unit(0.0, 0.0);
        assert_eq!(center_penalty(&t, &t, &cfg).unwrap(), 0.0);
        assert_abs_diff_eq!(
            center_penalty(&unit(0.2, 0.0), &t, &cfg).unwrap(),
            0.04 / 4.44,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            center_penalty(&unit(0.0, FRAC_PI_2), &t, &cfg).unwrap(),
            1.0 / 7.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn rejects_non_positive_k() {
        assert!(RdiouConfig::new(0.0).is_err());
        assert!(RdiouConfig::new(-1.0).is_err());
        assert!(RdiouConfig::new(f64::NAN).is_err());
    }

    #[test]
    fn tie_gap_zero_at_coincidence() {
        let cfg = RdiouConfig::default();
        let t = unit(0.0, 0.0);
        assert_eq!(tie_gap(&t, &t, &cfg).unwrap(), 0.0);
        let o = RegressionVector::new(0.2, 0.15, -0.05, 1.3, 0.8, 1.2, 0.3);
        assert!(tie_gap(&o, &t, &cfg).unwrap() > 0.01);
    }
}
