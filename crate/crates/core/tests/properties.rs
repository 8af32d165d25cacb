use std::f64::consts::PI;

use proptest::prelude::*;
use rdbox::box_geometry::{bev_corners, bev_intersection_area, convex_intersection};
use rdbox::losses::{direction_ce, direction_target};
use rdbox::rdiou::{tie_gap, DecoupledPair};
use rdbox::{
    bev_iou, center_penalty, decode, encode, iou_3d, rdiou, rdiou_ciou_loss, rdiou_diou_loss, rdiou_iou_loss, rqfl,
    Box3D, QflParams, RdiouConfig, RegressionVector,
};

fn boxes() -> impl Strategy<Value = Box3D> {
    (
        -3.0..3.0f64,
        -3.0..3.0f64,
        -3.0..3.0f64,
        0.5..5.0f64,
        0.5..5.0f64,
        0.5..5.0f64,
        -PI..PI,
    )
        .prop_map(|(x, y, z, l, w, h, theta)| Box3D { x, y, z, l, w, h, theta })
}

fn vectors() -> impl Strategy<Value = RegressionVector> {
    (
        -1.0..1.0f64,
        -1.0..1.0f64,
        -1.0..1.0f64,
        0.3..3.0f64,
        0.3..3.0f64,
        0.3..3.0f64,
        -PI..PI,
    )
        .prop_map(|(a, b, c, d, e, f, g)| RegressionVector::new(a, b, c, d, e, f, g))
}

fn ks() -> impl Strategy<Value = f64> {
    0.2..3.0f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn iou_symmetric_and_bounded(a in boxes(), b in boxes()) {
        let ab = iou_3d(&a, &b);
        let ba = iou_3d(&b, &a);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((bev_iou(&a, &b) - bev_iou(&b, &a)).abs() < 1e-12);
    }

    #[test]
    fn iou_self_is_one(a in boxes()) {
        prop_assert!((iou_3d(&a, &a) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn iou_rigid_motion_invariant(
        a in boxes(),
        b in boxes(),
        shift in prop::array::uniform3(-10.0..10.0f64),
        phi in -PI..PI,
    ) {
        let (s, c) = phi.sin_cos();
        let mv = |q: &Box3D| Box3D {
            x: c * q.x - s * q.y + shift[0],
            y: s * q.x + c * q.y + shift[1],
            z: q.z + shift[2],
            theta: q.theta + phi,
            ..*q
        };
        prop_assert!((iou_3d(&a, &b) - iou_3d(&mv(&a), &mv(&b))).abs() < 1e-9);
    }

    #[test]
    fn clip_area_bounded(a in boxes(), b in boxes()) {
        let pa = bev_corners(&a);
        let pb = bev_corners(&b);
        let inter = convex_intersection(&pa, &pb);
        let bound = pa.area().min(pb.area());
        prop_assert!(inter.area() <= bound * (1.0 + 1e-12) + 1e-12);
        prop_assert!((bev_intersection_area(&a, &b) - bev_intersection_area(&b, &a)).abs() < 1e-9);
    }

    #[test]
    fn codec_round_trip(g in boxes(), a in boxes()) {
        let back = decode(&encode(&g, &a), &a).unwrap();
        for (p, q) in back.to_array().iter().zip(g.to_array()) {
            prop_assert!((p - q).abs() <= 1e-12 * (1.0 + q.abs()));
        }
    }

    #[test]
    fn codec_translation_equivariant(g in boxes(), a in boxes(), d in prop::array::uniform3(-5.0..5.0f64)) {
        let mv = |q: &Box3D| Box3D { x: q.x + d[0], y: q.y + d[1], z: q.z + d[2], ..*q };
        let r1 = encode(&g, &a).to_array();
        let r2 = encode(&mv(&g), &mv(&a)).to_array();
        for (p, q) in r1.iter().zip(r2) {
            prop_assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn rdiou_range_and_identity(o in vectors(), t in vectors(), k in ks()) {
        let cfg = RdiouConfig::new(k).unwrap();
        let r = rdiou(&o, &t, &cfg).unwrap();
        prop_assert!((0.0..=1.0).contains(&r));
        prop_assert!((rdiou(&t, &t, &cfg).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rdiou_symmetric_at_equal_angles(o in vectors(), t in vectors(), k in ks()) {
        let cfg = RdiouConfig::new(k).unwrap();
        let o = RegressionVector { thetat: t.thetat, ..o };
        let d = rdiou(&o, &t, &cfg).unwrap() - rdiou(&t, &o, &cfg).unwrap();
        prop_assert!(d.abs() < 1e-12);
    }

    #[test]
    fn rdiou_closed_form(o in vectors(), t in vectors(), k in ks()) {
        let cfg = RdiouConfig::new(k).unwrap();
        let pair = DecoupledPair::from_params(&o.to_array(), &t.to_array(), k);
        let ov = pair.overlaps();
        let area = ov[0].max(0.0) * ov[1].max(0.0) * ov[2].max(0.0);
        let s = (o.thetat - t.thetat).sin();
        let int = area * (k - s.abs()).max(0.0);
        let vo = o.lt * o.wt * o.ht * k;
        let vt = t.lt * t.wt * t.ht * k;
        let expected = int / (vo + vt - int);
        prop_assert!((rdiou(&o, &t, &cfg).unwrap() - expected).abs() <= 1e-12);
    }

    #[test]
    fn rdiou_decreases_with_rotation(t in vectors(), k in 1.0..3.0f64, a in 0.0..1.5f64, b in 0.0..1.5f64) {
        prop_assume!((a - b).abs() > 1e-6);
        let cfg = RdiouConfig::new(k).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let at = |d: f64| {
            let o = RegressionVector { thetat: t.thetat + d, ..t };
            rdiou(&o, &t, &cfg).unwrap()
        };
        prop_assert!(at(lo) > at(hi));
    }

    #[test]
    fn center_penalty_range(o in vectors(), t in vectors(), k in ks()) {
        let cfg = RdiouConfig::new(k).unwrap();
        let rho = center_penalty(&o, &t, &cfg).unwrap();
        prop_assert!((0.0..1.0).contains(&rho));
        prop_assert!(tie_gap(&o, &t, &cfg).unwrap() >= 0.0);
    }

    #[test]
    fn regression_losses_bounded(o in vectors(), t in vectors(), k in ks()) {
        let cfg = RdiouConfig::new(k).unwrap();
        let iou = rdiou_iou_loss(&o, &t, &cfg).unwrap();
        let diou = rdiou_diou_loss(&o, &t, &cfg).unwrap();
        let ciou = rdiou_ciou_loss(&o, &t, &cfg).unwrap();
        prop_assert!((0.0..=1.0).contains(&iou));
        prop_assert!((0.0..2.0).contains(&diou));
        prop_assert!(diou >= iou && ciou >= diou);
        prop_assert!(ciou < 3.0);
    }

    #[test]
    fn rqfl_nonnegative(rd in 0.0..=1.0f64, y in 1e-6..(1.0 - 1e-6)) {
        let v = rqfl(rd, y, &QflParams::default()).unwrap();
        prop_assert!(v >= 0.0);
    }

    #[test]
    fn direction_ce_matches_naive(logit in -8.0..8.0f64, theta in -PI..PI) {
        let bin = direction_target(theta);
        let p = 1.0 / (1.0 + (-logit).exp());
        let naive = if bin == 1 { -p.ln() } else { -(1.0 - p).ln() };
        prop_assert!((direction_ce(logit, bin) - naive).abs() < 1e-9 * (1.0 + naive));
    }
}

#[test]
fn rqfl_minimized_at_target() {
    let p = QflParams::default();
    for rd in [0.1, 0.5, 0.9] {
        let (best, _) = (1..10_000)
            .map(|i| i as f64 / 10_000.0)
            .map(|y| (y, rqfl(rd, y, &p).unwrap()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert!((best - rd).abs() <= 1e-4, "rd {rd}: grid minimum at {best}");
    }
}
