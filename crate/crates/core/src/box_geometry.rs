//! Exact geometry of yawed 3D boxes.
//!
//! The bird's-eye-view footprint of a box is a rotated rectangle; the
//! intersection of two footprints is found by Sutherland–Hodgman clipping,
//! and the 3D intersection volume is that area times the vertical overlap.
//! [`iou_3d_monte_carlo`] estimates the same quantity by sampling and serves
//! as an independent oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Collinearity and vertex-merge tolerance used by the clipper.
pub const CLIP_EPS: f64 = 1e-12;

/// A box with center `(x, y, z)`, extents `(l, w, h)` along its local axes
/// and yaw `theta` about the vertical axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub theta: f64,
}

impl Box3D {
    pub fn new(x: f64, y: f64, z: f64, l: f64, w: f64, h: f64, theta: f64) -> Result<Self> {
        let b = Self { x, y, z, l, w, h, theta };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.to_array();
        if all.iter().any(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite box parameter in {self:?}")));
        }
        if !(self.l > 0.0 && self.w > 0.0 && self.h > 0.0) {
            return Err(invalid(format!(
                "box extents must be positive, got l={}, w={}, h={}",
                self.l, self.w, self.h
            )));
        }
        Ok(())
    }

    /// Parameters in the order `x, y, z, l, w, h, theta`.
    pub fn to_array(&self) -> [f64; 7] {
        [self.x, self.y, self.z, self.l, self.w, self.h, self.theta]
    }

    pub fn from_array(p: [f64; 7]) -> Self {
        Self {
            x: p[0],
            y: p[1],
            z: p[2],
            l: p[3],
            w: p[4],
            h: p[5],
            theta: p[6],
        }
    }

    pub fn volume(&self) -> f64 {
        self.l * self.w * self.h
    }

    pub fn z_min(&self) -> f64 {
        self.z - 0.5 * self.h
    }

    pub fn z_max(&self) -> f64 {
        self.z + 0.5 * self.h
    }

    /// Whether `(px, py, pz)` lies inside the closed box.
    pub fn contains(&self, px: f64, py: f64, pz: f64) -> bool {
        if (pz - self.z).abs() > 0.5 * self.h {
            return false;
        }
        let (s, c) = self.theta.sin_cos();
        let dx = px - self.x;
        let dy = py - self.y;
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        u.abs() <= 0.5 * self.l && v.abs() <= 0.5 * self.w
    }

    /// Axis-aligned bounds `([min_x, min_y, min_z], [max_x, max_y, max_z])`.
    pub fn aabb(&self) -> ([f64; 3], [f64; 3]) {
        let (s, c) = self.theta.sin_cos();
        let hx = 0.5 * (self.l * c.abs() + self.w * s.abs());
        let hy = 0.5 * (self.l * s.abs() + self.w * c.abs());
        (
            [self.x - hx, self.y - hy, self.z_min()],
            [self.x + hx, self.y + hy, self.z_max()],
        )
    }
}

/// A convex polygon with counter-clockwise vertices. Zero vertices means empty.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polygon2D {
    pub vertices: Vec<[f64; 2]>,
}

impl Polygon2D {
    pub fn new(vertices: Vec<[f64; 2]>) -> Self {
        Self { vertices }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    /// Shoelace area. Positive for counter-clockwise order.
    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return 0.0;
        }
        let mut acc = 0.0;
        for i in 0..n {
            let [x0, y0] = self.vertices[i];
            let [x1, y1] = self.vertices[(i + 1) % n];
            acc += x0 * y1 - x1 * y0;
        }
        0.5 * acc
    }

    pub fn area(&self) -> f64 {
        self.signed_area().max(0.0)
    }

    /// Every turn has the same orientation (collinear turns allowed).
    pub fn is_convex_ccw(&self) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return true;
        }
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let c = self.vertices[(i + 2) % n];
            cross(a, b, c) >= -1e-9
        })
    }
}

#[inline]
fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Footprint of `b` in the x-y plane, counter-clockwise.
pub fn bev_corners(b: &Box3D) -> Polygon2D {
    let (s, c) = b.theta.sin_cos();
    let hl = 0.5 * b.l;
    let hw = 0.5 * b.w;
    let local = [[-hl, -hw], [hl, -hw], [hl, hw], [-hl, hw]];
    Polygon2D::new(
        local
            .iter()
            .map(|&[u, v]| [b.x + c * u - s * v, b.y + s * u + c * v])
            .collect(),
    )
}

/// Intersection of segment `p -> q` with the infinite line through `a -> b`.
fn line_intersection(p: [f64; 2], q: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let cp = cross(a, b, p);
    let cq = cross(a, b, q);
    let t = cp / (cp - cq);
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

fn push_merged(out: &mut Vec<[f64; 2]>, v: [f64; 2]) {
    if let Some(last) = out.last() {
        if (last[0] - v[0]).abs() < CLIP_EPS && (last[1] - v[1]).abs() < CLIP_EPS {
            return;
        }
    }
    out.push(v);
}

/// Clip convex `subject` against convex `clip` (both counter-clockwise).
pub fn convex_intersection(subject: &Polygon2D, clip: &Polygon2D) -> Polygon2D {
    if subject.is_empty() || clip.is_empty() {
        return Polygon2D::empty();
    }
    let mut output = subject.vertices.clone();
    let m = clip.vertices.len();
    for i in 0..m {
        if output.is_empty() {
            break;
        }
        let a = clip.vertices[i];
        let b = clip.vertices[(i + 1) % m];
        let input = std::mem::take(&mut output);
        let n = input.len();
        for j in 0..n {
            let cur = input[j];
            let prev = input[(j + n - 1) % n];
            let cur_in = cross(a, b, cur) >= -CLIP_EPS;
            let prev_in = cross(a, b, prev) >= -CLIP_EPS;
            if cur_in {
                if !prev_in {
                    push_merged(&mut output, line_intersection(prev, cur, a, b));
                }
                push_merged(&mut output, cur);
            } else if prev_in {
                push_merged(&mut output, line_intersection(prev, cur, a, b));
            }
        }
        while output.len() > 1 {
            let first = output[0];
            let last = output[output.len() - 1];
            if (first[0] - last[0]).abs() < CLIP_EPS && (first[1] - last[1]).abs() < CLIP_EPS {
                output.pop();
            } else {
                break;
            }
        }
    }
    if output.len() < 3 {
        return Polygon2D::empty();
    }
    Polygon2D::new(output)
}

pub fn vertical_overlap(a: &Box3D, b: &Box3D) -> f64 {
    (a.z_max().min(b.z_max()) - a.z_min().max(b.z_min())).max(0.0)
}

pub fn bev_intersection_area(a: &Box3D, b: &Box3D) -> f64 {
    convex_intersection(&bev_corners(a), &bev_corners(b)).area()
}

/// IoU of the two footprints, ignoring height.
pub fn bev_iou(a: &Box3D, b: &Box3D) -> f64 {
    let inter = bev_intersection_area(a, b);
    let union = a.l * a.w + b.l * b.w - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Exact 3D IoU of two yawed boxes.
pub fn iou_3d(a: &Box3D, b: &Box3D) -> f64 {
    let dz = vertical_overlap(a, b);
    if dz <= 0.0 {
        return 0.0;
    }
    let inter = bev_intersection_area(a, b) * dz;
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

const MC_CHUNK: usize = 1 << 16;

/// Monte-Carlo estimate of [`iou_3d`] from `n_samples` uniform points in the
/// joint bounding volume. Chunk `i` draws from ChaCha stream `i`, so the
/// result is bit-identical for a given `(seed, n_samples)` regardless of
/// thread count.
pub fn iou_3d_monte_carlo(a: &Box3D, b: &Box3D, n_samples: usize, seed: u64) -> f64 {
    assert!(n_samples >= 1, "n_samples must be at least 1");
    let (amin, amax) = a.aabb();
    let (bmin, bmax) = b.aabb();
    // disjoint bounds: no sample can land in both boxes
    if (0..3).any(|i| amax[i] <= bmin[i] || bmax[i] <= amin[i]) {
        return 0.0;
    }
    let lo = [0, 1, 2].map(|i| amin[i].min(bmin[i]));
    let hi = [0, 1, 2].map(|i| amax[i].max(bmax[i]));
    let n_chunks = n_samples.div_ceil(MC_CHUNK);

    let (both, either) = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let count = MC_CHUNK.min(n_samples - chunk * MC_CHUNK);
            let mut both = 0u64;
            let mut either = 0u64;
            for _ in 0..count {
                let p: [f64; 3] = [0, 1, 2].map(|i| lo[i] + (hi[i] - lo[i]) * rng.gen::<f64>());
                let in_a = a.contains(p[0], p[1], p[2]);
                let in_b = b.contains(p[0], p[1], p[2]);
                both += u64::from(in_a && in_b);
                either += u64::from(in_a || in_b);
            }
            (both, either)
        })
        .reduce(|| (0, 0), |x, y| (x.0 + y.0, x.1 + y.1));

    if either == 0 {
        0.0
    } else {
        both as f64 / either as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn square(cx: f64, cy: f64, side: f64, theta: f64) -> Polygon2D {
        bev_corners(&Box3D::new(cx, cy, 0.0, side, side, 1.0, theta).unwrap())
    }

    fn contains_vertex(p: &Polygon2D, v: [f64; 2], tol: f64) -> bool {
        p.vertices
            .iter()
            .any(|q| (q[0] - v[0]).abs() < tol && (q[1] - v[1]).abs() < tol)
    }

    #[test]
    fn axis_aligned_corners() {
        let p = square(0.0, 0.0, 2.0, 0.0);
        assert_eq!(p.vertices, vec![[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]);
        assert_abs_diff_eq!(p.signed_area(), 4.0);
    }

    #[test]
    fn quarter_turn_square_has_same_vertex_set() {
        let a = square(0.0, 0.0, 2.0, 0.0);
        let b = square(0.0, 0.0, 2.0, FRAC_PI_2);
        for v in &a.vertices {
            assert!(contains_vertex(&b, *v, 1e-12));
        }
    }

    #[test]
    fn rotated_rectangle_corner() {
        let b = Box3D::new(1.0, 1.0, 0.0, 2.0, 1.0, 1.0, FRAC_PI_4).unwrap();
        let p = bev_corners(&b);
        assert!(contains_vertex(&p, [1.353_553_390_593_273_7, 2.060_660_171_779_821], 1e-12));
        assert!(p.is_convex_ccw());
    }

    #[test]
    fn full_turn_leaves_corners_unchanged() {
        let b = Box3D::new(0.3, -1.2, 0.0, 3.9, 1.6, 1.56, 0.77).unwrap();
        let c = Box3D { theta: b.theta + 2.0 * PI, ..b };
        for (p, q) in bev_corners(&b).vertices.iter().zip(&bev_corners(&c).vertices) {
            assert_abs_diff_eq!(p[0], q[0], epsilon = 1e-9);
            assert_abs_diff_eq!(p[1], q[1], epsilon = 1e-9);
        }
    }

    #[test]
    fn clip_identity_and_disjoint() {
        let a = square(0.0, 0.0, 2.0, 0.0);
        assert_abs_diff_eq!(convex_intersection(&a, &a).area(), 4.0, epsilon = 1e-12);
        let far = square(3.0, 0.0, 2.0, 0.0);
        let e = convex_intersection(&a, &far);
        assert!(e.vertices.is_empty());
        assert_eq!(e.area(), 0.0);
    }

    #[test]
    fn clip_octagon() {
        let a = square(0.0, 0.0, 1.0, 0.0);
        let b = square(0.0, 0.0, 1.0, FRAC_PI_4);
        let oct = convex_intersection(&a, &b);
        assert_eq!(oct.len(), 8);
        assert_abs_diff_eq!(oct.area(), 2.0 * (2f64.sqrt() - 1.0), epsilon = 1e-12);
        assert!(oct.is_convex_ccw());
    }

    #[test]
    fn touching_edges_give_zero_area() {
        let a = square(0.0, 0.0, 2.0, 0.0);
        let b = square(2.0, 0.0, 2.0, 0.0);
        assert_abs_diff_eq!(convex_intersection(&a, &b).area(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn iou_examples() {
        let b = Box3D::new(0.5, 0.1, -0.3, 3.9, 1.6, 1.56, 0.4).unwrap();
        assert_abs_diff_eq!(iou_3d(&b, &b), 1.0, epsilon = 1e-12);

        let c0 = Box3D::new(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        let c45 = Box3D { theta: FRAC_PI_4, ..c0 };
        let oct = 2.0 * (2f64.sqrt() - 1.0);
        assert_abs_diff_eq!(iou_3d(&c0, &c45), oct / (2.0 - oct), epsilon = 1e-12);
        assert_abs_diff_eq!(iou_3d(&c0, &c45), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);

        let a = Box3D::new(0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 0.0).unwrap();
        let s = Box3D::new(1.0, 0.0, 0.0, 2.0, 2.0, 2.0, 0.0).unwrap();
        assert_abs_diff_eq!(iou_3d(&a, &s), 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn vertical_separation_gives_zero() {
        let a = Box3D::new(0.0, 0.0, 0.0, 2.0, 2.0, 1.0, 0.0).unwrap();
        let b = Box3D { z: 1.5, ..a };
        assert_eq!(iou_3d(&a, &b), 0.0);
    }

    #[test]
    fn monte_carlo_trivial_cases() {
        let a = Box3D::new(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.3).unwrap();
        assert_eq!(iou_3d_monte_carlo(&a, &a, 100_000, 11), 1.0);
        let far = Box3D { x: 5.0, ..a };
        assert_eq!(iou_3d_monte_carlo(&a, &far, 100_000, 11), 0.0);
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let a = Box3D::new(0.0, 0.0, 0.0, 2.0, 1.0, 1.0, 0.3).unwrap();
        let b = Box3D::new(0.4, 0.2, 0.1, 1.5, 1.2, 0.8, -0.5).unwrap();
        let x = iou_3d_monte_carlo(&a, &b, 200_001, 5);
        let y = iou_3d_monte_carlo(&a, &b, 200_001, 5);
        assert_eq!(x.to_bits(), y.to_bits());
        assert_ne!(x, iou_3d_monte_carlo(&a, &b, 200_001, 6));
    }

    #[test]
    fn octagon_monte_carlo() {
        let c0 = Box3D::new(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        let c45 = Box3D { theta: FRAC_PI_4, ..c0 };
        let est = iou_3d_monte_carlo(&c0, &c45, 1_000_000, 3);
        assert_abs_diff_eq!(est, 0.707_106_781, epsilon = 0.005);
    }

    #[test]
    fn rejects_bad_boxes() {
        assert!(Box3D::new(0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0).is_err());
        assert!(Box3D::new(0.0, 0.0, 0.0, 1.0, -1.0, 1.0, 0.0).is_err());
        assert!(Box3D::new(f64::NAN, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0).is_err());
    }
}
