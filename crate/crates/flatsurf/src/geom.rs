//! Small planar geometry kernel: predicates, segment intersections, and the
//! `z -> ±z + c` affine maps that arise as chart transitions of half-translation
//! structures.

use nalgebra::Vector2;

pub type Vec2 = Vector2<f64>;

/// Geometric predicate tolerance, in length units.
pub const EPS_GEOM: f64 = 1e-9;
/// Angle tolerance, radians.
pub const EPS_ANG: f64 = 1e-9;

#[inline]
pub fn vec2(x: f64, y: f64) -> Vec2 {
    Vec2::new(x, y)
}

/// 2D cross product (signed area of the parallelogram spanned by `a`, `b`).
#[inline]
pub fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Counterclockwise rotation by 90 degrees.
#[inline]
pub fn perp(a: Vec2) -> Vec2 {
    vec2(-a.y, a.x)
}

/// Angle of `v` in `[0, 2π)`.
#[inline]
pub fn angle_of(v: Vec2) -> f64 {
    let a = v.y.atan2(v.x);
    if a < 0.0 {
        a + std::f64::consts::TAU
    } else {
        a
    }
}

/// Counterclockwise angle from direction `from` to direction `to`, in `[0, 2π)`.
pub fn ccw_angle(from: Vec2, to: Vec2) -> f64 {
    let c = cross(from, to);
    let d = from.dot(&to);
    let a = c.atan2(d);
    if a < 0.0 {
        a + std::f64::consts::TAU
    } else {
        a
    }
}

/// Interior angle at the corner between an incoming edge `prev` (pointing into
/// the corner) and an outgoing edge `next` (pointing away). Always in `(0, π)`
/// for corners of a nondegenerate counterclockwise triangle.
pub fn corner_angle(prev: Vec2, next: Vec2) -> f64 {
    // Rays from the corner: `next` and `-prev`; interior swept ccw between them.
    ccw_angle(next, -prev)
}

/// Chart transition `z ↦ sign·z + c` with `sign ∈ {+1, -1}`. These are exactly
/// the transition maps of half-translation atlases (`-z + c` is a rotation by
/// π, so orientation is preserved either way).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfAffine {
    pub sign: f64,
    pub c: Vec2,
}

impl HalfAffine {
    pub const IDENTITY: HalfAffine = HalfAffine {
        sign: 1.0,
        c: Vec2::new(0.0, 0.0),
    };

    #[inline]
    pub fn new(sign: f64, c: Vec2) -> Self {
        debug_assert!(sign == 1.0 || sign == -1.0);
        HalfAffine { sign, c }
    }

    #[inline]
    pub fn apply(&self, p: Vec2) -> Vec2 {
        self.sign * p + self.c
    }

    /// Directions transform without the offset.
    #[inline]
    pub fn apply_dir(&self, d: Vec2) -> Vec2 {
        self.sign * d
    }

    /// `self ∘ other` (apply `other` first).
    #[inline]
    pub fn compose(&self, other: &HalfAffine) -> HalfAffine {
        HalfAffine {
            sign: self.sign * other.sign,
            c: self.sign * other.c + self.c,
        }
    }

    #[inline]
    pub fn inverse(&self) -> HalfAffine {
        // (±z + c)^-1 = ±(z - c) = ±z ∓ c
        HalfAffine {
            sign: self.sign,
            c: -self.sign * self.c,
        }
    }
}

/// Result of intersecting two open segments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SegIntersection {
    /// No common point.
    None,
    /// Proper transverse crossing at parameters `(s, t)` along the segments.
    Crossing { s: f64, t: f64, point: Vec2 },
    /// Segments are collinear and overlap along a positive-length arc.
    Overlap,
    /// A degenerate touch (endpoint contact or near-parallel graze) within
    /// tolerance; callers decide how to classify these.
    Touch { s: f64, t: f64, point: Vec2 },
}

/// Intersect segments `a0-a1` and `b0-b1`. Parameters are clamped to `[0,1]`.
/// `tol` is an absolute length tolerance used to classify endpoint touches.
pub fn intersect_segments(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2, tol: f64) -> SegIntersection {
    let da = a1 - a0;
    let db = b1 - b0;
    let denom = cross(da, db);
    let la = da.norm();
    let lb = db.norm();
    if la <= tol || lb <= tol {
        return SegIntersection::None;
    }
    // Relative tolerance on the sine of the angle between the segments.
    if denom.abs() <= 1e-14 * la * lb {
        // Parallel. Check for collinear overlap.
        let off = cross(b0 - a0, da).abs() / la;
        if off > tol {
            return SegIntersection::None;
        }
        let t0 = (b0 - a0).dot(&da) / (la * la);
        let t1 = (b1 - a0).dot(&da) / (la * la);
        let (lo, hi) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
        let ov_lo = lo.max(0.0);
        let ov_hi = hi.min(1.0);
        if (ov_hi - ov_lo) * la > tol {
            return SegIntersection::Overlap;
        }
        return SegIntersection::None;
    }
    let s = cross(b0 - a0, db) / denom;
    let t = cross(b0 - a0, da) / denom;
    let rel_a = tol / la;
    let rel_b = tol / lb;
    if s < -rel_a || s > 1.0 + rel_a || t < -rel_b || t > 1.0 + rel_b {
        return SegIntersection::None;
    }
    let point = a0 + s * da;
    let interior_a = s > rel_a && s < 1.0 - rel_a;
    let interior_b = t > rel_b && t < 1.0 - rel_b;
    if interior_a && interior_b {
        SegIntersection::Crossing { s, t, point }
    } else {
        SegIntersection::Touch { s, t, point }
    }
}

/// Robust-enough in-circle predicate: positive when `d` lies strictly inside
/// the circumcircle of the counterclockwise triangle `(a, b, c)`.
pub fn in_circle(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> f64 {
    let ax = a.x - d.x;
    let ay = a.y - d.y;
    let bx = b.x - d.x;
    let by = b.y - d.y;
    let cx = c.x - d.x;
    let cy = c.y - d.y;
    let a2 = ax * ax + ay * ay;
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    ax * (by * c2 - b2 * cy) - ay * (bx * c2 - b2 * cx) + a2 * (bx * cy - by * cx)
}

/// Signed area of triangle `(a, b, c)` (positive when counterclockwise).
#[inline]
pub fn signed_area(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    0.5 * cross(b - a, c - a)
}

/// Distance from `p` to the segment `a-b`.
pub fn dist_point_segment(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let l2 = ab.norm_squared();
    if l2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / l2).clamp(0.0, 1.0);
    (p - (a + t * ab)).norm()
}
