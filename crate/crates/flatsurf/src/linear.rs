//! The SL(2,R) action on half-translation structures and straight-line
//! tracing across charts.

use crate::geom::{cross, HalfAffine, Vec2, EPS_GEOM};
use crate::surface::{EdgeRef, HalfTranslationSurface, SurfacePoint};
use nalgebra::Matrix2;
use thiserror::Error;

pub type PlanarMatrix = Matrix2<f64>;

/// Teichmüller flow matrix `a_t = diag(e^t, e^{-t})`.
pub fn flow_matrix(t: f64) -> PlanarMatrix {
    Matrix2::new(t.exp(), 0.0, 0.0, (-t).exp())
}

/// Rotation by `theta`.
pub fn rotation_matrix(theta: f64) -> PlanarMatrix {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

#[derive(Debug, Error)]
pub enum LinearError {
    #[error("matrix is singular or orientation-reversing (det = {0})")]
    SingularMatrix(f64),
    #[error("trace stuck in triangle {tri} after {traveled} length units")]
    TraceStuck { tri: usize, traveled: f64 },
}

/// Postcompose every chart with the linear map `m` (det m > 0 required).
/// Gluing combinatorics are unchanged.
pub fn apply_matrix(
    s: &HalfTranslationSurface,
    m: &PlanarMatrix,
) -> Result<HalfTranslationSurface, LinearError> {
    let det = m.determinant();
    if det <= EPS_GEOM {
        return Err(LinearError::SingularMatrix(det));
    }
    let tris = (0..s.num_triangles())
        .map(|t| {
            let e = s.triangle(t);
            [m * e[0], m * e[1], m * e[2]]
        })
        .collect();
    Ok(HalfTranslationSurface::build(tris, s.gluings().to_vec())
        .expect("linear image of a valid surface is valid"))
}

/// Shorthand for the diagonal flow.
pub fn flow(s: &HalfTranslationSurface, t: f64) -> HalfTranslationSurface {
    apply_matrix(s, &flow_matrix(t)).expect("a_t is never singular")
}

/// One gluing crossed by a traced segment.
#[derive(Clone, Copy, Debug)]
pub struct Crossing {
    pub gluing: usize,
    /// Side being exited.
    pub from: EdgeRef,
    /// Parameter along the exited edge, from its start corner, in [0,1].
    pub param: f64,
    /// Exit point in the chart of `from.tri`.
    pub point: Vec2,
    /// Arclength at which the crossing happens.
    pub at_length: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct VertexHit {
    pub vertex: usize,
    pub at_length: f64,
    /// Corner (tri, corner) whose position the trace hit, in the chart the
    /// trace was in when it hit.
    pub corner: (usize, usize),
}

/// A developed straight segment on the surface.
#[derive(Clone, Debug)]
pub struct TracedSegment {
    pub start: SurfacePoint,
    /// Direction in the start chart (unit).
    pub dir: Vec2,
    /// Requested length.
    pub requested: f64,
    /// Realized length (shorter than requested only on a singularity hit).
    pub len: f64,
    pub crossings: Vec<Crossing>,
    pub end: SurfacePoint,
    /// Direction in the end chart. Equal to `±dir` developed through the
    /// crossings; the sign flips once per flip gluing crossed.
    pub end_dir: Vec2,
    /// Odd number of flip gluings crossed.
    pub flipped: bool,
    pub hit: Option<VertexHit>,
}

impl TracedSegment {
    /// In-triangle pieces `(tri, from, to)` of the segment.
    pub fn subsegments(&self, s: &HalfTranslationSurface) -> Vec<(usize, Vec2, Vec2)> {
        let mut out = Vec::with_capacity(self.crossings.len() + 1);
        let mut tri = self.start.tri;
        let mut pos = self.start.pos;
        for c in &self.crossings {
            out.push((tri, pos, c.point));
            let (p, _) = s.partner(c.from.tri, c.from.edge);
            let map = s.transition_into(p.tri, p.edge);
            pos = map.apply(c.point);
            tri = p.tri;
        }
        out.push((tri, pos, self.end.pos));
        out
    }
}

struct TraceState {
    tri: usize,
    pos: Vec2,
    dir: Vec2,
    entry_edge: Option<usize>,
    traveled: f64,
    flipped: bool,
    crossings: Vec<Crossing>,
}

fn step_scale(s: &HalfTranslationSurface, t: usize) -> f64 {
    let e = s.triangle(t);
    e[0].norm().max(e[1].norm()).max(e[2].norm())
}

/// Trace a straight segment of length `len` from `start` in direction `dir`.
///
/// Flip gluings negate the direction as the chart changes. If the segment
/// meets a vertex within `EPS_GEOM` (in developed coordinates) the trace stops
/// there and the hit is reported as data.
pub fn trace_ray(
    s: &HalfTranslationSurface,
    start: SurfacePoint,
    dir: Vec2,
    len: f64,
) -> Result<TracedSegment, LinearError> {
    let dir = dir.normalize();
    let st = TraceState {
        tri: start.tri,
        pos: start.pos,
        dir,
        entry_edge: None,
        traveled: 0.0,
        flipped: false,
        crossings: Vec::new(),
    };
    run_trace(s, st, start, dir, len)
}

/// Trace from a vertex, leaving through the interior of corner `(t, c)`.
pub fn trace_from_corner(
    s: &HalfTranslationSurface,
    corner: (usize, usize),
    dir: Vec2,
    len: f64,
) -> Result<TracedSegment, LinearError> {
    let (t, c) = corner;
    let dir = dir.normalize();
    let start = SurfacePoint {
        tri: t,
        pos: s.corner_pos(t, c),
    };
    // From a corner the segment can only leave through the opposite edge, so
    // mark both adjacent edges as "entered".
    let st = TraceState {
        tri: t,
        pos: start.pos,
        dir,
        entry_edge: Some(usize::MAX - c), // sentinel handled below
        traveled: 0.0,
        flipped: false,
        crossings: Vec::new(),
    };
    run_trace_from_corner(s, st, start, dir, len, c)
}

fn run_trace_from_corner(
    s: &HalfTranslationSurface,
    mut st: TraceState,
    start: SurfacePoint,
    dir0: Vec2,
    len: f64,
    corner: usize,
) -> Result<TracedSegment, LinearError> {
    // First step: only the opposite edge is a legal exit.
    st.entry_edge = None;
    let opposite = (corner + 1) % 3;
    match advance(s, &mut st, len, Some(opposite)) {
        StepResult::Done(seg) => Ok(finish(s, st, start, dir0, len, seg)),
        StepResult::Continue => run_trace(s, st, start, dir0, len),
        StepResult::Stuck => Err(LinearError::TraceStuck {
            tri: st.tri,
            traveled: st.traveled,
        }),
    }
}

enum StepResult {
    /// Segment ended inside the current triangle (or on a vertex).
    Done(Option<VertexHit>),
    Continue,
    Stuck,
}

fn advance(
    s: &HalfTranslationSurface,
    st: &mut TraceState,
    len: f64,
    only_edge: Option<usize>,
) -> StepResult {
    let scale = step_scale(s, st.tri);
    let tol = 1e-12 * scale.max(1.0);
    let remaining = len - st.traveled;
    let mut best: Option<(f64, f64, usize)> = None; // (s, u, edge)
    for e in 0..3 {
        if let Some(oe) = only_edge {
            if e != oe {
                continue;
            }
        } else if st.entry_edge == Some(e) {
            continue;
        }
        let a = s.corner_pos(st.tri, e);
        let b = s.corner_pos(st.tri, (e + 1) % 3);
        let ev = b - a;
        let denom = cross(st.dir, ev);
        if denom.abs() < 1e-16 * ev.norm() {
            continue; // parallel to the edge
        }
        let sd = cross(a - st.pos, ev) / denom;
        let u = cross(a - st.pos, st.dir) / denom;
        let urel = tol / ev.norm();
        if sd > tol && u >= -urel && u <= 1.0 + urel {
            if best.map_or(true, |(bs, _, _)| sd < bs) {
                best = Some((sd, u.clamp(0.0, 1.0), e));
            }
        }
    }
    let Some((sd, u, e)) = best else {
        // The point may sit exactly on an edge with the direction pointing
        // out of the triangle; hop across the gluing and retry.
        if only_edge.is_none() {
            for e in 0..3 {
                if st.entry_edge == Some(e) {
                    continue;
                }
                let a = s.corner_pos(st.tri, e);
                let b = s.corner_pos(st.tri, (e + 1) % 3);
                if crate::geom::dist_point_segment(st.pos, a, b) <= tol * 10.0 {
                    let ev = b - a;
                    let u = ((st.pos - a).dot(&ev) / ev.norm_squared()).clamp(0.0, 1.0);
                    let (partner, gid) = s.partner(st.tri, e);
                    st.crossings.push(Crossing {
                        gluing: gid,
                        from: EdgeRef::new(st.tri, e),
                        param: u,
                        point: st.pos,
                        at_length: st.traveled,
                    });
                    let map = s.transition_into(partner.tri, partner.edge);
                    st.pos = map.apply(st.pos);
                    st.dir = map.apply_dir(st.dir);
                    if s.gluings()[gid].flip {
                        st.flipped = !st.flipped;
                    }
                    st.tri = partner.tri;
                    st.entry_edge = Some(partner.edge);
                    return StepResult::Continue;
                }
            }
        }
        return StepResult::Stuck;
    };
    if sd >= remaining {
        return StepResult::Done(None);
    }
    let x = st.pos + sd * st.dir;
    // Vertex proximity check in developed coordinates.
    let a = s.corner_pos(st.tri, e);
    let b = s.corner_pos(st.tri, (e + 1) % 3);
    for (p, c) in [(a, e), (b, (e + 1) % 3)] {
        if (x - p).norm() <= EPS_GEOM {
            st.traveled += sd;
            st.pos = p;
            return StepResult::Done(Some(VertexHit {
                vertex: s.vertex_of_corner(st.tri, c),
                at_length: st.traveled,
                corner: (st.tri, c),
            }));
        }
    }
    let (partner, gid) = s.partner(st.tri, e);
    st.crossings.push(Crossing {
        gluing: gid,
        from: EdgeRef::new(st.tri, e),
        param: u,
        point: x,
        at_length: st.traveled + sd,
    });
    let map = s.transition_into(partner.tri, partner.edge);
    st.pos = map.apply(x);
    st.dir = map.apply_dir(st.dir);
    if s.gluings()[gid].flip {
        st.flipped = !st.flipped;
    }
    st.tri = partner.tri;
    st.entry_edge = Some(partner.edge);
    st.traveled += sd;
    StepResult::Continue
}

fn run_trace(
    s: &HalfTranslationSurface,
    mut st: TraceState,
    start: SurfacePoint,
    dir0: Vec2,
    len: f64,
) -> Result<TracedSegment, LinearError> {
    loop {
        match advance(s, &mut st, len, None) {
            StepResult::Done(hit) => return Ok(finish(s, st, start, dir0, len, hit)),
            StepResult::Continue => {}
            StepResult::Stuck => {
                return Err(LinearError::TraceStuck {
                    tri: st.tri,
                    traveled: st.traveled,
                })
            }
        }
    }
}

fn finish(
    _s: &HalfTranslationSurface,
    st: TraceState,
    start: SurfacePoint,
    dir0: Vec2,
    len: f64,
    hit: Option<VertexHit>,
) -> TracedSegment {
    let (end, realized) = match &hit {
        Some(h) => (
            SurfacePoint {
                tri: st.tri,
                pos: st.pos,
            },
            h.at_length,
        ),
        None => (
            SurfacePoint {
                tri: st.tri,
                pos: st.pos + (len - st.traveled) * st.dir,
            },
            len,
        ),
    };
    TracedSegment {
        start,
        dir: dir0,
        requested: len,
        len: realized,
        crossings: st.crossings,
        end,
        end_dir: st.dir,
        flipped: st.flipped,
        hit,
    }
}

/// The developing map along a crossing word: the `HalfAffine` taking the chart
/// of the triangle *after* the crossings back to the chart of the first
/// triangle.
pub fn developing_map(s: &HalfTranslationSurface, word: &[(usize, usize)]) -> HalfAffine {
    let mut map = HalfAffine::IDENTITY;
    for &(t, e) in word {
        let (p, _) = s.partner(t, e);
        // transition_into(p.tri, p.edge) maps t's chart into p.tri's chart;
        // we need the opposite composition direction.
        let into_next = s.transition_into(p.tri, p.edge);
        map = map.compose(&into_next.inverse());
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::geom::vec2;

    #[test]
    fn flow_matrix_acts_diagonally() {
        let m = flow_matrix((2.0f64).ln());
        let v = m * vec2(1.0, 1.0);
        assert!((v - vec2(2.0, 0.5)).norm() < 1e-12);
        let id = flow_matrix(0.0);
        assert!((id * vec2(0.3, -0.7) - vec2(0.3, -0.7)).norm() < 1e-15);
    }

    #[test]
    fn rotation_squared_is_global_sign() {
        let s = fixtures::l_shaped_3();
        let r = rotation_matrix(std::f64::consts::FRAC_PI_2);
        let v = r * vec2(1.0, 0.0);
        assert!((v - vec2(0.0, 1.0)).norm() < 1e-12);
        let s2 = apply_matrix(&apply_matrix(&s, &r).unwrap(), &r).unwrap();
        assert!(s2.same_up_to_global_sign(&s));
    }

    #[test]
    fn matrix_action_composes() {
        let s = fixtures::square_torus();
        let a = flow_matrix(0.3);
        let b = rotation_matrix(0.7);
        let lhs = apply_matrix(&apply_matrix(&s, &a).unwrap(), &b).unwrap();
        let rhs = apply_matrix(&s, &(b * a)).unwrap();
        assert!(lhs.same_up_to_global_sign(&rhs));
    }

    #[test]
    fn torus_horizontal_trace_wraps() {
        let s = fixtures::square_torus();
        let seg = trace_ray(
            &s,
            SurfacePoint {
                tri: 0,
                pos: vec2(0.5, 0.25),
            },
            vec2(1.0, 0.0),
            2.0,
        )
        .unwrap();
        assert!(seg.hit.is_none());
        assert!((seg.len - 2.0).abs() < 1e-12);
        assert_eq!(seg.end.tri, 0);
        assert!((seg.end.pos - vec2(0.5, 0.25)).norm() < 1e-9);
    }

    #[test]
    fn torus_diagonal_hits_marked_point() {
        let s = fixtures::square_torus();
        let seg = trace_ray(
            &s,
            SurfacePoint {
                tri: 0,
                pos: vec2(0.5, 0.5),
            },
            vec2(1.0, 1.0),
            3.0,
        )
        .unwrap();
        // The diagonal from (0.5, 0.5) runs into the marked vertex at (1,1).
        let hit = seg.hit.expect("diagonal through the corner");
        assert!((hit.at_length - std::f64::consts::SQRT_2 / 2.0).abs() < 1e-9);
    }

    #[test]
    fn trace_length_is_additive() {
        let s = fixtures::l_shaped_3();
        let start = SurfacePoint {
            tri: 0,
            pos: vec2(0.5, 0.2),
        };
        let d = vec2(0.7, 0.31).normalize();
        let full = trace_ray(&s, start, d, 1.9).unwrap();
        let first = trace_ray(&s, start, d, 1.0).unwrap();
        let second = trace_ray(&s, first.end, first.end_dir, 0.9).unwrap();
        assert!(full.hit.is_none());
        assert_eq!(
            full.crossings.len(),
            first.crossings.len() + second.crossings.len()
        );
        assert!((full.end.pos - second.end.pos).norm() < 1e-9);
        assert_eq!(full.end.tri, second.end.tri);
    }

    #[test]
    fn l3_horizontal_trace_cycles_through_bottom_cylinder() {
        let s = fixtures::l_shaped_3();
        // The bottom cylinder has circumference 2: a horizontal ray of length
        // 7 wraps 3.5 times.
        let start = SurfacePoint {
            tri: 0,
            pos: vec2(0.5, 0.25),
        };
        let seg = trace_ray(&s, start, vec2(1.0, 0.0), 7.0).unwrap();
        assert!(seg.hit.is_none());
        let back = trace_ray(&s, start, vec2(1.0, 0.0), 2.0).unwrap();
        assert!((back.end.pos - start.pos).norm() < 1e-9);
        assert_eq!(back.end.tri, 0);
    }
}
