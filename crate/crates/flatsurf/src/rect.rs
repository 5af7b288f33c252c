//! Rectangular decompositions of flat geodesics: embedded flat rectangles
//! around geodesic pieces, the alternating horizontal/vertical staircase, and
//! the transported crossing estimate along the diagonal flow.

use crate::geodesic::{count_transverse, FlatGeodesic, PiecewiseCurve};
use crate::geom::{perp, Vec2, EPS_GEOM};
use crate::linear::{trace_from_corner, trace_ray, PlanarMatrix};
use crate::surface::{HalfTranslationSurface, SurfacePoint};
use thiserror::Error;

/// Fitted constant bounding the segment count: `n ≤ C_RECT · ℓ_α / ℓ_min`.
pub const C_RECT: f64 = 16.0;
/// Default constant for the transported estimate's certified radius.
pub const C_EST: f64 = 64.0;

#[derive(Debug, Error)]
pub enum RectError {
    #[error("piece is degenerate (zero direction)")]
    DegenerateDirection,
    #[error("orthogonal flow hits a vertex on both sides within ℓ_min/8 (upstream ℓ_min error?)")]
    WidthViolation,
    #[error("the second geodesic has a horizontal piece")]
    HorizontalPiece,
    #[error("staircase trace failed: {0}")]
    TraceFailed(String),
}

/// One embedded flat rectangle `R(α, t0, t1)` around a window of a geodesic
/// piece.
#[derive(Clone, Debug)]
pub struct RectangleRecord {
    pub t0: f64,
    pub t1: f64,
    /// Nearest orthogonal obstructions: `a` below (negative), `b` above.
    /// Values beyond `ℓ_min/8` are reported as ±∞.
    pub a: f64,
    pub b: f64,
    /// Orthogonal shear of the rectangle per the three-case rule.
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SegKind {
    Horizontal,
    Vertical,
}

#[derive(Clone, Debug)]
pub struct RectSegment {
    pub kind: SegKind,
    pub length: f64,
    /// Realized pieces on the surface.
    pub pieces: Vec<(usize, Vec2, Vec2)>,
}

#[derive(Clone, Debug)]
pub struct RectangularDecomposition {
    pub segments: Vec<RectSegment>,
    pub rectangles: Vec<RectangleRecord>,
    /// Σ horizontal lengths (equals `i(α, Re q)` exactly).
    pub horizontal_sum: f64,
    pub vertical_sum: f64,
    pub geodesic_length: f64,
    pub l_min: f64,
}

/// Nearest orthogonal obstruction distances for a straight run: signed reach
/// of the closest vertex prong crossing the run within `cap`, per side.
///
/// Exceptional contacts are discrete: a vertex obstructs the orthogonal flow
/// from `α(t)` only when it lies on the orthogonal line through `α(t)`, so it
/// suffices to sweep the finitely many vertex prongs orthogonal to the run.
pub fn nearest_obstructions(
    s: &HalfTranslationSurface,
    run: &PiecewiseCurve,
    window: (f64, f64),
    cap: f64,
) -> (f64, f64) {
    let mut below = f64::NEG_INFINITY; // a: closest obstruction below (negative)
    let mut above = f64::INFINITY; // b: closest obstruction above (positive)
    // Direction of the run in each piece's chart varies; prongs are traced
    // per vertex in the orthogonal direction of the *first* piece and
    // compared chart-locally at each crossing.
    for vid in 0..s.vertices().len() {
        // Prong directions must be orthogonal to the run in the chart where
        // they cross it; enumerate prongs for every piece direction variant.
        let mut dirs: Vec<Vec2> = Vec::new();
        for (_, p, q) in &run.pieces {
            let d = (q - p).normalize();
            if !dirs.iter().any(|u| (u - perp(d)).norm() < 1e-12 || (u + perp(d)).norm() < 1e-12) {
                dirs.push(perp(d));
            }
        }
        for nd in dirs {
            for ray in s.prongs(vid, nd) {
                let Ok(seg) = trace_from_corner(s, ray.corner, ray.dir, cap) else {
                    continue;
                };
                let prong = PiecewiseCurve::of_segment(s, &seg);
                for (i, (tp, p0, p1)) in prong.pieces.iter().enumerate() {
                    for (j, (tr, r0, r1)) in run.pieces.iter().enumerate() {
                        if tp != tr {
                            continue;
                        }
                        use crate::geom::SegIntersection::*;
                        match crate::geom::intersect_segments(*p0, *p1, *r0, *r1, EPS_GEOM) {
                            Crossing { s: sp, t: tq, .. } | Touch { s: sp, t: tq, .. } => {
                                let t_arc =
                                    run.cum[j] + tq.clamp(0.0, 1.0) * (r1 - r0).norm();
                                if t_arc < window.0 - 1e-12 || t_arc > window.1 + 1e-12 {
                                    continue;
                                }
                                let tau = prong.cum[i] + sp.clamp(0.0, 1.0) * (p1 - p0).norm();
                                if tau <= EPS_GEOM {
                                    continue;
                                }
                                // The vertex sits opposite the prong's travel
                                // direction at the crossing.
                                let d_run = (r1 - r0).normalize();
                                let d_prong = (p1 - p0).normalize();
                                let side = crate::geom::cross(d_run, -d_prong);
                                if side > 0.0 {
                                    // Vertex on the left (+n) side.
                                    if tau < above {
                                        above = tau;
                                    }
                                } else if -tau > below {
                                    below = -tau;
                                }
                            }
                            _ => {}
                        }
                    }
                }
            }
        }
    }
    (below, above)
}

/// Shear parameter for a window, per the three-case rule.
pub fn shear_delta(a: f64, b: f64, l_min: f64) -> Result<f64, RectError> {
    let e = l_min / 8.0;
    let low_blocked = a >= -e;
    let high_blocked = b <= e;
    if low_blocked && high_blocked {
        return Err(RectError::WidthViolation);
    }
    Ok(if low_blocked {
        a / 2.0 + e
    } else if high_blocked {
        -e + b / 2.0
    } else {
        0.0
    })
}

/// Build the embedded rectangle record for a window `[t0, t1]` of a straight
/// run (`t1 - t0 ≤ ℓ_min/4` required).
pub fn embedded_rectangle(
    s: &HalfTranslationSurface,
    run: &PiecewiseCurve,
    t0: f64,
    t1: f64,
    l_min: f64,
) -> Result<RectangleRecord, RectError> {
    assert!(t1 > t0 && t1 - t0 <= l_min / 4.0 + 1e-9);
    let cap = l_min / 8.0 * (1.0 + 1e-6);
    let (a, b) = nearest_obstructions(s, run, (t0, t1), cap);
    let delta = shear_delta(a, b, l_min)?;
    Ok(RectangleRecord { t0, t1, a, b, delta })
}

/// Evaluate the rectangle immersion `R(t, s) = p_{s + Δ}(α(t))` by orthogonal
/// tracing. Returns `None` when the flow meets a vertex first.
pub fn rectangle_point(
    s: &HalfTranslationSurface,
    run: &PiecewiseCurve,
    rect: &RectangleRecord,
    t: f64,
    sv: f64,
) -> Option<SurfacePoint> {
    let (tri, p, d) = point_on_run(run, t)?;
    let n = perp(d);
    let off = sv + rect.delta;
    if off.abs() <= EPS_GEOM {
        return Some(SurfacePoint { tri, pos: p });
    }
    let dirn = if off > 0.0 { n } else { -n };
    let seg = trace_ray(s, SurfacePoint { tri, pos: p }, dirn, off.abs()).ok()?;
    if seg.hit.is_some() {
        return None;
    }
    Some(seg.end)
}

fn point_on_run(run: &PiecewiseCurve, t: f64) -> Option<(usize, Vec2, Vec2)> {
    let t = t.clamp(0.0, run.total);
    for (j, (tri, p, q)) in run.pieces.iter().enumerate() {
        let len = (q - p).norm();
        if t <= run.cum[j] + len + 1e-12 {
            let local = ((t - run.cum[j]) / len).clamp(0.0, 1.0);
            let d = (q - p) / len;
            return Some((*tri, p + local * (q - p), d));
        }
    }
    None
}

/// Build the rectangular decomposition of a flat geodesic.
pub fn build_rect_decomposition(
    s: &HalfTranslationSurface,
    g: &FlatGeodesic,
    l_min: f64,
) -> Result<RectangularDecomposition, RectError> {
    let mut segments: Vec<RectSegment> = Vec::new();
    let mut rectangles = Vec::new();
    let mut hsum = 0.0;
    let mut vsum = 0.0;
    let step = l_min / 4.0;
    for group in g.piece_groups(s) {
        let run = PiecewiseCurve::new(group, false);
        if run.total <= EPS_GEOM {
            return Err(RectError::DegenerateDirection);
        }
        let n_win = (run.total / step).ceil().max(1.0) as usize;
        for w in 0..n_win {
            let t0 = w as f64 * step;
            let t1 = ((w + 1) as f64 * step).min(run.total);
            if t1 - t0 <= 1e-12 {
                continue;
            }
            let rect = embedded_rectangle(s, &run, t0, t1, l_min)?;
            let (tri_p, p, d) = point_on_run(&run, t0).ok_or(RectError::DegenerateDirection)?;
            let chord = d * (t1 - t0);
            let dx = chord.x;
            let dy = chord.y;
            // Exactly horizontal or vertical windows contribute a single
            // segment.
            let starts_at_vertex = t0 <= 1e-12;
            let ends_at_vertex = t1 >= run.total - 1e-12;
            let leg_start = |pos: Vec2, tri: usize| -> LegStart {
                if starts_at_vertex {
                    if let Some(c) =
                        (0..3).find(|&c| (s.corner_pos(tri, c) - pos).norm() <= 1e-9)
                    {
                        return LegStart::AtVertex {
                            base_ray: crate::surface::VertexRay {
                                corner: (tri, c),
                                dir: d,
                            },
                            piece_dir: d,
                        };
                    }
                }
                LegStart::Interior(SurfacePoint { tri, pos })
            };
            if dy.abs() <= EPS_GEOM {
                segments.push(trace_staircase_leg(
                    s,
                    leg_start(p, tri_p),
                    Vec2::new(dx.signum(), 0.0),
                    dx.abs(),
                    SegKind::Horizontal,
                    ends_at_vertex,
                )?);
                hsum += dx.abs();
                rectangles.push(rect);
                continue;
            }
            if dx.abs() <= EPS_GEOM {
                segments.push(trace_staircase_leg(
                    s,
                    leg_start(p, tri_p),
                    Vec2::new(0.0, dy.signum()),
                    dy.abs(),
                    SegKind::Vertical,
                    ends_at_vertex,
                )?);
                vsum += dy.abs();
                rectangles.push(rect);
                continue;
            }
            // Corner choice: the staircase corner on the Δ side of the chord
            // (deterministic; ties go horizontal-first).
            let horizontal_first = {
                let n = perp(d);
                let corner_h_first = Vec2::new(dx, 0.0); // relative corner
                let side = (corner_h_first - chord / 2.0).dot(&n);
                if rect.delta >= 0.0 {
                    side >= 0.0
                } else {
                    side < 0.0
                }
            };
            let (first_dir, first_len, first_kind, second_dir, second_len, second_kind) =
                if horizontal_first {
                    (
                        Vec2::new(dx.signum(), 0.0),
                        dx.abs(),
                        SegKind::Horizontal,
                        Vec2::new(0.0, dy.signum()),
                        dy.abs(),
                        SegKind::Vertical,
                    )
                } else {
                    (
                        Vec2::new(0.0, dy.signum()),
                        dy.abs(),
                        SegKind::Vertical,
                        Vec2::new(dx.signum(), 0.0),
                        dx.abs(),
                        SegKind::Horizontal,
                    )
                };
            let leg1 = trace_staircase_leg(
                s,
                leg_start(p, tri_p),
                first_dir,
                first_len,
                first_kind,
                false,
            )?;
            let (lt, _la, lb) = *leg1.pieces.last().unwrap();
            let leg2 = trace_staircase_leg(
                s,
                LegStart::Interior(SurfacePoint { tri: lt, pos: lb }),
                second_dir,
                second_len,
                second_kind,
                ends_at_vertex,
            )?;
            hsum += dx.abs();
            vsum += dy.abs();
            segments.push(leg1);
            segments.push(leg2);
            rectangles.push(rect);
        }
    }
    Ok(RectangularDecomposition {
        segments,
        rectangles,
        horizontal_sum: hsum,
        vertical_sum: vsum,
        geodesic_length: g.length(),
        l_min,
    })
}

fn trace_staircase_leg(
    s: &HalfTranslationSurface,
    start: LegStart,
    dir: Vec2,
    len: f64,
    kind: SegKind,
    end_at_vertex: bool,
) -> Result<RectSegment, RectError> {
    let seg = match start {
        LegStart::Interior(p) => {
            trace_ray(s, p, dir, len).map_err(|e| RectError::TraceFailed(e.to_string()))?
        }
        LegStart::AtVertex { base_ray, piece_dir } => {
            // The leg leaves the cone point; resolve its ray by rotating the
            // run's start ray by the developed angle between the run and the
            // leg direction.
            let signed = crate::geom::cross(piece_dir, dir)
                .atan2(piece_dir.dot(&dir));
            let ray = s.rotate_ray(&base_ray, signed);
            trace_from_corner(s, ray.corner, ray.dir, len)
                .map_err(|e| RectError::TraceFailed(e.to_string()))?
        }
    };
    if let Some(hit) = seg.hit {
        let ok = end_at_vertex && (hit.at_length - len).abs() <= 1e-7 * (1.0 + len);
        if !ok {
            return Err(RectError::TraceFailed(format!(
                "staircase leg met a singularity at length {} of {}",
                hit.at_length, len
            )));
        }
    }
    Ok(RectSegment {
        kind,
        length: len,
        pieces: seg.subsegments(s),
    })
}

enum LegStart {
    Interior(SurfacePoint),
    AtVertex {
        base_ray: crate::surface::VertexRay,
        piece_dir: Vec2,
    },
}

/// Transported crossing estimate: transport the decomposition's horizontal
/// segments by `a_t` and count their crossings with the pieces of `β` on the
/// flowed surface, with the certified error radius.
#[derive(Clone, Copy, Debug)]
pub struct TransportEstimate {
    pub total: usize,
    pub radius: f64,
}

pub fn transported_crossing_estimate(
    q_s: &HalfTranslationSurface,
    t: f64,
    decomp: &RectangularDecomposition,
    q_e: &HalfTranslationSurface,
    beta: &FlatGeodesic,
    l_min_e: f64,
    c_est: f64,
) -> Result<TransportEstimate, RectError> {
    // β must have no horizontal pieces.
    for h in beta.piece_holonomies() {
        if h.y.abs() <= EPS_GEOM {
            return Err(RectError::HorizontalPiece);
        }
    }
    let m: PlanarMatrix = crate::linear::flow_matrix(t);
    let mut total = 0usize;
    let beta_groups: Vec<PiecewiseCurve> = beta
        .piece_groups(q_e)
        .into_iter()
        .map(|g| PiecewiseCurve::new(g, false))
        .collect();
    // Merge consecutive horizontal segments into maximal runs so crossings at
    // shared junctions are counted once (a fully horizontal decomposition is
    // one closed line).
    let mut runs: Vec<(Vec<(usize, Vec2, Vec2)>, bool)> = Vec::new();
    let mut current: Vec<(usize, Vec2, Vec2)> = Vec::new();
    let joins = |prev: &[(usize, Vec2, Vec2)], next: &[(usize, Vec2, Vec2)]| -> bool {
        match (prev.last(), next.first()) {
            (Some((t1, _, q)), Some((t2, p, _))) => q_s.same_surface_point(
                SurfacePoint { tri: *t1, pos: *q },
                SurfacePoint { tri: *t2, pos: *p },
                1e-9,
            ),
            _ => false,
        }
    };
    for seg in &decomp.segments {
        if seg.kind != SegKind::Horizontal {
            if !current.is_empty() {
                runs.push((std::mem::take(&mut current), false));
            }
            continue;
        }
        if !current.is_empty() && !joins(&current, &seg.pieces) {
            runs.push((std::mem::take(&mut current), false));
        }
        current.extend(seg.pieces.iter().cloned());
    }
    if !current.is_empty() {
        // A single all-horizontal run may close up.
        let closed = runs.is_empty()
            && joins(&current, &current[..1.min(current.len())].to_vec());
        runs.push((current, closed));
    }
    for (pieces, closed) in runs {
        let mapped: Vec<(usize, Vec2, Vec2)> = pieces
            .iter()
            .map(|(tri, p, q)| (*tri, m * p, m * q))
            .collect();
        let gamma = PiecewiseCurve::new(mapped, closed);
        for b in &beta_groups {
            total += count_transverse(q_e, &gamma, b);
        }
    }
    let radius = c_est * decomp.geodesic_length * beta.length()
        / (decomp.l_min * l_min_e);
    Ok(TransportEstimate { total, radius })
}
