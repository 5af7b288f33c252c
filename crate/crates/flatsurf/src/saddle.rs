//! Saddle connections: enumeration by a pruned developed-wedge search,
//! shortest lengths and the systole, Delaunay triangulations by edge flips,
//! complexes, period coordinates, and the diameter machinery built on exact
//! visibility distances.

use crate::geom::{cross, dist_point_segment, in_circle, HalfAffine, Vec2, EPS_ANG, EPS_GEOM};
use crate::linear::{trace_from_corner, TracedSegment};
use crate::surface::{EdgeRef, Gluing, HalfTranslationSurface, SurfacePoint, VertexRay};
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SaddleError {
    #[error("developed-triangle search exceeded the node budget of {0}")]
    BudgetExceeded(usize),
    #[error("Delaunay flip sequence did not terminate (possible self-adjacent blockage)")]
    DelaunayStuck,
    #[error("chosen basis does not determine all edges via triangle relations")]
    RankDeficient,
    #[error("saddle connection already lies inside the complex")]
    NotApplicable,
    #[error(transparent)]
    Linear(#[from] crate::linear::LinearError),
}

/// Default node budget for the developed search.
pub const DEFAULT_NODE_BUDGET: usize = 10_000_000;

/// A saddle connection, identified by its combinatorial key: the corner it
/// leaves through, the gluings it crosses, and the corner it arrives at.
/// Triangulation edges have an empty crossing list.
#[derive(Clone, Debug)]
pub struct SaddleConnection {
    /// Vertex ids of the endpoints (start, end) in the traversal recorded.
    pub endpoints: (usize, usize),
    /// Holonomy with canonical sign (`y > 0`, or `y == 0` and `x > 0`).
    pub holonomy: Vec2,
    pub length: f64,
    /// Corner the recorded traversal leaves through.
    pub start_corner: (usize, usize),
    /// Direction in the start corner's chart (not sign-normalized).
    pub start_dir: Vec2,
    /// Corner the traversal arrives at.
    pub end_corner: (usize, usize),
    /// Gluings crossed, in order.
    pub crossings: Vec<usize>,
}

impl SaddleConnection {
    /// Canonical identity key, orientation-independent.
    pub fn key(&self) -> (Vec<usize>, (usize, usize), (usize, usize)) {
        let fwd = (self.crossings.clone(), self.start_corner, self.end_corner);
        let mut rev_cross = self.crossings.clone();
        rev_cross.reverse();
        let rev = (rev_cross, self.end_corner, self.start_corner);
        fwd.min(rev)
    }

    /// Retrace the connection on its surface, yielding the developed segment.
    pub fn trace(&self, s: &HalfTranslationSurface) -> TracedSegment {
        trace_from_corner(
            s,
            self.start_corner,
            self.start_dir,
            self.length * (1.0 + 1e-9) + 1e-12,
        )
        .expect("connection retraces")
    }

    /// In-triangle pieces of the connection.
    pub fn subsegments(&self, s: &HalfTranslationSurface) -> Vec<(usize, Vec2, Vec2)> {
        self.trace(s).subsegments(s)
    }

    /// Ray at the start vertex pointing along the connection.
    pub fn start_ray(&self) -> VertexRay {
        VertexRay {
            corner: self.start_corner,
            dir: self.start_dir,
        }
    }

    /// Ray at the end vertex pointing back along the connection.
    pub fn end_ray(&self, s: &HalfTranslationSurface) -> VertexRay {
        let seg = self.trace(s);
        VertexRay {
            corner: seg.hit.expect("connection ends at a vertex").corner,
            dir: -seg.end_dir,
        }
    }
}

pub fn canonical_sign(v: Vec2) -> Vec2 {
    if v.y > EPS_GEOM || (v.y.abs() <= EPS_GEOM && v.x > 0.0) {
        v
    } else {
        -v
    }
}

struct WedgeState {
    tri: usize,
    entry_edge: usize,
    dev: HalfAffine,
    lo: Vec2,
    hi: Vec2,
    crossings: Vec<usize>,
}

fn strictly_inside_wedge(lo: Vec2, hi: Vec2, c: Vec2) -> bool {
    let n = c.norm();
    if n <= EPS_GEOM {
        return false;
    }
    // Clearance from the blocking boundary rays, in length units at the
    // candidate's distance.
    let cl = cross(lo.normalize(), c);
    let ch = cross(c, hi.normalize());
    cl > EPS_GEOM && ch > EPS_GEOM
}

/// Minimum distance from the origin to the part of segment `a-b` lying inside
/// the closed sector between directions `lo` and `hi` (sector angle < π).
/// Returns `None` when the segment misses the sector. Developments of cone
/// surfaces overlap the plane, so pruning must respect the wedge, not just
/// planar proximity.
fn wedge_clipped_min_dist(lo: Vec2, hi: Vec2, a: Vec2, b: Vec2) -> Option<f64> {
    let d = b - a;
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    // cross(lo, a + t d) ≥ 0 and cross(a + t d, hi) ≥ 0.
    for (c0, c1) in [
        (cross(lo, a), cross(lo, d)),
        (cross(a, hi), cross(d, hi)),
    ] {
        if c1.abs() < 1e-300 {
            if c0 < 0.0 {
                return None;
            }
        } else {
            let r = -c0 / c1;
            if c1 > 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    if t0 > t1 {
        return None;
    }
    // |a + t d| is convex in t; minimize at the clamped projection.
    let tm = if d.norm_squared() > 0.0 {
        (-a.dot(&d) / d.norm_squared()).clamp(t0, t1)
    } else {
        t0
    };
    let best = (a + tm * d)
        .norm()
        .min((a + t0 * d).norm())
        .min((a + t1 * d).norm());
    Some(best)
}

/// Run the developed-wedge search from every corner, reporting visible
/// vertices (candidate saddle connections) to `on_vertex`.
fn wedge_search<F>(
    s: &HalfTranslationSurface,
    max_len: f64,
    budget: usize,
    mut on_vertex: F,
) -> Result<(), SaddleError>
where
    F: FnMut((usize, usize), &WedgeState, Vec2, usize),
{
    let mut nodes = 0usize;
    for t0 in 0..s.num_triangles() {
        for c0 in 0..3 {
            let origin = s.corner_pos(t0, c0);
            let dev0 = HalfAffine::new(1.0, -origin);
            let opp = (c0 + 1) % 3;
            let pa = dev0.apply(s.corner_pos(t0, (c0 + 1) % 3));
            let pb = dev0.apply(s.corner_pos(t0, (c0 + 2) % 3));
            let (p, gid0) = s.partner(t0, opp);
            let mut stack = vec![WedgeState {
                tri: p.tri,
                entry_edge: p.edge,
                dev: dev0.compose(&s.transition_into(t0, opp)),
                lo: pa,
                hi: pb,
                crossings: vec![gid0],
            }];
            while let Some(st) = stack.pop() {
                nodes += 1;
                if nodes > budget {
                    return Err(SaddleError::BudgetExceeded(budget));
                }
                let e = st.entry_edge;
                let pe = st.dev.apply(s.corner_pos(st.tri, e));
                let pe1 = st.dev.apply(s.corner_pos(st.tri, (e + 1) % 3));
                let apex_idx = (e + 2) % 3;
                let c = st.dev.apply(s.corner_pos(st.tri, apex_idx));
                let (lo_end, lo_edge, hi_end, hi_edge) = if cross(pe, pe1) > 0.0 {
                    (pe, (e + 2) % 3, pe1, (e + 1) % 3)
                } else {
                    (pe1, (e + 1) % 3, pe, (e + 2) % 3)
                };
                let inside = strictly_inside_wedge(st.lo, st.hi, c);
                if inside && c.norm() <= max_len + EPS_GEOM {
                    on_vertex((t0, c0), &st, c, apex_idx);
                }
                let mut push_child = |lo: Vec2, hi: Vec2, end_a: Vec2, end_b: Vec2, edge: usize| {
                    if cross(lo.normalize(), hi.normalize()) <= 1e-15 {
                        return;
                    }
                    match wedge_clipped_min_dist(lo, hi, end_a, end_b) {
                        Some(d) if d <= max_len + EPS_GEOM => {}
                        _ => return,
                    }
                    let (p, gid) = s.partner(st.tri, edge);
                    let mut crossings = st.crossings.clone();
                    crossings.push(gid);
                    stack.push(WedgeState {
                        tri: p.tri,
                        entry_edge: p.edge,
                        dev: st.dev.compose(&s.transition_into(st.tri, edge)),
                        lo,
                        hi,
                        crossings,
                    });
                };
                if inside {
                    push_child(st.lo, c, lo_end, c, lo_edge);
                    push_child(c, st.hi, c, hi_end, hi_edge);
                } else if cross(st.lo, c) <= 0.0 {
                    // Apex at or clockwise of the wedge: everything continues
                    // across the hi-side edge.
                    push_child(st.lo, st.hi, c, hi_end, hi_edge);
                } else {
                    push_child(st.lo, st.hi, lo_end, c, lo_edge);
                }
            }
        }
    }
    Ok(())
}

/// Enumerate all saddle connections of length ≤ `max_len`, deduplicated up to
/// orientation reversal and sorted by length.
pub fn enumerate_saddle_connections(
    s: &HalfTranslationSurface,
    max_len: f64,
    budget: usize,
) -> Result<Vec<SaddleConnection>, SaddleError> {
    let mut found: HashMap<(Vec<usize>, (usize, usize), (usize, usize)), SaddleConnection> =
        HashMap::new();
    // Triangulation edges are connections with empty crossing lists.
    for g in s.gluings() {
        let v = s.triangle(g.a.tri)[g.a.edge];
        if v.norm() <= max_len + EPS_GEOM {
            let conn = SaddleConnection {
                endpoints: (
                    s.vertex_of_corner(g.a.tri, g.a.edge),
                    s.vertex_of_corner(g.a.tri, (g.a.edge + 1) % 3),
                ),
                holonomy: canonical_sign(v),
                length: v.norm(),
                start_corner: (g.a.tri, g.a.edge),
                start_dir: v,
                end_corner: (g.a.tri, (g.a.edge + 1) % 3),
                crossings: Vec::new(),
            };
            found.entry(conn.key()).or_insert(conn);
        }
    }
    wedge_search(s, max_len, budget, |start_corner, st, c, apex_idx| {
        let conn = SaddleConnection {
            endpoints: (
                s.vertex_of_corner(start_corner.0, start_corner.1),
                s.vertex_of_corner(st.tri, apex_idx),
            ),
            holonomy: canonical_sign(c),
            length: c.norm(),
            start_corner,
            start_dir: c,
            end_corner: (st.tri, apex_idx),
            crossings: st.crossings.clone(),
        };
        found.entry(conn.key()).or_insert(conn);
    })?;
    let mut out: Vec<SaddleConnection> = found.into_values().collect();
    out.sort_by(|a, b| {
        a.length
            .partial_cmp(&b.length)
            .unwrap()
            .then(a.holonomy.x.partial_cmp(&b.holonomy.x).unwrap())
            .then(a.holonomy.y.partial_cmp(&b.holonomy.y).unwrap())
            .then(a.endpoints.cmp(&b.endpoints))
            .then(a.start_corner.cmp(&b.start_corner))
    });
    Ok(out)
}

/// `(ℓ_min, ℓ_min† = min(1, ℓ_min), sys)`.
#[derive(Clone, Copy, Debug)]
pub struct ShortestLengths {
    pub l_min: f64,
    pub l_min_dagger: f64,
    pub sys: f64,
}

/// Shortest saddle connection length. Exact: the shortest triangulation edge
/// is itself a connection, so enumerating up to that length is complete.
pub fn l_min(s: &HalfTranslationSurface) -> f64 {
    let cap = s
        .gluings()
        .iter()
        .map(|g| s.triangle(g.a.tri)[g.a.edge].norm())
        .fold(f64::INFINITY, f64::min);
    let conns = enumerate_saddle_connections(s, cap + EPS_GEOM, DEFAULT_NODE_BUDGET)
        .expect("l_min enumeration within budget");
    conns
        .iter()
        .map(|c| c.length)
        .fold(f64::INFINITY, f64::min)
}

/// First-return arclength of the straight line from `start` in direction
/// `dir` back to `start` with the same orientation, or `None`.
pub fn detect_closure(
    s: &HalfTranslationSurface,
    start: SurfacePoint,
    dir: Vec2,
    max_len: f64,
) -> Option<f64> {
    let seg = crate::linear::trace_ray(s, start, dir, max_len).ok()?;
    if seg.hit.is_some() {
        return None;
    }
    let pieces = seg.subsegments(s);
    let mut acc = 0.0;
    let tol = 1e-9;
    let dn = dir.normalize();
    for (i, (tri, a, b)) in pieces.iter().enumerate() {
        let len = (b - a).norm();
        if len > tol && *tri == start.tri {
            let d = dist_point_segment(start.pos, *a, *b);
            if d <= tol {
                let t = ((start.pos - a).dot(&(b - a)) / (b - a).norm_squared()).clamp(0.0, 1.0);
                let at = acc + t * len;
                let piece_dir = (b - a).normalize();
                if at > tol && (i > 0 || t > tol) && (piece_dir - dn).norm() < 1e-9 {
                    return Some(at);
                }
            }
        }
        acc += len;
    }
    None
}

/// Cylinder circumference candidates ≤ `bound` from parallel offsets of
/// enumerated connections (every cylinder is bounded by connections parallel
/// to its core).
fn cylinder_candidates(
    s: &HalfTranslationSurface,
    conns: &[SaddleConnection],
    bound: f64,
) -> Vec<f64> {
    let mut out = Vec::new();
    for c in conns {
        let pieces = c.subsegments(s);
        let total: f64 = pieces.iter().map(|(_, a, b)| (b - a).norm()).sum();
        let mut acc = 0.0;
        let mut mid: Option<(usize, Vec2, Vec2)> = None;
        for (tri, a, b) in &pieces {
            let len = (b - a).norm();
            if len > 1e-12 && acc + len >= total / 2.0 {
                let t = ((total / 2.0 - acc) / len).clamp(0.1, 0.9);
                mid = Some((*tri, a + t * (b - a), (b - a).normalize()));
                break;
            }
            acc += len;
        }
        let Some((tri, mp, dir)) = mid else { continue };
        let n = crate::geom::perp(dir);
        for side in [1.0, -1.0] {
            let mut eps = 1e-6 * c.length.min(1.0);
            for _ in 0..3 {
                let start = SurfacePoint {
                    tri,
                    pos: mp + side * eps * n,
                };
                if !s.contains_point(tri, start.pos) {
                    break;
                }
                match detect_closure(s, start, dir, bound * (1.0 + 1e-9) + 1e-9) {
                    Some(circ) => {
                        out.push(circ);
                        break;
                    }
                    None => eps /= 8.0,
                }
            }
        }
    }
    out
}

/// Junction test: a chain of connections is geodesic at a vertex iff the two
/// angles between the reversed incoming ray and the outgoing ray are both ≥ π.
pub fn geodesic_junction(
    s: &HalfTranslationSurface,
    arrive_back: &VertexRay,
    depart: &VertexRay,
) -> bool {
    let (t, c) = arrive_back.corner;
    let cone = s.vertices()[s.vertex_of_corner(t, c)].cone_angle;
    let a1 = s.angle_between_rays(arrive_back, depart);
    let a2 = cone - a1;
    a1 >= std::f64::consts::PI - EPS_ANG && a2 >= std::f64::consts::PI - EPS_ANG
}

struct OrientedConn {
    start_v: usize,
    end_v: usize,
    len: f64,
    start_ray: VertexRay,
    back_ray: VertexRay,
}

/// Shortest closed singular flat geodesic of total length ≤ `bound` assembled
/// from the given connections, or `None`.
fn shortest_chain(
    s: &HalfTranslationSurface,
    conns: &[SaddleConnection],
    bound: f64,
) -> Option<f64> {
    let mut oriented = Vec::new();
    for c in conns {
        if c.length > bound + EPS_GEOM {
            continue;
        }
        oriented.push(OrientedConn {
            start_v: c.endpoints.0,
            end_v: c.endpoints.1,
            len: c.length,
            start_ray: c.start_ray(),
            back_ray: c.end_ray(s),
        });
        oriented.push(OrientedConn {
            start_v: c.endpoints.1,
            end_v: c.endpoints.0,
            len: c.length,
            start_ray: c.end_ray(s),
            back_ray: c.start_ray(),
        });
    }
    let mut best: Option<f64> = None;
    fn dfs(
        s: &HalfTranslationSurface,
        oriented: &[OrientedConn],
        first: usize,
        cur: usize,
        acc: f64,
        bound: f64,
        depth: usize,
        best: &mut Option<f64>,
    ) {
        let cur_o = &oriented[cur];
        let f = &oriented[first];
        if cur_o.end_v == f.start_v && geodesic_junction(s, &cur_o.back_ray, &f.start_ray) {
            if best.map_or(true, |b| acc < b) {
                *best = Some(acc);
            }
        }
        if depth >= 16 {
            return;
        }
        let limit = best.map_or(bound, |b| b.min(bound));
        for (i, o) in oriented.iter().enumerate() {
            if o.start_v != cur_o.end_v || acc + o.len > limit {
                continue;
            }
            if !geodesic_junction(s, &cur_o.back_ray, &o.start_ray) {
                continue;
            }
            dfs(s, oriented, first, i, acc + o.len, bound, depth + 1, best);
        }
    }
    for first in 0..oriented.len() {
        if oriented[first].len <= bound {
            dfs(s, &oriented, first, first, oriented[first].len, bound, 1, &mut best);
        }
    }
    best
}

/// Shortest lengths: `ℓ_min`, `ℓ_min†`, and the systole.
///
/// The systole search minimizes over cylinder cores and singular chains with
/// an escalating enumeration radius; the result is certified exact once the
/// radius exceeds the returned value.
pub fn shortest_lengths(s: &HalfTranslationSurface) -> ShortestLengths {
    let lm = l_min(s);
    let mut radius = 2.0 * lm;
    for _ in 0..12 {
        let conns = enumerate_saddle_connections(s, radius, DEFAULT_NODE_BUDGET)
            .expect("systole enumeration within budget");
        let mut best = f64::INFINITY;
        for c in cylinder_candidates(s, &conns, radius) {
            best = best.min(c);
        }
        if let Some(c) = shortest_chain(s, &conns, radius.min(best)) {
            best = best.min(c);
        }
        if best <= radius {
            return ShortestLengths {
                l_min: lm,
                l_min_dagger: lm.min(1.0),
                sys: best,
            };
        }
        radius *= 2.0;
    }
    ShortestLengths {
        l_min: lm,
        l_min_dagger: lm.min(1.0),
        sys: f64::INFINITY,
    }
}

// ---------------------------------------------------------------------------
// Delaunay triangulations by edge flips.
// ---------------------------------------------------------------------------

/// Developed quad around a gluing: `(P_a, P_b, P_c, D)` in the chart of side
/// `a`'s triangle, where `P_a P_b` is the shared edge, `P_c` the apex of the
/// near triangle and `D` the developed apex of the far triangle.
fn quad(s: &HalfTranslationSurface, gid: usize) -> (Vec2, Vec2, Vec2, Vec2) {
    let g = s.gluings()[gid];
    let (t, e) = (g.a.tri, g.a.edge);
    let pa = s.corner_pos(t, e);
    let pb = s.corner_pos(t, (e + 1) % 3);
    let pc = s.corner_pos(t, (e + 2) % 3);
    let map = s.transition_into(t, e);
    let d = map.apply(s.corner_pos(g.b.tri, (g.b.edge + 2) % 3));
    (pa, pb, pc, d)
}

fn in_circle_value(s: &HalfTranslationSurface, gid: usize) -> f64 {
    let (pa, pb, pc, d) = quad(s, gid);
    let scale = (pb - pa)
        .norm()
        .max((pc - pa).norm())
        .max((d - pa).norm())
        .max(1e-300);
    in_circle(pa, pb, pc, d) / scale.powi(4)
}

/// Flip the edge `gid` (both sides must be distinct triangles). Triangle and
/// gluing ids are preserved in place.
pub fn flip_edge(
    s: &HalfTranslationSurface,
    gid: usize,
) -> Result<HalfTranslationSurface, SaddleError> {
    let g = s.gluings()[gid];
    let (t1, e1) = (g.a.tri, g.a.edge);
    let (t2, e2) = (g.b.tri, g.b.edge);
    if t1 == t2 {
        return Err(SaddleError::DelaunayStuck);
    }
    let (pa, pb, pc, d) = quad(s, gid);
    // New triangles in the chart of t1:
    //   T1 = (P_c, P_a, D): edges P_c→P_a (old (t1,e1+2)), P_a→D (old
    //   (t2,e2+1)), D→P_c (new diagonal);
    //   T2 = (D, P_b, P_c): edges D→P_b (old (t2,e2+2)), P_b→P_c (old
    //   (t1,e1+1)), P_c→D (new diagonal).
    let t1_edges = [pa - pc, d - pa, pc - d];
    let t2_edges = [pb - d, pc - pb, d - pc];
    if cross(t1_edges[0], t1_edges[1]) <= 0.0 || cross(t2_edges[0], t2_edges[1]) <= 0.0 {
        return Err(SaddleError::DelaunayStuck);
    }
    let mut tris: Vec<[Vec2; 3]> = (0..s.num_triangles()).map(|t| *s.triangle(t)).collect();
    tris[t1] = t1_edges;
    tris[t2] = t2_edges;

    let old_sides = [
        EdgeRef::new(t1, (e1 + 2) % 3),
        EdgeRef::new(t2, (e2 + 1) % 3),
        EdgeRef::new(t2, (e2 + 2) % 3),
        EdgeRef::new(t1, (e1 + 1) % 3),
    ];
    let new_sides = [
        EdgeRef::new(t1, 0),
        EdgeRef::new(t1, 1),
        EdgeRef::new(t2, 0),
        EdgeRef::new(t2, 1),
    ];
    let remap = |r: EdgeRef| -> EdgeRef {
        for (o, n) in old_sides.iter().zip(new_sides.iter()) {
            if r == *o {
                return *n;
            }
        }
        r
    };
    let mut gluings: Vec<Gluing> = s.gluings().to_vec();
    for (i, og) in s.gluings().iter().enumerate() {
        if i == gid {
            gluings[i] = Gluing {
                a: EdgeRef::new(t1, 2),
                b: EdgeRef::new(t2, 2),
                flip: false,
            };
        } else {
            gluings[i] = Gluing {
                a: remap(og.a),
                b: remap(og.b),
                flip: og.flip,
            };
        }
    }
    // Both new triangles are stored in t1-chart coordinates, so flip flags of
    // the touched gluings may change; re-derive every flag from the vectors.
    for gg in gluings.iter_mut() {
        let va = tris[gg.a.tri][gg.a.edge];
        let vb = tris[gg.b.tri][gg.b.edge];
        let scale = va.norm().max(1.0);
        if (va + vb).norm() <= 1e-7 * scale {
            gg.flip = false;
        } else if (va - vb).norm() <= 1e-7 * scale {
            gg.flip = true;
        } else {
            return Err(SaddleError::DelaunayStuck);
        }
    }
    HalfTranslationSurface::build(tris, gluings).map_err(|_| SaddleError::DelaunayStuck)
}

/// A triangulation of the surface by saddle connections: the retriangulated
/// surface plus per-edge holonomy data.
#[derive(Clone, Debug)]
pub struct Triangulation {
    pub surface: HalfTranslationSurface,
    pub edges: Vec<TriEdge>,
}

#[derive(Clone, Debug)]
pub struct TriEdge {
    pub gluing: usize,
    pub holonomy: Vec2,
    pub length: f64,
    pub endpoints: (usize, usize),
}

impl Triangulation {
    pub fn of(surface: HalfTranslationSurface) -> Triangulation {
        let edges = surface
            .gluings()
            .iter()
            .enumerate()
            .map(|(gid, g)| {
                let v = surface.triangle(g.a.tri)[g.a.edge];
                TriEdge {
                    gluing: gid,
                    holonomy: canonical_sign(v),
                    length: v.norm(),
                    endpoints: (
                        surface.vertex_of_corner(g.a.tri, g.a.edge),
                        surface.vertex_of_corner(g.a.tri, (g.a.edge + 1) % 3),
                    ),
                }
            })
            .collect();
        Triangulation { surface, edges }
    }
}

/// Interior edges whose in-circle test fails by more than the tolerance.
pub fn delaunay_violations(s: &HalfTranslationSurface, tol: f64) -> Vec<(usize, f64)> {
    (0..s.gluings().len())
        .filter_map(|gid| {
            let v = in_circle_value(s, gid);
            (v > tol).then_some((gid, v))
        })
        .collect()
}

/// Flip to the Delaunay triangulation. Cocircular ties are broken by
/// lexicographic comparison of developed edge midpoints, so outputs are
/// reproducible across runs.
pub fn delaunay_triangulation(s: &HalfTranslationSurface) -> Result<Triangulation, SaddleError> {
    let tol = 1e-9;
    let mut cur = s.clone();
    let mut flips = 0usize;
    loop {
        let mut flipped_any = false;
        for gid in 0..cur.gluings().len() {
            let v = in_circle_value(&cur, gid);
            let do_flip = if v > tol {
                true
            } else if v > -tol {
                // Cocircular tie: pick the lexicographically smaller diagonal
                // midpoint, and only flip strictly convex quads.
                let (pa, pb, pc, d) = quad(&cur, gid);
                let m_cur = (pa + pb) / 2.0;
                let m_new = (pc + d) / 2.0;
                let g = cur.gluings()[gid];
                let lex_less = m_new.x < m_cur.x - 1e-12
                    || (m_new.x < m_cur.x + 1e-12 && m_new.y < m_cur.y - 1e-12);
                g.a.tri != g.b.tri && lex_less && {
                    let q = [pa, d, pb, pc];
                    (0..4).all(|i| {
                        cross(q[(i + 1) % 4] - q[i], q[(i + 2) % 4] - q[(i + 1) % 4]) > tol
                    })
                }
            } else {
                false
            };
            if do_flip {
                if let Ok(next) = flip_edge(&cur, gid) {
                    cur = next;
                    flipped_any = true;
                    flips += 1;
                    if flips > 10_000 {
                        return Err(SaddleError::DelaunayStuck);
                    }
                }
            }
        }
        if !flipped_any {
            break;
        }
    }
    if !delaunay_violations(&cur, 10.0 * tol).is_empty() {
        return Err(SaddleError::DelaunayStuck);
    }
    Ok(Triangulation::of(cur))
}

// ---------------------------------------------------------------------------
// Complexes (Appendix A building blocks).
// ---------------------------------------------------------------------------

/// A set of pairwise disjoint saddle connections, closed under the triangle
/// rule. Faces are implicit: a flat triangle bounded by three connections
/// contains no further vertices or connections, so "γ inside K" reduces to "γ
/// is a connection of K".
#[derive(Clone, Debug)]
pub struct Complex {
    pub connections: Vec<SaddleConnection>,
}

impl Complex {
    pub fn new(seed: SaddleConnection) -> Complex {
        Complex {
            connections: vec![seed],
        }
    }

    pub fn size(&self) -> usize {
        self.connections.len()
    }

    /// Maximal flat length among the connections.
    pub fn max_length(&self) -> f64 {
        self.connections
            .iter()
            .map(|c| c.length)
            .fold(0.0, f64::max)
    }

    pub fn contains(&self, c: &SaddleConnection) -> bool {
        let k = c.key();
        self.connections.iter().any(|d| d.key() == k)
    }

    /// Whether the connection count matches a full triangulation:
    /// `E = 3V + 6g - 6` (maximal disjoint systems are triangulations).
    pub fn is_triangulation(&self, s: &HalfTranslationSurface) -> bool {
        let v = s.vertices().len();
        let g = s.genus();
        self.connections.len() == 3 * v + 6 * g - 6
    }
}

/// Interiors of two connections intersect (shared endpoints at vertices are
/// allowed).
pub fn connections_cross(
    s: &HalfTranslationSurface,
    a: &SaddleConnection,
    b: &SaddleConnection,
) -> bool {
    if a.key() == b.key() {
        return false;
    }
    let pa = a.subsegments(s);
    let pb = b.subsegments(s);
    for (ta, a0, a1) in &pa {
        for (tb, b0, b1) in &pb {
            if ta != tb {
                continue;
            }
            match crate::geom::intersect_segments(*a0, *a1, *b0, *b1, EPS_GEOM) {
                crate::geom::SegIntersection::Crossing { .. } => return true,
                crate::geom::SegIntersection::Overlap => return true,
                crate::geom::SegIntersection::Touch { point, .. } => {
                    let at_vertex =
                        (0..3).any(|c| (point - s.corner_pos(*ta, c)).norm() <= 10.0 * EPS_GEOM);
                    if !at_vertex {
                        return true;
                    }
                }
                crate::geom::SegIntersection::None => {}
            }
        }
    }
    false
}

/// Extend a complex using a seed connection: returns `K' ⊋ K` with
/// `ℓ_{K'} ≤ 2 ℓ_K + ℓ_γ`. When the seed crosses the boundary, the new
/// connection is realized by searching the enumerated pool for the shortest
/// connection disjoint from `K`; the enlargement bound guarantees one exists
/// within the search radius.
pub fn extend_complex(
    s: &HalfTranslationSurface,
    k: &Complex,
    gamma: &SaddleConnection,
) -> Result<Complex, SaddleError> {
    if k.contains(gamma) || k.is_triangulation(s) {
        return Err(SaddleError::NotApplicable);
    }
    let disjoint_from_k =
        |c: &SaddleConnection| k.connections.iter().all(|d| !connections_cross(s, d, c));
    if disjoint_from_k(gamma) {
        let mut out = k.clone();
        out.connections.push(gamma.clone());
        return Ok(out);
    }
    let bound = 2.0 * k.max_length() + gamma.length;
    let pool = enumerate_saddle_connections(s, bound, DEFAULT_NODE_BUDGET)?;
    for c in pool {
        if !k.contains(&c) && disjoint_from_k(&c) {
            let mut out = k.clone();
            out.connections.push(c);
            return Ok(out);
        }
    }
    Err(SaddleError::NotApplicable)
}

// ---------------------------------------------------------------------------
// Period coordinates.
// ---------------------------------------------------------------------------

/// Sign with which edge `(t, e)`'s vector realizes its gluing's holonomy (the
/// side-a vector is the reference).
fn edge_sign(s: &HalfTranslationSurface, t: usize, e: usize) -> f64 {
    let (_, gid) = s.partner(t, e);
    let g = s.gluings()[gid];
    if (g.a.tri, g.a.edge) == (t, e) || g.flip {
        1.0
    } else {
        -1.0
    }
}

/// Holonomies (up to sign) of the chosen basis edges, after checking the basis
/// determines all edges via the per-triangle closure relations.
pub fn period_vector(s: &HalfTranslationSurface, basis: &[usize]) -> Result<Vec<Vec2>, SaddleError> {
    solve_periods(s, basis, None).map(|all| basis.iter().map(|&g| all[g]).collect())
}

fn solve_periods(
    s: &HalfTranslationSurface,
    basis: &[usize],
    values: Option<&[Vec2]>,
) -> Result<Vec<Vec2>, SaddleError> {
    let ne = s.gluings().len();
    let mut h: Vec<Option<Vec2>> = vec![None; ne];
    for (i, &gid) in basis.iter().enumerate() {
        let g = s.gluings()[gid];
        let base = s.triangle(g.a.tri)[g.a.edge];
        h[gid] = Some(match values {
            Some(v) => v[i],
            None => base,
        });
    }
    loop {
        let mut progressed = false;
        for t in 0..s.num_triangles() {
            let gids: [usize; 3] = [
                s.partner(t, 0).1,
                s.partner(t, 1).1,
                s.partner(t, 2).1,
            ];
            let unknown: Vec<usize> = (0..3).filter(|&e| h[gids[e]].is_none()).collect();
            if unknown.len() == 1 {
                let miss = unknown[0];
                let mut sum = Vec2::zeros();
                for e in 0..3 {
                    if e != miss {
                        sum += edge_sign(s, t, e) * h[gids[e]].unwrap();
                    }
                }
                h[gids[miss]] = Some(-sum / edge_sign(s, t, miss));
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    if h.iter().any(|x| x.is_none()) {
        return Err(SaddleError::RankDeficient);
    }
    Ok(h.into_iter().map(|x| x.unwrap()).collect())
}

/// Rebuild the surface with perturbed basis holonomies (period-coordinate
/// deformation); combinatorics are unchanged.
pub fn perturb_periods(
    s: &HalfTranslationSurface,
    basis: &[usize],
    deltas: &[Vec2],
) -> Result<HalfTranslationSurface, SaddleError> {
    assert_eq!(basis.len(), deltas.len());
    let values: Vec<Vec2> = basis
        .iter()
        .zip(deltas)
        .map(|(&gid, d)| {
            let g = s.gluings()[gid];
            s.triangle(g.a.tri)[g.a.edge] + d
        })
        .collect();
    let all = solve_periods(s, basis, Some(&values))?;
    let tris: Vec<[Vec2; 3]> = (0..s.num_triangles())
        .map(|t| {
            let mut tri = [Vec2::zeros(); 3];
            for e in 0..3 {
                let gid = s.partner(t, e).1;
                tri[e] = edge_sign(s, t, e) * all[gid];
            }
            tri
        })
        .collect();
    HalfTranslationSurface::build(tris, s.gluings().to_vec()).map_err(|_| SaddleError::RankDeficient)
}

/// Greedy period basis: grow the gluing set until every edge is determined.
pub fn greedy_period_basis(s: &HalfTranslationSurface) -> Vec<usize> {
    let ne = s.gluings().len();
    let mut basis: Vec<usize> = Vec::new();
    for gid in 0..ne {
        if determined_count(s, &basis) == ne {
            break;
        }
        let mut trial = basis.clone();
        trial.push(gid);
        if determined_count(s, &trial) > determined_count(s, &basis) {
            basis = trial;
        }
    }
    basis
}

fn determined_count(s: &HalfTranslationSurface, basis: &[usize]) -> usize {
    let ne = s.gluings().len();
    let mut h: Vec<bool> = vec![false; ne];
    for &gid in basis {
        h[gid] = true;
    }
    loop {
        let mut progressed = false;
        for t in 0..s.num_triangles() {
            let gids = [s.partner(t, 0).1, s.partner(t, 1).1, s.partner(t, 2).1];
            let unknowns: Vec<usize> = gids.iter().copied().filter(|&g| !h[g]).collect();
            if unknowns.len() == 1 {
                h[unknowns[0]] = true;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    h.iter().filter(|x| **x).count()
}

// ---------------------------------------------------------------------------
// Metrics: area, genus, diameter interval.
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct SurfaceMetrics {
    pub area: f64,
    pub genus: usize,
    /// Certified bounds: `diameter_lower ≤ diam ≤ diameter_upper`.
    pub diameter_lower: f64,
    pub diameter_upper: f64,
    /// The reported estimate (the upper bound).
    pub diameter: f64,
}

pub struct VisibilityResult {
    pub vertex_dist: Vec<f64>,
    pub point_dist: f64,
}

/// Exact distance from an interior point to the vertex set (shortest paths to
/// singularities are straight visibility segments).
pub fn dist_to_vertices(s: &HalfTranslationSurface, from: SurfacePoint, cap: f64) -> f64 {
    let res = visibility_search(s, from, None, cap);
    res.vertex_dist
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// All-pairs shortest vertex distances over the saddle connection graph.
pub struct VertexGraph {
    n: usize,
    d: Vec<f64>,
}

impl VertexGraph {
    pub fn dist(&self, u: usize, v: usize) -> f64 {
        self.d[u * self.n + v]
    }
}

/// Exact vertex-to-vertex distances from connections of length ≤ cap.
pub fn vertex_graph(s: &HalfTranslationSurface, cap: f64) -> VertexGraph {
    let conns =
        enumerate_saddle_connections(s, cap, DEFAULT_NODE_BUDGET).unwrap_or_else(|_| Vec::new());
    let n = s.vertices().len();
    let mut d = vec![f64::INFINITY; n * n];
    for i in 0..n {
        d[i * n + i] = 0.0;
    }
    #[derive(PartialEq)]
    struct Entry(f64, usize);
    impl Eq for Entry {}
    impl PartialOrd for Entry {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Entry {
        fn cmp(&self, other: &Self) -> Ordering {
            other.0.partial_cmp(&self.0).unwrap_or(Ordering::Equal)
        }
    }
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for c in &conns {
        adj[c.endpoints.0].push((c.endpoints.1, c.length));
        adj[c.endpoints.1].push((c.endpoints.0, c.length));
    }
    for src in 0..n {
        let mut heap = BinaryHeap::new();
        heap.push(Entry(0.0, src));
        while let Some(Entry(dist, u)) = heap.pop() {
            if dist > d[src * n + u] {
                continue;
            }
            for &(v, w) in &adj[u] {
                let nd = dist + w;
                if nd < d[src * n + v] {
                    d[src * n + v] = nd;
                    heap.push(Entry(nd, v));
                }
            }
        }
    }
    VertexGraph { n, d }
}

/// Exact point-to-point distance (geodesics bend only at vertices): the
/// minimum of direct visibility and vertex-routed paths.
pub fn dist_points(
    s: &HalfTranslationSurface,
    x: SurfacePoint,
    y: SurfacePoint,
    cap: f64,
    conn_graph: &VertexGraph,
) -> f64 {
    let to_x = visibility_search(s, x, Some(y), cap);
    let to_y = visibility_search(s, y, Some(x), cap);
    let mut best = to_x.point_dist.min(to_y.point_dist);
    for (u, du) in to_x.vertex_dist.iter().enumerate() {
        if !du.is_finite() {
            continue;
        }
        for (v, dv) in to_y.vertex_dist.iter().enumerate() {
            if !dv.is_finite() {
                continue;
            }
            best = best.min(du + conn_graph.dist(u, v) + dv);
        }
    }
    best
}

fn visibility_search(
    s: &HalfTranslationSurface,
    from: SurfacePoint,
    target: Option<SurfacePoint>,
    cap: f64,
) -> VisibilityResult {
    let nv = s.vertices().len();
    let mut res = VisibilityResult {
        vertex_dist: vec![f64::INFINITY; nv],
        point_dist: f64::INFINITY,
    };
    for c in 0..3 {
        let d = (s.corner_pos(from.tri, c) - from.pos).norm();
        let vid = s.vertex_of_corner(from.tri, c);
        if d < res.vertex_dist[vid] {
            res.vertex_dist[vid] = d;
        }
    }
    if let Some(y) = target {
        if y.tri == from.tri {
            res.point_dist = (y.pos - from.pos).norm();
        }
    }
    let dev0 = HalfAffine::new(1.0, -from.pos);
    let mut stack = Vec::new();
    for e in 0..3 {
        let a = dev0.apply(s.corner_pos(from.tri, e));
        let b = dev0.apply(s.corner_pos(from.tri, (e + 1) % 3));
        let (lo, hi) = if cross(a, b) > 0.0 { (a, b) } else { (b, a) };
        if cross(lo.normalize(), hi.normalize()) <= 1e-15 {
            continue;
        }
        let (p, _gid) = s.partner(from.tri, e);
        stack.push(WedgeState {
            tri: p.tri,
            entry_edge: p.edge,
            dev: dev0.compose(&s.transition_into(from.tri, e)),
            lo,
            hi,
            crossings: Vec::new(),
        });
    }
    let mut nodes = 0usize;
    while let Some(st) = stack.pop() {
        nodes += 1;
        if nodes > DEFAULT_NODE_BUDGET {
            break;
        }
        let e = st.entry_edge;
        let pe = st.dev.apply(s.corner_pos(st.tri, e));
        let pe1 = st.dev.apply(s.corner_pos(st.tri, (e + 1) % 3));
        let apex_idx = (e + 2) % 3;
        let c = st.dev.apply(s.corner_pos(st.tri, apex_idx));
        let (lo_end, lo_edge, hi_end, hi_edge) = if cross(pe, pe1) > 0.0 {
            (pe, (e + 2) % 3, pe1, (e + 1) % 3)
        } else {
            (pe1, (e + 1) % 3, pe, (e + 2) % 3)
        };
        let inside = strictly_inside_wedge(st.lo, st.hi, c);
        if inside && c.norm() <= cap {
            let vid = s.vertex_of_corner(st.tri, apex_idx);
            if c.norm() < res.vertex_dist[vid] {
                res.vertex_dist[vid] = c.norm();
            }
        }
        if let Some(y) = target {
            if y.tri == st.tri {
                let p = st.dev.apply(y.pos);
                // The sight segment must genuinely enter the triangle: p on
                // the far side of the entry edge from the origin.
                let n = cross(pe1 - pe, -pe);
                let m = cross(pe1 - pe, p - pe);
                if p.norm() <= cap
                    && n * m < 0.0
                    && strictly_inside_wedge(st.lo, st.hi, p)
                    && p.norm() < res.point_dist
                {
                    res.point_dist = p.norm();
                }
            }
        }
        let mut push_child = |lo: Vec2, hi: Vec2, end_a: Vec2, end_b: Vec2, edge: usize| {
            if cross(lo.normalize(), hi.normalize()) <= 1e-15 {
                return;
            }
            match wedge_clipped_min_dist(lo, hi, end_a, end_b) {
                Some(d) if d <= cap => {}
                _ => return,
            }
            let (p, _gid) = s.partner(st.tri, edge);
            stack.push(WedgeState {
                tri: p.tri,
                entry_edge: p.edge,
                dev: st.dev.compose(&s.transition_into(st.tri, edge)),
                lo,
                hi,
                crossings: Vec::new(),
            });
        };
        if inside {
            push_child(st.lo, c, lo_end, c, lo_edge);
            push_child(c, st.hi, c, hi_end, hi_edge);
        } else if cross(st.lo, c) <= 0.0 {
            push_child(st.lo, st.hi, c, hi_end, hi_edge);
        } else {
            push_child(st.lo, st.hi, lo_end, c, lo_edge);
        }
    }
    res
}

/// Covering radius of a triangle by its own vertices.
fn triangle_cover_radius(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    let d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
    let half_longest = ((b - a).norm().max((c - b).norm()).max((a - c).norm())) / 2.0;
    if d.abs() < 1e-300 {
        return half_longest;
    }
    let ux = (a.norm_squared() * (b.y - c.y)
        + b.norm_squared() * (c.y - a.y)
        + c.norm_squared() * (a.y - b.y))
        / d;
    let uy = (a.norm_squared() * (c.x - b.x)
        + b.norm_squared() * (a.x - c.x)
        + c.norm_squared() * (b.x - a.x))
        / d;
    let cc = Vec2::new(ux, uy);
    let inside = cross(b - a, cc - a) >= 0.0
        && cross(c - b, cc - b) >= 0.0
        && cross(a - c, cc - c) >= 0.0;
    if inside {
        (cc - a).norm()
    } else {
        half_longest
    }
}

/// Area, genus, and a certified diameter interval.
///
/// Upper bound: every point is within the covering radius of a vertex of its
/// Delaunay triangle, and vertex pairs are joined inside the 1-skeleton.
/// Lower bound: exact distances between sampled interior points, samples to
/// the vertex set, and `ℓ_min / 2`.
pub fn surface_metrics(s: &HalfTranslationSurface) -> SurfaceMetrics {
    let del = delaunay_triangulation(s)
        .map(|t| t.surface)
        .unwrap_or_else(|_| s.clone());
    let n = del.num_triangles();
    let lm = l_min(&del);
    let mut r_cover: f64 = 0.0;
    for t in 0..n {
        let a = del.corner_pos(t, 0);
        let b = del.corner_pos(t, 1);
        let c = del.corner_pos(t, 2);
        r_cover = r_cover.max(triangle_cover_radius(a, b, c));
    }
    // 1-skeleton graph distances (upper bounds for vertex distances).
    let nv = del.vertices().len();
    let mut dg = vec![f64::INFINITY; nv * nv];
    for i in 0..nv {
        dg[i * nv + i] = 0.0;
    }
    for g in del.gluings() {
        let w = del.triangle(g.a.tri)[g.a.edge].norm();
        let u = del.vertex_of_corner(g.a.tri, g.a.edge);
        let v = del.vertex_of_corner(g.a.tri, (g.a.edge + 1) % 3);
        if w < dg[u * nv + v] {
            dg[u * nv + v] = w;
            dg[v * nv + u] = w;
        }
    }
    for k in 0..nv {
        for i in 0..nv {
            for j in 0..nv {
                let via = dg[i * nv + k] + dg[k * nv + j];
                if via < dg[i * nv + j] {
                    dg[i * nv + j] = via;
                }
            }
        }
    }
    let max_graph_vdist = dg.iter().copied().filter(|x| x.is_finite()).fold(0.0, f64::max);
    let upper = max_graph_vdist + 2.0 * r_cover;

    // Interior samples: centroids plus pulled-in edge midpoints.
    let mut samples = Vec::new();
    for t in 0..n {
        let a = del.corner_pos(t, 0);
        let b = del.corner_pos(t, 1);
        let c = del.corner_pos(t, 2);
        let centroid = (a + b + c) / 3.0;
        samples.push(SurfacePoint {
            tri: t,
            pos: centroid,
        });
        for (p, q) in [(a, b), (b, c), (c, a)] {
            let m = (p + q) / 2.0;
            samples.push(SurfacePoint {
                tri: t,
                pos: m + 1e-6 * (centroid - m),
            });
        }
    }
    let graph = vertex_graph(&del, upper + EPS_GEOM);
    let mut lower: f64 = lm / 2.0;
    for p in &samples {
        lower = lower.max(dist_to_vertices(&del, *p, upper));
    }
    let stride = 1 + samples.len() / 24;
    let picked: Vec<&SurfacePoint> = samples.iter().step_by(stride).collect();
    for (i, x) in picked.iter().enumerate() {
        for y in picked.iter().skip(i + 1) {
            lower = lower.max(dist_points(&del, **x, **y, upper, &graph));
        }
    }
    let lower = lower.min(upper);
    SurfaceMetrics {
        area: s.area(),
        genus: s.genus(),
        diameter_lower: lower,
        diameter_upper: upper,
        diameter: upper,
    }
}
