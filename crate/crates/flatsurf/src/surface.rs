//! Half-translation surfaces as glued Euclidean triangles.
//!
//! A surface is a list of triangles, each living in its own planar chart, plus
//! a perfect matching of triangle sides. A gluing with `flip = false`
//! identifies charts by a translation (glued edge vectors are negatives of
//! each other); `flip = true` identifies them by `z ↦ -z + c` (glued edge
//! vectors are equal). Both maps preserve orientation, so the glued surface is
//! oriented and carries a singular flat metric with cone angles in `π·Z`.

use crate::geom::{ccw_angle, corner_angle, cross, HalfAffine, Vec2, EPS_ANG, EPS_GEOM};
use thiserror::Error;

/// A triangle side: triangle index plus edge index in `{0,1,2}`.
///
/// Edge `i` runs from corner `i` to corner `(i+1) % 3`; corner `0` sits at the
/// chart origin, corner `1` at `e0`, corner `2` at `e0 + e1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeRef {
    pub tri: usize,
    pub edge: usize,
}

impl EdgeRef {
    #[inline]
    pub fn new(tri: usize, edge: usize) -> Self {
        EdgeRef { tri, edge }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Gluing {
    pub a: EdgeRef,
    pub b: EdgeRef,
    pub flip: bool,
}

/// A cone point (or marked point) of the flat metric.
#[derive(Clone, Debug)]
pub struct Singularity {
    pub vertex: usize,
    /// Cone angle in radians; a multiple of π.
    pub angle: f64,
    /// Order `k = angle/π - 2`; `k = 0` marks a removable (marked) point.
    pub order: i64,
}

/// A point on the surface, in the chart of one triangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfacePoint {
    pub tri: usize,
    pub pos: Vec2,
}

#[derive(Debug, Error)]
pub enum SurfaceError {
    #[error("triangle {tri} is degenerate (signed area {area})")]
    DegenerateTriangle { tri: usize, area: f64 },
    #[error("edge ({:?}) cannot be glued to ({:?}): vector mismatch {mismatch}", .a, .b)]
    UnglueableEdge { a: EdgeRef, b: EdgeRef, mismatch: f64 },
    #[error("vertex {vertex} has cone angle {angle} which is not a multiple of π ≥ π")]
    BadConeAngle { vertex: usize, angle: f64 },
    #[error("bad combinatorics: {0}")]
    BadCombinatorics(String),
}

#[derive(Clone, Debug)]
pub struct VertexData {
    /// Corners `(tri, corner_index)` in counterclockwise order around the vertex.
    pub corners: Vec<(usize, usize)>,
    /// Cumulative angle at which each corner's sector starts; `starts[0] = 0`.
    pub starts: Vec<f64>,
    pub cone_angle: f64,
    pub order: i64,
}

#[derive(Clone, Debug)]
pub struct HalfTranslationSurface {
    tris: Vec<[Vec2; 3]>,
    gluings: Vec<Gluing>,
    partner: Vec<[(EdgeRef, usize); 3]>,
    corner_vertex: Vec<[usize; 3]>,
    vertices: Vec<VertexData>,
    genus: usize,
}

/// A ray emanating from a vertex: the corner sector it lives in plus its
/// direction in that corner's triangle chart.
#[derive(Clone, Copy, Debug)]
pub struct VertexRay {
    pub corner: (usize, usize),
    pub dir: Vec2,
}

impl HalfTranslationSurface {
    /// Validate triangle and gluing data and compute vertex orbits.
    pub fn build(tris: Vec<[Vec2; 3]>, gluings: Vec<Gluing>) -> Result<Self, SurfaceError> {
        let nt = tris.len();
        if nt == 0 {
            return Err(SurfaceError::BadCombinatorics("no triangles".into()));
        }
        for (i, t) in tris.iter().enumerate() {
            let closure = (t[0] + t[1] + t[2]).norm();
            if closure > EPS_GEOM {
                return Err(SurfaceError::BadCombinatorics(format!(
                    "triangle {i} edge vectors sum to {closure}, expected 0"
                )));
            }
            let area = 0.5 * cross(t[0], t[1]);
            if area <= EPS_GEOM * EPS_GEOM {
                return Err(SurfaceError::DegenerateTriangle { tri: i, area });
            }
        }
        if gluings.len() * 2 != nt * 3 {
            return Err(SurfaceError::BadCombinatorics(format!(
                "{} gluings cannot match {} triangle sides",
                gluings.len(),
                nt * 3
            )));
        }
        let mut partner = vec![[(EdgeRef::new(usize::MAX, 0), usize::MAX); 3]; nt];
        for (gid, g) in gluings.iter().enumerate() {
            for side in [g.a, g.b] {
                if side.tri >= nt || side.edge >= 3 {
                    return Err(SurfaceError::BadCombinatorics(format!(
                        "gluing {gid} references invalid side {side:?}"
                    )));
                }
            }
            if g.a == g.b {
                return Err(SurfaceError::BadCombinatorics(format!(
                    "gluing {gid} glues edge {:?} to itself",
                    g.a
                )));
            }
            let va = tris[g.a.tri][g.a.edge];
            let vb = tris[g.b.tri][g.b.edge];
            let mismatch = if g.flip {
                (va - vb).norm()
            } else {
                (va + vb).norm()
            };
            if mismatch > EPS_GEOM {
                return Err(SurfaceError::UnglueableEdge {
                    a: g.a,
                    b: g.b,
                    mismatch,
                });
            }
            for (side, other) in [(g.a, g.b), (g.b, g.a)] {
                let slot = &mut partner[side.tri][side.edge];
                if slot.1 != usize::MAX {
                    return Err(SurfaceError::BadCombinatorics(format!(
                        "edge {side:?} glued more than once"
                    )));
                }
                *slot = (other, gid);
            }
        }
        for (t, row) in partner.iter().enumerate() {
            for (e, slot) in row.iter().enumerate() {
                if slot.1 == usize::MAX {
                    return Err(SurfaceError::BadCombinatorics(format!(
                        "edge ({t},{e}) is unglued"
                    )));
                }
            }
        }

        let mut s = HalfTranslationSurface {
            tris,
            gluings,
            partner,
            corner_vertex: vec![[usize::MAX; 3]; nt],
            vertices: Vec::new(),
            genus: 0,
        };
        s.compute_vertices()?;
        Ok(s)
    }

    fn compute_vertices(&mut self) -> Result<(), SurfaceError> {
        let nt = self.tris.len();
        let mut seen = vec![[false; 3]; nt];
        let mut vertices = Vec::new();
        for t0 in 0..nt {
            for c0 in 0..3 {
                if seen[t0][c0] {
                    continue;
                }
                // Walk the corner fan counterclockwise until it closes.
                let mut corners = Vec::new();
                let mut starts = Vec::new();
                let mut angle = 0.0;
                let (mut t, mut c) = (t0, c0);
                loop {
                    if seen[t][c] {
                        return Err(SurfaceError::BadCombinatorics(format!(
                            "corner fan through ({t0},{c0}) does not close properly"
                        )));
                    }
                    seen[t][c] = true;
                    self.corner_vertex[t][c] = vertices.len();
                    corners.push((t, c));
                    starts.push(angle);
                    angle += self.corner_angle(t, c);
                    // Cross the incoming edge (t, c-1) to the next corner ccw.
                    let (p, _gid) = self.partner[t][(c + 2) % 3];
                    (t, c) = (p.tri, p.edge);
                    if (t, c) == (t0, c0) {
                        break;
                    }
                }
                let ratio = angle / std::f64::consts::PI;
                let order_f = ratio - 2.0;
                let order = order_f.round() as i64;
                if (ratio - ratio.round()).abs() > EPS_ANG * (corners.len() as f64).max(1.0)
                    || angle < std::f64::consts::PI - EPS_ANG
                {
                    return Err(SurfaceError::BadConeAngle {
                        vertex: vertices.len(),
                        angle,
                    });
                }
                vertices.push(VertexData {
                    corners,
                    starts,
                    cone_angle: angle,
                    order,
                });
            }
        }
        // Euler characteristic: V - E + F = 2 - 2g.
        let v = vertices.len() as i64;
        let e = self.gluings.len() as i64;
        let f = self.tris.len() as i64;
        let chi = v - e + f;
        if chi > 2 || (2 - chi) % 2 != 0 {
            return Err(SurfaceError::BadCombinatorics(format!(
                "Euler characteristic {chi} is not of the form 2-2g"
            )));
        }
        self.genus = ((2 - chi) / 2) as usize;
        // Gauss-Bonnet sanity: Σ (θ/π - 2) = 4g - 4.
        let gb: f64 = vertices
            .iter()
            .map(|v| v.cone_angle / std::f64::consts::PI - 2.0)
            .sum();
        let expected = 4.0 * self.genus as f64 - 4.0;
        if (gb - expected).abs() > 1e-6 {
            return Err(SurfaceError::BadCombinatorics(format!(
                "Gauss-Bonnet mismatch: angle defect {gb}, expected {expected}"
            )));
        }
        self.vertices = vertices;
        Ok(())
    }

    #[inline]
    pub fn num_triangles(&self) -> usize {
        self.tris.len()
    }

    #[inline]
    pub fn triangle(&self, t: usize) -> &[Vec2; 3] {
        &self.tris[t]
    }

    #[inline]
    pub fn gluings(&self) -> &[Gluing] {
        &self.gluings
    }

    #[inline]
    pub fn genus(&self) -> usize {
        self.genus
    }

    #[inline]
    pub fn vertices(&self) -> &[VertexData] {
        &self.vertices
    }

    #[inline]
    pub fn vertex_of_corner(&self, t: usize, c: usize) -> usize {
        self.corner_vertex[t][c]
    }

    /// Partner side and gluing id of edge `(t, e)`.
    #[inline]
    pub fn partner(&self, t: usize, e: usize) -> (EdgeRef, usize) {
        self.partner[t][e]
    }

    #[inline]
    pub fn gluing_of_edge(&self, t: usize, e: usize) -> usize {
        self.partner[t][e].1
    }

    /// Chart position of corner `c` of triangle `t`.
    #[inline]
    pub fn corner_pos(&self, t: usize, c: usize) -> Vec2 {
        match c {
            0 => Vec2::new(0.0, 0.0),
            1 => self.tris[t][0],
            _ => self.tris[t][0] + self.tris[t][1],
        }
    }

    /// Interior angle of corner `(t, c)`.
    #[inline]
    pub fn corner_angle(&self, t: usize, c: usize) -> f64 {
        let incoming = self.tris[t][(c + 2) % 3];
        let outgoing = self.tris[t][c];
        corner_angle(incoming, outgoing)
    }

    /// Transition map from the chart of the triangle on the far side of edge
    /// `(t, e)` into the chart of `t`.
    pub fn transition_into(&self, t: usize, e: usize) -> HalfAffine {
        let (p, gid) = self.partner[t][e];
        let flip = self.gluings[gid].flip;
        let a_end = self.corner_pos(t, (e + 1) % 3);
        let b_start = self.corner_pos(p.tri, p.edge);
        if flip {
            // z ↦ -z + (end(a) + start(b)) maps start(b) ↦ end(a).
            HalfAffine::new(-1.0, a_end + b_start)
        } else {
            HalfAffine::new(1.0, a_end - b_start)
        }
    }

    /// Total area.
    pub fn area(&self) -> f64 {
        self.tris.iter().map(|t| 0.5 * cross(t[0], t[1])).sum()
    }

    /// Scale every chart by `λ > 0` (lengths scale by λ, areas by λ²).
    pub fn scaled(&self, lambda: f64) -> HalfTranslationSurface {
        let tris = self
            .tris
            .iter()
            .map(|t| [t[0] * lambda, t[1] * lambda, t[2] * lambda])
            .collect();
        HalfTranslationSurface::build(tris, self.gluings.clone())
            .expect("scaling preserves validity")
    }

    /// Rescale to unit area.
    pub fn normalize_area(&self) -> HalfTranslationSurface {
        self.scaled(1.0 / self.area().sqrt())
    }

    /// Multiset of zero orders (marked points excluded), sorted.
    pub fn stratum_signature(&self) -> Vec<i64> {
        let mut orders: Vec<i64> = self
            .vertices
            .iter()
            .map(|v| v.order)
            .filter(|&k| k != 0)
            .collect();
        orders.sort_unstable();
        orders
    }

    pub fn singularities(&self) -> Vec<Singularity> {
        self.vertices
            .iter()
            .enumerate()
            .map(|(i, v)| Singularity {
                vertex: i,
                angle: v.cone_angle,
                order: v.order,
            })
            .collect()
    }

    /// Whether any gluing carries a flip (i.e. the differential is not the
    /// square of an Abelian differential in the given atlas).
    pub fn has_flips(&self) -> bool {
        self.gluings.iter().any(|g| g.flip)
    }

    /// Whether two chart points represent the same surface point, allowing
    /// one gluing transition for points on edges.
    pub fn same_surface_point(&self, a: SurfacePoint, b: SurfacePoint, tol: f64) -> bool {
        if a.tri == b.tri && (a.pos - b.pos).norm() <= tol {
            return true;
        }
        for e in 0..3 {
            let pa = self.corner_pos(a.tri, e);
            let pb = self.corner_pos(a.tri, (e + 1) % 3);
            if crate::geom::dist_point_segment(a.pos, pa, pb) <= tol {
                let (p, _) = self.partner(a.tri, e);
                if p.tri == b.tri {
                    let map = self.transition_into(p.tri, p.edge);
                    if (map.apply(a.pos) - b.pos).norm() <= tol {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// Point-in-triangle test in chart coordinates, with tolerance.
    pub fn contains_point(&self, t: usize, p: Vec2) -> bool {
        let a = self.corner_pos(t, 0);
        let b = self.corner_pos(t, 1);
        let c = self.corner_pos(t, 2);
        let scale = self.tris[t][0].norm().max(self.tris[t][1].norm());
        let tol = EPS_GEOM * scale.max(1.0);
        cross(b - a, p - a) >= -tol && cross(c - b, p - b) >= -tol && cross(a - c, p - c) >= -tol
    }

    /// Angular coordinate of a vertex ray within the corner fan, in
    /// `[0, cone_angle)`. The zero ray is the outgoing edge of the fan's first
    /// corner.
    pub fn ray_angle(&self, ray: &VertexRay) -> f64 {
        let (t, c) = ray.corner;
        let vid = self.corner_vertex[t][c];
        let v = &self.vertices[vid];
        let idx = v
            .corners
            .iter()
            .position(|&cc| cc == (t, c))
            .expect("corner belongs to its vertex");
        let out = self.tris[t][c];
        let mut local = ccw_angle(out, ray.dir);
        if local > std::f64::consts::TAU - EPS_ANG {
            local = 0.0;
        }
        if local >= self.corner_angle(t, c) + EPS_ANG {
            // Direction outside the sector; clamp for robustness.
            local = self.corner_angle(t, c);
        }
        (v.starts[idx] + local) % v.cone_angle
    }

    /// All rays at vertex `vid` whose chart direction equals `dir` up to the
    /// half-translation sign ambiguity (i.e. chart direction `±dir`). Returns
    /// them in fan order. These are the prongs of the directional foliation.
    pub fn prongs(&self, vid: usize, dir: Vec2) -> Vec<VertexRay> {
        let v = &self.vertices[vid];
        let mut out = Vec::new();
        for &(t, c) in &v.corners {
            let sector = self.corner_angle(t, c);
            for d in [dir, -dir] {
                let mut a = ccw_angle(self.tris[t][c], d);
                if a > std::f64::consts::TAU - EPS_ANG {
                    a = 0.0;
                }
                // Half-open sector [0, sector) so shared edge directions are
                // counted once, in the corner whose outgoing edge carries them.
                if a < sector - EPS_ANG {
                    out.push(VertexRay {
                        corner: (t, c),
                        dir: d,
                    });
                }
            }
        }
        out
    }

    /// The ray at signed angle `angle` (counterclockwise) from `ray` around
    /// its vertex, resolved to the corner sector containing it.
    pub fn rotate_ray(&self, ray: &VertexRay, angle: f64) -> VertexRay {
        let (t, c) = ray.corner;
        let vid = self.corner_vertex[t][c];
        let v = &self.vertices[vid];
        let mut target = (self.ray_angle(ray) + angle) % v.cone_angle;
        if target < 0.0 {
            target += v.cone_angle;
        }
        let mut idx = v.corners.len() - 1;
        for i in 0..v.corners.len() {
            let hi = if i + 1 < v.corners.len() {
                v.starts[i + 1]
            } else {
                v.cone_angle
            };
            if target >= v.starts[i] - EPS_ANG && target < hi + EPS_ANG {
                idx = i;
                if target < hi - EPS_ANG {
                    break;
                }
            }
        }
        let (tt, cc) = v.corners[idx];
        let local = (target - v.starts[idx]).max(0.0);
        let base = self.tris[tt][cc].normalize();
        let (sn, cs) = local.sin_cos();
        VertexRay {
            corner: (tt, cc),
            dir: Vec2::new(base.x * cs - base.y * sn, base.x * sn + base.y * cs),
        }
    }

    /// Counterclockwise angle from ray `a` to ray `b` around their common
    /// vertex, in `[0, cone_angle)`.
    pub fn angle_between_rays(&self, a: &VertexRay, b: &VertexRay) -> f64 {
        let va = self.corner_vertex[a.corner.0][a.corner.1];
        let vb = self.corner_vertex[b.corner.0][b.corner.1];
        assert_eq!(va, vb, "rays must share a vertex");
        let cone = self.vertices[va].cone_angle;
        let d = self.ray_angle(b) - self.ray_angle(a);
        let mut d = d % cone;
        if d < 0.0 {
            d += cone;
        }
        d
    }

    /// Walk the corner fan counterclockwise from ray `a` to ray `b`,
    /// collecting the edges (as `EdgeRef`s on the side being left) crossed
    /// strictly between the two rays. A path just counterclockwise of `a`
    /// crosses exactly these edges before reaching a point just clockwise of
    /// `b`; edges the rays lie on are excluded.
    pub fn fan_edges_ccw(&self, a: &VertexRay, b: &VertexRay) -> Vec<EdgeRef> {
        let vid = self.corner_vertex[a.corner.0][a.corner.1];
        let v = &self.vertices[vid];
        let total = self.angle_between_rays(a, b);
        let mut crossed = Vec::new();
        let mut walked = {
            let (t, c) = a.corner;
            let mut local = ccw_angle(self.tris[t][c], a.dir);
            if local > std::f64::consts::TAU - EPS_ANG {
                local = 0.0;
            }
            self.corner_angle(t, c) - local.min(self.corner_angle(t, c))
        };
        let mut idx = v
            .corners
            .iter()
            .position(|&cc| cc == a.corner)
            .expect("corner in fan");
        // Cross corner boundaries until we reach b's sector.
        while walked < total - EPS_ANG {
            let (t, c) = v.corners[idx];
            if walked > EPS_ANG {
                // Leaving corner (t,c) ccw crosses the incoming edge (t, c-1);
                // a boundary sitting exactly on ray `a` is already behind the
                // path and is skipped.
                crossed.push(EdgeRef::new(t, (c + 2) % 3));
            }
            idx = (idx + 1) % v.corners.len();
            let (nt, nc) = v.corners[idx];
            walked += self.corner_angle(nt, nc);
        }
        crossed
    }

    /// Compare surfaces for identical labeled data, up to the global `±Id`
    /// ambiguity of half-translation structures.
    pub fn same_up_to_global_sign(&self, other: &HalfTranslationSurface) -> bool {
        if self.tris.len() != other.tris.len() || self.gluings != other.gluings {
            return false;
        }
        let close = |sign: f64| {
            self.tris.iter().zip(&other.tris).all(|(a, b)| {
                (0..3).all(|i| {
                    let scale = a[i].norm().max(1.0);
                    (a[i] - sign * b[i]).norm() <= 1e-7 * scale
                })
            })
        };
        close(1.0) || close(-1.0)
    }

    /// Relabel triangles by permutation `perm` (new index of old triangle `t`
    /// is `perm[t]`) and rotate each triangle's edge indices by `rot[t]`.
    /// Gauge move used in tests; the surface is unchanged geometrically.
    pub fn relabeled(&self, perm: &[usize], rot: &[usize]) -> HalfTranslationSurface {
        let nt = self.tris.len();
        assert_eq!(perm.len(), nt);
        assert_eq!(rot.len(), nt);
        let mut tris = vec![[Vec2::zeros(); 3]; nt];
        for t in 0..nt {
            for e in 0..3 {
                tris[perm[t]][(e + 3 - rot[t]) % 3] = self.tris[t][e];
            }
        }
        let map = |r: EdgeRef| EdgeRef::new(perm[r.tri], (r.edge + 3 - rot[r.tri]) % 3);
        let gluings = self
            .gluings
            .iter()
            .map(|g| Gluing {
                a: map(g.a),
                b: map(g.b),
                flip: g.flip,
            })
            .collect();
        HalfTranslationSurface::build(tris, gluings).expect("relabeling preserves validity")
    }
}

/// Covering data for the orientation double cover.
#[derive(Clone, Debug)]
pub struct DoubleCover {
    pub surface: HalfTranslationSurface,
    /// Cover triangle `(t, sheet)` has index `sheet * n + t`.
    pub base_triangles: usize,
    /// True when the base had no flips and the cover is two disjoint copies.
    pub trivial: bool,
    /// Base vertices over which the cover is branched (odd cone order).
    pub branch_vertices: Vec<usize>,
}

impl DoubleCover {
    /// Deck involution on cover triangle indices.
    pub fn deck(&self, cover_tri: usize) -> usize {
        (cover_tri + self.base_triangles) % (2 * self.base_triangles)
    }

    /// Projection to the base triangle.
    pub fn project(&self, cover_tri: usize) -> usize {
        cover_tri % self.base_triangles
    }
}

/// The canonical orientation double cover: a translation surface (no flip
/// gluings) double-covering the input, branched over odd-order zeroes.
pub fn orientation_double_cover(s: &HalfTranslationSurface) -> DoubleCover {
    let n = s.num_triangles();
    // Sheet 0 keeps triangle charts; sheet 1 negates them.
    let mut tris = Vec::with_capacity(2 * n);
    for t in 0..n {
        tris.push(*s.triangle(t));
    }
    for t in 0..n {
        let e = s.triangle(t);
        tris.push([-e[0], -e[1], -e[2]]);
    }
    let mut gluings = Vec::with_capacity(2 * s.gluings().len());
    for g in s.gluings() {
        if g.flip {
            // Flip gluings exchange sheets; vectors v and -(-v)... on opposite
            // sheets the glued vectors become negatives, so the lifted gluing
            // is translation type.
            gluings.push(Gluing {
                a: g.a,
                b: EdgeRef::new(g.b.tri + n, g.b.edge),
                flip: false,
            });
            gluings.push(Gluing {
                a: EdgeRef::new(g.a.tri + n, g.a.edge),
                b: g.b,
                flip: false,
            });
        } else {
            gluings.push(*g);
            gluings.push(Gluing {
                a: EdgeRef::new(g.a.tri + n, g.a.edge),
                b: EdgeRef::new(g.b.tri + n, g.b.edge),
                flip: false,
            });
        }
    }
    let surface = HalfTranslationSurface::build(tris, gluings)
        .expect("double cover of a valid surface is valid");
    let branch_vertices = s
        .vertices()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.order % 2 != 0)
        .map(|(i, _)| i)
        .collect();
    DoubleCover {
        surface,
        base_triangles: n,
        trivial: !s.has_flips(),
        branch_vertices,
    }
}
