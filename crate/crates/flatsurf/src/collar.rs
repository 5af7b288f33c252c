//! Immersed collars of non-horizontal flat geodesics, the bump functions they
//! support, their integrals, and numerically evaluated weighted Sobolev
//! norms.
//!
//! The collar of β is `ι(t, s) = h_{s + Δ(t)}(β(t))`: horizontal flow from
//! the geodesic, recentered by a piecewise-linear shear Δ that dodges the
//! finitely many times where a cone point sits within `ℓ_min/8` horizontally.
//! Bump functions are profiles in `s`, tapered longitudinally near the
//! endpoint zeroes (lower variant) or extended over side panels along the
//! adjacent vertical separatrices (upper variant; simple zeroes only).

use crate::geodesic::{FlatGeodesic, PiecewiseCurve};
use crate::geom::{cross, Vec2, EPS_GEOM};
use crate::linear::{trace_from_corner, trace_ray};
use crate::surface::{HalfTranslationSurface, SurfacePoint, VertexRay};
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CollarError {
    #[error("geodesic has a horizontal piece")]
    HorizontalGeodesic,
    #[error("endpoint zero has cone angle other than 3π; side panels unavailable")]
    HigherOrderZero,
    #[error("delta parameter out of range (need 0 < δ < ℓ_min†/8)")]
    DeltaOutOfRange,
    #[error("quadrature budget exceeded")]
    QuadratureBudget,
    #[error("collar is obstructed on both sides (upstream ℓ_min error?)")]
    Obstructed,
    #[error("collar trace failed: {0}")]
    TraceFailed(String),
}

// ---------------------------------------------------------------------------
// Smooth profiles.
// ---------------------------------------------------------------------------

fn phi_raw(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - x * x)).exp()
    }
}

const PROFILE_N: usize = 8192;

struct ProfileTables {
    norm: f64,
    /// Cumulative integral of the normalized profile at x = -1 + 2k/N.
    cdf: Vec<f64>,
}

fn tables() -> &'static ProfileTables {
    static T: OnceLock<ProfileTables> = OnceLock::new();
    T.get_or_init(|| {
        let n = PROFILE_N;
        let h = 2.0 / n as f64;
        // Composite Simpson for the raw mass.
        let mut mass = 0.0;
        for k in 0..n {
            let a = -1.0 + k as f64 * h;
            mass += h / 6.0 * (phi_raw(a) + 4.0 * phi_raw(a + h / 2.0) + phi_raw(a + h));
        }
        let mut cdf = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        cdf.push(0.0);
        for k in 0..n {
            let a = -1.0 + k as f64 * h;
            acc += h / 6.0 * (phi_raw(a) + 4.0 * phi_raw(a + h / 2.0) + phi_raw(a + h));
            cdf.push(acc / mass);
        }
        ProfileTables {
            norm: 1.0 / mass,
            cdf,
        }
    })
}

/// The fixed smooth symmetric profile `ϕ` with unit mass on (-1, 1).
pub fn profile(x: f64) -> f64 {
    tables().norm * phi_raw(x)
}

pub fn profile_deriv(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        let d = 1.0 - x * x;
        tables().norm * (-1.0 / d).exp() * (-2.0 * x / (d * d))
    }
}

/// `Φ(x) = ∫_{-1}^x ϕ`.
pub fn profile_cdf(x: f64) -> f64 {
    if x <= -1.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let t = (x + 1.0) / 2.0 * PROFILE_N as f64;
    let k = (t as usize).min(PROFILE_N - 1);
    let fr = t - k as f64;
    let cdf = &tables().cdf;
    cdf[k] * (1.0 - fr) + cdf[k + 1] * fr
}

/// Longitudinal taper `ψ`: smooth, `ψ(0) = 1`, `ψ(1) = 0` (the smoothstep
/// built from ϕ's integral).
pub fn taper(u: f64) -> f64 {
    1.0 - profile_cdf(2.0 * u - 1.0)
}

pub fn taper_deriv(u: f64) -> f64 {
    -2.0 * profile(2.0 * u - 1.0)
}

// ---------------------------------------------------------------------------
// Collar construction.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
struct CollarPiece {
    tri: usize,
    a: Vec2,
    b: Vec2,
    /// Unit direction in this chart.
    dir: Vec2,
    /// Sign relating this chart's +x to the run's reference horizontal frame.
    or_x: f64,
    cum: f64,
}

#[derive(Clone, Debug)]
pub struct CollarRun {
    pieces: Vec<CollarPiece>,
    pub total: f64,
    /// |vertical fraction| of the run (Jacobian of ι on this run).
    pub v_fraction: f64,
    /// Shear anchors `(t, Δ)`, linearly interpolated.
    pub delta_anchors: Vec<(f64, f64)>,
    pub cyclic: bool,
}

impl CollarRun {
    pub fn delta(&self, t: f64) -> f64 {
        interp(&self.delta_anchors, t, self.total, self.cyclic)
    }

    pub fn delta_slope(&self, t: f64) -> f64 {
        interp_slope(&self.delta_anchors, t, self.total, self.cyclic)
    }

    fn at(&self, t: f64) -> Option<(&CollarPiece, Vec2)> {
        let t = if self.cyclic {
            t.rem_euclid(self.total)
        } else {
            t.clamp(0.0, self.total)
        };
        for p in &self.pieces {
            let len = (p.b - p.a).norm();
            if t <= p.cum + len + 1e-12 {
                let local = (t - p.cum).clamp(0.0, len);
                return Some((p, p.a + local * p.dir));
            }
        }
        None
    }
}

fn interp(anchors: &[(f64, f64)], t: f64, total: f64, cyclic: bool) -> f64 {
    if anchors.is_empty() {
        return 0.0;
    }
    if anchors.len() == 1 {
        if cyclic {
            return anchors[0].1;
        }
    }
    // Build the effective node list with boundary conditions.
    let (ts, vs) = node_list(anchors, total, cyclic);
    let t = if cyclic { t.rem_euclid(total) } else { t.clamp(0.0, total) };
    let mut i = 0;
    while i + 1 < ts.len() && ts[i + 1] < t {
        i += 1;
    }
    if i + 1 >= ts.len() {
        return vs[ts.len() - 1];
    }
    let (t0, t1) = (ts[i], ts[i + 1]);
    let (v0, v1) = (vs[i], vs[i + 1]);
    if t1 - t0 <= 1e-15 {
        return v0;
    }
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}

fn interp_slope(anchors: &[(f64, f64)], t: f64, total: f64, cyclic: bool) -> f64 {
    if anchors.is_empty() {
        return 0.0;
    }
    let (ts, vs) = node_list(anchors, total, cyclic);
    let t = if cyclic { t.rem_euclid(total) } else { t.clamp(0.0, total) };
    let mut i = 0;
    while i + 1 < ts.len() && ts[i + 1] < t {
        i += 1;
    }
    if i + 1 >= ts.len() {
        return 0.0;
    }
    let dt = ts[i + 1] - ts[i];
    if dt <= 1e-15 {
        return 0.0;
    }
    (vs[i + 1] - vs[i]) / dt
}

fn node_list(anchors: &[(f64, f64)], total: f64, cyclic: bool) -> (Vec<f64>, Vec<f64>) {
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    if anchors.is_empty() {
        return (vec![0.0, total], vec![0.0, 0.0]);
    }
    if cyclic {
        // Wrap the last anchor before 0 and the first after `total`.
        let first = anchors[0];
        let last = anchors[anchors.len() - 1];
        ts.push(last.0 - total);
        vs.push(last.1);
        for (t, v) in anchors {
            ts.push(*t);
            vs.push(*v);
        }
        ts.push(first.0 + total);
        vs.push(first.1);
    } else {
        // Endpoints are pinned to 0 (saddle connection case).
        ts.push(0.0);
        vs.push(0.0);
        for (t, v) in anchors {
            ts.push(*t);
            vs.push(*v);
        }
        ts.push(total);
        vs.push(0.0);
    }
    (ts, vs)
}

/// One side panel: a vertical separatrix segment at an endpoint zero with
/// horizontal thickening.
#[derive(Clone, Debug)]
pub struct Panel {
    run: CollarRun,
}

#[derive(Clone, Debug)]
pub struct Collar {
    pub runs: Vec<CollarRun>,
    pub l_min: f64,
    pub is_cylinder: bool,
    panels: Result<Vec<Panel>, String>,
    /// Reported bound on |∂_t Δ| over the anchors.
    pub delta_slope_bound: f64,
    /// ⌈C · ℓ_β / ℓ_min⌉-style multiplicity record (sampled).
    pub multiplicity_bound: f64,
}

fn run_from_pieces(
    s: &HalfTranslationSurface,
    seg_pieces: Vec<(usize, Vec2, Vec2)>,
    flips_per_piece: Vec<f64>,
    cyclic: bool,
) -> CollarRun {
    let mut pieces = Vec::new();
    let mut acc = 0.0;
    let mut v_fraction = f64::INFINITY;
    for ((tri, a, b), or_x) in seg_pieces.into_iter().zip(flips_per_piece) {
        let len = (b - a).norm();
        if len <= 1e-13 {
            continue;
        }
        let dir = (b - a) / len;
        v_fraction = v_fraction.min(dir.y.abs());
        pieces.push(CollarPiece {
            tri,
            a,
            b,
            dir,
            or_x,
            cum: acc,
        });
        acc += len;
    }
    let _ = s;
    CollarRun {
        pieces,
        total: acc,
        v_fraction,
        delta_anchors: Vec::new(),
        cyclic,
    }
}

/// Per-piece orientation parities from a traced segment (flip gluings negate
/// the chart frame).
fn orientation_parities(
    s: &HalfTranslationSurface,
    seg: &crate::linear::TracedSegment,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(seg.crossings.len() + 1);
    let mut or_x = 1.0;
    out.push(or_x);
    for c in &seg.crossings {
        if s.gluings()[c.gluing].flip {
            or_x = -or_x;
        }
        out.push(or_x);
    }
    out
}

/// Shear anchors for a run: exceptional times where a vertex sits within
/// `ℓ_min/8` horizontally, with the paper's recentering values.
fn shear_anchors(
    s: &HalfTranslationSurface,
    run: &CollarRun,
    l_min: f64,
) -> Result<Vec<(f64, f64)>, CollarError> {
    let cap = l_min / 8.0 * (1.0 + 1e-9);
    let e = l_min / 8.0;
    // (t, signed reach) events; sign in the run's reference frame.
    let mut events: Vec<(f64, f64)> = Vec::new();
    for vid in 0..s.vertices().len() {
        for ray in s.prongs(vid, Vec2::new(1.0, 0.0)) {
            let Ok(prong) = trace_from_corner(s, ray.corner, ray.dir, cap) else {
                continue;
            };
            let ppieces = prong.subsegments(s);
            let mut pacc = 0.0;
            for (tp, p0, p1) in &ppieces {
                let plen = (p1 - p0).norm();
                for rp in &run.pieces {
                    if *tp != rp.tri {
                        continue;
                    }
                    use crate::geom::SegIntersection::*;
                    match crate::geom::intersect_segments(*p0, *p1, rp.a, rp.b, EPS_GEOM) {
                        Crossing { s: sp, t: tq, .. } | Touch { s: sp, t: tq, .. } => {
                            let tau = pacc + sp.clamp(0.0, 1.0) * plen;
                            if tau <= EPS_GEOM || tau > cap {
                                continue;
                            }
                            let t_arc = rp.cum + tq.clamp(0.0, 1.0) * (rp.b - rp.a).norm();
                            // Vertex sits opposite the prong direction.
                            let d_prong = (p1 - p0).normalize();
                            // Horizontal displacement from β(t) to the vertex
                            // in the reference frame.
                            let sign = (-d_prong.x) * rp.or_x;
                            if sign.abs() < 0.5 {
                                continue; // prong not horizontal here (should not happen)
                            }
                            events.push((t_arc, sign.signum() * tau));
                        }
                        _ => {}
                    }
                }
                pacc += plen;
            }
        }
    }
    let mut anchors: Vec<(f64, f64)> = Vec::new();
    events.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    for (t, reach) in events {
        // Skip events at the run endpoints (the endpoint zeroes themselves).
        if !run.cyclic && (t <= 1e-9 || t >= run.total - 1e-9) {
            continue;
        }
        let delta = if reach < 0.0 {
            // Obstruction below: s_min = reach ≥ -ℓ/8 ⟹ Δ = s_min/2 + ℓ/8.
            if reach < -e {
                continue;
            }
            reach / 2.0 + e
        } else {
            if reach > e {
                continue;
            }
            -e + reach / 2.0
        };
        if let Some(last) = anchors.last_mut() {
            if (last.0 - t).abs() <= 1e-9 {
                // Two obstructions at the same time: both sides blocked.
                if (last.1 - delta).abs() > 1e-9 {
                    return Err(CollarError::Obstructed);
                }
                continue;
            }
        }
        anchors.push((t, delta));
    }
    Ok(anchors)
}

/// Build the immersed collar of a non-horizontal flat geodesic.
pub fn build_collar(
    s: &HalfTranslationSurface,
    g: &FlatGeodesic,
    l_min: f64,
) -> Result<Collar, CollarError> {
    for h in g.piece_holonomies() {
        if h.y.abs() <= EPS_GEOM {
            return Err(CollarError::HorizontalGeodesic);
        }
    }
    let mut runs = Vec::new();
    match g {
        FlatGeodesic::Cylinder(c) => {
            // Reconstruct orientation parities from the word.
            let mut ors = Vec::with_capacity(c.pieces.len());
            let mut or_x = 1.0;
            ors.push(or_x);
            for (t, e) in c.word.iter().take(c.pieces.len().saturating_sub(1)) {
                let (_, gid) = s.partner(*t, *e);
                if s.gluings()[gid].flip {
                    or_x = -or_x;
                }
                ors.push(or_x);
            }
            let mut run = run_from_pieces(s, c.pieces.clone(), ors, true);
            run.delta_anchors = shear_anchors(s, &run, l_min)?;
            runs.push(run);
        }
        FlatGeodesic::Singular(sing) => {
            for conn in &sing.chain {
                let seg = conn.trace(s);
                let ors = orientation_parities(s, &seg);
                let mut run = run_from_pieces(s, seg.subsegments(s), ors, false);
                run.delta_anchors = shear_anchors(s, &run, l_min)?;
                runs.push(run);
            }
        }
    }
    let delta_slope_bound = runs
        .iter()
        .flat_map(|r| {
            let (ts, vs) = node_list(&r.delta_anchors, r.total, r.cyclic);
            (1..ts.len())
                .map(|i| {
                    let dt = ts[i] - ts[i - 1];
                    if dt <= 1e-12 {
                        0.0
                    } else {
                        ((vs[i] - vs[i - 1]) / dt).abs()
                    }
                })
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max);
    // Side panels (saddle case, simple endpoint zeroes only).
    let panels = match g {
        FlatGeodesic::Cylinder(_) => Err("cylinder collars carry the plain bump".to_string()),
        FlatGeodesic::Singular(sing) => build_panels(s, sing, l_min),
    };
    let total_len = g.length();
    Ok(Collar {
        runs,
        l_min,
        is_cylinder: g.is_cylinder(),
        panels,
        delta_slope_bound,
        multiplicity_bound: (4.0 * total_len / l_min).ceil(),
    })
}

fn build_panels(
    s: &HalfTranslationSurface,
    sing: &crate::geodesic::SingularGeodesic,
    l_min: f64,
) -> Result<Vec<Panel>, String> {
    let mut panels = Vec::new();
    let e = l_min / 8.0;
    for conn in &sing.chain {
        for (end, base_ray) in [
            (false, conn.start_ray()),
            (true, conn.end_ray(s)),
        ] {
            let vid = s.vertex_of_corner(base_ray.corner.0, base_ray.corner.1);
            let vert = &s.vertices()[vid];
            if vert.order != 1 {
                return Err(format!(
                    "vertex {vid} has cone angle {:.3}π",
                    vert.cone_angle / std::f64::consts::PI
                ));
            }
            // Three vertical prongs; exclude the nearest to β, keep the two
            // farthest (closest ccw and closest cw of β's ray).
            let prongs = s.prongs(vid, Vec2::new(0.0, 1.0));
            if prongs.len() != 3 {
                return Err(format!("expected 3 vertical prongs, got {}", prongs.len()));
            }
            let cone = vert.cone_angle;
            let mut scored: Vec<(f64, &VertexRay)> = prongs
                .iter()
                .map(|p| {
                    let th = s.angle_between_rays(&base_ray, p);
                    (th.min(cone - th), p)
                })
                .collect();
            scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            // Drop the nearest; keep the two farthest.
            for (_, prong) in scored.iter().skip(1) {
                let Ok(leaf) = trace_from_corner(s, prong.corner, prong.dir, e) else {
                    return Err("panel leaf trace failed".to_string());
                };
                let ors = orientation_parities(s, &leaf);
                let run = run_from_pieces(s, leaf.subsegments(s), ors, false);
                panels.push(Panel { run });
            }
            let _ = end;
        }
    }
    Ok(panels)
}

// ---------------------------------------------------------------------------
// Bump functions.
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BumpVariant {
    /// Cylinder bump φ (no taper).
    Plain,
    /// φ_{0,δ}: tapered down near the endpoint zeroes.
    Lower(f64),
    /// φ_{1,δ}: full profile on the collar, extended over the side panels.
    Upper(f64),
}

#[derive(Clone, Debug)]
pub struct BumpFunction<'a> {
    pub collar: &'a Collar,
    pub variant: BumpVariant,
}

/// Construct a bump function on the collar.
///
/// Cylinder collars yield the single plain φ; saddle/singular collars yield
/// the δ-pair member selected by `side`.
pub fn bump_function(
    collar: &Collar,
    delta: f64,
    side: u8,
) -> Result<BumpFunction<'_>, CollarError> {
    if collar.is_cylinder {
        return Ok(BumpFunction {
            collar,
            variant: BumpVariant::Plain,
        });
    }
    let dagger = collar.l_min.min(1.0);
    if !(delta > 0.0 && delta < dagger / 8.0) {
        return Err(CollarError::DeltaOutOfRange);
    }
    match side {
        0 => Ok(BumpFunction {
            collar,
            variant: BumpVariant::Lower(delta),
        }),
        1 => {
            if collar.panels.is_err() {
                return Err(CollarError::HigherOrderZero);
            }
            Ok(BumpFunction {
                collar,
                variant: BumpVariant::Upper(delta),
            })
        }
        _ => Err(CollarError::DeltaOutOfRange),
    }
}

impl BumpFunction<'_> {
    fn eps(&self) -> f64 {
        self.collar.l_min / 8.0
    }

    fn long_taper(&self, run: &CollarRun, t: f64) -> f64 {
        match self.variant {
            BumpVariant::Plain | BumpVariant::Upper(_) => 1.0,
            BumpVariant::Lower(d) => {
                if run.cyclic {
                    return 1.0;
                }
                if t < d {
                    1.0 - taper(((t / d).clamp(0.0, 1.0)) as f64)
                } else if t > run.total - d {
                    1.0 - taper(((run.total - t) / d).clamp(0.0, 1.0))
                } else {
                    1.0
                }
            }
        }
    }

    fn long_taper_slope(&self, run: &CollarRun, t: f64) -> f64 {
        match self.variant {
            BumpVariant::Plain | BumpVariant::Upper(_) => 0.0,
            BumpVariant::Lower(d) => {
                if run.cyclic {
                    return 0.0;
                }
                if t < d {
                    -taper_deriv((t / d).clamp(0.0, 1.0)) / d
                } else if t > run.total - d {
                    taper_deriv(((run.total - t) / d).clamp(0.0, 1.0)) / d
                } else {
                    0.0
                }
            }
        }
    }

    /// Domain-side value on a collar run: `T(t) · ϕ_ε(s)`.
    pub fn domain_value(&self, run: &CollarRun, t: f64, s: f64) -> f64 {
        let e = self.eps();
        self.long_taper(run, t) * profile(s / e) / e
    }

    fn panel_value(&self, t: f64, s: f64) -> f64 {
        match self.variant {
            BumpVariant::Upper(d) => {
                if t >= d {
                    0.0
                } else {
                    let e = self.eps();
                    taper((t / d).clamp(0.0, 1.0)) * profile(s / e) / e
                }
            }
            _ => 0.0,
        }
    }

    /// Evaluate `(φ, ∂xφ, ∂yφ)` at a surface point by summing over the
    /// ι-preimages found by horizontal tracing (signs of the derivative
    /// components are chart-local; only their magnitudes are meaningful).
    pub fn eval(&self, s: &HalfTranslationSurface, x: SurfacePoint) -> (f64, f64, f64) {
        let e = self.eps();
        let cap = (self.collar.l_min / 4.0) * (1.0 + 1e-6);
        let mut val = 0.0;
        let mut dx = 0.0;
        let mut dy = 0.0;
        for side in [1.0f64, -1.0] {
            let dir0 = Vec2::new(side, 0.0);
            let Ok(tr) = trace_ray(s, x, dir0, cap) else {
                continue;
            };
            let pieces = tr.subsegments(s);
            let mut acc = 0.0;
            let mut or_tr = 1.0; // parity of the trace's chart frame vs x's
            let mut ci = 0usize;
            for (idx, (tt, p0, p1)) in pieces.iter().enumerate() {
                if idx > 0 {
                    // Crossing idx-1 was passed.
                    let gid = tr.crossings[ci].gluing;
                    if s.gluings()[gid].flip {
                        or_tr = -or_tr;
                    }
                    ci += 1;
                }
                let plen = (p1 - p0).norm();
                if plen <= 1e-13 {
                    acc += plen;
                    continue;
                }
                let d_tr = (p1 - p0) / plen;
                // Collar runs.
                for run in &self.collar.runs {
                    for rp in &run.pieces {
                        if rp.tri != *tt {
                            continue;
                        }
                        use crate::geom::SegIntersection::*;
                        match crate::geom::intersect_segments(*p0, *p1, rp.a, rp.b, EPS_GEOM) {
                            Crossing { s: sp, t: tq, .. } | Touch { s: sp, t: tq, .. } => {
                                let tau = acc + sp.clamp(0.0, 1.0) * plen;
                                if tau <= 1e-13 && side < 0.0 {
                                    // The point sits on β itself; count once
                                    // via the positive side.
                                    continue;
                                }
                                let t_arc = rp.cum + tq.clamp(0.0, 1.0) * (rp.b - rp.a).norm();
                                // Displacement from β(t) to x in the run's
                                // reference frame.
                                let dir_sign = d_tr.x * rp.or_x * or_tr;
                                if dir_sign.abs() < 0.5 {
                                    continue;
                                }
                                let d_ref = -tau * dir_sign.signum();
                                let sv = d_ref - run.delta(t_arc);
                                if sv.abs() >= e {
                                    continue;
                                }
                                let tval = self.long_taper(run, t_arc);
                                let pv = profile(sv / e) / e;
                                let pv_d = profile_deriv(sv / e) / (e * e);
                                val += tval * pv;
                                // x-move along x's chart +x: d_ref changes at
                                // rate (x̂ · ref frame) = or_tr-at-x ... the
                                // trace starts at x, so the frame relation is
                                // rp.or_x · or_tr relative to the trace chart,
                                // and the x-chart rate is ±1.
                                let sgn_x = rp.or_x * or_tr;
                                dx += tval * pv_d * sgn_x;
                                // y-move: the leaf shifts; t and s both move.
                                let b = rp.dir;
                                let dt_dy = or_tr / b.y;
                                let dd_dy = -b.x * or_tr / b.y * rp.or_x;
                                let ds_dy = dd_dy - run.delta_slope(t_arc) * dt_dy;
                                dy += self.long_taper_slope(run, t_arc) * dt_dy * pv
                                    + tval * pv_d * ds_dy;
                            }
                            _ => {}
                        }
                    }
                }
                // Panels (upper variant only).
                if let (BumpVariant::Upper(_), Ok(panels)) =
                    (self.variant, self.collar.panels.as_ref())
                {
                    for panel in panels {
                        for rp in &panel.run.pieces {
                            if rp.tri != *tt {
                                continue;
                            }
                            use crate::geom::SegIntersection::*;
                            match crate::geom::intersect_segments(*p0, *p1, rp.a, rp.b, EPS_GEOM)
                            {
                                Crossing { s: sp, t: tq, .. } | Touch { s: sp, t: tq, .. } => {
                                    let tau = acc + sp.clamp(0.0, 1.0) * plen;
                                    if tau <= 1e-13 && side < 0.0 {
                                        continue;
                                    }
                                    let t_arc =
                                        rp.cum + tq.clamp(0.0, 1.0) * (rp.b - rp.a).norm();
                                    let sv = tau; // |displacement|; profile is symmetric
                                    if sv >= e {
                                        continue;
                                    }
                                    let pv = self.panel_value(t_arc, sv);
                                    if pv == 0.0 {
                                        continue;
                                    }
                                    val += pv;
                                    let e8 = e;
                                    let base = match self.variant {
                                        BumpVariant::Upper(d) => {
                                            taper((t_arc / d).clamp(0.0, 1.0))
                                        }
                                        _ => 0.0,
                                    };
                                    let d_param = match self.variant {
                                        BumpVariant::Upper(d) => d,
                                        _ => 1.0,
                                    };
                                    let pvd = profile_deriv(sv / e8) / (e8 * e8);
                                    // Horizontal move changes s at ±1; vertical
                                    // move slides along the (vertical) leaf.
                                    dx += base * pvd;
                                    let tslope = if t_arc < d_param {
                                        taper_deriv((t_arc / d_param).clamp(0.0, 1.0)) / d_param
                                    } else {
                                        0.0
                                    };
                                    dy += tslope * profile(sv / e8) / e8;
                                }
                                _ => {}
                            }
                        }
                    }
                }
                acc += plen;
            }
        }
        (val, dx, dy)
    }
}

// ---------------------------------------------------------------------------
// Integrals.
// ---------------------------------------------------------------------------

/// `∫_X φ dA_q` by 2-D midpoint quadrature over the collar domain (change of
/// variables through ι), Richardson-extrapolated once.
pub fn integrate_over_surface(b: &BumpFunction<'_>) -> f64 {
    let coarse = surface_quad(b, 1.0);
    let fine = surface_quad(b, 0.5);
    (4.0 * fine - coarse) / 3.0
}

fn surface_quad(b: &BumpFunction<'_>, scale: f64) -> f64 {
    let e = b.eps();
    let base_h = (b.collar.l_min / 512.0) * scale;
    let mut total = 0.0;
    for run in &b.collar.runs {
        // t-regions refined near the tapers.
        let mut region_bounds = vec![0.0, run.total];
        if let BumpVariant::Lower(d) | BumpVariant::Upper(d) = b.variant {
            if !run.cyclic {
                region_bounds.push(d.min(run.total));
                region_bounds.push((run.total - d).max(0.0));
            }
        }
        region_bounds.sort_by(|x, y| x.partial_cmp(y).unwrap());
        region_bounds.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
        for w in region_bounds.windows(2) {
            let (t0, t1) = (w[0], w[1]);
            if t1 - t0 <= 1e-14 {
                continue;
            }
            let nt = (((t1 - t0) / base_h).ceil() as usize).clamp(32, 4096);
            let ns = ((2.0 * e / base_h).ceil() as usize).clamp(32, 2048);
            let ht = (t1 - t0) / nt as f64;
            let hs = 2.0 * e / ns as f64;
            let mut acc = 0.0;
            for i in 0..nt {
                let t = t0 + (i as f64 + 0.5) * ht;
                let tv = b.long_taper(run, t);
                if tv == 0.0 {
                    continue;
                }
                let mut srow = 0.0;
                for j in 0..ns {
                    let sv = -e + (j as f64 + 0.5) * hs;
                    srow += profile(sv / e) / e;
                }
                acc += tv * srow;
            }
            total += acc * ht * hs * run.v_fraction;
        }
    }
    // Panels: Jacobian 1.
    if let (BumpVariant::Upper(d), Ok(panels)) = (b.variant, b.collar.panels.as_ref()) {
        let e = b.eps();
        for panel in panels {
            let t1 = d.min(panel.run.total);
            if t1 <= 0.0 {
                continue;
            }
            let nt = ((t1 / base_h).ceil() as usize).clamp(32, 4096);
            let ns = ((2.0 * e / base_h).ceil() as usize).clamp(32, 2048);
            let ht = t1 / nt as f64;
            let hs = 2.0 * e / ns as f64;
            let mut acc = 0.0;
            for i in 0..nt {
                let t = (i as f64 + 0.5) * ht;
                let tv = taper((t / d).clamp(0.0, 1.0));
                let mut srow = 0.0;
                for j in 0..ns {
                    let sv = -e + (j as f64 + 0.5) * hs;
                    srow += profile(sv / e) / e;
                }
                acc += tv * srow;
            }
            total += acc * ht * hs;
        }
    }
    total
}

/// `∫_γ φ dRe(q)` along a horizontal segment (the transverse measure along a
/// horizontal segment is arclength), by 1-D midpoint quadrature with one
/// Richardson step.
pub fn integrate_along_horizontal(
    s: &HalfTranslationSurface,
    b: &BumpFunction<'_>,
    gamma: &crate::linear::TracedSegment,
    budget: usize,
) -> Result<f64, CollarError> {
    integrate_along_horizontal_with_step(s, b, gamma, 1.0, budget)
}

/// Same with a configurable step multiplier (coarser grids for long
/// equidistribution segments).
pub fn integrate_along_horizontal_with_step(
    s: &HalfTranslationSurface,
    b: &BumpFunction<'_>,
    gamma: &crate::linear::TracedSegment,
    step_scale: f64,
    budget: usize,
) -> Result<f64, CollarError> {
    let pieces = gamma.subsegments(s);
    let coarse = segment_quad(s, b, &pieces, step_scale, budget)?;
    let fine = segment_quad(s, b, &pieces, step_scale * 0.5, budget)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

fn segment_quad(
    s: &HalfTranslationSurface,
    b: &BumpFunction<'_>,
    pieces: &[(usize, Vec2, Vec2)],
    scale: f64,
    budget: usize,
) -> Result<f64, CollarError> {
    let h = (b.collar.l_min / 512.0) * scale;
    let total_len: f64 = pieces.iter().map(|(_, p, q)| (q - p).norm()).sum();
    let n_total = (total_len / h).ceil() as usize;
    if n_total > budget {
        return Err(CollarError::QuadratureBudget);
    }
    let mut acc = 0.0;
    for (tri, p, q) in pieces {
        let len = (q - p).norm();
        if len <= 1e-13 {
            continue;
        }
        let n = ((len / h).ceil() as usize).max(4);
        let hh = len / n as f64;
        let d = (q - p) / len;
        for i in 0..n {
            let x = p + (i as f64 + 0.5) * hh * d;
            let (v, _, _) = b.eval(s, SurfacePoint { tri: *tri, pos: x });
            acc += v * hh;
        }
    }
    Ok(acc)
}

/// Weighted Sobolev norm `‖φ‖_{1,q} = ‖φ∘h‖_{1,ω}` evaluated through the
/// double cover: the lift is deck-invariant, so each cover integral is twice
/// the base integral and every `‖·‖_0` term picks up a factor √2.
pub fn sobolev_norm(
    s: &HalfTranslationSurface,
    b: &BumpFunction<'_>,
    budget: usize,
) -> Result<f64, CollarError> {
    let t = sobolev_terms(s, b, budget)?;
    Ok(t.0 + t.1 + t.2)
}

/// The three `‖·‖_0` terms of the weighted Sobolev norm (cover-lifted):
/// `(‖φ‖_0, ‖∂xφ‖_0, ‖∂yφ‖_0)`.
pub fn sobolev_terms(
    s: &HalfTranslationSurface,
    b: &BumpFunction<'_>,
    budget: usize,
) -> Result<(f64, f64, f64), CollarError> {
    let (l0, gx, gy) = sobolev_quad(s, b, 1.0, budget)?;
    let (l0f, gxf, gyf) = sobolev_quad(s, b, 0.5, budget)?;
    let r = |c: f64, f: f64| ((4.0 * f - c) / 3.0).max(0.0);
    let two = 2.0f64.sqrt();
    Ok((
        two * r(l0, l0f).sqrt(),
        two * r(gx, gxf).sqrt(),
        two * r(gy, gyf).sqrt(),
    ))
}

/// `(∫φ², ∫(∂xφ)², ∫(∂yφ)²)` over the surface by unfolding one factor through
/// the collar domain: `∫ F·G dA = Σ_branches ∫∫ F(ι(t,s)) g_branch(t,s) J`.
fn sobolev_quad(
    s: &HalfTranslationSurface,
    b: &BumpFunction<'_>,
    scale: f64,
    budget: usize,
) -> Result<(f64, f64, f64), CollarError> {
    let e = b.eps();
    let base_h = (b.collar.l_min / 512.0) * scale;
    let mut i0 = 0.0;
    let mut ix = 0.0;
    let mut iy = 0.0;
    let mut points = 0usize;
    for run in &b.collar.runs {
        let mut region_bounds = vec![0.0, run.total];
        if let BumpVariant::Lower(d) | BumpVariant::Upper(d) = b.variant {
            if !run.cyclic {
                region_bounds.push(d.min(run.total));
                region_bounds.push((run.total - d).max(0.0));
            }
        }
        region_bounds.sort_by(|x, y| x.partial_cmp(y).unwrap());
        region_bounds.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
        for w in region_bounds.windows(2) {
            let (t0, t1) = (w[0], w[1]);
            if t1 - t0 <= 1e-14 {
                continue;
            }
            // Grid: moderate in t, fine enough in s.
            let nt = (((t1 - t0) / base_h).ceil() as usize).clamp(24, 1024);
            let ns = ((2.0 * e / base_h).ceil() as usize).clamp(24, 512);
            points += nt * ns;
            if points > budget {
                return Err(CollarError::QuadratureBudget);
            }
            let ht = (t1 - t0) / nt as f64;
            let hs = 2.0 * e / ns as f64;
            for i in 0..nt {
                let t = t0 + (i as f64 + 0.5) * ht;
                let tv = b.long_taper(run, t);
                let ts = b.long_taper_slope(run, t);
                let Some((rp, pos)) = run.at(t) else { continue };
                for j in 0..ns {
                    let sv = -e + (j as f64 + 0.5) * hs;
                    let pv = profile(sv / e) / e;
                    if pv == 0.0 && tv == 0.0 {
                        continue;
                    }
                    // ι(t, s): horizontal flow by s + Δ(t) in the reference
                    // frame, i.e. by (s + Δ)·or_x in the local chart.
                    let off = (sv + run.delta(t)) * rp.or_x;
                    let (pt, or_iota) = if off.abs() <= 1e-12 {
                        (
                            Some(SurfacePoint {
                                tri: rp.tri,
                                pos,
                            }),
                            1.0,
                        )
                    } else {
                        let dirh = Vec2::new(off.signum(), 0.0);
                        match trace_ray(
                            s,
                            SurfacePoint {
                                tri: rp.tri,
                                pos,
                            },
                            dirh,
                            off.abs(),
                        ) {
                            Ok(seg) if seg.hit.is_none() => {
                                let or = if seg.flipped { -1.0 } else { 1.0 };
                                (Some(seg.end), or)
                            }
                            _ => (None, 1.0),
                        }
                    };
                    let Some(x) = pt else { continue };
                    let (fv, fx, fy) = b.eval(s, x);
                    // Branch-local contributions at (t, s), signed in the
                    // chart frame of the image point x (frame relation:
                    // x-chart = or_iota · run-piece chart, reference frame =
                    // or_x · run-piece chart).
                    let frame = rp.or_x * or_iota;
                    let g0 = tv * pv;
                    let pvd = profile_deriv(sv / e) / (e * e);
                    let gx_branch = tv * pvd * frame;
                    let bdir = rp.dir;
                    let dt_dy = or_iota / bdir.y;
                    let dd_dy = -bdir.x * or_iota / bdir.y * rp.or_x;
                    let ds_dy = dd_dy - run.delta_slope(t) * dt_dy;
                    let gy_branch = ts * dt_dy * pv + tv * pvd * ds_dy;
                    let jac = run.v_fraction;
                    i0 += fv * g0 * jac * ht * hs;
                    ix += fx * gx_branch * jac * ht * hs;
                    iy += fy * gy_branch * jac * ht * hs;
                }
            }
        }
    }
    // Panel contributions to the norms (upper variant).
    if let (BumpVariant::Upper(d), Ok(panels)) = (b.variant, b.collar.panels.as_ref()) {
        for panel in panels {
            let t1 = d.min(panel.run.total);
            if t1 <= 0.0 {
                continue;
            }
            let nt = ((t1 / base_h).ceil() as usize).clamp(24, 1024);
            let ns = ((2.0 * e / base_h).ceil() as usize).clamp(24, 512);
            points += nt * ns;
            if points > budget {
                return Err(CollarError::QuadratureBudget);
            }
            let ht = t1 / nt as f64;
            let hs = 2.0 * e / ns as f64;
            for i in 0..nt {
                let t = (i as f64 + 0.5) * ht;
                let tv = taper((t / d).clamp(0.0, 1.0));
                let tslope = taper_deriv((t / d).clamp(0.0, 1.0)) / d;
                let Some((rp, pos)) = panel.run.at(t) else { continue };
                for j in 0..ns {
                    let sv = -e + (j as f64 + 0.5) * hs;
                    let pv = profile(sv / e) / e;
                    let off = sv * rp.or_x;
                    let (pt, or_iota) = if off.abs() <= 1e-12 {
                        (
                            Some(SurfacePoint {
                                tri: rp.tri,
                                pos,
                            }),
                            1.0,
                        )
                    } else {
                        let dirh = Vec2::new(off.signum(), 0.0);
                        match trace_ray(
                            s,
                            SurfacePoint {
                                tri: rp.tri,
                                pos,
                            },
                            dirh,
                            off.abs(),
                        ) {
                            Ok(seg) if seg.hit.is_none() => {
                                let or = if seg.flipped { -1.0 } else { 1.0 };
                                (Some(seg.end), or)
                            }
                            _ => (None, 1.0),
                        }
                    };
                    let Some(x) = pt else { continue };
                    let (fv, fx, fy) = b.eval(s, x);
                    let frame = rp.or_x * or_iota;
                    let pvd = profile_deriv(sv / e) / (e * e);
                    i0 += fv * tv * pv * ht * hs;
                    ix += fx * tv * pvd * frame * ht * hs;
                    iy += fy * tslope * pv * or_iota / rp.dir.y.signum() * ht * hs;
                }
            }
        }
    }
    Ok((i0, ix, iy))
}

/// Number of ι-preimages of sampled surface points (multiplicity probe).
pub fn sampled_multiplicity(
    s: &HalfTranslationSurface,
    collar: &Collar,
    samples: usize,
    seed: u64,
) -> usize {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let e = collar.l_min / 8.0;
    let mut worst = 0usize;
    for _ in 0..samples {
        // Sample a domain point and map it in; then count preimages by the
        // same crossing sweep the evaluator uses.
        let run = &collar.runs[rng.gen_range(0..collar.runs.len())];
        let t = rng.gen_range(0.0..run.total);
        let sv = rng.gen_range(-e..e);
        let Some((rp, pos)) = run.at(t) else { continue };
        let off = (sv + run.delta(t)) * rp.or_x;
        let x = if off.abs() <= 1e-12 {
            SurfacePoint { tri: rp.tri, pos }
        } else {
            match trace_ray(
                s,
                SurfacePoint { tri: rp.tri, pos },
                Vec2::new(off.signum(), 0.0),
                off.abs(),
            ) {
                Ok(seg) if seg.hit.is_none() => seg.end,
                _ => continue,
            }
        };
        // Count crossings of the horizontal line through x with the runs
        // within the collar width.
        let cap = collar.l_min / 4.0 * (1.0 + 1e-6);
        let mut count = 0usize;
        for side in [1.0f64, -1.0] {
            let Ok(tr) = trace_ray(s, x, Vec2::new(side, 0.0), cap) else {
                continue;
            };
            let pieces = tr.subsegments(s);
            let mut acc = 0.0;
            for (tt, p0, p1) in &pieces {
                let plen = (p1 - p0).norm();
                for run in &collar.runs {
                    for rp in &run.pieces {
                        if rp.tri != *tt {
                            continue;
                        }
                        use crate::geom::SegIntersection::*;
                        match crate::geom::intersect_segments(*p0, *p1, rp.a, rp.b, EPS_GEOM) {
                            Crossing { s: sp, .. } | Touch { s: sp, .. } => {
                                let tau = acc + sp.clamp(0.0, 1.0) * plen;
                                if tau > 1e-12 || side > 0.0 {
                                    count += 1;
                                }
                            }
                            _ => {}
                        }
                    }
                }
                acc += plen;
            }
        }
        worst = worst.max(count);
    }
    let _ = cross(Vec2::zeros(), Vec2::zeros());
    worst
}

/// Count crossings of a horizontal segment with the collar's geodesic.
pub fn crossings_with_geodesic(
    s: &HalfTranslationSurface,
    gamma: &crate::linear::TracedSegment,
    g: &FlatGeodesic,
) -> usize {
    let pg = PiecewiseCurve::of_segment(s, gamma);
    g.piece_groups(s)
        .into_iter()
        .map(|grp| {
            crate::geodesic::count_transverse(s, &pg, &PiecewiseCurve::new(grp, false))
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::geodesic::{assemble_chain, tighten, word_of_trace, CurveClass};
    use crate::geom::vec2;

    fn l3_vertical_core(s: &HalfTranslationSurface) -> FlatGeodesic {
        let seg = trace_ray(
            s,
            SurfacePoint {
                tri: 0,
                pos: vec2(0.5, 0.25),
            },
            vec2(0.0, 1.0),
            2.0,
        )
        .unwrap();
        tighten(s, &CurveClass::new(s, word_of_trace(&seg)).unwrap()).unwrap()
    }

    fn pillow_vertical_chain(s: &HalfTranslationSurface) -> FlatGeodesic {
        let conns = crate::saddle::enumerate_saddle_connections(s, 0.55, crate::saddle::DEFAULT_NODE_BUDGET)
            .unwrap();
        let verts: Vec<_> = conns
            .iter()
            .filter(|c| c.holonomy.x.abs() < 1e-9 && (c.length - 0.5).abs() < 1e-9)
            .collect();
        for a in &verts {
            for b in &verts {
                for ar in [false, true] {
                    for br in [false, true] {
                        if a.key() == b.key() {
                            continue;
                        }
                        if let Ok(g) =
                            assemble_chain(s, &[((*a).clone(), ar), ((*b).clone(), br)])
                        {
                            return g;
                        }
                    }
                }
            }
        }
        panic!("no vertical 2-chain found");
    }

    #[test]
    fn profile_is_normalized() {
        let n = 20000;
        let h = 2.0 / n as f64;
        let mut acc = 0.0;
        for k in 0..n {
            acc += profile(-1.0 + (k as f64 + 0.5) * h) * h;
        }
        assert!((acc - 1.0).abs() < 1e-9, "∫ϕ = {acc}");
        assert!((taper(0.0) - 1.0).abs() < 1e-12);
        assert!(taper(1.0).abs() < 1e-12);
    }

    #[test]
    fn l3_vertical_core_collar_has_zero_shear() {
        let s = fixtures::l_shaped_3();
        let g = l3_vertical_core(&s);
        let lm = crate::saddle::l_min(&s);
        let c = build_collar(&s, &g, lm).unwrap();
        assert!(c.is_cylinder);
        assert!(c.runs[0].delta_anchors.is_empty(), "no exceptional times");
        assert!(c.delta_slope_bound.abs() < 1e-12);
    }

    #[test]
    fn horizontal_geodesic_is_rejected() {
        let s = fixtures::l_shaped_3();
        let seg = trace_ray(
            &s,
            SurfacePoint {
                tri: 0,
                pos: vec2(0.4, 0.3),
            },
            vec2(1.0, 0.0),
            2.0,
        )
        .unwrap();
        let g = tighten(&s, &CurveClass::new(&s, word_of_trace(&seg)).unwrap()).unwrap();
        let lm = crate::saddle::l_min(&s);
        assert!(matches!(
            build_collar(&s, &g, lm),
            Err(CollarError::HorizontalGeodesic)
        ));
    }

    #[test]
    fn cylinder_bump_integral_is_vertical_transverse_measure() {
        let s = fixtures::l_shaped_3();
        let g = l3_vertical_core(&s);
        let lm = crate::saddle::l_min(&s);
        let c = build_collar(&s, &g, lm).unwrap();
        let b = bump_function(&c, 0.01, 0).unwrap();
        assert_eq!(b.variant, BumpVariant::Plain);
        let integral = integrate_over_surface(&b);
        let stats = crate::geodesic::geodesic_stats(&g);
        assert!(
            (integral - stats.i_im).abs() < 1e-6,
            "∫φ = {integral}, i(β, Im q) = {}",
            stats.i_im
        );
    }

    #[test]
    fn torus_diagonal_bump_integral() {
        let s = fixtures::square_torus();
        let seg = trace_ray(
            &s,
            SurfacePoint {
                tri: 0,
                pos: vec2(0.43, 0.17),
            },
            vec2(1.0, 1.0),
            (2.0f64).sqrt(),
        )
        .unwrap();
        let g = tighten(&s, &CurveClass::new(&s, word_of_trace(&seg)).unwrap()).unwrap();
        let lm = crate::saddle::l_min(&s);
        let c = build_collar(&s, &g, lm).unwrap();
        assert!(c.runs[0].delta_anchors.is_empty());
        let b = bump_function(&c, 0.01, 0).unwrap();
        let integral = integrate_over_surface(&b);
        assert!((integral - 1.0).abs() < 1e-6, "∫φ = {integral}");
    }

    #[test]
    fn l3_chain_upper_bump_needs_simple_zeroes() {
        let s = fixtures::l_shaped_3();
        let conns = crate::saddle::enumerate_saddle_connections(&s, 1.5, crate::saddle::DEFAULT_NODE_BUDGET)
            .unwrap();
        let verticals: Vec<_> = conns
            .iter()
            .filter(|c| c.holonomy.x.abs() < 1e-9 && (c.length - 1.0).abs() < 1e-9)
            .collect();
        let mut chain = None;
        'outer: for a in &verticals {
            for b in &verticals {
                if a.key() == b.key() {
                    continue;
                }
                for ar in [false, true] {
                    for br in [false, true] {
                        if let Ok(g) =
                            assemble_chain(&s, &[((*a).clone(), ar), ((*b).clone(), br)])
                        {
                            chain = Some(g);
                            break 'outer;
                        }
                    }
                }
            }
        }
        let g = chain.expect("vertical 2-chain on L3");
        let lm = crate::saddle::l_min(&s);
        let c = build_collar(&s, &g, lm).unwrap();
        // φ_{0,δ} works; φ_{1,δ} needs simple zeroes and L3's cone is 6π.
        assert!(bump_function(&c, 0.01, 0).is_ok());
        assert!(matches!(
            bump_function(&c, 0.01, 1),
            Err(CollarError::HigherOrderZero)
        ));
        assert!(matches!(
            bump_function(&c, 0.2, 0),
            Err(CollarError::DeltaOutOfRange)
        ));
    }

    #[test]
    fn pillow_chain_sandwich_and_delta_scaling() {
        let s = fixtures::pillowcase_triple();
        let g = pillow_vertical_chain(&s);
        let lm = crate::saddle::l_min(&s);
        let c = build_collar(&s, &g, lm).unwrap();
        let stats = crate::geodesic::geodesic_stats(&g);
        let mut diffs = Vec::new();
        for delta in [0.01, 0.005] {
            let b0 = bump_function(&c, delta, 0).unwrap();
            let b1 = bump_function(&c, delta, 1).unwrap();
            let i0 = integrate_over_surface(&b0);
            let i1 = integrate_over_surface(&b1);
            assert!(
                i0 <= stats.i_im + 1e-6 && stats.i_im <= i1 + 1e-6,
                "sandwich failed: {i0} ≤ {} ≤ {i1}",
                stats.i_im
            );
            diffs.push(i1 - i0);
            // Pointwise ordering on a sample grid.
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
            for _ in 0..200 {
                let tri = rng.gen_range(0..s.num_triangles());
                let u: f64 = rng.gen();
                let v: f64 = rng.gen::<f64>() * (1.0 - u);
                let p = s.corner_pos(tri, 0)
                    + u * (s.corner_pos(tri, 1) - s.corner_pos(tri, 0))
                    + v * (s.corner_pos(tri, 2) - s.corner_pos(tri, 0));
                let x = SurfacePoint { tri, pos: p };
                let (v0, _, _) = b0.eval(&s, x);
                let (v1, _, _) = b1.eval(&s, x);
                assert!(v0 <= v1 + 1e-9, "φ0({x:?}) = {v0} > φ1 = {v1}");
            }
        }
        let ratio = diffs[0] / diffs[1];
        assert!(
            ratio > 1.5 && ratio < 2.5,
            "δ-halving ratio {ratio} (diffs {diffs:?})"
        );
        // Difference bound ⪯ δ · ℓ_β.
        assert!(diffs[0] <= 32.0 * 0.01 * g.length());
    }

    #[test]
    fn horizontal_segment_integral_counts_crossings() {
        let s = fixtures::l_shaped_3();
        let g = l3_vertical_core(&s);
        let lm = crate::saddle::l_min(&s);
        let c = build_collar(&s, &g, lm).unwrap();
        let b = bump_function(&c, 0.01, 0).unwrap();
        // γ of length 3 crossing the vertical core transversally.
        let gamma = trace_ray(
            &s,
            SurfacePoint {
                tri: 0,
                pos: vec2(0.8, 0.37),
            },
            vec2(1.0, 0.0),
            3.0,
        )
        .unwrap();
        assert!(gamma.hit.is_none());
        let integral = integrate_along_horizontal(&s, &b, &gamma, 50_000_000).unwrap();
        let crossings = crossings_with_geodesic(&s, &gamma, &g) as f64;
        let bound = 32.0 * g.length() / lm;
        assert!(
            (crossings - integral).abs() <= bound,
            "count {crossings} vs ∫ {integral}"
        );
        // Disjoint segment integrates to zero.
        let far = trace_ray(
            &s,
            SurfacePoint {
                tri: 2,
                pos: vec2(0.5, 0.1),
            },
            vec2(1.0, 0.0),
            0.2,
        )
        .unwrap();
        let zero = integrate_along_horizontal(&s, &b, &far, 50_000_000).unwrap();
        assert!(zero.abs() < 1e-9, "∫ over disjoint γ = {zero}");
    }

    #[test]
    fn torus_full_wrap_integral_is_one() {
        let s = fixtures::square_torus();
        // Bump of the (0,1) vertical core; one horizontal wrap crosses once.
        let seg = trace_ray(
            &s,
            SurfacePoint {
                tri: 0,
                pos: vec2(0.5, 0.25),
            },
            vec2(0.0, 1.0),
            1.0,
        )
        .unwrap();
        let g = tighten(&s, &CurveClass::new(&s, word_of_trace(&seg)).unwrap()).unwrap();
        let lm = crate::saddle::l_min(&s);
        let c = build_collar(&s, &g, lm).unwrap();
        let b = bump_function(&c, 0.01, 0).unwrap();
        let gamma = trace_ray(
            &s,
            SurfacePoint {
                tri: 0,
                pos: vec2(0.9, 0.13),
            },
            vec2(1.0, 0.0),
            1.0,
        )
        .unwrap();
        let integral = integrate_along_horizontal(&s, &b, &gamma, 50_000_000).unwrap();
        assert!((integral - 1.0).abs() < 1e-5, "∫_γ φ = {integral}");
    }

    #[test]
    fn bump_derivatives_match_finite_differences() {
        let s = fixtures::l_shaped_3();
        let g = l3_vertical_core(&s);
        let lm = crate::saddle::l_min(&s);
        let c = build_collar(&s, &g, lm).unwrap();
        let b = bump_function(&c, 0.01, 0).unwrap();
        let h = 1e-6;
        for (tri, px, py) in [(0usize, 0.55, 0.3), (0, 0.45, 0.2), (1, 0.4, 0.6)] {
            let x = SurfacePoint {
                tri,
                pos: vec2(px, py),
            };
            let (_, dx, dy) = b.eval(&s, x);
            let vp = b
                .eval(
                    &s,
                    SurfacePoint {
                        tri,
                        pos: vec2(px + h, py),
                    },
                )
                .0;
            let vm = b
                .eval(
                    &s,
                    SurfacePoint {
                        tri,
                        pos: vec2(px - h, py),
                    },
                )
                .0;
            let fd_x = (vp - vm) / (2.0 * h);
            let wp = b
                .eval(
                    &s,
                    SurfacePoint {
                        tri,
                        pos: vec2(px, py + h),
                    },
                )
                .0;
            let wm = b
                .eval(
                    &s,
                    SurfacePoint {
                        tri,
                        pos: vec2(px, py - h),
                    },
                )
                .0;
            let fd_y = (wp - wm) / (2.0 * h);
            assert!(
                (dx.abs() - fd_x.abs()).abs() < 1e-3 * (1.0 + fd_x.abs()),
                "∂x mismatch at ({px},{py}): {dx} vs {fd_x}"
            );
            assert!(
                (dy.abs() - fd_y.abs()).abs() < 1e-3 * (1.0 + fd_y.abs()),
                "∂y mismatch at ({px},{py}): {dy} vs {fd_y}"
            );
        }
    }

    #[test]
    fn sobolev_norm_finite_and_positive() {
        let s = fixtures::l_shaped_3();
        let g = l3_vertical_core(&s);
        let lm = crate::saddle::l_min(&s);
        let c = build_collar(&s, &g, lm).unwrap();
        let b = bump_function(&c, 0.01, 0).unwrap();
        let n = sobolev_norm(&s, &b, 50_000_000).unwrap();
        assert!(n.is_finite() && n > 0.0, "‖φ‖ = {n}");
    }

    #[test]
    fn multiplicity_stays_bounded() {
        let s = fixtures::l_shaped_3();
        let g = l3_vertical_core(&s);
        let lm = crate::saddle::l_min(&s);
        let c = build_collar(&s, &g, lm).unwrap();
        let m = sampled_multiplicity(&s, &c, 300, 11);
        assert!(m as f64 <= c.multiplicity_bound, "{m} > {}", c.multiplicity_bound);
        assert!(m >= 1);
    }
}

#[cfg(test)]
mod scaling_tests {
    use super::*;
    use crate::fixtures;
    use crate::geodesic::{tighten, word_of_trace, CurveClass};
    use crate::geom::vec2;

    /// `‖φ‖_0` is scale-invariant: φ scales like 1/λ while the area form
    /// scales like λ², so the L² mass is unchanged.
    #[test]
    fn l2_term_is_scale_invariant() {
        let s = fixtures::l_shaped_3();
        let seg = trace_ray(
            &s,
            SurfacePoint {
                tri: 0,
                pos: vec2(0.5, 0.25),
            },
            vec2(0.0, 1.0),
            2.0,
        )
        .unwrap();
        let g = tighten(&s, &CurveClass::new(&s, word_of_trace(&seg)).unwrap()).unwrap();
        let lm = crate::saddle::l_min(&s);
        let c = build_collar(&s, &g, lm).unwrap();
        let b = bump_function(&c, 0.01, 0).unwrap();
        let (l0, _, _) = sobolev_terms(&s, &b, 100_000_000).unwrap();

        let lambda = 2.0;
        let s2 = s.scaled(lambda);
        let seg2 = trace_ray(
            &s2,
            SurfacePoint {
                tri: 0,
                pos: vec2(1.0, 0.5),
            },
            vec2(0.0, 1.0),
            4.0,
        )
        .unwrap();
        let g2 = tighten(&s2, &CurveClass::new(&s2, word_of_trace(&seg2)).unwrap()).unwrap();
        let c2 = build_collar(&s2, &g2, lambda * lm).unwrap();
        let b2 = bump_function(&c2, 0.01, 0).unwrap();
        let (l0b, dx, dy) = sobolev_terms(&s2, &b2, 100_000_000).unwrap();
        assert!(
            (l0 - l0b).abs() <= 2e-3 * (1.0 + l0),
            "‖φ‖_0 changed under scaling: {l0} vs {l0b}"
        );
        // Derivative terms scale like 1/λ.
        let (_, dx1, dy1) = sobolev_terms(&s, &b, 100_000_000).unwrap();
        assert!((dx - dx1 / lambda).abs() <= 2e-3 * (1.0 + dx1));
        assert!((dy - dy1 / lambda).abs() <= 2e-3 * (1.0 + dy1));
    }
}
