//! Train tracks dual to triangulations: per-triangle labelings from the
//! vertical foliation, switch-condition counting measures, carried
//! multicurves from integer weights, and convexity/Lipschitz probes of the
//! intersection pairing in these coordinates.

use crate::geodesic::{intersection_bounds, tighten, CurveClass, FlatGeodesic, GeodesicError};
use crate::geom::EPS_GEOM;
use crate::surface::HalfTranslationSurface;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("weights must be non-negative integers satisfying the switch conditions")]
    NonIntegerWeights,
    #[error("switch condition fails at triangle {tri}: {lhs} vs {rhs}")]
    SwitchViolated { tri: usize, lhs: f64, rhs: f64 },
    #[error(transparent)]
    Geodesic(#[from] GeodesicError),
}

/// Per-triangle labeling: the `large` edge satisfies
/// `i(a, Re q) = i(b, Re q) + i(c, Re q)`.
#[derive(Clone, Debug)]
pub struct TriLabel {
    /// Edge index (0..3) of the large branch `a`.
    pub large: usize,
    /// All admissible labelings (two when an edge is vertical).
    pub admissible: Vec<usize>,
}

/// A train track dual to a triangulation: one branch per triangulation edge,
/// one switch per triangle with the two small edges incoming and the large
/// edge outgoing.
#[derive(Clone, Debug)]
pub struct TrainTrack {
    pub labels: Vec<TriLabel>,
    /// Maximal iff every complementary region is a trigon, i.e. all zeroes
    /// simple.
    pub maximal: bool,
}

/// Dual track of a triangulation, labeled from the x-components of the edges.
/// Vertical-edge ties are broken by the lexicographically first admissible
/// label; both are recorded.
pub fn dual_train_track(s: &HalfTranslationSurface) -> TrainTrack {
    let mut labels = Vec::with_capacity(s.num_triangles());
    for t in 0..s.num_triangles() {
        let xs: Vec<f64> = (0..3).map(|e| s.triangle(t)[e].x.abs()).collect();
        let has_vertical = xs.iter().any(|x| *x <= EPS_GEOM);
        let mut admissible = Vec::new();
        for a in 0..3 {
            let b = (a + 1) % 3;
            let c = (a + 2) % 3;
            if (xs[a] - xs[b] - xs[c]).abs() <= 1e-9 * (1.0 + xs[a]) {
                admissible.push(a);
            }
        }
        debug_assert!(!admissible.is_empty());
        debug_assert!(has_vertical || admissible.len() == 1);
        labels.push(TriLabel {
            large: admissible[0],
            admissible,
        });
    }
    let maximal = s.vertices().iter().all(|v| v.order == 1);
    TrainTrack { labels, maximal }
}

/// Counting measure of the vertical foliation: weight(edge) = |x-component|.
pub fn vertical_counting_measure(s: &HalfTranslationSurface) -> Vec<f64> {
    s.gluings()
        .iter()
        .map(|g| s.triangle(g.a.tri)[g.a.edge].x.abs())
        .collect()
}

/// Verify the switch conditions `w(a) = w(b) + w(c)` per triangle.
pub fn check_switch_conditions(
    s: &HalfTranslationSurface,
    track: &TrainTrack,
    w: &[f64],
    tol: f64,
) -> Result<(), TrackError> {
    for t in 0..s.num_triangles() {
        let a = track.labels[t].large;
        let idx = |e: usize| s.gluing_of_edge(t, e);
        let lhs = w[idx(a)];
        let rhs = w[idx((a + 1) % 3)] + w[idx((a + 2) % 3)];
        if (lhs - rhs).abs() > tol {
            return Err(TrackError::SwitchViolated { tri: t, lhs, rhs });
        }
    }
    Ok(())
}

/// Carried multicurve of an integer counting measure: the unique non-crossing
/// strand matching in each triangle pairs the large edge's slots with the
/// concatenated small-edge slots in reversed boundary order (parenthesis
/// matching), and the resulting degree-2 graph decomposes into cycles.
pub fn carried_multicurve(
    s: &HalfTranslationSurface,
    track: &TrainTrack,
    w: &[usize],
) -> Result<Vec<CurveClass>, TrackError> {
    let wf: Vec<f64> = w.iter().map(|x| *x as f64).collect();
    check_switch_conditions(s, track, &wf, 0.0).map_err(|_| TrackError::NonIntegerWeights)?;
    // Slot id: (gluing, k) with k in canonical order along side a's direction.
    // Boundary order along edge (t,e): canonical when (t,e) is side a,
    // reversed otherwise.
    let slot_boundary_order = |t: usize, e: usize| -> Vec<(usize, usize)> {
        let gid = s.gluing_of_edge(t, e);
        let n = w[gid];
        let g = s.gluings()[gid];
        let canonical = (g.a.tri, g.a.edge) == (t, e);
        (0..n)
            .map(|k| (gid, if canonical { k } else { n - 1 - k }))
            .collect()
    };
    // Pairings per slot: each slot meets exactly two triangles.
    use std::collections::HashMap;
    let mut link: HashMap<(usize, usize), Vec<((usize, usize), usize)>> = HashMap::new();
    for t in 0..s.num_triangles() {
        let a = track.labels[t].large;
        let big = slot_boundary_order(t, a);
        let mut small = slot_boundary_order(t, (a + 1) % 3);
        small.extend(slot_boundary_order(t, (a + 2) % 3));
        if big.len() != small.len() {
            return Err(TrackError::NonIntegerWeights);
        }
        let m = big.len();
        for i in 0..m {
            let p = big[i];
            let q = small[m - 1 - i];
            link.entry(p).or_default().push((q, t));
            link.entry(q).or_default().push((p, t));
        }
    }
    // Walk cycles. State: (slot, triangle we are about to cross).
    let mut visited: std::collections::HashSet<((usize, usize), usize)> =
        std::collections::HashSet::new();
    let mut curves = Vec::new();
    let slots: Vec<(usize, usize)> = link.keys().copied().collect();
    for start in slots {
        for &(_, t0) in &link[&start] {
            if visited.contains(&(start, t0)) {
                continue;
            }
            let mut word = Vec::new();
            let mut slot = start;
            let mut tri = t0;
            loop {
                if !visited.insert((slot, tri)) {
                    break;
                }
                let partners = &link[&slot];
                let Some(&(next_slot, _)) = partners.iter().find(|(_, tt)| *tt == tri) else {
                    return Err(TrackError::NonIntegerWeights);
                };
                // Kill the reverse traversal of the same strand.
                visited.insert((next_slot, tri));
                // Exit `tri` through next_slot's edge.
                let gid = next_slot.0;
                let g = s.gluings()[gid];
                let (e_exit, t_next) = if g.a.tri == tri {
                    // Edge may appear twice in `tri` (self-glued); prefer the
                    // side matching `tri`.
                    (g.a.edge, g.b.tri)
                } else {
                    (g.b.edge, g.a.tri)
                };
                word.push((tri, e_exit));
                slot = next_slot;
                tri = t_next;
            }
            if !word.is_empty() {
                if let Ok(c) = CurveClass::new(s, word) {
                    curves.push(c);
                }
            }
        }
    }
    Ok(curves)
}

/// Interval-arithmetic convexity and Lipschitz probe of `i(α, ·)` in the
/// track's weight coordinates at integer scale: checks
/// `i(α, μ_{v+w}) ≤ (i(α, μ_{2v}) + i(α, μ_{2w})) / 2` conservatively (a
/// violation is reported only when the certified intervals are disjoint in
/// the violating order), and reports Lipschitz ratios.
#[derive(Clone, Debug)]
pub struct ConvexityProbe {
    pub conclusive_violation: bool,
    /// (midpoint interval, endpoint-average interval) widths for reporting.
    pub mid_interval: (usize, usize),
    pub avg_interval: (f64, f64),
    pub lipschitz_ratio: f64,
    /// True when the two sides agree exactly with zero-width intervals.
    pub equality: bool,
}

pub fn convexity_lipschitz_probe(
    s: &HalfTranslationSurface,
    track: &TrainTrack,
    alpha: &FlatGeodesic,
    v: &[usize],
    w: &[usize],
) -> Result<ConvexityProbe, TrackError> {
    let sum: Vec<usize> = v.iter().zip(w).map(|(a, b)| a + b).collect();
    let double = |u: &[usize]| -> Vec<usize> { u.iter().map(|x| 2 * x).collect() };
    let count = |weights: &[usize]| -> Result<(usize, usize), TrackError> {
        let curves = carried_multicurve(s, track, weights)?;
        let mut lo = 0usize;
        let mut hi = 0usize;
        for c in curves {
            match tighten(s, &c) {
                Ok(g) => {
                    let b = intersection_bounds(s, alpha, &g)?;
                    lo += b.lower;
                    hi += b.upper;
                }
                Err(GeodesicError::NullHomotopic) => {}
                Err(e) => return Err(e.into()),
            }
        }
        Ok((lo, hi))
    };
    let mid = count(&sum)?;
    let dv = count(&double(v))?;
    let dw = count(&double(w))?;
    let avg = (
        (dv.0 + dw.0) as f64 / 2.0,
        (dv.1 + dw.1) as f64 / 2.0,
    );
    // Violation is conclusive only when the midpoint's lower bound exceeds
    // the average's upper bound.
    let conclusive_violation = (mid.0 as f64) > avg.1 + 1e-9;
    // Lipschitz ratio |i(α, μ_v) - i(α, μ_w)| / ‖v - w‖ using midpoints.
    let iv = count(v)?;
    let iw = count(w)?;
    let miv = (iv.0 + iv.1) as f64 / 2.0;
    let miw = (iw.0 + iw.1) as f64 / 2.0;
    let dist = v
        .iter()
        .zip(w)
        .map(|(a, b)| {
            let d = *a as f64 - *b as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt();
    let lipschitz_ratio = if dist > 0.0 {
        (miv - miw).abs() / dist
    } else {
        0.0
    };
    let equality = mid.0 == mid.1
        && dv.0 == dv.1
        && dw.0 == dw.1
        && (mid.0 as f64 - avg.0).abs() < 1e-9;
    Ok(ConvexityProbe {
        conclusive_violation,
        mid_interval: mid,
        avg_interval: avg,
        lipschitz_ratio,
        equality,
    })
}

/// Random integer counting measures on the dual track, by propagating random
/// small-edge weights through the switch conditions and rejecting imbalance.
pub fn random_counting_measures(
    s: &HalfTranslationSurface,
    track: &TrainTrack,
    max_weight: usize,
    count: usize,
    seed: u64,
) -> Vec<Vec<usize>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let ne = s.gluings().len();
    let mut out = Vec::new();
    let mut tries = 0;
    while out.len() < count && tries < count * 8000 {
        tries += 1;
        let w: Vec<usize> = (0..ne).map(|_| rng.gen_range(0..=max_weight)).collect();
        let wf: Vec<f64> = w.iter().map(|x| *x as f64).collect();
        if check_switch_conditions(s, track, &wf, 0.0).is_ok() && w.iter().any(|x| *x > 0) {
            out.push(w);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::geom::vec2;
    use crate::linear::trace_ray;
    use crate::surface::SurfacePoint;

    #[test]
    fn torus_track_has_vertical_tie() {
        let s = fixtures::square_torus();
        let track = dual_train_track(&s);
        for label in &track.labels {
            assert_eq!(label.admissible.len(), 2, "vertical edge gives two labelings");
        }
        assert!(!track.maximal, "marked point is not a simple zero");
        let w = vertical_counting_measure(&s);
        check_switch_conditions(&s, &track, &w, 0.0).unwrap();
        // Weights: diagonal 1, horizontal 1, vertical 0.
        let mut sorted = w.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(sorted, vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn l3_delaunay_track_switches_and_maximality() {
        let s = fixtures::l_shaped_3();
        let del = crate::saddle::delaunay_triangulation(&s).unwrap();
        let track = dual_train_track(&del.surface);
        assert!(!track.maximal, "order-4 zero is not simple");
        let w = vertical_counting_measure(&del.surface);
        check_switch_conditions(&del.surface, &track, &w, 1e-12).unwrap();
    }

    #[test]
    fn pillowcase_track_is_maximal() {
        let s = fixtures::pillowcase_triple();
        let del = crate::saddle::delaunay_triangulation(&s).unwrap();
        let track = dual_train_track(&del.surface);
        assert!(track.maximal);
        let w = vertical_counting_measure(&del.surface);
        check_switch_conditions(&del.surface, &track, &w, 1e-12).unwrap();
    }

    #[test]
    fn weights_scale_exponentially_under_flow() {
        let s = fixtures::l_shaped_3();
        let w0 = vertical_counting_measure(&s);
        let t = 0.37;
        let st = crate::linear::flow(&s, t);
        let wt = vertical_counting_measure(&st);
        for (a, b) in w0.iter().zip(&wt) {
            assert!((b - a * t.exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn weights_are_gauge_invariant() {
        let s = fixtures::l_shaped_3();
        let perm: Vec<usize> = vec![3, 0, 5, 1, 4, 2];
        let rot = vec![1, 2, 0, 1, 2, 0];
        let s2 = s.relabeled(&perm, &rot);
        let mut w1 = vertical_counting_measure(&s);
        let mut w2 = vertical_counting_measure(&s2);
        w1.sort_by(|a, b| a.partial_cmp(b).unwrap());
        w2.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in w1.iter().zip(&w2) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn torus_carried_curves_roundtrip() {
        let s = fixtures::square_torus();
        let track = dual_train_track(&s);
        // With the lexicographic tie choice the large branches are the
        // horizontal edges, so the carried cone holds the vertical foliation
        // side: the (0,1) curve crosses the horizontal edge and the diagonal
        // once each.
        // Gluings: 0 = diagonal (1,1), 1 = horizontal (1,0), 2 = vertical (0,1).
        let w = vec![1usize, 1, 0];
        let wf: Vec<f64> = w.iter().map(|x| *x as f64).collect();
        check_switch_conditions(&s, &track, &wf, 0.0).unwrap();
        let curves = carried_multicurve(&s, &track, &w).unwrap();
        assert_eq!(curves.len(), 1);
        let g = tighten(&s, &curves[0]).unwrap();
        match &g {
            FlatGeodesic::Cylinder(c) => {
                let h = crate::saddle::canonical_sign(c.holonomy);
                assert!((h - vec2(0.0, 1.0)).norm() < 1e-9, "got {h:?}");
            }
            other => panic!("expected cylinder, got {other:?}"),
        }
        // Doubling the weights doubles the component count.
        let curves2 = carried_multicurve(&s, &track, &[2, 2, 0]).unwrap();
        assert_eq!(curves2.len(), 2);
        for c in curves2 {
            let g = tighten(&s, &c).unwrap();
            assert!((g.length() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn torus_random_weights_roundtrip_traversals() {
        let s = fixtures::square_torus();
        let track = dual_train_track(&s);
        let measures = random_counting_measures(&s, &track, 4, 10, 31);
        assert!(!measures.is_empty());
        for w in measures {
            let curves = carried_multicurve(&s, &track, &w).unwrap();
            assert!(!curves.is_empty());
            assert!(curves.len() <= w.iter().sum::<usize>());
            // Re-extract traversal counts from the tightened components.
            let mut recovered = vec![0usize; w.len()];
            for c in &curves {
                let g = tighten(&s, c).unwrap();
                let word = g.word(&s);
                for (t, e) in word {
                    recovered[s.gluing_of_edge(t, e)] += 1;
                }
            }
            assert_eq!(recovered, w, "traversal counts reproduce the measure");
        }
    }

    #[test]
    fn torus_convexity_is_linear() {
        let s = fixtures::square_torus();
        let track = dual_train_track(&s);
        let seg = trace_ray(
            &s,
            SurfacePoint {
                tri: 0,
                pos: vec2(0.43, 0.17),
            },
            vec2(1.0, 0.0),
            1.0,
        )
        .unwrap();
        let alpha = tighten(
            &s,
            &CurveClass::new(&s, crate::geodesic::word_of_trace(&seg)).unwrap(),
        )
        .unwrap();
        let measures = random_counting_measures(&s, &track, 3, 8, 77);
        for pair in measures.chunks(2) {
            if pair.len() < 2 {
                continue;
            }
            let probe =
                convexity_lipschitz_probe(&s, &track, &alpha, &pair[0], &pair[1]).unwrap();
            assert!(!probe.conclusive_violation);
            assert!(probe.equality, "{probe:?}");
        }
    }

    #[test]
    fn h_beta_lipschitz_along_period_paths() {
        // Appendix probe: |Δ h_β| ≤ C · perturbation, with fitted C stable
        // across scales.
        let s = fixtures::l_shaped_3();
        let basis = crate::saddle::greedy_period_basis(&s);
        let seg = trace_ray(
            &s,
            SurfacePoint {
                tri: 0,
                pos: vec2(0.4, 0.3),
            },
            vec2(2.0, 1.0),
            (5.0f64).sqrt(),
        )
        .unwrap();
        let word = CurveClass::new(&s, crate::geodesic::word_of_trace(&seg)).unwrap();
        let h0 = crate::geodesic::geodesic_stats(&tighten(&s, &word).unwrap()).h;
        use rand::{Rng, SeedableRng};
        let mut fitted = Vec::new();
        for scale in [1e-4, 1e-5] {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
            let mut c_max: f64 = 0.0;
            for _ in 0..30 {
                let deltas: Vec<crate::Vec2> = basis
                    .iter()
                    .map(|_| {
                        crate::geom::vec2(
                            rng.gen_range(-1.0..1.0) * scale,
                            rng.gen_range(-1.0..1.0) * scale,
                        )
                    })
                    .collect();
                let s2 = crate::saddle::perturb_periods(&s, &basis, &deltas).unwrap();
                let h2 = crate::geodesic::geodesic_stats(&tighten(&s2, &word).unwrap()).h;
                let step: f64 = deltas.iter().map(|d| d.norm()).sum();
                c_max = c_max.max((h2 - h0).abs() / step);
            }
            fitted.push(c_max);
        }
        let ratio = fitted[0] / fitted[1];
        assert!(
            (0.5..=2.0).contains(&ratio),
            "fitted constants {fitted:?} unstable"
        );
    }
}
