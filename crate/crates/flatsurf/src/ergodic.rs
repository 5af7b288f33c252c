//! Flow-recurrence machinery: greedy partitions, membership traces along
//! Teichmüller orbits, itinerary sampling and validation, equidistribution
//! error measurements, and the assembled intersection estimate.

use crate::collar::{build_collar, bump_function, BumpFunction, CollarError};
use crate::geodesic::{intersection_bounds, tighten, CurveClass, FlatGeodesic, GeodesicError};
use crate::linear::{flow, TracedSegment};
use crate::surface::HalfTranslationSurface;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ErgodicError {
    #[error("thresholds must be positive and strictly increasing")]
    BadThresholds,
    #[error("trace does not cover the requested horizon")]
    ShortTrace,
    #[error(transparent)]
    Geodesic(#[from] GeodesicError),
    #[error(transparent)]
    Collar(#[from] CollarError),
    #[error("surface must have unit area (got {0})")]
    NotUnitArea(f64),
    #[error("geodesic is horizontal on the end surface")]
    HorizontalEnd,
}

// ---------------------------------------------------------------------------
// Greedy partitions.
// ---------------------------------------------------------------------------

/// Output of the greedy partition of a length `ℓ` by thresholds
/// `T_1 < … < T_N` (with `T_{N+1} := ℓ`): a leftover `< T_1` and `m_k` pieces
/// of length exactly `T_k` with `m_k ≤ T_{k+1}/T_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct GreedyPartition {
    pub leftover: f64,
    /// `(T_k, m_k)` per level, in increasing threshold order.
    pub levels: Vec<(f64, usize)>,
}

impl GreedyPartition {
    pub fn total(&self) -> f64 {
        self.leftover
            + self
                .levels
                .iter()
                .map(|(t, m)| t * *m as f64)
                .sum::<f64>()
    }
}

pub fn greedy_partition(l: f64, thresholds: &[f64]) -> Result<GreedyPartition, ErgodicError> {
    if l <= 0.0 || thresholds.is_empty() {
        return Err(ErgodicError::BadThresholds);
    }
    for w in thresholds.windows(2) {
        if w[0] >= w[1] {
            return Err(ErgodicError::BadThresholds);
        }
    }
    if thresholds[0] <= 0.0 {
        return Err(ErgodicError::BadThresholds);
    }
    let mut rem = l;
    let mut levels = vec![(0.0, 0usize); thresholds.len()];
    for k in (0..thresholds.len()).rev() {
        let t = thresholds[k];
        // Tolerate one ulp of rounding in the ratio so exactly-divisible
        // rational inputs floor correctly.
        let ratio = rem / t;
        let m = if ratio <= 0.0 {
            0
        } else {
            (ratio * (1.0 + 1e-12)).floor() as usize
        };
        levels[k] = (t, m);
        rem = (rem - t * m as f64).max(0.0);
    }
    Ok(GreedyPartition {
        leftover: rem,
        levels,
    })
}

// ---------------------------------------------------------------------------
// Membership traces.
// ---------------------------------------------------------------------------

/// Sampled membership of a flow orbit in a compact set `K` and its flow
/// enlargement `K' = ∪_{|u| ≤ s} a_u K`, on the grid `t = i·dt`.
#[derive(Clone, Debug)]
pub struct MembershipTrace {
    pub dt: f64,
    pub in_k: Vec<bool>,
    pub in_kprime: Vec<bool>,
}

impl MembershipTrace {
    /// Build from K-membership samples; `K'` is the `s`-dilation along the
    /// orbit.
    pub fn new(dt: f64, in_k: Vec<bool>, s: f64) -> MembershipTrace {
        assert!(dt > 0.0);
        let w = (s / dt).round() as usize;
        let n = in_k.len();
        let mut in_kprime = vec![false; n];
        // Prefix trick for windowed OR.
        let mut next_true = vec![usize::MAX; n + 1];
        let mut nt = usize::MAX;
        for i in (0..n).rev() {
            if in_k[i] {
                nt = i;
            }
            next_true[i] = nt;
        }
        for (i, out) in in_kprime.iter_mut().enumerate() {
            let lo = i.saturating_sub(w);
            let nt = next_true[lo];
            *out = nt != usize::MAX && nt <= (i + w).min(n - 1);
        }
        MembershipTrace {
            dt,
            in_k,
            in_kprime,
        }
    }

    pub fn horizon(&self) -> f64 {
        (self.in_k.len().saturating_sub(1)) as f64 * self.dt
    }

    fn idx(&self, t: f64) -> usize {
        ((t / self.dt).round() as usize).min(self.in_k.len() - 1)
    }

    pub fn in_k_at(&self, t: f64) -> bool {
        self.in_k[self.idx(t)]
    }

    pub fn in_kprime_at(&self, t: f64) -> bool {
        self.in_kprime[self.idx(t)]
    }

    /// Riemann-sum measure of `{t ∈ [0, horizon] : a_t ∉ K}`.
    pub fn excursion_measure(&self) -> f64 {
        self.in_k.iter().filter(|x| !**x).count() as f64 * self.dt
    }
}

/// `|{t ∈ [0,T] : a_t ω ∉ K}| / T`, to grid resolution.
pub fn recurrence_fraction(tr: &MembershipTrace) -> f64 {
    let t = tr.horizon();
    if t <= 0.0 {
        return 0.0;
    }
    tr.excursion_measure() / t
}

/// `(K, T, η)`-recurrence test.
pub fn is_recurrent(tr: &MembershipTrace, eta: f64) -> bool {
    recurrence_fraction(tr) <= eta
}

/// Membership trace of the orbit `a_t S` for `t ∈ [0, T]` with
/// `K_δ = {ℓ_min ≥ δ}`. Saddle connections are flow-equivariant, so the
/// orbit's ℓ_min is the pointwise minimum of flowed holonomies of a single
/// enumeration.
pub fn orbit_trace(
    s: &HalfTranslationSurface,
    t_max: f64,
    dt: f64,
    delta: f64,
    enlargement: f64,
) -> MembershipTrace {
    let lm0 = crate::saddle::l_min(s);
    let cap = 1.5 * (lm0.max(1.0)) * t_max.exp();
    let conns =
        crate::saddle::enumerate_saddle_connections(s, cap, crate::saddle::DEFAULT_NODE_BUDGET)
            .unwrap_or_default();
    let n = (t_max / dt).round() as usize;
    let mut in_k = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let t = i as f64 * dt;
        let (et, emt) = (t.exp(), (-t).exp());
        let lm = conns
            .iter()
            .map(|c| {
                let x = c.holonomy.x * et;
                let y = c.holonomy.y * emt;
                (x * x + y * y).sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        in_k.push(lm >= delta);
    }
    MembershipTrace::new(dt, in_k, enlargement)
}

// ---------------------------------------------------------------------------
// Itinerary sampling and validation.
// ---------------------------------------------------------------------------

/// The greedy sampling of visiting times: start at `ρT`, step by `s` while
/// the whole window stays in `K'`, otherwise jump to the next K-entry past
/// the step; truncate with `s_{N+1} = T`. Infima are resolved to the grid.
pub fn sample_itinerary(tr: &MembershipTrace, t_max: f64, rho: f64, s: f64) -> Vec<f64> {
    let dt = tr.dt;
    let mut seq = vec![rho * t_max];
    let mut cur = rho * t_max;
    loop {
        let window_ok = {
            let i0 = (cur / dt).round() as usize;
            let i1 = ((cur + s) / dt).round() as usize;
            (i0..=i1.min(tr.in_kprime.len().saturating_sub(1)))
                .all(|i| tr.in_kprime[i])
                && i1 < tr.in_kprime.len()
        };
        let next = if window_ok {
            cur + s
        } else {
            // inf { t > cur + s : a_t ∈ K }, on the grid.
            let start = (((cur + s) / dt).floor() as usize + 1).max(0);
            let mut found = f64::INFINITY;
            for i in start..tr.in_k.len() {
                if tr.in_k[i] {
                    found = i as f64 * dt;
                    break;
                }
            }
            found
        };
        if cur >= t_max || next >= t_max || !next.is_finite() {
            // cur is the last ŝ_N < T (or the sequence just started).
            if *seq.last().unwrap() < t_max {
                seq.push(t_max);
            }
            break;
        }
        seq.push(next);
        cur = next;
        if seq.len() > tr.in_k.len() + 2 {
            break;
        }
    }
    seq
}

/// The six itinerary conditions, reported individually.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ItineraryCondition {
    /// (1) `a_{s_n} ∈ K'` for `1 ≤ n ≤ N`.
    Membership,
    /// (2) `s_0 = ρT`.
    StartsAtRhoT,
    /// (3) `s_N < T`.
    LastBeforeHorizon,
    /// (4) `s_{N+1} = T`.
    EndsAtHorizon,
    /// (5) `s_{n+1} ≥ s_n + s` for `1 ≤ n ≤ N-1`.
    MinimumGap,
    /// (6) `s_{n+1} - s_n ≤ ε·s_n` for `0 ≤ n ≤ N`.
    MaximumGap,
    /// `N ≥ 1`.
    NonemptyInterior,
}

#[derive(Clone, Debug)]
pub struct ItineraryViolation {
    pub condition: ItineraryCondition,
    pub index: usize,
}

/// Check a candidate sequence against the `(K', T, ρ, ε, s)`-itinerary
/// definition, with `dt`-slack on the inequalities.
pub fn validate_itinerary(
    seq: &[f64],
    tr: &MembershipTrace,
    t_max: f64,
    rho: f64,
    eps: f64,
    s: f64,
) -> Vec<ItineraryViolation> {
    let mut v = Vec::new();
    let slack = 1.5 * tr.dt;
    if seq.len() < 3 {
        v.push(ItineraryViolation {
            condition: ItineraryCondition::NonemptyInterior,
            index: 0,
        });
    }
    if seq.is_empty() {
        return v;
    }
    let n_cap = seq.len() - 2; // N
    if (seq[0] - rho * t_max).abs() > slack {
        v.push(ItineraryViolation {
            condition: ItineraryCondition::StartsAtRhoT,
            index: 0,
        });
    }
    if seq.len() >= 2 {
        let last = seq[seq.len() - 1];
        if (last - t_max).abs() > slack {
            v.push(ItineraryViolation {
                condition: ItineraryCondition::EndsAtHorizon,
                index: seq.len() - 1,
            });
        }
        if seq.len() >= 3 && seq[seq.len() - 2] >= t_max {
            v.push(ItineraryViolation {
                condition: ItineraryCondition::LastBeforeHorizon,
                index: seq.len() - 2,
            });
        }
    }
    for n in 1..=n_cap.min(seq.len().saturating_sub(2)) {
        if !tr.in_kprime_at(seq[n]) {
            v.push(ItineraryViolation {
                condition: ItineraryCondition::Membership,
                index: n,
            });
        }
    }
    for n in 1..seq.len().saturating_sub(2) {
        if seq[n + 1] < seq[n] + s - slack {
            v.push(ItineraryViolation {
                condition: ItineraryCondition::MinimumGap,
                index: n,
            });
        }
    }
    for n in 0..seq.len().saturating_sub(1) {
        if seq[n + 1] - seq[n] > eps * seq[n] + slack {
            v.push(ItineraryViolation {
                condition: ItineraryCondition::MaximumGap,
                index: n,
            });
        }
    }
    v
}

/// Contrapositive report for the sampler: a failed validation must coincide
/// with an excursion of measure `> ρεT` outside `K`.
#[derive(Clone, Debug)]
pub struct SamplerReport {
    pub validated: bool,
    pub violations: Vec<ItineraryViolation>,
    pub excursion: f64,
    pub bound: f64,
    /// `validated || excursion > bound` (up to grid slack).
    pub consistent: bool,
}

pub fn falsify_sampler_failure(
    tr: &MembershipTrace,
    t_max: f64,
    rho: f64,
    eps: f64,
    s: f64,
) -> SamplerReport {
    let seq = sample_itinerary(tr, t_max, rho, s);
    let violations = validate_itinerary(&seq, tr, t_max, rho, eps, s);
    let validated = violations.is_empty();
    let excursion = tr
        .in_k
        .iter()
        .take(((t_max / tr.dt).round() as usize + 1).min(tr.in_k.len()))
        .filter(|x| !**x)
        .count() as f64
        * tr.dt;
    let bound = rho * eps * t_max;
    SamplerReport {
        validated,
        consistent: validated || excursion > bound - 2.0 * tr.dt,
        violations,
        excursion,
        bound,
    }
}

// ---------------------------------------------------------------------------
// Equidistribution error.
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct EquidistReport {
    pub seg_integral: f64,
    pub surface_integral: f64,
    pub length: f64,
    pub error: f64,
    pub normalized_error: f64,
}

/// `|∫_γ φ dRe(q) - ℓ_γ ∫_X φ dA_q|` for a horizontal segment γ of length
/// `A·e^T` on a unit-area surface, and the normalized error (÷ ℓ_γ).
pub fn equidistribution_error(
    s: &HalfTranslationSurface,
    b: &BumpFunction<'_>,
    gamma: &TracedSegment,
    step_scale: f64,
) -> Result<EquidistReport, ErgodicError> {
    let area = s.area();
    if (area - 1.0).abs() > 1e-6 {
        return Err(ErgodicError::NotUnitArea(area));
    }
    let length = gamma.len;
    if length <= 0.0 {
        return Ok(EquidistReport {
            seg_integral: 0.0,
            surface_integral: crate::collar::integrate_over_surface(b),
            length: 0.0,
            error: 0.0,
            normalized_error: 0.0,
        });
    }
    let seg_integral =
        crate::collar::integrate_along_horizontal_with_step(s, b, gamma, step_scale, 200_000_000)?;
    let surface_integral = crate::collar::integrate_over_surface(b);
    let error = (seg_integral - length * surface_integral).abs();
    Ok(EquidistReport {
        seg_integral,
        surface_integral,
        length,
        error,
        normalized_error: error / length,
    })
}

// ---------------------------------------------------------------------------
// The assembled estimate.
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct EstimateReport {
    pub predicted: f64,
    pub actual_lo: usize,
    pub actual_hi: usize,
    pub residual: f64,
    pub normalized_residual: f64,
    pub i_alpha_re_start: f64,
    pub i_beta_im_end: f64,
}

/// `i(α, Re q_s) · i(β, Im q_e) · e^r` against the certified intersection
/// interval on `q_e = a_r q_s`.
pub fn main_estimate(
    q_s: &HalfTranslationSurface,
    r: f64,
    alpha: &CurveClass,
    beta: &CurveClass,
) -> Result<EstimateReport, ErgodicError> {
    let area = q_s.area();
    if (area - 1.0).abs() > 1e-6 {
        return Err(ErgodicError::NotUnitArea(area));
    }
    let q_e = flow(q_s, r);
    let alpha_s = tighten(q_s, alpha)?;
    let alpha_e = tighten(&q_e, alpha)?;
    let beta_e = tighten(&q_e, beta)?;
    let stats_alpha = crate::geodesic::geodesic_stats(&alpha_s);
    let stats_beta = crate::geodesic::geodesic_stats(&beta_e);
    if stats_beta.v <= 0.0 {
        return Err(ErgodicError::HorizontalEnd);
    }
    let predicted = stats_alpha.i_re * stats_beta.i_im * r.exp();
    let bounds = intersection_bounds(&q_e, &alpha_e, &beta_e)?;
    let residual = if predicted < bounds.lower as f64 {
        bounds.lower as f64 - predicted
    } else if predicted > bounds.upper as f64 {
        predicted - bounds.upper as f64
    } else {
        0.0
    };
    Ok(EstimateReport {
        predicted,
        actual_lo: bounds.lower,
        actual_hi: bounds.upper,
        residual,
        normalized_residual: residual / r.exp(),
        i_alpha_re_start: stats_alpha.i_re,
        i_beta_im_end: stats_beta.i_im,
    })
}

/// Tighten a set of pseudo-random non-horizontal curve classes on a surface
/// and build their bump functions' collars (experiment helper).
pub fn random_nonhorizontal_geodesics(
    s: &HalfTranslationSurface,
    count: usize,
    seed: u64,
) -> Vec<FlatGeodesic> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut guard = 0;
    while out.len() < count && guard < count * 80 {
        guard += 1;
        let tri = rng.gen_range(0..s.num_triangles());
        let u: f64 = rng.gen_range(0.05..0.95);
        let v: f64 = rng.gen_range(0.05..(1.0 - u).max(0.06));
        let p = s.corner_pos(tri, 0)
            + u * (s.corner_pos(tri, 1) - s.corner_pos(tri, 0))
            + v * (s.corner_pos(tri, 2) - s.corner_pos(tri, 0));
        let ang = rng.gen_range(0.0..std::f64::consts::TAU);
        let d = crate::geom::vec2(ang.cos(), ang.sin());
        let len = rng.gen_range(1.0..4.0) * s.area().sqrt();
        let Ok(seg) = crate::linear::trace_ray(
            s,
            crate::surface::SurfacePoint { tri, pos: p },
            d,
            len,
        ) else {
            continue;
        };
        if seg.hit.is_some() || seg.end.tri != seg.start.tri {
            continue;
        }
        let Ok(word) = CurveClass::new(s, crate::geodesic::word_of_trace(&seg)) else {
            continue;
        };
        let Ok(g) = tighten(s, &word) else { continue };
        if g.piece_holonomies().iter().all(|h| h.y.abs() > 1e-6) {
            out.push(g);
        }
    }
    out
}

/// Build a collar+bump for a geodesic if possible (plain for cylinders, lower
/// variant for chains).
pub fn bump_for<'a>(
    s: &HalfTranslationSurface,
    g: &FlatGeodesic,
    l_min: f64,
    collar_slot: &'a mut Option<crate::collar::Collar>,
    delta: f64,
) -> Result<BumpFunction<'a>, ErgodicError> {
    *collar_slot = Some(build_collar(s, g, l_min)?);
    Ok(bump_function(collar_slot.as_ref().unwrap(), delta, 0)?)
}
