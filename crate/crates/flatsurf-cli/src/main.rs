//! Command-line entry points for flat-surface computations.
//!
//! Exit codes: 0 success, 1 domain error, 2 usage error. All randomness is
//! seeded and the seed is echoed in the output, so reruns are byte-identical.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use flatsurf::geodesic::{tighten, CurveClass};
use flatsurf::linear::{rotation_matrix, trace_ray};
use flatsurf::surface::HalfTranslationSurface;
use flatsurf::{geom::vec2, SurfacePoint};
use std::path::{Path, PathBuf};

mod batch;

#[derive(Parser)]
#[command(name = "flatsurf", version, about = "Half-translation surface computations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a surface file and print its metrics.
    Build {
        /// Surface file.
        surface: PathBuf,
    },
    /// Enumerate saddle connections up to a length bound (CSV on stdout).
    Saddles {
        #[arg(long)]
        surface: PathBuf,
        #[arg(long)]
        max_length: f64,
    },
    /// Tighten a curve class to its flat geodesic representative.
    Tighten {
        curve: PathBuf,
        #[arg(long)]
        surface: PathBuf,
    },
    /// Certified intersection interval of two curve classes.
    Intersect {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        surface: PathBuf,
    },
    /// Rectangular decomposition of a curve's geodesic (CSV on stdout).
    Rectdecomp {
        curve: PathBuf,
        #[arg(long)]
        surface: PathBuf,
    },
    /// Collar and bump-function diagnostics for a curve's geodesic.
    Collar {
        curve: PathBuf,
        #[arg(long)]
        surface: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        side: u8,
    },
    /// Equidistribution errors of long horizontal segments (CSV on stdout).
    Equidist {
        #[arg(long)]
        surface: PathBuf,
        /// Rotate by this angle before normalizing to unit area.
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        /// Comma-separated horizon exponents.
        #[arg(long, value_delimiter = ',')]
        t: Vec<f64>,
        /// Curve whose collar bump is integrated (default: a seeded one).
        #[arg(long)]
        curve: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// The assembled intersection estimate (CSV row on stdout).
    Estimate {
        #[arg(long)]
        qs: PathBuf,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        alpha: PathBuf,
        #[arg(long)]
        beta: PathBuf,
    },
    /// Sample and validate a flow itinerary on a real orbit.
    Itinerary {
        #[arg(long)]
        surface: PathBuf,
        #[arg(long, default_value_t = 5.0)]
        horizon: f64,
        #[arg(long, default_value_t = 0.1)]
        rho: f64,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        /// ℓ_min threshold defining the compact set.
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
    },
    /// Dual train track of a surface's triangulation (CSV on stdout).
    Traintrack {
        #[arg(long)]
        surface: PathBuf,
    },
    /// Run a batch of experiments from a config file (CSV on stdout).
    Batch {
        config: PathBuf,
    },
}

fn load_surface(path: &Path) -> Result<HalfTranslationSurface> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading surface {}", path.display()))?;
    flatsurf::io::parse_surface(&text).map_err(|e| anyhow!("parsing {}: {e}", path.display()))
}

fn load_curve(s: &HalfTranslationSurface, path: &Path) -> Result<CurveClass> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading curve {}", path.display()))?;
    let word = flatsurf::io::parse_curve(&text)
        .map_err(|e| anyhow!("parsing {}: {e}", path.display()))?;
    CurveClass::new(s, word).map_err(|e| anyhow!("invalid curve word: {e}"))
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Build { surface } => {
            let s = load_surface(&surface)?;
            let m = flatsurf::saddle::surface_metrics(&s);
            let sl = flatsurf::saddle::shortest_lengths(&s);
            println!("genus={}", m.genus);
            println!("area={}", m.area);
            println!("stratum={:?}", s.stratum_signature());
            println!("l_min={}", sl.l_min);
            println!("sys={}", sl.sys);
            println!("diameter_lower={}", m.diameter_lower);
            println!("diameter_upper={}", m.diameter_upper);
            println!(
                "cone_angles_over_pi={:?}",
                s.vertices()
                    .iter()
                    .map(|v| (v.cone_angle / std::f64::consts::PI).round() as i64)
                    .collect::<Vec<_>>()
            );
            Ok(())
        }
        Command::Saddles {
            surface,
            max_length,
        } => {
            let s = load_surface(&surface)?;
            let conns = flatsurf::saddle::enumerate_saddle_connections(
                &s,
                max_length,
                flatsurf::saddle::DEFAULT_NODE_BUDGET,
            )
            .map_err(|e| anyhow!("{e}"))?;
            println!("start_vertex,end_vertex,holonomy_x,holonomy_y,length");
            for c in conns {
                println!(
                    "{},{},{},{},{}",
                    c.endpoints.0, c.endpoints.1, c.holonomy.x, c.holonomy.y, c.length
                );
            }
            Ok(())
        }
        Command::Tighten { curve, surface } => {
            let s = load_surface(&surface)?;
            let c = load_curve(&s, &curve)?;
            let g = tighten(&s, &c).map_err(|e| anyhow!("{e}"))?;
            let st = flatsurf::geodesic::geodesic_stats(&g);
            let kind = if g.is_cylinder() { "cylinder" } else { "singular" };
            println!("kind={kind}");
            println!("length={}", st.length);
            println!("connections={}", g.connection_count());
            println!("i_re={}", st.i_re);
            println!("i_im={}", st.i_im);
            println!("v={}", st.v);
            println!("h={}", st.h);
            Ok(())
        }
        Command::Intersect { a, b, surface } => {
            let s = load_surface(&surface)?;
            let ca = load_curve(&s, &a)?;
            let cb = load_curve(&s, &b)?;
            let ga = tighten(&s, &ca).map_err(|e| anyhow!("{e}"))?;
            let gb = tighten(&s, &cb).map_err(|e| anyhow!("{e}"))?;
            let bounds =
                flatsurf::geodesic::intersection_bounds(&s, &ga, &gb).map_err(|e| anyhow!("{e}"))?;
            println!(
                "I={} n={} m={} interval=[{},{}]",
                bounds.transverse,
                ga.connection_count(),
                gb.connection_count(),
                bounds.lower,
                bounds.upper
            );
            Ok(())
        }
        Command::Rectdecomp { curve, surface } => {
            let s = load_surface(&surface)?;
            let c = load_curve(&s, &curve)?;
            let g = tighten(&s, &c).map_err(|e| anyhow!("{e}"))?;
            let lm = flatsurf::saddle::l_min(&s);
            let d = flatsurf::rect::build_rect_decomposition(&s, &g, lm)
                .map_err(|e| anyhow!("{e}"))?;
            println!("kind,start_triangle,length");
            for seg in &d.segments {
                let kind = match seg.kind {
                    flatsurf::rect::SegKind::Horizontal => "horizontal",
                    flatsurf::rect::SegKind::Vertical => "vertical",
                };
                println!("{kind},{},{}", seg.pieces[0].0, seg.length);
            }
            println!("# horizontal_sum={}", d.horizontal_sum);
            println!("# i_re={}", flatsurf::geodesic::geodesic_stats(&g).i_re);
            Ok(())
        }
        Command::Collar {
            curve,
            surface,
            delta,
            side,
        } => {
            let s = load_surface(&surface)?;
            let c = load_curve(&s, &curve)?;
            let g = tighten(&s, &c).map_err(|e| anyhow!("{e}"))?;
            let lm = flatsurf::saddle::l_min(&s);
            let collar = flatsurf::collar::build_collar(&s, &g, lm).map_err(|e| anyhow!("{e}"))?;
            let b = flatsurf::collar::bump_function(&collar, delta, side)
                .map_err(|e| anyhow!("{e}"))?;
            let integral = flatsurf::collar::integrate_over_surface(&b);
            let norm =
                flatsurf::collar::sobolev_norm(&s, &b, 100_000_000).map_err(|e| anyhow!("{e}"))?;
            let st = flatsurf::geodesic::geodesic_stats(&g);
            println!("integral_dA={integral}");
            println!("i_im={}", st.i_im);
            println!("sandwich_residual={}", integral - st.i_im);
            println!("sobolev_norm={norm}");
            println!("delta_slope_bound={}", collar.delta_slope_bound);
            Ok(())
        }
        Command::Equidist {
            surface,
            theta,
            t,
            curve,
            seed,
        } => {
            let s0 = load_surface(&surface)?;
            let rotated = flatsurf::linear::apply_matrix(&s0, &rotation_matrix(theta))
                .map_err(|e| anyhow!("{e}"))?
                .normalize_area();
            let word = match curve {
                Some(p) => load_curve(&rotated, &p)?,
                None => default_curve(&rotated, seed)?,
            };
            let g = tighten(&rotated, &word).map_err(|e| anyhow!("{e}"))?;
            let lm = flatsurf::saddle::l_min(&rotated);
            let collar =
                flatsurf::collar::build_collar(&rotated, &g, lm).map_err(|e| anyhow!("{e}"))?;
            let b = flatsurf::collar::bump_function(&collar, (lm.min(1.0) / 8.0) * 0.5, 0)
                .map_err(|e| anyhow!("{e}"))?;
            println!("T,predicted,actual_lo,actual_hi,residual,normalized_residual,seed");
            for horizon in t {
                let gamma = horizontal_segment(&rotated, horizon.exp(), seed)
                    .map_err(|e| anyhow!("{e}"))?;
                let rep = flatsurf::ergodic::equidistribution_error(&rotated, &b, &gamma, 4.0)
                    .map_err(|e| anyhow!("{e}"))?;
                let predicted = rep.length * rep.surface_integral;
                println!(
                    "{horizon},{predicted},{},{},{},{},{seed}",
                    rep.seg_integral, rep.seg_integral, rep.error, rep.normalized_error
                );
            }
            Ok(())
        }
        Command::Estimate { qs, r, alpha, beta } => {
            let s = load_surface(&qs)?.normalize_area();
            let a = load_curve(&s, &alpha)?;
            let b = load_curve(&s, &beta)?;
            let rep = flatsurf::ergodic::main_estimate(&s, r, &a, &b).map_err(|e| anyhow!("{e}"))?;
            println!("r,predicted,actual_lo,actual_hi,residual,normalized_residual,seed");
            println!(
                "{r},{},{},{},{},{},0",
                rep.predicted, rep.actual_lo, rep.actual_hi, rep.residual, rep.normalized_residual
            );
            Ok(())
        }
        Command::Itinerary {
            surface,
            horizon,
            rho,
            eps,
            s,
            delta,
            dt,
        } => {
            let surf = load_surface(&surface)?.normalize_area();
            let tr = flatsurf::ergodic::orbit_trace(&surf, horizon, dt, delta, s);
            let frac = flatsurf::ergodic::recurrence_fraction(&tr);
            let seq = flatsurf::ergodic::sample_itinerary(&tr, horizon, rho, s);
            let violations = flatsurf::ergodic::validate_itinerary(&seq, &tr, horizon, rho, eps, s);
            println!("excursion_fraction={frac}");
            println!(
                "itinerary={}",
                seq.iter()
                    .map(|x| format!("{x:.4}"))
                    .collect::<Vec<_>>()
                    .join(",")
            );
            if violations.is_empty() {
                println!("valid=true");
            } else {
                println!("valid=false");
                for v in violations {
                    println!("violation={:?}@{}", v.condition, v.index);
                }
            }
            Ok(())
        }
        Command::Traintrack { surface } => {
            let s = load_surface(&surface)?;
            let track = flatsurf::track::dual_train_track(&s);
            let w = flatsurf::track::vertical_counting_measure(&s);
            flatsurf::track::check_switch_conditions(&s, &track, &w, 1e-9)
                .map_err(|e| anyhow!("{e}"))?;
            println!("edge,weight");
            for (gid, weight) in w.iter().enumerate() {
                println!("{gid},{weight}");
            }
            println!("triangle,large_edge,admissible,maximal");
            for (t, label) in track.labels.iter().enumerate() {
                println!(
                    "{t},{},{:?},{}",
                    label.large, label.admissible, track.maximal
                );
            }
            Ok(())
        }
        Command::Batch { config } => batch::run_batch(&config),
    }
}

/// A deterministic non-horizontal curve class from a seeded trace.
fn default_curve(s: &HalfTranslationSurface, seed: u64) -> Result<CurveClass> {
    let gs = flatsurf::ergodic::random_nonhorizontal_geodesics(s, 1, seed);
    let g = gs
        .first()
        .ok_or_else(|| anyhow!("no non-horizontal curve found for seed {seed}"))?;
    CurveClass::new(s, g.word(s)).map_err(|e| anyhow!("{e}"))
}

/// A horizontal segment of the requested length from a seeded generic start,
/// retrying nearby starts on singularity hits.
pub fn horizontal_segment(
    s: &HalfTranslationSurface,
    length: f64,
    seed: u64,
) -> Result<flatsurf::linear::TracedSegment> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_add(17));
    for _ in 0..64 {
        let tri = rng.gen_range(0..s.num_triangles());
        let u: f64 = rng.gen_range(0.2..0.8);
        let v: f64 = rng.gen_range(0.1..(1.0 - u).max(0.11));
        let p = s.corner_pos(tri, 0)
            + u * (s.corner_pos(tri, 1) - s.corner_pos(tri, 0))
            + v * (s.corner_pos(tri, 2) - s.corner_pos(tri, 0));
        if let Ok(seg) = trace_ray(s, SurfacePoint { tri, pos: p }, vec2(1.0, 0.0), length) {
            if seg.hit.is_none() {
                return Ok(seg);
            }
        }
    }
    bail!("could not trace a horizontal segment of length {length}")
}
