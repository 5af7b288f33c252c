//! Reference surfaces used across tests, experiments, and the CLI.
//!
//! Each fixture also ships as a data file under `fixtures/` (generated by
//! `cargo run --example gen_fixtures`); `load` reads those files so external
//! tooling exercises the same parser as everything else.

use crate::geom::{vec2, Vec2};
use crate::surface::{EdgeRef, Gluing, HalfTranslationSurface};
use std::path::PathBuf;

fn g(at: usize, ae: usize, bt: usize, be: usize, flip: bool) -> Gluing {
    Gluing {
        a: EdgeRef::new(at, ae),
        b: EdgeRef::new(bt, be),
        flip,
    }
}

/// Unit square torus, two triangles, marked vertex of angle 2π.
pub fn square_torus() -> HalfTranslationSurface {
    let t0 = [vec2(1.0, 0.0), vec2(0.0, 1.0), vec2(-1.0, -1.0)];
    let t1 = [vec2(1.0, 1.0), vec2(-1.0, 0.0), vec2(0.0, -1.0)];
    let gl = vec![
        g(0, 2, 1, 0, false), // diagonal
        g(0, 0, 1, 1, false), // bottom ~ top
        g(0, 1, 1, 2, false), // right ~ left
    ];
    HalfTranslationSurface::build(vec![t0, t1], gl).expect("square torus is valid")
}

/// L-shaped surface made of three unit squares (genus 2, one cone of angle 6π).
///
/// Squares at (0,0), (1,0), (0,1); opposite horizontal and vertical boundary
/// pieces identified by translations. Square `k` contributes triangles `2k`
/// (lower) and `2k+1` (upper).
pub fn l_shaped_3() -> HalfTranslationSurface {
    let lower = [vec2(1.0, 0.0), vec2(0.0, 1.0), vec2(-1.0, -1.0)];
    let upper = [vec2(1.0, 1.0), vec2(-1.0, 0.0), vec2(0.0, -1.0)];
    let tris = vec![lower, upper, lower, upper, lower, upper];
    let gl = vec![
        // diagonals
        g(0, 2, 1, 0, false),
        g(2, 2, 3, 0, false),
        g(4, 2, 5, 0, false),
        // interior vertical x=1 (square0 right ~ square1 left)
        g(0, 1, 3, 2, false),
        // outer vertical: square1 right ~ square0 left
        g(2, 1, 1, 2, false),
        // interior horizontal y=1 (square0 top ~ square2 bottom)
        g(1, 1, 4, 0, false),
        // square1 top ~ square1 bottom
        g(3, 1, 2, 0, false),
        // square2 top ~ square0 bottom
        g(5, 1, 0, 0, false),
        // square2 right ~ square2 left
        g(4, 1, 5, 2, false),
    ];
    HalfTranslationSurface::build(tris, gl).expect("L3 is valid")
}

/// Regular octagon with side 1 and opposite sides identified (genus 2, one
/// cone of angle 6π). Triangulated as a fan from one vertex.
pub fn octagon() -> HalfTranslationSurface {
    let r = 1.0 / (2.0 * (std::f64::consts::PI / 8.0).sin());
    let v: Vec<Vec2> = (0..8)
        .map(|k| {
            let th = (2.0 * k as f64 + 1.0) * std::f64::consts::PI / 8.0;
            vec2(r * th.cos(), r * th.sin())
        })
        .collect();
    // Fan triangles (v0, v_{j+1}, v_{j+2}) for j = 0..5.
    let tris: Vec<[Vec2; 3]> = (0..6)
        .map(|j| {
            let a = v[0];
            let b = v[j + 1];
            let c = v[j + 2];
            [b - a, c - b, a - c]
        })
        .collect();
    let mut gl = vec![
        // opposite octagon sides s_k ~ s_{k+4}
        g(0, 0, 3, 1, false), // s0 ~ s4
        g(0, 1, 4, 1, false), // s1 ~ s5
        g(1, 1, 5, 1, false), // s2 ~ s6
        g(2, 1, 5, 2, false), // s3 ~ s7
    ];
    for j in 1..6 {
        gl.push(g(j - 1, 2, j, 0, false)); // fan diagonals
    }
    HalfTranslationSurface::build(tris, gl).expect("octagon is valid")
}

/// Genus-2 surface in the principal stratum: four simple zeroes of angle 3π.
///
/// Built as a connected triple cover of the doubled 1 × ½ rectangle (a flat
/// sphere with four π-cones), totally branched over all four cones. Front
/// sheets carry the rectangle chart `[0,1]×[0,½]`, back sheets the reflected
/// chart `[0,1]×[-½,0]`; left/right edge identifications are flips.
///
/// Rectangle `i` of each kind contributes triangles `4i` (front lower), `4i+1`
/// (front upper), `4i+2` (back lower), `4i+3` (back upper).
pub fn pillowcase_triple() -> HalfTranslationSurface {
    let f_lo = [vec2(1.0, 0.0), vec2(0.0, 0.5), vec2(-1.0, -0.5)];
    let f_up = [vec2(1.0, 0.5), vec2(-1.0, 0.0), vec2(0.0, -0.5)];
    // Back charts live in [0,1]×[-1/2,0]; same edge vectors, shifted corners.
    let b_lo = f_lo;
    let b_up = f_up;
    let mut tris = Vec::new();
    for _ in 0..3 {
        tris.push(f_lo);
        tris.push(f_up);
        tris.push(b_lo);
        tris.push(b_up);
    }
    // Monodromies (0-based 3-cycles): bottom = id, right = left = (0 1 2),
    // top = (0 2 1). Every corner of the base pillowcase then has 3-cycle
    // monodromy, giving four 3π cones upstairs.
    let sr = [1usize, 2, 0];
    let sl = [1usize, 2, 0];
    let st = [2usize, 0, 1];
    let mut gl = Vec::new();
    for i in 0..3 {
        gl.push(g(4 * i, 2, 4 * i + 1, 0, false)); // front diagonal
        gl.push(g(4 * i + 2, 2, 4 * i + 3, 0, false)); // back diagonal
        gl.push(g(4 * i, 0, 4 * i + 3, 1, false)); // bottom: F_i ~ B_i
        gl.push(g(4 * i + 1, 1, 4 * st[i] + 2, 0, false)); // top: F_i ~ B_{st(i)}
        gl.push(g(4 * i, 1, 4 * sr[i] + 2, 1, true)); // right: flip
        gl.push(g(4 * i + 1, 2, 4 * sl[i] + 3, 2, true)); // left: flip
    }
    HalfTranslationSurface::build(tris, gl).expect("pillowcase triple cover is valid")
}

pub const FIXTURE_NAMES: [&str; 4] = ["square_torus", "l_shaped_3", "octagon", "pillowcase_triple"];

pub fn by_name(name: &str) -> Option<HalfTranslationSurface> {
    match name {
        "square_torus" => Some(square_torus()),
        "l_shaped_3" => Some(l_shaped_3()),
        "octagon" => Some(octagon()),
        "pillowcase_triple" => Some(pillowcase_triple()),
        _ => None,
    }
}

/// Directory holding the fixture data files.
pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn fixture_path(name: &str) -> PathBuf {
    fixture_dir().join(format!("{name}.surf"))
}

/// Load a fixture from its data file.
pub fn load(name: &str) -> HalfTranslationSurface {
    let path = fixture_path(name);
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("cannot read fixture {path:?}: {e}"));
    crate::io::parse_surface(&text).unwrap_or_else(|e| panic!("bad fixture {path:?}: {e}"))
}
