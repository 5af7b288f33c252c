//! Regenerate the fixture data files (surfaces and reference curves) from the
//! in-code constructors.

use flatsurf::geodesic::word_of_trace;
use flatsurf::geom::vec2;
use flatsurf::linear::trace_ray;
use flatsurf::{fixtures, io, SurfacePoint};

fn main() {
    let dir = fixtures::fixture_dir();
    std::fs::create_dir_all(&dir).expect("create fixtures dir");
    for name in fixtures::FIXTURE_NAMES {
        let s = fixtures::by_name(name).unwrap();
        let path = fixtures::fixture_path(name);
        std::fs::write(&path, io::write_surface(&s)).expect("write fixture");
        println!(
            "wrote {path:?}: genus {}, area {:.6}, stratum {:?}",
            s.genus(),
            s.area(),
            s.stratum_signature()
        );
    }
    // Reference curve words, authored by tracing closed straight lines.
    let torus = fixtures::square_torus();
    let l3 = fixtures::l_shaped_3();
    let curves: [(&str, &flatsurf::HalfTranslationSurface, (f64, f64), (f64, f64), f64); 4] = [
        ("torus_10", &torus, (0.43, 0.17), (1.0, 0.0), 1.0),
        ("torus_23", &torus, (0.31, 0.17), (2.0, 3.0), (13.0f64).sqrt()),
        ("l3_horizontal_core", &l3, (0.4, 0.3), (1.0, 0.0), 2.0),
        ("l3_vertical_core", &l3, (0.6, 0.2), (0.0, 1.0), 2.0),
    ];
    for (name, s, start, dir_v, len) in curves {
        let seg = trace_ray(
            s,
            SurfacePoint {
                tri: 0,
                pos: vec2(start.0, start.1),
            },
            vec2(dir_v.0, dir_v.1),
            len,
        )
        .expect("trace");
        assert!(seg.hit.is_none());
        assert_eq!(seg.end.tri, 0, "curve word must close");
        let word = word_of_trace(&seg);
        let path = dir.join(format!("{name}.curve"));
        std::fs::write(&path, io::write_curve(&word)).expect("write curve");
        println!("wrote {path:?}: {} crossings", word.len());
    }
}
