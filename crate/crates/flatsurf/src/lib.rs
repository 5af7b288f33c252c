//! Computations with half-translation surfaces (quadratic differentials):
//! flat geodesic representatives of closed curves, certified intersection
//! bounds, rectangular decompositions, immersed collars with bump functions,
//! Teichmüller-flow recurrence and itinerary machinery, train tracks dual to
//! triangulations, and equidistribution experiments.

pub mod collar;
pub mod ergodic;
pub mod fixtures;
pub mod geodesic;
pub mod geom;
pub mod io;
pub mod linear;
pub mod rect;
pub mod saddle;
pub mod surface;
pub mod track;

pub use geom::{Vec2, EPS_ANG, EPS_GEOM};
pub use surface::{EdgeRef, Gluing, HalfTranslationSurface, SurfacePoint};
