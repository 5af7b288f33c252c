//! Text formats for surfaces and curves.
//!
//! Surface files are structured key/value:
//!
//! ```text
//! triangles: [[[x,y],[x,y],[x,y]], ...]
//! gluings: [[[ti,ei],[tj,ej],flip], ...]
//! ```
//!
//! Curve files carry a cyclic crossing word:
//!
//! ```text
//! curve: [[ti,ei],[tj,ej], ...]
//! ```
//!
//! All numbers are decimal; NaN and infinities are rejected.

use crate::geom::Vec2;
use crate::surface::{EdgeRef, Gluing, HalfTranslationSurface, SurfaceError};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("missing key `{0}`")]
    MissingKey(&'static str),
    #[error("malformed value for `{key}`: {msg}")]
    Malformed { key: &'static str, msg: String },
    #[error("non-finite number in `{0}`")]
    NonFinite(&'static str),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Extract the bracketed value following `key:`, possibly spanning lines.
fn extract(text: &str, key: &'static str) -> Result<Value, IoError> {
    let mut it = text.char_indices();
    let pat = format!("{key}:");
    let start = text.find(&pat).ok_or(IoError::MissingKey(key))? + pat.len();
    let _ = &mut it;
    let rest = &text[start..];
    let open = rest.find('[').ok_or_else(|| IoError::Malformed {
        key,
        msg: "expected `[`".into(),
    })?;
    let mut depth = 0usize;
    let bytes = rest.as_bytes();
    let mut end = None;
    for (i, &b) in bytes.iter().enumerate().skip(open) {
        match b {
            b'[' => depth += 1,
            b']' => {
                depth -= 1;
                if depth == 0 {
                    end = Some(i + 1);
                    break;
                }
            }
            _ => {}
        }
    }
    let end = end.ok_or_else(|| IoError::Malformed {
        key,
        msg: "unbalanced brackets".into(),
    })?;
    serde_json::from_str(&rest[open..end]).map_err(|e| IoError::Malformed {
        key,
        msg: e.to_string(),
    })
}

fn as_f64(v: &Value, key: &'static str) -> Result<f64, IoError> {
    let x = v.as_f64().ok_or_else(|| IoError::Malformed {
        key,
        msg: format!("expected number, got {v}"),
    })?;
    if !x.is_finite() {
        return Err(IoError::NonFinite(key));
    }
    Ok(x)
}

fn as_usize(v: &Value, key: &'static str) -> Result<usize, IoError> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| IoError::Malformed {
            key,
            msg: format!("expected non-negative integer, got {v}"),
        })
}

pub fn parse_surface(text: &str) -> Result<HalfTranslationSurface, IoError> {
    let tri_val = extract(text, "triangles")?;
    let glue_val = extract(text, "gluings")?;
    let key = "triangles";
    let tris_json = tri_val.as_array().ok_or_else(|| IoError::Malformed {
        key,
        msg: "expected array".into(),
    })?;
    let mut tris = Vec::with_capacity(tris_json.len());
    for t in tris_json {
        let edges = t.as_array().ok_or_else(|| IoError::Malformed {
            key,
            msg: "expected triangle array".into(),
        })?;
        if edges.len() != 3 {
            return Err(IoError::Malformed {
                key,
                msg: format!("triangle needs 3 edge vectors, got {}", edges.len()),
            });
        }
        let mut tri = [Vec2::zeros(); 3];
        for (i, e) in edges.iter().enumerate() {
            let xy = e.as_array().ok_or_else(|| IoError::Malformed {
                key,
                msg: "expected [x,y]".into(),
            })?;
            if xy.len() != 2 {
                return Err(IoError::Malformed {
                    key,
                    msg: "expected [x,y]".into(),
                });
            }
            tri[i] = Vec2::new(as_f64(&xy[0], key)?, as_f64(&xy[1], key)?);
        }
        tris.push(tri);
    }
    let key = "gluings";
    let glue_json = glue_val.as_array().ok_or_else(|| IoError::Malformed {
        key,
        msg: "expected array".into(),
    })?;
    let mut gluings = Vec::with_capacity(glue_json.len());
    for g in glue_json {
        let parts = g.as_array().ok_or_else(|| IoError::Malformed {
            key,
            msg: "expected [[ti,ei],[tj,ej],flip]".into(),
        })?;
        if parts.len() != 3 {
            return Err(IoError::Malformed {
                key,
                msg: "expected [[ti,ei],[tj,ej],flip]".into(),
            });
        }
        let side = |v: &Value| -> Result<EdgeRef, IoError> {
            let p = v.as_array().ok_or_else(|| IoError::Malformed {
                key,
                msg: "expected [t,e]".into(),
            })?;
            if p.len() != 2 {
                return Err(IoError::Malformed {
                    key,
                    msg: "expected [t,e]".into(),
                });
            }
            Ok(EdgeRef::new(as_usize(&p[0], key)?, as_usize(&p[1], key)?))
        };
        let flip = parts[2].as_bool().ok_or_else(|| IoError::Malformed {
            key,
            msg: "flip must be true/false".into(),
        })?;
        gluings.push(Gluing {
            a: side(&parts[0])?,
            b: side(&parts[1])?,
            flip,
        });
    }
    Ok(HalfTranslationSurface::build(tris, gluings)?)
}

pub fn write_surface(s: &HalfTranslationSurface) -> String {
    let mut out = String::from("triangles: [");
    for (i, _) in (0..s.num_triangles()).enumerate() {
        if i > 0 {
            out.push_str(",\n            ");
        }
        let t = s.triangle(i);
        out.push_str(&format!(
            "[[{:?},{:?}],[{:?},{:?}],[{:?},{:?}]]",
            t[0].x, t[0].y, t[1].x, t[1].y, t[2].x, t[2].y
        ));
    }
    out.push_str("]\ngluings: [");
    for (i, g) in s.gluings().iter().enumerate() {
        if i > 0 {
            out.push_str(",\n          ");
        }
        out.push_str(&format!(
            "[[{},{}],[{},{}],{}]",
            g.a.tri, g.a.edge, g.b.tri, g.b.edge, g.flip
        ));
    }
    out.push_str("]\n");
    out
}

/// A cyclic crossing word: the curve leaves triangle `ti` through edge `ei`.
pub fn parse_curve(text: &str) -> Result<Vec<(usize, usize)>, IoError> {
    let val = extract(text, "curve")?;
    let key = "curve";
    let arr = val.as_array().ok_or_else(|| IoError::Malformed {
        key,
        msg: "expected array".into(),
    })?;
    let mut word = Vec::with_capacity(arr.len());
    for c in arr {
        let p = c.as_array().ok_or_else(|| IoError::Malformed {
            key,
            msg: "expected [t,e]".into(),
        })?;
        if p.len() != 2 {
            return Err(IoError::Malformed {
                key,
                msg: "expected [t,e]".into(),
            });
        }
        word.push((as_usize(&p[0], key)?, as_usize(&p[1], key)?));
    }
    Ok(word)
}

pub fn write_curve(word: &[(usize, usize)]) -> String {
    let body: Vec<String> = word.iter().map(|(t, e)| format!("[{t},{e}]")).collect();
    format!("curve: [{}]\n", body.join(","))
}
