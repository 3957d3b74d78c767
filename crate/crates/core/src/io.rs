//! JSON design files.
//!
//! ```json
//! {"type": "monotone", "points": [[s, t], ...]}
//! {"type": "monotone", "origin": [s, t], "d": [...], "delta": [...]}
//! {"type": "grid", "points": [[s, t], ...]}
//! {"type": "scattered", "points": [[s, t], ...]}
//! ```
//!
//! Coordinates are `[s, t]`; `d` holds t-increments and `delta`
//! s-increments. Parameters are never stored in design files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_condition_d_with, ConditionDOptions, GridDesign, MonotoneDesign, Point, ScatteredDesign};

#[derive(Debug, Clone, PartialEq)]
pub enum DesignFile {
    Monotone(MonotoneDesign),
    Grid(GridDesign),
    Scattered(ScatteredDesign),
}

impl DesignFile {
    pub fn kind(&self) -> &'static str {
        match self {
            DesignFile::Monotone(_) => "monotone",
            DesignFile::Grid(_) => "grid",
            DesignFile::Scattered(_) => "scattered",
        }
    }

    pub fn points(&self) -> Vec<Point> {
        match self {
            DesignFile::Monotone(m) => m.points().to_vec(),
            DesignFile::Grid(g) => g.points(),
            DesignFile::Scattered(s) => s.points().to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            DesignFile::Monotone(m) => m.len(),
            DesignFile::Grid(g) => g.len(),
            DesignFile::Scattered(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDesign {
    #[serde(rename = "type")]
    kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Monotone,
    Grid,
    Scattered,
}

fn to_points(raw: Vec<[f64; 2]>) -> Vec<Point> {
    raw.into_iter().map(Point::from).collect()
}

pub fn parse_design(text: &str) -> Result<DesignFile> {
    parse_design_with(text, ConditionDOptions::default())
}

pub fn parse_design_with(text: &str, opts: ConditionDOptions) -> Result<DesignFile> {
    let raw: RawDesign = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let shape_err = |msg: &str| Error::InvalidDesign(msg.to_string());
    match raw.kind {
        Kind::Monotone => match (raw.points, raw.origin, raw.d, raw.delta) {
            (Some(p), None, None, None) => Ok(DesignFile::Monotone(validate_condition_d_with(&to_points(p), opts)?)),
            // every information value depends on the increments only, so
            // the origin of the increment form is not positivity-checked
            (None, Some(o), Some(d), Some(delta)) => {
                let origin = Point::from(o);
                if !(origin.s.is_finite() && origin.t.is_finite()) {
                    return Err(shape_err("origin must be finite"));
                }
                Ok(DesignFile::Monotone(MonotoneDesign::from_increments(origin, d, delta)?))
            }
            _ => Err(shape_err(
                "monotone design needs either \"points\" or \"origin\", \"d\" and \"delta\"",
            )),
        },
        Kind::Grid | Kind::Scattered => {
            if raw.origin.is_some() || raw.d.is_some() || raw.delta.is_some() {
                return Err(shape_err("increment form is only valid for monotone designs"));
            }
            let pts = to_points(raw.points.ok_or_else(|| shape_err("missing \"points\""))?);
            if pts.is_empty() {
                return Err(shape_err("design has no points"));
            }
            match raw.kind {
                Kind::Grid => Ok(DesignFile::Grid(GridDesign::from_points(&pts)?)),
                _ => Ok(DesignFile::Scattered(ScatteredDesign::new(pts)?)),
            }
        }
    }
}

/// Monotone designs are written in increment form so that re-reading
/// reproduces the increments, and with them every information value, bit
/// for bit.
pub fn write_design(design: &DesignFile) -> String {
    let raw = match design {
        DesignFile::Monotone(m) => RawDesign {
            kind: Kind::Monotone,
            points: None,
            origin: Some([m.origin().s, m.origin().t]),
            d: Some(m.d().to_vec()),
            delta: Some(m.delta().to_vec()),
        },
        DesignFile::Grid(g) => RawDesign {
            kind: Kind::Grid,
            points: Some(g.points().iter().map(|p| [p.s, p.t]).collect()),
            origin: None,
            d: None,
            delta: None,
        },
        DesignFile::Scattered(s) => RawDesign {
            kind: Kind::Scattered,
            points: Some(s.points().iter().map(|p| [p.s, p.t]).collect()),
            origin: None,
            d: None,
            delta: None,
        },
    };
    let mut out = serde_json::to_string_pretty(&raw).expect("design serializes");
    out.push('\n');
    out
}

pub fn read_design_file(path: &Path, opts: ConditionDOptions) -> Result<DesignFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_design_with(&text, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fisher;
    use crate::model::CovarianceParams;

    #[test]
    fn monotone_points_form() {
        let f = parse_design(r#"{"type": "monotone", "points": [[0.1, 0.2], [0.3, 0.5], [0.4, 0.9]]}"#).unwrap();
        let DesignFile::Monotone(m) = f else { panic!() };
        assert_eq!(m.len(), 3);
        assert_eq!(m.points()[2], Point::new(0.4, 0.9));
    }

    #[test]
    fn monotone_round_trip_is_exact() {
        let m = MonotoneDesign::from_increments(Point::new(0.1, 0.2), vec![0.1, 0.3, 0.7], vec![0.25, 1.0 / 3.0, 0.2])
            .unwrap();
        let p = CovarianceParams::new(1.3, 0.4, 1.0).unwrap();
        let back = parse_design(&write_design(&DesignFile::Monotone(m.clone()))).unwrap();
        let DesignFile::Monotone(b) = back else { panic!() };
        assert_eq!(b, m);
        assert_eq!(
            fisher::evaluate(&b, &p, None).unwrap(),
            fisher::evaluate(&m, &p, None).unwrap()
        );
    }

    #[test]
    fn grid_and_scattered_round_trip() {
        let g = DesignFile::Grid(GridDesign::new(vec![0.0, 1.0], vec![0.0, 0.5, 1.0]).unwrap());
        assert_eq!(parse_design(&write_design(&g)).unwrap(), g);
        let s = DesignFile::Scattered(ScatteredDesign::new(vec![Point::new(1.0, 0.0), Point::new(0.0, 1.0)]).unwrap());
        assert_eq!(parse_design(&write_design(&s)).unwrap(), s);
    }

    #[test]
    fn parse_errors_carry_positions() {
        let err = parse_design("{\n  \"type\": \"monotone\",\n  \"points\": [[1, 2], [3 4]]\n}").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e:?}"),
        }
        assert!(matches!(
            parse_design(r#"{"type": "hexagonal", "points": []}"#),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn semantic_errors_pass_through() {
        assert!(matches!(
            parse_design(r#"{"type": "monotone", "points": [[0.1, 0.2], [0.05, 0.5]]}"#),
            Err(Error::ConditionDViolation { .. })
        ));
        assert!(matches!(
            parse_design(r#"{"type": "grid", "points": [[0, 0], [1, 1]]}"#),
            Err(Error::InvalidDesign(_))
        ));
        assert!(parse_design(r#"{"type": "monotone", "points": [[0, 0], [1, 1]]}"#).is_err());
        let ok = parse_design_with(
            r#"{"type": "monotone", "points": [[0, 0], [1, 1]]}"#,
            ConditionDOptions {
                allow_nonpositive_origin: true,
            },
        );
        assert!(ok.is_ok());
        assert!(parse_design(r#"{"type": "monotone", "origin": [0, 0], "d": [1], "delta": [1]}"#).is_ok());
        assert!(parse_design(r#"{"type": "monotone", "origin": [0, 0], "d": [1, 0], "delta": [1, 1]}"#).is_err());
    }
}
