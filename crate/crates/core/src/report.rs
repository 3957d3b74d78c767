//! Reproduction tables for the published numbers, and the run manifest
//! written at the top of every result file.

use serde::Serialize;

use crate::design::efficiency;
use crate::error::Result;
use crate::fisher::{trend_information, trend_information_equidistant};
use crate::model::{CovarianceParams, GridDesign, MonotoneDesign, Point};
use crate::oracle::{grid_trend_information, trend_information_oracle};

/// Provenance and settings of one CLI run, rendered as `#` comment lines.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: Vec<(String, String)>,
    /// `(path, sha256 hex)` of every input file.
    pub inputs: Vec<(String, String)>,
    pub version: String,
    pub seeds: Vec<u64>,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(command: impl Into<String>, timestamp: impl Into<String>) -> Self {
        Self {
            command: command.into(),
            version: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
            timestamp: timestamp.into(),
            ..Self::default()
        }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.parameters.push((key.to_string(), value.to_string()));
        self
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# command: {}\n", self.command));
        out.push_str(&format!("# version: {}\n", self.version));
        out.push_str(&format!("# timestamp: {}\n", self.timestamp));
        for s in &self.seeds {
            out.push_str(&format!("# seed: {s}\n"));
        }
        for (k, v) in &self.parameters {
            out.push_str(&format!("# param {k}: {v}\n"));
        }
        for (path, hash) in &self.inputs {
            out.push_str(&format!("# input {path}: sha256={hash}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    /// Within the tolerance implied by the printed digits.
    Match,
    /// Outside the tolerance with no known explanation.
    Mismatch,
    /// A documented discrepancy, reported rather than asserted.
    Annotated,
    /// The published inputs are not available.
    Unavailable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub section: &'static str,
    pub quantity: String,
    /// The number exactly as printed.
    pub printed: Option<&'static str>,
    pub recomputed: Option<f64>,
    pub difference: Option<f64>,
    pub tolerance: Option<f64>,
    pub status: RowStatus,
    pub note: String,
}

/// `5e-4` for numbers printed with at most three decimals, otherwise five
/// units in the last printed digit.
pub fn printed_tolerance(printed: &str) -> f64 {
    let decimals = printed.split_once('.').map_or(0, |(_, f)| f.len());
    if decimals <= 3 {
        5e-4
    } else {
        5.0 * 10f64.powi(-(decimals as i32))
    }
}

fn row(section: &'static str, quantity: impl Into<String>, printed: &'static str, value: f64) -> TableRow {
    let published: f64 = printed.parse().expect("printed number");
    let tol = printed_tolerance(printed);
    let diff = (value - published).abs();
    TableRow {
        section,
        quantity: quantity.into(),
        printed: Some(printed),
        recomputed: Some(value),
        difference: Some(diff),
        tolerance: Some(tol),
        status: if diff < tol {
            RowStatus::Match
        } else {
            RowStatus::Mismatch
        },
        note: String::new(),
    }
}

fn annotated(mut r: TableRow, note: impl Into<String>) -> TableRow {
    r.status = RowStatus::Annotated;
    r.note = note.into();
    r
}

fn noted(mut r: TableRow, note: impl Into<String>) -> TableRow {
    r.note = note.into();
    r
}

fn info_row(section: &'static str, quantity: impl Into<String>, value: f64, note: impl Into<String>) -> TableRow {
    TableRow {
        section,
        quantity: quantity.into(),
        printed: None,
        recomputed: Some(value),
        difference: None,
        tolerance: None,
        status: RowStatus::Annotated,
        note: note.into(),
    }
}

/// Time coordinates of the scattered highway design.
pub const HIGHWAY_TIMES: [f64; 16] = [
    1.35, 3.66, 1.86, 0.996, 0.89, 1.56, 3.37, 2.189, 0.5157, 2.58, 0.058, 0.32, 0.58, 1.4, 0.36, 1.82,
];
/// Place coordinates (miles) of the scattered highway design, paired with
/// [`HIGHWAY_TIMES`] in order.
pub const HIGHWAY_LENGTHS: [f64; 16] = [
    0.64, 0.37, 1.2, 0.91, 1.34, 2.82, 2.56, 2.44, 0.257, 2.568, 2.223, 0.66, 2.298, 2.814, 2.75, 1.61,
];

pub fn highway_scattered_points() -> Vec<Point> {
    HIGHWAY_TIMES
        .iter()
        .zip(&HIGHWAY_LENGTHS)
        .map(|(&t, &s)| Point::new(s, t))
        .collect()
}

/// The sixteen-point monotone design with steps `Δt = 0.25`, `Δs = 0.2`.
pub fn highway_monotone_design() -> MonotoneDesign {
    MonotoneDesign::from_increments(Point::new(0.0, 0.0), vec![0.25; 15], vec![0.2; 15]).expect("valid increments")
}

/// The 16×16 grid with the same steps.
pub fn highway_grid() -> GridDesign {
    let t = (0..16).map(|i| 0.25 * i as f64).collect();
    let s = (0..16).map(|i| 0.2 * i as f64).collect();
    GridDesign::new(t, s).expect("valid grid")
}

/// `(α, β)` of the three rows of the highway efficiency table.
pub const HIGHWAY_PARAMS: [(f64, f64); 3] = [(1.0, 1.0), (1.0, 10.0), (10.0, 1.0)];
const HIGHWAY_PRINTED: [[&str; 3]; 3] = [
    ["4.319177", "4.374803", "0.987285"],
    ["13.13952", "17.85041", "0.7360907"],
    ["14.1108", "21.20754", "0.6653671"],
];

/// The values behind one row of the highway efficiency table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HighwayRow {
    pub alpha: f64,
    pub beta: f64,
    pub m_theta: f64,
    pub max_m_theta: f64,
    pub efficiency: f64,
    pub grid_kronecker: f64,
    pub grid_dense: f64,
}

pub fn highway_row(alpha: f64, beta: f64) -> Result<HighwayRow> {
    let p = CovarianceParams::correlation(alpha, beta)?;
    let m_theta = trend_information(&highway_monotone_design(), &p);
    let max_m_theta = trend_information_equidistant(256, 3.75 * alpha + 3.0 * beta)?;
    let grid = highway_grid();
    Ok(HighwayRow {
        alpha,
        beta,
        m_theta,
        max_m_theta,
        efficiency: efficiency(m_theta, max_m_theta)?,
        grid_kronecker: grid_trend_information(&grid, &p)?,
        grid_dense: trend_information_oracle(&grid.points(), &p)?,
    })
}

/// Four-point example: equidistant value, vertex grid and efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FourPointExample {
    pub equidistant: f64,
    pub vertex_grid: f64,
    pub efficiency: f64,
    /// The closed form as printed, `4/(1 + e^{−2x} + e^{−x})` at `x = 1`.
    pub printed_formula: f64,
    /// The Kronecker identity `4/(1 + e^{−x})²` at `x = 1`.
    pub kronecker_formula: f64,
}

pub fn four_point_example() -> Result<FourPointExample> {
    let p = CovarianceParams::correlation(1.0, 1.0)?;
    let equidistant = trend_information_equidistant(4, 2.0)?;
    let grid = GridDesign::new(vec![0.0, 1.0], vec![0.0, 1.0])?;
    let vertex_grid = trend_information_oracle(&grid.points(), &p)?;
    let e = (-1.0f64).exp();
    Ok(FourPointExample {
        equidistant,
        vertex_grid,
        efficiency: efficiency(equidistant, vertex_grid)?,
        printed_formula: 4.0 / (1.0 + e * e + e),
        kronecker_formula: 4.0 / (1.0 + e).powi(2),
    })
}

/// Highway comparison numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HighwayExample {
    pub condition_d_64: f64,
    pub scattered: f64,
    pub max_64_512: f64,
    /// Against the scattered design's computed information.
    pub efficiency_oracle: f64,
    /// Against the rounded `5.2` as printed.
    pub efficiency_printed: f64,
    /// The sixteen-point monotone design against the scattered design.
    pub monotone_vs_scattered: f64,
}

pub fn highway_example() -> Result<HighwayExample> {
    let p = CovarianceParams::correlation(1.0, 1.0)?;
    let scattered = trend_information_oracle(&highway_scattered_points(), &p)?;
    let max_64_512 = trend_information_equidistant(64, 5.12)?;
    let m16 = trend_information(&highway_monotone_design(), &p);
    Ok(HighwayExample {
        condition_d_64: trend_information_equidistant(64, 7.2)?,
        scattered,
        max_64_512,
        efficiency_oracle: efficiency(max_64_512, scattered)?,
        efficiency_printed: efficiency(max_64_512, 5.2)?,
        monotone_vs_scattered: efficiency(m16, scattered)?,
    })
}

/// Every published number next to its recomputation.
pub fn tables() -> Result<Vec<TableRow>> {
    let mut rows = Vec::new();

    let four = four_point_example()?;
    rows.push(row(
        "4",
        "M_theta(n=4, lambda=2), equidistant",
        "1.965",
        four.equidistant,
    ));
    rows.push(annotated(
        row(
            "4",
            "M_theta, vertices of [0,1]^2, alpha=beta=1",
            "2.13",
            four.vertex_grid,
        ),
        "printed value is truncated; dense and Kronecker evaluation agree on 2.13779",
    ));
    rows.push(annotated(
        row(
            "4",
            "printed closed form 4/(1+e^-2x+e^-x) at x=1",
            "2.13",
            four.printed_formula,
        ),
        format!(
            "formula as printed gives {:.5}; 4/(1+e^-x)^2 = {:.5} matches the printed value",
            four.printed_formula, four.kronecker_formula
        ),
    ));
    rows.push(row(
        "4",
        "efficiency equidistant / vertex grid",
        "0.919",
        four.efficiency,
    ));

    let hw = highway_example()?;
    rows.push(row("7", "M_theta(n=64, lambda=7.2)", "4.596", hw.condition_d_64));
    rows.push(noted(
        row("7", "M_theta, 16 scattered points", "5.2", hw.scattered),
        "times and lengths paired in listed order",
    ));
    rows.push(noted(
        row("7", "max M_theta(n=64, lambda=5.12)", "3.558592", hw.max_64_512),
        "lambda=5.12 taken as given; it does not follow from the listed coordinates",
    ));
    rows.push(annotated(
        row(
            "7",
            "efficiency max(64, 5.12) / scattered, computed reference",
            "0.6843446",
            hw.efficiency_oracle,
        ),
        format!("reference M_theta = {:.7} from the listed points", hw.scattered),
    ));
    rows.push(noted(
        row(
            "7",
            "efficiency max(64, 5.12) / 5.2, printed reference",
            "0.6843446",
            hw.efficiency_printed,
        ),
        "the published ratio uses the rounded 5.2",
    ));
    rows.push(annotated(
        row(
            "7",
            "efficiency of the 16-point monotone design",
            "0.8275795",
            hw.monotone_vs_scattered,
        ),
        format!(
            "published ratio implies a reference of {:.6}; the table below uses max M_theta instead",
            4.319177 / 0.8275795
        ),
    ));

    for (&(a, b), printed) in HIGHWAY_PARAMS.iter().zip(HIGHWAY_PRINTED) {
        let r = highway_row(a, b)?;
        let label = format!("alpha={a}, beta={b}");
        rows.push(noted(
            row("table 2", format!("M_theta, {label}"), printed[0], r.m_theta),
            "16-point monotone design, steps 0.25 x 0.2",
        ));
        rows.push(noted(
            row("table 2", format!("max M_theta, {label}"), printed[1], r.max_m_theta),
            "equidistant design, n=256, lambda=3.75 alpha + 3 beta",
        ));
        rows.push(row("table 2", format!("efficiency, {label}"), printed[2], r.efficiency));
        rows.push(info_row(
            "table 2",
            format!("M_theta, 16x16 grid (Kronecker), {label}"),
            r.grid_kronecker,
            format!(
                "the table's caption speaks of a 256-point grid; this grid has M_theta above the monotone maximum {:.6}; dense value {:.10}",
                r.max_m_theta, r.grid_dense
            ),
        ));
    }

    rows.push(TableRow {
        section: "table 1",
        quantity: "thermal example rows".into(),
        printed: None,
        recomputed: None,
        difference: None,
        tolerance: None,
        status: RowStatus::Unavailable,
        note: "inputs unavailable: the design coordinates are only shown graphically".into(),
    });
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_from_printed_digits() {
        assert_eq!(printed_tolerance("1.965"), 5e-4);
        assert_eq!(printed_tolerance("5.2"), 5e-4);
        assert!((printed_tolerance("3.558592") - 5e-6).abs() < 1e-20);
    }

    #[test]
    fn tables_have_no_unexplained_mismatch() {
        let rows = tables().unwrap();
        assert!(rows.iter().all(|r| r.status != RowStatus::Mismatch), "{rows:#?}");
        assert_eq!(
            rows.iter()
                .filter(|r| r.section == "table 2" && r.status == RowStatus::Match)
                .count(),
            9
        );
        assert!(rows.iter().any(|r| r.status == RowStatus::Unavailable));
    }

    #[test]
    fn grid_routes_agree() {
        for (a, b) in HIGHWAY_PARAMS {
            let r = highway_row(a, b).unwrap();
            assert!((r.grid_kronecker - r.grid_dense).abs() < 1e-9 * r.grid_dense);
        }
    }

    #[test]
    fn manifest_lines_are_comments() {
        let mut m = RunManifest::new("tables", "2024-01-01T00:00:00Z").param("alpha", 1.0);
        m.seeds.push(7);
        m.inputs.push(("d.json".into(), "ab".into()));
        assert!(m.render().lines().all(|l| l.starts_with("# ")));
        assert!(m.render().contains("# seed: 7"));
    }
}
