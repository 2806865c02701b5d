//! JSON file formats for problems, realizations, coefficient sets and
//! verified solutions. The grammar is documented in `docs/FORMAT.md`.
//!
//! Complex entries are `[re, im]` pairs and every matrix is a list of rows.
//! Dimensions are always stated explicitly and checked against the entries.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::coefficients::{CoefficientSet, RedhefferCoefficients};
use crate::error::{Error, Result};
use crate::leech::LeechData;
use crate::matrix::{c64, zeros, CMatrix};
use crate::realization::Realization;
use crate::verify::SolutionReport;

pub const PROBLEM_FORMAT: &str = "leech-problem/1";
pub const REALIZATION_FORMAT: &str = "leech-realization/1";
pub const COEFFICIENTS_FORMAT: &str = "leech-coefficients/1";
pub const SOLUTION_FORMAT: &str = "leech-solution/1";
pub const ORACLE_FORMAT: &str = "leech-oracle/1";

pub type MatrixRepr = Vec<Vec<[f64; 2]>>;

pub fn encode_matrix(m: &CMatrix) -> MatrixRepr {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

/// Decodes `repr` as a `rows x cols` matrix; `field` names it in diagnostics.
pub fn decode_matrix(repr: &MatrixRepr, rows: usize, cols: usize, field: &str) -> Result<CMatrix> {
    if repr.len() != rows {
        return Err(Error::Parse(format!("field {field}: {} rows, expected {rows}", repr.len())));
    }
    let mut out = zeros(rows, cols);
    for (i, row) in repr.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::Parse(format!(
                "field {field}: row {} has {} entries, expected {cols}",
                i + 1,
                row.len()
            )));
        }
        for (j, &[re, im]) in row.iter().enumerate() {
            if !re.is_finite() || !im.is_finite() {
                return Err(Error::Parse(format!("field {field}: entry ({}, {}) is not finite", i + 1, j + 1)));
            }
            out[(i, j)] = c64(re, im);
        }
    }
    Ok(out)
}

fn check_format(found: &str, expected: &str) -> Result<()> {
    if found != expected {
        return Err(Error::Parse(format!("field format: \"{found}\", expected \"{expected}\"")));
    }
    Ok(())
}

fn parse_json<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T> {
    serde_json::from_str(text)
        .map_err(|e| Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))
}

/// Pretty JSON with each matrix row, and anything else free of objects and no
/// deeper than a row, kept on one line.
fn to_json<T: Serialize>(value: &T) -> String {
    let value = serde_json::to_value(value).expect("file structures always serialize");
    let mut out = String::new();
    render(&value, 0, &mut out);
    out.push('\n');
    out
}

fn depth(v: &Value) -> Option<usize> {
    match v {
        Value::Object(_) => None,
        Value::Array(items) => items.iter().try_fold(1, |d, x| Some(d.max(1 + depth(x)?))),
        _ => Some(0),
    }
}

fn render(v: &Value, indent: usize, out: &mut String) {
    let pad = |n: usize| " ".repeat(n);
    match v {
        Value::Object(map) if !map.is_empty() => {
            out.push_str("{\n");
            for (i, (key, val)) in map.iter().enumerate() {
                out.push_str(&format!("{}{}: ", pad(indent + 2), Value::String(key.clone())));
                render(val, indent + 2, out);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
        Value::Array(items) if depth(v).is_none_or(|d| d > 2) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad(indent + 2));
                render(item, indent + 2, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        other => out.push_str(&other.to_string()),
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemDims {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub q: usize,
}

/// Optional solver settings stored with a problem.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
}

/// Provenance of generated problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorInfo {
    pub seed: u64,
    pub kind: String,
    /// Absent when `K = 0`, which has no critical size.
    pub critical_scale: Option<f64>,
    pub applied_scale: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemRepr {
    format: String,
    dims: ProblemDims,
    #[serde(rename = "A")]
    a: MatrixRepr,
    #[serde(rename = "B1")]
    b1: MatrixRepr,
    #[serde(rename = "B2")]
    b2: MatrixRepr,
    #[serde(rename = "C")]
    c: MatrixRepr,
    #[serde(rename = "D1")]
    d1: MatrixRepr,
    #[serde(rename = "D2")]
    d2: MatrixRepr,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    options: Option<ProblemOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    generator: Option<GeneratorInfo>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    pub data: LeechData,
    pub options: ProblemOptions,
    pub generator: Option<GeneratorInfo>,
}

impl ProblemFile {
    pub fn new(data: LeechData) -> Self {
        ProblemFile { data, options: ProblemOptions::default(), generator: None }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let r: ProblemRepr = parse_json(text)?;
        check_format(&r.format, PROBLEM_FORMAT)?;
        let ProblemDims { n, m, p, q } = r.dims;
        let data = LeechData::new(
            decode_matrix(&r.a, n, n, "A")?,
            decode_matrix(&r.b1, n, p, "B1")?,
            decode_matrix(&r.b2, n, q, "B2")?,
            decode_matrix(&r.c, m, n, "C")?,
            decode_matrix(&r.d1, m, p, "D1")?,
            decode_matrix(&r.d2, m, q, "D2")?,
        )?;
        Ok(ProblemFile { data, options: r.options.unwrap_or_default(), generator: r.generator })
    }

    pub fn to_json(&self) -> String {
        let d = self.data.dims();
        let options = (self.options != ProblemOptions::default()).then(|| self.options.clone());
        to_json(&ProblemRepr {
            format: PROBLEM_FORMAT.into(),
            dims: ProblemDims { n: d.n, m: d.m, p: d.p, q: d.q },
            a: encode_matrix(&self.data.a),
            b1: encode_matrix(&self.data.b1),
            b2: encode_matrix(&self.data.b2),
            c: encode_matrix(&self.data.c),
            d1: encode_matrix(&self.data.d1),
            d2: encode_matrix(&self.data.d2),
            options,
            generator: self.generator.clone(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RealizationDims {
    pub states: usize,
    pub inputs: usize,
    pub outputs: usize,
}

/// A realization `D + z C (I - zA)^{-1} B` as stored in files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealizationRepr {
    pub dims: RealizationDims,
    #[serde(rename = "A")]
    pub a: MatrixRepr,
    #[serde(rename = "B")]
    pub b: MatrixRepr,
    #[serde(rename = "C")]
    pub c: MatrixRepr,
    #[serde(rename = "D")]
    pub d: MatrixRepr,
}

impl RealizationRepr {
    pub fn encode(f: &Realization) -> Self {
        RealizationRepr {
            dims: RealizationDims { states: f.states(), inputs: f.inputs(), outputs: f.outputs() },
            a: encode_matrix(&f.a),
            b: encode_matrix(&f.b),
            c: encode_matrix(&f.c),
            d: encode_matrix(&f.d),
        }
    }

    /// `prefix` qualifies field names in diagnostics.
    pub fn decode(&self, prefix: &str) -> Result<Realization> {
        let RealizationDims { states, inputs, outputs } = self.dims;
        let field = |name: &str| if prefix.is_empty() { name.to_string() } else { format!("{prefix}.{name}") };
        Realization::new(
            decode_matrix(&self.a, states, states, &field("A"))?,
            decode_matrix(&self.b, states, inputs, &field("B"))?,
            decode_matrix(&self.c, outputs, states, &field("C"))?,
            decode_matrix(&self.d, outputs, inputs, &field("D"))?,
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RealizationFile {
    format: String,
    #[serde(flatten)]
    realization: RealizationRepr,
}

pub fn realization_to_json(f: &Realization) -> String {
    to_json(&RealizationFile { format: REALIZATION_FORMAT.into(), realization: RealizationRepr::encode(f) })
}

pub fn parse_realization(text: &str) -> Result<Realization> {
    let r: RealizationFile = parse_json(text)?;
    check_format(&r.format, REALIZATION_FORMAT)?;
    r.realization.decode("")
}

pub fn read_realization(path: &Path) -> Result<Realization> {
    parse_realization(&read_text(path)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockRealizations {
    #[serde(rename = "11")]
    pub b11: RealizationRepr,
    #[serde(rename = "12")]
    pub b12: RealizationRepr,
    #[serde(rename = "21")]
    pub b21: RealizationRepr,
    #[serde(rename = "22")]
    pub b22: RealizationRepr,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CoefficientDims {
    pub p: usize,
    pub m: usize,
    pub q: usize,
    pub k: usize,
}

/// Coefficient export: the blocks of `Υ` on their common state space, the
/// Redheffer blocks `Φ`, and the constant matrices `Θ0`, `Δ0`, `Δ1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientsFile {
    pub format: String,
    pub dims: CoefficientDims,
    pub upsilon: BlockRealizations,
    pub redheffer: BlockRealizations,
    pub theta0: MatrixRepr,
    pub delta0: MatrixRepr,
    pub delta1: MatrixRepr,
}

impl CoefficientsFile {
    pub fn new(coeffs: &CoefficientSet, red: &RedhefferCoefficients) -> Self {
        let enc = RealizationRepr::encode;
        CoefficientsFile {
            format: COEFFICIENTS_FORMAT.into(),
            dims: CoefficientDims { p: coeffs.p, m: coeffs.m, q: coeffs.q, k: coeffs.k },
            upsilon: BlockRealizations {
                b11: enc(&coeffs.u11()),
                b12: enc(&coeffs.u12()),
                b21: enc(&coeffs.u21()),
                b22: enc(&coeffs.u22()),
            },
            redheffer: BlockRealizations {
                b11: enc(&red.phi11),
                b12: enc(&red.phi12),
                b21: enc(&red.phi21),
                b22: enc(&red.phi22),
            },
            theta0: encode_matrix(&coeffs.theta0),
            delta0: encode_matrix(&coeffs.delta0),
            delta1: encode_matrix(&coeffs.delta1),
        }
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let f: CoefficientsFile = parse_json(text)?;
        check_format(&f.format, COEFFICIENTS_FORMAT)?;
        Ok(f)
    }
}

/// Checks attached to every emitted solution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verification {
    pub circle_points: usize,
    pub residual: f64,
    pub norm_estimate: f64,
    pub norm_resolution: f64,
    pub j_inner_defect: f64,
    pub kernel_residual: f64,
    pub tolerance: f64,
    pub verified: bool,
}

impl Verification {
    pub fn new(report: &SolutionReport, tol: f64) -> Self {
        Verification {
            circle_points: report.circle_points,
            residual: report.residual,
            norm_estimate: report.norm_estimate,
            norm_resolution: report.norm_resolution,
            j_inner_defect: report.j_inner_defect,
            kernel_residual: report.kernel_residual,
            tolerance: tol,
            verified: report.verified(tol),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionFile {
    pub format: String,
    /// `"central"` or the path of the parameter file.
    pub parameter: String,
    pub solution: RealizationRepr,
    pub verification: Verification,
}

impl SolutionFile {
    pub fn new(x: &Realization, parameter: String, verification: Verification) -> Self {
        SolutionFile { format: SOLUTION_FORMAT.into(), parameter, solution: RealizationRepr::encode(x), verification }
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let f: SolutionFile = parse_json(text)?;
        check_format(&f.format, SOLUTION_FORMAT)?;
        Ok(f)
    }
}

/// One row of the oracle comparison table; differences are absent when the
/// truncation is not positive.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleRow {
    pub truncation: usize,
    pub positivity_margin: f64,
    pub upsilon11: Option<f64>,
    pub upsilon12: Option<f64>,
    pub upsilon21: Option<f64>,
    pub upsilon22: Option<f64>,
    pub delta0: Option<f64>,
    pub delta1: Option<f64>,
    pub gram_defect: Option<f64>,
    pub theta_inner: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleFile {
    pub format: String,
    /// State-space verdict; the comparison is skipped for infeasible data.
    pub feasible: bool,
    pub samples: usize,
    pub rows: Vec<OracleRow>,
}

impl OracleFile {
    pub fn to_json(&self) -> String {
        to_json(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate, GeneratorConfig, InstanceKind};
    use crate::matrix::real;

    #[test]
    fn problem_round_trip_is_bit_exact() {
        let inst = generate(&GeneratorConfig::new(3, 2, 3, 2, InstanceKind::Feasible), 41).unwrap();
        let file = ProblemFile::new(inst.data);
        let back = ProblemFile::parse(&file.to_json()).unwrap();
        assert_eq!(back, file);
    }

    #[test]
    fn realization_round_trip_is_bit_exact() {
        let f = Realization::new(
            real(1, 1, &[0.1 + 0.2]),
            CMatrix::from_element(1, 2, c64(1.0 / 3.0, -f64::MIN_POSITIVE)),
            CMatrix::from_element(1, 1, c64(f64::MAX, 1e-300)),
            zeros(1, 2),
        )
        .unwrap();
        let back = parse_realization(&realization_to_json(&f)).unwrap();
        assert_eq!((back.a, back.b, back.c, back.d), (f.a, f.b, f.c, f.d));

        let empty = Realization::constant(zeros(2, 0));
        let back = parse_realization(&realization_to_json(&empty)).unwrap();
        assert_eq!(back.d.shape(), (2, 0));
    }

    #[test]
    fn ragged_rows_are_reported() {
        let text = r#"{"format": "leech-realization/1",
            "dims": {"states": 0, "inputs": 2, "outputs": 2},
            "A": [], "B": [], "C": [[], []],
            "D": [[[1, 0], [0, 0]], [[0, 0]]]}"#;
        let err = parse_realization(text).unwrap_err().to_string();
        assert!(err.contains("field D: row 2 has 1 entries, expected 2"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = ProblemFile::parse("{\n  \"format\": \"leech-problem/1\",\n  \"dims\": [\n").unwrap_err().to_string();
        assert!(err.starts_with("line "), "{err}");
        let err = parse_realization(r#"{"format": "leech-problem/1"}"#).unwrap_err().to_string();
        assert!(err.contains("line "), "{err}");
    }

    #[test]
    fn wrong_format_tag_is_rejected() {
        let f = realization_to_json(&Realization::constant(real(1, 1, &[1.0])));
        let err = ProblemFile::parse(&f).unwrap_err().to_string();
        assert!(err.contains("line ") || err.contains("format"), "{err}");
    }
}
