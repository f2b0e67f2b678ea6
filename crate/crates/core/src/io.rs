//! State files, report number formatting and CSV emission.
//!
//! State file schema (JSON, UTF-8):
//!
//! ```json
//! {"version": 1, "kind": "pure", "dims": [2, 2],
//!  "amplitudes": [[0.7071067811865476, 0.0], [0.0, 0.0], [0.0, 0.0], [0.7071067811865476, 0.0]],
//!  "label": "bell"}
//! ```
//!
//! Mixed states use `"kind": "mixed"` and a `"matrix"` of rows of `[re, im]`
//! pairs. Files are written with 17 significant digits so that a write/read
//! cycle is bit-exact.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::error::Error;
use crate::tensor::{DensityMatrix, PureState, C64, NORM_TOL};

/// Deviations up to this are repaired on load (with a warning).
pub const REPAIR_TOL: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("malformed state file: {0}")]
    Format(String),

    #[error(transparent)]
    Core(#[from] Error),
}

impl FileError {
    pub fn code(&self) -> &'static str {
        match self {
            FileError::Io { .. } => "Io",
            FileError::Format(_) => "InvalidFormat",
            FileError::Core(e) => e.code(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LoadedState {
    Pure(PureState),
    Mixed(DensityMatrix),
}

impl LoadedState {
    pub fn dims(&self) -> &[usize] {
        match self {
            LoadedState::Pure(s) => s.dims(),
            LoadedState::Mixed(r) => r.dims(),
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        match self {
            LoadedState::Pure(s) => s.to_density(),
            LoadedState::Mixed(r) => r.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateFile {
    pub state: LoadedState,
    pub label: Option<String>,
    /// Non-fatal repairs performed while loading.
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LoadOptions {
    /// Repair small normalization errors instead of rejecting them.
    pub normalize: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { normalize: true }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    version: u32,
    kind: String,
    dims: Vec<usize>,
    amplitudes: Option<Vec<[f64; 2]>>,
    matrix: Option<Vec<Vec<[f64; 2]>>>,
    label: Option<String>,
}

fn c(p: &[f64; 2]) -> C64 {
    C64::new(p[0], p[1])
}

/// Decides between accepting, repairing and rejecting a normalization
/// deviation `dev`; returns whether to rescale.
fn repair_needed(dev: f64, what: &str, opts: LoadOptions, warnings: &mut Vec<String>) -> Result<bool, FileError> {
    if !dev.is_finite() {
        return Err(Error::InvalidState(format!("{what} is not finite")).into());
    }
    if dev <= NORM_TOL {
        return Ok(false);
    }
    if opts.normalize && dev <= REPAIR_TOL {
        warnings.push(format!("{what} deviates from 1 by {dev:.3e}; rescaled"));
        return Ok(true);
    }
    Err(Error::InvalidState(format!("{what} deviates from 1 by {dev:.3e}")).into())
}

/// Parses a state file from its JSON text.
pub fn parse_state(text: &str, opts: LoadOptions) -> Result<StateFile, FileError> {
    let raw: RawFile = serde_json::from_str(text).map_err(|e| FileError::Format(e.to_string()))?;
    if raw.version != 1 {
        return Err(FileError::Format(format!("unsupported version {}", raw.version)));
    }
    let mut warnings = Vec::new();
    let state = match (raw.kind.as_str(), raw.amplitudes, raw.matrix) {
        ("pure", Some(a), None) => {
            let amps: Vec<C64> = a.iter().map(c).collect();
            let ns: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
            let dev = (ns.sqrt() - 1.0).abs();
            if repair_needed(dev, "state norm", opts, &mut warnings)? {
                LoadedState::Pure(PureState::normalized(raw.dims, amps)?)
            } else {
                match PureState::new(raw.dims.clone(), amps.clone()) {
                    Ok(s) => LoadedState::Pure(s),
                    // within tolerance on the norm but not on its square
                    Err(Error::InvalidState(_)) => LoadedState::Pure(PureState::normalized(raw.dims, amps)?),
                    Err(e) => return Err(e.into()),
                }
            }
        }
        ("mixed", None, Some(rows)) => {
            let d = rows.len();
            if rows.iter().any(|r| r.len() != d) {
                return Err(FileError::Format("matrix is not square".into()));
            }
            let mut mat = DMatrix::from_fn(d, d, |i, j| c(&rows[i][j]));
            let tr = mat.trace();
            let dev = (tr.re - 1.0).abs().max(tr.im.abs());
            if repair_needed(dev, "trace", opts, &mut warnings)? {
                mat /= C64::new(tr.re, 0.0);
            }
            LoadedState::Mixed(DensityMatrix::new(raw.dims, mat)?)
        }
        ("pure", _, _) => return Err(FileError::Format("pure state needs `amplitudes` only".into())),
        ("mixed", _, _) => return Err(FileError::Format("mixed state needs `matrix` only".into())),
        (k, _, _) => return Err(FileError::Format(format!("unknown kind {k:?}"))),
    };
    Ok(StateFile {
        state,
        label: raw.label,
        warnings,
    })
}

pub fn read_state_file(path: &Path, opts: LoadOptions) -> Result<StateFile, FileError> {
    let text = std::fs::read_to_string(path).map_err(|source| FileError::Io {
        path: path.into(),
        source,
    })?;
    parse_state(&text, opts)
}

/// Lossless number: 17 significant digits.
struct Exact(f64);

impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let raw = RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

#[derive(Serialize)]
struct OutFile<'a> {
    version: u32,
    kind: &'static str,
    dims: &'a [usize],
    #[serde(skip_serializing_if = "Option::is_none")]
    amplitudes: Option<Vec<[Exact; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    matrix: Option<Vec<Vec<[Exact; 2]>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<&'a str>,
}

fn pair(z: &C64) -> [Exact; 2] {
    [Exact(z.re), Exact(z.im)]
}

/// Serializes a state in the file schema.
pub fn state_to_json(state: &LoadedState, label: Option<&str>) -> String {
    let out = match state {
        LoadedState::Pure(s) => OutFile {
            version: 1,
            kind: "pure",
            dims: s.dims(),
            amplitudes: Some(s.amps().iter().map(pair).collect()),
            matrix: None,
            label,
        },
        LoadedState::Mixed(r) => {
            let m = r.matrix();
            OutFile {
                version: 1,
                kind: "mixed",
                dims: r.dims(),
                amplitudes: None,
                matrix: Some(
                    (0..m.nrows())
                        .map(|i| (0..m.ncols()).map(|j| pair(&m[(i, j)])).collect())
                        .collect(),
                ),
                label,
            }
        }
    };
    let mut text = serde_json::to_string(&out).expect("state serialization cannot fail");
    text.push('\n');
    text
}

pub fn write_state_file(path: &Path, state: &LoadedState, label: Option<&str>) -> Result<(), FileError> {
    std::fs::write(path, state_to_json(state, label)).map_err(|source| FileError::Io {
        path: path.into(),
        source,
    })
}

/// Rounds to 12 significant digits, the precision used in reports.
pub fn report_number(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

/// CSV text with a header row and LF line endings.
pub fn csv<R: AsRef<[f64]>>(header: &[&str], rows: &[R]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        for (j, x) in row.as_ref().iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{}", report_number(*x)).expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states;

    #[test]
    fn pure_round_trip_is_bit_exact() {
        let s = states::psi1();
        let text = state_to_json(&LoadedState::Pure(s.clone()), Some("psi1"));
        let back = parse_state(&text, LoadOptions::default()).unwrap();
        assert_eq!(back.state, LoadedState::Pure(s));
        assert_eq!(back.label.as_deref(), Some("psi1"));
        assert!(back.warnings.is_empty());
    }

    #[test]
    fn mixed_round_trip_is_bit_exact() {
        let rho = states::w(3).to_density();
        let text = state_to_json(&LoadedState::Mixed(rho.clone()), None);
        assert!(!text.contains("label"));
        let back = parse_state(&text, LoadOptions::default()).unwrap();
        assert_eq!(back.state, LoadedState::Mixed(rho));
    }

    fn pure_text(scale: f64) -> String {
        let a = std::f64::consts::FRAC_1_SQRT_2 * scale;
        format!(r#"{{"version":1,"kind":"pure","dims":[2,2],"amplitudes":[[{a},0],[0,0],[0,0],[{a},0]]}}"#)
    }

    #[test]
    fn normalization_policy() {
        let ok = parse_state(&pure_text(1.0), LoadOptions::default()).unwrap();
        assert!(ok.warnings.is_empty());

        let repaired = parse_state(&pure_text(1.0 + 5e-7), LoadOptions::default()).unwrap();
        assert_eq!(repaired.warnings.len(), 1);
        let LoadedState::Pure(s) = repaired.state else { panic!() };
        let ns: f64 = s.amps().iter().map(|a| a.norm_sqr()).sum();
        assert!((ns - 1.0).abs() < 1e-15);

        let strict = LoadOptions { normalize: false };
        assert_eq!(
            parse_state(&pure_text(1.0 + 5e-7), strict).unwrap_err().code(),
            "InvalidState"
        );
        assert_eq!(
            parse_state(&pure_text(1.0 + 1e-4), LoadOptions::default())
                .unwrap_err()
                .code(),
            "InvalidState"
        );
    }

    #[test]
    fn malformed_files() {
        let bad = [
            r#"{"version":2,"kind":"pure","dims":[2,2],"amplitudes":[]}"#,
            r#"{"version":1,"kind":"weird","dims":[2,2]}"#,
            r#"{"version":1,"kind":"pure","dims":[2,2]}"#,
            r#"not json"#,
        ];
        for b in bad {
            assert_eq!(
                parse_state(b, LoadOptions::default()).unwrap_err().code(),
                "InvalidFormat",
                "{b}"
            );
        }
        let wrong_dims = r#"{"version":1,"kind":"pure","dims":[2,3],"amplitudes":[[1,0],[0,0],[0,0],[0,0]]}"#;
        assert_eq!(
            parse_state(wrong_dims, LoadOptions::default()).unwrap_err().code(),
            "IncompatibleDims"
        );
        let not_psd = r#"{"version":1,"kind":"mixed","dims":[2],"matrix":[[[1.5,0],[0,0]],[[0,0],[-0.5,0]]]}"#;
        assert_eq!(
            parse_state(not_psd, LoadOptions::default()).unwrap_err().code(),
            "NotPSD"
        );
    }

    #[test]
    fn report_rounding_and_csv() {
        assert_eq!(report_number(0.902_358_311_048_123_4), 0.902358311048);
        assert_eq!(report_number(1.0), 1.0);
        assert_eq!(report_number(0.0), 0.0);
        let text = csv(&["a", "b"], &[[1.0, 0.5], [0.25, 2.0 / 3.0]]);
        assert_eq!(text, "a,b\n1,0.5\n0.25,0.666666666667\n");
    }
}
