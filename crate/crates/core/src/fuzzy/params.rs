use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const PARAM_COUNT: usize = 27;
pub const TS_PARAMS_FILE_VERSION: u32 = 1;

/// Consequent parameters of the nine rules, stored rule-major as
/// `(a_r, b_r, c_r)` for `r = 3 * (error set) + (rate set)`.
///
/// Units: `a` in mU/min per mg/dL, `b` in mU/min per mg/dL/min, `c` in mU/min.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsParams([f64; PARAM_COUNT]);

impl TsParams {
    pub fn new(values: [f64; PARAM_COUNT]) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("fuzzy consequent parameter"));
        }
        Ok(TsParams(values))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; PARAM_COUNT] = values.try_into().map_err(|_| Error::ShapeMismatch {
            expected: PARAM_COUNT,
            got: values.len(),
        })?;
        Self::new(arr)
    }

    pub fn zeros() -> Self {
        TsParams([0.0; PARAM_COUNT])
    }

    pub fn as_slice(&self) -> &[f64; PARAM_COUNT] {
        &self.0
    }

    pub fn rule(&self, r: usize) -> (f64, f64, f64) {
        (self.0[3 * r], self.0[3 * r + 1], self.0[3 * r + 2])
    }

    /// True when every entry lies inside its `(lo, hi)` range.
    pub fn within(&self, ranges: &[(f64, f64); PARAM_COUNT]) -> bool {
        self.0.iter().zip(ranges).all(|(v, (lo, hi))| v >= lo && v <= hi)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("# Takagi-Sugeno consequent parameters\n");
        out.push_str("# order: rule-major (a, b, c), rule = 3 * error_set + rate_set; sets 0=low 1=zero 2=high\n");
        out.push_str("# units: a [mU/min per mg/dL], b [mU/min per mg/dL/min], c [mU/min]\n");
        let _ = writeln!(out, "version {TS_PARAMS_FILE_VERSION}");
        for r in 0..9 {
            let (a, b, c) = self.rule(r);
            let _ = writeln!(out, "{a:?} {b:?} {c:?}");
        }
        out
    }

    /// Parses the text written by [`TsParams::to_text`]. Comment lines start with `#`.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Parse("empty parameter file".into()))?;
        let version = header
            .strip_prefix("version")
            .map(str::trim)
            .and_then(|v| v.parse::<u32>().ok())
            .ok_or_else(|| Error::Parse(format!("expected `version N`, got `{header}`")))?;
        if version != TS_PARAMS_FILE_VERSION {
            return Err(Error::Version {
                found: version,
                expected: TS_PARAMS_FILE_VERSION,
            });
        }
        let mut values = Vec::with_capacity(PARAM_COUNT);
        for line in lines {
            for tok in line.split_whitespace() {
                let v = tok
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad number `{tok}`: {e}")))?;
                values.push(v);
            }
        }
        Self::from_slice(&values)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}
