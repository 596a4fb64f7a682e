//! Pass/fail records written next to every campaign's CSV output.

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub criterion: String,
    /// Non-finite values are stored as `null`.
    #[serde(with = "nullable")]
    pub value: f64,
    /// Closed acceptance interval; `None` is unbounded on that side.
    pub band: (Option<f64>, Option<f64>),
    pub pass: bool,
    /// 95% interval of `value`, when it is a fitted quantity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci: Option<(f64, f64)>,
}

impl Verdict {
    /// Passes when `lo ≤ value ≤ hi`; NaN never passes.
    pub fn within(criterion: impl Into<String>, value: f64, lo: Option<f64>, hi: Option<f64>) -> Self {
        let pass = !value.is_nan() && lo.map_or(true, |l| value >= l) && hi.map_or(true, |h| value <= h);
        Self {
            criterion: criterion.into(),
            value,
            band: (lo, hi),
            pass,
            ci: None,
        }
    }

    pub fn with_ci(mut self, ci: (f64, f64)) -> Self {
        self.ci = Some(ci);
        self
    }

    /// A verdict whose pass rule is not an interval test on `value`.
    pub fn with_pass(mut self, pass: bool) -> Self {
        self.pass = pass;
        self
    }

    pub fn at_most(criterion: impl Into<String>, value: f64, hi: f64) -> Self {
        Self::within(criterion, value, None, Some(hi))
    }

    pub fn at_least(criterion: impl Into<String>, value: f64, lo: f64) -> Self {
        Self::within(criterion, value, Some(lo), None)
    }

    pub fn band_text(&self) -> String {
        let side = |v: Option<f64>, inf: &str| v.map_or(inf.to_string(), |x| format!("{x}"));
        format!("[{}, {}]", side(self.band.0, "-inf"), side(self.band.1, "inf"))
    }
}

mod nullable {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

pub fn verdicts_to_json(verdicts: &[Verdict]) -> Result<String> {
    Ok(serde_json::to_string_pretty(verdicts)? + "\n")
}

pub fn verdicts_from_json(text: &str) -> Result<Vec<Verdict>> {
    Ok(serde_json::from_str(text)?)
}
