//! One-line JSON reports for statistical and exact checks.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test: String,
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub threshold: f64,
    pub pass: bool,
}

impl TestReport {
    /// Passes when `p_value > threshold`.
    pub fn from_p_value(test: impl Into<String>, statistic: f64, p_value: f64, threshold: f64) -> Self {
        Self {
            test: test.into(),
            statistic,
            p_value: Some(p_value),
            threshold,
            pass: p_value > threshold,
        }
    }

    /// Passes when `statistic < threshold`.
    pub fn below(test: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        Self {
            test: test.into(),
            statistic,
            p_value: None,
            threshold,
            pass: statistic < threshold,
        }
    }

    /// Passes when `statistic >= threshold`.
    pub fn at_least(test: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        Self {
            test: test.into(),
            statistic,
            p_value: None,
            threshold,
            pass: statistic >= threshold,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}
