//! Pass/fail records for numerically checked inequalities.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CertificateParams {
    pub s: Option<f64>,
    pub p: Option<f64>,
    pub q: Option<f64>,
}

/// `lhs <= constant * rhs_raw`, evaluated on the worst input found.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityCertificate {
    pub name: String,
    pub lhs: f64,
    pub rhs_raw: f64,
    pub constant: f64,
    pub pass: bool,
    pub worst_case: String,
    /// Cell side of the grid the check ran on.
    pub resolution: f64,
    pub params: CertificateParams,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub skipped: Option<usize>,
}

impl InequalityCertificate {
    pub fn new(
        name: &str,
        lhs: f64,
        rhs_raw: f64,
        constant: f64,
        worst_case: String,
        resolution: f64,
        params: CertificateParams,
    ) -> Self {
        Self {
            name: name.to_string(),
            lhs,
            rhs_raw,
            constant,
            pass: holds(lhs, constant, rhs_raw),
            worst_case,
            resolution,
            params,
            trials: None,
            skipped: None,
        }
    }

    pub fn with_trials(mut self, trials: usize, skipped: usize) -> Self {
        self.trials = Some(trials);
        self.skipped = Some(skipped);
        self
    }

    /// `constant * rhs_raw - lhs`; negative when the inequality fails.
    pub fn margin(&self) -> f64 {
        self.constant * self.rhs_raw - self.lhs
    }
}

pub(crate) fn holds(lhs: f64, constant: f64, rhs_raw: f64) -> bool {
    lhs.is_finite() && lhs <= constant * rhs_raw
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_keys() {
        let c = InequalityCertificate::new("x", 1.0, 2.0, 0.5, "u".into(), 0.25, CertificateParams::default());
        assert!(c.pass);
        let v = serde_json::to_value(&c).unwrap();
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["constant", "lhs", "name", "params", "pass", "resolution", "rhs_raw", "worst_case"]);
        let c = InequalityCertificate::new("x", 1.5, 2.0, 0.5, "u".into(), 0.25, CertificateParams::default());
        assert!(!c.pass);
        assert!(c.margin() < 0.0);
    }
}
