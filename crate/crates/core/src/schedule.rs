//! Decreasing step schedules `gamma_n = c / n^alpha` and the parameter
//! conditions under which the L^2 and L^{2p} rate bounds apply.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step schedule `gamma_n = c / n^alpha` with `c > 0` and `1/2 < alpha <= 1`.
///
/// Within that range `sum gamma_n` diverges and `sum gamma_n^2` converges.
/// Values with `alpha > 1` are rejected: none of the convergence results
/// cover them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepSchedule {
    c: f64,
    alpha: f64,
}

impl StepSchedule {
    pub fn new(c: f64, alpha: f64) -> Result<Self> {
        validate_schedule(c, alpha)
    }

    /// `gamma_n = 1/n`, the schedule of the central limit theorem.
    pub fn harmonic() -> Self {
        StepSchedule { c: 1.0, alpha: 1.0 }
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Step used in the update producing `X_{n+1}`; `n` starts at 1.
    #[inline]
    pub fn gamma(&self, n: u64) -> f64 {
        debug_assert!(n >= 1, "step index starts at 1");
        if self.alpha == 1.0 {
            self.c / n as f64
        } else {
            self.c / (n as f64).powf(self.alpha)
        }
    }

    /// Smallest `N` such that `gamma(n) < eps` for every `n > N`.
    pub fn steps_below(&self, eps: f64) -> u64 {
        assert!(eps > 0.0);
        (self.c / eps).powf(1.0 / self.alpha).ceil().max(1.0) as u64
    }

    pub fn is_harmonic(&self) -> bool {
        self.c == 1.0 && self.alpha == 1.0
    }
}

impl<'de> Deserialize<'de> for StepSchedule {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        #[derive(Deserialize)]
        struct Raw {
            c: f64,
            alpha: f64,
        }
        let raw = Raw::deserialize(deserializer)?;
        validate_schedule(raw.c, raw.alpha).map_err(serde::de::Error::custom)
    }
}

pub fn validate_schedule(c: f64, alpha: f64) -> Result<StepSchedule> {
    if !c.is_finite() || c <= 0.0 {
        return Err(Error::InvalidSchedule(format!("c must be positive, received {c}")));
    }
    if !alpha.is_finite() || alpha <= 0.5 {
        return Err(Error::InvalidSchedule(format!(
            "alpha must exceed 1/2 (square-summable steps), received {alpha}"
        )));
    }
    if alpha > 1.0 {
        return Err(Error::InvalidSchedule(format!(
            "alpha must not exceed 1 (outside the scope of the rate results), received {alpha}"
        )));
    }
    Ok(StepSchedule { c, alpha })
}

/// Which rate bound hypotheses hold for a given `(c, alpha, mu, p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateConditionReport {
    pub p: u32,
    pub mu: f64,
    /// L^2 bound: `2 c mu <= 2^alpha`, and `2 c mu > 1` when `alpha = 1`.
    pub theorem3_ok: bool,
    /// L^{2p} bound: `p c mu <= 2^alpha`, and `c mu > 1` when `alpha = 1`.
    pub theorem4_ok: bool,
    pub messages: Vec<String>,
}

/// Exact floating-point comparisons, no tolerance band.
pub fn validate_rate_conditions(schedule: &StepSchedule, mu: f64, p: u32) -> RateConditionReport {
    let c = schedule.c;
    let alpha = schedule.alpha;
    let cap = 2f64.powf(alpha);
    let boundary = alpha == 1.0;
    let mut messages = Vec::new();

    if !(mu > 0.0) {
        messages.push(format!("mu must be positive, received {mu}"));
    }
    if p == 0 {
        messages.push("p must be at least 1".to_string());
    }

    let two_c_mu = 2.0 * c * mu;
    let mut theorem3_ok = mu > 0.0;
    if two_c_mu > cap {
        theorem3_ok = false;
        messages.push(format!("L2 rate: 2*c*mu = {two_c_mu} exceeds 2^alpha = {cap}"));
    }
    if boundary && two_c_mu <= 1.0 {
        theorem3_ok = false;
        messages.push(format!("L2 rate: alpha = 1 requires 2*c*mu > 1, got {two_c_mu}"));
    }

    let p_c_mu = p as f64 * c * mu;
    let c_mu = c * mu;
    let mut theorem4_ok = mu > 0.0 && p >= 1;
    if p_c_mu > cap {
        theorem4_ok = false;
        messages.push(format!("L{} rate: p*c*mu = {p_c_mu} exceeds 2^alpha = {cap}", 2 * p));
    }
    if boundary && c_mu <= 1.0 {
        theorem4_ok = false;
        messages.push(format!("L{} rate: alpha = 1 requires c*mu > 1, got {c_mu}", 2 * p));
    }

    RateConditionReport {
        p,
        mu,
        theorem3_ok,
        theorem4_ok,
        messages,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gamma_values() {
        let s = StepSchedule::new(1.0, 1.0).unwrap();
        assert_eq!(s.gamma(1), 1.0);
        assert_eq!(s.gamma(4), 0.25);
        // 16^0.75 = 8
        let s = StepSchedule::new(2.0, 0.75).unwrap();
        assert!((s.gamma(16) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        let err = validate_schedule(1.0, 0.5).unwrap_err().to_string();
        assert!(err.contains("alpha must exceed 1/2"), "{err}");
        let err = validate_schedule(-1.0, 0.75).unwrap_err().to_string();
        assert!(err.contains("c must be positive"), "{err}");
        assert!(validate_schedule(0.0, 0.75).is_err());
        assert!(validate_schedule(1.0, 1.01).is_err());
        assert!(validate_schedule(1.0, f64::NAN).is_err());
        assert!(validate_schedule(1.0, 1.0).is_ok());
    }

    #[test]
    fn rate_condition_examples() {
        let s = StepSchedule::harmonic();
        let r = validate_rate_conditions(&s, 0.9, 1);
        assert!(r.theorem3_ok);
        let r = validate_rate_conditions(&s, 0.4, 1);
        assert!(!r.theorem3_ok);
        let r = validate_rate_conditions(&s, 1.5, 2);
        assert!(!r.theorem4_ok);
        assert!(!r.messages.is_empty());
    }

    #[test]
    fn boundary_two_c_mu_equals_cap() {
        let alpha = 0.75;
        let c = 2f64.powf(alpha - 1.0);
        let s = StepSchedule::new(c, alpha).unwrap();
        let r = validate_rate_conditions(&s, 1.0, 1);
        assert!(r.theorem3_ok, "{:?}", r.messages);
    }

    #[test]
    fn harmonic_with_unit_mu_fails_strict_l4_condition() {
        let r = validate_rate_conditions(&StepSchedule::harmonic(), 1.0, 2);
        assert!(!r.theorem4_ok);
        assert!(r.messages.iter().any(|m| m.contains("c*mu > 1")));
    }

    #[test]
    fn serialized_as_given() {
        let s = StepSchedule::new(0.3, 0.6).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"c":0.3,"alpha":0.6}"#);
        let back: StepSchedule = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<StepSchedule>(r#"{"c":1.0,"alpha":0.4}"#).is_err());
    }

    proptest! {
        #[test]
        fn gamma_is_monotone_and_vanishes(c in 1e-3f64..10.0, alpha in 0.5001f64..=1.0, n in 1u64..1_000_000, eps in 1e-6f64..1.0) {
            let s = StepSchedule::new(c, alpha).unwrap();
            prop_assert!(s.gamma(n + 1) <= s.gamma(n));
            let bound = s.steps_below(eps);
            prop_assert!(s.gamma(bound + 1) < eps);
        }

        #[test]
        fn rate_report_is_pure(c in 1e-3f64..10.0, alpha in 0.5001f64..=1.0, mu in 1e-3f64..5.0, p in 1u32..6) {
            let s = StepSchedule::new(c, alpha).unwrap();
            prop_assert_eq!(validate_rate_conditions(&s, mu, p), validate_rate_conditions(&s, mu, p));
            let r = validate_rate_conditions(&s, mu, p);
            let cap = 2f64.powf(alpha);
            prop_assert_eq!(r.theorem3_ok, 2.0 * c * mu <= cap && (alpha < 1.0 || 2.0 * c * mu > 1.0));
            prop_assert_eq!(r.theorem4_ok, p as f64 * c * mu <= cap && (alpha < 1.0 || c * mu > 1.0));
        }
    }
}
