//! Deterministic inequalities behind the moment bounds, in executable form.
//!
//! [`cp_dp`] generates the constants of the norm-power inequality
//!
//! ```text
//! ||a + b||^{2+p} <= ||a||^{2+p} + (2+p)<a,b>||a||^p + C_p ||a||^p ||b||^2 + D_p ||b||^{2+p}
//! ```
//!
//! and [`recursion_bound_trace`] iterates the worst case of
//! `Z_{n+1} <= (1 - a/(n+1)^alpha) Z_n + b/(n+1)^beta` so the decay
//! `Z_n = O(n^{alpha - beta})` can be observed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormPowerConstants {
    pub p: u32,
    #[serde(rename = "C_p")]
    pub c_p: f64,
    #[serde(rename = "D_p")]
    pub d_p: f64,
}

/// `C_p, D_p` for even `p >= 2`, starting from `C_2 = 8, D_2 = 3`.
pub fn cp_dp(p: u32) -> Result<NormPowerConstants> {
    if p < 2 || p % 2 != 0 {
        return Err(Error::InvalidArgument(format!("p must be an even integer >= 2, received {p}")));
    }
    let (mut c, mut d) = (8.0_f64, 3.0_f64);
    let mut q = 2;
    while q < p {
        q += 2;
        let qf = q as f64;
        let (c_prev, d_prev) = (c, d);
        c = 3.0 * qf + (4.0 / qf) * ((qf - 1.0) * c_prev + d_prev);
        d = 1.0 + (4.0 / qf) * (c_prev + (qf - 1.0) * d_prev);
    }
    Ok(NormPowerConstants { p, c_p: c, d_p: d })
}

/// Evaluates the norm-power inequality; returns `(holds, RHS - LHS)`.
///
/// `holds` tolerates a slack down to `-1e-9 * max(1, RHS)`.
///
/// # Panics
///
/// If `p` is odd or zero, or if `a` and `b` differ in length.
pub fn check_norm_power_inequality(a: &[f64], b: &[f64], p: u32) -> (bool, f64) {
    assert_eq!(a.len(), b.len(), "vectors must share a dimension");
    let k = cp_dp(p).expect("p must be even and at least 2");
    let pf = p as f64;
    let na = norm(a);
    let nb = norm(b);
    let sum: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
    let lhs = norm(&sum).powf(2.0 + pf);
    let rhs = na.powf(2.0 + pf)
        + (2.0 + pf) * dot(a, b) * na.powf(pf)
        + k.c_p * na.powf(pf) * nb * nb
        + k.d_p * nb.powf(2.0 + pf);
    let slack = rhs - lhs;
    (slack >= -1e-9 * rhs.max(1.0), slack)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecursionTrace {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub beta: f64,
    /// `Z_1, ..., Z_{n_max}`.
    #[serde(rename = "Z")]
    pub z: Vec<f64>,
    /// `max_n Z_n n^{beta - alpha}`.
    pub sup_scaled: f64,
    /// Relative growth of the running maximum of `Z_n n^{beta - alpha}`
    /// over the second half of the trace.
    pub tail_growth: f64,
    pub plateaued: bool,
}

/// Relative increase allowed over the final half for a plateau.
pub const PLATEAU_TOL: f64 = 0.01;

fn recursion_constraints(a: f64, b: f64, alpha: f64, beta: f64) -> Vec<String> {
    let mut v = Vec::new();
    if !(a > 0.0) {
        v.push(format!("a > 0 (a = {a})"));
    }
    if !(b >= 0.0) {
        v.push(format!("b >= 0 (b = {b})"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        v.push(format!("0 < alpha <= 1 (alpha = {alpha})"));
    }
    if !(beta > 1.0 && beta < 2.0) {
        v.push(format!("1 < beta < 2 (beta = {beta})"));
    }
    if !(a <= 2f64.powf(alpha)) {
        v.push(format!("a <= 2^alpha (a = {a}, 2^alpha = {})", 2f64.powf(alpha)));
    }
    if !(beta <= 2.0 * alpha) {
        v.push(format!("beta <= 2 alpha (beta = {beta}, alpha = {alpha})"));
    }
    if alpha == 1.0 && !(beta < a + 1.0) {
        v.push(format!("beta < a + 1 when alpha = 1 (beta = {beta}, a = {a})"));
    }
    v
}

pub fn recursion_bound_trace(a: f64, b: f64, alpha: f64, beta: f64, z1: f64, n_max: usize) -> Result<RecursionTrace> {
    let violated = recursion_constraints(a, b, alpha, beta);
    if !violated.is_empty() {
        return Err(Error::InvalidArgument(format!("constraints violated: {}", violated.join("; "))));
    }
    if !(z1 >= 0.0) {
        return Err(Error::InvalidArgument(format!("z1 must be nonnegative, received {z1}")));
    }
    if n_max < 2 {
        return Err(Error::InvalidArgument("n_max must be at least 2".into()));
    }

    let mut z = Vec::with_capacity(n_max);
    z.push(z1);
    for n in 1..n_max {
        let next = (n + 1) as f64;
        let prev = z[n - 1];
        z.push((1.0 - a / next.powf(alpha)) * prev + b / next.powf(beta));
    }

    let expo = beta - alpha;
    let mut running = f64::NEG_INFINITY;
    let mut at_half = 0.0;
    let half = n_max / 2;
    for (i, zn) in z.iter().enumerate() {
        running = running.max(zn * ((i + 1) as f64).powf(expo));
        if i + 1 == half {
            at_half = running;
        }
    }
    let tail_growth = if at_half > 0.0 { (running - at_half) / at_half } else { 0.0 };
    Ok(RecursionTrace {
        a,
        b,
        alpha,
        beta,
        z,
        sup_scaled: running,
        tail_growth,
        plateaued: tail_growth <= PLATEAU_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn published_constants() {
        assert_eq!(cp_dp(2).unwrap(), NormPowerConstants { p: 2, c_p: 8.0, d_p: 3.0 });
        assert_eq!(cp_dp(4).unwrap(), NormPowerConstants { p: 4, c_p: 39.0, d_p: 18.0 });
    }

    #[test]
    fn hand_evaluated_p6() {
        let k = cp_dp(6).unwrap();
        assert!((k.c_p - 160.0).abs() < 1e-12, "{}", k.c_p);
        assert!((k.d_p - 87.0).abs() < 1e-12, "{}", k.d_p);
    }

    #[test]
    fn d_never_exceeds_c() {
        for p in (2..=12).step_by(2) {
            let k = cp_dp(p).unwrap();
            assert!(k.d_p <= k.c_p, "p = {p}: {k:?}");
        }
    }

    #[test]
    fn odd_or_zero_p_rejected() {
        for p in [0, 1, 3, 7] {
            assert!(cp_dp(p).is_err());
        }
    }

    #[test]
    fn degenerate_pairs() {
        let (holds, slack) = check_norm_power_inequality(&[1.0, -2.0, 0.5], &[0.0; 3], 2);
        assert!(holds);
        assert!(slack.abs() < 1e-12);
        let b = [1.0, 2.0];
        let (holds, slack) = check_norm_power_inequality(&[0.0, 0.0], &b, 2);
        assert!(holds);
        // RHS - LHS = 3|b|^4 - |b|^4
        assert!((slack - 2.0 * 25.0).abs() < 1e-12);
    }

    #[test]
    fn randomized_pairs_never_violate() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_a3);
        let mut violations = 0;
        for i in 0..30_000 {
            let d = [1, 3, 10][i % 3];
            let p = [2, 4][(i / 3) % 2];
            let mut draw = || -> Vec<f64> { (0..d).map(|_| StandardNormal.sample(&mut rng)).collect() };
            let (a, b) = (draw(), draw());
            if !check_norm_power_inequality(&a, &b, p).0 {
                violations += 1;
            }
        }
        assert_eq!(violations, 0);
    }

    #[test]
    fn recursion_plateaus() {
        let t = recursion_bound_trace(1.0, 1.0, 1.0, 1.5, 1.0, 100_000).unwrap();
        assert!(t.sup_scaled.is_finite());
        assert!(t.plateaued, "tail growth {}", t.tail_growth);
    }

    #[test]
    fn zero_recursion_stays_zero() {
        let t = recursion_bound_trace(1.0, 0.0, 1.0, 1.5, 0.0, 1000).unwrap();
        assert!(t.z.iter().all(|&z| z == 0.0));
        assert_eq!(t.sup_scaled, 0.0);
    }

    #[test]
    fn beta_out_of_range_named() {
        let err = recursion_bound_trace(1.0, 1.0, 1.0, 2.5, 1.0, 100).unwrap_err().to_string();
        assert!(err.contains("1 < beta < 2"), "{err}");
    }

    proptest! {
        #[test]
        fn recursion_linear_in_z1_and_b(z1 in 0.0..10.0f64, b in 0.0..5.0f64, alpha in 0.76..1.0f64) {
            let beta = 1.5;
            let one = recursion_bound_trace(1.0, b, alpha, beta, z1, 500).unwrap();
            let two = recursion_bound_trace(1.0, 2.0 * b, alpha, beta, 2.0 * z1, 500).unwrap();
            for (x, y) in one.z.iter().zip(&two.z) {
                prop_assert_eq!(2.0 * x, *y);
            }
        }

        #[test]
        fn recursion_monotone_in_z1(z1 in 0.0..10.0f64, s in 1.0..4.0f64) {
            let base = recursion_bound_trace(1.0, 1.0, 1.0, 1.5, z1, 300).unwrap();
            let scaled = recursion_bound_trace(1.0, 1.0, 1.0, 1.5, s * z1, 300).unwrap();
            for (x, y) in base.z.iter().zip(&scaled.z) {
                prop_assert!(*y <= s * x * (1.0 + 1e-12) + 1e-12);
            }
        }

        #[test]
        fn inequality_holds_for_scaled_pairs(
            a in proptest::collection::vec(-1e3..1e3f64, 4),
            b in proptest::collection::vec(-1e3..1e3f64, 4),
            p in prop_oneof![Just(2u32), Just(4u32), Just(6u32)],
        ) {
            prop_assert!(check_norm_power_inequality(&a, &b, p).0);
        }
    }
}
