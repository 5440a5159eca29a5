//! Closed-form error bounds.

use super::TheoryError;

fn check(gamma: f64, n_states: usize, n_actions: usize, delta: f64) -> Result<f64, TheoryError> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(TheoryError::Gamma(gamma));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(TheoryError::Domain(format!("delta {delta} outside (0, 1)")));
    }
    if n_states == 0 || n_actions == 0 {
        return Err(TheoryError::Domain("empty state or action space".into()));
    }
    Ok(((n_states * n_actions) as f64 / delta).ln())
}

fn finite(v: f64, what: &'static str) -> Result<f64, TheoryError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(TheoryError::Overflow(what))
    }
}

/// gamma^t e_0 + sum_{tau < t} gamma^(t-1-tau) (eps_icl(tau) + eps_stat(tau)),
/// the unrolled recursion of the per-step error.
pub fn theorem1_rhs(
    t: usize,
    initial_err: f64,
    eps_icl: &[f64],
    eps_stat: &[f64],
    gamma: f64,
) -> Result<f64, TheoryError> {
    if eps_icl.len() < t || eps_stat.len() < t {
        return Err(TheoryError::Domain(format!("series shorter than t = {t}")));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(TheoryError::Gamma(gamma));
    }
    // Horner form of the sum; gamma^0 = 1 also for gamma = 0
    let mut acc = initial_err;
    for tau in 0..t {
        acc = gamma * acc + eps_icl[tau] + eps_stat[tau];
    }
    finite(acc, "theorem 1 bound")
}

/// gamma / (1 - gamma) * sqrt(2 ln(|S||A| / delta) / m) + eps_label.
pub fn eps_stat_bound(
    gamma: f64,
    n_states: usize,
    n_actions: usize,
    delta: f64,
    m: f64,
    eps_label: f64,
) -> Result<f64, TheoryError> {
    let log_term = check(gamma, n_states, n_actions, delta)?;
    if !(m >= 1.0) {
        return Err(TheoryError::Domain(format!("sample count {m} below 1")));
    }
    finite(gamma / (1.0 - gamma) * (2.0 * log_term / m).sqrt() + eps_label, "statistical error bound")
}

/// c_visit * 18 gamma^2 / ((1 - gamma)^4 eps^2) * ln(|S||A| / delta)
/// plus ceil(ln(3 / ((1 - gamma) eps)) / ln(1 / gamma)).
/// Valid only when eps_icl and eps_label are at most (1 - gamma) eps / 3.
pub fn theorem2_samples(
    gamma: f64,
    epsilon: f64,
    n_states: usize,
    n_actions: usize,
    delta: f64,
    c_visit: f64,
) -> Result<f64, TheoryError> {
    let log_term = check(gamma, n_states, n_actions, delta)?;
    if !(epsilon > 0.0) || !(c_visit > 0.0) {
        return Err(TheoryError::Domain("epsilon and c_visit must be positive".into()));
    }
    if gamma == 0.0 {
        return Err(TheoryError::Domain("gamma = 0 needs no iterations; the bound is undefined".into()));
    }
    let g1 = 1.0 - gamma;
    let samples = c_visit * 18.0 * gamma * gamma / (g1.powi(4) * epsilon * epsilon) * log_term;
    let iterations = ((3.0 / (g1 * epsilon)).ln() / (1.0 / gamma).ln()).ceil().max(0.0);
    finite(samples + iterations, "theorem 2 sample count")
}

/// 2 gamma (eps_icl + eps_label) / (1 - gamma)^2
/// plus 2 gamma^2 / (1 - gamma)^3 sqrt(2 ln(|S||A| / delta) / m_min).
pub fn asymptotic_suboptimality(
    eps_icl: f64,
    eps_label: f64,
    gamma: f64,
    n_states: usize,
    n_actions: usize,
    delta: f64,
    m_min: f64,
) -> Result<f64, TheoryError> {
    let log_term = check(gamma, n_states, n_actions, delta)?;
    if !(m_min >= 1.0) {
        return Err(TheoryError::Domain(format!("m_min {m_min} below 1")));
    }
    let g1 = 1.0 - gamma;
    let bias = 2.0 * gamma * (eps_icl + eps_label) / (g1 * g1);
    let residual = 2.0 * gamma * gamma / g1.powi(3) * (2.0 * log_term / m_min).sqrt();
    finite(bias + residual, "asymptotic suboptimality")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theorem1_small_cases() {
        assert_eq!(theorem1_rhs(0, 3.0, &[], &[], 0.9).unwrap(), 3.0);
        assert_eq!(theorem1_rhs(1, 3.0, &[0.25], &[0.5], 0.0).unwrap(), 0.75);
        // gamma^2 e0 + gamma (a0 + b0) + (a1 + b1)
        let v = theorem1_rhs(2, 1.0, &[0.1, 0.2], &[0.3, 0.4], 0.5).unwrap();
        assert!((v - (0.25 + 0.5 * 0.4 + 0.6)).abs() < 1e-15);
    }

    #[test]
    fn theorem1_limit() {
        let n = 2000;
        let v = theorem1_rhs(n, 5.0, &vec![0.1; n], &vec![0.2; n], 0.9).unwrap();
        assert!((v - 0.3 / 0.1).abs() < 1e-9);
    }

    #[test]
    fn eps_stat_reference_value() {
        let v = eps_stat_bound(0.9, 16, 4, 0.05, 100.0, 0.0).unwrap();
        // 9 * sqrt(2 ln(1280) / 100), evaluated independently
        assert!((v - 3.404_478_943_715_196).abs() < 1e-9, "{v}");
        assert!((eps_stat_bound(0.9, 16, 4, 0.05, 1e30, 0.3).unwrap() - 0.3).abs() < 1e-12);
        assert!(eps_stat_bound(0.9, 16, 4, 0.05, 0.5, 0.0).is_err());
        assert!(eps_stat_bound(1.0, 16, 4, 0.05, 10.0, 0.0).is_err());
    }

    #[test]
    fn theorem2_terms() {
        let one = theorem2_samples(0.9, 0.5, 48, 4, 0.05, 1.0).unwrap();
        let two = theorem2_samples(0.9, 0.5, 48, 4, 0.05, 2.0).unwrap();
        let iterations = ((3.0f64 / 0.05).ln() / (1.0f64 / 0.9).ln()).ceil();
        assert!(((two - iterations) - 2.0 * (one - iterations)).abs() < 1e-6);
    }

    #[test]
    fn overflow_is_an_error() {
        assert!(matches!(
            asymptotic_suboptimality(1e300, 0.1, 0.9999, 4, 2, 0.05, 10.0),
            Err(TheoryError::Overflow(_))
        ));
    }

    #[test]
    fn asymptotic_label_floor() {
        let v = asymptotic_suboptimality(0.0, 0.2, 0.9, 4, 2, 0.05, 1e300).unwrap();
        assert!((v - 2.0 * 0.9 * 0.2 / 0.01).abs() < 1e-9);
    }
}
