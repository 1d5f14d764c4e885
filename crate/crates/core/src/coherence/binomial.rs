use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper tail `P(X >= g)` for `X ~ Binomial(c, p)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tail {
    /// Natural log of the tail, always `<= 0`.
    pub log: f64,
    /// `exp(log)`; may underflow to 0.
    pub linear: f64,
}

impl Tail {
    pub const ONE: Tail = Tail { log: 0.0, linear: 1.0 };

    fn from_log(log: f64) -> Self {
        let log = log.min(0.0);
        Tail {
            log,
            linear: log.exp(),
        }
    }
}

pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k == 0 || k == n {
        return 0.0;
    }
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
}

/// Log-sum-exp of `terms`; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(terms: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.into_iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `sum_{x=g}^{c} C(c, x) p^x (1-p)^(c-x)`, summed in log space.
pub fn binomial_tail(c: u64, g: u64, p: f64) -> Result<Tail> {
    if g > c {
        return Err(Error::InvalidArgument(format!("tail start {g} exceeds trial count {c}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("probability {p} outside [0, 1]")));
    }
    if g == 0 {
        return Ok(Tail::ONE);
    }
    if p == 0.0 {
        return Ok(Tail { log: f64::NEG_INFINITY, linear: 0.0 });
    }
    if p == 1.0 {
        return Ok(Tail::ONE);
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let terms = (g..=c).map(|x| ln_binomial(c, x) + x as f64 * lp + (c - x) as f64 * lq);
    Ok(Tail::from_log(log_sum_exp(terms)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example_tails() {
        assert!((binomial_tail(2, 2, 0.5).unwrap().linear - 0.25).abs() < 1e-15);
        assert!((binomial_tail(3, 2, 0.5).unwrap().linear - 0.5).abs() < 1e-15);
    }

    #[test]
    fn full_support_is_exactly_one() {
        assert_eq!(binomial_tail(17, 0, 0.3).unwrap(), Tail::ONE);
    }

    #[test]
    fn complement_of_no_success() {
        let t = binomial_tail(3, 1, 0.2).unwrap();
        assert!((t.linear - (1.0 - 0.8f64.powi(3))).abs() < 1e-15);
    }

    #[test]
    fn degenerate_probabilities() {
        assert_eq!(binomial_tail(4, 1, 0.0).unwrap().linear, 0.0);
        assert_eq!(binomial_tail(4, 4, 1.0).unwrap(), Tail::ONE);
    }

    #[test]
    fn start_beyond_trials_is_an_error() {
        assert!(binomial_tail(3, 4, 0.5).is_err());
        assert!(binomial_tail(3, 1, 1.5).is_err());
    }

    #[test]
    fn deep_tail_stays_finite_in_log_space() {
        let t = binomial_tail(1000, 1000, 0.01).unwrap();
        assert_eq!(t.linear, 0.0);
        assert!((t.log - 1000.0 * 0.01f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn tail_is_nonincreasing_in_start() {
        for p in [0.05, 0.5, 0.95] {
            let logs: Vec<f64> = (0..=40).map(|g| binomial_tail(40, g, p).unwrap().log).collect();
            assert!(logs.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        }
    }
}
