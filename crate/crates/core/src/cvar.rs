//! Conditional Value at Risk over shot costs.
//!
//! Sampled CVaR averages the lowest ceil(alpha * S) of S sorted costs; exact
//! CVaR is its infinite-shot limit over a known distribution, with fractional
//! weight on the boundary atom. Integer costs stay exact through sorting and
//! summation; floating point enters only at the averaging step.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cost values CVaR can rank: exact integers or reals.
pub trait CostValue: Copy {
    fn cost_cmp(&self, other: &Self) -> Ordering;
    fn as_f64(&self) -> f64;
    /// Mean of a slice, summed exactly for integers.
    fn mean(values: &[Self]) -> f64;
}

impl CostValue for i128 {
    fn cost_cmp(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }

    fn as_f64(&self) -> f64 {
        *self as f64
    }

    fn mean(values: &[Self]) -> f64 {
        let sum: i128 = values.iter().sum();
        sum as f64 / values.len() as f64
    }
}

impl CostValue for f64 {
    fn cost_cmp(&self, other: &Self) -> Ordering {
        self.total_cmp(other)
    }

    fn as_f64(&self) -> f64 {
        *self
    }

    fn mean(values: &[Self]) -> f64 {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// A CVaR value with its provenance: alpha, shot count (None = exact) and,
/// for sampled estimates with a tail of at least two, the standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvarEstimate {
    pub alpha: f64,
    pub shots: Option<u64>,
    pub value: f64,
    pub std_error: Option<f64>,
    pub tail_size: Option<u64>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::BadAlpha(alpha));
    }
    Ok(())
}

/// ceil(alpha * S), clamped into 1..=S.
pub fn tail_size(shots: u64, alpha: f64) -> u64 {
    ((alpha * shots as f64).ceil() as u64).clamp(1, shots)
}

/// CVaR of a finite sample: mean of the lowest ceil(alpha * S) values.
pub fn cvar_sampled<T: CostValue>(costs: &[T], alpha: f64) -> Result<CvarEstimate> {
    check_alpha(alpha)?;
    if costs.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut sorted = costs.to_vec();
    sorted.sort_unstable_by(T::cost_cmp);
    let k = tail_size(costs.len() as u64, alpha);
    let tail = &sorted[..k as usize];
    let value = T::mean(tail);
    let std_error = (k >= 2).then(|| std_error_of_tail(tail, value));
    Ok(CvarEstimate {
        alpha,
        shots: Some(costs.len() as u64),
        value,
        std_error,
        tail_size: Some(k),
    })
}

/// Standard error of sampled CVaR:
/// sqrt(sum_k (e_k - CVaR)^2 / (K (K - 1))) over the sorted lower tail.
pub fn cvar_std_error<T: CostValue>(costs: &[T], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if costs.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut sorted = costs.to_vec();
    sorted.sort_unstable_by(T::cost_cmp);
    let k = tail_size(costs.len() as u64, alpha);
    if k < 2 {
        return Err(Error::TailTooSmall(k));
    }
    let tail = &sorted[..k as usize];
    Ok(std_error_of_tail(tail, T::mean(tail)))
}

fn std_error_of_tail<T: CostValue>(tail: &[T], cvar: f64) -> f64 {
    let k = tail.len() as f64;
    let ss: f64 = tail
        .iter()
        .map(|e| {
            let d = e.as_f64() - cvar;
            d * d
        })
        .sum();
    (ss / (k * (k - 1.0))).sqrt()
}

/// Infinite-shot CVaR of a known distribution (value, probability) pairs:
/// mass-weighted mean of the lower-alpha tail, fractional on the boundary
/// atom. Probabilities must sum to 1 within 1e-9.
pub fn cvar_exact<T: CostValue>(distribution: &[(T, f64)], alpha: f64) -> Result<CvarEstimate> {
    check_alpha(alpha)?;
    if distribution.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut total = 0.0;
    for &(_, p) in distribution {
        if p.is_nan() || p < -1e-12 {
            return Err(Error::NotNormalized(p));
        }
        total += p;
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized(total));
    }
    let mut sorted = distribution.to_vec();
    sorted.sort_unstable_by(|a, b| a.0.cost_cmp(&b.0));

    let mut remaining = alpha;
    let mut acc = 0.0;
    for &(value, p) in &sorted {
        let take = p.max(0.0).min(remaining);
        acc += take * value.as_f64();
        remaining -= take;
        if remaining <= 0.0 {
            break;
        }
    }
    // `consumed` differs from alpha only by distribution-mass rounding.
    let consumed = alpha - remaining.max(0.0);
    Ok(CvarEstimate {
        alpha,
        shots: None,
        value: acc / consumed,
        std_error: None,
        tail_size: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampled_hand_example() {
        let est = cvar_sampled(&[0.0, 4.0, 4.0, 16.0], 0.5).unwrap();
        assert_eq!(est.value, 2.0);
        assert_eq!(est.tail_size, Some(2));

        let est = cvar_sampled(&[0.0, 4.0, 4.0, 16.0], 1.0).unwrap();
        assert_eq!(est.value, 6.0);

        for alpha in [0.01, 0.37, 1.0] {
            assert_eq!(cvar_sampled(&[5.5], alpha).unwrap().value, 5.5);
        }
    }

    #[test]
    fn sampled_order_does_not_matter() {
        let a = cvar_sampled(&[16.0, 4.0, 0.0, 4.0], 0.5).unwrap();
        let b = cvar_sampled(&[0.0, 4.0, 4.0, 16.0], 0.5).unwrap();
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn integer_costs_stay_exact() {
        // 2^60 + 1 and 2^60 + 3 are not distinct as f64, but their exact
        // integer mean is 2^60 + 2.
        let big = 1i128 << 60;
        let est = cvar_sampled(&[big + 3, big + 1], 1.0).unwrap();
        assert_eq!(est.value, (big + 2) as f64);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(cvar_sampled::<f64>(&[], 0.5), Err(Error::EmptySample)));
        assert!(matches!(cvar_sampled(&[1.0], 0.0), Err(Error::BadAlpha(_))));
        assert!(matches!(cvar_sampled(&[1.0], 1.5), Err(Error::BadAlpha(_))));
        assert!(matches!(cvar_exact(&[(1.0, 0.5)], 0.5), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn exact_worked_example() {
        // psi_1 over n=9: {0: 0.1, 64: 0.9}; psi_2: {36: 1.0}.
        let est = cvar_exact(&[(0.0, 0.1), (64.0, 0.9)], 0.1).unwrap();
        assert_eq!(est.value, 0.0);
        let est = cvar_exact(&[(36.0, 1.0)], 0.1).unwrap();
        assert_eq!(est.value, 36.0);
        let est = cvar_exact(&[(0.0, 0.05), (64.0, 0.95)], 0.1).unwrap();
        assert!((est.value - 32.0).abs() < 1e-12);
    }

    #[test]
    fn exact_alpha_one_is_the_mean() {
        let dist = [(1.0, 0.25), (3.0, 0.5), (10.0, 0.25)];
        let est = cvar_exact(&dist, 1.0).unwrap();
        let mean: f64 = dist.iter().map(|(v, p)| v * p).sum();
        assert!((est.value - mean).abs() < 1e-12);
    }

    #[test]
    fn std_error_hand_example() {
        // Tail [0, 4]: CVaR 2, sigma = sqrt((4 + 4) / (2 * 1)) = 2.
        let costs = [0.0, 4.0, 9.0, 100.0];
        let sigma = cvar_std_error(&costs, 0.5).unwrap();
        assert_eq!(sigma, 2.0);

        let constant = [7.0, 7.0, 7.0, 7.0];
        assert_eq!(cvar_std_error(&constant, 0.5).unwrap(), 0.0);

        assert!(matches!(cvar_std_error(&costs, 0.1), Err(Error::TailTooSmall(1))));
    }

    #[test]
    fn sampled_estimate_carries_std_error() {
        let est = cvar_sampled(&[0.0, 4.0, 9.0, 100.0], 0.5).unwrap();
        assert_eq!(est.std_error, Some(2.0));
        let est = cvar_sampled(&[0.0, 4.0, 9.0, 100.0], 0.1).unwrap();
        assert_eq!(est.std_error, None);
    }

    #[test]
    fn value_never_exceeds_mean() {
        let costs = [3.0, -1.0, 7.5, 2.0, 0.0, 11.0];
        let mean = costs.iter().sum::<f64>() / costs.len() as f64;
        for alpha in [0.05, 0.2, 0.5, 0.9, 1.0] {
            assert!(cvar_sampled(&costs, alpha).unwrap().value <= mean + 1e-12);
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn exact_is_monotone_in_alpha(
                values in proptest::collection::vec(-100.0f64..100.0, 1..8),
                weights in proptest::collection::vec(0.01f64..1.0, 1..8),
                a1 in 0.01f64..1.0,
                a2 in 0.01f64..1.0,
            ) {
                let k = values.len().min(weights.len());
                let total: f64 = weights[..k].iter().sum();
                let dist: Vec<(f64, f64)> =
                    values[..k].iter().zip(&weights[..k]).map(|(&v, &w)| (v, w / total)).collect();
                let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
                let c_lo = cvar_exact(&dist, lo).unwrap().value;
                let c_hi = cvar_exact(&dist, hi).unwrap().value;
                prop_assert!(c_lo <= c_hi + 1e-9);
            }

            #[test]
            fn scaling_costs_scales_cvar_and_error(
                costs in proptest::collection::vec(-50.0f64..50.0, 2..40),
                scale in 0.1f64..20.0,
                alpha in 0.5f64..1.0,
            ) {
                let scaled: Vec<f64> = costs.iter().map(|c| c * scale).collect();
                let base = cvar_sampled(&costs, alpha).unwrap();
                let big = cvar_sampled(&scaled, alpha).unwrap();
                prop_assert!((big.value - scale * base.value).abs() < 1e-9 * scale.max(1.0));
                if let (Some(e0), Some(e1)) = (base.std_error, big.std_error) {
                    prop_assert!((e1 - scale * e0).abs() < 1e-9 * scale.max(1.0));
                }
            }

            #[test]
            fn sampled_alpha_one_is_the_sample_mean(
                costs in proptest::collection::vec(-50.0f64..50.0, 1..40),
            ) {
                let est = cvar_sampled(&costs, 1.0).unwrap();
                let mean = costs.iter().sum::<f64>() / costs.len() as f64;
                prop_assert!((est.value - mean).abs() < 1e-9);
            }
        }
    }
}
