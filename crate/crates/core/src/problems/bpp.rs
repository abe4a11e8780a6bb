//! Online bin packing with a per-bin priority policy.

use rand::Rng;
use rand_distr::{Distribution, Weibull};
use serde::{Deserialize, Serialize};

use super::Failure;

/// Item sizes follow Weibull(scale 45, shape 3), rounded up and clipped to
/// `[1, capacity]`.
pub const WEIBULL_SCALE: f64 = 45.0;
pub const WEIBULL_SHAPE: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BppStream {
    pub sizes: Vec<u32>,
    pub capacity: u32,
}

impl BppStream {
    /// `ceil(sum(sizes) / capacity)`.
    pub fn lower_bound(&self) -> usize {
        let total: u64 = self.sizes.iter().map(|&s| s as u64).sum();
        total.div_ceil(self.capacity as u64) as usize
    }
}

/// Relative excess of `bins` over the lower bound.
pub fn gap(bins: usize, lower_bound: usize) -> f64 {
    (bins as f64 - lower_bound as f64) / lower_bound as f64
}

pub(super) fn generate<R: Rng>(rng: &mut R, n: usize, capacity: u32) -> BppStream {
    let dist = Weibull::new(WEIBULL_SCALE, WEIBULL_SHAPE).expect("valid Weibull parameters");
    let sizes = (0..n)
        .map(|_| dist.sample(rng).ceil().clamp(1.0, capacity as f64) as u32)
        .collect();
    BppStream { sizes, capacity }
}

pub trait BppPolicy {
    /// One score per open bin; the item goes to the first highest-scoring bin.
    fn priority(&mut self, item: u32, bins_remain_cap: &[u32]) -> Result<Vec<f64>, Failure>;
}

pub struct FirstFit;

impl BppPolicy for FirstFit {
    fn priority(&mut self, item: u32, caps: &[u32]) -> Result<Vec<f64>, Failure> {
        Ok(caps.iter().map(|&c| if c >= item { 1.0 } else { f64::NEG_INFINITY }).collect())
    }
}

pub struct BestFit;

impl BppPolicy for BestFit {
    fn priority(&mut self, item: u32, caps: &[u32]) -> Result<Vec<f64>, Failure> {
        Ok(caps
            .iter()
            .map(|&c| if c >= item { -((c - item) as f64) } else { f64::NEG_INFINITY })
            .collect())
    }
}

/// Packs the stream and returns the remaining capacity of every bin used.
///
/// A new bin is opened without consulting the policy when no open bin fits
/// the item, and also when every priority is `-inf` or NaN. Choosing a bin
/// that cannot hold the item is an error.
pub fn pack<P: BppPolicy + ?Sized>(policy: &mut P, stream: &BppStream) -> Result<Vec<u32>, Failure> {
    let mut bins: Vec<u32> = Vec::new();
    for &item in &stream.sizes {
        if item > stream.capacity {
            return Err(Failure::infeasible(format!("item {item} exceeds bin capacity {}", stream.capacity)));
        }
        if !bins.iter().any(|&c| c >= item) {
            bins.push(stream.capacity - item);
            continue;
        }
        let scores = policy.priority(item, &bins)?;
        if scores.len() != bins.len() {
            return Err(Failure::infeasible(format!(
                "priority vector has length {}, expected {}",
                scores.len(),
                bins.len()
            )));
        }
        let mut best: Option<usize> = None;
        for (i, &s) in scores.iter().enumerate() {
            if s.is_nan() || s == f64::NEG_INFINITY {
                continue;
            }
            if best.is_none_or(|b| s > scores[b]) {
                best = Some(i);
            }
        }
        match best {
            None => bins.push(stream.capacity - item),
            Some(b) if bins[b] >= item => bins[b] -= item,
            Some(b) => {
                return Err(Failure::infeasible(format!(
                    "bin {b} with remaining capacity {} cannot hold item {item}",
                    bins[b]
                )))
            }
        }
    }
    Ok(bins)
}

/// Number of bins used.
pub fn evaluate<P: BppPolicy + ?Sized>(policy: &mut P, stream: &BppStream) -> Result<usize, Failure> {
    pack(policy, stream).map(|b| b.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn best_fit_pairs_complements() {
        let s = BppStream { sizes: vec![60, 40, 60, 40], capacity: 100 };
        assert_eq!(evaluate(&mut BestFit, &s).unwrap(), 2);
        assert_eq!(evaluate(&mut FirstFit, &s).unwrap(), 2);
        assert_eq!(s.lower_bound(), 2);
    }

    #[test]
    fn first_and_best_fit_differ() {
        // First fit puts 30 into the roomier first bin, best fit into the tighter second.
        let s = BppStream { sizes: vec![50, 65, 30, 50, 35], capacity: 100 };
        assert_eq!(pack(&mut FirstFit, &s).unwrap(), vec![20, 0, 50]);
        assert_eq!(pack(&mut BestFit, &s).unwrap(), vec![0, 5, 65]);
    }

    #[test]
    fn all_negative_infinity_opens_a_bin() {
        struct Never;
        impl BppPolicy for Never {
            fn priority(&mut self, _: u32, caps: &[u32]) -> Result<Vec<f64>, Failure> {
                Ok(vec![f64::NEG_INFINITY; caps.len()])
            }
        }
        let s = BppStream { sizes: vec![10, 10, 10], capacity: 100 };
        assert_eq!(evaluate(&mut Never, &s).unwrap(), 3);
    }

    #[test]
    fn overflow_and_malformed_vectors_are_errors() {
        struct Last;
        impl BppPolicy for Last {
            fn priority(&mut self, _: u32, caps: &[u32]) -> Result<Vec<f64>, Failure> {
                Ok((0..caps.len()).map(|i| i as f64).collect())
            }
        }
        let s = BppStream { sizes: vec![50, 60, 45], capacity: 100 };
        assert!(evaluate(&mut Last, &s).is_err());
        struct Short;
        impl BppPolicy for Short {
            fn priority(&mut self, _: u32, _: &[u32]) -> Result<Vec<f64>, Failure> {
                Ok(vec![])
            }
        }
        assert!(evaluate(&mut Short, &s).is_err());
    }

    #[test]
    fn lower_bound_rounds_up() {
        assert_eq!(BppStream { sizes: vec![50, 51], capacity: 100 }.lower_bound(), 2);
        assert_eq!(BppStream { sizes: vec![50, 50], capacity: 100 }.lower_bound(), 1);
        assert!((gap(105, 100) - 0.05).abs() < 1e-12);
    }
}
