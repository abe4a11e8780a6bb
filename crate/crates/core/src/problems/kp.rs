//! 0-1 knapsack, built by a next-item policy.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KpInstance {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    pub capacity: f64,
}

impl KpInstance {
    pub fn n(&self) -> usize {
        self.values.len()
    }
}

pub(super) fn generate<R: Rng>(rng: &mut R, n: usize, capacity: f64) -> KpInstance {
    // `random` is in [0, 1); flip it so every draw lies in (0, 1].
    let mut draw = || 1.0 - rng.random::<f64>();
    let mut values = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for _ in 0..n {
        weights.push(draw());
        values.push(draw());
    }
    KpInstance { values, weights, capacity }
}

pub trait KpPolicy {
    /// Picks an index into `values`/`weights`, the items not yet packed.
    /// `None` stops construction. Only called while some item still fits.
    fn select_next_item(&mut self, remaining_capacity: f64, values: &[f64], weights: &[f64]) -> Result<Option<usize>, Failure>;
}

/// Highest value/weight ratio among items that still fit; first index wins ties.
pub struct DensityGreedy;

impl KpPolicy for DensityGreedy {
    fn select_next_item(&mut self, cap: f64, values: &[f64], weights: &[f64]) -> Result<Option<usize>, Failure> {
        let mut best: Option<(usize, f64)> = None;
        for (i, (&v, &w)) in values.iter().zip(weights).enumerate() {
            if w > cap {
                continue;
            }
            let d = v / w;
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        Ok(best.map(|(i, _)| i))
    }
}

/// Indices of the packed items, in packing order.
pub fn construct<P: KpPolicy + ?Sized>(policy: &mut P, inst: &KpInstance) -> Result<Vec<usize>, Failure> {
    let mut remaining: Vec<usize> = (0..inst.n()).collect();
    let mut cap = inst.capacity;
    let mut packed = Vec::new();
    while remaining.iter().any(|&i| inst.weights[i] <= cap) {
        let values: Vec<f64> = remaining.iter().map(|&i| inst.values[i]).collect();
        let weights: Vec<f64> = remaining.iter().map(|&i| inst.weights[i]).collect();
        let Some(k) = policy.select_next_item(cap, &values, &weights)? else {
            break;
        };
        let Some(&item) = remaining.get(k) else {
            return Err(Failure::infeasible(format!("item index {k} out of range 0..{}", remaining.len())));
        };
        if inst.weights[item] > cap {
            return Err(Failure::infeasible(format!(
                "item {k} of weight {} exceeds remaining capacity {cap}",
                inst.weights[item]
            )));
        }
        cap -= inst.weights[item];
        remaining.remove(k);
        packed.push(item);
    }
    Ok(packed)
}

/// Total packed value.
pub fn evaluate<P: KpPolicy + ?Sized>(policy: &mut P, inst: &KpInstance) -> Result<f64, Failure> {
    construct(policy, inst).map(|items| items.iter().map(|&i| inst.values[i]).sum())
}

/// Exact optimum by depth-first branch and bound with the fractional bound.
pub fn branch_and_bound(inst: &KpInstance) -> f64 {
    let mut order: Vec<usize> = (0..inst.n()).filter(|&i| inst.weights[i] <= inst.capacity).collect();
    order.sort_by(|&a, &b| {
        let da = inst.values[a] / inst.weights[a];
        let db = inst.values[b] / inst.weights[b];
        db.total_cmp(&da).then(a.cmp(&b))
    });
    let v: Vec<f64> = order.iter().map(|&i| inst.values[i]).collect();
    let w: Vec<f64> = order.iter().map(|&i| inst.weights[i]).collect();
    let mut search = Search { v: &v, w: &w, best: 0.0 };
    search.dfs(0, inst.capacity, 0.0);
    search.best
}

struct Search<'a> {
    v: &'a [f64],
    w: &'a [f64],
    best: f64,
}

impl Search<'_> {
    fn bound(&self, mut k: usize, mut cap: f64, mut value: f64) -> f64 {
        while k < self.v.len() {
            if self.w[k] <= cap {
                cap -= self.w[k];
                value += self.v[k];
            } else {
                return value + self.v[k] * cap / self.w[k];
            }
            k += 1;
        }
        value
    }

    fn dfs(&mut self, k: usize, cap: f64, value: f64) {
        if value > self.best {
            self.best = value;
        }
        if k == self.v.len() || self.bound(k, cap, value) <= self.best {
            return;
        }
        if self.w[k] <= cap {
            self.dfs(k + 1, cap - self.w[k], value + self.v[k]);
        }
        self.dfs(k + 1, cap, value);
    }
}
