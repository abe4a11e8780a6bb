//! Euclidean TSP on the unit square, built by a next-node policy.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Failure, ProblemError};

/// Largest instance the Held-Karp oracle accepts.
pub const HELD_KARP_MAX_N: usize = 14;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTsp {
    coords: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawTsp", into = "RawTsp")]
pub struct TspInstance {
    coords: Vec<[f64; 2]>,
    dist: Vec<f64>,
}

impl From<RawTsp> for TspInstance {
    fn from(raw: RawTsp) -> Self {
        TspInstance::new(raw.coords)
    }
}

impl From<TspInstance> for RawTsp {
    fn from(t: TspInstance) -> Self {
        RawTsp { coords: t.coords }
    }
}

impl TspInstance {
    pub fn new(coords: Vec<[f64; 2]>) -> Self {
        let n = coords.len();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let dx = coords[i][0] - coords[j][0];
                let dy = coords[i][1] - coords[j][1];
                dist[i * n + j] = (dx * dx + dy * dy).sqrt();
            }
        }
        TspInstance { coords, dist }
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.dist[i * n..(i + 1) * n]
    }

    /// Length of the closed tour visiting `tour` in order.
    pub fn tour_length(&self, tour: &[usize]) -> f64 {
        if tour.len() < 2 {
            return 0.0;
        }
        let mut total = 0.0;
        for w in tour.windows(2) {
            total += self.dist(w[0], w[1]);
        }
        total + self.dist(tour[tour.len() - 1], tour[0])
    }
}

pub(super) fn generate<R: Rng>(rng: &mut R, n: usize) -> TspInstance {
    let coords = (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
    TspInstance::new(coords)
}

pub trait TspPolicy {
    /// Picks the next node from `unvisited` (ascending order, never empty).
    fn select_next_node(
        &mut self,
        current: usize,
        destination: usize,
        unvisited: &[usize],
        instance: &TspInstance,
    ) -> Result<usize, Failure>;
}

/// Closest unvisited node; the lowest index wins ties.
pub struct NearestNeighbor;

impl TspPolicy for NearestNeighbor {
    fn select_next_node(&mut self, current: usize, _: usize, unvisited: &[usize], inst: &TspInstance) -> Result<usize, Failure> {
        let mut best = unvisited[0];
        for &v in &unvisited[1..] {
            if inst.dist(current, v) < inst.dist(current, best) {
                best = v;
            }
        }
        Ok(best)
    }
}

/// Builds a tour from `start` by repeatedly asking the policy for the next
/// node, then returns its closed length.
pub fn construct<P: TspPolicy + ?Sized>(policy: &mut P, inst: &TspInstance, start: usize) -> Result<Vec<usize>, Failure> {
    let n = inst.n();
    let mut tour = Vec::with_capacity(n);
    if n == 0 {
        return Ok(tour);
    }
    tour.push(start);
    let mut unvisited: Vec<usize> = (0..n).filter(|&v| v != start).collect();
    let mut current = start;
    while !unvisited.is_empty() {
        let next = policy.select_next_node(current, start, &unvisited, inst)?;
        let pos = unvisited
            .iter()
            .position(|&v| v == next)
            .ok_or_else(|| Failure::infeasible(format!("node {next} is not an unvisited node")))?;
        unvisited.remove(pos);
        tour.push(next);
        current = next;
    }
    Ok(tour)
}

pub fn evaluate<P: TspPolicy + ?Sized>(policy: &mut P, inst: &TspInstance, start: usize) -> Result<f64, Failure> {
    construct(policy, inst, start).map(|t| inst.tour_length(&t))
}

/// Exact optimal tour length by dynamic programming over subsets.
pub fn held_karp(inst: &TspInstance) -> Result<f64, ProblemError> {
    let n = inst.n();
    if n > HELD_KARP_MAX_N {
        return Err(ProblemError::TooLarge(n));
    }
    if n <= 1 {
        return Ok(0.0);
    }
    // Subsets of nodes 1..n; dp[mask][j] = shortest path 0 -> ... -> j covering mask.
    let m = n - 1;
    let full = 1usize << m;
    let mut dp = vec![f64::INFINITY; full * m];
    for j in 0..m {
        dp[(1 << j) * m + j] = inst.dist(0, j + 1);
    }
    for mask in 1..full {
        for j in 0..m {
            let cur = dp[mask * m + j];
            if mask & (1 << j) == 0 || !cur.is_finite() {
                continue;
            }
            for k in 0..m {
                if mask & (1 << k) != 0 {
                    continue;
                }
                let next = mask | (1 << k);
                let cand = cur + inst.dist(j + 1, k + 1);
                if cand < dp[next * m + k] {
                    dp[next * m + k] = cand;
                }
            }
        }
    }
    let last = full - 1;
    Ok((0..m).map(|j| dp[last * m + j] + inst.dist(j + 1, 0)).fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_corners() {
        let inst = TspInstance::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        assert!((held_karp(&inst).unwrap() - 4.0).abs() < 1e-12);
        assert!((evaluate(&mut NearestNeighbor, &inst, 0).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_points() {
        let inst = TspInstance::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]);
        assert!((evaluate(&mut NearestNeighbor, &inst, 0).unwrap() - 4.0).abs() < 1e-12);
        assert!((held_karp(&inst).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_instances() {
        assert_eq!(held_karp(&TspInstance::new(vec![[0.3, 0.3]])).unwrap(), 0.0);
        let two = TspInstance::new(vec![[0.0, 0.0], [0.0, 0.5]]);
        assert!((held_karp(&two).unwrap() - 1.0).abs() < 1e-12);
        let big = TspInstance::new(vec![[0.0, 0.0]; 15]);
        assert_eq!(held_karp(&big), Err(ProblemError::TooLarge(15)));
    }

    #[test]
    fn rejects_revisits() {
        struct Stuck;
        impl TspPolicy for Stuck {
            fn select_next_node(&mut self, c: usize, _: usize, _: &[usize], _: &TspInstance) -> Result<usize, Failure> {
                Ok(c)
            }
        }
        let inst = TspInstance::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]);
        assert_eq!(evaluate(&mut Stuck, &inst, 0).unwrap_err().kind, super::super::FailureKind::Infeasible);
    }

    #[test]
    fn json_has_only_coordinates() {
        let inst = TspInstance::new(vec![[0.0, 0.5], [1.0, 0.25]]);
        assert_eq!(serde_json::to_string(&inst).unwrap(), r#"{"coords":[[0.0,0.5],[1.0,0.25]]}"#);
        let back: TspInstance = serde_json::from_str(r#"{"coords":[[0.0,0.5],[1.0,0.25]]}"#).unwrap();
        assert_eq!(back, inst);
    }
}
