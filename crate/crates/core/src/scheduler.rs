//! UCB1 selection over the generation strategies, one state per island.

use serde::{Deserialize, Serialize};

use crate::strategy::PromptStrategy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmStats {
    pub strategy: PromptStrategy,
    /// Running mean reward; meaningless while `n == 0`.
    pub q: f64,
    pub n: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerState {
    pub arms: Vec<ArmStats>,
    pub total: u64,
    pub c: f64,
}

impl SchedulerState {
    /// All five generation strategies, unplayed.
    pub fn new(c: f64) -> Self {
        Self::with_arms(&PromptStrategy::ARMS, c)
    }

    pub fn with_arms(arms: &[PromptStrategy], c: f64) -> Self {
        assert!(!arms.is_empty(), "scheduler needs at least one arm");
        SchedulerState {
            arms: arms.iter().map(|&strategy| ArmStats { strategy, q: 0.0, n: 0 }).collect(),
            total: 0,
            c,
        }
    }

    /// `Q + C * sqrt(2 ln N / n)`, infinite for an unplayed arm.
    pub fn score(&self, idx: usize) -> f64 {
        let arm = &self.arms[idx];
        if arm.n == 0 {
            return f64::INFINITY;
        }
        let ln_n = (self.total.max(1) as f64).ln();
        arm.q + self.c * (2.0 * ln_n / arm.n as f64).sqrt()
    }

    /// First unplayed arm, otherwise the highest score; earlier arms win ties.
    pub fn select_index(&self) -> usize {
        if let Some(i) = self.arms.iter().position(|a| a.n == 0) {
            return i;
        }
        let mut best = 0;
        let mut best_score = self.score(0);
        for i in 1..self.arms.len() {
            let s = self.score(i);
            if s > best_score {
                best = i;
                best_score = s;
            }
        }
        best
    }

    pub fn select(&self) -> PromptStrategy {
        self.arms[self.select_index()].strategy
    }

    pub fn update_index(&mut self, idx: usize, reward: f64) {
        let reward = if reward.is_nan() { 0.0 } else { reward.clamp(0.0, 1.0) };
        let arm = &mut self.arms[idx];
        arm.n += 1;
        arm.q += (reward - arm.q) / arm.n as f64;
        self.total += 1;
    }

    pub fn update(&mut self, strategy: PromptStrategy, reward: f64) {
        let idx = self
            .arms
            .iter()
            .position(|a| a.strategy == strategy)
            .unwrap_or_else(|| panic!("{strategy} is not an arm of this scheduler"));
        self.update_index(idx, reward);
    }
}

/// Relative improvement of `child` over `prev_best` (both minimised), clamped
/// to [0, 1]. With `prev_best == 0` any strictly negative child earns 1.
pub fn reward_from_fitness(prev_best: f64, child: f64) -> f64 {
    if !child.is_finite() || !prev_best.is_finite() {
        return 0.0;
    }
    if prev_best == 0.0 {
        return if child < 0.0 { 1.0 } else { 0.0 };
    }
    ((prev_best - child) / prev_best.abs()).clamp(0.0, 1.0)
}
