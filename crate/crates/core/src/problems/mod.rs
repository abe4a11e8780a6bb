//! Problem instances, generators, constructive drivers, baselines and exact
//! oracles for TSP, 0-1 knapsack and online bin packing.
//!
//! All drivers are generic over a policy trait so native baselines and
//! interpreted candidates share the same evaluation loop.

pub mod baselines;
pub mod bpp;
mod fitness;
mod guest_policy;
pub mod kp;
mod seeds;
pub mod tsp;

use std::sync::OnceLock;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use baselines::{baselines, BaselineRow, BaselineTable};
pub use bpp::{BppPolicy, BppStream};
pub use fitness::{aggregate_fitness, Failure, FailureKind, FitnessReport, Sense};
pub use guest_policy::{run_guest_instance, GuestBpp, GuestKp, GuestTsp};
pub use kp::{KpInstance, KpPolicy};
pub use seeds::{problem_spec, ProblemSpec};
pub use tsp::{TspInstance, TspPolicy};

use crate::guest::{GuestProgram, Limits};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Tsp,
    Kp,
    BppOnline,
}

impl ProblemKind {
    pub fn tag(self) -> &'static str {
        match self {
            ProblemKind::Tsp => "tsp",
            ProblemKind::Kp => "kp",
            ProblemKind::BppOnline => "bpp_online",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "tsp" => Some(ProblemKind::Tsp),
            "kp" => Some(ProblemKind::Kp),
            "bpp_online" | "bpp" => Some(ProblemKind::BppOnline),
            _ => None,
        }
    }

    pub fn sense(self) -> Sense {
        match self {
            ProblemKind::Kp => Sense::Maximize,
            _ => Sense::Minimize,
        }
    }
}

/// Size parameters. `capacity` is the knapsack limit W or the bin size C and
/// is ignored for TSP; when absent the conventional value for `n` is used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scale {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<f64>,
}

impl Scale {
    pub fn new(n: usize) -> Self {
        Scale { n, capacity: None }
    }

    pub fn with_capacity(n: usize, capacity: f64) -> Self {
        Scale { n, capacity: Some(capacity) }
    }

    pub fn capacity_for(&self, kind: ProblemKind) -> f64 {
        match (kind, self.capacity) {
            (_, Some(c)) => c,
            (ProblemKind::Kp, None) => {
                if self.n <= 50 {
                    12.5
                } else {
                    25.0
                }
            }
            (ProblemKind::BppOnline, None) => 100.0,
            (ProblemKind::Tsp, None) => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Instance {
    Tsp(TspInstance),
    Kp(KpInstance),
    Bpp(BppStream),
}

impl Instance {
    pub fn kind(&self) -> ProblemKind {
        match self {
            Instance::Tsp(_) => ProblemKind::Tsp,
            Instance::Kp(_) => ProblemKind::Kp,
            Instance::Bpp(_) => ProblemKind::BppOnline,
        }
    }

    /// Structural checks for instances received from outside.
    pub fn validate(&self) -> Result<(), String> {
        match self {
            Instance::Tsp(t) if t.n() == 0 => Err("TSP instance has no nodes".into()),
            Instance::Tsp(t) if t.coords().iter().flatten().any(|c| !c.is_finite()) => Err("TSP coordinates must be finite".into()),
            Instance::Kp(k) if k.values.len() != k.weights.len() => Err("KP values and weights differ in length".into()),
            Instance::Kp(k) if !(k.capacity.is_finite() && k.capacity >= 0.0) => Err("KP capacity must be finite and non-negative".into()),
            Instance::Kp(k) if k.values.iter().chain(&k.weights).any(|x| !x.is_finite() || *x < 0.0) => {
                Err("KP values and weights must be finite and non-negative".into())
            }
            Instance::Bpp(b) if b.capacity == 0 => Err("BPP capacity must be positive".into()),
            Instance::Bpp(b) if b.sizes.iter().any(|&s| s == 0 || s > b.capacity) => Err("BPP item sizes must lie in [1, capacity]".into()),
            _ => Ok(()),
        }
    }
}

/// A generated, immutable batch of instances; the on-disk instance file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSet {
    pub kind: ProblemKind,
    pub scale: Scale,
    pub seed: u64,
    pub instances: Vec<Instance>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("invalid scale: {0}")]
    InvalidScale(String),
    #[error("instance too large for the exact oracle: n = {0}")]
    TooLarge(usize),
    #[error("instance kind does not match problem {0:?}")]
    KindMismatch(ProblemKind),
}

pub fn generate_instances(kind: ProblemKind, scale: Scale, count: usize, seed: u64) -> Result<InstanceSet, ProblemError> {
    if count == 0 {
        return Err(ProblemError::InvalidScale("count must be at least 1".into()));
    }
    if scale.n == 0 {
        return Err(ProblemError::InvalidScale("n must be positive".into()));
    }
    let capacity = scale.capacity_for(kind);
    if kind != ProblemKind::Tsp && !(capacity > 0.0 && capacity.is_finite()) {
        return Err(ProblemError::InvalidScale(format!("capacity must be positive, got {capacity}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instances = (0..count)
        .map(|_| match kind {
            ProblemKind::Tsp => Instance::Tsp(tsp::generate(&mut rng, scale.n)),
            ProblemKind::Kp => Instance::Kp(kp::generate(&mut rng, scale.n, capacity)),
            ProblemKind::BppOnline => Instance::Bpp(bpp::generate(&mut rng, scale.n, capacity as u32)),
        })
        .collect();
    Ok(InstanceSet { kind, scale, seed, instances })
}

/// Exact optimum (TSP, KP) or lower bound (BPP) in the problem's native sense.
pub fn oracle(instance: &Instance) -> Result<f64, ProblemError> {
    match instance {
        Instance::Tsp(t) => tsp::held_karp(t),
        Instance::Kp(k) => Ok(kp::branch_and_bound(k)),
        Instance::Bpp(b) => Ok(b.lower_bound() as f64),
    }
}

/// Per-instance objective of a native policy triple.
pub fn evaluate_native(instance: &Instance) -> Result<f64, Failure> {
    match instance {
        Instance::Tsp(t) => tsp::evaluate(&mut tsp::NearestNeighbor, t, 0),
        Instance::Kp(k) => kp::evaluate(&mut kp::DensityGreedy, k),
        Instance::Bpp(b) => bpp::evaluate(&mut bpp::FirstFit, b).map(|n| n as f64),
    }
}

fn guest_pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        rayon::ThreadPoolBuilder::new()
            .thread_name(|i| format!("guest-{i}"))
            .stack_size(64 << 20)
            .build()
            .expect("guest thread pool")
    })
}

/// Limits for one in-process evaluation batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchLimits {
    /// Step budget per instance.
    pub step_limit: u64,
    /// Wall-clock budget for the whole batch.
    pub timeout: Option<Duration>,
}

/// Evaluates candidate `code` on every instance with the embedded
/// interpreter. The module is executed afresh for each instance, so module
/// level state never leaks between instances.
pub fn evaluate_code(code: &str, entry: &str, instances: &[Instance], limits: BatchLimits) -> FitnessReport {
    evaluate_code_with(code, entry, instances, limits, true)
}

/// Like [`evaluate_code`] but runs the instances one after another on the
/// calling thread, which needs a stack of a few tens of MiB.
pub fn evaluate_code_serial(code: &str, entry: &str, instances: &[Instance], limits: BatchLimits) -> FitnessReport {
    evaluate_code_with(code, entry, instances, limits, false)
}

fn evaluate_code_with(code: &str, entry: &str, instances: &[Instance], limits: BatchLimits, parallel: bool) -> FitnessReport {
    let sense = instances.first().map_or(Sense::Minimize, |i| i.kind().sense());
    let program = match GuestProgram::compile(code) {
        Ok(p) => p,
        Err(e) => return FitnessReport::failed(Failure::from(e), sense),
    };
    let batch = Limits::new(limits.step_limit, limits.timeout);
    let one = |inst: &Instance| {
        std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run_guest_instance(&program, entry, inst, batch)))
            .unwrap_or_else(|_| Err(Failure::new(FailureKind::ExecError, "interpreter panic")))
    };
    let results: Vec<Result<f64, Failure>> = if parallel {
        guest_pool().install(|| instances.par_iter().map(one).collect())
    } else {
        let mut out = Vec::with_capacity(instances.len());
        for inst in instances {
            let r = one(inst);
            let failed = r.is_err();
            out.push(r);
            if failed {
                break;
            }
        }
        out
    };
    let mut per_instance = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(v) => per_instance.push(v),
            Err(f) => return FitnessReport::failed(f, sense),
        }
    }
    FitnessReport::ok(per_instance, sense)
}
