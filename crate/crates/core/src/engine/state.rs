use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustpython_parser::lexer::lex;
use rustpython_parser::{Mode, Tok};
use serde::{Deserialize, Serialize};

use crate::ast_metric::{normalize, tsed, NormalizedTree};
use crate::llm::{Parent, TokenCounts};
use crate::problems::Sense;
use crate::scheduler::{ArmStats, SchedulerState};
use crate::strategy::PromptStrategy;

/// Where an individual came from. `strategy` is `None` for the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Origin {
    pub strategy: Option<PromptStrategy>,
    pub generation: u64,
    pub island: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Individual {
    pub code: String,
    pub entry: String,
    pub thought: String,
    pub key_params: String,
    /// Minimised fitness; finite for population members.
    pub objective: f64,
    pub origin: Origin,
    pub tuned: bool,
    #[serde(skip)]
    tree: Option<NormalizedTree>,
}

impl PartialEq for Individual {
    fn eq(&self, other: &Self) -> bool {
        self.code == other.code
            && self.entry == other.entry
            && self.thought == other.thought
            && self.key_params == other.key_params
            && self.objective.to_bits() == other.objective.to_bits()
            && self.origin == other.origin
            && self.tuned == other.tuned
    }
}

impl Individual {
    pub fn new(code: String, entry: String, thought: String, key_params: String, objective: f64, origin: Origin) -> Self {
        let tree = normalize(&code).ok();
        Individual { code, entry, thought, key_params, objective, origin, tuned: false, tree }
    }

    /// Normalized tree of the source; unparseable code maps to a single node.
    pub fn tree(&self) -> NormalizedTree {
        self.tree.clone().unwrap_or_else(|| normalize(&self.code).unwrap_or_else(|_| NormalizedTree::leaf("Unparsed")))
    }

    fn tree_ref(&mut self) -> &NormalizedTree {
        if self.tree.is_none() {
            self.tree = Some(self.tree());
        }
        self.tree.as_ref().unwrap()
    }

    /// Restores the cached tree after deserialization.
    pub fn rebuild_tree(&mut self) {
        self.tree_ref();
    }

    pub fn native_objective(&self, sense: Sense) -> f64 {
        to_native(self.objective, sense)
    }

    pub fn as_parent(&self, sense: Sense) -> Parent {
        Parent { thought: self.thought.clone(), code: self.code.clone(), objective: self.native_objective(sense) }
    }

    /// Same normalized structure and the same numeric literals in order.
    pub fn duplicates(&self, other: &Individual) -> bool {
        match (&self.tree, &other.tree) {
            (Some(a), Some(b)) => tsed(a, b) == 1.0 && numeric_literals(&self.code) == numeric_literals(&other.code),
            _ => self.code == other.code,
        }
    }
}

pub fn to_native(objective: f64, sense: Sense) -> f64 {
    match sense {
        Sense::Minimize => objective,
        Sense::Maximize => -objective,
    }
}

/// Numeric literal tokens of `code`, in source order.
pub fn numeric_literals(code: &str) -> Vec<String> {
    lex(code, Mode::Module)
        .filter_map(Result::ok)
        .filter_map(|(tok, _)| match tok {
            Tok::Int { value } => Some(value.to_string()),
            Tok::Float { value } => Some(format!("{value:?}")),
            Tok::Complex { real, imag } => Some(format!("{real:?}+{imag:?}j")),
            _ => None,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IslandState {
    pub id: usize,
    /// Sorted ascending by objective; `population[0]` is the elite.
    pub population: Vec<Individual>,
    pub scheduler: SchedulerState,
    pub insight: Option<String>,
    pub neighbor_insight: Option<String>,
    pub stagnation: u32,
    pub last_migration: Option<u64>,
    /// Evaluations spent by this island.
    pub evaluations: u64,
    pub rng: ChaCha8Rng,
}

impl IslandState {
    pub fn new(id: usize, master_seed: u64, c: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(id as u64 + 1);
        IslandState {
            id,
            population: Vec::new(),
            scheduler: SchedulerState::new(c),
            insight: None,
            neighbor_insight: None,
            stagnation: 0,
            last_migration: None,
            evaluations: 0,
            rng,
        }
    }

    pub fn elite(&self) -> &Individual {
        &self.population[0]
    }

    pub fn worst_index(&self) -> usize {
        self.population.len() - 1
    }

    pub fn sort(&mut self) {
        self.population.sort_by(|a, b| a.objective.total_cmp(&b.objective));
    }

    /// Stable insert by objective, then truncation to `cap`. Returns whether
    /// the individual survived.
    pub fn admit(&mut self, ind: Individual, cap: usize) -> bool {
        let at = self.population.partition_point(|m| m.objective <= ind.objective);
        if at >= cap {
            return false;
        }
        self.population.insert(at, ind);
        self.population.truncate(cap);
        true
    }

    pub fn trees(&mut self) -> Vec<NormalizedTree> {
        self.population.iter_mut().map(|m| m.tree_ref().clone()).collect()
    }

    pub fn codes(&self) -> Vec<&str> {
        self.population.iter().map(|m| m.code.as_str()).collect()
    }
}

/// One point of the convergence trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub evaluations: u64,
    pub best: f64,
    pub tokens: u64,
    /// The improvement came from parameter tuning, not a new program.
    pub tuned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalArchive {
    pub best: Individual,
    pub history: Vec<TracePoint>,
}

impl GlobalArchive {
    pub fn new(seed: Individual, evaluations: u64, tokens: u64) -> Self {
        let history = vec![TracePoint { evaluations, best: seed.objective, tokens, tuned: false }];
        GlobalArchive { best: seed, history }
    }

    /// Records `cand` if strictly better than the archive best.
    pub fn offer(&mut self, cand: &Individual, evaluations: u64, tokens: u64) -> bool {
        if cand.objective < self.best.objective {
            self.best = cand.clone();
            self.history.push(TracePoint { evaluations, best: cand.objective, tokens, tuned: cand.tuned });
            true
        } else {
            false
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MigrationMode {
    CodeTransfer,
    InsightTransfer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MigrationEvent {
    pub source: usize,
    pub target: usize,
    pub m: f64,
    pub mode: MigrationMode,
    pub generation: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResetEvent {
    pub island: usize,
    pub generation: u64,
    pub stagnation: u32,
    pub success: bool,
    pub hybrid_objective: Option<f64>,
    pub regenerated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningEpisode {
    pub island: usize,
    pub generation: u64,
    pub dims: usize,
    pub evaluations: usize,
    pub before: f64,
    pub after: f64,
    /// Normalized-tree similarity of the code before and after tuning.
    pub tsed: f64,
}

/// Per-island outcome of one inner generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRow {
    pub generation: u64,
    pub island: usize,
    pub strategy: PromptStrategy,
    pub reward: f64,
    /// `None` when generation or evaluation failed.
    pub child: Option<f64>,
    pub failure: Option<String>,
    pub admitted: bool,
    pub duplicate: bool,
    pub elite: f64,
    pub worst: f64,
    pub stagnation: u32,
    pub arms: Vec<ArmStats>,
}

/// One telemetry line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TelemetryRecord {
    Init { island: usize, size: usize, attempts: usize, padded: usize },
    Generation(GenerationRow),
    Tuning(TuningEpisode),
    Convergence { generation: u64, evaluations: u64, best: f64, tokens: u64, tuned: bool },
    Similarity { generation: u64, matrix: Vec<Vec<f64>> },
    Migration(MigrationEvent),
    Reset(ResetEvent),
}

/// Everything needed to continue a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    /// Last completed generation (0 after initialization).
    pub generation: u64,
    pub islands: Vec<IslandState>,
    pub archive: GlobalArchive,
    pub evaluations: u64,
    pub occurrences: std::collections::BTreeMap<String, u64>,
    pub tokens: TokenCounts,
    /// Telemetry records emitted so far.
    pub telemetry_lines: u64,
}

impl RunState {
    pub fn rebuild_caches(&mut self) {
        for isl in &mut self.islands {
            for m in &mut isl.population {
                m.rebuild_tree();
            }
        }
        self.archive.best.rebuild_tree();
    }
}
