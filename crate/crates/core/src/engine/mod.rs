//! The island-model controller: per-island inner generations (strategy
//! selection, generation, evaluation, gated tuning, rank survival) and the
//! coordination steps at generation boundaries (similarity-gated migration,
//! fusion reset, global archive).

mod persist;
mod state;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

pub use persist::{load_checkpoint, read_telemetry, unix_ms, BestHeuristic, Checkpointer, NoPersist, RunDir, RunManifest};
pub use state::{
    numeric_literals, to_native, GenerationRow, GlobalArchive, Individual, IslandState, MigrationEvent, MigrationMode, Origin,
    ResetEvent, RunState, TelemetryRecord, TracePoint, TuningEpisode,
};

use crate::ast_metric::{tsed, SimilarityMatrix};
use crate::config::RunConfig;
use crate::llm::{Gateway, LlmError, PromptContext};
use crate::problems::{problem_spec, Failure, FailureKind, ProblemKind, Sense};
use crate::runtime::Evaluator;
use crate::scheduler::reward_from_fitness;
use crate::strategy::PromptStrategy;
use crate::tuner::{identify_params, substitute, tune};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("seed heuristic is invalid: {0}")]
    SeedInvalid(Failure),
    #[error("generation {generation}: {source}")]
    Llm { generation: u64, source: LlmError },
    #[error("persistence: {0}")]
    Io(String),
}

/// The problem as seen by the engine.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSetup {
    pub description: String,
    pub func_name: String,
    pub seed_code: String,
    pub sense: Sense,
}

impl ProblemSetup {
    pub fn for_kind(kind: ProblemKind) -> Self {
        let spec = problem_spec(kind);
        ProblemSetup {
            description: spec.description.into(),
            func_name: spec.func_name.into(),
            seed_code: spec.seed_code.into(),
            sense: kind.sense(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaltReason {
    Generations,
    Evaluations,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub state: RunState,
    /// Records emitted by this call (all of them unless resumed).
    pub telemetry: Vec<TelemetryRecord>,
    pub halted: HaltReason,
}

enum Generated {
    Child(Individual),
    Failed(String),
}

pub struct Engine<'a> {
    cfg: RunConfig,
    problem: ProblemSetup,
    gateway: &'a Gateway,
    evaluator: &'a dyn Evaluator,
}

fn fatal(generation: u64) -> impl Fn(LlmError) -> EngineError {
    move |source| EngineError::Llm { generation, source }
}

impl<'a> Engine<'a> {
    pub fn new(cfg: RunConfig, problem: ProblemSetup, gateway: &'a Gateway, evaluator: &'a dyn Evaluator) -> Self {
        Engine { cfg, problem, gateway, evaluator }
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    fn context(&self) -> PromptContext {
        PromptContext::new(self.problem.description.clone(), self.problem.func_name.clone())
    }

    /// Generates, parses and evaluates one candidate. Non-fatal LLM errors
    /// and evaluation failures become `Failed`.
    fn generate(&self, strategy: PromptStrategy, island: usize, ctx: &PromptContext, origin: Origin, evals: &mut u64) -> Result<Generated, LlmError> {
        let parsed = match self.gateway.generate(strategy, island, ctx) {
            Ok((p, _)) => p,
            Err(e) if e.is_fatal() => return Err(e),
            Err(e) => return Ok(Generated::Failed(e.to_string())),
        };
        let report = self.evaluator.evaluate(&parsed.code, &parsed.entry);
        *evals += 1;
        let fit = report.fitness();
        if !fit.is_finite() {
            let why = report.failure.map_or_else(|| "non-finite objective".to_string(), |f| f.to_string());
            return Ok(Generated::Failed(why));
        }
        Ok(Generated::Child(Individual::new(parsed.code, parsed.entry, parsed.thought, parsed.key_params, fit, origin)))
    }

    /// Evaluates the seed and fills every island with it plus M1 variants.
    pub fn initialize(&self) -> Result<(RunState, Vec<TelemetryRecord>), EngineError> {
        let p = &self.problem;
        let report = self.evaluator.evaluate(&p.seed_code, &p.func_name);
        let fit = report.fitness();
        if !fit.is_finite() {
            return Err(EngineError::SeedInvalid(
                report.failure.unwrap_or_else(|| Failure::new(FailureKind::ExecError, "seed objective is not finite")),
            ));
        }
        let seed = Individual::new(
            p.seed_code.clone(),
            p.func_name.clone(),
            "Seed heuristic.".into(),
            String::new(),
            fit,
            Origin { strategy: None, generation: 0, island: 0 },
        );
        let built: Vec<Result<(IslandState, TelemetryRecord), LlmError>> =
            (0..self.cfg.islands.n).into_par_iter().map(|i| self.init_island(i, &seed)).collect();
        let mut islands = Vec::with_capacity(built.len());
        let mut records = Vec::new();
        for b in built {
            let (isl, rec) = b.map_err(fatal(0))?;
            islands.push(isl);
            records.push(rec);
        }
        let evaluations = 1 + islands.iter().map(|i| i.evaluations).sum::<u64>();
        let tokens = self.gateway.tokens();
        let archive = GlobalArchive::new(seed, 1, 0);
        records.push(TelemetryRecord::Convergence { generation: 0, evaluations: 1, best: fit, tokens: 0, tuned: false });
        let state = RunState {
            generation: 0,
            islands,
            archive,
            evaluations,
            occurrences: self.gateway.occurrences(),
            tokens,
            telemetry_lines: records.len() as u64,
        };
        Ok((state, records))
    }

    fn init_island(&self, id: usize, seed: &Individual) -> Result<(IslandState, TelemetryRecord), LlmError> {
        let cfg = &self.cfg.islands;
        let mut isl = IslandState::new(id, self.cfg.master_seed, self.cfg.scheduler.c);
        let mut s = seed.clone();
        s.origin.island = id;
        isl.population.push(s.clone());
        let mut ctx = self.context();
        ctx.parents.push(seed.as_parent(self.problem.sense));
        let budget = cfg.init_attempts * cfg.pop.saturating_sub(1);
        let mut attempts = 0;
        while isl.population.len() < cfg.pop && attempts < budget {
            attempts += 1;
            let origin = Origin { strategy: Some(PromptStrategy::M1), generation: 0, island: id };
            if let Generated::Child(c) = self.generate(PromptStrategy::M1, id, &ctx, origin, &mut isl.evaluations)? {
                isl.population.push(c);
            }
        }
        let padded = cfg.pop.saturating_sub(isl.population.len());
        isl.population.extend(std::iter::repeat_n(s, padded));
        isl.sort();
        let rec = TelemetryRecord::Init { island: id, size: isl.population.len(), attempts, padded };
        Ok((isl, rec))
    }

    /// Binary (or larger) tournaments for crossover, the elite for mutation.
    fn select_parents(&self, isl: &mut IslandState, strategy: PromptStrategy) -> Vec<usize> {
        if !strategy.is_crossover() {
            return vec![0];
        }
        let n = isl.population.len();
        let mut chosen: Vec<usize> = Vec::new();
        for _ in 0..self.cfg.islands.parents {
            let pool: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            let pool = if pool.is_empty() { (0..n).collect() } else { pool };
            let winner = (0..self.cfg.islands.tournament)
                .map(|_| pool[isl.rng.random_range(0..pool.len())])
                .min()
                .expect("tournament size is positive");
            chosen.push(winner);
        }
        chosen
    }

    /// Activation gate: within `theta` (relative to |elite|) of the elite.
    pub fn passes_gate(&self, candidate: f64, elite: f64) -> bool {
        candidate <= elite + self.cfg.tuner.theta * elite.abs()
    }

    /// Tunes the numeric constants of `ind` in place.
    pub fn tune_candidate(&self, isl: &mut IslandState, ind: &mut Individual, generation: u64) -> Option<TuningEpisode> {
        let params = identify_params(&ind.code, &ind.key_params);
        if params.is_empty() {
            return None;
        }
        let x0: Vec<f64> = params.iter().map(|p| p.value).collect();
        let code = ind.code.clone();
        let entry = ind.entry.clone();
        let evaluator = self.evaluator;
        let outcome = tune(&x0, ind.objective, &self.cfg.tuner, &mut isl.rng, |batch| {
            batch.par_iter().map(|x| evaluator.evaluate(&substitute(&code, &params, x), &entry).fitness()).collect()
        });
        isl.evaluations += outcome.evaluations as u64;
        let before_tree = ind.tree();
        let before = ind.objective;
        if outcome.improved() {
            let mut tuned = Individual::new(
                substitute(&code, &params, &outcome.best),
                entry,
                ind.thought.clone(),
                ind.key_params.clone(),
                outcome.best_fitness,
                ind.origin.clone(),
            );
            tuned.tuned = true;
            *ind = tuned;
        }
        Some(TuningEpisode {
            island: isl.id,
            generation,
            dims: params.len(),
            evaluations: outcome.evaluations,
            before,
            after: ind.objective,
            tsed: tsed(&before_tree, &ind.tree()),
        })
    }

    fn refresh_insight(&self, isl: &mut IslandState) -> Result<(), LlmError> {
        if isl.population.len() < 2 || isl.elite().code == isl.population[isl.worst_index()].code {
            return Ok(());
        }
        let mut ctx = self.context();
        ctx.parents = vec![isl.elite().as_parent(self.problem.sense), isl.population[isl.worst_index()].as_parent(self.problem.sense)];
        match self.gateway.insight(isl.id, &ctx) {
            Ok((text, _)) if !text.is_empty() => isl.insight = Some(text),
            Ok(_) => {}
            Err(e) if e.is_fatal() => return Err(e),
            Err(_) => {}
        }
        Ok(())
    }

    /// One inner generation of one island.
    pub fn inner_generation(&self, isl: &mut IslandState, generation: u64) -> Result<Vec<TelemetryRecord>, LlmError> {
        let mut records = Vec::new();
        let idx = isl.scheduler.select_index();
        let strategy = isl.scheduler.arms[idx].strategy;
        let prev_best = isl.elite().objective;
        let parents = self.select_parents(isl, strategy);
        let mut ctx = self.context();
        ctx.parents = parents.iter().map(|&i| isl.population[i].as_parent(self.problem.sense)).collect();
        ctx.local_insight = isl.insight.clone();
        ctx.neighbor_insight = isl.neighbor_insight.clone();
        let origin = Origin { strategy: Some(strategy), generation, island: isl.id };
        let mut evals = 0;
        let generated = self.generate(strategy, isl.id, &ctx, origin, &mut evals)?;
        isl.evaluations += evals;
        let (mut child, failure) = match generated {
            Generated::Child(c) => (Some(c), None),
            Generated::Failed(why) => (None, Some(why)),
        };
        if let Some(c) = child.as_mut() {
            if self.passes_gate(c.objective, prev_best) {
                if let Some(ep) = self.tune_candidate(isl, c, generation) {
                    records.push(TelemetryRecord::Tuning(ep));
                }
            }
        }
        let child_obj = child.as_ref().map(|c| c.objective);
        let duplicate = child.as_ref().is_some_and(|c| isl.population.iter().any(|m| m.duplicates(c)));
        let admitted = match child {
            Some(c) if !duplicate => isl.admit(c, self.cfg.islands.pop),
            _ => false,
        };
        let reward = match child_obj {
            Some(o) if !duplicate => reward_from_fitness(prev_best, o),
            _ => 0.0,
        };
        isl.scheduler.update_index(idx, reward);
        if isl.elite().objective < prev_best {
            isl.stagnation = 0;
            if self.cfg.islands.local_insight {
                self.refresh_insight(isl)?;
            }
        } else {
            isl.stagnation += 1;
        }
        records.insert(
            0,
            TelemetryRecord::Generation(GenerationRow {
                generation,
                island: isl.id,
                strategy,
                reward,
                child: child_obj,
                failure,
                admitted,
                duplicate,
                elite: isl.elite().objective,
                worst: isl.population[isl.worst_index()].objective,
                stagnation: isl.stagnation,
                arms: isl.scheduler.arms.clone(),
            }),
        );
        Ok(records)
    }

    /// Migration for every stagnant island whose cooldown has elapsed.
    pub fn coordinate_migration(&self, islands: &mut [IslandState], generation: u64) -> Result<Vec<TelemetryRecord>, LlmError> {
        let cfg = &self.cfg.islands;
        let eligible: Vec<usize> = islands
            .iter()
            .filter(|i| i.stagnation >= cfg.s_mig && i.last_migration.is_none_or(|l| generation.saturating_sub(l) >= cfg.i_cool))
            .map(|i| i.id)
            .collect();
        if eligible.is_empty() || islands.len() < 2 {
            return Ok(Vec::new());
        }
        let trees: Vec<_> = islands.iter_mut().map(|i| i.trees()).collect();
        let matrix = SimilarityMatrix::compute(&trees).expect("populations are never empty");
        let mut records = vec![TelemetryRecord::Similarity { generation, matrix: matrix.rows().to_vec() }];
        for t in eligible {
            let source = (0..islands.len())
                .filter(|&j| j != t)
                .min_by(|&a, &b| islands[a].elite().objective.total_cmp(&islands[b].elite().objective).then(a.cmp(&b)))
                .expect("at least two islands");
            let m = matrix.get(t, source);
            let mode = if m > cfg.tau {
                let elite = islands[source].elite().clone();
                let before = islands[t].elite().objective;
                let w = islands[t].worst_index();
                islands[t].population[w] = elite;
                islands[t].sort();
                if islands[t].elite().objective < before {
                    islands[t].stagnation = 0;
                }
                MigrationMode::CodeTransfer
            } else {
                let mut ctx = self.context();
                ctx.parents = vec![
                    islands[source].elite().as_parent(self.problem.sense),
                    islands[t].population[islands[t].worst_index()].as_parent(self.problem.sense),
                ];
                match self.gateway.insight(t, &ctx) {
                    Ok((text, _)) if !text.is_empty() => islands[t].neighbor_insight = Some(text),
                    Err(e) if e.is_fatal() => return Err(e),
                    _ => continue,
                }
                MigrationMode::InsightTransfer
            };
            islands[t].last_migration = Some(generation);
            records.push(TelemetryRecord::Migration(MigrationEvent { source, target: t, m, mode, generation }));
        }
        Ok(records)
    }

    /// Constructive fusion reset of one island. `None` below the threshold.
    pub fn fusion_reset(&self, isl: &mut IslandState, global: &Individual, generation: u64) -> Result<Option<ResetEvent>, LlmError> {
        let cfg = &self.cfg.islands;
        if isl.stagnation < cfg.i_stag {
            return Ok(None);
        }
        let stagnation = isl.stagnation;
        let mut ctx = self.context();
        ctx.global_elite = Some(global.as_parent(self.problem.sense));
        ctx.local_insight = isl.insight.clone();
        let origin = Origin { strategy: Some(PromptStrategy::Reset), generation, island: isl.id };
        let mut evals = 0;
        let generated = self.generate(PromptStrategy::Reset, isl.id, &ctx, origin, &mut evals)?;
        isl.evaluations += evals;
        let hybrid = match generated {
            Generated::Child(h) => h,
            Generated::Failed(_) => {
                isl.stagnation /= 2;
                return Ok(Some(ResetEvent { island: isl.id, generation, stagnation, success: false, hybrid_objective: None, regenerated: 0 }));
            }
        };
        let elite = isl.elite().clone();
        let mut fresh = vec![elite.clone()];
        if !hybrid.duplicates(&elite) || hybrid.objective != elite.objective {
            fresh.push(hybrid.clone());
        }
        let mut mctx = self.context();
        mctx.parents.push(hybrid.as_parent(self.problem.sense));
        mctx.local_insight = isl.insight.clone();
        mctx.neighbor_insight = isl.neighbor_insight.clone();
        let budget = cfg.init_attempts * cfg.pop.saturating_sub(fresh.len());
        let mut attempts = 0;
        let mut regenerated = 0;
        while fresh.len() < cfg.pop && attempts < budget {
            attempts += 1;
            let origin = Origin { strategy: Some(PromptStrategy::M1), generation, island: isl.id };
            if let Generated::Child(c) = self.generate(PromptStrategy::M1, isl.id, &mctx, origin, &mut isl.evaluations)? {
                fresh.push(c);
                regenerated += 1;
            }
        }
        fresh.truncate(cfg.pop);
        isl.population = fresh;
        isl.sort();
        isl.stagnation = 0;
        Ok(Some(ResetEvent {
            island: isl.id,
            generation,
            stagnation,
            success: true,
            hybrid_objective: Some(hybrid.objective),
            regenerated,
        }))
    }

    fn commit_archive(&self, state: &mut RunState, before: &[u64], generation: u64, records: &mut Vec<TelemetryRecord>) {
        let tokens = self.gateway.tokens().total();
        for (isl, &b) in state.islands.iter().zip(before) {
            state.evaluations += isl.evaluations - b;
            if state.archive.offer(isl.elite(), state.evaluations, tokens) {
                records.push(TelemetryRecord::Convergence {
                    generation,
                    evaluations: state.evaluations,
                    best: isl.elite().objective,
                    tokens,
                    tuned: isl.elite().tuned,
                });
            }
        }
    }

    /// One generation across all islands followed by coordination.
    pub fn step(&self, state: &mut RunState) -> Result<Vec<TelemetryRecord>, EngineError> {
        let g = state.generation + 1;
        let before: Vec<u64> = state.islands.iter().map(|i| i.evaluations).collect();
        let results: Vec<Result<Vec<TelemetryRecord>, LlmError>> =
            state.islands.par_iter_mut().map(|isl| self.inner_generation(isl, g)).collect();
        let mut records = Vec::new();
        for r in results {
            records.extend(r.map_err(fatal(g))?);
        }
        self.commit_archive(state, &before, g, &mut records);

        records.extend(self.coordinate_migration(&mut state.islands, g).map_err(fatal(g))?);

        let before: Vec<u64> = state.islands.iter().map(|i| i.evaluations).collect();
        let global = state.archive.best.clone();
        let resets: Vec<Result<Option<ResetEvent>, LlmError>> =
            state.islands.par_iter_mut().map(|isl| self.fusion_reset(isl, &global, g)).collect();
        for r in resets {
            if let Some(ev) = r.map_err(fatal(g))? {
                records.push(TelemetryRecord::Reset(ev));
            }
        }
        self.commit_archive(state, &before, g, &mut records);

        state.generation = g;
        state.occurrences = self.gateway.occurrences();
        state.tokens = self.gateway.tokens();
        state.telemetry_lines += records.len() as u64;
        Ok(records)
    }

    /// Runs from scratch (`state = None`) or from a checkpoint until the
    /// generation cap or the evaluation budget is reached.
    pub fn run(&self, state: Option<RunState>, persist: &mut dyn Checkpointer) -> Result<RunOutcome, EngineError> {
        let (mut state, mut telemetry) = match state {
            Some(mut s) => {
                s.rebuild_caches();
                self.gateway.restore(s.occurrences.clone(), s.tokens);
                (s, Vec::new())
            }
            None => {
                let (s, recs) = self.initialize()?;
                persist.commit(&s, &recs).map_err(|e| EngineError::Io(e.to_string()))?;
                (s, recs)
            }
        };
        let budget = &self.cfg.budget;
        let halted = loop {
            if state.generation >= budget.generations {
                break HaltReason::Generations;
            }
            if budget.max_evaluations.is_some_and(|m| state.evaluations >= m) {
                break HaltReason::Evaluations;
            }
            let recs = self.step(&mut state)?;
            log::info!(
                "generation {}: best {} after {} evaluations",
                state.generation,
                state.archive.best.objective,
                state.evaluations
            );
            persist.commit(&state, &recs).map_err(|e| EngineError::Io(e.to_string()))?;
            telemetry.extend(recs);
        };
        Ok(RunOutcome { state, telemetry, halted })
    }
}
