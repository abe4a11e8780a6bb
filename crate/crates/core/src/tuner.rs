//! Numeric-constant tuning: parameter discovery, trust region, and a
//! rand/1/bin differential-evolution micro-search.

use std::collections::{HashMap, HashSet};

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rustpython_parser::ast::{self, Constant, Expr, Ranged, Stmt};
use rustpython_parser::Parse;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TunerConfig {
    /// Perturbed vectors added to the incumbent.
    pub n_tune: usize,
    pub f: f64,
    pub cr: f64,
    pub generations: usize,
    /// Trust-region half-width relative to |x|.
    pub rho: f64,
    /// Below this magnitude the region is [-1, 1].
    pub eps0: f64,
    /// Relative slack for the activation gate.
    pub theta: f64,
}

impl Default for TunerConfig {
    fn default() -> Self {
        TunerConfig { n_tune: 3, f: 0.5, cr: 0.9, generations: 5, rho: 0.5, eps0: 1e-6, theta: 0.05 }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TunerError {
    #[error("differential mutation needs at least 4 vectors, got {0}")]
    PopulationTooSmall(usize),
}

/// A tunable numeric literal bound to a name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    /// Byte range of the literal, including a leading unary sign.
    pub span: (usize, usize),
    pub value: f64,
    pub integer: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustRegion {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl TrustRegion {
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn clip(&self, x: &mut [f64]) {
        for (j, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[j], self.upper[j]);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().enumerate().all(|(j, &v)| self.lower[j] <= v && v <= self.upper[j])
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).collect()
    }
}

fn literal_value(e: &Expr) -> Option<(f64, bool)> {
    match e {
        Expr::Constant(c) => match &c.value {
            Constant::Int(i) => i64::try_from(i).ok().map(|v| (v as f64, true)),
            Constant::Float(f) => Some((*f, false)),
            _ => None,
        },
        Expr::UnaryOp(u) => {
            let (v, int) = literal_value(&u.operand)?;
            match u.op {
                ast::UnaryOp::USub if matches!(*u.operand, Expr::Constant(_)) => Some((-v, int)),
                ast::UnaryOp::UAdd if matches!(*u.operand, Expr::Constant(_)) => Some((v, int)),
                _ => None,
            }
        }
        _ => None,
    }
}

fn span(e: &Expr) -> (usize, usize) {
    let r = e.range();
    (usize::from(r.start()), usize::from(r.end()))
}

#[derive(Default)]
struct Collector {
    /// name -> (literal assignments, total assignments)
    seen: HashMap<String, (Vec<ParamSpec>, usize)>,
    top_level: HashSet<(usize, usize)>,
}

impl Collector {
    fn assigned(&mut self, target: &Expr, value: Option<&Expr>, top: bool) {
        match target {
            Expr::Name(n) => {
                let entry = self.seen.entry(n.id.to_string()).or_default();
                entry.1 += 1;
                if let Some((v, int)) = value.and_then(literal_value) {
                    let s = span(value.unwrap());
                    entry.0.push(ParamSpec { name: n.id.to_string(), span: s, value: v, integer: int });
                    if top {
                        self.top_level.insert(s);
                    }
                }
            }
            Expr::Tuple(t) => t.elts.iter().for_each(|e| self.assigned(e, None, false)),
            Expr::List(t) => t.elts.iter().for_each(|e| self.assigned(e, None, false)),
            _ => {}
        }
    }

    fn block(&mut self, body: &[Stmt], top: bool) {
        for s in body {
            match s {
                Stmt::Assign(a) => {
                    let single = a.targets.len() == 1;
                    for t in &a.targets {
                        self.assigned(t, single.then_some(&*a.value), top);
                    }
                }
                Stmt::AnnAssign(a) => self.assigned(&a.target, a.value.as_deref(), top),
                Stmt::AugAssign(a) => self.assigned(&a.target, None, false),
                Stmt::For(f) => {
                    self.assigned(&f.target, None, false);
                    self.block(&f.body, false);
                    self.block(&f.orelse, false);
                }
                Stmt::While(w) => {
                    self.block(&w.body, false);
                    self.block(&w.orelse, false);
                }
                Stmt::If(i) => {
                    self.block(&i.body, false);
                    self.block(&i.orelse, false);
                }
                Stmt::With(w) => self.block(&w.body, false),
                Stmt::Try(t) => {
                    self.block(&t.body, false);
                    for h in &t.handlers {
                        let ast::ExceptHandler::ExceptHandler(h) = h;
                        self.block(&h.body, false);
                    }
                    self.block(&t.orelse, false);
                    self.block(&t.finalbody, false);
                }
                Stmt::FunctionDef(f) => self.block(&f.body, top),
                _ => {}
            }
        }
    }
}

/// Finds tunable constants: names assigned exactly once, to a numeric
/// literal. Names mentioned in `key_params` are preferred wherever they are
/// assigned; when none of them bind, the fallback is every such assignment
/// directly in a function body or at module level. Ordered by position.
pub fn identify_params(code: &str, key_params: &str) -> Vec<ParamSpec> {
    let Ok(suite) = ast::Suite::parse(code, "<candidate>") else {
        return Vec::new();
    };
    let mut c = Collector::default();
    c.block(&suite, true);
    let constants: Vec<ParamSpec> = c
        .seen
        .into_values()
        .filter(|(lits, total)| lits.len() == 1 && *total == 1)
        .map(|(mut lits, _)| lits.pop().unwrap())
        .collect();
    let words: HashSet<&str> = key_params
        .split(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_'))
        .filter(|w| !w.is_empty())
        .collect();
    let mut named: Vec<ParamSpec> = constants.iter().filter(|p| words.contains(p.name.as_str())).cloned().collect();
    if named.is_empty() {
        named = constants.into_iter().filter(|p| c.top_level.contains(&p.span)).collect();
    }
    named.sort_by_key(|p| p.span.0);
    named
}

// Spans are whole assignment right-hand sides, so a bare sign needs no parentheses.
fn render_literal(v: f64, integer: bool) -> String {
    if integer {
        format!("{}", v.round() as i64)
    } else {
        format!("{v:?}")
    }
}

/// Rewrites each parameter's literal span with the matching value.
pub fn substitute(code: &str, params: &[ParamSpec], values: &[f64]) -> String {
    let mut order: Vec<usize> = (0..params.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(params[i].span.0));
    let mut out = code.to_string();
    for i in order {
        let (a, b) = params[i].span;
        out.replace_range(a..b, &render_literal(values[i], params[i].integer));
    }
    out
}

pub fn build_trust_region(x_init: &[f64], rho: f64, eps0: f64) -> TrustRegion {
    let (lower, upper) = x_init
        .iter()
        .map(|&x| if x.abs() < eps0 { (-1.0, 1.0) } else { (x - rho * x.abs(), x + rho * x.abs()) })
        .unzip();
    TrustRegion { lower, upper }
}

/// The incumbent followed by `n_tune` Gaussian perturbations with
/// per-dimension deviation `0.1 * width`, clipped into the region.
pub fn init_micro_population<R: Rng>(x_init: &[f64], region: &TrustRegion, n_tune: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let sigmas: Vec<f64> = region.widths().iter().map(|w| 0.1 * w).collect();
    let mut pop = vec![x_init.to_vec()];
    for _ in 0..n_tune {
        let mut x: Vec<f64> = x_init
            .iter()
            .zip(&sigmas)
            .map(|(&m, &s)| m + Normal::new(0.0, s).expect("finite sigma").sample(rng))
            .collect();
        region.clip(&mut x);
        pop.push(x);
    }
    pop
}

/// rand/1 mutation clipped into the region, then binomial crossover with the
/// target `i`.
pub fn de_trial<R: Rng>(
    pop: &[Vec<f64>],
    i: usize,
    f: f64,
    cr: f64,
    region: &TrustRegion,
    rng: &mut R,
) -> Result<Vec<f64>, TunerError> {
    if pop.len() < 4 {
        return Err(TunerError::PopulationTooSmall(pop.len()));
    }
    let picks = index::sample(rng, pop.len() - 1, 3);
    let skip = |k: usize| if k >= i { k + 1 } else { k };
    let (r1, r2, r3) = (skip(picks.index(0)), skip(picks.index(1)), skip(picks.index(2)));
    let mut v: Vec<f64> = (0..region.dim()).map(|j| pop[r1][j] + f * (pop[r2][j] - pop[r3][j])).collect();
    region.clip(&mut v);
    Ok(crossover(&pop[i], &v, cr, rng))
}

fn crossover<R: Rng>(target: &[f64], v: &[f64], cr: f64, rng: &mut R) -> Vec<f64> {
    let j_rand = rng.random_range(0..target.len());
    (0..target.len())
        .map(|j| if rng.random::<f64>() <= cr || j == j_rand { v[j] } else { target[j] })
        .collect()
}

/// Result of one tuning episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub best: Vec<f64>,
    pub best_fitness: f64,
    pub initial_fitness: f64,
    pub evaluations: usize,
    /// Incumbent fitness after initialisation and after every generation.
    pub trace: Vec<f64>,
}

impl TuneOutcome {
    pub fn improved(&self) -> bool {
        self.best_fitness < self.initial_fitness
    }
}

/// Runs the micro-search from `x_init`, whose fitness is already known.
///
/// `evaluate` scores a batch of vectors (lower is better, failures `+inf`)
/// and may do so in parallel. Slot 0 keeps `x_init` as a donor; the other
/// slots are the DE targets with one-to-one greedy replacement. The
/// incumbent is tracked apart from the population and replaced only by a
/// strictly better vector, so no slot ever duplicates it.
pub fn tune<R, E>(x_init: &[f64], init_fitness: f64, cfg: &TunerConfig, rng: &mut R, mut evaluate: E) -> TuneOutcome
where
    R: Rng,
    E: FnMut(&[Vec<f64>]) -> Vec<f64>,
{
    let mut out = TuneOutcome {
        best: x_init.to_vec(),
        best_fitness: init_fitness,
        initial_fitness: init_fitness,
        evaluations: 0,
        trace: Vec::new(),
    };
    if x_init.is_empty() {
        return out;
    }
    let region = build_trust_region(x_init, cfg.rho, cfg.eps0);
    let mut pop = init_micro_population(x_init, &region, cfg.n_tune.max(3), rng);
    let mut fit = vec![init_fitness];
    fit.extend(evaluate(&pop[1..]));
    out.evaluations += pop.len() - 1;
    let promote = |out: &mut TuneOutcome, cand: &[f64], g: f64| {
        if g < out.best_fitness {
            out.best = cand.to_vec();
            out.best_fitness = g;
        }
    };
    let (k, g) = best_of(&pop[1..], &fit[1..]);
    promote(&mut out, &pop[1 + k], g);
    out.trace.push(out.best_fitness);
    for _ in 0..cfg.generations {
        let targets: Vec<usize> = (1..pop.len()).collect();
        let trials: Vec<Vec<f64>> = targets
            .iter()
            .map(|&i| de_trial(&pop, i, cfg.f, cfg.cr, &region, rng).expect("population of at least 4"))
            .collect();
        let scores = evaluate(&trials);
        out.evaluations += trials.len();
        let (k, g) = best_of(&trials, &scores);
        promote(&mut out, &trials[k], g);
        for (t, &i) in targets.iter().enumerate() {
            if scores[t] <= fit[i] {
                pop[i] = trials[t].clone();
                fit[i] = scores[t];
            }
        }
        out.trace.push(out.best_fitness);
    }
    out
}

fn best_of(xs: &[Vec<f64>], fs: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, &g) in fs.iter().enumerate().take(xs.len()) {
        if g < best.1 {
            best = (k, g);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const F1: &str = "\
import heapq
def select_next_node_v2(current_node, destination_node, unvisited_nodes, distance_matrix):
    alpha = 0.8
    beta = 0.1
    gamma = 0.6
    theta = 0.05
    k = 5
    best = None
    for node in unvisited_nodes:
        best = node
    return best
";

    #[test]
    fn finds_named_and_fallback_parameters() {
        let all = identify_params(F1, "");
        let names: Vec<&str> = all.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["alpha", "beta", "gamma", "theta", "k"]);
        assert_eq!(all[0].value, 0.8);
        assert!(all[4].integer);
        let named = identify_params(F1, "- alpha: weight\n- missing_name: absent\n- gamma: decay");
        let names: Vec<&str> = named.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["alpha", "gamma"]);
        assert!(identify_params("def f(x):\n    return x\n", "").is_empty());
        assert!(identify_params("def f(:\n", "").is_empty());
    }

    #[test]
    fn reassigned_names_are_not_parameters() {
        let code = "def f(xs):\n    best = -1.0\n    for x in xs:\n        if x > best:\n            best = x\n    w = -2\n    return best * w\n";
        let ps = identify_params(code, "");
        assert_eq!(ps.len(), 1);
        assert_eq!((ps[0].name.as_str(), ps[0].value), ("w", -2.0));
        assert_eq!(&code[ps[0].span.0..ps[0].span.1], "-2");
    }

    #[test]
    fn substitution_rewrites_only_literals() {
        let ps = identify_params(F1, "");
        let out = substitute(F1, &ps, &[0.5, -0.25, 1.0, 1e-7, 6.6]);
        assert!(out.contains("alpha = 0.5\n"));
        assert!(out.contains("beta = -0.25\n"));
        assert!(out.contains("theta = 1e-7\n"));
        assert!(out.contains("k = 7\n"));
        let again = identify_params(&out, "");
        assert_eq!(again.iter().map(|p| p.value).collect::<Vec<_>>(), [0.5, -0.25, 1.0, 1e-7, 7.0]);
    }

    #[test]
    fn trust_region_rules() {
        let r = build_trust_region(&[0.8, 0.0, -2.0], 0.5, 1e-6);
        assert!((r.lower[0] - 0.4).abs() < 1e-12 && (r.upper[0] - 1.2).abs() < 1e-12);
        assert_eq!((r.lower[1], r.upper[1]), (-1.0, 1.0));
        assert_eq!((r.lower[2], r.upper[2]), (-3.0, -1.0));
        assert!((0.1 * r.widths()[0] - 0.08).abs() < 1e-12);
    }

    #[test]
    fn micro_population_is_clipped() {
        let x = [0.8, 0.0, -2.0];
        let r = build_trust_region(&x, 0.5, 1e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            let pop = init_micro_population(&x, &r, 3, &mut rng);
            assert_eq!(pop.len(), 4);
            assert_eq!(pop[0], x);
            assert!(pop.iter().all(|p| r.contains(p)));
        }
    }

    #[test]
    fn rand1_mutation_and_crossover() {
        let region = TrustRegion { lower: vec![-10.0; 2], upper: vec![10.0; 2] };
        // Target 0; the three donors are the rest in some order.
        let pop = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![3.0, 1.0], vec![1.0, 3.0]];
        let mut seen_expected = false;
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = de_trial(&pop, 0, 0.5, 1.0, &region, &mut rng).unwrap();
            seen_expected |= u == vec![2.0, 0.0];
        }
        assert!(seen_expected);
        let same = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0], vec![2.0, 2.0], vec![2.0, 2.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let u = de_trial(&same[1..], 0, 0.5, 1.0, &region, &mut rng).unwrap();
            assert_eq!(u, vec![2.0, 2.0]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let target = vec![9.0, 9.0, 9.0];
        let pop3 = vec![target.clone(), vec![0.0; 3], vec![0.0; 3], vec![0.0; 3]];
        let u = de_trial(&pop3, 0, 0.5, 0.0, &TrustRegion { lower: vec![-10.0; 3], upper: vec![10.0; 3] }, &mut rng).unwrap();
        assert_eq!(u.iter().filter(|&&x| x == 0.0).count(), 1);
        assert!(matches!(de_trial(&pop[..3], 0, 0.5, 0.9, &region, &mut rng), Err(TunerError::PopulationTooSmall(3))));
    }

    fn sphere(p: &[f64]) -> f64 {
        p.iter().map(|x| (x - 1.0) * (x - 1.0)).sum()
    }

    #[test]
    fn tuning_is_monotone_and_contained() {
        let x = [2.0, 2.0, 2.0];
        let region = build_trust_region(&x, 0.5, 1e-6);
        let cfg = TunerConfig { generations: 20, ..TunerConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = tune(&x, sphere(&x), &cfg, &mut rng, |batch| {
            assert!(batch.iter().all(|v| region.contains(v)));
            batch.iter().map(|v| sphere(v)).collect()
        });
        assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(out.best_fitness <= sphere(&x));
        assert_eq!(out.evaluations, 3 + 20 * 3);
        assert_eq!(sphere(&out.best), out.best_fitness);
    }

    #[test]
    fn degenerate_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = tune(&[], 5.0, &TunerConfig::default(), &mut rng, |_| panic!("no evaluations expected"));
        assert_eq!((out.evaluations, out.best_fitness), (0, 5.0));
        let out = tune(&[1.0], 5.0, &TunerConfig::default(), &mut rng, |b| vec![f64::INFINITY; b.len()]);
        assert_eq!((out.best.clone(), out.best_fitness), (vec![1.0], 5.0));
    }
}
