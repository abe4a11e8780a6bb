//! Reference results: constructive baselines against exact optima or lower
//! bounds.

use rayon::prelude::*;
use serde::Serialize;

use super::{bpp, generate_instances, kp, oracle, tsp, Instance, ProblemError, ProblemKind, Scale};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineRow {
    pub method: &'static str,
    /// Mean objective in the problem's own sense.
    pub mean: f64,
    /// Mean per-instance relative gap to the reference, in percent.
    pub gap_percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineTable {
    pub kind: ProblemKind,
    pub n: usize,
    pub capacity: Option<f64>,
    pub count: usize,
    pub seed: u64,
    /// Optimum (TSP, KP) or `ceil(Σs/C)` (BPP).
    pub reference: Option<&'static str>,
    pub reference_mean: Option<f64>,
    pub rows: Vec<BaselineRow>,
}

impl BaselineTable {
    pub fn to_text(&self) -> String {
        let mut s = format!("{} n={} instances={} seed={}\n", self.kind.tag(), self.n, self.count, self.seed);
        s.push_str(&format!("{:<16} {:>12} {:>10}\n", "method", "objective", "gap"));
        for r in &self.rows {
            let gap = r.gap_percent.map_or_else(|| "-".to_string(), |g| format!("{g:.2}%"));
            s.push_str(&format!("{:<16} {:>12.4} {:>10}\n", r.method, r.mean, gap));
        }
        if let (Some(name), Some(m)) = (self.reference, self.reference_mean) {
            s.push_str(&format!("{name:<16} {m:>12.4} {:>10}\n", "-"));
        }
        s
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Runs the built-in baselines on `count` generated instances. With `exact`
/// an oracle that cannot handle the size is an error; otherwise the gap
/// column is left empty.
pub fn baselines(kind: ProblemKind, scale: Scale, count: usize, seed: u64, exact: bool) -> Result<BaselineTable, ProblemError> {
    let set = generate_instances(kind, scale, count, seed)?;
    let refs: Result<Vec<f64>, ProblemError> = set.instances.par_iter().map(oracle).collect();
    let refs = match refs {
        Ok(r) => Some(r),
        Err(e @ ProblemError::TooLarge(_)) if exact => return Err(e),
        Err(ProblemError::TooLarge(_)) => None,
        Err(e) => return Err(e),
    };
    let methods: Vec<(&'static str, fn(&Instance) -> f64)> = match kind {
        ProblemKind::Tsp => vec![("nearest-neighbor", |i| match i {
            Instance::Tsp(t) => tsp::evaluate(&mut tsp::NearestNeighbor, t, 0).expect("native policy"),
            _ => unreachable!(),
        })],
        ProblemKind::Kp => vec![("density-greedy", |i| match i {
            Instance::Kp(k) => kp::evaluate(&mut kp::DensityGreedy, k).expect("native policy"),
            _ => unreachable!(),
        })],
        ProblemKind::BppOnline => vec![
            ("first-fit", |i| match i {
                Instance::Bpp(b) => bpp::evaluate(&mut bpp::FirstFit, b).expect("native policy") as f64,
                _ => unreachable!(),
            }),
            ("best-fit", |i| match i {
                Instance::Bpp(b) => bpp::evaluate(&mut bpp::BestFit, b).expect("native policy") as f64,
                _ => unreachable!(),
            }),
        ],
    };
    let rows = methods
        .into_iter()
        .map(|(method, f)| {
            let objs: Vec<f64> = set.instances.par_iter().map(f).collect();
            let gap_percent = refs.as_ref().map(|r| {
                let gaps: Vec<f64> = objs.iter().zip(r).map(|(o, r)| 100.0 * (o - r).abs() / r.abs()).collect();
                mean(&gaps)
            });
            BaselineRow { method, mean: mean(&objs), gap_percent }
        })
        .collect();
    Ok(BaselineTable {
        kind,
        n: scale.n,
        capacity: (kind != ProblemKind::Tsp).then(|| scale.capacity_for(kind)),
        count,
        seed,
        reference: Some(match kind {
            ProblemKind::BppOnline => "lower-bound",
            _ => "optimum",
        })
        .filter(|_| refs.is_some()),
        reference_mean: refs.as_deref().map(mean),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bpp_gap_matches_direct_computation() {
        let t = baselines(ProblemKind::BppOnline, Scale::with_capacity(200, 100.0), 2, 5, true).unwrap();
        let set = generate_instances(ProblemKind::BppOnline, Scale::with_capacity(200, 100.0), 2, 5).unwrap();
        let gaps: Vec<f64> = set
            .instances
            .iter()
            .map(|i| match i {
                Instance::Bpp(b) => bpp::gap(bpp::evaluate(&mut bpp::FirstFit, b).unwrap(), b.lower_bound()),
                _ => unreachable!(),
            })
            .collect();
        assert!((t.rows[0].gap_percent.unwrap() - 100.0 * (gaps[0] + gaps[1]) / 2.0).abs() < 1e-9);
        assert_eq!(t.rows.len(), 2);
    }

    #[test]
    fn oversized_tsp_oracle_is_optional() {
        let t = baselines(ProblemKind::Tsp, Scale::new(30), 2, 1, false).unwrap();
        assert!(t.reference_mean.is_none() && t.rows[0].gap_percent.is_none());
        assert!(matches!(baselines(ProblemKind::Tsp, Scale::new(30), 2, 1, true), Err(ProblemError::TooLarge(30))));
        let small = baselines(ProblemKind::Tsp, Scale::new(8), 3, 1, true).unwrap();
        assert!(small.rows[0].gap_percent.unwrap() >= 0.0);
    }
}
