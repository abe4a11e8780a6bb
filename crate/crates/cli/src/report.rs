//! CSV exports of a run's telemetry.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ahd_core::ast_metric::SimilarityMatrix;
use ahd_core::engine::{read_telemetry, RunDir, TelemetryRecord};
use anyhow::{bail, Context, Result};

#[derive(Debug, Default)]
pub struct Exported {
    pub files: Vec<PathBuf>,
}

pub fn export(run: &Path, out: &Path) -> Result<Exported> {
    let dir = RunDir::open(run)?;
    let path = dir.telemetry_path();
    if !path.exists() {
        bail!("missing telemetry: {} has no telemetry.jsonl", run.display());
    }
    let records = read_telemetry(&path)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut done = Exported::default();

    let conv = out.join("convergence.csv");
    let mut w = csv::Writer::from_path(&conv)?;
    w.write_record(["generation", "evaluations", "best", "tokens", "tuned"])?;
    for r in &records {
        if let TelemetryRecord::Convergence { generation, evaluations, best, tokens, tuned } = r {
            w.write_record([generation.to_string(), evaluations.to_string(), best.to_string(), tokens.to_string(), tuned.to_string()])?;
        }
    }
    w.flush()?;
    done.files.push(conv);

    for r in &records {
        if let TelemetryRecord::Similarity { generation, matrix } = r {
            let names: Vec<String> = (0..matrix.len()).map(|i| format!("island_{i}")).collect();
            let text = SimilarityMatrix::from_rows(matrix.clone()).to_csv(Some(&names));
            let p = out.join(format!("similarity_g{generation}.csv"));
            std::fs::write(&p, text)?;
            done.files.push(p);
        }
    }

    let arms = out.join("arms.csv");
    let mut w = csv::Writer::from_path(&arms)?;
    let mut header_written = false;
    let mut prev: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    for r in &records {
        let TelemetryRecord::Generation(row) = r else { continue };
        if !header_written {
            let mut h = vec!["generation".to_string(), "island".into(), "selected".into(), "reward".into()];
            for a in &row.arms {
                h.push(format!("n_{}", a.strategy.tag()));
                h.push(format!("q_{}", a.strategy.tag()));
                h.push(format!("dn_{}", a.strategy.tag()));
            }
            w.write_record(&h)?;
            header_written = true;
        }
        let before = prev.entry(row.island).or_insert_with(|| vec![0; row.arms.len()]);
        let mut cells = vec![row.generation.to_string(), row.island.to_string(), row.strategy.tag().to_string(), row.reward.to_string()];
        for (a, b) in row.arms.iter().zip(before.iter()) {
            cells.push(a.n.to_string());
            cells.push(a.q.to_string());
            cells.push((a.n - b).to_string());
        }
        *before = row.arms.iter().map(|a| a.n).collect();
        w.write_record(&cells)?;
    }
    if !header_written {
        w.write_record(["generation", "island", "selected", "reward"])?;
    }
    w.flush()?;
    done.files.push(arms);
    Ok(done)
}
