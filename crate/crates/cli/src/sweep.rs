//! Grid study over mixing temperature β and cross-cascade reinforcement σ₂₁:
//! data are drawn from the full model, then the full model, independent
//! cascades (IC) and correlated cascades (CC) are fitted and compared on
//! held-out log-likelihood.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use mic_core::{
    fit, generate_scenario, simulate, split_train_test, test_log_likelihood, FitConfig, InteractionSpec, Mixing,
    ModelVariant, ScenarioConfig,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SWEEP_SCHEMA: &str = "mic.sweep/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub betas: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub replications: u64,
    pub base_seed: u64,
    pub n_users: usize,
    pub n_cascades: usize,
    pub edge_prob: f64,
    pub horizon: f64,
    pub tau: f64,
    pub w_max: f64,
    pub mu_max: f64,
    pub train_fraction: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            betas: vec![0.01, 1.0, 33.0],
            sigmas: vec![0.0, 0.5, 1.0],
            replications: 10,
            base_seed: 0,
            n_users: 20,
            n_cascades: 3,
            edge_prob: 0.05,
            horizon: 200.0,
            tau: 3.0,
            w_max: 1.0,
            mu_max: 0.2,
            train_fraction: 0.8,
        }
    }
}

/// One (β, σ₂₁, replication) job as stored in the journal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub beta: f64,
    pub sigma21: f64,
    pub replication: u64,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub loglik_mic: f64,
    pub loglik_ic: f64,
    pub loglik_cc: f64,
    /// `L_IC / L_MIC`; above one means IC explains the test period worse (for negative scores).
    pub ratio_ic: f64,
    pub ratio_cc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub beta: f64,
    pub sigma21: f64,
    pub replications: usize,
    pub failures: usize,
    pub mean_ratio_ic: Option<f64>,
    pub mean_ratio_cc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub schema: String,
    pub config: SweepConfig,
    pub cells: Vec<SweepCell>,
}

/// Journal line: a finished job or the reason it failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum JournalLine {
    Done(SweepRecord),
    Failed {
        beta: f64,
        sigma21: f64,
        replication: u64,
        error: String,
    },
}

impl JournalLine {
    fn key(&self) -> (u64, u64, u64) {
        match self {
            Self::Done(r) => (r.beta.to_bits(), r.sigma21.to_bits(), r.replication),
            Self::Failed {
                beta,
                sigma21,
                replication,
                ..
            } => (beta.to_bits(), sigma21.to_bits(), *replication),
        }
    }
}

/// Seed of a job, derived from the base seed and the job's grid values so it
/// does not depend on the order of the grids.
pub fn job_seed(base_seed: u64, beta: f64, sigma21: f64, replication: u64) -> u64 {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    for word in [base_seed, beta.to_bits(), sigma21.to_bits(), replication] {
        h.update(word.to_le_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

pub fn run_job(cfg: &SweepConfig, beta: f64, sigma21: f64, replication: u64, seed: u64) -> mic_core::Result<SweepRecord> {
    let mixing = Mixing::boltzmann(beta)?;
    let scenario = ScenarioConfig {
        n_users: cfg.n_users,
        n_cascades: cfg.n_cascades,
        edge_prob: cfg.edge_prob,
        horizon: cfg.horizon,
        tau: cfg.tau,
        w_max: cfg.w_max,
        mu_max: cfg.mu_max,
        ..ScenarioConfig::synthetic(mixing, InteractionSpec::reinforcement(cfg.n_cascades, sigma21), seed)
    };
    let (graph, truth) = generate_scenario(&scenario)?;
    let log = simulate(&truth, &graph, cfg.horizon, seed)?;
    let (train, test) = split_train_test(&log, cfg.train_fraction)?;
    let score = |variant: ModelVariant| -> mic_core::Result<f64> {
        let fit_cfg = FitConfig {
            n_cascades: Some(cfg.n_cascades),
            parallel_users: false,
            ..FitConfig::for_variant(variant, cfg.tau)
        };
        let fitted = fit(&train, &graph, &fit_cfg)?;
        test_log_likelihood(&fitted.params, &graph, &train, &test, None)
    };
    let loglik_mic = score(ModelVariant::Mic { beta })?;
    let loglik_ic = score(ModelVariant::Ic)?;
    let loglik_cc = score(ModelVariant::Cc { beta })?;
    Ok(SweepRecord {
        beta,
        sigma21,
        replication,
        seed,
        n_train: train.len(),
        n_test: test.len(),
        loglik_mic,
        loglik_ic,
        loglik_cc,
        ratio_ic: loglik_ic / loglik_mic,
        ratio_cc: loglik_cc / loglik_mic,
    })
}

/// Parses the journal, cutting off a partial last line left by an interrupted
/// append so that new records start on a fresh line.
fn read_journal(path: &Path) -> Result<Vec<JournalLine>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    if !text.is_empty() && !text.ends_with('\n') {
        let keep = text.rfind('\n').map_or(0, |i| i + 1);
        log::warn!("dropping truncated journal tail {:?}", &text[keep..]);
        text.truncate(keep);
        crate::artifact::write_atomic(path, text.as_bytes())?;
    }
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| serde_json::from_str(line).map_err(|e| CliError::data(path, format!("journal line {}: {e}", i + 1))))
        .collect()
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Runs every job missing from `journal`, appending each result as it
/// finishes, and summarizes the journal into a table.
pub fn run_sweep(cfg: &SweepConfig, journal: &Path) -> Result<SweepTable> {
    if cfg.betas.is_empty() || cfg.sigmas.is_empty() || cfg.replications == 0 {
        return Err(CliError::Usage("sweep needs nonempty grids and at least one replication".into()));
    }
    let mut done: BTreeMap<(u64, u64, u64), JournalLine> = read_journal(journal)?
        .into_iter()
        .map(|l| (l.key(), l))
        .collect();

    let cells: Vec<(f64, f64)> = cfg
        .betas
        .iter()
        .flat_map(|&b| cfg.sigmas.iter().map(move |&s| (b, s)))
        .collect();
    let pending: Vec<(f64, f64, u64)> = cells
        .iter()
        .flat_map(|&(b, s)| (0..cfg.replications).map(move |r| (b, s, r)))
        .filter(|&(b, s, r)| !done.contains_key(&(b.to_bits(), s.to_bits(), r)))
        .collect();
    if !done.is_empty() {
        log::info!("resuming sweep: {} jobs done, {} pending", done.len(), pending.len());
    }

    if let Some(dir) = journal.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(journal)
        .map_err(|e| CliError::io(journal, e))?;
    let sink = Mutex::new(file);
    let finished: Vec<JournalLine> = pending
        .par_iter()
        .map(|&(beta, sigma21, replication)| {
            let seed = job_seed(cfg.base_seed, beta, sigma21, replication);
            let line = match run_job(cfg, beta, sigma21, replication, seed) {
                Ok(r) => JournalLine::Done(r),
                Err(e) => {
                    log::warn!("sweep job beta={beta} sigma21={sigma21} rep={replication} failed: {e}");
                    JournalLine::Failed {
                        beta,
                        sigma21,
                        replication,
                        error: e.to_string(),
                    }
                }
            };
            let mut text = serde_json::to_string(&line).expect("journal lines serialize");
            text.push('\n');
            let mut f = sink.lock().expect("journal lock");
            f.write_all(text.as_bytes())
                .and_then(|_| f.flush())
                .map_err(|e| CliError::io(journal, e))?;
            Ok(line)
        })
        .collect::<Result<_>>()?;
    for l in finished {
        done.insert(l.key(), l);
    }

    let cells = cells
        .iter()
        .map(|&(beta, sigma21)| {
            let mut ic = Vec::new();
            let mut cc = Vec::new();
            let mut failures = 0;
            for r in 0..cfg.replications {
                match done.get(&(beta.to_bits(), sigma21.to_bits(), r)) {
                    Some(JournalLine::Done(rec)) => {
                        ic.push(rec.ratio_ic);
                        cc.push(rec.ratio_cc);
                    }
                    _ => failures += 1,
                }
            }
            SweepCell {
                beta,
                sigma21,
                replications: ic.len(),
                failures,
                mean_ratio_ic: mean(&ic),
                mean_ratio_cc: mean(&cc),
            }
        })
        .collect();
    Ok(SweepTable {
        schema: SWEEP_SCHEMA.to_string(),
        config: cfg.clone(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> SweepConfig {
        SweepConfig {
            betas: vec![1.0],
            sigmas: vec![0.5],
            replications: 2,
            n_users: 6,
            edge_prob: 0.2,
            horizon: 60.0,
            ..SweepConfig::default()
        }
    }

    #[test]
    fn resumes_from_journal() {
        let dir = tempfile::tempdir().unwrap();
        let journal = dir.path().join("j.jsonl");
        let first = run_sweep(&tiny(), &journal).unwrap();
        assert_eq!(first.cells.len(), 1);
        assert_eq!(first.cells[0].replications + first.cells[0].failures, 2);
        let lines_before = fs::read_to_string(&journal).unwrap().lines().count();
        assert_eq!(lines_before, 2);

        // drop one job and leave a torn line behind, as after an interruption
        let text = fs::read_to_string(&journal).unwrap();
        let keep = text.lines().next().unwrap();
        fs::write(&journal, format!("{keep}\n{{\"beta\": 1.0, \"sig")).unwrap();
        let resumed = run_sweep(&tiny(), &journal).unwrap();
        assert_eq!(resumed.cells, first.cells);
    }
}
