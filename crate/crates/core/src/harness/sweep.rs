use std::time::Instant;

use rayon::prelude::*;

use super::{
    characterizer, DeltaThetaPoint, ExperimentConfig, ExperimentReport, Kind, ModeConfig,
    RunOutcome, RunRecord, ShotLevel, Sweep, SweepSummary, Trial,
};
use crate::characterize::ObservableMethod;
use crate::error::{Error, Result};
use crate::harness::ols_slope;

pub const MIN_DELTA_POINTS: usize = 4;
pub const MIN_DELTA_SPAN: f64 = 8.0;
pub const MIN_SHOT_LEVELS: usize = 3;
pub const MIN_REPETITIONS: usize = 50;

const METHODS: [ObservableMethod; 2] = [ObservableMethod::FirstOrder, ObservableMethod::Refined];

fn invalid<T>(msg: String) -> Result<T> {
    Err(Error::InvalidArgument(msg))
}

/// Errors of both observable estimators over a list of `δθ`, with log-log
/// slopes per seed and for the seed-averaged curve.
pub fn sweep_delta_theta(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let started = Instant::now();
    let cfg = cfg.resolved();
    cfg.validate()?;
    if cfg.kind != Kind::Observable {
        return invalid(format!("a delta_theta sweep needs kind observable, not {}", cfg.kind.name()));
    }
    let Some(Sweep::DeltaTheta { values }) = &cfg.sweep else {
        return invalid("config has no delta_theta sweep".into());
    };
    if values.len() < MIN_DELTA_POINTS {
        return invalid(format!(
            "delta_theta sweep needs at least {MIN_DELTA_POINTS} points, got {}",
            values.len()
        ));
    }
    let mags: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let lo = mags.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = mags.iter().copied().fold(0.0, f64::max);
    if !(lo > 0.0 && hi / lo >= MIN_DELTA_SPAN) {
        return invalid(format!("delta_theta values must span at least {MIN_DELTA_SPAN}x"));
    }
    for &v in values {
        cfg.observable.estimator(v, ObservableMethod::FirstOrder).validate()?;
    }

    let per_seed: Vec<Vec<RunRecord>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let trial = Trial::prepare(&cfg, seed);
            let ch = characterizer(&cfg, seed, None);
            let mut runs = Vec::with_capacity(2 * values.len());
            for &dt in values {
                for method in METHODS {
                    let obs = cfg.observable.estimator(dt, method);
                    let outcome = match &trial {
                        Ok(t) => t.measure(&cfg, &ch, &obs),
                        Err(e) => Err(e.clone()),
                    };
                    runs.push(RunRecord {
                        seed,
                        sweep_point: Some(dt),
                        estimator: Some(method),
                        outcome: outcome.into(),
                    });
                }
            }
            runs
        })
        .collect();

    let log_dt: Vec<f64> = mags.iter().map(|v| v.ln()).collect();
    let curve = |runs: &[RunRecord], method| -> Option<Vec<f64>> {
        runs.iter()
            .filter(|r| r.estimator == Some(method))
            .map(|r| r.metrics().map(|m| m.max_element_error))
            .collect()
    };
    let mut per_seed_slopes = Vec::new();
    let mut sums = [vec![0.0; values.len()], vec![0.0; values.len()]];
    let mut complete = 0usize;
    for (seed, runs) in cfg.seeds.iter().zip(&per_seed) {
        let (Some(first), Some(refined)) = (
            curve(runs, ObservableMethod::FirstOrder),
            curve(runs, ObservableMethod::Refined),
        ) else {
            continue;
        };
        complete += 1;
        for (n, (f, r)) in first.iter().zip(&refined).enumerate() {
            sums[0][n] += f;
            sums[1][n] += r;
        }
        per_seed_slopes.push((*seed, log_slope(&log_dt, &first), log_slope(&log_dt, &refined)));
    }
    if complete == 0 {
        return invalid("every seed failed; no slope can be fitted".into());
    }
    let mean = |s: &[f64]| s.iter().map(|v| v / complete as f64).collect::<Vec<_>>();
    let (first, refined) = (mean(&sums[0]), mean(&sums[1]));
    let points = values
        .iter()
        .zip(first.iter().zip(&refined))
        .map(|(&delta_theta, (&f, &r))| DeltaThetaPoint {
            delta_theta,
            first_order_error: f,
            refined_error: r,
        })
        .collect();
    let summary = SweepSummary::DeltaTheta {
        points,
        first_order_slope: log_slope(&log_dt, &first),
        refined_slope: log_slope(&log_dt, &refined),
        per_seed_slopes,
    };
    let runs = per_seed.into_iter().flatten().collect();
    Ok(ExperimentReport::assemble(cfg, runs, Some(summary), started))
}

fn log_slope(log_x: &[f64], y: &[f64]) -> f64 {
    let log_y: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    ols_slope(log_x, &log_y).unwrap_or(f64::NAN)
}

/// RMSE of sampled reconstructions at geometrically spaced shot counts, with
/// the log-log slope against shots.
pub fn sweep_shots(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let started = Instant::now();
    let cfg = cfg.resolved();
    cfg.validate()?;
    if !matches!(cfg.mode, ModeConfig::Sampled { .. }) {
        return invalid("a shots sweep needs sampled mode".into());
    }
    let Some(Sweep::Shots { levels, repetitions }) = &cfg.sweep else {
        return invalid("config has no shots sweep".into());
    };
    let reps = *repetitions;
    if reps < MIN_REPETITIONS {
        return invalid(format!(
            "{reps} repetitions are too few for a slope fit (need {MIN_REPETITIONS})"
        ));
    }
    if levels.len() < MIN_SHOT_LEVELS {
        return invalid(format!(
            "shots sweep needs at least {MIN_SHOT_LEVELS} levels, got {}",
            levels.len()
        ));
    }
    let ratio = levels[1] as f64 / levels[0] as f64;
    let geometric = ratio > 1.0
        && levels
            .windows(2)
            .all(|w| ((w[1] as f64 / w[0] as f64) / ratio - 1.0).abs() < 1e-9);
    if !geometric {
        return invalid("shot levels must form an increasing geometric progression".into());
    }
    let obs = cfg.observable.estimator(cfg.observable.delta_theta, cfg.observable.method);

    let mut runs = Vec::new();
    let mut sq_sums = vec![0.0; levels.len()];
    let mut counted = vec![0usize; levels.len()];
    for &seed in &cfg.seeds {
        let trial = match Trial::prepare(&cfg, seed) {
            Ok(t) => t,
            Err(e) => {
                for &shots in levels {
                    runs.push(shot_record(seed, shots, Err(e.clone())));
                }
                continue;
            }
        };
        for (n, &shots) in levels.iter().enumerate() {
            let rep = |r: usize| {
                let ch = characterizer(&cfg, seed, Some((shots, r as u64)));
                trial.reconstruct(cfg.kind, &ch, &obs)
            };
            let first = rep(0).and_then(|est| {
                let metrics = trial.metrics(cfg.kind, &est)?;
                Ok((trial.error(&est)?, metrics))
            });
            let rest: Result<Vec<f64>> = (1..reps)
                .into_par_iter()
                .map(|r| rep(r).and_then(|est| trial.error(&est)))
                .collect();
            let outcome = first.and_then(|(e0, mut metrics)| {
                let sq: f64 = e0 * e0 + rest?.iter().map(|e| e * e).sum::<f64>();
                sq_sums[n] += sq;
                counted[n] += reps;
                metrics.rmse = Some((sq / reps as f64).sqrt());
                metrics.repetitions = Some(reps);
                Ok(metrics)
            });
            runs.push(shot_record(seed, shots, outcome));
        }
    }
    if counted.contains(&0) {
        return invalid("every seed failed at some shot level; no slope can be fitted".into());
    }
    let shot_levels: Vec<ShotLevel> = levels
        .iter()
        .zip(sq_sums.iter().zip(&counted))
        .map(|(&shots, (&sq, &c))| ShotLevel {
            shots,
            rmse: (sq / c as f64).sqrt(),
        })
        .collect();
    let log_shots: Vec<f64> = levels.iter().map(|&s| (s as f64).ln()).collect();
    let rmse: Vec<f64> = shot_levels.iter().map(|l| l.rmse).collect();
    let summary = SweepSummary::Shots {
        slope: log_slope(&log_shots, &rmse),
        levels: shot_levels,
        repetitions: reps,
    };
    Ok(ExperimentReport::assemble(cfg, runs, Some(summary), started))
}

/// Element rows and the Frobenius error come from the first repetition; the
/// RMSE covers all of them.
fn shot_record(seed: u64, shots: u64, outcome: Result<super::RunMetrics>) -> RunRecord {
    RunRecord {
        seed,
        sweep_point: Some(shots as f64),
        estimator: None,
        outcome: RunOutcome::from(outcome),
    }
}
