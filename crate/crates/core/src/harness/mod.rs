//! Experiment orchestration: instance generation, per-seed error metrics,
//! sweeps and report assembly.
//!
//! Every run is seeded from the config alone, so a report is reproducible
//! bit for bit apart from its wall time. Seeds are processed in parallel and
//! collected in config order.

mod config;
mod metrics;
pub mod suite;
mod sweep;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::characterize::{Characterizer, ObservableEstimatorConfig, ObservableMethod, Residuals};
use crate::error::{Error, Result};
use crate::matcore::{derive_seed, frobenius_distance, CMatrix, C64};
use crate::protocol::Mode;
use crate::quantum::DensityMatrix;

pub use config::{
    ExperimentConfig, InstanceSource, Kind, ModeConfig, ObservableSettings, Sweep, MAX_DIM,
    MIN_DIM, MIN_SHOTS,
};
pub use metrics::{fidelity, ols_slope, write_csv};
pub use suite::{povm_ambiguity, run_suite, AmbiguityDemo, Check};
pub use sweep::{sweep_delta_theta, sweep_shots, MIN_REPETITIONS};

use config::Hidden;

/// Tag for the measurement stream of a seed, so that sampling noise is
/// independent of the random instance drawn from the same seed.
const MEASUREMENT_STREAM: u64 = 0x6d65_6173;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementRow {
    pub i: usize,
    pub j: usize,
    pub k: Option<usize>,
    pub estimate: [f64; 2],
    pub truth: [f64; 2],
    pub abs_err: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// `sqrt(Σ_k ‖Â_k − A_k‖_F²)` over every reconstructed operator.
    pub frobenius_error: f64,
    pub max_element_error: f64,
    /// Only for density targets.
    pub fidelity: Option<f64>,
    pub residuals: Residuals,
    pub settings_used: usize,
    /// Root-mean-square Frobenius error over repetitions in a shot sweep.
    pub rmse: Option<f64>,
    pub repetitions: Option<usize>,
    pub elements: Vec<ElementRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum RunOutcome {
    Ok(RunMetrics),
    Failed { error: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    /// `δθ` or shot count for sweep runs.
    pub sweep_point: Option<f64>,
    pub estimator: Option<ObservableMethod>,
    pub outcome: RunOutcome,
}

impl RunRecord {
    pub fn metrics(&self) -> Option<&RunMetrics> {
        match &self.outcome {
            RunOutcome::Ok(m) => Some(m),
            RunOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub failures: usize,
    pub max_frobenius_error: Option<f64>,
    pub mean_frobenius_error: Option<f64>,
    /// Every successful run used exactly `d_S + 1` settings.
    pub settings_consistent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaThetaPoint {
    pub delta_theta: f64,
    /// Mean over seeds of the largest element error.
    pub first_order_error: f64,
    pub refined_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotLevel {
    pub shots: u64,
    /// Pooled over seeds and repetitions.
    pub rmse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "axis")]
pub enum SweepSummary {
    DeltaTheta {
        points: Vec<DeltaThetaPoint>,
        first_order_slope: f64,
        refined_slope: f64,
        /// `(seed, first-order slope, refined slope)`.
        per_seed_slopes: Vec<(u64, f64, f64)>,
    },
    Shots {
        levels: Vec<ShotLevel>,
        repetitions: usize,
        slope: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: String,
    /// The fully resolved config, defaults included.
    pub config: ExperimentConfig,
    pub runs: Vec<RunRecord>,
    pub summary: Summary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSummary>,
    pub wall_time_s: f64,
}

impl ExperimentReport {
    pub(crate) fn assemble(
        config: ExperimentConfig,
        runs: Vec<RunRecord>,
        sweep: Option<SweepSummary>,
        started: Instant,
    ) -> Self {
        let d_s = config.d_s;
        let ok: Vec<&RunMetrics> = runs.iter().filter_map(RunRecord::metrics).collect();
        let errors: Vec<f64> = ok.iter().map(|m| m.frobenius_error).collect();
        let summary = Summary {
            runs: runs.len(),
            failures: runs.len() - ok.len(),
            max_frobenius_error: errors.iter().copied().reduce(f64::max),
            mean_frobenius_error: (!errors.is_empty())
                .then(|| errors.iter().sum::<f64>() / errors.len() as f64),
            settings_consistent: ok.iter().all(|m| m.settings_used == d_s + 1),
        };
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            runs,
            summary,
            sweep,
            wall_time_s: started.elapsed().as_secs_f64(),
        }
    }

    /// The report with its wall time zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_time_s: 0.0,
            ..self.clone()
        }
    }
}

/// Runs the experiment described by `cfg`, dispatching to a sweep when one
/// is configured.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match cfg.sweep {
        Some(Sweep::DeltaTheta { .. }) => sweep_delta_theta(cfg),
        Some(Sweep::Shots { .. }) => sweep_shots(cfg),
        None => {
            let started = Instant::now();
            let cfg = cfg.resolved();
            cfg.validate()?;
            let obs = cfg.observable.estimator(cfg.observable.delta_theta, cfg.observable.method);
            let runs = cfg
                .seeds
                .par_iter()
                .map(|&seed| {
                    let outcome = Trial::prepare(&cfg, seed).and_then(|t| {
                        let ch = characterizer(&cfg, seed, None);
                        t.measure(&cfg, &ch, &obs)
                    });
                    RunRecord {
                        seed,
                        sweep_point: None,
                        estimator: None,
                        outcome: outcome.into(),
                    }
                })
                .collect();
            Ok(ExperimentReport::assemble(cfg, runs, None, started))
        }
    }
}

impl From<Result<RunMetrics>> for RunOutcome {
    fn from(r: Result<RunMetrics>) -> Self {
        match r {
            Ok(m) => RunOutcome::Ok(m),
            Err(e) => RunOutcome::Failed {
                error: e.to_string(),
            },
        }
    }
}

/// The characterizer for one seed. `shots` overrides the configured count.
pub(crate) fn characterizer(cfg: &ExperimentConfig, seed: u64, shots: Option<(u64, u64)>) -> Characterizer {
    let mode = match (cfg.mode, shots) {
        (_, Some((shots, stream))) => Mode::Sampled {
            shots,
            seed: derive_seed(seed, &[MEASUREMENT_STREAM, stream]),
        },
        (ModeConfig::Exact, None) => Mode::Exact,
        (ModeConfig::Sampled { shots }, None) => Mode::Sampled {
            shots,
            seed: derive_seed(seed, &[MEASUREMENT_STREAM]),
        },
    };
    Characterizer {
        chi: cfg.chi(),
        theta: cfg.theta,
        mode,
    }
}

/// A hidden operator for one seed, together with its oracle values.
pub(crate) struct Trial {
    hidden: Hidden,
    rho_s: DensityMatrix,
    reference: Option<CMatrix>,
    truth: Vec<(Option<usize>, CMatrix)>,
}

/// Reconstructed operators with their per-element standard errors.
pub(crate) struct Estimate {
    ops: Vec<(Option<usize>, CMatrix, Vec<f64>)>,
    residuals: Residuals,
    settings_used: usize,
}

impl Trial {
    pub(crate) fn prepare(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        let hidden = Hidden::build(cfg, seed)?;
        let truth = hidden.truth(cfg.kind)?;
        let (rho_s, reference) = match &hidden {
            Hidden::Density(rho) => (rho.clone(), Some(Hidden::reference(cfg)?)),
            _ => (cfg.input_state()?, None),
        };
        Ok(Self {
            hidden,
            rho_s,
            reference,
            truth,
        })
    }

    pub(crate) fn reconstruct(
        &self,
        kind: Kind,
        ch: &Characterizer,
        obs: &ObservableEstimatorConfig,
    ) -> Result<Estimate> {
        let rho = &self.rho_s;
        let single = |rec: crate::characterize::Reconstruction| Estimate {
            ops: vec![(None, rec.matrix(), rec.std_errors.clone())],
            residuals: rec.residuals,
            settings_used: rec.settings_used,
        };
        Ok(match (&self.hidden, kind) {
            (Hidden::Channel(dil), Kind::Kraus) => {
                let set = ch.kraus_set_full(dil, rho)?;
                let settings_used = set.operators.iter().map(|r| r.settings_used).max().unwrap_or(0);
                Estimate {
                    ops: set
                        .operators
                        .iter()
                        .enumerate()
                        .map(|(k, r)| (Some(k), r.matrix(), r.std_errors.clone()))
                        .collect(),
                    residuals: Residuals {
                        completeness: Some(set.completeness_residual),
                        ..Residuals::default()
                    },
                    settings_used,
                }
            }
            (Hidden::Channel(dil), Kind::Povm) => {
                let recs = (0..dil.env_dim())
                    .map(|k| ch.povm_full(dil, rho, k))
                    .collect::<Result<Vec<_>>>()?;
                let mats: Vec<CMatrix> = recs.iter().map(|r| r.matrix()).collect();
                let d = rho.dim();
                let sum = mats.iter().fold(CMatrix::zeros(d, d), |acc, e| &acc + e);
                let completeness = frobenius_distance(&sum, &CMatrix::identity(d))?;
                let hermiticity = mats.iter().map(CMatrix::hermiticity_residual).fold(0.0, f64::max);
                Estimate {
                    settings_used: recs.iter().map(|r| r.settings_used).max().unwrap_or(0),
                    ops: recs
                        .into_iter()
                        .zip(mats)
                        .enumerate()
                        .map(|(k, (r, m))| (Some(k), m, r.std_errors))
                        .collect(),
                    residuals: Residuals {
                        hermiticity: Some(hermiticity),
                        completeness: Some(completeness),
                        ..Residuals::default()
                    },
                }
            }
            (Hidden::Unitary(u), Kind::Unitary) => single(ch.unitary_full(u, rho)?),
            (Hidden::Observable(a), Kind::Observable) => single(ch.observable_full(a, rho, obs)?),
            (Hidden::Density(state), Kind::Density) => {
                let reference = self.reference.as_ref().expect("density trials carry a reference");
                single(ch.density_full(state, reference)?)
            }
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "hidden operator does not match kind {}",
                    kind.name()
                )))
            }
        })
    }

    /// `sqrt(Σ_k ‖Â_k − A_k‖_F²)`.
    pub(crate) fn error(&self, est: &Estimate) -> Result<f64> {
        let mut sum = 0.0;
        for ((_, truth), (_, m, _)) in self.truth.iter().zip(&est.ops) {
            sum += frobenius_distance(m, truth)?.powi(2);
        }
        Ok(sum.sqrt())
    }

    pub(crate) fn metrics(&self, kind: Kind, est: &Estimate) -> Result<RunMetrics> {
        let mut elements = Vec::new();
        let mut max_element_error: f64 = 0.0;
        for ((k, truth), (_, m, se)) in self.truth.iter().zip(&est.ops) {
            let d = truth.rows();
            for i in 0..d {
                for j in 0..d {
                    let (e, t): (C64, C64) = (m[(i, j)], truth[(i, j)]);
                    let abs_err = (e - t).norm();
                    max_element_error = max_element_error.max(abs_err);
                    elements.push(ElementRow {
                        i,
                        j,
                        k: *k,
                        estimate: [e.re, e.im],
                        truth: [t.re, t.im],
                        abs_err,
                        std_error: se.get(i * d + j).copied().unwrap_or(0.0),
                    });
                }
            }
        }
        let fidelity = match kind {
            Kind::Density => Some(fidelity(&self.truth[0].1, &est.ops[0].1)?),
            _ => None,
        };
        Ok(RunMetrics {
            frobenius_error: self.error(est)?,
            max_element_error,
            fidelity,
            residuals: est.residuals,
            settings_used: est.settings_used,
            rmse: None,
            repetitions: None,
            elements,
        })
    }

    pub(crate) fn measure(
        &self,
        cfg: &ExperimentConfig,
        ch: &Characterizer,
        obs: &ObservableEstimatorConfig,
    ) -> Result<RunMetrics> {
        let est = self.reconstruct(cfg.kind, ch, obs)?;
        self.metrics(cfg.kind, &est)
    }
}

#[cfg(test)]
mod tests;
