//! The invariant suite behind `verify` and the acceptance tests.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};
use std::time::Instant;

use serde::Serialize;

use super::{
    run_experiment, sweep_delta_theta, sweep_shots, ExperimentConfig, ExperimentReport, Kind,
    ModeConfig, Sweep, SweepSummary,
};
use crate::characterize::Characterizer;
use crate::error::Result;
use crate::matcore::{
    derive_seed, frobenius_distance, random_density, random_unitary, random_state, sigma_x,
    sigma_z, CMatrix, C64,
};
use crate::protocol::{evolve, exact_expectation, lhs_oracle, ProtocolInstance};
use crate::quantum::{
    apply_channel, dilated_channel, dilation_from_kraus, uniform_state, DensityMatrix, Dilation,
    KrausSet,
};

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

fn timed(id: u8, name: &'static str, body: impl FnOnce() -> Result<(bool, String)>) -> Check {
    let started = Instant::now();
    let (passed, detail) = body().unwrap_or_else(|e| (false, format!("error: {e}")));
    Check {
        id,
        name,
        passed,
        detail,
        seconds: started.elapsed().as_secs_f64(),
    }
}

/// Runs every check in order.
pub fn run_suite() -> Vec<Check> {
    vec![
        central_identity(),
        povm_ambiguity_check(),
        round_trips(),
        setting_count(),
        coupling_independence(),
        observable_orders(),
        shot_scaling(),
        stinespring_consistency(),
    ]
}

pub fn central_identity() -> Check {
    timed(1, "central identity", || {
        let mut worst: f64 = 0.0;
        for d_s in 2..=4 {
            for d_e in 2..=4 {
                for seed in 0..20 {
                    let inst = ProtocolInstance::random(d_s, Some(d_e), seed)?;
                    let ev = evolve(&inst);
                    for i in 0..d_s {
                        for k in 0..d_e {
                            let lhs = lhs_oracle(&inst, i, Some(k))?;
                            let rhs = exact_expectation(&ev, i, Some(k))?.ratio()?;
                            worst = worst.max((lhs - rhs).norm());
                        }
                    }
                }
            }
        }
        Ok((worst <= 1e-10, format!("max |lhs - rhs| = {worst:.2e}")))
    })
}

/// Two Kraus operators with the same POVM element, characterized both ways.
#[derive(Clone, Debug)]
pub struct AmbiguityDemo {
    pub kraus: CMatrix,
    pub kraus_tilde: CMatrix,
    pub povm: CMatrix,
    pub povm_tilde: CMatrix,
    /// `‖Â₀ − Ã̂₀‖_F`.
    pub kraus_distance: f64,
    /// Largest Frobenius distance of either `Ê₀` from `½I`.
    pub povm_error: f64,
}

/// `A₀ = I/√2` against `Ã₀ = ½(σ_X + σ_Z)`, both completed to a two-outcome
/// measurement with `E₀ = ½I`.
pub fn povm_ambiguity() -> Result<AmbiguityDemo> {
    let half = C64::new(0.5, 0.0);
    let a0 = CMatrix::identity(2).scale(C64::new(FRAC_1_SQRT_2, 0.0));
    let plain = KrausSet::new(vec![a0.clone(), a0])?;
    let tilde = KrausSet::new(vec![
        (sigma_x() + sigma_z()).scale(half),
        (sigma_x() - sigma_z()).scale(half),
    ])?;
    let xi = uniform_state(2);
    let (plain, tilde) = (dilation_from_kraus(&plain, &xi)?, dilation_from_kraus(&tilde, &xi)?);
    let ch = Characterizer::default();
    let rho = DensityMatrix::depolarized_plus(2, 0.3)?;
    let kraus = ch.kraus_full(&plain, &rho, 0)?.matrix();
    let kraus_tilde = ch.kraus_full(&tilde, &rho, 0)?.matrix();
    let povm = ch.povm_full(&plain, &rho, 0)?.matrix();
    let povm_tilde = ch.povm_full(&tilde, &rho, 0)?.matrix();
    let target = CMatrix::identity(2).scale(half);
    let povm_error = frobenius_distance(&povm, &target)?.max(frobenius_distance(&povm_tilde, &target)?);
    Ok(AmbiguityDemo {
        kraus_distance: frobenius_distance(&kraus, &kraus_tilde)?,
        kraus,
        kraus_tilde,
        povm,
        povm_tilde,
        povm_error,
    })
}

pub fn povm_ambiguity_check() -> Check {
    timed(2, "POVM ambiguity", || {
        let demo = povm_ambiguity()?;
        Ok((
            demo.povm_error <= 1e-9 && demo.kraus_distance > 0.5,
            format!(
                "max |E0 - I/2|_F = {:.2e}, |A0 - A0~|_F = {:.3}",
                demo.povm_error, demo.kraus_distance
            ),
        ))
    })
}

fn report_for(kind: Kind, d: usize, seeds: std::ops::Range<u64>, theta: f64) -> Result<ExperimentReport> {
    let mut cfg = ExperimentConfig::new(kind, d, seeds.collect());
    cfg.theta = theta;
    run_experiment(&cfg)
}

pub fn round_trips() -> Check {
    timed(3, "exact round trips", || {
        let (mut worst, mut completeness, mut herm, mut trace): (f64, f64, f64, f64) =
            (0.0, 0.0, 0.0, 0.0);
        let mut failures = 0;
        for kind in [Kind::Kraus, Kind::Unitary, Kind::Density] {
            for d in 2..=4 {
                let report = report_for(kind, d, 0..20, FRAC_PI_2)?;
                failures += report.summary.failures;
                for m in report.runs.iter().filter_map(|r| r.metrics()) {
                    worst = worst.max(m.frobenius_error);
                    completeness = completeness.max(m.residuals.completeness.unwrap_or(0.0));
                    herm = herm.max(m.residuals.hermiticity.unwrap_or(0.0));
                    trace = trace.max(m.residuals.trace.unwrap_or(0.0));
                }
            }
        }
        let passed =
            failures == 0 && worst <= 1e-9 && completeness <= 1e-8 && herm <= 1e-9 && trace <= 1e-8;
        Ok((
            passed,
            format!(
                "failures {failures}, max error {worst:.2e}, completeness {completeness:.2e}, \
                 hermiticity {herm:.2e}, trace {trace:.2e}"
            ),
        ))
    })
}

pub fn setting_count() -> Check {
    timed(4, "setting count", || {
        let mut bad = Vec::new();
        for kind in [Kind::Kraus, Kind::Povm, Kind::Unitary, Kind::Observable, Kind::Density] {
            for d in 2..=4 {
                let report = report_for(kind, d, 0..3, FRAC_PI_2)?;
                let ok = report.summary.failures == 0 && report.summary.settings_consistent;
                if !ok {
                    bad.push(format!("{}/d={d}", kind.name()));
                }
            }
        }
        let detail = if bad.is_empty() {
            "every full reconstruction used d_S + 1 settings".to_string()
        } else {
            format!("inconsistent: {}", bad.join(", "))
        };
        Ok((bad.is_empty(), detail))
    })
}

pub fn coupling_independence() -> Check {
    timed(5, "coupling-strength independence", || {
        let mut worst: f64 = 0.0;
        for kind in [Kind::Kraus, Kind::Povm, Kind::Unitary, Kind::Density] {
            let reports = [FRAC_PI_4, FRAC_PI_2, PI]
                .iter()
                .map(|&theta| report_for(kind, 3, 0..5, theta))
                .collect::<Result<Vec<_>>>()?;
            for other in &reports[1..] {
                for (a, b) in reports[0].runs.iter().zip(&other.runs) {
                    let (Some(a), Some(b)) = (a.metrics(), b.metrics()) else {
                        return Ok((false, format!("{} run failed", kind.name())));
                    };
                    for (x, y) in a.elements.iter().zip(&b.elements) {
                        let dx = C64::new(x.estimate[0] - y.estimate[0], x.estimate[1] - y.estimate[1]);
                        worst = worst.max(dx.norm());
                    }
                    worst = worst.max((a.frobenius_error - b.frobenius_error).abs());
                }
            }
        }
        Ok((worst <= 1e-9, format!("max difference across theta = {worst:.2e}")))
    })
}

pub fn observable_orders() -> Check {
    timed(6, "observable estimator orders", || {
        let mut cfg = ExperimentConfig::new(Kind::Observable, 3, (0..10).collect());
        cfg.sweep = Some(Sweep::DeltaTheta {
            values: vec![0.1, 0.05, 0.025, 0.0125],
        });
        let report = sweep_delta_theta(&cfg)?;
        let Some(SweepSummary::DeltaTheta {
            first_order_slope,
            refined_slope,
            per_seed_slopes,
            ..
        }) = &report.sweep
        else {
            return Ok((false, "missing sweep summary".into()));
        };
        let in_band = |s: f64, target: f64| (s - target).abs() <= 0.2;
        let slopes_ok = per_seed_slopes.len() == 10
            && per_seed_slopes.iter().all(|&(_, f, r)| in_band(f, 1.0) && in_band(r, 2.0))
            && in_band(*first_order_slope, 1.0)
            && in_band(*refined_slope, 2.0);
        // refined never worse than first order, seed by seed and point by point
        let mut ordered = true;
        for pair in report.runs.chunks(2) {
            match (pair[0].metrics(), pair[1].metrics()) {
                (Some(f), Some(r)) => ordered &= r.max_element_error <= f.max_element_error,
                _ => ordered = false,
            }
        }
        Ok((
            slopes_ok && ordered,
            format!(
                "slopes first order {first_order_slope:.3}, refined {refined_slope:.3}; \
                 refined <= first order everywhere: {ordered}"
            ),
        ))
    })
}

/// The shot sweep used by the scaling check.
pub fn shot_scaling_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(Kind::Kraus, 2, vec![7]);
    cfg.d_e = 2;
    cfg.mode = ModeConfig::Sampled { shots: 10_000 };
    cfg.sweep = Some(Sweep::Shots {
        levels: vec![10_000, 40_000, 160_000],
        repetitions: 50,
    });
    cfg
}

pub fn shot_scaling() -> Check {
    timed(7, "shot-noise scaling", || {
        let cfg = shot_scaling_config();
        let a = sweep_shots(&cfg)?;
        let b = sweep_shots(&cfg)?;
        let identical = a.without_timing() == b.without_timing();
        let Some(SweepSummary::Shots { slope, .. }) = a.sweep else {
            return Ok((false, "missing sweep summary".into()));
        };
        Ok((
            (slope + 0.5).abs() <= 0.15 && identical,
            format!("slope {slope:.3}, bit-identical rerun: {identical}"),
        ))
    })
}

pub fn stinespring_consistency() -> Check {
    timed(8, "Stinespring consistency", || {
        let mut worst: f64 = 0.0;
        for seed in 0..20u64 {
            let d_s = 2 + (seed % 3) as usize;
            let d_e = 2 + (seed / 3 % 3) as usize;
            let s = |tag| derive_seed(seed, &[tag]);
            let dil = Dilation::new(random_unitary(d_s * d_e, s(0)), random_state(d_e, s(1)), d_s)?;
            let rho = DensityMatrix::new(random_density(d_s, s(2)))?;
            let via_kraus = apply_channel(&dil.kraus_set(), &rho)?;
            let via_dilation = dilated_channel(&dil, &rho)?;
            worst = worst.max(via_kraus.mat().max_abs_diff(via_dilation.mat()));
        }
        Ok((worst <= 1e-10, format!("max entry difference = {worst:.2e}")))
    })
}
