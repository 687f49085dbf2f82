use std::io;

use serde::Serialize;

use super::{ExperimentReport, RunOutcome};
use crate::characterize::ObservableMethod;
use crate::error::Result;
use crate::matcore::{eigh, CMatrix, C64};

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + &m.adjoint()).scale(C64::new(0.5, 0.0))
}

/// Uhlmann fidelity `(tr √(√ρ σ √ρ))²`.
///
/// Both arguments are symmetrized and negative eigenvalues are clipped, so a
/// slightly unphysical estimate still gives a number in `[0, 1]`.
pub fn fidelity(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    let sqrt_rho = eigh(&hermitian_part(rho))?.apply(|l| C64::new(l.max(0.0).sqrt(), 0.0));
    let inner = &(&sqrt_rho * &hermitian_part(sigma)) * &sqrt_rho;
    let spectrum = eigh(&hermitian_part(&inner))?.values;
    let root_sum: f64 = spectrum.iter().map(|l| l.max(0.0).sqrt()).sum();
    Ok(root_sum * root_sum)
}

/// Least-squares slope of `y` against `x`. `None` with fewer than two
/// distinct abscissae.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x[..n].iter().zip(&y[..n]) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    (sxx > 0.0).then(|| sxy / sxx)
}

pub const CSV_HEADER: [&str; 11] = [
    "seed", "sweep", "estimator", "i", "j", "k", "re_est", "im_est", "re_true", "im_true",
    "abs_err",
];

#[derive(Serialize)]
struct CsvRow {
    seed: u64,
    sweep: Option<f64>,
    estimator: Option<ObservableMethod>,
    i: usize,
    j: usize,
    k: Option<usize>,
    re_est: f64,
    im_est: f64,
    re_true: f64,
    im_true: f64,
    abs_err: f64,
}

/// One row per (seed, sweep point, element). Failed runs contribute no rows.
pub fn write_csv<W: io::Write>(report: &ExperimentReport, out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for run in &report.runs {
        let RunOutcome::Ok(m) = &run.outcome else {
            continue;
        };
        for e in &m.elements {
            w.serialize(CsvRow {
                seed: run.seed,
                sweep: run.sweep_point,
                estimator: run.estimator,
                i: e.i,
                j: e.j,
                k: e.k,
                re_est: e.estimate[0],
                im_est: e.estimate[1],
                re_true: e.truth[0],
                im_true: e.truth[1],
                abs_err: e.abs_err,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}
