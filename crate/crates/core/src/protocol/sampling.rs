//! Finite-shot estimation of the protocol expectation.
//!
//! `σ^x + iσ^y` is not Hermitian, so it is never measured as such: the real
//! part comes from measuring the probe in the σ^x eigenbasis and the
//! imaginary part from the σ^y eigenbasis, each jointly with the system in
//! the computational basis and the environment in its pointer basis.

use rand_distr::{Binomial, Distribution};

use super::{Evolved, ExpectationRecord, Mode, MIN_NORMALIZATION};
use crate::error::{Error, Result};
use crate::matcore::{derive_seed, rng_from_seed, trace_product, CMatrix, C64, I};

#[derive(Clone, Copy)]
enum Setting {
    X = 1,
    Y = 2,
}

impl Setting {
    /// Probe eigenvectors for eigenvalues +1 and −1.
    fn eigenbasis(self) -> [[C64; 2]; 2] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let one = C64::new(h, 0.0);
        let phase = match self {
            Setting::X => C64::new(h, 0.0),
            Setting::Y => I * h,
        };
        [[one, phase], [one, -phase]]
    }
}

/// Empirical mean of `(±1)·1[i'=i]·1[k'=k]` and its standard error.
fn estimate_setting(
    ev: &Evolved,
    setting: Setting,
    i: usize,
    k: Option<usize>,
    draws: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    let [plus, minus] = setting.eigenbasis();
    let prob = |v: [C64; 2]| -> Result<f64> {
        let op = ev.local_operator(&CMatrix::outer(&v, &v), i, k)?;
        Ok(trace_product(ev.rho().mat(), &op).re.clamp(0.0, 1.0))
    };
    let p_plus = prob(plus)?;
    let p_minus = prob(minus)?.min(1.0 - p_plus);

    // Each shot lands in one of three classes: (+1, i, k), (−1, i, k) or any
    // other joint outcome. Drawing the class counts as a multinomial is the
    // same as drawing the shots one by one.
    let mut rng = rng_from_seed(seed);
    let n_plus = Binomial::new(draws, p_plus)
        .expect("probability in [0, 1]")
        .sample(&mut rng);
    let rest = draws - n_plus;
    let cond = if p_plus < 1.0 {
        (p_minus / (1.0 - p_plus)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let n_minus = Binomial::new(rest, cond)
        .expect("probability in [0, 1]")
        .sample(&mut rng);

    let n = draws as f64;
    let mean = (n_plus as f64 - n_minus as f64) / n;
    let second = (n_plus + n_minus) as f64 / n;
    let se = ((second - mean * mean).max(0.0) / n).sqrt();
    Ok((mean, se))
}

/// Estimates `⟨(σ^x + iσ^y) ⊗ Π_i ⊗ Π_k⟩` from `shots` simulated
/// measurements, `⌈shots/2⌉` in the σ^x setting and the rest in σ^y.
/// Deterministic for a fixed `seed`.
pub fn sampled_expectation(
    ev: &Evolved,
    i: usize,
    k: Option<usize>,
    shots: u64,
    seed: u64,
) -> Result<ExpectationRecord> {
    if shots < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 shots to cover both probe settings, got {shots}"
        )));
    }
    let normalization = ev.normalization(k)?;
    if normalization.norm() <= MIN_NORMALIZATION {
        return Err(Error::VanishingNormalization(normalization.norm()));
    }
    let x_draws = shots.div_ceil(2);
    let y_draws = shots - x_draws;
    let task = [i as u64, k.map_or(0, |k| k as u64 + 1)];
    let stream = |s: Setting| derive_seed(seed, &[s as u64, task[0], task[1]]);
    let (x, se_x) = estimate_setting(ev, Setting::X, i, k, x_draws, stream(Setting::X))?;
    let (y, se_y) = estimate_setting(ev, Setting::Y, i, k, y_draws, stream(Setting::Y))?;
    Ok(ExpectationRecord {
        value: C64::new(x, y),
        normalization,
        mode: Mode::Sampled { shots, seed },
        std_error: (se_x, se_y),
    })
}
