//! Element-wise and full-matrix reconstruction of Kraus operators, POVM
//! elements, unitaries, observables and density matrices.
//!
//! Every estimator has the same shape. Two protocol runs are made for the
//! output row `i`: a baseline run, and a run where one branch carries the
//! projector unitary `e^{−iθ|j⟩⟨j|}`. Their difference isolates a single
//! matrix element of the unknown operator, scaled by a known factor:
//!
//! | target   | `Ũ_S`          | `U_S`          | known factor            |
//! |----------|----------------|----------------|-------------------------|
//! | Kraus    | `P_j`          | `I`            | `(e^{−iθ}−1)⟨j|ρ|i⟩`    |
//! | unitary  | `U¹·P_j`       | `I`            | `(e^{−iθ}−1)⟨j|ρ|i⟩`    |
//! | density  | `I`            | `U¹·P_j`       | `(e^{iθ}−1)⟨j|U¹†|i⟩`   |
//!
//! The baseline run replaces `P_j` by `I`. A full reconstruction therefore
//! needs the `d` projector settings plus the identity setting.

use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Factor, Result};
use crate::matcore::{derive_seed, expm_hermitian, CMatrix, C64, I, ONE, ZERO};
use crate::protocol::{
    evolve, exact_expectation, plus_probe, projector_unitary, sampled_expectation,
    ExpectationRecord, Mode, ProtocolInstance,
};
use crate::quantum::{completeness_residual, povm_from_kraus, DensityMatrix, Dilation};
use crate::serial::SerializedOperator;

/// Smallest magnitude accepted for a known denominator factor.
pub const MIN_DENOMINATOR: f64 = 1e-8;
/// Sampled elements whose denominator is below this many standard errors
/// of the numerator are flagged unreliable.
pub const RELIABILITY_SIGMAS: f64 = 3.0;

/// One of the `d_S + 1` system settings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Identity,
    Projector(usize),
}

impl Setting {
    fn tag(self) -> u64 {
        match self {
            Setting::Identity => 0,
            Setting::Projector(j) => j as u64 + 1,
        }
    }

    fn unitary(self, theta: f64, d: usize) -> Result<CMatrix> {
        match self {
            Setting::Identity => Ok(CMatrix::identity(d)),
            Setting::Projector(j) => projector_unitary(j, theta, d),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TargetKind {
    Kraus { k: usize },
    Povm { k: usize },
    Unitary,
    Observable,
    Density,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableMethod {
    FirstOrder,
    Refined,
}

/// Angles of the two concatenated exponentials `e^{−iθ₁A}·e^{iθ₂A}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableEstimatorConfig {
    pub theta1: f64,
    pub theta2: f64,
    pub method: ObservableMethod,
    /// Upper bound on `|θ₁ − θ₂|` for the series expansion to be meaningful.
    #[serde(default = "default_max_delta")]
    pub max_delta: f64,
}

fn default_max_delta() -> f64 {
    1.0
}

impl ObservableEstimatorConfig {
    /// `θ₂ = 1` (not weak), `θ₁ = θ₂ + δθ`.
    pub fn with_delta(delta: f64, method: ObservableMethod) -> Self {
        Self {
            theta1: 1.0 + delta,
            theta2: 1.0,
            method,
            max_delta: default_max_delta(),
        }
    }

    pub fn delta(&self) -> f64 {
        self.theta1 - self.theta2
    }

    pub fn validate(&self) -> Result<f64> {
        let delta = self.delta();
        if delta.abs() < 1e-12 {
            return Err(Error::VanishingDenominator {
                factor: Factor::DeltaTheta,
                value: delta.abs(),
                i: 0,
                j: 0,
                k: None,
            });
        }
        if delta.abs() >= self.max_delta {
            return Err(Error::InvalidArgument(format!(
                "|theta1 - theta2| = {} is outside the series regime (< {})",
                delta.abs(),
                self.max_delta
            )));
        }
        Ok(delta)
    }
}

/// A single reconstructed matrix element.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementEstimate {
    pub value: C64,
    /// Standard error of the estimate; zero in exact mode.
    pub std_error: f64,
    /// False when, in sampled mode, the denominator is within
    /// [`RELIABILITY_SIGMAS`] standard errors of zero.
    pub reliable: bool,
}

/// Baseline `⟨i|·|i⟩` term shared by every column of row `i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub i: usize,
    pub k: Option<usize>,
    /// Which run produced it: `forward` or `adjoint` (refined observables).
    pub branch: Branch,
    pub value: C64,
    pub std_error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Forward,
    Adjoint,
}

/// Diagnostics attached to a full reconstruction; only the ones that apply to
/// the target are filled in.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hermiticity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub completeness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unitarity: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub target: TargetKind,
    pub elements: SerializedOperator,
    pub std_errors: Vec<f64>,
    /// Positions `(i, j)` flagged unreliable in sampled mode.
    pub unreliable: Vec<(usize, usize)>,
    pub settings_used: usize,
    pub mode: Mode,
    pub baselines: Vec<Baseline>,
    pub residuals: Residuals,
}

impl Reconstruction {
    pub fn matrix(&self) -> CMatrix {
        self.elements.to_matrix().expect("consistent record")
    }
}

/// Kraus reconstructions for every outcome of a channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrausSetReconstruction {
    pub operators: Vec<Reconstruction>,
    /// `‖Σ_k Â_k†Â_k − I‖_F`.
    pub completeness_residual: f64,
}

/// What is being characterized, with the hidden operator the simulation
/// needs in order to produce measurement data.
#[derive(Clone, Copy, Debug)]
pub enum Target<'a> {
    Kraus {
        channel: &'a Dilation,
        rho_s: &'a DensityMatrix,
        k: usize,
    },
    Povm {
        channel: &'a Dilation,
        rho_s: &'a DensityMatrix,
        k: usize,
    },
    Unitary {
        u1: &'a CMatrix,
        rho_s: &'a DensityMatrix,
    },
    Observable {
        generator: &'a CMatrix,
        rho_s: &'a DensityMatrix,
        cfg: ObservableEstimatorConfig,
    },
    Density {
        rho_s: &'a DensityMatrix,
        reference: &'a CMatrix,
    },
}

/// The three estimator families sharing the baseline/projector structure.
#[derive(Clone, Copy)]
enum Scheme<'a> {
    Kraus {
        channel: &'a Dilation,
        rho_s: &'a DensityMatrix,
        k: usize,
    },
    Unitary {
        u1: &'a CMatrix,
        rho_s: &'a DensityMatrix,
        /// Distinguishes the forward and adjoint runs of refined observables.
        stream: u64,
    },
    Density {
        rho_s: &'a DensityMatrix,
        reference: &'a CMatrix,
    },
}

impl Scheme<'_> {
    fn dim(&self) -> usize {
        match self {
            Scheme::Kraus { rho_s, .. }
            | Scheme::Unitary { rho_s, .. }
            | Scheme::Density { rho_s, .. } => rho_s.dim(),
        }
    }

    fn env_index(&self) -> Option<usize> {
        match self {
            Scheme::Kraus { k, .. } => Some(*k),
            _ => None,
        }
    }

    fn stream_tag(&self) -> u64 {
        match self {
            Scheme::Kraus { .. } => 1,
            Scheme::Unitary { stream, .. } => 2 + stream,
            Scheme::Density { .. } => 10,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Scheme::Kraus { channel, rho_s, k } => {
                if channel.sys_dim() != rho_s.dim() {
                    return Err(Error::DimensionMismatch(format!(
                        "channel acts on dimension {}, input state has dimension {}",
                        channel.sys_dim(),
                        rho_s.dim()
                    )));
                }
                if *k >= channel.env_dim() {
                    return Err(Error::IndexOutOfRange {
                        index: *k,
                        dim: channel.env_dim(),
                    });
                }
                Ok(())
            }
            Scheme::Unitary { u1, rho_s, .. } => check_square(u1, rho_s.dim(), "U1"),
            Scheme::Density { rho_s, reference } => check_square(reference, rho_s.dim(), "U1"),
        }
    }

    /// Protocol instance for one setting (`Identity` gives the baseline run).
    fn instance(&self, c: &Characterizer, setting: Setting) -> Result<ProtocolInstance> {
        let d = self.dim();
        let p = setting.unitary(c.theta, d)?;
        let id = CMatrix::identity(d);
        match *self {
            Scheme::Kraus { channel, rho_s, .. } => {
                ProtocolInstance::new(c.chi, Some(channel.clone()), id, p, rho_s.clone(), c.theta)
            }
            Scheme::Unitary { u1, rho_s, .. } => {
                ProtocolInstance::new(c.chi, None, id, u1 * &p, rho_s.clone(), c.theta)
            }
            Scheme::Density { rho_s, reference } => {
                ProtocolInstance::new(c.chi, None, reference * &p, id, rho_s.clone(), c.theta)
            }
        }
    }

    /// Known factor multiplying the unknown element, and which quantity it is.
    fn known_factor(&self, c: &Characterizer, i: usize, j: usize) -> (C64, C64, Factor) {
        let phase_minus = C64::from_polar(1.0, -c.theta) - ONE;
        match self {
            Scheme::Kraus { rho_s, .. } | Scheme::Unitary { rho_s, .. } => {
                (phase_minus, rho_s.element(j, i), Factor::StateOverlap)
            }
            // ⟨j|U¹†|i⟩ = conj(⟨i|U¹|j⟩)
            Scheme::Density { reference, .. } => (
                phase_minus.conj(),
                reference[(i, j)].conj(),
                Factor::ReferenceUnitary,
            ),
        }
    }
}

fn check_square(m: &CMatrix, d: usize, name: &str) -> Result<()> {
    if m.rows() != d || !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "{name} is {}x{}, system dimension is {d}",
            m.rows(),
            m.cols()
        )));
    }
    m.ensure_unitary(1e-10)
}

/// Measured `value/𝒩` with its standard error.
#[derive(Clone, Copy)]
struct Measured {
    value: C64,
    std_error: f64,
}

/// Runs the protocol: probe state, coupling angle and measurement mode.
#[derive(Clone, Debug, PartialEq)]
pub struct Characterizer {
    pub chi: [C64; 2],
    pub theta: f64,
    pub mode: Mode,
}

impl Default for Characterizer {
    fn default() -> Self {
        Self {
            chi: plus_probe(),
            theta: FRAC_PI_2,
            mode: Mode::Exact,
        }
    }
}

impl Characterizer {
    pub fn exact(theta: f64) -> Self {
        Self {
            theta,
            ..Self::default()
        }
    }

    pub fn sampled(theta: f64, shots: u64, seed: u64) -> Self {
        Self {
            theta,
            mode: Mode::Sampled { shots, seed },
            ..Self::default()
        }
    }

    fn measure(
        &self,
        scheme: &Scheme<'_>,
        setting: Setting,
        i: usize,
        col: usize,
    ) -> Result<Measured> {
        let inst = scheme.instance(self, setting)?;
        let ev = evolve(&inst);
        let k = scheme.env_index();
        let rec: ExpectationRecord = match self.mode {
            Mode::Exact => exact_expectation(&ev, i, k)?,
            Mode::Sampled { shots, seed } => {
                let k_tag = k.map_or(0, |k| k as u64 + 1);
                let stream = derive_seed(
                    seed,
                    &[scheme.stream_tag(), i as u64, col as u64, k_tag, setting.tag()],
                );
                sampled_expectation(&ev, i, k, shots, stream)?
            }
        };
        Ok(Measured {
            value: rec.ratio()?,
            std_error: rec.ratio_std_error(),
        })
    }

    /// Checks probe and environment overlaps so failures name the factor.
    fn check_normalization(&self, scheme: &Scheme<'_>, i: usize, j: usize) -> Result<()> {
        let k = scheme.env_index();
        let probe = 2.0 * (self.chi[0].conj() * self.chi[1]).norm();
        if probe <= MIN_DENOMINATOR {
            return Err(Error::VanishingDenominator {
                factor: Factor::ProbeOverlap,
                value: probe,
                i,
                j,
                k,
            });
        }
        if let (Scheme::Kraus { channel, .. }, Some(k)) = (scheme, k) {
            let overlap = channel.overlap(k)?.norm();
            if overlap <= MIN_DENOMINATOR {
                return Err(Error::VanishingDenominator {
                    factor: Factor::EnvironmentOverlap,
                    value: overlap,
                    i,
                    j,
                    k: Some(k),
                });
            }
        }
        Ok(())
    }

    fn denominator(&self, scheme: &Scheme<'_>, i: usize, j: usize) -> Result<C64> {
        let d = scheme.dim();
        for idx in [i, j] {
            if idx >= d {
                return Err(Error::IndexOutOfRange { index: idx, dim: d });
            }
        }
        self.check_normalization(scheme, i, j)?;
        let (phase, known, factor) = scheme.known_factor(self, i, j);
        let k = scheme.env_index();
        if phase.norm() <= MIN_DENOMINATOR {
            return Err(Error::VanishingDenominator {
                factor: Factor::PhaseFactor,
                value: phase.norm(),
                i,
                j,
                k,
            });
        }
        if known.norm() <= MIN_DENOMINATOR {
            return Err(Error::VanishingDenominator {
                factor,
                value: known.norm(),
                i,
                j,
                k,
            });
        }
        Ok(phase * known)
    }

    fn baseline(&self, scheme: &Scheme<'_>, i: usize) -> Result<Measured> {
        self.measure(scheme, Setting::Identity, i, 0)
    }

    fn element_with_baseline(
        &self,
        scheme: &Scheme<'_>,
        i: usize,
        j: usize,
        base: Measured,
    ) -> Result<ElementEstimate> {
        let den = self.denominator(scheme, i, j)?;
        let run = self.measure(scheme, Setting::Projector(j), i, j)?;
        let num_se = run.std_error.hypot(base.std_error);
        let reliable = match self.mode {
            Mode::Exact => true,
            Mode::Sampled { .. } => den.norm() >= RELIABILITY_SIGMAS * num_se,
        };
        Ok(ElementEstimate {
            value: (run.value - base.value) / den,
            std_error: num_se / den.norm(),
            reliable,
        })
    }

    fn element(&self, scheme: &Scheme<'_>, i: usize, j: usize) -> Result<ElementEstimate> {
        scheme.validate()?;
        // fail on the denominator before spending any measurements
        self.denominator(scheme, i, j)?;
        let base = self.baseline(scheme, i)?;
        self.element_with_baseline(scheme, i, j, base)
    }

    /// All `d × d` elements using `d` projector settings plus one shared
    /// baseline setting.
    fn full(&self, scheme: &Scheme<'_>, branch: Branch) -> Result<RawFull> {
        scheme.validate()?;
        let d = scheme.dim();
        let k = scheme.env_index();
        let mut settings = BTreeSet::new();
        let mut baselines = Vec::with_capacity(d);
        let mut est = Vec::with_capacity(d * d);
        for i in 0..d {
            let base = self.baseline(scheme, i)?;
            settings.insert(Setting::Identity);
            baselines.push(Baseline {
                i,
                k,
                branch,
                value: base.value,
                std_error: base.std_error,
            });
            for j in 0..d {
                est.push(self.element_with_baseline(scheme, i, j, base)?);
                settings.insert(Setting::Projector(j));
            }
        }
        Ok(RawFull {
            d,
            est,
            settings,
            baselines,
        })
    }

    /// `⟨i|A_k|j⟩` of the channel's `k`-th Kraus operator.
    pub fn kraus_element(
        &self,
        channel: &Dilation,
        rho_s: &DensityMatrix,
        i: usize,
        j: usize,
        k: usize,
    ) -> Result<ElementEstimate> {
        self.element(&Scheme::Kraus { channel, rho_s, k }, i, j)
    }

    pub fn kraus_full(
        &self,
        channel: &Dilation,
        rho_s: &DensityMatrix,
        k: usize,
    ) -> Result<Reconstruction> {
        let raw = self.full(&Scheme::Kraus { channel, rho_s, k }, Branch::Forward)?;
        Ok(raw.into_reconstruction(TargetKind::Kraus { k }, self.mode, Residuals::default()))
    }

    /// Every Kraus operator of the channel, with the completeness residual of
    /// the reconstructed set.
    pub fn kraus_set_full(
        &self,
        channel: &Dilation,
        rho_s: &DensityMatrix,
    ) -> Result<KrausSetReconstruction> {
        let operators = (0..channel.env_dim())
            .map(|k| self.kraus_full(channel, rho_s, k))
            .collect::<Result<Vec<_>>>()?;
        let mats: Vec<CMatrix> = operators.iter().map(Reconstruction::matrix).collect();
        let completeness_residual = completeness_residual(&mats);
        let operators = operators
            .into_iter()
            .map(|mut r| {
                r.residuals.completeness = Some(completeness_residual);
                r
            })
            .collect();
        Ok(KrausSetReconstruction {
            operators,
            completeness_residual,
        })
    }

    /// `⟨i|E_k|j⟩ = Σ_l ⟨l|A_k|i⟩* ⟨l|A_k|j⟩`, from columns `i` and `j` of
    /// the reconstructed Kraus operator.
    pub fn povm_element(
        &self,
        channel: &Dilation,
        rho_s: &DensityMatrix,
        i: usize,
        j: usize,
        k: usize,
    ) -> Result<ElementEstimate> {
        let scheme = Scheme::Kraus { channel, rho_s, k };
        scheme.validate()?;
        let d = rho_s.dim();
        let mut value = ZERO;
        let mut var = 0.0;
        let mut reliable = true;
        for l in 0..d {
            self.denominator(&scheme, l, i)?;
            self.denominator(&scheme, l, j)?;
        }
        for l in 0..d {
            let base = self.baseline(&scheme, l)?;
            let a_li = self.element_with_baseline(&scheme, l, i, base)?;
            let a_lj = if i == j {
                a_li
            } else {
                self.element_with_baseline(&scheme, l, j, base)?
            };
            value += a_li.value.conj() * a_lj.value;
            var += (a_li.std_error * a_lj.value.norm()).powi(2)
                + (a_lj.std_error * a_li.value.norm()).powi(2);
            reliable &= a_li.reliable && a_lj.reliable;
        }
        Ok(ElementEstimate {
            value,
            std_error: var.sqrt(),
            reliable,
        })
    }

    /// `Ê_k = Â_k†Â_k` from the full Kraus reconstruction.
    pub fn povm_full(
        &self,
        channel: &Dilation,
        rho_s: &DensityMatrix,
        k: usize,
    ) -> Result<Reconstruction> {
        let kraus = self.kraus_full(channel, rho_s, k)?;
        let e = povm_from_kraus(&kraus.matrix());
        let residuals = Residuals {
            hermiticity: Some(e.hermiticity_residual()),
            ..Residuals::default()
        };
        Ok(Reconstruction {
            target: TargetKind::Povm { k },
            elements: (&e).into(),
            // error propagation through A†A is not tracked element-wise
            std_errors: Vec::new(),
            residuals,
            ..kraus
        })
    }

    /// `⟨i|U¹|j⟩` of an unknown unitary (no environment).
    pub fn unitary_element(
        &self,
        u1: &CMatrix,
        rho_s: &DensityMatrix,
        i: usize,
        j: usize,
    ) -> Result<ElementEstimate> {
        self.element(&Scheme::Unitary { u1, rho_s, stream: 0 }, i, j)
    }

    pub fn unitary_full(&self, u1: &CMatrix, rho_s: &DensityMatrix) -> Result<Reconstruction> {
        let raw = self.full(&Scheme::Unitary { u1, rho_s, stream: 0 }, Branch::Forward)?;
        let u = raw.matrix();
        let residuals = Residuals {
            unitarity: Some(u.unitarity_residual()),
            ..Residuals::default()
        };
        Ok(raw.into_reconstruction(TargetKind::Unitary, self.mode, residuals))
    }

    /// `⟨i|A|j⟩` of an observable from the unitary `e^{−iθ₁A}·e^{iθ₂A}`.
    ///
    /// First order: `(δ_ij − Û_ij)/(iδθ)`. Refined: `(Û†_ij − Û_ij)/(2iδθ)`,
    /// with `Û†` characterized by its own protocol run.
    pub fn observable_element(
        &self,
        generator: &CMatrix,
        rho_s: &DensityMatrix,
        i: usize,
        j: usize,
        cfg: &ObservableEstimatorConfig,
    ) -> Result<ElementEstimate> {
        let delta = cfg.validate()?;
        let (forward, adjoint) = observable_unitaries(generator, cfg)?;
        let u = self.element(&Scheme::Unitary { u1: &forward, rho_s, stream: 0 }, i, j)?;
        match cfg.method {
            ObservableMethod::FirstOrder => {
                let kron_delta = if i == j { ONE } else { ZERO };
                Ok(ElementEstimate {
                    value: (kron_delta - u.value) / (I * delta),
                    std_error: u.std_error / delta.abs(),
                    reliable: u.reliable,
                })
            }
            ObservableMethod::Refined => {
                let ud = self.element(&Scheme::Unitary { u1: &adjoint, rho_s, stream: 1 }, i, j)?;
                Ok(ElementEstimate {
                    value: (ud.value - u.value) / (2.0 * I * delta),
                    std_error: u.std_error.hypot(ud.std_error) / (2.0 * delta.abs()),
                    reliable: u.reliable && ud.reliable,
                })
            }
        }
    }

    pub fn observable_full(
        &self,
        generator: &CMatrix,
        rho_s: &DensityMatrix,
        cfg: &ObservableEstimatorConfig,
    ) -> Result<Reconstruction> {
        let delta = cfg.validate()?;
        let (forward, adjoint) = observable_unitaries(generator, cfg)?;
        let fwd = self.full(&Scheme::Unitary { u1: &forward, rho_s, stream: 0 }, Branch::Forward)?;
        let d = fwd.d;
        let (est, raw) = match cfg.method {
            ObservableMethod::FirstOrder => {
                let est = fwd
                    .est
                    .iter()
                    .enumerate()
                    .map(|(idx, u)| {
                        let kron_delta = if idx / d == idx % d { ONE } else { ZERO };
                        ElementEstimate {
                            value: (kron_delta - u.value) / (I * delta),
                            std_error: u.std_error / delta.abs(),
                            reliable: u.reliable,
                        }
                    })
                    .collect();
                (est, fwd)
            }
            ObservableMethod::Refined => {
                let adj =
                    self.full(&Scheme::Unitary { u1: &adjoint, rho_s, stream: 1 }, Branch::Adjoint)?;
                let est = fwd
                    .est
                    .iter()
                    .zip(&adj.est)
                    .map(|(u, ud)| ElementEstimate {
                        value: (ud.value - u.value) / (2.0 * I * delta),
                        std_error: u.std_error.hypot(ud.std_error) / (2.0 * delta.abs()),
                        reliable: u.reliable && ud.reliable,
                    })
                    .collect();
                let mut merged = fwd;
                merged.settings.extend(adj.settings);
                merged.baselines.extend(adj.baselines);
                (est, merged)
            }
        };
        let raw = RawFull { est, ..raw };
        let residuals = Residuals {
            hermiticity: Some(raw.matrix().hermiticity_residual()),
            ..Residuals::default()
        };
        Ok(raw.into_reconstruction(TargetKind::Observable, self.mode, residuals))
    }

    /// `⟨i|ρ_S|j⟩` of an unknown state, using a known reference unitary.
    pub fn density_element(
        &self,
        rho_s: &DensityMatrix,
        reference: &CMatrix,
        i: usize,
        j: usize,
    ) -> Result<ElementEstimate> {
        self.element(&Scheme::Density { rho_s, reference }, i, j)
    }

    pub fn density_full(&self, rho_s: &DensityMatrix, reference: &CMatrix) -> Result<Reconstruction> {
        let raw = self.full(&Scheme::Density { rho_s, reference }, Branch::Forward)?;
        let m = raw.matrix();
        let residuals = Residuals {
            hermiticity: Some(m.hermiticity_residual()),
            trace: Some((m.trace() - ONE).norm()),
            ..Residuals::default()
        };
        Ok(raw.into_reconstruction(TargetKind::Density, self.mode, residuals))
    }

    pub fn full_reconstruction(&self, target: Target<'_>) -> Result<Reconstruction> {
        match target {
            Target::Kraus { channel, rho_s, k } => self.kraus_full(channel, rho_s, k),
            Target::Povm { channel, rho_s, k } => self.povm_full(channel, rho_s, k),
            Target::Unitary { u1, rho_s } => self.unitary_full(u1, rho_s),
            Target::Observable {
                generator,
                rho_s,
                cfg,
            } => self.observable_full(generator, rho_s, &cfg),
            Target::Density { rho_s, reference } => self.density_full(rho_s, reference),
        }
    }
}

/// `(e^{−iθ₁A}·e^{iθ₂A}, e^{iθ₁A}·e^{−iθ₂A})`.
pub fn observable_unitaries(
    generator: &CMatrix,
    cfg: &ObservableEstimatorConfig,
) -> Result<(CMatrix, CMatrix)> {
    let forward = expm_hermitian(generator, cfg.theta1)? * expm_hermitian(generator, -cfg.theta2)?;
    let adjoint = expm_hermitian(generator, -cfg.theta1)? * expm_hermitian(generator, cfg.theta2)?;
    Ok((forward, adjoint))
}

struct RawFull {
    d: usize,
    est: Vec<ElementEstimate>,
    settings: BTreeSet<Setting>,
    baselines: Vec<Baseline>,
}

impl RawFull {
    fn matrix(&self) -> CMatrix {
        CMatrix::new(self.d, self.d, self.est.iter().map(|e| e.value).collect())
            .expect("d x d estimates")
    }

    fn into_reconstruction(self, target: TargetKind, mode: Mode, residuals: Residuals) -> Reconstruction {
        let d = self.d;
        let unreliable = self
            .est
            .iter()
            .enumerate()
            .filter(|(_, e)| !e.reliable)
            .map(|(idx, _)| (idx / d, idx % d))
            .collect();
        Reconstruction {
            target,
            elements: (&self.matrix()).into(),
            std_errors: self.est.iter().map(|e| e.std_error).collect(),
            unreliable,
            settings_used: self.settings.len(),
            mode,
            baselines: self.baselines,
            residuals,
        }
    }
}
