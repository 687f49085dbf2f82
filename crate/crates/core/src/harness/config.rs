//! Experiment configuration and the hidden operators it describes.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::characterize::{ObservableEstimatorConfig, ObservableMethod};
use crate::error::{Error, Result};
use crate::matcore::{dft, random_density, random_hermitian, random_unitary, vec_norm, CMatrix, C64};
use crate::quantum::{
    dilation_from_kraus, kraus_from_dilation, povm_from_kraus, uniform_state, DensityMatrix,
    Dilation, KrausSet,
};
use crate::serial::{pairs_to_vector, vector_to_pairs, SerializedOperator};

pub const MIN_DIM: usize = 2;
pub const MAX_DIM: usize = 8;
pub const MIN_SHOTS: u64 = 100;
const EPS_INPUT: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Kraus,
    Povm,
    Unitary,
    Observable,
    Density,
}

impl Kind {
    /// Whether the target lives in a system–environment channel.
    pub fn uses_environment(self) -> bool {
        matches!(self, Kind::Kraus | Kind::Povm)
    }

    pub fn name(self) -> &'static str {
        match self {
            Kind::Kraus => "kraus",
            Kind::Povm => "povm",
            Kind::Unitary => "unitary",
            Kind::Observable => "observable",
            Kind::Density => "density",
        }
    }
}

/// `"exact"` or `{"sampled": {"shots": n}}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeConfig {
    #[default]
    Exact,
    Sampled {
        shots: u64,
    },
}

/// `{"delta_theta": {"values": [...]}}` or
/// `{"shots": {"levels": [...], "repetitions": n}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    DeltaTheta {
        values: Vec<f64>,
    },
    Shots {
        levels: Vec<u64>,
        #[serde(default = "default_repetitions")]
        repetitions: usize,
    },
}

fn default_repetitions() -> usize {
    50
}

/// Where the hidden operator comes from. Explicit operators are, by kind:
/// the Kraus set (kraus, povm), `U¹` (unitary), the generator (observable)
/// or `ρ_S` (density). Written as `"random"` or
/// `{"explicit": {"operators": [...]}}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    #[default]
    Random,
    Explicit {
        operators: Vec<SerializedOperator>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSettings {
    #[serde(default = "default_delta_theta")]
    pub delta_theta: f64,
    #[serde(default = "default_theta2")]
    pub theta2: f64,
    #[serde(default = "default_method")]
    pub method: ObservableMethod,
    #[serde(default = "default_max_delta")]
    pub max_delta: f64,
}

fn default_delta_theta() -> f64 {
    0.01
}
fn default_theta2() -> f64 {
    1.0
}
fn default_method() -> ObservableMethod {
    ObservableMethod::Refined
}
fn default_max_delta() -> f64 {
    1.0
}

impl Default for ObservableSettings {
    fn default() -> Self {
        Self {
            delta_theta: default_delta_theta(),
            theta2: default_theta2(),
            method: default_method(),
            max_delta: default_max_delta(),
        }
    }
}

impl ObservableSettings {
    pub fn estimator(&self, delta: f64, method: ObservableMethod) -> ObservableEstimatorConfig {
        ObservableEstimatorConfig {
            theta1: self.theta2 + delta,
            theta2: self.theta2,
            method,
            max_delta: self.max_delta,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub d_s: usize,
    #[serde(default = "default_d_e")]
    pub d_e: usize,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default)]
    pub mode: ModeConfig,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub instance: InstanceSource,
    /// Probe state `χ` as two `[re, im]` amplitudes.
    #[serde(default = "plus_pairs")]
    pub probe: [[f64; 2]; 2],
    /// Environment state `ξ`; uniform superposition when absent.
    #[serde(default)]
    pub environment_state: Option<Vec<[f64; 2]>>,
    /// Mixing weight `λ` of the input `(1−λ)|+⟩⟨+| + λI/d`.
    #[serde(default = "default_lambda")]
    pub input_lambda: f64,
    /// Reference unitary for density targets; DFT when absent.
    #[serde(default)]
    pub reference: Option<SerializedOperator>,
    #[serde(default)]
    pub observable: ObservableSettings,
}

fn default_d_e() -> usize {
    2
}
fn default_theta() -> f64 {
    FRAC_PI_2
}
fn default_lambda() -> f64 {
    0.3
}
fn plus_pairs() -> [[f64; 2]; 2] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [[h, 0.0], [h, 0.0]]
}

impl ExperimentConfig {
    /// A config with every optional field at its default.
    pub fn new(kind: Kind, d_s: usize, seeds: Vec<u64>) -> Self {
        Self {
            kind,
            d_s,
            d_e: default_d_e(),
            theta: default_theta(),
            mode: ModeConfig::Exact,
            seeds,
            sweep: None,
            instance: InstanceSource::Random,
            probe: plus_pairs(),
            environment_state: None,
            input_lambda: default_lambda(),
            reference: None,
            observable: ObservableSettings::default(),
        }
    }

    /// Fills the defaults that depend on the dimensions.
    pub fn resolved(&self) -> Self {
        let mut cfg = self.clone();
        if cfg.kind.uses_environment() && cfg.environment_state.is_none() {
            cfg.environment_state = Some(vector_to_pairs(&uniform_state(cfg.d_e)));
        }
        if cfg.kind == Kind::Density && cfg.reference.is_none() {
            cfg.reference = Some((&dft(cfg.d_s)).into());
        }
        cfg
    }

    pub fn chi(&self) -> [C64; 2] {
        let [a, b] = self.probe;
        [C64::new(a[0], a[1]), C64::new(b[0], b[1])]
    }

    fn xi(&self) -> Vec<C64> {
        self.environment_state
            .as_deref()
            .map_or_else(|| uniform_state(self.d_e), pairs_to_vector)
    }

    fn reference_unitary(&self) -> Result<CMatrix> {
        match &self.reference {
            Some(op) => op.to_matrix(),
            None => Ok(dft(self.d_s)),
        }
    }

    /// Input state used for every target except density.
    pub fn input_state(&self) -> Result<DensityMatrix> {
        DensityMatrix::depolarized_plus(self.d_s, self.input_lambda)
    }

    /// Checks the structural invariants and re-validates every supplied
    /// operator.
    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidArgument(msg));
        if self.seeds.is_empty() {
            return invalid("seeds must not be empty".into());
        }
        let dim_ok = |d: usize| (MIN_DIM..=MAX_DIM).contains(&d);
        if !dim_ok(self.d_s) {
            return invalid(format!("d_s = {} is outside {MIN_DIM}..={MAX_DIM}", self.d_s));
        }
        if self.kind.uses_environment() && !dim_ok(self.d_e) {
            return invalid(format!("d_e = {} is outside {MIN_DIM}..={MAX_DIM}", self.d_e));
        }
        if !self.theta.is_finite() {
            return invalid("theta must be finite".into());
        }
        if let ModeConfig::Sampled { shots } = self.mode {
            if shots < MIN_SHOTS {
                return invalid(format!("shots = {shots} is below the minimum of {MIN_SHOTS}"));
            }
        }
        if let Some(Sweep::Shots { levels, .. }) = &self.sweep {
            if let Some(&low) = levels.iter().find(|&&s| s < MIN_SHOTS) {
                return invalid(format!("shot level {low} is below the minimum of {MIN_SHOTS}"));
            }
        }
        if !(0.0..=1.0).contains(&self.input_lambda) {
            return invalid(format!("input_lambda = {} is outside [0, 1]", self.input_lambda));
        }
        let chi_norm = vec_norm(&self.chi());
        if (chi_norm - 1.0).abs() > EPS_INPUT {
            return Err(Error::NotNormalized { norm: chi_norm });
        }
        if self.kind.uses_environment() {
            let xi = self.xi();
            if xi.len() != self.d_e {
                return Err(Error::DimensionMismatch(format!(
                    "environment_state has {} amplitudes, d_e = {}",
                    xi.len(),
                    self.d_e
                )));
            }
            let norm = vec_norm(&xi);
            if (norm - 1.0).abs() > EPS_INPUT {
                return Err(Error::NotNormalized { norm });
            }
        }
        if self.kind == Kind::Density {
            let u = self.reference_unitary()?;
            if u.rows() != self.d_s || u.cols() != self.d_s {
                return Err(Error::DimensionMismatch(format!(
                    "reference is {}x{}, d_s = {}",
                    u.rows(),
                    u.cols(),
                    self.d_s
                )));
            }
            u.ensure_unitary(EPS_INPUT)?;
        }
        if self.kind == Kind::Observable {
            let obs = &self.observable;
            obs.estimator(obs.delta_theta, obs.method).validate()?;
        }
        if let InstanceSource::Explicit { .. } = self.instance {
            Hidden::build(self, 0)?;
        }
        Ok(())
    }
}

/// The operator a simulated experiment is trying to recover.
#[derive(Clone, Debug)]
pub(crate) enum Hidden {
    Channel(Dilation),
    Unitary(CMatrix),
    Observable(CMatrix),
    Density(DensityMatrix),
}

impl Hidden {
    pub(crate) fn build(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        match &cfg.instance {
            InstanceSource::Random => Self::random(cfg, seed),
            InstanceSource::Explicit { operators } => Self::explicit(cfg, operators),
        }
    }

    fn random(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        let d = cfg.d_s;
        Ok(match cfg.kind {
            Kind::Kraus | Kind::Povm => {
                Hidden::Channel(Dilation::new(random_unitary(d * cfg.d_e, seed), cfg.xi(), d)?)
            }
            Kind::Unitary => Hidden::Unitary(random_unitary(d, seed)),
            Kind::Observable => Hidden::Observable(random_hermitian(d, seed)),
            Kind::Density => Hidden::Density(DensityMatrix::new(random_density(d, seed))?),
        })
    }

    fn explicit(cfg: &ExperimentConfig, operators: &[SerializedOperator]) -> Result<Self> {
        let mats = operators
            .iter()
            .map(SerializedOperator::to_matrix)
            .collect::<Result<Vec<_>>>()?;
        for (n, m) in mats.iter().enumerate() {
            if m.rows() != cfg.d_s || m.cols() != cfg.d_s {
                return Err(Error::DimensionMismatch(format!(
                    "operator {n} is {}x{}, d_s = {}",
                    m.rows(),
                    m.cols(),
                    cfg.d_s
                )));
            }
        }
        let single = |mut mats: Vec<CMatrix>| match mats.len() {
            1 => Ok(mats.remove(0)),
            n => Err(Error::InvalidArgument(format!(
                "{} target needs exactly one operator, found {n}",
                cfg.kind.name()
            ))),
        };
        Ok(match cfg.kind {
            Kind::Kraus | Kind::Povm => {
                if mats.len() != cfg.d_e {
                    return Err(Error::DimensionMismatch(format!(
                        "{} Kraus operators given, d_e = {}",
                        mats.len(),
                        cfg.d_e
                    )));
                }
                Hidden::Channel(dilation_from_kraus(&KrausSet::new(mats)?, &cfg.xi())?)
            }
            Kind::Unitary => {
                let u = single(mats)?;
                u.ensure_unitary(EPS_INPUT)?;
                Hidden::Unitary(u)
            }
            Kind::Observable => {
                let a = single(mats)?;
                a.ensure_hermitian()?;
                Hidden::Observable(a)
            }
            Kind::Density => Hidden::Density(DensityMatrix::new(single(mats)?)?),
        })
    }

    /// Oracle values, one matrix per environment outcome for channel kinds.
    pub(crate) fn truth(&self, kind: Kind) -> Result<Vec<(Option<usize>, CMatrix)>> {
        Ok(match self {
            Hidden::Channel(dil) => (0..dil.env_dim())
                .map(|k| {
                    let a = kraus_from_dilation(dil, k)?;
                    let m = if kind == Kind::Povm { povm_from_kraus(&a) } else { a };
                    Ok((Some(k), m))
                })
                .collect::<Result<_>>()?,
            Hidden::Unitary(m) | Hidden::Observable(m) => vec![(None, m.clone())],
            Hidden::Density(rho) => vec![(None, rho.mat().clone())],
        })
    }

    pub(crate) fn reference(cfg: &ExperimentConfig) -> Result<CMatrix> {
        cfg.reference_unitary()
    }
}
