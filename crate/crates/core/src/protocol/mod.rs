//! The probe–system–environment protocol.
//!
//! A probe qubit prepared in `|χ⟩` controls two branches: on `|0⟩` the
//! system evolves under `U_S`, on `|1⟩` it evolves under `Ũ_S` followed by
//! the system–environment interaction `U_SE`. Measuring
//! `(σ^x + iσ^y) ⊗ |i⟩⟨i| ⊗ |k⟩⟨k|` on the evolved state and dividing by
//! `𝒩 = 2⟨χ|0⟩⟨1|χ⟩⟨ξ|k⟩` yields `⟨i|A_k Ũ_S ρ_S U_S†|i⟩` exactly.
//!
//! Tensor ordering is probe ⊗ system ⊗ environment. When the instance has no
//! dilation the environment factor is dropped altogether.

mod sampling;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{
    inner, kron, kron_all, random_density, random_state, random_unitary, sigma_x, sigma_y,
    trace_product, CMatrix, C64, I,
};
use crate::quantum::{ensure_unit, kraus_from_dilation, Dilation, DensityMatrix};

pub use sampling::sampled_expectation;

/// Smallest accepted probe amplitude `|⟨0|χ⟩|`, `|⟨1|χ⟩|`.
pub const MIN_PROBE_AMPLITUDE: f64 = 1e-8;
/// Smallest normalization a record may be divided by.
pub const MIN_NORMALIZATION: f64 = 1e-10;
const EPS_UNITARY: f64 = 1e-10;

/// How an expectation value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Mode {
    Exact,
    Sampled { shots: u64, seed: u64 },
}

/// `|+⟩ = (|0⟩+|1⟩)/√2`, which maximizes `|2⟨χ|0⟩⟨1|χ⟩|`.
pub fn plus_probe() -> [C64; 2] {
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [h, h]
}

/// One complete protocol configuration.
#[derive(Clone, Debug)]
pub struct ProtocolInstance {
    chi: [C64; 2],
    dil: Option<Dilation>,
    u_s: CMatrix,
    u_tilde: CMatrix,
    rho_s: DensityMatrix,
    theta: f64,
}

impl ProtocolInstance {
    /// `dil = None` means `U_SE = I` with no environment at all.
    pub fn new(
        chi: [C64; 2],
        dil: Option<Dilation>,
        u_s: CMatrix,
        u_tilde: CMatrix,
        rho_s: DensityMatrix,
        theta: f64,
    ) -> Result<Self> {
        ensure_unit(&chi, 1e-10)?;
        let d = rho_s.dim();
        for (name, u) in [("U_S", &u_s), ("Ũ_S", &u_tilde)] {
            if u.rows() != d || !u.is_square() {
                return Err(Error::DimensionMismatch(format!(
                    "{name} is {}x{}, system dimension is {d}",
                    u.rows(),
                    u.cols()
                )));
            }
            u.ensure_unitary(EPS_UNITARY)?;
        }
        if let Some(dil) = &dil {
            if dil.sys_dim() != d {
                return Err(Error::DimensionMismatch(format!(
                    "dilation acts on dimension {}, system dimension is {d}",
                    dil.sys_dim()
                )));
            }
        }
        let probe = (chi[0].norm()).min(chi[1].norm());
        if probe <= MIN_PROBE_AMPLITUDE {
            return Err(Error::VanishingNormalization(2.0 * chi[0].norm() * chi[1].norm()));
        }
        Ok(Self {
            chi,
            dil,
            u_s,
            u_tilde,
            rho_s,
            theta,
        })
    }

    pub fn chi(&self) -> &[C64; 2] {
        &self.chi
    }

    pub fn dilation(&self) -> Option<&Dilation> {
        self.dil.as_ref()
    }

    pub fn u_s(&self) -> &CMatrix {
        &self.u_s
    }

    pub fn u_tilde(&self) -> &CMatrix {
        &self.u_tilde
    }

    pub fn rho_s(&self) -> &DensityMatrix {
        &self.rho_s
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn sys_dim(&self) -> usize {
        self.rho_s.dim()
    }

    /// Environment dimension, 1 when there is no environment.
    pub fn env_dim(&self) -> usize {
        self.dil.as_ref().map_or(1, Dilation::env_dim)
    }

    /// Fully random instance: random probe, Haar `U_SE`, `U_S`, `Ũ_S`, random
    /// environment state and Ginibre `ρ_S`.
    pub fn random(d_s: usize, d_e: Option<usize>, seed: u64) -> Result<Self> {
        use crate::matcore::derive_seed;
        let s = |tag: u64| derive_seed(seed, &[tag]);
        let chi_v = random_state(2, s(0));
        let dil = d_e
            .map(|d_e| Dilation::new(random_unitary(d_s * d_e, s(1)), random_state(d_e, s(2)), d_s))
            .transpose()?;
        Self::new(
            [chi_v[0], chi_v[1]],
            dil,
            random_unitary(d_s, s(3)),
            random_unitary(d_s, s(4)),
            DensityMatrix::new(random_density(d_s, s(5)))?,
            0.0,
        )
    }
}

/// The measured numerator and its normalization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectationRecord {
    /// `⟨(σ^x + iσ^y) ⊗ Π_i ⊗ Π_k⟩`.
    pub value: C64,
    pub normalization: C64,
    pub mode: Mode,
    /// Standard errors of the real (σ^x) and imaginary (σ^y) parts; zero in
    /// exact mode.
    pub std_error: (f64, f64),
}

impl ExpectationRecord {
    /// `value / 𝒩`.
    pub fn ratio(&self) -> Result<C64> {
        if self.normalization.norm() <= MIN_NORMALIZATION {
            return Err(Error::VanishingNormalization(self.normalization.norm()));
        }
        Ok(self.value / self.normalization)
    }

    /// Standard error of `|value/𝒩|` from the two setting errors.
    pub fn ratio_std_error(&self) -> f64 {
        self.std_error.0.hypot(self.std_error.1) / self.normalization.norm()
    }
}

/// `e^{−iθ|j⟩⟨j|} = I + (e^{−iθ} − 1)|j⟩⟨j|`.
pub fn projector_unitary(j: usize, theta: f64, d: usize) -> Result<CMatrix> {
    if j >= d {
        return Err(Error::IndexOutOfRange { index: j, dim: d });
    }
    let mut u = CMatrix::identity(d);
    u[(j, j)] = C64::from_polar(1.0, -theta);
    Ok(u)
}

/// `|0⟩⟨0| ⊗ U_S ⊗ I_E + |1⟩⟨1| ⊗ U_SE·(Ũ_S ⊗ I_E)`.
pub fn build_upse(inst: &ProtocolInstance) -> CMatrix {
    let (d_s, d_e) = (inst.sys_dim(), inst.env_dim());
    let n = d_s * d_e;
    let id_e = CMatrix::identity(d_e);
    let branch0 = kron(&inst.u_s, &id_e);
    let branch1 = match &inst.dil {
        Some(dil) => dil.u_se() * &kron(&inst.u_tilde, &id_e),
        None => inst.u_tilde.clone(),
    };
    CMatrix::from_fn(2 * n, 2 * n, |r, c| match (r / n, c / n) {
        (0, 0) => branch0[(r, c)],
        (1, 1) => branch1[(r - n, c - n)],
        _ => C64::new(0.0, 0.0),
    })
}

/// Tripartite state after the controlled evolution, with the data needed to
/// form measurement operators and normalizations.
#[derive(Clone, Debug)]
pub struct Evolved {
    rho: DensityMatrix,
    chi: [C64; 2],
    /// Environment state and pointer basis, when an environment is present.
    env: Option<(Vec<C64>, CMatrix)>,
    d_s: usize,
}

impl Evolved {
    pub fn rho(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn sys_dim(&self) -> usize {
        self.d_s
    }

    pub fn env_dim(&self) -> usize {
        self.env.as_ref().map_or(1, |(xi, _)| xi.len())
    }

    /// Subsystem dimensions in tensor order.
    pub fn dims(&self) -> Vec<usize> {
        match &self.env {
            Some((xi, _)) => vec![2, self.d_s, xi.len()],
            None => vec![2, self.d_s],
        }
    }

    /// `2⟨χ|0⟩⟨1|χ⟩⟨ξ|k⟩`, dropping the environment factor when `k` is
    /// `None`.
    pub fn normalization(&self, k: Option<usize>) -> Result<C64> {
        let probe = 2.0 * self.chi[0].conj() * self.chi[1];
        match (&self.env, k) {
            (None, None) => Ok(probe),
            (Some((xi, basis)), Some(k)) => {
                if k >= xi.len() {
                    return Err(Error::IndexOutOfRange {
                        index: k,
                        dim: xi.len(),
                    });
                }
                Ok(probe * inner(xi, &basis.col(k)))
            }
            (None, Some(_)) => Err(Error::EnvironmentIndex(
                "given but the instance has no environment",
            )),
            (Some(_), None) => Err(Error::EnvironmentIndex(
                "missing but the instance has an environment",
            )),
        }
    }

    /// `probe_op ⊗ |i⟩⟨i| ⊗ |k⟩⟨k|` on the full space.
    pub(crate) fn local_operator(&self, probe_op: &CMatrix, i: usize, k: Option<usize>) -> Result<CMatrix> {
        if i >= self.d_s {
            return Err(Error::IndexOutOfRange {
                index: i,
                dim: self.d_s,
            });
        }
        let pi_s = CMatrix::basis_projector(i, self.d_s);
        match (&self.env, k) {
            (Some((_, basis)), Some(k)) => {
                let b = basis.col(k);
                Ok(kron_all(&[probe_op, &pi_s, &CMatrix::outer(&b, &b)]))
            }
            _ => Ok(kron(probe_op, &pi_s)),
        }
    }
}

/// `ρ(t) = U_PSE ρ(0) U_PSE†` with `ρ(0) = |χ⟩⟨χ| ⊗ ρ_S ⊗ |ξ⟩⟨ξ|`.
pub fn evolve(inst: &ProtocolInstance) -> Evolved {
    let probe = CMatrix::outer(&inst.chi, &inst.chi);
    let rho0 = match &inst.dil {
        Some(dil) => kron_all(&[&probe, inst.rho_s.mat(), &CMatrix::outer(dil.xi(), dil.xi())]),
        None => kron(&probe, inst.rho_s.mat()),
    };
    let u = build_upse(inst);
    let rho_t = &(&u * &rho0) * &u.adjoint();
    Evolved {
        rho: DensityMatrix::from_evolution(rho_t),
        chi: inst.chi,
        env: inst
            .dil
            .as_ref()
            .map(|d| (d.xi().to_vec(), d.env_basis().clone())),
        d_s: inst.sys_dim(),
    }
}

/// `⟨(σ^x + iσ^y) ⊗ Π_i ⊗ Π_k⟩` by trace arithmetic.
pub fn exact_expectation(ev: &Evolved, i: usize, k: Option<usize>) -> Result<ExpectationRecord> {
    let normalization = ev.normalization(k)?;
    if normalization.norm() <= MIN_NORMALIZATION {
        return Err(Error::VanishingNormalization(normalization.norm()));
    }
    let x = trace_product(ev.rho.mat(), &ev.local_operator(&sigma_x(), i, k)?).re;
    let y = trace_product(ev.rho.mat(), &ev.local_operator(&sigma_y(), i, k)?).re;
    Ok(ExpectationRecord {
        value: C64::new(x, 0.0) + I * y,
        normalization,
        mode: Mode::Exact,
        std_error: (0.0, 0.0),
    })
}

/// `⟨i|A_k Ũ_S ρ_S U_S†|i⟩` by direct matrix arithmetic, with `A_k` read off
/// the dilation (`I` when there is none).
pub fn lhs_oracle(inst: &ProtocolInstance, i: usize, k: Option<usize>) -> Result<C64> {
    let d = inst.sys_dim();
    if i >= d {
        return Err(Error::IndexOutOfRange { index: i, dim: d });
    }
    let a_k = match (&inst.dil, k) {
        (Some(dil), Some(k)) => kraus_from_dilation(dil, k)?,
        (None, None) => CMatrix::identity(d),
        (None, Some(_)) => {
            return Err(Error::EnvironmentIndex(
                "given but the instance has no environment",
            ))
        }
        (Some(_), None) => {
            return Err(Error::EnvironmentIndex(
                "missing but the instance has an environment",
            ))
        }
    };
    let m = &(&(&a_k * &inst.u_tilde) * inst.rho_s.mat()) * &inst.u_s.adjoint();
    Ok(m[(i, i)])
}

#[cfg(test)]
mod tests;
