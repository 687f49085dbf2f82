//! States, Kraus sets, POVM elements and the Stinespring dilation that turns
//! a Kraus set into a system–environment unitary plus environment state.
//!
//! Tensor ordering is always system ⊗ environment: the flat index of
//! `|s⟩⊗|e⟩` is `s·d_E + e`.

use crate::error::{Error, Result};
use crate::matcore::{
    complete_to_unitary, eigh, inner, kron, partial_trace, vec_norm, CMatrix, C64, ONE, ZERO,
};

pub const EPS_STATE: f64 = 1e-10;
pub const EPS_COMPLETENESS: f64 = 1e-9;
/// Smallest environment overlap `|⟨ξ|k⟩|` accepted when building a dilation.
pub const MIN_OVERLAP: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    mat: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity, each within `1e-10`.
    pub fn new(mat: CMatrix) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::InvalidDensity(format!(
                "{}x{} matrix is not square",
                mat.rows(),
                mat.cols()
            )));
        }
        let herm = mat.hermiticity_residual();
        if herm > EPS_STATE {
            return Err(Error::InvalidDensity(format!(
                "not Hermitian (residual {herm:.3e})"
            )));
        }
        let tr = mat.trace();
        if (tr - ONE).norm() > EPS_STATE {
            return Err(Error::InvalidDensity(format!("trace is {tr}, expected 1")));
        }
        let min_eig = eigh(&mat)?.values[0];
        if min_eig < -EPS_STATE {
            return Err(Error::InvalidDensity(format!(
                "negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(Self { mat })
    }

    /// `|ψ⟩⟨ψ|` for a unit vector.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        ensure_unit(psi, EPS_STATE)?;
        Self::new(CMatrix::outer(psi, psi))
    }

    /// Wraps the image of a valid state under a unitary; only re-symmetrizes.
    pub(crate) fn from_evolution(mat: CMatrix) -> Self {
        let n = mat.rows();
        Self {
            mat: CMatrix::from_fn(n, n, |i, j| 0.5 * (mat[(i, j)] + mat[(j, i)].conj())),
        }
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            mat: CMatrix::identity(d).scale(C64::new(1.0 / d as f64, 0.0)),
        }
    }

    /// `(1−λ)|+_d⟩⟨+_d| + λ·I/d`: every entry is nonzero for `λ < 1`, with
    /// off-diagonal entries `(1−λ)/d`.
    pub fn depolarized_plus(d: usize, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidArgument(format!(
                "mixing weight {lambda} outside [0, 1]"
            )));
        }
        let off = (1.0 - lambda) / d as f64;
        let diag = off + lambda / d as f64;
        Ok(Self {
            mat: CMatrix::from_fn(d, d, |i, j| C64::new(if i == j { diag } else { off }, 0.0)),
        })
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn mat(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_mat(self) -> CMatrix {
        self.mat
    }

    /// `⟨i|ρ|j⟩`.
    pub fn element(&self, i: usize, j: usize) -> C64 {
        self.mat[(i, j)]
    }
}

pub(crate) fn ensure_unit(v: &[C64], eps: f64) -> Result<()> {
    let norm = vec_norm(v);
    if (norm - 1.0).abs() > eps {
        return Err(Error::NotNormalized { norm });
    }
    Ok(())
}

/// Ordered Kraus operators `{A_k}` on a `d_S`-dimensional system.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausSet {
    ops: Vec<CMatrix>,
}

impl KrausSet {
    pub fn new(ops: Vec<CMatrix>) -> Result<Self> {
        let first = ops
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty Kraus set".into()))?;
        let d = first.rows();
        if let Some(bad) = ops.iter().find(|a| a.rows() != d || a.cols() != d) {
            return Err(Error::DimensionMismatch(format!(
                "Kraus operators must all be {d}x{d}, found {}x{}",
                bad.rows(),
                bad.cols()
            )));
        }
        let set = Self { ops };
        let residual = set.completeness_residual();
        if residual > EPS_COMPLETENESS {
            return Err(Error::Completeness { residual });
        }
        Ok(set)
    }

    pub fn ops(&self) -> &[CMatrix] {
        &self.ops
    }

    pub fn sys_dim(&self) -> usize {
        self.ops[0].rows()
    }

    /// Number of operators, which is also the environment dimension of the
    /// dilation built from this set.
    pub fn env_dim(&self) -> usize {
        self.ops.len()
    }

    pub fn completeness_residual(&self) -> f64 {
        completeness_residual(&self.ops)
    }
}

/// `‖Σ_k A_k†A_k − I‖_F`.
pub fn completeness_residual(ops: &[CMatrix]) -> f64 {
    let d = ops[0].rows();
    let sum = ops
        .iter()
        .fold(CMatrix::zeros(d, d), |acc, a| acc + povm_from_kraus(a));
    crate::matcore::frobenius_distance(&sum, &CMatrix::identity(d)).unwrap_or(f64::INFINITY)
}

/// System–environment unitary with its environment input state and pointer
/// basis.
#[derive(Clone, Debug, PartialEq)]
pub struct Dilation {
    u_se: CMatrix,
    xi: Vec<C64>,
    /// Columns are the pointer states `|k_E⟩`.
    env_basis: CMatrix,
    d_s: usize,
}

impl Dilation {
    /// Dilation measured in the computational pointer basis.
    pub fn new(u_se: CMatrix, xi: Vec<C64>, d_s: usize) -> Result<Self> {
        let d_e = xi.len();
        Self::with_env_basis(u_se, xi, d_s, CMatrix::identity(d_e.max(1)))
    }

    pub fn with_env_basis(
        u_se: CMatrix,
        xi: Vec<C64>,
        d_s: usize,
        env_basis: CMatrix,
    ) -> Result<Self> {
        let d_e = xi.len();
        if d_s == 0 || d_e == 0 || u_se.rows() != d_s * d_e || !u_se.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "U_SE is {}x{}, expected {n}x{n} for d_S={d_s}, d_E={d_e}",
                u_se.rows(),
                u_se.cols(),
                n = d_s * d_e
            )));
        }
        if env_basis.rows() != d_e || !env_basis.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "pointer basis must be {d_e}x{d_e}"
            )));
        }
        u_se.ensure_unitary(EPS_STATE)?;
        env_basis.ensure_unitary(EPS_STATE)?;
        ensure_unit(&xi, 1e-12)?;
        Ok(Self {
            u_se,
            xi,
            env_basis,
            d_s,
        })
    }

    /// The identity interaction with a single-level environment.
    pub fn trivial(d_s: usize) -> Self {
        Self {
            u_se: CMatrix::identity(d_s),
            xi: vec![ONE],
            env_basis: CMatrix::identity(1),
            d_s,
        }
    }

    pub fn u_se(&self) -> &CMatrix {
        &self.u_se
    }

    pub fn xi(&self) -> &[C64] {
        &self.xi
    }

    pub fn env_basis(&self) -> &CMatrix {
        &self.env_basis
    }

    pub fn sys_dim(&self) -> usize {
        self.d_s
    }

    pub fn env_dim(&self) -> usize {
        self.xi.len()
    }

    /// Pointer state `|k_E⟩`.
    pub fn pointer(&self, k: usize) -> Result<Vec<C64>> {
        if k >= self.env_dim() {
            return Err(Error::IndexOutOfRange {
                index: k,
                dim: self.env_dim(),
            });
        }
        Ok(self.env_basis.col(k))
    }

    /// `⟨ξ_E|k_E⟩`.
    pub fn overlap(&self, k: usize) -> Result<C64> {
        Ok(inner(&self.xi, &self.pointer(k)?))
    }

    /// Every Kraus operator of this dilation, in pointer order.
    pub fn kraus_set(&self) -> KrausSet {
        let ops = (0..self.env_dim())
            .map(|k| kraus_from_dilation(self, k).expect("k in range"))
            .collect();
        KrausSet { ops }
    }
}

/// `A_k = ⟨k_E|U_SE|ξ_E⟩`, contracted directly from the unitary's entries.
pub fn kraus_from_dilation(dil: &Dilation, k: usize) -> Result<CMatrix> {
    let pointer = dil.pointer(k)?;
    let (d_s, d_e) = (dil.sys_dim(), dil.env_dim());
    let u = &dil.u_se;
    Ok(CMatrix::from_fn(d_s, d_s, |s_out, s_in| {
        let mut acc = ZERO;
        for (e_out, p) in pointer.iter().enumerate() {
            for (e_in, x) in dil.xi.iter().enumerate() {
                acc += p.conj() * u[(s_out * d_e + e_out, s_in * d_e + e_in)] * x;
            }
        }
        acc
    }))
}

/// Householder-type unitary `R` with `R|ξ⟩ = |0⟩`; needs `ξ_0 ≠ 0`.
fn rotate_to_ground(xi: &[C64]) -> CMatrix {
    let d = xi.len();
    let alpha = xi[0] / xi[0].norm();
    let mut v = xi.to_vec();
    v[0] -= alpha;
    let vn2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    if vn2 < 1e-28 {
        return CMatrix::identity(d).scale(alpha.conj());
    }
    // H = I − 2vv†/‖v‖² maps ξ to α|0⟩; strip the phase α.
    let h = CMatrix::identity(d) - CMatrix::outer(&v, &v).scale(C64::new(2.0 / vn2, 0.0));
    h.scale(alpha.conj())
}

/// Builds `(U_SE, ξ)` whose Kraus operators in the computational pointer
/// basis are exactly `ks`, with the environment starting in `xi_target`.
///
/// The isometry `|ψ⟩⊗|0⟩ ↦ Σ_k A_k|ψ⟩⊗|k⟩` is completed to a unitary
/// `U_dil`, then `U_SE = U_dil·(I ⊗ R)` with `R|ξ⟩ = |0⟩`. Every component of
/// `xi_target` must be nonzero so each outcome has a usable normalization.
pub fn dilation_from_kraus(ks: &KrausSet, xi_target: &[C64]) -> Result<Dilation> {
    let residual = ks.completeness_residual();
    if residual > EPS_COMPLETENESS {
        return Err(Error::Completeness { residual });
    }
    let (d_s, d_e) = (ks.sys_dim(), ks.env_dim());
    if xi_target.len() != d_e {
        return Err(Error::DimensionMismatch(format!(
            "environment state has {} components, Kraus set has {d_e} operators",
            xi_target.len()
        )));
    }
    ensure_unit(xi_target, 1e-12)?;
    if let Some(k) = xi_target.iter().position(|z| z.norm() < MIN_OVERLAP) {
        return Err(Error::ZeroOverlap { k });
    }

    let n = d_s * d_e;
    let iso = CMatrix::from_fn(n, d_s, |row, s_in| {
        let (s_out, k) = (row / d_e, row % d_e);
        ks.ops[k][(s_out, s_in)]
    });
    let completed = complete_to_unitary(&iso)?;
    // Column s of the isometry belongs at flat index s·d_E (environment in |0⟩);
    // the completion columns fill the remaining slots in order.
    let mut spare = d_s..n;
    let mut source = vec![0usize; n];
    for (slot, src) in source.iter_mut().enumerate() {
        *src = if slot % d_e == 0 {
            slot / d_e
        } else {
            spare.next().expect("column count matches")
        };
    }
    let u_dil = CMatrix::from_fn(n, n, |r, c| completed[(r, source[c])]);
    let r = rotate_to_ground(xi_target);
    let u_se = u_dil * kron(&CMatrix::identity(d_s), &r);
    Dilation::new(u_se, xi_target.to_vec(), d_s)
}

/// `E = A†A`.
pub fn povm_from_kraus(a: &CMatrix) -> CMatrix {
    assert!(a.is_square(), "Kraus operator must be square");
    &a.adjoint() * a
}

/// Born-rule probability `Tr(ρE)`, clamped into `[0, 1]` when it lies
/// within `1e-10` outside.
pub fn born_probability(rho: &DensityMatrix, e: &CMatrix) -> Result<f64> {
    if e.rows() != rho.dim() || !e.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "POVM element is {}x{}, state has dimension {}",
            e.rows(),
            e.cols(),
            rho.dim()
        )));
    }
    e.ensure_hermitian()?;
    let p = crate::matcore::trace_product(rho.mat(), e).re;
    if p < -EPS_STATE {
        return Err(Error::NegativeProbability(p));
    }
    if p > 1.0 + EPS_STATE {
        return Err(Error::InvalidArgument(format!(
            "probability {p} exceeds 1: operator is not a valid POVM element"
        )));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// `ℰ(ρ) = Σ_k A_k ρ A_k†`.
pub fn apply_channel(ks: &KrausSet, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if ks.sys_dim() != rho.dim() {
        return Err(Error::DimensionMismatch(format!(
            "channel acts on dimension {}, state has dimension {}",
            ks.sys_dim(),
            rho.dim()
        )));
    }
    let residual = ks.completeness_residual();
    if residual > EPS_COMPLETENESS {
        return Err(Error::Completeness { residual });
    }
    let d = rho.dim();
    let out = ks.ops.iter().fold(CMatrix::zeros(d, d), |acc, a| {
        acc + &(a * rho.mat()) * &a.adjoint()
    });
    DensityMatrix::new(out)
}

/// `Tr_E[U_SE (ρ ⊗ |ξ⟩⟨ξ|) U_SE†]`, the channel evaluated through its dilation.
pub fn dilated_channel(dil: &Dilation, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if dil.sys_dim() != rho.dim() {
        return Err(Error::DimensionMismatch(format!(
            "dilation acts on dimension {}, state has dimension {}",
            dil.sys_dim(),
            rho.dim()
        )));
    }
    let joint = kron(rho.mat(), &CMatrix::outer(&dil.xi, &dil.xi));
    let evolved = &(&dil.u_se * &joint) * &dil.u_se.adjoint();
    DensityMatrix::new(partial_trace(&evolved, &[dil.sys_dim(), dil.env_dim()], &[0])?)
}

/// Uniform superposition `Σ_k |k⟩/√d`.
pub fn uniform_state(d: usize) -> Vec<C64> {
    vec![C64::new(1.0 / (d as f64).sqrt(), 0.0); d]
}
