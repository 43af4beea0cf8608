//! Two-emitter state expanded in the six-vector basis
//! `{Ψ₁, Ψ₂, p̂Ψ₁, p̂Ψ₂, ĜΨ₁, ĜΨ₂}` and SLDs solved in an orthonormal frame.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::params::{jacobian, TwoEmitterParams, EMITTER_LABELS, LABELS};
use super::TwoEmitterInfo;
use crate::beam::PsfFactory;
use crate::error::{Error, Result};
use crate::fisher::FisherMatrix;
use crate::grid::{apply_g_centered, apply_px, inner, moments, FieldGrid, GeneratorMoments};

type CMatrix = DMatrix<Complex64>;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Gram condition number above which Cholesky is replaced by truncation.
pub const MAX_CONDITION: f64 = 1e12;
/// Relative eigenvalue cut for the truncated factorization.
pub const TRUNCATION: f64 = 1e-12;
/// SLD denominators `λ_i + λ_j` below this are treated as kernel.
pub const KERNEL: f64 = 1e-12;

/// Maps operators in coefficient space of the six-vector basis into an
/// orthonormal frame of its span: `M ↦ S·M·S⁺`.
#[derive(Debug, Clone)]
pub struct Whitener {
    /// `r × 6`: coefficients → orthonormal coordinates.
    pub forward: CMatrix,
    /// `6 × r`: right inverse of `forward` on the span.
    pub inverse: CMatrix,
}

impl Whitener {
    pub fn apply(&self, m: &CMatrix) -> CMatrix {
        &self.forward * m * &self.inverse
    }
}

#[derive(Debug, Clone)]
pub struct SubspaceState {
    pub params: TwoEmitterParams,
    /// `Π_ij = ⟨Ψ_i|Ψ_j⟩`.
    pub gram: CMatrix,
    /// ρ acting on basis coefficients: `R_1j = qΠ_1j`, `R_2j = (1−q)Π_2j`.
    pub rho_matrix: CMatrix,
    /// `∂ρ` in coefficient space for `(x1, x2, z1, z2, q)`.
    pub xi: Vec<CMatrix>,
    pub whitener: Whitener,
    pub rank: usize,
    /// True when the Gram matrix was too ill-conditioned for Cholesky.
    pub truncated: bool,
}

/// Builds the basis from displaced PSFs, the Gram matrix, the coefficient
/// representations of ρ and its derivatives, and the whitening transform.
pub fn build_subspace<F: PsfFactory + ?Sized>(
    psf: &F,
    params: &TwoEmitterParams,
) -> Result<SubspaceState> {
    params.validate()?;
    let m = moments(&psf.reference()?);
    let (e1, e2) = params.emitters();
    let psi1 = psf.displaced_reduced(e1)?;
    let psi2 = psf.displaced_reduced(e2)?;
    let basis = six_vectors(&psi1, &psi2, &m)?;

    let mut gram = CMatrix::zeros(6, 6);
    for i in 0..6 {
        for j in i..6 {
            let v = inner(&basis[i], &basis[j])?;
            gram[(i, j)] = v;
            gram[(j, i)] = v.conj();
        }
        gram[(i, i)] = Complex64::new(gram[(i, i)].re, 0.0);
    }
    let (whitener, rank, truncated) = whiten(&gram)?;

    let q = params.q;
    let (p, sigma) = (m.p, m.g_spread());
    let rho_matrix = coefficient_rep(&gram, &[(0, 0, q), (1, 1, 1.0 - q)]);
    let xi = vec![
        coefficient_rep(&gram, &[(2, 0, q * p), (0, 2, q * p)]),
        coefficient_rep(&gram, &[(3, 1, (1.0 - q) * p), (1, 3, (1.0 - q) * p)]),
        coefficient_rep(&gram, &[(4, 0, q * sigma), (0, 4, q * sigma)]),
        coefficient_rep(
            &gram,
            &[(5, 1, (1.0 - q) * sigma), (1, 5, (1.0 - q) * sigma)],
        ),
        coefficient_rep(&gram, &[(0, 0, 1.0), (1, 1, -1.0)]),
    ];

    Ok(SubspaceState {
        params: *params,
        gram,
        rho_matrix,
        xi,
        whitener,
        rank,
        truncated,
    })
}

/// `Ψ₃ = −ip̂Ψ₁/𝔭`, `Ψ₄ = −i(Ĝ − 𝔊)Ψ₁/σ` with `σ² = 𝔤² − 𝔊²`, and the same
/// for Ψ₂, so that `∂_{x1}Ψ₁ = 𝔭Ψ₃` and `∂_{z1}Ψ₁ = σΨ₄ − i𝔊Ψ₁`. The
/// `−i𝔊` part is a phase rotation and drops out of every `∂ρ`; centring
/// keeps Ψ₄ at unit norm instead of `O(k/σ)`.
fn six_vectors(psi1: &FieldGrid, psi2: &FieldGrid, m: &GeneratorMoments) -> Result<Vec<FieldGrid>> {
    let sigma = m.g_spread();
    if m.p <= 0.0 || sigma <= 0.0 {
        return Err(Error::InvalidMoments(format!(
            "basis needs non-zero spreads, got 𝔭 = {}, σ = {sigma}",
            m.p
        )));
    }
    let px = |f: &FieldGrid| apply_px(f).scaled(-I / m.p);
    let gz = |f: &FieldGrid| apply_g_centered(f, m.g_offset).scaled(-I / sigma);
    Ok(vec![
        psi1.clone(),
        psi2.clone(),
        px(psi1),
        px(psi2),
        gz(psi1),
        gz(psi2),
    ])
}

/// Coefficient-space representation `B·Π` of `Σ b_ij |Ψ_i⟩⟨Ψ_j|`.
fn coefficient_rep(gram: &CMatrix, terms: &[(usize, usize, f64)]) -> CMatrix {
    let mut out = CMatrix::zeros(6, 6);
    for &(i, j, b) in terms {
        for c in 0..6 {
            out[(i, c)] += gram[(j, c)] * b;
        }
    }
    out
}

fn whiten(gram: &CMatrix) -> Result<(Whitener, usize, bool)> {
    let eig = SymmetricEigen::new(gram.clone());
    let top = eig.eigenvalues.max();
    let bottom = eig.eigenvalues.min();
    if bottom > 0.0 && top / bottom < MAX_CONDITION {
        if let Some(ch) = Cholesky::new(gram.clone()) {
            let l = ch.l();
            let forward = l.adjoint();
            let inverse = forward
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::Numerical("triangular factor not invertible".into()))?;
            return Ok((Whitener { forward, inverse }, 6, false));
        }
    }
    let keep: Vec<usize> = (0..6)
        .filter(|&i| eig.eigenvalues[i] >= TRUNCATION * top)
        .collect();
    let rank = keep.len();
    if rank < 2 {
        return Err(Error::RankDeficient { rank });
    }
    let mut forward = CMatrix::zeros(rank, 6);
    let mut inverse = CMatrix::zeros(6, rank);
    for (r, &i) in keep.iter().enumerate() {
        let lam = eig.eigenvalues[i];
        let u = eig.eigenvectors.column(i);
        for c in 0..6 {
            forward[(r, c)] = u[c].conj() * lam.sqrt();
            inverse[(c, r)] = u[c] / lam.sqrt();
        }
    }
    Ok((Whitener { forward, inverse }, rank, true))
}

/// Density matrix and SLDs in the orthonormal frame.
#[derive(Debug, Clone)]
pub struct Slds {
    pub labels: [&'static str; 5],
    pub rho: CMatrix,
    pub ops: Vec<CMatrix>,
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Solves `∂ρ = (ρL + Lρ)/2` in the eigenbasis of ρ, with `L = 0` where
/// `λ_i + λ_j` vanishes. SLDs are ordered `(x1, x2, z1, z2, q)`.
pub fn solve_slds(state: &SubspaceState) -> Slds {
    let rho = hermitian_part(&state.whitener.apply(&state.rho_matrix));
    let eig = SymmetricEigen::new(rho.clone());
    let u = &eig.eigenvectors;
    let lam = &eig.eigenvalues;
    let r = rho.nrows();
    let ops = state
        .xi
        .iter()
        .map(|xi| {
            let d = hermitian_part(&state.whitener.apply(xi));
            let de = u.adjoint() * d * u;
            let le = CMatrix::from_fn(r, r, |i, j| {
                let den = lam[i] + lam[j];
                if den > KERNEL {
                    de[(i, j)] * (2.0 / den)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            });
            u * le * u.adjoint()
        })
        .collect();
    Slds {
        labels: EMITTER_LABELS,
        rho,
        ops,
    }
}

/// `L_x0 = L_x1 + L_x2`, `L_s = (L_x2 − L_x1)/2`, likewise for `z`; `L_q`
/// unchanged.
pub fn reparametrize_slds(slds: &Slds) -> Slds {
    let j = jacobian();
    let ops = (0..5)
        .map(|new| {
            (0..5).fold(
                CMatrix::zeros(slds.rho.nrows(), slds.rho.ncols()),
                |acc, old| {
                    let c = j[(old, new)];
                    if c == 0.0 {
                        acc
                    } else {
                        acc + &slds.ops[old] * Complex64::new(c, 0.0)
                    }
                },
            )
        })
        .collect();
    Slds {
        labels: LABELS,
        rho: slds.rho.clone(),
        ops,
    }
}

/// `Q + iΓ = Tr[ρ L_μ L_ν]`.
pub fn qfim_gamma_subspace(slds: &Slds) -> Result<(FisherMatrix, FisherMatrix)> {
    let n = slds.ops.len();
    let rl: Vec<CMatrix> = slds.ops.iter().map(|l| &slds.rho * l).collect();
    let t = DMatrix::from_fn(n, n, |mu, nu| (&rl[mu] * &slds.ops[nu]).trace());
    let q = t.map(|v| v.re);
    let g = t.map(|v| v.im);
    Ok((
        FisherMatrix::symmetric(&slds.labels, (&q + q.transpose()) * 0.5)?,
        FisherMatrix::antisymmetric(&slds.labels, (&g - g.transpose()) * 0.5)?,
    ))
}

/// Full subspace pipeline in `(x0, s, z0, t, q)`.
pub fn two_emitter_subspace<F: PsfFactory + ?Sized>(
    psf: &F,
    params: &TwoEmitterParams,
) -> Result<TwoEmitterInfo> {
    let state = build_subspace(psf, params)?;
    let slds = reparametrize_slds(&solve_slds(&state));
    let (q, gamma) = qfim_gamma_subspace(&slds)?;
    Ok(TwoEmitterInfo {
        q,
        gamma,
        limit: false,
    })
}
