//! Brute-force QFIm and Γ for finite mixtures of grid states.
//!
//! Nothing here uses the generator algebra: parameter derivatives of the
//! sampled states are taken by finite differences, the mixture is
//! diagonalized inside the span of the states and their derivatives, and the
//! SLD second moments are summed in that eigenbasis.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::beam::{Displacement, FdSteps, PsfFactory};
use crate::error::{Error, Result};
use crate::fisher::FisherMatrix;
use crate::grid::{inner, FieldGrid};
use crate::single::POSITION_LABELS;
use crate::two_emitter::{TwoEmitterParams, LABELS};

type CMatrix = DMatrix<Complex64>;

/// `ρ(θ) = Σ_k w_k(θ) |ψ_k(θ)⟩⟨ψ_k(θ)|`.
pub trait MixtureModel: Sync {
    fn labels(&self) -> Vec<&'static str>;

    /// Weights and normalized states at `theta`.
    fn components(&self, theta: &[f64]) -> Result<Vec<(f64, FieldGrid)>>;

    /// Finite-difference step for every parameter at `theta`.
    fn steps(&self, theta: &[f64]) -> Vec<f64>;
}

/// Two emitters in `(x0, s, z0, t, q)`.
pub struct TwoEmitterModel<'a, F: PsfFactory + ?Sized> {
    psf: &'a F,
    steps: FdSteps,
}

impl<'a, F: PsfFactory + ?Sized> TwoEmitterModel<'a, F> {
    pub fn new(psf: &'a F, steps: FdSteps) -> Self {
        Self { psf, steps }
    }
}

/// Default oracle steps, `1e-2·(w0, z_r)`. With one Richardson level the
/// truncation error is `O(h⁴)`, so larger steps than the plain central
/// differences elsewhere keep roundoff out of the smallest entries.
pub fn default_steps(scales: (f64, f64)) -> FdSteps {
    FdSteps {
        transverse: 1e-2 * scales.0,
        longitudinal: 1e-2 * scales.1,
    }
}

/// Step for the relative intensity, as a fraction of `min(q, 1 − q)`.
/// The weights are linear in `q`, so any step inside `(0, 1)` is exact.
pub const WEIGHT_STEP: f64 = 1e-2;

impl<F: PsfFactory + ?Sized> MixtureModel for TwoEmitterModel<'_, F> {
    fn labels(&self) -> Vec<&'static str> {
        LABELS.to_vec()
    }

    fn components(&self, theta: &[f64]) -> Result<Vec<(f64, FieldGrid)>> {
        let p = TwoEmitterParams::from_array([theta[0], theta[1], theta[2], theta[3], theta[4]])?;
        let (e1, e2) = p.emitters();
        Ok(vec![
            (p.q, self.psf.displaced_reduced(e1)?),
            (1.0 - p.q, self.psf.displaced_reduced(e2)?),
        ])
    }

    fn steps(&self, theta: &[f64]) -> Vec<f64> {
        let (h, hz) = (self.steps.transverse, self.steps.longitudinal);
        let q = theta[4];
        vec![h, h, hz, hz, WEIGHT_STEP * q.min(1.0 - q)]
    }
}

/// One emitter in `(x_e, y_e, z_e)`.
pub struct SingleEmitterModel<'a, F: PsfFactory + ?Sized> {
    psf: &'a F,
    steps: FdSteps,
}

impl<'a, F: PsfFactory + ?Sized> SingleEmitterModel<'a, F> {
    pub fn new(psf: &'a F, steps: FdSteps) -> Self {
        Self { psf, steps }
    }
}

impl<F: PsfFactory + ?Sized> MixtureModel for SingleEmitterModel<'_, F> {
    fn labels(&self) -> Vec<&'static str> {
        POSITION_LABELS.to_vec()
    }

    fn components(&self, theta: &[f64]) -> Result<Vec<(f64, FieldGrid)>> {
        let d = Displacement::new(theta[0], theta[1], theta[2]);
        Ok(vec![(1.0, self.psf.displaced_reduced(d)?)])
    }

    fn steps(&self, _theta: &[f64]) -> Vec<f64> {
        let (h, hz) = (self.steps.transverse, self.steps.longitudinal);
        vec![h, h, hz]
    }
}

/// ρ and its parameter derivatives in the eigenbasis of ρ.
#[derive(Debug, Clone)]
pub struct SpectralState {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<FieldGrid>,
    /// `⟨e_i|∂_μρ|e_j⟩` for each parameter.
    pub derivative_matrices: Vec<CMatrix>,
}

/// Pivoted-orthogonalization cut: candidates whose residual norm, relative
/// to their own norm, falls below this are considered dependent.
pub const DEPENDENCE: f64 = 1e-9;

/// Eigenvalue-pair sums below this are dropped from the SLD sums.
pub const KERNEL: f64 = 1e-12;

struct Derivatives {
    weights: Vec<f64>,
    states: Vec<FieldGrid>,
    /// `[μ][k]`
    dweights: Vec<Vec<f64>>,
    dstates: Vec<Vec<FieldGrid>>,
}

fn central<M: MixtureModel + ?Sized>(
    model: &M,
    theta: &[f64],
    mu: usize,
    h: f64,
) -> Result<(Vec<f64>, Vec<FieldGrid>)> {
    let mut plus = theta.to_vec();
    let mut minus = theta.to_vec();
    plus[mu] += h;
    minus[mu] -= h;
    let a = model.components(&plus)?;
    let b = model.components(&minus)?;
    let mut dw = Vec::with_capacity(a.len());
    let mut ds = Vec::with_capacity(a.len());
    for ((wa, fa), (wb, fb)) in a.iter().zip(&b) {
        dw.push((wa - wb) / (2.0 * h));
        ds.push(
            fa.axpy(Complex64::new(-1.0, 0.0), fb)?
                .scaled(Complex64::new(0.5 / h, 0.0)),
        );
    }
    Ok((dw, ds))
}

/// Central differences with one Richardson level: `(4·D(h/2) − D(h))/3`.
fn derivatives<M: MixtureModel + ?Sized>(model: &M, theta: &[f64]) -> Result<Derivatives> {
    let comps = model.components(theta)?;
    let steps = model.steps(theta);
    if steps.len() != theta.len() {
        return Err(Error::InvalidParams(
            "step count differs from parameter count".into(),
        ));
    }
    let mut dweights = Vec::new();
    let mut dstates = Vec::new();
    for (mu, &h) in steps.iter().enumerate() {
        let (w1, s1) = central(model, theta, mu, h)?;
        let (w2, s2) = central(model, theta, mu, 0.5 * h)?;
        dweights.push(
            w1.iter()
                .zip(&w2)
                .map(|(a, b)| (4.0 * b - a) / 3.0)
                .collect(),
        );
        let mut ds = Vec::new();
        for (a, b) in s1.iter().zip(&s2) {
            ds.push(
                b.scaled(Complex64::new(4.0 / 3.0, 0.0))
                    .axpy(Complex64::new(-1.0 / 3.0, 0.0), a)?,
            );
        }
        dstates.push(ds);
    }
    Ok(Derivatives {
        weights: comps.iter().map(|c| c.0).collect(),
        states: comps.into_iter().map(|c| c.1).collect(),
        dweights,
        dstates,
    })
}

/// Orthonormal basis of the span of `vectors`, largest residual first.
fn pivoted_basis(vectors: &[&FieldGrid]) -> Result<Vec<FieldGrid>> {
    let mut work: Vec<(FieldGrid, f64)> = vectors
        .iter()
        .filter_map(|v| {
            let n = v.norm_sq().sqrt();
            (n > 0.0).then(|| ((*v).clone(), n))
        })
        .collect();
    let mut basis: Vec<FieldGrid> = Vec::new();
    loop {
        let best = work
            .iter()
            .enumerate()
            .map(|(i, (v, n0))| (i, v.norm_sq().sqrt() / n0))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let Some((i, rel)) = best else { break };
        if rel < DEPENDENCE {
            break;
        }
        let (mut e, _) = work.swap_remove(i);
        // second pass against roundoff
        for b in &basis {
            let c = inner(b, &e)?;
            e = e.axpy(-c, b)?;
        }
        e.renormalize()?;
        for (v, _) in work.iter_mut() {
            let c = inner(&e, v)?;
            *v = v.axpy(-c, &e)?;
        }
        basis.push(e);
    }
    Ok(basis)
}

fn coords(basis: &[FieldGrid], v: &FieldGrid) -> Result<DVector<Complex64>> {
    let c: Result<Vec<Complex64>> = basis.iter().map(|e| inner(e, v)).collect();
    Ok(DVector::from_vec(c?))
}

/// Diagonalizes ρ(θ) inside the span of its components and their
/// derivatives.
pub fn spectral_state<M: MixtureModel + ?Sized>(model: &M, theta: &[f64]) -> Result<SpectralState> {
    let d = derivatives(model, theta)?;
    let mut candidates: Vec<&FieldGrid> = d.states.iter().collect();
    for ds in &d.dstates {
        candidates.extend(ds.iter());
    }
    let basis = pivoted_basis(&candidates)?;
    let r = basis.len();

    let c: Vec<DVector<Complex64>> = d
        .states
        .iter()
        .map(|s| coords(&basis, s))
        .collect::<Result<_>>()?;
    let outer = |a: &DVector<Complex64>, b: &DVector<Complex64>| a * b.adjoint();
    let mut rho = CMatrix::zeros(r, r);
    for (w, ck) in d.weights.iter().zip(&c) {
        rho += outer(ck, ck) * Complex64::new(*w, 0.0);
    }
    let mut drho = Vec::new();
    for (dw, ds) in d.dweights.iter().zip(&d.dstates) {
        let mut m = CMatrix::zeros(r, r);
        for k in 0..c.len() {
            let dk = coords(&basis, &ds[k])?;
            m += outer(&c[k], &c[k]) * Complex64::new(dw[k], 0.0);
            m += (outer(&dk, &c[k]) + outer(&c[k], &dk)) * Complex64::new(d.weights[k], 0.0);
        }
        drho.push(m);
    }

    let rho = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(rho);
    let u = eig.eigenvectors;
    let eigenvectors = (0..r)
        .map(|j| {
            let mut v = FieldGrid::zeros(basis[0].grid().clone(), basis[0].wavenumber())?;
            for (i, e) in basis.iter().enumerate() {
                v = v.axpy(u[(i, j)], e)?;
            }
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectralState {
        eigenvalues: eig.eigenvalues.iter().copied().collect(),
        eigenvectors,
        derivative_matrices: drho.iter().map(|m| u.adjoint() * m * &u).collect(),
    })
}

/// `Tr[ρ L_μ L_ν] = Σ_ij 4λ_i (∂_μρ)_ij (∂_νρ)_ji / (λ_i + λ_j)²`.
pub fn trace_matrix(state: &SpectralState) -> CMatrix {
    let lam = &state.eigenvalues;
    let dm = &state.derivative_matrices;
    let n = dm.len();
    CMatrix::from_fn(n, n, |mu, nu| {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..lam.len() {
            for j in 0..lam.len() {
                let den = lam[i] + lam[j];
                if den > KERNEL {
                    acc += dm[mu][(i, j)] * dm[nu][(j, i)] * (4.0 * lam[i] / (den * den));
                }
            }
        }
        acc
    })
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub q: FisherMatrix,
    pub gamma: FisherMatrix,
    pub eigenvalues: Vec<f64>,
}

/// QFIm (real part) and Γ (imaginary part) of `Tr[ρ L_μ L_ν]`.
pub fn oracle_qfim<M: MixtureModel + ?Sized>(model: &M, theta: &[f64]) -> Result<OracleResult> {
    let state = spectral_state(model, theta)?;
    let t = trace_matrix(&state);
    let labels = model.labels();
    let q = t.map(|v| v.re);
    let g = t.map(|v| v.im);
    Ok(OracleResult {
        q: FisherMatrix::symmetric(&labels, (&q + q.transpose()) * 0.5)?,
        gamma: FisherMatrix::antisymmetric(&labels, (&g - g.transpose()) * 0.5)?,
        eigenvalues: state.eigenvalues,
    })
}

pub fn oracle_two_emitter<F: PsfFactory + ?Sized>(
    psf: &F,
    params: &TwoEmitterParams,
    steps: FdSteps,
) -> Result<OracleResult> {
    oracle_qfim(&TwoEmitterModel::new(psf, steps), &params.to_array())
}

pub fn oracle_single_emitter<F: PsfFactory + ?Sized>(
    psf: &F,
    emitter: Displacement,
    steps: FdSteps,
) -> Result<OracleResult> {
    oracle_qfim(
        &SingleEmitterModel::new(psf, steps),
        &[emitter.x, emitter.y, emitter.z],
    )
}

/// Pure-state formula `4(⟨∂_jψ|∂_kψ⟩ − ⟨∂_jψ|ψ⟩⟨ψ|∂_kψ⟩)` with the same
/// finite-difference derivatives the oracle uses. Real part is Q, imaginary
/// part Γ. Only meaningful for single-component models.
pub fn pure_state_fd_qfim<M: MixtureModel + ?Sized>(model: &M, theta: &[f64]) -> Result<CMatrix> {
    let d = derivatives(model, theta)?;
    if d.states.len() != 1 {
        return Err(Error::InvalidParams(
            "pure-state formula needs one component".into(),
        ));
    }
    let psi = &d.states[0];
    let n = d.dstates.len();
    let mut out = CMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            let a = &d.dstates[j][0];
            let b = &d.dstates[k][0];
            out[(j, k)] = (inner(a, b)? - inner(a, psi)? * inner(psi, b)?) * 4.0;
        }
    }
    Ok(out)
}

/// Largest entry change between two oracle results, in the frame where the
/// first QFIm has unit diagonal.
pub fn refinement_discrepancy(a: &OracleResult, b: &OracleResult) -> f64 {
    let d = a.q.diagonal();
    let s: Vec<f64> = d
        .iter()
        .map(|&v| if v > 0.0 { v.sqrt().recip() } else { 1.0 })
        .collect();
    let n = d.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let f = s[i] * s[j];
            worst = worst
                .max(((a.q.get(i, j) - b.q.get(i, j)) * f).abs())
                .max(((a.gamma.get(i, j) - b.gamma.get(i, j)) * f).abs());
        }
    }
    worst
}

/// Discrepancy above which a grid is flagged as too coarse.
pub const REFINEMENT_TOL: f64 = 1e-3;
