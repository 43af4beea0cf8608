use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::beam::{gaussian_overlap, BeamSpec, OverlapData};
use crate::error::{Error, Result};
use crate::fisher::FisherMatrix;
use crate::grid::GeneratorMoments;

/// Eigenvalues of the scaled QFIm below this fraction of the largest are
/// treated as zero.
pub const PINV_THRESHOLD: f64 = 1e-12;

/// Scaled Γ entries below this count as zero.
pub const GAMMA_ZERO: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityReport {
    /// `ℜ = ‖iΓQ⁻¹‖_∞`, in `[0, 1]`.
    pub r_value: f64,
    /// `Tr Q⁻¹` over the retained eigenspace.
    pub trace_q_inv: f64,
    /// Upper end of the bracket `0 ≤ HCRB − QCRB ≤ Tr(Q⁻¹)·ℜ`.
    pub gap_upper: f64,
    /// Number of QFIm eigen-directions kept by the pseudo-inverse.
    pub retained_rank: usize,
    /// Whether every entry of Γ vanishes in the scaled frame.
    pub gamma_zero: bool,
}

/// ℜ and the HCRB gap bracket.
///
/// Both matrices are first scaled by `D = diag(Q_ii^{−1/2})` so that
/// parameters with very different units share one pseudo-inverse threshold.
/// ℜ is then the spectral radius of the Hermitian matrix
/// `Q^{+1/2}·iΓ·Q^{+1/2}`, which is similar to `iΓQ⁻¹`.
pub fn compatibility(q: &FisherMatrix, gamma: &FisherMatrix) -> Result<CompatibilityReport> {
    let n = q.dim();
    if gamma.dim() != n {
        return Err(Error::InvalidParams("Q and Γ sizes differ".into()));
    }
    if q.max_abs() == 0.0 {
        return Err(Error::ZeroInformation);
    }
    let d: Vec<f64> = q
        .diagonal()
        .iter()
        .map(|&v| if v > 0.0 { v.sqrt().recip() } else { 1.0 })
        .collect();
    let qs = DMatrix::from_fn(n, n, |i, j| q.get(i, j) * d[i] * d[j]);
    let gs = DMatrix::from_fn(n, n, |i, j| gamma.get(i, j) * d[i] * d[j]);

    let eig = SymmetricEigen::new(qs);
    let top = eig.eigenvalues.max();
    if top <= 0.0 {
        return Err(Error::ZeroInformation);
    }
    let keep: Vec<usize> = (0..n)
        .filter(|&i| eig.eigenvalues[i] > PINV_THRESHOLD * top)
        .collect();
    let u = &eig.eigenvectors;
    let pinv_pow = |power: f64| {
        DMatrix::from_fn(n, n, |i, j| {
            keep.iter()
                .map(|&k| u[(i, k)] * u[(j, k)] * eig.eigenvalues[k].powf(power))
                .sum::<f64>()
        })
    };
    let half = pinv_pow(-0.5);
    let pinv = pinv_pow(-1.0);

    let m = (&half * &gs * &half).map(|v| Complex64::new(0.0, v));
    let r_value = SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    let trace_q_inv: f64 = (0..n).map(|i| d[i] * d[i] * pinv[(i, i)]).sum();

    Ok(CompatibilityReport {
        r_value,
        trace_q_inv,
        gap_upper: trace_q_inv * r_value,
        retained_rank: keep.len(),
        gamma_zero: gs.amax() < GAMMA_ZERO,
    })
}

/// [`compatibility`] restricted to the parameters at `idx`, i.e. with the
/// others treated as known.
pub fn compatibility_subset(
    q: &FisherMatrix,
    gamma: &FisherMatrix,
    idx: &[usize],
) -> Result<CompatibilityReport> {
    compatibility(&q.select(idx)?, &gamma.select(idx)?)
}

/// Residual of `𝔊 + ∂_tφ = 0`, under which `z0`, `t` and `q` are
/// compatible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionCheck {
    pub residual: f64,
    pub holds: bool,
}

pub const CONDITION_TOL: f64 = 1e-8;

pub fn condition_check(m: &GeneratorMoments, o: &OverlapData) -> ConditionCheck {
    let residual = m.g_offset + o.dphi_dt_reduced;
    ConditionCheck {
        residual,
        holds: residual.abs() < CONDITION_TOL * m.g_mean.abs(),
    }
}

pub fn condition_check_gaussian(spec: &BeamSpec, s: f64, t: f64) -> Result<ConditionCheck> {
    let o = gaussian_overlap(spec, s, t)?;
    Ok(condition_check(
        &GeneratorMoments::gaussian(spec.w0, spec.k()),
        &o,
    ))
}
