//! Localisation of a single emitter in 3D: quantum limits and direct
//! intensity detection.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::beam::{grid_for, sample_with, BeamSpec, Carrier, Displacement, FdSteps, PsfFactory};
use crate::error::{Error, Result};
use crate::fisher::FisherMatrix;
use crate::grid::{
    apply_g_centered, apply_px, apply_py, inner, moments, FieldGrid, GeneratorMoments,
};

pub const POSITION_LABELS: [&str; 3] = ["x_e", "y_e", "z_e"];

/// `Q = 4·diag(𝔭_x², 𝔭_y², 𝔤² − 𝔊²)`, valid for any transversely symmetric
/// PSF and independent of the emitter position.
pub fn qfim_localisation(m: &GeneratorMoments) -> Result<FisherMatrix> {
    m.validate()?;
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
        4.0 * m.p * m.p,
        4.0 * m.p_y * m.p_y,
        4.0 * m.g_variance.max(0.0),
    ]));
    FisherMatrix::symmetric(&POSITION_LABELS, d)
}

/// Generator covariance `C_jk = ⟨(G_j − ⟨G_j⟩)Ψ|(G_k − ⟨G_k⟩)Ψ⟩` for
/// `(p̂_x, p̂_y, Ĝ)`; the pure-state QFIm is `4·Re C` and Γ is `4·Im C`.
fn generator_covariance(psi: &FieldGrid) -> Result<DMatrix<Complex64>> {
    let mut psi = psi.clone();
    psi.renormalize()?;
    let m = moments(&psi);
    let center = |f: FieldGrid| -> Result<FieldGrid> {
        let mean = inner(&psi, &f)?;
        f.axpy(-mean, &psi)
    };
    let images = [
        center(apply_px(&psi))?,
        center(apply_py(&psi))?,
        apply_g_centered(&psi, m.g_offset),
    ];
    let mut c = DMatrix::zeros(3, 3);
    for i in 0..3 {
        for j in 0..3 {
            c[(i, j)] = inner(&images[i], &images[j])?;
        }
    }
    Ok(c)
}

/// Pure-state QFIm and Γ of emitter position, computed from the state's
/// generator images on the grid.
pub fn pure_state_qfim(psi: &FieldGrid) -> Result<(FisherMatrix, FisherMatrix)> {
    let c = generator_covariance(psi)?;
    let q = c.map(|v| 4.0 * v.re);
    let g = c.map(|v| 4.0 * v.im);
    Ok((
        FisherMatrix::symmetric(&POSITION_LABELS, (&q + q.transpose()) * 0.5)?,
        antisymmetric_part(&g),
    ))
}

fn antisymmetric_part(g: &DMatrix<f64>) -> FisherMatrix {
    let a = (g - g.transpose()) * 0.5;
    FisherMatrix::antisymmetric(&POSITION_LABELS, a).expect("exactly antisymmetric")
}

/// Weak-commutativity matrix of the position parameters,
/// `Γ_jk = 4·Im⟨G_jΨ|G_kΨ⟩`. Vanishes for symmetric PSFs.
pub fn gamma_localisation(psi: &FieldGrid) -> Result<FisherMatrix> {
    Ok(pure_state_qfim(psi)?.1)
}

/// Closed-form CFIm of intensity detection of a Gaussian beam at distance
/// `z` from the waist.
pub fn cfi_direct_gaussian(spec: &BeamSpec, z: f64) -> Result<FisherMatrix> {
    if !spec.is_gaussian() {
        return Err(Error::NotGaussian);
    }
    let zr = spec.rayleigh_range();
    let d2 = z * z + zr * zr;
    let fxx = 4.0 * zr * zr / (spec.w0 * spec.w0 * d2);
    let fzz = 4.0 * z * z / (d2 * d2);
    FisherMatrix::symmetric(
        &POSITION_LABELS,
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![fxx, fxx, fzz])),
    )
}

/// Nodes with intensity below this fraction of the peak are excluded from
/// the Fisher integrand.
pub const INTENSITY_FLOOR: f64 = 1e-15;

/// CFIm of direct intensity detection on the plane `detector_z` for an
/// emitter at `emitter`:
/// `F_μν = ∫ (∂_μ p)(∂_ν p)/p dx dy`, with parameter derivatives by central
/// differences.
pub fn cfi_direct_numeric<F: PsfFactory + ?Sized>(
    psf: &F,
    emitter: Displacement,
    detector_z: f64,
    steps: FdSteps,
) -> Result<FisherMatrix> {
    let at = |dx: f64, dy: f64, dz: f64| -> Result<Vec<f64>> {
        Ok(psf
            .displaced_reduced(Displacement::new(
                emitter.x + dx,
                emitter.y + dy,
                emitter.z + detector_z + dz,
            ))?
            .intensity())
    };
    let p = at(0.0, 0.0, 0.0)?;
    let (h, hz) = (steps.transverse, steps.longitudinal);
    let diff = |plus: Vec<f64>, minus: Vec<f64>, step: f64| -> Vec<f64> {
        plus.iter()
            .zip(&minus)
            .map(|(a, b)| (a - b) / (2.0 * step))
            .collect()
    };
    let derivs = [
        diff(at(h, 0.0, 0.0)?, at(-h, 0.0, 0.0)?, h),
        diff(at(0.0, h, 0.0)?, at(0.0, -h, 0.0)?, h),
        diff(at(0.0, 0.0, hz)?, at(0.0, 0.0, -hz)?, hz),
    ];
    let peak = p.iter().copied().fold(0.0, f64::max);
    let floor = INTENSITY_FLOOR * peak;
    let area = psf.grid().cell_area();
    let mut f = DMatrix::zeros(3, 3);
    for (n, &pn) in p.iter().enumerate() {
        if pn < floor || pn <= 0.0 {
            continue;
        }
        for i in 0..3 {
            for j in i..3 {
                f[(i, j)] += derivs[i][n] * derivs[j][n] / pn;
            }
        }
    }
    for i in 0..3 {
        for j in 0..i {
            f[(i, j)] = f[(j, i)];
        }
    }
    FisherMatrix::symmetric(&POSITION_LABELS, f * area)
}

/// Numerical CFIm together with a grid-refinement check.
#[derive(Debug, Clone)]
pub struct CfiReport {
    pub matrix: FisherMatrix,
    /// Largest change of a diagonal entry, relative to the largest diagonal
    /// entry, when the computation is repeated on the refined grid.
    pub refinement_change: f64,
    pub converged: bool,
}

/// Relative change above which a numerical CFIm is flagged unconverged.
pub const REFINEMENT_TOL: f64 = 1e-3;

/// Evaluates the CFIm on `coarse` and `fine` and flags disagreement.
pub fn cfi_with_refinement<A, B>(
    coarse: &A,
    fine: &B,
    emitter: Displacement,
    detector_z: f64,
    steps: FdSteps,
) -> Result<CfiReport>
where
    A: PsfFactory + ?Sized,
    B: PsfFactory + ?Sized,
{
    let a = cfi_direct_numeric(coarse, emitter, detector_z, steps)?;
    let b = cfi_direct_numeric(fine, emitter, detector_z, steps)?;
    let scale = a.diagonal().into_iter().fold(0.0, f64::max);
    let change = (0..3)
        .map(|i| (a.get(i, i) - b.get(i, i)).abs())
        .fold(0.0, f64::max)
        / scale.max(f64::MIN_POSITIVE);
    Ok(CfiReport {
        matrix: b,
        refinement_change: change,
        converged: change <= REFINEMENT_TOL,
    })
}

/// `QFI_xx(LG_{p,l}) / QFI_xx(Gaussian)` for `p ≤ p_max`, `|l| ≤ l_max`,
/// from grid moments on an `n × n` grid wide enough for the highest mode.
/// Row index is `p`, column index is `l`.
pub fn lg_ratio_table(
    w0: f64,
    lambda: f64,
    p_max: u32,
    l_max: u32,
    n: usize,
) -> Result<Vec<Vec<f64>>> {
    let widest = BeamSpec::laguerre_gauss(w0, lambda, p_max, l_max as i32)?;
    let grid = grid_for(&widest, n, 0.0, 0.0)?;
    let transverse_qfi = |p: u32, l: u32| -> Result<f64> {
        let spec = BeamSpec::laguerre_gauss(w0, lambda, p, l as i32)?;
        let psi = sample_with(&spec, Displacement::default(), &grid, Carrier::Omit)?;
        Ok(qfim_localisation(&moments(&psi))?.get(0, 0))
    };
    let reference = transverse_qfi(0, 0)?;
    (0..=p_max)
        .map(|p| {
            (0..=l_max)
                .map(|l| Ok(transverse_qfi(p, l)? / reference))
                .collect()
        })
        .collect()
}
