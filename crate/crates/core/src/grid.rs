//! Complex fields sampled on a uniform transverse grid.
//!
//! A [`FieldGrid`] is the discrete stand-in for a photon state `|Ψ⟩`. The
//! displacement generators act spectrally: the field is transformed with a 2D
//! DFT, multiplied by the generator's symbol and transformed back.
//!
//! | generator | symbol |
//! |-----------|--------|
//! | `p̂_x = −i∂_x` | `κ_x` |
//! | `p̂_y = −i∂_y` | `κ_y` |
//! | `Ĝ = ∇²_T/(2k) + k` | `k − (κ_x² + κ_y²)/(2k)` |
//!
//! Because `Ĝ` is dominated by the constant `k` (about 1e7 1/m for visible
//! light) while its spread is of order `1/z_r`, every statistic of `Ĝ` is
//! computed from the reduced generator `Ĝ − k = ∇²_T/(2k)` and shifted back
//! analytically.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform periodic grid with cached FFT plans and angular wavenumbers.
///
/// Node `(ix, iy)` sits at `((ix − nx/2)·dx, (iy − ny/2)·dy)` and is stored at
/// `ix·ny + iy`.
pub struct Grid {
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    kx: Vec<f64>,
    ky: Vec<f64>,
    fft_x: Arc<dyn Fft<f64>>,
    ifft_x: Arc<dyn Fft<f64>>,
    fft_y: Arc<dyn Fft<f64>>,
    ifft_y: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .field("dx", &self.dx)
            .field("dy", &self.dy)
            .finish()
    }
}

/// Minimum node count per axis.
pub const MIN_NODES: usize = 16;

fn wavenumbers(n: usize, d: f64) -> Vec<f64> {
    let span = n as f64 * d;
    (0..n)
        .map(|j| {
            let m = if j < n / 2 {
                j as f64
            } else {
                j as f64 - n as f64
            };
            2.0 * PI * m / span
        })
        .collect()
}

impl Grid {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64) -> Result<Arc<Self>> {
        for (n, axis) in [(nx, "nx"), (ny, "ny")] {
            if n < MIN_NODES || n % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "{axis} = {n} must be even and at least {MIN_NODES}"
                )));
            }
        }
        if !(dx > 0.0 && dx.is_finite() && dy > 0.0 && dy.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "spacings must be positive, got dx = {dx}, dy = {dy}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Arc::new(Self {
            nx,
            ny,
            dx,
            dy,
            kx: wavenumbers(nx, dx),
            ky: wavenumbers(ny, dy),
            fft_x: planner.plan_fft_forward(nx),
            ifft_x: planner.plan_fft_inverse(nx),
            fft_y: planner.plan_fft_forward(ny),
            ifft_y: planner.plan_fft_inverse(ny),
        }))
    }

    /// Square `n × n` grid spanning `[−half_width, half_width)` on both axes.
    pub fn square(n: usize, half_width: f64) -> Result<Arc<Self>> {
        let d = 2.0 * half_width / n as f64;
        Self::new(n, n, d, d)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn x(&self, ix: usize) -> f64 {
        (ix as f64 - (self.nx / 2) as f64) * self.dx
    }

    pub fn y(&self, iy: usize) -> f64 {
        (iy as f64 - (self.ny / 2) as f64) * self.dy
    }

    pub fn half_width_x(&self) -> f64 {
        0.5 * self.nx as f64 * self.dx
    }

    pub fn half_width_y(&self) -> f64 {
        0.5 * self.ny as f64 * self.dy
    }

    /// Largest resolvable angular wavenumber, `π/max(dx, dy)`.
    pub fn nyquist(&self) -> f64 {
        PI / self.dx.max(self.dy)
    }

    pub fn kx(&self) -> &[f64] {
        &self.kx
    }

    pub fn ky(&self) -> &[f64] {
        &self.ky
    }

    pub fn same_geometry(&self, other: &Grid) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.dx == other.dx && self.dy == other.dy
    }

    /// Grid with twice as many nodes over the same window.
    pub fn refined(&self) -> Result<Arc<Self>> {
        Self::new(2 * self.nx, 2 * self.ny, 0.5 * self.dx, 0.5 * self.dy)
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let (fx, fy) = if inverse {
            (&self.ifft_x, &self.ifft_y)
        } else {
            (&self.fft_x, &self.fft_y)
        };
        fy.process(data);
        let mut t = transpose(data, self.nx, self.ny);
        fx.process(&mut t);
        let back = transpose(&t, self.ny, self.nx);
        data.copy_from_slice(&back);
        if inverse {
            let scale = 1.0 / self.len() as f64;
            data.iter_mut().for_each(|v| *v *= scale);
        }
    }

    /// Apply a real spectral symbol `m(κ_x, κ_y)` to `data`.
    pub(crate) fn apply_symbol<F>(&self, data: &[Complex64], symbol: F) -> Vec<Complex64>
    where
        F: Fn(usize, usize) -> Complex64,
    {
        let mut buf = data.to_vec();
        self.transform(&mut buf, false);
        for ix in 0..self.nx {
            for iy in 0..self.ny {
                buf[ix * self.ny + iy] *= symbol(ix, iy);
            }
        }
        self.transform(&mut buf, true);
        buf
    }
}

fn transpose(data: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = data[r * cols + c];
        }
    }
    out
}

/// Complex amplitudes on a [`Grid`] together with the optical wavenumber.
///
/// Constructors that represent physical states renormalize to unit L² norm;
/// operator outputs are left unnormalized.
#[derive(Debug, Clone)]
pub struct FieldGrid {
    grid: Arc<Grid>,
    k: f64,
    amps: Vec<Complex64>,
}

impl FieldGrid {
    /// Wraps raw amplitudes without renormalizing.
    pub fn from_raw(grid: Arc<Grid>, k: f64, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} amplitudes, got {}",
                grid.len(),
                amps.len()
            )));
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "wavenumber must be positive, got {k}"
            )));
        }
        Ok(Self { grid, k, amps })
    }

    /// Wraps amplitudes and renormalizes them to unit L² norm.
    pub fn normalized(grid: Arc<Grid>, k: f64, amps: Vec<Complex64>) -> Result<Self> {
        let mut f = Self::from_raw(grid, k, amps)?;
        f.renormalize()?;
        Ok(f)
    }

    /// Samples `f(x, y)` at every node and renormalizes.
    pub fn from_fn<F>(grid: Arc<Grid>, k: f64, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> Complex64,
    {
        let mut amps = Vec::with_capacity(grid.len());
        for ix in 0..grid.nx() {
            let x = grid.x(ix);
            for iy in 0..grid.ny() {
                amps.push(f(x, grid.y(iy)));
            }
        }
        Self::normalized(grid, k, amps)
    }

    pub fn zeros(grid: Arc<Grid>, k: f64) -> Result<Self> {
        let n = grid.len();
        Self::from_raw(grid, k, vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn wavenumber(&self) -> f64 {
        self.k
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn at(&self, ix: usize, iy: usize) -> Complex64 {
        self.amps[ix * self.grid.ny() + iy]
    }

    /// `Σ|ψ|²·dx·dy`.
    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.cell_area()
    }

    pub fn renormalize(&mut self) -> Result<()> {
        let n2 = self.norm_sq();
        if !(n2 > 0.0 && n2.is_finite()) {
            return Err(Error::ZeroField);
        }
        let s = 1.0 / n2.sqrt();
        self.amps.iter_mut().for_each(|a| *a *= s);
        Ok(())
    }

    pub fn scaled(&self, alpha: Complex64) -> Self {
        Self {
            grid: self.grid.clone(),
            k: self.k,
            amps: self.amps.iter().map(|a| a * alpha).collect(),
        }
    }

    /// `self + alpha·other`.
    pub fn axpy(&self, alpha: Complex64, other: &FieldGrid) -> Result<Self> {
        check_geometry(self, other)?;
        Ok(Self {
            grid: self.grid.clone(),
            k: self.k,
            amps: self
                .amps
                .iter()
                .zip(&other.amps)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        })
    }

    /// Intensity `|ψ|²` at every node.
    pub fn intensity(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    fn with_amps(&self, amps: Vec<Complex64>) -> Self {
        Self {
            grid: self.grid.clone(),
            k: self.k,
            amps,
        }
    }

    /// Applies an arbitrary spectral multiplier `m(κ_x, κ_y)`.
    pub fn apply_spectral<F>(&self, symbol: F) -> Self
    where
        F: Fn(f64, f64) -> Complex64,
    {
        let g = &self.grid;
        let out = g.apply_symbol(&self.amps, |ix, iy| symbol(g.kx[ix], g.ky[iy]));
        self.with_amps(out)
    }
}

fn check_geometry(a: &FieldGrid, b: &FieldGrid) -> Result<()> {
    if Arc::ptr_eq(&a.grid, &b.grid) || a.grid.same_geometry(&b.grid) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Discrete L² inner product `Σ conj(a)·b·dx·dy`.
pub fn inner(a: &FieldGrid, b: &FieldGrid) -> Result<Complex64> {
    check_geometry(a, b)?;
    let s: Complex64 = a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum();
    Ok(s * a.grid.cell_area())
}

/// `−i∂ψ/∂x`, evaluated spectrally. The Nyquist mode is dropped.
pub fn apply_px(field: &FieldGrid) -> FieldGrid {
    let nyq_x = field.grid.nx / 2;
    let g = &field.grid;
    let out = g.apply_symbol(&field.amps, |ix, _| {
        if ix == nyq_x {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(g.kx[ix], 0.0)
        }
    });
    field.with_amps(out)
}

/// `−i∂ψ/∂y`, evaluated spectrally. The Nyquist mode is dropped.
pub fn apply_py(field: &FieldGrid) -> FieldGrid {
    let nyq_y = field.grid.ny / 2;
    let g = &field.grid;
    let out = g.apply_symbol(&field.amps, |_, iy| {
        if iy == nyq_y {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(g.ky[iy], 0.0)
        }
    });
    field.with_amps(out)
}

/// `(Ĝ − k)ψ = ∇²_T ψ / (2k)`.
pub fn apply_g_reduced(field: &FieldGrid) -> FieldGrid {
    let g = &field.grid;
    let k = field.k;
    let out = g.apply_symbol(&field.amps, |ix, iy| {
        Complex64::new(
            -(g.kx[ix] * g.kx[ix] + g.ky[iy] * g.ky[iy]) / (2.0 * k),
            0.0,
        )
    });
    field.with_amps(out)
}

/// `Ĝψ = ∇²_T ψ / (2k) + kψ`.
pub fn apply_g(field: &FieldGrid) -> FieldGrid {
    let reduced = apply_g_reduced(field);
    let k = field.k;
    let amps = reduced
        .amps
        .iter()
        .zip(&field.amps)
        .map(|(r, f)| r + f * k)
        .collect();
    field.with_amps(amps)
}

/// `(Ĝ − 𝔊)ψ` for a generator mean `𝔊 = k + offset`.
pub fn apply_g_centered(field: &FieldGrid, offset: f64) -> FieldGrid {
    let reduced = apply_g_reduced(field);
    let amps = reduced
        .amps
        .iter()
        .zip(&field.amps)
        .map(|(r, f)| r - f * offset)
        .collect();
    field.with_amps(amps)
}

/// Second moments of the displacement generators in a state.
///
/// `g_offset` is `𝔊 − k` and `g_variance` is `𝔤² − 𝔊²`; both are kept
/// separately because forming them from `𝔤` and `𝔊` directly cancels
/// catastrophically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorMoments {
    /// `𝔭 = √⟨p̂_x²⟩`
    pub p: f64,
    /// `√⟨p̂_y²⟩`
    pub p_y: f64,
    /// `𝔤 = √⟨Ĝ²⟩`
    pub g: f64,
    /// `𝔊 = ⟨Ĝ⟩`
    pub g_mean: f64,
    /// `𝔊 − k`
    pub g_offset: f64,
    /// `𝔤² − 𝔊²`
    pub g_variance: f64,
    /// Optical wavenumber `k`.
    pub k: f64,
}

impl GeneratorMoments {
    /// Builds the moments from `k`, the transverse RMS momenta and the
    /// reduced mean and variance of `Ĝ`.
    pub fn from_parts(k: f64, p: f64, p_y: f64, g_offset: f64, g_variance: f64) -> Self {
        let g_mean = k + g_offset;
        Self {
            p,
            p_y,
            g: (g_mean * g_mean + g_variance).max(0.0).sqrt(),
            g_mean,
            g_offset,
            g_variance,
            k,
        }
    }

    /// Closed-form moments of the fundamental Gaussian of waist `w0`.
    pub fn gaussian(w0: f64, k: f64) -> Self {
        Self::from_parts(
            k,
            1.0 / w0,
            1.0 / w0,
            -1.0 / (k * w0 * w0),
            1.0 / (k * k * w0.powi(4)),
        )
    }

    /// RMS spread of `Ĝ`, `√(𝔤² − 𝔊²)`.
    pub fn g_spread(&self) -> f64 {
        self.g_variance.max(0.0).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 0.0 && self.p_y >= 0.0 && self.g >= 0.0) {
            return Err(Error::InvalidMoments(format!(
                "RMS values must be non-negative: p = {}, p_y = {}, g = {}",
                self.p, self.p_y, self.g
            )));
        }
        if self.g_variance < -1e-12 {
            return Err(Error::InvalidMoments(format!(
                "negative generator variance {}",
                self.g_variance
            )));
        }
        Ok(())
    }
}

/// Generator moments of a normalized field.
pub fn moments(field: &FieldGrid) -> GeneratorMoments {
    let px = apply_px(field);
    let py = apply_py(field);
    let reduced = apply_g_reduced(field);
    let norm = field.norm_sq();
    let offset = inner(field, &reduced).map(|c| c.re).unwrap_or(0.0) / norm;
    let spread = apply_g_centered(field, offset);
    GeneratorMoments::from_parts(
        field.k,
        (px.norm_sq() / norm).sqrt(),
        (py.norm_sq() / norm).sqrt(),
        offset,
        spread.norm_sq() / norm,
    )
}
