//! Analytic beams, their displaced forms and two-state overlap data.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{inner, FieldGrid, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeamFamily {
    Gaussian,
    LaguerreGauss,
}

/// Reference wavefunction of the optical system.
///
/// `(p, l) = (0, 0)` is always stored as [`BeamFamily::Gaussian`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSpec {
    pub family: BeamFamily,
    /// Waist radius (m).
    pub w0: f64,
    /// Wavelength (m).
    pub lambda: f64,
    /// Radial index.
    pub p: u32,
    /// Azimuthal index.
    pub l: i32,
}

/// Transverse and longitudinal displacement of an emitter (m).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Displacement {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Displacement {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }
}

/// Whether sampled fields carry the fast longitudinal phase `e^{−ikz}`.
///
/// The carrier is a global phase per emitter, so every density matrix is
/// independent of it, but it makes finite differences in `z` useless.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Carrier {
    Include,
    Omit,
}

impl BeamSpec {
    pub fn gaussian(w0: f64, lambda: f64) -> Result<Self> {
        let spec = Self {
            family: BeamFamily::Gaussian,
            w0,
            lambda,
            p: 0,
            l: 0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn laguerre_gauss(w0: f64, lambda: f64, p: u32, l: i32) -> Result<Self> {
        let family = if p == 0 && l == 0 {
            BeamFamily::Gaussian
        } else {
            BeamFamily::LaguerreGauss
        };
        let spec = Self {
            family,
            w0,
            lambda,
            p,
            l,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w0 > 0.0 && self.w0.is_finite()) {
            return Err(Error::InvalidBeam(format!(
                "waist must be positive, got {}",
                self.w0
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidBeam(format!(
                "wavelength must be positive, got {}",
                self.lambda
            )));
        }
        let indices_zero = self.p == 0 && self.l == 0;
        if (self.family == BeamFamily::Gaussian) != indices_zero {
            return Err(Error::InvalidBeam(format!(
                "family {:?} is inconsistent with (p, l) = ({}, {})",
                self.family, self.p, self.l
            )));
        }
        Ok(())
    }

    pub fn is_gaussian(&self) -> bool {
        self.family == BeamFamily::Gaussian
    }

    /// `k = 2π/λ`.
    pub fn k(&self) -> f64 {
        2.0 * PI / self.lambda
    }

    /// `z_r = π·w0²/λ`.
    pub fn rayleigh_range(&self) -> f64 {
        PI * self.w0 * self.w0 / self.lambda
    }

    /// `2p + |l|`.
    pub fn mode_order(&self) -> u32 {
        2 * self.p + self.l.unsigned_abs()
    }

    /// `w(z) = w0·√(1 + (z/z_r)²)`.
    pub fn width_at(&self, z: f64) -> f64 {
        let zr = self.rayleigh_range();
        self.w0 * (1.0 + (z / zr).powi(2)).sqrt()
    }

    /// Gouy phase `ζ(z) = atan(z/z_r)`.
    pub fn gouy(&self, z: f64) -> f64 {
        (z / self.rayleigh_range()).atan()
    }

    /// `1/R(z) = z/(z² + z_r²)`, finite at the waist.
    pub fn inverse_curvature(&self, z: f64) -> f64 {
        let zr = self.rayleigh_range();
        z / (z * z + zr * zr)
    }

    /// Distance from the beam axis to a window edge needed to hold the mode
    /// at propagation distance `z`: `(4 + √(2p+|l|+1))·w(z)`.
    pub fn required_margin(&self, z: f64) -> f64 {
        (4.0 + ((self.mode_order() + 1) as f64).sqrt()) * self.width_at(z)
    }

    /// Angular-spectrum extent the grid must resolve, `2(4 + √(2p+|l|+1))/w0`.
    pub fn required_bandwidth(&self) -> f64 {
        2.0 * (4.0 + ((self.mode_order() + 1) as f64).sqrt()) / self.w0
    }

    /// Analytic amplitude of the mode displaced by `d`, evaluated at `(x, y)`.
    ///
    /// Unit L² norm in the continuum.
    pub fn amplitude(&self, d: Displacement, x: f64, y: f64, carrier: Carrier) -> Complex64 {
        let k = self.k();
        let w = self.width_at(d.z);
        let dx = x - d.x;
        let dy = y - d.y;
        let r2 = dx * dx + dy * dy;
        let al = self.l.unsigned_abs();
        let norm = (2.0 * factorial_ratio(self.p, al) / PI).sqrt() / w;
        let lag = laguerre(self.p, al as f64, 2.0 * r2 / (w * w));
        // (√2/w)^{|l|}·(dx ± i·dy)^{|l|} = (√2 r/w)^{|l|} e^{ilϕ}
        let sgn = if self.l >= 0 { 1.0 } else { -1.0 };
        let vortex = (Complex64::new(dx, sgn * dy) * (2.0f64.sqrt() / w)).powu(al);
        let mut phase = -0.5 * k * r2 * self.inverse_curvature(d.z)
            + (self.mode_order() + 1) as f64 * self.gouy(d.z);
        if carrier == Carrier::Include {
            phase -= k * d.z;
        }
        vortex * Complex64::from_polar(norm * lag * (-r2 / (w * w)).exp(), phase)
    }

    fn check_grid(&self, d: Displacement, grid: &Grid) -> Result<()> {
        let margin = self.required_margin(d.z);
        let need_x = d.x.abs() + margin;
        let need_y = d.y.abs() + margin;
        if need_x > grid.half_width_x() || need_y > grid.half_width_y() {
            return Err(Error::WindowTooSmall {
                have_x: grid.half_width_x(),
                have_y: grid.half_width_y(),
                need_x,
                need_y,
            });
        }
        let required = self.required_bandwidth();
        if grid.nyquist() < required {
            return Err(Error::GridTooCoarse {
                nyquist: grid.nyquist(),
                required,
            });
        }
        Ok(())
    }
}

/// `p!/(p + a)!`
fn factorial_ratio(p: u32, a: u32) -> f64 {
    (p + 1..=p + a).fold(1.0, |acc, j| acc / j as f64)
}

/// Generalized Laguerre polynomial `L_n^a(x)` by the three-term recurrence.
pub fn laguerre(n: u32, a: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + a - x;
    for j in 1..n {
        let j = j as f64;
        let next = ((2.0 * j + 1.0 + a - x) * cur - (j + a) * prev) / (j + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Samples the displaced mode on `grid` (with carrier phase) and renormalizes.
pub fn sample(spec: &BeamSpec, d: Displacement, grid: &Arc<Grid>) -> Result<FieldGrid> {
    sample_with(spec, d, grid, Carrier::Include)
}

pub fn sample_with(
    spec: &BeamSpec,
    d: Displacement,
    grid: &Arc<Grid>,
    carrier: Carrier,
) -> Result<FieldGrid> {
    spec.validate()?;
    spec.check_grid(d, grid)?;
    FieldGrid::from_fn(grid.clone(), spec.k(), |x, y| {
        spec.amplitude(d, x, y, carrier)
    })
}

/// Square grid with `n` nodes per axis whose window holds `spec` displaced
/// anywhere within `|x| ≤ max_x`, `|z| ≤ max_z`, and never narrower than
/// `6·w0`. A 2 % slack leaves room for finite-difference steps.
pub fn grid_for(spec: &BeamSpec, n: usize, max_x: f64, max_z: f64) -> Result<Arc<Grid>> {
    let need = max_x.abs() + spec.required_margin(max_z.abs());
    let half = (1.02 * need).max(6.0 * spec.w0);
    Grid::square(n, half)
}

/// Default 256 × 256 grid spanning `±6·w0`.
pub fn default_grid(spec: &BeamSpec) -> Result<Arc<Grid>> {
    Grid::square(256, 6.0 * spec.w0)
}

/// Source of displaced point-spread functions on a fixed grid.
pub trait PsfFactory: Send + Sync {
    fn grid(&self) -> &Arc<Grid>;

    fn wavenumber(&self) -> f64;

    /// Normalized field of an emitter at `d`, including `e^{−ikz}`.
    fn displaced(&self, d: Displacement) -> Result<FieldGrid>;

    /// Normalized field of an emitter at `d` without the carrier phase.
    fn displaced_reduced(&self, d: Displacement) -> Result<FieldGrid>;

    /// Transverse and longitudinal length scales `(w0, z_r)`.
    fn scales(&self) -> (f64, f64);

    fn reference(&self) -> Result<FieldGrid> {
        self.displaced_reduced(Displacement::default())
    }
}

/// Displaced fields sampled from the analytic mode formula.
#[derive(Debug, Clone)]
pub struct AnalyticPsf {
    spec: BeamSpec,
    grid: Arc<Grid>,
}

impl AnalyticPsf {
    pub fn new(spec: BeamSpec, grid: Arc<Grid>) -> Result<Self> {
        spec.validate()?;
        spec.check_grid(Displacement::default(), &grid)?;
        Ok(Self { spec, grid })
    }

    pub fn spec(&self) -> &BeamSpec {
        &self.spec
    }

    /// Same beam on a grid with twice as many nodes per axis.
    pub fn refined(&self) -> Result<Self> {
        Self::new(self.spec, self.grid.refined()?)
    }
}

impl PsfFactory for AnalyticPsf {
    fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    fn wavenumber(&self) -> f64 {
        self.spec.k()
    }

    fn displaced(&self, d: Displacement) -> Result<FieldGrid> {
        sample_with(&self.spec, d, &self.grid, Carrier::Include)
    }

    fn displaced_reduced(&self, d: Displacement) -> Result<FieldGrid> {
        sample_with(&self.spec, d, &self.grid, Carrier::Omit)
    }

    fn scales(&self) -> (f64, f64) {
        (self.spec.w0, self.spec.rayleigh_range())
    }
}

/// Displaces an arbitrary reference field with the exact propagator
/// `exp(−iĜz − ip̂_x x − ip̂_y y)` applied in Fourier space.
#[derive(Debug, Clone)]
pub struct SpectralPsf {
    reference: FieldGrid,
    scales: (f64, f64),
}

impl SpectralPsf {
    /// `scales` are the transverse and longitudinal lengths used for default
    /// finite-difference steps.
    pub fn new(mut reference: FieldGrid, scales: (f64, f64)) -> Result<Self> {
        reference.renormalize()?;
        Ok(Self { reference, scales })
    }

    fn propagate(&self, d: Displacement, carrier: Carrier) -> Result<FieldGrid> {
        let k = self.reference.wavenumber();
        let out = self.reference.apply_spectral(|kx, ky| {
            let phase = -kx * d.x - ky * d.y + (kx * kx + ky * ky) * d.z / (2.0 * k);
            Complex64::from_polar(1.0, phase)
        });
        let out = match carrier {
            Carrier::Include => out.scaled(Complex64::from_polar(1.0, -k * d.z)),
            Carrier::Omit => out,
        };
        let mut out = out;
        out.renormalize()?;
        Ok(out)
    }
}

impl PsfFactory for SpectralPsf {
    fn grid(&self) -> &Arc<Grid> {
        self.reference.grid()
    }

    fn wavenumber(&self) -> f64 {
        self.reference.wavenumber()
    }

    fn displaced(&self, d: Displacement) -> Result<FieldGrid> {
        self.propagate(d, Carrier::Include)
    }

    fn displaced_reduced(&self, d: Displacement) -> Result<FieldGrid> {
        self.propagate(d, Carrier::Omit)
    }

    fn scales(&self) -> (f64, f64) {
        self.scales
    }
}

/// Magnitude and phase of `⟨Ψ₁|Ψ₂⟩ = w·e^{iφ}` for emitters separated by
/// `(s, t)`, with first derivatives.
///
/// `dphi_dt` contains the fast `−k` carrier term; `dphi_dt_reduced` is
/// `∂_t(φ + kt)` and is what cancellation-sensitive formulas should use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapData {
    pub w: f64,
    pub phi: f64,
    pub dw_ds: f64,
    pub dw_dt: f64,
    pub dphi_ds: f64,
    pub dphi_dt: f64,
    pub dphi_dt_reduced: f64,
    /// `1 − w²`, evaluated without cancellation where possible.
    pub one_minus_w2: f64,
    /// False when `w` is too small for the phase to mean anything.
    pub phase_reliable: bool,
}

/// Minimum overlap magnitude for a trustworthy phase.
pub const MIN_RELIABLE_OVERLAP: f64 = 1e-14;

/// Closed-form overlap of two Gaussian beams separated by `(s, t)`:
///
/// ```text
/// w = exp(−k z_r s²/(t² + 4z_r²)) / √(1 + (t/2z_r)²)
/// φ = atan(t/2z_r) − k t (1 + s²/(2t² + 8z_r²))
/// ```
pub fn gaussian_overlap(spec: &BeamSpec, s: f64, t: f64) -> Result<OverlapData> {
    if !spec.is_gaussian() {
        return Err(Error::NotGaussian);
    }
    let k = spec.k();
    let zr = spec.rayleigh_range();
    let e = t * t + 4.0 * zr * zr;
    let u = t / (2.0 * zr);

    let ln_w = -0.5 * u.mul_add(u, 0.0).ln_1p() - k * zr * s * s / e;
    let w = ln_w.exp();
    let one_minus_w2 = -(2.0 * ln_w).exp_m1();

    let dlnw_ds = -2.0 * k * zr * s / e;
    let dlnw_dt = -t / e + 2.0 * k * zr * s * s * t / (e * e);

    let phi_reduced = u.atan() - k * t * s * s / (2.0 * e);
    let dphi_ds = -k * t * s / e;
    let dphi_dt_reduced = 2.0 * zr / e - k * s * s * (4.0 * zr * zr - t * t) / (2.0 * e * e);

    Ok(OverlapData {
        w,
        phi: phi_reduced - k * t,
        dw_ds: w * dlnw_ds,
        dw_dt: w * dlnw_dt,
        dphi_ds,
        dphi_dt: dphi_dt_reduced - k,
        dphi_dt_reduced,
        one_minus_w2,
        phase_reliable: w >= MIN_RELIABLE_OVERLAP,
    })
}

/// Central-difference steps for overlap and Fisher derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdSteps {
    pub transverse: f64,
    pub longitudinal: f64,
}

impl FdSteps {
    /// `1e-4·w0` and `1e-4·z_r`.
    pub fn default_for(scales: (f64, f64)) -> Self {
        Self {
            transverse: 1e-4 * scales.0,
            longitudinal: 1e-4 * scales.1,
        }
    }
}

const UNWRAP_SEGMENTS: usize = 16;

/// Overlap data from grid inner products of displaced fields, with
/// central-difference derivatives.
///
/// The phase is unwrapped along the straight path from `(0, 0)`, where
/// `φ = 0`.
pub fn numeric_overlap<F: PsfFactory + ?Sized>(
    psf: &F,
    s: f64,
    t: f64,
    steps: FdSteps,
) -> Result<OverlapData> {
    let k = psf.wavenumber();
    let origin = psf.displaced_reduced(Displacement::default())?;
    let overlap = |s: f64, t: f64| -> Result<Complex64> {
        let other = psf.displaced_reduced(Displacement::new(s, 0.0, t))?;
        inner(&origin, &other)
    };

    let o = overlap(s, t)?;
    let ds = (overlap(s + steps.transverse, t)? - overlap(s - steps.transverse, t)?)
        / (2.0 * steps.transverse);
    let dt = (overlap(s, t + steps.longitudinal)? - overlap(s, t - steps.longitudinal)?)
        / (2.0 * steps.longitudinal);

    let w = o.norm();
    let phase_reliable = w >= MIN_RELIABLE_OVERLAP;

    let mut phi_reduced = 0.0;
    if s != 0.0 || t != 0.0 {
        let mut prev = Complex64::new(1.0, 0.0);
        for j in 1..=UNWRAP_SEGMENTS {
            let f = j as f64 / UNWRAP_SEGMENTS as f64;
            let cur = if j == UNWRAP_SEGMENTS {
                o
            } else {
                overlap(f * s, f * t)?
            };
            phi_reduced += (cur * prev.conj()).arg();
            prev = cur;
        }
    }

    let (dw_ds, dw_dt, dphi_ds, dphi_dt_reduced) = if w > 0.0 {
        (
            (o.conj() * ds).re / w,
            (o.conj() * dt).re / w,
            (o.conj() * ds).im / (w * w),
            (o.conj() * dt).im / (w * w),
        )
    } else {
        (0.0, 0.0, 0.0, 0.0)
    };

    Ok(OverlapData {
        w,
        phi: phi_reduced - k * t,
        dw_ds,
        dw_dt,
        dphi_ds,
        dphi_dt: dphi_dt_reduced - k,
        dphi_dt_reduced,
        one_minus_w2: 1.0 - w * w,
        phase_reliable,
    })
}
