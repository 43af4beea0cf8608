use nalgebra::DMatrix;

use super::params::{TwoEmitterParams, LABELS};
use super::TwoEmitterInfo;
use crate::beam::{gaussian_overlap, BeamSpec, OverlapData};
use crate::error::{Error, Result};
use crate::fisher::FisherMatrix;
use crate::grid::GeneratorMoments;

/// Below this value of `1 − w` the coincident-emitter limit is returned.
pub const LIMIT_THRESHOLD: f64 = 1e-12;

/// QFIm and Γ of a symmetric PSF from its generator moments and the overlap
/// `⟨Ψ₁|Ψ₂⟩ = w·e^{iφ}` of the two displaced states.
pub fn closed_form(m: &GeneratorMoments, o: &OverlapData, q: f64) -> Result<TwoEmitterInfo> {
    m.validate()?;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParams(format!("q = {q} outside (0, 1)")));
    }
    let p2 = m.p * m.p;
    let v = m.g_variance.max(0.0);
    let c = 1.0 - 2.0 * q;

    let mut qm = DMatrix::zeros(5, 5);
    let mut gm = DMatrix::zeros(5, 5);
    let mut set = |i: usize, j: usize, val: f64| {
        qm[(i, j)] = val;
        qm[(j, i)] = val;
    };

    let limit = 1.0 - o.w < LIMIT_THRESHOLD;
    if limit {
        set(0, 0, 4.0 * p2);
        set(0, 1, 2.0 * p2 * c);
        set(1, 1, p2);
        set(2, 2, 4.0 * v);
        set(2, 3, 2.0 * v * c);
        set(3, 3, v);
    } else {
        let (w, om) = (o.w, o.one_minus_w2);
        let qq = q * (1.0 - q);
        let (ws, wt, bs) = (o.dw_ds, o.dw_dt, o.dphi_ds);
        // 𝔊 + ∂_tφ, formed from reduced quantities so the two O(k) terms
        // never meet
        let a = m.g_offset + o.dphi_dt_reduced;
        let w2 = w * w;

        set(
            0,
            0,
            4.0 * p2 - 16.0 * qq * ws * ws - 16.0 * qq * bs * bs * w2 / om,
        );
        set(0, 1, 2.0 * p2 * c);
        set(0, 2, -16.0 * qq * ws * wt - 16.0 * qq * bs * a * w2 / om);
        set(0, 4, 4.0 * w * ws);
        set(1, 1, p2);
        set(
            2,
            2,
            4.0 * v - 16.0 * qq * wt * wt - 16.0 * qq * a * a * w2 / om,
        );
        set(2, 3, 2.0 * v * c);
        set(2, 4, 4.0 * w * wt);
        set(3, 3, v);
        set(4, 4, om / qq);

        let mut put = |i: usize, j: usize, val: f64| {
            gm[(i, j)] = val;
            gm[(j, i)] = -val;
        };
        put(0, 1, 8.0 * qq * ws * bs * w2 * w / om);
        put(0, 2, -16.0 * qq * c * w * (ws * a - bs * wt));
        put(0, 3, 8.0 * qq * w * (bs * wt - ws * a * om) / om);
        put(0, 4, -4.0 * bs * c * w2);
        put(1, 2, -8.0 * qq * w * (ws * a - bs * wt * om) / om);
        put(1, 4, -2.0 * bs * w2);
        put(2, 3, 8.0 * qq * wt * a * w2 * w / om);
        put(2, 4, -4.0 * a * c * w2);
        put(3, 4, -2.0 * a * w2);
    }

    Ok(TwoEmitterInfo {
        q: FisherMatrix::symmetric(&LABELS, qm)?,
        gamma: FisherMatrix::antisymmetric(&LABELS, gm)?,
        limit,
    })
}

/// [`closed_form`] for a Gaussian beam with analytic moments and overlap.
pub fn closed_form_gaussian(spec: &BeamSpec, params: &TwoEmitterParams) -> Result<TwoEmitterInfo> {
    params.validate()?;
    let o = gaussian_overlap(spec, params.s, params.t)?;
    closed_form(&GeneratorMoments::gaussian(spec.w0, spec.k()), &o, params.q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const W0: f64 = 100e-6;
    const LAMBDA: f64 = 0.5e-6;

    fn spec() -> BeamSpec {
        BeamSpec::gaussian(W0, LAMBDA).unwrap()
    }

    #[test]
    fn separation_block_is_constant() {
        let spec = spec();
        let zr = spec.rayleigh_range();
        for (s, t, q) in [(0.2, 0.1, 0.1), (1.0, 2.0, 0.5), (3.0, 0.5, 0.9)] {
            let p = TwoEmitterParams::new(0.3 * W0, s * W0, -0.2 * zr, t * zr, q).unwrap();
            let info = closed_form_gaussian(&spec, &p).unwrap();
            assert!(!info.limit);
            assert_relative_eq!(info.q.get(1, 1), 1.0 / (W0 * W0), max_relative = 1e-14);
            assert_relative_eq!(
                info.q.get(3, 3),
                1.0 / (4.0 * zr * zr),
                max_relative = 1e-12
            );
            assert_eq!(info.q.get(1, 3), 0.0);
        }
    }

    #[test]
    fn equal_brightness_removes_centroid_separation_coupling() {
        let p = TwoEmitterParams::separated(0.7 * W0, 0.0, 0.5).unwrap();
        let info = closed_form_gaussian(&spec(), &p).unwrap();
        assert_eq!(info.q.get(0, 1), 0.0);
        assert_eq!(info.q.get(2, 3), 0.0);
    }

    #[test]
    fn coincident_emitters_return_limit() {
        let spec = spec();
        let (k, zr) = (spec.k(), spec.rayleigh_range());
        let q = 0.3;
        let info = closed_form_gaussian(&spec, &TwoEmitterParams::separated(0.0, 0.0, q).unwrap())
            .unwrap();
        assert!(info.limit);
        let m = info.q.entries();
        assert_relative_eq!(m[(0, 0)], 2.0 * k / zr, max_relative = 1e-12);
        assert_relative_eq!(m[(0, 1)], k * (1.0 - 2.0 * q) / zr, max_relative = 1e-12);
        assert_relative_eq!(m[(1, 1)], k / (2.0 * zr), max_relative = 1e-12);
        assert_relative_eq!(m[(2, 2)], 1.0 / (zr * zr), max_relative = 1e-12);
        assert_relative_eq!(
            m[(2, 3)],
            (1.0 - 2.0 * q) / (2.0 * zr * zr),
            max_relative = 1e-12
        );
        assert_relative_eq!(m[(3, 3)], 1.0 / (4.0 * zr * zr), max_relative = 1e-12);
        assert!(m.row(4).iter().all(|&v| v == 0.0));
        assert_eq!(info.gamma.max_abs(), 0.0);
    }

    #[test]
    fn result_is_psd_with_antisymmetric_gamma() {
        let spec = spec();
        let zr = spec.rayleigh_range();
        for (s, t, q) in [
            (0.2, 0.1, 0.1),
            (1.0, 0.5, 0.3),
            (3.0, 2.0, 0.5),
            (0.0, 0.5, 0.3),
        ] {
            let p = TwoEmitterParams::separated(s * W0, t * zr, q).unwrap();
            let info = closed_form_gaussian(&spec, &p).unwrap();
            let d: Vec<f64> = info.q.diagonal().iter().map(|v| 1.0 / v.sqrt()).collect();
            let scaled = FisherMatrix::symmetric(
                &LABELS,
                DMatrix::from_fn(5, 5, |i, j| info.q.get(i, j) * d[i] * d[j]),
            )
            .unwrap();
            assert!(
                scaled.is_psd(1e-10),
                "{s} {t} {q}: {:?}",
                scaled.eigenvalues()
            );
            for i in 0..5 {
                assert_eq!(info.gamma.get(i, i), 0.0);
            }
        }
    }
}
