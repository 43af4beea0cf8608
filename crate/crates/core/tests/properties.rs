use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;

use qfim3d::beam::{
    gaussian_overlap, grid_for, sample_with, AnalyticPsf, BeamSpec, Carrier, Displacement,
};
use qfim3d::grid::{apply_g, apply_px, inner, FieldGrid, Grid};
use qfim3d::two_emitter::{
    closed_form_gaussian, compatibility, two_emitter_subspace, TwoEmitterParams,
};

const W0: f64 = 100e-6;
const LAMBDA: f64 = 0.5e-6;

fn gauss() -> BeamSpec {
    BeamSpec::gaussian(W0, LAMBDA).unwrap()
}

fn grid() -> Arc<Grid> {
    grid_for(&gauss(), 128, W0, 0.5 * gauss().rayleigh_range()).unwrap()
}

fn field(spec: &BeamSpec, grid: &Arc<Grid>, x: f64, z: f64) -> FieldGrid {
    sample_with(spec, Displacement::new(x, 0.0, z), grid, Carrier::Omit).unwrap()
}

fn close(a: Complex64, b: Complex64, scale: f64) -> bool {
    (a - b).norm() <= 1e-10 * scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn generators_are_linear(
        ar in -2.0..2.0f64, ai in -2.0..2.0f64, br in -2.0..2.0f64, bi in -2.0..2.0f64,
        xa in -1.0..1.0f64, xb in -1.0..1.0f64,
    ) {
        let spec = BeamSpec::laguerre_gauss(W0, LAMBDA, 0, 1).unwrap();
        let g = grid_for(&spec, 128, W0, 0.0).unwrap();
        let a = field(&spec, &g, xa * W0, 0.0);
        let b = field(&spec, &g, xb * W0, 0.0);
        let (alpha, beta) = (Complex64::new(ar, ai), Complex64::new(br, bi));
        let combo = a.scaled(alpha).axpy(beta, &b).unwrap();
        for op in [apply_px as fn(&FieldGrid) -> FieldGrid, apply_g] {
            let lhs = op(&combo);
            let rhs = op(&a).scaled(alpha).axpy(beta, &op(&b)).unwrap();
            let peak = |f: &FieldGrid| f.amplitudes().iter().fold(0.0f64, |m, v| m.max(v.norm()));
            let scale = (alpha.norm() + beta.norm() + 1.0) * peak(&op(&a)).max(peak(&op(&b)));
            for (l, r) in lhs.amplitudes().iter().zip(rhs.amplitudes()) {
                prop_assert!((l - r).norm() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn generators_are_hermitian(xa in -1.0..1.0f64, xb in -1.0..1.0f64, za in -0.5..0.5f64) {
        let spec = gauss();
        let g = grid();
        let a = field(&spec, &g, xa * W0, za * spec.rayleigh_range());
        let b = field(&spec, &g, xb * W0, 0.0);
        let s = 1.0 / W0;
        prop_assert!(close(inner(&a, &apply_px(&b)).unwrap(), inner(&b, &apply_px(&a)).unwrap().conj(), s));
        let k = spec.k();
        prop_assert!(close(inner(&a, &apply_g(&b)).unwrap(), inner(&b, &apply_g(&a)).unwrap().conj(), k));
    }

    #[test]
    fn overlap_is_even_in_s(s in 0.0..3.0f64, t in -2.0..2.0f64) {
        let spec = gauss();
        let zr = spec.rayleigh_range();
        let a = gaussian_overlap(&spec, s * W0, t * zr).unwrap();
        let b = gaussian_overlap(&spec, -s * W0, t * zr).unwrap();
        prop_assert_eq!(a.w, b.w);
        prop_assert!(a.w <= 1.0 && a.w > 0.0);
        prop_assert_eq!(gaussian_overlap(&spec, 0.0, t * zr).unwrap().dw_ds, 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_form_structure(s in 0.0..3.0f64, t in 0.0..2.0f64, q in 0.02..0.98f64) {
        prop_assume!(s > 1e-3 || t > 1e-3);
        let spec = gauss();
        let zr = spec.rayleigh_range();
        let p = TwoEmitterParams::separated(s * W0, t * zr, q).unwrap();
        let info = closed_form_gaussian(&spec, &p).unwrap();
        let d: Vec<f64> = info.q.diagonal().iter().map(|v| v.sqrt().recip()).collect();
        let scaled = info.q.congruence(&nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d)), &qfim3d::two_emitter::LABELS).unwrap();
        prop_assert!(scaled.is_psd(1e-9), "{:?}", scaled.eigenvalues());
        let g = info.gamma.entries();
        prop_assert!((g + g.transpose()).amax() == 0.0);
        // separation block is constant
        prop_assert!((info.q.get(1, 1) * W0 * W0 - 1.0).abs() < 1e-12);
        prop_assert!((info.q.get(3, 3) * 4.0 * zr * zr - 1.0).abs() < 1e-10);

        let r = compatibility(&info.q, &info.gamma).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&r.r_value));
        prop_assert!(r.gap_upper >= 0.0);
        // relabelling the emitters leaves ℜ unchanged
        let swapped = TwoEmitterParams::separated(s * W0, t * zr, 1.0 - q).unwrap();
        let other = closed_form_gaussian(&spec, &swapped).unwrap();
        let r2 = compatibility(&other.q, &other.gamma).unwrap();
        prop_assert!((r.r_value - r2.r_value).abs() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn subspace_is_translation_invariant(
        s in 0.2..1.5f64, t in 0.1..0.8f64, q in 0.1..0.9f64,
        dx in -0.3..0.3f64, dz in -0.2..0.2f64,
    ) {
        let spec = gauss();
        let zr = spec.rayleigh_range();
        let g = grid_for(&spec, 128, 1.2 * W0, zr).unwrap();
        let psf = AnalyticPsf::new(spec, g).unwrap();
        let a = two_emitter_subspace(&psf, &TwoEmitterParams::separated(s * W0, t * zr, q).unwrap()).unwrap();
        let b = two_emitter_subspace(&psf, &TwoEmitterParams::new(dx * W0, s * W0, dz * zr, t * zr, q).unwrap()).unwrap();
        let d = a.q.diagonal();
        let agree = qfim3d::fisher::scaled_agreement(a.q.entries(), b.q.entries(), &d, 1e-8);
        prop_assert!(agree.within(1e-8), "{:?}", agree);
    }
}
