//! Closed form, subspace construction and brute-force oracle on a small
//! parameter lattice.

use qfim3d::beam::{grid_for, AnalyticPsf, BeamSpec, PsfFactory};
use qfim3d::fisher::scaled_agreement;
use qfim3d::oracle::{default_steps, oracle_two_emitter};
use qfim3d::two_emitter::{closed_form_gaussian, two_emitter_subspace, TwoEmitterParams};

const W0: f64 = 100e-6;
const LAMBDA: f64 = 0.5e-6;

#[test]
fn three_paths_agree() {
    let spec = BeamSpec::gaussian(W0, LAMBDA).unwrap();
    let zr = spec.rayleigh_range();
    let grid = grid_for(&spec, 256, 1.5 * W0, zr).unwrap();
    let psf = AnalyticPsf::new(spec, grid).unwrap();
    let steps = default_steps(psf.scales());
    for q in [0.1, 0.5] {
        for (s, t) in [(0.0, 0.5), (0.2, 0.0), (1.0, 0.1), (3.0, 2.0), (3.0, 0.1)] {
            let p = TwoEmitterParams::separated(s * W0, t * zr, q).unwrap();
            let c = closed_form_gaussian(&spec, &p).unwrap();
            let d = c.q.diagonal();
            for (name, other) in [
                (
                    "subspace",
                    two_emitter_subspace(&psf, &p).map(|r| (r.q, r.gamma)),
                ),
                (
                    "oracle",
                    oracle_two_emitter(&psf, &p, steps).map(|r| (r.q, r.gamma)),
                ),
            ] {
                let (oq, og) = other.unwrap();
                let aq = scaled_agreement(oq.entries(), c.q.entries(), &d, 1e-8);
                let ag = scaled_agreement(og.entries(), c.gamma.entries(), &d, 1e-8);
                assert!(aq.within(1e-4), "{name} Q at s={s} t={t} q={q}: {aq:?}");
                assert!(ag.within(1e-4), "{name} Γ at s={s} t={t} q={q}: {ag:?}");
            }
        }
    }
}

#[test]
fn translation_invariance() {
    let spec = BeamSpec::gaussian(W0, LAMBDA).unwrap();
    let zr = spec.rayleigh_range();
    let grid = grid_for(&spec, 256, 1.5 * W0, zr).unwrap();
    let psf = AnalyticPsf::new(spec, grid).unwrap();
    let base = TwoEmitterParams::separated(0.8 * W0, 0.4 * zr, 0.3).unwrap();
    let moved = TwoEmitterParams {
        x0: 0.5 * W0,
        z0: -0.3 * zr,
        ..base
    };
    let a = two_emitter_subspace(&psf, &base).unwrap();
    let b = two_emitter_subspace(&psf, &moved).unwrap();
    let d = a.q.diagonal();
    assert!(scaled_agreement(a.q.entries(), b.q.entries(), &d, 1e-10).within(1e-8));
    assert!(scaled_agreement(a.gamma.entries(), b.gamma.entries(), &d, 1e-10).within(1e-8));
}
