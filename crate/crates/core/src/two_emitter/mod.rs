//! Two incoherent emitters of unequal brightness, parametrized by centroid,
//! separation and relative intensity.

mod closed_form;
mod compat;
mod params;
mod subspace;

pub use closed_form::{closed_form, closed_form_gaussian, LIMIT_THRESHOLD};
pub use compat::{
    compatibility, compatibility_subset, condition_check, condition_check_gaussian,
    CompatibilityReport, ConditionCheck, CONDITION_TOL, GAMMA_ZERO, PINV_THRESHOLD,
};
pub use params::{jacobian, TwoEmitterParams, EMITTER_LABELS, LABELS};
pub use subspace::{
    build_subspace, qfim_gamma_subspace, reparametrize_slds, solve_slds, two_emitter_subspace,
    Slds, SubspaceState, Whitener,
};

use crate::fisher::FisherMatrix;

/// QFIm and Γ in `(x0, s, z0, t, q)` order.
#[derive(Debug, Clone)]
pub struct TwoEmitterInfo {
    pub q: FisherMatrix,
    pub gamma: FisherMatrix,
    /// Set when the coincident-emitter limit was returned.
    pub limit: bool,
}
