//! Labelled Fisher-type matrices and the comparisons used to validate them.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    /// Quantum or classical Fisher information.
    Symmetric,
    /// Weak-commutativity matrix Γ.
    Antisymmetric,
}

/// Square real matrix indexed by parameter names.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    labels: Vec<String>,
    entries: DMatrix<f64>,
    kind: MatrixKind,
}

const SYMMETRY_TOL: f64 = 1e-12;

impl FisherMatrix {
    /// Checks shape and (anti)symmetry to `1e-12` of the largest entry, then
    /// projects exactly onto the (anti)symmetric part.
    pub fn new(labels: &[&str], entries: DMatrix<f64>, kind: MatrixKind) -> Result<Self> {
        let n = labels.len();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::InvalidParams(format!(
                "{} labels for a {}×{} matrix",
                n,
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite matrix entry".into()));
        }
        let sign = match kind {
            MatrixKind::Symmetric => 1.0,
            MatrixKind::Antisymmetric => -1.0,
        };
        let scale = entries.amax();
        let defect = (&entries - entries.transpose() * sign).amax();
        if defect > SYMMETRY_TOL * scale.max(f64::MIN_POSITIVE) * 2.0 {
            return Err(Error::Numerical(format!(
                "{kind:?} matrix violates its symmetry by {defect:.3e} (scale {scale:.3e})"
            )));
        }
        let entries = (&entries + entries.transpose() * sign) * 0.5;
        Ok(Self {
            labels: labels.iter().map(|s| s.to_string()).collect(),
            entries,
            kind,
        })
    }

    pub fn symmetric(labels: &[&str], entries: DMatrix<f64>) -> Result<Self> {
        Self::new(labels, entries, MatrixKind::Symmetric)
    }

    pub fn antisymmetric(labels: &[&str], entries: DMatrix<f64>) -> Result<Self> {
        Self::new(labels, entries, MatrixKind::Antisymmetric)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Entry addressed by parameter names.
    pub fn entry(&self, row: &str, col: &str) -> Option<f64> {
        Some(self.entries[(self.index_of(row)?, self.index_of(col)?)])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.entries.diagonal().iter().copied().collect()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.entries.amax()
    }

    /// Eigenvalues of a symmetric matrix in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.entries.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// PSD test `λ_min ≥ −rel·λ_max`, meaningful for the symmetric kind.
    pub fn is_psd(&self, rel: f64) -> bool {
        let ev = self.eigenvalues();
        let top = ev.last().copied().unwrap_or(0.0).max(0.0);
        ev.first().is_none_or(|&lo| lo >= -rel * top)
    }

    /// Sub-matrix on the listed parameter indices.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        let m = DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.entries[(idx[i], idx[j])]);
        let labels: Vec<&str> = idx.iter().map(|&i| self.labels[i].as_str()).collect();
        Self::new(&labels, m, self.kind)
    }

    /// `Jᵀ·M·J` with new parameter labels.
    pub fn congruence(&self, jacobian: &DMatrix<f64>, labels: &[&str]) -> Result<Self> {
        Self::new(
            labels,
            jacobian.transpose() * &self.entries * jacobian,
            self.kind,
        )
    }
}

/// Outcome of an entrywise comparison in the frame where the reference
/// information matrix has unit diagonal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Agreement {
    /// Largest relative deviation among compared entries.
    pub worst_relative: f64,
    /// Position of that entry.
    pub worst_entry: (usize, usize),
    /// Entries that were large enough to compare.
    pub compared: usize,
}

impl Agreement {
    pub fn within(&self, tol: f64) -> bool {
        self.worst_relative <= tol
    }
}

/// Compares `a` against `b` entrywise after scaling entry `(i, j)` by
/// `1/√(d_i·d_j)`. Entries where both scaled magnitudes fall below `floor`
/// are skipped; the rest are compared by `|a − b| / max(|a|, |b|)`.
///
/// Zero or negative `d_i` leave the corresponding rows unscaled.
pub fn scaled_agreement(a: &DMatrix<f64>, b: &DMatrix<f64>, d: &[f64], floor: f64) -> Agreement {
    let scale: Vec<f64> = d
        .iter()
        .map(|&v| if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 })
        .collect();
    let mut out = Agreement {
        worst_relative: 0.0,
        worst_entry: (0, 0),
        compared: 0,
    };
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let f = scale[i] * scale[j];
            let (x, y) = (a[(i, j)] * f, b[(i, j)] * f);
            let mag = x.abs().max(y.abs());
            if mag < floor {
                continue;
            }
            out.compared += 1;
            let rel = (x - y).abs() / mag;
            if rel > out.worst_relative || rel.is_nan() {
                out.worst_relative = rel;
                out.worst_entry = (i, j);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_asymmetric_and_misshaped_input() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(FisherMatrix::symmetric(&["a", "b"], m.clone()).is_err());
        assert!(FisherMatrix::symmetric(&["a"], m).is_err());
        let g = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, -0.5, 0.0]);
        let g = FisherMatrix::antisymmetric(&["a", "b"], g).unwrap();
        assert_eq!(g.entry("b", "a"), Some(-0.5));
        assert_eq!(g.get(0, 0), 0.0);
    }

    #[test]
    fn psd_and_congruence() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let f = FisherMatrix::symmetric(&["a", "b"], m).unwrap();
        assert!(f.is_psd(1e-12));
        let ev = f.eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
        let j = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, 1.0, 0.5]);
        let g = f.congruence(&j, &["sum", "diff"]).unwrap();
        assert!((g.get(0, 0) - 6.0).abs() < 1e-14);
        assert!((g.get(1, 1) - 0.5).abs() < 1e-14);
        assert!(g.get(0, 1).abs() < 1e-14);
    }

    #[test]
    fn agreement_ignores_tiny_entries_in_scaled_frame() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1e-12, 1e-12, 1e6]);
        let b = DMatrix::from_row_slice(2, 2, &[4.0 * (1.0 + 1e-6), -1e-12, -1e-12, 1e6]);
        let r = scaled_agreement(&a, &b, &[4.0, 1e6], 1e-8);
        assert_eq!(r.compared, 2);
        assert!(r.within(1e-5) && !r.within(1e-7));
    }
}
