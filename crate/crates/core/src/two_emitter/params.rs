use nalgebra::DMatrix;

use crate::beam::Displacement;
use crate::error::{Error, Result};

/// Parameter order used by every two-emitter matrix.
pub const LABELS: [&str; 5] = ["x0", "s", "z0", "t", "q"];

/// Per-emitter coordinates, the order the subspace SLDs are solved in.
pub const EMITTER_LABELS: [&str; 5] = ["x1", "x2", "z1", "z2", "q"];

/// Centroids, separations and relative brightness of two incoherent emitters.
///
/// Emitter 1 (weight `q`) sits at `(x0 − s/2, z0 − t/2)`, emitter 2 (weight
/// `1 − q`) at `(x0 + s/2, z0 + t/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoEmitterParams {
    pub x0: f64,
    pub s: f64,
    pub z0: f64,
    pub t: f64,
    pub q: f64,
}

impl TwoEmitterParams {
    pub fn new(x0: f64, s: f64, z0: f64, t: f64, q: f64) -> Result<Self> {
        let p = Self { x0, s, z0, t, q };
        p.validate()?;
        Ok(p)
    }

    /// Centred pair: `x0 = z0 = 0`.
    pub fn separated(s: f64, t: f64, q: f64) -> Result<Self> {
        Self::new(0.0, s, 0.0, t, q)
    }

    pub fn from_emitters(x1: f64, x2: f64, z1: f64, z2: f64, q: f64) -> Result<Self> {
        Self::new(0.5 * (x1 + x2), x2 - x1, 0.5 * (z1 + z2), z2 - z1, q)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.x0, self.s, self.z0, self.t, self.q]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::InvalidParams(format!(
                "relative intensity must lie in (0, 1), got {}",
                self.q
            )));
        }
        Ok(())
    }

    pub fn x1(&self) -> f64 {
        self.x0 - 0.5 * self.s
    }

    pub fn x2(&self) -> f64 {
        self.x0 + 0.5 * self.s
    }

    pub fn z1(&self) -> f64 {
        self.z0 - 0.5 * self.t
    }

    pub fn z2(&self) -> f64 {
        self.z0 + 0.5 * self.t
    }

    pub fn emitters(&self) -> (Displacement, Displacement) {
        (
            Displacement::new(self.x1(), 0.0, self.z1()),
            Displacement::new(self.x2(), 0.0, self.z2()),
        )
    }

    /// Same physical state with the emitters relabelled.
    pub fn swapped(&self) -> Self {
        Self {
            s: -self.s,
            t: -self.t,
            q: 1.0 - self.q,
            ..*self
        }
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.x0, self.s, self.z0, self.t, self.q]
    }

    pub fn from_array(v: [f64; 5]) -> Result<Self> {
        Self::new(v[0], v[1], v[2], v[3], v[4])
    }
}

/// `∂(x1, x2, z1, z2, q)/∂(x0, s, z0, t, q)`.
///
/// SLDs and score vectors map as `L_new = Σ_i J_{i,new} L_i`, information
/// matrices as `Q_new = Jᵀ Q_old J`.
pub fn jacobian() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        5,
        5,
        &[
            1.0, -0.5, 0.0, 0.0, 0.0, //
            1.0, 0.5, 0.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, -0.5, 0.0, //
            0.0, 0.0, 1.0, 0.5, 0.0, //
            0.0, 0.0, 0.0, 0.0, 1.0,
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emitter_round_trip_is_exact() {
        let p = TwoEmitterParams::new(0.25, 1.5, -0.75, 0.5, 0.3).unwrap();
        let back = TwoEmitterParams::from_emitters(p.x1(), p.x2(), p.z1(), p.z2(), p.q).unwrap();
        assert_eq!(p, back);
        assert_eq!((p.x1(), p.x2(), p.z1(), p.z2()), (-0.5, 1.0, -1.0, -0.5));
    }

    #[test]
    fn rejects_boundary_weights() {
        assert!(TwoEmitterParams::separated(1.0, 1.0, 0.0).is_err());
        assert!(TwoEmitterParams::separated(1.0, 1.0, 1.0).is_err());
        assert!(TwoEmitterParams::separated(f64::NAN, 1.0, 0.5).is_err());
    }

    #[test]
    fn swap_preserves_emitters() {
        let p = TwoEmitterParams::new(0.1, 0.4, 0.2, -0.6, 0.3).unwrap();
        let w = p.swapped();
        assert_eq!((p.x1(), p.z1()), (w.x2(), w.z2()));
        assert_eq!((p.x2(), p.z2()), (w.x1(), w.z1()));
    }
}
