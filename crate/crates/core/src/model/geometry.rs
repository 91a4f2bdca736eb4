use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Three-segment bar `[0, L1] ∪ [L1, L2] ∪ [L2, L3]`. The outer segments form
/// the damped region Ω, the middle one is purely elastic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainGeometry {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    /// Squared wave speed on Ω.
    pub a: f64,
    /// Squared wave speed on the elastic segment.
    pub b: f64,
}

/// Both sides of the geometric decay condition `max{1, a/b} < (L1+L3-L2)/(2(L2-L1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryCheck {
    pub ok: bool,
    pub lhs: f64,
    pub rhs: f64,
}

impl DomainGeometry {
    pub fn new(l1: f64, l2: f64, l3: f64, a: f64, b: f64) -> Result<Self> {
        let geom = Self { l1, l2, l3, a, b };
        geom.check()?;
        Ok(geom)
    }

    pub fn check(&self) -> Result<()> {
        let fields = [self.l1, self.l2, self.l3, self.a, self.b];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGeometry("non-finite field".into()));
        }
        if !(0.0 < self.l1 && self.l1 < self.l2 && self.l2 < self.l3) {
            return Err(Error::InvalidGeometry(format!(
                "lengths must satisfy 0 < L1 < L2 < L3, got ({}, {}, {})",
                self.l1, self.l2, self.l3
            )));
        }
        if self.a <= 0.0 || self.b <= 0.0 {
            return Err(Error::InvalidGeometry(format!(
                "wave coefficients must be positive, got a = {}, b = {}",
                self.a, self.b
            )));
        }
        Ok(())
    }

    /// |Ω| = L1 + L3 - L2.
    pub fn omega_measure(&self) -> f64 {
        self.l1 + self.l3 - self.l2
    }

    /// Poincaré constant on Ω, `max{L1, L3 - L2}`.
    pub fn poincare_constant(&self) -> f64 {
        self.l1.max(self.l3 - self.l2)
    }

    /// Bound on the multiplier, `|q(x)| <= max{L1/2, (L3 - L2)/2}`.
    pub fn multiplier_bound(&self) -> f64 {
        (0.5 * self.l1).max(0.5 * (self.l3 - self.l2))
    }

    /// Slope of the multiplier on the elastic segment.
    pub fn middle_slope(&self) -> f64 {
        (self.l2 - self.l3 - self.l1) / (2.0 * (self.l2 - self.l1))
    }

    /// Piecewise-linear multiplier q(x). Continuous at both interfaces.
    pub fn multiplier(&self, x: f64) -> f64 {
        if x <= self.l1 {
            x - 0.5 * self.l1
        } else if x < self.l2 {
            self.middle_slope() * (x - self.l1) + 0.5 * self.l1
        } else {
            x - 0.5 * (self.l2 + self.l3)
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            l1: self.l1 * factor,
            l2: self.l2 * factor,
            l3: self.l3 * factor,
            ..*self
        }
    }
}

pub fn validate_geometry(geom: &DomainGeometry) -> Result<GeometryCheck> {
    geom.check()?;
    let lhs = 1.0_f64.max(geom.a / geom.b);
    let rhs = (geom.l1 + geom.l3 - geom.l2) / (2.0 * (geom.l2 - geom.l1));
    Ok(GeometryCheck {
        ok: lhs < rhs,
        lhs,
        rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unit_steps_fail_strictly() {
        let g = DomainGeometry::new(1.0, 2.0, 3.0, 1.0, 1.0).unwrap();
        let c = validate_geometry(&g).unwrap();
        assert_eq!(c.rhs, 1.0);
        assert_eq!(c.lhs, 1.0);
        assert!(!c.ok);
    }

    #[test]
    fn short_middle_segment_passes() {
        let g = DomainGeometry::new(1.0, 1.2, 3.0, 1.0, 1.0).unwrap();
        let c = validate_geometry(&g).unwrap();
        assert!((c.rhs - 7.0).abs() < 1e-12);
        assert!(c.ok);
    }

    #[test]
    fn fast_outer_speed_fails() {
        let g = DomainGeometry::new(1.0, 1.2, 3.0, 8.0, 1.0).unwrap();
        let c = validate_geometry(&g).unwrap();
        assert_eq!(c.lhs, 8.0);
        assert!(!c.ok);
    }

    #[test]
    fn unordered_lengths_rejected() {
        let g = DomainGeometry {
            l1: 2.0,
            l2: 1.0,
            l3: 3.0,
            a: 1.0,
            b: 1.0,
        };
        assert!(matches!(validate_geometry(&g), Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn multiplier_is_continuous_at_interfaces() {
        let g = DomainGeometry::new(1.0, 1.2, 3.0, 1.0, 1.0).unwrap();
        assert!((g.multiplier(g.l2) + 0.9).abs() < 1e-12);
        let mid_at_l2 = g.middle_slope() * (g.l2 - g.l1) + 0.5 * g.l1;
        assert!((mid_at_l2 - (g.l2 - g.l3) / 2.0).abs() < 1e-12);
        assert_eq!(g.multiplier(0.0), -0.5);
        assert!((g.multiplier(g.l3) - (g.l3 - g.l2) / 2.0).abs() < 1e-12);
        assert!((g.multiplier(g.l1) - 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn geometry_check_is_scale_free(
            l1 in 0.1f64..2.0, d2 in 0.05f64..2.0, d3 in 0.1f64..3.0,
            a in 0.1f64..10.0, b in 0.1f64..10.0, s in 0.01f64..100.0,
        ) {
            let g = DomainGeometry::new(l1, l1 + d2, l1 + d2 + d3, a, b).unwrap();
            let c = validate_geometry(&g).unwrap();
            let cs = validate_geometry(&g.scaled(s)).unwrap();
            prop_assert!((c.rhs - cs.rhs).abs() <= 1e-9 * c.rhs.abs().max(1.0));
            if (c.rhs - c.lhs).abs() > 1e-9 * c.rhs {
                prop_assert_eq!(c.ok, cs.ok);
            }
        }

        #[test]
        fn multiplier_bounded(l1 in 0.1f64..2.0, d2 in 0.05f64..2.0, d3 in 0.1f64..3.0, frac in 0.0f64..1.0) {
            let g = DomainGeometry::new(l1, l1 + d2, l1 + d2 + d3, 1.0, 1.0).unwrap();
            let x = frac * g.l3;
            prop_assert!(g.multiplier(x).abs() <= g.multiplier_bound() + 1e-12);
        }
    }
}
