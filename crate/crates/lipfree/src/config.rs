//! Numeric tolerances shared by every operation in the crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative duality-gap tolerance for the Kantorovich-Rubinstein solver.
/// A primal/dual gap beyond `GAP_REL * max(1, cost)` is a hard failure.
pub const GAP_REL: f64 = 1e-8;

/// Tolerance bundle for metric validation and derived-quantity comparisons.
///
/// All gallery spaces and the test suites run at the defaults. The fields are
/// deliberately few: `tol_triangle` guards matrix validation (relative,
/// scaled by the largest entry), `tol_eq` absorbs rounding in equality tests
/// on derived reals, and `tol_margin` decides when a dimensionless margin
/// counts as zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Config {
    /// Relative tolerance for triangle-inequality and symmetry validation,
    /// scaled by the largest matrix entry.
    pub tol_triangle: f64,
    /// Tolerance for equality tests on derived reals (segment membership,
    /// midpoint bounds, norm comparisons).
    pub tol_eq: f64,
    /// Threshold below which a margin counts as zero. Margins are exact
    /// finite minima of closed-form expressions, so this only needs to
    /// absorb rounding noise.
    pub tol_margin: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            tol_triangle: 1e-9,
            tol_eq: 1e-9,
            tol_margin: 1e-9,
        }
    }
}

impl Config {
    /// Checks that every tolerance lies strictly between 0 and 1.
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("tol_triangle", self.tol_triangle),
            ("tol_eq", self.tol_eq),
            ("tol_margin", self.tol_margin),
        ] {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::BadConfig { field: name, value });
            }
        }
        Ok(())
    }

    /// Margin threshold for a space of the given diameter.
    pub fn margin_threshold(&self, diameter: f64) -> f64 {
        self.tol_margin * diameter.max(1.0)
    }

    /// Absolute slack allowed when comparing quantities of the given scale.
    pub fn eq_slack(&self, scale: f64) -> f64 {
        self.tol_eq * scale.max(1.0)
    }
}

/// Duality-gap tolerance for a given primal cost.
pub fn gap_tolerance(primal_cost: f64) -> f64 {
    GAP_REL * primal_cost.abs().max(1.0)
}
