//! Mathematical constants appearing in Gumbel moments.

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
/// Apéry's constant, zeta(3).
pub const APERY: f64 = 1.202_056_903_159_594_3;
pub const PI: f64 = core::f64::consts::PI;

/// Bundle of the constants, for callers that want them as a value.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MathConstants {
    pub euler_gamma: f64,
    pub apery: f64,
    pub pi: f64,
}

impl MathConstants {
    pub const VALUES: MathConstants = MathConstants {
        euler_gamma: EULER_GAMMA,
        apery: APERY,
        pi: PI,
    };
}

impl Default for MathConstants {
    fn default() -> Self {
        Self::VALUES
    }
}
