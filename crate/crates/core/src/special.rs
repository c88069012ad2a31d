//! Standard normal pdf/cdf and the ζ-function family.
//!
//! `ζ₀ = log Φ`, `ζ₁ = φ/Φ`, `ζ₂ = ζ₁' = −ζ₁(x + ζ₁)`. Below `x = −10` all three are
//! evaluated from the asymptotic Mills-ratio series so nothing underflows.

use std::f64::consts::SQRT_2;

use crate::error::{Esn2Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Left-tail switch point for the asymptotic series.
const TAIL_SWITCH: f64 = -10.0;
/// Below this the continued fraction supplies `x + ζ₁(x)` directly.
const FRACTION_SWITCH: f64 = -3.0;

/// Order `m ∈ {0, 1, 2}` of a ζ-function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ZetaOrder(u8);

impl ZetaOrder {
    pub const LOG_CDF: ZetaOrder = ZetaOrder(0);
    pub const INVERSE_MILLS: ZetaOrder = ZetaOrder(1);
    pub const SECOND: ZetaOrder = ZetaOrder(2);

    pub fn new(m: u8) -> Result<Self> {
        match m {
            0..=2 => Ok(ZetaOrder(m)),
            _ => Err(Esn2Error::UnsupportedZetaOrder(m)),
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for ZetaOrder {
    type Error = Esn2Error;

    fn try_from(m: u8) -> Result<Self> {
        ZetaOrder::new(m)
    }
}

fn check_finite(x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Esn2Error::NonFiniteInput(x))
    }
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> Result<f64> {
    check_finite(x).map(pdf)
}

/// Standard normal distribution function.
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    check_finite(x).map(cdf)
}

/// `ζ_m(x)` for `m ∈ {0, 1, 2}`.
pub fn zeta(m: ZetaOrder, x: f64) -> Result<f64> {
    let x = check_finite(x)?;
    Ok(match m.0 {
        0 => zeta0(x),
        1 => zeta1(x),
        _ => zeta2(x),
    })
}

/// Unchecked density. `x²` is split so the exponent keeps full relative accuracy in the tails.
pub fn pdf(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 4.0 {
        return INV_SQRT_2PI * (-0.5 * x * x).exp();
    }
    let hi = f64::from_bits(ax.to_bits() & 0xFFFF_FFFF_F800_0000);
    let lo = ax - hi;
    INV_SQRT_2PI * (-0.5 * hi * hi).exp() * (-0.5 * lo * (ax + hi)).exp()
}

/// Unchecked distribution function.
pub fn cdf(x: f64) -> f64 {
    if x > 0.0 {
        1.0 - 0.5 * libm::erfc(x / SQRT_2)
    } else {
        0.5 * libm::erfc(-x / SQRT_2)
    }
}

/// Upper tail `1 − Φ(x)` without cancellation.
pub fn sf(x: f64) -> f64 {
    cdf(-x)
}

/// Sums of the asymptotic series for `a = −x > 10`:
/// returns `(S, 1 − S)` with `S = a·M(a) = Σ (−1)^k (2k−1)!! / a^{2k}`.
fn mills_series(a: f64) -> (f64, f64) {
    let inv = 1.0 / (a * a);
    let mut term = 1.0;
    // tail = 1 − S, accumulated without the leading 1
    let mut tail = 0.0;
    for k in 1..200 {
        let next = term * (2 * k - 1) as f64 * inv;
        if next >= term {
            break;
        }
        term = next;
        if k % 2 == 1 {
            tail += term;
        } else {
            tail -= term;
        }
        if term < 1e-18 * tail.abs().max(1e-300) {
            break;
        }
    }
    (1.0 - tail, tail)
}

/// `x + ζ₁(x)` for `x ∈ [−10, −3)` from the Mills-ratio continued fraction
/// `1/(a + 2/(a + 3/(a + …)))`, `a = −x`. Avoids the cancellation in `ζ₂ = −ζ₁(x + ζ₁)`.
fn mills_fraction_gap(a: f64) -> f64 {
    let depth = if a < 5.0 {
        60
    } else if a < 7.0 {
        40
    } else {
        24
    };
    let mut t = 0.0;
    for k in (2..=depth).rev() {
        t = k as f64 / (a + t);
    }
    1.0 / (a + t)
}

/// `log Φ(x)`, unchecked.
pub fn zeta0(x: f64) -> f64 {
    if x < TAIL_SWITCH {
        -0.5 * x * x - LN_SQRT_2PI - zeta1(x).ln()
    } else if x > 0.0 {
        (-sf(x)).ln_1p()
    } else {
        cdf(x).ln()
    }
}

/// `φ(x)/Φ(x)`, unchecked.
pub fn zeta1(x: f64) -> f64 {
    if x < TAIL_SWITCH {
        let a = -x;
        let (s, _) = mills_series(a);
        a / s
    } else if x < FRACTION_SWITCH {
        -x + mills_fraction_gap(-x)
    } else {
        pdf(x) / cdf(x)
    }
}

/// `−(ζ₁(x)·x + ζ₁(x)²)`, unchecked.
pub fn zeta2(x: f64) -> f64 {
    if x < TAIL_SWITCH {
        let a = -x;
        let (s, one_minus_s) = mills_series(a);
        -one_minus_s * a * a / (s * s)
    } else if x < FRACTION_SWITCH {
        let a = -x;
        let q = mills_fraction_gap(a);
        -q * (a + q)
    } else {
        let z = zeta1(x);
        -z * (x + z)
    }
}

/// `log φ(x)`.
pub fn log_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// `log(2π)`, the per-observation constant of the bivariate log-likelihood.
pub const LN_2PI: f64 = 2.0 * LN_SQRT_2PI;
