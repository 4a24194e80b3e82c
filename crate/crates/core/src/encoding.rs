//! Real-valued embeddings to nonnegative fixed-point integers.
//!
//! Both towers run the same [`prepare`] pipeline: min-max scaling to `[0, 1]`
//! followed by L2 normalization. The dot product of two prepared vectors is
//! the similarity score. It is a proxy and differs from the cosine of the raw
//! embeddings because min-max scaling is affine.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arithmetic::Integer;
use crate::error::{Error, Result};
use crate::phe::PublicKey;

pub const MAX_DIGITS: u32 = 50;

/// Decimal digits kept by fixed-point encoding; the scale factor is `10^digits`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Precision(u32);

impl Precision {
    pub const DEFAULT: Precision = Precision(19);

    pub fn new(digits: u32) -> Result<Self> {
        if !(1..=MAX_DIGITS).contains(&digits) {
            return Err(Error::InvalidPrecision(digits));
        }
        Ok(Precision(digits))
    }

    pub fn digits(self) -> u32 {
        self.0
    }

    pub fn scale(self) -> Integer {
        Integer::from(10u32).pow(self.0)
    }
}

impl Default for Precision {
    fn default() -> Self {
        Precision::DEFAULT
    }
}

impl TryFrom<u32> for Precision {
    type Error = Error;

    fn try_from(digits: u32) -> Result<Self> {
        Precision::new(digits)
    }
}

impl From<Precision> for u32 {
    fn from(p: Precision) -> u32 {
        p.0
    }
}

/// A vector with components in `[0, 1]` and unit L2 norm.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedVector(Vec<f64>);

const UNIT_NORM_TOLERANCE: f64 = 1e-9;

impl NormalizedVector {
    /// Validates an already-prepared vector.
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::ZeroNorm);
        }
        for &c in &components {
            if !c.is_finite() || !(0.0..=1.0).contains(&c) {
                return Err(Error::InvalidArgument(format!("component {c} outside [0, 1]")));
            }
        }
        let norm_sq: f64 = components.iter().map(|c| c * c).sum();
        if (norm_sq.sqrt() - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(Error::InvalidArgument(format!("norm {} is not 1", norm_sq.sqrt())));
        }
        Ok(NormalizedVector(components))
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, other: &NormalizedVector) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn ensure_finite(v: &[f64]) -> Result<()> {
    match v.iter().find(|x| !x.is_finite()) {
        Some(&x) => Err(Error::InvalidArgument(format!("non-finite component {x}"))),
        None => Ok(()),
    }
}

pub fn min_max_normalize(v: &[f64]) -> Result<Vec<f64>> {
    if v.len() < 2 {
        return Err(Error::InvalidArgument("min-max normalization needs at least 2 components".into()));
    }
    ensure_finite(v)?;
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max <= min {
        return Err(Error::DegenerateVector);
    }
    let range = max - min;
    Ok(v.iter().map(|x| ((x - min) / range).clamp(0.0, 1.0)).collect())
}

pub fn l2_normalize(v: &[f64]) -> Result<Vec<f64>> {
    ensure_finite(v)?;
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

/// Min-max scaling followed by L2 normalization.
pub fn prepare(v: &[f64]) -> Result<NormalizedVector> {
    let scaled = min_max_normalize(v)?;
    let unit = l2_normalize(&scaled)?;
    Ok(NormalizedVector(unit.into_iter().map(|x| x.clamp(0.0, 1.0)).collect()))
}

/// `round(x * 10^digits)`, half away from zero, evaluated exactly on the
/// binary value of `x`.
pub fn encode(x: f64, precision: Precision) -> Result<Integer> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::NegativeValue(x));
    }
    if x == 0.0 {
        return Ok(Integer::zero());
    }
    let bits = x.to_bits();
    let raw_exponent = ((bits >> 52) & 0x7ff) as i64;
    let fraction = bits & ((1u64 << 52) - 1);
    // x = mantissa * 2^exponent
    let (mantissa, exponent) = if raw_exponent == 0 {
        (fraction, -1074)
    } else {
        (fraction | (1u64 << 52), raw_exponent - 1075)
    };
    let scaled = BigUint::from(mantissa) * precision.scale();
    if exponent >= 0 {
        return Ok(scaled << exponent as u64);
    }
    let shift = (-exponent) as u64;
    let quotient = &scaled >> shift;
    let remainder = &scaled - (&quotient << shift);
    let half = BigUint::from(1u32) << (shift - 1);
    Ok(if remainder >= half { quotient + 1u32 } else { quotient })
}

/// `m / 10^scale_digits` as the nearest-ish `f64`.
pub fn decode(m: &Integer, scale_digits: u32) -> f64 {
    let scale = Integer::from(10u32).pow(scale_digits);
    let whole = m / &scale;
    let frac = m % &scale;
    let scale_f = scale.to_f64().unwrap_or(f64::INFINITY);
    whole.to_f64().unwrap_or(f64::INFINITY) + frac.to_f64().unwrap_or(0.0) / scale_f
}

/// Decodes a homomorphic dot product, which carries one scale factor per tower.
pub fn decode_similarity(m: &Integer, precision: Precision) -> f64 {
    decode(m, 2 * precision.digits())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CapacityReport {
    pub passes: bool,
    pub dim: usize,
    pub digits: u32,
    /// `log2(dim * 10^(2 * digits))`, the worst-case dot product size.
    pub required_bits: f64,
    /// Bit length of the public plaintext bound.
    pub available_bits: u64,
    /// Largest precision that passes for this key and dimension.
    pub max_safe_digits: Option<u32>,
}

impl CapacityReport {
    pub fn headroom_bits(&self) -> f64 {
        (self.available_bits as f64 - 1.0) - self.required_bits
    }
}

fn worst_case_sum(dim: usize, digits: u32) -> Integer {
    Integer::from(dim) * Integer::from(10u32).pow(2 * digits)
}

/// Passes iff `dim * 10^(2 * digits) < plaintext_space`, the worst case for
/// components in `[0, 1]`.
pub fn check_capacity(pk: &PublicKey, precision: Precision, dim: usize) -> CapacityReport {
    check_capacity_for_space(pk.plaintext_space(), precision, dim)
}

pub fn check_capacity_for_space(space: &Integer, precision: Precision, dim: usize) -> CapacityReport {
    let digits = precision.digits();
    let required = worst_case_sum(dim, digits);
    let max_safe_digits = (1..=MAX_DIGITS).rev().find(|&d| worst_case_sum(dim, d) < *space);
    CapacityReport {
        passes: required < *space,
        dim,
        digits,
        required_bits: log2(&required),
        available_bits: space.bits(),
        max_safe_digits,
    }
}

pub(crate) fn log2(x: &Integer) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    let shift = bits.saturating_sub(64);
    let top = (x >> shift).to_f64().unwrap_or(0.0);
    top.log2() + shift as f64
}
