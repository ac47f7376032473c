//! Fixed-point quantization and the exact integer rounding used by the attested transform.
//!
//! All rounding is to nearest with ties away from zero, and results saturate
//! at the `i32` bounds instead of wrapping.

use crate::error::{Error, Result};

pub const DEFAULT_SCALE: u32 = 65_536;

/// Row-major `f64` activations.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl FloatTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        check_shape(&shape, data.len())?;
        if let Some(at) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(at));
        }
        Ok(Self { shape, data })
    }

    /// A one-dimensional tensor.
    pub fn from_vec(data: Vec<f64>) -> Result<Self> {
        Self::new(vec![data.len()], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}

/// Flattened `i32` activations at a fixed scale `S`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QuantizedTensor {
    shape: Vec<usize>,
    scale: u32,
    values: Vec<i32>,
}

impl QuantizedTensor {
    pub fn new(shape: Vec<usize>, scale: u32, values: Vec<i32>) -> Result<Self> {
        check_shape(&shape, values.len())?;
        if scale == 0 {
            return Err(Error::InvalidScale(scale));
        }
        Ok(Self { shape, scale, values })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn values(&self) -> &[i32] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Little-endian two's-complement bytes, four per element. This is the
    /// byte stream that gets hashed into the journal.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        serialize_le(&self.values)
    }

    pub(crate) fn with_values(&self, values: Vec<i32>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            shape: self.shape.clone(),
            scale: self.scale,
            values,
        }
    }
}

pub fn serialize_le(values: &[i32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn element_count(shape: &[usize]) -> Option<usize> {
    shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
}

fn check_shape(shape: &[usize], len: usize) -> Result<()> {
    if element_count(shape) != Some(len) {
        return Err(Error::ShapeMismatch {
            shape: shape.to_vec(),
            len,
        });
    }
    Ok(())
}

/// `round(v * S)` with ties away from zero, saturated to `i32`.
pub fn quantize_value(v: f64, scale: u32) -> i32 {
    // `f64::round` breaks ties away from zero; the `as` cast saturates.
    (v * f64::from(scale)).round() as i32
}

pub fn quantize(x: &FloatTensor, scale: u32) -> Result<QuantizedTensor> {
    if scale == 0 {
        return Err(Error::InvalidScale(scale));
    }
    // FloatTensor::new already rejects NaN/Inf; recheck in case of a product overflow.
    let mut values = Vec::with_capacity(x.len());
    for (i, &v) in x.data.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite(i));
        }
        values.push(quantize_value(v, scale));
    }
    Ok(QuantizedTensor {
        shape: x.shape.clone(),
        scale,
        values,
    })
}

pub fn dequantize(q: &QuantizedTensor) -> FloatTensor {
    let s = f64::from(q.scale);
    FloatTensor {
        shape: q.shape.clone(),
        data: q.values.iter().map(|&v| f64::from(v) / s).collect(),
    }
}

/// `round(value * num / den)` with ties away from zero, saturated to `i32`.
///
/// # Panics
///
/// If `den` is zero.
pub fn scale_round_div(value: i64, num: u32, den: u32) -> i32 {
    assert!(den != 0, "scale_round_div: zero denominator");
    let negative = value < 0;
    let magnitude = u128::from(value.unsigned_abs()) * u128::from(num);
    let den = u64::from(den);
    let rounded = match u64::try_from(magnitude) {
        Ok(m) => {
            let (q, r) = (m / den, m % den);
            u128::from(q + u64::from(2 * r >= den))
        }
        Err(_) => {
            let den = u128::from(den);
            let (q, r) = (magnitude / den, magnitude % den);
            q + u128::from(2 * r >= den)
        }
    };
    if negative {
        if rounded > 1u128 << 31 {
            i32::MIN
        } else {
            (rounded as i64).wrapping_neg() as i32
        }
    } else if rounded > i32::MAX as u128 {
        i32::MAX
    } else {
        rounded as i32
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quantize_examples() {
        let q = quantize(&FloatTensor::from_vec(vec![1.0]).unwrap(), DEFAULT_SCALE).unwrap();
        assert_eq!(q.values(), &[65_536]);
        let q = quantize(&FloatTensor::from_vec(vec![0.0]).unwrap(), 7).unwrap();
        assert_eq!(q.values(), &[0]);
        assert_eq!(quantize_value(-0.500_007_6, DEFAULT_SCALE), -32_768);
        assert_eq!(quantize_value(0.5, 1), 1);
        assert_eq!(quantize_value(-0.5, 1), -1);
        assert_eq!(quantize_value(-2.5, 1), -3);
    }

    #[test]
    fn quantize_saturates() {
        assert_eq!(quantize_value(1e12, DEFAULT_SCALE), i32::MAX);
        assert_eq!(quantize_value(-1e12, DEFAULT_SCALE), i32::MIN);
    }

    #[test]
    fn non_finite_rejected() {
        assert!(matches!(
            FloatTensor::from_vec(vec![0.0, f64::NAN]),
            Err(Error::NonFinite(1))
        ));
        assert!(FloatTensor::from_vec(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn shape_must_cover_data() {
        assert!(FloatTensor::new(vec![2, 3], vec![0.0; 6]).is_ok());
        assert!(FloatTensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(QuantizedTensor::new(vec![usize::MAX, 2], 1, vec![]).is_err());
        assert!(QuantizedTensor::new(vec![1], 0, vec![1]).is_err());
        assert!(quantize(&FloatTensor::from_vec(vec![1.0]).unwrap(), 0).is_err());
    }

    #[test]
    fn dequantize_examples() {
        let q = QuantizedTensor::new(vec![2], DEFAULT_SCALE, vec![65_536, 0]).unwrap();
        assert_eq!(dequantize(&q).data(), &[1.0, 0.0]);
    }

    #[test]
    fn le_serialization() {
        assert_eq!(serialize_le(&[1, -1]), vec![1, 0, 0, 0, 0xff, 0xff, 0xff, 0xff]);
        assert!(serialize_le(&[]).is_empty());
    }

    #[test]
    fn scale_round_div_examples() {
        assert_eq!(scale_round_div(7, 2, 1), 14);
        assert_eq!(scale_round_div(3, 3, 2), 5);
        assert_eq!(scale_round_div(-3, 3, 2), -5);
        assert_eq!(scale_round_div(i64::from(i32::MAX), 3, 2), i32::MAX);
        assert_eq!(scale_round_div(i64::from(i32::MIN), 3, 2), i32::MIN);
        assert_eq!(scale_round_div(i64::from(i32::MIN), 1, 1), i32::MIN);
        assert_eq!(scale_round_div(i64::MIN, u32::MAX, 1), i32::MIN);
        assert_eq!(scale_round_div(i64::MAX, u32::MAX, 1), i32::MAX);
        assert_eq!(scale_round_div(1, 1, 3), 0);
        assert_eq!(scale_round_div(-2, 1, 3), -1);
    }

    proptest! {
        #[test]
        fn rounding_is_odd(v in -1e4f64..1e4, s in 1u32..100_000) {
            prop_assert_eq!(quantize_value(-v, s), -quantize_value(v, s));
        }

        #[test]
        fn scale_round_div_is_odd(v in -(1i64 << 40)..(1i64 << 40), num in 0u32.., den in 1u32..) {
            let pos = scale_round_div(v, num, den);
            // Saturation bounds are asymmetric; oddness holds strictly inside them.
            if pos != i32::MAX && pos != i32::MIN {
                prop_assert_eq!(scale_round_div(-v, num, den), -pos);
            }
        }

        #[test]
        fn equal_num_den_is_identity(v in any::<i32>(), d in 1u32..) {
            prop_assert_eq!(scale_round_div(i64::from(v), d, d), v);
        }

        #[test]
        fn round_trip_error_bound(v in -30_000.0f64..30_000.0) {
            let q = quantize(&FloatTensor::from_vec(vec![v]).unwrap(), DEFAULT_SCALE).unwrap();
            let back = dequantize(&q).data()[0];
            prop_assert!((back - v).abs() <= 0.5 / f64::from(DEFAULT_SCALE));
        }
    }
}
