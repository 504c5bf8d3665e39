//! Number formatting and serialization helpers shared by the CLI outputs.

use serde::{Serialize, Serializer};

/// C-style `%.{prec}e`: mantissa with `prec` decimals, signed exponent of
/// at least two digits. Non-finite values print as `nan`, `inf`, `-inf`.
pub fn sci(x: f64, prec: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.prec$e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

/// An `f64` that serializes to JSON as a `%.10e` literal, or `null` when
/// not finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sci(pub f64);

impl Serialize for Sci {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return serializer.serialize_none();
        }
        let raw = serde_json::value::RawValue::from_string(sci(self.0, 10))
            .map_err(serde::ser::Error::custom)?;
        raw.serialize(serializer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf() {
        assert_eq!(sci(0.0475, 10), "4.7500000000e-02");
        assert_eq!(sci(-26.0, 10), "-2.6000000000e+01");
        assert_eq!(sci(0.0, 4), "0.0000e+00");
        assert_eq!(sci(1.5e-300, 2), "1.50e-300");
        assert_eq!(sci(f64::NAN, 3), "nan");
    }

    #[test]
    fn json_literal() {
        let s = serde_json::to_string(&[Sci(1.0), Sci(f64::INFINITY)]).unwrap();
        assert_eq!(s, "[1.0000000000e+00,null]");
    }
}
