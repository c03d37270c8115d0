//! Durations written as `"<decimal><unit>"` with unit `ps`, `ns` or `us`.
//!
//! Conversion to picoseconds shifts the decimal point in the text, so
//! `"13.158ns"` is exactly 13158 ps with no binary rounding on the way.

use serde::de::{self, Deserializer, Visitor};
use serde::{Serialize, Serializer};
use std::fmt;

/// A non-negative duration in picoseconds (possibly infinite).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Duration(pub f64);

impl Duration {
    pub fn ps(self) -> f64 {
        self.0
    }

    /// Exact integer picoseconds, or an error naming the offending value.
    pub fn whole_ps(self) -> Result<u64, String> {
        if self.0.is_finite() && self.0.fract() == 0.0 && self.0 >= 0.0 && self.0 <= u64::MAX as f64 {
            Ok(self.0 as u64)
        } else {
            Err(format!("{} ps is not a whole number of picoseconds", self.0))
        }
    }
}

/// Parses `"257.5ps"`, `"1.5 ns"`, `"5us"`, a bare number (ps) or `"inf"`.
pub fn parse_duration(text: &str) -> Result<Duration, String> {
    let t = text.trim();
    if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
        return Ok(Duration(f64::INFINITY));
    }
    let split = t.find(|c: char| !(c.is_ascii_digit() || c == '.')).unwrap_or(t.len());
    let (number, unit) = (&t[..split], t[split..].trim());
    let shift = match unit {
        "" | "ps" => 0,
        "ns" => 3,
        "us" | "µs" | "μs" => 6,
        _ => return Err(format!("unknown duration unit {unit:?} in {text:?} (use ps, ns or us)")),
    };
    let (int, frac) = number.split_once('.').unwrap_or((number, ""));
    if int.is_empty() && frac.is_empty() || frac.contains('.') {
        return Err(format!("malformed duration {text:?}"));
    }
    // move the decimal point `shift` places right, padding with zeros
    let mut digits = format!("{int}{frac}");
    let point = int.len() + shift;
    while digits.len() < point {
        digits.push('0');
    }
    let shifted = format!("{}.{}", &digits[..point], &digits[point..]);
    let value: f64 = shifted.parse().map_err(|_| format!("malformed duration {text:?}"))?;
    Ok(Duration(value))
}

impl fmt::Display for Duration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}ps", self.0)
        }
    }
}

impl Serialize for Duration {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> de::Deserialize<'de> for Duration {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Duration;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "a duration such as \"257.5ps\", \"13.158ns\", \"5us\" or \"inf\"")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Duration, E> {
                parse_duration(v).map_err(E::custom)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Duration, E> {
                if v < 0 {
                    return Err(E::custom(format!("duration must be >= 0, got {v}")));
                }
                Ok(Duration(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Duration, E> {
                Ok(Duration(v as f64))
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Duration, E> {
                if !(v >= 0.0) {
                    return Err(E::custom(format!("duration must be >= 0, got {v}")));
                }
                Ok(Duration(v))
            }
        }
        d.deserialize_any(V)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn units_convert_exactly() {
        let cases = [
            ("13158ps", 13158.0),
            ("13.158ns", 13158.0),
            ("506ns", 506_000.0),
            ("5us", 5_000_000.0),
            ("0.000001us", 1.0),
            ("257.5ps", 257.5),
            ("257.5", 257.5),
            ("1.5 ns", 1500.0),
            (".5ns", 500.0),
            ("3.", 3.0),
        ];
        for (text, ps) in cases {
            assert_eq!(parse_duration(text).unwrap().ps(), ps, "{text}");
        }
        assert_eq!(parse_duration("13.158ns").unwrap().whole_ps(), Ok(13158));
        assert!(parse_duration("0.1ps").unwrap().whole_ps().is_err());
        assert!(parse_duration("inf").unwrap().ps().is_infinite());
    }

    #[test]
    fn rejects_malformed() {
        for text in ["", "ns", "1.2.3ns", "5ms", "-3ps", "1e3ps", "."] {
            assert!(parse_duration(text).is_err(), "{text}");
        }
    }

    #[test]
    fn display_round_trips() {
        for text in ["257.5ps", "13.158ns", "inf", "0.001ns"] {
            let d = parse_duration(text).unwrap();
            assert_eq!(parse_duration(&d.to_string()).unwrap(), d);
        }
    }
}
