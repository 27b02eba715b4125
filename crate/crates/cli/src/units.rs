//! Unit-suffixed quantities such as `"0.25 T"` or `"46.5 MHz"`.
//!
//! Values are normalized to SI on parse and written back in the SI base unit,
//! so parsing an emitted value returns exactly the same number.

use std::fmt;
use std::str::FromStr;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnitError {
    #[error("{0:?} has no unit; expected a number followed by one of {1}")]
    MissingUnit(String, &'static str),
    #[error("unknown unit {unit:?} in {text:?}; expected one of {allowed}")]
    UnknownUnit { text: String, unit: String, allowed: &'static str },
    #[error("{0:?} is not a finite number with a unit")]
    NotANumber(String),
}

#[derive(Debug, Clone, Copy)]
enum Scale {
    Times(f64),
    Over(f64),
}

impl Scale {
    fn apply(self, v: f64) -> f64 {
        match self {
            Scale::Times(k) => v * k,
            Scale::Over(k) => v / k,
        }
    }
}

/// Splits `text` into the longest leading number and the unit after it.
fn split(text: &str) -> Option<(f64, &str)> {
    let t = text.trim();
    let mut best = None;
    for (i, _) in t.char_indices().skip(1) {
        if let Ok(v) = t[..i].trim().parse::<f64>() {
            best = Some((v, t[i..].trim()));
        }
    }
    best
}

fn parse_with(text: &str, allowed: &'static str, scale: fn(&str) -> Option<Scale>) -> Result<f64, UnitError> {
    if text.trim().parse::<f64>().is_ok() {
        return Err(UnitError::MissingUnit(text.to_string(), allowed));
    }
    let (v, unit) = split(text).ok_or_else(|| UnitError::NotANumber(text.to_string()))?;
    if !v.is_finite() {
        return Err(UnitError::NotANumber(text.to_string()));
    }
    let s = scale(unit).ok_or_else(|| UnitError::UnknownUnit { text: text.to_string(), unit: unit.to_string(), allowed })?;
    Ok(s.apply(v))
}

macro_rules! quantity {
    ($(#[$meta:meta])* $name:ident, $base:literal, $allowed:literal, { $($unit:pat => $scale:expr),* $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
        pub struct $name(pub f64);

        impl $name {
            pub const BASE: &'static str = $base;

            fn scale(unit: &str) -> Option<Scale> {
                match unit {
                    $($unit => Some($scale),)*
                    _ => None,
                }
            }

            pub fn si(self) -> f64 {
                self.0
            }
        }

        impl FromStr for $name {
            type Err = UnitError;

            fn from_str(s: &str) -> Result<Self, UnitError> {
                parse_with(s, $allowed, Self::scale).map($name)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{} {}", self.0, $base)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let text = String::deserialize(d)?;
                text.parse().map_err(de::Error::custom)
            }
        }
    };
}

quantity!(
    /// Magnetic flux density (T).
    Tesla, "T", "T, mT, uT, G", {
        "T" => Scale::Times(1.0),
        "mT" => Scale::Over(1e3),
        "uT" | "μT" | "µT" => Scale::Over(1e6),
        "G" => Scale::Over(1e4),
    }
);

quantity!(
    /// Frequency (Hz).
    Hertz, "Hz", "Hz, kHz, MHz, GHz", {
        "Hz" => Scale::Times(1.0),
        "kHz" => Scale::Times(1e3),
        "MHz" => Scale::Times(1e6),
        "GHz" => Scale::Times(1e9),
    }
);

quantity!(
    /// Duration (s).
    Seconds, "s", "s, ms, us, ns", {
        "s" => Scale::Times(1.0),
        "ms" => Scale::Over(1e3),
        "us" | "μs" | "µs" => Scale::Over(1e6),
        "ns" => Scale::Over(1e9),
    }
);

quantity!(
    /// Electric field (V/m).
    VoltsPerMeter, "V/m", "V/m, kV/m, MV/m, V/um", {
        "V/m" => Scale::Times(1.0),
        "kV/m" => Scale::Times(1e3),
        "MV/m" => Scale::Times(1e6),
        "V/um" | "V/μm" | "V/µm" => Scale::Times(1e6),
    }
);

quantity!(
    /// Length (m).
    Meters, "m", "m, mm, um, nm", {
        "m" => Scale::Times(1.0),
        "mm" => Scale::Over(1e3),
        "um" | "μm" | "µm" => Scale::Over(1e6),
        "nm" => Scale::Over(1e9),
    }
);

quantity!(
    /// Temperature (K).
    Kelvin, "K", "K, mK", {
        "K" => Scale::Times(1.0),
        "mK" => Scale::Over(1e3),
    }
);

quantity!(
    /// Voltage (V).
    Volts, "V", "V, mV", {
        "V" => Scale::Times(1.0),
        "mV" => Scale::Over(1e3),
    }
);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefixes() {
        assert_eq!("250 mT".parse::<Tesla>().unwrap().si(), 0.25);
        assert_eq!("46.5 MHz".parse::<Hertz>().unwrap().si(), 46.5e6);
        assert_eq!("7.3GHz".parse::<Hertz>().unwrap().si(), 7.3e9);
        assert_eq!("2 μm".parse::<Meters>().unwrap().si(), 2e-6);
        assert_eq!("1e-3 T".parse::<Tesla>().unwrap().si(), 1e-3);
        assert_eq!("30 kV/m".parse::<VoltsPerMeter>().unwrap().si(), 3e4);
        assert_eq!("0.03 V/um".parse::<VoltsPerMeter>().unwrap().si(), 3e4);
        assert_eq!("1.9 K".parse::<Kelvin>().unwrap().to_string(), "1.9 K");
    }

    #[test]
    fn rejects_bad_units() {
        assert!(matches!("0.25".parse::<Tesla>(), Err(UnitError::MissingUnit(..))));
        assert!(matches!("0.25 MHz".parse::<Tesla>(), Err(UnitError::UnknownUnit { .. })));
        assert!(matches!("T".parse::<Tesla>(), Err(UnitError::NotANumber(_))));
        assert!(matches!("inf T".parse::<Tesla>(), Err(UnitError::NotANumber(_))));
    }
}
