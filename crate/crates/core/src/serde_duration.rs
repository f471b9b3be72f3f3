//! Durations on the wire as fractional seconds or milliseconds.

use std::time::Duration;

/// Nearest whole nanosecond; negative or non-finite input maps to zero.
pub fn from_millis_f64(ms: f64) -> Duration {
    if ms.is_finite() && ms > 0.0 {
        Duration::from_nanos((ms * 1e6).round() as u64)
    } else {
        Duration::ZERO
    }
}

pub fn as_millis_f64(d: Duration) -> f64 {
    d.as_nanos() as f64 / 1e6
}

pub mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Ok(super::from_millis_f64(secs * 1e3))
    }
}

pub mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(super::as_millis_f64(*d))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        f64::deserialize(d).map(super::from_millis_f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn millis_round_trip_is_exact_at_nanosecond_grain() {
        for ns in [0u64, 1, 999, 1_000_000, 123_456_789_012, 300_000_000_000] {
            let d = Duration::from_nanos(ns);
            assert_eq!(from_millis_f64(as_millis_f64(d)), d);
        }
        assert_eq!(from_millis_f64(-3.0), Duration::ZERO);
    }
}
