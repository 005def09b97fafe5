use std::fmt;

use chrono::{DateTime, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// RFC 3339 UTC timestamp at seconds precision, e.g. `2024-05-01T12:00:00Z`.
///
/// Parsing accepts any RFC 3339 offset and normalizes to UTC, truncating
/// sub-second digits. Text that does not parse is kept verbatim so that
/// validation can report it as a violation instead of failing the whole
/// document.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Timestamp(String);

impl Timestamp {
    pub fn now() -> Self {
        Self::from_datetime(Utc::now())
    }

    pub fn from_datetime(dt: DateTime<Utc>) -> Self {
        let secs = Utc
            .timestamp_opt(dt.timestamp(), 0)
            .single()
            .expect("whole seconds are always representable");
        Self(secs.to_rfc3339_opts(SecondsFormat::Secs, true))
    }

    /// Parses and normalizes; unparseable text is retained as-is.
    pub fn parse_lenient(raw: &str) -> Self {
        match DateTime::parse_from_rfc3339(raw) {
            Ok(dt) => Self::from_datetime(dt.with_timezone(&Utc)),
            Err(_) => Self(raw.to_string()),
        }
    }

    pub fn parse(raw: &str) -> Result<Self, chrono::ParseError> {
        DateTime::parse_from_rfc3339(raw).map(|dt| Self::from_datetime(dt.with_timezone(&Utc)))
    }

    pub fn as_datetime(&self) -> Option<DateTime<Utc>> {
        DateTime::parse_from_rfc3339(&self.0)
            .ok()
            .map(|dt| dt.with_timezone(&Utc))
    }

    pub fn is_valid(&self) -> bool {
        self.as_datetime().is_some()
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl PartialOrd for Timestamp {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Timestamp {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Invalid timestamps sort before every valid one.
        self.as_datetime()
            .cmp(&other.as_datetime())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Timestamp({})", self.0)
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer).map(|s| Self::parse_lenient(&s))
    }
}
