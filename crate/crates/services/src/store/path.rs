use std::fmt;
use std::str::FromStr;

use super::StoreError;

/// Slash-separated document address such as `bags/BAG1/latest`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StorePath(String);

fn valid_segment(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

impl StorePath {
    pub fn parse(s: &str) -> Result<Self, StoreError> {
        let trimmed = s.trim_matches('/');
        if trimmed.is_empty() || !trimmed.split('/').all(valid_segment) {
            return Err(StoreError::BadPath(s.to_string()));
        }
        Ok(Self(trimmed.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn segments(&self) -> impl Iterator<Item = &str> {
        self.0.split('/')
    }

    /// `(parent, last segment)`, or `None` for a single-segment path.
    pub fn split_last(&self) -> Option<(StorePath, &str)> {
        self.0
            .rsplit_once('/')
            .map(|(parent, last)| (StorePath(parent.to_string()), last))
    }

    pub fn child(&self, segment: &str) -> Result<StorePath, StoreError> {
        StorePath::parse(&format!("{}/{segment}", self.0))
    }
}

impl FromStr for StorePath {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl fmt::Display for StorePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_normalizes_slashes() {
        let p = StorePath::parse("/bags/BAG_1/latest/").unwrap();
        assert_eq!(p.as_str(), "bags/BAG_1/latest");
        assert_eq!(p.segments().count(), 3);
        let (parent, last) = p.split_last().unwrap();
        assert_eq!((parent.as_str(), last), ("bags/BAG_1", "latest"));
        assert!(StorePath::parse("top").unwrap().split_last().is_none());
    }

    #[test]
    fn rejects_bad_segments() {
        for bad in ["", "/", "a//b", "a/b.c", "a/ b", "a/é", "a/../b"] {
            assert!(StorePath::parse(bad).is_err(), "{bad:?}");
        }
    }
}
