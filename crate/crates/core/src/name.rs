//! Hierarchical content names.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("empty name")]
    Empty,
    #[error("name must begin with '/': {0:?}")]
    MissingLeadingSlash(String),
    #[error("empty component in {0:?}")]
    EmptyComponent(String),
}

/// A name such as `/conf/blue/alice/media/7`.
///
/// Always has at least one component and no component contains `/`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Name {
    components: Vec<String>,
}

impl Name {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        if text.is_empty() {
            return Err(ParseError::Empty);
        }
        let rest = text
            .strip_prefix('/')
            .ok_or_else(|| ParseError::MissingLeadingSlash(text.to_string()))?;
        // A single trailing slash is tolerated and dropped.
        let rest = rest.strip_suffix('/').unwrap_or(rest);
        if rest.is_empty() {
            return Err(ParseError::EmptyComponent(text.to_string()));
        }
        let mut components = Vec::new();
        for c in rest.split('/') {
            if c.is_empty() {
                return Err(ParseError::EmptyComponent(text.to_string()));
            }
            components.push(c.to_string());
        }
        Ok(Name { components })
    }

    /// Builds a name from components. Panics if the list is empty or a component is
    /// empty or contains `/`; use [`Name::try_from_components`] for untrusted input.
    pub fn from_components<I, S>(components: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::try_from_components(components).expect("invalid name components")
    }

    pub fn try_from_components<I, S>(components: I) -> Result<Self, ParseError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let components: Vec<String> = components.into_iter().map(Into::into).collect();
        if components.is_empty() {
            return Err(ParseError::Empty);
        }
        if components.iter().any(|c| c.is_empty() || c.contains('/')) {
            return Err(ParseError::EmptyComponent(components.join("/")));
        }
        Ok(Name { components })
    }

    pub fn components(&self) -> &[String] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    /// Names are never empty; present for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_prefix_of(&self, other: &Name) -> bool {
        self.components.len() <= other.components.len()
            && self.components.iter().zip(&other.components).all(|(a, b)| a == b)
    }

    /// The first `len` components. `len` is clamped to `1..=self.len()`.
    pub fn prefix(&self, len: usize) -> Name {
        let len = len.clamp(1, self.components.len());
        Name {
            components: self.components[..len].to_vec(),
        }
    }

    pub fn child(&self, component: impl Into<String>) -> Name {
        let mut components = self.components.clone();
        let c = component.into();
        assert!(!c.is_empty() && !c.contains('/'), "invalid name component {c:?}");
        components.push(c);
        Name { components }
    }

    pub fn join(&self, suffix: &Name) -> Name {
        let mut components = self.components.clone();
        components.extend(suffix.components.iter().cloned());
        Name { components }
    }

    pub fn get(&self, idx: usize) -> Option<&str> {
        self.components.get(idx).map(String::as_str)
    }

    /// Components after the first `n`, if any remain.
    pub fn strip_prefix_len(&self, n: usize) -> Option<Name> {
        if n >= self.components.len() {
            return None;
        }
        Some(Name {
            components: self.components[n..].to_vec(),
        })
    }

    /// Rendered length in bytes.
    pub fn wire_len(&self) -> usize {
        self.components.iter().map(|c| c.len() + 1).sum()
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.components {
            write!(f, "/{c}")?;
        }
        Ok(())
    }
}

impl FromStr for Name {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Name::parse(s)
    }
}

impl Serialize for Name {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Name {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Name::parse(&s).map_err(serde::de::Error::custom)
    }
}
