//! National and international restrictions on exchanges.

use std::fmt;
use std::str::FromStr;

use crate::error::ConfigError;
use crate::graph::CountryId;

/// An upper bound that may be absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cap {
    Finite(usize),
    Unbounded,
}

impl Cap {
    pub fn allows(self, value: usize) -> bool {
        match self {
            Cap::Finite(c) => value <= c,
            Cap::Unbounded => true,
        }
    }

    pub fn finite(self) -> Option<usize> {
        match self {
            Cap::Finite(c) => Some(c),
            Cap::Unbounded => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Cap::Finite(_))
    }

    /// `self - 1`, saturating at 1 for finite caps.
    pub fn one_less(self) -> Cap {
        match self {
            Cap::Finite(c) => Cap::Finite(c.saturating_sub(1).max(1)),
            Cap::Unbounded => Cap::Unbounded,
        }
    }

    pub fn max(self, other: Cap) -> Cap {
        match (self, other) {
            (Cap::Finite(a), Cap::Finite(b)) => Cap::Finite(a.max(b)),
            _ => Cap::Unbounded,
        }
    }
}

impl fmt::Display for Cap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cap::Finite(c) => write!(f, "{c}"),
            Cap::Unbounded => f.write_str("inf"),
        }
    }
}

impl FromStr for Cap {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "inf" | "∞" | "unbounded" => Ok(Cap::Unbounded),
            t => t.parse::<usize>().map(Cap::Finite).map_err(|_| ConfigError::Invalid {
                field: "cap".into(),
                reason: format!("'{t}' is neither a count nor 'inf'"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountryPolicy {
    /// Longest national cycle, in pairs.
    pub national_cycle_cap: Cap,
    /// Longest segment of an international cycle, counted in nodes.
    pub segment_node_cap: Cap,
    /// Segments this country may host within one international cycle.
    pub max_segments: Cap,
    /// Pairs this country may contribute to one international cycle.
    pub max_pairs: Cap,
}

impl CountryPolicy {
    pub fn unrestricted(national_cycle_cap: Cap) -> Self {
        Self {
            national_cycle_cap,
            segment_node_cap: Cap::Unbounded,
            max_segments: Cap::Unbounded,
            max_pairs: Cap::Unbounded,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyConfig {
    pub countries: Vec<CountryPolicy>,
    pub international_cycle_cap: Cap,
    pub max_countries: Cap,
    /// Altruistic chains are reduced to cycles and obey the same caps.
    pub chains_enabled: bool,
}

impl PolicyConfig {
    /// Same cycle cap everywhere and no further international restrictions.
    pub fn uniform(num_countries: usize, cap: Cap) -> Self {
        Self {
            countries: vec![CountryPolicy::unrestricted(cap); num_countries],
            international_cycle_cap: cap,
            max_countries: Cap::Unbounded,
            chains_enabled: false,
        }
    }

    /// Two-country cooperation rules: the international cycle cap is the
    /// larger national cap, segments are one shorter than the national cap,
    /// and a partner with unbounded cycles limits every international cycle
    /// to one segment per country.
    pub fn two_country(first: Cap, second: Cap) -> Self {
        let one_segment = !first.is_finite() || !second.is_finite();
        let country = |cap: Cap| CountryPolicy {
            national_cycle_cap: cap,
            segment_node_cap: cap.one_less(),
            max_segments: if one_segment { Cap::Finite(1) } else { Cap::Unbounded },
            max_pairs: Cap::Unbounded,
        };
        Self {
            countries: vec![country(first), country(second)],
            international_cycle_cap: first.max(second),
            max_countries: Cap::Unbounded,
            chains_enabled: false,
        }
    }

    pub fn num_countries(&self) -> usize {
        self.countries.len()
    }

    pub fn country(&self, k: CountryId) -> &CountryPolicy {
        &self.countries[k.index()]
    }

    /// Longest cycle any enumeration under this policy may need, if finite.
    pub fn max_cycle_len(&self) -> Option<usize> {
        let mut cap = self.international_cycle_cap.finite()?;
        for c in &self.countries {
            cap = cap.max(c.national_cycle_cap.finite()?);
        }
        Some(cap)
    }

    pub fn all_finite(&self) -> bool {
        self.max_cycle_len().is_some()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |cap: Cap, field: &str| match cap {
            Cap::Finite(0) => Err(ConfigError::Invalid {
                field: field.to_string(),
                reason: "must be at least 1".into(),
            }),
            _ => Ok(()),
        };
        if self.countries.is_empty() {
            return Err(ConfigError::Invalid {
                field: "countries".into(),
                reason: "at least one country required".into(),
            });
        }
        for (i, c) in self.countries.iter().enumerate() {
            positive(c.segment_node_cap, &format!("segment_node_cap[{}]", i + 1))?;
            positive(c.max_segments, &format!("max_segments[{}]", i + 1))?;
            positive(c.max_pairs, &format!("max_pairs[{}]", i + 1))?;
            if let Cap::Finite(k) = c.national_cycle_cap {
                if k < 2 {
                    return Err(ConfigError::Invalid {
                        field: format!("national_cycle_cap[{}]", i + 1),
                        reason: "cycles have at least two pairs".into(),
                    });
                }
            }
        }
        positive(self.max_countries, "max_countries")?;
        if let Cap::Finite(k) = self.international_cycle_cap {
            if k < 2 {
                return Err(ConfigError::Invalid {
                    field: "international_cycle_cap".into(),
                    reason: "cycles have at least two pairs".into(),
                });
            }
        }
        Ok(())
    }

    pub fn check_countries(&self, num_countries: usize) -> Result<(), ConfigError> {
        if self.countries.len() != num_countries {
            return Err(ConfigError::CountryCount { expected: num_countries, got: self.countries.len() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cap_parsing_and_order() {
        assert_eq!("3".parse::<Cap>().unwrap(), Cap::Finite(3));
        assert_eq!("inf".parse::<Cap>().unwrap(), Cap::Unbounded);
        assert!("x".parse::<Cap>().is_err());
        assert!(Cap::Finite(4) < Cap::Unbounded);
        assert!(Cap::Unbounded.allows(1_000_000));
        assert!(!Cap::Finite(2).allows(3));
        assert_eq!(Cap::Finite(2).one_less(), Cap::Finite(1));
    }

    #[test]
    fn two_country_rules() {
        let p = PolicyConfig::two_country(Cap::Finite(3), Cap::Finite(2));
        assert_eq!(p.international_cycle_cap, Cap::Finite(3));
        assert_eq!(p.countries[0].segment_node_cap, Cap::Finite(2));
        assert_eq!(p.countries[1].segment_node_cap, Cap::Finite(1));
        assert_eq!(p.countries[0].max_segments, Cap::Unbounded);

        let p = PolicyConfig::two_country(Cap::Finite(3), Cap::Unbounded);
        assert_eq!(p.international_cycle_cap, Cap::Unbounded);
        assert_eq!(p.countries[0].max_segments, Cap::Finite(1));
        assert_eq!(p.countries[1].segment_node_cap, Cap::Unbounded);
        assert!(p.max_cycle_len().is_none());
        assert!(p.validate().is_ok());
    }

    #[test]
    fn validation_rejects_zero_caps() {
        let mut p = PolicyConfig::uniform(2, Cap::Finite(3));
        p.countries[1].max_segments = Cap::Finite(0);
        assert!(p.validate().is_err());
        let p = PolicyConfig::uniform(1, Cap::Finite(1));
        assert!(p.validate().is_err());
    }
}
