//! Random instance generation.
//!
//! Arcs follow the ABO rule plus an independent virtual crossmatch per
//! (donor, patient) pair that succeeds with probability `1 - pra`. All
//! parameters are configurable; the defaults are common choices in kidney
//! exchange simulation studies, not calibrated values.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::ConfigError;
use crate::graph::{Arc, BloodGroup, CompatibilityGraph, CountryId, Node, NodeId, NodeKind, Patient};

const FREQ_TOLERANCE: f64 = 1e-9;
const MAX_REJECTIONS: usize = 100_000;

/// Relative frequencies of the four ABO groups.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BloodFrequencies {
    pub o: f64,
    pub a: f64,
    pub b: f64,
    pub ab: f64,
}

impl BloodFrequencies {
    pub fn only(group: BloodGroup) -> Self {
        let mut f = Self { o: 0.0, a: 0.0, b: 0.0, ab: 0.0 };
        match group {
            BloodGroup::O => f.o = 1.0,
            BloodGroup::A => f.a = 1.0,
            BloodGroup::B => f.b = 1.0,
            BloodGroup::AB => f.ab = 1.0,
        }
        f
    }

    fn weights(&self) -> [f64; 4] {
        [self.o, self.a, self.b, self.ab]
    }

    fn validate(&self, what: &'static str) -> Result<(), ConfigError> {
        let w = self.weights();
        if w.iter().any(|x| x.is_nan() || *x < 0.0) {
            return Err(ConfigError::Invalid {
                field: what.to_string(),
                reason: "negative frequency".into(),
            });
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > FREQ_TOLERANCE {
            return Err(ConfigError::FrequencySum { what, sum });
        }
        Ok(())
    }
}

impl Default for BloodFrequencies {
    fn default() -> Self {
        Self { o: 0.44, a: 0.42, b: 0.10, ab: 0.04 }
    }
}

/// Discrete PRA distribution: `(pra level, probability)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PraDistribution {
    pub levels: Vec<(f64, f64)>,
}

impl PraDistribution {
    pub fn constant(pra: f64) -> Self {
        Self { levels: vec![(pra, 1.0)] }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.levels.is_empty() {
            return Err(ConfigError::Invalid { field: "pra".into(), reason: "no levels".into() });
        }
        for &(pra, p) in &self.levels {
            if !(0.0..=1.0).contains(&pra) || p.is_nan() || p < 0.0 {
                return Err(ConfigError::Invalid {
                    field: "pra".into(),
                    reason: format!("level ({pra}, {p}) out of range"),
                });
            }
        }
        let sum: f64 = self.levels.iter().map(|l| l.1).sum();
        if (sum - 1.0).abs() > FREQ_TOLERANCE {
            return Err(ConfigError::FrequencySum { what: "pra", sum });
        }
        Ok(())
    }
}

impl Default for PraDistribution {
    fn default() -> Self {
        // low / medium / high sensitisation
        Self { levels: vec![(0.05, 0.7), (0.45, 0.2), (0.9, 0.1)] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSpec {
    pub pairs_per_country: Vec<usize>,
    pub altruists_per_country: Vec<usize>,
    pub patient_blood: BloodFrequencies,
    pub donor_blood: BloodFrequencies,
    pub pra: PraDistribution,
    /// Redraw pairs whose donor is compatible with their own patient, as a
    /// real pool only registers incompatible pairs.
    pub incompatible_pairs_only: bool,
    pub seed: u64,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        Self {
            pairs_per_country: vec![100, 100],
            altruists_per_country: vec![0, 0],
            patient_blood: BloodFrequencies::default(),
            donor_blood: BloodFrequencies::default(),
            pra: PraDistribution::default(),
            incompatible_pairs_only: true,
            seed: 0,
        }
    }
}

impl InstanceSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.pairs_per_country.is_empty() {
            return Err(ConfigError::Invalid {
                field: "pairs_per_country".into(),
                reason: "at least one country required".into(),
            });
        }
        if !self.altruists_per_country.is_empty()
            && self.altruists_per_country.len() != self.pairs_per_country.len()
        {
            return Err(ConfigError::Invalid {
                field: "altruists_per_country".into(),
                reason: "length differs from pairs_per_country".into(),
            });
        }
        self.patient_blood.validate("patient blood")?;
        self.donor_blood.validate("donor blood")?;
        self.pra.validate()
    }
}

fn draw_blood(rng: &mut ChaCha8Rng, dist: &WeightedIndex<f64>) -> BloodGroup {
    BloodGroup::ALL[dist.sample(rng)]
}

/// Samples a compatibility graph; deterministic for a given spec and seed.
pub fn sample_instance(spec: &InstanceSpec) -> Result<CompatibilityGraph, ConfigError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let weighted = |f: &BloodFrequencies| {
        WeightedIndex::new(f.weights()).map_err(|e| ConfigError::Invalid {
            field: "blood".into(),
            reason: e.to_string(),
        })
    };
    let patient_dist = weighted(&spec.patient_blood)?;
    let donor_dist = weighted(&spec.donor_blood)?;
    let pra_dist = WeightedIndex::new(spec.pra.levels.iter().map(|l| l.1)).map_err(|e| {
        ConfigError::Invalid { field: "pra".into(), reason: e.to_string() }
    })?;

    let mut nodes = Vec::new();
    for (k, &count) in spec.pairs_per_country.iter().enumerate() {
        for _ in 0..count {
            let mut attempts = 0;
            let (donor, patient) = loop {
                let patient = Patient {
                    blood: draw_blood(&mut rng, &patient_dist),
                    pra: spec.pra.levels[pra_dist.sample(&mut rng)].0,
                };
                let donor = draw_blood(&mut rng, &donor_dist);
                if !spec.incompatible_pairs_only {
                    break (donor, patient);
                }
                let compatible =
                    donor.can_donate_to(patient.blood) && rng.gen::<f64>() >= patient.pra;
                if !compatible {
                    break (donor, patient);
                }
                attempts += 1;
                if attempts >= MAX_REJECTIONS {
                    return Err(ConfigError::RejectionLimit(MAX_REJECTIONS));
                }
            };
            nodes.push(Node {
                id: NodeId(nodes.len()),
                country: CountryId(k + 1),
                kind: NodeKind::PatientDonorPair,
                donor_blood: donor,
                patient: Some(patient),
            });
        }
    }
    for (k, &count) in spec.altruists_per_country.iter().enumerate() {
        for _ in 0..count {
            nodes.push(Node {
                id: NodeId(nodes.len()),
                country: CountryId(k + 1),
                kind: NodeKind::AltruisticDonor,
                donor_blood: draw_blood(&mut rng, &donor_dist),
                patient: None,
            });
        }
    }

    let mut arcs = Vec::new();
    for donor in &nodes {
        for recipient in &nodes {
            if donor.id == recipient.id {
                continue;
            }
            let Some(patient) = recipient.patient else { continue };
            if !donor.donor_blood.can_donate_to(patient.blood) {
                continue;
            }
            // the draw happens only for ABO-compatible pairs
            if rng.gen::<f64>() >= patient.pra {
                arcs.push(Arc { source: donor.id, target: recipient.id, weight: 1.0 });
            }
        }
    }
    Ok(CompatibilityGraph::new(nodes, arcs, spec.pairs_per_country.len())
        .expect("sampled graph is valid by construction"))
}
