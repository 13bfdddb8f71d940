//! Flat `key=value` settings files and the flag values that override them.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use anyhow::{Context, Result};
use kep_core::instance::{BloodFrequencies, InstanceSpec, PraDistribution};
use kep_core::policies::Regime;
use kep_core::simulator::{Scale, SimulationConfig};
use kep_core::{Cap, PolicyConfig};

/// A configuration mistake; reported with its own exit code.
#[derive(Debug)]
pub struct ConfigProblem(pub String);

impl fmt::Display for ConfigProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigProblem {}

pub fn problem(msg: impl Into<String>) -> anyhow::Error {
    ConfigProblem(msg.into()).into()
}

/// Settings keyed by flag name without the leading dashes.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    /// Parses `key = value` lines; `#` starts a comment line and
    /// underscores in keys are read as dashes.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| problem(format!("line {}: expected key=value", i + 1)))?;
            let key = key.trim().replace('_', "-");
            if key.is_empty() {
                return Err(problem(format!("line {}: empty key", i + 1)));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Self::parse(&text).with_context(|| format!("in {}", p.display()))
            }
        }
    }

    /// Overrides `key` when a flag was given.
    pub fn set(&mut self, key: &str, value: Option<impl ToString>) {
        if let Some(v) = value {
            self.values.insert(key.to_string(), v.to_string());
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn value<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|_| problem(format!("invalid value '{v}' for {key}"))))
            .transpose()
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            None | Some("false") | Some("no") | Some("0") => Ok(false),
            Some("true") | Some("yes") | Some("1") => Ok(true),
            Some(v) => Err(problem(format!("invalid value '{v}' for {key}; expected true or false"))),
        }
    }

    /// Rejects keys outside `known`, which usually are typos.
    pub fn check_known(&self, known: &[&str]) -> Result<()> {
        match self.values.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(problem(format!("unknown setting '{k}' (known: {})", known.join(", ")))),
            None => Ok(()),
        }
    }
}

pub fn parse_cap(s: &str) -> Result<Cap> {
    s.parse::<Cap>().map_err(|_| problem(format!("invalid cap '{s}'; expected a count or 'inf'")))
}

/// `a:b:...` as caps.
pub fn parse_caps(s: &str) -> Result<Vec<Cap>> {
    s.split(':').map(parse_cap).collect()
}

/// `K1:K2` for two countries.
pub fn parse_bounds(s: &str) -> Result<(Cap, Cap)> {
    match parse_caps(s)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(problem(format!("bounds '{s}' must have the form K1:K2"))),
    }
}

pub fn parse_ratio(s: &str) -> Result<(usize, usize)> {
    let bad = || problem(format!("ratio '{s}' must have the form a:b with 0 < a <= b"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if a == 0 || a > b {
        return Err(bad());
    }
    Ok((a, b))
}

fn comma_list<T>(s: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    s.split(',').map(|t| parse(t.trim())).collect()
}

pub fn parse_regimes(s: &str) -> Result<Vec<Regime>> {
    comma_list(s, |t| t.parse::<Regime>().map_err(|e| problem(e.to_string())))
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse().map_err(|_| problem(format!("'{s}' is not a number")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse().map_err(|_| problem(format!("'{s}' is not a count")))
}

pub fn timeout(settings: &Settings) -> Result<Option<Duration>> {
    match settings.value::<f64>("timeout")? {
        Some(t) if t.is_finite() && t > 0.0 => Ok(Some(Duration::from_secs_f64(t))),
        Some(t) => Err(problem(format!("timeout must be a positive number of seconds, got {t}"))),
        None => Ok(None),
    }
}

pub const SIMULATION_KEYS: &[&str] =
    &["bounds", "ratio", "regimes", "stages", "instances", "seed", "scale", "timeout", "pairs", "chains", "out"];

/// A simulation configuration plus the bounds and ratio grids it spans.
#[derive(Debug, Clone)]
pub struct SimulationPlan {
    pub config: SimulationConfig,
    pub bounds: Vec<(Cap, Cap)>,
    pub ratios: Vec<(usize, usize)>,
}

pub fn simulation_plan(settings: &Settings) -> Result<SimulationPlan> {
    settings.check_known(SIMULATION_KEYS)?;
    let mut config = SimulationConfig::default();
    if let Some(scale) = settings.get("scale") {
        config = config.with_scale(match scale {
            "desk" => Scale::Desk,
            "paper" => Scale::Paper,
            other => return Err(problem(format!("unknown scale '{other}' (expected desk or paper)"))),
        });
    }
    if let Some(pairs) = settings.get("pairs") {
        let sizes = comma_list(pairs, parse_usize)?;
        config.population.pairs_per_country = match sizes.as_slice() {
            [n] => vec![*n, *n],
            [a, b] => vec![*a, *b],
            _ => return Err(problem("pairs takes one size or two comma-separated sizes")),
        };
    }
    if let Some(stages) = settings.value::<usize>("stages")? {
        // Stages last three months and the horizon is whole years.
        if stages == 0 || stages % 4 != 0 {
            return Err(problem(format!("stages must be a positive multiple of 4, got {stages}")));
        }
        config.num_stages = stages;
        config.horizon_years = stages / 4;
    }
    if let Some(n) = settings.value("instances")? {
        config.instances = n;
    }
    if let Some(seed) = settings.value("seed")? {
        config.seed = seed;
    }
    if let Some(r) = settings.get("regimes") {
        config.regimes = parse_regimes(r)?;
    }
    config.time_limit = timeout(settings)?;
    config.chains_enabled = settings.flag("chains")?;
    let bounds = match settings.get("bounds") {
        Some(b) => comma_list(b, parse_bounds)?,
        None => vec![config.bounds],
    };
    let ratios = match settings.get("ratio") {
        Some(r) => comma_list(r, parse_ratio)?,
        None => vec![config.pool_ratio],
    };
    config.bounds = bounds[0];
    config.pool_ratio = ratios[0];
    config.validate().map_err(|e| problem(e.to_string()))?;
    Ok(SimulationPlan { config, bounds, ratios })
}

pub const POLICY_KEYS: &[&str] = &[
    "bounds",
    "international-cap",
    "segment-caps",
    "max-segments",
    "max-pairs",
    "max-countries",
    "chains",
    "model",
    "timeout",
    "export-lp",
];

/// Per-country caps given as one value for all countries or one per
/// country.
fn per_country(settings: &Settings, key: &str, countries: usize) -> Result<Option<Vec<Cap>>> {
    let Some(raw) = settings.get(key) else {
        return Ok(None);
    };
    let caps = parse_caps(raw)?;
    match caps.len() {
        1 => Ok(Some(vec![caps[0]; countries])),
        n if n == countries => Ok(Some(caps)),
        n => Err(problem(format!("{key} lists {n} values for {countries} countries"))),
    }
}

/// Builds the policy for a graph with `countries` countries. National caps
/// come from `bounds`; with two countries the remaining restrictions follow
/// the two-country defaults, otherwise the caps are uniform. Each further
/// key overrides one restriction.
pub fn policy(settings: &Settings, countries: usize) -> Result<PolicyConfig> {
    let national = per_country(settings, "bounds", countries)?.unwrap_or_else(|| vec![Cap::Finite(3); countries]);
    let mut p = if countries == 2 {
        PolicyConfig::two_country(national[0], national[1])
    } else {
        let mut p = PolicyConfig::uniform(countries, national.iter().fold(Cap::Finite(0), |a, &b| a.max(b)));
        for (c, &cap) in p.countries.iter_mut().zip(&national) {
            c.national_cycle_cap = cap;
        }
        p
    };
    if let Some(k) = settings.get("international-cap") {
        p.international_cycle_cap = parse_cap(k)?;
    }
    if let Some(caps) = per_country(settings, "segment-caps", countries)? {
        p.countries.iter_mut().zip(caps).for_each(|(c, v)| c.segment_node_cap = v);
    }
    if let Some(caps) = per_country(settings, "max-segments", countries)? {
        p.countries.iter_mut().zip(caps).for_each(|(c, v)| c.max_segments = v);
    }
    if let Some(caps) = per_country(settings, "max-pairs", countries)? {
        p.countries.iter_mut().zip(caps).for_each(|(c, v)| c.max_pairs = v);
    }
    if let Some(g) = settings.get("max-countries") {
        p.max_countries = parse_cap(g)?;
    }
    p.chains_enabled = settings.flag("chains")?;
    p.validate().map_err(|e| problem(e.to_string()))?;
    Ok(p)
}

pub const POPULATION_KEYS: &[&str] =
    &["pairs", "altruists", "patient-blood", "donor-blood", "pra", "incompatible-only", "seed"];

/// `O,A,B,AB` frequencies.
fn blood(s: &str) -> Result<BloodFrequencies> {
    match comma_list(s, parse_f64)?.as_slice() {
        &[o, a, b, ab] => Ok(BloodFrequencies { o, a, b, ab }),
        _ => Err(problem(format!("blood frequencies '{s}' need four values for O,A,B,AB"))),
    }
}

/// A single PRA value, or `pra:probability` levels.
fn pra(s: &str) -> Result<PraDistribution> {
    if !s.contains(':') {
        return Ok(PraDistribution::constant(parse_f64(s)?));
    }
    let levels = comma_list(s, |t| {
        let (v, p) = t.split_once(':').ok_or_else(|| problem(format!("PRA level '{t}' must be pra:probability")))?;
        Ok((parse_f64(v)?, parse_f64(p)?))
    })?;
    Ok(PraDistribution { levels })
}

pub fn instance_spec(settings: &Settings) -> Result<InstanceSpec> {
    settings.check_known(POPULATION_KEYS)?;
    let mut spec = InstanceSpec::default();
    if let Some(p) = settings.get("pairs") {
        spec.pairs_per_country = comma_list(p, parse_usize)?;
        spec.altruists_per_country = vec![0; spec.pairs_per_country.len()];
    }
    if let Some(a) = settings.get("altruists") {
        spec.altruists_per_country = comma_list(a, parse_usize)?;
    }
    if let Some(b) = settings.get("patient-blood") {
        spec.patient_blood = blood(b)?;
    }
    if let Some(b) = settings.get("donor-blood") {
        spec.donor_blood = blood(b)?;
    }
    if let Some(p) = settings.get("pra") {
        spec.pra = pra(p)?;
    }
    if settings.get("incompatible-only").is_some() {
        spec.incompatible_pairs_only = settings.flag("incompatible-only")?;
    }
    if let Some(seed) = settings.value("seed")? {
        spec.seed = seed;
    }
    spec.validate().map_err(|e| problem(e.to_string()))?;
    Ok(spec)
}
