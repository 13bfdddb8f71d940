//! Multi-stage simulation of two cooperating pools.
//!
//! Each instance is a sampled two-country graph whose nodes arrive at
//! uniformly random stages. At every stage the active pool (arrived, not
//! yet matched, still within its residence window) is matched under a
//! regime; unmatched nodes whose window closes leave the programme.
//! Instances are independent and run in parallel; stages run in order.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io;
use std::time::Duration;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, KepError};
use crate::graph::{CompatibilityGraph, CountryId, NodeId};
use crate::instance::{sample_instance, InstanceSpec};
use crate::policies::{run_regime, Regime};
use crate::policy::{Cap, PolicyConfig};
use crate::solver::SolverOptions;

/// Pool sizes per country before subsampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// 100 pairs per country.
    Desk,
    /// 500 pairs per country, about 41.6 arrivals per stage.
    Paper,
}

impl Scale {
    pub fn pairs_per_country(self) -> usize {
        match self {
            Scale::Desk => 100,
            Scale::Paper => 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub num_stages: usize,
    pub stage_length_months: usize,
    pub horizon_years: usize,
    /// Matching runs a node takes part in before leaving unmatched.
    pub max_stages_in_pool: usize,
    pub instances: usize,
    /// Population model; `pairs_per_country` gives the full pool sizes and
    /// the seed is replaced per instance.
    pub population: InstanceSpec,
    /// Country 2 keeps `a / b` of its pool.
    pub pool_ratio: (usize, usize),
    pub bounds: (Cap, Cap),
    pub regimes: Vec<Regime>,
    pub chains_enabled: bool,
    pub seed: u64,
    /// Per solve.
    pub time_limit: Option<Duration>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            num_stages: 12,
            stage_length_months: 3,
            horizon_years: 3,
            max_stages_in_pool: 4,
            instances: 20,
            population: InstanceSpec::default(),
            pool_ratio: (1, 1),
            bounds: (Cap::Finite(3), Cap::Finite(3)),
            regimes: Regime::ALL.to_vec(),
            chains_enabled: false,
            seed: 1,
            time_limit: None,
        }
    }
}

impl SimulationConfig {
    pub fn with_scale(mut self, scale: Scale) -> Self {
        let n = scale.pairs_per_country();
        self.population.pairs_per_country = vec![n, n];
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |field: &str, reason: String| Err(ConfigError::Invalid { field: field.into(), reason });
        if self.num_stages == 0 {
            return invalid("num_stages", "must be positive".into());
        }
        if self.num_stages * self.stage_length_months != self.horizon_years * 12 {
            return invalid(
                "num_stages",
                format!(
                    "{} stages of {} months do not span {} years",
                    self.num_stages, self.stage_length_months, self.horizon_years
                ),
            );
        }
        if self.max_stages_in_pool == 0 {
            return invalid("max_stages_in_pool", "must be positive".into());
        }
        if self.instances == 0 {
            return invalid("instances", "must be positive".into());
        }
        let (a, b) = self.pool_ratio;
        if a == 0 || b == 0 || a > b {
            return invalid("pool_ratio", format!("{a}:{b} must satisfy 0 < a <= b"));
        }
        if self.regimes.is_empty() {
            return invalid("regimes", "at least one regime required".into());
        }
        if self.population.pairs_per_country.len() != 2 {
            return Err(ConfigError::CountryCount { expected: 2, got: self.population.pairs_per_country.len() });
        }
        self.population.validate()?;
        self.policy().validate()
    }

    pub fn policy(&self) -> PolicyConfig {
        let mut p = PolicyConfig::two_country(self.bounds.0, self.bounds.1);
        p.chains_enabled = self.chains_enabled;
        p
    }

    /// Size of country 2 after subsampling.
    pub fn country2_size(&self) -> usize {
        let (a, b) = self.pool_ratio;
        (self.population.pairs_per_country[1] * a + b / 2) / b
    }
}

/// Independent random stream for one purpose of one instance.
fn stream(seed: u64, instance: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(instance as u64 * 8 + purpose);
    rng
}

const INSTANCE_STREAM: u64 = 0;
const ARRIVAL_STREAM: u64 = 1;
const SUBSAMPLE_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatientRecord {
    pub node: NodeId,
    pub country: CountryId,
    pub arrival_stage: usize,
    /// First stage the node is no longer in the pool.
    pub departure_stage: usize,
    pub matched_at: Option<usize>,
    /// Stage after whose run the node left unmatched.
    pub dropped_at: Option<usize>,
}

impl PatientRecord {
    pub fn is_active(&self, stage: usize) -> bool {
        self.arrival_stage <= stage && stage < self.departure_stage && self.matched_at.is_none()
    }
}

/// Arrival stage (1-based, uniform) of every node of `g`.
pub fn schedule_arrivals(g: &CompatibilityGraph, num_stages: usize, rng: &mut impl Rng) -> Vec<PatientRecord> {
    g.nodes()
        .iter()
        .map(|n| PatientRecord {
            node: n.id,
            country: n.country,
            arrival_stage: rng.gen_range(1..=num_stages),
            departure_stage: 0,
            matched_at: None,
            dropped_at: None,
        })
        .collect()
}

fn arrival_hash(records: &[PatientRecord]) -> u64 {
    let mut h = DefaultHasher::new();
    for r in records {
        (r.node.0, r.country.0, r.arrival_stage).hash(&mut h);
    }
    h.finish()
}

/// A sampled instance with arrivals, after subsampling country 2.
#[derive(Debug, Clone)]
pub struct SimInstance {
    pub index: usize,
    pub graph: CompatibilityGraph,
    pub records: Vec<PatientRecord>,
}

impl SimInstance {
    pub fn arrival_hash(&self) -> u64 {
        arrival_hash(&self.records)
    }
}

/// Samples instance `index`. The full graph and its arrivals depend only on
/// the seed and index, and the country-2 subsample only on those and the
/// pool ratio, so every bound setting sees the same patients.
pub fn prepare_instance(config: &SimulationConfig, index: usize) -> Result<SimInstance, ConfigError> {
    let mut spec = config.population.clone();
    spec.seed = stream(config.seed, index, INSTANCE_STREAM).gen();
    let full = sample_instance(&spec)?;
    let mut arrivals = stream(config.seed, index, ARRIVAL_STREAM);
    let full_records = schedule_arrivals(&full, config.num_stages, &mut arrivals);

    let second: Vec<NodeId> = full.nodes_of(CountryId(2)).collect();
    let keep_count = (second.len() * config.pool_ratio.0 + config.pool_ratio.1 / 2) / config.pool_ratio.1;
    let mut rng = stream(config.seed, index, SUBSAMPLE_STREAM);
    let mut kept_second: Vec<NodeId> = sample(&mut rng, second.len(), keep_count).into_iter().map(|i| second[i]).collect();
    kept_second.sort();
    let mut keep: Vec<NodeId> = full.nodes_of(CountryId(1)).collect();
    keep.extend(kept_second);
    keep.sort();
    let sub = full.induced_subgraph(&keep);
    let records = keep
        .iter()
        .enumerate()
        .map(|(new, old)| PatientRecord { node: NodeId(new), ..full_records[old.0] })
        .collect();
    Ok(SimInstance { index, graph: sub.graph, records })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageReport {
    pub instance: usize,
    pub regime: Regime,
    pub stage: usize,
    pub country: usize,
    pub transplants: usize,
    pub dropouts: usize,
    /// Active pool size at the run.
    pub pool: usize,
    /// The run hit the solver time limit and used the best plan found.
    pub timed_out: bool,
}

/// One regime simulated on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRun {
    pub instance: usize,
    pub regime: Regime,
    pub records: Vec<PatientRecord>,
    pub stages: Vec<StageReport>,
    pub timed_out_stages: Vec<usize>,
    pub arrival_hash: u64,
}

impl InstanceRun {
    /// Transplants per country over the whole horizon.
    pub fn totals(&self) -> [usize; 2] {
        let mut t = [0; 2];
        for s in &self.stages {
            t[s.country - 1] += s.transplants;
        }
        t
    }

    /// Joint transplants up to and including each stage.
    pub fn cumulative(&self, num_stages: usize) -> Vec<usize> {
        let mut per_stage = vec![0; num_stages];
        for s in &self.stages {
            per_stage[s.stage - 1] += s.transplants;
        }
        per_stage
            .iter()
            .scan(0, |acc, x| {
                *acc += x;
                Some(*acc)
            })
            .collect()
    }
}

/// Runs `regime` through all stages of an instance.
pub fn simulate_instance(
    config: &SimulationConfig,
    inst: &SimInstance,
    regime: Regime,
) -> Result<InstanceRun, KepError> {
    let policy = config.policy();
    let options = SolverOptions { time_limit: config.time_limit };
    let mut records = inst.records.clone();
    for r in &mut records {
        r.departure_stage = r.arrival_stage + config.max_stages_in_pool;
    }
    let mut stages = Vec::new();
    let mut timed_out_stages = Vec::new();
    for stage in 1..=config.num_stages {
        let active: Vec<NodeId> = records.iter().filter(|r| r.is_active(stage)).map(|r| r.node).collect();
        let mut pool = [0usize; 2];
        for v in &active {
            pool[records[v.0].country.index()] += 1;
        }
        let sub = inst.graph.induced_subgraph(&active);
        let outcome = run_regime(regime, &sub.graph, &policy, &options)?;
        if outcome.timed_out {
            timed_out_stages.push(stage);
        }
        for v in outcome.plan.matched_nodes() {
            records[sub.to_parent(v).0].matched_at = Some(stage);
        }
        let mut dropouts = [0usize; 2];
        for &v in &active {
            let r = &mut records[v.0];
            if r.matched_at.is_none() && r.departure_stage == stage + 1 {
                r.dropped_at = Some(stage);
                dropouts[r.country.index()] += 1;
            }
        }
        for k in 0..2 {
            stages.push(StageReport {
                instance: inst.index,
                regime,
                stage,
                country: k + 1,
                transplants: outcome.plan.transplants[k],
                dropouts: dropouts[k],
                pool: pool[k],
                timed_out: outcome.timed_out,
            });
        }
    }
    Ok(InstanceRun {
        instance: inst.index,
        regime,
        arrival_hash: inst.arrival_hash(),
        records,
        stages,
        timed_out_stages,
    })
}

/// Mean per-country totals of one regime over the instances kept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeAverage {
    pub regime: Regime,
    pub country: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub bounds: (Cap, Cap),
    pub pool_ratio: (usize, usize),
    pub country2_size: usize,
    pub runs: Vec<InstanceRun>,
    pub averages: Vec<RegimeAverage>,
    pub instances_used: usize,
    pub excluded: usize,
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn average(&self, regime: Regime) -> Option<[f64; 2]> {
        self.averages.iter().find(|a| a.regime == regime).map(|a| a.country)
    }

    pub fn run(&self, instance: usize, regime: Regime) -> Option<&InstanceRun> {
        self.runs.iter().find(|r| r.instance == instance && r.regime == regime)
    }
}

/// Simulates every instance under every configured regime and averages the
/// per-country totals. An instance with a timed-out stage in any regime is
/// left out of all averages; with no instances left there are none.
pub fn run_simulation(config: &SimulationConfig) -> Result<RunReport, KepError> {
    config.validate()?;
    let per_instance: Vec<Result<Vec<InstanceRun>, KepError>> = (0..config.instances)
        .into_par_iter()
        .map(|i| {
            let inst = prepare_instance(config, i)?;
            config.regimes.iter().map(|&r| simulate_instance(config, &inst, r)).collect()
        })
        .collect();
    let mut runs = Vec::new();
    let mut notes = Vec::new();
    let mut excluded = Vec::new();
    for (i, result) in per_instance.into_iter().enumerate() {
        let inst_runs = result?;
        for r in inst_runs.iter().filter(|r| !r.timed_out_stages.is_empty()) {
            notes.push(format!(
                "instance {i}: {} timed out at stage(s) {:?}; excluded from averages",
                r.regime, r.timed_out_stages
            ));
        }
        if inst_runs.iter().any(|r| !r.timed_out_stages.is_empty()) {
            excluded.push(i);
        }
        runs.extend(inst_runs);
    }
    let used = config.instances - excluded.len();
    let averages = config
        .regimes
        .iter()
        .filter(|_| used > 0)
        .map(|&regime| {
            let mut sum = [0.0; 2];
            for r in runs.iter().filter(|r| r.regime == regime && !excluded.contains(&r.instance)) {
                let t = r.totals();
                sum[0] += t[0] as f64;
                sum[1] += t[1] as f64;
            }
            RegimeAverage { regime, country: [sum[0] / used as f64, sum[1] / used as f64] }
        })
        .collect();
    Ok(RunReport {
        bounds: config.bounds,
        pool_ratio: config.pool_ratio,
        country2_size: config.country2_size(),
        runs,
        averages,
        instances_used: used,
        excluded: excluded.len(),
        notes,
    })
}

/// Runs every (bounds, ratio) cell on the same instances. Reports come back
/// in grid order: bounds outer, ratios inner.
pub fn sweep(
    config: &SimulationConfig,
    bounds: &[(Cap, Cap)],
    ratios: &[(usize, usize)],
) -> Result<Vec<RunReport>, KepError> {
    if bounds.is_empty() || ratios.is_empty() {
        return Err(ConfigError::Invalid { field: "grid".into(), reason: "empty sweep grid".into() }.into());
    }
    let cells: Vec<SimulationConfig> = bounds
        .iter()
        .flat_map(|&b| {
            ratios.iter().map(move |&r| SimulationConfig { bounds: b, pool_ratio: r, ..config.clone() })
        })
        .collect();
    cells.par_iter().map(run_simulation).collect()
}

/// One row of the aggregate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReportRow {
    pub c1_bound: String,
    pub c2_bound: String,
    pub ratio: String,
    pub c2_size: usize,
    pub c1_local: Option<f64>,
    pub c1_seq: Option<f64>,
    pub c1_merged: Option<f64>,
    pub c2_local: Option<f64>,
    pub c2_seq: Option<f64>,
    pub c2_merged: Option<f64>,
    pub instances: usize,
    pub excluded: usize,
}

impl RunReportRow {
    pub fn from_report(r: &RunReport) -> Self {
        let get = |regime, k: usize| r.average(regime).map(|a| a[k]);
        Self {
            c1_bound: r.bounds.0.to_string(),
            c2_bound: r.bounds.1.to_string(),
            ratio: format!("{}:{}", r.pool_ratio.0, r.pool_ratio.1),
            c2_size: r.country2_size,
            c1_local: get(Regime::Local, 0),
            c1_seq: get(Regime::Consecutive, 0),
            c1_merged: get(Regime::Merged, 0),
            c2_local: get(Regime::Local, 1),
            c2_seq: get(Regime::Consecutive, 1),
            c2_merged: get(Regime::Merged, 1),
            instances: r.instances_used,
            excluded: r.excluded,
        }
    }
}

fn csv_err(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

pub fn write_run_report_csv(reports: &[RunReport], out: impl io::Write) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(RunReportRow::from_report(r)).map_err(csv_err)?;
    }
    if reports.is_empty() {
        w.write_record([
            "c1_bound", "c2_bound", "ratio", "c2_size", "c1_local", "c1_seq", "c1_merged", "c2_local", "c2_seq",
            "c2_merged", "instances", "excluded",
        ])
        .map_err(csv_err)?;
    }
    w.flush()
}

pub fn read_run_report_csv(input: impl io::Read) -> io::Result<Vec<RunReportRow>> {
    csv::Reader::from_reader(input).deserialize().collect::<Result<_, _>>().map_err(csv_err)
}

pub fn write_stage_report_csv(reports: &[RunReport], out: impl io::Write) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        for run in &r.runs {
            for s in &run.stages {
                w.serialize(s).map_err(csv_err)?;
            }
        }
    }
    w.flush()
}

pub fn read_stage_report_csv(input: impl io::Read) -> io::Result<Vec<StageReport>> {
    csv::Reader::from_reader(input).deserialize().collect::<Result<_, _>>().map_err(csv_err)
}
