//! Subcommand implementations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use kep_core::enumeration::enumerate_cycles;
use kep_core::format::{parse_instance, write_instance};
use kep_core::graph::reduce_chains_to_cycles;
use kep_core::instance::sample_instance;
use kep_core::model::export_lp_text;
use kep_core::policies::{benefit, build_model, choose_formulation, Formulation, Regime};
use kep_core::simulator::{
    read_run_report_csv, read_stage_report_csv, run_simulation, sweep, write_run_report_csv, write_stage_report_csv,
    RunReport, RunReportRow, StageReport,
};
use kep_core::solver::{solve, SolverOptions};
use kep_core::{decode, NodeId, SolverError};

use crate::config::{self, problem, Settings};
use crate::svg::{self, Series, PALETTE};

/// How a command finished when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Done,
    /// Outputs were written but some solve hit its time limit.
    TimedOut,
}

pub const STAGE_CSV: &str = "stage_report.csv";
pub const RUN_CSV: &str = "run_report.csv";
pub const TABLE_TXT: &str = "table.txt";

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn gen(settings: &Settings, out: &Path) -> Result<Status> {
    let spec = config::instance_spec(settings)?;
    let g = sample_instance(&spec).map_err(|e| problem(e.to_string()))?;
    write_file(out, &write_instance(&g))?;
    println!(
        "wrote {}: {} nodes, {} arcs, {} countries",
        out.display(),
        g.num_nodes(),
        g.num_arcs(),
        g.num_countries()
    );
    Ok(Status::Done)
}

pub struct SolveOutputs {
    pub explain: bool,
    pub dump_cycles: bool,
    pub out: Option<PathBuf>,
}

pub fn solve_instance(instance: &Path, settings: &Settings, outputs: &SolveOutputs) -> Result<Status> {
    settings.check_known(config::POLICY_KEYS)?;
    let text = fs::read_to_string(instance).with_context(|| format!("reading {}", instance.display()))?;
    let g = parse_instance(&text).with_context(|| format!("in {}", instance.display()))?;
    let policy = config::policy(settings, g.num_countries())?;
    let g = if policy.chains_enabled { reduce_chains_to_cycles(&g) } else { g };
    let formulation = match settings.get("model").unwrap_or("auto") {
        "auto" => choose_formulation(&g, &policy)?,
        name => name.parse::<Formulation>().map_err(|e| problem(e.to_string()))?,
    };
    let model = build_model(&g, &policy, formulation)?;
    for note in &model.notes {
        eprintln!("note: {note}");
    }
    if outputs.explain {
        print!("{}", model.explain());
    }
    if outputs.dump_cycles {
        let cycles = if model.cycles.is_empty() && policy.max_cycle_len().is_some() {
            enumerate_cycles(&g, &policy)?
        } else {
            model.cycles.clone()
        };
        for c in &cycles {
            println!("candidate {}", node_list(&c.nodes));
        }
    }
    if let Some(path) = settings.get("export-lp") {
        write_file(Path::new(path), &export_lp_text(&model))?;
    }

    let options = SolverOptions { time_limit: config::timeout(settings)? };
    let (assignment, stats, status) = match solve(&model, &options) {
        Ok(sol) => (sol.assignment, Some(sol.stats), Status::Done),
        Err(SolverError::TimedOut { incumbent }) => (*incumbent, None, Status::TimedOut),
        Err(e) => return Err(e.into()),
    };
    let plan = decode(&g, &model, &assignment)?;

    let mut report = String::new();
    let _ = writeln!(
        report,
        "model {} ({} variables, {} constraints)",
        formulation.as_str(),
        model.num_vars(),
        model.constraints.len()
    );
    let _ = writeln!(report, "status {}", if status == Status::Done { "optimal" } else { "time limit reached" });
    // Adding zero prints an empty incumbent as 0 rather than -0.
    let _ = writeln!(report, "objective {}", assignment.objective + 0.0);
    for k in g.countries() {
        let _ = writeln!(report, "transplants country {}: {}", k.0, plan.transplants_in(k));
    }
    for c in &plan.cycles {
        let _ = writeln!(report, "cycle {}", node_list(c));
    }
    for c in &plan.chains {
        let _ = writeln!(report, "chain {}", node_list(c));
    }
    print!("{report}");
    if let Some(s) = stats {
        println!(
            "search nodes {} lp iterations {} lazy rows {}",
            s.nodes, s.lp_iterations, s.lazy_rows_added
        );
    }
    if let Some(path) = &outputs.out {
        write_file(path, &report)?;
    }
    Ok(status)
}

fn node_list(nodes: &[NodeId]) -> String {
    nodes.iter().map(|v| v.0.to_string()).collect::<Vec<_>>().join(" ")
}

fn finish(reports: &[RunReport]) -> Status {
    let mut status = Status::Done;
    for r in reports {
        for note in &r.notes {
            eprintln!("note: {note}");
        }
        if r.excluded > 0 {
            status = Status::TimedOut;
        }
    }
    status
}

pub fn simulate(settings: &Settings, out: &Path) -> Result<Status> {
    let plan = config::simulation_plan(settings)?;
    if plan.bounds.len() != 1 || plan.ratios.len() != 1 {
        return Err(problem("simulate takes one bounds pair and one ratio; use sweep for grids"));
    }
    let report = run_simulation(&plan.config)?;
    create_dir(out)?;
    let reports = [report];
    let stage_path = out.join(STAGE_CSV);
    write_stage_report_csv(&reports, BufWriter::new(create(&stage_path)?))
        .with_context(|| format!("writing {}", stage_path.display()))?;
    let run_path = out.join(RUN_CSV);
    write_run_report_csv(&reports, BufWriter::new(create(&run_path)?))
        .with_context(|| format!("writing {}", run_path.display()))?;
    let rows: Vec<RunReportRow> = reports.iter().map(RunReportRow::from_report).collect();
    let stages: Vec<StageReport> = reports.iter().flat_map(|r| r.runs.iter().flat_map(|run| run.stages.clone())).collect();
    publish(out, &rows, Some(&stages))?;
    Ok(finish(&reports))
}

pub fn run_sweep(settings: &Settings, out: &Path) -> Result<Status> {
    let plan = config::simulation_plan(settings)?;
    let reports = sweep(&plan.config, &plan.bounds, &plan.ratios)?;
    create_dir(out)?;
    let run_path = out.join(RUN_CSV);
    write_run_report_csv(&reports, BufWriter::new(create(&run_path)?))
        .with_context(|| format!("writing {}", run_path.display()))?;
    let rows: Vec<RunReportRow> = reports.iter().map(RunReportRow::from_report).collect();
    publish(out, &rows, None)?;
    Ok(finish(&reports))
}

pub fn report(input: &Path, out: &Path) -> Result<Status> {
    let run_path = input.join(RUN_CSV);
    let rows = read_run_report_csv(open(&run_path)?).with_context(|| format!("reading {}", run_path.display()))?;
    let stage_path = input.join(STAGE_CSV);
    let stages = if stage_path.exists() {
        Some(read_stage_report_csv(open(&stage_path)?).with_context(|| format!("reading {}", stage_path.display()))?)
    } else {
        None
    };
    create_dir(out)?;
    publish(out, &rows, stages.as_deref())?;
    Ok(Status::Done)
}

fn create(path: &Path) -> Result<File> {
    File::create(path).with_context(|| format!("creating {}", path.display()))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

/// Prints the table and writes it with every chart the data supports.
fn publish(out: &Path, rows: &[RunReportRow], stages: Option<&[StageReport]>) -> Result<()> {
    let table = table(rows);
    print!("{table}");
    write_file(&out.join(TABLE_TXT), &table)?;
    if let Some(stages) = stages {
        for (name, svg) in stage_charts(stages) {
            write_file(&out.join(name), &svg)?;
        }
    }
    for (name, svg) in benefit_heatmaps(rows) {
        write_file(&out.join(name), &svg)?;
    }
    Ok(())
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

pub fn table(rows: &[RunReportRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>5} {:>5} {:>6} {:>7} | {:>8} {:>8} {:>8} | {:>8} {:>8} {:>8} | {:>9} {:>8}",
        "K1", "K2", "ratio", "size2", "c1 local", "c1 seq", "c1 merg", "c2 local", "c2 seq", "c2 merg", "instances", "excluded"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:>5} {:>5} {:>6} {:>7} | {:>8} {:>8} {:>8} | {:>8} {:>8} {:>8} | {:>9} {:>8}",
            r.c1_bound,
            r.c2_bound,
            r.ratio,
            r.c2_size,
            cell(r.c1_local),
            cell(r.c1_seq),
            cell(r.c1_merged),
            cell(r.c2_local),
            cell(r.c2_seq),
            cell(r.c2_merged),
            r.instances,
            r.excluded
        );
    }
    s
}

type StageSums = (f64, f64, usize);
type Label = fn(&RunReportRow) -> String;

/// Mean transplants and dropouts per stage, keyed by regime and country,
/// over instances that never timed out.
fn stage_means(stages: &[StageReport]) -> BTreeMap<(Regime, usize), Vec<(f64, f64)>> {
    let excluded: BTreeSet<usize> = stages.iter().filter(|s| s.timed_out).map(|s| s.instance).collect();
    // Per stage: transplant sum, dropout sum, instances.
    let mut sums: BTreeMap<(Regime, usize), BTreeMap<usize, StageSums>> = BTreeMap::new();
    for s in stages.iter().filter(|s| !excluded.contains(&s.instance)) {
        let e = sums.entry((s.regime, s.country)).or_default().entry(s.stage).or_default();
        e.0 += s.transplants as f64;
        e.1 += s.dropouts as f64;
        e.2 += 1;
    }
    sums.into_iter()
        .map(|(key, by_stage)| {
            let means = by_stage.into_values().map(|(t, d, n)| (t / n as f64, d / n as f64)).collect();
            (key, means)
        })
        .collect()
}

fn regime_color(r: Regime) -> &'static str {
    match r {
        Regime::Local => PALETTE[0],
        Regime::Consecutive => PALETTE[2],
        Regime::Merged => PALETTE[1],
    }
}

pub fn stage_charts(stages: &[StageReport]) -> Vec<(String, String)> {
    let means = stage_means(stages);
    let countries: BTreeSet<usize> = means.keys().map(|k| k.1).collect();
    let mut charts = Vec::new();
    for &k in &countries {
        let mut series = Vec::new();
        for (&(regime, _), m) in means.iter().filter(|(key, _)| key.1 == k) {
            let pts = |f: fn(&(f64, f64)) -> f64| m.iter().enumerate().map(|(i, v)| ((i + 1) as f64, f(v))).collect();
            series.push(Series {
                label: format!("{regime} transplants"),
                points: pts(|v| v.0),
                color: regime_color(regime),
                dashed: false,
            });
            series.push(Series {
                label: format!("{regime} dropouts"),
                points: pts(|v| v.1),
                color: regime_color(regime),
                dashed: true,
            });
        }
        let title = format!("Country {} per stage", k);
        charts.push((format!("stages_country{}.svg", k), svg::line_chart(&title, "stage", "mean count", &series)));
    }
    let mut series = Vec::new();
    for (i, &k) in countries.iter().enumerate() {
        let (Some(local), Some(merged)) = (means.get(&(Regime::Local, k)), means.get(&(Regime::Merged, k))) else {
            continue;
        };
        let (mut cl, mut cm) = (0.0, 0.0);
        let mut points = Vec::new();
        for (stage, (l, m)) in local.iter().zip(merged).enumerate() {
            cl += l.0;
            cm += m.0;
            if let Some(b) = benefit(cm, cl) {
                points.push(((stage + 1) as f64, b));
            }
        }
        series.push(Series {
            label: format!("country {}", k),
            points,
            color: PALETTE[(3 + i) % PALETTE.len()],
            dashed: false,
        });
    }
    if !series.is_empty() {
        charts.push((
            "improvement.svg".to_string(),
            svg::line_chart("Cumulative merged / local transplants", "stage", "ratio", &series),
        ));
    }
    charts
}

/// One heatmap per country of merged over local benefit: K1 by K2 when
/// every row shares a ratio, bounds by ratio otherwise.
pub fn benefit_heatmaps(rows: &[RunReportRow]) -> Vec<(String, String)> {
    if rows.is_empty() {
        return Vec::new();
    }
    let ratios = ordered(rows.iter().map(|r| r.ratio.clone()));
    let single_ratio = ratios.len() == 1;
    let (col_of, row_of): (Label, Label) = if single_ratio {
        (|r| r.c2_bound.clone(), |r| r.c1_bound.clone())
    } else {
        (|r| r.ratio.clone(), |r| format!("{}:{}", r.c1_bound, r.c2_bound))
    };
    let cols = ordered(rows.iter().map(col_of));
    let lines = ordered(rows.iter().map(row_of));
    let (x_label, y_label) = if single_ratio { ("K2", "K1") } else { ("pool ratio", "K1:K2") };
    let mut maps = Vec::new();
    for k in 0..2 {
        let mut values = vec![vec![None; cols.len()]; lines.len()];
        for r in rows {
            let (merged, local) = if k == 0 { (r.c1_merged, r.c1_local) } else { (r.c2_merged, r.c2_local) };
            let v = merged.zip(local).and_then(|(m, l)| benefit(m, l));
            let ci = cols.iter().position(|c| *c == col_of(r)).unwrap_or(0);
            let ri = lines.iter().position(|c| *c == row_of(r)).unwrap_or(0);
            values[ri][ci] = v;
        }
        let title = format!("Country {} merged / local transplants", k + 1);
        maps.push((format!("benefit_country{}.svg", k + 1), svg::heatmap(&title, x_label, y_label, &cols, &lines, &values)));
    }
    maps
}

/// Distinct values in first-seen order.
fn ordered(items: impl Iterator<Item = String>) -> Vec<String> {
    let mut seen = Vec::new();
    for s in items {
        if !seen.contains(&s) {
            seen.push(s);
        }
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(c1: &str, c2: &str, ratio: &str, local: f64, merged: f64) -> RunReportRow {
        RunReportRow {
            c1_bound: c1.into(),
            c2_bound: c2.into(),
            ratio: ratio.into(),
            c2_size: 10,
            c1_local: Some(local),
            c1_seq: None,
            c1_merged: Some(merged),
            c2_local: Some(0.0),
            c2_seq: None,
            c2_merged: Some(1.0),
            instances: 1,
            excluded: 0,
        }
    }

    #[test]
    fn heatmap_layout_follows_ratios() {
        let rows = [row("2", "2", "1:1", 10.0, 12.0), row("2", "3", "1:1", 10.0, 15.0)];
        let maps = benefit_heatmaps(&rows);
        assert_eq!(maps.len(), 2);
        assert!(maps[0].1.contains("1.500"));
        assert!(maps[0].1.contains(">K2<"));
        assert!(maps[1].1.contains("n/a"));
        let rows = [row("2", "2", "1:1", 10.0, 12.0), row("2", "2", "1:2", 10.0, 11.0)];
        assert!(benefit_heatmaps(&rows)[0].1.contains("pool ratio"));
    }

    #[test]
    fn stage_means_skip_timed_out_instances() {
        let s = |instance, stage, transplants, timed_out| StageReport {
            instance,
            regime: Regime::Local,
            stage,
            country: 1,
            transplants,
            dropouts: 1,
            pool: 5,
            timed_out,
        };
        let rows = [s(0, 0, 2, false), s(0, 1, 4, false), s(1, 0, 6, false), s(1, 1, 0, false), s(2, 0, 100, true)];
        let means = stage_means(&rows);
        assert_eq!(means[&(Regime::Local, 1)], vec![(4.0, 1.0), (2.0, 1.0)]);
        assert_eq!(stage_charts(&rows).len(), 1);
    }

    #[test]
    fn table_has_a_line_per_row() {
        let t = table(&[row("2", "inf", "1:2", 1.0, 2.0)]);
        assert_eq!(t.lines().count(), 2);
        assert!(t.contains("inf"));
    }
}
