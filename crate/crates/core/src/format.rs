//! Line-oriented text format for compatibility graphs.
//!
//! ```text
//! kep <num_nodes> <num_countries>
//! node <id> <country> <kind> <donor_blood> [<patient_blood> <pra>]
//! arc <src> <dst> <weight>
//! ```
//!
//! `kind` is one of `pair`, `altruist`, `artificial`; only `pair` lines carry
//! patient attributes. Blank lines and lines starting with `#` are ignored.

use std::fmt::Write;

use crate::error::ParseError;
use crate::graph::{Arc, BloodGroup, CompatibilityGraph, CountryId, Node, NodeId, NodeKind, Patient};

pub fn write_instance(g: &CompatibilityGraph) -> String {
    let mut out = String::new();
    writeln!(out, "kep {} {}", g.num_nodes(), g.num_countries()).unwrap();
    for n in g.nodes() {
        write!(out, "node {} {} {} {}", n.id, n.country, n.kind.token(), n.donor_blood).unwrap();
        if let Some(p) = n.patient {
            write!(out, " {} {}", p.blood, p.pra).unwrap();
        }
        out.push('\n');
    }
    for a in g.arcs() {
        writeln!(out, "arc {} {} {}", a.source, a.target, a.weight).unwrap();
    }
    out
}

fn err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError { line, message: message.into() }
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T, ParseError> {
    let tok = tok.ok_or_else(|| err(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| err(line, format!("invalid {what} '{tok}'")))
}

pub fn parse_instance(text: &str) -> Result<CompatibilityGraph, ParseError> {
    let mut header: Option<(usize, usize, usize)> = None;
    let mut nodes: Vec<Node> = Vec::new();
    let mut arcs: Vec<(Arc, usize)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        let keyword = toks.next().unwrap();
        match keyword {
            "kep" => {
                if header.is_some() {
                    return Err(err(line_no, "duplicate header"));
                }
                let n: usize = field(toks.next(), line_no, "node count")?;
                let c: usize = field(toks.next(), line_no, "country count")?;
                if c == 0 {
                    return Err(err(line_no, "country count must be positive"));
                }
                header = Some((n, c, line_no));
            }
            "node" | "arc" if header.is_none() => {
                return Err(err(line_no, "expected 'kep' header first"));
            }
            "node" => {
                let (_, num_countries, _) = header.unwrap();
                let id: usize = field(toks.next(), line_no, "node id")?;
                if id != nodes.len() {
                    return Err(err(line_no, format!("expected node id {}, found {id}", nodes.len())));
                }
                let country: usize = field(toks.next(), line_no, "country")?;
                if country == 0 || country > num_countries {
                    return Err(err(line_no, format!("country {country} outside 1..={num_countries}")));
                }
                let kind_tok = toks.next().ok_or_else(|| err(line_no, "missing node kind"))?;
                let kind = NodeKind::from_token(kind_tok)
                    .ok_or_else(|| err(line_no, format!("unknown node kind '{kind_tok}'")))?;
                let blood_tok = toks.next().ok_or_else(|| err(line_no, "missing donor blood group"))?;
                let donor_blood = BloodGroup::parse(blood_tok)
                    .ok_or_else(|| err(line_no, format!("invalid blood group '{blood_tok}'")))?;
                let patient = match kind {
                    NodeKind::PatientDonorPair => {
                        let pb = toks.next().ok_or_else(|| err(line_no, "missing patient blood group"))?;
                        let blood = BloodGroup::parse(pb)
                            .ok_or_else(|| err(line_no, format!("invalid blood group '{pb}'")))?;
                        let pra: f64 = field(toks.next(), line_no, "pra")?;
                        if !(0.0..=1.0).contains(&pra) {
                            return Err(err(line_no, format!("pra {pra} outside [0, 1]")));
                        }
                        Some(Patient { blood, pra })
                    }
                    _ => None,
                };
                if toks.next().is_some() {
                    return Err(err(line_no, "trailing tokens on node line"));
                }
                nodes.push(Node { id: NodeId(id), country: CountryId(country), kind, donor_blood, patient });
            }
            "arc" => {
                let s: usize = field(toks.next(), line_no, "arc source")?;
                let t: usize = field(toks.next(), line_no, "arc target")?;
                let w: f64 = field(toks.next(), line_no, "arc weight")?;
                if toks.next().is_some() {
                    return Err(err(line_no, "trailing tokens on arc line"));
                }
                if s == t {
                    return Err(err(line_no, "self-arc"));
                }
                if !w.is_finite() || w < 0.0 {
                    return Err(err(line_no, format!("invalid weight {w}")));
                }
                arcs.push((Arc { source: NodeId(s), target: NodeId(t), weight: w }, line_no));
            }
            other => return Err(err(line_no, format!("unknown keyword '{other}'"))),
        }
    }

    let (n, num_countries, header_line) = header.ok_or_else(|| err(1, "missing 'kep' header"))?;
    if nodes.len() != n {
        return Err(err(header_line, format!("header declares {n} nodes, found {}", nodes.len())));
    }
    for (arc, line_no) in &arcs {
        if arc.source.0 >= n || arc.target.0 >= n {
            return Err(err(*line_no, "arc endpoint out of range"));
        }
        if nodes[arc.target.0].kind == NodeKind::AltruisticDonor {
            return Err(err(*line_no, "arc into an altruistic donor"));
        }
    }
    let mut seen = std::collections::HashSet::new();
    for (arc, line_no) in &arcs {
        if !seen.insert((arc.source, arc.target)) {
            return Err(err(*line_no, format!("duplicate arc {} -> {}", arc.source, arc.target)));
        }
    }
    CompatibilityGraph::new(nodes, arcs.into_iter().map(|a| a.0).collect(), num_countries)
        .map_err(|e| err(header_line, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{sample_instance, InstanceSpec};

    #[test]
    fn round_trip_sampled_instance() {
        let spec = InstanceSpec {
            pairs_per_country: vec![12, 8],
            altruists_per_country: vec![1, 1],
            seed: 5,
            ..Default::default()
        };
        let g = sample_instance(&spec).unwrap();
        let text = write_instance(&g);
        let h = parse_instance(&text).unwrap();
        assert_eq!(g.nodes(), h.nodes());
        assert_eq!(g.arcs(), h.arcs());
        assert_eq!(write_instance(&h), text);
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let cases = [
            ("node 0 1 pair O O 0.1\n", 1),
            ("kep 1 1\nnode 0 1 pair O\n", 2),
            ("kep 1 1\nnode 0 1 pear O O 0.1\n", 2),
            ("kep 2 1\nnode 0 1 pair O O 0.1\nnode 1 1 pair O X 0.1\n", 3),
            ("kep 2 1\nnode 0 1 pair O O 0.1\nnode 1 2 pair O O 0.1\n", 3),
            ("kep 2 1\nnode 0 1 pair O O 0.1\nnode 1 1 pair O O 0.1\narc 0 5 1\n", 4),
            ("kep 2 1\nnode 0 1 pair O O 0.1\nnode 1 1 pair O O 0.1\n\narc 0 1 x\n", 5),
            ("kep 2 1\nnode 0 1 pair O O 0.1\nnode 1 1 pair O O 0.1\narc 0 1 1\narc 0 1 1\n", 5),
            ("kep 2 1\nnode 0 1 pair O O 0.1\nnode 1 1 altruist O\narc 0 1 1\n", 4),
            ("kep 3 1\nnode 0 1 pair O O 0.1\n", 1),
            ("kep 1 1\nnode 0 1 altruist O A 0.2\n", 2),
            ("kep 1 1\nwhat\n", 2),
        ];
        for (text, line) in cases {
            let e = parse_instance(text).unwrap_err();
            assert_eq!(e.line, line, "{text:?}: {e}");
        }
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let text = "# demo\nkep 2 2\n\nnode 0 1 pair A O 0.5\nnode 1 2 altruist B\narc 1 0 1\n";
        let g = parse_instance(text).unwrap();
        assert_eq!(g.num_nodes(), 2);
        assert_eq!(g.num_arcs(), 1);
        assert_eq!(g.node(NodeId(1)).kind, NodeKind::AltruisticDonor);
    }
}
