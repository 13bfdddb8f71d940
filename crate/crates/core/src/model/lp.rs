//! CPLEX LP text export and a small checker for the subset we emit.

use std::collections::{HashMap, HashSet};
use std::fmt::Write;

use crate::error::ParseError;

use super::{IpModel, Relation};

const TERMS_PER_LINE: usize = 8;

fn number(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

fn expression(model: &IpModel, terms: &[(super::VarId, f64)], indent: &str) -> String {
    let mut out = String::new();
    for (i, (v, c)) in terms.iter().enumerate() {
        if i > 0 && i % TERMS_PER_LINE == 0 {
            out.push('\n');
            out.push_str(indent);
        }
        let sign = if *c < 0.0 { "-" } else { "+" };
        if i == 0 {
            if *c < 0.0 {
                out.push_str("- ");
            }
        } else {
            write!(out, " {sign} ").unwrap();
        }
        let mag = c.abs();
        if mag != 1.0 {
            write!(out, "{} ", number(mag)).unwrap();
        }
        out.push_str(&model.var_name(*v));
    }
    out
}

/// Renders the model as CPLEX LP text. Constraint names are the tag name
/// followed by a running index within that tag.
pub fn export_lp_text(model: &IpModel) -> String {
    let mut out = String::new();
    writeln!(out, "\\ {} binaries, {} constraints", model.num_vars(), model.constraints.len()).unwrap();
    for note in &model.notes {
        writeln!(out, "\\ note: {note}").unwrap();
    }
    out.push_str("Maximize\n obj:");
    if !model.objective.is_empty() {
        out.push(' ');
        out.push_str(&expression(model, &model.objective, "   "));
    }
    out.push_str("\nSubject To\n");
    let mut counters: HashMap<_, usize> = HashMap::new();
    for c in &model.constraints {
        let k = counters.entry(c.tag).or_insert(0);
        let name = format!("{}_{}", c.tag.name(), k);
        *k += 1;
        writeln!(
            out,
            " {name}: {} {} {}",
            expression(model, &c.terms, "   "),
            c.relation.symbol(),
            number(c.rhs)
        )
        .unwrap();
    }
    out.push_str("Binary\n");
    for v in 0..model.num_vars() {
        writeln!(out, " {}", model.var_name(super::VarId(v))).unwrap();
    }
    out.push_str("End\n");
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpConstraint {
    pub name: String,
    pub terms: Vec<(String, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// What the checker read back from LP text.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpSummary {
    pub objective: Vec<(String, f64)>,
    pub constraints: Vec<LpConstraint>,
    pub binaries: Vec<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    Start,
    Objective,
    Constraints,
    Binary,
    End,
}

fn is_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

struct Tok {
    text: String,
    line: usize,
}

fn err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError { line, message: message.into() }
}

/// Parses `[sign] [coef] name` terms until a relation token or the end.
fn parse_terms(toks: &[Tok], pos: &mut usize) -> Result<Vec<(String, f64)>, ParseError> {
    let mut terms = Vec::new();
    while *pos < toks.len() {
        let t = &toks[*pos];
        if matches!(t.text.as_str(), "<=" | ">=" | "=" | "=<" | "=>" | "<" | ">") {
            break;
        }
        let mut coef = 1.0;
        if t.text == "+" || t.text == "-" {
            if t.text == "-" {
                coef = -1.0;
            }
            *pos += 1;
        } else if !terms.is_empty() {
            return Err(err(t.line, format!("expected '+' or '-' before '{}'", t.text)));
        }
        let t = toks.get(*pos).ok_or_else(|| err(toks.last().unwrap().line, "dangling sign"))?;
        if let Ok(x) = t.text.parse::<f64>() {
            coef *= x;
            *pos += 1;
        }
        let t = toks.get(*pos).ok_or_else(|| err(toks.last().unwrap().line, "missing variable"))?;
        if !is_name(&t.text) {
            return Err(err(t.line, format!("invalid variable name '{}'", t.text)));
        }
        terms.push((t.text.clone(), coef));
        *pos += 1;
    }
    Ok(terms)
}

/// Checks LP text of the shape produced by [`export_lp_text`]: sections in
/// order, named rows, well-formed terms, and every variable declared binary.
pub fn parse_lp_text(text: &str) -> Result<LpSummary, ParseError> {
    let mut section = Section::Start;
    let mut section_toks: Vec<(Section, Vec<Tok>)> = Vec::new();
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        last_line = line_no;
        let line = raw.split('\\').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let next = match line.to_ascii_lowercase().as_str() {
            "maximize" | "maximum" | "max" | "minimize" | "minimum" | "min" => Some(Section::Objective),
            "subject to" | "st" | "s.t." => Some(Section::Constraints),
            "binary" | "binaries" | "bin" => Some(Section::Binary),
            "end" => Some(Section::End),
            _ => None,
        };
        if let Some(next) = next {
            if next <= section {
                return Err(err(line_no, format!("section '{line}' out of order")));
            }
            section = next;
            section_toks.push((section, Vec::new()));
            continue;
        }
        if section == Section::Start || section == Section::End {
            return Err(err(line_no, "content outside a section"));
        }
        let toks = &mut section_toks.last_mut().unwrap().1;
        for word in line.split_whitespace() {
            // Split "name:" and glued relations like "<=1".
            let mut rest = word;
            while !rest.is_empty() {
                let cut = if let Some(stripped) = ["<=", ">=", "=<", "=>"].iter().find(|r| rest.starts_with(**r)) {
                    stripped.len()
                } else if rest.starts_with(['<', '>', '=', ':']) {
                    1
                } else {
                    rest.find(['<', '>', '=', ':']).unwrap_or(rest.len())
                };
                toks.push(Tok { text: rest[..cut].to_string(), line: line_no });
                rest = &rest[cut..];
            }
        }
    }
    if section != Section::End {
        return Err(err(last_line.max(1), "missing 'End'"));
    }

    let mut summary = LpSummary::default();
    for (sec, toks) in &section_toks {
        match sec {
            Section::Objective => {
                let mut pos = 0;
                if toks.len() >= 2 && toks[1].text == ":" {
                    if !is_name(&toks[0].text) {
                        return Err(err(toks[0].line, "invalid objective name"));
                    }
                    pos = 2;
                }
                summary.objective = parse_terms(toks, &mut pos)?;
                if pos != toks.len() {
                    return Err(err(toks[pos].line, "relation in objective"));
                }
            }
            Section::Constraints => {
                let mut pos = 0;
                let mut names = HashSet::new();
                while pos < toks.len() {
                    let line = toks[pos].line;
                    if toks.get(pos + 1).map(|t| t.text.as_str()) != Some(":") {
                        return Err(err(line, "constraint without a name"));
                    }
                    let name = toks[pos].text.clone();
                    if !is_name(&name) || !names.insert(name.clone()) {
                        return Err(err(line, format!("invalid or repeated constraint name '{name}'")));
                    }
                    pos += 2;
                    let terms = parse_terms(toks, &mut pos)?;
                    if terms.is_empty() {
                        return Err(err(line, format!("constraint '{name}' has no terms")));
                    }
                    let rel = toks.get(pos).ok_or_else(|| err(line, "missing relation"))?;
                    let relation = match rel.text.as_str() {
                        "<=" | "=<" | "<" => Relation::Le,
                        ">=" | "=>" | ">" => Relation::Ge,
                        "=" => Relation::Eq,
                        _ => unreachable!(),
                    };
                    pos += 1;
                    let mut sign = 1.0;
                    if matches!(toks.get(pos).map(|t| t.text.as_str()), Some("-") | Some("+")) {
                        if toks[pos].text == "-" {
                            sign = -1.0;
                        }
                        pos += 1;
                    }
                    let rhs_tok = toks.get(pos).ok_or_else(|| err(line, "missing right-hand side"))?;
                    let rhs: f64 = rhs_tok
                        .text
                        .parse()
                        .map_err(|_| err(rhs_tok.line, format!("invalid right-hand side '{}'", rhs_tok.text)))?;
                    pos += 1;
                    summary.constraints.push(LpConstraint { name, terms, relation, rhs: sign * rhs });
                }
            }
            Section::Binary => {
                for t in toks {
                    if !is_name(&t.text) {
                        return Err(err(t.line, format!("invalid binary name '{}'", t.text)));
                    }
                    summary.binaries.push(t.text.clone());
                }
            }
            Section::Start | Section::End => {}
        }
    }
    let declared: HashSet<&str> = summary.binaries.iter().map(String::as_str).collect();
    if declared.len() != summary.binaries.len() {
        return Err(err(last_line, "a variable is declared binary twice"));
    }
    let used = summary.objective.iter().chain(summary.constraints.iter().flat_map(|c| c.terms.iter()));
    for (name, _) in used {
        if !declared.contains(name.as_str()) {
            return Err(err(last_line, format!("variable '{name}' is not declared binary")));
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumeration::Cycle;
    use crate::graph::{CountryId, NodeId};
    use crate::model::build_cycle_model;

    fn two_cycles() -> IpModel {
        let c = |v: &[usize]| Cycle {
            nodes: v.iter().map(|&i| NodeId(i)).collect(),
            countries: vec![CountryId(1); v.len()],
            weight: v.len() as f64,
        };
        build_cycle_model(&[c(&[0, 1]), c(&[1, 2])], 3).unwrap()
    }

    #[test]
    fn exported_text_round_trips() {
        let m = two_cycles();
        let text = export_lp_text(&m);
        assert!(text.contains("Maximize"));
        assert!(text.contains(" obj: 2 x_c0 + 2 x_c1"));
        assert!(text.contains(" node_packing_1: x_c0 + x_c1 <= 1"));
        let s = parse_lp_text(&text).unwrap();
        assert_eq!(s.binaries.len(), 2);
        assert_eq!(s.constraints.len(), 3);
        assert_eq!(s.objective, vec![("x_c0".to_string(), 2.0), ("x_c1".to_string(), 2.0)]);
    }

    #[test]
    fn checker_rejects_malformed_text() {
        let bad = [
            "Subject To\n c: x <= 1\nMaximize\n obj: x\nBinary\n x\nEnd\n",
            "Maximize\n obj: x\nSubject To\n c: x <= 1\nBinary\n x\n",
            "Maximize\n obj: x\nSubject To\n x <= 1\nBinary\n x\nEnd\n",
            "Maximize\n obj: x\nSubject To\n c: x + <= 1\nBinary\n x\nEnd\n",
            "Maximize\n obj: x + y\nSubject To\n c: x <= 1\nBinary\n x\nEnd\n",
            "Maximize\n obj: x\nSubject To\n c: x <= one\nBinary\n x\nEnd\n",
            "Maximize\n obj: x\nSubject To\n c: x <= 1\n c: x <= 1\nBinary\n x\nEnd\n",
        ];
        for text in bad {
            assert!(parse_lp_text(text).is_err(), "{text}");
        }
    }

    #[test]
    fn long_rows_wrap_and_still_parse() {
        let terms = (0..20).map(|i| format!("x{i}")).collect::<Vec<_>>();
        let text = format!(
            "Maximize\n obj: {}\nSubject To\n c: {}\n   <= -3\nBinary\n {}\nEnd\n",
            terms.join(" + "),
            terms.join(" - 2 "),
            terms.join("\n ")
        );
        let s = parse_lp_text(&text).unwrap();
        assert_eq!(s.constraints[0].terms.len(), 20);
        assert_eq!(s.constraints[0].terms[1].1, -2.0);
        assert_eq!(s.constraints[0].rhs, -3.0);
    }
}
