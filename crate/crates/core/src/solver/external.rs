//! Hand a model to an external MIP solver through LP files.

use std::collections::HashMap;
use std::path::Path;
use std::process::Command;

use crate::error::SolverError;
use crate::model::{export_lp_text, IpModel};

use super::Assignment;

/// Writes the model to `dir/model.lp`, runs `command` through the shell
/// with `{lp}` and `{sol}` replaced by the LP and solution paths, and reads
/// back `<name> <value>` lines from the solution file. Variables missing
/// from the file are taken as zero.
pub fn solve_external(model: &IpModel, command: &str, dir: &Path) -> Result<Assignment, SolverError> {
    let ext = |e: std::io::Error| SolverError::External(e.to_string());
    let lp = dir.join("model.lp");
    let sol = dir.join("model.sol");
    std::fs::write(&lp, export_lp_text(model)).map_err(ext)?;
    let cmd = command
        .replace("{lp}", &lp.display().to_string())
        .replace("{sol}", &sol.display().to_string());
    let status = Command::new("sh").arg("-c").arg(&cmd).status().map_err(ext)?;
    if !status.success() {
        return Err(SolverError::External(format!("'{cmd}' exited with {status}")));
    }
    let text = std::fs::read_to_string(&sol).map_err(ext)?;
    let names: HashMap<String, usize> =
        (0..model.num_vars()).map(|i| (model.var_name(crate::model::VarId(i)), i)).collect();
    let mut values = vec![false; model.num_vars()];
    for (no, line) in text.lines().enumerate() {
        let mut toks = line.split_whitespace();
        let (Some(name), Some(value)) = (toks.next(), toks.next()) else {
            continue;
        };
        let Some(&i) = names.get(name) else {
            continue;
        };
        let v: f64 = value
            .parse()
            .map_err(|_| SolverError::External(format!("solution line {}: bad value '{value}'", no + 1)))?;
        values[i] = v > 0.5;
    }
    if !model.is_feasible(&values) {
        return Err(SolverError::External("returned assignment violates the model".into()));
    }
    let objective = model.objective_value(&values);
    Ok(Assignment { values, objective })
}
