//! Program exporters: lossless JSON, SDPA sparse format, and a human-readable listing.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{Cone, ConicProgram};
use crate::error::{Error, Result};

/// Output format of [`export`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Json,
    Sdpa,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ExportFormat::Json),
            "sdpa" => Ok(ExportFormat::Sdpa),
            other => Err(Error::InvalidArgument(format!(
                "unknown export format {other:?}"
            ))),
        }
    }
}

/// Renders a program in the requested format.
pub fn export(prog: &ConicProgram, format: ExportFormat) -> Result<String> {
    match format {
        ExportFormat::Json => Ok(prog.to_json()),
        ExportFormat::Sdpa => to_sdpa(prog),
    }
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

/// SDPA sparse format for `minimize c'x s.t. sum_i F_i x_i - F_0 >= 0`.
///
/// Each PSD cone becomes one matrix block; all equality and nonnegative rows share one
/// trailing diagonal block (negative size), with every equality row written as a pair of
/// opposite inequalities. Since `b - A x = sum_i (-A_i) x_i - (-b)`, the constraint
/// matrices are `F_0 = -b` and `F_i = -A_i` arranged by block.
fn to_sdpa(prog: &ConicProgram) -> Result<String> {
    if prog.cones.iter().any(|c| matches!(c, Cone::SecondOrder(_))) {
        return Err(Error::UnsupportedExport(
            "second-order cones cannot be written in SDPA format".into(),
        ));
    }
    // (block, i, j, sign) for each program row; equality rows appear twice in the LP block
    let mut targets: Vec<Vec<(usize, usize, usize, f64)>> = vec![Vec::new(); prog.num_rows()];
    let mut structure: Vec<i64> = Vec::new();
    let mut lp_rows: Vec<(usize, f64)> = Vec::new();
    let mut row = 0;
    for cone in &prog.cones {
        match *cone {
            Cone::PsdExportOnly(side) => {
                structure.push(side as i64);
                let blk = structure.len();
                for i in 0..side {
                    for j in i..side {
                        targets[row].push((blk, i + 1, j + 1, 1.0));
                        row += 1;
                    }
                }
            }
            Cone::Zero(d) => {
                for _ in 0..d {
                    lp_rows.push((row, 1.0));
                    lp_rows.push((row, -1.0));
                    row += 1;
                }
            }
            Cone::Nonneg(d) => {
                for _ in 0..d {
                    lp_rows.push((row, 1.0));
                    row += 1;
                }
            }
            Cone::SecondOrder(_) => unreachable!(),
        }
    }
    if !lp_rows.is_empty() {
        structure.push(-(lp_rows.len() as i64));
        let blk = structure.len();
        for (k, &(r, sign)) in lp_rows.iter().enumerate() {
            targets[r].push((blk, k + 1, k + 1, sign));
        }
    }
    let mut entries: Vec<(usize, usize, usize, usize, f64)> = Vec::new();
    for (r, &bv) in prog.b.iter().enumerate() {
        if bv != 0.0 {
            for &(blk, i, j, sign) in &targets[r] {
                entries.push((0, blk, i, j, -sign * bv));
            }
        }
    }
    for &(r, c, v) in &prog.a.entries {
        for &(blk, i, j, sign) in &targets[r] {
            entries.push((c + 1, blk, i, j, -sign * v));
        }
    }
    entries.sort_by(|a, b| (a.0, a.1, a.2, a.3).cmp(&(b.0, b.1, b.2, b.3)));

    let mut out = String::new();
    writeln!(
        out,
        "\"conic program: {} variables, {} blocks",
        prog.num_vars(),
        structure.len()
    )
    .unwrap();
    writeln!(out, "{}", prog.num_vars()).unwrap();
    writeln!(out, "{}", structure.len()).unwrap();
    let blocks: Vec<String> = structure.iter().map(i64::to_string).collect();
    writeln!(out, "{}", blocks.join(" ")).unwrap();
    let costs: Vec<String> = prog.objective.iter().map(|&v| num(v)).collect();
    writeln!(out, "{}", costs.join(" ")).unwrap();
    for (mat, blk, i, j, v) in entries {
        writeln!(out, "{mat} {blk} {i} {j} {}", num(v)).unwrap();
    }
    Ok(out)
}

/// Human-readable listing of a program, one constraint row per line.
pub fn pretty_print(prog: &ConicProgram) -> String {
    let mut out = String::new();
    let terms = |coeffs: &[(usize, f64)]| -> String {
        if coeffs.is_empty() {
            return "0".into();
        }
        coeffs
            .iter()
            .map(|&(j, v)| format!("{v:+} x{j}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let cost: Vec<(usize, f64)> = prog
        .objective
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(j, v)| (j, *v))
        .collect();
    writeln!(out, "minimize {}", terms(&cost)).unwrap();
    writeln!(out, "over {} variables subject to", prog.num_vars()).unwrap();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); prog.num_rows()];
    for &(r, c, v) in &prog.a.entries {
        rows[r].push((c, -v));
    }
    let mut r = 0;
    for (k, cone) in prog.cones.iter().enumerate() {
        writeln!(out, "  cone {k}: {cone:?}").unwrap();
        for _ in 0..cone.rows() {
            writeln!(out, "    [{r}] {:+} {}", prog.b[r], terms(&rows[r])).unwrap();
            r += 1;
        }
    }
    out
}
