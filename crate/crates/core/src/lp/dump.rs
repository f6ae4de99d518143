//! Text dump of a [`LinearProgram`] in CPLEX LP layout.
//!
//! Variables are named `x<j>`, inequality rows `le<r>` and equality rows
//! `eq<r>`. Numbers are written in shortest round-trip form.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use super::{LinearProgram, Row};
use crate::error::{Error, Result};

fn write_terms(out: &mut String, coeffs: &[(usize, f64)]) {
    if coeffs.is_empty() {
        out.push_str(" 0 x0");
        return;
    }
    for (n, &(j, a)) in coeffs.iter().enumerate() {
        let sign = if a < 0.0 { '-' } else { '+' };
        if n == 0 && sign == '+' {
            let _ = write!(out, " {} x{j}", a.abs());
        } else {
            let _ = write!(out, " {sign} {} x{j}", a.abs());
        }
    }
}

fn write_row(out: &mut String, name: &str, row: &Row, op: &str) {
    let _ = write!(out, " {name}:");
    write_terms(out, &row.coeffs);
    let _ = writeln!(out, " {op} {}", row.rhs);
}

pub fn write_lp_format(lp: &LinearProgram, comment: &str) -> String {
    let mut out = String::new();
    for line in comment.lines() {
        let _ = writeln!(out, "\\ {line}");
    }
    out.push_str("Minimize\n obj:");
    let terms: Vec<(usize, f64)> = lp
        .objective()
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, c)| c != 0.0)
        .collect();
    write_terms(&mut out, &terms);
    out.push_str("\nSubject To\n");
    for (r, row) in lp.ineq_rows().iter().enumerate() {
        write_row(&mut out, &format!("le{r}"), row, "<=");
    }
    for (r, row) in lp.eq_rows().iter().enumerate() {
        write_row(&mut out, &format!("eq{r}"), row, "=");
    }
    out.push_str("Bounds\n");
    for (j, &l) in lp.lower_bounds().iter().enumerate() {
        if l == f64::NEG_INFINITY {
            let _ = writeln!(out, " x{j} free");
        } else {
            let _ = writeln!(out, " x{j} >= {l}");
        }
    }
    out.push_str("End\n");
    out
}

pub fn write_lp_file(lp: &LinearProgram, comment: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(write_lp_format(lp, comment).as_bytes())
        .map_err(|e| Error::io(path, e))
}
