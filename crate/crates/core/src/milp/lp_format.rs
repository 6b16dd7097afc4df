//! CPLEX LP text export.
//!
//! Layout: an objective section (`Minimize`/`Maximize` with `obj:`), a
//! `Subject To` section with one row per constraint named `c<index>`, a
//! `Bounds` section listing every continuous variable as `lo <= x <= hi`
//! (`-inf`/`+inf` for missing bounds), a `Binaries` section, and `End`.
//! Variables are written as `x<index>`; the objective constant is emitted as
//! a comment because the format has no slot for it.

use std::fmt::Write;

use super::model::{LinExpr, Model, Relation, Sense, VarKind};

fn fmt_num(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn fmt_expr(out: &mut String, e: &LinExpr) {
    let mut first = true;
    for &(v, c) in e.terms() {
        let sign = if c < 0.0 { "-" } else { "+" };
        if first {
            if c < 0.0 {
                out.push_str("- ");
            }
        } else {
            let _ = write!(out, " {sign} ");
        }
        let _ = write!(out, "{} x{}", fmt_num(c.abs()), v.index());
        first = false;
    }
    if first {
        out.push('0');
    }
}

pub fn write_lp(model: &Model) -> String {
    let mut out = String::new();
    let (sense, obj) = model.objective();
    let obj = obj.normalized();
    if obj.constant_term() != 0.0 {
        let _ = writeln!(out, "\\ objective constant {}", fmt_num(obj.constant_term()));
    }
    out.push_str(match sense {
        Sense::Minimize => "Minimize\n",
        Sense::Maximize => "Maximize\n",
    });
    out.push_str(" obj: ");
    fmt_expr(&mut out, &obj);
    out.push_str("\nSubject To\n");
    for (i, c) in model.constraints().iter().enumerate() {
        let _ = write!(out, " c{i}: ");
        fmt_expr(&mut out, &c.expr);
        let rel = match c.rel {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        };
        let _ = writeln!(out, " {rel} {}", fmt_num(c.rhs));
    }
    out.push_str("Bounds\n");
    for (i, v) in model.vars().iter().enumerate() {
        if v.kind == VarKind::Continuous {
            let _ = writeln!(out, " {} <= x{i} <= {}", fmt_num(v.lower), fmt_num(v.upper));
        }
    }
    let bins: Vec<String> = model
        .vars()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(i, _)| format!("x{i}"))
        .collect();
    if !bins.is_empty() {
        out.push_str("Binaries\n");
        for b in bins {
            let _ = writeln!(out, " {b}");
        }
    }
    out.push_str("End\n");
    out
}
