//! Plain-text listing of a [`QcqpProblem`] for inspection with other tools.
//!
//! ```text
//! qcqp 3 1
//! var 0 v:v 0.00001 0.99999
//! var 1 p:s0 0 0.3
//! objective 1 1
//! constraint bellman s0 tau
//! P 0 2 0.5
//! q 1 -1
//! r 0
//! end
//! ```
//!
//! `P` lines give the upper triangle of the symmetric matrix. Numbers use the
//! shortest decimal form that reads back to the same `f64`.

use std::fmt::Write as _;

use thiserror::Error;

use super::qcqp::{ConstraintKind, QcqpConstraint, QcqpProblem, QuadForm};
use crate::model::StateId;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {message}")]
pub struct DumpError {
    pub line: usize,
    pub message: String,
}

pub fn write_qcqp(p: &QcqpProblem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "qcqp {} {}", p.num_vars(), p.num_params);
    for i in 0..p.num_vars() {
        let _ = writeln!(out, "var {i} {} {} {}", p.names[i], p.lower[i], p.upper[i]);
    }
    for &(i, c) in &p.objective {
        let _ = writeln!(out, "objective {i} {c}");
    }
    for c in &p.constraints {
        match &c.kind {
            ConstraintKind::Bellman { state, action } => {
                let _ = writeln!(out, "constraint bellman {} {action}", state.0);
            }
            ConstraintKind::WellDefined => {
                let _ = writeln!(out, "constraint graph");
            }
        }
        for &(i, j, v) in &c.form.quad {
            let _ = writeln!(out, "P {i} {j} {v}");
        }
        for &(i, v) in &c.form.linear {
            let _ = writeln!(out, "q {i} {v}");
        }
        let _ = writeln!(out, "r {}", c.form.constant);
        out.push_str("end\n");
    }
    out
}

struct Cursor<'a> {
    line: usize,
    words: Vec<&'a str>,
}

impl Cursor<'_> {
    fn err(&self, message: impl Into<String>) -> DumpError {
        DumpError {
            line: self.line,
            message: message.into(),
        }
    }

    fn arity(&self, n: usize) -> Result<(), DumpError> {
        if self.words.len() == n {
            Ok(())
        } else {
            Err(self.err(format!("expected {} fields, found {}", n, self.words.len())))
        }
    }

    fn index(&self, k: usize, bound: usize) -> Result<usize, DumpError> {
        let i: usize = self.words[k].parse().map_err(|_| self.err(format!("bad index `{}`", self.words[k])))?;
        if i >= bound {
            return Err(self.err(format!("index {i} out of range")));
        }
        Ok(i)
    }

    fn number(&self, k: usize) -> Result<f64, DumpError> {
        self.words[k].parse().map_err(|_| self.err(format!("bad number `{}`", self.words[k])))
    }
}

pub fn parse_qcqp(text: &str) -> Result<QcqpProblem, DumpError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| Cursor {
            line: i + 1,
            words: l.split_whitespace().collect(),
        })
        .filter(|c| !c.words.is_empty());
    let head = lines.next().ok_or(DumpError {
        line: 0,
        message: "empty listing".into(),
    })?;
    if head.words[0] != "qcqp" {
        return Err(head.err("expected `qcqp` header"));
    }
    head.arity(3)?;
    let n = head.index(1, usize::MAX)?;
    let num_params = head.index(2, n + 1)?;
    let mut p = QcqpProblem {
        names: Vec::with_capacity(n),
        lower: Vec::with_capacity(n),
        upper: Vec::with_capacity(n),
        objective: Vec::new(),
        constraints: Vec::new(),
        num_params,
    };
    let mut open: Option<QcqpConstraint> = None;
    for c in lines {
        match (c.words[0], open.as_mut()) {
            ("var", None) => {
                c.arity(5)?;
                if c.index(1, n)? != p.names.len() {
                    return Err(c.err("variables out of order"));
                }
                p.names.push(c.words[2].to_string());
                p.lower.push(c.number(3)?);
                p.upper.push(c.number(4)?);
            }
            ("objective", None) => {
                c.arity(3)?;
                p.objective.push((c.index(1, n)?, c.number(2)?));
            }
            ("constraint", None) => {
                let kind = match c.words.get(1) {
                    Some(&"bellman") => {
                        c.arity(4)?;
                        ConstraintKind::Bellman {
                            state: StateId(c.index(2, usize::MAX)?),
                            action: c.words[3].to_string(),
                        }
                    }
                    Some(&"graph") => {
                        c.arity(2)?;
                        ConstraintKind::WellDefined
                    }
                    _ => return Err(c.err("unknown constraint kind")),
                };
                open = Some(QcqpConstraint {
                    kind,
                    form: QuadForm::default(),
                });
            }
            ("P", Some(k)) => {
                c.arity(4)?;
                k.form.quad.push((c.index(1, n)?, c.index(2, n)?, c.number(3)?));
            }
            ("q", Some(k)) => {
                c.arity(3)?;
                k.form.linear.push((c.index(1, n)?, c.number(2)?));
            }
            ("r", Some(k)) => {
                c.arity(2)?;
                k.form.constant = c.number(1)?;
            }
            ("end", Some(_)) => p.constraints.push(open.take().expect("open block")),
            (w, _) => return Err(c.err(format!("unexpected `{w}`"))),
        }
    }
    if open.is_some() {
        return Err(DumpError {
            line: text.lines().count(),
            message: "unterminated constraint".into(),
        });
    }
    if p.names.len() != n {
        return Err(DumpError {
            line: text.lines().count(),
            message: format!("declared {n} variables, listed {}", p.names.len()),
        });
    }
    Ok(p)
}
