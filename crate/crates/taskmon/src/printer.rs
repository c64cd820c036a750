//! Canonical text form of a specification.
//!
//! Compound nodes are fully parenthesized so that the printed text re-parses
//! to a structurally identical AST regardless of operator precedence.

use std::fmt::Write;

use crate::ast::SpecAst;
use crate::predicate::PredicateAst;

pub fn print_spec(ast: &SpecAst) -> String {
    let mut out = String::new();
    write_spec(&mut out, ast);
    out
}

fn write_spec(out: &mut String, ast: &SpecAst) {
    match ast {
        SpecAst::Achieve(p) => {
            out.push_str("achieve ");
            write_pred(out, p);
        }
        SpecAst::Ensuring(s, p) => {
            out.push('(');
            write_spec(out, s);
            out.push_str(" ensuring ");
            write_pred(out, p);
            out.push(')');
        }
        SpecAst::Seq(a, b) => {
            out.push('(');
            write_spec(out, a);
            out.push_str("; ");
            write_spec(out, b);
            out.push(')');
        }
        SpecAst::Choice(a, b) => {
            out.push('(');
            write_spec(out, a);
            out.push_str(" or ");
            write_spec(out, b);
            out.push(')');
        }
    }
}

pub(crate) fn write_pred(out: &mut String, p: &PredicateAst) {
    match p {
        PredicateAst::Atom { name, params } => {
            out.push_str(name);
            if !params.is_empty() {
                out.push('(');
                for (i, x) in params.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    let _ = write!(out, "{x}");
                }
                out.push(')');
            }
        }
        PredicateAst::And(l, r) => {
            out.push('(');
            write_pred(out, l);
            out.push_str(" and ");
            write_pred(out, r);
            out.push(')');
        }
        PredicateAst::Or(l, r) => {
            out.push('(');
            write_pred(out, l);
            out.push_str(" or ");
            write_pred(out, r);
            out.push(')');
        }
    }
}

pub fn print_pred(p: &PredicateAst) -> String {
    let mut out = String::new();
    write_pred(&mut out, p);
    out
}
