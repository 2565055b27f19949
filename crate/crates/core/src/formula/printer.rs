use std::fmt::Write;

use super::{BinaryOp, CellRef, Expr, FormulaAst, UnaryOp};
use crate::address::{column_name, quote_sheet};

const LEVEL_UNARY: u8 = 6;
const LEVEL_ATOM: u8 = 7;

/// Canonical text: no spaces, uppercase names, minimal parentheses.
pub fn print_formula(ast: &FormulaAst) -> String {
    let mut out = String::from("=");
    write_expr(ast, &mut out, &mut |r: &CellRef, out: &mut String| write_cell_ref(r, out));
    out
}

/// Shortest decimal text that reads back as the same double.
pub fn format_number(v: f64) -> String {
    // Display for f64 is shortest round-trip and never uses exponents.
    format!("{v}")
}

pub(crate) fn write_cell_ref(r: &CellRef, out: &mut String) {
    if let Some(sheet) = &r.sheet {
        out.push_str(&quote_sheet(sheet));
        out.push('!');
    }
    if r.col_abs {
        out.push('$');
    }
    out.push_str(&column_name(r.col));
    if r.row_abs {
        out.push('$');
    }
    let _ = write!(out, "{}", r.row);
}

fn level<R>(e: &Expr<R>) -> u8 {
    match e {
        Expr::Binary(op, ..) => op.precedence(),
        Expr::Unary(..) => LEVEL_UNARY,
        Expr::Number(n) if n.is_sign_negative() => LEVEL_UNARY,
        _ => LEVEL_ATOM,
    }
}

fn write_child<R, F>(e: &Expr<R>, min_level: u8, out: &mut String, write_ref: &mut F)
where
    F: FnMut(&R, &mut String),
{
    if level(e) < min_level {
        out.push('(');
        write_expr(e, out, write_ref);
        out.push(')');
    } else {
        write_expr(e, out, write_ref);
    }
}

/// Writes any expression tree, delegating reference leaves to `write_ref`.
pub(crate) fn write_expr<R, F>(e: &Expr<R>, out: &mut String, write_ref: &mut F)
where
    F: FnMut(&R, &mut String),
{
    match e {
        Expr::Number(n) => out.push_str(&format_number(*n)),
        Expr::Text(t) => {
            out.push('"');
            out.push_str(&t.replace('"', "\"\""));
            out.push('"');
        }
        Expr::Bool(b) => out.push_str(if *b { "TRUE" } else { "FALSE" }),
        Expr::Ref(r) => write_ref(r, out),
        Expr::Range(a, b) => {
            write_ref(a, out);
            out.push(':');
            write_ref(b, out);
        }
        Expr::Unary(op, child) => {
            out.push(match op {
                UnaryOp::Neg => '-',
                UnaryOp::Plus => '+',
            });
            write_child(child, LEVEL_UNARY, out, write_ref);
        }
        Expr::Binary(op, l, r) => {
            let p = op.precedence();
            if *op == BinaryOp::Pow {
                // pow := unary ["^" pow]
                write_child(l, LEVEL_UNARY, out, write_ref);
                out.push('^');
                write_child(r, p, out, write_ref);
            } else {
                write_child(l, p, out, write_ref);
                out.push_str(op.symbol());
                write_child(r, p + 1, out, write_ref);
            }
        }
        Expr::Call(name, args) => {
            out.push_str(&name.to_ascii_uppercase());
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_expr(a, out, write_ref);
            }
            out.push(')');
        }
        Expr::Paren(inner) => {
            out.push('(');
            write_expr(inner, out, write_ref);
            out.push(')');
        }
    }
}
