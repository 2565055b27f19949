use std::fmt::Write;

use thiserror::Error;

use super::printer::write_expr;
use super::{CellRef, Expr, FormulaAst, RefLeaf};
use crate::address::{CellAddress, Pos, Rect};

/// One axis of a host-relative reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Coord {
    /// Signed distance from the host's coordinate.
    Offset(i64),
    /// `$`-anchored coordinate.
    Abs(u32),
}

impl Coord {
    fn resolve(self, host: u32) -> i64 {
        match self {
            Coord::Offset(d) => host as i64 + d,
            Coord::Abs(v) => v as i64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RelRef {
    pub col: Coord,
    pub row: Coord,
}

impl RelRef {
    /// Target position when instantiated at `host`; `None` off the grid.
    pub fn at(&self, host: Pos) -> Option<Pos> {
        Pos::checked(self.col.resolve(host.col), self.row.resolve(host.row))
    }
}

pub type RelativeFormula = Expr<RelRef>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RelativizeError {
    #[error("cross-sheet reference in formula at {0}")]
    CrossSheetRef(CellAddress),
    #[error("reference walks off the grid when placed at {0}")]
    OutOfBounds(Pos),
}

/// Rewrites each relative coordinate as an offset from `host`; `$` coordinates become `Abs`.
pub fn relativize(ast: &FormulaAst, host: &CellAddress) -> Result<RelativeFormula, RelativizeError> {
    ast.try_map_refs(&mut |r: &CellRef| {
        if r.sheet.is_some() {
            return Err(RelativizeError::CrossSheetRef(host.clone()));
        }
        Ok(RelRef {
            col: if r.col_abs { Coord::Abs(r.col) } else { Coord::Offset(r.col as i64 - host.pos.col as i64) },
            row: if r.row_abs { Coord::Abs(r.row) } else { Coord::Offset(r.row as i64 - host.pos.row as i64) },
        })
    })
}

/// Inverse of [`relativize`]: places a relative formula at `host`.
pub fn absolutize(rf: &RelativeFormula, host: Pos) -> Result<FormulaAst, RelativizeError> {
    rf.try_map_refs(&mut |r: &RelRef| {
        let target = r.at(host).ok_or(RelativizeError::OutOfBounds(host))?;
        Ok(CellRef {
            sheet: None,
            col: target.col,
            row: target.row,
            col_abs: matches!(r.col, Coord::Abs(_)),
            row_abs: matches!(r.row, Coord::Abs(_)),
        })
    })
}

impl RelativeFormula {
    /// Rectangles referenced by each slot when placed at `host`, in source order.
    pub fn instantiate_slots(&self, host: Pos) -> Vec<Option<Rect>> {
        self.leaves()
            .into_iter()
            .map(|leaf| match leaf {
                RefLeaf::Single(r) => r.at(host).map(Rect::cell),
                RefLeaf::Range(a, b) => Some(Rect::new(a.at(host)?, b.at(host)?)),
            })
            .collect()
    }

    /// R1C1-style canonical text; the equality key for grouping.
    pub fn key(&self) -> String {
        let mut out = String::from("=");
        write_expr(self, &mut out, &mut write_r1c1);
        out
    }

    /// Like [`key`](Self::key) with numeric and text literals replaced by `#`.
    pub fn shape_key(&self) -> String {
        let wildcarded = wildcard_literals(self);
        let mut out = String::from("=");
        write_expr(&wildcarded, &mut out, &mut write_r1c1);
        out
    }
}

fn wildcard_literals(e: &RelativeFormula) -> RelativeFormula {
    match e {
        Expr::Number(_) | Expr::Text(_) => Expr::Text("#".into()),
        Expr::Bool(_) | Expr::Ref(_) | Expr::Range(..) => e.clone(),
        Expr::Unary(op, c) => Expr::Unary(*op, Box::new(wildcard_literals(c))),
        Expr::Binary(op, l, r) => Expr::Binary(*op, Box::new(wildcard_literals(l)), Box::new(wildcard_literals(r))),
        Expr::Call(n, args) => Expr::Call(n.clone(), args.iter().map(wildcard_literals).collect()),
        Expr::Paren(c) => Expr::Paren(Box::new(wildcard_literals(c))),
    }
}

fn write_r1c1(r: &RelRef, out: &mut String) {
    let mut axis = |tag: char, c: Coord| {
        out.push(tag);
        match c {
            Coord::Offset(0) => {}
            Coord::Offset(d) => {
                let _ = write!(out, "[{d}]");
            }
            Coord::Abs(v) => {
                let _ = write!(out, "{v}");
            }
        }
    };
    axis('R', r.row);
    axis('C', r.col);
}
