//! Formula syntax: parsing, canonical printing and host-relative normalization.
//!
//! [`Expr`] is generic over its reference leaf so the same tree shape serves
//! both the parsed form ([`FormulaAst`], absolute grid coordinates) and the
//! host-relative form ([`RelativeFormula`], offsets from the host cell) that
//! is used as the grouping key.

mod parser;
mod printer;
mod relative;

use std::fmt;
use std::sync::Arc;

pub use parser::{parse_formula, FormulaParseError};
pub use printer::{format_number, print_formula};
pub use relative::{absolutize, relativize, Coord, RelRef, RelativeFormula, RelativizeError};

use crate::address::{Pos, Rect};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Concat,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
            BinaryOp::Concat => "&",
            BinaryOp::Eq => "=",
            BinaryOp::Ne => "<>",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
        }
    }

    /// Binding strength; higher binds tighter.
    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 1,
            BinaryOp::Concat => 2,
            BinaryOp::Add | BinaryOp::Sub => 3,
            BinaryOp::Mul | BinaryOp::Div => 4,
            BinaryOp::Pow => 5,
        }
    }
}

/// A formula expression tree over reference leaves of type `R`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr<R> {
    Number(f64),
    Text(String),
    Bool(bool),
    Ref(R),
    Range(R, R),
    Unary(UnaryOp, Box<Expr<R>>),
    Binary(BinaryOp, Box<Expr<R>>, Box<Expr<R>>),
    Call(String, Vec<Expr<R>>),
    Paren(Box<Expr<R>>),
}

/// A reference as written: absolute grid coordinates plus `$` anchors.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CellRef {
    /// Sheet qualifier (`Other!A1`); `None` means the host's sheet.
    pub sheet: Option<String>,
    pub col: u32,
    pub row: u32,
    pub col_abs: bool,
    pub row_abs: bool,
}

impl CellRef {
    pub fn relative(pos: Pos) -> Self {
        Self { sheet: None, col: pos.col, row: pos.row, col_abs: false, row_abs: false }
    }

    pub fn pos(&self) -> Pos {
        Pos::new(self.col, self.row)
    }

    /// Same anchors, new coordinates.
    pub fn moved_to(&self, pos: Pos) -> Self {
        Self { col: pos.col, row: pos.row, ..self.clone() }
    }
}

pub type FormulaAst = Expr<CellRef>;

/// A reference leaf borrowed from a tree, in source order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RefLeaf<'a, R> {
    Single(&'a R),
    Range(&'a R, &'a R),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlotShape {
    Cell,
    Range,
}

/// Position (1-based, left to right) of a reference leaf within a formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ReferenceSlot {
    pub index: usize,
    pub shape: SlotShape,
}

impl<R> Expr<R> {
    /// Reference leaves in left-to-right source order.
    pub fn leaves(&self) -> Vec<RefLeaf<'_, R>> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<RefLeaf<'a, R>>) {
        match self {
            Expr::Ref(r) => out.push(RefLeaf::Single(r)),
            Expr::Range(a, b) => out.push(RefLeaf::Range(a, b)),
            Expr::Unary(_, e) | Expr::Paren(e) => e.collect_leaves(out),
            Expr::Binary(_, l, r) => {
                l.collect_leaves(out);
                r.collect_leaves(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_leaves(out)),
            Expr::Number(_) | Expr::Text(_) | Expr::Bool(_) => {}
        }
    }

    pub fn slots(&self) -> Vec<ReferenceSlot> {
        self.leaves()
            .iter()
            .enumerate()
            .map(|(i, leaf)| ReferenceSlot {
                index: i + 1,
                shape: match leaf {
                    RefLeaf::Single(_) => SlotShape::Cell,
                    RefLeaf::Range(..) => SlotShape::Range,
                },
            })
            .collect()
    }

    /// Rebuilds the tree, replacing every reference leaf with the node returned by `f`.
    pub fn try_map_leaves<S, E, F>(&self, f: &mut F) -> Result<Expr<S>, E>
    where
        F: FnMut(RefLeaf<'_, R>) -> Result<Expr<S>, E>,
    {
        Ok(match self {
            Expr::Number(n) => Expr::Number(*n),
            Expr::Text(t) => Expr::Text(t.clone()),
            Expr::Bool(b) => Expr::Bool(*b),
            Expr::Ref(r) => f(RefLeaf::Single(r))?,
            Expr::Range(a, b) => f(RefLeaf::Range(a, b))?,
            Expr::Unary(op, e) => Expr::Unary(*op, Box::new(e.try_map_leaves(f)?)),
            Expr::Binary(op, l, r) => {
                let l = l.try_map_leaves(f)?;
                let r = r.try_map_leaves(f)?;
                Expr::Binary(*op, Box::new(l), Box::new(r))
            }
            Expr::Call(name, args) => Expr::Call(
                name.clone(),
                args.iter().map(|a| a.try_map_leaves(f)).collect::<Result<_, _>>()?,
            ),
            Expr::Paren(e) => Expr::Paren(Box::new(e.try_map_leaves(f)?)),
        })
    }

    /// Per-corner reference mapping.
    pub fn try_map_refs<S, E, F>(&self, f: &mut F) -> Result<Expr<S>, E>
    where
        F: FnMut(&R) -> Result<S, E>,
    {
        self.try_map_leaves(&mut |leaf: RefLeaf<'_, R>| match leaf {
            RefLeaf::Single(r) => Ok(Expr::Ref(f(r)?)),
            RefLeaf::Range(a, b) => Ok(Expr::Range(f(a)?, f(b)?)),
        })
    }

    fn children(&self) -> Vec<&Expr<R>> {
        match self {
            Expr::Unary(_, e) | Expr::Paren(e) => vec![e],
            Expr::Binary(_, l, r) => vec![l, r],
            Expr::Call(_, args) => args.iter().collect(),
            _ => Vec::new(),
        }
    }

    /// Node reached by following child indices from the root.
    pub fn node_at(&self, path: &[usize]) -> Option<&Expr<R>> {
        match path.split_first() {
            None => Some(self),
            Some((&i, rest)) => self.children().get(i).and_then(|c| c.node_at(rest)),
        }
    }

    /// All nodes with their paths, in pre-order.
    pub fn subexpressions(&self) -> Vec<(Vec<usize>, &Expr<R>)> {
        let mut out = Vec::new();
        let mut stack = vec![(Vec::new(), self)];
        while let Some((path, node)) = stack.pop() {
            let children = node.children();
            for (i, c) in children.into_iter().enumerate().rev() {
                let mut p = path.clone();
                p.push(i);
                stack.push((p, c));
            }
            out.push((path, node));
        }
        out
    }
}

impl<R: Clone> Expr<R> {
    /// Copy of the tree with the node at `path` replaced; `None` if the path is invalid.
    pub fn replace_at(&self, path: &[usize], replacement: Expr<R>) -> Option<Expr<R>> {
        let Some((&i, rest)) = path.split_first() else {
            return Some(replacement);
        };
        let sub = |e: &Expr<R>| e.replace_at(rest, replacement.clone());
        Some(match self {
            Expr::Unary(op, e) if i == 0 => Expr::Unary(*op, Box::new(sub(e)?)),
            Expr::Paren(e) if i == 0 => Expr::Paren(Box::new(sub(e)?)),
            Expr::Binary(op, l, r) if i == 0 => Expr::Binary(*op, Box::new(sub(l)?), r.clone()),
            Expr::Binary(op, l, r) if i == 1 => Expr::Binary(*op, l.clone(), Box::new(sub(r)?)),
            Expr::Call(name, args) if i < args.len() => {
                let mut args = args.clone();
                args[i] = sub(&args[i])?;
                Expr::Call(name.clone(), args)
            }
            _ => return None,
        })
    }
}

impl FormulaAst {
    /// Reference slots with the rectangle each one refers to, in source order.
    pub fn reference_slots(&self) -> Vec<(ReferenceSlot, Option<String>, Rect)> {
        self.leaves()
            .into_iter()
            .zip(self.slots())
            .map(|(leaf, slot)| match leaf {
                RefLeaf::Single(r) => (slot, r.sheet.clone(), Rect::cell(r.pos())),
                RefLeaf::Range(a, b) => (slot, a.sheet.clone(), Rect::new(a.pos(), b.pos())),
            })
            .collect()
    }
}

/// A parsed formula as stored in a cell: the source text plus its tree.
///
/// Equality is by text.
#[derive(Debug, Clone)]
pub struct Formula {
    text: String,
    ast: Arc<FormulaAst>,
}

impl Formula {
    pub fn parse(text: &str) -> Result<Self, FormulaParseError> {
        let ast = parse_formula(text)?;
        Ok(Self { text: text.to_string(), ast: Arc::new(ast) })
    }

    /// Formula whose text is the canonical print of `ast`.
    pub fn from_ast(ast: FormulaAst) -> Self {
        Self { text: print_formula(&ast), ast: Arc::new(ast) }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn ast(&self) -> &FormulaAst {
        &self.ast
    }

    pub fn canonical(&self) -> String {
        print_formula(&self.ast)
    }
}

impl PartialEq for Formula {
    fn eq(&self, other: &Self) -> bool {
        self.text == other.text
    }
}

impl Eq for Formula {}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}
