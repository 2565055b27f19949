//! Reference rewiring shared by repairs and refactorings.

use std::collections::BTreeMap;

use crate::address::{Pos, Rect};
use crate::formula::{CellRef, Expr, Formula, FormulaAst, RefLeaf};
use crate::structure::Axis;
use crate::workbook::{CellContent, Sheet};

/// Where referenced cells end up after an edit.
pub(crate) trait TargetMap {
    fn single(&self, p: Pos) -> Option<Pos>;
    fn range(&self, r: Rect) -> Option<Rect>;
}

fn corner(r: &CellRef, other: &CellRef, new: Rect) -> CellRef {
    let col = if r.col <= other.col { new.start.col } else { new.end.col };
    let row = if r.row <= other.row { new.start.row } else { new.end.row };
    r.moved_to(Pos::new(col, row))
}

/// Rewrites same-sheet references through `map`; `None` when a target vanishes.
pub(crate) fn remap_ast(ast: &FormulaAst, map: &dyn TargetMap) -> Option<FormulaAst> {
    ast.try_map_leaves(&mut |leaf: RefLeaf<'_, CellRef>| match leaf {
        RefLeaf::Single(r) if r.sheet.is_none() => map.single(r.pos()).map(|p| Expr::Ref(r.moved_to(p))).ok_or(()),
        RefLeaf::Range(a, b) if a.sheet.is_none() => map
            .range(Rect::new(a.pos(), b.pos()))
            .map(|new| Expr::Range(corner(a, b, new), corner(b, a, new)))
            .ok_or(()),
        RefLeaf::Single(r) => Ok(Expr::Ref(r.clone())),
        RefLeaf::Range(a, b) => Ok(Expr::Range(a.clone(), b.clone())),
    })
    .ok()
}

/// Like [`remap_ast`] but keeps the stored text when nothing moved.
pub(crate) fn remap_content(content: &CellContent, map: &dyn TargetMap) -> Option<CellContent> {
    match content {
        CellContent::Formula(f) => {
            let ast = remap_ast(f.ast(), map)?;
            if &ast == f.ast() {
                Some(content.clone())
            } else {
                Some(CellContent::Formula(Formula::from_ast(ast)))
            }
        }
        other => Some(other.clone()),
    }
}

/// Sorted, merged across-axis intervals.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub(crate) struct Intervals(Vec<(u32, u32)>);

impl Intervals {
    pub(crate) fn from_spans(mut spans: Vec<(u32, u32)>) -> Self {
        spans.sort_unstable();
        let mut out: Vec<(u32, u32)> = Vec::new();
        for (a, b) in spans {
            match out.last_mut() {
                Some(last) if a <= last.1 + 1 => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        Self(out)
    }

    pub(crate) fn contains(&self, v: u32) -> bool {
        self.0.iter().any(|&(a, b)| (a..=b).contains(&v))
    }

    pub(crate) fn values(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().flat_map(|&(a, b)| a..=b)
    }
}

/// Removal of lines `g0..=g1` inside the block columns (or rows), closing the gap.
pub(crate) struct LineDelete<'a> {
    pub axis: Axis,
    pub g0: u32,
    pub g1: u32,
    pub block: &'a Intervals,
}

impl LineDelete<'_> {
    fn k(&self) -> u32 {
        self.g1 - self.g0 + 1
    }

    fn in_block(&self, p: Pos) -> bool {
        self.block.contains(self.axis.across(p))
    }
}

impl TargetMap for LineDelete<'_> {
    /// Survivors follow the shift; deleted targets reconnect to the line before the gap.
    fn single(&self, p: Pos) -> Option<Pos> {
        let l = self.axis.along(p);
        if !self.in_block(p) || l < self.g0 {
            return Some(p);
        }
        let nl = l.checked_sub(self.k()).filter(|&v| v >= 1)?;
        Some(self.axis.pos(nl, self.axis.across(p)))
    }

    fn range(&self, r: Rect) -> Option<Rect> {
        if !self.in_block(r.start) && !self.in_block(r.end) {
            return Some(r);
        }
        let (s, e) = self.axis.along_span(r);
        let k = self.k();
        let s = if s < self.g0 { s } else if s <= self.g1 { self.g0 } else { s - k };
        let e = if e < self.g0 {
            e
        } else if e <= self.g1 {
            self.g0.checked_sub(1)?
        } else {
            e - k
        };
        (s <= e && s >= 1).then(|| self.axis.rect((s, e), self.axis.across_span(r)))
    }
}

/// New contents after deleting lines per `del` on `sheet`, as changed cells only.
pub(crate) fn delete_lines(sheet: &Sheet, del: &LineDelete<'_>) -> Option<BTreeMap<Pos, CellContent>> {
    let axis = del.axis;
    let k = del.k();
    let last = sheet
        .cells()
        .filter(|(p, _)| del.in_block(*p))
        .map(|(p, _)| axis.along(p))
        .max()
        .unwrap_or(0);
    let mut next: BTreeMap<Pos, CellContent> = BTreeMap::new();
    for across in del.block.values() {
        for l in del.g0..=last.max(del.g0) {
            let p = axis.pos(l, across);
            let source = axis.pos(l + k, across);
            let content = match sheet.get(source) {
                CellContent::Empty => CellContent::Empty,
                c => remap_content(c, del)?,
            };
            next.insert(p, content);
        }
    }
    for (p, c) in sheet.cells() {
        if next.contains_key(&p) || c.as_formula().is_none() {
            continue;
        }
        next.insert(p, remap_content(c, del)?);
    }
    next.retain(|p, c| sheet.get(*p) != c);
    Some(next)
}
