use std::collections::BTreeMap;

use serde_json::json;

use super::{aligned_groups, finish, group_index, range_text, Direction, RefactorError, RefactoringPlan};
use crate::address::{CellAddress, Pos, Rect};
use crate::formula::absolutize;
use crate::rewrite::{remap_content, TargetMap};
use crate::structure::{Axis, StructureModel};
use crate::workbook::{CellContent, Workbook};

fn lines_beyond(span: (u32, u32), count: u32, direction: Direction) -> Result<(u32, u32), RefactorError> {
    if direction.trailing() {
        let end = span.1.checked_add(count).ok_or(RefactorError::OutOfBounds)?;
        Ok((span.1 + 1, end))
    } else {
        let start = span.0.checked_sub(count).filter(|&s| s >= 1).ok_or(RefactorError::OutOfBounds)?;
        Ok((start, span.0 - 1))
    }
}

/// Grows a group, and every group aligned with it, by `count` lines past `direction`'s edge.
///
/// New cells must be empty unless `overwrite` is set.
pub fn extend_group(
    wb: &Workbook,
    model: &StructureModel,
    group: &str,
    count: u32,
    direction: Direction,
    overwrite: bool,
) -> Result<RefactoringPlan, RefactorError> {
    let gi = group_index(model, group)?;
    let g = &model.groups[gi];
    let params = json!({"group": g.id, "count": count, "direction": direction.as_str(), "overwrite": overwrite});
    let mut edits = BTreeMap::new();
    if count > 0 {
        let axis = direction.axis();
        let sheet = wb.sheet(&g.sheet);
        for h in aligned_groups(model, gi, axis, direction.trailing()) {
            let h = &model.groups[h];
            let lines = lines_beyond(axis.along_span(h.range), count, direction)?;
            let across = axis.across_span(h.range);
            let (a, b) = (axis.pos(lines.0, across.0), axis.pos(lines.1, across.1));
            for p in [a, b] {
                Pos::checked(p.col as i64, p.row as i64).ok_or(RefactorError::OutOfBounds)?;
            }
            let rect = Rect::new(a, b);
            if !overwrite && sheet.is_some_and(|s| s.cells_in(rect).next().is_some()) {
                return Err(RefactorError::NoSpace(range_text(model, &h.sheet, rect)));
            }
            for p in rect.cells() {
                let ast = absolutize(&h.rel, p).map_err(|_| RefactorError::OutOfBounds)?;
                edits.insert(CellAddress::new(h.sheet.clone(), p), CellContent::Formula(crate::Formula::from_ast(ast)));
            }
        }
    }
    finish(wb, "extend", params, edits, &|a| a.clone())
}

/// Cells removed from the group edges; references into them fall back to the nearest surviving line.
struct Trim<'a> {
    removed: &'a [Rect],
    axis: Axis,
    trailing: bool,
}

impl Trim<'_> {
    fn hit(&self, p: Pos) -> Option<&Rect> {
        self.removed.iter().find(|r| r.contains(p))
    }
}

impl TargetMap for Trim<'_> {
    fn single(&self, mut p: Pos) -> Option<Pos> {
        while let Some(r) = self.hit(p) {
            let (s, e) = self.axis.along_span(*r);
            let l = if self.trailing { s.checked_sub(1).filter(|&v| v >= 1)? } else { e + 1 };
            p = self.axis.pos(l, self.axis.across(p));
        }
        Some(p)
    }

    fn range(&self, r: Rect) -> Option<Rect> {
        if !self.removed.iter().any(|x| x.intersects(&r)) {
            return Some(r);
        }
        let (s, e) = (self.single(r.start)?, self.single(r.end)?);
        (s.col <= e.col && s.row <= e.row).then(|| Rect::new(s, e))
    }
}

/// Removes `count` lines at `direction`'s edge from a group and every group aligned with it.
pub fn shrink_group(
    wb: &Workbook,
    model: &StructureModel,
    group: &str,
    count: u32,
    direction: Direction,
) -> Result<RefactoringPlan, RefactorError> {
    let gi = group_index(model, group)?;
    let g = &model.groups[gi];
    let axis = direction.axis();
    let trailing = direction.trailing();
    let params = json!({"group": g.id, "count": count, "direction": direction.as_str()});
    let (lo, hi) = axis.along_span(g.range);
    if count > hi - lo {
        return Err(RefactorError::WouldEmptyGroup);
    }
    let mut edits = BTreeMap::new();
    if count > 0 {
        let mut removed = Vec::new();
        for h in aligned_groups(model, gi, axis, trailing) {
            let h = &model.groups[h];
            let (s, e) = axis.along_span(h.range);
            let lines = if trailing {
                (e.saturating_sub(count - 1).max(s), e)
            } else {
                (s, s.saturating_add(count - 1).min(e))
            };
            removed.push(axis.rect(lines, axis.across_span(h.range)));
        }
        for r in &removed {
            for p in r.cells() {
                edits.insert(CellAddress::new(g.sheet.clone(), p), CellContent::Empty);
            }
        }
        let map = Trim { removed: &removed, axis, trailing };
        if let Some(sheet) = wb.sheet(&g.sheet) {
            for (p, c) in sheet.formulas().map(|(p, _)| (p, sheet.get(p))) {
                if removed.iter().any(|r| r.contains(p)) {
                    continue;
                }
                let next = remap_content(c, &map).ok_or(RefactorError::OutOfBounds)?;
                if &next != c {
                    edits.insert(CellAddress::new(g.sheet.clone(), p), next);
                }
            }
        }
    }
    finish(wb, "shrink", params, edits, &|a| a.clone())
}
