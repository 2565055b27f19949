use std::collections::BTreeMap;

use serde_json::json;

use super::{finish, group_index, RefactorError, RefactoringPlan};
use crate::address::{CellAddress, Pos, Rect};
use crate::formula::{print_formula, CellRef, Expr, Formula, FormulaAst};
use crate::structure::{Axis, StructureModel};
use crate::workbook::{CellContent, Workbook};

/// Subexpression to extract into a helper group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SplitPoint {
    /// Child indices from the root of the shared formula.
    Path(Vec<usize>),
    /// Formula text of the subexpression, with or without row numbers (`B+C`, `B2+C2`).
    Text(String),
}

impl SplitPoint {
    fn describe(&self) -> String {
        match self {
            SplitPoint::Path(p) => p.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("."),
            SplitPoint::Text(t) => t.clone(),
        }
    }
}

fn strip_rows(text: &str) -> String {
    let mut out = String::new();
    let mut after_letter = false;
    for ch in text.chars().filter(|c| !c.is_whitespace() && *c != '$') {
        if ch.is_ascii_digit() && after_letter {
            continue;
        }
        after_letter = ch.is_ascii_alphabetic() || (after_letter && ch.is_ascii_digit());
        out.push(ch.to_ascii_uppercase());
    }
    out
}

fn expr_text(e: &FormulaAst) -> String {
    print_formula(e)[1..].to_string()
}

fn locate(ast: &FormulaAst, at: &SplitPoint) -> Result<Vec<usize>, RefactorError> {
    let invalid = || RefactorError::InvalidSplitPoint(at.describe());
    let mut path = match at {
        SplitPoint::Path(p) => {
            ast.node_at(p).ok_or_else(invalid)?;
            p.clone()
        }
        SplitPoint::Text(t) => {
            let wanted = t.trim().trim_start_matches('=');
            let exact = wanted.to_ascii_uppercase().replace(' ', "");
            let loose = strip_rows(wanted);
            let subs = ast.subexpressions();
            subs.iter()
                .find(|(_, e)| expr_text(e) == exact)
                .or_else(|| subs.iter().find(|(_, e)| strip_rows(&expr_text(e)) == loose))
                .map(|(p, _)| p.clone())
                .ok_or_else(invalid)?
        }
    };
    while let Some((_, parent)) = path.split_last() {
        if matches!(ast.node_at(parent), Some(Expr::Paren(_))) {
            path.pop();
        } else {
            break;
        }
    }
    match ast.node_at(&path) {
        _ if path.is_empty() => Err(invalid()),
        Some(Expr::Range(..)) | None => Err(invalid()),
        Some(_) => Ok(path),
    }
}

fn unparen(e: &FormulaAst) -> &FormulaAst {
    match e {
        Expr::Paren(inner) => unparen(inner),
        other => other,
    }
}

/// Extracts a subexpression of a group's formula into an adjacent helper group.
///
/// The helper sits on the side away from the group's reference groups unless
/// `target` names its first column (or row, for a horizontal group).
pub fn split_group(
    wb: &Workbook,
    model: &StructureModel,
    group: &str,
    at: &SplitPoint,
    target: Option<u32>,
) -> Result<RefactoringPlan, RefactorError> {
    let gi = group_index(model, group)?;
    let g = &model.groups[gi];
    let top = g.formula_at(g.range.start).map_err(|_| RefactorError::OutOfBounds)?;
    let path = locate(&top, at)?;

    // helpers stack beside a column group and above or below a row group
    let axis = if g.range.height() == 1 && g.range.width() > 1 { Axis::Vertical } else { Axis::Horizontal };
    let (lo, hi) = axis.along_span(g.range);
    let size = (hi - lo + 1) as i64;
    let (mut before, mut after) = (0, 0);
    for rg in model.ref_groups.iter().filter(|r| r.owner == gi) {
        let (a, b) = axis.along_span(rg.range);
        if b < lo {
            before += 1;
        } else if a > hi {
            after += 1;
        }
    }
    let shift = match target {
        Some(line) => line as i64 - lo as i64,
        None if after > before => -size,
        None => size,
    };
    let (d_col, d_row) = match axis {
        Axis::Horizontal => (shift, 0),
        Axis::Vertical => (0, shift),
    };
    let helper: Rect = g.range.translate(d_col, d_row).ok_or(RefactorError::OutOfBounds)?;
    let occupied = wb.sheet(&g.sheet).is_some_and(|s| s.cells_in(helper).next().is_some());
    if shift == 0 || helper.intersects(&g.range) || occupied {
        return Err(RefactorError::NoSpace(super::range_text(model, &g.sheet, helper)));
    }

    let mut edits = BTreeMap::new();
    for p in g.range.cells() {
        let ast = g.formula_at(p).map_err(|_| RefactorError::OutOfBounds)?;
        let q: Pos = p.offset(d_col, d_row).ok_or(RefactorError::OutOfBounds)?;
        let sub = ast.node_at(&path).ok_or_else(|| RefactorError::InvalidSplitPoint(at.describe()))?;
        let helper_ast = unparen(sub).clone();
        let base = ast.replace_at(&path, Expr::Ref(CellRef::relative(q))).expect("path exists");
        edits.insert(CellAddress::new(g.sheet.clone(), q), CellContent::Formula(Formula::from_ast(helper_ast)));
        edits.insert(CellAddress::new(g.sheet.clone(), p), CellContent::Formula(Formula::from_ast(base)));
    }
    let params = json!({
        "group": g.id,
        "at": at.describe(),
        "subexpression": expr_text(unparen(top.node_at(&path).expect("located"))),
        "helper": super::range_text(model, &g.sheet, helper),
    });
    finish(wb, "split", params, edits, &|a| a.clone())
}
