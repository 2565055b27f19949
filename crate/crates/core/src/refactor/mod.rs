//! Structure-level refactorings as previewable plans.
//!
//! A plan is built against a snapshot, carries the exact cell edits, the
//! groups inference will find afterwards and an empirical value-impact
//! classification, and can only be applied to the snapshot it was built for.

mod resize;
mod split;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde_json::{json, Value};
use thiserror::Error;

pub use resize::{extend_group, shrink_group};
pub use split::{split_group, SplitPoint};

use crate::address::{CellAddress, CellRange, Pos, Rect};
use crate::eval::{evaluate, CellValue};
use crate::rewrite::{remap_content, TargetMap};
use crate::soundness::{action_json, fingerprint};
use crate::structure::{infer, Axis, GroupSummary, StructureError, StructureModel};
use crate::workbook::{CellContent, Delta, Workbook, WorkbookError};

/// Relative tolerance for value comparisons across a refactoring.
pub const VALUE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RefactorError {
    #[error("unknown group `{0}`")]
    UnknownGroup(String),
    #[error("invalid split point: {0}")]
    InvalidSplitPoint(String),
    #[error("no space at {0}")]
    NoSpace(String),
    #[error("destination overlaps group {0}")]
    Overlap(String),
    #[error("operation leaves the grid")]
    OutOfBounds,
    #[error("shrinking would empty the group; delete it instead")]
    WouldEmptyGroup,
    #[error("plan was built for an earlier state of the workbook")]
    StalePlan,
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Workbook(#[from] WorkbookError),
}

/// Edge of a group that grows or shrinks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Down,
    Up,
    Right,
    Left,
}

impl Direction {
    pub fn parse(text: &str) -> Option<Self> {
        match text.to_ascii_lowercase().as_str() {
            "down" => Some(Direction::Down),
            "up" => Some(Direction::Up),
            "right" => Some(Direction::Right),
            "left" => Some(Direction::Left),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Down => "down",
            Direction::Up => "up",
            Direction::Right => "right",
            Direction::Left => "left",
        }
    }

    pub(crate) fn axis(self) -> Axis {
        match self {
            Direction::Down | Direction::Up => Axis::Vertical,
            Direction::Right | Direction::Left => Axis::Horizontal,
        }
    }

    /// Whether the edge is the far end (larger coordinates) of the group.
    pub(crate) fn trailing(self) -> bool {
        matches!(self, Direction::Down | Direction::Right)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueImpact {
    Preserving,
    Altering,
}

impl ValueImpact {
    pub fn as_str(self) -> &'static str {
        match self {
            ValueImpact::Preserving => "preserving",
            ValueImpact::Altering => "altering",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefactoringPlan {
    pub op: &'static str,
    pub params: Value,
    /// Cell edits in application order.
    pub edits: Vec<(CellAddress, CellContent)>,
    pub predicted_groups: Vec<GroupSummary>,
    pub value_impact: ValueImpact,
    /// Pre-existing cells whose value changes or disappears.
    pub affected: Vec<CellAddress>,
    /// Cells that hold content only after the plan.
    pub created: Vec<CellAddress>,
    fingerprint: String,
    default_sheet: String,
}

impl RefactoringPlan {
    pub fn is_identity(&self) -> bool {
        self.edits.is_empty()
    }

    pub fn to_json(&self) -> Value {
        let render = |a: &CellAddress| a.render(&self.default_sheet);
        json!({
            "op": self.op,
            "params": self.params,
            "valueImpact": self.value_impact.as_str(),
            "affectedCells": self.affected.iter().map(render).collect::<Vec<_>>(),
            "createdCells": self.created.iter().map(render).collect::<Vec<_>>(),
            "edits": self.edits.iter().map(|(a, c)| action_json(a, Some(c), &self.default_sheet)).collect::<Vec<_>>(),
            "predictedGroups": self.predicted_groups,
        })
    }
}

/// A refactoring request, dispatched by [`plan`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RefactorOp {
    Split { group: String, at: SplitPoint, target: Option<u32> },
    Extend { group: String, count: u32, direction: Direction, overwrite: bool },
    Shrink { group: String, count: u32, direction: Direction },
    Move { group: String, to: Pos },
}

pub fn plan(wb: &Workbook, model: &StructureModel, op: &RefactorOp) -> Result<RefactoringPlan, RefactorError> {
    match op {
        RefactorOp::Split { group, at, target } => split_group(wb, model, group, at, *target),
        RefactorOp::Extend { group, count, direction, overwrite } => {
            extend_group(wb, model, group, *count, *direction, *overwrite)
        }
        RefactorOp::Shrink { group, count, direction } => shrink_group(wb, model, group, *count, *direction),
        RefactorOp::Move { group, to } => move_group(wb, model, group, *to),
    }
}

/// Assembles a plan from raw edits by running them on a scratch copy.
///
/// `moved` maps pre-existing cells to where their value lives afterwards.
pub(crate) fn finish(
    wb: &Workbook,
    op: &'static str,
    params: Value,
    edits: BTreeMap<CellAddress, CellContent>,
    moved: &dyn Fn(&CellAddress) -> CellAddress,
) -> Result<RefactoringPlan, RefactorError> {
    let edits: Vec<(CellAddress, CellContent)> =
        edits.into_iter().filter(|(a, c)| wb.get_cell(a).map(|cur| cur != c).unwrap_or(true)).collect();
    let mut scratch = wb.clone();
    for (a, c) in &edits {
        scratch.set_cell(a, c.clone())?;
    }
    let predicted = infer(&scratch)?.summary();
    let before = evaluate(wb);
    let after = evaluate(&scratch);
    let mut affected = Vec::new();
    let mut targets = HashSet::new();
    for (addr, v) in &before {
        let dest = moved(addr);
        let w = after.get(&dest);
        if !w.is_some_and(|w| w.approx_eq(v, VALUE_TOLERANCE)) && !(w.is_none() && *v == CellValue::Blank) {
            affected.push(addr.clone());
        }
        targets.insert(dest);
    }
    let created: Vec<CellAddress> = after.keys().filter(|a| !targets.contains(*a)).cloned().collect();
    let value_impact = if affected.is_empty() { ValueImpact::Preserving } else { ValueImpact::Altering };
    Ok(RefactoringPlan {
        op,
        params,
        edits,
        predicted_groups: predicted,
        value_impact,
        affected,
        created,
        fingerprint: fingerprint(wb),
        default_sheet: wb.default_sheet().to_string(),
    })
}

/// Applies a plan atomically, returning the deltas for undo.
pub fn apply_plan(wb: &mut Workbook, plan: &RefactoringPlan) -> Result<Vec<Delta>, RefactorError> {
    if fingerprint(wb) != plan.fingerprint {
        return Err(RefactorError::StalePlan);
    }
    let mut scratch = wb.clone();
    let mut deltas = Vec::with_capacity(plan.edits.len());
    for (a, c) in &plan.edits {
        deltas.push(scratch.set_cell(a, c.clone())?);
    }
    *wb = scratch;
    Ok(deltas)
}

fn group_index(model: &StructureModel, id: &str) -> Result<usize, RefactorError> {
    model.resolve_group(id).ok_or_else(|| RefactorError::UnknownGroup(id.to_string()))
}

/// Translation of one rectangle; everything else stays put.
struct Translate {
    from: Rect,
    d_col: i64,
    d_row: i64,
}

impl TargetMap for Translate {
    fn single(&self, p: Pos) -> Option<Pos> {
        if self.from.contains(p) {
            p.offset(self.d_col, self.d_row)
        } else {
            Some(p)
        }
    }

    fn range(&self, r: Rect) -> Option<Rect> {
        if self.from.contains_rect(&r) {
            r.translate(self.d_col, self.d_row)
        } else {
            Some(r)
        }
    }
}

/// Relocates a group so that its top-left lands on `to`, keeping every reference on its target.
pub fn move_group(wb: &Workbook, model: &StructureModel, group: &str, to: Pos) -> Result<RefactoringPlan, RefactorError> {
    let gi = group_index(model, group)?;
    let g = &model.groups[gi];
    let params = json!({"group": g.id, "to": to.to_a1()});
    let d_col = to.col as i64 - g.range.start.col as i64;
    let d_row = to.row as i64 - g.range.start.row as i64;
    let dest = g.range.translate(d_col, d_row).ok_or_else(|| RefactorError::NoSpace(to.to_a1()))?;
    if dest == g.range {
        return finish(wb, "move", params, BTreeMap::new(), &|a| a.clone());
    }
    for (i, other) in model.groups.iter().enumerate() {
        if i != gi && other.sheet == g.sheet && other.range.intersects(&dest) {
            return Err(RefactorError::Overlap(model.render_range(&other.sheet, other.range)));
        }
    }
    let sheet = wb.sheet(&g.sheet).ok_or_else(|| StructureError::UnknownGroup(g.id.clone()))?;
    if sheet.cells_in(dest).any(|(p, _)| !g.range.contains(p)) {
        return Err(RefactorError::NoSpace(model.render_range(&g.sheet, dest)));
    }
    let map = Translate { from: g.range, d_col, d_row };
    let mut edits = BTreeMap::new();
    for p in g.range.cells() {
        if !dest.contains(p) {
            edits.insert(CellAddress::new(g.sheet.clone(), p), CellContent::Empty);
        }
    }
    for p in g.range.cells() {
        let content = remap_content(sheet.get(p), &map).ok_or(RefactorError::OutOfBounds)?;
        let q = p.offset(d_col, d_row).ok_or(RefactorError::OutOfBounds)?;
        edits.insert(CellAddress::new(g.sheet.clone(), q), content);
    }
    for (p, c) in sheet.cells() {
        if g.range.contains(p) || c.as_formula().is_none() {
            continue;
        }
        let next = remap_content(c, &map).ok_or(RefactorError::OutOfBounds)?;
        if &next != c {
            edits.insert(CellAddress::new(g.sheet.clone(), p), next);
        }
    }
    let sheet_name = g.sheet.clone();
    let from = g.range;
    finish(wb, "move", params, edits, &move |a| {
        if a.sheet == sheet_name && from.contains(a.pos) {
            CellAddress::new(a.sheet.clone(), a.pos.offset(d_col, d_row).expect("checked above"))
        } else {
            a.clone()
        }
    })
}

/// Groups reachable from `start` over graph edges through groups whose edge
/// line (`trailing` end or leading start along `axis`) equals `start`'s.
pub(crate) fn aligned_groups(model: &StructureModel, start: usize, axis: Axis, trailing: bool) -> Vec<usize> {
    let edge = |g: usize| {
        let (a, b) = axis.along_span(model.groups[g].range);
        if trailing {
            b
        } else {
            a
        }
    };
    let line = edge(start);
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(g) = stack.pop() {
        for &(a, b) in &model.edges {
            let n = if a == g {
                b
            } else if b == g {
                a
            } else {
                continue;
            };
            if model.groups[n].sheet == model.groups[start].sheet && edge(n) == line && seen.insert(n) {
                stack.push(n);
            }
        }
    }
    seen.into_iter().collect()
}

/// The rectangle `range` covers after the edit, for error messages.
pub(crate) fn range_text(model: &StructureModel, sheet: &str, r: Rect) -> String {
    CellRange::new(sheet, r).render(&model.default_sheet)
}
