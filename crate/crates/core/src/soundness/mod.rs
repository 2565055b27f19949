//! Structural soundness checks and repair candidates.
//!
//! Four violation kinds are detected on a snapshot:
//!
//! * `DeviantCell`: a group of at most [`DEVIANT_MAX_AREA`] cells directly
//!   next to a group of at least [`NEIGHBOR_MIN_AREA`] cells with the same
//!   shape key but a different formula, whose span covers the deviant's.
//! * `FragmentedGroup`: two groups with the same relative formula and the
//!   same span, split by up to [`MAX_GAP`] lines holding only blanks or
//!   deviant cells, at least one of them blank.
//! * `BrokenReference`: a single-cell reference onto an empty cell.
//! * `DanglingDependent`: a broken reference whose target was emptied by the
//!   edit batch being checked.

mod candidates;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use candidates::{CandidateKind, InputPrompt, RepairCandidate};

use crate::address::{CellAddress, CellRange, Pos, Rect};
use crate::formula::RefLeaf;
use crate::structure::{infer, Axis, StructureError, StructureModel};
use crate::workbook::{content_to_json, save_json, CellContent, Delta, Workbook, WorkbookError};

pub const DEVIANT_MAX_AREA: u64 = 2;
pub const NEIGHBOR_MIN_AREA: u64 = 3;
pub const MAX_GAP: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ViolationKind {
    DeviantCell,
    FragmentedGroup,
    BrokenReference,
    DanglingDependent,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::DeviantCell => "DeviantCell",
            ViolationKind::FragmentedGroup => "FragmentedGroup",
            ViolationKind::BrokenReference => "BrokenReference",
            ViolationKind::DanglingDependent => "DanglingDependent",
        }
    }
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Side {
    Before,
    After,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Detail {
    Deviant { group: usize, neighbors: Vec<(usize, Axis, Side)> },
    Fragment { first: usize, second: usize, axis: Axis },
    Broken { cell: CellAddress, targets: Vec<Pos> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub id: String,
    pub kind: ViolationKind,
    pub focus: CellRange,
    /// Ids of the groups involved.
    pub groups: Vec<String>,
    pub new: bool,
    pub message: String,
    pub(crate) detail: Detail,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SoundnessReport {
    pub violations: Vec<Violation>,
    /// Candidates per violation id, best first.
    pub candidates: BTreeMap<String, Vec<RepairCandidate>>,
    /// Fingerprint of the snapshot the candidates were built for.
    pub fingerprint: String,
    pub(crate) default_sheet: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SoundnessError {
    #[error("unknown violation `{0}`")]
    UnknownViolation(String),
    #[error("unknown repair candidate `{0}`")]
    UnknownCandidate(String),
    #[error("candidate `{0}` was built for an earlier state of the workbook")]
    StaleCandidate(String),
    #[error("candidate `{0}` needs input")]
    MissingInput(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Workbook(#[from] WorkbookError),
}

/// Short content hash of the canonical save file.
pub fn fingerprint(wb: &Workbook) -> String {
    let digest = Sha256::digest(save_json(wb));
    digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
}

impl SoundnessReport {
    /// A report with nothing in it, used while checking is switched off.
    pub fn empty(default_sheet: &str) -> Self {
        Self { default_sheet: default_sheet.to_string(), ..Self::default() }
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violation(&self, id: &str) -> Option<&Violation> {
        self.violations.iter().find(|v| v.id == id)
    }

    pub fn candidate(&self, id: &str) -> Option<&RepairCandidate> {
        self.candidates.values().flatten().find(|c| c.id == id)
    }

    pub fn candidates_for(&self, violation: &str) -> Result<&[RepairCandidate], SoundnessError> {
        self.violation(violation).ok_or_else(|| SoundnessError::UnknownViolation(violation.to_string()))?;
        Ok(self.candidates.get(violation).map(Vec::as_slice).unwrap_or(&[]))
    }

    pub fn new_violations(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| v.new)
    }

    pub fn to_json(&self) -> Value {
        let render = |r: &CellRange| r.render(&self.default_sheet);
        let violations: Vec<Value> = self
            .violations
            .iter()
            .map(|v| {
                json!({
                    "id": v.id,
                    "kind": v.kind.as_str(),
                    "focus": render(&v.focus),
                    "groups": v.groups,
                    "new": v.new,
                    "message": v.message,
                })
            })
            .collect();
        let candidates: serde_json::Map<String, Value> = self
            .candidates
            .iter()
            .map(|(vid, cs)| (vid.clone(), Value::Array(cs.iter().map(|c| c.to_json(&self.default_sheet)).collect())))
            .collect();
        json!({"clean": self.is_clean(), "violations": violations, "candidates": candidates})
    }
}

fn violation(kind: ViolationKind, focus: CellRange, groups: Vec<String>, message: String, detail: Detail) -> Violation {
    Violation { id: String::new(), kind, focus, groups, new: true, message, detail }
}

fn deviants(model: &StructureModel) -> Vec<Violation> {
    let mut out = Vec::new();
    for (d, g) in model.groups.iter().enumerate() {
        if g.range.area() > DEVIANT_MAX_AREA {
            continue;
        }
        let mut neighbors = Vec::new();
        for axis in [Axis::Vertical, Axis::Horizontal] {
            let (lo, hi) = axis.along_span(g.range);
            let (a0, a1) = axis.across_span(g.range);
            for (side, line) in [(Side::Before, lo.checked_sub(1)), (Side::After, Some(hi + 1))] {
                let Some(probe) = line.filter(|&l| l >= 1).map(|l| axis.pos(l, a0)) else {
                    continue;
                };
                let Some(n) = model.owner_of(&CellAddress::new(g.sheet.clone(), probe)) else {
                    continue;
                };
                let ng = &model.groups[n];
                let (n0, n1) = axis.across_span(ng.range);
                let touches = match side {
                    Side::Before => axis.along_span(ng.range).1 + 1 == lo,
                    Side::After => axis.along_span(ng.range).0 == hi + 1,
                };
                if touches
                    && n0 <= a0
                    && a1 <= n1
                    && ng.shape_key == g.shape_key
                    && ng.key != g.key
                    && ng.range.area() >= NEIGHBOR_MIN_AREA
                {
                    neighbors.push((n, axis, side));
                }
            }
        }
        if neighbors.is_empty() {
            continue;
        }
        let first = &model.groups[neighbors[0].0];
        let message = format!(
            "{} holds {} but its neighbour {} computes {}",
            model.render_range(&g.sheet, g.range),
            g.formula_text(),
            model.render_range(&first.sheet, first.range),
            first.formula_text()
        );
        let mut groups = vec![g.id.clone()];
        groups.extend(neighbors.iter().map(|&(n, ..)| model.groups[n].id.clone()));
        out.push(violation(
            ViolationKind::DeviantCell,
            g.cell_range(),
            groups,
            message,
            Detail::Deviant { group: d, neighbors },
        ));
    }
    out
}

fn fragments(wb: &Workbook, model: &StructureModel, deviant_cells: &HashSet<(String, Pos)>) -> Vec<Violation> {
    let mut out = Vec::new();
    for (a, g) in model.groups.iter().enumerate() {
        let Some(sheet) = wb.sheet(&g.sheet) else { continue };
        for axis in [Axis::Vertical, Axis::Horizontal] {
            let (_, end) = axis.along_span(g.range);
            let across = axis.across_span(g.range);
            let mut saw_blank = false;
            for gap in 1..=MAX_GAP {
                let line = end + gap;
                // the line must hold only blanks and deviant cells to count as a gap
                let mut ok = true;
                for x in across.0..=across.1 {
                    let p = axis.pos(line, x);
                    if Pos::checked(p.col as i64, p.row as i64).is_none() {
                        ok = false;
                        break;
                    }
                    if sheet.is_empty_at(p) {
                        saw_blank = true;
                    } else if !deviant_cells.contains(&(g.sheet.clone(), p)) {
                        ok = false;
                        break;
                    }
                }
                if !ok {
                    break;
                }
                let probe = axis.pos(line + 1, across.0);
                let Some(b) = model.owner_of(&CellAddress::new(g.sheet.clone(), probe)) else {
                    continue;
                };
                let bg = &model.groups[b];
                if saw_blank
                    && bg.key == g.key
                    && axis.across_span(bg.range) == across
                    && axis.along_span(bg.range).0 == line + 1
                {
                    let gap_rect = axis.rect((end + 1, line), across);
                    out.push(violation(
                        ViolationKind::FragmentedGroup,
                        CellRange::new(g.sheet.clone(), gap_rect),
                        vec![g.id.clone(), bg.id.clone()],
                        format!(
                            "{} and {} compute {} but are split by {}",
                            model.render_range(&g.sheet, g.range),
                            model.render_range(&bg.sheet, bg.range),
                            g.formula_text(),
                            model.render_range(&g.sheet, gap_rect)
                        ),
                        Detail::Fragment { first: a, second: b, axis },
                    ));
                    break;
                }
            }
        }
    }
    out
}

fn broken_references(wb: &Workbook, model: &StructureModel, emptied: &HashSet<CellAddress>) -> Vec<Violation> {
    let mut out = Vec::new();
    for sheet in wb.sheets() {
        for (pos, formula) in sheet.formulas() {
            let mut targets: Vec<Pos> = Vec::new();
            for leaf in formula.ast().leaves() {
                if let RefLeaf::Single(r) = leaf {
                    if r.sheet.is_none() && sheet.is_empty_at(r.pos()) && !targets.contains(&r.pos()) {
                        targets.push(r.pos());
                    }
                }
            }
            if targets.is_empty() {
                continue;
            }
            let cell = CellAddress::new(sheet.name(), pos);
            let dangling = targets.iter().any(|t| emptied.contains(&CellAddress::new(sheet.name(), *t)));
            let names: Vec<String> = targets.iter().map(|t| t.to_a1()).collect();
            let (kind, message) = if dangling {
                (
                    ViolationKind::DanglingDependent,
                    format!("{} still refers to {}, which was just removed", pos, names.join(", ")),
                )
            } else {
                (ViolationKind::BrokenReference, format!("{} refers to empty {}", pos, names.join(", ")))
            };
            let groups = model.owner_of(&cell).map(|g| vec![model.groups[g].id.clone()]).unwrap_or_default();
            out.push(violation(
                kind,
                CellRange::new(sheet.name(), Rect::cell(pos)),
                groups,
                message,
                Detail::Broken { cell, targets },
            ));
        }
    }
    out
}

/// Violations of `wb`, ordered row-major by focus, without candidates.
pub(crate) fn detect(wb: &Workbook, model: &StructureModel, emptied: &HashSet<CellAddress>) -> Vec<Violation> {
    let mut out = deviants(model);
    let deviant_cells: HashSet<(String, Pos)> =
        out.iter().flat_map(|v| v.focus.rect.cells().map(|p| (v.focus.sheet.clone(), p)).collect::<Vec<_>>()).collect();
    out.extend(fragments(wb, model, &deviant_cells));
    out.extend(broken_references(wb, model, emptied));
    let sheet_index: HashMap<&str, usize> = wb.sheets().iter().enumerate().map(|(i, s)| (s.name(), i)).collect();
    out.sort_by(|a, b| {
        let ka = (sheet_index.get(a.focus.sheet.as_str()), a.focus.rect, a.kind);
        let kb = (sheet_index.get(b.focus.sheet.as_str()), b.focus.rect, b.kind);
        ka.cmp(&kb)
    });
    for (i, v) in out.iter_mut().enumerate() {
        v.id = format!("v{}", i + 1);
    }
    out
}

/// Cells a delta batch emptied, with their content before the batch.
fn emptied_by(deltas: &[Delta]) -> HashMap<CellAddress, CellContent> {
    let mut first_before: HashMap<CellAddress, CellContent> = HashMap::new();
    let mut last_after: HashMap<CellAddress, bool> = HashMap::new();
    for d in deltas {
        first_before.entry(d.addr.clone()).or_insert_with(|| d.before.clone());
        last_after.insert(d.addr.clone(), d.after.is_empty());
    }
    first_before
        .into_iter()
        .filter(|(a, before)| !before.is_empty() && last_after.get(a) == Some(&true))
        .collect()
}

fn build_report(
    wb: &Workbook,
    model: &StructureModel,
    deltas: &[Delta],
    previous: Option<&SoundnessReport>,
) -> SoundnessReport {
    let emptied = emptied_by(deltas);
    let emptied_set: HashSet<CellAddress> = emptied.keys().cloned().collect();
    let mut violations = detect(wb, model, &emptied_set);
    if let Some(prev) = previous {
        let seen: HashSet<(ViolationKind, &CellRange)> = prev.violations.iter().map(|v| (v.kind, &v.focus)).collect();
        for v in &mut violations {
            v.new = !seen.contains(&(v.kind, &v.focus));
        }
    }
    let fp = if violations.is_empty() { String::new() } else { fingerprint(wb) };
    let mut candidates = BTreeMap::new();
    for v in &violations {
        let cs = candidates::generate(wb, model, v, &violations, &emptied, &fp);
        candidates.insert(v.id.clone(), cs);
    }
    SoundnessReport { violations, candidates, fingerprint: fp, default_sheet: model.default_sheet.clone() }
}

/// Full check of a snapshot; every violation is marked new.
pub fn check(wb: &Workbook, model: &StructureModel) -> SoundnessReport {
    build_report(wb, model, &[], None)
}

/// Check after an edit batch; `new` marks violations absent from `previous`.
pub fn on_edit(
    wb: &Workbook,
    model: &StructureModel,
    deltas: &[Delta],
    previous: &SoundnessReport,
) -> SoundnessReport {
    build_report(wb, model, deltas, Some(previous))
}

/// Applies a candidate atomically and re-checks.
///
/// `input` answers the candidate's prompt when it has one.
pub fn apply_candidate(
    wb: &mut Workbook,
    previous: &SoundnessReport,
    candidate: &RepairCandidate,
    input: Option<&str>,
) -> Result<(Vec<Delta>, StructureModel, SoundnessReport), SoundnessError> {
    if fingerprint(wb) != candidate.fingerprint {
        return Err(SoundnessError::StaleCandidate(candidate.id.clone()));
    }
    let contents = candidate.resolve(input)?;
    let mut scratch = wb.clone();
    let mut deltas = Vec::with_capacity(contents.len());
    for (addr, content) in contents {
        deltas.push(scratch.set_cell(&addr, content)?);
    }
    let model = infer(&scratch)?;
    let report = on_edit(&scratch, &model, &deltas, previous);
    *wb = scratch;
    Ok((deltas, model, report))
}

/// Result of [`repair`].
#[derive(Debug, Clone)]
pub struct RepairOutcome {
    pub deltas: Vec<Delta>,
    /// Descriptions of the applied candidates, in order.
    pub applied: Vec<String>,
    pub report: SoundnessReport,
}

/// Applies candidates until the workbook is clean or no candidate reduces
/// the violation count.
///
/// Candidates needing input are offered to `ask`; returning `None` skips them.
pub fn repair(
    wb: &mut Workbook,
    mut ask: impl FnMut(&Violation, &RepairCandidate) -> Option<String>,
) -> Result<RepairOutcome, SoundnessError> {
    let mut model = infer(wb)?;
    let mut report = check(wb, &model);
    let mut deltas = Vec::new();
    let mut applied = Vec::new();
    'outer: while !report.is_clean() {
        let count = report.violations.len();
        for v in &report.violations {
            for c in report.candidates.get(&v.id).into_iter().flatten() {
                let input = match &c.requires_input {
                    Some(_) => match ask(v, c) {
                        Some(answer) => Some(answer),
                        None => continue,
                    },
                    None => None,
                };
                let mut scratch = wb.clone();
                let Ok((ds, m, r)) = apply_candidate(&mut scratch, &report, c, input.as_deref()) else {
                    continue;
                };
                if r.violations.len() < count {
                    *wb = scratch;
                    deltas.extend(ds);
                    applied.push(c.description.clone());
                    model = m;
                    report = check(wb, &model);
                    continue 'outer;
                }
            }
        }
        break;
    }
    Ok(RepairOutcome { deltas, applied, report })
}

pub(crate) fn action_json(addr: &CellAddress, content: Option<&CellContent>, default_sheet: &str) -> Value {
    match content {
        None => json!({"addr": addr.render(default_sheet), "input": true}),
        Some(CellContent::Empty) => json!({"addr": addr.render(default_sheet), "clear": true}),
        Some(c) => json!({"addr": addr.render(default_sheet), "set": content_to_json(c)}),
    }
}
