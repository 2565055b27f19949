use std::collections::{HashMap, HashSet};

use serde_json::{json, Value};

use super::{action_json, detect, Detail, Side, SoundnessError, Violation, ViolationKind};
use crate::address::{CellAddress, Pos};
use crate::formula::{absolutize, Formula, RelativeFormula};
use crate::rewrite::{delete_lines, Intervals, LineDelete};
use crate::structure::{infer, Axis, StructureModel};
use crate::workbook::{CellContent, Workbook};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CandidateKind {
    PropagateInward,
    PropagateOutward,
    FillGap,
    RestoreCell,
    CascadeInsert,
    CascadeDelete,
    ProvideValue,
}

impl CandidateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CandidateKind::PropagateInward => "propagate-inward",
            CandidateKind::PropagateOutward => "propagate-outward",
            CandidateKind::FillGap => "fill-gap",
            CandidateKind::RestoreCell => "restore-cell",
            CandidateKind::CascadeInsert => "cascade-insert",
            CandidateKind::CascadeDelete => "cascade-delete",
            CandidateKind::ProvideValue => "provide-value",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputPrompt {
    pub prompt: String,
    pub choices: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairCandidate {
    pub id: String,
    pub violation: String,
    pub kind: CandidateKind,
    pub description: String,
    pub requires_input: Option<InputPrompt>,
    /// Cell edits in order; `None` content means "the user's input".
    pub actions: Vec<(CellAddress, Option<CellContent>)>,
    pub(crate) fingerprint: String,
}

impl RepairCandidate {
    /// Concrete contents, substituting `input` into input actions.
    pub fn resolve(&self, input: Option<&str>) -> Result<Vec<(CellAddress, CellContent)>, SoundnessError> {
        let answer = match (&self.requires_input, input.map(str::trim)) {
            (None, _) => None,
            (Some(_), None) | (Some(_), Some("")) => return Err(SoundnessError::MissingInput(self.id.clone())),
            (Some(_), Some(text)) => {
                Some(CellContent::from_input(text).map_err(|e| SoundnessError::InvalidInput(e.to_string()))?)
            }
        };
        Ok(self
            .actions
            .iter()
            .map(|(addr, c)| (addr.clone(), c.clone().or_else(|| answer.clone()).unwrap_or_default()))
            .collect())
    }

    pub fn to_json(&self, default_sheet: &str) -> Value {
        let prompt = self.requires_input.as_ref().map(|p| json!({"prompt": p.prompt, "choices": p.choices}));
        json!({
            "id": self.id,
            "kind": self.kind.as_str(),
            "description": self.description,
            "requiresInput": prompt,
            "actions": self.actions.iter().map(|(a, c)| action_json(a, c.as_ref(), default_sheet)).collect::<Vec<_>>(),
        })
    }
}

struct Draft {
    kind: CandidateKind,
    description: String,
    requires_input: Option<InputPrompt>,
    actions: Vec<(CellAddress, Option<CellContent>)>,
}

fn fill(sheet: &str, rel: &RelativeFormula, cells: impl Iterator<Item = Pos>) -> Option<Vec<(CellAddress, Option<CellContent>)>> {
    cells
        .map(|p| {
            let ast = absolutize(rel, p).ok()?;
            Some((CellAddress::new(sheet, p), Some(CellContent::Formula(Formula::from_ast(ast)))))
        })
        .collect()
}

/// Drops actions that would not change anything.
fn effective(wb: &Workbook, actions: Vec<(CellAddress, Option<CellContent>)>) -> Vec<(CellAddress, Option<CellContent>)> {
    actions
        .into_iter()
        .filter(|(a, c)| match c {
            Some(c) => wb.get_cell(a).map(|cur| cur != c).unwrap_or(true),
            None => true,
        })
        .collect()
}

/// Whether applying `actions` clears `v` (a broken reference counts as its dangling variant).
fn clears(wb: &Workbook, actions: &[(CellAddress, Option<CellContent>)], v: &Violation) -> bool {
    let mut scratch = wb.clone();
    for (addr, c) in actions {
        let Some(c) = c else { return false };
        if scratch.set_cell(addr, c.clone()).is_err() {
            return false;
        }
    }
    let Ok(model) = infer(&scratch) else { return false };
    let same_kind = |k: ViolationKind| match v.kind {
        ViolationKind::BrokenReference | ViolationKind::DanglingDependent => {
            matches!(k, ViolationKind::BrokenReference | ViolationKind::DanglingDependent)
        }
        other => k == other,
    };
    !detect(&scratch, &model, &HashSet::new()).iter().any(|w| same_kind(w.kind) && w.focus == v.focus)
}

fn deviant_drafts(model: &StructureModel, group: usize, neighbors: &[(usize, Axis, Side)]) -> Vec<Draft> {
    let g = &model.groups[group];
    let here = model.render_range(&g.sheet, g.range);
    let mut out = Vec::new();
    let mut seen_keys = HashSet::new();
    for &(n, ..) in neighbors {
        let ng = &model.groups[n];
        if !seen_keys.insert(&ng.key) {
            continue;
        }
        if let Some(actions) = fill(&g.sheet, &ng.rel, g.range.cells()) {
            out.push(Draft {
                kind: CandidateKind::PropagateInward,
                description: format!("Overwrite {here} with the formula of {}", model.render_range(&ng.sheet, ng.range)),
                requires_input: None,
                actions,
            });
        }
    }
    let outward = neighbors.iter().find(|n| n.2 == Side::After).or_else(|| neighbors.first());
    if let Some(&(n, axis, _)) = outward {
        let ng = &model.groups[n];
        let target = axis.rect(axis.along_span(ng.range), axis.across_span(g.range));
        if let Some(actions) = fill(&g.sheet, &g.rel, target.cells()) {
            out.push(Draft {
                kind: CandidateKind::PropagateOutward,
                description: format!(
                    "Apply the formula of {here} to the remainder of the group, {}",
                    model.render_range(&g.sheet, target)
                ),
                requires_input: None,
                actions,
            });
        }
    }
    out
}

fn gap_drafts(wb: &Workbook, model: &StructureModel, first: usize, second: usize, axis: Axis) -> Vec<Draft> {
    let a = &model.groups[first];
    let b = &model.groups[second];
    let (_, end) = axis.along_span(a.range);
    let (start, _) = axis.along_span(b.range);
    let across = axis.across_span(a.range);
    let (g0, g1) = (end + 1, start - 1);
    let gap = axis.rect((g0, g1), across);
    let gap_text = model.render_range(&a.sheet, gap);
    let mut out = Vec::new();
    if let Some(actions) = fill(&a.sheet, &a.rel, gap.cells()) {
        out.push(Draft {
            kind: CandidateKind::FillGap,
            description: format!("Fill {gap_text} with the group formula {}", a.formula_text()),
            requires_input: None,
            actions,
        });
    }
    let spans = model
        .component(&[first, second])
        .into_iter()
        .map(|g| &model.groups[g])
        .filter(|g| axis.along_span(g.range).1 >= g0)
        .map(|g| axis.across_span(g.range))
        .collect();
    let block = Intervals::from_spans(spans);
    let del = LineDelete { axis, g0, g1, block: &block };
    if let Some(sheet) = wb.sheet(&a.sheet) {
        if let Some(next) = delete_lines(sheet, &del) {
            let lines = match axis {
                Axis::Vertical if g0 == g1 => format!("row {g0}"),
                Axis::Vertical => format!("rows {g0}-{g1}"),
                Axis::Horizontal => format!("{} of the block", model.render_range(&a.sheet, gap)),
            };
            out.push(Draft {
                kind: CandidateKind::CascadeDelete,
                description: format!(
                    "Delete {lines} from the calculation chain and reconnect the remaining references"
                ),
                requires_input: None,
                actions: next.into_iter().map(|(p, c)| (CellAddress::new(a.sheet.clone(), p), Some(c))).collect(),
            });
        }
    }
    out
}

fn insert_draft(wb: &Workbook, model: &StructureModel, cell: &CellAddress, targets: &[Pos]) -> Option<Draft> {
    let owner = model.owner_of(cell)?;
    let g = &model.groups[owner];
    let sheet = wb.sheet(&g.sheet)?;
    for axis in [Axis::Vertical, Axis::Horizontal] {
        let line = axis.along(cell.pos);
        if axis.along_span(g.range).1 != line || line < 2 {
            continue;
        }
        let mut actions = Vec::new();
        for h in model.component(&[owner]) {
            let hg = &model.groups[h];
            if h == owner || axis.along_span(hg.range).1 != line - 1 {
                continue;
            }
            let (a0, a1) = axis.across_span(hg.range);
            let cells = (a0..=a1).map(|x| axis.pos(line, x)).filter(|p| sheet.is_empty_at(*p));
            actions.extend(fill(&g.sheet, &hg.rel, cells)?);
        }
        let filled: HashSet<Pos> = actions.iter().map(|(a, _)| a.pos).collect();
        if !actions.is_empty() && targets.iter().all(|t| filled.contains(t)) {
            return Some(Draft {
                kind: CandidateKind::CascadeInsert,
                description: format!(
                    "Extend the related groups to {} so {} has its inputs",
                    match axis {
                        Axis::Vertical => format!("row {line}"),
                        Axis::Horizontal => format!("column {}", crate::address::column_name(line)),
                    },
                    cell.pos
                ),
                requires_input: None,
                actions,
            });
        }
    }
    None
}

fn suggestions(wb: &Workbook, sheet: &str, targets: &[Pos]) -> Option<Vec<String>> {
    let s = wb.sheet(sheet)?;
    let mut out: Vec<String> = Vec::new();
    for t in targets {
        for p in [t.offset(0, -1), t.offset(-1, 0), t.offset(0, 1), t.offset(1, 0)].into_iter().flatten() {
            let c = s.get(p);
            if !c.is_empty() && c.as_formula().is_none() {
                let text = c.to_input();
                if !out.contains(&text) {
                    out.push(text);
                }
            }
        }
    }
    (!out.is_empty()).then_some(out)
}

fn broken_drafts(
    wb: &Workbook,
    model: &StructureModel,
    v: &Violation,
    all: &[Violation],
    emptied: &HashMap<CellAddress, CellContent>,
    cell: &CellAddress,
    targets: &[Pos],
) -> Vec<Draft> {
    let mut out = Vec::new();
    let addrs: Vec<CellAddress> = targets.iter().map(|t| CellAddress::new(cell.sheet.clone(), *t)).collect();
    let names: Vec<String> = targets.iter().map(|t| t.to_a1()).collect();
    if addrs.iter().all(|a| emptied.contains_key(a)) {
        out.push(Draft {
            kind: CandidateKind::RestoreCell,
            description: format!("Restore {}", names.join(", ")),
            requires_input: None,
            actions: addrs.iter().map(|a| (a.clone(), Some(emptied[a].clone()))).collect(),
        });
    }
    if let Some(d) = insert_draft(wb, model, cell, targets) {
        out.push(d);
    }
    for other in all {
        if let Detail::Fragment { first, second, axis } = other.detail {
            if addrs.iter().any(|a| other.focus.contains(a)) {
                out.extend(gap_drafts(wb, model, first, second, axis));
            }
        }
    }
    out.push(Draft {
        kind: CandidateKind::ProvideValue,
        description: format!("Enter a value for {}", names.join(", ")),
        requires_input: Some(InputPrompt {
            prompt: format!("Value for {} (referenced by {})", names.join(", "), v.focus.rect),
            choices: suggestions(wb, &cell.sheet, targets),
        }),
        actions: addrs.into_iter().map(|a| (a, None)).collect(),
    });
    out
}

/// Ranked repair candidates for one violation.
pub(crate) fn generate(
    wb: &Workbook,
    model: &StructureModel,
    v: &Violation,
    all: &[Violation],
    emptied: &HashMap<CellAddress, CellContent>,
    fingerprint: &str,
) -> Vec<RepairCandidate> {
    let drafts = match &v.detail {
        Detail::Deviant { group, neighbors } => deviant_drafts(model, *group, neighbors),
        Detail::Fragment { first, second, axis } => gap_drafts(wb, model, *first, *second, *axis),
        Detail::Broken { cell, targets } => broken_drafts(wb, model, v, all, emptied, cell, targets),
    };
    let mut kept: Vec<Draft> = Vec::new();
    for mut d in drafts {
        d.actions = effective(wb, d.actions);
        if d.actions.is_empty() || kept.iter().any(|k| k.actions == d.actions) {
            continue;
        }
        // cascades are checked against the originating violation by simulation
        let needs_proof = matches!(d.kind, CandidateKind::CascadeDelete | CandidateKind::CascadeInsert)
            || (d.kind == CandidateKind::FillGap && v.kind != ViolationKind::FragmentedGroup);
        if needs_proof && !clears(wb, &d.actions, v) {
            continue;
        }
        kept.push(d);
    }
    kept.sort_by_key(|d| (d.actions.len(), d.kind));
    kept.into_iter()
        .enumerate()
        .map(|(i, d)| RepairCandidate {
            id: format!("c-{fingerprint}-{}-{}", v.id, i + 1),
            violation: v.id.clone(),
            kind: d.kind,
            description: d.description,
            requires_input: d.requires_input,
            actions: d.actions,
            fingerprint: fingerprint.to_string(),
        })
        .collect()
}

