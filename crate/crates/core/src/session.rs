//! An editing session: one workbook with its derived structure, values,
//! soundness report and undo history kept in step.

use thiserror::Error;

use crate::address::CellAddress;
use crate::eval::{evaluate, evaluate_delta, merge_changes, CellValue, Values};
use crate::refactor::{RefactorError, RefactoringPlan};
use crate::soundness::{self, fingerprint, SoundnessError, SoundnessReport};
use crate::structure::{infer, StructureError, StructureModel};
use crate::workbook::{save_json, CellContent, Delta, Workbook, WorkbookError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error(transparent)]
    Workbook(#[from] WorkbookError),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Soundness(#[from] SoundnessError),
    #[error(transparent)]
    Refactor(#[from] RefactorError),
    #[error("nothing to undo")]
    NothingToUndo,
}

#[derive(Debug, Clone)]
pub struct Session {
    workbook: Workbook,
    model: StructureModel,
    report: SoundnessReport,
    values: Values,
    history: Vec<Vec<Delta>>,
    soundness_enabled: bool,
}

impl Session {
    pub fn new(workbook: Workbook) -> Result<Self, StructureError> {
        let model = infer(&workbook)?;
        let report = soundness::check(&workbook, &model);
        let values = evaluate(&workbook);
        Ok(Self { workbook, model, report, values, history: Vec::new(), soundness_enabled: true })
    }

    pub fn workbook(&self) -> &Workbook {
        &self.workbook
    }

    pub fn model(&self) -> &StructureModel {
        &self.model
    }

    pub fn report(&self) -> &SoundnessReport {
        &self.report
    }

    pub fn values(&self) -> &Values {
        &self.values
    }

    pub fn value(&self, addr: &CellAddress) -> CellValue {
        self.values.get(addr).cloned().unwrap_or(CellValue::Blank)
    }

    pub fn soundness_enabled(&self) -> bool {
        self.soundness_enabled
    }

    pub fn can_undo(&self) -> bool {
        !self.history.is_empty()
    }

    pub fn save(&self) -> Vec<u8> {
        save_json(&self.workbook)
    }

    /// Switching checks back on re-checks the whole workbook.
    pub fn set_soundness_enabled(&mut self, enabled: bool) {
        if enabled == self.soundness_enabled {
            return;
        }
        self.soundness_enabled = enabled;
        self.report = if enabled {
            soundness::check(&self.workbook, &self.model)
        } else {
            SoundnessReport::empty(self.workbook.default_sheet())
        };
    }

    /// Applies a batch of edits atomically; returns the cells whose value changed.
    pub fn edit(&mut self, edits: Vec<(CellAddress, CellContent)>) -> Result<Values, SessionError> {
        let mut scratch = self.workbook.clone();
        let mut deltas = Vec::with_capacity(edits.len());
        for (addr, content) in edits {
            deltas.push(scratch.set_cell(&addr, content)?);
        }
        self.commit(scratch, deltas, true)
    }

    /// Applies a repair candidate from the current report.
    pub fn apply_repair(&mut self, candidate: &str, input: Option<&str>) -> Result<Values, SessionError> {
        let Some(cand) = self.report.candidate(candidate).cloned() else {
            // ids embed the snapshot fingerprint: `c-<fp>-<violation>-<n>`
            let built_for = candidate.strip_prefix("c-").and_then(|rest| rest.split('-').next());
            return Err(match built_for {
                Some(fp) if fp != fingerprint(&self.workbook) => SoundnessError::StaleCandidate(candidate.to_string()),
                _ => SoundnessError::UnknownCandidate(candidate.to_string()),
            }
            .into());
        };
        let mut scratch = self.workbook.clone();
        let (deltas, _, _) = soundness::apply_candidate(&mut scratch, &self.report, &cand, input)?;
        self.commit(scratch, deltas, true)
    }

    pub fn apply_plan(&mut self, plan: &RefactoringPlan) -> Result<Values, SessionError> {
        let mut scratch = self.workbook.clone();
        let deltas = crate::refactor::apply_plan(&mut scratch, plan)?;
        self.commit(scratch, deltas, true)
    }

    /// Reverts the most recent edit, repair or refactoring.
    pub fn undo(&mut self) -> Result<Values, SessionError> {
        let deltas = self.history.last().ok_or(SessionError::NothingToUndo)?;
        let mut scratch = self.workbook.clone();
        scratch.undo(deltas)?;
        let inverse: Vec<Delta> = deltas.iter().rev().map(Delta::inverse).collect();
        let changed = self.commit(scratch, inverse, false)?;
        self.history.pop();
        Ok(changed)
    }

    fn commit(&mut self, scratch: Workbook, deltas: Vec<Delta>, record: bool) -> Result<Values, SessionError> {
        let model = infer(&scratch)?;
        let changed = match deltas.as_slice() {
            [single] => evaluate_delta(&scratch, &self.values, single),
            _ => diff(&self.values, &evaluate(&scratch)),
        };
        self.report = if self.soundness_enabled {
            soundness::on_edit(&scratch, &model, &deltas, &self.report)
        } else {
            SoundnessReport::empty(scratch.default_sheet())
        };
        merge_changes(&mut self.values, &changed);
        self.workbook = scratch;
        self.model = model;
        if record && !deltas.iter().all(Delta::is_noop) {
            self.history.push(deltas);
        }
        Ok(changed)
    }
}

fn diff(before: &Values, after: &Values) -> Values {
    let mut out = Values::new();
    for (addr, v) in after {
        if before.get(addr) != Some(v) {
            out.insert(addr.clone(), v.clone());
        }
    }
    for addr in before.keys() {
        if !after.contains_key(addr) {
            out.insert(addr.clone(), CellValue::Blank);
        }
    }
    out
}
