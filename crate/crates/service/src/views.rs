//! JSON views shared by the service and the command-line tool.

use serde::Deserialize;
use serde_json::{json, Map, Value};
use structsheet::address::column_index;
use structsheet::refactor::{Direction, RefactorOp, SplitPoint};
use structsheet::workbook::{content_from_json, save_json};
use structsheet::{CellContent, Pos, Session, Values, Workbook};

use crate::error::ApiError;

/// `{"A1": {"kind": ..}}`, addresses on other sheets qualified.
pub fn values_json(values: &Values, default_sheet: &str) -> Value {
    let map: Map<String, Value> = values.iter().map(|(a, v)| (a.render(default_sheet), v.to_json())).collect();
    Value::Object(map)
}

pub fn workbook_json(session: &Session) -> Value {
    let wb = session.workbook();
    let file: Value = serde_json::from_slice(&save_json(wb)).expect("save file is JSON");
    json!({
        "workbook": file,
        "values": values_json(session.values(), wb.default_sheet()),
        "soundnessEnabled": session.soundness_enabled(),
        "canUndo": session.can_undo(),
    })
}

/// Response to any mutation.
pub fn change_json(session: &Session, changed: &Values) -> Value {
    json!({
        "changedValues": values_json(changed, session.workbook().default_sheet()),
        "report": session.report().to_json(),
    })
}

/// Cell content from an edit body: input text, `null` to clear, or a stored-cell object.
pub fn content_from_value(v: &Value) -> Result<CellContent, ApiError> {
    match v {
        Value::Null => Ok(CellContent::Empty),
        Value::String(s) => {
            CellContent::from_input(s).map_err(|e| ApiError::invalid("FormulaParse", format!("`{s}`: {e}")))
        }
        Value::Number(n) => Ok(CellContent::Number(n.as_f64().unwrap_or_default())),
        Value::Bool(b) => Ok(CellContent::Bool(*b)),
        Value::Object(_) => content_from_json(v).map_err(|e| ApiError::invalid("InvalidContent", e.to_string())),
        Value::Array(_) => Err(ApiError::invalid("InvalidContent", "content cannot be an array")),
    }
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RefactorRequest {
    pub op: String,
    pub group: String,
    /// Split point: subexpression text (`B+C`) or a dotted child path (`0.1`).
    #[serde(default)]
    pub at: Option<String>,
    /// Helper column letters or row number for a split.
    #[serde(default)]
    pub target: Option<String>,
    #[serde(default)]
    pub count: Option<u32>,
    #[serde(default)]
    pub direction: Option<String>,
    #[serde(default)]
    pub overwrite: bool,
    /// Destination top-left cell for a move.
    #[serde(default)]
    pub to: Option<String>,
    #[serde(default = "yes")]
    pub dry_run: bool,
}

fn yes() -> bool {
    true
}

/// Reads a split point: all digits and dots is a path, anything else is text.
pub fn split_point(text: &str) -> SplitPoint {
    let path: Option<Vec<usize>> = if text.is_empty() {
        Some(Vec::new())
    } else {
        text.split('.').map(|p| p.parse().ok()).collect()
    };
    match path {
        Some(p) if text.chars().all(|c| c.is_ascii_digit() || c == '.') => SplitPoint::Path(p),
        _ => SplitPoint::Text(text.to_string()),
    }
}

/// A column (`E`) or row (`12`) number.
pub fn line_number(text: &str) -> Option<u32> {
    text.parse().ok().or_else(|| column_index(&text.to_ascii_uppercase()))
}

impl RefactorRequest {
    pub fn to_op(&self, wb: &Workbook) -> Result<RefactorOp, ApiError> {
        let group = self.group.clone();
        let direction = match &self.direction {
            None => Direction::Down,
            Some(d) => Direction::parse(d).ok_or_else(|| ApiError::invalid("InvalidDirection", format!("unknown direction `{d}`")))?,
        };
        let count = self.count.unwrap_or(1);
        Ok(match self.op.as_str() {
            "split" => {
                let at = self.at.as_deref().ok_or_else(|| ApiError::invalid("MissingParameter", "split needs `at`"))?;
                let target = match &self.target {
                    None => None,
                    Some(t) => Some(line_number(t).ok_or_else(|| ApiError::invalid("InvalidTarget", format!("bad target `{t}`")))?),
                };
                RefactorOp::Split { group, at: split_point(at), target }
            }
            "extend" => RefactorOp::Extend { group, count, direction, overwrite: self.overwrite },
            "shrink" => RefactorOp::Shrink { group, count, direction },
            "move" => {
                let to = self.to.as_deref().ok_or_else(|| ApiError::invalid("MissingParameter", "move needs `to`"))?;
                let to: Pos = wb.parse_a1(to)?.pos;
                RefactorOp::Move { group, to }
            }
            other => return Err(ApiError::invalid("UnknownOperation", format!("unknown refactoring `{other}`"))),
        })
    }
}
