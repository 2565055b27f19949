//! Native `.wbk.json` format and CSV import/export.
//!
//! The JSON writer is canonical: sheets in stored order, cells row-major,
//! two-space indentation and keys in schema order, so saving a loaded
//! canonical file reproduces it byte for byte.

use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

use super::{parse_number_literal, CellContent, Sheet, Workbook, WorkbookError, FORMAT_VERSION};
use crate::address::{CellAddress, Pos};
use crate::formula::{Formula, FormulaParseError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LoadError {
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("schema error at `{pointer}`: {message}")]
    Schema { pointer: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CsvError {
    #[error("CSV syntax error on line {line}: {message}")]
    Syntax { line: u64, message: String },
    #[error("formula error at {addr}: {source}")]
    FormulaParse { addr: String, source: FormulaParseError },
    #[error(transparent)]
    Workbook(#[from] WorkbookError),
}

#[derive(Serialize)]
struct FileOut<'a> {
    version: &'a str,
    sheets: Vec<SheetOut<'a>>,
}

#[derive(Serialize)]
struct SheetOut<'a> {
    name: &'a str,
    cells: Vec<CellOut<'a>>,
}

#[derive(Serialize)]
struct CellOut<'a> {
    addr: String,
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<ValueOut<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    formula: Option<&'a str>,
}

#[derive(Serialize)]
#[serde(untagged)]
enum ValueOut<'a> {
    Int(i64),
    Float(f64),
    Text(&'a str),
    Bool(bool),
}

fn number_out(n: f64) -> ValueOut<'static> {
    const EXACT: f64 = 9_007_199_254_740_992.0; // 2^53
    if n.fract() == 0.0 && n.abs() < EXACT && !(n == 0.0 && n.is_sign_negative()) {
        ValueOut::Int(n as i64)
    } else {
        ValueOut::Float(n)
    }
}

fn kind_name(content: &CellContent) -> &'static str {
    match content {
        CellContent::Empty => "empty",
        CellContent::Number(_) => "number",
        CellContent::Text(_) => "text",
        CellContent::Bool(_) => "bool",
        CellContent::Formula(_) => "formula",
    }
}

fn cell_out(pos: Pos, content: &CellContent) -> CellOut<'_> {
    let (value, formula) = match content {
        CellContent::Empty => (None, None),
        CellContent::Number(n) => (Some(number_out(*n)), None),
        CellContent::Text(t) => (Some(ValueOut::Text(t)), None),
        CellContent::Bool(b) => (Some(ValueOut::Bool(*b)), None),
        CellContent::Formula(f) => (None, Some(f.text())),
    };
    CellOut { addr: pos.to_a1(), kind: kind_name(content), value, formula }
}

/// Canonical serialization.
pub fn save_json(wb: &Workbook) -> Vec<u8> {
    let file = FileOut {
        version: wb.version(),
        sheets: wb
            .sheets()
            .iter()
            .map(|s| SheetOut { name: s.name(), cells: s.cells().map(|(p, c)| cell_out(p, c)).collect() })
            .collect(),
    };
    let mut out = serde_json::to_vec_pretty(&file).expect("serializable");
    out.push(b'\n');
    out
}

/// `{"kind": …, "value"|"formula": …}` for a content; `{"kind":"empty"}` when empty.
pub fn content_to_json(content: &CellContent) -> Value {
    let out = cell_out(Pos::new(1, 1), content);
    let mut map = Map::new();
    map.insert("kind".into(), Value::from(out.kind));
    if let Some(v) = out.value {
        map.insert("value".into(), serde_json::to_value(v).expect("serializable"));
    }
    if let Some(f) = out.formula {
        map.insert("formula".into(), Value::from(f));
    }
    Value::Object(map)
}

/// Inverse of [`content_to_json`]; `null` is accepted as empty.
pub fn content_from_json(value: &Value) -> Result<CellContent, LoadError> {
    if value.is_null() {
        return Ok(CellContent::Empty);
    }
    parse_content(value, "", false)
}

fn schema(pointer: impl Into<String>, message: impl Into<String>) -> LoadError {
    LoadError::Schema { pointer: pointer.into(), message: message.into() }
}

fn expect_object<'a>(v: &'a Value, ptr: &str, allowed: &[&str]) -> Result<&'a Map<String, Value>, LoadError> {
    let obj = v.as_object().ok_or_else(|| schema(ptr, "expected an object"))?;
    if let Some(k) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(schema(format!("{ptr}/{k}"), "unexpected key"));
    }
    Ok(obj)
}

fn parse_content(v: &Value, ptr: &str, with_addr: bool) -> Result<CellContent, LoadError> {
    let allowed: &[&str] = if with_addr { &["addr", "kind", "value", "formula"] } else { &["kind", "value", "formula"] };
    let obj = expect_object(v, ptr, allowed)?;
    let kind = obj
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| schema(format!("{ptr}/kind"), "expected a kind string"))?;
    let value = obj.get("value");
    let check_absent = |key: &str| {
        if obj.contains_key(key) {
            Err(schema(format!("{ptr}/{key}"), format!("not allowed for kind `{kind}`")))
        } else {
            Ok(())
        }
    };
    let vptr = format!("{ptr}/value");
    match kind {
        "number" => {
            check_absent("formula")?;
            let n = value.and_then(Value::as_f64).ok_or_else(|| schema(&vptr, "expected a number"))?;
            Ok(CellContent::Number(n))
        }
        "text" => {
            check_absent("formula")?;
            let t = value.and_then(Value::as_str).ok_or_else(|| schema(&vptr, "expected a string"))?;
            Ok(CellContent::Text(t.to_string()))
        }
        "bool" => {
            check_absent("formula")?;
            let b = value.and_then(Value::as_bool).ok_or_else(|| schema(&vptr, "expected a boolean"))?;
            Ok(CellContent::Bool(b))
        }
        "formula" => {
            check_absent("value")?;
            let fptr = format!("{ptr}/formula");
            let text = obj
                .get("formula")
                .and_then(Value::as_str)
                .ok_or_else(|| schema(&fptr, "expected a formula string"))?;
            let f = Formula::parse(text).map_err(|e| schema(&fptr, e.to_string()))?;
            Ok(CellContent::Formula(f))
        }
        "empty" if !with_addr => {
            check_absent("value")?;
            check_absent("formula")?;
            Ok(CellContent::Empty)
        }
        other => Err(schema(format!("{ptr}/kind"), format!("unknown kind `{other}`"))),
    }
}

/// Loads and validates a `.wbk.json` document.
pub fn load_json(bytes: &[u8]) -> Result<Workbook, LoadError> {
    let root: Value = serde_json::from_slice(bytes).map_err(|e| LoadError::Json(e.to_string()))?;
    let obj = expect_object(&root, "", &["version", "sheets"])?;
    match obj.get("version").and_then(Value::as_str) {
        Some(FORMAT_VERSION) => {}
        Some(v) => return Err(schema("/version", format!("unsupported version `{v}`"))),
        None => return Err(schema("/version", "expected a version string")),
    }
    let sheets = obj
        .get("sheets")
        .and_then(Value::as_array)
        .ok_or_else(|| schema("/sheets", "expected an array"))?;
    let mut wb = Workbook::new();
    for (i, sv) in sheets.iter().enumerate() {
        let sptr = format!("/sheets/{i}");
        let sobj = expect_object(sv, &sptr, &["name", "cells"])?;
        let name = sobj
            .get("name")
            .and_then(Value::as_str)
            .ok_or_else(|| schema(format!("{sptr}/name"), "expected a string"))?;
        wb.add_sheet(name).map_err(|e| schema(format!("{sptr}/name"), e.to_string()))?;
        let cells = sobj
            .get("cells")
            .and_then(Value::as_array)
            .ok_or_else(|| schema(format!("{sptr}/cells"), "expected an array"))?;
        let mut sheet = Sheet::new(name);
        for (j, cv) in cells.iter().enumerate() {
            let cptr = format!("{sptr}/cells/{j}");
            let content = parse_content(cv, &cptr, true)?;
            let addr_text = cv
                .get("addr")
                .and_then(Value::as_str)
                .ok_or_else(|| schema(format!("{cptr}/addr"), "expected an address string"))?;
            if addr_text.contains(['$', '!']) {
                return Err(schema(format!("{cptr}/addr"), "expected a plain A1 address"));
            }
            let pos = Pos::parse_a1(addr_text).map_err(|e| schema(format!("{cptr}/addr"), e.to_string()))?;
            if !sheet.is_empty_at(pos) {
                return Err(schema(format!("{cptr}/addr"), format!("duplicate cell {pos}")));
            }
            sheet.put(pos, content);
        }
        *wb.sheets.last_mut().expect("added above") = sheet;
    }
    Ok(wb)
}

/// RFC 4180 import: `=…` fields are formulas, decimal literals numbers, everything else text.
pub fn import_csv(bytes: &[u8], sheet_name: &str) -> Result<Workbook, CsvError> {
    let mut wb = Workbook::new();
    wb.add_sheet(sheet_name)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);
    for (ri, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CsvError::Syntax {
            line: e.position().map(|p| p.line()).unwrap_or(ri as u64 + 1),
            message: e.to_string(),
        })?;
        for (ci, field) in record.iter().enumerate() {
            if field.is_empty() {
                continue;
            }
            let pos = Pos::checked(ci as i64 + 1, ri as i64 + 1).ok_or_else(|| CsvError::Syntax {
                line: ri as u64 + 1,
                message: "record exceeds grid bounds".into(),
            })?;
            let addr = CellAddress::new(sheet_name, pos);
            let content = if field.starts_with('=') {
                CellContent::formula(field)
                    .map_err(|source| CsvError::FormulaParse { addr: pos.to_a1(), source })?
            } else if let Some(n) = parse_number_literal(field) {
                CellContent::Number(n)
            } else {
                CellContent::Text(field.to_string())
            };
            wb.set_cell(&addr, content)?;
        }
    }
    Ok(wb)
}

/// Writes the used area of one sheet (from A1) as CSV.
pub fn export_csv(wb: &Workbook, sheet_name: &str) -> Result<String, WorkbookError> {
    let sheet = wb
        .sheet(sheet_name)
        .ok_or_else(|| WorkbookError::UnknownSheet(sheet_name.to_string()))?;
    let mut writer = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    if let Some(used) = sheet.used_rect() {
        for row in 1..=used.end.row {
            let fields: Vec<String> =
                (1..=used.end.col).map(|col| sheet.get(Pos::new(col, row)).to_input()).collect();
            writer.write_record(&fields).expect("in-memory write");
        }
    }
    let bytes = writer.into_inner().expect("in-memory flush");
    Ok(String::from_utf8(bytes).expect("utf-8 input"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workbook::CellKind;

    #[test]
    fn minimal_file() {
        let wb = load_json(br#"{"version":"1","sheets":[{"name":"S","cells":[]}]}"#).unwrap();
        assert_eq!(wb.sheets().len(), 1);
        assert!(wb.sheet("S").unwrap().is_empty());
    }

    #[test]
    fn canonical_output_shape() {
        let mut wb = Workbook::with_sheet("S");
        let s = |a: &str| CellAddress::parse(a, "S").unwrap();
        wb.set_cell_input(&s("B1"), "=A1*2").unwrap();
        wb.set_cell_input(&s("A1"), "25000").unwrap();
        wb.set_cell_input(&s("A2"), "0.035").unwrap();
        wb.set_cell_input(&s("C1"), "TRUE").unwrap();
        let text = String::from_utf8(save_json(&wb)).unwrap();
        let expected = r#"{
  "version": "1",
  "sheets": [
    {
      "name": "S",
      "cells": [
        {
          "addr": "A1",
          "kind": "number",
          "value": 25000
        },
        {
          "addr": "B1",
          "kind": "formula",
          "formula": "=A1*2"
        },
        {
          "addr": "C1",
          "kind": "bool",
          "value": true
        },
        {
          "addr": "A2",
          "kind": "number",
          "value": 0.035
        }
      ]
    }
  ]
}
"#;
        assert_eq!(text, expected);
        assert_eq!(save_json(&load_json(text.as_bytes()).unwrap()), text.as_bytes());
    }

    #[test]
    fn schema_errors_point_at_the_problem() {
        let err = load_json(br#"{"version":"1","sheets":[{"name":"S","cells":[{"addr":"A1","kind":"number","value":"x"}]}]}"#)
            .unwrap_err();
        assert_eq!(
            err,
            LoadError::Schema { pointer: "/sheets/0/cells/0/value".into(), message: "expected a number".into() }
        );
        let err = load_json(br#"{"version":"1","sheets":[{"name":"S","cells":[{"addr":"A1","kind":"formula","formula":"=1+"}]}]}"#)
            .unwrap_err();
        assert!(matches!(err, LoadError::Schema { ref pointer, .. } if pointer == "/sheets/0/cells/0/formula"));
        let err = load_json(br#"{"version":"1","sheets":[{"name":"S","cells":[]},{"name":"S","cells":[]}]}"#).unwrap_err();
        assert!(matches!(err, LoadError::Schema { ref pointer, .. } if pointer == "/sheets/1/name"));
        let err = load_json(br#"{"version":"1","sheets":[{"name":"S","cells":[{"addr":"A1","kind":"text","value":"a"},{"addr":"A1","kind":"text","value":"b"}]}]}"#)
            .unwrap_err();
        assert!(matches!(err, LoadError::Schema { ref pointer, .. } if pointer == "/sheets/0/cells/1/addr"));
        assert!(matches!(load_json(b"{"), Err(LoadError::Json(_))));
        assert!(matches!(load_json(br#"{"version":"2","sheets":[]}"#), Err(LoadError::Schema { .. })));
        assert!(matches!(load_json(br#"{"version":"1","sheets":[],"extra":1}"#), Err(LoadError::Schema { .. })));
    }

    #[test]
    fn csv_classification() {
        let wb = import_csv(b"a,1\n=A1+1,", "S").unwrap();
        let sheet = wb.sheet("S").unwrap();
        assert_eq!(sheet.get(Pos::new(1, 1)), &CellContent::Text("a".into()));
        assert_eq!(sheet.get(Pos::new(2, 1)), &CellContent::Number(1.0));
        assert_eq!(sheet.get(Pos::new(1, 2)).kind(), CellKind::Formula);
        assert!(sheet.is_empty_at(Pos::new(2, 2)));
        assert_eq!(sheet.len(), 3);
    }

    #[test]
    fn csv_formula_error_reports_address() {
        let err = import_csv(b"1,2\n3,=SUM(A1:A3\n", "S").unwrap_err();
        assert!(matches!(err, CsvError::FormulaParse { ref addr, .. } if addr == "B2"));
    }

    #[test]
    fn csv_syntax_error_reports_line() {
        let err = import_csv(b"a,b\n\"unterminated,c\nx", "S");
        // the csv reader treats an unterminated quote at EOF as a field; probe a UTF-8 error instead
        assert!(err.is_ok());
        let err = import_csv(b"a\n\xff\xfe,b\n", "S").unwrap_err();
        assert!(matches!(err, CsvError::Syntax { line: 2, .. }));
    }

    #[test]
    fn csv_round_trip() {
        let wb = import_csv(b"Year,Balance\n1,25000\n2,=B2*1.035\n", "S").unwrap();
        let text = export_csv(&wb, "S").unwrap();
        assert_eq!(text, "Year,Balance\n1,25000\n2,=B2*1.035\n");
        assert_eq!(import_csv(text.as_bytes(), "S").unwrap(), wb);
    }
}
