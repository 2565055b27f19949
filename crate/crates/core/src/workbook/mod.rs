//! In-memory workbook model.

mod io;

use std::collections::BTreeMap;

use thiserror::Error;

pub use io::{
    content_from_json, content_to_json, export_csv, import_csv, load_json, save_json, CsvError, LoadError,
};

use crate::address::{AddressError, CellAddress, CellRange, Pos};
use crate::formula::{Formula, FormulaParseError};

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorkbookError {
    #[error("unknown sheet `{0}`")]
    UnknownSheet(String),
    #[error("duplicate sheet name `{0}`")]
    DuplicateSheet(String),
    #[error("sheet names must be non-empty")]
    EmptySheetName,
    #[error(transparent)]
    Address(#[from] AddressError),
    #[error("{addr}: {source}")]
    FormulaParse { addr: String, source: FormulaParseError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellKind {
    Empty,
    Number,
    Text,
    Bool,
    Formula,
}

/// What a cell holds. Formulas are always parsed.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum CellContent {
    #[default]
    Empty,
    Number(f64),
    Text(String),
    Bool(bool),
    Formula(Formula),
}

impl CellContent {
    pub fn formula(text: &str) -> Result<Self, FormulaParseError> {
        Formula::parse(text).map(CellContent::Formula)
    }

    /// Classifies typed input: `=` starts a formula, decimal literals are numbers,
    /// `TRUE`/`FALSE` are booleans, blank input is empty, anything else is text.
    pub fn from_input(text: &str) -> Result<Self, FormulaParseError> {
        if text.starts_with('=') {
            return Self::formula(text);
        }
        if text.trim().is_empty() {
            return Ok(CellContent::Empty);
        }
        if let Some(n) = parse_number_literal(text) {
            return Ok(CellContent::Number(n));
        }
        if text.eq_ignore_ascii_case("TRUE") {
            return Ok(CellContent::Bool(true));
        }
        if text.eq_ignore_ascii_case("FALSE") {
            return Ok(CellContent::Bool(false));
        }
        Ok(CellContent::Text(text.to_string()))
    }

    pub fn kind(&self) -> CellKind {
        match self {
            CellContent::Empty => CellKind::Empty,
            CellContent::Number(_) => CellKind::Number,
            CellContent::Text(_) => CellKind::Text,
            CellContent::Bool(_) => CellKind::Bool,
            CellContent::Formula(_) => CellKind::Formula,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, CellContent::Empty)
    }

    pub fn as_formula(&self) -> Option<&Formula> {
        match self {
            CellContent::Formula(f) => Some(f),
            _ => None,
        }
    }

    /// Text a user would type to recreate the content.
    pub fn to_input(&self) -> String {
        match self {
            CellContent::Empty => String::new(),
            CellContent::Number(n) => crate::formula::format_number(*n),
            CellContent::Text(t) => t.clone(),
            CellContent::Bool(b) => if *b { "TRUE" } else { "FALSE" }.to_string(),
            CellContent::Formula(f) => f.text().to_string(),
        }
    }
}

/// Strict decimal literal: optional sign, digits, optional fraction and exponent.
pub fn parse_number_literal(text: &str) -> Option<f64> {
    let s = text.trim();
    let body = s.strip_prefix(['-', '+']).unwrap_or(s);
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], Some(&body[i + 1..])),
        None => (body, None),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits = |t: &str| t.bytes().all(|b| b.is_ascii_digit());
    if (int.is_empty() && frac.is_empty()) || !digits(int) || !digits(frac) {
        return None;
    }
    if let Some(exp) = exponent {
        let exp = exp.strip_prefix(['-', '+']).unwrap_or(exp);
        if exp.is_empty() || !digits(exp) {
            return None;
        }
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// A named sparse grid. Empty cells are never stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sheet {
    name: String,
    cells: BTreeMap<Pos, CellContent>,
}

impl Sheet {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), cells: BTreeMap::new() }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn get(&self, pos: Pos) -> &CellContent {
        static EMPTY: CellContent = CellContent::Empty;
        self.cells.get(&pos).unwrap_or(&EMPTY)
    }

    pub fn is_empty_at(&self, pos: Pos) -> bool {
        !self.cells.contains_key(&pos)
    }

    /// Stores `content`, returning the previous content.
    pub fn put(&mut self, pos: Pos, content: CellContent) -> CellContent {
        let previous = if content.is_empty() {
            self.cells.remove(&pos)
        } else {
            self.cells.insert(pos, content)
        };
        previous.unwrap_or_default()
    }

    /// Stored cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (Pos, &CellContent)> {
        self.cells.iter().map(|(p, c)| (*p, c))
    }

    pub fn formulas(&self) -> impl Iterator<Item = (Pos, &Formula)> {
        self.cells.iter().filter_map(|(p, c)| c.as_formula().map(|f| (*p, f)))
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Stored cells inside `rect`, row-major.
    pub fn cells_in(&self, rect: crate::address::Rect) -> impl Iterator<Item = (Pos, &CellContent)> {
        let use_scan = rect.area() > self.cells.len() as u64;
        let scan = use_scan.then(|| self.cells.iter().filter(move |(p, _)| rect.contains(**p)));
        let ranged = (!use_scan).then(|| {
            (rect.start.row..=rect.end.row).flat_map(move |r| {
                self.cells.range(Pos::new(rect.start.col, r)..=Pos::new(rect.end.col, r))
            })
        });
        scan.into_iter()
            .flatten()
            .chain(ranged.into_iter().flatten())
            .map(|(p, c)| (*p, c))
    }

    /// Smallest rectangle covering every stored cell.
    pub fn used_rect(&self) -> Option<crate::address::Rect> {
        let first = self.cells.keys().next()?;
        let mut start = *first;
        let mut end = *first;
        for p in self.cells.keys() {
            start = Pos::new(start.col.min(p.col), start.row.min(p.row));
            end = Pos::new(end.col.max(p.col), end.row.max(p.row));
        }
        Some(crate::address::Rect { start, end })
    }
}

/// A single-cell change, sufficient to undo itself.
#[derive(Debug, Clone, PartialEq)]
pub struct Delta {
    pub addr: CellAddress,
    pub before: CellContent,
    pub after: CellContent,
}

impl Delta {
    pub fn is_noop(&self) -> bool {
        self.before == self.after
    }

    pub fn inverse(&self) -> Delta {
        Delta { addr: self.addr.clone(), before: self.after.clone(), after: self.before.clone() }
    }
}

/// An ordered list of named sheets.
#[derive(Debug, Clone, PartialEq)]
pub struct Workbook {
    version: String,
    sheets: Vec<Sheet>,
}

impl Default for Workbook {
    fn default() -> Self {
        Self::new()
    }
}

impl Workbook {
    pub fn new() -> Self {
        Self { version: FORMAT_VERSION.to_string(), sheets: Vec::new() }
    }

    pub fn with_sheet(name: &str) -> Self {
        let mut wb = Self::new();
        wb.add_sheet(name).expect("fresh workbook");
        wb
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn add_sheet(&mut self, name: &str) -> Result<&mut Sheet, WorkbookError> {
        if name.is_empty() {
            return Err(WorkbookError::EmptySheetName);
        }
        if self.sheet(name).is_some() {
            return Err(WorkbookError::DuplicateSheet(name.to_string()));
        }
        self.sheets.push(Sheet::new(name));
        Ok(self.sheets.last_mut().expect("just pushed"))
    }

    pub fn sheets(&self) -> &[Sheet] {
        &self.sheets
    }

    pub fn sheet(&self, name: &str) -> Option<&Sheet> {
        self.sheets.iter().find(|s| s.name == name)
    }

    fn sheet_mut(&mut self, name: &str) -> Result<&mut Sheet, WorkbookError> {
        self.sheets
            .iter_mut()
            .find(|s| s.name == name)
            .ok_or_else(|| WorkbookError::UnknownSheet(name.to_string()))
    }

    /// Name of the first sheet, used for unqualified addresses.
    pub fn default_sheet(&self) -> &str {
        self.sheets.first().map(|s| s.name.as_str()).unwrap_or("")
    }

    pub fn parse_a1(&self, text: &str) -> Result<CellAddress, WorkbookError> {
        Ok(CellAddress::parse(text, self.default_sheet())?)
    }

    pub fn parse_range(&self, text: &str) -> Result<CellRange, WorkbookError> {
        Ok(CellRange::parse(text, self.default_sheet())?)
    }

    pub fn get_cell(&self, addr: &CellAddress) -> Result<&CellContent, WorkbookError> {
        self.sheet(&addr.sheet)
            .map(|s| s.get(addr.pos))
            .ok_or_else(|| WorkbookError::UnknownSheet(addr.sheet.clone()))
    }

    pub fn set_cell(&mut self, addr: &CellAddress, content: CellContent) -> Result<Delta, WorkbookError> {
        let sheet = self.sheet_mut(&addr.sheet)?;
        let after = content.clone();
        let before = sheet.put(addr.pos, content);
        Ok(Delta { addr: addr.clone(), before, after })
    }

    /// Parses `input` as typed text and stores it.
    pub fn set_cell_input(&mut self, addr: &CellAddress, input: &str) -> Result<Delta, WorkbookError> {
        let content = CellContent::from_input(input)
            .map_err(|source| WorkbookError::FormulaParse { addr: addr.to_string(), source })?;
        self.set_cell(addr, content)
    }

    /// Reverts deltas newest-first.
    pub fn undo(&mut self, deltas: &[Delta]) -> Result<(), WorkbookError> {
        for d in deltas.iter().rev() {
            self.set_cell(&d.addr, d.before.clone())?;
        }
        Ok(())
    }

    pub fn formula_count(&self) -> usize {
        self.sheets.iter().map(|s| s.formulas().count()).sum()
    }
}
