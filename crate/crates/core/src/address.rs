//! A1-style cell addressing: positions, rectangles and sheet-qualified addresses.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

/// Largest addressable column ("XFD").
pub const MAX_COL: u32 = 16_384;
/// Largest addressable row.
pub const MAX_ROW: u32 = 1_048_576;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AddressError {
    #[error("malformed address `{0}`")]
    MalformedAddress(String),
    #[error("address `{0}` is outside the grid")]
    OutOfBounds(String),
}

/// A 1-based (column, row) position on a single sheet.
///
/// Ordering is row-major: all of row 1 sorts before row 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Pos {
    pub col: u32,
    pub row: u32,
}

impl Ord for Pos {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.row, self.col).cmp(&(other.row, other.col))
    }
}

impl PartialOrd for Pos {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Pos {
    pub const fn new(col: u32, row: u32) -> Self {
        Self { col, row }
    }

    /// Builds a position from signed coordinates, `None` when off the grid.
    pub fn checked(col: i64, row: i64) -> Option<Self> {
        if (1..=MAX_COL as i64).contains(&col) && (1..=MAX_ROW as i64).contains(&row) {
            Some(Self::new(col as u32, row as u32))
        } else {
            None
        }
    }

    pub fn offset(self, d_col: i64, d_row: i64) -> Option<Self> {
        Self::checked(self.col as i64 + d_col, self.row as i64 + d_row)
    }

    pub fn to_a1(self) -> String {
        format!("{}{}", column_name(self.col), self.row)
    }

    /// Parses an unqualified `[A-Z]+[0-9]+` reference (case-insensitive, `$` markers allowed).
    pub fn parse_a1(text: &str) -> Result<Self, AddressError> {
        let malformed = || AddressError::MalformedAddress(text.to_string());
        let s = text.trim();
        let s = s.strip_prefix('$').unwrap_or(s);
        let letters_end = s
            .find(|c: char| !c.is_ascii_alphabetic())
            .ok_or_else(malformed)?;
        let (letters, rest) = s.split_at(letters_end);
        let digits = rest.strip_prefix('$').unwrap_or(rest);
        if letters.is_empty() || digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(malformed());
        }
        let col = column_index(letters).ok_or_else(|| AddressError::OutOfBounds(text.to_string()))?;
        let row: u64 = digits
            .parse()
            .map_err(|_| AddressError::OutOfBounds(text.to_string()))?;
        if row == 0 {
            return Err(malformed());
        }
        if row > MAX_ROW as u64 {
            return Err(AddressError::OutOfBounds(text.to_string()));
        }
        Ok(Self::new(col, row as u32))
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", column_name(self.col), self.row)
    }
}

/// Bijective base-26 column name: 1 → "A", 26 → "Z", 27 → "AA".
pub fn column_name(mut col: u32) -> String {
    let mut out = Vec::new();
    while col > 0 {
        let rem = (col - 1) % 26;
        out.push(b'A' + rem as u8);
        col = (col - 1) / 26;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

/// Inverse of [`column_name`]; `None` when the letters exceed [`MAX_COL`].
pub fn column_index(letters: &str) -> Option<u32> {
    if letters.is_empty() || letters.len() > 3 {
        return None;
    }
    let mut col: u32 = 0;
    for b in letters.bytes() {
        if !b.is_ascii_alphabetic() {
            return None;
        }
        col = col * 26 + (b.to_ascii_uppercase() - b'A' + 1) as u32;
    }
    (col <= MAX_COL).then_some(col)
}

/// Axis-aligned rectangle of positions with normalized corners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rect {
    pub start: Pos,
    pub end: Pos,
}

impl Ord for Rect {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.start, self.end).cmp(&(other.start, other.end))
    }
}

impl PartialOrd for Rect {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Rect {
    /// Builds a rectangle from any two opposite corners.
    pub fn new(a: Pos, b: Pos) -> Self {
        Self {
            start: Pos::new(a.col.min(b.col), a.row.min(b.row)),
            end: Pos::new(a.col.max(b.col), a.row.max(b.row)),
        }
    }

    pub fn cell(p: Pos) -> Self {
        Self { start: p, end: p }
    }

    pub fn width(&self) -> u32 {
        self.end.col - self.start.col + 1
    }

    pub fn height(&self) -> u32 {
        self.end.row - self.start.row + 1
    }

    pub fn area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }

    pub fn contains(&self, p: Pos) -> bool {
        (self.start.col..=self.end.col).contains(&p.col)
            && (self.start.row..=self.end.row).contains(&p.row)
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.contains(other.start) && self.contains(other.end)
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.start.col <= other.end.col
            && other.start.col <= self.end.col
            && self.start.row <= other.end.row
            && other.start.row <= self.end.row
    }

    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        self.intersects(other).then(|| Rect {
            start: Pos::new(self.start.col.max(other.start.col), self.start.row.max(other.start.row)),
            end: Pos::new(self.end.col.min(other.end.col), self.end.row.min(other.end.row)),
        })
    }

    pub fn translate(&self, d_col: i64, d_row: i64) -> Option<Rect> {
        Some(Rect {
            start: self.start.offset(d_col, d_row)?,
            end: self.end.offset(d_col, d_row)?,
        })
    }

    /// Cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = Pos> + '_ {
        let (c0, c1) = (self.start.col, self.end.col);
        (self.start.row..=self.end.row).flat_map(move |r| (c0..=c1).map(move |c| Pos::new(c, r)))
    }

    /// `"B3:B9"`, or `"D9"` for a single cell.
    pub fn to_a1(&self) -> String {
        if self.start == self.end {
            self.start.to_a1()
        } else {
            format!("{}:{}", self.start, self.end)
        }
    }

    pub fn parse_a1(text: &str) -> Result<Self, AddressError> {
        match text.split_once(':') {
            Some((a, b)) => Ok(Rect::new(Pos::parse_a1(a)?, Pos::parse_a1(b)?)),
            None => Ok(Rect::cell(Pos::parse_a1(text)?)),
        }
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_a1())
    }
}

/// A position on a named sheet.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellAddress {
    pub sheet: String,
    pub pos: Pos,
}

impl CellAddress {
    pub fn new(sheet: impl Into<String>, pos: Pos) -> Self {
        Self { sheet: sheet.into(), pos }
    }

    pub fn col(&self) -> u32 {
        self.pos.col
    }

    pub fn row(&self) -> u32 {
        self.pos.row
    }

    /// Parses `A1` or `Sheet!A1` / `'My Sheet'!A1`; unprefixed addresses land on `default_sheet`.
    pub fn parse(text: &str, default_sheet: &str) -> Result<Self, AddressError> {
        let (sheet, rest) = split_sheet_prefix(text)?;
        let pos = Pos::parse_a1(rest)?;
        if rest.contains('$') {
            return Err(AddressError::MalformedAddress(text.to_string()));
        }
        Ok(Self::new(sheet.unwrap_or_else(|| default_sheet.to_string()), pos))
    }

    /// Renders unqualified when on `default_sheet`, qualified otherwise.
    pub fn render(&self, default_sheet: &str) -> String {
        if self.sheet == default_sheet {
            self.pos.to_a1()
        } else {
            format!("{}!{}", quote_sheet(&self.sheet), self.pos)
        }
    }
}

impl fmt::Display for CellAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}!{}", quote_sheet(&self.sheet), self.pos)
    }
}

/// A rectangle on a named sheet.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellRange {
    pub sheet: String,
    pub rect: Rect,
}

impl CellRange {
    pub fn new(sheet: impl Into<String>, rect: Rect) -> Self {
        Self { sheet: sheet.into(), rect }
    }

    pub fn start(&self) -> CellAddress {
        CellAddress::new(self.sheet.clone(), self.rect.start)
    }

    pub fn end(&self) -> CellAddress {
        CellAddress::new(self.sheet.clone(), self.rect.end)
    }

    pub fn area(&self) -> u64 {
        self.rect.area()
    }

    pub fn contains(&self, addr: &CellAddress) -> bool {
        addr.sheet == self.sheet && self.rect.contains(addr.pos)
    }

    pub fn parse(text: &str, default_sheet: &str) -> Result<Self, AddressError> {
        let (sheet, rest) = split_sheet_prefix(text)?;
        let rect = Rect::parse_a1(rest)?;
        Ok(Self::new(sheet.unwrap_or_else(|| default_sheet.to_string()), rect))
    }

    pub fn render(&self, default_sheet: &str) -> String {
        if self.sheet == default_sheet {
            self.rect.to_a1()
        } else {
            format!("{}!{}", quote_sheet(&self.sheet), self.rect)
        }
    }
}

impl fmt::Display for CellRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}!{}", quote_sheet(&self.sheet), self.rect)
    }
}

fn split_sheet_prefix(text: &str) -> Result<(Option<String>, &str), AddressError> {
    let malformed = || AddressError::MalformedAddress(text.to_string());
    if let Some(stripped) = text.strip_prefix('\'') {
        // 'It''s here'!A1
        let mut name = String::new();
        let mut chars = stripped.char_indices().peekable();
        while let Some((i, c)) = chars.next() {
            if c == '\'' {
                if matches!(chars.peek(), Some((_, '\''))) {
                    chars.next();
                    name.push('\'');
                    continue;
                }
                let rest = &stripped[i + 1..];
                let rest = rest.strip_prefix('!').ok_or_else(malformed)?;
                if name.is_empty() {
                    return Err(malformed());
                }
                return Ok((Some(name), rest));
            }
            name.push(c);
        }
        return Err(malformed());
    }
    match text.rsplit_once('!') {
        Some((sheet, rest)) if !sheet.is_empty() => Ok((Some(sheet.to_string()), rest)),
        Some(_) => Err(malformed()),
        None => Ok((None, text)),
    }
}

/// Quotes a sheet name when it contains anything beyond `[A-Za-z0-9_]`.
pub fn quote_sheet(name: &str) -> String {
    let plain = !name.is_empty()
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !name.starts_with(|c: char| c.is_ascii_digit());
    if plain {
        name.to_string()
    } else {
        format!("'{}'", name.replace('\'', "''"))
    }
}
