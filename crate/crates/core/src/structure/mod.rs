//! Formula-group and reference-group inference.
//!
//! Formula cells are bucketed by their relative formula. Within a bucket,
//! seeds are visited row-major and each unclaimed seed grows a rectangle:
//! first downward as far as possible, then rightward while every cell of the
//! next column matches and is unclaimed.

mod perspective;

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use perspective::{perspective, Perspective, RenderItem, RenderSet, PALETTE_SIZE};

use crate::address::{CellAddress, CellRange, Pos, Rect};
use crate::formula::{absolutize, print_formula, relativize, Coord, Expr, RefLeaf, ReferenceSlot, RelRef, RelativeFormula, RelativizeError};
use crate::workbook::{Sheet, Workbook};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StructureError {
    #[error("cross-sheet reference in formula at {0}")]
    CrossSheetRef(CellAddress),
    #[error("unknown group `{0}`")]
    UnknownGroup(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormulaGroup {
    pub id: String,
    pub sheet: String,
    pub range: Rect,
    pub rel: RelativeFormula,
    /// R1C1 text of `rel`.
    pub key: String,
    pub shape_key: String,
}

impl FormulaGroup {
    pub fn cell_range(&self) -> CellRange {
        CellRange::new(self.sheet.clone(), self.range)
    }

    /// Canonical A1 text of the shared formula at the top-left cell.
    pub fn formula_text(&self) -> String {
        self.formula_at(self.range.start).map(|a| print_formula(&a)).unwrap_or_default()
    }

    pub fn formula_at(&self, host: Pos) -> Result<crate::formula::FormulaAst, RelativizeError> {
        absolutize(&self.rel, host)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceGroup {
    /// Index of the owning group in [`StructureModel::groups`].
    pub owner: usize,
    pub slot: ReferenceSlot,
    pub range: Rect,
    /// The union of instantiated references is not a rectangle.
    pub fragmented: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StructureModel {
    pub default_sheet: String,
    pub groups: Vec<FormulaGroup>,
    pub ref_groups: Vec<ReferenceGroup>,
    /// `(a, b)`: some reference group of `a` overlaps `b`.
    pub edges: Vec<(usize, usize)>,
    owners: HashMap<String, HashMap<Pos, usize>>,
    palette: Vec<usize>,
}

fn group_id(sheet: &str, range: Rect, key: &str) -> String {
    let mut h = Sha256::new();
    h.update(sheet.as_bytes());
    h.update([0]);
    h.update(range.to_a1().as_bytes());
    h.update([0]);
    h.update(key.as_bytes());
    let digest = h.finalize();
    let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
    format!("g{hex}")
}

/// Rectangles of the greedy decomposition of one sheet, with their bucket keys.
pub(crate) fn decompose(cells: &BTreeMap<Pos, usize>) -> Vec<(Rect, usize)> {
    let mut claimed: HashSet<Pos> = HashSet::with_capacity(cells.len());
    let same = |p: Pos, b: usize, claimed: &HashSet<Pos>| cells.get(&p) == Some(&b) && !claimed.contains(&p);
    let mut out = Vec::new();
    for (&seed, &b) in cells {
        if claimed.contains(&seed) {
            continue;
        }
        let mut bottom = seed.row;
        while let Some(next) = Pos::checked(seed.col as i64, bottom as i64 + 1) {
            if !same(next, b, &claimed) {
                break;
            }
            bottom = next.row;
        }
        let mut right = seed.col;
        'widen: while let Some(col) = Pos::checked(right as i64 + 1, seed.row as i64).map(|p| p.col) {
            for row in seed.row..=bottom {
                if !same(Pos::new(col, row), b, &claimed) {
                    break 'widen;
                }
            }
            right = col;
        }
        let rect = Rect::new(seed, Pos::new(right, bottom));
        for p in rect.cells() {
            claimed.insert(p);
        }
        out.push((rect, b));
    }
    out
}

/// Union of per-host intervals along one axis, as (bounding interval, contiguous).
fn axis_union(lo: u32, hi: u32, a: Coord, b: Coord) -> (u32, u32, bool) {
    let at = |c: Coord, host: u32| match c {
        Coord::Offset(d) => (host as i64 + d) as u32,
        Coord::Abs(v) => v,
    };
    let mut spans: Vec<(u32, u32)> = (lo..=hi)
        .map(|h| {
            let (x, y) = (at(a, h), at(b, h));
            (x.min(y), x.max(y))
        })
        .collect();
    spans.sort_unstable();
    let (mut start, mut end) = spans[0];
    let mut contiguous = true;
    for &(s, e) in &spans[1..] {
        if s > end + 1 {
            contiguous = false;
        }
        start = start.min(s);
        end = end.max(e);
    }
    (start, end, contiguous)
}

fn reference_group(owner: usize, range: Rect, slot: ReferenceSlot, a: &RelRef, b: &RelRef) -> ReferenceGroup {
    let (c0, c1, col_ok) = axis_union(range.start.col, range.end.col, a.col, b.col);
    let (r0, r1, row_ok) = axis_union(range.start.row, range.end.row, a.row, b.row);
    ReferenceGroup {
        owner,
        slot,
        range: Rect::new(Pos::new(c0, r0), Pos::new(c1, r1)),
        fragmented: !(col_ok && row_ok),
    }
}

fn infer_sheet(sheet: &Sheet, groups: &mut Vec<FormulaGroup>) -> Result<(), StructureError> {
    let mut bucket_of_key: HashMap<String, usize> = HashMap::new();
    let mut buckets: Vec<(RelativeFormula, String)> = Vec::new();
    let mut cells: BTreeMap<Pos, usize> = BTreeMap::new();
    for (pos, formula) in sheet.formulas() {
        let host = CellAddress::new(sheet.name(), pos);
        let rel = relativize(formula.ast(), &host).map_err(|_| StructureError::CrossSheetRef(host.clone()))?;
        let key = rel.key();
        let b = *bucket_of_key.entry(key.clone()).or_insert_with(|| {
            buckets.push((rel, key));
            buckets.len() - 1
        });
        cells.insert(pos, b);
    }
    for (rect, b) in decompose(&cells) {
        let (rel, key) = &buckets[b];
        groups.push(FormulaGroup {
            id: group_id(sheet.name(), rect, key),
            sheet: sheet.name().to_string(),
            range: rect,
            rel: rel.clone(),
            key: key.clone(),
            shape_key: rel.shape_key(),
        });
    }
    Ok(())
}

/// Infers the structure model of every sheet.
pub fn infer(wb: &Workbook) -> Result<StructureModel, StructureError> {
    let mut groups = Vec::new();
    for sheet in wb.sheets() {
        infer_sheet(sheet, &mut groups)?;
    }
    let mut owners: HashMap<String, HashMap<Pos, usize>> = HashMap::new();
    for (i, g) in groups.iter().enumerate() {
        let map = owners.entry(g.sheet.clone()).or_default();
        for p in g.range.cells() {
            map.insert(p, i);
        }
    }

    let mut ref_groups = Vec::new();
    for (i, g) in groups.iter().enumerate() {
        for (leaf, slot) in g.rel.leaves().into_iter().zip(g.rel.slots()) {
            let (a, b) = match leaf {
                RefLeaf::Single(r) => (r, r),
                RefLeaf::Range(a, b) => (a, b),
            };
            ref_groups.push(reference_group(i, g.range, slot, a, b));
        }
    }

    let mut edges = Vec::new();
    for rg in &ref_groups {
        let g = &groups[rg.owner];
        let (Some(sheet), Some(map)) = (wb.sheet(&g.sheet), owners.get(&g.sheet)) else {
            continue;
        };
        for (p, c) in sheet.cells_in(rg.range) {
            if c.as_formula().is_some() {
                edges.push((rg.owner, map[&p]));
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();

    let mut by_id: Vec<usize> = (0..groups.len()).collect();
    by_id.sort_by(|&a, &b| groups[a].id.cmp(&groups[b].id));
    let mut palette = vec![0; groups.len()];
    for (rank, &g) in by_id.iter().enumerate() {
        palette[g] = rank % PALETTE_SIZE;
    }

    let default_sheet = wb.sheets().first().map(|s| s.name().to_string()).unwrap_or_default();
    Ok(StructureModel { default_sheet, groups, ref_groups, edges, owners, palette })
}

impl StructureModel {
    pub fn group(&self, id: &str) -> Option<&FormulaGroup> {
        self.groups.iter().find(|g| g.id == id)
    }

    pub fn group_index(&self, id: &str) -> Option<usize> {
        self.groups.iter().position(|g| g.id == id)
    }

    /// Index of the group owning the formula cell at `addr`.
    pub fn owner_of(&self, addr: &CellAddress) -> Option<usize> {
        self.owners.get(&addr.sheet)?.get(&addr.pos).copied()
    }

    /// Looks a group up by id, or by exact range text (`D2:D8`).
    pub fn resolve_group(&self, text: &str) -> Option<usize> {
        self.group_index(text).or_else(|| {
            let range = CellRange::parse(text, &self.default_sheet).ok()?;
            self.groups.iter().position(|g| g.sheet == range.sheet && g.range == range.rect)
        })
    }

    pub fn palette_index(&self, group: usize) -> usize {
        self.palette[group]
    }

    /// Reference groups of `id`, one per slot in source order.
    pub fn reference_groups_of(&self, id: &str) -> Result<Vec<&ReferenceGroup>, StructureError> {
        let g = self.group_index(id).ok_or_else(|| StructureError::UnknownGroup(id.to_string()))?;
        Ok(self.ref_groups.iter().filter(|r| r.owner == g).collect())
    }

    /// Owning formula group of `addr` plus every reference group containing it.
    pub fn groups_at(&self, addr: &CellAddress) -> (Option<&FormulaGroup>, Vec<&ReferenceGroup>) {
        let owner = self.owner_of(addr).map(|i| &self.groups[i]);
        let refs = self
            .ref_groups
            .iter()
            .filter(|r| self.groups[r.owner].sheet == addr.sheet && r.range.contains(addr.pos))
            .collect();
        (owner, refs)
    }

    pub fn render_range(&self, sheet: &str, rect: Rect) -> String {
        CellRange::new(sheet, rect).render(&self.default_sheet)
    }

    /// Groups in `(sheet, range, key)` form, sorted; convenient for comparing models.
    pub fn summary(&self) -> Vec<GroupSummary> {
        let mut out: Vec<GroupSummary> = self
            .groups
            .iter()
            .map(|g| GroupSummary {
                range: self.render_range(&g.sheet, g.range),
                formula: g.formula_text(),
                cells: g.range.area(),
            })
            .collect();
        out.sort();
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let doc = ModelJson {
            groups: self
                .groups
                .iter()
                .map(|g| GroupJson {
                    id: &g.id,
                    range: self.render_range(&g.sheet, g.range),
                    formula: g.formula_text(),
                    cells: g.range.area(),
                })
                .collect(),
            ref_groups: self
                .ref_groups
                .iter()
                .map(|r| RefGroupJson {
                    owner: &self.groups[r.owner].id,
                    slot: r.slot.index,
                    range: self.render_range(&self.groups[r.owner].sheet, r.range),
                    fragmented: r.fragmented,
                })
                .collect(),
            edges: self.edges.iter().map(|&(a, b)| [&self.groups[a].id, &self.groups[b].id]).collect(),
        };
        serde_json::to_value(doc).expect("serializable")
    }

    /// One line per group: `D2:D8  =B2+C2-5000  (7 cells)`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for g in &self.groups {
            let n = g.range.area();
            out.push_str(&format!(
                "{}  {}  ({} cell{})\n",
                self.render_range(&g.sheet, g.range),
                g.formula_text(),
                n,
                if n == 1 { "" } else { "s" }
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct GroupSummary {
    pub range: String,
    pub formula: String,
    pub cells: u64,
}

#[derive(Serialize)]
struct ModelJson<'a> {
    groups: Vec<GroupJson<'a>>,
    #[serde(rename = "refGroups")]
    ref_groups: Vec<RefGroupJson<'a>>,
    edges: Vec<[&'a String; 2]>,
}

#[derive(Serialize)]
struct GroupJson<'a> {
    id: &'a str,
    range: String,
    formula: String,
    cells: u64,
}

#[derive(Serialize)]
struct RefGroupJson<'a> {
    owner: &'a str,
    slot: usize,
    range: String,
    fragmented: bool,
}

/// Stacking direction: `Vertical` lines are rows, `Horizontal` lines are columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Vertical,
    Horizontal,
}

impl Axis {
    pub fn along(self, p: Pos) -> u32 {
        match self {
            Axis::Vertical => p.row,
            Axis::Horizontal => p.col,
        }
    }

    pub fn across(self, p: Pos) -> u32 {
        match self {
            Axis::Vertical => p.col,
            Axis::Horizontal => p.row,
        }
    }

    pub fn pos(self, along: u32, across: u32) -> Pos {
        match self {
            Axis::Vertical => Pos::new(across, along),
            Axis::Horizontal => Pos::new(along, across),
        }
    }

    pub fn along_span(self, r: Rect) -> (u32, u32) {
        (self.along(r.start), self.along(r.end))
    }

    pub fn across_span(self, r: Rect) -> (u32, u32) {
        (self.across(r.start), self.across(r.end))
    }

    pub fn rect(self, along: (u32, u32), across: (u32, u32)) -> Rect {
        Rect::new(self.pos(along.0, across.0), self.pos(along.1, across.1))
    }
}

impl StructureModel {
    /// Groups reachable from `seeds` over graph edges in either direction, on the same sheet.
    pub fn component(&self, seeds: &[usize]) -> Vec<usize> {
        let mut adjacent = vec![Vec::new(); self.groups.len()];
        for &(a, b) in &self.edges {
            adjacent[a].push(b);
            adjacent[b].push(a);
        }
        let mut seen = vec![false; self.groups.len()];
        let mut stack: Vec<usize> = seeds.to_vec();
        for &s in seeds {
            seen[s] = true;
        }
        while let Some(g) = stack.pop() {
            for &n in &adjacent[g] {
                if !seen[n] && self.groups[n].sheet == self.groups[g].sheet {
                    seen[n] = true;
                    stack.push(n);
                }
            }
        }
        (0..self.groups.len()).filter(|&g| seen[g]).collect()
    }
}

/// True when `rel` has no references at all.
pub fn is_constant(rel: &RelativeFormula) -> bool {
    fn walk(e: &RelativeFormula) -> bool {
        match e {
            Expr::Ref(_) | Expr::Range(..) => false,
            Expr::Number(_) | Expr::Text(_) | Expr::Bool(_) => true,
            Expr::Unary(_, c) | Expr::Paren(c) => walk(c),
            Expr::Binary(_, l, r) => walk(l) && walk(r),
            Expr::Call(_, args) => args.iter().all(walk),
        }
    }
    walk(rel)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wb(cells: &[(&str, &str)]) -> Workbook {
        let mut wb = Workbook::with_sheet("S");
        for (a, input) in cells {
            let addr = wb.parse_a1(a).unwrap();
            wb.set_cell_input(&addr, input).unwrap();
        }
        wb
    }

    fn ranges(m: &StructureModel) -> Vec<String> {
        m.groups.iter().map(|g| g.range.to_a1()).collect()
    }

    #[test]
    fn column_first_growth() {
        // a 2x2 block of "=left+1" plus a tail below the left column
        let m = infer(&wb(&[
            ("B1", "=A1+1"),
            ("C1", "=B1+1"),
            ("B2", "=A2+1"),
            ("C2", "=B2+1"),
            ("B3", "=A3+1"),
        ]))
        .unwrap();
        assert_eq!(ranges(&m), ["B1:B3", "C1:C2"]);
    }

    #[test]
    fn widens_when_columns_match() {
        let m = infer(&wb(&[("B1", "=A1*2"), ("C1", "=B1*2"), ("B2", "=A2*2"), ("C2", "=B2*2")])).unwrap();
        assert_eq!(ranges(&m), ["B1:C2"]);
        assert_eq!(m.ref_groups[0].range.to_a1(), "A1:B2");
    }

    #[test]
    fn range_slot_union_and_abs_refs() {
        let m = infer(&wb(&[("B1", "=SUM(A1:A3)"), ("B2", "=SUM(A2:A4)"), ("C1", "=$A$1*2"), ("C2", "=$A$1*2")])).unwrap();
        let sum = m.resolve_group("B1:B2").unwrap();
        let abs = m.resolve_group("C1:C2").unwrap();
        let rg = |g: usize| m.ref_groups.iter().find(|r| r.owner == g).unwrap();
        assert_eq!(rg(sum).range.to_a1(), "A1:A4");
        assert_eq!(rg(abs).range.to_a1(), "A1");
        assert!(!rg(sum).fragmented && !rg(abs).fragmented);
    }

    #[test]
    fn cross_sheet_refs_are_rejected() {
        let mut w = wb(&[("A1", "=Other!B1")]);
        w.add_sheet("Other").unwrap();
        assert!(matches!(infer(&w), Err(StructureError::CrossSheetRef(a)) if a.pos.to_a1() == "A1"));
    }

    #[test]
    fn ids_are_stable_and_distinct() {
        let w = wb(&[("A1", "=1"), ("A2", "=2"), ("B1", "=A1")]);
        let a = infer(&w).unwrap();
        let b = infer(&w).unwrap();
        assert_eq!(a, b);
        let mut ids: Vec<&str> = a.groups.iter().map(|g| g.id.as_str()).collect();
        ids.dedup();
        assert_eq!(ids.len(), 3);
        assert!(ids.iter().all(|id| id.len() == 13 && id.starts_with('g')));
    }

    #[test]
    fn self_referencing_groups_get_a_self_edge() {
        let m = infer(&wb(&[("A1", "1"), ("A2", "=A1+1"), ("A3", "=A2+1"), ("A4", "=A3+1")])).unwrap();
        assert_eq!(ranges(&m), ["A2:A4"]);
        assert_eq!(m.edges, [(0, 0)]);
    }
}
