//! Dependency-ordered formula evaluation with cycle detection.
//!
//! Blank cells read as 0 in arithmetic and "" in concatenation, `IF` is eager,
//! and any error reached through a reference propagates to the reader.

mod functions;
mod graph;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

pub use functions::round_half_away;
pub use graph::DependencyGraph;

use functions::{call, finite, to_number, to_text, Arg};
use graph::{formula_targets, resolve_sheet, Key};

use crate::address::{CellAddress, Rect};
use crate::formula::{BinaryOp, CellRef, Expr, FormulaAst, UnaryOp};
use crate::workbook::{CellContent, Delta, Workbook};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorCode {
    Div0,
    Cycle,
    Ref,
    Value,
    Name,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::Div0 => "DIV0",
            ErrorCode::Cycle => "CYCLE",
            ErrorCode::Ref => "REF",
            ErrorCode::Value => "VALUE",
            ErrorCode::Name => "NAME",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellValue {
    Number(f64),
    Text(String),
    Bool(bool),
    Blank,
    Error(ErrorCode),
}

impl CellValue {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            CellValue::Number(n) => Some(*n),
            _ => None,
        }
    }

    /// Same value; numbers may differ by `rel_tol` relative to the larger magnitude.
    pub fn approx_eq(&self, other: &CellValue, rel_tol: f64) -> bool {
        match (self, other) {
            (CellValue::Number(a), CellValue::Number(b)) => {
                a == b || (a - b).abs() <= rel_tol * a.abs().max(b.abs())
            }
            _ => self == other,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        use serde_json::json;
        match self {
            CellValue::Number(n) => json!({"kind": "number", "value": n}),
            CellValue::Text(t) => json!({"kind": "text", "value": t}),
            CellValue::Bool(b) => json!({"kind": "bool", "value": b}),
            CellValue::Blank => json!({"kind": "blank"}),
            CellValue::Error(e) => json!({"kind": "error", "code": e.as_str()}),
        }
    }
}

impl fmt::Display for CellValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellValue::Number(n) => f.write_str(&crate::formula::format_number(*n)),
            CellValue::Text(t) => f.write_str(t),
            CellValue::Bool(b) => f.write_str(if *b { "TRUE" } else { "FALSE" }),
            CellValue::Blank => Ok(()),
            CellValue::Error(e) => write!(f, "{e}"),
        }
    }
}

/// Evaluated values by address; blank results are absent.
pub type Values = BTreeMap<CellAddress, CellValue>;

fn literal(content: &CellContent) -> CellValue {
    match content {
        CellContent::Empty | CellContent::Formula(_) => CellValue::Blank,
        CellContent::Number(n) => CellValue::Number(*n),
        CellContent::Text(t) => CellValue::Text(t.clone()),
        CellContent::Bool(b) => CellValue::Bool(*b),
    }
}

struct Evaluator<'a> {
    wb: &'a Workbook,
    computed: HashMap<Key, CellValue>,
    /// Values of formula cells not being recomputed.
    fallback: Option<&'a Values>,
}

impl Evaluator<'_> {
    fn read(&self, key: Key) -> CellValue {
        let sheet = &self.wb.sheets()[key.0];
        match sheet.get(key.1) {
            CellContent::Formula(_) => {
                if let Some(v) = self.computed.get(&key) {
                    return v.clone();
                }
                self.fallback
                    .and_then(|f| f.get(&CellAddress::new(sheet.name(), key.1)))
                    .cloned()
                    .unwrap_or(CellValue::Blank)
            }
            other => literal(other),
        }
    }

    fn range_values(&self, sheet: usize, rect: Rect) -> Vec<CellValue> {
        self.wb.sheets()[sheet].cells_in(rect).map(|(p, _)| self.read((sheet, p))).collect()
    }

    fn cell_ref(&self, host_sheet: usize, r: &CellRef) -> CellValue {
        match resolve_sheet(self.wb, host_sheet, r.sheet.as_deref()) {
            Some(s) => self.read((s, r.pos())),
            None => CellValue::Error(ErrorCode::Ref),
        }
    }

    fn eval(&self, host_sheet: usize, e: &FormulaAst) -> CellValue {
        match e {
            Expr::Number(n) => CellValue::Number(*n),
            Expr::Text(t) => CellValue::Text(t.clone()),
            Expr::Bool(b) => CellValue::Bool(*b),
            Expr::Ref(r) => self.cell_ref(host_sheet, r),
            // a bare range outside an aggregating function
            Expr::Range(..) => CellValue::Error(ErrorCode::Value),
            Expr::Paren(inner) => self.eval(host_sheet, inner),
            Expr::Unary(op, inner) => match to_number(&self.eval(host_sheet, inner)) {
                Ok(n) => CellValue::Number(if *op == UnaryOp::Neg { -n } else { n }),
                Err(code) => CellValue::Error(code),
            },
            Expr::Binary(op, l, r) => {
                let l = self.eval(host_sheet, l);
                let r = self.eval(host_sheet, r);
                binary(*op, &l, &r)
            }
            Expr::Call(name, args) => {
                let args: Vec<Arg> = args
                    .iter()
                    .map(|a| match a {
                        Expr::Range(x, y) => match resolve_sheet(self.wb, host_sheet, x.sheet.as_deref()) {
                            Some(s) => Arg::Range(self.range_values(s, Rect::new(x.pos(), y.pos()))),
                            None => Arg::Scalar(CellValue::Error(ErrorCode::Ref)),
                        },
                        other => Arg::Scalar(self.eval(host_sheet, other)),
                    })
                    .collect();
                call(name, &args)
            }
        }
    }

    fn run(&mut self, graph: &DependencyGraph, subset: Option<&HashSet<usize>>) {
        let (order, cyclic) = graph.schedule(subset);
        for node in order {
            let key = graph.nodes[node];
            let value = if cyclic.contains(&node) {
                CellValue::Error(ErrorCode::Cycle)
            } else {
                let formula = self.wb.sheets()[key.0].get(key.1).as_formula().expect("formula node");
                self.eval(key.0, formula.ast())
            };
            self.computed.insert(key, value);
        }
    }
}

fn binary(op: BinaryOp, l: &CellValue, r: &CellValue) -> CellValue {
    let arith = |f: fn(f64, f64) -> CellValue| match (to_number(l), to_number(r)) {
        (Ok(a), Ok(b)) => f(a, b),
        (Err(e), _) | (_, Err(e)) => CellValue::Error(e),
    };
    match op {
        BinaryOp::Add => arith(|a, b| finite(a + b)),
        BinaryOp::Sub => arith(|a, b| finite(a - b)),
        BinaryOp::Mul => arith(|a, b| finite(a * b)),
        BinaryOp::Div => arith(|a, b| if b == 0.0 { CellValue::Error(ErrorCode::Div0) } else { finite(a / b) }),
        BinaryOp::Pow => arith(|a, b| {
            if a == 0.0 && b < 0.0 {
                CellValue::Error(ErrorCode::Div0)
            } else {
                finite(a.powf(b))
            }
        }),
        BinaryOp::Concat => match (to_text(l), to_text(r)) {
            (Ok(a), Ok(b)) => CellValue::Text(a + &b),
            (Err(e), _) | (_, Err(e)) => CellValue::Error(e),
        },
        BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => {
            match compare(l, r) {
                Err(e) => CellValue::Error(e),
                Ok(ord) => CellValue::Bool(match op {
                    BinaryOp::Eq => ord == Ordering::Equal,
                    BinaryOp::Ne => ord != Ordering::Equal,
                    BinaryOp::Lt => ord == Ordering::Less,
                    BinaryOp::Le => ord != Ordering::Greater,
                    BinaryOp::Gt => ord == Ordering::Greater,
                    _ => ord != Ordering::Less,
                }),
            }
        }
    }
}

/// Numbers < text < booleans; text compares case-insensitively; blank adopts the other side's type.
fn compare(l: &CellValue, r: &CellValue) -> Result<Ordering, ErrorCode> {
    fn rank(v: &CellValue) -> u8 {
        match v {
            CellValue::Number(_) => 0,
            CellValue::Text(_) => 1,
            _ => 2,
        }
    }
    let blank_as = |other: &CellValue| match other {
        CellValue::Text(_) => CellValue::Text(String::new()),
        CellValue::Bool(_) => CellValue::Bool(false),
        _ => CellValue::Number(0.0),
    };
    let (l, r) = match (l, r) {
        (CellValue::Error(e), _) | (_, CellValue::Error(e)) => return Err(*e),
        (CellValue::Blank, CellValue::Blank) => return Ok(Ordering::Equal),
        (CellValue::Blank, other) => (blank_as(other), other.clone()),
        (other, CellValue::Blank) => (other.clone(), blank_as(other)),
        (a, b) => (a.clone(), b.clone()),
    };
    Ok(match (&l, &r) {
        (CellValue::Number(a), CellValue::Number(b)) => a.partial_cmp(b).unwrap_or(Ordering::Equal),
        (CellValue::Text(a), CellValue::Text(b)) => a.to_lowercase().cmp(&b.to_lowercase()),
        (CellValue::Bool(a), CellValue::Bool(b)) => a.cmp(b),
        _ => rank(&l).cmp(&rank(&r)),
    })
}

fn collect(wb: &Workbook, ev: &Evaluator<'_>) -> Values {
    let mut out = Values::new();
    for (si, sheet) in wb.sheets().iter().enumerate() {
        for (pos, content) in sheet.cells() {
            let v = match content {
                CellContent::Formula(_) => ev.computed.get(&(si, pos)).cloned().unwrap_or(CellValue::Blank),
                other => literal(other),
            };
            if v != CellValue::Blank {
                out.insert(CellAddress::new(sheet.name(), pos), v);
            }
        }
    }
    out
}

/// Evaluates every stored cell. Cells in reference cycles become `#CYCLE`.
pub fn evaluate(wb: &Workbook) -> Values {
    let graph = DependencyGraph::build(wb);
    let mut ev = Evaluator { wb, computed: HashMap::with_capacity(graph.len()), fallback: None };
    ev.run(&graph, None);
    collect(wb, &ev)
}

/// Recomputes only what `delta` can affect.
///
/// `wb` is the snapshot after the edit and `previous` the full evaluation
/// before it. Returns the cells whose value changed; cells that became empty
/// map to [`CellValue::Blank`].
pub fn evaluate_delta(wb: &Workbook, previous: &Values, delta: &Delta) -> Values {
    let graph = DependencyGraph::build(wb);
    let Some(si) = wb.sheets().iter().position(|s| s.name() == delta.addr.sheet) else {
        return Values::new();
    };
    // formula cells reading the edited address, formula or not
    let mut seeds: Vec<usize> = Vec::new();
    for (node, &(host, pos)) in graph.nodes.iter().enumerate() {
        if (host, pos) == (si, delta.addr.pos) {
            seeds.push(node);
            continue;
        }
        let formula = wb.sheets()[host].get(pos).as_formula().expect("formula node");
        let reads = formula_targets(wb, host, formula)
            .into_iter()
            .flatten()
            .any(|(ts, rect)| ts == si && rect.contains(delta.addr.pos));
        if reads {
            seeds.push(node);
        }
    }
    let dirty = graph.closure(&seeds);
    let mut ev = Evaluator { wb, computed: HashMap::with_capacity(dirty.len()), fallback: Some(previous) };
    ev.run(&graph, Some(&dirty));

    let mut changed = Values::new();
    let edited_now = match wb.sheets()[si].get(delta.addr.pos) {
        CellContent::Formula(_) => None,
        other => Some(literal(other)),
    };
    if let Some(v) = edited_now {
        if previous.get(&delta.addr).unwrap_or(&CellValue::Blank) != &v {
            changed.insert(delta.addr.clone(), v);
        }
    }
    for node in dirty {
        let key = graph.nodes[node];
        let addr = graph.address(node);
        let v = ev.computed.remove(&key).unwrap_or(CellValue::Blank);
        if previous.get(&addr).unwrap_or(&CellValue::Blank) != &v {
            changed.insert(addr, v);
        }
    }
    changed
}

/// Applies a changed-cell map to a full evaluation.
pub fn merge_changes(values: &mut Values, changed: &Values) {
    for (addr, v) in changed {
        if *v == CellValue::Blank {
            values.remove(addr);
        } else {
            values.insert(addr.clone(), v.clone());
        }
    }
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

    fn value(values: &Values, a: &str) -> CellValue {
        values.get(&CellAddress::parse(a, "S").unwrap()).cloned().unwrap_or(CellValue::Blank)
    }

    #[test]
    fn arithmetic_and_blanks() {
        let v = evaluate(&wb(&[("A1", "=1/0"), ("A2", "=B9+1"), ("A3", "=B9&\"x\""), ("A4", "=2^3^2"), ("A5", "=-2^2")]));
        assert_eq!(value(&v, "A1"), CellValue::Error(ErrorCode::Div0));
        assert_eq!(value(&v, "A2"), CellValue::Number(1.0));
        assert_eq!(value(&v, "A3"), CellValue::Text("x".into()));
        assert_eq!(value(&v, "A4"), CellValue::Number(512.0));
        assert_eq!(value(&v, "A5"), CellValue::Number(4.0));
    }

    #[test]
    fn cycles_are_marked() {
        let v = evaluate(&wb(&[("A1", "=B1"), ("B1", "=A1"), ("C1", "=C1"), ("D1", "=A1+1"), ("E1", "=1/0+A1")]));
        for a in ["A1", "B1", "C1", "D1"] {
            assert_eq!(value(&v, a), CellValue::Error(ErrorCode::Cycle), "{a}");
        }
        // left operand error wins
        assert_eq!(value(&v, "E1"), CellValue::Error(ErrorCode::Div0));
    }

    #[test]
    fn text_is_not_coerced() {
        let v = evaluate(&wb(&[("A1", "'12"), ("A2", "12x"), ("B1", "=A2*2"), ("B2", "=A2=\"12X\"")]));
        assert_eq!(value(&v, "B1"), CellValue::Error(ErrorCode::Value));
        assert_eq!(value(&v, "B2"), CellValue::Bool(true));
    }

    #[test]
    fn builtins_through_ranges() {
        let v = evaluate(&wb(&[
            ("A1", "1"),
            ("A2", "2"),
            ("A3", "x"),
            ("B1", "=SUM(A1:A4)"),
            ("B2", "=AVERAGE(A1:A3)"),
            ("B3", "=COUNT(A1:A3)"),
            ("B4", "=MAX(A1:A3,-5)"),
            ("B5", "=ROUND(2.675,2)"),
            ("B6", "=IF(TRUE,1,1/0)"),
            ("B7", "=SUM(C1:C3)"),
            ("B8", "=NOPE(1)"),
            ("B9", "=A1:A2"),
            ("B10", "=Missing!A1"),
        ]));
        assert_eq!(value(&v, "B1"), CellValue::Number(3.0));
        assert_eq!(value(&v, "B2"), CellValue::Number(1.5));
        assert_eq!(value(&v, "B3"), CellValue::Number(2.0));
        assert_eq!(value(&v, "B4"), CellValue::Number(2.0));
        assert_eq!(value(&v, "B5"), CellValue::Number(2.68));
        assert_eq!(value(&v, "B6"), CellValue::Error(ErrorCode::Div0));
        assert_eq!(value(&v, "B7"), CellValue::Number(0.0));
        assert_eq!(value(&v, "B8"), CellValue::Error(ErrorCode::Name));
        assert_eq!(value(&v, "B9"), CellValue::Error(ErrorCode::Value));
        assert_eq!(value(&v, "B10"), CellValue::Error(ErrorCode::Ref));
    }

    #[test]
    fn cross_sheet_reads() {
        let mut w = wb(&[("A1", "=Rates!A1*2")]);
        w.add_sheet("Rates").unwrap();
        let r = CellAddress::parse("Rates!A1", "S").unwrap();
        w.set_cell_input(&r, "21").unwrap();
        assert_eq!(value(&evaluate(&w), "A1"), CellValue::Number(42.0));
    }

    #[test]
    fn delta_touches_only_dependents() {
        let mut w = wb(&[("A1", "1"), ("A2", "=A1+1"), ("A3", "=A2+1"), ("C1", "5"), ("C2", "=SUM(A1:A3)")]);
        let before = evaluate(&w);
        let addr = w.parse_a1("A1").unwrap();
        let d = w.set_cell_input(&addr, "10").unwrap();
        let changed = evaluate_delta(&w, &before, &d);
        let keys: Vec<String> = changed.keys().map(|a| a.pos.to_a1()).collect();
        assert_eq!(keys, ["A1", "A2", "C2", "A3"]);
        let mut merged = before.clone();
        merge_changes(&mut merged, &changed);
        assert_eq!(merged, evaluate(&w));

        let same = w.set_cell_input(&addr, "10").unwrap();
        assert!(evaluate_delta(&w, &merged, &same).is_empty());

        let c1 = w.parse_a1("C1").unwrap();
        let d = w.set_cell_input(&c1, "6").unwrap();
        let keys: Vec<String> = evaluate_delta(&w, &merged, &d).keys().map(|a| a.pos.to_a1()).collect();
        assert_eq!(keys, ["C1"]);
    }
}
