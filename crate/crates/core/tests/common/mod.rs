//! Seeded generators for random workbooks and sound loan tables.
#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use structsheet::formula::{absolutize, print_formula, BinaryOp, Coord, Expr, RelRef, UnaryOp};
use structsheet::{Pos, RelativeFormula, Workbook};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

fn coord(rng: &mut StdRng) -> Coord {
    if rng.random_bool(0.15) {
        Coord::Abs(rng.random_range(1..=3))
    } else {
        Coord::Offset(rng.random_range(-2..=1))
    }
}

fn rel_ref(rng: &mut StdRng) -> RelRef {
    RelRef { col: coord(rng), row: coord(rng) }
}

fn leaf(rng: &mut StdRng) -> RelativeFormula {
    match rng.random_range(0..10) {
        0..=4 => Expr::Ref(rel_ref(rng)),
        5..=6 => Expr::Number(rng.random_range(0..20) as f64 / 4.0),
        7 => {
            let a = RelRef { col: Coord::Offset(rng.random_range(-2..=0)), row: Coord::Offset(rng.random_range(-2..=0)) };
            let (Coord::Offset(c), Coord::Offset(r)) = (a.col, a.row) else { unreachable!() };
            let b = RelRef { col: Coord::Offset(c + rng.random_range(0..=1)), row: Coord::Offset(r + rng.random_range(0..=2)) };
            Expr::Range(a, b)
        }
        8 => Expr::Bool(rng.random_bool(0.5)),
        _ => Expr::Text(["a", "B", ""][rng.random_range(0..3)].to_string()),
    }
}

const OPS: [BinaryOp; 12] = [
    BinaryOp::Add,
    BinaryOp::Sub,
    BinaryOp::Mul,
    BinaryOp::Div,
    BinaryOp::Pow,
    BinaryOp::Concat,
    BinaryOp::Eq,
    BinaryOp::Ne,
    BinaryOp::Lt,
    BinaryOp::Le,
    BinaryOp::Gt,
    BinaryOp::Ge,
];

/// A formula drawn from the grammar, host-relative.
pub fn formula(rng: &mut StdRng, depth: u32) -> RelativeFormula {
    if depth == 0 || rng.random_bool(0.3) {
        let mut e = leaf(rng);
        while matches!(e, Expr::Range(..)) {
            e = leaf(rng);
        }
        return e;
    }
    match rng.random_range(0..10) {
        0..=4 => {
            let op = OPS[if rng.random_bool(0.7) { rng.random_range(0..4) } else { rng.random_range(0..12) }];
            Expr::Binary(op, Box::new(formula(rng, depth - 1)), Box::new(formula(rng, depth - 1)))
        }
        5 => Expr::Unary(if rng.random_bool(0.8) { UnaryOp::Neg } else { UnaryOp::Plus }, Box::new(formula(rng, depth - 1))),
        6 => Expr::Paren(Box::new(formula(rng, depth - 1))),
        _ => {
            let name = ["SUM", "MAX", "MIN", "AVERAGE", "COUNT", "ABS", "ROUND", "IF"][rng.random_range(0..8)];
            let arity = match name {
                "ABS" => 1,
                "ROUND" => 2,
                "IF" => 3,
                _ => rng.random_range(1..=3),
            };
            let args = (0..arity)
                .map(|_| {
                    if matches!(name, "SUM" | "MAX" | "MIN" | "AVERAGE" | "COUNT") && rng.random_bool(0.5) {
                        loop {
                            if let e @ Expr::Range(..) = leaf(rng) {
                                break e;
                            }
                        }
                    } else {
                        formula(rng, depth - 1)
                    }
                })
                .collect();
            Expr::Call(name.to_string(), args)
        }
    }
}

/// A1 input text of `rf` placed at `host`, or a number when a reference leaves the grid.
pub fn input_at(rf: &RelativeFormula, host: Pos, fallback: f64) -> String {
    match absolutize(rf, host) {
        Ok(ast) => print_formula(&ast),
        Err(_) => fallback.to_string(),
    }
}

/// A random single-sheet workbook of at most `max` × `max` cells.
///
/// A few templates are stamped over random rectangles so that groups form,
/// then noise is scattered on top.
pub fn workbook(rng: &mut StdRng, max: u32) -> Workbook {
    let w = rng.random_range(1..=max);
    let h = rng.random_range(1..=max);
    let templates: Vec<RelativeFormula> = (0..rng.random_range(1..=4)).map(|_| formula(rng, 3)).collect();
    let mut grid: Vec<Vec<Option<String>>> = vec![vec![None; w as usize]; h as usize];
    for row in grid.iter_mut() {
        for cell in row.iter_mut() {
            if rng.random_bool(0.3) {
                *cell = Some(rng.random_range(-5..40).to_string());
            }
        }
    }
    for _ in 0..rng.random_range(0..=5) {
        let t = &templates[rng.random_range(0..templates.len())];
        let c0 = rng.random_range(1..=w);
        let r0 = rng.random_range(1..=h);
        let c1 = rng.random_range(c0..=w.min(c0 + 3));
        let r1 = rng.random_range(r0..=h);
        for r in r0..=r1 {
            for c in c0..=c1 {
                grid[(r - 1) as usize][(c - 1) as usize] = Some(input_at(t, Pos::new(c, r), 1.0));
            }
        }
    }
    for _ in 0..rng.random_range(0..=3) {
        let t = &templates[rng.random_range(0..templates.len())];
        let (c, r) = (rng.random_range(1..=w), rng.random_range(1..=h));
        grid[(r - 1) as usize][(c - 1) as usize] = Some(input_at(t, Pos::new(c, r), 2.0));
    }
    let mut wb = Workbook::with_sheet("Sheet1");
    for (r, row) in grid.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            if let Some(input) = cell {
                let addr = structsheet::CellAddress::new("Sheet1", Pos::new(c as u32 + 1, r as u32 + 1));
                wb.set_cell_input(&addr, input).unwrap();
            }
        }
    }
    wb
}

/// Layout of a generated loan table.
#[derive(Debug, Clone, Copy)]
pub struct Loan {
    /// Column of the start-balance column; interest and end balance follow.
    pub col: u32,
    /// First data row.
    pub row: u32,
    pub periods: u32,
    /// Whether the last end balance is clamped at zero.
    pub clamped: bool,
}

/// An amortization table shaped like the car-loan example, with random terms.
pub fn loan(rng: &mut StdRng) -> (Workbook, Loan) {
    let l = Loan {
        col: rng.random_range(1..=4),
        row: rng.random_range(1..=4),
        periods: rng.random_range(3..=12),
        clamped: rng.random_bool(0.5),
    };
    let principal = rng.random_range(10..=200) * 500;
    let rate = rng.random_range(10..=90) as f64 / 1000.0;
    let payment = rng.random_range(1..=20) * 250;
    let name = |dc: u32, r: u32| format!("{}{}", structsheet::address::column_name(l.col + dc), r);
    let mut wb = Workbook::with_sheet("Loan");
    let mut put = |a: String, v: String| {
        let addr = wb.parse_a1(&a).unwrap();
        wb.set_cell_input(&addr, &v).unwrap();
    };
    let last = l.row + l.periods - 1;
    for r in l.row..=last {
        let (b, c) = (name(0, r), name(1, r));
        if r == l.row {
            put(b.clone(), principal.to_string());
        } else {
            put(b.clone(), format!("={}", name(2, r - 1)));
        }
        put(c.clone(), format!("={b}*{rate}"));
        let end = format!("{b}+{c}-{payment}");
        put(name(2, r), if l.clamped && r == last { format!("=MAX({end},0)") } else { format!("={end}") });
    }
    (wb, l)
}
