//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use serde_json::Value;
use structsheet::formula::relativize;
use structsheet::refactor::{self, Direction, RefactorOp, SplitPoint};
use structsheet::soundness::{self, CandidateKind, ViolationKind};
use structsheet::workbook::{load_json, save_json};
use structsheet::{evaluate, infer, CellAddress, CellContent, CellValue, Pos, Rect, Session, Workbook};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn fixture(name: &str) -> Workbook {
    load_json(&std::fs::read(fixtures().join(name)).unwrap()).unwrap()
}

fn oracle(table: &str) -> Vec<Value> {
    let doc: Value = serde_json::from_slice(&std::fs::read(fixtures().join("carloan.expected.json")).unwrap()).unwrap();
    doc[table].as_array().unwrap().clone()
}

fn number(wb: &Workbook, a1: &str) -> f64 {
    match evaluate(wb).get(&wb.parse_a1(a1).unwrap()) {
        Some(CellValue::Number(n)) => *n,
        other => panic!("{a1} is {other:?}"),
    }
}

/// Columns B..D against an oracle table; `tol` 0 means exact.
fn matches_table(wb: &Workbook, table: &str, tol: f64) -> Result<(), String> {
    let rows = oracle(table);
    for (i, row) in rows.iter().enumerate() {
        for (col, key) in [("B", "start"), ("C", "interest"), ("D", "end")] {
            let a1 = format!("{col}{}", i + 2);
            let (got, want) = (number(wb, &a1), row[key].as_f64().unwrap());
            let ok = if tol == 0.0 { got == want } else { (got - want).abs() <= tol * want.abs().max(1.0) };
            if !ok {
                return Err(format!("{a1}: {got} vs oracle {want}"));
            }
        }
    }
    let past = format!("D{}", rows.len() + 2);
    if !wb.get_cell(&wb.parse_a1(&past).unwrap()).unwrap().is_empty() {
        return Err(format!("{past} should be empty"));
    }
    Ok(())
}

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn inference_fidelity() -> Outcome {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_structsheet"))
        .args(["analyze", "--text"])
        .arg(fixtures().join("carloan.wbk.json"))
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let text = String::from_utf8_lossy(&out.stdout);
    ensure(out.status.success(), || format!("exit {:?}", out.status.code()))?;
    for line in ["B3:B9  =D2  (7 cells)", "D2:D8  =B2+C2-5000  (7 cells)", "D2:D8  slot 1  B2:B8", "D2:D8  slot 2  C2:C8"] {
        ensure(text.lines().any(|l| l.trim() == line), || format!("missing `{line}` in:\n{text}"))?;
    }
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("groups and reference groups match, {} ms", elapsed.as_millis()))
}

fn keys(wb: &Workbook) -> BTreeMap<Pos, String> {
    let sheet = &wb.sheets()[0];
    sheet.formulas().map(|(p, f)| (p, relativize(f.ast(), &CellAddress::new(sheet.name(), p)).unwrap().key())).collect()
}

fn partition_and_idempotence() -> Outcome {
    for seed in 0..500u64 {
        let wb = common::workbook(&mut common::rng(seed), 20);
        let model = infer(&wb).map_err(|e| e.to_string())?;
        let keys = keys(&wb);
        let mut owned = BTreeSet::new();
        for g in &model.groups {
            for p in g.range.cells() {
                ensure(owned.insert(p), || format!("seed {seed}: {} in two groups", p.to_a1()))?;
                ensure(keys.get(&p) == Some(&g.key), || format!("seed {seed}: {} not a member", p.to_a1()))?;
            }
        }
        ensure(owned.len() == keys.len(), || format!("seed {seed}: formula cells left ungrouped"))?;
        ensure(infer(&wb).unwrap() == model, || format!("seed {seed}: infer not idempotent"))?;
        let bytes = save_json(&wb);
        let reloaded = load_json(&bytes).unwrap();
        ensure(save_json(&reloaded) == bytes, || format!("seed {seed}: save/load not byte-stable"))?;
        ensure(infer(&reloaded).unwrap() == model, || format!("seed {seed}: infer changed after save/load"))?;
    }
    Ok("500 workbooks up to 20x20".into())
}

fn brute_force(cells: &BTreeMap<Pos, String>) -> BTreeSet<(String, String)> {
    let mut free: BTreeMap<Pos, &String> = cells.iter().map(|(p, k)| (*p, k)).collect();
    let mut out = BTreeSet::new();
    while let Some((&seed, &key)) = free.iter().next() {
        let fits = |w: u32, h: u32| {
            (0..h).all(|dr| (0..w).all(|dc| free.get(&Pos::new(seed.col + dc, seed.row + dr)) == Some(&key)))
        };
        let (mut bw, mut bh) = (1, 1);
        for h in 1..=8 {
            for w in 1..=8 {
                if fits(w, h) && (h, w) > (bh, bw) {
                    (bw, bh) = (w, h);
                }
            }
        }
        let rect = Rect::new(seed, Pos::new(seed.col + bw - 1, seed.row + bh - 1));
        for p in rect.cells() {
            free.remove(&p);
        }
        out.insert((rect.to_a1(), key.clone()));
    }
    out
}

fn oracle_equivalence() -> Outcome {
    for seed in 0..500u64 {
        let wb = common::workbook(&mut common::rng(seed ^ 0x5eed), 8);
        let model = infer(&wb).unwrap();
        let greedy: BTreeSet<(String, String)> = model.groups.iter().map(|g| (g.range.to_a1(), g.key.clone())).collect();
        let brute = brute_force(&keys(&wb));
        ensure(greedy == brute, || format!("seed {seed}: {greedy:?} vs {brute:?}"))?;
    }
    Ok("500 workbooks up to 8x8".into())
}

fn reactive_repair() -> Outcome {
    let mut wb = fixture("carloan.wbk.json");
    let before = soundness::check(&wb, &infer(&wb).unwrap());
    let c6 = wb.parse_a1("C6").unwrap();
    let delta = wb.set_cell(&c6, CellContent::formula("=B6*0.05").unwrap()).unwrap();
    let report = soundness::on_edit(&wb, &infer(&wb).unwrap(), &[delta], &before);
    let new: Vec<_> = report.new_violations().collect();
    ensure(new.len() == 1 && new[0].kind == ViolationKind::DeviantCell, || format!("new violations: {new:?}"))?;
    let cands = &report.candidates[&new[0].id];
    ensure(cands.len() >= 2, || format!("{} candidates", cands.len()))?;
    let outward = cands.iter().find(|c| c.kind == CandidateKind::PropagateOutward).ok_or("no outward candidate")?;
    let (_, model, after) = soundness::apply_candidate(&mut wb, &report, outward, None).map_err(|e| e.to_string())?;
    ensure(after.is_clean(), || format!("{:?}", after.violations))?;
    ensure(model.groups.iter().any(|g| g.range.to_a1() == "C6:C9"), || "column group not reunified".into())?;
    matches_table(&wb, "c6_outward_5pct", 1e-9)?;
    Ok(format!("{} candidates; outward repair clean; column D within 1e-9", cands.len()))
}

fn cascade_delete() -> Outcome {
    let mut wb = fixture("carloan.wbk.json");
    let before = soundness::check(&wb, &infer(&wb).unwrap());
    let c6 = wb.parse_a1("C6").unwrap();
    let delta = wb.set_cell(&c6, CellContent::Empty).unwrap();
    let report = soundness::on_edit(&wb, &infer(&wb).unwrap(), &[delta], &before);
    let cascade = report
        .candidates
        .values()
        .flatten()
        .find(|c| c.kind == CandidateKind::CascadeDelete)
        .ok_or("no cascade candidate")?
        .clone();
    let (_, _, after) = soundness::apply_candidate(&mut wb, &report, &cascade, None).map_err(|e| e.to_string())?;
    ensure(after.is_clean(), || format!("{:?}", after.violations))?;
    matches_table(&wb, "row6_deleted", 0.0)?;
    Ok("7-period table matches exactly".into())
}

fn split_preservation() -> Outcome {
    let mut wb = fixture("carloan.wbk.json");
    let before = evaluate(&wb);
    let model = infer(&wb).unwrap();
    let op = RefactorOp::Split { group: "D2:D8".into(), at: SplitPoint::Text("B+C".into()), target: None };
    let plan = refactor::plan(&wb, &model, &op).map_err(|e| e.to_string())?;
    refactor::apply_plan(&mut wb, &plan).map_err(|e| e.to_string())?;
    let after = evaluate(&wb);
    for (addr, v) in &before {
        ensure(after.get(addr) == Some(v), || format!("{addr:?} changed"))?;
    }
    let mut inferred = infer(&wb).unwrap().summary();
    inferred.sort();
    ensure(inferred == plan.predicted_groups, || "prediction differs from inference".into())?;
    let helper = inferred.iter().find(|g| g.range == "E2:E8").ok_or("helper group E2:E8 missing")?;
    Ok(format!("values identical; helper {} {}", helper.range, helper.formula))
}

fn refactoring_round_trips() -> Outcome {
    for seed in 0..100u64 {
        let (wb, loan) = common::loan(&mut common::rng(seed));
        let original = evaluate(&wb);
        let group_at = |w: &Workbook, p: Pos| {
            let m = infer(w).unwrap();
            let g = m.owner_of(&CellAddress::new("Loan", p)).unwrap();
            (m.groups[g].id.clone(), m)
        };
        let count = 1 + (seed % 3) as u32;
        let interest = Pos::new(loan.col + 1, loan.row);
        let mut w = wb.clone();
        for op in [true, false] {
            let (id, m) = group_at(&w, interest);
            let plan = if op {
                refactor::extend_group(&w, &m, &id, count, Direction::Down, false)
            } else {
                refactor::shrink_group(&w, &m, &id, count, Direction::Down)
            }
            .map_err(|e| format!("seed {seed}: {e}"))?;
            refactor::apply_plan(&mut w, &plan).unwrap();
        }
        ensure(evaluate(&w) == original, || format!("seed {seed}: extend/shrink changed values"))?;

        let end = Pos::new(loan.col + 2, loan.row);
        let to = Pos::new(loan.col + 5, loan.row + 2);
        let mut w = wb.clone();
        for (from, dest) in [(end, to), (to, end)] {
            let (id, m) = group_at(&w, from);
            let plan = refactor::move_group(&w, &m, &id, dest).map_err(|e| format!("seed {seed}: {e}"))?;
            refactor::apply_plan(&mut w, &plan).unwrap();
        }
        ensure(evaluate(&w) == original, || format!("seed {seed}: move/move-back changed values"))?;
    }
    Ok("100 random loan tables".into())
}

fn undo_law() -> Outcome {
    let mut checked = 0;
    let mut run = |session: &mut Session, label: &str, act: &dyn Fn(&mut Session) -> Result<(), String>| {
        let saved = session.save();
        act(session).map_err(|e| format!("{label}: {e}"))?;
        session.undo().map_err(|e| format!("{label}: undo: {e}"))?;
        checked += 1;
        ensure(session.save() == saved, || format!("{label}: save file differs after undo"))
    };
    let mut s = Session::new(fixture("carloan.wbk.json")).unwrap();
    let addr = |s: &Session, a: &str| s.workbook().parse_a1(a).unwrap();
    run(&mut s, "edit", &|s| {
        let a = addr(s, "C6");
        s.edit(vec![(a, CellContent::from_input("=B6*0.05").unwrap())]).map(|_| ()).map_err(|e| e.to_string())
    })?;
    run(&mut s, "batch", &|s| {
        let edits = vec![(addr(s, "A1"), CellContent::Empty), (addr(s, "F3"), CellContent::from_input("x").unwrap())];
        s.edit(edits).map(|_| ()).map_err(|e| e.to_string())
    })?;
    let plans = [
        RefactorOp::Split { group: "D2:D8".into(), at: SplitPoint::Text("B+C".into()), target: None },
        RefactorOp::Extend { group: "C2:C9".into(), count: 2, direction: Direction::Down, overwrite: false },
        RefactorOp::Shrink { group: "C2:C9".into(), count: 1, direction: Direction::Down },
        RefactorOp::Move { group: "D2:D8".into(), to: Pos::new(6, 2) },
    ];
    for op in &plans {
        run(&mut s, &format!("{op:?}"), &|s| {
            let plan = refactor::plan(s.workbook(), s.model(), op).map_err(|e| e.to_string())?;
            s.apply_plan(&plan).map(|_| ()).map_err(|e| e.to_string())
        })?;
    }
    for (cell, input) in [("C6", "=B6*0.05"), ("C6", ""), ("D5", "")] {
        let a = addr(&s, cell);
        s.edit(vec![(a, CellContent::from_input(input).unwrap())]).unwrap();
        let ids: Vec<String> = s.report().candidates.values().flatten().map(|c| c.id.clone()).collect();
        for id in ids {
            run(&mut s, &format!("repair {id}"), &|s| s.apply_repair(&id, Some("1")).map(|_| ()).map_err(|e| e.to_string()))?;
        }
        s.undo().unwrap();
    }
    Ok(format!("{checked} operations"))
}

/// Ten thousand formula cells in four chained columns.
fn synthetic(rows: u32) -> Workbook {
    let mut wb = Workbook::with_sheet("Perf");
    for r in 1..=rows {
        let put = |wb: &mut Workbook, c: &str, v: String| {
            let a = wb.parse_a1(&format!("{c}{r}")).unwrap();
            wb.set_cell_input(&a, &v).unwrap();
        };
        put(&mut wb, "A", r.to_string());
        put(&mut wb, "B", format!("=A{r}*2"));
        put(&mut wb, "C", if r == 1 { "=B1".into() } else { format!("=C{}+B{r}", r - 1) });
        put(&mut wb, "D", format!("=SUM(B{r}:C{r})"));
        put(&mut wb, "E", format!("=IF(D{r}>5,D{r},0)"));
    }
    wb
}

fn performance() -> Outcome {
    let wb = synthetic(2500);
    ensure(wb.formula_count() == 10_000, || format!("{} formulas", wb.formula_count()))?;
    let mut times = Vec::new();
    for _ in 0..101 {
        let start = Instant::now();
        let model = infer(&wb).map_err(|e| e.to_string())?;
        let report = soundness::check(&wb, &model);
        times.push(start.elapsed());
        ensure(report.is_clean() && model.groups.len() == 5, || "unexpected structure".into())?;
    }
    times.sort();
    let median = times[times.len() / 2];
    let p99 = times[(times.len() * 99) / 100];
    let summary = format!("median {:.1} ms, p99 {:.1} ms", median.as_secs_f64() * 1e3, p99.as_secs_f64() * 1e3);
    ensure(median <= Duration::from_millis(50) && p99 <= Duration::from_millis(200), || summary.clone())?;
    Ok(summary)
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("inference fidelity", inference_fidelity),
        ("partition and idempotence", partition_and_idempotence),
        ("brute-force oracle equivalence", oracle_equivalence),
        ("reactive repair (C6 rate edit)", reactive_repair),
        ("cascade delete (row 6)", cascade_delete),
        ("split preservation", split_preservation),
        ("refactoring round-trips", refactoring_round_trips),
        ("undo law", undo_law),
        ("performance budget", performance),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
