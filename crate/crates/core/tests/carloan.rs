use serde_json::Value;
use structsheet::soundness::{self, CandidateKind, ViolationKind};
use structsheet::workbook::{load_json, save_json};
use structsheet::{evaluate, infer, CellAddress, CellContent, CellValue, Values, Workbook};

const FIXTURE: &str = include_str!("../../../fixtures/carloan.wbk.json");
const EDITED: &str = include_str!("../../../fixtures/carloan_c6edited.wbk.json");
const EXPECTED: &str = include_str!("../../../fixtures/carloan.expected.json");

fn fixture() -> Workbook {
    load_json(FIXTURE.as_bytes()).unwrap()
}

fn expected(table: &str) -> Vec<Value> {
    let doc: Value = serde_json::from_str(EXPECTED).unwrap();
    doc[table].as_array().unwrap().clone()
}

fn num(values: &Values, wb: &Workbook, a1: &str) -> f64 {
    match values.get(&wb.parse_a1(a1).unwrap()) {
        Some(CellValue::Number(n)) => *n,
        other => panic!("{a1}: {other:?}"),
    }
}

/// Compares columns B..D of rows 2.. against an oracle table.
fn assert_table(wb: &Workbook, table: &str, exact: bool) {
    let values = evaluate(wb);
    let rows = expected(table);
    for (i, row) in rows.iter().enumerate() {
        let r = i + 2;
        for (col, key) in [("B", "start"), ("C", "interest"), ("D", "end")] {
            let got = num(&values, wb, &format!("{col}{r}"));
            let want = row[key].as_f64().unwrap();
            if exact {
                assert_eq!(got, want, "{table} {col}{r}");
            } else {
                assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "{table} {col}{r}: {got} vs {want}");
            }
        }
    }
    let after = format!("D{}", rows.len() + 2);
    assert!(wb.get_cell(&wb.parse_a1(&after).unwrap()).unwrap().is_empty(), "{after} should be empty");
}

#[test]
fn fixture_round_trips_byte_exact() {
    let wb = fixture();
    assert_eq!(String::from_utf8(save_json(&wb)).unwrap(), FIXTURE);
    assert_eq!(wb.sheets()[0].len(), 4 * 9);
}

#[test]
fn get_cell_examples() {
    let wb = fixture();
    let d2 = wb.get_cell(&wb.parse_a1("D2").unwrap()).unwrap();
    assert_eq!(d2.to_input(), "=B2+C2-5000");
    assert!(wb.get_cell(&wb.parse_a1("Z99").unwrap()).unwrap().is_empty());
}

#[test]
fn base_evaluation_matches_oracle() {
    let wb = fixture();
    assert_eq!(num(&evaluate(&wb), &wb, "D2"), 20875.0);
    assert_table(&wb, "base", true);
}

#[test]
fn inferred_groups_match_the_example() {
    let m = infer(&fixture()).unwrap();
    let ranges: Vec<String> = m.groups.iter().map(|g| g.range.to_a1()).collect();
    assert_eq!(ranges, ["C2:C9", "D2:D8", "B3:B9", "D9"]);
    let d = m.resolve_group("D2:D8").unwrap();
    let refs = m.reference_groups_of(&m.groups[d].id).unwrap();
    let refs: Vec<(usize, String)> = refs.iter().map(|r| (r.slot.index, r.range.to_a1())).collect();
    assert_eq!(refs, [(1, "B2:B8".to_string()), (2, "C2:C8".to_string())]);
    assert_eq!(m.groups[d].formula_text(), "=B2+C2-5000");

    let c5 = CellAddress::parse("C5", "Loan").unwrap();
    let (owner, refs) = m.groups_at(&c5);
    assert_eq!(owner.unwrap().range.to_a1(), "C2:C9");
    assert!(refs.iter().any(|r| r.range.to_a1() == "C2:C8"));
}

#[test]
fn pristine_fixture_is_clean() {
    let wb = fixture();
    assert!(soundness::check(&wb, &infer(&wb).unwrap()).is_clean());
}

#[test]
fn c6_rate_edit_and_outward_repair() {
    let mut wb = fixture();
    let model = infer(&wb).unwrap();
    let before = soundness::check(&wb, &model);
    let c6 = wb.parse_a1("C6").unwrap();
    let delta = wb.set_cell(&c6, CellContent::formula("=B6*0.05").unwrap()).unwrap();
    assert_eq!(delta.before.to_input(), "=B6*0.035");
    assert_eq!(save_json(&wb), save_json(&load_json(EDITED.as_bytes()).unwrap()));
    assert_table(&wb, "c6_only_5pct", true);

    let model = infer(&wb).unwrap();
    let report = soundness::on_edit(&wb, &model, &[delta], &before);
    let new: Vec<_> = report.new_violations().collect();
    assert_eq!(new.len(), 1);
    assert_eq!(new[0].kind, ViolationKind::DeviantCell);
    assert_eq!(new[0].focus.rect.to_a1(), "C6");
    let cands = report.candidates_for(&new[0].id).unwrap();
    assert!(cands.len() >= 2);
    assert_eq!(cands[0].kind, CandidateKind::PropagateInward);
    let outward = cands.iter().find(|c| c.kind == CandidateKind::PropagateOutward).unwrap();
    let targets: Vec<String> = outward.actions.iter().map(|(a, _)| a.pos.to_a1()).collect();
    assert_eq!(targets, ["C7", "C8", "C9"]);

    let (_, model, after) = soundness::apply_candidate(&mut wb, &report, outward, None).unwrap();
    assert!(after.is_clean());
    assert!(model.groups.iter().any(|g| g.range.to_a1() == "C6:C9"));
    assert_table(&wb, "c6_outward_5pct", false);
}

#[test]
fn deleting_c6_offers_a_cascade() {
    let mut wb = fixture();
    let before = soundness::check(&wb, &infer(&wb).unwrap());
    let c6 = wb.parse_a1("C6").unwrap();
    let delta = wb.set_cell(&c6, CellContent::Empty).unwrap();
    let model = infer(&wb).unwrap();
    let report = soundness::on_edit(&wb, &model, &[delta], &before);
    let kinds: Vec<_> = report.violations.iter().map(|v| (v.kind, v.focus.rect.to_a1())).collect();
    assert_eq!(
        kinds,
        [(ViolationKind::FragmentedGroup, "C6".to_string()), (ViolationKind::DanglingDependent, "D6".to_string())]
    );
    let cascade = report.candidates["v1"].iter().find(|c| c.kind == CandidateKind::CascadeDelete).unwrap();
    let touched: Vec<String> = cascade.actions.iter().map(|(a, _)| a.pos.to_a1()).collect();
    assert_eq!(touched, ["C6", "D8", "B9", "C9", "D9"]);

    let (_, _, after) = soundness::apply_candidate(&mut wb, &report, cascade, None).unwrap();
    assert!(after.is_clean(), "{:?}", after.violations);
    assert_table(&wb, "row6_deleted", true);
}

#[test]
fn clearing_d5_breaks_b6() {
    let mut wb = fixture();
    let d5 = wb.parse_a1("D5").unwrap();
    wb.set_cell(&d5, CellContent::Empty).unwrap();
    let report = soundness::check(&wb, &infer(&wb).unwrap());
    assert!(report
        .violations
        .iter()
        .any(|v| v.kind == ViolationKind::BrokenReference && v.focus.rect.to_a1() == "B6"));
    let b6 = report.violations.iter().find(|v| v.focus.rect.to_a1() == "B6").unwrap();
    let provide = report.candidates[&b6.id].iter().find(|c| c.kind == CandidateKind::ProvideValue).unwrap();
    assert!(provide.requires_input.is_some());

    let snapshot = save_json(&wb);
    let err = soundness::apply_candidate(&mut wb, &report, provide, None).unwrap_err();
    assert!(matches!(err, soundness::SoundnessError::MissingInput(_)));
    assert_eq!(save_json(&wb), snapshot);

    let (_, _, after) = soundness::apply_candidate(&mut wb, &report, provide, Some("7613.36")).unwrap();
    assert!(!after.violations.iter().any(|v| v.focus.rect.to_a1() == "B6"));
}

#[test]
fn stale_candidates_are_rejected() {
    let mut wb = load_json(EDITED.as_bytes()).unwrap();
    let report = soundness::check(&wb, &infer(&wb).unwrap());
    let cand = report.candidates["v1"][0].clone();
    let a1 = wb.parse_a1("A1").unwrap();
    wb.set_cell_input(&a1, "Period").unwrap();
    let err = soundness::apply_candidate(&mut wb, &report, &cand, None).unwrap_err();
    assert!(matches!(err, soundness::SoundnessError::StaleCandidate(_)));
}

#[test]
fn auto_repair_reaches_a_clean_sheet() {
    let mut wb = load_json(EDITED.as_bytes()).unwrap();
    let outcome = soundness::repair(&mut wb, |_, _| None).unwrap();
    assert!(outcome.report.is_clean());
    assert_eq!(outcome.applied.len(), 1);
    assert_table(&wb, "base", true);
}

mod refactorings {
    use super::*;
    use structsheet::refactor::{
        apply_plan, extend_group, move_group, shrink_group, split_group, Direction, RefactorError, SplitPoint, ValueImpact,
    };
    use structsheet::Pos;

    fn text(wb: &Workbook, a1: &str) -> String {
        wb.get_cell(&wb.parse_a1(a1).unwrap()).unwrap().to_input()
    }

    #[test]
    fn split_keeps_every_value() {
        let mut wb = fixture();
        let before = evaluate(&wb);
        let model = infer(&wb).unwrap();
        let plan = split_group(&wb, &model, "D2:D8", &SplitPoint::Text("B+C".into()), None).unwrap();
        assert_eq!(plan.value_impact, ValueImpact::Preserving);
        apply_plan(&mut wb, &plan).unwrap();
        assert_eq!((text(&wb, "D2"), text(&wb, "E2")), ("=E2-5000".to_string(), "=B2+C2".to_string()));
        let after = evaluate(&wb);
        for (addr, v) in &before {
            assert_eq!(after.get(addr), Some(v), "{addr:?}");
        }
        let ranges: Vec<String> = infer(&wb).unwrap().groups.iter().map(|g| g.range.to_a1()).collect();
        assert!(ranges.contains(&"E2:E8".to_string()));
        assert!(soundness::check(&wb, &infer(&wb).unwrap()).is_clean());

        let model = infer(&fixture()).unwrap();
        let root = split_group(&fixture(), &model, "D2:D8", &SplitPoint::Path(vec![]), None);
        assert!(matches!(root, Err(RefactorError::InvalidSplitPoint(_))));
    }

    #[test]
    fn extend_and_shrink_by_one_year() {
        let mut wb = fixture();
        let model = infer(&wb).unwrap();
        let plan = extend_group(&wb, &model, "C2:C9", 1, Direction::Down, false).unwrap();
        let touched: Vec<String> = plan.edits.iter().map(|(a, _)| a.pos.to_a1()).collect();
        assert_eq!(touched, ["B10", "C10", "D10"]);
        apply_plan(&mut wb, &plan).unwrap();
        assert_table(&wb, "extended_one_year", true);

        let mut wb = fixture();
        let plan = shrink_group(&wb, &model, "C2:C9", 1, Direction::Down).unwrap();
        assert_eq!(plan.value_impact, ValueImpact::Altering);
        apply_plan(&mut wb, &plan).unwrap();
        assert_table(&wb, "truncated_last_year", true);
    }

    #[test]
    fn move_rewires_the_start_balance() {
        let mut wb = fixture();
        let model = infer(&wb).unwrap();
        let overlap = move_group(&wb, &model, "D2:D8", Pos::new(3, 2)).unwrap_err();
        assert_eq!(overlap, RefactorError::Overlap("C2:C9".into()));

        let before = evaluate(&wb);
        let plan = move_group(&wb, &model, "D2:D8", Pos::new(6, 2)).unwrap();
        assert_eq!(plan.value_impact, ValueImpact::Preserving);
        apply_plan(&mut wb, &plan).unwrap();
        assert_eq!(text(&wb, "B3"), "=F2");
        assert_eq!(text(&wb, "F2"), "=B2+C2-5000");
        let after = evaluate(&wb);
        for r in 2..=8 {
            let d = wb.parse_a1(&format!("D{r}")).unwrap();
            let f = wb.parse_a1(&format!("F{r}")).unwrap();
            assert_eq!(after[&f], before[&d]);
        }

        let model = infer(&wb).unwrap();
        let back = move_group(&wb, &model, "F2:F8", Pos::new(4, 2)).unwrap();
        apply_plan(&mut wb, &back).unwrap();
        assert_eq!(save_json(&wb), save_json(&fixture()));
    }

    #[test]
    fn stale_plans_are_rejected() {
        let mut wb = fixture();
        let model = infer(&wb).unwrap();
        let plan = extend_group(&wb, &model, "C2:C9", 1, Direction::Down, false).unwrap();
        let c4 = wb.parse_a1("C4").unwrap();
        wb.set_cell_input(&c4, "=B4*0.04").unwrap();
        let snapshot = save_json(&wb);
        assert_eq!(apply_plan(&mut wb, &plan).unwrap_err(), RefactorError::StalePlan);
        assert_eq!(save_json(&wb), snapshot);
    }
}
