//! Monochrome grid rendering: one glyph per cell.
//!
//! Formula cells show their group's letter, cells under a violation show `!`,
//! other values `#` and empty cells `.`.

use std::collections::HashSet;
use std::fmt::Write;

use structsheet::address::column_name;
use structsheet::soundness::SoundnessReport;
use structsheet::{Pos, StructureModel, Workbook};

const GLYPHS: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz";

fn glyph(group: usize) -> char {
    GLYPHS.get(group).map(|&b| b as char).unwrap_or('*')
}

pub fn render(wb: &Workbook, model: &StructureModel, report: &SoundnessReport) -> String {
    let mut out = String::new();
    for sheet in wb.sheets() {
        let Some(used) = sheet.used_rect() else {
            continue;
        };
        let flagged: HashSet<Pos> = report
            .violations
            .iter()
            .filter(|v| v.focus.sheet == sheet.name())
            .flat_map(|v| v.focus.rect.cells().collect::<Vec<_>>())
            .collect();
        if wb.sheets().len() > 1 {
            let _ = writeln!(out, "[{}]", sheet.name());
        }
        let width = used.end.row.to_string().len();
        let _ = write!(out, "{:width$} ", "");
        for c in 1..=used.end.col {
            out.push_str(&column_name(c)[..1]);
        }
        out.push('\n');
        for r in 1..=used.end.row {
            let _ = write!(out, "{r:>width$} ");
            for c in 1..=used.end.col {
                let p = Pos::new(c, r);
                let addr = structsheet::CellAddress::new(sheet.name(), p);
                let ch = if flagged.contains(&p) {
                    '!'
                } else if let Some(g) = model.owner_of(&addr) {
                    glyph(g)
                } else if sheet.is_empty_at(p) {
                    '.'
                } else {
                    '#'
                };
                out.push(ch);
            }
            out.push('\n');
        }
    }
    let legend: Vec<String> = model
        .groups
        .iter()
        .enumerate()
        .map(|(i, g)| format!("{}  {}  {}", glyph(i), model.render_range(&g.sheet, g.range), g.formula_text()))
        .collect();
    if !legend.is_empty() {
        out.push('\n');
        for line in legend {
            out.push_str(&line);
            out.push('\n');
        }
    }
    out
}
