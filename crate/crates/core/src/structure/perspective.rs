use serde::Serialize;

use super::{StructureError, StructureModel};
use crate::address::CellAddress;

/// Number of distinct fill and hatch styles.
pub const PALETTE_SIZE: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Perspective {
    FormulaGroups,
    ReferenceGroups(String),
    Cell(CellAddress),
    GroupGraph,
}

impl Perspective {
    pub fn name(&self) -> &'static str {
        match self {
            Perspective::FormulaGroups => "formula-groups",
            Perspective::ReferenceGroups(_) => "reference-groups",
            Perspective::Cell(_) => "cell",
            Perspective::GroupGraph => "graph",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RenderItem {
    pub range: String,
    /// `fill-N` for formula groups, `hatch-N` for reference groups.
    pub style: String,
    pub kind: &'static str,
    pub group: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slot: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RenderSet {
    pub perspective: &'static str,
    pub items: Vec<RenderItem>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<[String; 2]>>,
}

fn fill(model: &StructureModel, g: usize) -> RenderItem {
    let group = &model.groups[g];
    RenderItem {
        range: model.render_range(&group.sheet, group.range),
        style: format!("fill-{}", model.palette_index(g)),
        kind: "formula-group",
        group: group.id.clone(),
        slot: None,
    }
}

fn hatch(model: &StructureModel, r: usize) -> RenderItem {
    let rg = &model.ref_groups[r];
    let owner = &model.groups[rg.owner];
    RenderItem {
        range: model.render_range(&owner.sheet, rg.range),
        style: format!("hatch-{}", model.palette_index(rg.owner)),
        kind: "reference-group",
        group: owner.id.clone(),
        slot: Some(rg.slot.index),
    }
}

/// Ranges to highlight for one perspective.
pub fn perspective(model: &StructureModel, kind: &Perspective) -> Result<RenderSet, StructureError> {
    let mut edges = None;
    let items = match kind {
        Perspective::FormulaGroups => (0..model.groups.len()).map(|g| fill(model, g)).collect(),
        Perspective::ReferenceGroups(id) => {
            let g = model.group_index(id).ok_or_else(|| StructureError::UnknownGroup(id.clone()))?;
            let mut items = vec![fill(model, g)];
            items.extend((0..model.ref_groups.len()).filter(|&r| model.ref_groups[r].owner == g).map(|r| hatch(model, r)));
            items
        }
        Perspective::Cell(addr) => {
            let mut items: Vec<RenderItem> = model.owner_of(addr).map(|g| fill(model, g)).into_iter().collect();
            for (r, rg) in model.ref_groups.iter().enumerate() {
                if model.groups[rg.owner].sheet == addr.sheet && rg.range.contains(addr.pos) {
                    items.push(hatch(model, r));
                }
            }
            items
        }
        Perspective::GroupGraph => {
            edges = Some(
                model
                    .edges
                    .iter()
                    .map(|&(a, b)| [model.groups[a].id.clone(), model.groups[b].id.clone()])
                    .collect(),
            );
            (0..model.groups.len()).map(|g| fill(model, g)).collect()
        }
    };
    Ok(RenderSet { perspective: kind.name(), items, edges })
}
