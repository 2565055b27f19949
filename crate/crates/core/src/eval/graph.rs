use std::collections::{HashMap, HashSet, VecDeque};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::address::{CellAddress, Pos, Rect};
use crate::formula::{Formula, RefLeaf};
use crate::workbook::Workbook;

/// Sheet index plus position; cheaper to hash than a [`CellAddress`].
pub(crate) type Key = (usize, Pos);

/// Precedent → dependent edges between formula cells.
#[derive(Debug, Clone)]
pub struct DependencyGraph {
    pub(crate) nodes: Vec<Key>,
    pub(crate) index: HashMap<Key, usize>,
    /// For each node, the formula nodes it reads.
    pub(crate) precedents: Vec<Vec<usize>>,
    /// For each node, the formula nodes that read it.
    pub(crate) dependents: Vec<Vec<usize>>,
    sheet_names: Vec<String>,
}

pub(crate) fn resolve_sheet(wb: &Workbook, host_sheet: usize, qualifier: Option<&str>) -> Option<usize> {
    match qualifier {
        None => Some(host_sheet),
        Some(name) => wb.sheets().iter().position(|s| s.name() == name),
    }
}

/// Target rectangles of every reference leaf, resolved to sheet indices.
pub(crate) fn formula_targets(wb: &Workbook, host_sheet: usize, formula: &Formula) -> Vec<Option<(usize, Rect)>> {
    formula
        .ast()
        .leaves()
        .into_iter()
        .map(|leaf| match leaf {
            RefLeaf::Single(r) => resolve_sheet(wb, host_sheet, r.sheet.as_deref()).map(|s| (s, Rect::cell(r.pos()))),
            RefLeaf::Range(a, b) => {
                resolve_sheet(wb, host_sheet, a.sheet.as_deref()).map(|s| (s, Rect::new(a.pos(), b.pos())))
            }
        })
        .collect()
}

impl DependencyGraph {
    pub fn build(wb: &Workbook) -> Self {
        let mut nodes = Vec::new();
        let mut index = HashMap::new();
        for (si, sheet) in wb.sheets().iter().enumerate() {
            for (pos, _) in sheet.formulas() {
                index.insert((si, pos), nodes.len());
                nodes.push((si, pos));
            }
        }
        let mut precedents = vec![Vec::new(); nodes.len()];
        let mut dependents = vec![Vec::new(); nodes.len()];
        for (i, &(si, pos)) in nodes.iter().enumerate() {
            let formula = wb.sheets()[si].get(pos).as_formula().expect("formula node");
            let mut seen = HashSet::new();
            for (ts, rect) in formula_targets(wb, si, formula).into_iter().flatten() {
                let sheet = &wb.sheets()[ts];
                if rect.area() == 1 {
                    if let Some(&j) = index.get(&(ts, rect.start)) {
                        seen.insert(j);
                    }
                } else {
                    for (p, c) in sheet.cells_in(rect) {
                        if c.as_formula().is_some() {
                            seen.insert(index[&(ts, p)]);
                        }
                    }
                }
            }
            let mut pre: Vec<usize> = seen.into_iter().collect();
            pre.sort_unstable();
            for &j in &pre {
                dependents[j].push(i);
            }
            precedents[i] = pre;
        }
        Self {
            nodes,
            index,
            precedents,
            dependents,
            sheet_names: wb.sheets().iter().map(|s| s.name().to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub(crate) fn address(&self, node: usize) -> CellAddress {
        let (si, pos) = self.nodes[node];
        CellAddress::new(self.sheet_names[si].clone(), pos)
    }

    /// Formula cells reading `addr`, directly or through a range.
    pub fn dependents_of(&self, addr: &CellAddress) -> Vec<CellAddress> {
        let Some(si) = self.sheet_names.iter().position(|s| *s == addr.sheet) else {
            return Vec::new();
        };
        match self.index.get(&(si, addr.pos)) {
            Some(&n) => self.dependents[n].iter().map(|&d| self.address(d)).collect(),
            None => Vec::new(),
        }
    }

    /// Edge list `(precedent, dependent)`.
    pub fn edges(&self) -> Vec<(CellAddress, CellAddress)> {
        let mut out = Vec::new();
        for (d, pre) in self.precedents.iter().enumerate() {
            for &p in pre {
                out.push((self.address(p), self.address(d)));
            }
        }
        out
    }

    /// Evaluation order for `subset` (precedents first) plus the nodes caught in cycles.
    pub(crate) fn schedule(&self, subset: Option<&HashSet<usize>>) -> (Vec<usize>, HashSet<usize>) {
        let members: Vec<usize> = match subset {
            Some(s) => {
                let mut v: Vec<usize> = s.iter().copied().collect();
                v.sort_unstable();
                v
            }
            None => (0..self.nodes.len()).collect(),
        };
        let mut g: DiGraph<usize, ()> = DiGraph::with_capacity(members.len(), 0);
        let local: HashMap<usize, NodeIndex> = members.iter().map(|&m| (m, g.add_node(m))).collect();
        for &m in &members {
            for p in &self.precedents[m] {
                if let Some(&pi) = local.get(p) {
                    // dependent → precedent, so post-order visits precedents first
                    g.add_edge(local[&m], pi, ());
                }
            }
        }
        let mut order = Vec::with_capacity(members.len());
        let mut cyclic = HashSet::new();
        for scc in tarjan_scc(&g) {
            let is_cycle = scc.len() > 1 || g.contains_edge(scc[0], scc[0]);
            for ni in scc {
                let node = g[ni];
                if is_cycle {
                    cyclic.insert(node);
                }
                order.push(node);
            }
        }
        (order, cyclic)
    }

    /// `start` plus all transitive dependents.
    pub(crate) fn closure(&self, start: &[usize]) -> HashSet<usize> {
        let mut seen: HashSet<usize> = start.iter().copied().collect();
        let mut queue: VecDeque<usize> = start.iter().copied().collect();
        while let Some(n) = queue.pop_front() {
            for &d in &self.dependents[n] {
                if seen.insert(d) {
                    queue.push_back(d);
                }
            }
        }
        seen
    }
}
