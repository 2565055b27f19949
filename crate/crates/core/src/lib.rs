//! Structure-aware spreadsheet engine.
//!
//! Infers formula groups and reference groups from cell formulas, checks
//! structural soundness after edits and proposes repairs, and plans
//! structure-level refactorings such as splitting or relocating a group.

pub mod address;
pub mod eval;
pub mod formula;
pub mod refactor;
pub mod session;
pub mod soundness;
mod rewrite;
pub mod structure;
pub mod workbook;

pub use address::{CellAddress, CellRange, Pos, Rect};
pub use eval::{evaluate, evaluate_delta, CellValue, ErrorCode, Values};
pub use formula::{Formula, FormulaAst, RelativeFormula};
pub use structure::{infer, Axis, FormulaGroup, ReferenceGroup, StructureModel};
pub use session::{Session, SessionError};
pub use workbook::{CellContent, Delta, Workbook};
