//! Ordered tree edit distance and its note-aware normalized form.

mod tedn;
mod tree;
mod zs;

pub use tedn::{
    edit_script_text, lmx_projection, score_tree, tedn, tedn_trees, Cost, CostModelError, NoteLabel, TednCosts,
    TednError, TednMode, TednResult, TreeLabel, COST_MODEL_ENV, NOTE_FEATURES,
};
pub use tree::{LabeledTree, Node};
pub use zs::{edit_script, zhang_shasha, CostModel, EditOp};
