//! Linearized MusicXML toolkit: score model, canonical form, LMX encoding,
//! tree-edit-distance and sequence metrics, and scan augmentation.

pub mod duration;
pub mod score;
pub mod canonical;
pub mod lmx;
pub mod synth;
pub mod treedist;
pub mod metrics;
pub mod augment;
