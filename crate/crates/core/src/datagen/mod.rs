//! Deterministic synthetic datasets of two-conformation phantoms.

mod dataset;
mod phantom;

pub use dataset::{
    load_manifest, make_dataset, plan_dataset, render_clean, render_noisy, snr_label, DatasetSpec, FileRef,
    ImageRecord, Manifest, NoisyRecord, Role, MANIFEST_FILE,
};
pub use phantom::{make_phantom, Conformation, RADIUS_JITTER};
