//! Feature-file persistence, dataset manifests, and the synthetic
//! generators behind the collision experiment.

pub mod lif;
pub mod manifest;
pub mod synth;

pub use lif::{read_lif, read_lif_header, write_lif, LifHeader};
pub use manifest::{load_manifest, write_manifest, DatasetManifest, Labels, ManifestRecord};
pub use synth::{
    generate, weighted_sum_accuracy_ceiling, GeneratedDataset, SignalSite, SynthSpec, SynthTask,
};
