//! Sanity baseline: on the layer-select task the label lives in a single
//! layer, so the plain softmax weighted sum is enough. Every interface kind
//! should also drive its training loss down on this task.
//!
//! Run with: cargo run --release --example train_layer_select

use layerfuse::data::{generate, SynthSpec};
use layerfuse::heads::HeadKind;
use layerfuse::trainer::{gradcheck::default_specs, train, OptimizerKind, TrainConfig};

fn main() -> layerfuse::Result<()> {
    let dir = std::env::temp_dir().join("layerfuse_layer_select_example");
    let spec = SynthSpec::layer_select_defaults(42);
    let dataset = generate(&spec, &dir)?;

    for interface in default_specs() {
        let config = TrainConfig {
            interface: interface.clone(),
            head_kind: HeadKind::Utterance,
            head_hidden: None,
            num_classes: 2,
            epochs: 30,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            seed: 42,
            train_manifest: dataset.train_manifest.clone(),
            test_manifest: dataset.test_manifest.clone(),
        };
        let (report, _) = train(&config)?;
        println!(
            "{:<12} epoch1 loss {:.4} -> epoch30 loss {:.4}, test accuracy {:.4} ({:.1}s)",
            interface.name(),
            report.epochs.first().map(|e| e.train_loss).unwrap_or(f64::NAN),
            report.epochs.last().map(|e| e.train_loss).unwrap_or(f64::NAN),
            report.final_test_accuracy,
            report.wall_clock_secs,
        );
    }
    Ok(())
}
