//! The collision experiment: a binary label is written with opposite signs
//! into layers 3 and 5 on top of a shared high-variance nuisance value.
//! Differencing the two layers recovers the label; any nonnegative layer
//! mixture keeps the nuisance. A hierarchical convolution (which can learn
//! a signed difference across layers) solves the task while the softmax
//! weighted sum stays near its analytic ceiling.
//!
//! Run with: cargo run --release --example collision_experiment

use layerfuse::data::{generate, weighted_sum_accuracy_ceiling, SynthSpec};
use layerfuse::heads::HeadKind;
use layerfuse::trainer::{train, OptimizerKind, TrainConfig};
use layerfuse::InterfaceSpec;

fn main() -> layerfuse::Result<()> {
    let dir = std::env::temp_dir().join("layerfuse_collision_example");
    let spec = SynthSpec::collision_defaults(42);
    println!("generating {} utterances under {} ...", spec.num_utterances, dir.display());
    let dataset = generate(&spec, &dir)?;
    println!(
        "labels: {} zeros / {} ones; analytic weighted-sum ceiling = {:.4}\n",
        dataset.label_counts[0],
        dataset.label_counts[1],
        weighted_sum_accuracy_ceiling(&spec)
    );

    let contenders = [
        InterfaceSpec::weighted_sum(),
        InterfaceSpec::ConcatProj,
        InterfaceSpec::HierConv,
        InterfaceSpec::PcaConcat {
            components_per_layer: None,
        },
    ];
    for interface in contenders {
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
            "{:<12} params {:>7}  epoch1 loss {:.4}  epoch30 loss {:.4}  test accuracy {:.4}  ({:.1}s)",
            interface.name(),
            report.interface_param_count,
            report.epochs.first().map(|e| e.train_loss).unwrap_or(f64::NAN),
            report.epochs.last().map(|e| e.train_loss).unwrap_or(f64::NAN),
            report.final_test_accuracy,
            report.wall_clock_secs,
        );
    }
    Ok(())
}
