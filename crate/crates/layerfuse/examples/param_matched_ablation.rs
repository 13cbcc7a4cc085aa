//! Parameter-matched comparison: give the weighted sum a hidden-layer head
//! widened until its total trainable count matches the hierarchical
//! convolution run, then train both on the collision task. The widened head
//! still receives the collapsed sum, so the nuisance never cancels and the
//! gap stays wide: more parameters downstream do not substitute for a
//! better interface.
//!
//! Run with: cargo run --release --example param_matched_ablation

use layerfuse::data::{generate, SynthSpec};
use layerfuse::heads::{HeadKind, HeadSpec};
use layerfuse::trainer::{matched_hidden_width, train, OptimizerKind, TrainConfig};
use layerfuse::InterfaceSpec;

fn main() -> layerfuse::Result<()> {
    let dir = std::env::temp_dir().join("layerfuse_ablation_example");
    let spec = SynthSpec::collision_defaults(42);
    let dataset = generate(&spec, &dir)?;

    let base = TrainConfig {
        interface: InterfaceSpec::HierConv,
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
    let (conv_report, _) = train(&base)?;
    let conv_total = conv_report.interface_param_count + conv_report.head_param_count;

    let ws_interface = InterfaceSpec::weighted_sum().param_count(spec.num_layers, spec.dim)?;
    let hidden = matched_hidden_width(conv_total - ws_interface, spec.dim, 2);
    let widened_head = HeadSpec {
        kind: HeadKind::Utterance,
        input_dim: spec.dim,
        num_classes: 2,
        hidden_dim: Some(hidden),
    };
    let ws_config = TrainConfig {
        interface: InterfaceSpec::weighted_sum(),
        head_hidden: Some(hidden),
        ..base
    };
    let (ws_report, _) = train(&ws_config)?;
    let ws_total = ws_report.interface_param_count + ws_report.head_param_count;

    println!(
        "hier-conv            : {:>5} params total, test accuracy {:.4}",
        conv_total, conv_report.final_test_accuracy
    );
    println!(
        "weighted-sum + MLP({hidden}): {:>5} params total ({:+.1}% vs conv), test accuracy {:.4}",
        ws_total,
        100.0 * (ws_total as f64 - conv_total as f64) / conv_total as f64,
        ws_report.final_test_accuracy
    );
    println!(
        "gap: {:.1} accuracy points (head spec echo: {} classes, hidden {:?})",
        100.0 * (conv_report.final_test_accuracy - ws_report.final_test_accuracy),
        widened_head.num_classes,
        widened_head.hidden_dim
    );
    Ok(())
}
