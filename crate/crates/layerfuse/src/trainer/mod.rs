//! Deterministic optimization loop joining an interface and a head on a
//! manifest-backed dataset, plus evaluation and the gradient-check suite.
//! The upstream features are frozen: only interface and head parameters
//! ever change.

pub mod adam;
pub mod bundle;
pub mod gradcheck;

pub use adam::{OptimizerKind, OptimizerState};
pub use bundle::{load_bundle, save_bundle, ModelBundle};
pub use gradcheck::{gradcheck_interface, gradcheck_suite, GradCheckOutcome};

use crate::data::{load_manifest, read_lif, DatasetManifest, Labels};
use crate::error::{Error, Result};
use crate::heads::{ce_loss_grad, correct_count, HeadKind, HeadParams, HeadSpec};
use crate::interface::{InterfaceGrads, InterfaceParams, InterfaceSpec, LayerStack};
use crate::numerics::{Prng, Tensor};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub interface: InterfaceSpec,
    pub head_kind: HeadKind,
    /// Hidden width of the head; None keeps the default linear head.
    pub head_hidden: Option<usize>,
    pub num_classes: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub train_manifest: PathBuf,
    pub test_manifest: PathBuf,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "epochs and batch size must be >= 1".to_string(),
            ));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.num_classes < 2 {
            return Err(Error::Config(format!(
                "at least 2 classes required, got {}",
                self.num_classes
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub seed: u64,
    pub interface_param_count: usize,
    pub head_param_count: usize,
    pub epochs: Vec<EpochMetrics>,
    pub final_test_loss: f64,
    pub final_test_accuracy: f64,
    /// Informational only; excluded from determinism comparisons.
    pub wall_clock_secs: f64,
}

/// In-memory dataset: all stacks widened to f64 once.
pub struct Dataset {
    pub stacks: Vec<LayerStack>,
    pub labels: Vec<Labels>,
    pub num_layers: usize,
    pub dim: usize,
}

impl Dataset {
    pub fn load(manifest_path: &Path) -> Result<Self> {
        let manifest = load_manifest(manifest_path)?;
        Self::from_manifest(&manifest)
    }

    pub fn from_manifest(manifest: &DatasetManifest) -> Result<Self> {
        let (num_layers, dim) = manifest.dims.ok_or_else(|| {
            Error::Data("empty manifest: nothing to train or evaluate on".to_string())
        })?;
        let mut stacks = Vec::with_capacity(manifest.records.len());
        let mut labels = Vec::with_capacity(manifest.records.len());
        for record in &manifest.records {
            stacks.push(read_lif(&record.feature_path)?);
            labels.push(record.labels.clone());
        }
        Ok(Dataset {
            stacks,
            labels,
            num_layers,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.stacks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stacks.is_empty()
    }
}

fn labels_for<'a>(
    labels: &'a Labels,
    head_kind: HeadKind,
    num_frames: usize,
) -> Result<std::borrow::Cow<'a, [usize]>> {
    match (head_kind, labels) {
        (HeadKind::Utterance, Labels::Utterance(y)) => Ok(vec![*y].into()),
        (HeadKind::Frame, Labels::Frames(f)) => {
            debug_assert_eq!(f.len(), num_frames);
            Ok(f.as_slice().into())
        }
        (HeadKind::Utterance, Labels::Frames(_)) => Err(Error::Data(
            "utterance head but the record carries frame labels".to_string(),
        )),
        (HeadKind::Frame, Labels::Utterance(_)) => Err(Error::Data(
            "frame head but the record carries an utterance label".to_string(),
        )),
    }
}

/// Forward one example through interface + head; returns (loss, correct
/// label positions, total label positions).
fn eval_example(
    interface: &InterfaceParams,
    head: &HeadParams,
    stack: &LayerStack,
    labels: &Labels,
) -> Result<(f64, usize, usize)> {
    let (z, _) = interface.forward(stack)?;
    let (logits, _) = head.forward(&z)?;
    let wanted = labels_for(labels, head.spec().kind, stack.num_frames())?;
    let (loss, _) = ce_loss_grad(&logits, &wanted)?;
    let correct = correct_count(&logits, &wanted)?;
    Ok((loss, correct, wanted.len()))
}

/// Mean loss and accuracy over a manifest; parameters are read-only.
pub fn evaluate(
    interface: &InterfaceParams,
    head: &HeadParams,
    manifest_path: &Path,
) -> Result<(f64, f64)> {
    let dataset = Dataset::load(manifest_path)?;
    evaluate_dataset(interface, head, &dataset)
}

pub fn evaluate_dataset(
    interface: &InterfaceParams,
    head: &HeadParams,
    dataset: &Dataset,
) -> Result<(f64, f64)> {
    if dataset.is_empty() {
        return Err(Error::Data("empty manifest: nothing to evaluate".to_string()));
    }
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    let mut total = 0usize;
    for (stack, labels) in dataset.stacks.iter().zip(&dataset.labels) {
        let (loss, c, t) = eval_example(interface, head, stack, labels)?;
        loss_sum += loss;
        correct += c;
        total += t;
    }
    Ok((
        loss_sum / dataset.len() as f64,
        correct as f64 / total as f64,
    ))
}

/// Run the full training loop and return the report plus the trained bundle.
///
/// Mini-batch order reshuffles every epoch from the config-seeded Prng, so
/// identical configs reproduce identical reports bit for bit. Gradients are
/// averaged per batch; a PCA interface is fitted on the training set before
/// the first epoch.
pub fn train(config: &TrainConfig) -> Result<(TrainReport, ModelBundle)> {
    config.validate()?;
    let started = Instant::now();
    let train_set = Dataset::load(&config.train_manifest)?;
    if train_set.is_empty() {
        return Err(Error::Data("empty training manifest".to_string()));
    }
    let (l, d) = (train_set.num_layers, train_set.dim);
    let mut rng = Prng::new(config.seed);
    let mut interface = InterfaceParams::init(config.interface.clone(), l, d, &mut rng)?;
    if matches!(config.interface, InterfaceSpec::PcaConcat { .. }) {
        interface.fit_pca(&train_set.stacks)?;
    }
    let head_spec = HeadSpec {
        kind: config.head_kind,
        input_dim: interface.output_dim(),
        num_classes: config.num_classes,
        hidden_dim: config.head_hidden,
    };
    let mut head = HeadParams::init(head_spec, &mut rng)?;

    let mut optimizer = {
        let tensors: Vec<&Tensor> = interface
            .trainable()
            .into_iter()
            .map(|(_, t)| t)
            .chain(head.trainable().into_iter().map(|(_, t)| t))
            .collect();
        OptimizerState::new(config.optimizer, &tensors)
    };

    let n_interface_tensors = interface.trainable().len();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut epochs = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut total = 0usize;
        for batch in order.chunks(config.batch_size) {
            let mut iface_grads = InterfaceGrads::zeros_like(&interface);
            let mut head_grads: Vec<Tensor> = head
                .trainable()
                .iter()
                .map(|(_, t)| Tensor::zeros(t.shape()))
                .collect();
            for &idx in batch {
                let stack = &train_set.stacks[idx];
                let (z, iface_cache) = interface.forward(stack)?;
                let (logits, head_cache) = head.forward(&z)?;
                let wanted = labels_for(&train_set.labels[idx], config.head_kind, stack.num_frames())?;
                let (loss, grad_logits) = ce_loss_grad(&logits, &wanted)?;
                if !loss.is_finite() {
                    return Err(Error::Divergence { epoch });
                }
                loss_sum += loss;
                correct += correct_count(&logits, &wanted)?;
                total += wanted.len();
                let (hg, grad_z) = head.backward(&head_cache, &grad_logits)?;
                let (ig, _) = interface.backward(&iface_cache, &grad_z)?;
                iface_grads.accumulate(&InterfaceGrads { tensors: ig.tensors });
                for (dst, src) in head_grads.iter_mut().zip(&hg) {
                    for (a, b) in dst.data_mut().iter_mut().zip(src.data()) {
                        *a += b;
                    }
                }
            }
            let scale = 1.0 / batch.len() as f64;
            iface_grads.scale(scale);
            for g in &mut head_grads {
                for v in g.data_mut() {
                    *v *= scale;
                }
            }
            // one flat parameter list: interface tensors then head tensors
            let mut params: Vec<&mut Tensor> = interface
                .trainable_mut()
                .into_iter()
                .map(|(_, t)| t)
                .collect();
            let mut head_params: Vec<&mut Tensor> =
                head.trainable_mut().into_iter().map(|(_, t)| t).collect();
            params.append(&mut head_params);
            let grads: Vec<&Tensor> = iface_grads
                .tensors
                .iter()
                .chain(head_grads.iter())
                .collect();
            debug_assert_eq!(iface_grads.tensors.len(), n_interface_tensors);
            optimizer.step(&mut params, &grads, config.learning_rate);
        }
        epochs.push(EpochMetrics {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            train_accuracy: correct as f64 / total as f64,
        });
    }

    let (final_test_loss, final_test_accuracy) = evaluate(&interface, &head, &config.test_manifest)?;
    let report = TrainReport {
        config: config.clone(),
        seed: config.seed,
        interface_param_count: interface.allocated_param_count(),
        head_param_count: head.allocated_param_count(),
        epochs,
        final_test_loss,
        final_test_accuracy,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    Ok((report, ModelBundle { interface, head }))
}

/// Hidden width that brings a linear-plus-hidden head closest to
/// `target_params` total trainable scalars (used for parameter-matched
/// baselines).
pub fn matched_hidden_width(target_params: usize, input_dim: usize, num_classes: usize) -> usize {
    let per_unit = input_dim + 1 + num_classes;
    let base = num_classes;
    if target_params <= base {
        return 1;
    }
    (((target_params - base) as f64 / per_unit as f64).round() as usize).max(1)
}
