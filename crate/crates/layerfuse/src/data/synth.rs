//! Synthetic dataset generators. Both tasks plant a binary label in feature
//! 0 of chosen layers inside an otherwise N(0,1) stack:
//!
//! * `collision` writes the label signal with opposite signs into two layers
//!   and adds a large nuisance value shared by both (drawn once per
//!   utterance). The difference of the two layers recovers the label almost
//!   perfectly, but any nonnegative layer combination keeps the nuisance and
//!   stays near chance.
//! * `layer-select` plants the signal in a single layer; picking out that
//!   layer is enough, so a plain weighted sum solves it.

use super::lif::write_lif;
use super::manifest::{write_manifest, Labels};
use crate::error::{Error, Result};
use crate::interface::LayerStack;
use crate::numerics::{normal_cdf, Prng, Tensor};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthTask {
    Collision,
    LayerSelect,
}

/// Where the label signal lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignalSite {
    /// Opposite-sign pair (collision task).
    Pair(usize, usize),
    /// Single layer (layer-select task).
    Single(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub task: SynthTask,
    pub num_utterances: usize,
    pub num_layers: usize,
    pub num_frames: usize,
    pub dim: usize,
    pub signal: SignalSite,
    pub margin: f64,
    pub nuisance_sigma: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn collision_defaults(seed: u64) -> Self {
        SynthSpec {
            task: SynthTask::Collision,
            num_utterances: 2000,
            num_layers: 13,
            num_frames: 20,
            dim: 8,
            signal: SignalSite::Pair(3, 5),
            margin: 1.0,
            nuisance_sigma: 5.0,
            noise_sigma: 0.1,
            seed,
        }
    }

    pub fn layer_select_defaults(seed: u64) -> Self {
        SynthSpec {
            task: SynthTask::LayerSelect,
            num_utterances: 2000,
            num_layers: 13,
            num_frames: 20,
            dim: 8,
            signal: SignalSite::Single(3),
            margin: 1.0,
            nuisance_sigma: 5.0,
            noise_sigma: 0.5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_utterances == 0 || self.num_layers == 0 || self.num_frames == 0 || self.dim == 0
        {
            return Err(Error::Config("all extents must be >= 1".to_string()));
        }
        if self.margin <= 0.0 {
            return Err(Error::Config(format!(
                "margin must be > 0, got {}",
                self.margin
            )));
        }
        if self.nuisance_sigma < 0.0 || self.noise_sigma < 0.0 {
            return Err(Error::Config("sigmas must be >= 0".to_string()));
        }
        match (self.task, self.signal) {
            (SynthTask::Collision, SignalSite::Pair(a, b)) => {
                if a == b {
                    return Err(Error::Config("signal layers must differ".to_string()));
                }
                if a >= self.num_layers || b >= self.num_layers {
                    return Err(Error::Config(format!(
                        "signal layers ({a}, {b}) must be < L = {}",
                        self.num_layers
                    )));
                }
            }
            (SynthTask::LayerSelect, SignalSite::Single(j)) => {
                if j >= self.num_layers {
                    return Err(Error::Config(format!(
                        "signal layer {j} must be < L = {}",
                        self.num_layers
                    )));
                }
            }
            (task, signal) => {
                return Err(Error::Config(format!(
                    "task {task:?} is incompatible with signal {signal:?}"
                )))
            }
        }
        Ok(())
    }
}

/// Paths and tallies of one generated dataset.
#[derive(Debug, Clone, Serialize)]
pub struct GeneratedDataset {
    pub out_dir: PathBuf,
    pub train_manifest: PathBuf,
    pub test_manifest: PathBuf,
    pub num_train: usize,
    pub num_test: usize,
    pub label_counts: [usize; 2],
}

/// Generate feature files plus train/test manifests (first 80% of the
/// utterance indices train). Pure function of the spec: rerunning with the
/// same spec reproduces the same bytes.
pub fn generate(spec: &SynthSpec, out_dir: &Path) -> Result<GeneratedDataset> {
    spec.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let mut rng = Prng::new(spec.seed);
    let (l, t, d) = (spec.num_layers, spec.num_frames, spec.dim);
    let mut entries: Vec<(String, Labels)> = Vec::with_capacity(spec.num_utterances);
    let mut label_counts = [0usize; 2];
    for utt in 0..spec.num_utterances {
        // draw order per utterance: label, background, nuisance, frame noise
        let y = usize::from(rng.uniform() >= 0.5);
        label_counts[y] += 1;
        let signed = spec.margin * (2.0 * y as f64 - 1.0);
        let mut values = Tensor::zeros(&[l, t, d]);
        for v in values.data_mut() {
            *v = rng.normal();
        }
        match spec.signal {
            SignalSite::Pair(a, b) => {
                let nuisance = spec.nuisance_sigma * rng.normal();
                for frame in 0..t {
                    let e1 = spec.noise_sigma * rng.normal();
                    let e2 = spec.noise_sigma * rng.normal();
                    values.set(&[a, frame, 0], nuisance + signed + e1);
                    values.set(&[b, frame, 0], nuisance - signed + e2);
                }
            }
            SignalSite::Single(j) => {
                for frame in 0..t {
                    let e = spec.noise_sigma * rng.normal();
                    values.set(&[j, frame, 0], signed + e);
                }
            }
        }
        let stack = LayerStack::new(values)?;
        let name = format!("utt_{utt:05}.lif");
        write_lif(&stack, &out_dir.join(&name))?;
        entries.push((name, Labels::Utterance(y)));
    }
    let num_train = spec.num_utterances * 4 / 5;
    let train_manifest = out_dir.join("train.jsonl");
    let test_manifest = out_dir.join("test.jsonl");
    write_manifest(&train_manifest, &entries[..num_train])?;
    write_manifest(&test_manifest, &entries[num_train..])?;
    Ok(GeneratedDataset {
        out_dir: out_dir.to_path_buf(),
        train_manifest,
        test_manifest,
        num_train,
        num_test: spec.num_utterances - num_train,
        label_counts,
    })
}

/// Closed-form accuracy ceiling of a softmax-constrained weighted sum plus
/// an optimal linear head on the collision task, maximized over a grid of
/// nonnegative weight allocations.
///
/// With weight alpha_a and alpha_b on the signal pair and the rest spread
/// evenly (the spread that minimizes added noise), the frame-averaged
/// readout is Gaussian with mean (alpha_a - alpha_b) * margin and variance
/// (alpha_a + alpha_b)^2 su^2 + ((alpha_a^2 + alpha_b^2) se^2 + rest^2/(L-2)) / T.
pub fn weighted_sum_accuracy_ceiling(spec: &SynthSpec) -> f64 {
    let (m, su, se) = (spec.margin, spec.nuisance_sigma, spec.noise_sigma);
    let t = spec.num_frames as f64;
    let others = (spec.num_layers - 2) as f64;
    let grid = 400;
    let mut best: f64 = 0.5;
    for i in 0..=grid {
        let split = i as f64 / grid as f64;
        for j in 0..=grid {
            let mass = j as f64 / grid as f64;
            let alpha_a = mass * split;
            let alpha_b = mass * (1.0 - split);
            let rest = 1.0 - mass;
            let var = (alpha_a + alpha_b).powi(2) * su * su
                + ((alpha_a * alpha_a + alpha_b * alpha_b) * se * se
                    + if others > 0.0 { rest * rest / others } else { 0.0 })
                    / t;
            if var <= 0.0 {
                continue;
            }
            let acc = normal_cdf((alpha_a - alpha_b).abs() * m / var.sqrt());
            best = best.max(acc);
        }
    }
    best
}
