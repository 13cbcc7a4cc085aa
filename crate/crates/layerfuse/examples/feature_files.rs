//! The on-disk formats: write a layer stack as a LIF feature file, list a
//! dataset manifest, and round-trip a model bundle.
//!
//! Run with: cargo run --example feature_files

use layerfuse::data::{load_manifest, read_lif, write_lif, write_manifest, Labels};
use layerfuse::heads::{HeadKind, HeadParams, HeadSpec};
use layerfuse::numerics::Prng;
use layerfuse::trainer::{load_bundle, save_bundle, ModelBundle};
use layerfuse::{InterfaceParams, InterfaceSpec, LayerStack};

fn main() -> layerfuse::Result<()> {
    let dir = std::env::temp_dir().join("layerfuse_feature_files_example");
    std::fs::create_dir_all(&dir)?;
    let mut rng = Prng::new(5);

    // feature file round trip (header + layer-major f32 payload)
    let stack = LayerStack::random_normal(&mut rng, 3, 4, 6);
    let lif_path = dir.join("example.lif");
    write_lif(&stack, &lif_path)?;
    let loaded = read_lif(&lif_path)?;
    println!(
        "wrote {} ({} bytes), read back [{} x {} x {}]",
        lif_path.display(),
        std::fs::metadata(&lif_path)?.len(),
        loaded.num_layers(),
        loaded.num_frames(),
        loaded.dim()
    );

    // manifest: one JSON record per line, one label form each
    let manifest_path = dir.join("tiny.jsonl");
    write_manifest(
        &manifest_path,
        &[
            ("example.lif".to_string(), Labels::Utterance(1)),
            ("example.lif".to_string(), Labels::Frames(vec![0, 1, 1, 0])),
        ],
    )?;
    let manifest = load_manifest(&manifest_path)?;
    println!(
        "manifest: {} records, shared dims {:?}",
        manifest.records.len(),
        manifest.dims
    );

    // model bundle round trip
    let interface = InterfaceParams::init(InterfaceSpec::HierConv, 3, 6, &mut rng)?;
    let head = HeadParams::init(
        HeadSpec::linear(HeadKind::Utterance, interface.output_dim(), 2),
        &mut rng,
    )?;
    let lim_path = dir.join("example.lim");
    save_bundle(&ModelBundle { interface, head }, &lim_path)?;
    let bundle = load_bundle(&lim_path)?;
    println!(
        "bundle: {} -> {} interface params, {} head params",
        lim_path.display(),
        bundle.interface.allocated_param_count(),
        bundle.head.allocated_param_count()
    );
    Ok(())
}
