//! Fit the parameter-free PCA interface on synthetic data with a planted
//! low-rank structure and inspect the recovered spectra: the per-layer
//! bases are orthonormal, the transformed data is decorrelated, and layers
//! carrying extra variance show it in their top eigenvalues.
//!
//! Run with: cargo run --release --example pca_interface

use layerfuse::numerics::{Prng, Tensor};
use layerfuse::{InterfaceParams, InterfaceSpec, LayerStack};

fn main() -> layerfuse::Result<()> {
    let (l, t, d, k) = (4usize, 25usize, 6usize, 2usize);
    let mut rng = Prng::new(1234);

    // layer 2 carries two strong directions on top of unit noise
    let strong = [2.5, 1.8];
    let stacks: Vec<LayerStack> = (0..60)
        .map(|_| {
            let mut values = Tensor::zeros(&[l, t, d]);
            for v in values.data_mut() {
                *v = rng.normal();
            }
            for frame in 0..t {
                let a = strong[0] * rng.normal();
                let b = strong[1] * rng.normal();
                let base = values.at(&[2, frame, 0]);
                values.set(&[2, frame, 0], base + a);
                let base = values.at(&[2, frame, 3]);
                values.set(&[2, frame, 3], base + b);
            }
            LayerStack::new(values).unwrap()
        })
        .collect();

    let spec = InterfaceSpec::PcaConcat {
        components_per_layer: Some(k),
    };
    let mut params = InterfaceParams::init(spec.clone(), l, d, &mut rng)?;
    params.fit_pca(&stacks)?;
    let buffers = params.pca_buffers().expect("fitted");

    println!("per-layer eigenvalue spectra (descending):");
    for layer in 0..l {
        let spectrum: Vec<String> = (0..d)
            .map(|i| format!("{:5.2}", buffers.eigenvalues().at(&[layer, i])))
            .collect();
        println!("  layer {layer}: {}", spectrum.join(" "));
    }

    let (z, _) = params.forward(&stacks[0])?;
    let rounded: Vec<f64> = z.values().data()[..k * l]
        .iter()
        .map(|v| (v * 100.0).round() / 100.0)
        .collect();
    println!(
        "\noutput dim {} = L ({l}) x k ({k}); first transformed frame: {rounded:?}",
        spec.output_dim(l, d)?
    );
    Ok(())
}
