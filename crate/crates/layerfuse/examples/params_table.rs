//! Exact trainable-parameter accounting for every interface at the
//! dimensions of a 12-layer-encoder upstream (13 hidden-state layers
//! including the frontend output, D = 768).
//!
//! Run with: cargo run --example params_table

use layerfuse::InterfaceSpec;

fn main() -> layerfuse::Result<()> {
    let (l, d) = (13usize, 768usize);
    let rows = vec![
        InterfaceSpec::weighted_sum(),
        InterfaceSpec::GroupWs { num_groups: 2 },
        InterfaceSpec::GroupWs { num_groups: 3 },
        InterfaceSpec::GroupWs { num_groups: 4 },
        InterfaceSpec::ConcatProj,
        InterfaceSpec::PcaConcat {
            components_per_layer: None,
        },
        InterfaceSpec::HierConv,
        InterfaceSpec::ClsPool {
            heads: None,
            ffn_dim: None,
        },
    ];
    println!("interface (L={l}, D={d})      params      output dim");
    for spec in rows {
        let label = match &spec {
            InterfaceSpec::GroupWs { num_groups } => format!("{} (G={num_groups})", spec.name()),
            _ => spec.name().to_string(),
        };
        println!(
            "{label:<24} {:>12} {:>11}",
            spec.param_count(l, d)?,
            spec.output_dim(l, d)?
        );
    }
    println!();
    println!("group-ws adds one projection per group; concat-proj projects the");
    println!("full L*D concatenation; hier-conv is depth * (5*D^2 + D) with");
    println!("depth = max(1, floor(log3 L)); cls-pool is one encoder block plus");
    println!("the CLS embedding; pca-concat has no trainable parameters at all.");
    Ok(())
}
