//! Verify every hand-written backward pass against central finite
//! differences: all six interfaces, both head kinds, five seeds.
//!
//! Run with: cargo run --release --example gradcheck_all

use layerfuse::trainer::{gradcheck::default_specs, gradcheck_suite};

fn main() -> layerfuse::Result<()> {
    let outcomes = gradcheck_suite(&default_specs(), 5, 7, 8, &[0, 1, 2, 3, 4], 1e-4)?;
    let mut failures = 0;
    for o in &outcomes {
        println!(
            "{:<12} {:<9} seed {}  max rel err {:.2e}  ({}{})",
            o.interface,
            o.head,
            o.seed,
            o.max_rel_err,
            if o.pass { "pass" } else { "FAIL" },
            if o.noise_floored > 0 {
                format!(", {} coords at the noise floor", o.noise_floored)
            } else {
                String::new()
            }
        );
        failures += usize::from(!o.pass);
    }
    println!("\n{} checks, {failures} failures", outcomes.len());
    std::process::exit(i32::from(failures > 0));
}
