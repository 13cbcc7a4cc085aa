//! Collapse schedules of the hierarchical convolution: kernel 5, stride 3,
//! padding 1, depth max(1, floor(log3 L)). Thirteen layers collapse to a
//! single position in two stages; extents that stop above 1 are mean-pooled.
//!
//! Run with: cargo run --example hierconv_schedule

use layerfuse::interface::hierconv_plan;

fn main() {
    println!("  L  depth  schedule");
    for l in 1..=49usize {
        match hierconv_plan(l) {
            Ok(plan) => {
                let chain = plan
                    .schedule
                    .iter()
                    .map(|e| e.to_string())
                    .collect::<Vec<_>>()
                    .join(" -> ");
                let tail = if *plan.schedule.last().unwrap() > 1 {
                    "  (mean-pool tail)"
                } else {
                    ""
                };
                println!("{l:>3}  {:>5}  {chain}{tail}", plan.depth);
            }
            Err(e) => println!("{l:>3}      -  unsupported: {e}"),
        }
    }
}
