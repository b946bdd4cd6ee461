//! Refines a coarse bumpy sphere against a dense reference and reports the
//! held-out angular error before and after.
//!
//! cargo run --release --example normal_recovery -- [amplitude] [frequency] [size] [steps] [seed]

use std::time::Instant;

use pbrboost_core::fixtures::bumpy_sphere;
use pbrboost_core::refine::oracle::NormalOracle;
use pbrboost_core::refine::{default_views, evaluate_views, held_out_views, refine, RefineConfig};
use pbrboost_core::Exec;

fn main() {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let amp = args.first().copied().unwrap_or(0.06);
    let freq = args.get(1).copied().unwrap_or(6.0);
    let size = args.get(2).copied().unwrap_or(128.0) as u32;
    let steps = args.get(3).copied().unwrap_or(400.0) as usize;
    let seed = args.get(4).copied().unwrap_or(0.0) as u64;

    let coarse = bumpy_sphere(16, 16, amp, freq);
    let reference = bumpy_sphere(100, 100, amp, freq);
    let scale = 1.1 * (1.0 + amp);
    let oracle = NormalOracle::synthetic_reference(Some(reference.clone()), 1.0).unwrap();
    let cfg = RefineConfig { steps_per_round: steps, seed, ..Default::default() };
    let t = Instant::now();
    let (field, report) = refine(&coarse, &oracle, &default_views(size, scale), &cfg).unwrap();
    println!("refine: {:.1}s, round losses {:?}", t.elapsed().as_secs_f64(), report.round_losses);
    let held = held_out_views(size, scale);
    let before = evaluate_views(&coarse, None, &reference, &held, Exec::default());
    let after = evaluate_views(&coarse, Some(&field), &reference, &held, Exec::default());
    let mean = |v: &[Option<f64>]| v.iter().flatten().sum::<f64>() / v.len() as f64;
    println!(
        "held-out error: {:.3}° -> {:.3}° ({:.1}% reduction)",
        mean(&before),
        mean(&after),
        100.0 * (1.0 - mean(&after) / mean(&before))
    );
}
