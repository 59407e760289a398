//! SD vs. PP-from-SD on the synthetic rings dataset.
//!
//! `cargo run --release --example rings_benchmark -- [ee|sne] [lambda] [uniform|sqdist] [perplexity] [restarts]`

use std::time::Instant;

use pressure_embed::affinity::{build_affinities, AffinityConfig, BandwidthMode, RepulsionWeights};
use pressure_embed::augmented::{make_mu_schedule, MuStrategy};
use pressure_embed::data_io::{generate_rings, RingsConfig};
use pressure_embed::optimizer::{restart_benchmark, OptimConfig};
use pressure_embed::Method;

fn main() -> pressure_embed::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: &str| args.get(i).cloned().unwrap_or_else(|| d.to_owned());
    let m = match arg(0, "ee").as_str() {
        "sne" => Method::sne(),
        _ => Method::ee(),
    };
    let lambda: f64 = arg(1, "1").parse().unwrap();
    let w_minus_mode = match arg(2, "uniform").as_str() {
        "sqdist" => RepulsionWeights::Sqdist,
        _ => RepulsionWeights::Uniform,
    };
    let perplexity: f64 = arg(3, "20").parse().unwrap();
    let restarts: usize = arg(4, "10").parse().unwrap();

    let start = Instant::now();
    let data = generate_rings(&RingsConfig::default(), 0)?;
    let cfg = AffinityConfig {
        mode: BandwidthMode::Perplexity(perplexity),
        lambda,
        w_minus_mode,
    };
    let g = build_affinities(&data, &cfg)?;
    let sched = make_mu_schedule(&g, MuStrategy::MeanDegree)?;
    let optim = OptimConfig {
        verbose: std::env::var_os("VERBOSE").is_some(),
        ..OptimConfig::default()
    };
    eprintln!("affinities ready after {:.1?}", start.elapsed());
    let pairs = restart_benchmark(&m, &g, restarts, 2, &sched, &optim, 1)?;
    for p in &pairs {
        println!(
            "seed {:>2}  SD {:.6} ({} it)  PP {:.6} ({} it, {} mu steps, conv {})  gain {:.3e}",
            p.seed,
            p.sd.final_objective,
            p.sd.trace.len(),
            p.pp.final_objective,
            p.pp.trace.len(),
            p.pp.mu_steps,
            p.pp.converged,
            p.improvement()
        );
    }
    println!("elapsed {:.1?}", start.elapsed());
    Ok(())
}
