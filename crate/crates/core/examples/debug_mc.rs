use fpf_core::experiments::{run_benchmark_mc, McConfig, Method};
use fpf_core::filters::TimeMode;
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let mut cfg = McConfig::new(42, TimeMode::Continuous);
    cfg.runs = 12;
    let report = run_benchmark_mc(&cfg).unwrap();
    for s in &report.summaries {
        println!("{:14} tracked {:2}/12 mean_mse {:9.1} mean_cpu {:.3}s", s.method, s.tracked_count, s.mean_mse, s.mean_cpu_seconds);
    }
    println!("wall {:.0}s", t0.elapsed().as_secs_f64());
}
