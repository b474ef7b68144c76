use std::time::Instant;
use ttn_core::experiment::{run_experiment, ExperimentConfig};

#[test]
#[ignore]
fn probe_experiment() {
    let cfg = ExperimentConfig::default();
    eprintln!("config: {cfg:?}");
    let t0 = Instant::now();
    let report = run_experiment(&cfg).unwrap();
    eprintln!("elapsed: {:?}", t0.elapsed());
    eprintln!("{}", report.table());
    for row in &report.rows {
        if !row.loss_trace.is_empty() {
            let first = row.loss_trace.first().unwrap();
            let last = row.loss_trace.last().unwrap();
            eprintln!(
                "{} ch{}: loss {first:.4} -> {last:.4}",
                row.model, row.channels
            );
        }
    }
}
