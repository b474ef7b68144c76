use std::time::Instant;
use ttn_core::experiment::{run_experiment, ExperimentConfig};

#[test]
#[ignore]
fn probe_timing() {
    let cfg = ExperimentConfig {
        channel_cases: vec![2],
        ..ExperimentConfig::default()
    };
    let t0 = Instant::now();
    let report = run_experiment(&cfg).unwrap();
    eprintln!("ch2 only elapsed: {:?}", t0.elapsed());
    eprintln!("{}", report.table());
}
