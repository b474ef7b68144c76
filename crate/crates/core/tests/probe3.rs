use std::time::Instant;
use ttn_core::nn::{train, Layer, Network, TrainConfig};
use ttn_core::tensor::DenseTensor;
use ttn_core::tt::ModeFactorization;

fn random_batch(rows: usize, cols: usize, seed: u64) -> DenseTensor {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    DenseTensor::new(vec![rows, cols], data).unwrap()
}

#[test]
#[ignore]
fn phase_timing() {
    let rows = 1800;
    let x = random_batch(rows, 640, 1);
    let t = random_batch(rows, 64, 2);
    let cfg = TrainConfig {
        epochs: 10,
        ..TrainConfig::default()
    };

    // Dense 640 -> 256 -> 256 -> 256 -> 64
    let net = Network::new(vec![
        Layer::dense_random(640, 256, 1),
        Layer::relu(),
        Layer::dense_random(256, 256, 2),
        Layer::relu(),
        Layer::dense_random(256, 256, 3),
        Layer::relu(),
        Layer::dense_random(256, 64, 4),
    ])
    .unwrap();
    let t0 = Instant::now();
    let _ = train(net, &x, &t, &cfg).unwrap();
    eprintln!("dense 10 epochs: {:?}", t0.elapsed());

    // TTN rank 16
    let x2 = random_batch(rows, 630, 3);
    let t2 = random_batch(rows, 63, 4);
    let f1 = ModeFactorization::with_uniform_rank(vec![10, 63], vec![16, 16], 16).unwrap();
    let f2 = ModeFactorization::with_uniform_rank(vec![16, 16], vec![16, 16], 16).unwrap();
    let net = Network::new(vec![
        Layer::tt_random(&f1, 1),
        Layer::relu(),
        Layer::tt_random(&f2, 2),
        Layer::relu(),
        Layer::tt_random(&f2, 3),
        Layer::relu(),
        Layer::dense_random(256, 63, 4),
    ])
    .unwrap();
    let t0 = Instant::now();
    let _ = train(net, &x2, &t2, &cfg).unwrap();
    eprintln!("ttn-16 10 epochs: {:?}", t0.elapsed());

    // TTN rank 6
    let f1 = ModeFactorization::with_uniform_rank(vec![10, 63], vec![16, 16], 6).unwrap();
    let f2 = ModeFactorization::with_uniform_rank(vec![16, 16], vec![16, 16], 6).unwrap();
    let net = Network::new(vec![
        Layer::tt_random(&f1, 1),
        Layer::relu(),
        Layer::tt_random(&f2, 2),
        Layer::relu(),
        Layer::tt_random(&f2, 3),
        Layer::relu(),
        Layer::dense_random(256, 63, 4),
    ])
    .unwrap();
    let t0 = Instant::now();
    let _ = train(net, &x2, &t2, &cfg).unwrap();
    eprintln!("ttn-6 10 epochs: {:?}", t0.elapsed());
}
