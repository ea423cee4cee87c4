use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use latent_ilp::cluster::{cluster_grad_with, init_centroids, EmbeddingSource, EmbeddingTable};
use latent_ilp::network::{backward, NetworkConfig, NetworkParams};
use latent_ilp::par::ExecMode;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, ExecMode); 2] = [("parallel", ExecMode::Parallel), ("sequential", ExecMode::Sequential)];

fn network_backward(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let n = 200;
    let mut group = c.benchmark_group("backward");
    for batch in [64, 1024] {
        let x = Array2::from_shape_fn((batch, n), |_| if rng.gen_bool(0.3) { 1.0 } else { 0.0 });
        let y = Array1::from_shape_fn(batch, |_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 });
        for (name, exec) in MODES {
            let cfg = NetworkConfig { widths: vec![64], exec, ..Default::default() };
            let params = NetworkParams::init(n, &cfg).unwrap();
            group.bench_with_input(BenchmarkId::new(name, batch), &batch, |b, _| {
                b.iter(|| black_box(backward(x.view(), y.view(), &params, &cfg)))
            });
        }
    }
    group.finish();
}

fn clustering_gradient(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut group = c.benchmark_group("cluster_grad");
    for n in [500, 5000] {
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let table = EmbeddingTable::from_rows(&rows, EmbeddingSource::ToyEncoder).unwrap();
        let cs = init_centroids(&table, 10, 20.0, 0).unwrap();
        for (name, mode) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| b.iter(|| black_box(cluster_grad_with(&table, &cs, mode))));
        }
    }
    group.finish();
}

criterion_group!(benches, network_backward, clustering_gradient);
criterion_main!(benches);
