use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pawfuse::autodiff::{l2_normalize_rows, Matrix};
use pawfuse::data::{find_duplicates, perceptual_hash, HashAlgorithm, HashedItem, PerceptualHash};
use pawfuse::meta::{interact, LowOrderFeatures, MetaNet, MetaNetConfig};
use pawfuse::vision::ImageTensor;
use pawfuse::SeededRng;
use rand::Rng;

fn random_matrix(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
    Matrix::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn matmul(c: &mut Criterion) {
    let mut rng = SeededRng::new(0);
    let mut group = c.benchmark_group("matmul");
    for n in [16, 64, 144] {
        let (a, b) = (random_matrix(n, n, &mut rng), random_matrix(n, n, &mut rng));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| {
            bench.iter(|| black_box(&a).matmul(black_box(&b)).unwrap())
        });
    }
    group.finish();
}

fn interaction(c: &mut Criterion) {
    let mut rng = SeededRng::new(1);
    let (matrix, degenerate_rows) = l2_normalize_rows(&random_matrix(12, 8, &mut rng));
    let low = LowOrderFeatures { matrix, degenerate_rows };
    c.bench_function("interact 12x8", |b| b.iter(|| interact(black_box(&low))));
}

fn meta_step(c: &mut Criterion) {
    let mut rng = SeededRng::new(2);
    let phrases = random_matrix(12, 50, &mut rng);
    let names = (0..12).map(|i| format!("f{i}")).collect();
    let net = MetaNet::with_phrase_vectors(MetaNetConfig::default(), names, phrases).unwrap();
    let batch: Vec<Vec<u8>> = (0..40).map(|_| (0..12).map(|_| rng.random_range(0..=1)).collect()).collect();
    let refs: Vec<&[u8]> = batch.iter().map(|b| &b[..]).collect();
    let targets: Vec<f64> = (0..40).map(|_| rng.random_range(0.0..1.0)).collect();
    c.bench_function("meta-net forward+backward, batch 40", |b| {
        b.iter(|| {
            let (mut g, loss) = net.loss_graph(&refs, &targets).unwrap();
            g.forward(loss, &net.params).unwrap();
            g.backward(loss).unwrap()
        })
    });
}

fn hashing(c: &mut Criterion) {
    let mut rng = SeededRng::new(3);
    let bytes: Vec<u8> = (0..256 * 256 * 3).map(|_| rng.random()).collect();
    let img = ImageTensor::from_rgb8(256, 256, &bytes).unwrap();
    c.bench_function("average hash 256x256", |b| {
        b.iter(|| perceptual_hash(black_box(&img), HashAlgorithm::Average))
    });

    let items: Vec<HashedItem> = (0..10_000)
        .map(|i| HashedItem {
            id: i.to_string(),
            hash: PerceptualHash { bits: rng.random(), algorithm: HashAlgorithm::Average },
            label: None,
        })
        .collect();
    c.bench_function("find_duplicates 10k, threshold 4", |b| {
        b.iter(|| find_duplicates(black_box(&items), 4).unwrap())
    });
}

criterion_group!(benches, matmul, interaction, meta_step, hashing);
criterion_main!(benches);
