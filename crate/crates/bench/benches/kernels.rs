use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sympos::linalg::expm;
use sympos::strata::quadruplet_canonical;
use sympos::{
    classify, diagnose, eigen_structure, random_symplectic, short_path_to, Complex64, DMatrix, Generator, PositivePath,
    Segment, SympMatrix,
};

fn generator4() -> Generator {
    Generator::from_row_slice(
        4,
        &[2.0, 0.3, 0.1, 0.0, 0.3, 1.0, 0.0, 0.2, 0.1, 0.0, 1.5, 0.4, 0.0, 0.2, 0.4, 0.8],
    )
    .unwrap()
}

fn kernels(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let sample: Vec<SympMatrix> = (0..16).map(|_| random_symplectic(&mut rng, 2, 0.8)).collect();

    let h = DMatrix::from_fn(4, 4, |i, j| ((i * 4 + j) as f64).sin());
    c.bench_function("expm 4x4", |b| b.iter(|| expm(black_box(&h))));

    c.bench_function("eigen_structure Sp(4)", |b| {
        b.iter(|| sample.iter().map(|a| eigen_structure(black_box(a), 1e-8).is_ok() as usize).sum::<usize>())
    });

    c.bench_function("classify Sp(4)", |b| {
        b.iter(|| sample.iter().map(|a| classify(black_box(a), 1e-8).is_ok() as usize).sum::<usize>())
    });

    let path = PositivePath::from_identity(2, vec![Segment::new(2.5, generator4())]).unwrap();
    let mut group = c.benchmark_group("paths");
    group.sample_size(10);
    group.bench_function("diagnose 512 samples", |b| b.iter(|| diagnose(black_box(&path), 512)));

    let target = SympMatrix::new(quadruplet_canonical(Complex64::new(1.3, 0.6))).unwrap();
    group.bench_function("short_path_to O_C", |b| b.iter(|| short_path_to(black_box(&target))));
    group.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
