use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use covsev_core::cnn::{conv2d, ConvWeights, Tensor3};
use covsev_core::imaging::{clahe, median_filter, resize_bilinear, ClaheParams, GrayImage};
use covsev_core::svm::{smo_solve, FeatureMatrix, SmoParams};

fn image(rng: &mut ChaCha8Rng, side: usize) -> GrayImage {
    // Smooth gradient plus noise, closer to a CT slice than white noise.
    GrayImage::from_fn(side, side, |y, x| ((y + x) / 3 + rng.gen_range(0..40)).min(255) as u8).unwrap()
}

fn imaging(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let img = image(&mut rng, 224);
    let mut g = c.benchmark_group("imaging");
    g.throughput(Throughput::Elements(224 * 224));
    g.bench_function("clahe_224_8x8", |b| b.iter(|| clahe(&img, &ClaheParams::default()).unwrap()));
    for radius in [1, 3] {
        g.bench_with_input(BenchmarkId::new("median_224", radius), &radius, |b, &r| {
            b.iter(|| median_filter(&img, r).unwrap())
        });
    }
    let big = image(&mut rng, 512);
    g.bench_function("resize_512_to_224", |b| b.iter(|| resize_bilinear(&big, 224, 224).unwrap()));
    g.finish();
}

fn convolution(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut g = c.benchmark_group("conv2d");
    g.sample_size(10);
    // (in, out, side): shapes from the first, third and fifth VGG blocks.
    for (in_c, out_c, side) in [(3, 64, 224), (128, 256, 56), (512, 512, 14)] {
        let input = Tensor3::new(
            in_c,
            side,
            side,
            (0..in_c * side * side).map(|_| rng.gen_range(-1.0f32..1.0)).collect(),
        )
        .unwrap();
        let weights = ConvWeights::new(
            out_c,
            in_c,
            (0..out_c * in_c * 9).map(|_| rng.gen_range(-0.1f32..0.1)).collect(),
            vec![0.0; out_c],
        )
        .unwrap();
        g.throughput(Throughput::Elements((2 * out_c * in_c * 9 * side * side) as u64));
        g.bench_function(format!("{in_c}x{side}x{side}_to_{out_c}"), |b| {
            b.iter(|| conv2d(&input, &weights).unwrap())
        });
    }
    g.finish();
}

fn smo(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut g = c.benchmark_group("smo");
    g.sample_size(10);
    for (n, dim) in [(200, 64), (500, 256)] {
        // Two overlapping Gaussian-ish clouds so some multipliers sit at C.
        let mut rows = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let label = if i % 2 == 0 { 1.0 } else { -1.0 };
            let row: Vec<f32> = (0..dim)
                .map(|d| rng.gen_range(-1.0f32..1.0) + if d < 4 { 0.6 * label as f32 } else { 0.0 })
                .collect();
            rows.push(row);
            y.push(label);
        }
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        g.bench_function(format!("linear_{n}x{dim}"), |b| {
            b.iter(|| smo_solve(&x, &y, &SmoParams::default()).unwrap())
        });
    }
    g.finish();
}

criterion_group!(kernels, imaging, convolution, smo);
criterion_main!(kernels);
