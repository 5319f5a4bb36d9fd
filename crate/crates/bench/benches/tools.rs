use criterion::{black_box, criterion_group, criterion_main, Criterion};
use tsad_core::icl::{default_band, dtw, lb_keogh};
use tsad_core::inject::noise_vector;
use tsad_core::tools::{
    change_points, decompose, detect_outliers, fft_spectrum, gaf, recurrence, rolling_statistics, sax, slope_change, statistics, wavelet_energy,
    z_normalize, DEFAULT_WINDOWS,
};

fn window(seed: u64) -> Vec<f64> {
    let noise = noise_vector(seed, 400, 0.2);
    (0..400).map(|i| (i as f64 * std::f64::consts::TAU / 32.0).sin() + noise[i]).collect()
}

fn tools(c: &mut Criterion) {
    let x = window(1);
    c.bench_function("statistics", |b| b.iter(|| statistics(black_box(&x))));
    c.bench_function("detect_outliers", |b| b.iter(|| detect_outliers(black_box(&x))));
    c.bench_function("rolling_statistics", |b| b.iter(|| rolling_statistics(black_box(&x), &DEFAULT_WINDOWS)));
    c.bench_function("change_points", |b| b.iter(|| change_points(black_box(&x))));
    c.bench_function("slope_change", |b| b.iter(|| slope_change(black_box(&x))));
    c.bench_function("fft_spectrum", |b| b.iter(|| fft_spectrum(black_box(&x))));
    c.bench_function("decompose", |b| b.iter(|| decompose(black_box(&x), None)));
    c.bench_function("wavelet_energy", |b| b.iter(|| wavelet_energy(black_box(&x))));
    c.bench_function("sax", |b| b.iter(|| sax(black_box(&x), 40, 10)));
    c.bench_function("gaf", |b| b.iter(|| gaf(black_box(&x))));
    c.bench_function("recurrence", |b| b.iter(|| recurrence(black_box(&x), 0.1)));
}

fn distances(c: &mut Criterion) {
    let (a, q) = (z_normalize(&window(2)), z_normalize(&window(3)));
    let band = default_band(a.len());
    c.bench_function("dtw_400", |b| b.iter(|| dtw(black_box(&a), black_box(&q), band)));
    c.bench_function("lb_keogh_400", |b| b.iter(|| lb_keogh(black_box(&q), black_box(&a), band)));
}

criterion_group!(benches, tools, distances);
criterion_main!(benches);
