//! Criterion benchmarks for tsad-core; see `benches/`.
