//! Criterion benchmarks for hdm-core live in `benches/`.
