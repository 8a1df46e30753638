//! Criterion benchmarks for the model crate; see `benches/`.
