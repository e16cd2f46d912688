//! Benchmarks for the repricing engine live in `benches/`.
