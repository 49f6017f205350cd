//! Benchmark-only crate; see `benches/explainers.rs`.
