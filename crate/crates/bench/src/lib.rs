//! Criterion benchmarks for the relnet hot paths live in `benches/`.
