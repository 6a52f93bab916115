//! Criterion benchmarks for the channel-arena engine live in `benches/`.
