//! Criterion benchmarks for the planning and tracking pipeline; see `benches/`.
