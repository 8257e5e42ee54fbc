//! Criterion benchmarks for the control loop; see `benches/`.
