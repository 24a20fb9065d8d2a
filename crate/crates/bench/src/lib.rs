//! Criterion benchmarks of the evaluators; see `benches/evaluators.rs`.
