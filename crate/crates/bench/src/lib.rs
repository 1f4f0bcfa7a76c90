//! Criterion benchmarks for the core kernels live in `benches/kernels.rs`:
//! field arithmetic, series products and inverses, model enumeration, and
//! the stratum formulas. Run with `cargo bench -p kisin-bench`.
