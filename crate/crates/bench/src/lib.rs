//! Criterion benchmarks for the model checker, the encoding and the
//! synthesis loop live under `benches/`; run them with `cargo bench -p pmdp-bench`.
