//! Benchmark-only crate. The measurements live in `benches/bench_main.rs`;
//! run them with `cargo bench -p aoi-bench`.
