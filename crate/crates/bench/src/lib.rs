//! Benchmark-only crate; see `benches/receivers.rs`.
