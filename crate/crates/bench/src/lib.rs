//! Benchmarks for gaplab-core kernels; see `benches/`.
