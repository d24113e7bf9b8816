//! Benchmarks for the preprocessing, convolution and SVM kernels live in
//! `benches/`. This crate has no library surface of its own.
