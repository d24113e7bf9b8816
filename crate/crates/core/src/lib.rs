//! Three-class chest-CT classification: grayscale preprocessing, a VGG-16
//! convolutional feature extractor over imported weights, one-vs-rest SVMs
//! trained by sequential minimal optimization, and stratified
//! cross-validated evaluation.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod imaging;
pub mod cnn;
pub mod svm;
pub mod eval;
pub mod pipeline;
