//! Hybrid daily stock-price forecasting: ARIMA(2,1,0) preprocessing, an
//! attention/convolution encoder with a stacked bidirectional LSTM decoder
//! trained by a small reverse-mode autodiff engine, and gradient-boosted
//! regression trees fitted on the decoder's features.

pub mod arima;
pub mod autodiff;
pub mod gbt;
pub mod io;
mod linalg;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod stats;
pub mod ts;
