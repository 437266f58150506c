//! Forecasting the hourly gap between day-ahead and real-time electricity
//! prices with LASSO, epsilon-SVR, random forests and an LSTM.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod forest;
pub mod lasso;
pub mod learner;
pub mod lstm;
pub mod matrix;
pub mod pipeline;
pub mod svr;
pub mod tune;

pub use error::{Error, ErrorClass, Result};
pub use matrix::Matrix;
