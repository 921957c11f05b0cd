pub mod dataflow;
pub mod error;
pub mod history;
pub mod lstm;
pub mod metrics;
pub mod numerics;
pub mod pipeline;
pub mod sae;

pub use error::{Error, Result};
pub use history::TrainHistory;
