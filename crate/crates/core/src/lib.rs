pub mod cfg;
pub mod corpus;
pub mod frontend;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod scanner;

pub use corpus::Label;
