pub mod das21;
pub mod dataset;
pub mod explain;
pub mod fluoro;
pub mod metrics;
pub mod models;
pub mod pipeline;
pub mod splits;
pub mod stats;
pub mod wavelet;
