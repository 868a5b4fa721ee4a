//! Collaborative-representation RBMs stacked into a deep feature extractor,
//! with clustering evaluation and a Friedman aligned-ranks comparison.

pub mod cli;
pub mod clustering;
pub mod crrbm;
pub mod dataio;
pub mod lsh;
pub mod metrics;
pub mod network;
pub mod seed;
