pub mod algorithms;
pub mod figures;
pub mod plan;
