pub mod aggregate;
pub mod challenge;
pub mod coverage;
pub mod logserve;
pub mod simulate;
