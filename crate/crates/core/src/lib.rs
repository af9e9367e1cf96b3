pub mod bundle;
pub mod cli;
pub mod expr;
pub mod geometry;
pub mod killing;
pub mod oracle;
pub mod report;
pub mod sampling;
pub mod tensor;
