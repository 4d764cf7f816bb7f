pub mod label;
pub mod localize;
pub mod plan;
pub mod report;
pub mod rewrite;
pub mod selftest;
pub mod simulate;
