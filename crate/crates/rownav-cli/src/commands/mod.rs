pub mod annotate;
pub mod evaluate;
pub mod simulate;
pub mod sweep;
