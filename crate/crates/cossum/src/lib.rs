//! Recovery of sparse cosine sums from equidistant samples.

pub mod aaa;
pub mod bessel;
pub mod espira;
pub mod esprit;
pub mod model;
pub mod numerics;
pub mod oracle;
pub mod transforms;
