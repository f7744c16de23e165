#![allow(
    clippy::needless_range_loop,
    clippy::neg_cmp_op_on_partial_ord,
    clippy::suspicious_arithmetic_impl
)]

pub mod algebroid;
pub mod connection;
pub mod distribution;
pub mod dual;
pub mod dynamics;
pub mod fields;
pub mod io;
pub mod linalg;
pub mod presets;
pub mod sampling;
