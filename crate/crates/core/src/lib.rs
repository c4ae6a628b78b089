#![allow(clippy::needless_range_loop)]

pub mod algebra;
pub mod linalg;
pub mod scalar;
pub mod expr;
pub mod manifold;
pub mod field;
pub mod operator;
pub mod hierarchy;
pub mod dispersive;
pub mod integrate;
pub mod config;
pub mod cli;
