//! Command-line front end and HTTP service for mapper graph matrices.

pub mod cli;
pub mod service;
