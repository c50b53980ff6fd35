//! Study drivers and command-line front end for the tomographic SAR
//! reconstruction library.

pub mod commands;
pub mod error;
pub mod method;
pub mod resolution;
pub mod scene;
pub mod structure;
