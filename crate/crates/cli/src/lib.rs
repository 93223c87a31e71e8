//! Command-line frontend and HTTP service for a vulntrack store.

pub mod api;
pub mod cli;
pub mod views;
