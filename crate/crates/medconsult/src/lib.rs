//! File formats, persistence, HTTP service and command-line tooling around
//! the `medconsult-core` consultation engine.

pub mod bench;
pub mod chat;
pub mod config;
pub mod gen_graph;
pub mod generator;
pub mod loader;
pub mod service;
pub mod session;

pub use medconsult_core as core;
