//! Files, reports, the `causeway` command line and the HTTP service on top of
//! [`causeway_core`].

pub mod analysis;
pub mod assets;
pub mod cli;
pub mod dagfile;
pub mod report;
pub mod server;
pub mod study;
pub mod table;
pub mod workspace;

pub use causeway_core as core;
