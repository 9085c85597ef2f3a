//! Command-line orchestration for `pekar-core`: configuration, pipelines,
//! sweeps and persisted, schema-versioned reports.

pub mod commands;
pub mod config;
pub mod output;
pub mod report;
pub mod sweep;

/// Process exit statuses.
pub mod exit {
    pub const OK: u8 = 0;
    pub const USAGE: u8 = 1;
    pub const NOT_CONVERGED: u8 = 2;
    pub const INTERNAL: u8 = 3;
}
