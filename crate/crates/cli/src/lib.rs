//! Table I/O, pairwise screening and the `hyperco` command line.

pub mod cli;
pub mod screen;
pub mod table;

pub use cli::cli_main;
