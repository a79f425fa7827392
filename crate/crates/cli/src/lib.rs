pub mod commands;
pub mod expr;
pub mod output;
pub mod sysfile;
