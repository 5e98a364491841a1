//! Exit-code classes: 0 success, 2 configuration, 3 i/o, 4 numeric failure,
//! 1 anything else.

use symtrain_core::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Shape(_) | Error::Domain(_) | Error::Kind(_) => EXIT_CONFIG,
        Error::Io(_) | Error::Ingest { .. } | Error::Serde(_) => EXIT_IO,
        Error::Numeric(_) | Error::NonConvergence { .. } => EXIT_NUMERIC,
        Error::State(_) => EXIT_OTHER,
    }
}
