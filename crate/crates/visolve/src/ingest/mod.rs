//! Dataset and image readers, plus the dataset downloader.

pub mod fetch;
pub mod libsvm;
pub mod pgm;

pub use libsvm::{load_libsvm, parse_libsvm, parse_libsvm_str, LibsvmOptions};
pub use pgm::{load_pgm, read_pgm, save_pgm, write_pgm, PgmEncoding};
