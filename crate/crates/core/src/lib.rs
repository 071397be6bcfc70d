pub mod ansatz;
pub mod circuits;
pub mod error;
pub mod fourierlog;
pub mod hamiltonians;
pub mod numkernel;
pub mod variational;

pub use error::{Error, Result};
