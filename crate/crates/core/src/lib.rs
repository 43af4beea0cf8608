pub mod beam;
pub mod error;
pub mod fisher;
pub mod grid;
pub mod oracle;
pub mod single;
pub mod two_emitter;

pub use error::{Error, Result};
