//! Range analysis of ReLU networks with tropical polyhedra.

pub mod cli;
pub mod dbm;
pub mod error;
pub mod hyperbox;
pub mod io;
pub mod layer_abs;
pub mod maxplus;
pub mod network;
pub mod spec_check;
pub mod subdivision;
pub mod tropical;

pub use error::{Error, Result};
