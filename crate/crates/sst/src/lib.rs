//! Structural state translation toolkit.

pub mod autodiff;
pub mod config;
pub mod dgcg;
pub mod error;
pub mod fid;
pub mod io;
pub mod modal_id;
pub mod pipeline;
pub mod plot;
pub mod signal;
pub mod sim;
pub mod spectral;
pub mod training;
pub mod translation;

pub use error::{Result, SstError};
