#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anisotropy;
pub mod campaign;
pub mod coorbit;
pub mod error;
pub mod fft;
pub mod fit;
pub mod grid;
pub mod group;
pub mod par;
pub mod linalg;
pub mod maximal;
pub mod norms;
pub mod sampling;
pub mod signal;
pub mod spectra;
pub mod transform;

pub use anisotropy::{Dilation, ExpansiveMatrix};
pub use error::{Error, Result};
