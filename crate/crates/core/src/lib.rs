//! Identity personalization for text-to-image diffusion through a basis of
//! celebrity-name embeddings.
//!
//! Pipeline: [`dictionary`] composes name embeddings into two sets,
//! [`basis`] fits a PCA basis per set, [`mapper`] maps a face feature to
//! coefficients in that basis, [`trainer`] fits the mapper against a frozen
//! denoiser, and [`eval`] generates and scores images. [`backends`] holds the
//! adapter contracts and the synthetic implementations.

pub mod backends;
pub mod basis;
pub mod dictionary;
pub mod error;
pub mod eval;
pub mod hash;
pub mod image;
pub mod io;
pub mod mapper;
pub mod trainer;

pub use error::{Error, ErrorKind, Result};
