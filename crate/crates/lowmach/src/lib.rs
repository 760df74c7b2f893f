//! Pseudo-spectral laboratory for the acoustic singular limit of slightly
//! compressible flow on the periodic box.

pub mod acoustic;
pub mod besov;
pub mod calib;
pub mod datagen;
pub mod error;
pub mod estimates;
pub mod evolution;
pub mod fit;
pub mod fft;
pub mod field;
pub mod grid;
pub mod limits;
pub mod measure;
pub mod multiplier;
pub mod etd;
pub mod linalg;
pub mod oracle;
pub mod paley;
pub mod params;
pub mod stationary;
