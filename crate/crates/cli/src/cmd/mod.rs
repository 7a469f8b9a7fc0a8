pub mod concentrate;
pub mod convolve;
pub mod groundstate;
pub mod reduce;
pub mod spectrum;
pub mod validate;
