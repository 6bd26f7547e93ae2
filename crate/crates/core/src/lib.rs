//! Portrait-matting mathematics toolkit: compositing, masked losses,
//! binary morphology, matte quality metrics, dataset synthesis, and
//! network shape validation.

pub mod archspec;
pub mod cli;
pub mod compose;
pub mod imagecore;
pub mod losses;
pub mod metrics;
pub mod morphology;
pub mod pipeline;
