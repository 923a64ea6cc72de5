//! Worst-case search for analog circuit verification: surrogate-guided
//! exploration of the operating-condition space.
//!
//! The pipeline samples an initial design of experiments, fits one Gaussian
//! process per response, then iteratively refines and simulates the
//! candidates most likely to violate a specification, reporting worst cases
//! and violations per seed.

pub mod acquisition;
pub mod circuit;
pub mod hyperspace;
pub mod planner;
pub mod report;
pub mod sampling;
pub mod surrogate;
