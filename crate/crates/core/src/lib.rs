//! Joint estimation of unknown quantum states and of the measurement that
//! reads them out.
//!
//! The measurement is modelled as a classical Markov process on top of a
//! projective measurement onto orthogonal subspaces: the device reports
//! outcome `c` with probability `Q[k][c]` whenever the hidden projective
//! outcome is `k`. Known states (prepared from a reference state with a small
//! set of trusted unitaries) calibrate `Q`; the same unitaries applied to the
//! unknown states probe them. Both are estimated together by alternating
//! maximum likelihood.
//!
//! Module map:
//!
//! * [`qcore`] — small dense complex linear algebra and the quantum objects.
//! * [`iontrap`] — the two-ion fluorescence model and the experiment sampler.
//! * [`binning`] — training split and mutual-information coarse graining.
//! * [`estimator`] — pseudo-inverse initialisation and the alternating fit.
//! * [`bounds`] — expectation-value bounds over the set of ML states.
//! * [`uncertainty`] — parametric bootstrap, confidence intervals and the
//!   likelihood-ratio test.

pub mod binning;
pub mod bounds;
pub mod error;
pub mod estimator;
pub mod iontrap;
pub mod qcore;
pub mod rng;
pub mod uncertainty;

pub use error::{Error, Result};
