//! Numerical laboratory for open queueing networks whose stations drain at
//! separated rates, and for the reflecting diffusions that approximate them.
//!
//! The crate has three layers:
//!
//! * model and calculus: [`network`] describes a generalized Jackson network
//!   (routing, external arrivals, unit-mean renewal primitives, a multi-scale
//!   capacity schedule), and [`limits`] turns such a description into the
//!   parameters of its diffusion limits (per-station drifts and variances,
//!   block Gaussian elimination of the reflection matrix, limit descriptors);
//! * simulation: [`gjn`] is an exact discrete-event simulator for the network
//!   itself, [`srbm`] drives Euler paths of reflecting Brownian motions
//!   through the [`skorokhod`] reflection engine;
//! * verification: [`stats`] holds the test statistics and [`verify`] the
//!   experiment harness that compares simulated pre-limit systems against the
//!   computed limits.
//!
//! All randomness flows through [`rng`], which fans a single master seed out
//! to independent per-replication ChaCha streams; every experiment is
//! reproducible bit-for-bit from its seed, independent of worker count.

pub mod gjn;
pub mod limits;
pub mod linalg;
pub mod network;
pub mod rng;
pub mod runner;
pub mod skorokhod;
pub mod srbm;
pub mod stats;
pub mod verify;
