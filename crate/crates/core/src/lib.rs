//! Flexible functional split (FFS) model for mixed eMBB/URLLC traffic.
//!
//! The crate is organised bottom-up:
//!
//! * [`quad`] adaptive Gauss-Kronrod quadrature used by every closed form.
//! * [`geometry`] PPP topologies, PLD-based CoMP clustering and mode allocation ratios.
//! * [`radio`] SINR, interference Laplace functionals, coverage and ergodic rate.
//! * [`queueing`] processor-sharing / FCFS sojourn times, delay budget and reliability.
//! * [`optimizer`] the CFSMA threshold search over operable and reliable sets.
//! * [`montecarlo`] simulation oracles (topology Monte Carlo, discrete-event queues)
//!   and the figure-style parameter sweeps.

pub mod error;
pub mod geometry;
pub mod model;
pub mod montecarlo;
pub mod optimizer;
pub mod quad;
pub mod queueing;
pub mod radio;
pub mod rng;
pub mod units;

pub use error::{Error, Result};
pub use model::{Mode, NetworkModel, ServiceKind};
