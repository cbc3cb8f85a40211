//! Commitment games with conditional information disclosure.
//!
//! The crate covers finite Bayesian games and correlated policies, LP-based checks of
//! feasibility, interim individual rationality, incentive compatibility and efficiency,
//! the voluntary-disclosure (unraveling) benchmark, commitment devices with
//! fingerprint-conditioned disclosure, a recursive program engine with the
//! ε-grounded SIRBot, and the canonical war, auction and mountain examples.

pub mod canonical;
pub mod devices;
pub mod engine;
pub mod disclosure;
pub mod game;
pub mod lp;
pub mod signal;
pub mod solvers;
