//! Gated processor-sharing queue: an exact event-driven simulator with
//! measure-valued state, a closed-form evaluator for its periodic fluid
//! model, and a harness that checks fluid-scale convergence of the former
//! to the latter.

pub mod measure;
pub mod primitives;
pub mod sim;
pub mod fluid;
pub mod harness;
pub mod export;
