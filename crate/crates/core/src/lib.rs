//! Parameter synthesis for affine parametric Markov decision processes.
//!
//! Given a pMDP whose transition probabilities are affine in a set of
//! parameters and a reachability or expected-cost threshold, find a
//! graph-preserving parameter valuation for which the instantiated MDP meets
//! the threshold under every strategy.
//!
//! The synthesis problem is a nonconvex QCQP. [`ccp`] solves it with a penalty
//! convex-concave procedure: each iteration linearizes the concave part of a
//! difference-of-convex split around the current anchor ([`encode`]), solves
//! the convex program with an interior-point method ([`qp`]), and model checks
//! the candidate ([`mc`]) both to stop early and to re-anchor the probability
//! variables. [`pso`] is a sampling baseline over the parameter box.

pub mod ccp;
pub mod encode;
pub mod fixtures;
pub mod gen;
pub mod graph;
mod linalg;
pub mod mc;
pub mod model;
pub mod parser;
pub mod pso;
pub mod qp;

pub use ccp::{synthesize, CcpConfig, SynthesisResult, SynthesisStatus};
pub use model::{
    AffineExpr, Direction, Instantiation, ParamId, Pmdp, Rational, SpecKind, Specification, StateId,
};
pub use parser::{parse_model, parse_spec};
