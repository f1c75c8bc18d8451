//! Steady-state thermal modelling of a passively cooled instrument behind
//! conical radiation shields: scene geometry, Monte Carlo view factors,
//! lumped thermal networks, a Newton solver, parameter studies and
//! black-body decoherence of a levitated nanosphere.
//!
//! The network, solver and decoherence code is generic over [`num::Real`];
//! the aliases below fix it to `f64`.

pub mod decoherence;
pub mod geometry;
pub mod network;
pub mod num;
pub mod provenance;
pub mod solver;
pub mod studies;
pub mod viewfactor;

pub type Network = network::ThermalNetwork<f64>;
pub type Conductor = network::Conductor<f64>;
pub type Node = network::Node<f64>;
pub type Material = network::MaterialTable<f64>;
pub type Solution = solver::SolveResult<f64>;
pub type Rates = decoherence::Rates<f64>;
pub type Visibility = decoherence::VisibilityResult<f64>;
