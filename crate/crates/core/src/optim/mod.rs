//! Pulse optimization: a genetic algorithm over spectrally parameterized
//! fields ([`ga`]) and adjoint-gradient descent over unconstrained
//! piecewise-constant fields ([`gradient`]).

pub mod ga;
pub mod gradient;
