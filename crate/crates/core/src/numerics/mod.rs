//! Numerical building blocks: quadrature, root finding, ODE integration and
//! monotone interpolation.

pub mod interp;
pub mod ode;
pub mod quad;
pub mod roots;

pub use interp::MonotoneCubic;
pub use ode::{OdeOptions, OdeSolution};
pub use quad::QuadOptions;
pub use roots::RootOptions;
