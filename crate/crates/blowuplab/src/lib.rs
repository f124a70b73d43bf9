//! Numerical laboratory for the self-similar blow-up family of the wave equation
//! `u_tt - u_xx = (u_x)^2` and the stability of its members.

pub mod cli;
pub mod evolve;
pub mod linop;
pub mod modes;
pub mod profiles;
pub mod quad;
pub mod specfun;
pub mod verify;
