pub mod hermite;
pub mod ode;
pub mod quad;
