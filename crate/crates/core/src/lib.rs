pub mod certify;
pub mod chain_core;
pub mod entropy_opt;
pub mod error;
pub mod factorization;
pub mod functionals;
pub mod gallery;
pub mod io;
pub mod optim;
pub mod spectral;
pub mod transport;
