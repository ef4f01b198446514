//! CVaR-VQE factorization of odd semiprimes.
//!
//! Encodes n = p * q as the diagonal Hamiltonian (nI - PQ)^2 over the free
//! factor bits, prepares hardware-efficient RY + entangler ansatz states on a
//! real-amplitude statevector simulator, scores them with CVaR over exact or
//! finite-shot cost distributions, and drives the angles with derivative-free
//! optimizers (COBYLA-style trust region or NFT). A benchmark harness
//! reproduces the success-rate, |p - q| regression, alpha/error and
//! cost-function studies with seeded, byte-reproducible output.

pub mod bench;
pub mod cvar;
pub mod error;
pub mod hamiltonian;
pub mod instance;
pub mod optimize;
pub mod simulator;
pub mod vqe;

pub use error::{Error, Result};
pub use hamiltonian::CostFunction;
pub use instance::FactoringInstance;
pub use optimize::{Method, OptimizerConfig};
pub use simulator::{AnsatzFamily, AnsatzSpec, InitialState, StateVector};
pub use vqe::{run_vqe, RunConfig, VqeRunRecord};
