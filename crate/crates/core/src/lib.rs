//! Quantum-assisted robustness of magic: stabilizer simulation, magic-state
//! catalogs, ℓ1-minimal quasiprobability decompositions, sampling-based error
//! mitigation and overhead calculators.

pub mod catalog;
pub mod circuit;
pub mod config;
pub mod dense;
pub mod error;
pub mod io;
pub mod lp;
pub mod overhead;
pub mod mitigation;
pub mod pauli;
pub mod qrom;
pub mod sim;
pub mod states;
pub mod tableau;
pub mod verify;

pub use catalog::{block_decomposition, state_entry, BlockDecomposition, CatalogId, ChannelDecomposition};
pub use circuit::{gadgetize, random_circuit, Circuit, CliffordGate, Op, RecordId};
pub use dense::{Channel, DensityMatrix, Operator, StateVector, DENSE_QUBIT_CAP};
pub use config::Config;
pub use error::{Error, Result};
pub use mitigation::{EstimatorResult, MitigationPlan, Sampling};
pub use pauli::{Pauli, PauliOperator, Phase};
pub use qrom::{qrom, QromResult, QuasiDecomposition};
pub use sim::Backend;
pub use states::{tau, tau_delta, NoiseModel, PauliVector, PreparableState, Preparation, DELTA_TH};
pub use tableau::StabilizerTableau;
