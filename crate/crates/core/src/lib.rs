//! Time-to-first-spike networks trained with event-based backpropagation and
//! periodic feedback-weight transport.

pub mod backprop;
pub mod conv;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod init;
pub mod loss;
pub mod network;
pub mod neuron;
pub mod metrics;
pub mod optim;
pub mod trainer;
pub mod transport;

pub use error::{Error, Result};
pub use network::{LayerSpec, Network, NetworkConfig};
pub use transport::{DualParams, TransportLedger, TransportStrategy, Transporter};
