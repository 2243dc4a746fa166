//! Evolving feedforward classifiers with two algorithms.
//!
//! * [`epnet`] evolves architectures and weights together. Partial training
//!   with adaptive backpropagation ([`train`]) alternates with hidden-node
//!   deletion, connection deletion, connection addition and node splitting.
//! * [`nes`] keeps the architecture fixed and evolves the flattened weight
//!   vector with subpopulation crossover and a mutation step that decays to
//!   zero by the last generation.
//!
//! Both operate on [`network::Network`], a feedforward net in which every
//! node may read from any earlier node. [`dataset`] loads UCI-style CSV
//! files, [`experiment`] runs seeded repetitions and [`report`] writes the
//! results.
//!
//! ```
//! use evonet::network::{random_network, BiasInit, RandomNetworkParams};
//! use rand::SeedableRng;
//!
//! let params = RandomNetworkParams {
//!     inputs: 3,
//!     outputs: 2,
//!     max_hidden: 4,
//!     hidden_range: (1, 3),
//!     density: 1.0,
//!     weight_range: (-0.5, 0.5),
//!     bias_init: BiasInit::Constant(-1.5),
//! };
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
//! let net = random_network(&params, &mut rng)?;
//! let y = net.forward(&[0.1, 0.5, 0.9])?;
//! assert_eq!(y.len(), 2);
//! # Ok::<(), evonet::error::Error>(())
//! ```
//!
//! The guide in `book/` walks through each part; its code samples are
//! compiled and run as doctests of this crate.

pub mod dataset;
pub mod epnet;
pub mod error;
pub mod experiment;
pub mod history;
pub mod nes;
pub mod network;
pub mod report;
pub mod train;
pub mod verify;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/encoding.md")]
    mod encoding {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/epnet.md")]
    mod epnet {}
    #[doc = include_str!("../../../book/src/nes.md")]
    mod nes {}
    #[doc = include_str!("../../../book/src/datasets.md")]
    mod datasets {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
