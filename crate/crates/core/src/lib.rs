//! Multiproposal Markov chain Monte Carlo.
//!
//! Every sampler here builds a cloud of `p` proposals around the current
//! state and selects the next state from the `p + 1` candidates with an
//! acceptance vector. Builds on a shared kernel ([`kernel`]) with
//! deterministic per-slot random streams ([`rng`]) so that results do not
//! depend on the number of worker threads.

pub mod diagnostics;
pub mod error;
pub mod hmc;
pub mod kernel;
pub mod mpcn;
pub mod parallel;
pub mod rng;
pub mod runner;
pub mod rw;
pub mod simplicial;
pub mod targets;

pub use error::{Error, Result};
pub use kernel::{
    barker_weights, categorical_draw, drive, mh_wedge_weights, run_chain, run_resampling_chain,
    AcceptanceVector, ChainRecord, ChainRun, MultiproposalSampler, ProposalCloud, ResamplingState,
    RunOptions, State, WeightMode,
};
pub use parallel::Executor;
pub use rng::{ChainKey, IterationStreams, Lane};
