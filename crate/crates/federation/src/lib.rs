//! In-process simulation of federated multi-view matrix factorization, in
//! plaintext (FedMVMF) and with encrypted uploads (PrivMVMF).

pub mod error;
pub mod noise;
pub mod privmvmf;
pub mod roles;
pub mod run;
pub mod trace;
pub mod transport;

pub use error::{FedError, Result};
pub use noise::{laplace, perturb_bundle, NoiseConfig};
pub use privmvmf::{
    aggregate_encrypted, leakage_report, membership_guess_rate, run_privmvmf, sample_unrated, sampled_scheme,
    DecrypterPool, EncryptedAggregate, EncryptedBundle, LeakageReport, PrivConfig, PrivRun, DEFAULT_CLIP_BOUND,
    DEFAULT_LEAKAGE_RATIO,
};
pub use roles::{client_round, item_server_round, server_round, ServerState, UpdateMode};
pub use run::{
    initial_model, run_fedmvmf, EpochRecord, ObservedRound, PhaseTimings, RoundObserver, RoundRecorder, RoundView,
    RunConfig, TrainedRun,
};
pub use trace::{write_phase_csv, write_trace_csv, TRACE_SCHEMA};
pub use transport::{InProcessQueue, Transport};
