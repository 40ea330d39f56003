//! Uplink resource allocation for two-tier heterogeneous cellular networks:
//! one macro BS, several femto BSs, users that may attach to more than one
//! BS on different sub-channels.
//!
//! The proposed scheme ([`solve`]) alternates per-user water-filling power
//! control with greedy sub-channel pruning until every `(BS, sub-channel)`
//! serves at most one user. [`max_sinr_baseline`] is the single-BS,
//! equal-power reference. [`run_campaign`] and [`sweep`] drive seeded Monte
//! Carlo experiments over random drops.

pub mod assignment;
pub mod baseline;
pub mod campaign;
pub mod channel;
pub mod config;
pub mod error;
pub mod metrics;
pub mod power;
pub mod tensor;

pub use assignment::{
    delta_for_removal, prune_subchannel, solve, AllocationResult, AssociationTensor,
    FairnessConflict, RemovalCandidate, SolveOptions,
};
pub use baseline::max_sinr_baseline;
pub use campaign::{
    drop_seeds, run_campaign, run_campaign_with, run_drop, sweep, CampaignOutput, DropSummary,
    SweepOutput, SweepParameter, SweepRow, SCHEMA_VERSION,
};
pub use channel::{
    dbm_to_watts, generate_channel_tensor, generate_channel_tensor_with, generate_topology,
    path_loss_db, sinr, ChannelParams, ChannelTensor, Fading, InterferenceModel, NetworkTopology,
    Point, Tier,
    MACRO_BS,
};
pub use config::{Algorithm, FemtoLayout, Placement, SimConfig};
pub use error::{Error, Result};
pub use metrics::{aggregate, empirical_cdf, mean_stderr, sum_rate, user_rate, user_rates, RateReport};
pub use power::{
    effective_noise, update_powers, water_fill, ConvergenceTrace, EffectiveNoiseVector, EntryId,
    PowerTensor, StageRecord, WaterFill,
};
pub use tensor::{Dims, Tensor3};
