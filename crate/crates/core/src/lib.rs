//! Simulation and bounds for the `K`-user MISO broadcast channel when the
//! transmitter has perfect channel knowledge of each user only a fraction
//! `lambda` of the time.
//!
//! * [`channel`]: Rayleigh channel draws, seeded streams, small complex
//!   linear algebra.
//! * [`schedule`]: CSIT availability grids, including the rotating window
//!   that needs only `min(M,K)/K` perfect CSIT per user.
//! * [`precoding`]: user selection, zero-forcing beams, per-slot SINR.
//! * [`simulator`]: Monte Carlo rates over an SNR grid and the fitted
//!   sum-DoF slope.
//! * [`bounds`]: the outer-bound polytope, exact weighted maxima and the
//!   threshold `lambda*(M, K)`.
//! * [`harness`]: experiment configs, runs, lambda sweeps and report files.

pub mod bounds;
pub mod channel;
mod error;
pub mod harness;
pub mod precoding;
pub mod schedule;
pub mod simulator;

pub use bounds::{
    build_polytope, lambda_star, lambda_star_via_lp, max_weighted, summed_bound, BoundOptions,
    BoundReport, DofPolytope, Inequality,
};
pub use channel::{
    condition_number, invert, sample_channel, sample_noise, ChannelRealization, ComplexMatrix,
    RngStream,
};
pub use error::{Error, Result};
pub use harness::{
    run, sweep_lambda, ExperimentConfig, RunOutput, RunReport, ScheduleKind, SweepResult, SweepRow,
};
pub use precoding::{
    plan_slot, select_served, slot_sinr, zf_beamformer, PlanKind, PrecodingPlan, SlotSinr,
};
pub use schedule::{CsitSchedule, CsitState, FractionAudit};
pub use simulator::{fit_slope, simulate, SimConfig, SimReport, SnrGrid, SnrPoint};
