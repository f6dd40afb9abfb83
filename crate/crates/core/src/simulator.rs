//! Monte Carlo link-level simulation over an SNR grid.
//!
//! Each `(snr point, trial)` pair is an independent work unit with its own
//! [`RngStream`]. A unit runs the whole schedule once with a fresh channel
//! per slot and accumulates per-user `log2(1 + sinr)`. Units are reduced in
//! index order, so serial and parallel runs give bit-identical reports.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_channel, RngStream};
use crate::error::{Error, Result};
use crate::precoding::{plan_slot, slot_sinr};
use crate::schedule::{CsitSchedule, CsitState, FractionAudit};

/// Channel redraws allowed for one slot before giving up.
const MAX_RESAMPLES: usize = 1000;

/// Transmit powers at unit noise variance, strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrGrid {
    snr_db: Vec<f64>,
    points: Vec<f64>,
}

impl SnrGrid {
    pub fn from_db(snr_db: &[f64]) -> Result<Self> {
        let points = snr_db.iter().map(|db| 10f64.powf(db / 10.0)).collect();
        Self::validated(snr_db.to_vec(), points)
    }

    pub fn from_linear(points: &[f64]) -> Result<Self> {
        let snr_db = points.iter().map(|p| 10.0 * p.log10()).collect();
        Self::validated(snr_db, points.to_vec())
    }

    fn validated(snr_db: Vec<f64>, points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::DegenerateGrid(format!(
                "{} SNR point(s), need at least 2",
                points.len()
            )));
        }
        if points.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::DegenerateGrid(
                "SNR values must be finite and positive".into(),
            ));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::DegenerateGrid(
                "SNR grid must be strictly increasing".into(),
            ));
        }
        Ok(Self { snr_db, points })
    }

    /// 30, 40, 50, 60 dB.
    pub fn default_high_snr() -> Self {
        Self::from_db(&[30.0, 40.0, 50.0, 60.0]).unwrap()
    }

    pub fn snr_db(&self) -> &[f64] {
        &self.snr_db
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub antennas: usize,
    pub grid: SnrGrid,
    pub trials: usize,
    pub seed: u64,
    /// Cap used for the schedule audit echoed in the report.
    pub lambda_cap: f64,
    /// Evaluate work units on the rayon pool. Does not change results.
    pub parallel: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrPoint {
    pub snr_db: f64,
    pub power: f64,
    /// Average bits per slot for each user.
    pub rates: Vec<f64>,
    pub sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub antennas: usize,
    pub users: usize,
    pub slots: usize,
    pub trials: usize,
    pub seed: u64,
    pub snr_db: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub per_snr: Vec<SnrPoint>,
    /// OLS slope of sum rate against `log2(P)`.
    pub dof_slope: f64,
    pub slope_stderr: f64,
    pub per_user_slopes: Vec<f64>,
    /// Average number of simultaneously served users per slot.
    pub mean_streams: f64,
    pub schedule_audit: FractionAudit,
    pub config_echo: ConfigEcho,
}

/// Totals of one work unit.
struct UnitTotals {
    rates: Vec<f64>,
    streams: usize,
}

/// Runs `schedule` at every grid point for `trials` independent trials.
pub fn simulate(schedule: &CsitSchedule, config: &SimConfig) -> Result<SimReport> {
    if config.antennas == 0 {
        return Err(Error::Config("antenna count must be positive".into()));
    }
    if config.trials == 0 {
        return Err(Error::Config("trial count must be positive".into()));
    }
    let users = schedule.users();
    let slots = schedule.slots();
    let columns: Vec<Vec<CsitState>> = (0..slots).map(|t| schedule.column(t)).collect();
    let grid = &config.grid;
    let trials = config.trials;

    let unit = |idx: usize| -> Result<UnitTotals> {
        let (snr_idx, trial) = (idx / trials, idx % trials);
        let mut rng = RngStream::new(config.seed, idx as u64);
        run_unit(
            &mut rng,
            &columns,
            users,
            config.antennas,
            grid.points()[snr_idx],
            trial,
        )
    };
    let n_units = grid.len() * trials;
    let totals: Vec<UnitTotals> = if config.parallel {
        (0..n_units)
            .into_par_iter()
            .map(unit)
            .collect::<Result<_>>()?
    } else {
        (0..n_units).map(unit).collect::<Result<_>>()?
    };

    let denom = (slots * trials) as f64;
    let mut per_snr = Vec::with_capacity(grid.len());
    let mut streams = 0usize;
    for (snr_idx, chunk) in totals.chunks(trials).enumerate() {
        let mut rates = vec![0.0; users];
        for t in chunk {
            for (acc, r) in rates.iter_mut().zip(&t.rates) {
                *acc += r;
            }
            streams += t.streams;
        }
        rates.iter_mut().for_each(|r| *r /= denom);
        let sum = rates.iter().sum();
        per_snr.push(SnrPoint {
            snr_db: grid.snr_db()[snr_idx],
            power: grid.points()[snr_idx],
            rates,
            sum,
        });
    }

    let log_p: Vec<f64> = grid.points().iter().map(|p| p.log2()).collect();
    let sum_points: Vec<(f64, f64)> = log_p
        .iter()
        .zip(&per_snr)
        .map(|(&x, p)| (x, p.sum))
        .collect();
    let (dof_slope, slope_stderr) = fit_slope(&sum_points)?;
    let per_user_slopes = (0..users)
        .map(|k| {
            let pts: Vec<(f64, f64)> = log_p
                .iter()
                .zip(&per_snr)
                .map(|(&x, p)| (x, p.rates[k]))
                .collect();
            fit_slope(&pts).map(|(s, _)| s)
        })
        .collect::<Result<_>>()?;

    Ok(SimReport {
        per_snr,
        dof_slope,
        slope_stderr,
        per_user_slopes,
        mean_streams: streams as f64 / (denom * grid.len() as f64),
        schedule_audit: schedule.audit(config.lambda_cap),
        config_echo: ConfigEcho {
            antennas: config.antennas,
            users,
            slots,
            trials,
            seed: config.seed,
            snr_db: grid.snr_db().to_vec(),
        },
    })
}

fn run_unit(
    rng: &mut RngStream,
    columns: &[Vec<CsitState>],
    users: usize,
    antennas: usize,
    power: f64,
    trial: usize,
) -> Result<UnitTotals> {
    let mut rates = vec![0.0; users];
    let mut streams = 0;
    for (t, states) in columns.iter().enumerate() {
        // Round-robin over the fallback user follows the slot index, offset
        // by trial so short schedules still rotate across trials.
        let rr = t + trial * columns.len();
        let mut attempt = 0;
        let (h, plan) = loop {
            let h = sample_channel(rng, users, antennas, t);
            match plan_slot(&h, states, rr, power) {
                Ok(plan) => break (h, plan),
                Err(Error::Singular { .. }) if attempt < MAX_RESAMPLES => attempt += 1,
                Err(e) => return Err(e),
            }
        };
        streams += plan.streams();
        for (k, sinr) in slot_sinr(&h, &plan).per_user {
            rates[k] += (1.0 + sinr).log2();
        }
    }
    Ok(UnitTotals { rates, streams })
}

/// Ordinary least squares fit of `y = a + b x`; returns `(b, stderr(b))`.
///
/// With exactly two points the residual has no degrees of freedom and the
/// reported standard error is zero.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    let n = points.len();
    if n < 2 {
        return Err(Error::DegenerateGrid(format!(
            "{n} point(s), need at least 2"
        )));
    }
    let nf = n as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateGrid("abscissae are not distinct".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let stderr = if n > 2 {
        let ssr: f64 = points
            .iter()
            .map(|p| (p.1 - intercept - slope * p.0).powi(2))
            .sum();
        (ssr / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok((slope, stderr))
}
