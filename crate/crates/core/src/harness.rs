//! Experiment configuration, single runs, lambda sweeps and report files.
//!
//! Reports are serialized canonically: fixed field order, no timestamps, and
//! nothing that depends on whether work ran in parallel. Identical configs
//! therefore produce byte-identical JSON.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{build_polytope, lambda_star, max_weighted, BoundOptions};
use crate::error::{Error, Result};
use crate::schedule::{CsitSchedule, CsitState, FractionAudit};
use crate::simulator::{simulate, SimConfig, SimReport, SnrGrid};

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "CSIT_DOF_SEED";

/// Slack allowed between an achieved slope and the capped outer bound.
pub const SLOPE_SLACK: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ScheduleKind {
    CyclicWindow,
    LeeHeath,
    AllP,
    AllN,
    File(PathBuf),
}

impl ScheduleKind {
    /// Materializes the schedule for `M` antennas, `K` users and `n` slots.
    /// File schedules carry their own length.
    pub fn build(&self, antennas: usize, users: usize, slots: usize) -> Result<CsitSchedule> {
        match self {
            ScheduleKind::CyclicWindow => CsitSchedule::cyclic_window(antennas, users, slots),
            ScheduleKind::LeeHeath => CsitSchedule::lee_heath_block(users, slots),
            ScheduleKind::AllP => uniform(users, slots, CsitState::P),
            ScheduleKind::AllN => uniform(users, slots, CsitState::N),
            ScheduleKind::File(path) => {
                let s = CsitSchedule::from_file(path)?;
                if s.users() != users {
                    return Err(Error::Config(format!(
                        "schedule file {} has {} users, config has K = {users}",
                        path.display(),
                        s.users()
                    )));
                }
                Ok(s)
            }
        }
    }
}

fn uniform(users: usize, slots: usize, state: CsitState) -> Result<CsitSchedule> {
    if slots == 0 || !slots.is_multiple_of(users) {
        return Err(Error::BadLength { n: slots, k: users });
    }
    CsitSchedule::uniform(users, slots, state)
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleKind::CyclicWindow => f.write_str("cyclic_window"),
            ScheduleKind::LeeHeath => f.write_str("lee_heath"),
            ScheduleKind::AllP => f.write_str("all_p"),
            ScheduleKind::AllN => f.write_str("all_n"),
            ScheduleKind::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "cyclic_window" => ScheduleKind::CyclicWindow,
            "lee_heath" => ScheduleKind::LeeHeath,
            "all_p" => ScheduleKind::AllP,
            "all_n" => ScheduleKind::AllN,
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => ScheduleKind::File(PathBuf::from(p)),
                _ => return Err(Error::Config(format!("unknown schedule {s:?}"))),
            },
        })
    }
}

impl TryFrom<String> for ScheduleKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ScheduleKind> for String {
    fn from(k: ScheduleKind) -> String {
        k.to_string()
    }
}

fn default_snr_db() -> Vec<f64> {
    vec![30.0, 40.0, 50.0, 60.0]
}

fn default_slots() -> usize {
    3000
}

fn default_trials() -> usize {
    10
}

fn default_output() -> PathBuf {
    PathBuf::from("report.json")
}

fn default_parallel() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "M")]
    pub antennas: usize,
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(default = "default_schedule")]
    pub schedule: ScheduleKind,
    /// Per-user perfect-CSIT cap. Defaults to the schedule's largest
    /// per-user fraction.
    #[serde(default)]
    pub lambda_cap: Option<f64>,
    #[serde(default = "default_snr_db")]
    pub snr_db: Vec<f64>,
    #[serde(default = "default_slots")]
    pub slots: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub bounds: BoundOptions,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Execution detail only; never part of the canonical report.
    #[serde(default = "default_parallel", skip_serializing)]
    pub parallel: bool,
}

fn default_schedule() -> ScheduleKind {
    ScheduleKind::CyclicWindow
}

impl ExperimentConfig {
    pub fn new(antennas: usize, users: usize) -> Self {
        Self {
            antennas,
            users,
            schedule: default_schedule(),
            lambda_cap: None,
            snr_db: default_snr_db(),
            slots: default_slots(),
            trials: default_trials(),
            seed: 0,
            bounds: BoundOptions::default(),
            output: default_output(),
            parallel: default_parallel(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Replaces the seed with `CSIT_DOF_SEED` when that variable is set.
    pub fn apply_seed_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not a u64")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.antennas == 0 || self.users == 0 {
            return Err(Error::Config("M and K must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be positive".into()));
        }
        if let Some(cap) = self.lambda_cap {
            if !(0.0..=1.0).contains(&cap) {
                return Err(Error::Config(format!("lambda_cap {cap} outside [0, 1]")));
            }
        }
        if !matches!(self.schedule, ScheduleKind::File(_))
            && (self.slots == 0 || !self.slots.is_multiple_of(self.users))
        {
            return Err(Error::Config(format!(
                "slots = {} must be a positive multiple of K = {}",
                self.slots, self.users
            )));
        }
        self.grid().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn grid(&self) -> Result<SnrGrid> {
        SnrGrid::from_db(&self.snr_db)
    }

    pub fn schedule(&self) -> Result<CsitSchedule> {
        self.schedule.build(self.antennas, self.users, self.slots)
    }

    /// Canonical JSON echo of the config.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn sim_config(&self, lambda_cap: f64) -> Result<SimConfig> {
        Ok(SimConfig {
            antennas: self.antennas,
            grid: self.grid()?,
            trials: self.trials,
            seed: self.seed,
            lambda_cap,
            parallel: self.parallel,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrRow {
    pub snr_db: f64,
    pub rates: Vec<f64>,
    pub sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSummary {
    pub raw: f64,
    pub capped: f64,
    pub lambda_star: f64,
}

/// The report file of a single run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub audit: FractionAudit,
    pub per_snr: Vec<SnrRow>,
    pub dof_slope: f64,
    pub slope_stderr: f64,
    pub bound: BoundSummary,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// `snr_db,rate_user1,...,rate_userK,sum_rate` rows.
    pub fn to_csv(&self) -> String {
        let users = self.per_snr.first().map_or(0, |p| p.rates.len());
        let mut out = String::from("snr_db");
        for k in 1..=users {
            out.push_str(&format!(",rate_user{k}"));
        }
        out.push_str(",sum_rate\n");
        for p in &self.per_snr {
            out.push_str(&p.snr_db.to_string());
            for r in &p.rates {
                out.push(',');
                out.push_str(&r.to_string());
            }
            out.push(',');
            out.push_str(&p.sum.to_string());
            out.push('\n');
        }
        out
    }
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: RunReport,
    pub sim: SimReport,
    pub bound: crate::bounds::BoundReport,
}

/// Audits the configured schedule, simulates it, and evaluates the outer
/// bound at the same `(M, K, lambda)`.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let schedule = config.schedule()?;
    let lambda = config
        .lambda_cap
        .unwrap_or_else(|| schedule.audit(1.0).max_fraction);
    let audit = schedule.audit(lambda).into_result()?;

    let sim = simulate(&schedule, &config.sim_config(lambda)?)?;
    let poly = build_polytope(config.antennas, config.users, lambda, config.bounds)?;
    let bound = max_weighted(&poly, &vec![1.0; config.users])?;

    let mut echoed = config.clone();
    echoed.lambda_cap = Some(lambda);
    let report = RunReport {
        config: echoed,
        audit,
        per_snr: sim
            .per_snr
            .iter()
            .map(|p| SnrRow {
                snr_db: p.snr_db,
                rates: p.rates.clone(),
                sum: p.sum,
            })
            .collect(),
        dof_slope: sim.dof_slope,
        slope_stderr: sim.slope_stderr,
        bound: BoundSummary {
            raw: bound.raw_max_sum,
            capped: bound.capped_max_sum,
            lambda_star: lambda_star(config.antennas, config.users),
        },
    };
    Ok(RunOutput { report, sim, bound })
}

/// Path of the CSV written next to a JSON report.
pub fn csv_path(json_path: &Path) -> PathBuf {
    json_path.with_extension("csv")
}

/// Writes the JSON report to `path` and the rate table next to it.
pub fn write_run(report: &RunReport, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, report.to_json())?;
    std::fs::write(csv_path(path), report.to_csv())?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub achieved_slope: Option<f64>,
    pub outer_bound_capped: f64,
    pub outer_bound_raw: f64,
    pub schedule_name: String,
    /// Window narrower than `min(M,K)`: achievable but not claimed optimal.
    pub heuristic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    #[serde(rename = "M")]
    pub antennas: usize,
    #[serde(rename = "K")]
    pub users: usize,
    pub lambda_star: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("sweep serializes");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "lambda,achieved_slope,outer_bound_capped,outer_bound_raw,schedule,heuristic\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.lambda,
                r.achieved_slope.map(|s| s.to_string()).unwrap_or_default(),
                r.outer_bound_capped,
                r.outer_bound_raw,
                r.schedule_name,
                r.heuristic
            ));
        }
        out
    }

    /// Rows where the achieved slope exceeds the capped bound by more than
    /// [`SLOPE_SLACK`].
    pub fn violations(&self) -> Vec<&SweepRow> {
        self.rows
            .iter()
            .filter(
                |r| matches!(r.achieved_slope, Some(s) if s > r.outer_bound_capped + SLOPE_SLACK),
            )
            .collect()
    }
}

/// Width of the rotating window that realizes `lambda`, if `lambda` is a
/// multiple of `1/K`. Widths beyond `min(M,K)` are clipped.
pub fn window_width(antennas: usize, users: usize, lambda: f64) -> Option<usize> {
    let scaled = lambda * users as f64;
    let w = scaled.round();
    if (scaled - w).abs() > 1e-9 {
        return None;
    }
    Some((w as usize).min(antennas.min(users)))
}

/// Evaluates the capped outer bound at each `lambda` and, when `simulate_on`
/// is set and `lambda` is a multiple of `1/K`, the slope achieved by a
/// rotating window of width `round(lambda K)` (clipped to `min(M,K)`).
///
/// `M` and `K` come from `config`; its schedule field is ignored. Rows come
/// back in input order.
pub fn sweep_lambda(
    lambdas: &[f64],
    simulate_on: bool,
    config: &ExperimentConfig,
) -> Result<SweepResult> {
    if lambdas.is_empty() {
        return Err(Error::Config("no lambda values to sweep".into()));
    }
    if let Some(l) = lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(Error::Config(format!("lambda {l} outside [0, 1]")));
    }
    let (m, k) = (config.antennas, config.users);
    let mut sim_cfg = config.clone();
    sim_cfg.schedule = ScheduleKind::CyclicWindow;
    sim_cfg.validate()?;
    let min_mk = m.min(k);

    let row = |&lambda: &f64| -> Result<SweepRow> {
        let poly = build_polytope(m, k, lambda, config.bounds)?;
        let bound = max_weighted(&poly, &vec![1.0; k])?;
        let width = window_width(m, k, lambda);
        let schedule_name = match width {
            None => "none".to_string(),
            Some(0) => "all_n".to_string(),
            Some(w) if w == min_mk => "cyclic_window".to_string(),
            Some(w) => format!("window_{w}"),
        };
        let achieved_slope = match (simulate_on, width) {
            (true, Some(w)) => {
                let schedule = CsitSchedule::window(k, w, config.slots)?;
                let sim = simulate(&schedule, &sim_cfg.sim_config(lambda)?)?;
                Some(sim.dof_slope)
            }
            _ => None,
        };
        Ok(SweepRow {
            lambda,
            achieved_slope,
            outer_bound_capped: bound.capped_max_sum,
            outer_bound_raw: bound.raw_max_sum,
            heuristic: matches!(width, Some(w) if w > 0 && w < min_mk),
            schedule_name,
        })
    };
    let rows = if config.parallel {
        lambdas.par_iter().map(row).collect::<Result<Vec<_>>>()?
    } else {
        lambdas.iter().map(row).collect::<Result<Vec<_>>>()?
    };
    Ok(SweepResult {
        antennas: m,
        users: k,
        lambda_star: lambda_star(m, k),
        rows,
    })
}

/// Parses a lambda given as a decimal or a fraction such as `2/3`.
pub fn parse_lambda(s: &str) -> Result<f64> {
    let bad = || Error::Config(format!("cannot parse lambda {s:?}"));
    let v = match s.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| bad())?;
            let den: f64 = den.trim().parse().map_err(|_| bad())?;
            if den == 0.0 {
                return Err(bad());
            }
            num / den
        }
        None => s.trim().parse().map_err(|_| bad())?,
    };
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Config(format!("lambda {v} outside [0, 1]")));
    }
    Ok(v)
}
