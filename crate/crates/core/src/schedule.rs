//! Per-user, per-slot CSIT availability grids.
//!
//! A schedule records, for every user `k` and slot `t`, whether the
//! transmitter has perfect (`P`), delayed (`D`) or no (`N`) channel knowledge
//! of that user. The per-user perfect-CSIT fraction is capped by `lambda`.
//!
//! Users are 0-based in memory and 1-based in files and reports.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed when comparing a fraction against its cap.
pub const AUDIT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CsitState {
    /// Perfect, instantaneous CSIT.
    P,
    /// Delayed (outdated) CSIT. Treated as `N` by the transmitter.
    D,
    /// No CSIT.
    N,
}

impl CsitState {
    pub fn as_char(self) -> char {
        match self {
            CsitState::P => 'P',
            CsitState::D => 'D',
            CsitState::N => 'N',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'P' => Some(CsitState::P),
            'D' => Some(CsitState::D),
            'N' => Some(CsitState::N),
            _ => None,
        }
    }
}

impl fmt::Display for CsitState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// A `K x n` grid of CSIT states, stored user-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsitSchedule {
    users: usize,
    slots: usize,
    grid: Vec<CsitState>,
}

impl CsitSchedule {
    pub fn from_grid(users: usize, slots: usize, grid: Vec<CsitState>) -> Result<Self> {
        if users == 0 || slots == 0 {
            return Err(Error::EmptySchedule);
        }
        if grid.len() != users * slots {
            return Err(Error::Dimension(format!(
                "{} states for a {users}x{slots} schedule",
                grid.len()
            )));
        }
        Ok(Self { users, slots, grid })
    }

    /// Every user in state `state` for every slot.
    pub fn uniform(users: usize, slots: usize, state: CsitState) -> Result<Self> {
        Self::from_grid(users, slots, vec![state; users * slots])
    }

    /// The rotating-window schedule: in slot `t` (0-based) users
    /// `t, t+1, ..., t+min(M,K)-1 (mod K)` are `P`, everyone else `N`.
    ///
    /// Every user gets perfect CSIT for exactly `min(M,K)/K` of the slots and
    /// every slot has exactly `min(M,K)` perfect users.
    pub fn cyclic_window(antennas: usize, users: usize, slots: usize) -> Result<Self> {
        Self::window(users, antennas.min(users), slots)
    }

    /// Rotating window of arbitrary width `0 <= width <= K`.
    ///
    /// Width zero yields an all-`N` grid.
    pub fn window(users: usize, width: usize, slots: usize) -> Result<Self> {
        check_block_length(users, slots)?;
        if width > users {
            return Err(Error::Config(format!(
                "window width {width} exceeds user count {users}"
            )));
        }
        let mut grid = vec![CsitState::N; users * slots];
        for t in 0..slots {
            for j in 0..width {
                let k = (t + j) % users;
                grid[k * slots + t] = CsitState::P;
            }
        }
        Self::from_grid(users, slots, grid)
    }

    /// Blocks of `K` slots: one all-`D` slot followed by `K-1` all-`P` slots.
    ///
    /// For `K = 3` this is the delayed/perfect/perfect pattern with perfect
    /// fraction 2/3; larger `K` extends the block the same way, giving
    /// `(K-1)/K`.
    pub fn lee_heath_block(users: usize, slots: usize) -> Result<Self> {
        check_block_length(users, slots)?;
        let mut grid = vec![CsitState::P; users * slots];
        for k in 0..users {
            for t in (0..slots).step_by(users) {
                grid[k * slots + t] = CsitState::D;
            }
        }
        Self::from_grid(users, slots, grid)
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    /// State of user `k` in slot `t`, both 0-based.
    pub fn state(&self, k: usize, t: usize) -> CsitState {
        self.grid[k * self.slots + t]
    }

    pub fn row(&self, k: usize) -> &[CsitState] {
        &self.grid[k * self.slots..(k + 1) * self.slots]
    }

    /// The `K` states of slot `t`.
    pub fn column(&self, t: usize) -> Vec<CsitState> {
        (0..self.users).map(|k| self.state(k, t)).collect()
    }

    pub fn perfect_count(&self, k: usize) -> usize {
        self.row(k).iter().filter(|&&s| s == CsitState::P).count()
    }

    pub fn perfect_in_slot(&self, t: usize) -> usize {
        (0..self.users)
            .filter(|&k| self.state(k, t) == CsitState::P)
            .count()
    }

    pub fn per_user_fraction(&self, k: usize) -> f64 {
        self.perfect_count(k) as f64 / self.slots as f64
    }

    /// Checks each user's perfect-CSIT fraction against `lambda_cap`.
    pub fn audit(&self, lambda_cap: f64) -> FractionAudit {
        let per_user: Vec<f64> = (0..self.users).map(|k| self.per_user_fraction(k)).collect();
        let max_fraction = per_user.iter().copied().fold(0.0, f64::max);
        let passed = per_user.iter().all(|&f| f <= lambda_cap + AUDIT_SLACK);
        FractionAudit {
            per_user,
            max_fraction,
            lambda_cap,
            passed,
        }
    }

    /// Parses the text format: one line per user, one `P`/`D`/`N` per slot.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<CsitState>> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.is_empty() {
                // a trailing blank line is tolerated, interior ones are not
                if text.lines().skip(i + 1).any(|l| !l.trim().is_empty()) {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: "empty row".into(),
                    });
                }
                continue;
            }
            let row = line
                .chars()
                .enumerate()
                .map(|(j, c)| {
                    CsitState::from_char(c).ok_or_else(|| Error::Parse {
                        line: i + 1,
                        msg: format!("invalid state {c:?} at column {}", j + 1),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if let Some(first) = rows.first() {
                if row.len() != first.len() {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: format!("ragged row: {} slots, expected {}", row.len(), first.len()),
                    });
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::EmptySchedule);
        }
        let (users, slots) = (rows.len(), rows[0].len());
        Self::from_grid(users, slots, rows.concat())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_string())?;
        Ok(())
    }
}

/// Canonical text form; LF-terminated rows, user 1 first.
impl fmt::Display for CsitSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in 0..self.users {
            for s in self.row(k) {
                write!(f, "{}", s.as_char())?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn check_block_length(users: usize, slots: usize) -> Result<()> {
    if users == 0 {
        return Err(Error::Config("user count must be positive".into()));
    }
    if slots == 0 || !slots.is_multiple_of(users) {
        return Err(Error::BadLength { n: slots, k: users });
    }
    Ok(())
}

/// Result of checking per-user perfect-CSIT fractions against a cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionAudit {
    pub per_user: Vec<f64>,
    pub max_fraction: f64,
    pub lambda_cap: f64,
    pub passed: bool,
}

impl FractionAudit {
    /// Converts a failed audit into [`Error::AuditFailure`] naming the first
    /// offending user (1-based).
    pub fn into_result(self) -> Result<Self> {
        if self.passed {
            return Ok(self);
        }
        let (k, &fraction) = self
            .per_user
            .iter()
            .enumerate()
            .find(|(_, &f)| f > self.lambda_cap + AUDIT_SLACK)
            .expect("failed audit has an offending user");
        Err(Error::AuditFailure {
            user: k + 1,
            fraction,
            cap: self.lambda_cap,
        })
    }
}
