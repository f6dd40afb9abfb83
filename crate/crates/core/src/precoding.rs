//! Per-slot transmit design.
//!
//! Users with perfect CSIT in a slot are served together with zero-forcing
//! beams; a slot without any perfect user falls back to a single stream sent
//! from antenna 1, which needs no channel knowledge at all.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{invert, ChannelRealization, ComplexMatrix};
use crate::error::{Error, Result};
use crate::schedule::CsitState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlanKind {
    ZeroForcing,
    /// Single stream on antenna 1, no CSIT used.
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecodingPlan {
    pub slot_index: usize,
    pub kind: PlanKind,
    /// Served users (0-based), increasing.
    pub served: Vec<usize>,
    /// `M x s`; column `j` is the unit-norm beam of `served[j]`.
    pub beam_matrix: ComplexMatrix,
    pub powers: Vec<f64>,
}

impl PrecodingPlan {
    pub fn streams(&self) -> usize {
        self.served.len()
    }

    pub fn total_power(&self) -> f64 {
        self.powers.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotSinr {
    /// `(user, linear sinr)` for each served user, in plan order.
    pub per_user: Vec<(usize, f64)>,
}

/// Picks the users served in one slot.
///
/// The first `min(M, #P)` perfect-CSIT users in increasing id order; when
/// nobody is perfect, the single user `rr_counter mod K`.
pub fn select_served(states: &[CsitState], antennas: usize, rr_counter: usize) -> Vec<usize> {
    let perfect: Vec<usize> = states
        .iter()
        .enumerate()
        .filter(|(_, &s)| s == CsitState::P)
        .map(|(k, _)| k)
        .take(antennas)
        .collect();
    if perfect.is_empty() {
        vec![rr_counter % states.len()]
    } else {
        perfect
    }
}

/// Zero-forcing beams for `served` with equal power split.
///
/// Beams are the columns of the right pseudo-inverse `H_s^H (H_s H_s^H)^-1`
/// of the served rows, refined once against the residual and then scaled to
/// unit norm.
pub fn zf_beamformer(
    h: &ChannelRealization,
    served: &[usize],
    total_power: f64,
) -> Result<PrecodingPlan> {
    let antennas = h.antennas();
    if served.is_empty() || served.len() > antennas {
        return Err(Error::Dimension(format!(
            "cannot zero-force {} streams with {antennas} antennas",
            served.len()
        )));
    }
    let hs = h.matrix.select_rows(served);
    let hs_adj = hs.adjoint();
    let gram_inv = invert(&(&hs * &hs_adj))?;
    let mut w = &hs_adj * &gram_inv;

    let residual = (&hs * &w).sub(&ComplexMatrix::identity(served.len()));
    let correction = &(&hs_adj * &gram_inv) * &residual;
    w = w.sub(&correction);

    normalize_columns(&mut w)?;
    let s = served.len();
    Ok(PrecodingPlan {
        slot_index: h.slot_index,
        kind: PlanKind::ZeroForcing,
        served: served.to_vec(),
        beam_matrix: w,
        powers: vec![total_power / s as f64; s],
    })
}

/// All power on antenna 1 for a single user.
pub fn fallback_plan(h: &ChannelRealization, user: usize, total_power: f64) -> PrecodingPlan {
    let mut beam = ComplexMatrix::zeros(h.antennas(), 1);
    beam[(0, 0)] = Complex64::new(1.0, 0.0);
    PrecodingPlan {
        slot_index: h.slot_index,
        kind: PlanKind::Fallback,
        served: vec![user],
        beam_matrix: beam,
        powers: vec![total_power],
    }
}

/// Builds the plan for one slot from its CSIT column.
pub fn plan_slot(
    h: &ChannelRealization,
    states: &[CsitState],
    rr_counter: usize,
    total_power: f64,
) -> Result<PrecodingPlan> {
    let served = select_served(states, h.antennas(), rr_counter);
    if states[served[0]] == CsitState::P {
        zf_beamformer(h, &served, total_power)
    } else {
        Ok(fallback_plan(h, served[0], total_power))
    }
}

/// Effective gain `h_k . b` of a beam at user `k` (no conjugation).
pub fn beam_gain(
    h: &ChannelRealization,
    user: usize,
    beam: &ComplexMatrix,
    col: usize,
) -> Complex64 {
    h.user(user)
        .iter()
        .enumerate()
        .map(|(m, g)| g * beam[(m, col)])
        .sum()
}

/// Post-processing SINR of every served user under unit-variance noise.
pub fn slot_sinr(h: &ChannelRealization, plan: &PrecodingPlan) -> SlotSinr {
    let per_user = plan
        .served
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let mut signal = 0.0;
            let mut interference = 0.0;
            for (j, &p) in plan.powers.iter().enumerate() {
                let g = beam_gain(h, k, &plan.beam_matrix, j).norm_sqr() * p;
                if i == j {
                    signal = g;
                } else {
                    interference += g;
                }
            }
            (k, signal / (1.0 + interference))
        })
        .collect();
    SlotSinr { per_user }
}

fn normalize_columns(w: &mut ComplexMatrix) -> Result<()> {
    for j in 0..w.cols() {
        let norm = w.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Singular {
                cond: f64::INFINITY,
            });
        }
        for i in 0..w.rows() {
            w[(i, j)] /= norm;
        }
    }
    Ok(())
}
