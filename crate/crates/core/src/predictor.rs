//! Idle-period histogram prediction for the next slot.
//!
//! Within an epoch the previous slot's histogram is carried forward. After a
//! page migration every bucket is rescaled by `W_i / W'_i`, the ratio of the
//! geometric idle-length probabilities of the rank's new and old page sets,
//! and the result is renormalized so that it spans exactly one slot.

use serde::{Deserialize, Serialize};

use crate::idlehist::SparseHistogram;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PredictError {
    #[error("slot length must be positive")]
    ZeroSlot,
}

/// Per-rank access model: page access probabilities per `g`-cycle window
/// and the access latency `g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankAccessProfile {
    pub page_probs: Vec<f64>,
    pub latency: u64,
}

impl RankAccessProfile {
    /// Builds a profile from per-page accesses within one slot.
    pub fn from_frequencies(freqs: impl IntoIterator<Item = u64>, latency: u64, slot_cycles: u64) -> Result<Self, PredictError> {
        let page_probs = freqs
            .into_iter()
            .map(|f| page_access_prob(f as f64, latency, slot_cycles))
            .collect::<Result<_, _>>()?;
        Ok(Self { page_probs, latency })
    }

    /// Probability `Q` that a `g`-cycle window is idle.
    pub fn idle_prob(&self) -> f64 {
        rank_idle_prob(&self.page_probs)
    }
}

/// `p = min(1, g * f / T)`.
pub fn page_access_prob(f: f64, g: u64, slot_cycles: u64) -> Result<f64, PredictError> {
    if slot_cycles == 0 {
        return Err(PredictError::ZeroSlot);
    }
    Ok((g as f64 * f.max(0.0) / slot_cycles as f64).min(1.0))
}

/// `Q = prod(1 - p_i)`; the empty product is 1.
pub fn rank_idle_prob(page_probs: &[f64]) -> f64 {
    // accumulate in log space so thousands of small p_i keep precision
    let mut log_q = 0.0;
    for &p in page_probs {
        if p >= 1.0 {
            return 0.0;
        }
        log_q += (-p).ln_1p();
    }
    log_q.exp()
}

/// `W_k = Q^k (1 - Q)`.
pub fn idle_length_prob(q: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0 - q;
    }
    q.powf(k as f64) * (1.0 - q)
}

/// `ln W_k`, or `None` when `W_k` is exactly zero. `k` may be fractional.
fn ln_idle_length_prob(q: f64, k: f64) -> Option<f64> {
    if q >= 1.0 || (q <= 0.0 && k > 0.0) {
        return None;
    }
    let tail = if k == 0.0 { 0.0 } else { k * q.ln() };
    Some(tail + (-q).ln_1p())
}

pub fn predict_carry_forward(prev: &SparseHistogram) -> SparseHistogram {
    prev.clone()
}

/// Rescales `prev` by `W_i / W'_i` (`q_new` vs `q_old`) and normalizes so
/// that `sum(Hist[i] * (i + g)) = T`.
///
/// `Q` is the idle probability of a `g`-cycle window, so an idle period of
/// `i` cycles spans `i / g` windows.
/// Buckets where either probability vanishes get a ratio of 1.
/// Falls back to carry-forward when the rescaled histogram occupies no time.
pub fn predict_after_migration(prev: &SparseHistogram, q_old: f64, q_new: f64, latency: u64) -> SparseHistogram {
    let g = latency.max(1) as f64;
    rescale_and_normalize(prev, latency, |len| {
        let k = len as f64 / g;
        match (ln_idle_length_prob(q_new, k), ln_idle_length_prob(q_old, k)) {
            (Some(new), Some(old)) => new - old,
            _ => 0.0,
        }
    })
}

/// `ln_ratio` gives `ln(W_i / W'_i)`; the common maximum is factored out
/// before exponentiating since the normalization absorbs any constant.
fn rescale_and_normalize(prev: &SparseHistogram, latency: u64, ln_ratio: impl Fn(u64) -> f64) -> SparseHistogram {
    let logs: Vec<f64> = prev.buckets.iter().map(|&(len, _)| ln_ratio(len)).collect();
    let shift = logs.iter().copied().filter(|l| l.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    let rescaled = prev
        .buckets
        .iter()
        .zip(&logs)
        .map(|(&(len, count), &l)| (len, count * (l - shift).exp()))
        .filter(|(_, c)| c.is_finite());
    let plus = SparseHistogram::from_pairs(prev.slot_cycles, rescaled);
    let occupied = plus.occupied_time(latency);
    if !(occupied > 0.0) || !occupied.is_finite() {
        return predict_carry_forward(prev);
    }
    let scale = prev.slot_cycles as f64 / occupied;
    SparseHistogram {
        slot_cycles: prev.slot_cycles,
        buckets: plus.buckets.into_iter().map(|(l, c)| (l, c * scale)).collect(),
    }
}
