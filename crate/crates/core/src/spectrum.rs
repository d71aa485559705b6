//! Primary-user occupancy, imperfect sensing, the sensing-throughput
//! tradeoff, and closed-form transmission-success probabilities.

use rand::Rng;
use thiserror::Error;

/// Ground-truth occupancy of the K unauthorized channels for one slot.
#[derive(Clone, Debug)]
pub struct ChannelSlotState {
    /// `occupied[k]` is true when primary traffic uses channel k this slot.
    pub occupied: Vec<bool>,
    /// Probability that a channel is free: exp(-lambda).
    pub p0: f64,
}

impl ChannelSlotState {
    pub fn k_channels(&self) -> usize {
        self.occupied.len()
    }
}

/// One OBU's sensing outcome for a slot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SensingReport {
    pub owner: usize,
    /// The K' channels this OBU sensed, ascending.
    pub sensed: Vec<usize>,
    /// Subset of `sensed` the OBU believes to be free, ascending.
    pub believed_free: Vec<usize>,
}

#[derive(Debug, Error, PartialEq)]
pub enum SpectrumError {
    #[error("sensing time {sensing}s exceeds the slot length {slot}s")]
    SensingExceedsSlot { sensing: f64, slot: f64 },
}

/// Continuous root x > 0 of `(x+1) ln(x+1) + x = k`, found by Newton's
/// method. The left side is strictly increasing and convex, so iteration
/// from x = k converges monotonically.
pub fn sensed_count_root(k: f64) -> f64 {
    assert!(k >= 1.0);
    let f = |x: f64| (x + 1.0) * (x + 1.0).ln() + x - k;
    let fp = |x: f64| (x + 1.0).ln() + 2.0;
    let mut x = k;
    for _ in 0..64 {
        let step = f(x) / fp(x);
        x -= step;
        if step.abs() < 1e-13 {
            break;
        }
    }
    x.max(0.0)
}

/// Reference number of channels to sense: the rounded root of the
/// sensing-throughput optimality condition, clamped to [1, K].
pub fn reference_sensed_count(k_channels: usize) -> usize {
    assert!(k_channels >= 1);
    let root = sensed_count_root(k_channels as f64);
    (root.round() as usize).clamp(1, k_channels)
}

/// Rate left after spending `k_sensed * tau` of the slot on sensing:
/// `((T - K'*tau) / T) * capacity`.
pub fn effective_rate(
    capacity: f64,
    k_sensed: usize,
    tau: f64,
    slot_t: f64,
) -> Result<f64, SpectrumError> {
    let sensing = k_sensed as f64 * tau;
    if sensing > slot_t {
        return Err(SpectrumError::SensingExceedsSlot {
            sensing,
            slot: slot_t,
        });
    }
    Ok((slot_t - sensing) / slot_t * capacity)
}

/// Samples ground-truth occupancy: each channel is independently taken by
/// primary traffic with probability 1 - exp(-lambda).
pub fn sample_primary<R: Rng + ?Sized>(
    k_channels: usize,
    lambda: f64,
    rng: &mut R,
) -> ChannelSlotState {
    assert!(lambda >= 0.0);
    let p0 = (-lambda).exp();
    let occupied = (0..k_channels).map(|_| rng.gen::<f64>() >= p0).collect();
    ChannelSlotState { occupied, p0 }
}

/// Senses a uniformly random K'-subset of channels with miss/false-alarm
/// errors applied independently per channel.
pub fn sense_channels<R: Rng + ?Sized>(
    truth: &ChannelSlotState,
    k_sensed: usize,
    p_miss: f64,
    p_false: f64,
    owner: usize,
    rng: &mut R,
) -> SensingReport {
    let k = truth.k_channels();
    assert!(k_sensed >= 1 && k_sensed <= k);
    let mut sensed: Vec<usize> = rand::seq::index::sample(rng, k, k_sensed).into_vec();
    sensed.sort_unstable();
    let mut believed_free = Vec::with_capacity(k_sensed);
    for &ch in &sensed {
        let free = if truth.occupied[ch] {
            // Occupied channel slips through with the miss probability.
            rng.gen::<f64>() < p_miss
        } else {
            // Free channel survives unless a false alarm excludes it.
            rng.gen::<f64>() >= p_false
        };
        if free {
            believed_free.push(ch);
        }
    }
    SensingReport {
        owner,
        sensed,
        believed_free,
    }
}

/// Probability that the empty-channel decision is correct, i.e. that a
/// transmission on a believed-free channel does not collide with primary
/// traffic.
pub fn p_primary_clear(p0: f64, p_miss: f64, p_false: f64) -> f64 {
    let denom = p0 * (1.0 - p_false) + (1.0 - p0) * p_miss;
    if denom <= 0.0 {
        // Nothing is ever believed free, so no transmission takes place.
        return 0.0;
    }
    p0 * (1.0 - p_false) / denom
}

/// Probability that none of the receiver's neighbors lands on the same
/// channel, with K*P0 channels free on average.
pub fn p_no_obu_collision(n_rx_neighbors: usize, k_channels: usize, p0: f64) -> f64 {
    let avail = k_channels as f64 * p0;
    debug_assert!(avail > 1.0, "validated upstream: K * P0 must exceed 1");
    ((avail - 1.0) / avail).powi(n_rx_neighbors as i32)
}

/// Closed-form probability of a successful V2V transmission: the product of
/// the no-OBU-collision and no-primary-collision factors.
pub fn p_success(
    n_rx_neighbors: usize,
    k_channels: usize,
    p0: f64,
    p_miss: f64,
    p_false: f64,
) -> f64 {
    p_no_obu_collision(n_rx_neighbors, k_channels, p0)
        * p_primary_clear(p0, p_miss, p_false)
}
