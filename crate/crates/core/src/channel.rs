//! Rayleigh/path-loss channel gains and Shannon link capacities.
//!
//! Every link sees small-scale Rayleigh fading on top of a fourth-power
//! path loss: the complex amplitude has unit variance, so the squared
//! magnitude of the fading term is standard-exponential. Gains are redrawn
//! independently per link, per channel, per slot; within a slot a channel
//! stays fixed.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinkKind {
    V2R,
    V2V,
}

/// One sampled channel realization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkGain {
    /// Squared channel magnitude |h|^2. Zero when the link has no line of
    /// sight.
    pub magnitude_sq: f64,
    pub kind: LinkKind,
    /// Channel index for V2V links; V2R uses the authorized band.
    pub channel_index: Option<usize>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("link distance must be positive, got {0}")]
    NonPositiveDistance(f64),
}

/// Draws |h|^2 = |alpha|^2 * d^-4 with |alpha|^2 standard-exponential, or
/// exactly zero when no line of sight exists.
pub fn sample_gain<R: Rng + ?Sized>(
    distance: f64,
    has_los: bool,
    kind: LinkKind,
    channel_index: Option<usize>,
    rng: &mut R,
) -> Result<LinkGain, ChannelError> {
    // The negated form also rejects a NaN distance.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(distance > 0.0) {
        return Err(ChannelError::NonPositiveDistance(distance));
    }
    let magnitude_sq = if has_los {
        let fading: f64 = Exp1.sample(rng);
        fading * distance.powi(-4)
    } else {
        0.0
    };
    Ok(LinkGain {
        magnitude_sq,
        kind,
        channel_index,
    })
}

/// Shannon capacity of the link in bits/s: `bandwidth * log2(1 + beta*|h|^2)`.
pub fn capacity(gain: &LinkGain, bandwidth: f64, beta: f64) -> f64 {
    debug_assert!(bandwidth > 0.0 && beta > 0.0);
    bandwidth * (1.0 + beta * gain.magnitude_sq).log2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::stream;

    fn mean_gain(distance: f64, draws: usize, seed_ix: u64) -> f64 {
        let mut rng = stream(1, "channel-test", &[seed_ix]);
        let mut sum = 0.0;
        for _ in 0..draws {
            sum += sample_gain(distance, true, LinkKind::V2V, Some(0), &mut rng)
                .unwrap()
                .magnitude_sq;
        }
        sum / draws as f64
    }

    #[test]
    fn no_los_means_zero_gain() {
        let mut rng = stream(1, "channel-test", &[0]);
        let g = sample_gain(25.0, false, LinkKind::V2V, Some(3), &mut rng).unwrap();
        assert_eq!(g.magnitude_sq, 0.0);
    }

    #[test]
    fn nonpositive_distance_is_rejected() {
        let mut rng = stream(1, "channel-test", &[0]);
        assert!(sample_gain(0.0, true, LinkKind::V2R, None, &mut rng).is_err());
        assert!(sample_gain(-2.0, true, LinkKind::V2R, None, &mut rng).is_err());
    }

    #[test]
    fn unit_distance_gain_has_unit_mean() {
        // |alpha|^2 is Exp(1); at d=1 the path loss factor is 1.
        let mean = mean_gain(1.0, 100_000, 1);
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn doubling_distance_divides_mean_gain_by_sixteen() {
        let m1 = mean_gain(3.0, 100_000, 2);
        let m2 = mean_gain(6.0, 100_000, 3);
        let ratio = m1 / m2;
        assert!((ratio - 16.0).abs() / 16.0 < 0.05, "ratio {ratio}");
    }

    #[test]
    fn capacity_matches_closed_form_points() {
        let gain = |m| LinkGain {
            magnitude_sq: m,
            kind: LinkKind::V2V,
            channel_index: Some(0),
        };
        assert_eq!(capacity(&gain(0.0), 10e6, 10.0), 0.0);
        // beta * |h|^2 = 1 gives exactly one bit per second per hertz.
        assert!((capacity(&gain(0.5), 1.0, 2.0) - 1.0).abs() < 1e-12);
        // 10 MHz, 10 dB, |h|^2 = 0.1 -> 10^7 bits/s.
        assert!((capacity(&gain(0.1), 10e6, 10.0) - 1e7).abs() < 1e-3);
    }

    #[test]
    fn capacity_monotone_and_zero_only_at_zero_gain() {
        let mut prev = -1.0;
        for i in 0..200 {
            let g = LinkGain {
                magnitude_sq: i as f64 * 0.05,
                kind: LinkKind::V2R,
                channel_index: None,
            };
            let c = capacity(&g, 5e6, 31.62);
            assert!(c >= prev);
            if g.magnitude_sq == 0.0 {
                assert_eq!(c, 0.0);
            } else {
                assert!(c > 0.0);
            }
            prev = c;
        }
    }

    #[test]
    fn v2r_usefulness_probability_decreases_with_distance() {
        // P(c > R_0) over a distance grid must be monotone nonincreasing
        // and approach certainty close-in.
        let w = 75e6;
        let beta = 31.6227766;
        let r0 = 5e6;
        let mut prev = f64::INFINITY;
        for (ix, d) in [0.5, 2.0, 4.0, 6.0, 9.0].into_iter().enumerate() {
            let mut rng = stream(9, "channel-usefulness", &[ix as u64]);
            let trials = 20_000;
            let mut hits = 0;
            for _ in 0..trials {
                let g = sample_gain(d, true, LinkKind::V2R, None, &mut rng).unwrap();
                if capacity(&g, w, beta) > r0 {
                    hits += 1;
                }
            }
            let p = hits as f64 / trials as f64;
            assert!(p <= prev + 0.02, "not decreasing at d={d}: {p} > {prev}");
            if ix == 0 {
                assert!(p > 0.99, "close-in usefulness {p}");
            }
            prev = p;
        }
    }
}
