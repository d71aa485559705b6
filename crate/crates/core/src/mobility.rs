//! Two-lane one-way freeway fleet evolution and line-of-sight
//! neighborhoods.
//!
//! Speeds follow a three-branch random walk (hold with probability 1-2p,
//! accelerate or decelerate by `a` with probability p each, clamped to
//! [v_min, v_max]), overridden by the security-distance rules: a follower
//! blocked in its own lane switches lanes when the other lane is clear and
//! slows to v_min when both are blocked, and a follower trailing by at
//! least d_max accelerates to v_max. Gap checks use the front gap only.

use crate::config::MobilityConfig;
use rand::Rng;

/// Kinematic state of one OBU.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObuKinematics {
    /// Lane index on the two-lane road.
    pub lane: u8,
    /// Longitudinal position, m. The road axis points in the direction of
    /// travel; the RSU sits at a fixed coordinate on the same axis.
    pub x: f64,
    /// Speed, m/s.
    pub v: f64,
}

/// Positions and speeds of the whole fleet.
#[derive(Clone, Debug, PartialEq)]
pub struct FleetState {
    pub obus: Vec<ObuKinematics>,
    /// True when the initial window had to be extended to hold the fleet at
    /// the security distance.
    pub window_stretched: bool,
}

impl FleetState {
    pub fn len(&self) -> usize {
        self.obus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obus.is_empty()
    }
}

/// Index and gap of the nearest vehicle strictly ahead of `i` in `lane`.
fn front_gap(obus: &[ObuKinematics], i: usize, lane: u8) -> Option<(usize, f64)> {
    let xi = obus[i].x;
    let mut best: Option<(usize, f64)> = None;
    for (j, o) in obus.iter().enumerate() {
        if j == i || o.lane != lane || o.x <= xi {
            continue;
        }
        let gap = o.x - xi;
        if best.is_none_or(|(_, g)| gap < g) {
            best = Some((j, gap));
        }
    }
    best
}

/// Places `n` OBUs on both lanes inside a window of length L ending D
/// meters before the RSU, keeping same-lane gaps at the security distance.
/// If a lane cannot hold its vehicles at that spacing the window is
/// stretched backwards and the fact recorded on the returned state.
pub fn init_fleet<R: Rng + ?Sized>(cfg: &MobilityConfig, n: usize, rng: &mut R) -> FleetState {
    assert!(n >= 1);
    let window_end = cfg.rsu_position - cfg.rsu_distance;
    let window_start = window_end - cfg.fleet_length;

    let lanes: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
    let mut positions = vec![0.0f64; n];
    let mut stretched = false;

    for lane in 0..2u8 {
        let members: Vec<usize> = (0..n).filter(|&i| lanes[i] == lane).collect();
        let count = members.len();
        if count == 0 {
            continue;
        }
        let needed = (count - 1) as f64 * cfg.d_min;
        let mut start = window_start;
        if needed > cfg.fleet_length {
            start = window_end - needed;
            stretched = true;
        }
        let slack = (window_end - start - needed).max(0.0);
        // Order statistics of uniform draws fill the slack; adding k*d_min
        // restores the security spacing.
        let mut offsets: Vec<f64> = (0..count).map(|_| rng.gen::<f64>() * slack).collect();
        offsets.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (k, &i) in members.iter().enumerate() {
            positions[i] = start + k as f64 * cfg.d_min + offsets[k];
        }
    }

    let obus = (0..n)
        .map(|i| ObuKinematics {
            lane: lanes[i],
            x: positions[i],
            v: rng.gen_range(cfg.v_min..=cfg.v_max),
        })
        .collect();
    FleetState {
        obus,
        window_stretched: stretched,
    }
}

/// Advances the fleet by one slot of length `dt` seconds.
pub fn step_fleet<R: Rng + ?Sized>(
    state: &FleetState,
    cfg: &MobilityConfig,
    dt: f64,
    rng: &mut R,
) -> FleetState {
    let mut next = state.clone();
    let p = cfg.p_speed_change;

    // Random speed walk.
    for o in next.obus.iter_mut() {
        let u: f64 = rng.gen();
        if u < p {
            o.v = (o.v + cfg.accel).min(cfg.v_max);
        } else if u < 2.0 * p {
            o.v = (o.v - cfg.accel).max(cfg.v_min);
        }
    }

    // Security distance: switch lanes or fall back to v_min.
    for i in 0..next.obus.len() {
        let lane = next.obus[i].lane;
        let Some((_, own_gap)) = front_gap(&next.obus, i, lane) else {
            continue;
        };
        if own_gap > cfg.d_min {
            continue;
        }
        let other = 1 - lane;
        let other_gap = front_gap(&next.obus, i, other).map_or(f64::INFINITY, |(_, g)| g);
        let xi = next.obus[i].x;
        let other_occupied_here = next
            .obus
            .iter()
            .enumerate()
            .any(|(j, o)| j != i && o.lane == other && o.x == xi);
        if other_gap > cfg.d_min && !other_occupied_here {
            next.obus[i].lane = other;
        } else if other_gap <= cfg.d_min {
            next.obus[i].v = cfg.v_min;
        }
    }

    // Catch-up rule: a follower trailing by d_max or more floors it.
    for i in 0..next.obus.len() {
        let lane = next.obus[i].lane;
        if let Some((_, gap)) = front_gap(&next.obus, i, lane) {
            if gap >= cfg.d_max {
                next.obus[i].v = cfg.v_max;
            }
        }
    }

    for o in next.obus.iter_mut() {
        o.x += o.v * dt;
    }
    next
}

/// OBUs within line-of-sight range of `i`: all j with |x_i - x_j| within
/// `los_range`, either lane.
pub fn neighbors(state: &FleetState, i: usize, los_range: f64) -> Vec<usize> {
    let xi = state.obus[i].x;
    state
        .obus
        .iter()
        .enumerate()
        .filter(|&(j, o)| j != i && (o.x - xi).abs() <= los_range)
        .map(|(j, _)| j)
        .collect()
}
