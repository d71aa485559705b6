//! The per-slot simulation loop: mobility, spectrum sensing, graph
//! selection by the configured approach, data transmission with real
//! collisions, and packet/metric bookkeeping.
//!
//! All randomness flows through labeled streams derived from the run seed,
//! so fleets, channel draws, and sensing outcomes are identical across
//! approaches for the same seed; only the approach-specific draws differ.

use crate::baselines::{broadcast_only_graph, noncoop_graph, optimal_graph, BaselineError};
use crate::channel::{capacity, sample_gain, LinkKind};
use crate::config::{stream, Config};
use crate::game::{form_network, GameContext, Node, TransmissionGraph};
use crate::mobility::{init_fleet, neighbors, step_fleet, FleetState};
use crate::spectrum::{p_success, sample_primary, sense_channels, ChannelSlotState, SensingReport};
use thiserror::Error;

/// Link-selection scheme used each slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Approach {
    /// Coalitional-game network formation.
    Cooperative,
    /// Request/first-responder P2P without coordination.
    NonCooperative,
    /// RSU broadcasting only.
    Broadcast,
    /// Exhaustive enumeration (small networks only).
    Optimal,
}

impl Approach {
    pub fn label(&self) -> &'static str {
        match self {
            Approach::Cooperative => "cooperative",
            Approach::NonCooperative => "noncooperative",
            Approach::Broadcast => "broadcast",
            Approach::Optimal => "optimal",
        }
    }

    pub fn parse(s: &str) -> Option<Approach> {
        match s {
            "cooperative" | "coop" => Some(Approach::Cooperative),
            "noncooperative" | "noncoop" | "non-cooperative" => Some(Approach::NonCooperative),
            "broadcast" => Some(Approach::Broadcast),
            "optimal" => Some(Approach::Optimal),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Baseline(#[from] BaselineError),
}

/// Fixed-size packet bitset; packets only ever get added.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PacketSet {
    words: Vec<u64>,
    m: usize,
}

impl PacketSet {
    pub fn new(m: usize) -> Self {
        PacketSet {
            words: vec![0; m.div_ceil(64)],
            m,
        }
    }

    pub fn capacity(&self) -> usize {
        self.m
    }

    pub fn contains(&self, p: usize) -> bool {
        debug_assert!(p < self.m);
        self.words[p / 64] >> (p % 64) & 1 == 1
    }

    pub fn insert(&mut self, p: usize) {
        debug_assert!(p < self.m);
        self.words[p / 64] |= 1 << (p % 64);
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn missing(&self) -> usize {
        self.m - self.count()
    }

    /// Number of packets in `self` that `other` lacks.
    pub fn count_useful_to(&self, other: &PacketSet) -> u32 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & !b).count_ones())
            .sum()
    }

    /// Lowest-index packets of `self` missing from `other`, up to `limit`.
    pub fn useful_to(&self, other: &PacketSet, limit: usize) -> Vec<usize> {
        let mut out = Vec::new();
        if limit == 0 {
            return out;
        }
        for p in 0..self.m {
            if self.contains(p) && !other.contains(p) {
                out.push(p);
                if out.len() == limit {
                    break;
                }
            }
        }
        out
    }
}

/// Per-OBU simulation state.
#[derive(Clone, Debug)]
pub struct ObuState {
    pub possessed: PacketSet,
}

/// Per-slot measurements.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlotMetrics {
    /// 1-based slot number.
    pub slot: u32,
    /// Total packets possessed across the fleet after the slot.
    pub total_possessed: u64,
    /// Packets delivered this slot.
    pub throughput: u64,
    /// OBU updates the formation run performed (0 for baselines).
    pub formation_iters: u64,
}

/// Full time series of one scenario run.
#[derive(Clone, Debug)]
pub struct MetricsSeries {
    pub approach: Approach,
    pub seed: u64,
    pub n_obus: usize,
    pub slots: Vec<SlotMetrics>,
}

impl MetricsSeries {
    pub fn final_possessed(&self) -> u64 {
        self.slots.last().map_or(0, |s| s.total_possessed)
    }

    pub fn peak_throughput(&self) -> u64 {
        self.slots.iter().map(|s| s.throughput).max().unwrap_or(0)
    }
}

/// Everything sampled or derived for one slot: geometry, ground-truth
/// occupancy, sensing reports, per-link channel choices, and the game
/// context built on top of them.
#[derive(Clone, Debug)]
pub struct SlotContext {
    pub ctx: GameContext,
    pub truth: ChannelSlotState,
    pub sensing: Vec<SensingReport>,
    pub neighbors: Vec<Vec<usize>>,
    /// `best_channel[i][j]`: the channel OBU i would use towards j (its
    /// best believed-free channel by rate), when any is available.
    pub best_channel: Vec<Vec<Option<usize>>>,
    /// Packets each OBU still misses, for the baselines.
    pub missing: Vec<u32>,
}

/// Normalized distances are floored here before entering the channel
/// model; two vehicles abreast in different lanes can otherwise coincide
/// exactly.
const MIN_LINK_DISTANCE: f64 = 1e-6;

/// Samples the slot's channels and assembles the game context for the
/// given fleet geometry and packet holdings.
pub fn build_slot_context(
    cfg: &Config,
    seed: u64,
    slot: u64,
    fleet: &FleetState,
    possessed: &[PacketSet],
) -> SlotContext {
    let n = cfg.n_obus;
    debug_assert_eq!(fleet.len(), n);
    debug_assert_eq!(possessed.len(), n);

    let nbrs: Vec<Vec<usize>> = (0..n).map(|i| neighbors(fleet, i, cfg.los_range)).collect();

    let mut primary_rng = stream(seed, "primary", &[slot]);
    let truth = sample_primary(cfg.k_channels, cfg.lambda_primary, &mut primary_rng);

    let mut sensing_rng = stream(seed, "sensing", &[slot]);
    let sensing: Vec<SensingReport> = (0..n)
        .map(|i| {
            sense_channels(
                &truth,
                cfg.k_sensed,
                cfg.p_miss,
                cfg.p_false,
                i,
                &mut sensing_rng,
            )
        })
        .collect();

    let mut gain_rng = stream(seed, "gains", &[slot]);
    let mut v2r_capacity = Vec::with_capacity(n);
    for o in &fleet.obus {
        let d = ((o.x - cfg.mobility.rsu_position).abs() / cfg.ref_distance)
            .max(MIN_LINK_DISTANCE);
        let g = sample_gain(d, true, LinkKind::V2R, None, &mut gain_rng)
            .expect("positive distance");
        v2r_capacity.push(capacity(&g, cfg.w_v2r, cfg.beta_v2r));
    }

    // Per ordered pair, the best believed-free channel and its effective
    // rate. Channel gains are independent per pair, per channel, per slot.
    let sensing_overhead = (cfg.slot_t - cfg.k_sensed as f64 * cfg.tau_sense) / cfg.slot_t;
    let mut best_rate = vec![vec![0.0; n]; n];
    let mut best_channel = vec![vec![None; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j || !nbrs[i].contains(&j) {
                continue;
            }
            let d = ((fleet.obus[i].x - fleet.obus[j].x).abs() / cfg.ref_distance)
                .max(MIN_LINK_DISTANCE);
            let mut best: Option<(usize, f64)> = None;
            for &k in &sensing[i].believed_free {
                let g = sample_gain(d, true, LinkKind::V2V, Some(k), &mut gain_rng)
                    .expect("positive distance");
                let c = capacity(&g, cfg.w_v2v, cfg.beta_v2v);
                if best.is_none_or(|(_, bc)| c > bc) {
                    best = Some((k, c));
                }
            }
            if let Some((k, c)) = best {
                best_rate[i][j] = sensing_overhead * c;
                best_channel[i][j] = Some(k);
            }
        }
    }

    let p0 = truth.p0;
    let p_success_rx: Vec<f64> = (0..n)
        .map(|i| {
            p_success(
                nbrs[i].len(),
                cfg.k_channels,
                p0,
                cfg.p_miss,
                cfg.p_false,
            )
        })
        .collect();

    let useful: Vec<Vec<u32>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        0
                    } else {
                        possessed[i].count_useful_to(&possessed[j])
                    }
                })
                .collect()
        })
        .collect();
    let missing: Vec<u32> = possessed.iter().map(|p| p.missing() as u32).collect();

    let ctx = GameContext {
        n_obus: n,
        neighbor_count: nbrs.iter().map(|v| v.len()).collect(),
        v2r_capacity,
        best_rate,
        p_success_rx,
        useful,
        gamma_in: cfg.gamma_in,
        gamma_out: cfg.gamma_out,
        gamma_cost: cfg.gamma_cost,
        slot_t: cfg.slot_t,
        packet_size: cfg.packet_size,
        r0: cfg.r0,
    };

    SlotContext {
        ctx,
        truth,
        sensing,
        neighbors: nbrs,
        best_channel,
        missing,
    }
}

/// A V2V transmission attempt for the slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlannedTx {
    pub tx: usize,
    pub rx: usize,
    pub channel: usize,
    /// Packet budget floor(R*T/s) on the chosen channel.
    pub budget: usize,
}

/// Applies the collision rules: an attempt succeeds iff its channel is
/// truly primary-free and no *other* transmitter in line of sight of the
/// receiver uses the same channel.
pub fn resolve_collisions(
    planned: &[PlannedTx],
    truth: &ChannelSlotState,
    nbrs: &[Vec<usize>],
) -> Vec<bool> {
    planned
        .iter()
        .map(|tx| {
            if truth.occupied[tx.channel] {
                return false;
            }
            !planned.iter().any(|other| {
                other.tx != tx.tx
                    && other.channel == tx.channel
                    && nbrs[tx.rx].contains(&other.tx)
            })
        })
        .collect()
}

/// Collects the slot's V2V attempts from the transmission graph: each
/// transmitter uses its best believed-free channel towards its target, or
/// stays silent when it believes nothing is free.
pub fn plan_transmissions(g: &TransmissionGraph, sc: &SlotContext) -> Vec<PlannedTx> {
    let mut planned = Vec::new();
    for tx in 0..g.n_obus() {
        let Some(rx) = g.out_edge(tx) else { continue };
        let Some(channel) = sc.best_channel[tx][rx] else {
            continue;
        };
        let budget = sc.ctx.packets_per_slot(sc.ctx.best_rate[tx][rx]).floor() as usize;
        planned.push(PlannedTx {
            tx,
            rx,
            channel,
            budget,
        });
    }
    planned
}

/// One scenario in progress. Stepping is deterministic for a fixed
/// (config, approach, seed) triple.
pub struct Simulation {
    cfg: Config,
    approach: Approach,
    seed: u64,
    fleet: FleetState,
    obus: Vec<ObuState>,
    carried_graph: TransmissionGraph,
    slot: u32,
    metrics: Vec<SlotMetrics>,
}

impl Simulation {
    pub fn new(cfg: &Config, approach: Approach, seed: u64) -> Result<Simulation, EngineError> {
        if approach == Approach::Optimal && cfg.n_obus > crate::baselines::MAX_ENUMERATION_OBUS {
            return Err(BaselineError::NetworkTooLarge(cfg.n_obus).into());
        }
        let mut init_rng = stream(seed, "fleet-init", &[]);
        let fleet = init_fleet(&cfg.mobility, cfg.n_obus, &mut init_rng);
        Ok(Simulation {
            cfg: cfg.clone(),
            approach,
            seed,
            fleet,
            obus: (0..cfg.n_obus)
                .map(|_| ObuState {
                    possessed: PacketSet::new(cfg.m_packets),
                })
                .collect(),
            carried_graph: TransmissionGraph::empty(cfg.n_obus),
            slot: 0,
            metrics: Vec::new(),
        })
    }

    pub fn fleet(&self) -> &FleetState {
        &self.fleet
    }

    pub fn obus(&self) -> &[ObuState] {
        &self.obus
    }

    pub fn graph(&self) -> &TransmissionGraph {
        &self.carried_graph
    }

    pub fn total_possessed(&self) -> u64 {
        self.obus.iter().map(|o| o.possessed.count() as u64).sum()
    }

    /// Advances one slot: move, sense, pick the transmission graph, then
    /// transmit and account.
    pub fn step(&mut self) -> Result<SlotMetrics, EngineError> {
        self.slot += 1;
        let t = self.slot as u64;
        let cfg = &self.cfg;

        let mut mob_rng = stream(self.seed, "mobility", &[t]);
        self.fleet = step_fleet(&self.fleet, &cfg.mobility, cfg.slot_t, &mut mob_rng);

        let possessed: Vec<PacketSet> =
            self.obus.iter().map(|o| o.possessed.clone()).collect();
        let sc = build_slot_context(cfg, self.seed, t, &self.fleet, &possessed);

        let mut formation_iters = 0u64;
        let graph = match self.approach {
            Approach::Broadcast => broadcast_only_graph(&sc.ctx),
            Approach::NonCooperative => {
                let mut rng = stream(self.seed, "noncoop", &[t]);
                noncoop_graph(&sc.ctx, &sc.neighbors, &sc.missing, &mut rng)
            }
            Approach::Cooperative => {
                let mut rng = stream(self.seed, "formation", &[t]);
                let out = form_network(&self.carried_graph, &sc.ctx, cfg.sigma_history, &mut rng);
                formation_iters = out.iterations;
                out.graph
            }
            Approach::Optimal => {
                optimal_graph(&sc.ctx, cfg.optimal_objective, &sc.missing)?
            }
        };
        debug_assert!(graph.is_valid());

        let before = self.total_possessed();

        // Phase III: V2V attempts resolved against ground truth, then RSU
        // deliveries on the authorized band. All transfers read the
        // slot-start holdings, so a packet cannot be forwarded in the slot
        // it arrives.
        let planned = plan_transmissions(&graph, &sc);
        let outcomes = resolve_collisions(&planned, &sc.truth, &sc.neighbors);
        for (tx, ok) in planned.iter().zip(&outcomes) {
            if !*ok {
                continue;
            }
            for p in possessed[tx.tx].useful_to(&possessed[tx.rx], tx.budget) {
                self.obus[tx.rx].possessed.insert(p);
            }
        }

        let rsu_budget = (cfg.r0 * cfg.slot_t / cfg.packet_size).floor() as usize;
        if rsu_budget > 0 {
            let m = cfg.m_packets;
            let window_start = ((t - 1) as usize * rsu_budget) % m;
            for i in 0..cfg.n_obus {
                if graph.in_edge(i) != Some(Node::Rsu) || sc.ctx.v2r_capacity[i] <= cfg.r0 {
                    continue;
                }
                for off in 0..rsu_budget.min(m) {
                    let p = (window_start + off) % m;
                    self.obus[i].possessed.insert(p);
                }
            }
        }

        self.carried_graph = graph;
        let after = self.total_possessed();
        let metrics = SlotMetrics {
            slot: self.slot,
            total_possessed: after,
            throughput: after - before,
            formation_iters,
        };
        self.metrics.push(metrics);
        Ok(metrics)
    }

    pub fn into_series(self) -> MetricsSeries {
        MetricsSeries {
            approach: self.approach,
            seed: self.seed,
            n_obus: self.cfg.n_obus,
            slots: self.metrics,
        }
    }
}

/// Runs a full scenario of `slots` slots. Deterministic in all arguments.
pub fn run_scenario(
    cfg: &Config,
    approach: Approach,
    seed: u64,
    slots: u32,
) -> Result<MetricsSeries, EngineError> {
    let mut sim = Simulation::new(cfg, approach, seed)?;
    for _ in 0..slots {
        sim.step()?;
    }
    Ok(sim.into_series())
}
