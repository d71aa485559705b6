//! The coalitional graph game: transmission graph, graph-based utilities,
//! feasible strategies, local best responses, and the convergent
//! network-formation dynamics.
//!
//! Nodes are the OBUs plus the RSU. Each OBU carries at most one inbound
//! and one outbound edge; the RSU broadcasts to any number of OBUs and
//! never receives. An OBU's strategy is the pair (inbound source, outbound
//! target); rewiring removes its old edges and installs the new ones, so a
//! partner can lose an edge unilaterally, but *gaining* a new partner
//! requires that partner's consent (its utility must not drop) and a free
//! degree slot in the requested direction.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;

/// A vertex of the transmission graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    /// OBUs order before the RSU in the strategy tie-break.
    Obu(usize),
    Rsu,
}

/// One OBU's link state: where it receives from and whom it transmits to.
/// `None` means no edge in that direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Strategy {
    pub inbound: Option<Node>,
    pub outbound: Option<usize>,
}

impl Strategy {
    pub const IDLE: Strategy = Strategy {
        inbound: None,
        outbound: None,
    };

    /// Fixed total order used for deterministic tie-breaking: an absent
    /// edge sorts at the owner's own id, the RSU after all OBUs.
    fn order_key(&self, owner: usize, n: usize) -> (usize, usize) {
        let a = match self.inbound {
            Some(Node::Obu(j)) => j,
            Some(Node::Rsu) => n,
            None => owner,
        };
        let b = self.outbound.unwrap_or(owner);
        (a, b)
    }
}

/// Directed transmission graph over {RSU} + OBUs with unit in/out degree
/// caps on every OBU.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransmissionGraph {
    in_edge: Vec<Option<Node>>,
    out_edge: Vec<Option<usize>>,
}

impl TransmissionGraph {
    pub fn empty(n_obus: usize) -> Self {
        TransmissionGraph {
            in_edge: vec![None; n_obus],
            out_edge: vec![None; n_obus],
        }
    }

    pub fn n_obus(&self) -> usize {
        self.in_edge.len()
    }

    /// Transmitter feeding OBU `i`, if any.
    pub fn in_edge(&self, i: usize) -> Option<Node> {
        self.in_edge[i]
    }

    /// OBU that `i` transmits to, if any.
    pub fn out_edge(&self, i: usize) -> Option<usize> {
        self.out_edge[i]
    }

    pub fn strategy_of(&self, i: usize) -> Strategy {
        Strategy {
            inbound: self.in_edge[i],
            outbound: self.out_edge[i],
        }
    }

    /// All edges as (source, destination OBU) pairs, deterministic order.
    pub fn edges(&self) -> Vec<(Node, usize)> {
        self.in_edge
            .iter()
            .enumerate()
            .filter_map(|(i, e)| e.map(|src| (src, i)))
            .collect()
    }

    pub fn rsu_out_degree(&self) -> usize {
        self.in_edge
            .iter()
            .filter(|e| **e == Some(Node::Rsu))
            .count()
    }

    /// Graph-validity check for OBU `i` adopting strategy `s`: partners must
    /// be free in the requested direction (or already linked with `i`), no
    /// self-loops, and nobody transmits to the RSU.
    pub fn can_apply(&self, i: usize, s: Strategy) -> bool {
        match s.inbound {
            Some(Node::Obu(j)) => {
                if j == i {
                    return false;
                }
                if !(self.out_edge[j].is_none() || self.out_edge[j] == Some(i)) {
                    return false;
                }
            }
            Some(Node::Rsu) | None => {}
        }
        if let Some(b) = s.outbound {
            if b == i {
                return false;
            }
            if !(self.in_edge[b].is_none() || self.in_edge[b] == Some(Node::Obu(i))) {
                return false;
            }
        }
        true
    }

    /// Rewires OBU `i` to strategy `s`: its old inbound and outbound edges
    /// are removed and the new ones installed.
    pub fn apply(&mut self, i: usize, s: Strategy) {
        debug_assert!(self.can_apply(i, s));
        if let Some(Node::Obu(j)) = self.in_edge[i] {
            self.out_edge[j] = None;
        }
        self.in_edge[i] = None;
        if let Some(b) = self.out_edge[i] {
            self.in_edge[b] = None;
            self.out_edge[i] = None;
        }
        match s.inbound {
            Some(Node::Obu(j)) => {
                self.out_edge[j] = Some(i);
                self.in_edge[i] = Some(Node::Obu(j));
            }
            Some(Node::Rsu) => self.in_edge[i] = Some(Node::Rsu),
            None => {}
        }
        if let Some(b) = s.outbound {
            self.in_edge[b] = Some(Node::Obu(i));
            self.out_edge[i] = Some(b);
        }
    }

    /// Structural invariants: degree caps, edge consistency, no self-loops.
    pub fn is_valid(&self) -> bool {
        let n = self.n_obus();
        for i in 0..n {
            match self.in_edge[i] {
                Some(Node::Obu(j)) => {
                    if j == i || j >= n || self.out_edge[j] != Some(i) {
                        return false;
                    }
                }
                Some(Node::Rsu) | None => {}
            }
            if let Some(b) = self.out_edge[i] {
                if b == i || b >= n || self.in_edge[b] != Some(Node::Obu(i)) {
                    return false;
                }
            }
        }
        true
    }
}

/// Per-OBU usage counts of strategies within one formation run.
#[derive(Clone, Debug, Default)]
pub struct HistoryTable {
    counts: Vec<HashMap<Strategy, u32>>,
}

impl HistoryTable {
    pub fn new(n_obus: usize) -> Self {
        HistoryTable {
            counts: vec![HashMap::new(); n_obus],
        }
    }

    pub fn count(&self, i: usize, s: &Strategy) -> u32 {
        self.counts[i].get(s).copied().unwrap_or(0)
    }

    pub fn bump(&mut self, i: usize, s: Strategy) {
        *self.counts[i].entry(s).or_insert(0) += 1;
    }
}

/// Everything the utility function needs about the current slot: packet
/// holdings, neighborhoods, per-link rates, success probabilities, and the
/// pricing constants.
#[derive(Clone, Debug)]
pub struct GameContext {
    pub n_obus: usize,
    /// |N_i| for every OBU.
    pub neighbor_count: Vec<usize>,
    /// V2R capacity c_i, bits/s.
    pub v2r_capacity: Vec<f64>,
    /// `best_rate[i][j]`: best effective V2V rate from i to j over i's
    /// believed-free channels, bits/s. Zero when no channel or no line of
    /// sight is available.
    pub best_rate: Vec<Vec<f64>>,
    /// Success probability of a transmission *received by* OBU j.
    pub p_success_rx: Vec<f64>,
    /// `useful[i][j]`: number of packets i holds that j still misses.
    pub useful: Vec<Vec<u32>>,
    pub gamma_in: f64,
    pub gamma_out: f64,
    pub gamma_cost: f64,
    pub slot_t: f64,
    pub packet_size: f64,
    /// RSU broadcast rate, bits/s; receiving from the RSU is useful only
    /// above this capacity.
    pub r0: f64,
}

impl GameContext {
    /// Converts a link rate into packets deliverable within one slot.
    pub fn packets_per_slot(&self, rate: f64) -> f64 {
        rate * self.slot_t / self.packet_size
    }
}

/// Graph-based utility of OBU `i`: received-packet benefit plus
/// transmitted-packet benefit minus the interference cost of the occupied
/// links. Receiving from the RSU is priced on the V2R link capacity and
/// carries no interference cost.
pub fn utility(i: usize, g: &TransmissionGraph, ctx: &GameContext) -> f64 {
    let mut u = 0.0;
    let mut inbound_from_obu: Option<usize> = None;
    match g.in_edge(i) {
        Some(Node::Obu(j)) => {
            inbound_from_obu = Some(j);
            let cap = ctx.packets_per_slot(ctx.best_rate[j][i]);
            let useful = ctx.useful[j][i] as f64;
            u += ctx.gamma_in * ctx.p_success_rx[i] * cap.min(useful);
        }
        Some(Node::Rsu) => {
            u += ctx.gamma_in * ctx.packets_per_slot(ctx.v2r_capacity[i]);
        }
        None => {}
    }
    let mut out_degree = 0.0;
    if let Some(b) = g.out_edge(i) {
        out_degree = 1.0;
        let cap = ctx.packets_per_slot(ctx.best_rate[i][b]);
        let useful = ctx.useful[i][b] as f64;
        u += ctx.gamma_out * ctx.p_success_rx[b] * cap.min(useful);
    }
    let mut cost = ctx.gamma_cost * out_degree * ctx.neighbor_count[i] as f64;
    if let Some(j) = inbound_from_obu {
        cost += ctx.gamma_cost * ctx.neighbor_count[j] as f64;
    }
    u - cost
}

/// Feasible strategies of OBU `i` per the consent rules, before the
/// history constraint: the move must not hurt the mover, and any *new*
/// OBU partner must weakly gain.
pub fn feasible_unpruned(
    i: usize,
    g: &TransmissionGraph,
    ctx: &GameContext,
) -> Vec<Strategy> {
    let n = g.n_obus();
    let current = g.strategy_of(i);
    let u_self = utility(i, g, ctx);
    let mut inbound_options: Vec<Option<Node>> = Vec::with_capacity(n + 1);
    inbound_options.push(None);
    inbound_options.push(Some(Node::Rsu));
    inbound_options.extend((0..n).filter(|&j| j != i).map(|j| Some(Node::Obu(j))));
    let mut outbound_options: Vec<Option<usize>> = Vec::with_capacity(n);
    outbound_options.push(None);
    outbound_options.extend((0..n).filter(|&j| j != i).map(Some));

    let mut feasible = Vec::new();
    for &inbound in &inbound_options {
        for &outbound in &outbound_options {
            let s = Strategy { inbound, outbound };
            if !g.can_apply(i, s) {
                continue;
            }
            let mut g2 = g.clone();
            g2.apply(i, s);
            if utility(i, &g2, ctx) < u_self {
                continue;
            }
            if let Some(Node::Obu(j)) = s.inbound {
                if current.inbound != Some(Node::Obu(j))
                    && utility(j, &g2, ctx) < utility(j, g, ctx)
                {
                    continue;
                }
            }
            if let Some(b) = s.outbound {
                if current.outbound != Some(b) && utility(b, &g2, ctx) < utility(b, g, ctx) {
                    continue;
                }
            }
            feasible.push(s);
        }
    }
    feasible
}

/// Feasible strategies after removing those whose usage count reached the
/// history threshold.
pub fn feasible_strategies(
    i: usize,
    g: &TransmissionGraph,
    hist: &HistoryTable,
    sigma: u32,
    ctx: &GameContext,
) -> Vec<Strategy> {
    feasible_unpruned(i, g, ctx)
        .into_iter()
        .filter(|s| hist.count(i, s) < sigma)
        .collect()
}

/// Strategy in `feasible` maximizing the mover's utility. Ties keep the
/// current strategy when it is in the running, otherwise the lowest pair
/// in the fixed node order. Falls back to the current strategy when the
/// feasible set is empty.
pub fn local_best_response(
    i: usize,
    feasible: &[Strategy],
    g: &TransmissionGraph,
    ctx: &GameContext,
) -> Strategy {
    let n = g.n_obus();
    let current = g.strategy_of(i);
    let mut best: Option<(f64, Strategy)> = None;
    for &s in feasible {
        let mut g2 = g.clone();
        g2.apply(i, s);
        let u = utility(i, &g2, ctx);
        let better = match best {
            None => true,
            Some((bu, bs)) => {
                if u != bu {
                    u > bu
                } else if (s == current) != (bs == current) {
                    s == current
                } else {
                    s.order_key(i, n) < bs.order_key(i, n)
                }
            }
        };
        if better {
            best = Some((u, s));
        }
    }
    best.map(|(_, s)| s).unwrap_or(current)
}

/// Result of one network-formation run.
#[derive(Clone, Debug)]
pub struct FormationOutcome {
    pub graph: TransmissionGraph,
    /// Total OBU updates performed.
    pub iterations: u64,
    /// Full random-priority rounds executed.
    pub rounds: u32,
    /// True when the history constraint ever removed a strategy that would
    /// have strictly improved its owner's utility.
    pub pruned_improving: bool,
}

/// Conservative lower bound on the theoretical iteration ceiling
/// |graphs| * N * (sigma + 1): the RSU-edge subsets alone give 2^N distinct
/// valid graphs.
fn iteration_ceiling(n_obus: usize, sigma: u32) -> u64 {
    let graphs = 1u64.checked_shl(n_obus.min(62) as u32).unwrap_or(u64::MAX);
    graphs
        .saturating_mul(n_obus as u64)
        .saturating_mul(sigma as u64 + 1)
}

/// Myopic best-response dynamics with the strategy-history constraint.
///
/// Rounds visit every OBU in a fresh random order; each visited OBU adopts
/// its local best response among history-admissible feasible strategies
/// and bumps that strategy's usage count. An OBU whose admissible set is
/// empty keeps its links without a count update. The run stops once a full
/// round changes no edge.
pub fn form_network<R: Rng + ?Sized>(
    g0: &TransmissionGraph,
    ctx: &GameContext,
    sigma: u32,
    rng: &mut R,
) -> FormationOutcome {
    form_network_observed(g0, ctx, sigma, rng, |_, _| {})
}

/// Like [`form_network`], invoking `observer(iteration, graph)` after every
/// OBU update for per-iteration trace capture.
pub fn form_network_observed<R, F>(
    g0: &TransmissionGraph,
    ctx: &GameContext,
    sigma: u32,
    rng: &mut R,
    mut observer: F,
) -> FormationOutcome
where
    R: Rng + ?Sized,
    F: FnMut(u64, &TransmissionGraph),
{
    let n = g0.n_obus();
    let mut g = g0.clone();
    let mut hist = HistoryTable::new(n);
    let mut iterations = 0u64;
    let mut rounds = 0u32;
    let mut pruned_improving = false;
    let ceiling = iteration_ceiling(n, sigma);
    let mut order: Vec<usize> = (0..n).collect();

    loop {
        order.shuffle(rng);
        rounds += 1;
        let mut changed = false;
        for &i in &order {
            let u_now = utility(i, &g, ctx);
            let all = feasible_unpruned(i, &g, ctx);
            let mut admissible = Vec::with_capacity(all.len());
            for s in all {
                if hist.count(i, &s) >= sigma {
                    if !pruned_improving {
                        let mut g2 = g.clone();
                        g2.apply(i, s);
                        if utility(i, &g2, ctx) > u_now {
                            pruned_improving = true;
                        }
                    }
                } else {
                    admissible.push(s);
                }
            }
            iterations += 1;
            assert!(
                iterations <= ceiling,
                "formation exceeded the iteration ceiling {ceiling}"
            );
            if !admissible.is_empty() {
                let chosen = local_best_response(i, &admissible, &g, ctx);
                hist.bump(i, chosen);
                if chosen != g.strategy_of(i) {
                    g.apply(i, chosen);
                    changed = true;
                }
            }
            observer(iterations, &g);
        }
        if !changed {
            break;
        }
    }
    debug_assert!(g.is_valid());
    FormationOutcome {
        graph: g,
        iterations,
        rounds,
        pruned_improving,
    }
}

/// True when no OBU has a feasible strategy (ignoring history counts) that
/// strictly improves its own utility.
pub fn is_local_nash(g: &TransmissionGraph, ctx: &GameContext) -> bool {
    for i in 0..g.n_obus() {
        let u_now = utility(i, g, ctx);
        for s in feasible_unpruned(i, g, ctx) {
            let mut g2 = g.clone();
            g2.apply(i, s);
            if utility(i, &g2, ctx) > u_now {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::stream;

    /// Context with hand-set link quantities. `rate_pkts[i][j]` is the
    /// per-slot packet capacity of link i->j (slot length and packet size
    /// are 1, so rates equal packet counts).
    fn ctx_from(
        neighbor_count: Vec<usize>,
        v2r_pkts: Vec<f64>,
        rate_pkts: Vec<Vec<f64>>,
        p_rx: Vec<f64>,
        useful: Vec<Vec<u32>>,
    ) -> GameContext {
        let n = neighbor_count.len();
        assert_eq!(v2r_pkts.len(), n);
        GameContext {
            n_obus: n,
            neighbor_count,
            v2r_capacity: v2r_pkts,
            best_rate: rate_pkts,
            p_success_rx: p_rx,
            useful,
            gamma_in: 1.0,
            gamma_out: 0.5,
            gamma_cost: 0.1,
            slot_t: 1.0,
            packet_size: 1.0,
            r0: 0.0,
        }
    }

    fn zero_ctx(n: usize) -> GameContext {
        ctx_from(
            vec![0; n],
            vec![0.0; n],
            vec![vec![0.0; n]; n],
            vec![1.0; n],
            vec![vec![0; n]; n],
        )
    }

    #[test]
    fn isolated_node_has_zero_utility() {
        let ctx = zero_ctx(3);
        let g = TransmissionGraph::empty(3);
        for i in 0..3 {
            assert_eq!(utility(i, &g, &ctx), 0.0);
        }
    }

    #[test]
    fn inbound_edge_worked_example() {
        // j=0 transmits to i=1: P=0.5, rate 5 pkts, 3 useful, |N_0|=4,
        // no outbound at i. Utility = 0.5*min(5,3) - 0.1*4 = 1.1.
        let mut rate = vec![vec![0.0; 2]; 2];
        rate[0][1] = 5.0;
        let mut useful = vec![vec![0; 2]; 2];
        useful[0][1] = 3;
        let ctx = ctx_from(
            vec![4, 2],
            vec![0.0, 0.0],
            rate,
            vec![0.5, 0.5],
            useful,
        );
        let mut g = TransmissionGraph::empty(2);
        g.apply(
            1,
            Strategy {
                inbound: Some(Node::Obu(0)),
                outbound: None,
            },
        );
        assert!((utility(1, &g, &ctx) - 1.1).abs() < 1e-12);
    }

    #[test]
    fn rsu_inbound_worked_example() {
        // c_i corresponds to 5 packets per slot, no outbound, no cost.
        let ctx = ctx_from(
            vec![3],
            vec![5.0],
            vec![vec![0.0]],
            vec![1.0],
            vec![vec![0]],
        );
        let mut g = TransmissionGraph::empty(1);
        g.apply(
            0,
            Strategy {
                inbound: Some(Node::Rsu),
                outbound: None,
            },
        );
        assert!((utility(0, &g, &ctx) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn graph_rejects_self_loops_stealing_and_rsu_targets() {
        let g = TransmissionGraph::empty(3);
        assert!(!g.can_apply(
            0,
            Strategy {
                inbound: Some(Node::Obu(0)),
                outbound: None
            }
        ));
        assert!(!g.can_apply(
            0,
            Strategy {
                inbound: None,
                outbound: Some(0)
            }
        ));
        let mut g = g;
        g.apply(
            1,
            Strategy {
                inbound: Some(Node::Obu(2)),
                outbound: None,
            },
        );
        // 2 already transmits to 1, so 0 cannot take 2 as transmitter...
        assert!(!g.can_apply(
            0,
            Strategy {
                inbound: Some(Node::Obu(2)),
                outbound: None
            }
        ));
        // ...and nobody may transmit to 1 while its inbound slot is taken.
        assert!(!g.can_apply(
            0,
            Strategy {
                inbound: None,
                outbound: Some(1)
            }
        ));
        assert!(g.is_valid());
    }

    #[test]
    fn apply_rewires_both_endpoints() {
        let mut g = TransmissionGraph::empty(4);
        g.apply(
            1,
            Strategy {
                inbound: Some(Node::Obu(0)),
                outbound: Some(2),
            },
        );
        assert_eq!(g.out_edge(0), Some(1));
        assert_eq!(g.in_edge(2), Some(Node::Obu(1)));
        // Rewiring 1 away releases both old partners.
        g.apply(
            1,
            Strategy {
                inbound: Some(Node::Rsu),
                outbound: Some(3),
            },
        );
        assert_eq!(g.out_edge(0), None);
        assert_eq!(g.in_edge(2), None);
        assert_eq!(g.in_edge(1), Some(Node::Rsu));
        assert_eq!(g.in_edge(3), Some(Node::Obu(1)));
        assert!(g.is_valid());
        assert_eq!(g.rsu_out_degree(), 1);
    }

    #[test]
    fn noop_is_always_feasible_until_history_prunes_it() {
        let ctx = zero_ctx(2);
        let g = TransmissionGraph::empty(2);
        let mut hist = HistoryTable::new(2);
        let noop = Strategy::IDLE;
        assert!(feasible_strategies(0, &g, &hist, 2, &ctx).contains(&noop));
        hist.bump(0, noop);
        hist.bump(0, noop);
        // Count reached sigma: the no-op is filtered out.
        assert!(!feasible_strategies(0, &g, &hist, 2, &ctx).contains(&noop));
    }

    #[test]
    fn rsu_attachment_needs_no_consent() {
        // The RSU option must appear feasible whenever it helps the mover.
        let ctx = ctx_from(
            vec![0, 0],
            vec![4.0, 0.0],
            vec![vec![0.0; 2]; 2],
            vec![1.0, 1.0],
            vec![vec![0; 2]; 2],
        );
        let g = TransmissionGraph::empty(2);
        let feas = feasible_unpruned(0, &g, &ctx);
        assert!(feas.contains(&Strategy {
            inbound: Some(Node::Rsu),
            outbound: None
        }));
    }

    #[test]
    fn consent_blocks_moves_that_hurt_new_partners() {
        // OBU 0 wants to transmit to 1, but serving costs 1 more than the
        // transmit benefit, so 1's consent check is irrelevant; flip it:
        // 0 serving 1 helps 0 but drops 1's utility (1 pays the inbound
        // interference cost and gains nothing).
        let mut rate = vec![vec![0.0; 2]; 2];
        rate[0][1] = 10.0;
        let mut useful = vec![vec![0; 2]; 2];
        useful[0][1] = 0; // nothing useful: receiver gains no benefit
        let ctx = ctx_from(vec![5, 5], vec![0.0, 0.0], rate, vec![1.0, 1.0], useful);
        let g = TransmissionGraph::empty(2);
        let feas = feasible_unpruned(0, &g, &ctx);
        // The edge 0->1 costs receiver 1 the inbound term 0.1*|N_0| with no
        // benefit, so it must not be feasible for 0.
        assert!(!feas.contains(&Strategy {
            inbound: None,
            outbound: Some(1)
        }));
    }

    #[test]
    fn best_response_prefers_current_on_ties() {
        let ctx = zero_ctx(3);
        let g = TransmissionGraph::empty(3);
        let feas = feasible_unpruned(0, &g, &ctx);
        // All zero-utility strategies tie; the current no-op must win.
        let s = local_best_response(0, &feas, &g, &ctx);
        assert_eq!(s, Strategy::IDLE);
    }

    /// Brute-force argmax over the entire strategy space, written
    /// independently of `feasible_unpruned` / `local_best_response`.
    fn exhaustive_best(i: usize, g: &TransmissionGraph, ctx: &GameContext) -> (f64, Strategy) {
        let n = g.n_obus();
        let current = g.strategy_of(i);
        let mut best_u = f64::NEG_INFINITY;
        let mut best_s = current;
        let mut consider = |s: Strategy| {
            if !g.can_apply(i, s) {
                return;
            }
            let mut g2 = g.clone();
            g2.apply(i, s);
            if utility(i, &g2, ctx) < utility(i, g, ctx) {
                return;
            }
            if let Some(Node::Obu(j)) = s.inbound {
                if s.inbound != current.inbound && utility(j, &g2, ctx) < utility(j, g, ctx) {
                    return;
                }
            }
            if let Some(b) = s.outbound {
                if current.outbound != Some(b) && utility(b, &g2, ctx) < utility(b, g, ctx) {
                    return;
                }
            }
            let u = utility(i, &g2, ctx);
            if u > best_u {
                best_u = u;
                best_s = s;
            }
        };
        let mut ins: Vec<Option<Node>> = vec![None, Some(Node::Rsu)];
        ins.extend((0..n).filter(|&j| j != i).map(|j| Some(Node::Obu(j))));
        let mut outs: Vec<Option<usize>> = vec![None];
        outs.extend((0..n).filter(|&j| j != i).map(Some));
        for &a in &ins {
            for &b in &outs {
                consider(Strategy {
                    inbound: a,
                    outbound: b,
                });
            }
        }
        (best_u, best_s)
    }

    fn random_ctx(n: usize, seed: u64) -> GameContext {
        let mut rng = stream(seed, "game-random-ctx", &[n as u64]);
        let neighbor_count: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let v2r: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.3) {
                    rng.gen_range(0.0..8.0)
                } else {
                    rng.gen_range(0.0..0.01)
                }
            })
            .collect();
        let rate: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..n)
                    .map(|_| {
                        if rng.gen_bool(0.5) {
                            rng.gen_range(0.0..12.0)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
        let useful: Vec<Vec<u32>> = (0..n)
            .map(|_| (0..n).map(|_| rng.gen_range(0..9)).collect())
            .collect();
        ctx_from(neighbor_count, v2r, rate, p, useful)
    }

    #[test]
    fn three_obu_line_best_response_matches_exhaustive_argmax() {
        // One packet holder in a 3-OBU line, equal rates everywhere.
        let mut rate = vec![vec![4.0; 3]; 3];
        for (i, row) in rate.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        let mut useful = vec![vec![0; 3]; 3];
        useful[0][1] = 4;
        useful[0][2] = 4;
        let ctx = ctx_from(
            vec![1, 2, 1],
            vec![0.0; 3],
            rate,
            vec![0.9, 0.9, 0.9],
            useful,
        );
        let g = TransmissionGraph::empty(3);
        for i in 0..3 {
            let feas = feasible_unpruned(i, &g, &ctx);
            let mine = local_best_response(i, &feas, &g, &ctx);
            let (best_u, _) = exhaustive_best(i, &g, &ctx);
            let mut g2 = g.clone();
            g2.apply(i, mine);
            assert!((utility(i, &g2, &ctx) - best_u).abs() < 1e-12, "obu {i}");
        }
    }

    #[test]
    fn best_response_matches_exhaustive_argmax_on_random_instances() {
        for seed in 0..60u64 {
            let n = 2 + (seed % 5) as usize;
            let ctx = random_ctx(n, seed);
            let mut rng = stream(seed, "game-random-graph", &[]);
            let mut g = TransmissionGraph::empty(n);
            // Random valid starting graph via random strategy applications.
            for _ in 0..n {
                let i = rng.gen_range(0..n);
                let feas = feasible_unpruned(i, &g, &ctx);
                if !feas.is_empty() {
                    let s = feas[rng.gen_range(0..feas.len())];
                    g.apply(i, s);
                }
            }
            assert!(g.is_valid());
            for i in 0..n {
                let feas = feasible_unpruned(i, &g, &ctx);
                let mine = local_best_response(i, &feas, &g, &ctx);
                let (best_u, _) = exhaustive_best(i, &g, &ctx);
                let mut g2 = g.clone();
                g2.apply(i, mine);
                assert!(
                    (utility(i, &g2, &ctx) - best_u).abs() < 1e-9,
                    "seed {seed} obu {i}"
                );
            }
        }
    }

    #[test]
    fn feasible_moves_never_hurt_mover_or_new_partners() {
        for seed in 100..140u64 {
            let n = 3 + (seed % 4) as usize;
            let ctx = random_ctx(n, seed);
            let mut rng = stream(seed, "game-feasible-check", &[]);
            let mut g = TransmissionGraph::empty(n);
            for _ in 0..2 * n {
                let i = rng.gen_range(0..n);
                let feas = feasible_unpruned(i, &g, &ctx);
                if feas.is_empty() {
                    continue;
                }
                let s = feas[rng.gen_range(0..feas.len())];
                let current = g.strategy_of(i);
                let mut g2 = g.clone();
                g2.apply(i, s);
                assert!(utility(i, &g2, &ctx) >= utility(i, &g, &ctx));
                if let Some(Node::Obu(j)) = s.inbound {
                    if current.inbound != Some(Node::Obu(j)) {
                        assert!(utility(j, &g2, &ctx) >= utility(j, &g, &ctx));
                    }
                }
                if let Some(b) = s.outbound {
                    if current.outbound != Some(b) {
                        assert!(utility(b, &g2, &ctx) >= utility(b, &g, &ctx));
                    }
                }
                g = g2;
                assert!(g.is_valid());
            }
        }
    }

    #[test]
    fn single_obu_converges_to_rsu_edge_when_it_pays() {
        let ctx = ctx_from(
            vec![0],
            vec![6.0],
            vec![vec![0.0]],
            vec![1.0],
            vec![vec![0]],
        );
        let mut rng = stream(5, "game-formation", &[0]);
        let out = form_network(&TransmissionGraph::empty(1), &ctx, 3, &mut rng);
        assert_eq!(out.graph.in_edge(0), Some(Node::Rsu));
        assert!(out.graph.is_valid());
        assert!(is_local_nash(&out.graph, &ctx));
    }

    #[test]
    fn identical_holdings_out_of_rsu_range_keep_the_empty_graph() {
        // No useful packets anywhere and negligible RSU capacity: every
        // link costs more than it earns except the free RSU edge, which
        // still pays epsilon > 0, so allow literally zero capacity.
        let n = 4;
        let ctx = ctx_from(
            vec![3; n],
            vec![0.0; n],
            vec![vec![7.0; n]; n],
            vec![0.9; n],
            vec![vec![0; n]; n],
        );
        let mut rng = stream(6, "game-formation", &[1]);
        let out = form_network(&TransmissionGraph::empty(n), &ctx, 3, &mut rng);
        for i in 0..n {
            assert_eq!(out.graph.in_edge(i), None);
            assert_eq!(out.graph.out_edge(i), None);
        }
        assert!(is_local_nash(&out.graph, &ctx));
    }

    #[test]
    fn formation_outputs_are_local_nash_on_random_instances() {
        let mut checked = 0;
        for seed in 200..260u64 {
            let n = 2 + (seed % 5) as usize;
            let ctx = random_ctx(n, seed);
            let mut rng = stream(seed, "game-formation-nash", &[]);
            let out = form_network(&TransmissionGraph::empty(n), &ctx, 3, &mut rng);
            assert!(out.graph.is_valid(), "seed {seed}");
            assert!(out.rounds >= 1);
            if !out.pruned_improving {
                assert!(is_local_nash(&out.graph, &ctx), "seed {seed}");
                checked += 1;
            }
        }
        assert!(checked >= 50, "only {checked} unpruned instances");
    }

    #[test]
    fn formation_never_decreases_mover_utility_along_the_run() {
        // Graph validity is preserved by every update and the final graphs
        // stay within degree caps across seeds.
        for seed in 300..330u64 {
            let n = 5;
            let ctx = random_ctx(n, seed);
            let mut rng = stream(seed, "game-formation-valid", &[]);
            let out = form_network(&TransmissionGraph::empty(n), &ctx, 3, &mut rng);
            assert!(out.graph.is_valid());
            let ceiling = 2u64.pow(n as u32) * n as u64 * 4;
            assert!(out.iterations <= ceiling);
        }
    }

    #[test]
    fn observer_sees_every_iteration_and_the_final_graph() {
        let ctx = random_ctx(5, 555);
        let mut rng = stream(7, "game-observer", &[]);
        let mut seen = Vec::new();
        let out = form_network_observed(
            &TransmissionGraph::empty(5),
            &ctx,
            3,
            &mut rng,
            |it, g| {
                assert!(g.is_valid());
                seen.push((it, g.clone()));
            },
        );
        assert_eq!(seen.len() as u64, out.iterations);
        for (k, (it, _)) in seen.iter().enumerate() {
            assert_eq!(*it, k as u64 + 1);
        }
        assert_eq!(seen.last().unwrap().1, out.graph);
    }

    #[test]
    fn empty_graph_is_nash_when_every_edge_hurts_someone() {
        let n = 3;
        // High cost, useless packets: every move strictly hurts someone.
        let mut ctx = random_ctx(n, 999);
        ctx.useful = vec![vec![0; n]; n];
        ctx.v2r_capacity = vec![0.0; n];
        ctx.neighbor_count = vec![2; n];
        let g = TransmissionGraph::empty(n);
        assert!(is_local_nash(&g, &ctx));
        // Now give OBU 0 a strictly better option: serving 1 for free.
        ctx.useful[0][1] = 50;
        ctx.neighbor_count = vec![0; n];
        assert!(!is_local_nash(&g, &ctx));
    }
}
