//! Comparison approaches: pure broadcasting, uncoordinated P2P, and exact
//! enumeration over all valid transmission graphs.

use crate::config::OptimalObjective;
use crate::game::{utility, GameContext, Node, Strategy, TransmissionGraph};
use rand::Rng;
use thiserror::Error;

/// Largest network the enumeration baseline accepts.
pub const MAX_ENUMERATION_OBUS: usize = 6;

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("enumeration supports at most {MAX_ENUMERATION_OBUS} OBUs, got {0}")]
    NetworkTooLarge(usize),
}

/// Pure broadcasting: the RSU feeds exactly the OBUs whose V2R capacity
/// clears the broadcast rate; no V2V link exists.
pub fn broadcast_only_graph(ctx: &GameContext) -> TransmissionGraph {
    let mut g = TransmissionGraph::empty(ctx.n_obus);
    for i in 0..ctx.n_obus {
        if ctx.v2r_capacity[i] > ctx.r0 {
            g.apply(
                i,
                Strategy {
                    inbound: Some(Node::Rsu),
                    outbound: None,
                },
            );
        }
    }
    g
}

/// Uncoordinated P2P: every OBU missing packets asks its neighborhood and a
/// uniformly random eligible responder (holds something useful, free
/// outbound slot) transmits to it. OBUs left without an inbound link take
/// the RSU when its capacity is useful.
///
/// Eligibility ignores the link rate on purpose: responders volunteer on
/// content alone, which is exactly the coordination failure this baseline
/// exhibits.
pub fn noncoop_graph<R: Rng + ?Sized>(
    ctx: &GameContext,
    neighbors: &[Vec<usize>],
    missing: &[u32],
    rng: &mut R,
) -> TransmissionGraph {
    let n = ctx.n_obus;
    let mut g = TransmissionGraph::empty(n);
    for i in 0..n {
        if missing[i] == 0 {
            continue;
        }
        let eligible: Vec<usize> = neighbors[i]
            .iter()
            .copied()
            .filter(|&j| ctx.useful[j][i] > 0 && g.out_edge(j).is_none())
            .collect();
        if eligible.is_empty() {
            continue;
        }
        let responder = eligible[rng.gen_range(0..eligible.len())];
        g.apply(
            i,
            Strategy {
                inbound: Some(Node::Obu(responder)),
                outbound: g.out_edge(i),
            },
        );
    }
    for i in 0..n {
        if g.in_edge(i).is_none() && ctx.v2r_capacity[i] > ctx.r0 {
            g.apply(
                i,
                Strategy {
                    inbound: Some(Node::Rsu),
                    outbound: g.out_edge(i),
                },
            );
        }
    }
    g
}

fn total_utility(g: &TransmissionGraph, ctx: &GameContext) -> f64 {
    (0..ctx.n_obus).map(|i| utility(i, g, ctx)).sum()
}

/// Expected packets delivered by the slot's graph: V2V links weighted by
/// their success probability, RSU links by the broadcast budget.
fn expected_packets(g: &TransmissionGraph, ctx: &GameContext, missing: &[u32]) -> f64 {
    let rsu_budget = (ctx.r0 * ctx.slot_t / ctx.packet_size).floor();
    let mut total = 0.0;
    for (src, i) in g.edges() {
        match src {
            Node::Obu(j) => {
                let pkts = ctx
                    .packets_per_slot(ctx.best_rate[j][i])
                    .floor()
                    .min(ctx.useful[j][i] as f64);
                total += ctx.p_success_rx[i] * pkts;
            }
            Node::Rsu if ctx.v2r_capacity[i] > ctx.r0 => {
                total += rsu_budget.min(missing[i] as f64);
            }
            Node::Rsu => {}
        }
    }
    total
}

/// Exhaustively maximizes the configured objective over every valid
/// transmission graph. Tractable only for small networks; larger ones are
/// rejected.
pub fn optimal_graph(
    ctx: &GameContext,
    objective: OptimalObjective,
    missing: &[u32],
) -> Result<TransmissionGraph, BaselineError> {
    let n = ctx.n_obus;
    if n > MAX_ENUMERATION_OBUS {
        return Err(BaselineError::NetworkTooLarge(n));
    }
    let score = |g: &TransmissionGraph| match objective {
        OptimalObjective::TotalUtility => total_utility(g, ctx),
        OptimalObjective::ExpectedPackets => expected_packets(g, ctx, missing),
    };

    let mut best: Option<(f64, TransmissionGraph)> = None;
    // V2V out-assignments are built recursively with in-degree conflicts
    // pruned; RSU edges then fill any free inbound slot where they score.
    let mut out_of: Vec<Option<usize>> = vec![None; n];
    let mut in_used = vec![false; n];

    fn recurse(
        i: usize,
        n: usize,
        out_of: &mut Vec<Option<usize>>,
        in_used: &mut Vec<bool>,
        score: &dyn Fn(&TransmissionGraph) -> f64,
        best: &mut Option<(f64, TransmissionGraph)>,
    ) {
        if i == n {
            let mut g = TransmissionGraph::empty(n);
            for (src, dst) in out_of.iter().enumerate() {
                if let Some(dst) = *dst {
                    g.apply(
                        src,
                        Strategy {
                            inbound: g.in_edge(src),
                            outbound: Some(dst),
                        },
                    );
                }
            }
            // Try the RSU on every free inbound slot, keeping it only when
            // it does not lower the score.
            for obu in 0..n {
                if g.in_edge(obu).is_some() {
                    continue;
                }
                let before = score(&g);
                let mut g2 = g.clone();
                g2.apply(
                    obu,
                    Strategy {
                        inbound: Some(Node::Rsu),
                        outbound: g.out_edge(obu),
                    },
                );
                if score(&g2) >= before {
                    g = g2;
                }
            }
            let s = score(&g);
            if best.as_ref().is_none_or(|(bs, _)| s > *bs) {
                *best = Some((s, g));
            }
            return;
        }
        // No outbound edge for OBU i.
        out_of[i] = None;
        recurse(i + 1, n, out_of, in_used, score, best);
        for j in 0..n {
            if j == i || in_used[j] {
                continue;
            }
            out_of[i] = Some(j);
            in_used[j] = true;
            recurse(i + 1, n, out_of, in_used, score, best);
            in_used[j] = false;
            out_of[i] = None;
        }
    }

    recurse(0, n, &mut out_of, &mut in_used, &score, &mut best);
    let (_, g) = best.expect("enumeration always visits the empty graph");
    debug_assert!(g.is_valid());
    Ok(g)
}

/// Sum of all per-OBU utilities; exposed for the optimality comparisons.
pub fn graph_total_utility(g: &TransmissionGraph, ctx: &GameContext) -> f64 {
    total_utility(g, ctx)
}
