//! Checks over BG-simulation traces: per-(round, i) agreement on resolved
//! states, replay validity of the simulated full-information execution,
//! determinism of the proposed updates, and the crash blocking bound.

use std::collections::{BTreeMap, BTreeSet};

use crate::bgsim::{latest_round, latest_views, parse_triple, sa_grid_path, BG_SET_PATH};
use crate::sim::{EventKind, ObjectId, OpKind, RetVal, Trace};
use crate::value::{ValueArena, Vid};

use super::agreement::sa_ops;
use super::Violation;

/// Outcome of the simulation checks.
#[derive(Clone, Debug, Default, serde::Serialize)]
pub struct BgSimReport {
    /// Unique agreed state per (round, i) that resolved non-⊥.
    pub agreed_states: usize,
    pub blocked_columns: usize,
    pub crashed_simulators: usize,
    pub violations: Vec<Violation>,
}

impl BgSimReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn grid_of(path: &[i64]) -> Option<(i64, usize)> {
    match path {
        [round, i] => Some((*round, *i as usize)),
        _ => None,
    }
}

/// Runs every BG-simulation trace check.
pub fn check_bg_simulation(trace: &Trace, arena: &mut ValueArena) -> BgSimReport {
    let n = trace.n;
    let mut report = BgSimReport::default();
    let ops = sa_ops(trace);
    let crashed: BTreeSet<u32> = trace.crashed_actors().into_iter().collect();
    report.crashed_simulators = crashed.len();

    // Agreed state per grid cell; also the per-(round,i) agreement check.
    let mut agreed: BTreeMap<(i64, usize), Vid> = BTreeMap::new();
    for (path, resolves) in &ops.resolves {
        let Some(cell) = grid_of(path) else { continue };
        let distinct: BTreeSet<Vid> = resolves
            .iter()
            .filter_map(|r| match r.ret {
                Some(RetVal::Val(v)) if !arena.is_bottom(v) => Some(v),
                _ => None,
            })
            .collect();
        if distinct.len() > 1 {
            report.violations.push(Violation::new(
                "grid-agreement",
                format!(
                    "SA[{},{}] resolved {} distinct states",
                    cell.0,
                    cell.1,
                    distinct.len()
                ),
            ));
        }
        if let Some(&state) = distinct.iter().next() {
            agreed.insert(cell, state);
        }
    }
    report.agreed_states = agreed.len();

    // Triples added to the shared set must carry the agreed state of their
    // cell.
    for ev in &trace.events {
        if ev.kind == EventKind::Invoke
            && ev.op == OpKind::Add
            && ev.object == ObjectId::LogicalSet(BG_SET_PATH.to_vec())
        {
            match parse_triple(arena, ev.args[0]) {
                Some((i, state, round)) => {
                    if agreed.get(&(round, i)) != Some(&state) {
                        report.violations.push(
                            Violation::new(
                                "triple-state",
                                format!(
                                    "triple for P_{i} round {round} does not match the agreed state"
                                ),
                            )
                            .with_window(ev.step, ev.step),
                        );
                    }
                }
                None => report.violations.push(Violation::new(
                    "triple-shape",
                    format!("malformed triple at step {}", ev.step),
                )),
            }
        }
    }

    // Shared-set get results, in trace order per actor, and globally for the
    // comparability check.
    let mut gets: Vec<(u32, usize, Vid)> = Vec::new();
    {
        let mut stacks: BTreeMap<u32, Vec<Option<usize>>> = BTreeMap::new();
        for (pos, ev) in trace.events.iter().enumerate() {
            match ev.kind {
                EventKind::Invoke => {
                    let slot = (ev.op == OpKind::Get
                        && ev.object == ObjectId::LogicalSet(BG_SET_PATH.to_vec()))
                    .then_some(pos);
                    stacks.entry(ev.actor).or_default().push(slot);
                }
                EventKind::Respond => {
                    if let Some(Some(_)) = stacks.entry(ev.actor).or_default().pop() {
                        if let Some(RetVal::Val(v)) = ev.ret {
                            gets.push((ev.actor, pos, v));
                        }
                    }
                }
                _ => {}
            }
        }
    }

    // Simulated scans are totally ordered: get results pairwise comparable
    // under containment.
    for i in 0..gets.len() {
        for j in (i + 1)..gets.len() {
            let (a, b) = (gets[i].2, gets[j].2);
            if !(arena.set_is_subset(a, b) || arena.set_is_subset(b, a)) {
                report.violations.push(Violation::new(
                    "scan-order",
                    format!(
                        "shared-set views of actors {} and {} are incomparable",
                        gets[i].0, gets[j].0
                    ),
                ));
            }
        }
    }

    // Determinism of updates: each proposed round-r state (r >= 1) must be
    // latest_views of the proposer's preceding shared-set get, at round
    // latest_round + 1.
    for (path, proposes) in &ops.proposes {
        let Some((round, i)) = grid_of(path) else {
            continue;
        };
        if round == 0 {
            continue;
        }
        for p in proposes {
            let Some((_, _, snap)) = gets
                .iter()
                .filter(|&&(actor, pos, _)| actor == p.actor && pos < p.invoke_pos)
                .max_by_key(|&&(_, pos, _)| pos)
            else {
                report.violations.push(Violation::new(
                    "update-determinism",
                    format!(
                        "actor {} proposed to SA[{round},{i}] without a preceding shared-set get",
                        p.actor
                    ),
                ));
                continue;
            };
            let expect_state = latest_views(arena, *snap, n);
            let expect_round = latest_round(arena, *snap, i) + 1;
            if p.args[0] != expect_state || round != expect_round {
                report.violations.push(
                    Violation::new(
                        "update-determinism",
                        format!(
                            "propose by actor {} on SA[{round},{i}] is not the pure function of its last scan",
                            p.actor
                        ),
                    )
                    .with_window(p.invoke_step, p.invoke_step),
                );
            }
        }
    }

    // Proposed arrays only mention agreed states (or the placeholder).
    for (path, proposes) in &ops.proposes {
        let Some((round, _)) = grid_of(path) else {
            continue;
        };
        if round == 0 {
            continue;
        }
        for p in proposes {
            if let Some(comps) = arena.as_tuple(p.args[0]).map(<[Vid]>::to_vec) {
                for (j, comp) in comps.iter().enumerate() {
                    if arena.is_bottom(*comp) {
                        continue;
                    }
                    let known = agreed.iter().any(|(&(_, i), s)| i == j && s == comp);
                    if !known {
                        report.violations.push(Violation::new(
                            "component-state",
                            format!(
                                "component {j} of a proposed array is not an agreed state of P_{j}"
                            ),
                        ));
                    }
                }
            }
        }
    }

    // Decisions must be f of a terminal agreed state; that is checked at
    // the protocol level by the caller (it owns the simulated spec). Here:
    // blocking bound. A simulated process is crash-blocked when a simulator
    // died inside a propose on its column.
    let mut blocked: BTreeSet<usize> = BTreeSet::new();
    {
        // Per actor, the stack of open ops with objects.
        let mut open: BTreeMap<u32, Vec<(ObjectId, OpKind)>> = BTreeMap::new();
        for ev in &trace.events {
            match ev.kind {
                EventKind::Invoke => open
                    .entry(ev.actor)
                    .or_default()
                    .push((ev.object.clone(), ev.op)),
                EventKind::Respond => {
                    open.entry(ev.actor).or_default().pop();
                }
                EventKind::Crash => {
                    for (obj, op) in open.entry(ev.actor).or_default().iter() {
                        if *op == OpKind::Propose {
                            if let ObjectId::SafeAgreement(path) = obj {
                                if let Some((_, i)) = grid_of(path) {
                                    blocked.insert(i);
                                }
                            }
                        }
                    }
                }
                _ => {}
            }
        }
    }
    report.blocked_columns = blocked.len();
    if blocked.len() > crashed.len() {
        report.violations.push(Violation::new(
            "blocking-bound",
            format!(
                "{} blocked simulated processes exceed {} crashed simulators",
                blocked.len(),
                crashed.len()
            ),
        ));
    }

    // In truncated runs, columns without a mid-propose crash must not be
    // wedged: their highest proposed cell has a non-⊥ resolution, or a
    // complete propose, or a propose still open at a live simulator.
    if trace.truncated {
        let mut max_round: BTreeMap<usize, i64> = BTreeMap::new();
        for path in ops.proposes.keys() {
            if let Some((round, i)) = grid_of(path) {
                let e = max_round.entry(i).or_insert(round);
                *e = (*e).max(round);
            }
        }
        for (&i, &round) in &max_round {
            if blocked.contains(&i) {
                continue;
            }
            let cell = sa_grid_path(round, i);
            let resolved = agreed.contains_key(&(round, i));
            let proposes = &ops.proposes[&cell];
            let some_complete = proposes.iter().any(|p| p.is_complete());
            let some_live_open = proposes
                .iter()
                .any(|p| !p.is_complete() && !crashed.contains(&p.actor));
            if !(resolved || some_complete || some_live_open) {
                report.violations.push(Violation::new(
                    "column-wedged",
                    format!("column {i} stalled at round {round} with no crash to blame"),
                ));
            }
        }
    }

    report
}
