//! Potential-function monitoring over weak-set traces.
//!
//! For a value v and a time τ, the monitored quantities are
//! - r_v(τ): processes whose next snapshot operation after τ is a scan;
//! - w_v(τ): processes whose next snapshot operation is an update that
//!   writes a view containing v, plus processes with no next snapshot
//!   operation at all (finished, crashed, or out of steps in this history);
//! - c_v(τ): registers containing v;
//! - α_v(τ) = r_v + w_v + c_v.
//!
//! Two facts keep the weak set safe and are checked here directly: once
//! α_v exceeds n it never decreases again, and from τ_v (the first time v
//! covers all registers) onward at least one register always contains v.
//! Both follow from r_v + w_v ≤ n, which the monitor also verifies.

use std::collections::HashMap;

use crate::sim::{EventKind, Trace};
use crate::value::{ValueArena, Vid};

use super::history::Lens;
use super::Violation;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum NextSnap {
    Scan,
    /// Update writing this view.
    Update(Vid),
    None,
}

/// The α series of one value at every memory step, for inspection.
#[derive(Clone, Debug, Default)]
pub struct AlphaSeries {
    /// (step, r, w, c) after each memory event.
    pub points: Vec<(u64, usize, usize, usize)>,
    pub tau: Option<u64>,
}

/// Runs the potential monitor for `values` (lens-level). Returns violations
/// of α monotonicity-after-n, value persistence after τ_v, and the
/// r+w ≤ n bound.
pub fn alpha_monitor(
    trace: &Trace,
    arena: &mut ValueArena,
    lens: &Lens,
    values: &[Vid],
) -> (Vec<Violation>, HashMap<Vid, AlphaSeries>) {
    let n = trace.n;
    let mut violations = Vec::new();

    let stored: Vec<(Vid, Vid)> = values
        .iter()
        .map(|&v| (v, lens.stored(arena, v)))
        .collect();

    // Per actor: ordered snapshot events (position, kind).
    let mut per_actor: HashMap<u32, Vec<(usize, NextSnap)>> = HashMap::new();
    for (pos, ev) in trace.events.iter().enumerate() {
        let entry = match ev.kind {
            EventKind::Scan => NextSnap::Scan,
            EventKind::Update => NextSnap::Update(ev.args[1]),
            _ => continue,
        };
        per_actor.entry(ev.actor).or_default().push((pos, entry));
    }
    let actors: Vec<u32> = (0..n as u32).collect();
    let mut cursor: HashMap<u32, usize> = actors.iter().map(|&a| (a, 0)).collect();

    let next_snap = |actor: u32, cursor: &HashMap<u32, usize>| -> NextSnap {
        match per_actor.get(&actor) {
            Some(list) => list
                .get(cursor[&actor])
                .map(|&(_, k)| k)
                .unwrap_or(NextSnap::None),
            None => NextSnap::None,
        }
    };

    let empty = arena.empty_set();
    let mut cells = vec![empty; n];
    let mut series: HashMap<Vid, AlphaSeries> = values
        .iter()
        .map(|&v| (v, AlphaSeries::default()))
        .collect();
    let mut engaged: HashMap<Vid, usize> = HashMap::new(); // running alpha once > n

    for (pos, ev) in trace.events.iter().enumerate() {
        if !ev.kind.is_memory() {
            continue;
        }
        match ev.kind {
            EventKind::Write | EventKind::Update => {
                let idx = arena.as_int(ev.args[0]).expect("index arg") as usize;
                cells[idx] = ev.args[1];
            }
            _ => {}
        }
        // The acting process has consumed this snapshot operation; its next
        // one starts strictly after this position.
        if ev.kind.is_snapshot() {
            if let Some(c) = cursor.get_mut(&ev.actor) {
                let list = &per_actor[&ev.actor];
                while *c < list.len() && list[*c].0 <= pos {
                    *c += 1;
                }
            }
        }

        for &(v, stored_v) in &stored {
            let mut r = 0usize;
            let mut w = 0usize;
            for &a in &actors {
                match next_snap(a, &cursor) {
                    NextSnap::Scan => r += 1,
                    NextSnap::Update(written) => {
                        if arena.set_contains(written, stored_v) {
                            w += 1;
                        }
                    }
                    NextSnap::None => w += 1,
                }
            }
            let c = cells
                .iter()
                .filter(|&&cell| arena.set_contains(cell, stored_v))
                .count();
            let alpha = r + w + c;

            if r + w > n {
                violations.push(
                    Violation::new(
                        "alpha-bound",
                        format!(
                            "r + w = {} exceeds n = {n} for value {} at step {}",
                            r + w,
                            arena.display(v),
                            ev.step
                        ),
                    )
                    .with_window(ev.step, ev.step),
                );
            }

            let s = series.get_mut(&v).expect("tracked");
            s.points.push((ev.step, r, w, c));
            if s.tau.is_none() && c == n {
                s.tau = Some(ev.step);
            }
            if let Some(tau) = s.tau {
                if c == 0 {
                    violations.push(
                        Violation::new(
                            "persistence",
                            format!(
                                "no register contains {} at step {} though τ_v = {tau}",
                                arena.display(v),
                                ev.step
                            ),
                        )
                        .with_window(tau, ev.step),
                    );
                }
            }
            match engaged.get(&v) {
                Some(&prev) if alpha < prev => {
                    violations.push(
                        Violation::new(
                            "alpha-monotone",
                            format!(
                                "α_{} dropped {prev} -> {alpha} at step {}",
                                arena.display(v),
                                ev.step
                            ),
                        )
                        .with_window(ev.step, ev.step),
                    );
                    engaged.insert(v, alpha);
                }
                Some(_) => {
                    engaged.insert(v, alpha);
                }
                None => {
                    if alpha > n {
                        engaged.insert(v, alpha);
                    }
                }
            }
        }
    }

    (violations, series)
}

/// Per-process view monotonicity under ⊆: every update writes the current
/// view, and a physical get returns it, so those sets must be
/// non-decreasing per actor in trace order.
pub fn view_monotonicity(trace: &Trace, arena: &ValueArena, lens: &Lens) -> Vec<Violation> {
    let mut last: HashMap<u32, Vid> = HashMap::new();
    let mut violations = Vec::new();
    for ev in &trace.events {
        let observed = match ev.kind {
            EventKind::Update => Some(ev.args[1]),
            EventKind::Respond
                if *lens == Lens::Physical && ev.op == crate::sim::OpKind::Get =>
            {
                match ev.ret {
                    Some(crate::sim::RetVal::Val(v)) => Some(v),
                    _ => None,
                }
            }
            _ => None,
        };
        let Some(cur) = observed else { continue };
        if let Some(&prev) = last.get(&ev.actor) {
            if !arena.set_is_subset(prev, cur) {
                violations.push(
                    Violation::new(
                        "view-monotone",
                        format!(
                            "actor {} view shrank from {} to {} at step {}",
                            ev.actor,
                            arena.display(prev),
                            arena.display(cur),
                            ev.step
                        ),
                    )
                    .with_window(ev.step, ev.step),
                );
            }
        }
        last.insert(ev.actor, cur);
    }
    violations
}

/// Lens-level values of every add in the trace, for feeding the monitor.
pub fn add_values(trace: &Trace, lens: &Lens) -> Vec<Vid> {
    let mut out: Vec<Vid> = super::history::ws_ops(trace, lens)
        .iter()
        .filter_map(|op| match op.kind {
            super::history::WsRecordKind::Add(v) => Some(v),
            _ => None,
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{run, CrashPlan, Event, ModelConfig, ObjectId, OpKind, RetVal, SchedulePolicy};
    use crate::weakset::WeakSetProgram;

    #[test]
    fn solo_add_alpha_is_clean() {
        let mut out = run(
            vec![WeakSetProgram::add_get(5), WeakSetProgram::new(vec![])],
            &ModelConfig::new(2, 0).with_max_steps(5_000),
            &CrashPlan::none(),
            &SchedulePolicy::RoundRobin,
        )
        .unwrap();
        let five = out.arena.int(5);
        let (violations, series) =
            alpha_monitor(&out.trace, &mut out.arena, &Lens::Physical, &[five]);
        assert!(violations.is_empty(), "{violations:?}");
        let s = &series[&five];
        assert!(s.tau.is_some());
        // α settles above n and stays there.
        let after_tau: Vec<usize> = s
            .points
            .iter()
            .filter(|(step, ..)| Some(*step) >= s.tau)
            .map(|&(_, r, w, c)| r + w + c)
            .collect();
        assert!(after_tau.iter().all(|&a| a > 2));
    }

    #[test]
    fn random_runs_are_clean() {
        for seed in 0..100 {
            let mut out = run(
                vec![WeakSetProgram::add_get(1), WeakSetProgram::add_get(2)],
                &ModelConfig::new(2, 0).with_seed(seed).with_max_steps(5_000),
                &CrashPlan::none(),
                &SchedulePolicy::SeededRandom,
            )
            .unwrap();
            let values = add_values(&out.trace, &Lens::Physical);
            let (violations, _) =
                alpha_monitor(&out.trace, &mut out.arena, &Lens::Physical, &values);
            assert!(violations.is_empty(), "seed {seed}: {violations:?}");
            let mono = view_monotonicity(&out.trace, &out.arena, &Lens::Physical);
            assert!(mono.is_empty(), "seed {seed}: {mono:?}");
        }
    }

    /// A hand-forged trace: v reaches both registers, then one register is
    /// overwritten without v while no process is about to rescue it. The
    /// persistence monitor must flag it.
    #[test]
    fn forged_overwrite_is_flagged() {
        let mut arena = ValueArena::new();
        let v = arena.int(9);
        let sv = arena.set_of(vec![v]);
        let other = arena.int(1);
        let so = arena.set_of(vec![other]);
        let zero = arena.int(0);
        let one = arena.int(1);
        let mk = |step: u64, actor: u32, idx: Vid, val: Vid| Event {
            step,
            actor,
            kind: crate::sim::EventKind::Update,
            object: ObjectId::Registers,
            op: OpKind::Update,
            args: vec![idx, val],
            ret: Some(RetVal::Ack),
        };
        let trace = Trace {
            events: vec![
                mk(0, 0, zero, sv),
                mk(1, 0, one, sv),  // τ_v here: v in both cells
                mk(2, 1, zero, so), // erase v from cell 0
                mk(3, 1, one, so),  // erase v from cell 1: c_v = 0
            ],
            n: 2,
            truncated: false,
        };
        let (violations, _) = alpha_monitor(&trace, &mut arena, &Lens::Physical, &[v]);
        assert!(violations.iter().any(|x| x.check == "persistence"));
    }
}
