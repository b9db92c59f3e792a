//! Agreement-condition verdicts over safe agreement / set agreement traces,
//! and the inclusion-chain invariants driving the agreement proof.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::sim::{EventKind, ObjectId, OpKind, OpRecord, RetVal, Trace};
use crate::value::{ValueArena, Vid};

use super::{Verdict, Violation};

/// Outermost-or-nested operations on safe agreement objects, grouped by
/// object path.
#[derive(Clone, Debug, Default)]
pub struct SaOps {
    pub proposes: BTreeMap<Vec<i64>, Vec<OpRecord>>,
    pub resolves: BTreeMap<Vec<i64>, Vec<OpRecord>>,
}

/// Pulls every propose/resolve record out of a trace regardless of nesting
/// depth.
/// (is-propose, object path, index into the per-path list).
type OpenSaOp = (bool, Vec<i64>, usize);

pub fn sa_ops(trace: &Trace) -> SaOps {
    let mut out = SaOps::default();
    let mut stacks: BTreeMap<u32, Vec<Option<OpenSaOp>>> = BTreeMap::new();
    for (pos, ev) in trace.events.iter().enumerate() {
        match ev.kind {
            EventKind::Invoke => {
                let slot = match (&ev.object, ev.op) {
                    (ObjectId::SafeAgreement(path), OpKind::Propose) => {
                        let list = out.proposes.entry(path.clone()).or_default();
                        list.push(OpRecord {
                            actor: ev.actor,
                            object: ev.object.clone(),
                            op: ev.op,
                            args: ev.args.clone(),
                            ret: None,
                            invoke_step: ev.step,
                            invoke_pos: pos,
                            respond_step: None,
                            respond_pos: None,
                        });
                        Some((true, path.clone(), list.len() - 1))
                    }
                    (ObjectId::SafeAgreement(path), OpKind::Resolve) => {
                        let list = out.resolves.entry(path.clone()).or_default();
                        list.push(OpRecord {
                            actor: ev.actor,
                            object: ev.object.clone(),
                            op: ev.op,
                            args: ev.args.clone(),
                            ret: None,
                            invoke_step: ev.step,
                            invoke_pos: pos,
                            respond_step: None,
                            respond_pos: None,
                        });
                        Some((false, path.clone(), list.len() - 1))
                    }
                    _ => None,
                };
                stacks.entry(ev.actor).or_default().push(slot);
            }
            EventKind::Respond => {
                if let Some(Some((is_propose, path, idx))) =
                    stacks.entry(ev.actor).or_default().pop()
                {
                    let rec = if is_propose {
                        &mut out.proposes.get_mut(&path).unwrap()[idx]
                    } else {
                        &mut out.resolves.get_mut(&path).unwrap()[idx]
                    };
                    rec.ret = ev.ret;
                    rec.respond_step = Some(ev.step);
                    rec.respond_pos = Some(pos);
                }
            }
            _ => {}
        }
    }
    out
}

/// Verdicts of the four safe agreement conditions over one trace, plus the
/// k-agreement bound when requested.
#[derive(Clone, Debug, Serialize)]
pub struct AgreementReport {
    /// Distinct proposed values (rendered), across all objects.
    pub proposed: Vec<String>,
    /// Distinct non-⊥ resolved values (rendered), across all objects.
    pub resolved_non_bot: Vec<String>,
    pub validity: Verdict,
    pub agreement: Verdict,
    pub termination: Verdict,
    pub nontriviality: Verdict,
    pub k_agreement: Option<Verdict>,
    pub distinct_decisions: usize,
    pub violations: Vec<Violation>,
}

impl AgreementReport {
    pub fn all_passed(&self) -> bool {
        self.validity.passed()
            && self.agreement.passed()
            && self.termination.passed()
            && self.nontriviality.passed()
            && self.k_agreement.is_none_or(Verdict::passed)
    }
}

fn non_bot_ret(arena: &ValueArena, rec: &OpRecord) -> Option<Vid> {
    match rec.ret {
        Some(RetVal::Val(v)) if !arena.is_bottom(v) => Some(v),
        _ => None,
    }
}

/// Did this actor crash while one of its `op`-kind operations was open?
fn crashed_inside(trace: &Trace, actor: u32, op: OpKind) -> bool {
    let mut depth = 0i64;
    for ev in &trace.events {
        if ev.actor != actor {
            continue;
        }
        match ev.kind {
            EventKind::Invoke if ev.op == op => depth += 1,
            EventKind::Respond if ev.op == op => depth -= 1,
            EventKind::Crash => return depth > 0,
            _ => {}
        }
    }
    false
}

/// Checks validity / agreement / termination / nontriviality as trace-level
/// verdicts. `k_bound` enables the set-agreement decision count check
/// (decисions drawn from `set_agree` records).
pub fn check_agreement_conditions(
    trace: &Trace,
    arena: &ValueArena,
    k_bound: Option<usize>,
) -> AgreementReport {
    let ops = sa_ops(trace);
    let crashed: BTreeSet<u32> = trace.crashed_actors().into_iter().collect();
    let mut violations = Vec::new();

    let proposed_set: BTreeSet<Vid> = ops
        .proposes
        .values()
        .flatten()
        .map(|p| p.args[0])
        .collect();
    let resolved_set: BTreeSet<Vid> = ops
        .resolves
        .values()
        .flatten()
        .filter_map(|r| non_bot_ret(arena, r))
        .collect();

    // One-shot discipline: at most one propose per process per object.
    for (path, proposes) in &ops.proposes {
        let mut actors: Vec<u32> = proposes.iter().map(|p| p.actor).collect();
        actors.sort_unstable();
        let before = actors.len();
        actors.dedup();
        if actors.len() != before {
            violations.push(Violation::new(
                "one-shot",
                format!("a process proposed twice on SA{path:?}"),
            ));
        }
    }

    // Validity: any non-⊥ resolve result is some propose's argument on the
    // same object.
    let mut validity = Verdict::Vacuous;
    for (path, resolves) in &ops.resolves {
        let proposed: BTreeSet<Vid> = ops
            .proposes
            .get(path)
            .map(|list| list.iter().map(|p| p.args[0]).collect())
            .unwrap_or_default();
        for r in resolves {
            if let Some(v) = non_bot_ret(arena, r) {
                if validity == Verdict::Vacuous {
                    validity = Verdict::Pass;
                }
                if !proposed.contains(&v) {
                    validity = Verdict::Fail;
                    violations.push(Violation::new(
                        "validity",
                        format!(
                            "resolve on {} returned unproposed {}",
                            r.object,
                            arena.display(v)
                        ),
                    ));
                }
            }
        }
    }

    // Agreement: at most one distinct non-⊥ result per object.
    let mut agreement = Verdict::Vacuous;
    for (path, resolves) in &ops.resolves {
        let distinct: BTreeSet<Vid> = resolves
            .iter()
            .filter_map(|r| non_bot_ret(arena, r))
            .collect();
        if !distinct.is_empty() && agreement == Verdict::Vacuous {
            agreement = Verdict::Pass;
        }
        if distinct.len() > 1 {
            agreement = Verdict::Fail;
            violations.push(Violation::new(
                "agreement",
                format!(
                    "object SA{:?} resolved {} distinct values",
                    path,
                    distinct.len()
                ),
            ));
        }
    }

    // Termination: every operation of a non-crashed process responded
    // within the step budget. A trace cut off by an external depth bound
    // says nothing about termination.
    let mut termination = if trace.truncated {
        Verdict::Vacuous
    } else {
        Verdict::Pass
    };
    if !trace.truncated {
        let all_ops = ops
            .proposes
            .values()
            .chain(ops.resolves.values())
            .flatten();
        for rec in all_ops {
            if !crashed.contains(&rec.actor) && !rec.is_complete() {
                termination = Verdict::Fail;
                violations.push(Violation::new(
                    "termination",
                    format!(
                        "{} by non-crashed actor {} never responded",
                        rec.op.as_str(),
                        rec.actor
                    ),
                ));
            }
        }
    }

    // Nontriviality, per object: with at least two proposes and no crash
    // inside any propose on the object, every resolve invoked after the
    // last propose response must return non-⊥.
    let mut nontriviality = Verdict::Vacuous;
    for (path, proposes) in &ops.proposes {
        if proposes.len() < 2 {
            continue;
        }
        let crash_free = proposes
            .iter()
            .map(|p| p.actor)
            .collect::<BTreeSet<_>>()
            .iter()
            .all(|&a| !crashed_inside(trace, a, OpKind::Propose));
        if !crash_free {
            continue;
        }
        let Some(quiescence) = proposes
            .iter()
            .map(|p| p.respond_pos)
            .collect::<Option<Vec<_>>>()
            .map(|v| v.into_iter().max().unwrap())
        else {
            continue; // a propose never finished inside the budget
        };
        let late = ops
            .resolves
            .get(path)
            .map(|list| {
                list.iter()
                    .filter(|r| r.invoke_pos > quiescence && r.is_complete())
                    .collect::<Vec<_>>()
            })
            .unwrap_or_default();
        for r in late {
            if non_bot_ret(arena, r).is_none() {
                nontriviality = Verdict::Fail;
                violations.push(Violation::new(
                    "nontriviality",
                    format!(
                        "post-quiescence resolve on {} by actor {} returned ⊥",
                        r.object, r.actor
                    ),
                ));
            } else if nontriviality == Verdict::Vacuous {
                nontriviality = Verdict::Pass;
            }
        }
    }

    // k-agreement for (t+1)-set agreement runs.
    let mut distinct_decisions = 0;
    let k_agreement = k_bound.map(|k| {
        let records = outer_ops(trace, OpKind::SetAgree);
        let inputs: BTreeSet<Vid> = records.iter().map(|r| r.args[0]).collect();
        let decisions: Vec<&OpRecord> = records.iter().filter(|r| r.is_complete()).collect();
        let distinct: BTreeSet<Vid> = decisions
            .iter()
            .filter_map(|r| match r.ret {
                Some(RetVal::Val(v)) => Some(v),
                _ => None,
            })
            .collect();
        distinct_decisions = distinct.len();
        let mut verdict = if distinct.is_empty() {
            Verdict::Vacuous
        } else {
            Verdict::Pass
        };
        if distinct.len() > k {
            verdict = Verdict::Fail;
            violations.push(Violation::new(
                "k-agreement",
                format!("{} distinct decisions exceed k = {k}", distinct.len()),
            ));
        }
        for &v in &distinct {
            if !inputs.contains(&v) {
                verdict = Verdict::Fail;
                violations.push(Violation::new(
                    "k-validity",
                    format!("decision {} is not an input", arena.display(v)),
                ));
            }
        }
        // Every non-crashed participant decides (meaningless under an
        // external depth bound).
        if !trace.truncated {
            for r in &records {
                if !crashed.contains(&r.actor) && !r.is_complete() {
                    verdict = Verdict::Fail;
                    violations.push(Violation::new(
                        "k-termination",
                        format!("non-crashed actor {} never decided", r.actor),
                    ));
                }
            }
        }
        verdict
    });

    AgreementReport {
        proposed: proposed_set.iter().map(|&v| arena.display(v)).collect(),
        resolved_non_bot: resolved_set.iter().map(|&v| arena.display(v)).collect(),
        validity,
        agreement,
        termination,
        nontriviality,
        k_agreement,
        distinct_decisions,
        violations,
    }
}

/// Outermost operations of one kind.
pub fn outer_ops(trace: &Trace, op: OpKind) -> Vec<OpRecord> {
    trace
        .ops_at_depth(0)
        .into_iter()
        .filter(|r| r.op == op)
        .collect()
}

/// Chain-invariant report for one safe agreement object.
#[derive(Clone, Debug, Serialize)]
pub struct ChainReport {
    /// |V_i| per level.
    pub value_counts: Vec<usize>,
    /// |Π_i| per level.
    pub pi_counts: Vec<usize>,
    pub violations: Vec<Violation>,
}

impl ChainReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Reconstructs V_i (values added to the object's logical SET\[i\]) and
/// Π_i (actors adding a non-minimum of V_i) and verifies the ⊇ chains.
/// When every |V_i| >= 2 the Π chain must decrease strictly; |V_{n-1}| >= 2
/// is itself reported, being the agreement proof's impossible case.
pub fn check_chain_invariants(
    trace: &Trace,
    arena: &ValueArena,
    sa_path: &[i64],
) -> ChainReport {
    let n = trace.n;
    let mut adds: Vec<Vec<(u32, Vid)>> = vec![Vec::new(); n];
    for ev in &trace.events {
        if ev.kind != EventKind::Invoke || ev.op != OpKind::Add {
            continue;
        }
        if let ObjectId::LogicalSet(path) = &ev.object {
            if path.len() == sa_path.len() + 1 && path[..sa_path.len()] == *sa_path {
                let level = path[sa_path.len()];
                if (0..n as i64).contains(&level) {
                    adds[level as usize].push((ev.actor, ev.args[0]));
                }
            }
        }
    }

    let mut violations = Vec::new();
    let values: Vec<BTreeSet<Vid>> = adds
        .iter()
        .map(|list| list.iter().map(|&(_, v)| v).collect())
        .collect();
    let minima: Vec<Option<Vid>> = values
        .iter()
        .map(|set| {
            set.iter()
                .copied()
                .min_by(|a, b| arena.cmp_values(*a, *b))
        })
        .collect();
    let pis: Vec<BTreeSet<u32>> = adds
        .iter()
        .zip(&minima)
        .map(|(list, min)| {
            list.iter()
                .filter(|&&(_, v)| Some(v) != *min)
                .map(|&(a, _)| a)
                .collect()
        })
        .collect();

    for i in 0..n.saturating_sub(1) {
        if !values[i + 1].is_subset(&values[i]) {
            violations.push(Violation::new(
                "chain-values",
                format!("V_{} ⊉ V_{} on SA{:?}", i, i + 1, sa_path),
            ));
        }
        if !pis[i + 1].is_subset(&pis[i]) {
            violations.push(Violation::new(
                "chain-pi",
                format!("Π_{} ⊉ Π_{} on SA{:?}", i, i + 1, sa_path),
            ));
        }
    }
    if values.iter().all(|v| v.len() >= 2) {
        for i in 0..n.saturating_sub(1) {
            if pis[i + 1].len() >= pis[i].len() {
                violations.push(Violation::new(
                    "chain-pi-strict",
                    format!("Π_{} does not strictly shrink on SA{:?}", i, sa_path),
                ));
            }
        }
    }
    if let Some(last) = values.last() {
        if last.len() >= 2 {
            violations.push(Violation::new(
                "chain-last",
                format!(
                    "{} distinct values reached SET[n-1] of SA{:?}",
                    last.len(),
                    sa_path
                ),
            ));
        }
    }

    ChainReport {
        value_counts: values.iter().map(BTreeSet::len).collect(),
        pi_counts: pis.iter().map(BTreeSet::len).collect(),
        violations,
    }
}

/// Safe agreement object paths with at least one propose in the trace.
pub fn sa_paths(trace: &Trace) -> Vec<Vec<i64>> {
    let mut out: Vec<Vec<i64>> = sa_ops(trace).proposes.keys().cloned().collect();
    out.sort();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agreement::{SaScriptOp, SafeAgreementProgram};
    use crate::sim::{run, CrashPlan, CrashPoint, CrashRule, Event, EventKind, ModelConfig, SchedulePolicy};
    use crate::value::{ValueArena, ValueTree};

    /// Sole proposer crashes mid-propose: resolves stay ⊥ forever, so
    /// nontriviality is vacuous while agreement and validity hold.
    #[test]
    fn lone_crashed_proposer_is_vacuous() {
        let plan = CrashPlan {
            rules: vec![CrashRule {
                actor: 0,
                point: CrashPoint::InsideOp {
                    op: OpKind::Propose,
                    object: None,
                },
            }],
        };
        let out = run(
            vec![
                SafeAgreementProgram::new(vec![
                    SaScriptOp::Propose(ValueTree::Int(9)),
                    SaScriptOp::ResolveUntil { cap: 3 },
                ]),
                SafeAgreementProgram::new(vec![SaScriptOp::ResolveUntil { cap: 6 }]),
            ],
            &ModelConfig::new(2, 1).with_seed(1).with_max_steps(50_000),
            &plan,
            &SchedulePolicy::RoundRobin,
        )
        .unwrap();
        let report = check_agreement_conditions(&out.trace, &out.arena, None);
        assert_eq!(report.nontriviality, Verdict::Vacuous);
        assert!(report.validity.passed());
        assert!(report.agreement.passed());
        // All resolves answered ⊥.
        let resolves = sa_ops(&out.trace).resolves;
        let bot = {
            let mut arena = out.arena.clone();
            arena.bottom()
        };
        for rec in resolves.values().flatten() {
            assert_eq!(rec.ret, Some(RetVal::Val(bot)));
        }
    }

    /// A forged trace adding two distinct values to the last logical set is
    /// the agreement engine's impossible case; the chain checker flags it.
    #[test]
    fn forged_two_values_at_last_level_flagged() {
        let mut arena = ValueArena::new();
        let mut events = Vec::new();
        let mut step = 0u64;
        for (actor, value) in [(0u32, 3i64), (1, 7)] {
            for level in 0..2i64 {
                let v = arena.int(value);
                events.push(Event {
                    step,
                    actor,
                    kind: EventKind::Invoke,
                    object: ObjectId::LogicalSet(vec![0, level]),
                    op: OpKind::Add,
                    args: vec![v],
                    ret: None,
                });
                events.push(Event {
                    step,
                    actor,
                    kind: EventKind::Respond,
                    object: ObjectId::LogicalSet(vec![0, level]),
                    op: OpKind::Add,
                    args: vec![],
                    ret: Some(RetVal::Ack),
                });
                step += 1;
            }
        }
        let trace = Trace {
            events,
            n: 2,
            truncated: false,
        };
        let chain = check_chain_invariants(&trace, &arena, &[0]);
        assert!(chain
            .violations
            .iter()
            .any(|v| v.check == "chain-last"));
        assert_eq!(chain.value_counts, vec![2, 2]);
    }

    #[test]
    #[should_panic(expected = "one-shot")]
    fn double_propose_script_rejected() {
        let _ = SafeAgreementProgram::new(vec![
            SaScriptOp::Propose(ValueTree::Int(1)),
            SaScriptOp::Propose(ValueTree::Int(2)),
        ]);
    }
}
