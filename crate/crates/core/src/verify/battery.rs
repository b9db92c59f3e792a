//! Prepackaged checker batteries: everything that should hold on a trace of
//! a given protocol, bundled for the explorer, the batch runner and the
//! CLI.

use crate::sim::Trace;
use crate::value::ValueArena;

use super::agreement::{check_agreement_conditions, check_chain_invariants, sa_paths};
use super::alpha::{add_values, alpha_monitor, view_monotonicity};
use super::bgsim::check_bg_simulation;
use super::history::{replay_soundness, space_accounting, GetTauMode, Lens};
use super::linearize::{linearize_bruteforce, linearize_tau, BfVerdict};
use super::Violation;

/// Budget for the brute-force witness search.
pub const BF_BUDGET: u64 = 1 << 22;

/// Full weak-set battery: replay soundness, space accounting, both
/// linearizability checkers (verdicts compared), both τ readings for gets
/// (verdicts compared), the α monitor and view monotonicity.
pub fn weakset_battery(trace: &Trace, arena: &mut ValueArena) -> Vec<Violation> {
    let mut out = Vec::new();
    out.extend(replay_soundness(trace, arena));
    out.extend(space_accounting(trace, arena));

    let lens = Lens::Physical;
    let tau_eq = linearize_tau(trace, arena, &lens, GetTauMode::Equality);
    let tau_sub = linearize_tau(trace, arena, &lens, GetTauMode::Subset);
    if tau_eq.passed() != tau_sub.passed() {
        out.push(Violation::new(
            "tau-mode-disagreement",
            format!(
                "equality reading {} but subset reading {}",
                if tau_eq.passed() { "passes" } else { "fails" },
                if tau_sub.passed() { "passes" } else { "fails" },
            ),
        ));
    }
    let bf = linearize_bruteforce(trace, arena, &lens, BF_BUDGET);
    if bf != BfVerdict::Inconclusive && tau_eq.passed() != (bf == BfVerdict::Linearizable) {
        out.push(Violation::new(
            "oracle-disagreement",
            format!(
                "tau checker {} but brute force says {:?}",
                if tau_eq.passed() { "passes" } else { "fails" },
                bf
            ),
        ));
    }
    out.extend(tau_eq.violations);

    let values = add_values(trace, &lens);
    let (alpha, _) = alpha_monitor(trace, arena, &lens, &values);
    out.extend(alpha);
    out.extend(view_monotonicity(trace, arena, &lens));
    out
}

/// Safe agreement battery: the four conditions plus the V/Π chains of every
/// object in the trace, plus the underlying weak-set replay and space
/// checks.
pub fn safe_agreement_battery(trace: &Trace, arena: &mut ValueArena) -> Vec<Violation> {
    let mut out = Vec::new();
    out.extend(replay_soundness(trace, arena));
    out.extend(space_accounting(trace, arena));
    let report = check_agreement_conditions(trace, arena, None);
    out.extend(report.violations);
    for path in sa_paths(trace) {
        out.extend(check_chain_invariants(trace, arena, &path).violations);
    }
    out
}

/// Set agreement battery: agreement conditions with the k = t+1 decision
/// bound, chains on every object.
pub fn set_agreement_battery(trace: &Trace, arena: &mut ValueArena, t: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    out.extend(replay_soundness(trace, arena));
    out.extend(space_accounting(trace, arena));
    let report = check_agreement_conditions(trace, arena, Some(t + 1));
    out.extend(report.violations);
    for path in sa_paths(trace) {
        out.extend(check_chain_invariants(trace, arena, &path).violations);
    }
    out
}

/// Barycentric agreement battery: outputs must be pairwise comparable under
/// containment (they are vertices of the iterated subdivision spanning one
/// simplex), on top of the memory-level checks.
pub fn bary_battery(trace: &Trace, arena: &mut ValueArena) -> Vec<Violation> {
    let mut out = Vec::new();
    out.extend(replay_soundness(trace, arena));
    out.extend(space_accounting(trace, arena));
    let outputs: Vec<(u32, crate::value::Vid)> = super::agreement::outer_ops(trace, crate::sim::OpKind::BaryAgree)
        .into_iter()
        .filter_map(|r| match r.ret {
            Some(crate::sim::RetVal::Val(v)) => Some((r.actor, v)),
            _ => None,
        })
        .collect();
    for i in 0..outputs.len() {
        for j in (i + 1)..outputs.len() {
            let (a, b) = (outputs[i].1, outputs[j].1);
            let comparable = match (arena.node(a).clone(), arena.node(b).clone()) {
                (crate::value::Node::Set(_), crate::value::Node::Set(_)) => {
                    arena.set_is_subset(a, b) || arena.set_is_subset(b, a)
                }
                _ => a == b,
            };
            if !comparable {
                out.push(Violation::new(
                    "containment-order",
                    format!(
                        "outputs of actors {} and {} are not containment-comparable",
                        outputs[i].0, outputs[j].0
                    ),
                ));
            }
        }
    }
    out
}

/// BG-simulation battery.
pub fn bgsim_battery(trace: &Trace, arena: &mut ValueArena) -> Vec<Violation> {
    let mut out = Vec::new();
    out.extend(replay_soundness(trace, arena));
    out.extend(space_accounting(trace, arena));
    out.extend(check_bg_simulation(trace, arena).violations);
    // The SA grid inherits the agreement conditions.
    let report = check_agreement_conditions(trace, arena, None);
    out.extend(report.violations);
    out
}
