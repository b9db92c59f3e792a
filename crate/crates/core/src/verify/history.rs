//! Weak-set history extraction and register-timeline replay.
//!
//! A trace is replayed against the memory semantics: every recorded scan and
//! read must reproduce exactly from the writes that precede it (replay
//! soundness). On top of the replay sit the τ tables: for a value v, τ_v is
//! the first step at which v belongs to all n registers; for a returned get
//! view V, τ_V is the first step at which all registers equal V (with a
//! subset reading available as an alternate mode).

use std::collections::HashMap;

use crate::sim::{EventKind, ObjectId, OpKind, RetVal, Trace};
use crate::value::{ValueArena, Vid};
use crate::weakset;

use super::Violation;

/// Which weak set a checker looks at: the physical object or one logical
/// (multiplexed) object.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Lens {
    Physical,
    Logical(Vec<i64>),
}

impl Lens {
    pub fn matches(&self, object: &ObjectId) -> bool {
        match (self, object) {
            (Lens::Physical, ObjectId::WeakSet) => true,
            (Lens::Logical(path), ObjectId::LogicalSet(p)) => p == path,
            _ => false,
        }
    }

    /// Cell contents as seen through this lens.
    pub fn cell(&self, arena: &mut ValueArena, raw: Vid) -> Vid {
        match self {
            Lens::Physical => raw,
            Lens::Logical(path) => weakset::untag_filter(arena, raw, path),
        }
    }

    /// The form `value` takes inside physical registers.
    pub fn stored(&self, arena: &mut ValueArena, value: Vid) -> Vid {
        match self {
            Lens::Physical => value,
            Lens::Logical(path) => weakset::tag(arena, path, value),
        }
    }
}

/// One add/get operation as seen through a lens.
#[derive(Clone, Debug)]
pub struct WsRecord {
    pub actor: u32,
    pub kind: WsRecordKind,
    pub invoke_pos: usize,
    pub invoke_step: u64,
    pub respond_pos: Option<usize>,
    pub respond_step: Option<u64>,
}

#[derive(Clone, Copy, Debug)]
pub enum WsRecordKind {
    Add(Vid),
    /// Result view; `None` while incomplete.
    Get(Option<Vid>),
}

impl WsRecord {
    pub fn is_complete(&self) -> bool {
        self.respond_pos.is_some()
    }

    pub fn describe(&self, arena: &ValueArena) -> String {
        match self.kind {
            WsRecordKind::Add(v) => format!(
                "add({}) by actor {} [{}..{}]",
                arena.display(v),
                self.actor,
                self.invoke_step,
                self.respond_step
                    .map_or("?".into(), |s| s.to_string())
            ),
            WsRecordKind::Get(ret) => format!(
                "get()->{} by actor {} [{}..{}]",
                ret.map_or("?".into(), |v| arena.display(v)),
                self.actor,
                self.invoke_step,
                self.respond_step
                    .map_or("?".into(), |s| s.to_string())
            ),
        }
    }
}

/// Extracts the add/get operations visible through `lens`, in invoke order.
pub fn ws_ops(trace: &Trace, lens: &Lens) -> Vec<WsRecord> {
    // Per-actor stack of (matches-lens, index into out).
    let mut stacks: HashMap<u32, Vec<Option<usize>>> = HashMap::new();
    let mut out = Vec::new();
    for (pos, ev) in trace.events.iter().enumerate() {
        match ev.kind {
            EventKind::Invoke => {
                let slot = if lens.matches(&ev.object)
                    && matches!(ev.op, OpKind::Add | OpKind::Get)
                {
                    let kind = match ev.op {
                        OpKind::Add => WsRecordKind::Add(ev.args[0]),
                        _ => WsRecordKind::Get(None),
                    };
                    out.push(WsRecord {
                        actor: ev.actor,
                        kind,
                        invoke_pos: pos,
                        invoke_step: ev.step,
                        respond_pos: None,
                        respond_step: None,
                    });
                    Some(out.len() - 1)
                } else {
                    None
                };
                stacks.entry(ev.actor).or_default().push(slot);
            }
            EventKind::Respond => {
                if let Some(Some(idx)) = stacks.entry(ev.actor).or_default().pop() {
                    let rec = &mut out[idx];
                    rec.respond_pos = Some(pos);
                    rec.respond_step = Some(ev.step);
                    if let (WsRecordKind::Get(slot), Some(RetVal::Val(v))) =
                        (&mut rec.kind, ev.ret)
                    {
                        *slot = Some(v);
                    }
                }
            }
            _ => {}
        }
    }
    out
}

/// Replays write/update events and checks every recorded read/scan return
/// against the reconstructed register array.
pub fn replay_soundness(trace: &Trace, arena: &mut ValueArena) -> Vec<Violation> {
    let n = trace.n;
    let empty = arena.empty_set();
    let mut cells = vec![empty; n];
    let mut violations = Vec::new();
    for ev in &trace.events {
        match ev.kind {
            EventKind::Write | EventKind::Update => {
                let idx = arena.as_int(ev.args[0]).expect("index arg") as usize;
                cells[idx] = ev.args[1];
            }
            EventKind::Read => {
                let idx = arena.as_int(ev.args[0]).expect("index arg") as usize;
                if ev.ret != Some(RetVal::Val(cells[idx])) {
                    violations.push(
                        Violation::new(
                            "replay",
                            format!("read of cell {idx} at step {} does not replay", ev.step),
                        )
                        .with_window(ev.step, ev.step),
                    );
                }
            }
            EventKind::Scan => {
                let expect = arena.tuple(cells.clone());
                if ev.ret != Some(RetVal::Val(expect)) {
                    violations.push(
                        Violation::new(
                            "replay",
                            format!("scan at step {} does not replay", ev.step),
                        )
                        .with_window(ev.step, ev.step),
                    );
                }
            }
            _ => {}
        }
    }
    violations
}

/// Space accounting: the implementation touches exactly the n register
/// cells and nothing else.
pub fn space_accounting(trace: &Trace, arena: &ValueArena) -> Vec<Violation> {
    let n = trace.n;
    let mut violations = Vec::new();
    for ev in &trace.events {
        if ev.kind.is_memory() {
            if ev.object != ObjectId::Registers {
                violations.push(Violation::new(
                    "space",
                    format!("memory event on non-register object {} at step {}", ev.object, ev.step),
                ));
                continue;
            }
            if matches!(
                ev.kind,
                EventKind::Read | EventKind::Write | EventKind::Update
            ) {
                let idx = arena.as_int(ev.args[0]).unwrap_or(-1);
                if idx < 0 || idx as usize >= n {
                    violations.push(
                        Violation::new(
                            "space",
                            format!("cell index {idx} outside 0..{n} at step {}", ev.step),
                        )
                        .with_window(ev.step, ev.step),
                    );
                }
            }
            if ev.kind == EventKind::Scan {
                if let Some(RetVal::Val(v)) = ev.ret {
                    if arena.as_tuple(v).map(<[Vid]>::len) != Some(n) {
                        violations.push(Violation::new(
                            "space",
                            format!("scan width differs from n = {n} at step {}", ev.step),
                        ));
                    }
                }
            }
        }
    }
    violations
}

/// How τ_V is read for get views.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum GetTauMode {
    /// First step at which every register equals V.
    Equality,
    /// First step at which V is a subset of every register.
    Subset,
}

/// τ tables for a set of tracked values and get views.
#[derive(Clone, Debug, Default)]
pub struct TauTable {
    /// τ_v per tracked (lens-level) value.
    pub value_tau: HashMap<Vid, u64>,
    /// τ_V per tracked get view.
    pub view_tau: HashMap<Vid, u64>,
}

/// Sweeps the register timeline computing first-coverage steps.
///
/// `values` are lens-level values (τ_v: v in every lens cell); `views` are
/// get results (τ_V per `mode`).
pub fn tau_table(
    trace: &Trace,
    arena: &mut ValueArena,
    lens: &Lens,
    values: &[Vid],
    views: &[Vid],
    mode: GetTauMode,
) -> TauTable {
    let n = trace.n;
    let empty = arena.empty_set();
    let mut raw_cells = vec![empty; n];
    let mut table = TauTable::default();
    let stored: Vec<(Vid, Vid)> = values
        .iter()
        .map(|&v| (v, lens.stored(arena, v)))
        .collect();

    let mut lens_cells = vec![empty; n];
    let check_point = |arena: &mut ValueArena,
                           raw_cells: &[Vid],
                           lens_cells: &mut Vec<Vid>,
                           table: &mut TauTable,
                           step: u64| {
        for (i, &raw) in raw_cells.iter().enumerate() {
            lens_cells[i] = lens.cell(arena, raw);
        }
        for &(v, stored_v) in &stored {
            if table.value_tau.contains_key(&v) {
                continue;
            }
            if raw_cells
                .iter()
                .all(|&c| arena.set_contains(c, stored_v))
            {
                table.value_tau.insert(v, step);
            }
        }
        for &view in views {
            if table.view_tau.contains_key(&view) {
                continue;
            }
            let covered = match mode {
                GetTauMode::Equality => lens_cells.iter().all(|&c| c == view),
                GetTauMode::Subset => lens_cells
                    .iter()
                    .all(|&c| arena.set_is_subset(view, c)),
            };
            if covered {
                table.view_tau.insert(view, step);
            }
        }
    };

    // Step "before anything": registers all empty (τ of the empty view).
    check_point(arena, &raw_cells, &mut lens_cells, &mut table, 0);
    for ev in &trace.events {
        if matches!(ev.kind, EventKind::Write | EventKind::Update) {
            let idx = arena.as_int(ev.args[0]).expect("index arg") as usize;
            raw_cells[idx] = ev.args[1];
            check_point(arena, &raw_cells, &mut lens_cells, &mut table, ev.step);
        }
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{run, CrashPlan, ModelConfig, SchedulePolicy};
    use crate::weakset::WeakSetProgram;

    #[test]
    fn replay_soundness_on_real_runs() {
        for seed in 0..32 {
            let mut out = run(
                vec![WeakSetProgram::add_get(1), WeakSetProgram::add_get(2)],
                &ModelConfig::new(2, 0).with_seed(seed).with_max_steps(5_000),
                &CrashPlan::none(),
                &SchedulePolicy::SeededRandom,
            )
            .unwrap();
            assert!(replay_soundness(&out.trace, &mut out.arena).is_empty());
            assert!(space_accounting(&out.trace, &out.arena).is_empty());
        }
    }

    #[test]
    fn tau_of_completed_add_is_defined() {
        let mut out = run(
            vec![WeakSetProgram::add_get(7), WeakSetProgram::new(vec![])],
            &ModelConfig::new(2, 0).with_max_steps(5_000),
            &CrashPlan::none(),
            &SchedulePolicy::RoundRobin,
        )
        .unwrap();
        let seven = out.arena.int(7);
        let table = tau_table(
            &out.trace,
            &mut out.arena,
            &Lens::Physical,
            &[seven],
            &[],
            GetTauMode::Equality,
        );
        let tau = table.value_tau[&seven];
        let ops = ws_ops(&out.trace, &Lens::Physical);
        let add = &ops[0];
        assert!(tau <= add.respond_step.unwrap());
    }
}
