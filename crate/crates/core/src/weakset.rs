//! The anonymous non-blocking atomic weak set, plus multiplexing of
//! arbitrarily many logical weak sets over the single physical instance.
//!
//! A weak set stores values and supports only `add(v) -> ACK` and
//! `get() -> set` (no remove). The implementation keeps a per-process
//! monotone `View` of known values and cycles `update(next, View)` /
//! `scan()` over the n snapshot components: an `add(v)` returns once `v`
//! appears in every component, a `get()` once every component equals the
//! caller's `View`. Once a value sits in all n components it can no longer
//! be overwritten everywhere unnoticed, because at most n-1 components are
//! covered by pending updates.
//!
//! Multiplexing tags values with the logical object's path, so the whole
//! protocol stack above (safe agreement, set agreement, barycentric rounds,
//! the simulation grid) still occupies exactly n physical registers.

use crate::sim::{Effect, MemOp, MemResponse, ObjectId, OpKind, Program, RetVal, StepCtx};
use crate::value::{Node, ValueArena, ValueTree, Vid};

/// Seeded faults for checker validation. `Faithful` is the real algorithm;
/// the others each break one load-bearing line so the verification harness
/// can demonstrate it catches the breakage.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Default)]
pub enum Mutation {
    #[default]
    Faithful,
    /// `add` returns after a full cycle of updates without the confirming
    /// scan.
    AddDropsFinalScan,
    /// `get` returns once n-1 components equal its view.
    GetGuardOffByOne,
    /// Views never absorb scanned values.
    SkipViewAbsorb,
}

/// Per-process weak-set client state: the monotone `View`. One per process,
/// shared by every operation the process runs (including multiplexed ones).
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct WsClient {
    pub view: Option<Vid>,
}

impl WsClient {
    pub fn new() -> Self {
        WsClient { view: None }
    }

    fn view(&mut self, arena: &mut ValueArena) -> Vid {
        *self.view.get_or_insert_with(|| arena.empty_set())
    }
}

impl Default for WsClient {
    fn default() -> Self {
        Self::new()
    }
}

/// `vals(Snap)`: union of all snapshot components.
pub fn vals(arena: &mut ValueArena, snap: &[Vid]) -> Vid {
    let mut acc = arena.empty_set();
    for &cell in snap {
        acc = arena.set_union(acc, cell);
    }
    acc
}

/// Encodes a logical object path as the tag prefix.
pub fn path_vid(arena: &mut ValueArena, path: &[i64]) -> Vid {
    let ids = path.iter().map(|&p| arena.int(p)).collect();
    arena.tuple(ids)
}

/// A value of logical object `path`, as stored in the physical set.
pub fn tag(arena: &mut ValueArena, path: &[i64], value: Vid) -> Vid {
    let oid = path_vid(arena, path);
    arena.tuple(vec![oid, value])
}

/// Restricts a physical value-set to logical object `path`, stripping tags.
pub fn untag_filter(arena: &mut ValueArena, set: Vid, path: &[i64]) -> Vid {
    let oid = path_vid(arena, path);
    let mut out = Vec::new();
    for &item in arena.elems(set) {
        if let Node::Tuple(parts) = arena.node(item) {
            if parts.len() == 2 && parts[0] == oid {
                out.push(parts[1]);
            }
        }
    }
    arena.set_of(out)
}

/// What a nested machine produced this turn.
pub(crate) enum Poll {
    Mem(MemOp),
    Done(RetVal),
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum Phase {
    FirstScan,
    Updating,
    LoopScan,
}

/// One `add` or `get` in flight, driving the snapshot object.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub(crate) struct WsOp {
    object: ObjectId,
    /// Physical value being added; `None` for get.
    adding: Option<Vid>,
    /// Logical path for get-result filtering; `None` on the physical set.
    filter: Option<Vec<i64>>,
    phase: Phase,
    next: usize,
    updates_done: usize,
    mutation: Mutation,
}

impl WsOp {
    /// Physical `add(value)`.
    pub fn add(value: Vid, mutation: Mutation) -> Self {
        WsOp {
            object: ObjectId::WeakSet,
            adding: Some(value),
            filter: None,
            phase: Phase::FirstScan,
            next: 0,
            updates_done: 0,
            mutation,
        }
    }

    /// Physical `get()`.
    pub fn get(mutation: Mutation) -> Self {
        WsOp {
            object: ObjectId::WeakSet,
            adding: None,
            filter: None,
            phase: Phase::FirstScan,
            next: 0,
            updates_done: 0,
            mutation,
        }
    }

    /// `add(value)` on the logical set at `path`.
    pub fn add_logical(arena: &mut ValueArena, path: &[i64], value: Vid, mutation: Mutation) -> Self {
        WsOp {
            object: ObjectId::LogicalSet(path.to_vec()),
            adding: Some(tag(arena, path, value)),
            filter: None,
            phase: Phase::FirstScan,
            next: 0,
            updates_done: 0,
            mutation,
        }
    }

    /// `get()` on the logical set at `path`.
    pub fn get_logical(path: &[i64], mutation: Mutation) -> Self {
        WsOp {
            object: ObjectId::LogicalSet(path.to_vec()),
            adding: None,
            filter: Some(path.to_vec()),
            phase: Phase::FirstScan,
            next: 0,
            updates_done: 0,
            mutation,
        }
    }

    fn is_add(&self) -> bool {
        self.adding.is_some()
    }

    /// Emits the invoke event and returns the first memory operation.
    pub fn first(&mut self, ctx: &mut StepCtx<'_>) -> MemOp {
        let (op, args) = match self.adding {
            Some(value) => {
                // Logical adds advertise the untagged argument.
                let shown = match (&self.object, ctx.arena.node(value)) {
                    (ObjectId::LogicalSet(_), Node::Tuple(parts)) => parts[1],
                    _ => value,
                };
                (OpKind::Add, vec![shown])
            }
            None => (OpKind::Get, Vec::new()),
        };
        ctx.invoke(self.object.clone(), op, args);
        MemOp::Scan
    }

    /// Result a finished get returns: the view, filtered for logical sets.
    fn get_result(&self, arena: &mut ValueArena, view: Vid) -> Vid {
        match &self.filter {
            Some(path) => untag_filter(arena, view, path),
            None => view,
        }
    }

    fn absorb(&self, client: &mut WsClient, arena: &mut ValueArena, snap: &[Vid]) {
        let view = client.view(arena);
        let mut merged = if self.mutation == Mutation::SkipViewAbsorb {
            view
        } else {
            let seen = vals(arena, snap);
            arena.set_union(view, seen)
        };
        if self.phase == Phase::FirstScan {
            if let Some(v) = self.adding {
                merged = arena.set_insert(merged, v);
            }
        }
        client.view = Some(merged);
    }

    /// Loop guard satisfied?
    fn guard_met(&self, client: &mut WsClient, arena: &mut ValueArena, snap: &[Vid]) -> bool {
        match self.adding {
            Some(v) => snap.iter().filter(|&&c| arena.set_contains(c, v)).count() >= snap.len(),
            None => {
                let view = client.view(arena);
                let needed = if self.mutation == Mutation::GetGuardOffByOne {
                    snap.len().saturating_sub(1)
                } else {
                    snap.len()
                };
                snap.iter().filter(|&&c| c == view).count() >= needed
            }
        }
    }

    fn finish(&self, client: &mut WsClient, ctx: &mut StepCtx<'_>) -> Poll {
        let ret = if self.is_add() {
            RetVal::Ack
        } else {
            let view = client.view(ctx.arena);
            RetVal::Val(self.get_result(ctx.arena, view))
        };
        let op = if self.is_add() { OpKind::Add } else { OpKind::Get };
        ctx.respond(self.object.clone(), op, ret);
        Poll::Done(ret)
    }

    pub fn resume(
        &mut self,
        client: &mut WsClient,
        ctx: &mut StepCtx<'_>,
        resp: MemResponse,
    ) -> Poll {
        match self.phase {
            Phase::FirstScan | Phase::LoopScan => {
                let snap = resp.snapshot();
                self.absorb(client, ctx.arena, &snap);
                if self.guard_met(client, ctx.arena, &snap) {
                    self.finish(client, ctx)
                } else {
                    self.phase = Phase::Updating;
                    let view = client.view(ctx.arena);
                    Poll::Mem(MemOp::Update(self.next, view))
                }
            }
            Phase::Updating => {
                debug_assert_eq!(resp, MemResponse::Ack);
                self.next = (self.next + 1) % ctx.n();
                self.updates_done += 1;
                if self.is_add()
                    && self.mutation == Mutation::AddDropsFinalScan
                    && self.updates_done.is_multiple_of(ctx.n())
                {
                    return self.finish(client, ctx);
                }
                self.phase = Phase::LoopScan;
                Poll::Mem(MemOp::Scan)
            }
        }
    }
}

/// One scripted weak-set operation.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum WsScriptOp {
    Add(ValueTree),
    Get,
    AddLogical(Vec<i64>, ValueTree),
    GetLogical(Vec<i64>),
}

/// A process running a fixed script of weak-set operations.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct WeakSetProgram {
    script: Vec<WsScriptOp>,
    at: usize,
    client: WsClient,
    current: Option<WsOp>,
    mutation: Mutation,
}

impl WeakSetProgram {
    pub fn new(script: Vec<WsScriptOp>) -> Self {
        Self::with_mutation(script, Mutation::Faithful)
    }

    pub fn with_mutation(script: Vec<WsScriptOp>, mutation: Mutation) -> Self {
        WeakSetProgram {
            script,
            at: 0,
            client: WsClient::new(),
            current: None,
            mutation,
        }
    }

    /// `add(v); get()` with an integer input, the workhorse test script.
    pub fn add_get(v: i64) -> Self {
        Self::new(vec![WsScriptOp::Add(ValueTree::Int(v)), WsScriptOp::Get])
    }
}

impl Program for WeakSetProgram {
    fn step(&mut self, ctx: &mut StepCtx<'_>, resp: Option<MemResponse>) -> Effect {
        let mut resp = resp;
        loop {
            match &mut self.current {
                None => {
                    let Some(spec) = self.script.get(self.at) else {
                        return Effect::Halt;
                    };
                    self.at += 1;
                    let mut op = match spec {
                        WsScriptOp::Add(tree) => {
                            let v = ctx.arena.from_tree(tree);
                            WsOp::add(v, self.mutation)
                        }
                        WsScriptOp::Get => WsOp::get(self.mutation),
                        WsScriptOp::AddLogical(path, tree) => {
                            let v = ctx.arena.from_tree(tree);
                            WsOp::add_logical(ctx.arena, path, v, self.mutation)
                        }
                        WsScriptOp::GetLogical(path) => WsOp::get_logical(path, self.mutation),
                    };
                    let mem = op.first(ctx);
                    self.current = Some(op);
                    return Effect::Mem(mem);
                }
                Some(op) => {
                    let r = resp.take().expect("mid-operation step needs a response");
                    match op.resume(&mut self.client, ctx, r) {
                        Poll::Mem(mem) => return Effect::Mem(mem),
                        Poll::Done(_) => {
                            self.current = None;
                        }
                    }
                }
            }
        }
    }

    fn view(&self) -> Option<Vid> {
        self.client.view
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{run, CrashPlan, ModelConfig, SchedulePolicy};
    use crate::value::ValueTree;

    fn solo(script: Vec<WsScriptOp>) -> crate::sim::RunOutput<WeakSetProgram> {
        run(
            vec![WeakSetProgram::new(script)],
            &ModelConfig::new(1, 0).with_max_steps(10_000),
            &CrashPlan::none(),
            &SchedulePolicy::RoundRobin,
        )
        .unwrap()
    }

    fn get_ret(out: &crate::sim::RunOutput<WeakSetProgram>, actor: usize, idx: usize) -> Vid {
        match out.results(actor)[idx] {
            (OpKind::Get, RetVal::Val(v)) => v,
            other => panic!("expected get result, got {other:?}"),
        }
    }

    #[test]
    fn solo_add_reaches_every_cell() {
        let mut out = run(
            vec![
                WeakSetProgram::new(vec![WsScriptOp::Add(ValueTree::Int(9))]),
                WeakSetProgram::new(vec![]),
                WeakSetProgram::new(vec![]),
            ],
            &ModelConfig::new(3, 0).with_max_steps(10_000),
            &CrashPlan::none(),
            &SchedulePolicy::RoundRobin,
        )
        .unwrap();
        assert_eq!(out.results(0), &[(OpKind::Add, RetVal::Ack)]);
        let nine = out.arena.int(9);
        for &cell in &out.state.cells {
            assert!(out.arena.set_contains(cell, nine));
        }
        // Solo on a fresh object: one leading scan, then n update+scan pairs.
        assert_eq!(out.steps, 1 + 2 * 3);
    }

    #[test]
    fn get_on_fresh_object_is_empty() {
        let mut out = solo(vec![WsScriptOp::Get]);
        let v = get_ret(&out, 0, 0);
        assert!(out.arena.set_is_empty(v));
        let _ = &mut out;
    }

    #[test]
    fn add_then_get_sequential() {
        let mut out = solo(vec![WsScriptOp::Add(ValueTree::Int(3)), WsScriptOp::Get]);
        let got = get_ret(&out, 0, 1);
        let three = out.arena.int(3);
        let expect = out.arena.set_of(vec![three]);
        assert_eq!(got, expect);
    }

    #[test]
    fn multiplexed_sets_are_disjoint() {
        let mut out = solo(vec![
            WsScriptOp::AddLogical(vec![0], ValueTree::Int(4)),
            WsScriptOp::GetLogical(vec![1]),
            WsScriptOp::GetLogical(vec![0]),
        ]);
        let other = get_ret(&out, 0, 1);
        assert!(out.arena.set_is_empty(other));
        let same = get_ret(&out, 0, 2);
        let four = out.arena.int(4);
        let expect = out.arena.set_of(vec![four]);
        assert_eq!(same, expect);
    }

    #[test]
    fn concurrent_adds_converge() {
        for seed in 0..64 {
            let out = run(
                vec![WeakSetProgram::add_get(1), WeakSetProgram::add_get(2)],
                &ModelConfig::new(2, 0).with_seed(seed).with_max_steps(10_000),
                &CrashPlan::none(),
                &SchedulePolicy::SeededRandom,
            )
            .unwrap();
            assert!(!out.trace.truncated, "weak set run starved under seed {seed}");
            let mut arena = out.arena.clone();
            let one = arena.int(1);
            let two = arena.int(2);
            let both = arena.set_of(vec![one, two]);
            // After both add;get scripts finish, both registers hold {1,2}.
            assert!(out.state.cells.iter().all(|&c| c == both));
        }
    }

    #[test]
    fn view_is_monotone_across_operations() {
        let out = run(
            vec![WeakSetProgram::add_get(1), WeakSetProgram::add_get(2)],
            &ModelConfig::new(2, 0).with_seed(7).with_max_steps(10_000),
            &CrashPlan::none(),
            &SchedulePolicy::SeededRandom,
        )
        .unwrap();
        // Update arguments per actor are exactly the views at update time;
        // they must be ⊆-monotone.
        for actor in 0..2u32 {
            let mut prev: Option<Vid> = None;
            for ev in out.trace.memory_events() {
                if ev.actor == actor && ev.kind == crate::sim::EventKind::Update {
                    let cur = ev.args[1];
                    if let Some(p) = prev {
                        assert!(out.arena.set_is_subset(p, cur));
                    }
                    prev = Some(cur);
                }
            }
        }
    }
}
