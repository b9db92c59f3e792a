//! Deterministic cooperative simulator of n anonymous asynchronous processes.
//!
//! Processes are step functions ([`Program`]) with no access to any process
//! identifier; they communicate only through an array of n multi-writer
//! registers and an atomic snapshot object layered over it. The simulator
//! interleaves one memory-level event per step, injects crashes from a
//! [`CrashPlan`], and records everything in a [`Trace`].
//!
//! Scheduling is a pure function of the inputs: identical programs, config,
//! crash plan and policy produce a bit-identical trace.

pub mod explore;
pub mod snapshot;
pub mod trace;

use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_pcg::Pcg64Mcg;
use serde::{Deserialize, Serialize};

use crate::value::{ValueArena, Vid};
use snapshot::{AtomicOracle, SnapshotBackend};

/// Model parameters for one run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Process count.
    pub n: usize,
    /// Crash budget; `t < n`. `t = 0` gives fault-free runs.
    pub t: usize,
    /// Total step budget; the trace is truncated once exhausted.
    pub max_steps: u64,
    /// Seed for the seeded-random policy.
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(n: usize, t: usize) -> Self {
        Self {
            n,
            t,
            max_steps: 100_000,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_steps(mut self, max_steps: u64) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n == 0 {
            return Err(SimError::BadConfig("n must be positive".into()));
        }
        if self.t >= self.n {
            return Err(SimError::BadConfig(format!(
                "t = {} must be < n = {}",
                self.t, self.n
            )));
        }
        if self.max_steps == 0 {
            return Err(SimError::BadConfig("max_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("crash plan names {actors} distinct actors, budget is t = {t}")]
    CrashPlanTooLarge { actors: usize, t: usize },
    #[error("crash plan rule for actor {0} out of range (n = {1})")]
    CrashPlanActorRange(u32, usize),
    #[error("simulation fault: register index {index} out of range (n = {n})")]
    IndexOutOfRange { index: usize, n: usize },
}

/// One atomic memory-level operation.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum MemOp {
    /// `read(i)`: contents of register cell `i`.
    Read(usize),
    /// `write(i, v)`: replace cell `i` with the value-set `v`.
    Write(usize, Vid),
    /// Snapshot `update(i, v)`.
    Update(usize, Vid),
    /// Snapshot `scan()`: all n components at this step.
    Scan,
}

/// Result of a memory operation, handed back to the program.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum MemResponse {
    Ack,
    Cell(Vid),
    Snapshot(Vec<Vid>),
}

impl MemResponse {
    pub fn snapshot(self) -> Vec<Vid> {
        match self {
            MemResponse::Snapshot(cells) => cells,
            other => panic!("expected snapshot response, got {other:?}"),
        }
    }
}

/// What a program does with its turn.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Effect {
    /// Perform one memory operation.
    Mem(MemOp),
    /// The program is finished; the process takes no more steps.
    Halt,
}

/// Trace event kinds.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Invoke,
    Respond,
    Read,
    Write,
    Scan,
    Update,
    Crash,
}

impl EventKind {
    pub fn is_memory(self) -> bool {
        matches!(
            self,
            EventKind::Read | EventKind::Write | EventKind::Scan | EventKind::Update
        )
    }

    pub fn is_snapshot(self) -> bool {
        matches!(self, EventKind::Scan | EventKind::Update)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Invoke => "invoke",
            EventKind::Respond => "respond",
            EventKind::Read => "read",
            EventKind::Write => "write",
            EventKind::Scan => "scan",
            EventKind::Update => "update",
            EventKind::Crash => "crash",
        }
    }
}

/// Operation names appearing in traces.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub enum OpKind {
    Read,
    Write,
    Scan,
    Update,
    Add,
    Get,
    Propose,
    Resolve,
    SetAgree,
    BaryAgree,
    Simulate,
    Crash,
}

impl OpKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OpKind::Read => "read",
            OpKind::Write => "write",
            OpKind::Scan => "scan",
            OpKind::Update => "update",
            OpKind::Add => "add",
            OpKind::Get => "get",
            OpKind::Propose => "propose",
            OpKind::Resolve => "resolve",
            OpKind::SetAgree => "set_agree",
            OpKind::BaryAgree => "bary_agree",
            OpKind::Simulate => "simulate",
            OpKind::Crash => "crash",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "read" => OpKind::Read,
            "write" => OpKind::Write,
            "scan" => OpKind::Scan,
            "update" => OpKind::Update,
            "add" => OpKind::Add,
            "get" => OpKind::Get,
            "propose" => OpKind::Propose,
            "resolve" => OpKind::Resolve,
            "set_agree" => OpKind::SetAgree,
            "bary_agree" => OpKind::BaryAgree,
            "simulate" => OpKind::Simulate,
            "crash" => OpKind::Crash,
            _ => return None,
        })
    }
}

/// Identifier of the object an event belongs to.
///
/// Logical objects carry integer paths: multiplexed weak sets and safe
/// agreement objects are addressed by where they sit in the protocol's
/// object family (e.g. `SA[round,i]` in the simulation grid).
#[derive(Clone, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub enum ObjectId {
    /// The physical register array.
    Registers,
    /// The physical weak set.
    WeakSet,
    /// A logical weak set multiplexed over the physical one.
    LogicalSet(Vec<i64>),
    /// A safe agreement object.
    SafeAgreement(Vec<i64>),
    /// The top-level (t+1)-set agreement protocol.
    SetAgreement,
    /// The top-level b-iterated barycentric agreement protocol.
    Barycentric,
    /// The top-level BG-simulation.
    BgSim,
}

fn fmt_path(f: &mut fmt::Formatter<'_>, name: &str, path: &[i64]) -> fmt::Result {
    write!(f, "{name}[")?;
    for (i, p) in path.iter().enumerate() {
        if i > 0 {
            write!(f, ",")?;
        }
        write!(f, "{p}")?;
    }
    write!(f, "]")
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectId::Registers => write!(f, "R"),
            ObjectId::WeakSet => write!(f, "SET"),
            ObjectId::LogicalSet(path) => fmt_path(f, "SET", path),
            ObjectId::SafeAgreement(path) => fmt_path(f, "SA", path),
            ObjectId::SetAgreement => write!(f, "KSET"),
            ObjectId::Barycentric => write!(f, "BARY"),
            ObjectId::BgSim => write!(f, "BGSIM"),
        }
    }
}

impl ObjectId {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "R" => return Some(ObjectId::Registers),
            "SET" => return Some(ObjectId::WeakSet),
            "KSET" => return Some(ObjectId::SetAgreement),
            "BARY" => return Some(ObjectId::Barycentric),
            "BGSIM" => return Some(ObjectId::BgSim),
            _ => {}
        }
        let (name, rest) = s.split_once('[')?;
        let inner = rest.strip_suffix(']')?;
        let path = if inner.is_empty() {
            Vec::new()
        } else {
            inner
                .split(',')
                .map(|p| p.parse().ok())
                .collect::<Option<Vec<i64>>>()?
        };
        match name {
            "SET" => Some(ObjectId::LogicalSet(path)),
            "SA" => Some(ObjectId::SafeAgreement(path)),
            _ => None,
        }
    }
}

/// Return value recorded in respond and memory events.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum RetVal {
    Ack,
    Val(Vid),
}

/// One trace event.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Event {
    /// Monotone step counter. Invoke/respond events share the step of the
    /// memory event they are co-located with.
    pub step: u64,
    /// Simulator-private process index, emitted for checking only.
    pub actor: u32,
    pub kind: EventKind,
    pub object: ObjectId,
    pub op: OpKind,
    pub args: Vec<Vid>,
    pub ret: Option<RetVal>,
}

/// Full event log of one run.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    pub events: Vec<Event>,
    pub n: usize,
    /// True when the step budget ran out with work still pending.
    pub truncated: bool,
}

impl Trace {
    /// Invoke/respond pairs of the given nesting level (0 = outermost ops).
    pub fn ops_at_depth(&self, depth: usize) -> Vec<OpRecord> {
        let mut depths = vec![0usize; self.n];
        let mut open: Vec<Vec<usize>> = vec![Vec::new(); self.n];
        let mut out: Vec<OpRecord> = Vec::new();
        for (pos, ev) in self.events.iter().enumerate() {
            let a = ev.actor as usize;
            match ev.kind {
                EventKind::Invoke => {
                    if depths[a] == depth {
                        open[a].push(out.len());
                        out.push(OpRecord {
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
                    }
                    depths[a] += 1;
                }
                EventKind::Respond => {
                    depths[a] -= 1;
                    if depths[a] == depth {
                        let idx = open[a].pop().expect("respond without invoke");
                        out[idx].ret = ev.ret;
                        out[idx].respond_step = Some(ev.step);
                        out[idx].respond_pos = Some(pos);
                    }
                }
                _ => {}
            }
        }
        out
    }

    /// All memory-level events.
    pub fn memory_events(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| e.kind.is_memory())
    }

    pub fn crashed_actors(&self) -> Vec<u32> {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::Crash)
            .map(|e| e.actor)
            .collect()
    }

    /// Checks invoke/respond well-formedness: properly nested per actor, no
    /// event follows a crash by the same actor, and at every step exactly
    /// one actor performs at most one memory-level event.
    pub fn check_well_formed(&self) -> Result<(), String> {
        let mut depths = vec![0i64; self.n];
        let mut crashed = vec![false; self.n];
        let mut last_step = 0u64;
        let mut last_memory_step: Option<(u64, u32)> = None;
        for ev in &self.events {
            let a = ev.actor as usize;
            if ev.step < last_step {
                return Err(format!("step went backwards at {:?}", ev));
            }
            if ev.kind.is_memory() {
                if last_memory_step == Some((ev.step, ev.actor))
                    || matches!(last_memory_step, Some((s, _)) if s == ev.step)
                {
                    return Err(format!("second memory event at step {}", ev.step));
                }
                last_memory_step = Some((ev.step, ev.actor));
            }
            last_step = ev.step;
            if crashed[a] {
                return Err(format!("actor {} acted after crashing: {:?}", a, ev));
            }
            match ev.kind {
                EventKind::Invoke => depths[a] += 1,
                EventKind::Respond => {
                    depths[a] -= 1;
                    if depths[a] < 0 {
                        return Err(format!("respond without invoke: {:?}", ev));
                    }
                }
                EventKind::Crash => crashed[a] = true,
                _ => {}
            }
        }
        Ok(())
    }
}

/// A completed or pending operation reconstructed from a trace.
#[derive(Clone, Debug)]
pub struct OpRecord {
    pub actor: u32,
    pub object: ObjectId,
    pub op: OpKind,
    pub args: Vec<Vid>,
    pub ret: Option<RetVal>,
    pub invoke_step: u64,
    pub invoke_pos: usize,
    pub respond_step: Option<u64>,
    pub respond_pos: Option<usize>,
}

impl OpRecord {
    pub fn is_complete(&self) -> bool {
        self.respond_pos.is_some()
    }
}

/// Crash injection rules. At most `t` distinct actors may appear.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CrashPlan {
    pub rules: Vec<CrashRule>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CrashRule {
    pub actor: u32,
    pub point: CrashPoint,
}

/// When a crash fires. Window forms exist so hypotheses like "no process
/// fails while performing a propose" can be expressed and tested.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CrashPoint {
    /// Crash once the global step counter reaches `step`.
    AtStep(u64),
    /// Crash at the first step >= `step` at which the actor is not inside
    /// an operation of the given kind.
    OutsideOp { step: u64, op: OpKind },
    /// Crash as soon as the actor is inside an operation of the given kind
    /// (optionally on a specific object).
    InsideOp { op: OpKind, object: Option<ObjectId> },
}

impl CrashPlan {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn at_step(actor: u32, step: u64) -> Self {
        Self {
            rules: vec![CrashRule {
                actor,
                point: CrashPoint::AtStep(step),
            }],
        }
    }

    pub fn validate(&self, config: &ModelConfig) -> Result<(), SimError> {
        let mut actors: Vec<u32> = self.rules.iter().map(|r| r.actor).collect();
        actors.sort_unstable();
        actors.dedup();
        if let Some(&a) = actors.iter().find(|&&a| a as usize >= config.n) {
            return Err(SimError::CrashPlanActorRange(a, config.n));
        }
        if actors.len() > config.t {
            return Err(SimError::CrashPlanTooLarge {
                actors: actors.len(),
                t: config.t,
            });
        }
        Ok(())
    }
}

/// Scheduler policies. `Fixed` replays an explicit actor sequence and backs
/// the trace-replay checkers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SchedulePolicy {
    RoundRobin,
    SeededRandom,
    Fixed(Vec<u32>),
}

/// Context handed to programs on every step. Deliberately exposes the model
/// size and the value arena but no process identity.
pub struct StepCtx<'a> {
    pub arena: &'a mut ValueArena,
    events: &'a mut Vec<Event>,
    n: usize,
    step: u64,
    actor: u32,
}

impl<'a> StepCtx<'a> {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Record the start of a (possibly nested) operation.
    pub fn invoke(&mut self, object: ObjectId, op: OpKind, args: Vec<Vid>) {
        self.events.push(Event {
            step: self.step,
            actor: self.actor,
            kind: EventKind::Invoke,
            object,
            op,
            args,
            ret: None,
        });
    }

    /// Record the completion of the innermost open operation.
    pub fn respond(&mut self, object: ObjectId, op: OpKind, ret: RetVal) {
        self.events.push(Event {
            step: self.step,
            actor: self.actor,
            kind: EventKind::Respond,
            object,
            op,
            args: Vec::new(),
            ret: Some(ret),
        });
    }
}

/// A deterministic process automaton. All n processes of a run share one
/// program type (anonymous processes execute identical code); instances
/// differ only in their private inputs.
pub trait Program: Clone + Eq + std::hash::Hash + fmt::Debug {
    /// Advance past the response of the previous memory operation (`None` on
    /// the very first call) up to the next memory operation or completion.
    fn step(&mut self, ctx: &mut StepCtx<'_>, resp: Option<MemResponse>) -> Effect;

    /// Current weak-set `View` when the program is a weak-set client; used
    /// by the proof monitors.
    fn view(&self) -> Option<Vid> {
        None
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum ActorStatus {
    Runnable,
    Crashed,
    Halted,
}

/// Per-actor harness state: the program plus scheduling bookkeeping. The
/// simulator holds process identities privately; programs never see them.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct ActorState<P: Program> {
    pub program: P,
    pending: Option<MemOp>,
    started: bool,
    pub status: ActorStatus,
    /// Stack of open operations (object, op), outermost first.
    pub op_stack: Vec<(ObjectId, OpKind)>,
    /// Results of completed outermost operations.
    pub results: Vec<(OpKind, RetVal)>,
}

impl<P: Program> ActorState<P> {
    fn new(program: P) -> Self {
        Self {
            program,
            pending: None,
            started: false,
            status: ActorStatus::Runnable,
            op_stack: Vec::new(),
            results: Vec::new(),
        }
    }

    pub fn is_runnable(&self) -> bool {
        self.status == ActorStatus::Runnable
    }

    /// True when the actor is inside at least one unfinished operation.
    pub fn has_pending_op(&self) -> bool {
        !self.op_stack.is_empty()
    }

    /// The kind of this actor's next snapshot-level operation, if already
    /// determined: the pending memory op if there is one, otherwise a probe
    /// of the program's first move.
    pub fn pending_mem(&self) -> Option<MemOp> {
        self.pending
    }
}

/// Global simulator state; cloneable so the explorer can branch.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct SimState<P: Program> {
    pub cells: Vec<Vid>,
    pub actors: Vec<ActorState<P>>,
    pub crashed: u32,
}

impl<P: Program> SimState<P> {
    pub fn new(programs: Vec<P>, arena: &mut ValueArena) -> Self {
        let n = programs.len();
        let empty = arena.empty_set();
        let mut state = SimState {
            cells: vec![empty; n],
            actors: programs.into_iter().map(ActorState::new).collect(),
            crashed: 0,
        };
        // An actor whose program halts on its very first step without doing
        // anything never gets scheduled at all.
        for (idx, actor) in state.actors.iter_mut().enumerate() {
            let mut probe = actor.program.clone();
            let mut scratch = Vec::new();
            let mut ctx = StepCtx {
                arena,
                events: &mut scratch,
                n,
                step: 0,
                actor: idx as u32,
            };
            if matches!(probe.step(&mut ctx, None), Effect::Halt) && scratch.is_empty() {
                actor.status = ActorStatus::Halted;
                actor.started = true;
            }
        }
        state
    }

    pub fn all_done(&self) -> bool {
        self.actors.iter().all(|a| !a.is_runnable())
    }

    pub fn runnable(&self) -> impl Iterator<Item = usize> + '_ {
        self.actors
            .iter()
            .enumerate()
            .filter(|(_, a)| a.is_runnable())
            .map(|(i, _)| i)
    }

    pub fn completions(&self) -> usize {
        self.actors.iter().map(|a| a.results.len()).sum()
    }

    /// Executes one turn for `actor`: exactly one memory-level event, plus
    /// any invoke/respond bookkeeping the program emits around it.
    pub fn take_turn(
        &mut self,
        actor: usize,
        step: u64,
        arena: &mut ValueArena,
        events: &mut Vec<Event>,
    ) -> Result<(), SimError> {
        let n = self.cells.len();
        let state = &mut self.actors[actor];
        debug_assert!(state.is_runnable());
        let before = events.len();

        let mut effect = match state.pending.take() {
            Some(op) => Effect::Mem(op),
            None => {
                debug_assert!(!state.started);
                state.started = true;
                let mut ctx = StepCtx {
                    arena,
                    events,
                    n,
                    step,
                    actor: actor as u32,
                };
                state.program.step(&mut ctx, None)
            }
        };

        if let Effect::Mem(op) = effect {
            let (kind, opkind, args, resp) = apply_mem(&mut self.cells, op, arena)?;
            events.push(Event {
                step,
                actor: actor as u32,
                kind,
                object: ObjectId::Registers,
                op: opkind,
                args,
                ret: Some(match &resp {
                    MemResponse::Ack => RetVal::Ack,
                    MemResponse::Cell(v) => RetVal::Val(*v),
                    MemResponse::Snapshot(cells) => RetVal::Val(arena.tuple(cells.clone())),
                }),
            });
            let mut ctx = StepCtx {
                arena,
                events,
                n,
                step,
                actor: actor as u32,
            };
            effect = state.program.step(&mut ctx, Some(resp));
        }

        match effect {
            Effect::Mem(op) => state.pending = Some(op),
            Effect::Halt => {
                state.pending = None;
                state.status = ActorStatus::Halted;
            }
        }

        // Maintain the operation stack and outermost results from the
        // invoke/respond events this turn emitted.
        for ev in &events[before..] {
            match ev.kind {
                EventKind::Invoke => state.op_stack.push((ev.object.clone(), ev.op)),
                EventKind::Respond => {
                    let (_, op) = state
                        .op_stack
                        .pop()
                        .expect("program responded without a matching invoke");
                    if state.op_stack.is_empty() {
                        state
                            .results
                            .push((op, ev.ret.expect("respond carries a return value")));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn crash(&mut self, actor: usize, step: u64, events: &mut Vec<Event>) {
        let state = &mut self.actors[actor];
        debug_assert!(state.is_runnable());
        state.status = ActorStatus::Crashed;
        state.pending = None;
        self.crashed += 1;
        events.push(Event {
            step,
            actor: actor as u32,
            kind: EventKind::Crash,
            object: ObjectId::Registers,
            op: OpKind::Crash,
            args: Vec::new(),
            ret: None,
        });
    }
}

fn apply_mem(
    cells: &mut [Vid],
    op: MemOp,
    arena: &mut ValueArena,
) -> Result<(EventKind, OpKind, Vec<Vid>, MemResponse), SimError> {
    let n = cells.len();
    let check = |index: usize| {
        if index >= n {
            Err(SimError::IndexOutOfRange { index, n })
        } else {
            Ok(())
        }
    };
    Ok(match op {
        MemOp::Read(i) => {
            check(i)?;
            let idx = arena.int(i as i64);
            (
                EventKind::Read,
                OpKind::Read,
                vec![idx],
                MemResponse::Cell(cells[i]),
            )
        }
        MemOp::Write(i, v) => {
            check(i)?;
            cells[i] = v;
            let idx = arena.int(i as i64);
            (EventKind::Write, OpKind::Write, vec![idx, v], MemResponse::Ack)
        }
        MemOp::Update(i, v) => {
            check(i)?;
            AtomicOracle.update(cells, i, v);
            let idx = arena.int(i as i64);
            (
                EventKind::Update,
                OpKind::Update,
                vec![idx, v],
                MemResponse::Ack,
            )
        }
        MemOp::Scan => {
            let snap = AtomicOracle.scan(cells);
            (
                EventKind::Scan,
                OpKind::Scan,
                Vec::new(),
                MemResponse::Snapshot(snap),
            )
        }
    })
}

/// Everything a run produces.
#[derive(Clone, Debug)]
pub struct RunOutput<P: Program> {
    pub trace: Trace,
    pub arena: ValueArena,
    pub state: SimState<P>,
    pub steps: u64,
}

impl<P: Program> RunOutput<P> {
    /// Return values of completed outermost operations, per actor.
    pub fn results(&self, actor: usize) -> &[(OpKind, RetVal)] {
        &self.state.actors[actor].results
    }
}

struct CrashDriver {
    rules: Vec<(CrashRule, bool)>,
}

impl CrashDriver {
    fn new(plan: &CrashPlan) -> Self {
        Self {
            rules: plan.rules.iter().map(|r| (r.clone(), false)).collect(),
        }
    }

    /// Actors whose rules fire at the given step, in actor order.
    fn due<P: Program>(&mut self, step: u64, state: &SimState<P>) -> Vec<usize> {
        let mut due = Vec::new();
        for (rule, fired) in self.rules.iter_mut() {
            if *fired {
                continue;
            }
            let actor = rule.actor as usize;
            if !state.actors[actor].is_runnable() {
                *fired = true;
                continue;
            }
            let stack = &state.actors[actor].op_stack;
            let hit = match &rule.point {
                CrashPoint::AtStep(s) => step >= *s,
                CrashPoint::OutsideOp { step: s, op } => {
                    step >= *s && !stack.iter().any(|(_, o)| o == op)
                }
                CrashPoint::InsideOp { op, object } => stack
                    .iter()
                    .any(|(obj, o)| o == op && object.as_ref().is_none_or(|want| want == obj)),
            };
            if hit {
                *fired = true;
                due.push(actor);
            }
        }
        due.sort_unstable();
        due.dedup();
        due
    }
}

/// Runs `programs` (one per process) to completion or budget exhaustion.
///
/// Identical arguments yield a bit-identical trace.
pub fn run<P: Program>(
    programs: Vec<P>,
    config: &ModelConfig,
    crash_plan: &CrashPlan,
    policy: &SchedulePolicy,
) -> Result<RunOutput<P>, SimError> {
    config.validate()?;
    crash_plan.validate(config)?;
    assert_eq!(
        programs.len(),
        config.n,
        "one program instance per process required"
    );

    let mut arena = ValueArena::new();
    let mut state = SimState::new(programs, &mut arena);
    let mut events = Vec::new();
    let mut step: u64 = 0;
    let mut rng = Pcg64Mcg::seed_from_u64(config.seed);
    let mut rr_cursor = 0usize;
    let mut fixed_pos = 0usize;
    let mut crashes = CrashDriver::new(crash_plan);
    let mut truncated = false;

    loop {
        for actor in crashes.due(step, &state) {
            if step >= config.max_steps {
                break;
            }
            state.crash(actor, step, &mut events);
            step += 1;
        }
        if state.all_done() {
            break;
        }
        if step >= config.max_steps {
            truncated = true;
            break;
        }
        let runnable: Vec<usize> = state.runnable().collect();
        if runnable.is_empty() {
            break;
        }
        let actor = match policy {
            SchedulePolicy::RoundRobin => {
                let mut pick = rr_cursor;
                while !state.actors[pick % state.actors.len()].is_runnable() {
                    pick += 1;
                }
                rr_cursor = (pick + 1) % state.actors.len();
                pick % state.actors.len()
            }
            SchedulePolicy::SeededRandom => runnable[rng.gen_range(0..runnable.len())],
            SchedulePolicy::Fixed(order) => {
                if fixed_pos >= order.len() {
                    truncated = !state.all_done();
                    break;
                }
                let a = order[fixed_pos] as usize;
                fixed_pos += 1;
                assert!(
                    state.actors[a].is_runnable(),
                    "fixed schedule names non-runnable actor {a}"
                );
                a
            }
        };
        state.take_turn(actor, step, &mut arena, &mut events)?;
        step += 1;
    }

    let n = config.n;
    Ok(RunOutput {
        trace: Trace {
            events,
            n,
            truncated,
        },
        arena,
        state,
        steps: step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Minimal raw program used to exercise the registers directly: runs a
    /// fixed script of memory ops as a single outermost operation each.
    #[derive(Clone, PartialEq, Eq, Hash, Debug)]
    pub struct RawProgram {
        pub script: Vec<MemOp>,
        pub at: usize,
    }

    impl RawProgram {
        pub fn new(script: Vec<MemOp>) -> Self {
            Self { script, at: 0 }
        }
    }

    impl Program for RawProgram {
        fn step(&mut self, ctx: &mut StepCtx<'_>, resp: Option<MemResponse>) -> Effect {
            if let Some(r) = resp {
                let (kind, ret) = match (&self.script[self.at - 1], r) {
                    (MemOp::Read(_), MemResponse::Cell(v)) => (OpKind::Read, RetVal::Val(v)),
                    (MemOp::Scan, MemResponse::Snapshot(cells)) => {
                        (OpKind::Scan, RetVal::Val(ctx.arena.tuple(cells)))
                    }
                    (MemOp::Write(..), MemResponse::Ack) => (OpKind::Write, RetVal::Ack),
                    (MemOp::Update(..), MemResponse::Ack) => (OpKind::Update, RetVal::Ack),
                    other => panic!("unexpected response pairing {other:?}"),
                };
                ctx.respond(ObjectId::Registers, kind, ret);
            }
            if self.at == self.script.len() {
                return Effect::Halt;
            }
            let op = self.script[self.at];
            self.at += 1;
            let kind = match op {
                MemOp::Read(_) => OpKind::Read,
                MemOp::Write(..) => OpKind::Write,
                MemOp::Update(..) => OpKind::Update,
                MemOp::Scan => OpKind::Scan,
            };
            let args = Vec::new();
            ctx.invoke(ObjectId::Registers, kind, args);
            Effect::Mem(op)
        }
    }

    fn cfg(n: usize, t: usize) -> ModelConfig {
        ModelConfig::new(n, t).with_max_steps(1000)
    }

    #[test]
    fn register_write_then_read() {
        let mut arena = ValueArena::new();
        let a = arena.int(10);
        let set_a = arena.set_of(vec![a]);
        drop(arena);
        // Rebuild inside the run's arena via a write of a pre-made set: the
        // program embeds no vids from foreign arenas, so construct in place.
        #[derive(Clone, PartialEq, Eq, Hash, Debug)]
        struct WriteRead;
        impl Program for WriteRead {
            fn step(&mut self, ctx: &mut StepCtx<'_>, resp: Option<MemResponse>) -> Effect {
                match resp {
                    None => {
                        let v = ctx.arena.int(10);
                        let s = ctx.arena.set_of(vec![v]);
                        ctx.invoke(ObjectId::Registers, OpKind::Write, vec![s]);
                        Effect::Mem(MemOp::Write(0, s))
                    }
                    Some(MemResponse::Ack) => {
                        ctx.respond(ObjectId::Registers, OpKind::Write, RetVal::Ack);
                        ctx.invoke(ObjectId::Registers, OpKind::Read, Vec::new());
                        Effect::Mem(MemOp::Read(0))
                    }
                    Some(MemResponse::Cell(v)) => {
                        ctx.respond(ObjectId::Registers, OpKind::Read, RetVal::Val(v));
                        Effect::Halt
                    }
                    other => panic!("unexpected {other:?}"),
                }
            }
        }
        let out = run(
            vec![WriteRead],
            &cfg(1, 0),
            &CrashPlan::none(),
            &SchedulePolicy::RoundRobin,
        )
        .unwrap();
        let results = out.results(0);
        assert_eq!(results.len(), 2);
        let RetVal::Val(got) = results[1].1 else {
            panic!("read returned ack")
        };
        let mut expect_arena = out.arena.clone();
        let v = expect_arena.int(10);
        let expected = expect_arena.set_of(vec![v]);
        assert_eq!(got, expected);
        let _ = set_a;
    }

    #[test]
    fn initial_read_is_empty_set() {
        let out = run(
            vec![RawProgram::new(vec![MemOp::Read(0)])],
            &cfg(1, 0),
            &CrashPlan::none(),
            &SchedulePolicy::RoundRobin,
        )
        .unwrap();
        let RetVal::Val(got) = out.results(0)[0].1 else {
            panic!()
        };
        assert!(out.arena.set_is_empty(got));
    }

    #[test]
    fn crash_plan_rejected_when_too_many_actors() {
        let plan = CrashPlan {
            rules: vec![
                CrashRule {
                    actor: 0,
                    point: CrashPoint::AtStep(0),
                },
                CrashRule {
                    actor: 1,
                    point: CrashPoint::AtStep(1),
                },
            ],
        };
        let err = run(
            vec![
                RawProgram::new(vec![MemOp::Scan]),
                RawProgram::new(vec![MemOp::Scan]),
            ],
            &cfg(2, 1),
            &plan,
            &SchedulePolicy::RoundRobin,
        )
        .unwrap_err();
        assert!(matches!(err, SimError::CrashPlanTooLarge { .. }));
    }

    #[test]
    fn crash_silences_actor() {
        let out = run(
            vec![
                RawProgram::new(vec![MemOp::Scan; 10]),
                RawProgram::new(vec![MemOp::Scan; 10]),
            ],
            &cfg(2, 1),
            &CrashPlan::at_step(0, 3),
            &SchedulePolicy::RoundRobin,
        )
        .unwrap();
        let crash_pos = out
            .trace
            .events
            .iter()
            .position(|e| e.kind == EventKind::Crash)
            .expect("crash event present");
        assert_eq!(out.trace.events[crash_pos].actor, 0);
        assert!(out.trace.events[crash_pos + 1..]
            .iter()
            .all(|e| e.actor != 0));
        out.trace.check_well_formed().unwrap();
    }

    #[test]
    fn determinism_bit_identical() {
        let mk = || {
            vec![
                RawProgram::new(vec![MemOp::Scan, MemOp::Read(0), MemOp::Scan]),
                RawProgram::new(vec![MemOp::Scan, MemOp::Scan]),
            ]
        };
        let config = cfg(2, 0).with_seed(41);
        let a = run(
            mk(),
            &config,
            &CrashPlan::none(),
            &SchedulePolicy::SeededRandom,
        )
        .unwrap();
        let b = run(
            mk(),
            &config,
            &CrashPlan::none(),
            &SchedulePolicy::SeededRandom,
        )
        .unwrap();
        assert_eq!(a.trace.events, b.trace.events);
    }

    #[test]
    fn last_write_wins_in_trace_order() {
        #[derive(Clone, PartialEq, Eq, Hash, Debug)]
        struct W(i64, bool);
        impl Program for W {
            fn step(&mut self, ctx: &mut StepCtx<'_>, resp: Option<MemResponse>) -> Effect {
                match resp {
                    None => {
                        let v = ctx.arena.int(self.0);
                        let s = ctx.arena.set_of(vec![v]);
                        ctx.invoke(ObjectId::Registers, OpKind::Write, vec![s]);
                        Effect::Mem(MemOp::Write(1, s))
                    }
                    Some(_) => {
                        if !self.1 {
                            self.1 = true;
                            ctx.respond(ObjectId::Registers, OpKind::Write, RetVal::Ack);
                        }
                        Effect::Halt
                    }
                }
            }
        }
        for seed in 0..16 {
            let out = run(
                vec![W(1, false), W(2, false)],
                &cfg(2, 0).with_seed(seed),
                &CrashPlan::none(),
                &SchedulePolicy::SeededRandom,
            )
            .unwrap();
            let last_writer = out
                .trace
                .memory_events()
                .filter(|e| e.kind == EventKind::Write)
                .last()
                .unwrap();
            let written = last_writer.args[1];
            assert_eq!(out.state.cells[1], written);
        }
    }
}
