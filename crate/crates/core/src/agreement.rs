//! Agreement protocols over weak sets: one-shot safe agreement, t-resilient
//! (t+1)-set agreement, and b-iterated barycentric agreement.
//!
//! Safe agreement walks n logical weak sets: at level i the process adds its
//! current view, reads the set back, and either returns (it holds the
//! minimum of a contended set) or adopts the minimum and moves on. Any value
//! reaching level n-1 is unique, which is what resolve returns. Set
//! agreement proposes to t+1 such objects and round-robins resolves until
//! one answers. Barycentric agreement runs b add/get rounds, one logical set
//! per round, so the round-b views are totally ordered by containment.
//!
//! Every object here is multiplexed over the single physical weak set, so
//! the whole stack keeps the n-register footprint.

use crate::sim::{Effect, MemOp, MemResponse, ObjectId, OpKind, Program, RetVal, StepCtx};
use crate::value::{ValueArena, ValueTree, Vid};
use crate::weakset::{Mutation, Poll, WsClient, WsOp};

fn child_path(prefix: &[i64], level: i64) -> Vec<i64> {
    let mut p = prefix.to_vec();
    p.push(level);
    p
}

/// One `propose(v)` in flight on the safe agreement object at `sa_path`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub(crate) struct ProposeOp {
    sa_path: Vec<i64>,
    view: Vid,
    level: usize,
    in_get: bool,
    sub: WsOp,
}

impl ProposeOp {
    pub fn new(arena: &mut ValueArena, sa_path: Vec<i64>, input: Vid) -> Self {
        let sub = WsOp::add_logical(arena, &child_path(&sa_path, 0), input, Mutation::Faithful);
        ProposeOp {
            sa_path,
            view: input,
            level: 0,
            in_get: false,
            sub,
        }
    }

    pub fn first(&mut self, ctx: &mut StepCtx<'_>) -> MemOp {
        ctx.invoke(
            ObjectId::SafeAgreement(self.sa_path.clone()),
            OpKind::Propose,
            vec![self.view],
        );
        self.sub.first(ctx)
    }

    fn finish(&self, ctx: &mut StepCtx<'_>) -> Poll {
        ctx.respond(
            ObjectId::SafeAgreement(self.sa_path.clone()),
            OpKind::Propose,
            RetVal::Ack,
        );
        Poll::Done(RetVal::Ack)
    }

    pub fn resume(
        &mut self,
        client: &mut WsClient,
        ctx: &mut StepCtx<'_>,
        resp: MemResponse,
    ) -> Poll {
        match self.sub.resume(client, ctx, resp) {
            Poll::Mem(op) => Poll::Mem(op),
            Poll::Done(done) => {
                if !self.in_get {
                    // add finished; read the level back.
                    self.in_get = true;
                    self.sub = WsOp::get_logical(
                        &child_path(&self.sa_path, self.level as i64),
                        Mutation::Faithful,
                    );
                    return Poll::Mem(self.sub.first(ctx));
                }
                let RetVal::Val(snap) = done else {
                    panic!("get returns a view")
                };
                debug_assert!(
                    !ctx.arena.set_is_empty(snap),
                    "own add makes the level non-empty"
                );
                let min = ctx.arena.set_min(snap).expect("non-empty");
                if ctx.arena.set_len(snap) >= 2 && self.view == min {
                    return self.finish(ctx);
                }
                self.view = min;
                self.level += 1;
                if self.level == ctx.n() {
                    return self.finish(ctx);
                }
                self.in_get = false;
                self.sub = WsOp::add_logical(
                    ctx.arena,
                    &child_path(&self.sa_path, self.level as i64),
                    self.view,
                    Mutation::Faithful,
                );
                Poll::Mem(self.sub.first(ctx))
            }
        }
    }
}

/// One `resolve()` in flight: read SET[n-1], answer its minimum or ⊥.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub(crate) struct ResolveOp {
    sa_path: Vec<i64>,
    sub: Option<WsOp>,
}

impl ResolveOp {
    pub fn new(sa_path: Vec<i64>) -> Self {
        ResolveOp { sa_path, sub: None }
    }

    pub fn first(&mut self, ctx: &mut StepCtx<'_>) -> MemOp {
        ctx.invoke(
            ObjectId::SafeAgreement(self.sa_path.clone()),
            OpKind::Resolve,
            Vec::new(),
        );
        let mut sub = WsOp::get_logical(
            &child_path(&self.sa_path, ctx.n() as i64 - 1),
            Mutation::Faithful,
        );
        let op = sub.first(ctx);
        self.sub = Some(sub);
        op
    }

    pub fn resume(
        &mut self,
        client: &mut WsClient,
        ctx: &mut StepCtx<'_>,
        resp: MemResponse,
    ) -> Poll {
        match self.sub.as_mut().expect("started").resume(client, ctx, resp) {
            Poll::Mem(op) => Poll::Mem(op),
            Poll::Done(done) => {
                let RetVal::Val(snap) = done else {
                    panic!("get returns a view")
                };
                let ret = match ctx.arena.set_min(snap) {
                    Some(min) => min,
                    None => ctx.arena.bottom(),
                };
                ctx.respond(
                    ObjectId::SafeAgreement(self.sa_path.clone()),
                    OpKind::Resolve,
                    RetVal::Val(ret),
                );
                Poll::Done(RetVal::Val(ret))
            }
        }
    }
}

/// One `set_agree(v)` in flight: propose to SA[0..t], then round-robin
/// resolves until one returns non-⊥.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub(crate) struct SetAgreeOp {
    t: usize,
    input: Vid,
    index: usize,
    phase: SetAgreePhase,
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
enum SetAgreePhase {
    Proposing(ProposeOp),
    Resolving(ResolveOp),
}

impl SetAgreeOp {
    pub fn new(arena: &mut ValueArena, t: usize, input: Vid) -> Self {
        SetAgreeOp {
            t,
            input,
            index: 0,
            phase: SetAgreePhase::Proposing(ProposeOp::new(arena, vec![0], input)),
        }
    }

    pub fn first(&mut self, ctx: &mut StepCtx<'_>) -> MemOp {
        ctx.invoke(ObjectId::SetAgreement, OpKind::SetAgree, vec![self.input]);
        match &mut self.phase {
            SetAgreePhase::Proposing(p) => p.first(ctx),
            SetAgreePhase::Resolving(_) => unreachable!(),
        }
    }

    pub fn resume(
        &mut self,
        client: &mut WsClient,
        ctx: &mut StepCtx<'_>,
        resp: MemResponse,
    ) -> Poll {
        match &mut self.phase {
            SetAgreePhase::Proposing(p) => match p.resume(client, ctx, resp) {
                Poll::Mem(op) => Poll::Mem(op),
                Poll::Done(_) => {
                    self.index += 1;
                    if self.index <= self.t {
                        let mut next =
                            ProposeOp::new(ctx.arena, vec![self.index as i64], self.input);
                        let op = next.first(ctx);
                        self.phase = SetAgreePhase::Proposing(next);
                        Poll::Mem(op)
                    } else {
                        self.index = 0;
                        let mut next = ResolveOp::new(vec![0]);
                        let op = next.first(ctx);
                        self.phase = SetAgreePhase::Resolving(next);
                        Poll::Mem(op)
                    }
                }
            },
            SetAgreePhase::Resolving(r) => match r.resume(client, ctx, resp) {
                Poll::Mem(op) => Poll::Mem(op),
                Poll::Done(done) => {
                    let RetVal::Val(result) = done else {
                        panic!("resolve returns a value or ⊥")
                    };
                    if !ctx.arena.is_bottom(result) {
                        ctx.respond(
                            ObjectId::SetAgreement,
                            OpKind::SetAgree,
                            RetVal::Val(result),
                        );
                        return Poll::Done(RetVal::Val(result));
                    }
                    self.index = (self.index + 1) % (self.t + 1);
                    let mut next = ResolveOp::new(vec![self.index as i64]);
                    let op = next.first(ctx);
                    self.phase = SetAgreePhase::Resolving(next);
                    Poll::Mem(op)
                }
            },
        }
    }
}

/// One `bary_agree(v)` in flight: b rounds of add-then-get, one logical set
/// per round, adopting the returned view each round.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub(crate) struct BaryOp {
    rounds: usize,
    round: usize,
    view: Vid,
    in_get: bool,
    sub: Option<WsOp>,
}

impl BaryOp {
    pub fn new(rounds: usize, input: Vid) -> Self {
        BaryOp {
            rounds,
            round: 0,
            view: input,
            in_get: false,
            sub: None,
        }
    }

    pub fn first(&mut self, ctx: &mut StepCtx<'_>) -> Option<MemOp> {
        ctx.invoke(ObjectId::Barycentric, OpKind::BaryAgree, vec![self.view]);
        if self.rounds == 0 {
            ctx.respond(
                ObjectId::Barycentric,
                OpKind::BaryAgree,
                RetVal::Val(self.view),
            );
            return None;
        }
        let mut sub = WsOp::add_logical(ctx.arena, &[0], self.view, Mutation::Faithful);
        let op = sub.first(ctx);
        self.sub = Some(sub);
        Some(op)
    }

    pub fn resume(
        &mut self,
        client: &mut WsClient,
        ctx: &mut StepCtx<'_>,
        resp: MemResponse,
    ) -> Poll {
        match self.sub.as_mut().expect("started").resume(client, ctx, resp) {
            Poll::Mem(op) => Poll::Mem(op),
            Poll::Done(done) => {
                if !self.in_get {
                    self.in_get = true;
                    let mut sub = WsOp::get_logical(&[self.round as i64], Mutation::Faithful);
                    let op = sub.first(ctx);
                    self.sub = Some(sub);
                    return Poll::Mem(op);
                }
                let RetVal::Val(view) = done else {
                    panic!("get returns a view")
                };
                self.view = view;
                self.round += 1;
                if self.round == self.rounds {
                    ctx.respond(
                        ObjectId::Barycentric,
                        OpKind::BaryAgree,
                        RetVal::Val(self.view),
                    );
                    return Poll::Done(RetVal::Val(self.view));
                }
                self.in_get = false;
                let mut sub = WsOp::add_logical(
                    ctx.arena,
                    &[self.round as i64],
                    self.view,
                    Mutation::Faithful,
                );
                let op = sub.first(ctx);
                self.sub = Some(sub);
                Poll::Mem(op)
            }
        }
    }
}

/// Scripted safe agreement operations.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum SaScriptOp {
    Propose(ValueTree),
    Resolve,
    /// Repeat resolve (each attempt its own operation) until a non-⊥ answer
    /// or the attempt cap runs out.
    ResolveUntil { cap: usize },
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
enum SaMachine {
    Propose(ProposeOp),
    Resolve(ResolveOp),
}

/// A process driving one safe agreement object (path `SA[0]`).
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct SafeAgreementProgram {
    script: Vec<SaScriptOp>,
    at: usize,
    until_left: Option<usize>,
    client: WsClient,
    current: Option<SaMachine>,
}

impl SafeAgreementProgram {
    /// The object is one-shot: a script naming two proposes is a usage
    /// fault and is rejected before any run starts.
    pub fn new(script: Vec<SaScriptOp>) -> Self {
        let proposes = script
            .iter()
            .filter(|op| matches!(op, SaScriptOp::Propose(_)))
            .count();
        assert!(
            proposes <= 1,
            "safe agreement is one-shot: {proposes} proposes scripted"
        );
        SafeAgreementProgram {
            script,
            at: 0,
            until_left: None,
            client: WsClient::new(),
            current: None,
        }
    }

    /// The standard battery shape: propose, then resolve until non-⊥.
    pub fn propose_then_resolve(input: i64, cap: usize) -> Self {
        Self::new(vec![
            SaScriptOp::Propose(ValueTree::Int(input)),
            SaScriptOp::ResolveUntil { cap },
        ])
    }

    /// Next scripted machine, honoring a pending resolve-until loop.
    fn next_machine(&mut self, arena: &mut ValueArena) -> Option<SaMachine> {
        if let Some(left) = self.until_left {
            if left > 0 {
                self.until_left = Some(left - 1);
                return Some(SaMachine::Resolve(ResolveOp::new(vec![0])));
            }
            self.until_left = None;
            self.at += 1;
        }
        match self.script.get(self.at)? {
            SaScriptOp::Propose(tree) => {
                let v = arena.from_tree(tree);
                self.at += 1;
                Some(SaMachine::Propose(ProposeOp::new(arena, vec![0], v)))
            }
            SaScriptOp::Resolve => {
                self.at += 1;
                Some(SaMachine::Resolve(ResolveOp::new(vec![0])))
            }
            SaScriptOp::ResolveUntil { cap } => {
                if *cap == 0 {
                    self.at += 1;
                    return self.next_machine(arena);
                }
                self.until_left = Some(cap - 1);
                Some(SaMachine::Resolve(ResolveOp::new(vec![0])))
            }
        }
    }
}

impl Program for SafeAgreementProgram {
    fn step(&mut self, ctx: &mut StepCtx<'_>, resp: Option<MemResponse>) -> Effect {
        let mut resp = resp;
        loop {
            match &mut self.current {
                None => {
                    let Some(mut machine) = self.next_machine(ctx.arena) else {
                        return Effect::Halt;
                    };
                    let op = match &mut machine {
                        SaMachine::Propose(p) => p.first(ctx),
                        SaMachine::Resolve(r) => r.first(ctx),
                    };
                    self.current = Some(machine);
                    return Effect::Mem(op);
                }
                Some(machine) => {
                    let r = resp.take().expect("mid-operation step needs a response");
                    let poll = match machine {
                        SaMachine::Propose(p) => p.resume(&mut self.client, ctx, r),
                        SaMachine::Resolve(res) => res.resume(&mut self.client, ctx, r),
                    };
                    match poll {
                        Poll::Mem(op) => return Effect::Mem(op),
                        Poll::Done(done) => {
                            // A non-⊥ resolve satisfies a pending until-loop.
                            if let (Some(_), RetVal::Val(v)) = (&self.until_left, done) {
                                if !ctx.arena.is_bottom(v) {
                                    self.until_left = None;
                                    self.at += 1;
                                }
                            }
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

/// A process running one `set_agree(v)`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct SetAgreementProgram {
    input: ValueTree,
    t: usize,
    client: WsClient,
    current: Option<SetAgreeOp>,
    done: bool,
}

impl SetAgreementProgram {
    pub fn new(input: impl Into<ValueTree>, t: usize) -> Self {
        SetAgreementProgram {
            input: input.into(),
            t,
            client: WsClient::new(),
            current: None,
            done: false,
        }
    }
}

impl Program for SetAgreementProgram {
    fn step(&mut self, ctx: &mut StepCtx<'_>, resp: Option<MemResponse>) -> Effect {
        let mut resp = resp;
        loop {
            match &mut self.current {
                None => {
                    if self.done {
                        return Effect::Halt;
                    }
                    let v = ctx.arena.from_tree(&self.input);
                    let mut op = SetAgreeOp::new(ctx.arena, self.t, v);
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
                            self.done = true;
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

/// A process running one `bary_agree(v)` of `rounds` rounds.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct BaryProgram {
    input: ValueTree,
    rounds: usize,
    client: WsClient,
    current: Option<BaryOp>,
    done: bool,
}

impl BaryProgram {
    pub fn new(input: impl Into<ValueTree>, rounds: usize) -> Self {
        BaryProgram {
            input: input.into(),
            rounds,
            client: WsClient::new(),
            current: None,
            done: false,
        }
    }
}

impl Program for BaryProgram {
    fn step(&mut self, ctx: &mut StepCtx<'_>, resp: Option<MemResponse>) -> Effect {
        let mut resp = resp;
        loop {
            match &mut self.current {
                None => {
                    if self.done {
                        return Effect::Halt;
                    }
                    let v = ctx.arena.from_tree(&self.input);
                    let mut op = BaryOp::new(self.rounds, v);
                    match op.first(ctx) {
                        Some(mem) => {
                            self.current = Some(op);
                            return Effect::Mem(mem);
                        }
                        None => {
                            // Zero rounds: answered immediately.
                            self.done = true;
                            return Effect::Halt;
                        }
                    }
                }
                Some(op) => {
                    let r = resp.take().expect("mid-operation step needs a response");
                    match op.resume(&mut self.client, ctx, r) {
                        Poll::Mem(mem) => return Effect::Mem(mem),
                        Poll::Done(_) => {
                            self.current = None;
                            self.done = true;
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

/// A process running `set_agree(v)` and then feeding its decision through
/// `rounds` rounds of barycentric agreement (the task-solving pipeline; the
/// caller applies the vertex map to the final view).
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct PipelineProgram {
    input: ValueTree,
    t: usize,
    rounds: usize,
    client: WsClient,
    phase: PipelinePhase,
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
enum PipelinePhase {
    Start,
    Agreeing(SetAgreeOp),
    Subdividing(BaryOp),
    Done,
}

impl PipelineProgram {
    pub fn new(input: ValueTree, t: usize, rounds: usize) -> Self {
        PipelineProgram {
            input,
            t,
            rounds,
            client: WsClient::new(),
            phase: PipelinePhase::Start,
        }
    }
}

impl Program for PipelineProgram {
    fn step(&mut self, ctx: &mut StepCtx<'_>, resp: Option<MemResponse>) -> Effect {
        let mut resp = resp;
        loop {
            match &mut self.phase {
                PipelinePhase::Start => {
                    let v = ctx.arena.from_tree(&self.input);
                    let mut op = SetAgreeOp::new(ctx.arena, self.t, v);
                    let mem = op.first(ctx);
                    self.phase = PipelinePhase::Agreeing(op);
                    return Effect::Mem(mem);
                }
                PipelinePhase::Agreeing(op) => {
                    let r = resp.take().expect("mid-operation step needs a response");
                    match op.resume(&mut self.client, ctx, r) {
                        Poll::Mem(mem) => return Effect::Mem(mem),
                        Poll::Done(done) => {
                            let RetVal::Val(decision) = done else {
                                panic!("set_agree returns a value")
                            };
                            let mut bary = BaryOp::new(self.rounds, decision);
                            match bary.first(ctx) {
                                Some(mem) => {
                                    self.phase = PipelinePhase::Subdividing(bary);
                                    return Effect::Mem(mem);
                                }
                                None => {
                                    self.phase = PipelinePhase::Done;
                                    return Effect::Halt;
                                }
                            }
                        }
                    }
                }
                PipelinePhase::Subdividing(op) => {
                    let r = resp.take().expect("mid-operation step needs a response");
                    match op.resume(&mut self.client, ctx, r) {
                        Poll::Mem(mem) => return Effect::Mem(mem),
                        Poll::Done(_) => {
                            self.phase = PipelinePhase::Done;
                        }
                    }
                }
                PipelinePhase::Done => return Effect::Halt,
            }
        }
    }

    fn view(&self) -> Option<Vid> {
        self.client.view
    }
}
