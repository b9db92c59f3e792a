//! Bounded exhaustive schedule exploration.
//!
//! Enumerates every interleaving of process turns (and, optionally, every
//! crash placement within the budget) up to a depth bound, invoking a
//! checker callback on each maximal branch. Detects no-progress cycles: a
//! repeated global state with operations pending and no completion in
//! between, which a non-blocking implementation must never exhibit.
//!
//! Two modes:
//! - exact (default): every schedule prefix is its own branch, so
//!   history-level checkers (linearizability) see every history;
//! - deduplicated: branches converging on an already-explored global state
//!   are pruned, which keeps long protocols tractable while still covering
//!   every reachable configuration for state-level checks.

use std::collections::HashMap;

use super::{ModelConfig, Program, SimError, SimState, Trace};
use crate::value::ValueArena;

#[derive(Clone, Debug)]
pub struct ExploreOptions {
    /// Bound on total steps per branch.
    pub depth: u64,
    /// Also branch on crashing each runnable actor while the crash budget
    /// (`config.t`) allows.
    pub crash_choices: bool,
    /// Prune branches that reach an already-explored global state.
    pub dedup: bool,
    /// Abort once this many tree nodes were expanded.
    pub max_nodes: u64,
}

impl ExploreOptions {
    pub fn exact(depth: u64) -> Self {
        Self {
            depth,
            crash_choices: false,
            dedup: false,
            max_nodes: u64::MAX,
        }
    }

    pub fn with_crashes(mut self) -> Self {
        self.crash_choices = true;
        self
    }

    pub fn deduped(mut self) -> Self {
        self.dedup = true;
        self
    }

    pub fn with_max_nodes(mut self, max_nodes: u64) -> Self {
        self.max_nodes = max_nodes;
        self
    }
}

#[derive(Clone, Debug, Default, serde::Serialize)]
pub struct ExplorationReport {
    /// Maximal branches visited.
    pub interleavings: u64,
    /// Branches on which every invoked operation responded and every
    /// process ran its program to the end or crashed between operations.
    pub complete_histories: u64,
    /// Branches cut off by the depth bound.
    pub truncated_branches: u64,
    /// Total violations reported by the leaf checker.
    pub violations: u64,
    /// First few violation descriptions.
    pub violation_samples: Vec<String>,
    /// No-progress cycles found (expected 0 for non-blocking objects).
    pub no_progress_cycles: u64,
    /// Nodes expanded.
    pub nodes: u64,
    /// True when `max_nodes` stopped the search early.
    pub budget_exhausted: bool,
    /// Branches pruned by state deduplication.
    pub dedup_prunes: u64,
}

impl ExplorationReport {
    const SAMPLE_CAP: usize = 8;

    fn record_violations(&mut self, mut found: Vec<String>) {
        self.violations += found.len() as u64;
        while self.violation_samples.len() < Self::SAMPLE_CAP && !found.is_empty() {
            self.violation_samples.push(found.remove(0));
        }
    }
}

/// What the leaf checker sees: the branch's trace so far, the shared value
/// arena, the final state, and whether the branch is a complete history.
pub struct Leaf<'a, P: Program> {
    pub trace: &'a Trace,
    pub arena: &'a mut ValueArena,
    pub state: &'a SimState<P>,
    pub complete: bool,
}

struct Dfs<'f, P: Program, F> {
    config: ModelConfig,
    opts: ExploreOptions,
    arena: ValueArena,
    events_scratch: Trace,
    path: Vec<(SimState<P>, usize)>,
    visited: HashMap<SimState<P>, u64>,
    report: ExplorationReport,
    on_leaf: &'f mut F,
}

impl<'f, P, F> Dfs<'f, P, F>
where
    P: Program,
    F: FnMut(Leaf<'_, P>) -> Vec<String>,
{
    fn leaf(&mut self, state: &SimState<P>, truncated_branch: bool) {
        self.report.interleavings += 1;
        let complete = !truncated_branch && state.actors.iter().all(|a| !a.has_pending_op());
        if complete {
            self.report.complete_histories += 1;
        }
        if truncated_branch {
            self.report.truncated_branches += 1;
        }
        self.events_scratch.truncated = truncated_branch;
        let found = (self.on_leaf)(Leaf {
            trace: &self.events_scratch,
            arena: &mut self.arena,
            state,
            complete,
        });
        if !found.is_empty() {
            self.report.record_violations(found);
        }
    }

    fn go(&mut self, state: SimState<P>, depth_left: u64) -> Result<(), SimError> {
        if self.report.nodes >= self.opts.max_nodes {
            self.report.budget_exhausted = true;
            return Ok(());
        }
        self.report.nodes += 1;

        if state.all_done() {
            self.leaf(&state, false);
            return Ok(());
        }
        if depth_left == 0 {
            self.leaf(&state, true);
            return Ok(());
        }

        // No-progress cycle: this exact state occurred earlier on the path
        // with operations pending and nothing completed in between.
        let completions = state.completions();
        if state.actors.iter().any(|a| a.has_pending_op())
            && self
                .path
                .iter()
                .any(|(s, c)| *c == completions && s == &state)
        {
            self.report.no_progress_cycles += 1;
            return Ok(());
        }

        if self.opts.dedup {
            if let Some(&seen_depth) = self.visited.get(&state) {
                if seen_depth >= depth_left {
                    self.report.dedup_prunes += 1;
                    return Ok(());
                }
            }
            self.visited.insert(state.clone(), depth_left);
        }

        let step = self.events_scratch.events.last().map_or(0, |e| e.step + 1);
        let runnable: Vec<usize> = state.runnable().collect();
        self.path.push((state.clone(), completions));

        for &actor in &runnable {
            let mut child = state.clone();
            let mark = self.events_scratch.events.len();
            child.take_turn(actor, step, &mut self.arena, &mut self.events_scratch.events)?;
            self.go(child, depth_left - 1)?;
            self.events_scratch.events.truncate(mark);
        }
        if self.opts.crash_choices && (state.crashed as usize) < self.config.t {
            for &actor in &runnable {
                let mut child = state.clone();
                let mark = self.events_scratch.events.len();
                child.crash(actor, step, &mut self.events_scratch.events);
                self.go(child, depth_left - 1)?;
                self.events_scratch.events.truncate(mark);
            }
        }

        self.path.pop();
        Ok(())
    }
}

/// Explores every interleaving of the given programs up to `opts.depth`.
pub fn explore<P, F>(
    programs: Vec<P>,
    config: &ModelConfig,
    opts: &ExploreOptions,
    mut on_leaf: F,
) -> Result<ExplorationReport, SimError>
where
    P: Program,
    F: FnMut(Leaf<'_, P>) -> Vec<String>,
{
    config.validate()?;
    assert_eq!(programs.len(), config.n);
    let mut arena = ValueArena::new();
    let root = SimState::new(programs, &mut arena);
    let mut dfs = Dfs {
        config: config.clone(),
        opts: opts.clone(),
        arena,
        events_scratch: Trace {
            events: Vec::new(),
            n: config.n,
            truncated: false,
        },
        path: Vec::new(),
        visited: HashMap::new(),
        report: ExplorationReport::default(),
        on_leaf: &mut on_leaf,
    };
    dfs.go(root, opts.depth)?;
    Ok(dfs.report)
}
