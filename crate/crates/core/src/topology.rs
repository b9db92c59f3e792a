//! Combinatorial topology for colorless tasks: finite simplicial complexes,
//! barycentric subdivision, skeleta, carrier maps, carriage checks for
//! simplicial maps, and the composite solver that chains (t+1)-set
//! agreement, b-iterated barycentric agreement and a vertex map.
//!
//! Complexes are finite and given by explicit facet lists; closure under
//! nonempty subsets is computed on construction. Vertices are value trees,
//! so the vertices of `bary^b K` (simplices of simplices ... of K) coincide
//! exactly with the nested views the barycentric agreement protocol
//! returns.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::agreement::PipelineProgram;
use crate::sim::{run, CrashPlan, ModelConfig, OpKind, RetVal, SchedulePolicy, SimError};
use crate::value::ValueTree;

pub type Vertex = ValueTree;
pub type Simplex = BTreeSet<Vertex>;

#[derive(Debug, thiserror::Error)]
pub enum TopologyError {
    #[error("facets must be nonempty")]
    EmptyFacet,
    #[error("subdivision would produce {needed} vertices, over the cap {cap}")]
    SizeCap { needed: usize, cap: usize },
    #[error("carrier map is not monotone: {0}")]
    NotMonotone(String),
    #[error("carrier map is not total: no image for simplex {0}")]
    NotTotal(String),
    #[error("carrier image is not a subcomplex of the output complex: {0}")]
    ImageNotSubcomplex(String),
    #[error("vertex map is not total: missing {0}")]
    PartialMap(String),
    #[error("vertex map is not carried at {simplex}: {reason}")]
    NotCarried { simplex: String, reason: String },
    #[error("inputs do not span a simplex of the input complex")]
    BadInputs,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("simulation error: {0}")]
    Sim(#[from] SimError),
}

/// A finite simplicial complex, closed under nonempty subsets.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Complex {
    simplices: BTreeSet<Simplex>,
}

fn subsets_closure(facet: &Simplex, into: &mut BTreeSet<Simplex>) {
    // All nonempty subsets; facet sizes stay small here.
    let items: Vec<&Vertex> = facet.iter().collect();
    let m = items.len();
    for mask in 1u64..(1 << m) {
        let s: Simplex = items
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, v)| (*v).clone())
            .collect();
        into.insert(s);
    }
}

impl Complex {
    pub fn from_facets<I>(facets: I) -> Result<Complex, TopologyError>
    where
        I: IntoIterator<Item = Simplex>,
    {
        let mut simplices = BTreeSet::new();
        let mut any = false;
        for facet in facets {
            if facet.is_empty() {
                return Err(TopologyError::EmptyFacet);
            }
            any = true;
            subsets_closure(&facet, &mut simplices);
        }
        let _ = any;
        Ok(Complex { simplices })
    }

    /// The full complex on a set of vertices (one facet containing all).
    pub fn full(vertices: impl IntoIterator<Item = Vertex>) -> Result<Complex, TopologyError> {
        let facet: Simplex = vertices.into_iter().collect();
        Complex::from_facets([facet])
    }

    pub fn empty() -> Complex {
        Complex {
            simplices: BTreeSet::new(),
        }
    }

    pub fn simplices(&self) -> impl Iterator<Item = &Simplex> {
        self.simplices.iter()
    }

    pub fn simplex_count(&self) -> usize {
        self.simplices.len()
    }

    pub fn contains(&self, s: &Simplex) -> bool {
        self.simplices.contains(s)
    }

    pub fn vertices(&self) -> BTreeSet<Vertex> {
        self.simplices
            .iter()
            .filter(|s| s.len() == 1)
            .map(|s| s.first().unwrap().clone())
            .collect()
    }

    pub fn vertex_count(&self) -> usize {
        self.simplices.iter().filter(|s| s.len() == 1).count()
    }

    /// Dimension: max simplex cardinality minus one. Empty complex: None.
    pub fn dim(&self) -> Option<usize> {
        self.simplices.iter().map(|s| s.len() - 1).max()
    }

    /// Maximal simplices.
    pub fn facets(&self) -> Vec<Simplex> {
        self.simplices
            .iter()
            .filter(|s| {
                !self
                    .simplices
                    .iter()
                    .any(|t| t.len() > s.len() && s.is_subset(t))
            })
            .cloned()
            .collect()
    }

    pub fn simplices_of_size(&self, size: usize) -> impl Iterator<Item = &Simplex> {
        self.simplices.iter().filter(move |s| s.len() == size)
    }

    pub fn is_subcomplex_of(&self, other: &Complex) -> bool {
        self.simplices.is_subset(&other.simplices)
    }

    /// The subcomplex generated by one simplex (all its nonempty faces).
    pub fn generated(s: &Simplex) -> Complex {
        let mut simplices = BTreeSet::new();
        subsets_closure(s, &mut simplices);
        Complex { simplices }
    }
}

impl fmt::Display for Complex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format_complex(self))
    }
}

/// Barycentric subdivision: vertices are the simplices of K; simplices are
/// the families totally ordered by containment.
pub fn bary(k: &Complex) -> Complex {
    let mut facets: Vec<Simplex> = Vec::new();
    for facet in k.facets() {
        let items: Vec<&Vertex> = facet.iter().collect();
        let mut order: Vec<usize> = (0..items.len()).collect();
        permute(&mut order, 0, &mut |perm| {
            let mut chain: Simplex = BTreeSet::new();
            let mut prefix: Simplex = BTreeSet::new();
            for &idx in perm.iter() {
                prefix.insert(items[idx].clone());
                chain.insert(ValueTree::Set(prefix.iter().cloned().collect()));
            }
            facets.push(chain);
        });
    }
    Complex::from_facets(facets).expect("chains are nonempty")
}

fn permute(items: &mut Vec<usize>, at: usize, f: &mut impl FnMut(&[usize])) {
    if at == items.len() {
        f(items);
        return;
    }
    for i in at..items.len() {
        items.swap(at, i);
        permute(items, at + 1, f);
        items.swap(at, i);
    }
}

/// Default size guard for iterated subdivision.
pub const DEFAULT_SIZE_CAP: usize = 200_000;

/// b-iterated barycentric subdivision; `bary_iter(K, 0)` is K itself.
pub fn bary_iter(k: &Complex, b: usize, cap: usize) -> Result<Complex, TopologyError> {
    let mut cur = k.clone();
    for _ in 0..b {
        let needed = cur.simplex_count();
        if needed > cap {
            return Err(TopologyError::SizeCap { needed, cap });
        }
        cur = bary(&cur);
        if cur.simplex_count() > cap {
            return Err(TopologyError::SizeCap {
                needed: cur.simplex_count(),
                cap,
            });
        }
    }
    Ok(cur)
}

/// k-skeleton: simplices of dimension at most k.
pub fn skel(complex: &Complex, k: usize) -> Complex {
    Complex {
        simplices: complex
            .simplices
            .iter()
            .filter(|s| s.len() <= k + 1)
            .cloned()
            .collect(),
    }
}

/// A carrier map: a monotone assignment of output subcomplexes to input
/// simplices.
#[derive(Clone, Debug)]
pub struct CarrierMap {
    map: BTreeMap<Simplex, Complex>,
}

impl CarrierMap {
    /// Validates monotonicity on construction.
    pub fn new(map: BTreeMap<Simplex, Complex>) -> Result<CarrierMap, TopologyError> {
        for (s1, c1) in &map {
            for (s2, c2) in &map {
                if s1.is_subset(s2) && !c1.is_subcomplex_of(c2) {
                    return Err(TopologyError::NotMonotone(format!(
                        "{} ⊆ {} but images are not nested",
                        show_simplex(s1),
                        show_simplex(s2)
                    )));
                }
            }
        }
        Ok(CarrierMap { map })
    }

    pub fn get(&self, s: &Simplex) -> Option<&Complex> {
        self.map.get(s)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Simplex, &Complex)> {
        self.map.iter()
    }
}

pub fn show_simplex(s: &Simplex) -> String {
    let toks: Vec<String> = s.iter().map(|v| v.to_string()).collect();
    format!("{{{}}}", toks.join(","))
}

/// A colorless task (input complex, output complex, carrier map), with the
/// carrier total on the input complex.
#[derive(Clone, Debug)]
pub struct ColorlessTask {
    pub input: Complex,
    pub output: Complex,
    pub delta: CarrierMap,
}

impl ColorlessTask {
    pub fn new(
        input: Complex,
        output: Complex,
        delta: CarrierMap,
    ) -> Result<ColorlessTask, TopologyError> {
        for s in input.simplices() {
            match delta.get(s) {
                None => return Err(TopologyError::NotTotal(show_simplex(s))),
                Some(c) => {
                    if !c.is_subcomplex_of(&output) {
                        return Err(TopologyError::ImageNotSubcomplex(show_simplex(s)));
                    }
                }
            }
        }
        Ok(ColorlessTask {
            input,
            output,
            delta,
        })
    }

    /// Restricts the input complex to its t-skeleton (the solvable part
    /// under t crashes).
    pub fn restrict_to_skeleton(&self, t: usize) -> ColorlessTask {
        let input = skel(&self.input, t);
        let delta = CarrierMap {
            map: self
                .delta
                .map
                .iter()
                .filter(|(s, _)| input.contains(s))
                .map(|(s, c)| (s.clone(), c.clone()))
                .collect(),
        };
        ColorlessTask {
            input,
            output: self.output.clone(),
            delta,
        }
    }
}

/// The k-set agreement task on a finite value set: outputs are at most k+1
/// of the inputs spanning the simplex.
pub fn make_kset_task(values: &[i64], k: usize) -> Result<ColorlessTask, TopologyError> {
    let input = Complex::full(values.iter().map(|&v| ValueTree::Int(v)))?;
    let output = skel(&input, k);
    let mut map = BTreeMap::new();
    for s in input.simplices() {
        map.insert(s.clone(), skel(&Complex::generated(s), k));
    }
    ColorlessTask::new(input, output, CarrierMap::new(map)?)
}

/// A simplicial vertex map from `bary^depth` of the (possibly restricted)
/// input complex into the output complex.
#[derive(Clone, Debug)]
pub struct SimplicialMapTable {
    pub map: BTreeMap<Vertex, Vertex>,
    pub depth: usize,
}

impl SimplicialMapTable {
    pub fn identity(complex: &Complex) -> SimplicialMapTable {
        SimplicialMapTable {
            map: complex
                .vertices()
                .into_iter()
                .map(|v| (v.clone(), v))
                .collect(),
            depth: 0,
        }
    }

    pub fn apply(&self, v: &Vertex) -> Option<&Vertex> {
        self.map.get(v)
    }

    pub fn image(&self, s: &Simplex) -> Option<Simplex> {
        s.iter().map(|v| self.apply(v).cloned()).collect()
    }
}

/// Original vertices reachable inside a subdivision vertex.
fn flatten_vertex(v: &Vertex, out: &mut BTreeSet<Vertex>) {
    match v {
        ValueTree::Set(items) => {
            for item in items {
                flatten_vertex(item, out);
            }
        }
        other => {
            out.insert(other.clone());
        }
    }
}

/// The "minimum original value in the carrier" map on `bary^depth` of a
/// complex with non-set vertices; at depth 0 it is the identity.
pub fn min_of_carrier(complex: &Complex, depth: usize) -> Result<SimplicialMapTable, TopologyError> {
    if depth == 0 {
        return Ok(SimplicialMapTable::identity(complex));
    }
    let domain = bary_iter(complex, depth, DEFAULT_SIZE_CAP)?;
    let map = domain
        .vertices()
        .into_iter()
        .map(|v| {
            let mut leaves = BTreeSet::new();
            flatten_vertex(&v, &mut leaves);
            let min = leaves.into_iter().next().expect("nonempty vertex");
            (v, min)
        })
        .collect();
    Ok(SimplicialMapTable { map, depth })
}

/// Outcome of a carriage check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Carriage {
    Carried,
    /// First violating simplex and why.
    Fail { simplex: String, reason: String },
}

/// Checks that `table` is a total simplicial map on `bary^depth` of the
/// task's input complex and that the image of `bary^depth σ` lies in Δ(σ)
/// for every input simplex σ. A partial map is an error, not a failure.
pub fn check_carried(
    table: &SimplicialMapTable,
    task: &ColorlessTask,
) -> Result<Carriage, TopologyError> {
    let domain = bary_iter(&task.input, table.depth, DEFAULT_SIZE_CAP)?;
    for v in domain.vertices() {
        if table.apply(&v).is_none() {
            return Err(TopologyError::PartialMap(v.to_string()));
        }
    }
    // Simplicial: images of simplices are simplices of the output complex.
    for s in domain.simplices() {
        let image = table.image(s).expect("total");
        if !task.output.contains(&image) {
            return Ok(Carriage::Fail {
                simplex: show_simplex(s),
                reason: format!("image {} is not an output simplex", show_simplex(&image)),
            });
        }
    }
    // Carried: for every input simplex, the image of its subdivision stays
    // inside its carrier.
    for sigma in task.input.simplices() {
        let carrier = task
            .delta
            .get(sigma)
            .ok_or_else(|| TopologyError::NotTotal(show_simplex(sigma)))?;
        let sub = bary_iter(&Complex::generated(sigma), table.depth, DEFAULT_SIZE_CAP)?;
        for s in sub.simplices() {
            let image = table.image(s).expect("total");
            if !carrier.contains(&image) {
                return Ok(Carriage::Fail {
                    simplex: show_simplex(s),
                    reason: format!(
                        "image {} escapes the carrier of {}",
                        show_simplex(&image),
                        show_simplex(sigma)
                    ),
                });
            }
        }
    }
    Ok(Carriage::Carried)
}

/// What a pipeline run produced.
#[derive(Clone, Debug)]
pub struct SolveOutcome {
    /// Per-actor final outputs (None for actors that did not finish).
    pub outputs: Vec<Option<Vertex>>,
    /// Whether the spanned output simplex lies in Δ(input simplex).
    pub in_delta: bool,
    pub truncated: bool,
}

/// Solves a colorless task: (t+1)-set agreement, then `table.depth` rounds
/// of barycentric agreement, then the vertex map applied to each process's
/// view. Fails fast if the map is not carried on the t-skeleton.
#[allow(clippy::too_many_arguments)]
pub fn solve_task(
    task: &ColorlessTask,
    table: &SimplicialMapTable,
    n: usize,
    t: usize,
    inputs: &[ValueTree],
    crash_plan: &CrashPlan,
    seed: u64,
    max_steps: u64,
) -> Result<SolveOutcome, TopologyError> {
    assert_eq!(inputs.len(), n);
    let sigma: Simplex = inputs.iter().cloned().collect();
    if !task.input.contains(&sigma) {
        return Err(TopologyError::BadInputs);
    }
    let restricted = task.restrict_to_skeleton(t);
    match check_carried(table, &restricted)? {
        Carriage::Carried => {}
        Carriage::Fail { simplex, reason } => {
            return Err(TopologyError::NotCarried { simplex, reason })
        }
    }

    let programs: Vec<PipelineProgram> = inputs
        .iter()
        .map(|v| PipelineProgram::new(v.clone(), t, table.depth))
        .collect();
    let config = ModelConfig::new(n, t)
        .with_seed(seed)
        .with_max_steps(max_steps);
    let out = run(programs, &config, crash_plan, &SchedulePolicy::SeededRandom)?;

    // Each process applies the vertex map to the view it chose.
    let mut outputs: Vec<Option<Vertex>> = vec![None; n];
    for (actor, slot) in outputs.iter_mut().enumerate() {
        for (op, ret) in out.results(actor) {
            if *op == OpKind::BaryAgree {
                if let RetVal::Val(v) = ret {
                    let vertex = out.arena.to_tree(*v);
                    let mapped = table
                        .apply(&vertex)
                        .ok_or_else(|| TopologyError::PartialMap(vertex.to_string()))?;
                    *slot = Some(mapped.clone());
                }
            }
        }
    }

    let spanned: Simplex = outputs.iter().flatten().cloned().collect();
    let in_delta = match task.delta.get(&sigma) {
        Some(carrier) => !spanned.is_empty() && carrier.contains(&spanned),
        None => false,
    };
    Ok(SolveOutcome {
        outputs,
        in_delta,
        truncated: out.trace.truncated,
    })
}

/// Parses the facet-list complex format: one facet per line, integer vertex
/// tokens, `#` comments.
pub fn parse_complex(text: &str) -> Result<Complex, TopologyError> {
    let mut facets = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let facet: Simplex = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<i64>()
                    .map(ValueTree::Int)
                    .map_err(|_| TopologyError::Parse(format!("line {}: bad vertex {tok}", lineno + 1)))
            })
            .collect::<Result<_, _>>()?;
        facets.push(facet);
    }
    Complex::from_facets(facets)
}

/// Renders a complex in the facet-list format.
pub fn format_complex(complex: &Complex) -> String {
    let mut lines: Vec<String> = complex
        .facets()
        .iter()
        .map(|facet| {
            facet
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    lines.sort();
    lines.join("\n")
}

/// Parses the carrier map format: `v1 v2 -> f1a f1b | f2a f2b` per line.
pub fn parse_carrier(text: &str) -> Result<CarrierMap, TopologyError> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (lhs, rhs) = line.split_once("->").ok_or_else(|| {
            TopologyError::Parse(format!("line {}: expected `σ -> facets`", lineno + 1))
        })?;
        let simplex: Simplex = lhs
            .split_whitespace()
            .map(|tok| {
                tok.parse::<i64>()
                    .map(ValueTree::Int)
                    .map_err(|_| TopologyError::Parse(format!("line {}: bad vertex {tok}", lineno + 1)))
            })
            .collect::<Result<_, _>>()?;
        let facets: Vec<Simplex> = rhs
            .split('|')
            .filter(|part| !part.trim().is_empty())
            .map(|part| {
                part.split_whitespace()
                    .map(|tok| {
                        tok.parse::<i64>().map(ValueTree::Int).map_err(|_| {
                            TopologyError::Parse(format!("line {}: bad vertex {tok}", lineno + 1))
                        })
                    })
                    .collect::<Result<Simplex, _>>()
            })
            .collect::<Result<_, _>>()?;
        let image = if facets.is_empty() {
            Complex::empty()
        } else {
            Complex::from_facets(facets)?
        };
        map.insert(simplex, image);
    }
    CarrierMap::new(map)
}

#[cfg(test)]
pub(crate) mod oracle {
    //! Definition-direct enumeration used as the independent oracle: a set
    //! of simplices is a bary-simplex exactly when it is totally ordered by
    //! containment; skeleta by direct subset filtering.

    use super::*;

    pub fn bary_by_enumeration(k: &Complex) -> Complex {
        let all: Vec<&Simplex> = k.simplices().collect();
        let mut out = BTreeSet::new();
        for mask in 1u64..(1 << all.len()) {
            let family: Vec<&Simplex> = all
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, s)| *s)
                .collect();
            let chain = family.iter().all(|a| {
                family
                    .iter()
                    .all(|b| a.is_subset(b) || b.is_subset(a))
            });
            if chain {
                out.insert(
                    family
                        .into_iter()
                        .map(|s| ValueTree::Set(s.iter().cloned().collect()))
                        .collect::<Simplex>(),
                );
            }
        }
        Complex { simplices: out }
    }

    pub fn skel_by_enumeration(k: &Complex, dim: usize) -> Complex {
        Complex {
            simplices: k
                .simplices()
                .filter(|s| s.len() <= dim + 1)
                .cloned()
                .collect(),
        }
    }
}
