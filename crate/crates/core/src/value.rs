//! Interned protocol values.
//!
//! Every value that flows through the simulator lives in a per-run
//! [`ValueArena`]. Values are recursive: plain integers, the distinguished
//! bottom marker, tuples (tagged values, simulation triples, state arrays)
//! and finite sets (register views, nested agreement views). Interning gives
//! O(1) structural equality, which the register machinery leans on heavily.
//!
//! The arena also defines the canonical total order on values. Protocols pick
//! minima of value sets, so the order must be identical for every process and
//! independent of the schedule; it is determined by structure alone.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

/// Handle to an interned value. Only meaningful together with its arena.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vid(u32);

impl fmt::Debug for Vid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// Structure of an interned value.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Node {
    /// The undefined marker (resolve's ⊥, unwritten snapshot components).
    Bottom,
    Int(i64),
    /// Fixed-length ordered contents.
    Tuple(Vec<Vid>),
    /// Finite set; elements stored sorted by `Vid` so equal sets intern to
    /// the same node.
    Set(Vec<Vid>),
}

/// Per-run interner for [`Node`]s.
#[derive(Clone, Default)]
pub struct ValueArena {
    nodes: Vec<Node>,
    index: HashMap<Node, Vid>,
}

impl fmt::Debug for ValueArena {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ValueArena({} nodes)", self.nodes.len())
    }
}

impl ValueArena {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn intern(&mut self, node: Node) -> Vid {
        if let Some(&id) = self.index.get(&node) {
            return id;
        }
        let id = Vid(u32::try_from(self.nodes.len()).expect("arena overflow"));
        self.nodes.push(node.clone());
        self.index.insert(node, id);
        id
    }

    pub fn node(&self, id: Vid) -> &Node {
        &self.nodes[id.0 as usize]
    }

    pub fn bottom(&mut self) -> Vid {
        self.intern(Node::Bottom)
    }

    pub fn int(&mut self, i: i64) -> Vid {
        self.intern(Node::Int(i))
    }

    pub fn tuple(&mut self, items: Vec<Vid>) -> Vid {
        self.intern(Node::Tuple(items))
    }

    /// Interns a set from arbitrary (possibly duplicated) elements.
    pub fn set_of(&mut self, mut items: Vec<Vid>) -> Vid {
        items.sort_unstable();
        items.dedup();
        self.intern(Node::Set(items))
    }

    pub fn empty_set(&mut self) -> Vid {
        self.intern(Node::Set(Vec::new()))
    }

    pub fn is_bottom(&self, id: Vid) -> bool {
        matches!(self.node(id), Node::Bottom)
    }

    pub fn as_int(&self, id: Vid) -> Option<i64> {
        match self.node(id) {
            Node::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_tuple(&self, id: Vid) -> Option<&[Vid]> {
        match self.node(id) {
            Node::Tuple(items) => Some(items),
            _ => None,
        }
    }

    /// Elements of a set, sorted by `Vid`. Panics if `id` is not a set.
    pub fn elems(&self, id: Vid) -> &[Vid] {
        match self.node(id) {
            Node::Set(items) => items,
            other => panic!("expected set, got {other:?}"),
        }
    }

    pub fn set_len(&self, id: Vid) -> usize {
        self.elems(id).len()
    }

    pub fn set_is_empty(&self, id: Vid) -> bool {
        self.elems(id).is_empty()
    }

    pub fn set_contains(&self, set: Vid, item: Vid) -> bool {
        self.elems(set).binary_search(&item).is_ok()
    }

    pub fn set_insert(&mut self, set: Vid, item: Vid) -> Vid {
        if self.set_contains(set, item) {
            return set;
        }
        let mut items = self.elems(set).to_vec();
        let pos = items.binary_search(&item).unwrap_err();
        items.insert(pos, item);
        self.intern(Node::Set(items))
    }

    pub fn set_union(&mut self, a: Vid, b: Vid) -> Vid {
        if a == b {
            return a;
        }
        let xs = self.elems(a);
        let ys = self.elems(b);
        if xs.is_empty() {
            return b;
        }
        if ys.is_empty() {
            return a;
        }
        let mut merged = Vec::with_capacity(xs.len() + ys.len());
        let (mut i, mut j) = (0, 0);
        while i < xs.len() && j < ys.len() {
            match xs[i].cmp(&ys[j]) {
                Ordering::Less => {
                    merged.push(xs[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    merged.push(ys[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    merged.push(xs[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        merged.extend_from_slice(&xs[i..]);
        merged.extend_from_slice(&ys[j..]);
        self.intern(Node::Set(merged))
    }

    pub fn set_is_subset(&self, a: Vid, b: Vid) -> bool {
        if a == b {
            return true;
        }
        let ys = self.elems(b);
        self.elems(a).iter().all(|x| ys.binary_search(x).is_ok())
    }

    /// Canonical total order on values: Bottom < Int < Tuple < Set, then
    /// structurally, with sets compared as their canonically sorted element
    /// sequences. Identical ids compare equal without a walk.
    pub fn cmp_values(&self, a: Vid, b: Vid) -> Ordering {
        if a == b {
            return Ordering::Equal;
        }
        match (self.node(a), self.node(b)) {
            (Node::Bottom, Node::Bottom) => Ordering::Equal,
            (Node::Bottom, _) => Ordering::Less,
            (_, Node::Bottom) => Ordering::Greater,
            (Node::Int(x), Node::Int(y)) => x.cmp(y),
            (Node::Int(_), _) => Ordering::Less,
            (_, Node::Int(_)) => Ordering::Greater,
            (Node::Tuple(xs), Node::Tuple(ys)) => self.cmp_seq(xs, ys),
            (Node::Tuple(_), _) => Ordering::Less,
            (_, Node::Tuple(_)) => Ordering::Greater,
            (Node::Set(_), Node::Set(_)) => {
                let xs = self.sorted_by_value(a);
                let ys = self.sorted_by_value(b);
                self.cmp_seq(&xs, &ys)
            }
        }
    }

    fn cmp_seq(&self, xs: &[Vid], ys: &[Vid]) -> Ordering {
        for (x, y) in xs.iter().zip(ys.iter()) {
            match self.cmp_values(*x, *y) {
                Ordering::Equal => continue,
                other => return other,
            }
        }
        xs.len().cmp(&ys.len())
    }

    /// Set elements sorted by the canonical value order (for minima and
    /// serialization).
    pub fn sorted_by_value(&self, set: Vid) -> Vec<Vid> {
        let mut items = self.elems(set).to_vec();
        items.sort_by(|x, y| self.cmp_values(*x, *y));
        items
    }

    /// Minimum of a set under the canonical order; `None` on the empty set.
    pub fn set_min(&self, set: Vid) -> Option<Vid> {
        let items = self.elems(set);
        items
            .iter()
            .copied()
            .min_by(|x, y| self.cmp_values(*x, *y))
    }

    /// All integers reachable inside a value (used by simulated-protocol
    /// decision functions).
    pub fn flatten_ints(&self, id: Vid, out: &mut Vec<i64>) {
        match self.node(id) {
            Node::Bottom => {}
            Node::Int(i) => out.push(*i),
            Node::Tuple(items) | Node::Set(items) => {
                for &item in items {
                    self.flatten_ints(item, out);
                }
            }
        }
    }

    /// Nesting depth of tuples/sets: ints and bottom are depth 0.
    pub fn depth(&self, id: Vid) -> usize {
        match self.node(id) {
            Node::Bottom | Node::Int(_) => 0,
            Node::Tuple(items) | Node::Set(items) => {
                1 + items.iter().map(|&i| self.depth(i)).max().unwrap_or(0)
            }
        }
    }

    /// JSON encoding: ints are numbers, bottom is `null`, sets are arrays
    /// sorted by the canonical value order, tuples are `{"tuple": [...]}`.
    pub fn to_json(&self, id: Vid) -> serde_json::Value {
        match self.node(id) {
            Node::Bottom => serde_json::Value::Null,
            Node::Int(i) => serde_json::Value::from(*i),
            Node::Tuple(items) => {
                let arr: Vec<_> = items.iter().map(|&i| self.to_json(i)).collect();
                serde_json::json!({ "tuple": arr })
            }
            Node::Set(_) => {
                let arr: Vec<_> = self
                    .sorted_by_value(id)
                    .into_iter()
                    .map(|i| self.to_json(i))
                    .collect();
                serde_json::Value::Array(arr)
            }
        }
    }

    pub fn from_json(&mut self, v: &serde_json::Value) -> Result<Vid, ValueDecodeError> {
        match v {
            serde_json::Value::Null => Ok(self.bottom()),
            serde_json::Value::Number(n) => n
                .as_i64()
                .map(|i| self.int(i))
                .ok_or_else(|| ValueDecodeError(format!("non-integer number {n}"))),
            serde_json::Value::Array(items) => {
                let ids = items
                    .iter()
                    .map(|item| self.from_json(item))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(self.set_of(ids))
            }
            serde_json::Value::Object(map) => {
                let items = map
                    .get("tuple")
                    .and_then(|t| t.as_array())
                    .ok_or_else(|| ValueDecodeError(format!("unexpected object {v}")))?;
                let ids = items
                    .iter()
                    .map(|item| self.from_json(item))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(self.tuple(ids))
            }
            other => Err(ValueDecodeError(format!("unexpected value {other}"))),
        }
    }

    /// Human-readable rendering for diagnostics.
    pub fn display(&self, id: Vid) -> String {
        match self.node(id) {
            Node::Bottom => "⊥".to_string(),
            Node::Int(i) => i.to_string(),
            Node::Tuple(items) => {
                let inner: Vec<_> = items.iter().map(|&i| self.display(i)).collect();
                format!("({})", inner.join(","))
            }
            Node::Set(_) => {
                let inner: Vec<_> = self
                    .sorted_by_value(id)
                    .into_iter()
                    .map(|i| self.display(i))
                    .collect();
                format!("{{{}}}", inner.join(","))
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("cannot decode value: {0}")]
pub struct ValueDecodeError(pub String);

/// Owned, arena-independent value. Program inputs and topology vertices are
/// trees; they get interned when a run starts. The derived `Ord` coincides
/// with [`ValueArena::cmp_values`].
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum ValueTree {
    Bottom,
    Int(i64),
    Tuple(Vec<ValueTree>),
    Set(std::collections::BTreeSet<ValueTree>),
}

impl ValueTree {
    pub fn set<I: IntoIterator<Item = ValueTree>>(items: I) -> ValueTree {
        ValueTree::Set(items.into_iter().collect())
    }

    pub fn ints<I: IntoIterator<Item = i64>>(items: I) -> ValueTree {
        ValueTree::set(items.into_iter().map(ValueTree::Int))
    }
}

impl From<i64> for ValueTree {
    fn from(i: i64) -> Self {
        ValueTree::Int(i)
    }
}

impl fmt::Display for ValueTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueTree::Bottom => write!(f, "⊥"),
            ValueTree::Int(i) => write!(f, "{i}"),
            ValueTree::Tuple(items) => {
                write!(f, "(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, ")")
            }
            ValueTree::Set(items) => {
                write!(f, "{{")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

impl ValueArena {
    pub fn from_tree(&mut self, tree: &ValueTree) -> Vid {
        match tree {
            ValueTree::Bottom => self.bottom(),
            ValueTree::Int(i) => self.int(*i),
            ValueTree::Tuple(items) => {
                let ids = items.iter().map(|t| self.from_tree(t)).collect();
                self.tuple(ids)
            }
            ValueTree::Set(items) => {
                let ids = items.iter().map(|t| self.from_tree(t)).collect();
                self.set_of(ids)
            }
        }
    }

    pub fn to_tree(&self, id: Vid) -> ValueTree {
        match self.node(id) {
            Node::Bottom => ValueTree::Bottom,
            Node::Int(i) => ValueTree::Int(*i),
            Node::Tuple(items) => {
                ValueTree::Tuple(items.iter().map(|&i| self.to_tree(i)).collect())
            }
            Node::Set(items) => {
                ValueTree::Set(items.iter().map(|&i| self.to_tree(i)).collect())
            }
        }
    }
}
