//! Arrival-ordered graph instances, exact maximum matching, and
//! fractional assignment checks.
//!
//! Vertices are identified by their arrival position: vertex `v` is the
//! `v`-th to arrive (0-based), and every edge is stored from the later
//! endpoint's perspective as an "earlier neighbor" list. Edge-arrival
//! instances keep the revealed edge order instead.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::{Error, Result};

/// Vertex identifier; equal to the vertex's arrival position.
pub type VertexId = usize;

/// Largest instance `brute_force_max_matching` accepts.
pub const BRUTE_FORCE_LIMIT: usize = 12;

// ---------------------------------------------------------------------------
// Instances
// ---------------------------------------------------------------------------

/// A vertex-arrival instance: for each vertex, its already-arrived neighbors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrivalInstance {
    /// `nbrs[v]` lists the neighbors of `v` that arrived before it,
    /// strictly increasing.
    nbrs: Vec<Vec<VertexId>>,
}

impl ArrivalInstance {
    /// Builds an instance from per-vertex earlier-neighbor lists.
    ///
    /// Each list must be strictly increasing and contain only vertices
    /// that arrived earlier.
    pub fn new(nbrs: Vec<Vec<VertexId>>) -> Result<Self> {
        for (v, list) in nbrs.iter().enumerate() {
            for (i, &u) in list.iter().enumerate() {
                if u >= v {
                    return Err(Error::InvalidInstance(format!(
                        "vertex {v} lists neighbor {u} that has not arrived before it"
                    )));
                }
                if i > 0 && list[i - 1] >= u {
                    return Err(Error::InvalidInstance(format!(
                        "neighbor list of vertex {v} is not strictly increasing"
                    )));
                }
            }
        }
        Ok(Self { nbrs })
    }

    /// Builds an instance from undirected edges and an implicit arrival
    /// order `0..n`.
    pub fn from_edges(n: usize, edges: &[(VertexId, VertexId)]) -> Result<Self> {
        let mut nbrs = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a == b || a >= n || b >= n {
                return Err(Error::InvalidInstance(format!("bad edge ({a}, {b})")));
            }
            let (u, v) = if a < b { (a, b) } else { (b, a) };
            nbrs[v].push(u);
        }
        for list in &mut nbrs {
            list.sort_unstable();
            list.dedup();
        }
        Self::new(nbrs)
    }

    /// Number of vertices.
    pub fn n(&self) -> usize {
        self.nbrs.len()
    }

    /// Neighbors of `v` that arrived before `v`, in arrival order.
    pub fn earlier_neighbors(&self, v: VertexId) -> &[VertexId] {
        &self.nbrs[v]
    }

    /// All edges as `(earlier, later)` pairs, grouped by the later endpoint.
    pub fn edges(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        self.nbrs
            .iter()
            .enumerate()
            .flat_map(|(v, list)| list.iter().map(move |&u| (u, v)))
    }

    /// Number of edges.
    pub fn edge_count(&self) -> usize {
        self.nbrs.iter().map(Vec::len).sum()
    }

    /// Undirected view of the instance.
    pub fn to_graph(&self) -> Graph {
        let mut g = Graph::new(self.n());
        for (u, v) in self.edges() {
            g.add_edge(u, v);
        }
        g
    }

    /// Parses the vertex-arrival text format (see [`parse_instance`]).
    pub fn parse(text: &str) -> Result<Self> {
        match parse_instance(text)? {
            Instance::Vertex(inst) => Ok(inst),
            Instance::Edge(_) => Err(Error::InvalidInstance(
                "expected a vertex-arrival instance, found mode edge".into(),
            )),
        }
    }

    /// Serializes to the vertex-arrival text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("mode vertex\n");
        let _ = writeln!(out, "n {}", self.n());
        for (v, list) in self.nbrs.iter().enumerate() {
            let _ = write!(out, "arrive {v}");
            for u in list {
                let _ = write!(out, " {u}");
            }
            out.push('\n');
        }
        out
    }
}

/// An edge-arrival instance: a fixed vertex set and edges in reveal order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeArrivalInstance {
    n: usize,
    edges: Vec<(VertexId, VertexId)>,
}

impl EdgeArrivalInstance {
    /// Builds an instance over vertices `0..n` with the given reveal order.
    pub fn new(n: usize, edges: Vec<(VertexId, VertexId)>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for &(u, v) in &edges {
            if u == v || u >= n || v >= n {
                return Err(Error::InvalidInstance(format!("bad edge ({u}, {v})")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::InvalidInstance(format!(
                    "duplicate edge ({u}, {v})"
                )));
            }
        }
        Ok(Self { n, edges })
    }

    /// Number of vertices.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges in reveal order.
    pub fn edges(&self) -> &[(VertexId, VertexId)] {
        &self.edges
    }

    /// Undirected view of the first `prefix` revealed edges.
    pub fn prefix_graph(&self, prefix: usize) -> Graph {
        let mut g = Graph::new(self.n);
        for &(u, v) in &self.edges[..prefix.min(self.edges.len())] {
            g.add_edge(u, v);
        }
        g
    }

    /// Undirected view of the whole instance.
    pub fn to_graph(&self) -> Graph {
        self.prefix_graph(self.edges.len())
    }

    /// Parses the edge-arrival text format (see [`parse_instance`]).
    pub fn parse(text: &str) -> Result<Self> {
        match parse_instance(text)? {
            Instance::Edge(inst) => Ok(inst),
            Instance::Vertex(_) => Err(Error::InvalidInstance(
                "expected an edge-arrival instance, found mode vertex".into(),
            )),
        }
    }

    /// Serializes to the edge-arrival text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("mode edge\n");
        let _ = writeln!(out, "n {}", self.n);
        for &(u, v) in &self.edges {
            let _ = writeln!(out, "edge {u} {v}");
        }
        out
    }
}

/// Either arrival model, as read from an instance file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instance {
    Vertex(ArrivalInstance),
    Edge(EdgeArrivalInstance),
}

/// Parses the instance text format.
///
/// Lines are whitespace-separated tokens; `#` starts a comment that runs
/// to the end of the line; blank lines are ignored. The first directive
/// must be `mode vertex` or `mode edge`, followed by `n <N>`. Vertex
/// instances then list `arrive <v> [<u1> <u2> ...]` in arrival order
/// (earlier neighbors, strictly increasing); edge instances list
/// `edge <u> <v>` in reveal order.
pub fn parse_instance(text: &str) -> Result<Instance> {
    enum Mode {
        Vertex,
        Edge,
    }
    let mut mode = None;
    let mut n: Option<usize> = None;
    let mut arrive_rows: Vec<Vec<usize>> = Vec::new();
    let mut edge_rows: Vec<(usize, usize)> = Vec::new();

    let err = |line: usize, message: &str| Error::Parse {
        line,
        message: message.to_string(),
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("");
        let mut tok = line.split_whitespace();
        let Some(head) = tok.next() else { continue };
        let rest: Vec<&str> = tok.collect();
        let parse_usize = |s: &str, what: &str| -> Result<usize> {
            s.parse::<usize>()
                .map_err(|_| err(line_no, &format!("{what} is not a nonnegative integer: {s}")))
        };
        match head {
            "mode" => {
                if mode.is_some() {
                    return Err(err(line_no, "duplicate mode directive"));
                }
                match rest.as_slice() {
                    ["vertex"] => mode = Some(Mode::Vertex),
                    ["edge"] => mode = Some(Mode::Edge),
                    _ => return Err(err(line_no, "mode must be `vertex` or `edge`")),
                }
            }
            "n" => {
                if mode.is_none() {
                    return Err(err(line_no, "n before mode directive"));
                }
                if n.is_some() {
                    return Err(err(line_no, "duplicate n directive"));
                }
                let [val] = rest.as_slice() else {
                    return Err(err(line_no, "n takes exactly one value"));
                };
                n = Some(parse_usize(val, "n")?);
            }
            "arrive" => {
                let Some(Mode::Vertex) = mode else {
                    return Err(err(line_no, "arrive is only valid in mode vertex"));
                };
                if n.is_none() {
                    return Err(err(line_no, "arrive before n directive"));
                }
                let Some((v_tok, nbr_toks)) = rest.split_first() else {
                    return Err(err(line_no, "arrive needs a vertex id"));
                };
                let v = parse_usize(v_tok, "vertex id")?;
                if v != arrive_rows.len() {
                    return Err(err(
                        line_no,
                        &format!("arrive rows must be in order; expected vertex {}", arrive_rows.len()),
                    ));
                }
                let nbrs = nbr_toks
                    .iter()
                    .map(|s| parse_usize(s, "neighbor id"))
                    .collect::<Result<Vec<_>>>()?;
                arrive_rows.push(nbrs);
            }
            "edge" => {
                let Some(Mode::Edge) = mode else {
                    return Err(err(line_no, "edge is only valid in mode edge"));
                };
                if n.is_none() {
                    return Err(err(line_no, "edge before n directive"));
                }
                let [u, v] = rest.as_slice() else {
                    return Err(err(line_no, "edge takes exactly two vertex ids"));
                };
                edge_rows.push((parse_usize(u, "vertex id")?, parse_usize(v, "vertex id")?));
            }
            other => return Err(err(line_no, &format!("unknown directive `{other}`"))),
        }
    }

    let Some(mode) = mode else {
        return Err(err(0, "missing mode directive"));
    };
    let Some(n) = n else {
        return Err(err(0, "missing n directive"));
    };
    match mode {
        Mode::Vertex => {
            if arrive_rows.len() != n {
                return Err(Error::InvalidInstance(format!(
                    "expected {n} arrive rows, found {}",
                    arrive_rows.len()
                )));
            }
            Ok(Instance::Vertex(ArrivalInstance::new(arrive_rows)?))
        }
        Mode::Edge => Ok(Instance::Edge(EdgeArrivalInstance::new(n, edge_rows)?)),
    }
}

// ---------------------------------------------------------------------------
// Undirected graphs and matchings
// ---------------------------------------------------------------------------

/// Plain undirected graph with adjacency lists.
#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    adj: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Empty graph on `n` vertices.
    pub fn new(n: usize) -> Self {
        Self {
            n,
            adj: vec![Vec::new(); n],
            edges: Vec::new(),
        }
    }

    /// Adds an undirected edge.
    pub fn add_edge(&mut self, u: usize, v: usize) {
        assert!(u < self.n && v < self.n && u != v, "bad edge ({u}, {v})");
        self.adj[u].push(v);
        self.adj[v].push(u);
        self.edges.push((u.min(v), u.max(v)));
    }

    /// Number of vertices.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Neighbors of `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    /// Edges as `(min, max)` pairs in insertion order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }
}

/// A matching, stored as the partner of each vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    mate: Vec<Option<usize>>,
}

impl Matching {
    /// Empty matching on `n` vertices.
    pub fn empty(n: usize) -> Self {
        Self {
            mate: vec![None; n],
        }
    }

    /// Builds a matching from unordered vertex pairs, rejecting overlaps.
    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut m = Self::empty(n);
        for &(u, v) in pairs {
            if u == v || u >= n || v >= n {
                return Err(Error::InvalidInstance(format!("bad pair ({u}, {v})")));
            }
            if m.mate[u].is_some() || m.mate[v].is_some() {
                return Err(Error::InvalidInstance(format!(
                    "pair ({u}, {v}) overlaps another pair"
                )));
            }
            m.mate[u] = Some(v);
            m.mate[v] = Some(u);
        }
        Ok(m)
    }

    /// Records the pair `(u, v)`; both must be unmatched.
    pub fn add_pair(&mut self, u: usize, v: usize) {
        assert!(u != v && self.mate[u].is_none() && self.mate[v].is_none());
        self.mate[u] = Some(v);
        self.mate[v] = Some(u);
    }

    /// Partner of `v`, if matched.
    pub fn mate(&self, v: usize) -> Option<usize> {
        self.mate[v]
    }

    /// Whether `v` is matched.
    pub fn is_matched(&self, v: usize) -> bool {
        self.mate[v].is_some()
    }

    /// Number of matched pairs.
    pub fn size(&self) -> usize {
        self.mate.iter().flatten().count() / 2
    }

    /// Matched pairs as `(min, max)`, sorted.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.mate
            .iter()
            .enumerate()
            .filter_map(|(v, &m)| m.filter(|&u| v < u).map(|u| (v, u)))
            .collect()
    }
}

/// Maximum-cardinality matching on a general graph via blossom contraction.
///
/// Runs an alternating BFS from every free vertex; odd cycles found during
/// the search are contracted through a base-pointer array. `O(V^3)`.
pub fn maximum_matching(g: &Graph) -> Matching {
    let n = g.n();
    const NONE: usize = usize::MAX;
    let mut mate = vec![NONE; n];
    let mut parent = vec![NONE; n];
    let mut base: Vec<usize> = (0..n).collect();

    fn lowest_common_base(
        mut a: usize,
        mut b: usize,
        base: &[usize],
        parent: &[usize],
        mate: &[usize],
    ) -> usize {
        const NONE: usize = usize::MAX;
        let mut marked = vec![false; base.len()];
        loop {
            a = base[a];
            marked[a] = true;
            if mate[a] == NONE {
                break;
            }
            a = parent[mate[a]];
        }
        loop {
            b = base[b];
            if marked[b] {
                return b;
            }
            b = parent[mate[b]];
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn mark_blossom_path(
        mut v: usize,
        stem: usize,
        mut child: usize,
        parent: &mut [usize],
        base: &[usize],
        mate: &[usize],
        in_blossom: &mut [bool],
    ) {
        while base[v] != stem {
            in_blossom[base[v]] = true;
            in_blossom[base[mate[v]]] = true;
            parent[v] = child;
            child = mate[v];
            v = parent[mate[v]];
        }
    }

    fn find_augmenting_path(
        root: usize,
        g: &Graph,
        mate: &[usize],
        parent: &mut [usize],
        base: &mut [usize],
    ) -> Option<usize> {
        const NONE: usize = usize::MAX;
        let n = g.n();
        for i in 0..n {
            parent[i] = NONE;
            base[i] = i;
        }
        let mut in_tree = vec![false; n];
        in_tree[root] = true;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for &to in g.neighbors(v) {
                if base[v] == base[to] || mate[v] == to {
                    continue;
                }
                if to == root || (mate[to] != NONE && parent[mate[to]] != NONE) {
                    // Found an odd cycle: contract it onto its base.
                    let stem = lowest_common_base(v, to, base, parent, mate);
                    let mut in_blossom = vec![false; n];
                    mark_blossom_path(v, stem, to, parent, base, mate, &mut in_blossom);
                    mark_blossom_path(to, stem, v, parent, base, mate, &mut in_blossom);
                    for i in 0..n {
                        if in_blossom[base[i]] {
                            base[i] = stem;
                            if !in_tree[i] {
                                in_tree[i] = true;
                                queue.push_back(i);
                            }
                        }
                    }
                } else if parent[to] == NONE {
                    parent[to] = v;
                    if mate[to] == NONE {
                        return Some(to);
                    }
                    in_tree[mate[to]] = true;
                    queue.push_back(mate[to]);
                }
            }
        }
        None
    }

    for root in 0..n {
        if mate[root] != NONE {
            continue;
        }
        if let Some(end) = find_augmenting_path(root, g, &mate, &mut parent, &mut base) {
            // Flip matched status along the alternating path back to the root.
            let mut v = end;
            while v != NONE {
                let pv = parent[v];
                let next = if pv == NONE { NONE } else { mate[pv] };
                mate[v] = pv;
                if pv != NONE {
                    mate[pv] = v;
                }
                v = next;
            }
        }
    }

    let mut m = Matching::empty(n);
    for v in 0..n {
        if mate[v] != NONE && v < mate[v] {
            m.add_pair(v, mate[v]);
        }
    }
    m
}

/// Exact maximum matching size by subset dynamic programming.
///
/// Independent of [`maximum_matching`]; intended as a small-instance
/// oracle. Errors for more than [`BRUTE_FORCE_LIMIT`] vertices.
pub fn brute_force_max_matching(g: &Graph) -> Result<usize> {
    let n = g.n();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            operation: "brute_force_max_matching",
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let adj_mask: Vec<u32> = (0..n)
        .map(|v| g.neighbors(v).iter().fold(0u32, |m, &u| m | 1 << u))
        .collect();
    // best[mask] = maximum matching among the vertices still present in mask.
    let mut best = vec![0u8; 1usize << n];
    for mask in 1u32..(1 << n) {
        let u = mask.trailing_zeros() as usize;
        let without = mask & !(1 << u);
        let mut b = best[without as usize];
        let mut cand = adj_mask[u] & without;
        while cand != 0 {
            let w = cand.trailing_zeros();
            cand &= cand - 1;
            b = b.max(1 + best[(without & !(1 << w)) as usize]);
        }
        best[mask as usize] = b;
    }
    Ok(best[(1usize << n) - 1] as usize)
}

// ---------------------------------------------------------------------------
// Fractional assignments
// ---------------------------------------------------------------------------

/// A fractional edge assignment `x_e >= 0` keyed by unordered pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FractionalAssignment {
    x: BTreeMap<(usize, usize), f64>,
}

impl FractionalAssignment {
    /// Empty assignment.
    pub fn new() -> Self {
        Self::default()
    }

    fn key(u: usize, v: usize) -> (usize, usize) {
        assert!(u != v, "self-loop ({u}, {v})");
        (u.min(v), u.max(v))
    }

    /// Sets `x_{uv}`.
    pub fn set(&mut self, u: usize, v: usize, value: f64) {
        self.x.insert(Self::key(u, v), value);
    }

    /// Adds to `x_{uv}`.
    pub fn add(&mut self, u: usize, v: usize, delta: f64) {
        *self.x.entry(Self::key(u, v)).or_insert(0.0) += delta;
    }

    /// Reads `x_{uv}` (0 when absent).
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.x.get(&Self::key(u, v)).copied().unwrap_or(0.0)
    }

    /// Entries in key order.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.x.iter().map(|(&k, &v)| (k, v))
    }

    /// Fractional load of each vertex (sum of incident values).
    pub fn loads(&self, n: usize) -> Vec<f64> {
        let mut load = vec![0.0; n];
        for (&(u, v), &x) in &self.x {
            load[u] += x;
            load[v] += x;
        }
        load
    }
}

/// Total fractional value `sum_e x_e`.
pub fn fractional_value(x: &FractionalAssignment) -> f64 {
    x.iter().map(|(_, v)| v).sum()
}

/// Per-vertex load report from [`check_fractional_feasibility`].
#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    /// All values nonnegative and every load at most `1 + tol`.
    pub feasible: bool,
    /// Fractional load of each vertex.
    pub loads: Vec<f64>,
    /// Largest load and the vertex attaining it.
    pub max_load: f64,
    pub max_load_vertex: usize,
    /// Edges carrying a negative value.
    pub negative_edges: Vec<(usize, usize)>,
}

/// Checks `x_e >= 0` and per-vertex load at most `1 + tol` over `n` vertices.
pub fn check_fractional_feasibility(
    x: &FractionalAssignment,
    n: usize,
    tol: f64,
) -> FeasibilityReport {
    let loads = x.loads(n);
    let (max_load_vertex, max_load) = loads
        .iter()
        .enumerate()
        .map(|(v, &l)| (v, l))
        .fold((0, 0.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
    let negative_edges: Vec<_> = x
        .iter()
        .filter(|&(_, val)| val < -tol)
        .map(|(k, _)| k)
        .collect();
    FeasibilityReport {
        feasible: negative_edges.is_empty() && max_load <= 1.0 + tol,
        loads,
        max_load,
        max_load_vertex,
        negative_edges,
    }
}
