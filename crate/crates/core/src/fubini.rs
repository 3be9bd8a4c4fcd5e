//! Admissibility of interchanging integration order in iterated
//! integrals, decided on a labeled multigraph.
//!
//! Vertices are scalar integration variables. A type-II kernel
//! contributes one `t`-labeled edge per variable pair inside its group; a
//! cross factor `Gamma(c y^{±1} z^{±1})` contributes two `c`-labeled
//! edges per vertex pair (one per sign orbit); a single-variable factor
//! `Gamma(c z^{±1})` contributes a `c`-labeled half-edge, and
//! `Gamma(c z^{±2})` is pre-expanded into the eight half-edges
//! `±sqrt(c)`, `±sqrt(Pc)`, `±sqrt(Qc)`, `±sqrt(PQc)` in the factor's
//! variant base `(P, Q)`. Cross factors of degree two
//! (`Gamma(c y^{±2} z^{±1})`) are rejected rather than modeled.
//!
//! Order interchange is admissible when no path product lands in
//! `p^{Z<=0} q^{Z<=0}`: the products are taken over open walks that start
//! and end at a half-edge (length at most `2 * 3^(V-1)`, counting
//! half-edges as 1) and over closed edge-walks (length at most
//! `4 * 3^(V-2)`), with labels reduced modulo the balancing relations.
//!
//! Enumeration deduplicates by canonical product during the search: the
//! dynamic-programming state is a (vertex, product) pair, so the walk
//! counts stay exact while the state space stays small. Multiplicities
//! follow the ordered-walk convention: open paths are counted once per
//! direction (a self-reversal-symmetric path once), closed paths once per
//! direction and starting point. The convention only affects prefactor
//! multiplicities, never the admissibility verdict.

use std::collections::HashMap;

use crate::error::{CoreError, Result};
use crate::ispec::{IntegralSpec, SlotIndex};
use crate::kernels::KernelFamily;
use crate::efun::GammaVariant;
use crate::symalg::{LatticeVerdict, Monomial, RelationSet};

#[derive(Clone, Debug)]
pub struct HalfEdge {
    pub vertex: usize,
    /// Relation-reduced label used for products.
    pub label: Monomial,
    /// The label as written in the integrand, for witnesses.
    pub raw: Monomial,
}

#[derive(Clone, Debug)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub label: Monomial,
    pub raw: Monomial,
}

#[derive(Clone, Debug, Default)]
pub struct FubiniGraph {
    pub vertex_names: Vec<String>,
    pub edges: Vec<Edge>,
    pub half_edges: Vec<HalfEdge>,
}

impl FubiniGraph {
    pub fn vertex_count(&self) -> usize {
        self.vertex_names.len()
    }

    /// Open walks run to length `2 * 3^(V-1)` (two half-edges included).
    pub fn open_length_bound(&self) -> usize {
        2 * 3usize.pow(self.vertex_count().saturating_sub(1) as u32)
    }

    /// Closed walks run to length `4 * 3^(V-2)`; none exist below two
    /// vertices.
    pub fn closed_length_bound(&self) -> usize {
        if self.vertex_count() < 2 {
            0
        } else {
            4 * 3usize.pow((self.vertex_count() - 2) as u32)
        }
    }
}

/// The base pair `(P, Q)` of a variant, as monomials in `p`, `q`.
fn variant_base_monomials(v: GammaVariant) -> (Monomial, Monomial) {
    match v {
        GammaVariant::Pq => (Monomial::gen("p"), Monomial::gen("q")),
        GammaVariant::Pq2 => (
            Monomial::gen("p"),
            Monomial::gen_pow("q", 2, 1).expect("integer exponent"),
        ),
        GammaVariant::Half => (
            Monomial::gen_pow("p", 1, 2).expect("half exponent"),
            Monomial::gen_pow("q", 1, 2).expect("half exponent"),
        ),
    }
}

/// Builds the graph of an iterated integral; labels are reduced modulo
/// `rels` so path products can be tested for lattice membership directly.
pub fn graph_from_spec(spec: &IntegralSpec, rels: &RelationSet) -> Result<FubiniGraph> {
    let spec = spec.collapse();
    let mut names = Vec::new();
    let mut offsets: HashMap<&str, usize> = HashMap::new();
    for g in &spec.groups {
        offsets.insert(g.name.as_str(), names.len());
        if g.dim() == 1 {
            names.push(g.name.clone());
        } else {
            for j in 1..=g.dim() {
                names.push(format!("{}{}", g.name, j));
            }
        }
    }
    let mut graph = FubiniGraph {
        vertex_names: names,
        ..Default::default()
    };
    // Kernel cross terms: one t-edge per pair inside each type-II group.
    for g in &spec.groups {
        if g.kernel.family == KernelFamily::TypeII {
            let t = g.kernel.t.as_ref().expect("type-II kernel has t");
            let off = offsets[g.name.as_str()];
            for j in 0..g.dim() {
                for k in (j + 1)..g.dim() {
                    graph.edges.push(Edge {
                        a: off + j,
                        b: off + k,
                        label: t.reduce(rels)?,
                        raw: t.clone(),
                    });
                }
            }
        }
    }
    for f in &spec.factors {
        let expand = |slot: &crate::ispec::Slot| -> Vec<usize> {
            let g = spec.groups.iter().find(|g| g.name == slot.group).unwrap();
            let off = offsets[slot.group.as_str()];
            match slot.index {
                SlotIndex::Each => (0..g.dim()).map(|j| off + j).collect(),
                SlotIndex::Specific(j) => vec![off + j],
            }
        };
        match f.slots.len() {
            0 => {} // constant factor: no poles in the variables
            1 => {
                let s = &f.slots[0];
                match s.exp {
                    1 => {
                        for v in expand(s) {
                            graph.half_edges.push(HalfEdge {
                                vertex: v,
                                label: f.coef.reduce(rels)?,
                                raw: f.coef.clone(),
                            });
                        }
                    }
                    2 => {
                        // (c z^{±2}; P, Q) splits into eight half-edges.
                        let (bp, bq) = variant_base_monomials(f.variant);
                        let shifts = [
                            Monomial::one(),
                            bp.clone(),
                            bq.clone(),
                            bp.mul(&bq),
                        ];
                        for v in expand(s) {
                            for shift in &shifts {
                                let root =
                                    f.coef.mul(shift).root(2).map_err(|e| {
                                        CoreError::UnsupportedDegree(format!(
                                            "cannot take sqrt of ±2-factor coefficient {}: {e}",
                                            f.coef
                                        ))
                                    })?;
                                for sign in [0, 4] {
                                    let raw = Monomial::phase(sign).mul(&root);
                                    graph.half_edges.push(HalfEdge {
                                        vertex: v,
                                        label: raw.reduce(rels)?,
                                        raw,
                                    });
                                }
                            }
                        }
                    }
                    e => {
                        return Err(CoreError::UnsupportedDegree(format!(
                            "single-variable factor of degree ±{e}"
                        )))
                    }
                }
            }
            2 => {
                let (s1, s2) = (&f.slots[0], &f.slots[1]);
                if s1.exp != 1 || s2.exp != 1 {
                    return Err(CoreError::UnsupportedDegree(format!(
                        "cross factor Γ({} {}^±{} {}^±{}) is outside the graph model",
                        f.coef, s1.group, s1.exp, s2.group, s2.exp
                    )));
                }
                // Two edges per vertex pair, one per sign orbit.
                for v1 in expand(s1) {
                    for v2 in expand(s2) {
                        for _ in 0..2 {
                            graph.edges.push(Edge {
                                a: v1,
                                b: v2,
                                label: f.coef.reduce(rels)?,
                                raw: f.coef.clone(),
                            });
                        }
                    }
                }
            }
            k => {
                return Err(CoreError::UnsupportedDegree(format!(
                    "factor with {k} slots"
                )))
            }
        }
    }
    Ok(graph)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathKind {
    Open,
    Closed,
}

/// A representative walk: visited vertices and the labels used, as
/// written in the integrand.
#[derive(Clone, Debug, Default)]
pub struct Witness {
    pub vertices: Vec<usize>,
    pub labels: Vec<Monomial>,
}

impl Witness {
    pub fn render(&self, graph: &FubiniGraph) -> String {
        let verts: Vec<&str> = self
            .vertices
            .iter()
            .map(|&v| graph.vertex_names[v].as_str())
            .collect();
        let labels: Vec<String> = self.labels.iter().map(|l| l.to_string()).collect();
        format!("[{}] via [{}]", verts.join(" -> "), labels.join(" , "))
    }
}

#[derive(Clone, Debug)]
pub struct PathProduct {
    pub product: Monomial,
    pub multiplicity: u128,
    pub kind: PathKind,
    pub witness: Witness,
}

#[derive(Clone, Debug, Default)]
pub struct PathEnumeration {
    pub open: Vec<PathProduct>,
    pub closed: Vec<PathProduct>,
}

/// Cap on the deduplicated search state count.
pub const DEFAULT_PATH_CAP: usize = 1_000_000;

/// Monomial interner: the dynamic program works on compact ids and
/// multiplies any (product, label) pair at most once.
#[derive(Default)]
struct Interner {
    ids: HashMap<Monomial, u32>,
    monos: Vec<Monomial>,
}

impl Interner {
    fn intern(&mut self, m: Monomial) -> u32 {
        if let Some(&id) = self.ids.get(&m) {
            return id;
        }
        let id = self.monos.len() as u32;
        self.monos.push(m.clone());
        self.ids.insert(m, id);
        id
    }

    fn get(&self, id: u32) -> &Monomial {
        &self.monos[id as usize]
    }
}

struct Walker<'g> {
    graph: &'g FubiniGraph,
    adjacency: Vec<Vec<(usize, usize)>>, // vertex -> (other, edge index)
    halves_at: Vec<Vec<usize>>,
    interner: Interner,
    // (product id, edge index) -> product id of the extension
    mul_memo: HashMap<(u32, usize), u32>,
    cap: usize,
}

impl<'g> Walker<'g> {
    fn new(graph: &'g FubiniGraph, cap: usize) -> Walker<'g> {
        let nv = graph.vertex_count();
        let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nv];
        for (i, e) in graph.edges.iter().enumerate() {
            adjacency[e.a].push((e.b, i));
            adjacency[e.b].push((e.a, i));
        }
        let mut halves_at: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for (i, h) in graph.half_edges.iter().enumerate() {
            halves_at[h.vertex].push(i);
        }
        Walker {
            graph,
            adjacency,
            halves_at,
            interner: Interner::default(),
            mul_memo: HashMap::new(),
            cap,
        }
    }

    fn extend(&mut self, prod: u32, edge: usize) -> u32 {
        if let Some(&id) = self.mul_memo.get(&(prod, edge)) {
            return id;
        }
        let m = self.interner.get(prod).mul(&self.graph.edges[edge].label);
        let id = self.interner.intern(m);
        self.mul_memo.insert((prod, edge), id);
        id
    }

    fn check_cap(&self, states: usize) -> Result<()> {
        if states > self.cap || self.interner.monos.len() > self.cap {
            return Err(CoreError::PathCapExceeded(self.cap));
        }
        Ok(())
    }
}

/// Enumerates all open and closed path products within the length bounds,
/// deduplicated by canonical monomial with exact walk multiplicities.
/// Witnesses are not materialized here; [`check_admissibility`]
/// reconstructs them for the offending products only.
pub fn enumerate_path_products(graph: &FubiniGraph, cap: usize) -> Result<PathEnumeration> {
    let nv = graph.vertex_count();
    let mut walker = Walker::new(graph, cap);
    let mut open: HashMap<u32, u128> = HashMap::new();
    if !graph.half_edges.is_empty() && nv > 0 {
        let interior_steps = graph.open_length_bound().saturating_sub(2);
        let mut states: HashMap<(usize, u32), u128> = HashMap::new();
        for h in &graph.half_edges {
            let id = walker.interner.intern(h.label.clone());
            *states.entry((h.vertex, id)).or_insert(0) += 1;
        }
        for step in 0..=interior_steps {
            // Close every state with every half-edge at its endpoint.
            let keys: Vec<((usize, u32), u128)> =
                states.iter().map(|(k, v)| (*k, *v)).collect();
            for ((v, prod), count) in &keys {
                for &h in &walker.halves_at[*v].clone() {
                    let m = walker
                        .interner
                        .get(*prod)
                        .mul(&graph.half_edges[h].label);
                    let id = walker.interner.intern(m);
                    let slot = open.entry(id).or_insert(0);
                    *slot = slot.saturating_add(*count);
                }
            }
            walker.check_cap(open.len())?;
            if step == interior_steps {
                break;
            }
            let mut next: HashMap<(usize, u32), u128> = HashMap::new();
            for ((v, prod), count) in keys {
                for (other, e) in walker.adjacency[v].clone() {
                    let id = walker.extend(prod, e);
                    let slot = next.entry((other, id)).or_insert(0);
                    *slot = slot.saturating_add(count);
                }
            }
            walker.check_cap(next.len())?;
            states = next;
            if states.is_empty() {
                break;
            }
        }
    }
    // Closed walks: counted once per direction and starting point.
    let mut closed: HashMap<u32, u128> = HashMap::new();
    let closed_bound = graph.closed_length_bound();
    if closed_bound >= 2 && !graph.edges.is_empty() {
        let one = walker.interner.intern(Monomial::one());
        for start in 0..nv {
            let mut states: HashMap<(usize, u32), u128> = HashMap::new();
            states.insert((start, one), 1);
            for step in 1..=closed_bound {
                let mut next: HashMap<(usize, u32), u128> = HashMap::new();
                for ((v, prod), count) in states {
                    for (other, e) in walker.adjacency[v].clone() {
                        let id = walker.extend(prod, e);
                        let slot = next.entry((other, id)).or_insert(0);
                        *slot = slot.saturating_add(count);
                    }
                }
                walker.check_cap(next.len() + closed.len())?;
                if step >= 2 {
                    for ((v, prod), count) in &next {
                        if *v == start {
                            let slot = closed.entry(*prod).or_insert(0);
                            *slot = slot.saturating_add(*count);
                        }
                    }
                }
                states = next;
                if states.is_empty() {
                    break;
                }
            }
        }
    }
    let into_products = |map: HashMap<u32, u128>, kind: PathKind, interner: &Interner| {
        let mut v: Vec<PathProduct> = map
            .into_iter()
            .map(|(id, multiplicity)| PathProduct {
                product: interner.get(id).clone(),
                multiplicity,
                kind,
                witness: Witness::default(),
            })
            .collect();
        v.sort_by(|a, b| a.product.cmp(&b.product));
        v
    };
    let open = into_products(open, PathKind::Open, &walker.interner);
    let closed = into_products(closed, PathKind::Closed, &walker.interner);
    Ok(PathEnumeration { open, closed })
}

/// Breadth-first search for one walk realizing `target`; used to attach
/// witnesses to offending products, which sit at short lengths.
fn find_witness(graph: &FubiniGraph, target: &Monomial, kind: PathKind) -> Option<Witness> {
    #[derive(Clone)]
    struct Node {
        vertex: usize,
        product: Monomial,
        parent: Option<usize>,
        label: Option<Monomial>, // raw label of the arriving step
    }
    let nv = graph.vertex_count();
    let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nv];
    for (i, e) in graph.edges.iter().enumerate() {
        adjacency[e.a].push((e.b, i));
        adjacency[e.b].push((e.a, i));
    }
    let reconstruct = |arena: &Vec<Node>, mut idx: usize, tail: Vec<Monomial>| -> Witness {
        let mut vertices = Vec::new();
        let mut labels = tail;
        loop {
            let node = &arena[idx];
            vertices.push(node.vertex);
            if let Some(l) = &node.label {
                labels.push(l.clone());
            }
            match node.parent {
                Some(p) => idx = p,
                None => break,
            }
        }
        vertices.reverse();
        labels.reverse();
        Witness { vertices, labels }
    };
    let mut arena: Vec<Node> = Vec::new();
    let mut frontier: Vec<usize> = Vec::new();
    match kind {
        PathKind::Open => {
            for h in &graph.half_edges {
                arena.push(Node {
                    vertex: h.vertex,
                    product: h.label.clone(),
                    parent: None,
                    label: Some(h.raw.clone()),
                });
                frontier.push(arena.len() - 1);
            }
            let interior = graph.open_length_bound().saturating_sub(2);
            for step in 0..=interior {
                for &idx in &frontier {
                    let node = arena[idx].clone();
                    for h in &graph.half_edges {
                        if h.vertex == node.vertex && &node.product.mul(&h.label) == target {
                            return Some(reconstruct(&arena, idx, vec![h.raw.clone()]));
                        }
                    }
                }
                if step == interior || arena.len() > DEFAULT_PATH_CAP {
                    break;
                }
                let mut next = Vec::new();
                for &idx in &frontier {
                    let node = arena[idx].clone();
                    for &(other, e) in &adjacency[node.vertex] {
                        arena.push(Node {
                            vertex: other,
                            product: node.product.mul(&graph.edges[e].label),
                            parent: Some(idx),
                            label: Some(graph.edges[e].raw.clone()),
                        });
                        next.push(arena.len() - 1);
                    }
                }
                frontier = next;
            }
        }
        PathKind::Closed => {
            for start in 0..nv {
                arena.clear();
                arena.push(Node {
                    vertex: start,
                    product: Monomial::one(),
                    parent: None,
                    label: None,
                });
                let mut frontier = vec![0usize];
                for step in 1..=graph.closed_length_bound() {
                    let mut next = Vec::new();
                    for &idx in &frontier {
                        let node = arena[idx].clone();
                        for &(other, e) in &adjacency[node.vertex] {
                            let product = node.product.mul(&graph.edges[e].label);
                            arena.push(Node {
                                vertex: other,
                                product: product.clone(),
                                parent: Some(idx),
                                label: Some(graph.edges[e].raw.clone()),
                            });
                            if step >= 2 && other == start && &product == target {
                                return Some(reconstruct(&arena, arena.len() - 1, vec![]));
                            }
                            next.push(arena.len() - 1);
                        }
                    }
                    frontier = next;
                    if arena.len() > DEFAULT_PATH_CAP {
                        break;
                    }
                }
            }
        }
    }
    None
}

/// Argument lists of the holomorphizing prefactor: `(w(λ); p, q)` over
/// open paths and `(w(μ), p w(μ), q w(μ), pq w(μ); p, q)^2` over closed
/// paths, returned as the `w` monomials with multiplicities.
#[derive(Clone, Debug, Default)]
pub struct PrefactorArgs {
    pub open: Vec<(Monomial, u128)>,
    pub closed: Vec<(Monomial, u128)>,
}

pub fn prefactor_arguments(enumeration: &PathEnumeration) -> PrefactorArgs {
    PrefactorArgs {
        open: enumeration
            .open
            .iter()
            .map(|p| (p.product.clone(), p.multiplicity))
            .collect(),
        closed: enumeration
            .closed
            .iter()
            .map(|p| (p.product.clone(), p.multiplicity))
            .collect(),
    }
}

/// Admissibility verdict with the offending path products as witnesses.
#[derive(Clone, Debug)]
pub struct Verdict {
    pub admissible: bool,
    pub offending: Vec<PathProduct>,
    pub open_products: usize,
    pub closed_products: usize,
}

/// Runs the lattice-membership test on every deduplicated path product.
/// Labels are assumed reduced (as [`graph_from_spec`] leaves them).
pub fn check_admissibility(graph: &FubiniGraph, cap: usize) -> Result<Verdict> {
    let enumeration = enumerate_path_products(graph, cap)?;
    let mut offending = Vec::new();
    for p in enumeration.open.iter().chain(enumeration.closed.iter()) {
        if let LatticeVerdict::Inside { .. } = p.product.lattice_membership() {
            let mut hit = p.clone();
            if let Some(w) = find_witness(graph, &p.product, p.kind) {
                hit.witness = w;
            }
            offending.push(hit);
        }
    }
    Ok(Verdict {
        admissible: offending.is_empty(),
        offending,
        open_products: enumeration.open.len(),
        closed_products: enumeration.closed.len(),
    })
}

// ---------------------------------------------------------------------
// Corpus of proof-step graphs, shipped under `corpus/fubini/`.

macro_rules! corpus_file {
    ($name:literal) => {
        include_str!(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../corpus/fubini/",
            $name,
            ".json"
        ))
    };
}

const CORPUS_SOURCES: &[&str] = &[
    corpus_file!("order_swap_failure"),
    corpus_file!("beta_univariate"),
    corpus_file!("selberg_kernel_pair"),
    corpus_file!("triple_glue"),
    corpus_file!("induction_opening"),
    corpus_file!("quadruple_split"),
    corpus_file!("half_base_chain"),
    corpus_file!("mixed_degree_cross"),
];

static CORPUS: std::sync::OnceLock<Vec<crate::schema::CorpusData>> = std::sync::OnceLock::new();

/// The shipped proof-step graph cases, in file order.
pub fn corpus() -> &'static [crate::schema::CorpusData] {
    CORPUS.get_or_init(|| {
        CORPUS_SOURCES
            .iter()
            .map(|src| serde_json::from_str(src).expect("corpus file is well-formed"))
            .collect()
    })
}

pub fn corpus_case(name: &str) -> Result<&'static crate::schema::CorpusData> {
    corpus()
        .iter()
        .find(|c| c.name == name)
        .ok_or_else(|| CoreError::UnknownIdentity(name.to_string()))
}

/// Outcome of running one corpus case through the graph checker.
#[derive(Debug)]
pub enum CorpusOutcome {
    Checked { graph: FubiniGraph, verdict: Verdict },
    Rejected(CoreError),
}

pub fn run_corpus_case(case: &crate::schema::CorpusData) -> Result<CorpusOutcome> {
    let (spec, relations) = case.resolve()?;
    match graph_from_spec(&spec, &relations) {
        Ok(graph) => {
            let verdict = check_admissibility(&graph, DEFAULT_PATH_CAP)?;
            Ok(CorpusOutcome::Checked { graph, verdict })
        }
        Err(e @ CoreError::UnsupportedDegree(_)) => Ok(CorpusOutcome::Rejected(e)),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ispec::{FactorSpec, Slot, VarGroup};
    use crate::kernels::KernelSpec;
    use crate::schema::CorpusExpectation;
    use crate::symalg::Relation;

    fn slot(group: &str, exp: u8) -> Slot {
        Slot {
            group: group.into(),
            exp,
            index: SlotIndex::Each,
        }
    }

    fn mono(s: &str) -> Monomial {
        s.parse().unwrap()
    }

    /// The failing double integral: two type-I variables y, z joined by a
    /// cross factor t, with u-half-edges at z and v-half-edges at y.
    fn counterexample_spec() -> IntegralSpec {
        let mut factors = vec![FactorSpec {
            variant: GammaVariant::Pq,
            coef: Monomial::gen("t"),
            slots: vec![slot("y", 1), slot("z", 1)],
        }];
        for r in 1..=4 {
            factors.push(FactorSpec {
                variant: GammaVariant::Pq,
                coef: Monomial::gen(&format!("u{r}")),
                slots: vec![slot("z", 1)],
            });
        }
        for r in 1..=2 {
            factors.push(FactorSpec {
                variant: GammaVariant::Pq,
                coef: Monomial::gen(&format!("v{r}")),
                slots: vec![slot("y", 1)],
            });
        }
        let relations = RelationSet::new(vec![
            Relation {
                lhs: mono("t^2 v1 v2"),
                rhs: Monomial::one(),
                solve_for: "v2".into(),
            },
            Relation {
                lhs: mono("t^2 u1 u2 u3 u4"),
                rhs: mono("p q"),
                solve_for: "u4".into(),
            },
        ]);
        IntegralSpec {
            groups: vec![
                VarGroup {
                    name: "y".into(),
                    kernel: KernelSpec::type_i(1, GammaVariant::Pq),
                },
                VarGroup {
                    name: "z".into(),
                    kernel: KernelSpec::type_i(1, GammaVariant::Pq),
                },
            ],
            factors,
            balancing: relations,
        }
    }

    #[test]
    fn counterexample_graph_shape() {
        let spec = counterexample_spec();
        let g = graph_from_spec(&spec, &spec.balancing).unwrap();
        assert_eq!(g.vertex_count(), 2);
        assert_eq!(g.edges.len(), 2);
        assert!(g.edges.iter().all(|e| e.raw == Monomial::gen("t")));
        assert_eq!(g.half_edges.len(), 6);
        let at_y = g.half_edges.iter().filter(|h| h.vertex == 0).count();
        assert_eq!(at_y, 2); // v1, v2
    }

    #[test]
    fn beta_graph_shape() {
        let mut factors = Vec::new();
        for r in 1..=6 {
            factors.push(FactorSpec {
                variant: GammaVariant::Pq,
                coef: Monomial::gen(&format!("t{r}")),
                slots: vec![slot("z", 1)],
            });
        }
        let spec = IntegralSpec {
            groups: vec![VarGroup {
                name: "z".into(),
                kernel: KernelSpec::type_i(1, GammaVariant::Pq),
            }],
            factors,
            balancing: RelationSet::default(),
        };
        let g = graph_from_spec(&spec, &spec.balancing).unwrap();
        assert_eq!(g.vertex_count(), 1);
        assert_eq!(g.edges.len(), 0);
        assert_eq!(g.half_edges.len(), 6);
    }

    #[test]
    fn type_ii_kernel_contributes_one_edge_per_pair() {
        let spec = IntegralSpec {
            groups: vec![VarGroup {
                name: "z".into(),
                kernel: KernelSpec::type_ii(2, Monomial::gen("t"), GammaVariant::Pq),
            }],
            factors: vec![],
            balancing: RelationSet::default(),
        };
        let g = graph_from_spec(&spec, &spec.balancing).unwrap();
        assert_eq!(g.vertex_count(), 2);
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.edges[0].label, Monomial::gen("t"));
    }

    #[test]
    fn square_factor_expands_to_eight_half_edges() {
        let spec = IntegralSpec {
            groups: vec![VarGroup {
                name: "z".into(),
                kernel: KernelSpec::type_i(1, GammaVariant::Pq),
            }],
            factors: vec![FactorSpec {
                variant: GammaVariant::Pq,
                coef: Monomial::gen("t"),
                slots: vec![slot("z", 2)],
            }],
            balancing: RelationSet::default(),
        };
        let g = graph_from_spec(&spec, &spec.balancing).unwrap();
        assert_eq!(g.half_edges.len(), 8);
        assert!(g
            .half_edges
            .iter()
            .any(|h| h.raw == mono("t^1/2")));
        assert!(g
            .half_edges
            .iter()
            .any(|h| h.raw == mono("- p^1/2 q^1/2 t^1/2")));
    }

    #[test]
    fn degree_two_cross_factor_rejected() {
        let spec = IntegralSpec {
            groups: vec![
                VarGroup {
                    name: "y".into(),
                    kernel: KernelSpec::type_i(1, GammaVariant::Pq),
                },
                VarGroup {
                    name: "z".into(),
                    kernel: KernelSpec::type_i(1, GammaVariant::Pq),
                },
            ],
            factors: vec![FactorSpec {
                variant: GammaVariant::Pq,
                coef: Monomial::gen("c"),
                slots: vec![slot("y", 2), slot("z", 1)],
            }],
            balancing: RelationSet::default(),
        };
        assert!(matches!(
            graph_from_spec(&spec, &spec.balancing),
            Err(CoreError::UnsupportedDegree(_))
        ));
    }

    #[test]
    fn one_vertex_open_products() {
        // Half-edges {a, b}: open products a^2 (once), ab (twice), b^2.
        let g = FubiniGraph {
            vertex_names: vec!["z".into()],
            edges: vec![],
            half_edges: vec![
                HalfEdge {
                    vertex: 0,
                    label: Monomial::gen("a"),
                    raw: Monomial::gen("a"),
                },
                HalfEdge {
                    vertex: 0,
                    label: Monomial::gen("b"),
                    raw: Monomial::gen("b"),
                },
            ],
        };
        let e = enumerate_path_products(&g, DEFAULT_PATH_CAP).unwrap();
        assert!(e.closed.is_empty());
        let args = prefactor_arguments(&e);
        assert_eq!(args.open.len(), 3);
        let lookup = |s: &str| {
            args.open
                .iter()
                .find(|(m, _)| *m == mono(s))
                .map(|(_, c)| *c)
        };
        assert_eq!(lookup("a^2"), Some(1));
        assert_eq!(lookup("a b"), Some(2));
        assert_eq!(lookup("b^2"), Some(1));
    }

    #[test]
    fn two_vertices_single_edge_product() {
        let g = FubiniGraph {
            vertex_names: vec!["y".into(), "z".into()],
            edges: vec![Edge {
                a: 0,
                b: 1,
                label: Monomial::gen("t"),
                raw: Monomial::gen("t"),
            }],
            half_edges: vec![
                HalfEdge {
                    vertex: 0,
                    label: Monomial::gen("a"),
                    raw: Monomial::gen("a"),
                },
                HalfEdge {
                    vertex: 1,
                    label: Monomial::gen("b"),
                    raw: Monomial::gen("b"),
                },
            ],
        };
        let e = enumerate_path_products(&g, DEFAULT_PATH_CAP).unwrap();
        assert!(e.open.iter().any(|p| p.product == mono("a t b")));
        // closed walks across the single edge: y->z->y and z->y->z, t^2
        let t2 = e.closed.iter().find(|p| p.product == mono("t^2")).unwrap();
        assert_eq!(t2.multiplicity, 2);
    }

    #[test]
    fn counterexample_is_inadmissible_with_unit_witness() {
        let spec = counterexample_spec();
        let g = graph_from_spec(&spec, &spec.balancing).unwrap();
        let verdict = check_admissibility(&g, DEFAULT_PATH_CAP).unwrap();
        assert!(!verdict.admissible);
        let unit = verdict
            .offending
            .iter()
            .find(|p| p.product.is_one())
            .expect("the v1 t t v2 product reduces to 1");
        let labels: Vec<String> = unit.witness.labels.iter().map(|l| l.to_string()).collect();
        let mut sorted = labels.clone();
        sorted.sort();
        assert_eq!(sorted, vec!["t", "t", "v1", "v2"], "witness {labels:?}");
    }

    #[test]
    fn counterexample_closed_products_are_t_powers() {
        let spec = counterexample_spec();
        let g = graph_from_spec(&spec, &spec.balancing).unwrap();
        let e = enumerate_path_products(&g, DEFAULT_PATH_CAP).unwrap();
        assert!(!e.closed.is_empty());
        for p in &e.closed {
            assert!(p.product.generators().all(|g| g == "t"));
            assert!(!p.product.lattice_membership().is_inside());
        }
    }

    #[test]
    fn generic_beta_is_admissible() {
        let mut factors = Vec::new();
        let mut lhs = Monomial::one();
        for r in 1..=6 {
            lhs = lhs.mul(&Monomial::gen(&format!("t{r}")));
            factors.push(FactorSpec {
                variant: GammaVariant::Pq,
                coef: Monomial::gen(&format!("t{r}")),
                slots: vec![slot("z", 1)],
            });
        }
        let spec = IntegralSpec {
            groups: vec![VarGroup {
                name: "z".into(),
                kernel: KernelSpec::type_i(1, GammaVariant::Pq),
            }],
            factors,
            balancing: RelationSet::new(vec![Relation {
                lhs,
                rhs: mono("p q"),
                solve_for: "t6".into(),
            }]),
        };
        let g = graph_from_spec(&spec, &spec.balancing).unwrap();
        let verdict = check_admissibility(&g, DEFAULT_PATH_CAP).unwrap();
        assert!(verdict.admissible, "offending: {:?}", verdict.offending);
        assert_eq!(verdict.open_products, 21); // 6 choose 2 + 6 squares
    }

    #[test]
    fn relabeling_vertices_preserves_admissibility() {
        let spec = counterexample_spec();
        let g = graph_from_spec(&spec, &spec.balancing).unwrap();
        let mut swapped = g.clone();
        swapped.vertex_names.swap(0, 1);
        for e in &mut swapped.edges {
            e.a = 1 - e.a;
            e.b = 1 - e.b;
        }
        for h in &mut swapped.half_edges {
            h.vertex = 1 - h.vertex;
        }
        let v1 = check_admissibility(&g, DEFAULT_PATH_CAP).unwrap();
        let v2 = check_admissibility(&swapped, DEFAULT_PATH_CAP).unwrap();
        assert_eq!(v1.admissible, v2.admissible);
    }

    #[test]
    fn fresh_generic_generator_restores_admissibility() {
        // Multiplying the offending label by a fresh generator breaks the
        // lattice membership: genericity monotonicity.
        let spec = counterexample_spec();
        let mut g = graph_from_spec(&spec, &spec.balancing).unwrap();
        for h in &mut g.half_edges {
            if h.raw == Monomial::gen("v1") {
                h.label = h.label.mul(&Monomial::gen("fresh"));
            }
        }
        let verdict = check_admissibility(&g, DEFAULT_PATH_CAP).unwrap();
        assert!(verdict.admissible);
    }

    #[test]
    fn path_cap_overflows_loudly() {
        let spec = counterexample_spec();
        let g = graph_from_spec(&spec, &spec.balancing).unwrap();
        assert!(matches!(
            enumerate_path_products(&g, 2),
            Err(CoreError::PathCapExceeded(2))
        ));
    }

    #[test]
    fn corpus_meets_expectations() {
        for case in corpus() {
            let outcome = run_corpus_case(case)
                .unwrap_or_else(|e| panic!("corpus `{}` errored: {e}", case.name));
            match (&case.expect, outcome) {
                (CorpusExpectation::Admissible, CorpusOutcome::Checked { verdict, .. }) => {
                    assert!(
                        verdict.admissible,
                        "`{}` judged inadmissible: {:?}",
                        case.name,
                        verdict
                            .offending
                            .iter()
                            .map(|p| p.product.to_string())
                            .collect::<Vec<_>>()
                    );
                }
                (CorpusExpectation::Inadmissible, CorpusOutcome::Checked { verdict, .. }) => {
                    assert!(!verdict.admissible, "`{}` judged admissible", case.name);
                    if let Some(expected) = &case.witness {
                        let want: Monomial = expected.parse().unwrap();
                        assert!(
                            verdict.offending.iter().any(|p| p.product == want),
                            "`{}` lacks offending product `{expected}`; got {:?}",
                            case.name,
                            verdict
                                .offending
                                .iter()
                                .map(|p| p.product.to_string())
                                .collect::<Vec<_>>()
                        );
                    }
                }
                (CorpusExpectation::Reject, CorpusOutcome::Rejected(_)) => {}
                (expect, outcome) => {
                    panic!("`{}` expected {expect:?}, got {outcome:?}", case.name)
                }
            }
        }
    }

    #[test]
    fn counterexample_corpus_entry_matches_inline_spec() {
        let case = corpus_case("order_swap_failure").unwrap();
        let (spec, rels) = case.resolve().unwrap();
        let g = graph_from_spec(&spec, &rels).unwrap();
        assert_eq!(g.vertex_count(), 2);
        assert_eq!(g.edges.len(), 2);
        assert_eq!(g.half_edges.len(), 6);
    }
}
