//! Introspection over pairing structure: the element-to-model bipartite
//! network, its connection statistics, expression hierarchy trees, and the
//! entropy-based malleability index with its perturbation harness.

use crate::error::{Error, Result};
use crate::expr::{dualize, SetExpr};
use crate::framework::Framework;
use crate::sets::{ElementId, Ratio};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

/// Elements on the left, pairings on the right, one edge per satisfaction.
/// Right-node weights record dataset sizes, which equal in-degrees exactly
/// when the framework is consistent.
#[derive(Debug, Clone, Serialize)]
pub struct BipartiteGraph {
    elements: Vec<ElementId>,
    pairings: Vec<String>,
    /// Pairs of indices into `elements` and `pairings`, lexicographic.
    edges: Vec<(usize, usize)>,
    weights: Vec<usize>,
}

impl BipartiteGraph {
    pub fn elements(&self) -> &[ElementId] {
        &self.elements
    }

    pub fn pairings(&self) -> &[String] {
        &self.pairings
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn weights(&self) -> &[usize] {
        &self.weights
    }

    pub fn element_degree(&self, element: usize) -> usize {
        self.edges.iter().filter(|(i, _)| *i == element).count()
    }

    pub fn pairing_degree(&self, pairing: usize) -> usize {
        self.edges.iter().filter(|(_, j)| *j == pairing).count()
    }

    /// One `element_id,pairing_id` row per edge.
    pub fn to_edge_csv(&self) -> String {
        let mut out = String::from("element_id,pairing_id\n");
        for (i, j) in &self.edges {
            let _ = writeln!(out, "{},{}", self.elements[*i], self.pairings[*j]);
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }
}

/// Build the bipartite network of a framework by evaluating every pairing
/// model against every observed element.
pub fn export_bipartite(fw: &Framework) -> Result<BipartiteGraph> {
    let elements: Vec<ElementId> = fw.elements().map(|(id, _)| id.clone()).collect();
    let pairings: Vec<String> = fw.pairing_ids().map(str::to_string).collect();
    let mut edges = Vec::new();
    for (i, x) in elements.iter().enumerate() {
        for (j, id) in pairings.iter().enumerate() {
            if fw.satisfies_expr(fw.pairing(id)?.model(), x)? {
                edges.push((i, j));
            }
        }
    }
    let weights = pairings
        .iter()
        .map(|id| Ok(fw.pairing(id)?.dataset().len()))
        .collect::<Result<_>>()?;
    Ok(BipartiteGraph {
        elements,
        pairings,
        edges,
        weights,
    })
}

/// Exact association counts read off a bipartite network.
#[derive(Debug, Clone, Serialize)]
pub struct ConnectionStats {
    /// Per element, the number of pairings it satisfies.
    pub per_element: Vec<(ElementId, usize)>,
    /// How many elements have each association count.
    pub histogram: BTreeMap<usize, usize>,
    /// Average associations per element.
    pub mean: Ratio,
    /// Per pairing, its in-degree.
    pub per_model: Vec<(String, usize)>,
}

pub fn connection_stats(g: &BipartiteGraph) -> ConnectionStats {
    let mut element_counts = vec![0usize; g.elements.len()];
    let mut model_counts = vec![0usize; g.pairings.len()];
    for (i, j) in &g.edges {
        element_counts[*i] += 1;
        model_counts[*j] += 1;
    }
    let mut histogram = BTreeMap::new();
    for &c in &element_counts {
        *histogram.entry(c).or_insert(0) += 1;
    }
    let mean = if g.elements.is_empty() {
        Ratio::ZERO
    } else {
        Ratio::new(g.edges.len() as u64, g.elements.len() as u64)
    };
    ConnectionStats {
        per_element: g
            .elements
            .iter()
            .cloned()
            .zip(element_counts)
            .collect(),
        histogram,
        mean,
        per_model: g.pairings.iter().cloned().zip(model_counts).collect(),
    }
}

impl ConnectionStats {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "mean associations per element: {}", self.mean);
        let _ = writeln!(out, "histogram (associations: elements):");
        for (k, v) in &self.histogram {
            let _ = writeln!(out, "  {k}: {v}");
        }
        let _ = writeln!(out, "per-model generality:");
        for (id, d) in &self.per_model {
            let _ = writeln!(out, "  {id}: {d}");
        }
        out
    }
}

/// Undirected simple graph on nodes `0..n`, the substrate of the
/// perturbation harness.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SimpleGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl SimpleGraph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<SimpleGraph> {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u == v {
                return Err(Error::domain(format!("self-loop at node {u}")));
            }
            if u >= n || v >= n {
                return Err(Error::domain(format!(
                    "edge ({u}, {v}) leaves the node range 0..{n}"
                )));
            }
            set.insert((u.min(v), u.max(v)));
        }
        Ok(SimpleGraph { n, edges: set })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0usize; self.n];
        for (u, v) in &self.edges {
            d[*u] += 1;
            d[*v] += 1;
        }
        d
    }

    /// Sorted degree sequence, the default perturbation signature.
    pub fn degree_sequence(&self) -> Vec<usize> {
        let mut d = self.degrees();
        d.sort_unstable();
        d
    }

    fn without_edge(&self, e: (usize, usize)) -> SimpleGraph {
        let mut g = self.clone();
        g.edges.remove(&e);
        g
    }

    fn with_edge(&self, e: (usize, usize)) -> SimpleGraph {
        let mut g = self.clone();
        g.edges.insert(e);
        g
    }

    fn without_node(&self, k: usize) -> SimpleGraph {
        let shift = |x: usize| if x > k { x - 1 } else { x };
        let edges = self
            .edges
            .iter()
            .filter(|(u, v)| *u != k && *v != k)
            .map(|(u, v)| (shift(*u), shift(*v)))
            .collect();
        SimpleGraph {
            n: self.n - 1,
            edges,
        }
    }
}

/// The single-change operators the harness can enumerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ChangeOp {
    EdgeRemoval,
    EdgeAddition,
    NodeRemoval,
}

impl ChangeOp {
    pub fn name(self) -> &'static str {
        match self {
            ChangeOp::EdgeRemoval => "edge-removal",
            ChangeOp::EdgeAddition => "edge-addition",
            ChangeOp::NodeRemoval => "node-removal",
        }
    }
}

type SignatureFn = dyn Fn(&SimpleGraph) -> Vec<usize> + Send + Sync;

/// A graph, a change operator, and the feature signature that decides when
/// two perturbed graphs count as the same outcome.
pub struct PerturbationSpec {
    graph: SimpleGraph,
    op: ChangeOp,
    signature: Box<SignatureFn>,
}

impl std::fmt::Debug for PerturbationSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PerturbationSpec")
            .field("graph", &self.graph)
            .field("op", &self.op)
            .field("signature", &"<fn>")
            .finish()
    }
}

impl PerturbationSpec {
    /// Default signature: the sorted degree sequence.
    pub fn new(graph: SimpleGraph, op: ChangeOp) -> PerturbationSpec {
        PerturbationSpec {
            graph,
            op,
            signature: Box::new(SimpleGraph::degree_sequence),
        }
    }

    pub fn with_signature(
        mut self,
        f: impl Fn(&SimpleGraph) -> Vec<usize> + Send + Sync + 'static,
    ) -> PerturbationSpec {
        self.signature = Box::new(f);
        self
    }
}

/// One group of perturbation outcomes sharing a signature.
#[derive(Debug, Clone, Serialize)]
pub struct OutcomeGroup {
    pub signature: Vec<usize>,
    pub count: usize,
    pub probability: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MalleabilityReport {
    pub op: ChangeOp,
    pub changes: usize,
    pub groups: Vec<OutcomeGroup>,
    pub entropy_bits: f64,
    pub malleability: f64,
    /// Change instances are weighted uniformly.
    pub weighting: String,
}

impl MalleabilityReport {
    pub fn distinct_outcomes(&self) -> usize {
        self.groups.len()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} over {} change instances ({})",
            self.op.name(),
            self.changes,
            self.weighting
        );
        for g in &self.groups {
            let _ = writeln!(
                out,
                "  signature {:?}: {} instances (p = {})",
                g.signature, g.count, g.probability
            );
        }
        let _ = writeln!(
            out,
            "  entropy {} bits, malleability {}",
            self.entropy_bits, self.malleability
        );
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }
}

/// The malleability index of an outcome distribution: e raised to the
/// base-2 entropy of the probabilities. The mixed bases are intentional
/// and preserved exactly.
pub fn malleability(probs: &[f64]) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::domain("malleability needs at least one probability"));
    }
    let mut total = 0.0;
    for &p in probs {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("probability {p} is out of range")));
        }
        total += p;
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!(
            "probabilities sum to {total}, not 1"
        )));
    }
    let entropy: f64 = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum();
    Ok(entropy.exp())
}

/// Apply every instance of the change operator, group the results by
/// signature, and fold the group distribution into the malleability index.
pub fn perturbation_malleability(spec: &PerturbationSpec) -> Result<MalleabilityReport> {
    let outcomes: Vec<SimpleGraph> = match spec.op {
        ChangeOp::EdgeRemoval => spec
            .graph
            .edges()
            .map(|e| spec.graph.without_edge(e))
            .collect(),
        ChangeOp::EdgeAddition => {
            let mut out = Vec::new();
            for u in 0..spec.graph.n {
                for v in (u + 1)..spec.graph.n {
                    if !spec.graph.edges.contains(&(u, v)) {
                        out.push(spec.graph.with_edge((u, v)));
                    }
                }
            }
            out
        }
        ChangeOp::NodeRemoval => (0..spec.graph.n)
            .map(|k| spec.graph.without_node(k))
            .collect(),
    };
    if outcomes.is_empty() {
        return Err(Error::domain(format!(
            "no {} instance applies to this graph",
            spec.op.name()
        )));
    }
    let mut grouped: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for g in &outcomes {
        *grouped.entry((spec.signature)(g)).or_insert(0) += 1;
    }
    let changes = outcomes.len();
    let groups: Vec<OutcomeGroup> = grouped
        .into_iter()
        .map(|(signature, count)| OutcomeGroup {
            signature,
            count,
            probability: count as f64 / changes as f64,
        })
        .collect();
    let probs: Vec<f64> = groups.iter().map(|g| g.probability).collect();
    let m = malleability(&probs)?;
    Ok(MalleabilityReport {
        op: spec.op,
        changes,
        groups,
        entropy_bits: m.ln(),
        malleability: m,
        weighting: "uniform over change instances".to_string(),
    })
}

/// A node of the dual-labeled hierarchy: the subexpression rendered in the
/// set domain and in the model domain, with its depth level.
#[derive(Debug, Clone, Serialize)]
pub struct HierarchyNode {
    pub set_label: String,
    pub model_label: String,
    pub level: usize,
    pub children: Vec<HierarchyNode>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HierarchyTree {
    pub root: HierarchyNode,
}

impl HierarchyTree {
    pub fn height(&self) -> usize {
        fn deepest(n: &HierarchyNode) -> usize {
            n.children.iter().map(deepest).max().unwrap_or(n.level)
        }
        deepest(&self.root)
    }

    pub fn to_text(&self) -> String {
        fn render(n: &HierarchyNode, out: &mut String) {
            let _ = writeln!(
                out,
                "{}h{}: {}  ::  {}",
                "  ".repeat(n.level),
                n.level,
                n.set_label,
                n.model_label
            );
            for c in &n.children {
                render(c, out);
            }
        }
        let mut out = String::new();
        render(&self.root, &mut out);
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }
}

/// Unfold an expression into its hierarchy, labeling every node in both
/// domains. With a framework, model labels substitute each pairing's base
/// model name; without one, the structural dual is rendered as-is.
pub fn hierarchy_tree(e: &SetExpr, fw: Option<&Framework>) -> HierarchyTree {
    fn build(e: &SetExpr, level: usize, fw: Option<&Framework>) -> HierarchyNode {
        let children = match e {
            SetExpr::Leaf(_) | SetExpr::Unknown(_) => Vec::new(),
            SetExpr::Complement(inner) => vec![build(inner, level + 1, fw)],
            SetExpr::Binary(_, l, r) => {
                vec![build(l, level + 1, fw), build(r, level + 1, fw)]
            }
        };
        let model_label = match fw {
            Some(fw) => fw.render_dual(e),
            None => dualize(e).to_string(),
        };
        HierarchyNode {
            set_label: e.to_string(),
            model_label,
            level,
            children,
        }
    }
    HierarchyTree {
        root: build(e, 0, fw),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{eval_set, parse_model, parse_set};
    use crate::framework::{BaseModel, FeatureDef, FeatureKind, FeatureValue, FeatureVector};
    use crate::lattice::build_lattice_framework;

    fn toy() -> Framework {
        let mut fw = Framework::new("toy");
        fw.register_feature(FeatureDef::new("v", FeatureKind::Int))
            .unwrap();
        let batch = (1..=6i64).map(|v| {
            let mut fv = FeatureVector::new();
            fv.insert("v".into(), FeatureValue::Int(v));
            (ElementId::Int(v), fv)
        });
        fw.ingest_elements(batch).unwrap();
        for (base, pairing, members) in [
            ("m_even", "w_even", vec![2i64, 4, 6]),
            ("m_big", "w_big", vec![4, 5, 6]),
            ("m_one", "w_one", vec![1]),
        ] {
            fw.register_base_model(BaseModel::indicator(
                base,
                members.into_iter().map(ElementId::Int),
                "toy indicator",
            ))
            .unwrap();
            fw.ingest_model(pairing, base).unwrap();
        }
        fw
    }

    #[test]
    fn bipartite_edges_are_exactly_the_satisfactions() {
        let fw = toy();
        let g = export_bipartite(&fw).unwrap();
        assert_eq!(g.elements().len(), 6);
        assert_eq!(g.pairings(), &["w_even", "w_big", "w_one"]);
        // 3 + 3 + 1 memberships.
        assert_eq!(g.edges().len(), 7);
        for (j, id) in g.pairings().iter().enumerate() {
            assert_eq!(g.pairing_degree(j), g.weights()[j], "weight of {id}");
        }
        let csv = g.to_edge_csv();
        assert!(csv.starts_with("element_id,pairing_id\n"));
        assert!(csv.contains("4,w_even"));
        assert!(csv.contains("4,w_big"));
    }

    #[test]
    fn empty_framework_gives_an_empty_graph() {
        let fw = Framework::new("void");
        let g = export_bipartite(&fw).unwrap();
        assert!(g.elements().is_empty());
        assert!(g.edges().is_empty());
        let stats = connection_stats(&g);
        assert_eq!(stats.mean, Ratio::ZERO);
        assert!(stats.histogram.is_empty());
    }

    #[test]
    fn stats_count_each_element_once_per_model() {
        let fw = toy();
        let stats = connection_stats(&export_bipartite(&fw).unwrap());
        // Element 4 satisfies both w_even and w_big; element 3 satisfies
        // nothing.
        let lookup = |v: i64| {
            stats
                .per_element
                .iter()
                .find(|(id, _)| *id == ElementId::Int(v))
                .unwrap()
                .1
        };
        assert_eq!(lookup(4), 2);
        assert_eq!(lookup(3), 0);
        assert_eq!(stats.mean, Ratio::new(7, 6));
        assert_eq!(stats.histogram[&2], 2);
        assert_eq!(stats.histogram.values().sum::<usize>(), 6);
    }

    #[test]
    fn single_point_lattice_pattern_connects_to_the_expected_models() {
        let (fw, _) = build_lattice_framework(3).unwrap();
        let g = export_bipartite(&fw).unwrap();
        let i = g
            .elements()
            .iter()
            .position(|id| *id == ElementId::Int(1))
            .unwrap();
        let connected: Vec<&str> = g
            .edges()
            .iter()
            .filter(|(e, _)| *e == i)
            .map(|(_, j)| g.pairings()[*j].as_str())
            .collect();
        // Pattern 1 is the single cell at [1, 1]: one point, corner set,
        // thin under the calibrated width rule.
        assert_eq!(connected, vec!["w1", "w6", "w8"]);
    }

    #[test]
    fn lattice_mean_matches_the_size_census() {
        let (fw, _) = build_lattice_framework(3).unwrap();
        let stats = connection_stats(&export_bipartite(&fw).unwrap());
        let total: usize = crate::lattice::CALIBRATION_TARGETS_3X3.iter().sum();
        assert_eq!(total, 1577);
        assert_eq!(stats.mean, Ratio::new(1577, 512));
        let sizes: Vec<usize> = stats.per_model.iter().map(|(_, d)| *d).collect();
        assert_eq!(sizes, crate::lattice::CALIBRATION_TARGETS_3X3.to_vec());
    }

    #[test]
    fn malleability_closed_forms() {
        assert!((malleability(&[1.0]).unwrap() - 1.0).abs() < 1e-12);
        let e = std::f64::consts::E;
        assert!((malleability(&[0.5, 0.5]).unwrap() - e).abs() < 1e-12);
        for d in [2usize, 4, 8] {
            let probs = vec![1.0 / d as f64; d];
            let expected = ((d as f64).log2()).exp();
            assert!((malleability(&probs).unwrap() - expected).abs() < 1e-12);
        }
        // Strictly increasing in the number of uniform outcomes.
        let m2 = malleability(&vec![0.5; 2]).unwrap();
        let m4 = malleability(&vec![0.25; 4]).unwrap();
        let m8 = malleability(&vec![0.125; 8]).unwrap();
        assert!(m2 < m4 && m4 < m8);
        assert!(malleability(&[]).is_err());
        assert!(malleability(&[0.7, 0.7]).is_err());
        assert!(malleability(&[-0.5, 1.5]).is_err());
    }

    #[test]
    fn star_and_path_are_rigid_under_edge_removal() {
        let star = SimpleGraph::new(4, [(0, 1), (0, 2), (0, 3)]).unwrap();
        let report =
            perturbation_malleability(&PerturbationSpec::new(star, ChangeOp::EdgeRemoval))
                .unwrap();
        assert_eq!(report.changes, 3);
        assert_eq!(report.distinct_outcomes(), 1);
        assert_eq!(report.malleability, 1.0);

        let path = SimpleGraph::new(3, [(0, 1), (1, 2)]).unwrap();
        let report =
            perturbation_malleability(&PerturbationSpec::new(path, ChangeOp::EdgeRemoval))
                .unwrap();
        assert_eq!(report.changes, 2);
        assert_eq!(report.distinct_outcomes(), 1);
        assert_eq!(report.malleability, 1.0);
    }

    #[test]
    fn triangle_with_pendant_splits_three_ways() {
        let g = SimpleGraph::new(4, [(0, 1), (1, 2), (2, 0), (2, 3)]).unwrap();
        let report = perturbation_malleability(&PerturbationSpec::new(g, ChangeOp::EdgeRemoval))
            .unwrap();
        assert_eq!(report.changes, 4);
        let table: Vec<(Vec<usize>, usize)> = report
            .groups
            .iter()
            .map(|g| (g.signature.clone(), g.count))
            .collect();
        assert_eq!(
            table,
            vec![
                (vec![0, 2, 2, 2], 1),
                (vec![1, 1, 1, 3], 1),
                (vec![1, 1, 2, 2], 2),
            ]
        );
        assert!((report.entropy_bits - 1.5).abs() < 1e-12);
        assert!((report.malleability - 1.5f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn other_change_operators_enumerate_fully() {
        let path = SimpleGraph::new(3, [(0, 1), (1, 2)]).unwrap();
        let add =
            perturbation_malleability(&PerturbationSpec::new(path.clone(), ChangeOp::EdgeAddition))
                .unwrap();
        // Only (0, 2) is missing; one change, one outcome.
        assert_eq!(add.changes, 1);
        assert_eq!(add.malleability, 1.0);
        let drop =
            perturbation_malleability(&PerturbationSpec::new(path, ChangeOp::NodeRemoval))
                .unwrap();
        // Removing an endpoint leaves an edge; removing the middle leaves
        // two isolates.
        assert_eq!(drop.changes, 3);
        assert_eq!(drop.distinct_outcomes(), 2);
        let triangle = SimpleGraph::new(3, [(0, 1), (1, 2), (2, 0)]).unwrap();
        assert!(perturbation_malleability(&PerturbationSpec::new(
            triangle,
            ChangeOp::EdgeAddition
        ))
        .is_err());
    }

    #[test]
    fn custom_signatures_change_the_grouping() {
        let g = SimpleGraph::new(4, [(0, 1), (1, 2), (2, 0), (2, 3)]).unwrap();
        let spec = PerturbationSpec::new(g, ChangeOp::EdgeRemoval)
            .with_signature(|g| vec![g.edge_count()]);
        let report = perturbation_malleability(&spec).unwrap();
        assert_eq!(report.distinct_outcomes(), 1);
        assert_eq!(report.malleability, 1.0);
    }

    #[test]
    fn hierarchy_levels_and_dual_labels() {
        let leaf = parse_set("w_even").unwrap();
        let tree = hierarchy_tree(&leaf, None);
        assert_eq!(tree.height(), 0);
        assert!(tree.root.children.is_empty());

        let fw = toy();
        let e = parse_set("w_one | (w_even & w_big)").unwrap();
        let tree = hierarchy_tree(&e, Some(&fw));
        assert_eq!(tree.height(), 2);
        assert_eq!(tree.root.level, 0);
        assert_eq!(tree.root.children.len(), 2);
        assert_eq!(tree.root.children[1].children.len(), 2);
        assert_eq!(tree.root.model_label, "m_one | m_even & m_big");
        assert_eq!(tree.root.children[1].children[0].model_label, "m_even");
        let text = tree.to_text();
        assert!(text.contains("h0:"));
        assert!(text.contains("h2:"));
    }

    #[test]
    fn hierarchy_labels_satisfy_the_bridge() {
        let fw = toy();
        let e = parse_set("w_one | (w_even & w_big)").unwrap();
        let tree = hierarchy_tree(&e, Some(&fw));
        fn check(n: &HierarchyNode, fw: &Framework) {
            let set_side = eval_set(&parse_set(&n.set_label).unwrap(), fw).unwrap();
            let model_side = fw
                .extension_of(&parse_model(&n.model_label).unwrap())
                .unwrap();
            assert!(set_side.same_members(&model_side), "at {}", n.set_label);
            for c in &n.children {
                check(c, fw);
            }
        }
        check(&tree.root, &fw);
    }
}
