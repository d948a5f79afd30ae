//! Analytics over the pairing structure: the element-to-model bipartite
//! network, dual-labeled hierarchy trees, and the entropy-based
//! malleability index under single-change perturbations.

use metamodel::expr::parse_set;
use metamodel::numbers::build_divisibility_framework;
use metamodel::{
    connection_stats, export_bipartite, hierarchy_tree, perturbation_malleability, ChangeOp,
    PerturbationSpec, SimpleGraph,
};

fn main() -> metamodel::Result<()> {
    let fw = build_divisibility_framework(2, 20)?;

    let graph = export_bipartite(&fw)?;
    let stats = connection_stats(&graph);
    println!(
        "bipartite network: {} elements, {} pairings, {} edges",
        graph.elements().len(),
        graph.pairings().len(),
        graph.edges().len()
    );
    println!("mean associations per element: {}", stats.mean);
    println!("association histogram:");
    for (count, elements) in &stats.histogram {
        println!("  {count} models: {elements} elements");
    }

    // A derived expression unfolds into a hierarchy labeled in both domains.
    let e = parse_set("(w2 & w3) | ~w5")?;
    let tree = hierarchy_tree(&e, Some(&fw));
    print!("{}", tree.to_text());

    // Perturbation malleability: a star is rigid under edge removal, a
    // triangle with a pendant is not.
    let star = SimpleGraph::new(4, [(0, 1), (0, 2), (0, 3)])?;
    let report = perturbation_malleability(&PerturbationSpec::new(star, ChangeOp::EdgeRemoval))?;
    println!("star: malleability {}", report.malleability);

    let kite = SimpleGraph::new(4, [(0, 1), (1, 2), (2, 0), (2, 3)])?;
    let report = perturbation_malleability(&PerturbationSpec::new(kite, ChangeOp::EdgeRemoval))?;
    print!("{}", report.to_text());
    Ok(())
}
