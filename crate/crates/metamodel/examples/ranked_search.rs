//! Ranked combinatorial search: hand the engine a target set and let it
//! enumerate single, complemented, and binary combinations of the known
//! pairings, ranked by exact Jaccard similarity.

use metamodel::numbers::build_divisibility_framework;
use metamodel::{solve_data_driven, solve_equation, Dataset, ElementId, SearchConfig};

fn main() -> metamodel::Result<()> {
    let fw = build_divisibility_framework(2, 20)?;

    // Target: multiples of 2 or of 3, presented as raw data.
    let members = (2..=20i64)
        .filter(|v| v % 2 == 0 || v % 3 == 0)
        .map(ElementId::Int);
    let target = Dataset::new("target", fw.universe(), members);

    let outcome = solve_data_driven(&fw, &target, &SearchConfig::default())?;
    println!(
        "evaluated {} candidates, {} exact, {} co-optimal",
        outcome.candidates_evaluated, outcome.exact_count, outcome.co_optimal_count
    );
    for (rank, r) in outcome.results.iter().take(5).enumerate() {
        println!(
            "  {}. lambda {}  {}  ::  {}",
            rank + 1,
            r.lambda,
            r.expr_text,
            r.dual_model_text
        );
    }

    // Equation solving binds unknowns to pairings.
    let solved = solve_equation(&fw, "?a & ?b == w6", &SearchConfig::default())?;
    if let Some(best) = solved.best() {
        println!("best solution: {} (lambda {})", best.expr_text, best.lambda);
        for (unknown, pairing) in &best.bindings {
            println!("  ?{unknown} = {pairing}");
        }
    }

    // Excluding pairings forces the engine to re-derive them from others.
    let cfg = SearchConfig::excluding(["w6"]);
    let rederived = solve_data_driven(&fw, fw.pairing("w6")?.dataset(), &cfg)?;
    if let Some(best) = rederived.best() {
        println!("w6 re-derived as {} (lambda {})", best.expr_text, best.lambda);
    }
    Ok(())
}
