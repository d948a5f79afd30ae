//! The stochastic layer on real data: kernel densities over the iris
//! species, percentile support regions, region similarity, a membership
//! report for new observations, and the Bayes decision map.

use metamodel::fixtures::iris_datasets;
use metamodel::stochastic::{
    bayes_decision_map, build_stochastic_framework, membership_report, StochasticConfig,
};

fn main() -> metamodel::Result<()> {
    let datasets = iris_datasets()?;
    let axes = ["sepal_width".to_string(), "petal_length".to_string()];
    let sfw = build_stochastic_framework(axes, datasets, &StochasticConfig::default())?;

    println!(
        "bandwidth {} over a {}x{} grid, chi {}",
        sfw.bandwidth(),
        sfw.grid().resolution(),
        sfw.grid().resolution(),
        sfw.chi()
    );
    for label in sfw.labels() {
        println!(
            "  {label}: {} cells hold {} of the mass",
            sfw.region(label)?.cell_count(),
            sfw.chi()
        );
    }

    // Region similarity in density mass: setosa sits apart, the other two
    // species overlap.
    let labels = sfw.labels().to_vec();
    for i in 0..labels.len() {
        for j in (i + 1)..labels.len() {
            println!(
                "lambda({}, {}) = {}",
                labels[i],
                labels[j],
                sfw.lambda_between(&labels[i], &labels[j])?
            );
        }
    }

    // Three new observations: one deep in setosa territory, one in the
    // versicolor/virginica overlap, one nowhere near the data.
    let new_points = [[3.4, 1.5], [2.9, 5.0], [5.2, 7.8]];
    let report = membership_report(&new_points, &sfw, sfw.chi())?;
    print!("{}", report.to_text());

    // Where each species wins the posterior argmax.
    let map = bayes_decision_map(&sfw)?;
    let (per_label, undecided) = map.tally();
    for (label, cells) in sfw.labels().iter().zip(per_label) {
        println!("decision map: {label} wins {cells} cells");
    }
    println!("decision map: {undecided} cells below the density floor");
    Ok(())
}
