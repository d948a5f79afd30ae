//! Infinitesimal-kernel convergence: as the bandwidth halves toward zero,
//! cross-membership counts between stochastic regions fall to the discrete
//! point-set counts, recovering the deterministic layer in the limit.

use metamodel::fixtures::convergence_datasets;
use metamodel::stochastic::{
    build_stochastic_framework, convergence_check, discrete_point_framework, StochasticConfig,
};

fn main() -> metamodel::Result<()> {
    let datasets = convergence_datasets()?;
    let axes = ["x".to_string(), "y".to_string()];

    let sfw = build_stochastic_framework(axes.clone(), datasets.clone(), &StochasticConfig::default())?;
    let discrete = discrete_point_framework("points", &axes, &datasets)?;

    let report = convergence_check(&sfw, &discrete, 4)?;
    print!("{}", report.to_text());

    println!(
        "deviations non-increasing: {}",
        report.deviations_non_increasing()
    );
    println!(
        "exact below threshold {}: {}",
        report.exact_threshold,
        report.exact_below_threshold()
    );
    println!("convergent: {}", report.is_convergent());
    Ok(())
}
