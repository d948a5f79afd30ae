//! The elementary number theory domain: divisibility pairings over the
//! integers 2..=20, exercised by six case queries whose optima are
//! cross-checked against an independent exhaustive set scan.

use metamodel::numbers::{build_divisibility_framework, run_case_queries};

fn main() -> metamodel::Result<()> {
    let fw = build_divisibility_framework(2, 20)?;
    println!("{}", fw.summary());

    // Divisor nesting: w4 is a subset of w2, w6 of both w2 and w3.
    let w2 = fw.pairing("w2")?.dataset();
    let w4 = fw.pairing("w4")?.dataset();
    assert!(w4.members().all(|x| w2.contains(x)));

    let report = run_case_queries(&fw)?;
    print!("{}", report.to_text());

    let agree = report
        .queries
        .iter()
        .filter(|q| q.oracle_agrees())
        .count();
    println!(
        "{} of {} queries match the independent oracle optimum",
        agree,
        report.queries.len()
    );
    Ok(())
}
