//! Build a small framework by hand: observe elements, attach models, and
//! watch the bijectivity invariant hold through merges, restrictions, and
//! a divergence split.

use metamodel::framework::{BaseModel, FeatureDef, FeatureKind, FeatureValue, FeatureVector};
use metamodel::{ElementId, Framework, Result};

fn main() -> Result<()> {
    let mut fw = Framework::new("workshop");
    fw.register_feature(FeatureDef::new("value", FeatureKind::Int))?;

    let batch = (1..=12i64).map(|v| {
        let mut fv = FeatureVector::new();
        fv.insert("value".into(), FeatureValue::Int(v));
        (ElementId::Int(v), fv)
    });
    fw.ingest_elements(batch)?;

    fw.register_predicate("even", |fv: &FeatureVector| {
        Ok(fv.get("value").and_then(FeatureValue::as_i64).unwrap_or(1) % 2 == 0)
    });
    fw.register_base_model(BaseModel::plugin("m_even", "even", "value is even"))?;
    fw.ingest_model("w_even", "m_even")?;

    // Data that arrives without a theory gets an indicator model.
    fw.pair_data("w_lucky", [ElementId::Int(3), ElementId::Int(7), ElementId::Int(8)])?;

    // Derived pairings compose existing models in the logic domain.
    fw.merge_pairings("w_either", "w_even", "w_lucky")?;
    fw.restrict_pairing("w_small_even", "w_even", (1..=6).map(ElementId::Int))?;

    // Splitting on divergence: the part a candidate model explains and the
    // rest, partitioning the source dataset.
    let (explained, rest) =
        fw.split_dataset_on_divergence("w_lucky", "m_even", "w_lucky_even", "w_lucky_odd")?;
    println!(
        "split w_lucky into {} explained / {} unexplained",
        explained.dataset().len(),
        rest.dataset().len()
    );

    fw.validate_all()?;
    println!("{}", fw.summary());
    for p in fw.pairings() {
        println!(
            "  {}: {} elements, model {}",
            p.id(),
            p.dataset().len(),
            p.model()
        );
    }

    // Round trip through the canonical JSON form.
    let copy = Framework::from_json(&fw.to_json()?)?;
    assert_eq!(copy.to_json()?, fw.to_json()?);
    println!("round trip: identical canonical form");
    Ok(())
}
