//! The paired boolean algebra: every set-domain expression has a logic-domain
//! dual, and evaluating either side lands on the same member set.

use metamodel::expr::{
    nary_op_count, op_apply, op_is_trivial, parse_set, OP_AND, OP_NAND, OP_XOR,
};
use metamodel::{dualize, dualize_inverse, eval_set, ElementId, Framework};

fn main() -> metamodel::Result<()> {
    // The full catalog of binary operations on truth values: 16 of them,
    // indexed by their truth-table bits.
    println!("binary ops: {}", nary_op_count(2));
    for op in [OP_AND, OP_XOR, OP_NAND] {
        let row: Vec<u8> = [(false, false), (false, true), (true, false), (true, true)]
            .iter()
            .map(|&(a, b)| op_apply(op, a, b) as u8)
            .collect();
        println!("  op {op:2} truth row {row:?} trivial={}", op_is_trivial(op));
    }

    let mut fw = Framework::new("letters");
    for id in ["a", "b", "c", "d", "e", "f"] {
        fw.ingest_element(id, Default::default())?;
    }
    fw.pair_data("w_vowel", [ElementId::from("a"), ElementId::from("e")])?;
    fw.pair_data(
        "w_early",
        ["a", "b", "c"].map(ElementId::from),
    )?;

    let e = parse_set("~(w_vowel | w_early)")?;
    let dual = dualize(&e);
    println!("set domain:   {e}");
    println!("logic domain: {}", fw.render_dual(&e));
    assert_eq!(dualize_inverse(&dual), e);

    // Same answer from either domain.
    let via_sets = eval_set(&e, &fw)?;
    let via_models = fw.extension_of(&dual)?;
    assert!(via_sets.same_members(&via_models));
    let members: Vec<String> = via_sets.members().map(|m| m.to_string()).collect();
    println!("extension: {{{}}}", members.join(", "));

    // De Morgan, checked in both domains at once.
    let lhs = parse_set("~(w_vowel & w_early)")?;
    let rhs = parse_set("~w_vowel | ~w_early")?;
    assert!(eval_set(&lhs, &fw)?.same_members(&eval_set(&rhs, &fw)?));
    println!("De Morgan holds on the observed universe");
    Ok(())
}
