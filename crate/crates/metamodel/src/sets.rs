//! Finite-set primitives: element identity, dataset algebra relative to a
//! shared universe tag, and the exact Jaccard similarity index.
//!
//! All values are immutable after construction and all operations are pure.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

/// Opaque element identity: an integer or a string token, stable within a
/// framework. Integers order before names; equality is exact token equality.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ElementId {
    Int(i64),
    Name(String),
}

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElementId::Int(v) => write!(f, "{v}"),
            ElementId::Name(s) => write!(f, "{s}"),
        }
    }
}

impl From<i64> for ElementId {
    fn from(v: i64) -> Self {
        ElementId::Int(v)
    }
}

impl From<&str> for ElementId {
    fn from(v: &str) -> Self {
        ElementId::Name(v.to_string())
    }
}

/// A named finite set of element identifiers drawn from a finite universe.
/// Members are kept sorted ascending, so iteration and serialization are
/// deterministic. The `universe` tag guards against mixing sets from
/// different frameworks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub id: String,
    pub universe: String,
    members: BTreeSet<ElementId>,
}

impl Dataset {
    pub fn new(
        id: impl Into<String>,
        universe: impl Into<String>,
        members: impl IntoIterator<Item = ElementId>,
    ) -> Self {
        Dataset {
            id: id.into(),
            universe: universe.into(),
            members: members.into_iter().collect(),
        }
    }

    /// An anonymous derived set over the same universe as `like`.
    fn derived(like: &Dataset, members: BTreeSet<ElementId>) -> Self {
        Dataset {
            id: String::new(),
            universe: like.universe.clone(),
            members,
        }
    }

    pub fn members(&self) -> impl Iterator<Item = &ElementId> {
        self.members.iter()
    }

    pub fn contains(&self, x: &ElementId) -> bool {
        self.members.contains(x)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn to_vec(&self) -> Vec<ElementId> {
        self.members.iter().cloned().collect()
    }

    pub fn is_subset(&self, other: &Dataset) -> bool {
        self.members.is_subset(&other.members)
    }

    pub fn same_members(&self, other: &Dataset) -> bool {
        self.members == other.members
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    fn check_universe(&self, other: &Dataset) -> Result<()> {
        if self.universe != other.universe {
            return Err(Error::UniverseMismatch {
                a: self.id.clone(),
                b: other.id.clone(),
            });
        }
        Ok(())
    }
}

/// Elements in `a` or `b`.
pub fn union(a: &Dataset, b: &Dataset) -> Result<Dataset> {
    a.check_universe(b)?;
    Ok(Dataset::derived(a, a.members.union(&b.members).cloned().collect()))
}

/// Elements in both `a` and `b`.
pub fn intersect(a: &Dataset, b: &Dataset) -> Result<Dataset> {
    a.check_universe(b)?;
    Ok(Dataset::derived(
        a,
        a.members.intersection(&b.members).cloned().collect(),
    ))
}

/// Elements of `relative_to` not in `a`. Requires `a ⊆ relative_to`.
pub fn complement(a: &Dataset, relative_to: &Dataset) -> Result<Dataset> {
    a.check_universe(relative_to)?;
    let stray: Vec<ElementId> = a
        .members
        .difference(&relative_to.members)
        .cloned()
        .collect();
    if !stray.is_empty() {
        return Err(Error::NotSubset {
            subset: a.id.clone(),
            superset: relative_to.id.clone(),
            stray,
        });
    }
    Ok(Dataset::derived(
        a,
        relative_to.members.difference(&a.members).cloned().collect(),
    ))
}

/// Elements of `a` not in `b`.
pub fn difference(a: &Dataset, b: &Dataset) -> Result<Dataset> {
    a.check_universe(b)?;
    Ok(Dataset::derived(
        a,
        a.members.difference(&b.members).cloned().collect(),
    ))
}

/// Elements in exactly one of `a`, `b`.
pub fn sym_difference(a: &Dataset, b: &Dataset) -> Result<Dataset> {
    a.check_universe(b)?;
    Ok(Dataset::derived(
        a,
        a.members
            .symmetric_difference(&b.members)
            .cloned()
            .collect(),
    ))
}

/// Exact non-negative rational, kept reduced. Values produced by [`jaccard`]
/// lie in [0,1]; other producers (e.g. mean connection counts) may exceed 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ratio {
    num: u64,
    den: u64,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Ratio {
    pub const ZERO: Ratio = Ratio { num: 0, den: 1 };
    pub const ONE: Ratio = Ratio { num: 1, den: 1 };

    /// Reduced ratio; `den` must be positive.
    pub fn new(num: u64, den: u64) -> Ratio {
        assert!(den > 0, "ratio denominator must be positive");
        let g = gcd(num.max(den), num.min(den)).max(1);
        Ratio {
            num: num / g,
            den: den / g,
        }
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Cross-multiplication in u128 never overflows u64 operands.
        let l = self.num as u128 * other.den as u128;
        let r = other.num as u128 * self.den as u128;
        l.cmp(&r)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Jaccard similarity |A∩B| / |A∪B| as an exact ratio, symmetric in its
/// arguments. Both-empty is defined as 1 (identical sets).
pub fn jaccard(a: &Dataset, b: &Dataset) -> Result<Ratio> {
    a.check_universe(b)?;
    let inter = a.members.intersection(&b.members).count() as u64;
    let uni = a.members.union(&b.members).count() as u64;
    if uni == 0 {
        return Ok(Ratio::ONE);
    }
    Ok(Ratio::new(inter, uni))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(id: &str, members: &[i64]) -> Dataset {
        Dataset::new(id, "u", members.iter().map(|&v| ElementId::Int(v)))
    }

    #[test]
    fn union_basic_and_identity() {
        let a = ds("a", &[1, 2]);
        let b = ds("b", &[2, 3]);
        let empty = ds("e", &[]);
        assert_eq!(union(&a, &b).unwrap().to_vec(), ds("", &[1, 2, 3]).to_vec());
        assert_eq!(union(&a, &empty).unwrap().to_vec(), a.to_vec());
    }

    #[test]
    fn union_of_multiples_within_2_to_20() {
        let m2 = ds("m2", &(2..=20).filter(|v| v % 2 == 0).collect::<Vec<_>>());
        let m3 = ds("m3", &(2..=20).filter(|v| v % 3 == 0).collect::<Vec<_>>());
        let u = union(&m2, &m3).unwrap();
        assert_eq!(u.len(), 13);
        assert_eq!(
            u.to_vec(),
            ds("", &[2, 3, 4, 6, 8, 9, 10, 12, 14, 15, 16, 18, 20]).to_vec()
        );
    }

    #[test]
    fn intersect_basic_idempotent_and_multiples() {
        let a = ds("a", &[1, 2]);
        let b = ds("b", &[2, 3]);
        assert_eq!(intersect(&a, &b).unwrap().to_vec(), vec![ElementId::Int(2)]);
        assert_eq!(intersect(&a, &a).unwrap().to_vec(), a.to_vec());
        let m2 = ds("m2", &(2..=20).filter(|v| v % 2 == 0).collect::<Vec<_>>());
        let m4 = ds("m4", &(2..=20).filter(|v| v % 4 == 0).collect::<Vec<_>>());
        assert_eq!(
            intersect(&m2, &m4).unwrap().to_vec(),
            ds("", &[4, 8, 12, 16, 20]).to_vec()
        );
    }

    #[test]
    fn complement_cases() {
        let se = ds("S_E", &(2..=20).collect::<Vec<_>>());
        assert!(complement(&se, &se).unwrap().is_empty());
        assert_eq!(
            complement(&ds("e", &[]), &se).unwrap().to_vec(),
            se.to_vec()
        );
        let m2 = ds("m2", &(2..=20).filter(|v| v % 2 == 0).collect::<Vec<_>>());
        assert_eq!(
            complement(&m2, &se).unwrap().to_vec(),
            ds("", &[3, 5, 7, 9, 11, 13, 15, 17, 19]).to_vec()
        );
    }

    #[test]
    fn complement_rejects_stray_elements() {
        let a = ds("a", &[1, 99]);
        let se = ds("S_E", &[1, 2, 3]);
        match complement(&a, &se) {
            Err(Error::NotSubset { stray, .. }) => assert_eq!(stray, vec![ElementId::Int(99)]),
            other => panic!("expected NotSubset, got {other:?}"),
        }
    }

    #[test]
    fn difference_and_sym_difference() {
        let a = ds("a", &[1, 2, 3]);
        assert_eq!(
            difference(&a, &ds("b", &[2])).unwrap().to_vec(),
            ds("", &[1, 3]).to_vec()
        );
        assert!(difference(&a, &a).unwrap().is_empty());
        let m3 = ds("m3", &(2..=20).filter(|v| v % 3 == 0).collect::<Vec<_>>());
        let m6 = ds("m6", &(2..=20).filter(|v| v % 6 == 0).collect::<Vec<_>>());
        assert_eq!(
            difference(&m3, &m6).unwrap().to_vec(),
            ds("", &[3, 9, 15]).to_vec()
        );
        assert_eq!(
            sym_difference(&ds("a", &[1, 2]), &ds("b", &[2, 3]))
                .unwrap()
                .to_vec(),
            ds("", &[1, 3]).to_vec()
        );
        assert!(sym_difference(&a, &a).unwrap().is_empty());
        let m4 = ds("m4", &(2..=20).filter(|v| v % 4 == 0).collect::<Vec<_>>());
        let m10 = ds("m10", &(2..=20).filter(|v| v % 10 == 0).collect::<Vec<_>>());
        assert_eq!(
            sym_difference(&m4, &m10).unwrap().to_vec(),
            ds("", &[4, 8, 10, 12, 16]).to_vec()
        );
    }

    #[test]
    fn jaccard_worked_examples() {
        let a = ds("a", &(1..=7).collect::<Vec<_>>());
        assert_eq!(
            jaccard(&a, &ds("b", &(1..=8).collect::<Vec<_>>())).unwrap(),
            Ratio::new(7, 8)
        );
        assert_eq!(
            jaccard(&a, &ds("b", &[1, 2, 3, 5, 7])).unwrap(),
            Ratio::new(5, 7)
        );
        // Overlap {1,5} against a 10-element union. Normalizing by |A|
        // instead would give 2/7; the index divides by the union.
        assert_eq!(
            jaccard(&a, &ds("b", &[1, 5, 10, 12, 20])).unwrap(),
            Ratio::new(1, 5)
        );
        assert_eq!(jaccard(&a, &a).unwrap(), Ratio::ONE);
    }

    #[test]
    fn jaccard_both_empty_is_one_by_convention() {
        let e = ds("e", &[]);
        assert_eq!(jaccard(&e, &e).unwrap(), Ratio::ONE);
    }

    #[test]
    fn universe_mismatch_is_reported_with_both_ids() {
        let a = ds("a", &[1]);
        let b = Dataset::new("b", "other", [ElementId::Int(1)]);
        match union(&a, &b) {
            Err(Error::UniverseMismatch { a, b }) => {
                assert_eq!(a, "a");
                assert_eq!(b, "b");
            }
            other => panic!("expected UniverseMismatch, got {other:?}"),
        }
    }

    #[test]
    fn ratio_reduction_ordering_and_display() {
        assert_eq!(Ratio::new(10, 20), Ratio::new(1, 2));
        assert!(Ratio::new(10, 13) > Ratio::new(1, 2));
        assert!(Ratio::new(7, 9) < Ratio::new(7, 8));
        assert_eq!(Ratio::new(10, 13).to_string(), "10/13");
    }

    #[test]
    fn inclusion_exclusion_cardinality() {
        let a = ds("a", &[1, 2, 3, 4]);
        let b = ds("b", &[3, 4, 5]);
        let u = union(&a, &b).unwrap().len();
        let i = intersect(&a, &b).unwrap().len();
        assert_eq!(u + i, a.len() + b.len());
    }
}
