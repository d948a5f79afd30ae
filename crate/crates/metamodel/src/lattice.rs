//! Binary lattice domain: the universe of all L×L black-and-white patterns,
//! geometric feature predicates over them, and the 3×3 case framework.
//!
//! A pattern is encoded as an L²-bit integer, row-major with cell [1,1] as
//! the least significant bit, so the element id doubles as the pattern.
//! Cell coordinates are 1-based throughout: [1,1] is the top-left corner and
//! [L,L] the bottom-right.
//!
//! Two of the nine base models depend on wording that admits more than one
//! reading (local width for "thin", connectivity for "joined corners"). The
//! builder calibrates those by brute force against the fixed target sizes
//! for the 3×3 universe and records the winning interpretation in the model
//! descriptions; failing to reproduce the targets is a hard error, never a
//! silent approximation.

use crate::error::{Error, Result};
use crate::expr::parse_set;
use crate::framework::{
    BaseModel, FeatureDef, FeatureKind, FeatureValue, FeatureVector, Framework, ModelBody,
};
use crate::sets::{Dataset, ElementId};
use crate::search::{solve_data_driven, MatchResult, SearchConfig, SearchOutcome};
use std::collections::BTreeSet;

/// One binary pattern on an L×L grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatticePattern {
    side: usize,
    id: u64,
}

/// Target extension sizes for the nine 3×3 base models, used both to
/// calibrate the ambiguous interpretations and to verify the build.
pub const CALIBRATION_TARGETS_3X3: [usize; 9] = [9, 36, 84, 126, 466, 256, 88, 291, 221];

impl LatticePattern {
    pub fn new(side: usize, id: u64) -> Result<LatticePattern> {
        check_side(side)?;
        let bits = side * side;
        if bits < 64 && id >> bits != 0 {
            return Err(Error::domain(format!(
                "pattern id {id} out of range for a {side}x{side} grid"
            )));
        }
        Ok(LatticePattern { side, id })
    }

    pub fn from_cells(side: usize, cells: &[(usize, usize)]) -> Result<LatticePattern> {
        check_side(side)?;
        let mut id = 0u64;
        for &(r, c) in cells {
            if r < 1 || r > side || c < 1 || c > side {
                return Err(Error::domain(format!(
                    "cell [{r},{c}] outside a {side}x{side} grid"
                )));
            }
            id |= 1 << ((r - 1) * side + (c - 1));
        }
        LatticePattern::new(side, id)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    /// 1-based cell query.
    pub fn is_foreground(&self, row: usize, col: usize) -> bool {
        debug_assert!(row >= 1 && row <= self.side && col >= 1 && col <= self.side);
        (self.id >> ((row - 1) * self.side + (col - 1))) & 1 == 1
    }

    /// Foreground cells as 1-based coordinates, row-major.
    pub fn foreground(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for r in 1..=self.side {
            for c in 1..=self.side {
                if self.is_foreground(r, c) {
                    out.push((r, c));
                }
            }
        }
        out
    }

    pub fn point_count(&self) -> usize {
        self.id.count_ones() as usize
    }

    /// Plain-text PGM (P1) rendering, foreground as 1.
    pub fn to_pgm(&self) -> String {
        let mut out = format!("P1\n{} {}\n", self.side, self.side);
        for r in 1..=self.side {
            let row: Vec<&str> = (1..=self.side)
                .map(|c| if self.is_foreground(r, c) { "1" } else { "0" })
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

fn check_side(side: usize) -> Result<()> {
    if (1..=4).contains(&side) {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "lattice side {side} out of supported range 1..=4"
        )))
    }
}

/// All 2^(L²) patterns in id order.
pub fn enumerate_universe(side: usize) -> Result<Vec<LatticePattern>> {
    check_side(side)?;
    let n = 1u64 << (side * side);
    (0..n).map(|id| LatticePattern::new(side, id)).collect()
}

/// Cell adjacency used when grouping foreground points.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Connectivity {
    /// Shared horizontal or vertical margin.
    Four,
    /// Margin or corner contact.
    Eight,
}

impl Connectivity {
    fn name(&self) -> &'static str {
        match self {
            Connectivity::Four => "four",
            Connectivity::Eight => "eight",
        }
    }
}

fn neighbors(
    side: usize,
    (r, c): (usize, usize),
    conn: Connectivity,
) -> impl Iterator<Item = (usize, usize)> {
    const STEPS4: [(i64, i64); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
    const STEPS8: [(i64, i64); 8] = [
        (-1, -1),
        (-1, 0),
        (-1, 1),
        (0, -1),
        (0, 1),
        (1, -1),
        (1, 0),
        (1, 1),
    ];
    let steps: &[(i64, i64)] = match conn {
        Connectivity::Four => &STEPS4,
        Connectivity::Eight => &STEPS8,
    };
    let side = side as i64;
    steps.iter().filter_map(move |&(dr, dc)| {
        let (rr, cc) = (r as i64 + dr, c as i64 + dc);
        (rr >= 1 && rr <= side && cc >= 1 && cc <= side).then_some((rr as usize, cc as usize))
    })
}

fn components_with(p: &LatticePattern, conn: Connectivity) -> Vec<BTreeSet<(usize, usize)>> {
    let fg: BTreeSet<(usize, usize)> = p.foreground().into_iter().collect();
    let mut seen: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut out = Vec::new();
    for &start in &fg {
        if seen.contains(&start) {
            continue;
        }
        let mut comp = BTreeSet::new();
        let mut stack = vec![start];
        while let Some(cell) = stack.pop() {
            if !comp.insert(cell) {
                continue;
            }
            for nb in neighbors(p.side, cell, conn) {
                if fg.contains(&nb) && !comp.contains(&nb) {
                    stack.push(nb);
                }
            }
        }
        seen.extend(comp.iter().cloned());
        out.push(comp);
    }
    out
}

/// Partition of the foreground cells under margin (4-) adjacency.
pub fn connected_components(p: &LatticePattern) -> Vec<BTreeSet<(usize, usize)>> {
    components_with(p, Connectivity::Four)
}

/// Candidate readings of per-cell local width.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WidthRule {
    /// Width = number of 4-adjacent foreground neighbors.
    AdjacencyCount,
    /// Width = neighbor count plus one (counting the cell itself).
    AdjacencyCountPlusOne,
    /// Width = 2d − 1 where d is the city-block distance to the nearest
    /// in-grid background cell; a cell is wide exactly when it has no
    /// background cell on any of its four margins.
    NoInteriorPoint,
}

impl WidthRule {
    const ALL: [WidthRule; 3] = [
        WidthRule::AdjacencyCount,
        WidthRule::AdjacencyCountPlusOne,
        WidthRule::NoInteriorPoint,
    ];

    fn name(&self) -> &'static str {
        match self {
            WidthRule::AdjacencyCount => "adjacency-count",
            WidthRule::AdjacencyCountPlusOne => "adjacency-count-plus-one",
            WidthRule::NoInteriorPoint => "no-interior-point",
        }
    }
}

/// Per-cell widths plus the aggregated thin verdict.
#[derive(Clone, Debug)]
pub struct LocalWidths {
    /// 1-based foreground cell to width.
    pub widths: Vec<((usize, usize), usize)>,
    /// Every foreground cell has width 1 or 2. Vacuously true when empty.
    pub thin: bool,
}

/// Widths of every foreground cell under the given rule.
pub fn local_widths(p: &LatticePattern, rule: WidthRule) -> LocalWidths {
    let fg: BTreeSet<(usize, usize)> = p.foreground().into_iter().collect();
    let widths: Vec<((usize, usize), usize)> = fg
        .iter()
        .map(|&cell| {
            let w = match rule {
                WidthRule::AdjacencyCount => neighbors(p.side, cell, Connectivity::Four)
                    .filter(|nb| fg.contains(nb))
                    .count(),
                WidthRule::AdjacencyCountPlusOne => {
                    1 + neighbors(p.side, cell, Connectivity::Four)
                        .filter(|nb| fg.contains(nb))
                        .count()
                }
                WidthRule::NoInteriorPoint => {
                    let d = distance_to_background(p, cell, &fg);
                    2 * d - 1
                }
            };
            (cell, w)
        })
        .collect();
    let thin = widths.iter().all(|&(_, w)| (1..=2).contains(&w));
    LocalWidths { widths, thin }
}

/// City-block distance from a foreground cell to the nearest background
/// cell inside the grid. When no background exists the result is one more
/// than the largest possible in-grid distance, 2(L−1)+1.
fn distance_to_background(
    p: &LatticePattern,
    from: (usize, usize),
    fg: &BTreeSet<(usize, usize)>,
) -> usize {
    let mut best = 2 * (p.side - 1) + 1;
    for r in 1..=p.side {
        for c in 1..=p.side {
            if !fg.contains(&(r, c)) {
                let d = from.0.abs_diff(r) + from.1.abs_diff(c);
                best = best.min(d);
            }
        }
    }
    best
}

fn is_thin(p: &LatticePattern, rule: WidthRule) -> bool {
    local_widths(p, rule).thin
}

/// Whether the foreground is one single component (under `conn`) that
/// contains both the [1,1] and [L,L] corners.
fn joins_corners(p: &LatticePattern, conn: Connectivity) -> bool {
    let comps = components_with(p, conn);
    comps.len() == 1 && {
        let comp = &comps[0];
        comp.contains(&(1, 1)) && comp.contains(&(p.side, p.side))
    }
}

/// The interpretations that survived calibration against the 3×3 targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatticeCalibration {
    pub width_rule: WidthRule,
    pub corner_connectivity: Connectivity,
}

fn calibrate(patterns: &[LatticePattern]) -> Result<LatticeCalibration> {
    let thin_target = CALIBRATION_TARGETS_3X3[7];
    let mut thin_counts = Vec::new();
    let mut width_rule = None;
    for rule in WidthRule::ALL {
        let count = patterns.iter().filter(|p| is_thin(p, rule)).count();
        thin_counts.push(count);
        if count == thin_target && width_rule.is_none() {
            width_rule = Some(rule);
        }
    }
    let width_rule = width_rule.ok_or(Error::Calibration {
        model: "m8".into(),
        expected: thin_target,
        got: thin_counts,
    })?;

    let corner_target = CALIBRATION_TARGETS_3X3[6];
    let mut corner_counts = Vec::new();
    let mut connectivity = None;
    for conn in [Connectivity::Four, Connectivity::Eight] {
        let count = patterns.iter().filter(|p| joins_corners(p, conn)).count();
        corner_counts.push(count);
        if count == corner_target && connectivity.is_none() {
            connectivity = Some(conn);
        }
    }
    let corner_connectivity = connectivity.ok_or(Error::Calibration {
        model: "m7".into(),
        expected: corner_target,
        got: corner_counts,
    })?;

    Ok(LatticeCalibration {
        width_rule,
        corner_connectivity,
    })
}

fn pattern_of(fv: &FeatureVector, side: usize) -> Result<LatticePattern> {
    let raw = fv
        .get("pattern")
        .and_then(FeatureValue::as_i64)
        .ok_or_else(|| Error::MissingFeature {
            model: "lattice".into(),
            feature: "pattern".into(),
        })?;
    LatticePattern::new(side, raw as u64)
}

/// Bind the nine lattice predicates (plugin names `lattice.m1` ..
/// `lattice.m9`) onto a framework, e.g. after loading one from disk.
pub fn register_lattice_plugins(fw: &mut Framework, side: usize, cal: LatticeCalibration) {
    let counts: [(&str, fn(usize) -> bool); 5] = [
        ("lattice.m1", |n| n == 1),
        ("lattice.m2", |n| n == 2),
        ("lattice.m3", |n| n == 3),
        ("lattice.m4", |n| n == 4),
        ("lattice.m5", |n| n >= 3),
    ];
    for (name, test) in counts {
        fw.register_predicate(name, move |fv: &FeatureVector| {
            Ok(test(pattern_of(fv, side)?.point_count()))
        });
    }
    fw.register_predicate("lattice.m6", move |fv: &FeatureVector| {
        Ok(pattern_of(fv, side)?.is_foreground(1, 1))
    });
    fw.register_predicate("lattice.m7", move |fv: &FeatureVector| {
        Ok(joins_corners(&pattern_of(fv, side)?, cal.corner_connectivity))
    });
    fw.register_predicate("lattice.m8", move |fv: &FeatureVector| {
        Ok(is_thin(&pattern_of(fv, side)?, cal.width_rule))
    });
    fw.register_predicate("lattice.m9", move |fv: &FeatureVector| {
        Ok(!is_thin(&pattern_of(fv, side)?, cal.width_rule))
    });
}

/// Recalibrate and rebind the `lattice.*` plugin family onto a loaded
/// framework, e.g. after [`Framework::load`]. The only buildable universe
/// is 3x3, so the calibration is re-derived for that side. Returns whether
/// any lattice plugin reference was present.
pub fn rebind_lattice_plugins(fw: &mut Framework) -> Result<bool> {
    let present = fw
        .base_models()
        .any(|b| matches!(&b.body, ModelBody::Plugin(p) if p.starts_with("lattice.")));
    if !present {
        return Ok(false);
    }
    let side = 3;
    let cal = calibrate(&enumerate_universe(side)?)?;
    register_lattice_plugins(fw, side, cal);
    Ok(true)
}

/// Build the 3×3 case framework: all 512 patterns observed, nine calibrated
/// base models m₁..m₉, and nine pairings w₁..w₉ holding their extensions.
/// Fails with [`Error::Calibration`] if any extension size misses its
/// target.
pub fn build_lattice_framework(side: usize) -> Result<(Framework, LatticeCalibration)> {
    if side != 3 {
        return Err(Error::domain(format!(
            "calibration targets exist for the 3x3 universe only, got {side}x{side}"
        )));
    }
    let patterns = enumerate_universe(side)?;
    let cal = calibrate(&patterns)?;

    let mut fw = Framework::new(format!("lattice_{side}x{side}"));
    fw.register_feature(FeatureDef::new("pattern", FeatureKind::Int))?;
    register_lattice_plugins(&mut fw, side, cal);

    let batch: Vec<(ElementId, FeatureVector)> = patterns
        .iter()
        .map(|p| {
            let mut fv = FeatureVector::new();
            fv.insert("pattern".into(), FeatureValue::Int(p.id() as i64));
            (ElementId::Int(p.id() as i64), fv)
        })
        .collect();
    fw.ingest_elements(batch)?;

    let descriptions: [String; 9] = [
        "exactly one foreground point".into(),
        "exactly two foreground points".into(),
        "exactly three foreground points".into(),
        "exactly four foreground points".into(),
        "three or more foreground points".into(),
        "cell [1,1] is foreground".into(),
        format!(
            "single component joining [1,1] and [{side},{side}] ({}-adjacency, calibrated)",
            cal.corner_connectivity.name()
        ),
        format!("thin pattern ({} width rule, calibrated)", cal.width_rule.name()),
        format!("non-thin pattern ({} width rule, calibrated)", cal.width_rule.name()),
    ];
    for (i, description) in descriptions.into_iter().enumerate() {
        let k = i + 1;
        fw.register_base_model(BaseModel::plugin(
            format!("m{k}"),
            format!("lattice.m{k}"),
            description,
        ))?;
        fw.ingest_model(format!("w{k}"), &format!("m{k}"))?;
    }

    for (i, &expected) in CALIBRATION_TARGETS_3X3.iter().enumerate() {
        let k = i + 1;
        let got = fw.pairing(&format!("w{k}"))?.dataset().len();
        if got != expected {
            return Err(Error::Calibration {
                model: format!("m{k}"),
                expected,
                got: vec![got],
            });
        }
    }
    Ok((fw, cal))
}

/// The search puzzle: hide the target behind ω₇ ∩ ω₈ and check the engine
/// recovers exactly that combination, ranked first with similarity 1.
pub fn omega10_puzzle(fw: &Framework) -> Result<(Dataset, SearchOutcome)> {
    let target = crate::expr::eval_set(&parse_set("w7 & w8")?, fw)?.with_id("w10");
    let outcome = solve_data_driven(fw, &target, &SearchConfig::default())?;
    let best: &MatchResult = outcome
        .best()
        .ok_or_else(|| Error::domain("search returned no results for the w10 target"))?;
    if !best.exact || best.expr_text != "w7 & w8" {
        return Err(Error::domain(format!(
            "expected `w7 & w8` to rank first and exact, got `{}` (exact: {})",
            best.expr_text, best.exact
        )));
    }
    Ok((target, outcome))
}

/// The two-point and three-point diagonal combinations with m₇. The strict
/// two-point version is provably empty on 3×3 (the corners can never be one
/// component on their own); the three-point version is exactly the main
/// diagonal pattern.
pub fn diagonal_case(fw: &Framework) -> Result<(Dataset, Dataset)> {
    let two = crate::expr::eval_set(&parse_set("w2 & w7")?, fw)?;
    let three = crate::expr::eval_set(&parse_set("w3 & w7")?, fw)?;
    Ok((two, three))
}
