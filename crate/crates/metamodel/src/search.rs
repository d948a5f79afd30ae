//! Ranked combinatorial search: enumerate candidate expressions over the
//! existing pairings, score them against a target by exact Jaccard
//! similarity, and rank deterministically.
//!
//! The candidate catalog is deliberately small and fixed: for every pairing
//! `a` the two single forms `a` and `~a`, and for every unordered pair
//! `{a, b}` twelve two-leaf forms covering conjunction, disjunction,
//! exclusive or, both directed differences, and their complements. Catalog
//! order for a pair:
//!
//! ```text
//! a & b   ~(a & b)   ~a & b   a & ~b
//! a | b   ~(a | b)   ~a | b   a | ~b
//! a ^ b   ~(a ^ b)   a - b    b - a
//! ```
//!
//! Ranking is by similarity descending, then expression size ascending, then
//! the rendered text ascending, so equal-quality candidates always come back
//! in the same order.

use crate::error::{Error, Result};
use crate::expr::{self, eval_set, Parsed, SetExpr};
use crate::framework::Framework;
use crate::sets::{jaccard, Dataset, Ratio};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

/// Knobs for candidate generation and result filtering.
#[derive(Clone, Debug)]
pub struct SearchConfig {
    /// Pairing ids never used as building blocks.
    pub exclude: Vec<String>,
    /// Results are kept when exact or strictly above this similarity.
    pub threshold: Ratio,
    /// Whether indicator-backed raw-data pairings may serve as building
    /// blocks. Off by default: a puzzle should not answer itself.
    pub include_data_only: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            exclude: Vec::new(),
            threshold: Ratio::ZERO,
            include_data_only: false,
        }
    }
}

impl SearchConfig {
    pub fn excluding(ids: impl IntoIterator<Item = impl Into<String>>) -> SearchConfig {
        SearchConfig {
            exclude: ids.into_iter().map(Into::into).collect(),
            ..SearchConfig::default()
        }
    }
}

/// One scored candidate (or equation solution).
#[derive(Clone, Debug)]
pub struct MatchResult {
    pub expr: SetExpr,
    /// Rendered set-domain form, e.g. `w7 & w8`.
    pub expr_text: String,
    /// Rendered logic-domain dual with model labels, e.g. `m7 & m8`.
    pub dual_model_text: String,
    pub lambda: Ratio,
    pub exact: bool,
    /// What the expression evaluated to.
    pub extension: Dataset,
    /// Unknown-to-pairing bindings; empty outside equation solving.
    pub bindings: BTreeMap<String, String>,
    node_count: usize,
}

/// Full outcome of one search: ranked results plus summary counts.
#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub results: Vec<MatchResult>,
    /// Candidates evaluated before filtering.
    pub candidates_evaluated: usize,
    /// Results with similarity exactly 1.
    pub exact_count: usize,
    /// Results tied at the best similarity.
    pub co_optimal_count: usize,
    pub best_lambda: Option<Ratio>,
}

#[derive(Serialize)]
struct FileLambda {
    num: u64,
    den: u64,
}

#[derive(Serialize)]
struct FileMatch<'a> {
    expr: &'a str,
    dual_model: &'a str,
    lambda: FileLambda,
    exact: bool,
    bindings: &'a BTreeMap<String, String>,
}

impl SearchOutcome {
    /// Results as a JSON array of `{expr, dual_model, lambda, exact,
    /// bindings}` records, ranked best first.
    pub fn results_json(&self) -> Result<String> {
        let rows: Vec<FileMatch<'_>> = self
            .results
            .iter()
            .map(|r| FileMatch {
                expr: &r.expr_text,
                dual_model: &r.dual_model_text,
                lambda: FileLambda {
                    num: r.lambda.num(),
                    den: r.lambda.den(),
                },
                exact: r.exact,
                bindings: &r.bindings,
            })
            .collect();
        let mut text = serde_json::to_string_pretty(&rows)?;
        text.push('\n');
        Ok(text)
    }

    pub fn best(&self) -> Option<&MatchResult> {
        self.results.first()
    }
}

fn pool(fw: &Framework, cfg: &SearchConfig) -> Vec<String> {
    fw.pairing_ids()
        .filter(|id| !cfg.exclude.iter().any(|e| e == id))
        .filter(|id| cfg.include_data_only || !fw.is_data_only(id))
        .map(|id| id.to_string())
        .collect()
}

fn single_forms(a: &str) -> [SetExpr; 2] {
    let leaf = || SetExpr::leaf(a);
    [leaf(), SetExpr::neg(leaf())]
}

fn pair_forms(a: &str, b: &str) -> [SetExpr; 12] {
    let a = || SetExpr::leaf(a);
    let b = || SetExpr::leaf(b);
    [
        SetExpr::and(a(), b()),
        SetExpr::neg(SetExpr::and(a(), b())),
        SetExpr::and(SetExpr::neg(a()), b()),
        SetExpr::and(a(), SetExpr::neg(b())),
        SetExpr::or(a(), b()),
        SetExpr::neg(SetExpr::or(a(), b())),
        SetExpr::or(SetExpr::neg(a()), b()),
        SetExpr::or(a(), SetExpr::neg(b())),
        SetExpr::xor(a(), b()),
        SetExpr::neg(SetExpr::xor(a(), b())),
        SetExpr::diff(a(), b()),
        SetExpr::diff(b(), a()),
    ]
}

/// The full candidate catalog over the usable pairings: singles first, then
/// the twelve forms per unordered pair, in pairing creation order.
pub fn candidates(fw: &Framework, cfg: &SearchConfig) -> Vec<SetExpr> {
    let ids = pool(fw, cfg);
    let mut out = Vec::with_capacity(2 * ids.len() + 6 * ids.len() * ids.len());
    for id in &ids {
        out.extend(single_forms(id));
    }
    for (i, a) in ids.iter().enumerate() {
        for b in &ids[i + 1..] {
            out.extend(pair_forms(a, b));
        }
    }
    out
}

fn score(
    fw: &Framework,
    target: &Dataset,
    expr: SetExpr,
    threshold: Ratio,
) -> Result<Option<MatchResult>> {
    let extension = eval_set(&expr, fw)?;
    let lambda = jaccard(&extension, target)?;
    let exact = extension.same_members(target);
    if !exact && lambda <= threshold {
        return Ok(None);
    }
    Ok(Some(MatchResult {
        expr_text: expr.to_string(),
        dual_model_text: fw.render_dual(&expr),
        node_count: expr.node_count(),
        expr,
        lambda,
        exact,
        extension,
        bindings: BTreeMap::new(),
    }))
}

fn rank(results: &mut Vec<MatchResult>) {
    results.sort_by(|x, y| {
        y.lambda
            .cmp(&x.lambda)
            .then(x.node_count.cmp(&y.node_count))
            .then(x.expr_text.cmp(&y.expr_text))
    });
}

fn summarize(results: Vec<MatchResult>, candidates_evaluated: usize) -> SearchOutcome {
    let exact_count = results.iter().filter(|r| r.exact).count();
    let best_lambda = results.first().map(|r| r.lambda);
    let co_optimal_count = match best_lambda {
        Some(best) => results.iter().take_while(|r| r.lambda == best).count(),
        None => 0,
    };
    SearchOutcome {
        results,
        candidates_evaluated,
        exact_count,
        co_optimal_count,
        best_lambda,
    }
}

/// Data-driven query: rank every catalog candidate against an observed
/// target set. The target needs no pairing of its own.
pub fn solve_data_driven(
    fw: &Framework,
    target: &Dataset,
    cfg: &SearchConfig,
) -> Result<SearchOutcome> {
    let cands = candidates(fw, cfg);
    let n = cands.len();
    let scored: Vec<Option<MatchResult>> = cands
        .into_par_iter()
        .map(|e| score(fw, target, e, cfg.threshold))
        .collect::<Result<_>>()?;
    let mut results: Vec<MatchResult> = scored.into_iter().flatten().collect();
    rank(&mut results);
    Ok(summarize(results, n))
}

/// Model-driven query: the target is the extension of a hypothesized model
/// over the observed environment; ranking then proceeds as data-driven.
pub fn solve_model_driven(
    fw: &Framework,
    model_dsl: &str,
    cfg: &SearchConfig,
) -> Result<SearchOutcome> {
    let model = expr::parse_model(model_dsl)?;
    let target = fw.extension_of(&model)?;
    solve_data_driven(fw, &target, cfg)
}

/// Solve an equation over the pairings by trying every binding of its
/// unknowns (at most two) to usable pairing ids. A binding is a solution
/// when both sides evaluate to the same set; near-solutions above the
/// threshold are reported with their similarity.
pub fn solve_equation(fw: &Framework, equation: &str, cfg: &SearchConfig) -> Result<SearchOutcome> {
    let (left, right) = match expr::parse(equation)? {
        Parsed::Equation { left, right } => (left, right),
        Parsed::Expr(_) => {
            return Err(Error::Parse {
                position: 0,
                message: "expected an equation containing `==`".into(),
            })
        }
    };
    let mut unknowns = left.unknowns();
    for u in right.unknowns() {
        if !unknowns.contains(&u) {
            unknowns.push(u);
        }
    }
    if unknowns.len() > 2 {
        return Err(Error::TooManyUnknowns {
            max: 2,
            found: unknowns.len(),
        });
    }

    let ids = pool(fw, cfg);
    let assignments: Vec<BTreeMap<String, String>> = match unknowns.as_slice() {
        [] => vec![BTreeMap::new()],
        [u] => ids
            .iter()
            .map(|id| BTreeMap::from([(u.clone(), id.clone())]))
            .collect(),
        [u, v] => {
            let mut out = Vec::with_capacity(ids.len() * ids.len());
            for a in &ids {
                for b in &ids {
                    out.push(BTreeMap::from([
                        (u.clone(), a.clone()),
                        (v.clone(), b.clone()),
                    ]));
                }
            }
            out
        }
        _ => unreachable!("checked above"),
    };

    let n = assignments.len();
    let scored: Vec<Option<MatchResult>> = assignments
        .into_par_iter()
        .map(|bindings| {
            let l = left.substitute(&bindings);
            let r = right.substitute(&bindings);
            let lv = eval_set(&l, fw)?;
            let rv = eval_set(&r, fw)?;
            let lambda = jaccard(&lv, &rv)?;
            let exact = lv.same_members(&rv);
            if !exact && lambda <= cfg.threshold {
                return Ok(None);
            }
            Ok(Some(MatchResult {
                expr_text: format!("{l} == {r}"),
                dual_model_text: format!("{} == {}", fw.render_dual(&l), fw.render_dual(&r)),
                node_count: l.node_count() + r.node_count(),
                expr: l,
                lambda,
                exact,
                extension: lv,
                bindings,
            }))
        })
        .collect::<Result<_>>()?;
    let mut results: Vec<MatchResult> = scored.into_iter().flatten().collect();
    rank(&mut results);
    Ok(summarize(results, n))
}
