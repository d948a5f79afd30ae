//! The dual algebra: expression trees over pairings in the set domain and the
//! logic domain, the 16-operation catalog, the dualization bridge between the
//! two domains, and the text DSL.
//!
//! Grammar (whitespace insignificant):
//!
//! ```text
//! equation := expr '==' expr
//! expr     := term (('|' | '^') term)*
//! term     := factor (('&' | '-') factor)*
//! factor   := '~' factor | '(' expr ')' | ident | '?' ident
//! ident    := [A-Za-z_][A-Za-z0-9_]*
//! ```
//!
//! `&`/`|`/`^`/`-` map to op codes 1/7/6/2; `~` is complement (set domain) or
//! negation (logic domain); `?x` marks an unknown leaf for equation solving.
//! Unparsing puts single spaces around binary operators, so parsing an
//! unparsed expression is the identity on trees built from those operators.

use crate::error::{Error, Result};
use crate::framework::Framework;
use crate::sets::Dataset;
use std::fmt;

// ---------------- operation catalog ----------------

/// Truth-table application for binary op code `op` (0..=15).
///
/// Convention: the table column for `op` lists its value on the rows
/// (0,0), (0,1), (1,0), (1,1) top to bottom, and `op` itself encodes that
/// column read bottom-up as a binary number. Hence bit index 0 of `op` is the
/// (1,1) row and bit 3 the (0,0) row, giving op_1 = and, op_2 = difference,
/// op_6 = xor, op_7 = or, op_9 = xnor.
pub fn op_apply(op: u8, a: bool, b: bool) -> bool {
    debug_assert!(op < 16, "binary op codes range over 0..=15");
    let bit = (((!a) as u8) << 1) | ((!b) as u8);
    (op >> bit) & 1 == 1
}

/// The four non-informative codes: constant false, constant true, and the two
/// projections.
pub fn op_is_trivial(op: u8) -> bool {
    matches!(op, OP_FALSE | OP_LEFT | OP_RIGHT | OP_TRUE)
}

pub const OP_FALSE: u8 = 0;
pub const OP_AND: u8 = 1;
/// a ∧ ¬b, the set difference a − b.
pub const OP_DIFF: u8 = 2;
pub const OP_LEFT: u8 = 3;
/// ¬a ∧ b, the reversed difference b − a.
pub const OP_RDIFF: u8 = 4;
pub const OP_RIGHT: u8 = 5;
pub const OP_XOR: u8 = 6;
pub const OP_OR: u8 = 7;
pub const OP_NOR: u8 = 8;
pub const OP_XNOR: u8 = 9;
pub const OP_NOT_RIGHT: u8 = 10;
pub const OP_LEFT_OR_NOT_RIGHT: u8 = 11;
pub const OP_NOT_LEFT: u8 = 12;
pub const OP_NOT_LEFT_OR_RIGHT: u8 = 13;
pub const OP_NAND: u8 = 14;
pub const OP_TRUE: u8 = 15;

/// The catalog of all 16 binary boolean operations, with the trivial four
/// flagged. Row order in [`OpCatalog::table`] is (0,0), (0,1), (1,0), (1,1).
pub struct OpCatalog {
    tables: [[bool; 4]; 16],
}

static CATALOG: OpCatalog = OpCatalog::build();

impl OpCatalog {
    const fn build() -> OpCatalog {
        let mut tables = [[false; 4]; 16];
        let mut op = 0;
        while op < 16 {
            let mut row = 0;
            while row < 4 {
                let (a, b) = (row >> 1 == 1, row & 1 == 1);
                let bit = ((!a as u8) << 1) | (!b as u8);
                tables[op][row] = (op as u8 >> bit) & 1 == 1;
                row += 1;
            }
            op += 1;
        }
        OpCatalog { tables }
    }

    pub fn standard() -> &'static OpCatalog {
        &CATALOG
    }

    pub fn apply(&self, op: u8, a: bool, b: bool) -> bool {
        self.tables[op as usize][((a as usize) << 1) | b as usize]
    }

    /// Column of `op` on rows (0,0), (0,1), (1,0), (1,1).
    pub fn table(&self, op: u8) -> [bool; 4] {
        self.tables[op as usize]
    }

    pub fn is_trivial(&self, op: u8) -> bool {
        op_is_trivial(op)
    }

    pub fn name(&self, op: u8) -> &'static str {
        match op {
            OP_FALSE => "false",
            OP_AND => "and",
            OP_DIFF => "diff",
            OP_LEFT => "left",
            OP_RDIFF => "rdiff",
            OP_RIGHT => "right",
            OP_XOR => "xor",
            OP_OR => "or",
            OP_NOR => "nor",
            OP_XNOR => "xnor",
            OP_NOT_RIGHT => "not-right",
            OP_LEFT_OR_NOT_RIGHT => "left-or-not-right",
            OP_NOT_LEFT => "not-left",
            OP_NOT_LEFT_OR_RIGHT => "not-left-or-right",
            OP_NAND => "nand",
            OP_TRUE => "true",
            _ => panic!("binary op codes range over 0..=15"),
        }
    }
}

/// Number of distinct boolean operations of arity `n`: 2^(2^n).
pub fn nary_op_count(n: u32) -> u128 {
    1u128 << (1u32 << n)
}

// ---------------- expression trees ----------------

/// Set-domain expression over pairings: leaves name pairings (by dataset or
/// base-model id), complement is taken relative to the covered universe S_E,
/// and binary nodes carry one of the 16 op codes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SetExpr {
    Leaf(String),
    /// An unbound query variable `?name`; evaluation fails until substituted.
    Unknown(String),
    Complement(Box<SetExpr>),
    Binary(u8, Box<SetExpr>, Box<SetExpr>),
}

/// Logic-domain mirror of [`SetExpr`]: same shape, negation instead of
/// complement, evaluated against feature predicates instead of member sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ModelExpr {
    Leaf(String),
    Unknown(String),
    Not(Box<ModelExpr>),
    Binary(u8, Box<ModelExpr>, Box<ModelExpr>),
}

macro_rules! expr_shared {
    ($ty:ident, $unary:ident) => {
        impl $ty {
            pub fn leaf(id: impl Into<String>) -> $ty {
                $ty::Leaf(id.into())
            }

            pub fn unknown(name: impl Into<String>) -> $ty {
                $ty::Unknown(name.into())
            }

            pub fn neg(e: $ty) -> $ty {
                $ty::$unary(Box::new(e))
            }

            pub fn binary(op: u8, l: $ty, r: $ty) -> $ty {
                assert!(op < 16, "binary op codes range over 0..=15");
                $ty::Binary(op, Box::new(l), Box::new(r))
            }

            pub fn and(l: $ty, r: $ty) -> $ty {
                $ty::binary(OP_AND, l, r)
            }

            pub fn or(l: $ty, r: $ty) -> $ty {
                $ty::binary(OP_OR, l, r)
            }

            pub fn xor(l: $ty, r: $ty) -> $ty {
                $ty::binary(OP_XOR, l, r)
            }

            pub fn diff(l: $ty, r: $ty) -> $ty {
                $ty::binary(OP_DIFF, l, r)
            }

            /// Hierarchy depth: leaves 0, each operator adds 1.
            pub fn depth(&self) -> usize {
                match self {
                    $ty::Leaf(_) | $ty::Unknown(_) => 0,
                    $ty::$unary(c) => c.depth() + 1,
                    $ty::Binary(_, l, r) => l.depth().max(r.depth()) + 1,
                }
            }

            /// Total node count (leaves and operators), the size used for
            /// result tie-breaking.
            pub fn node_count(&self) -> usize {
                match self {
                    $ty::Leaf(_) | $ty::Unknown(_) => 1,
                    $ty::$unary(c) => c.node_count() + 1,
                    $ty::Binary(_, l, r) => l.node_count() + r.node_count() + 1,
                }
            }

            /// Unknown names in first-appearance order, deduplicated.
            pub fn unknowns(&self) -> Vec<String> {
                fn walk(e: &$ty, out: &mut Vec<String>) {
                    match e {
                        $ty::Leaf(_) => {}
                        $ty::Unknown(n) => {
                            if !out.iter().any(|x| x == n) {
                                out.push(n.clone());
                            }
                        }
                        $ty::$unary(c) => walk(c, out),
                        $ty::Binary(_, l, r) => {
                            walk(l, out);
                            walk(r, out);
                        }
                    }
                }
                let mut out = Vec::new();
                walk(self, &mut out);
                out
            }

            pub fn has_unknowns(&self) -> bool {
                !self.unknowns().is_empty()
            }

            /// Replace every `?name` with `Leaf(bindings[name])`; unknowns
            /// without a binding are left in place.
            pub fn substitute(
                &self,
                bindings: &std::collections::BTreeMap<String, String>,
            ) -> $ty {
                match self {
                    $ty::Leaf(id) => $ty::Leaf(id.clone()),
                    $ty::Unknown(n) => match bindings.get(n) {
                        Some(id) => $ty::Leaf(id.clone()),
                        None => $ty::Unknown(n.clone()),
                    },
                    $ty::$unary(c) => $ty::neg(c.substitute(bindings)),
                    $ty::Binary(op, l, r) => {
                        $ty::binary(*op, l.substitute(bindings), r.substitute(bindings))
                    }
                }
            }

            /// Rewrite op codes outside the DSL-expressible set {and, diff,
            /// xor, or} into equivalent compositions of those plus negation.
            /// Semantics-preserving; trees built by the parser are returned
            /// unchanged.
            pub fn to_dsl(&self) -> $ty {
                match self {
                    $ty::Leaf(_) | $ty::Unknown(_) => self.clone(),
                    $ty::$unary(c) => $ty::neg(c.to_dsl()),
                    $ty::Binary(op, l, r) => {
                        let a = l.to_dsl();
                        let b = r.to_dsl();
                        match *op {
                            OP_AND | OP_DIFF | OP_XOR | OP_OR => $ty::binary(*op, a, b),
                            OP_FALSE => $ty::diff(a.clone(), a),
                            OP_LEFT => a,
                            OP_RDIFF => $ty::diff(b, a),
                            OP_RIGHT => b,
                            OP_NOR => $ty::neg($ty::or(a, b)),
                            OP_XNOR => $ty::neg($ty::xor(a, b)),
                            OP_NOT_RIGHT => $ty::neg(b),
                            OP_LEFT_OR_NOT_RIGHT => $ty::or(a, $ty::neg(b)),
                            OP_NOT_LEFT => $ty::neg(a),
                            OP_NOT_LEFT_OR_RIGHT => $ty::or($ty::neg(a), b),
                            OP_NAND => $ty::neg($ty::and(a, b)),
                            OP_TRUE => $ty::or(a.clone(), $ty::neg(a)),
                            other => panic!("binary op code {other} out of range"),
                        }
                    }
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                // Precedence levels: |,^ = 1; &,- = 2; unary and leaves bind
                // tightest. Left-associative, so a right child at the same
                // level is parenthesized to preserve the tree shape.
                fn sym(op: u8) -> char {
                    match op {
                        OP_AND => '&',
                        OP_DIFF => '-',
                        OP_XOR => '^',
                        OP_OR => '|',
                        _ => unreachable!("to_dsl leaves only DSL op codes"),
                    }
                }
                fn level(op: u8) -> u8 {
                    match op {
                        OP_OR | OP_XOR => 1,
                        _ => 2,
                    }
                }
                fn go(
                    e: &$ty,
                    f: &mut fmt::Formatter<'_>,
                    parent: u8,
                    right: bool,
                ) -> fmt::Result {
                    match e {
                        $ty::Leaf(id) => write!(f, "{id}"),
                        $ty::Unknown(n) => write!(f, "?{n}"),
                        $ty::$unary(c) => {
                            write!(f, "~")?;
                            go(c, f, 3, false)
                        }
                        $ty::Binary(op, l, r) => {
                            let lv = level(*op);
                            let parens = lv < parent || (lv == parent && right);
                            if parens {
                                write!(f, "(")?;
                            }
                            go(l, f, lv, false)?;
                            write!(f, " {} ", sym(*op))?;
                            go(r, f, lv, true)?;
                            if parens {
                                write!(f, ")")?;
                            }
                            Ok(())
                        }
                    }
                }
                go(&self.to_dsl(), f, 0, false)
            }
        }
    };
}

expr_shared!(SetExpr, Complement);
expr_shared!(ModelExpr, Not);

/// Structure-preserving translation into the logic domain: leaves map to
/// leaves, complement to negation, op codes unchanged.
pub fn dualize(e: &SetExpr) -> ModelExpr {
    match e {
        SetExpr::Leaf(id) => ModelExpr::Leaf(id.clone()),
        SetExpr::Unknown(n) => ModelExpr::Unknown(n.clone()),
        SetExpr::Complement(c) => ModelExpr::neg(dualize(c)),
        SetExpr::Binary(op, l, r) => ModelExpr::binary(*op, dualize(l), dualize(r)),
    }
}

/// Inverse of [`dualize`]; `dualize_inverse(dualize(e)) = e` for every tree.
pub fn dualize_inverse(e: &ModelExpr) -> SetExpr {
    match e {
        ModelExpr::Leaf(id) => SetExpr::Leaf(id.clone()),
        ModelExpr::Unknown(n) => SetExpr::Unknown(n.clone()),
        ModelExpr::Not(c) => SetExpr::neg(dualize_inverse(c)),
        ModelExpr::Binary(op, l, r) => SetExpr::binary(*op, dualize_inverse(l), dualize_inverse(r)),
    }
}

// ---------------- evaluation ----------------

/// Evaluate a set expression against a framework. Leaves resolve to paired
/// datasets, complement is taken relative to S_E, and binary nodes combine
/// memberships elementwise through the op truth table.
pub fn eval_set(e: &SetExpr, fw: &Framework) -> Result<Dataset> {
    let se = fw.s_e();
    eval_set_in(e, fw, &se)
}

fn eval_set_in(e: &SetExpr, fw: &Framework, se: &Dataset) -> Result<Dataset> {
    match e {
        SetExpr::Leaf(id) => fw.leaf_dataset(id),
        SetExpr::Unknown(n) => Err(Error::UnboundUnknown(n.clone())),
        SetExpr::Complement(c) => {
            let inner = eval_set_in(c, fw, se)?;
            crate::sets::complement(&inner, se)
        }
        SetExpr::Binary(op, l, r) => {
            let a = eval_set_in(l, fw, se)?;
            let b = eval_set_in(r, fw, se)?;
            let members = se
                .members()
                .filter(|x| op_apply(*op, a.contains(x), b.contains(x)))
                .cloned();
            Ok(Dataset::new("", se.universe.clone(), members))
        }
    }
}

/// Whether observed element `x` satisfies the model expression. Leaves
/// resolve to base-model predicates over the element's feature vector (or to
/// the referenced pairing's model), negation and binary nodes go through the
/// op truth tables.
pub fn satisfies(e: &ModelExpr, x: &crate::sets::ElementId, fw: &Framework) -> Result<bool> {
    fw.satisfies_expr(e, x)
}

/// The set of observed environment elements satisfying the model expression.
pub fn extension(e: &ModelExpr, fw: &Framework) -> Result<Dataset> {
    fw.extension_of(e)
}

// ---------------- parsing ----------------

/// Outcome of parsing a DSL string: a single expression or an equation. The
/// tree is domain-neutral; interpret it as a [`SetExpr`] directly or map it
/// through [`dualize`] for the logic domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Parsed {
    Expr(SetExpr),
    Equation { left: SetExpr, right: SetExpr },
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            src,
            bytes: src.as_bytes(),
            pos: 0,
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            position: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        Some(c)
    }

    fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() {
            let c = self.bytes[self.pos];
            let ok = if self.pos == start {
                c.is_ascii_alphabetic() || c == b'_'
            } else {
                c.is_ascii_alphanumeric() || c == b'_'
            };
            if !ok {
                break;
            }
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected identifier"));
        }
        Ok(self.src[start..self.pos].to_string())
    }

    fn factor(&mut self) -> Result<SetExpr> {
        match self.peek() {
            Some(b'~') => {
                self.pos += 1;
                Ok(SetExpr::neg(self.factor()?))
            }
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                match self.bump() {
                    Some(b')') => Ok(e),
                    _ => Err(self.err("expected `)`")),
                }
            }
            Some(b'?') => {
                self.pos += 1;
                Ok(SetExpr::Unknown(self.ident()?))
            }
            Some(_) => Ok(SetExpr::Leaf(self.ident()?)),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn term(&mut self) -> Result<SetExpr> {
        let mut e = self.factor()?;
        loop {
            match self.peek() {
                Some(b'&') => {
                    self.pos += 1;
                    e = SetExpr::and(e, self.factor()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    e = SetExpr::diff(e, self.factor()?);
                }
                _ => return Ok(e),
            }
        }
    }

    fn expr(&mut self) -> Result<SetExpr> {
        let mut e = self.term()?;
        loop {
            match self.peek() {
                Some(b'|') => {
                    self.pos += 1;
                    e = SetExpr::or(e, self.term()?);
                }
                // `^` is xor; `==` must not be eaten here.
                Some(b'^') => {
                    self.pos += 1;
                    e = SetExpr::xor(e, self.term()?);
                }
                _ => return Ok(e),
            }
        }
    }

    fn parse(&mut self) -> Result<Parsed> {
        let left = self.expr()?;
        match self.peek() {
            None => Ok(Parsed::Expr(left)),
            Some(b'=') => {
                if self.bytes.get(self.pos..self.pos + 2) == Some(b"==") {
                    self.pos += 2;
                    let right = self.expr()?;
                    if let Some(c) = self.peek() {
                        return Err(self.err(format!("unexpected trailing `{}`", c as char)));
                    }
                    Ok(Parsed::Equation { left, right })
                } else {
                    Err(self.err("expected `==`"))
                }
            }
            Some(c) => Err(self.err(format!("unexpected `{}`", c as char))),
        }
    }
}

/// Parse a DSL string into an expression or an equation.
pub fn parse(text: &str) -> Result<Parsed> {
    Parser::new(text).parse()
}

/// Parse a DSL string that must be a single set-domain expression.
pub fn parse_set(text: &str) -> Result<SetExpr> {
    match parse(text)? {
        Parsed::Expr(e) => Ok(e),
        Parsed::Equation { .. } => Err(Error::Parse {
            position: 0,
            message: "expected an expression, found an equation".into(),
        }),
    }
}

/// Parse a DSL string that must be a single logic-domain expression.
pub fn parse_model(text: &str) -> Result<ModelExpr> {
    Ok(dualize(&parse_set(text)?))
}
