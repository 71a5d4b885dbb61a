//! Expression tree: nodes, constructors, differentiation, evaluation,
//! substitution.
//!
//! The language is deliberately small: exact rational constants, the
//! imaginary unit, named symbols (coordinates and parameters), n-ary sums
//! and products, integer powers, and the four analytic functions sin, cos,
//! exp, log. Every operation the toolkit performs on coefficient functions
//! stays inside this set, so derivatives are always exact.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use num_rational::Ratio;
use thiserror::Error;

pub type Rat = Ratio<i128>;

#[derive(Debug, Error, PartialEq)]
pub enum ExprError {
    #[error("unbound symbol `{0}` in evaluation")]
    UnboundSymbol(String),
    #[error("log of zero at evaluation")]
    LogOfZero,
    #[error("zero raised to a negative power at evaluation")]
    ZeroToNegativePower,
}

/// Whether a symbol is a chart coordinate (a differentiation variable) or a
/// free parameter (constant under differentiation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymbolKind {
    Var,
    Param,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol {
    pub name: Arc<str>,
    pub kind: SymbolKind,
}

impl Symbol {
    pub fn var(name: &str) -> Self {
        Symbol {
            name: name.into(),
            kind: SymbolKind::Var,
        }
    }
    pub fn param(name: &str) -> Self {
        Symbol {
            name: name.into(),
            kind: SymbolKind::Param,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    /// Exact rational constant.
    Rat(Rat),
    /// The imaginary unit.
    Imag,
    Sym(Symbol),
    Sum(Vec<SymExpr>),
    Prod(Vec<SymExpr>),
    Pow(SymExpr, i64),
    Sin(SymExpr),
    Cos(SymExpr),
    Exp(SymExpr),
    Log(SymExpr),
}

/// Immutable, cheaply clonable symbolic expression.
///
/// Public constructors keep expressions in normal form (flattened sums and
/// products, folded constants, merged like terms), so structural equality is
/// meaningful for simple identities while numeric identity testing is left
/// to [`crate::expr::equiv`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SymExpr(pub(crate) Arc<Node>);

impl SymExpr {
    pub(crate) fn raw(node: Node) -> Self {
        SymExpr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn rat(num: i128, den: i128) -> Self {
        SymExpr::raw(Node::Rat(Rat::new(num, den)))
    }

    pub fn int(k: i128) -> Self {
        SymExpr::raw(Node::Rat(Rat::from_integer(k)))
    }

    pub fn zero() -> Self {
        SymExpr::int(0)
    }

    pub fn one() -> Self {
        SymExpr::int(1)
    }

    pub fn i() -> Self {
        SymExpr::raw(Node::Imag)
    }

    pub fn var(name: &str) -> Self {
        SymExpr::raw(Node::Sym(Symbol::var(name)))
    }

    pub fn param(name: &str) -> Self {
        SymExpr::raw(Node::Sym(Symbol::param(name)))
    }

    pub fn sum(terms: Vec<SymExpr>) -> Self {
        crate::expr::normalize::norm_sum(terms)
    }

    pub fn prod(factors: Vec<SymExpr>) -> Self {
        crate::expr::normalize::norm_prod(factors)
    }

    pub fn pow(&self, k: i64) -> Self {
        crate::expr::normalize::norm_pow(self.clone(), k)
    }

    pub fn inv(&self) -> Self {
        self.pow(-1)
    }

    pub fn sin(&self) -> Self {
        crate::expr::normalize::norm_fun(Fun::Sin, self.clone())
    }

    pub fn cos(&self) -> Self {
        crate::expr::normalize::norm_fun(Fun::Cos, self.clone())
    }

    pub fn exp(&self) -> Self {
        crate::expr::normalize::norm_fun(Fun::Exp, self.clone())
    }

    pub fn log(&self) -> Self {
        crate::expr::normalize::norm_fun(Fun::Log, self.clone())
    }

    /// Square root of a positive expression, encoded as exp(log(u)/2).
    pub fn sqrt_pos(&self) -> Self {
        (self.log() * SymExpr::rat(1, 2)).exp()
    }

    /// |u| for real nonzero u, encoded as exp(log(u^2)/2).
    pub fn abs_real(&self) -> Self {
        (self.pow(2).log() * SymExpr::rat(1, 2)).exp()
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.node(), Node::Rat(r) if r.numer() == &0)
    }

    pub fn is_one(&self) -> bool {
        matches!(self.node(), Node::Rat(r) if r == &Rat::from_integer(1))
    }

    pub fn as_rat(&self) -> Option<Rat> {
        match self.node() {
            Node::Rat(r) => Some(*r),
            _ => None,
        }
    }

    /// Full recursive renormalization. Constructors already keep results
    /// normal, so this matters only for trees built by the parser or by
    /// hand; it is idempotent.
    pub fn normalize(&self) -> SymExpr {
        match self.node() {
            Node::Rat(_) | Node::Imag | Node::Sym(_) => self.clone(),
            Node::Sum(ts) => SymExpr::sum(ts.iter().map(|t| t.normalize()).collect()),
            Node::Prod(fs) => SymExpr::prod(fs.iter().map(|f| f.normalize()).collect()),
            Node::Pow(b, k) => b.normalize().pow(*k),
            Node::Sin(u) => u.normalize().sin(),
            Node::Cos(u) => u.normalize().cos(),
            Node::Exp(u) => u.normalize().exp(),
            Node::Log(u) => u.normalize().log(),
        }
    }

    /// Distribute products over sums (and small positive powers of sums),
    /// normalizing the result. Used where a canonical polynomial-like form
    /// is wanted for exact structural comparison; not part of `normalize`,
    /// which never expands.
    pub fn expand(&self) -> SymExpr {
        match self.node() {
            Node::Rat(_) | Node::Imag | Node::Sym(_) => self.clone(),
            Node::Sum(ts) => SymExpr::sum(ts.iter().map(|t| t.expand()).collect()),
            Node::Prod(fs) => {
                let expanded: Vec<SymExpr> = fs.iter().map(|f| f.expand()).collect();
                let mut acc: Vec<SymExpr> = vec![SymExpr::one()];
                for f in expanded {
                    let summands: Vec<SymExpr> = match f.node() {
                        Node::Sum(ts) => ts.clone(),
                        _ => vec![f.clone()],
                    };
                    let mut next = Vec::with_capacity(acc.len() * summands.len());
                    for a in &acc {
                        for s in &summands {
                            next.push(a.clone() * s.clone());
                        }
                    }
                    acc = next;
                }
                SymExpr::sum(acc)
            }
            Node::Pow(b, k) => {
                let be = b.expand();
                if (2..=4).contains(k) && matches!(be.node(), Node::Sum(_)) {
                    let mut acc = be.clone();
                    for _ in 1..*k {
                        acc = (acc * be.clone()).expand();
                    }
                    acc
                } else {
                    be.pow(*k)
                }
            }
            Node::Sin(u) => u.expand().sin(),
            Node::Cos(u) => u.expand().cos(),
            Node::Exp(u) => u.expand().exp(),
            Node::Log(u) => u.expand().log(),
        }
    }

    /// Exact partial derivative with respect to the coordinate variable
    /// `var`. Parameters differentiate to zero.
    pub fn diff(&self, var: &str) -> SymExpr {
        match self.node() {
            Node::Rat(_) | Node::Imag => SymExpr::zero(),
            Node::Sym(s) => {
                if s.kind == SymbolKind::Var && &*s.name == var {
                    SymExpr::one()
                } else {
                    SymExpr::zero()
                }
            }
            Node::Sum(ts) => SymExpr::sum(ts.iter().map(|t| t.diff(var)).collect()),
            Node::Prod(fs) => {
                let mut terms = Vec::with_capacity(fs.len());
                for (k, f) in fs.iter().enumerate() {
                    let dk = f.diff(var);
                    if dk.is_zero() {
                        continue;
                    }
                    let mut factors: Vec<SymExpr> = fs
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != k)
                        .map(|(_, g)| g.clone())
                        .collect();
                    factors.push(dk);
                    terms.push(SymExpr::prod(factors));
                }
                SymExpr::sum(terms)
            }
            Node::Pow(b, k) => {
                let db = b.diff(var);
                if db.is_zero() {
                    return SymExpr::zero();
                }
                SymExpr::prod(vec![SymExpr::int(*k as i128), b.pow(k - 1), db])
            }
            Node::Sin(u) => u.cos() * u.diff(var),
            Node::Cos(u) => SymExpr::int(-1) * u.sin() * u.diff(var),
            Node::Exp(u) => self.clone() * u.diff(var),
            Node::Log(u) => u.inv() * u.diff(var),
        }
    }

    /// Numeric evaluation at a full binding of the free symbols.
    pub fn eval(&self, b: &Binding) -> Result<Complex64, ExprError> {
        match self.node() {
            Node::Rat(r) => Ok(Complex64::new(rat_to_f64(*r), 0.0)),
            Node::Imag => Ok(Complex64::new(0.0, 1.0)),
            Node::Sym(s) => b
                .get(&s.name)
                .ok_or_else(|| ExprError::UnboundSymbol(s.name.to_string())),
            Node::Sum(ts) => {
                let mut acc = Complex64::new(0.0, 0.0);
                for t in ts {
                    acc += t.eval(b)?;
                }
                Ok(acc)
            }
            Node::Prod(fs) => {
                let mut acc = Complex64::new(1.0, 0.0);
                for f in fs {
                    acc *= f.eval(b)?;
                }
                Ok(acc)
            }
            Node::Pow(base, k) => {
                let z = base.eval(b)?;
                if z.norm() == 0.0 && *k < 0 {
                    return Err(ExprError::ZeroToNegativePower);
                }
                Ok(z.powi(*k as i32))
            }
            Node::Sin(u) => Ok(u.eval(b)?.sin()),
            Node::Cos(u) => Ok(u.eval(b)?.cos()),
            Node::Exp(u) => Ok(u.eval(b)?.exp()),
            Node::Log(u) => {
                let z = u.eval(b)?;
                if z.norm() == 0.0 {
                    return Err(ExprError::LogOfZero);
                }
                Ok(z.ln())
            }
        }
    }

    /// Replace symbols by expressions (matching on name and kind).
    pub fn subst(&self, map: &BTreeMap<Symbol, SymExpr>) -> SymExpr {
        match self.node() {
            Node::Rat(_) | Node::Imag => self.clone(),
            Node::Sym(s) => map.get(s).cloned().unwrap_or_else(|| self.clone()),
            Node::Sum(ts) => SymExpr::sum(ts.iter().map(|t| t.subst(map)).collect()),
            Node::Prod(fs) => SymExpr::prod(fs.iter().map(|f| f.subst(map)).collect()),
            Node::Pow(b, k) => b.subst(map).pow(*k),
            Node::Sin(u) => u.subst(map).sin(),
            Node::Cos(u) => u.subst(map).cos(),
            Node::Exp(u) => u.subst(map).exp(),
            Node::Log(u) => u.subst(map).log(),
        }
    }

    /// Substitute a single variable by an expression.
    pub fn subst_var(&self, name: &str, value: &SymExpr) -> SymExpr {
        let mut m = BTreeMap::new();
        m.insert(Symbol::var(name), value.clone());
        self.subst(&m)
    }

    pub fn free_symbols(&self) -> BTreeSet<Symbol> {
        let mut acc = BTreeSet::new();
        self.collect_symbols(&mut acc);
        acc
    }

    fn collect_symbols(&self, acc: &mut BTreeSet<Symbol>) {
        match self.node() {
            Node::Rat(_) | Node::Imag => {}
            Node::Sym(s) => {
                acc.insert(s.clone());
            }
            Node::Sum(ts) => ts.iter().for_each(|t| t.collect_symbols(acc)),
            Node::Prod(fs) => fs.iter().for_each(|f| f.collect_symbols(acc)),
            Node::Pow(b, _) => b.collect_symbols(acc),
            Node::Sin(u) | Node::Cos(u) | Node::Exp(u) | Node::Log(u) => u.collect_symbols(acc),
        }
    }

    /// Depends on `name` (any kind)?
    pub fn depends_on(&self, name: &str) -> bool {
        self.free_symbols().iter().any(|s| &*s.name == name)
    }

    /// Node count, used in tests to watch expression growth.
    pub fn size(&self) -> usize {
        match self.node() {
            Node::Rat(_) | Node::Imag | Node::Sym(_) => 1,
            Node::Sum(ts) => 1 + ts.iter().map(|t| t.size()).sum::<usize>(),
            Node::Prod(fs) => 1 + fs.iter().map(|f| f.size()).sum::<usize>(),
            Node::Pow(b, _) => 1 + b.size(),
            Node::Sin(u) | Node::Cos(u) | Node::Exp(u) | Node::Log(u) => 1 + u.size(),
        }
    }
}

pub(crate) enum Fun {
    Sin,
    Cos,
    Exp,
    Log,
}

pub fn rat_to_f64(r: Rat) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Map from symbol names to complex values. Lookup ignores the Var/Param
/// distinction: a name denotes one number.
#[derive(Debug, Clone, Default)]
pub struct Binding {
    map: BTreeMap<Arc<str>, Complex64>,
}

impl Binding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, name: &str, v: impl Into<Complex64>) -> &mut Self {
        self.map.insert(name.into(), v.into());
        self
    }

    pub fn with(mut self, name: &str, v: f64) -> Self {
        self.set(name, Complex64::new(v, 0.0));
        self
    }

    pub fn get(&self, name: &str) -> Option<Complex64> {
        self.map.get(name).copied()
    }

    pub fn names(&self) -> impl Iterator<Item = &Arc<str>> {
        self.map.keys()
    }

    pub fn from_pairs(pairs: &[(&str, f64)]) -> Self {
        let mut b = Binding::new();
        for (n, v) in pairs {
            b.set(n, Complex64::new(*v, 0.0));
        }
        b
    }

    pub fn merged(&self, other: &Binding) -> Binding {
        let mut b = self.clone();
        for (k, v) in &other.map {
            b.map.insert(k.clone(), *v);
        }
        b
    }
}

impl std::ops::Add for SymExpr {
    type Output = SymExpr;
    fn add(self, rhs: SymExpr) -> SymExpr {
        SymExpr::sum(vec![self, rhs])
    }
}

impl std::ops::Sub for SymExpr {
    type Output = SymExpr;
    fn sub(self, rhs: SymExpr) -> SymExpr {
        SymExpr::sum(vec![self, SymExpr::int(-1) * rhs])
    }
}

impl std::ops::Mul for SymExpr {
    type Output = SymExpr;
    fn mul(self, rhs: SymExpr) -> SymExpr {
        SymExpr::prod(vec![self, rhs])
    }
}

impl std::ops::Neg for SymExpr {
    type Output = SymExpr;
    fn neg(self) -> SymExpr {
        SymExpr::int(-1) * self
    }
}

impl fmt::Display for SymExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Rat(r) => {
                if r.denom() == &1 {
                    write!(f, "{}", r.numer())
                } else {
                    write!(f, "{}/{}", r.numer(), r.denom())
                }
            }
            Node::Imag => write!(f, "i"),
            Node::Sym(s) => write!(f, "{}", s.name),
            Node::Sum(ts) => {
                write!(f, "(+")?;
                for t in ts {
                    write!(f, " {t}")?;
                }
                write!(f, ")")
            }
            Node::Prod(fs) => {
                write!(f, "(*")?;
                for x in fs {
                    write!(f, " {x}")?;
                }
                write!(f, ")")
            }
            Node::Pow(b, k) => write!(f, "(^ {b} {k})"),
            Node::Sin(u) => write!(f, "(sin {u})"),
            Node::Cos(u) => write!(f, "(cos {u})"),
            Node::Exp(u) => write!(f, "(exp {u})"),
            Node::Log(u) => write!(f, "(log {u})"),
        }
    }
}
