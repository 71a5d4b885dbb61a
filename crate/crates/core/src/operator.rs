//! Linear differential operators with symbolic coefficients, stored as a
//! map from derivative multi-indices to coefficient expressions.

use std::collections::BTreeMap;

use crate::expr::SymExpr;

#[derive(Debug, Clone)]
pub struct DiffOp {
    pub vars: Vec<String>,
    /// multi-degree (one entry per var) -> coefficient
    terms: BTreeMap<Vec<u8>, SymExpr>,
}

impl DiffOp {
    pub fn zero(vars: Vec<String>) -> Self {
        DiffOp {
            vars,
            terms: BTreeMap::new(),
        }
    }

    /// Multiplication operator by `c`.
    pub fn scalar(vars: Vec<String>, c: SymExpr) -> Self {
        let mut op = DiffOp::zero(vars);
        op.add_term(vec![0; op.vars.len()], c);
        op
    }

    /// First-order operator sum_mu coeffs[mu] d/dvar_mu + zeroth.
    pub fn first_order(vars: Vec<String>, coeffs: &[SymExpr], zeroth: SymExpr) -> Self {
        let n = vars.len();
        let mut op = DiffOp::zero(vars);
        for (mu, c) in coeffs.iter().enumerate() {
            let mut idx = vec![0u8; n];
            idx[mu] = 1;
            op.add_term(idx, c.clone());
        }
        op.add_term(vec![0; n], zeroth);
        op
    }

    pub fn add_term(&mut self, idx: Vec<u8>, coeff: SymExpr) {
        if coeff.is_zero() {
            return;
        }
        let entry = self.terms.entry(idx).or_insert_with(SymExpr::zero);
        *entry = entry.clone() + coeff;
        if entry.is_zero() {
            // keep the map clean so iteration stays small
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u8>, &SymExpr)> {
        self.terms.iter().filter(|(_, c)| !c.is_zero())
    }

    pub fn coefficient(&self, idx: &[u8]) -> SymExpr {
        self.terms.get(idx).cloned().unwrap_or_else(SymExpr::zero)
    }

    pub fn order(&self) -> usize {
        self.terms()
            .map(|(idx, _)| idx.iter().map(|k| *k as usize).sum())
            .max()
            .unwrap_or(0)
    }

    fn d_multi(&self, f: &SymExpr, idx: &[u8]) -> SymExpr {
        let mut out = f.clone();
        for (mu, k) in idx.iter().enumerate() {
            for _ in 0..*k {
                out = out.diff(&self.vars[mu]);
            }
        }
        out
    }

    /// Apply to a symbolic field.
    pub fn apply(&self, f: &SymExpr) -> SymExpr {
        SymExpr::sum(
            self.terms()
                .map(|(idx, c)| c.clone() * self.d_multi(f, idx))
                .collect(),
        )
    }

    pub fn add(&self, other: &DiffOp) -> DiffOp {
        assert_eq!(self.vars, other.vars);
        let mut out = self.clone();
        for (idx, c) in other.terms() {
            out.add_term(idx.clone(), c.clone());
        }
        out
    }

    pub fn scale(&self, c: &SymExpr) -> DiffOp {
        let mut out = DiffOp::zero(self.vars.clone());
        for (idx, coeff) in self.terms() {
            out.add_term(idx.clone(), c.clone() * coeff.clone());
        }
        out
    }

    /// Operator composition self ∘ other via the Leibniz rule:
    /// (a d^α)(b d^β) = a Σ_{γ≤α} C(α,γ) d^{α-γ}(b) d^{γ+β}.
    pub fn compose(&self, other: &DiffOp) -> DiffOp {
        assert_eq!(self.vars, other.vars);
        let n = self.vars.len();
        let mut out = DiffOp::zero(self.vars.clone());
        for (alpha, a) in self.terms() {
            for (beta, b) in other.terms() {
                for gamma in sub_multi_indices(alpha) {
                    let mut binom = 1i128;
                    let mut rest = vec![0u8; n];
                    let mut shifted = vec![0u8; n];
                    for mu in 0..n {
                        binom *= binomial(alpha[mu], gamma[mu]);
                        rest[mu] = alpha[mu] - gamma[mu];
                        shifted[mu] = gamma[mu] + beta[mu];
                    }
                    let db = self.d_multi(b, &rest);
                    if db.is_zero() {
                        continue;
                    }
                    out.add_term(shifted, SymExpr::int(binom) * a.clone() * db);
                }
            }
        }
        out
    }

    /// Anticommutator average (self∘other + other∘self)/2.
    pub fn sym_compose(&self, other: &DiffOp) -> DiffOp {
        self.compose(other)
            .add(&other.compose(self))
            .scale(&SymExpr::rat(1, 2))
    }
}

/// Substitute operators for the dual coordinates of a polynomial, with the
/// symmetrized (Weyl) ordering: each monomial f_{a1}...f_{ad} becomes the
/// average of ops[a1]...ops[ad] over all orderings. Non-coordinate factors
/// multiply through as scalar coefficients.
pub fn substitute_symmetrized(poly: &SymExpr, ops: &[DiffOp], dual_names: &[String]) -> DiffOp {
    use crate::expr::Node;
    let vars = ops
        .first()
        .map(|op| op.vars.clone())
        .expect("need at least one operator");
    let mut total = DiffOp::zero(vars.clone());
    let terms: Vec<SymExpr> = match poly.node() {
        Node::Sum(ts) => ts.clone(),
        _ => vec![poly.clone()],
    };
    for term in terms {
        let factors: Vec<SymExpr> = match term.node() {
            Node::Prod(fs) => fs.clone(),
            _ => vec![term.clone()],
        };
        let mut coeff = SymExpr::one();
        let mut gens: Vec<usize> = Vec::new();
        for f in factors {
            let (base, exp) = match f.node() {
                Node::Pow(b, e) => (b.clone(), *e),
                _ => (f.clone(), 1),
            };
            let as_dual = match base.node() {
                Node::Sym(s) => dual_names.iter().position(|n| n == &*s.name),
                _ => None,
            };
            match as_dual {
                Some(idx) if exp > 0 => {
                    for _ in 0..exp {
                        gens.push(idx);
                    }
                }
                _ => coeff = coeff * f.clone(),
            }
        }
        let mono = symmetrized_product(ops, &vars, &gens);
        total = total.add(&mono.scale(&coeff));
    }
    total
}

fn symmetrized_product(ops: &[DiffOp], vars: &[String], gens: &[usize]) -> DiffOp {
    if gens.is_empty() {
        return DiffOp::scalar(vars.to_vec(), SymExpr::one());
    }
    let perms = permutations(gens);
    let count = perms.len() as i128;
    let mut acc = DiffOp::zero(vars.to_vec());
    for p in perms {
        let mut op = ops[p[0]].clone();
        for g in &p[1..] {
            op = op.compose(&ops[*g]);
        }
        acc = acc.add(&op);
    }
    acc.scale(&SymExpr::rat(1, count))
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            let mut p = vec![head];
            p.append(&mut tail);
            out.push(p);
        }
    }
    out
}

fn binomial(n: u8, k: u8) -> i128 {
    let mut acc = 1i128;
    for j in 0..k {
        acc = acc * (n as i128 - j as i128) / (j as i128 + 1);
    }
    acc
}

fn sub_multi_indices(alpha: &[u8]) -> Vec<Vec<u8>> {
    let mut out = vec![vec![]];
    for &a in alpha {
        let mut next = Vec::with_capacity(out.len() * (a as usize + 1));
        for prefix in &out {
            for g in 0..=a {
                let mut p = prefix.clone();
                p.push(g);
                next.push(p);
            }
        }
        out = next;
    }
    out
}
