//! Normal form: flatten nested sums/products, fold constants, merge like
//! terms and repeated bases. No polynomial expansion and no trigonometric
//! rewriting beyond collapsing an exact `c*sin^2(u) + c*cos^2(u)` pair; the
//! engine is not a general simplifier.

use std::collections::BTreeMap;

use num_traits::Zero;

use super::node::{Fun, Node, Rat, SymExpr};

/// Complex rational coefficient carried by the term/factor combiners.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct CRat {
    re: Rat,
    im: Rat,
}

impl CRat {
    fn zero() -> Self {
        CRat {
            re: Rat::zero(),
            im: Rat::zero(),
        }
    }
    fn one() -> Self {
        CRat {
            re: Rat::from_integer(1),
            im: Rat::zero(),
        }
    }
    fn real(r: Rat) -> Self {
        CRat {
            re: r,
            im: Rat::zero(),
        }
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    fn add(&self, o: &CRat) -> CRat {
        CRat {
            re: self.re + o.re,
            im: self.im + o.im,
        }
    }
    fn mul(&self, o: &CRat) -> CRat {
        CRat {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }
    fn mul_i(&self) -> CRat {
        CRat {
            re: -self.im,
            im: self.re,
        }
    }
}

/// Split a normalized term into coefficient and the sorted non-constant part.
fn decompose(term: &SymExpr) -> (CRat, Vec<SymExpr>) {
    match term.node() {
        Node::Rat(r) => (CRat::real(*r), vec![]),
        Node::Imag => (
            CRat {
                re: Rat::zero(),
                im: Rat::from_integer(1),
            },
            vec![],
        ),
        Node::Prod(fs) => {
            let mut c = CRat::one();
            let mut key = Vec::with_capacity(fs.len());
            for f in fs {
                match f.node() {
                    Node::Rat(r) => c = c.mul(&CRat::real(*r)),
                    Node::Imag => c = c.mul_i(),
                    _ => key.push(f.clone()),
                }
            }
            (c, key)
        }
        _ => (CRat::one(), vec![term.clone()]),
    }
}

/// Rebuild `r * i^(with_i) * key` as a normalized term.
fn make_term(r: Rat, with_i: bool, key: &[SymExpr]) -> Option<SymExpr> {
    if r.is_zero() {
        return None;
    }
    let mut factors: Vec<SymExpr> = Vec::with_capacity(key.len() + 2);
    if r != Rat::from_integer(1) {
        factors.push(SymExpr::raw(Node::Rat(r)));
    }
    if with_i {
        factors.push(SymExpr::raw(Node::Imag));
    }
    factors.extend_from_slice(key);
    Some(match factors.len() {
        0 => SymExpr::one(),
        1 => factors.pop().unwrap(),
        _ => SymExpr::raw(Node::Prod(factors)),
    })
}

/// Replace the factor at `pos` (a sin^2) by the matching cos^2 and re-sort,
/// producing the partner key for the Pythagorean fold.
fn partner_key(key: &[SymExpr], pos: usize, cos_sq: SymExpr) -> Vec<SymExpr> {
    let mut k = key.to_vec();
    k[pos] = cos_sq;
    k.sort();
    k
}

fn pythagorean_fold(map: &mut BTreeMap<Vec<SymExpr>, CRat>) {
    loop {
        let mut action: Option<(Vec<SymExpr>, Vec<SymExpr>, Vec<SymExpr>, CRat)> = None;
        'outer: for (key, c) in map.iter() {
            if c.is_zero() {
                continue;
            }
            for (pos, f) in key.iter().enumerate() {
                if let Node::Pow(b, 2) = f.node() {
                    if let Node::Sin(u) = b.node() {
                        let cos_sq = SymExpr::raw(Node::Pow(u.cos(), 2));
                        let partner = partner_key(key, pos, cos_sq);
                        if let Some(c2) = map.get(&partner) {
                            if c2 == c {
                                let mut reduced = key.clone();
                                reduced.remove(pos);
                                action = Some((key.clone(), partner, reduced, *c));
                                break 'outer;
                            }
                        }
                    }
                }
            }
        }
        match action {
            None => return,
            Some((k1, k2, reduced, c)) => {
                map.remove(&k1);
                map.remove(&k2);
                let entry = map.entry(reduced).or_insert_with(CRat::zero);
                *entry = entry.add(&c);
            }
        }
    }
}

pub(crate) fn norm_sum(terms: Vec<SymExpr>) -> SymExpr {
    let mut map: BTreeMap<Vec<SymExpr>, CRat> = BTreeMap::new();
    let mut stack = terms;
    stack.reverse();
    while let Some(t) = stack.pop() {
        if let Node::Sum(inner) = t.node() {
            for x in inner.iter().rev() {
                stack.push(x.clone());
            }
            continue;
        }
        let (c, mut key) = decompose(&t);
        key.sort();
        let entry = map.entry(key).or_insert_with(CRat::zero);
        *entry = entry.add(&c);
    }
    pythagorean_fold(&mut map);

    let mut out: Vec<SymExpr> = Vec::new();
    for (key, c) in &map {
        if let Some(t) = make_term(c.re, false, key) {
            out.push(t);
        }
        if let Some(t) = make_term(c.im, true, key) {
            out.push(t);
        }
    }
    match out.len() {
        0 => SymExpr::zero(),
        1 => out.pop().unwrap(),
        _ => SymExpr::raw(Node::Sum(out)),
    }
}

pub(crate) fn norm_prod(factors: Vec<SymExpr>) -> SymExpr {
    let mut c = CRat::one();
    let mut bases: BTreeMap<SymExpr, i64> = BTreeMap::new();
    let mut exp_args: Vec<SymExpr> = Vec::new();
    let mut stack = factors;
    stack.reverse();
    while let Some(f) = stack.pop() {
        match f.node() {
            Node::Prod(inner) => {
                for x in inner.iter().rev() {
                    stack.push(x.clone());
                }
            }
            Node::Rat(r) => {
                if r.is_zero() {
                    return SymExpr::zero();
                }
                c = c.mul(&CRat::real(*r));
            }
            Node::Imag => c = c.mul_i(),
            // exp(u) exp(v) = exp(u + v), exact for complex arguments
            Node::Exp(u) => exp_args.push(u.clone()),
            Node::Pow(b, k) => {
                if let Node::Exp(u) = b.node() {
                    exp_args.push(SymExpr::int(*k as i128) * u.clone());
                } else {
                    *bases.entry(b.clone()).or_insert(0) += k;
                }
            }
            _ => *bases.entry(f.clone()).or_insert(0) += 1,
        }
    }
    if !exp_args.is_empty() {
        let merged = SymExpr::sum(exp_args).exp();
        if !merged.is_one() {
            *bases.entry(merged).or_insert(0) += 1;
        }
    }
    if c.is_zero() {
        return SymExpr::zero();
    }

    let mut factors: Vec<SymExpr> = Vec::new();
    // The coefficient is always pure real or pure imaginary here: it is a
    // product of rationals and powers of i.
    debug_assert!(c.re.is_zero() || c.im.is_zero());
    let (r, with_i) = if c.im.is_zero() {
        (c.re, false)
    } else {
        (c.im, true)
    };
    if r != Rat::from_integer(1) {
        factors.push(SymExpr::raw(Node::Rat(r)));
    }
    if with_i {
        factors.push(SymExpr::raw(Node::Imag));
    }
    for (b, k) in &bases {
        match *k {
            0 => {}
            1 => factors.push(b.clone()),
            k => factors.push(SymExpr::raw(Node::Pow(b.clone(), k))),
        }
    }
    match factors.len() {
        0 => SymExpr::one(),
        1 => factors.pop().unwrap(),
        _ => SymExpr::raw(Node::Prod(factors)),
    }
}

pub(crate) fn norm_pow(base: SymExpr, k: i64) -> SymExpr {
    if k == 0 {
        return SymExpr::one();
    }
    if k == 1 {
        return base;
    }
    match base.node() {
        Node::Rat(r) => {
            if r.is_zero() {
                if k > 0 {
                    return SymExpr::zero();
                }
                return SymExpr::raw(Node::Pow(base.clone(), k));
            }
            if k.unsigned_abs() <= 32 {
                return SymExpr::raw(Node::Rat(r.pow(k as i32)));
            }
            SymExpr::raw(Node::Pow(base.clone(), k))
        }
        Node::Imag => {
            let m = k.rem_euclid(4);
            match m {
                0 => SymExpr::one(),
                1 => SymExpr::i(),
                2 => SymExpr::int(-1),
                _ => SymExpr::prod(vec![SymExpr::int(-1), SymExpr::i()]),
            }
        }
        Node::Pow(u, a) => norm_pow(u.clone(), a * k),
        Node::Exp(u) => (SymExpr::int(k as i128) * u.clone()).exp(),
        Node::Prod(fs) => {
            let powed: Vec<SymExpr> = fs.iter().map(|f| norm_pow(f.clone(), k)).collect();
            norm_prod(powed)
        }
        _ => SymExpr::raw(Node::Pow(base, k)),
    }
}

pub(crate) fn norm_fun(fun: Fun, u: SymExpr) -> SymExpr {
    match fun {
        Fun::Sin => {
            if u.is_zero() {
                SymExpr::zero()
            } else {
                SymExpr::raw(Node::Sin(u))
            }
        }
        Fun::Cos => {
            if u.is_zero() {
                SymExpr::one()
            } else {
                SymExpr::raw(Node::Cos(u))
            }
        }
        Fun::Exp => {
            if u.is_zero() {
                SymExpr::one()
            } else {
                SymExpr::raw(Node::Exp(u))
            }
        }
        Fun::Log => {
            if u.is_one() {
                SymExpr::zero()
            } else {
                SymExpr::raw(Node::Log(u))
            }
        }
    }
}
