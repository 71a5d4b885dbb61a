//! Randomized identity testing.
//!
//! Two expressions are accepted as equivalent when they agree at every
//! sampled binding to the requested tolerance; a failure returns the witness
//! binding. Samples that land too close to a singularity (a small
//! denominator base or log argument) are rejected and redrawn, so sampling
//! boxes only need to cover the symbols, not dodge poles.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use rand::RngExt;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::node::{Binding, Node, SymExpr, Symbol};
use crate::exec;

/// Per-symbol real sampling ranges with a default for unlisted names.
#[derive(Debug, Clone)]
pub struct SampleBox {
    ranges: BTreeMap<String, (f64, f64)>,
    default_range: (f64, f64),
}

impl Default for SampleBox {
    fn default() -> Self {
        SampleBox {
            ranges: BTreeMap::new(),
            default_range: (-2.0, 2.0),
        }
    }
}

impl SampleBox {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn range(mut self, name: &str, lo: f64, hi: f64) -> Self {
        assert!(lo < hi, "empty sampling range for {name}");
        self.ranges.insert(name.to_string(), (lo, hi));
        self
    }

    pub fn default_range(mut self, lo: f64, hi: f64) -> Self {
        assert!(lo < hi);
        self.default_range = (lo, hi);
        self
    }

    pub fn get(&self, name: &str) -> (f64, f64) {
        self.ranges.get(name).copied().unwrap_or(self.default_range)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EquivCfg {
    pub trials: usize,
    pub tol: f64,
    pub seed: u64,
    /// Minimum magnitude allowed for denominator bases and log arguments.
    pub guard: f64,
}

impl Default for EquivCfg {
    fn default() -> Self {
        EquivCfg {
            trials: 64,
            tol: 1e-10,
            seed: 0x5EED,
            guard: 1e-3,
        }
    }
}

impl EquivCfg {
    pub fn with_seed(seed: u64) -> Self {
        EquivCfg {
            seed,
            ..Default::default()
        }
    }
    pub fn trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }
    pub fn tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

#[derive(Debug, Clone)]
pub struct EquivWitness {
    pub binding: Binding,
    pub lhs: Complex64,
    pub rhs: Complex64,
}

impl std::fmt::Display for EquivWitness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "lhs = {:.6e}{:+.6e}i, rhs = {:.6e}{:+.6e}i, |diff| = {:.3e}",
            self.lhs.re,
            self.lhs.im,
            self.rhs.re,
            self.rhs.im,
            (self.lhs - self.rhs).norm()
        )
    }
}

enum GuardedErr {
    Trip,
    Unbound(String),
}

/// Evaluate while rejecting near-singular samples.
fn eval_guarded(e: &SymExpr, b: &Binding, guard: f64) -> Result<Complex64, GuardedErr> {
    match e.node() {
        Node::Rat(_) | Node::Imag => Ok(e.eval(b).unwrap()),
        Node::Sym(s) => b
            .get(&s.name)
            .ok_or_else(|| GuardedErr::Unbound(s.name.to_string())),
        Node::Sum(ts) => {
            let mut acc = Complex64::new(0.0, 0.0);
            for t in ts {
                acc += eval_guarded(t, b, guard)?;
            }
            Ok(acc)
        }
        Node::Prod(fs) => {
            let mut acc = Complex64::new(1.0, 0.0);
            for f in fs {
                acc *= eval_guarded(f, b, guard)?;
            }
            Ok(acc)
        }
        Node::Pow(base, k) => {
            let z = eval_guarded(base, b, guard)?;
            if *k < 0 && z.norm() < guard {
                return Err(GuardedErr::Trip);
            }
            Ok(z.powi(*k as i32))
        }
        Node::Sin(u) => Ok(eval_guarded(u, b, guard)?.sin()),
        Node::Cos(u) => Ok(eval_guarded(u, b, guard)?.cos()),
        Node::Exp(u) => Ok(eval_guarded(u, b, guard)?.exp()),
        Node::Log(u) => {
            let z = eval_guarded(u, b, guard)?;
            if z.norm() < guard {
                return Err(GuardedErr::Trip);
            }
            Ok(z.ln())
        }
    }
}

fn draw_binding(symbols: &BTreeSet<Symbol>, sbox: &SampleBox, rng: &mut ChaCha8Rng) -> Binding {
    let mut b = Binding::new();
    for s in symbols {
        let (lo, hi) = sbox.get(&s.name);
        let v: f64 = rng.random_range(lo..hi);
        b.set(&s.name, Complex64::new(v, 0.0));
    }
    b
}

/// Draw a binding for which all the given expressions evaluate clear of the
/// singularity guard. Panics if the box cannot produce one (caller error).
pub fn sample_admissible(
    exprs: &[&SymExpr],
    sbox: &SampleBox,
    rng: &mut ChaCha8Rng,
    guard: f64,
) -> Binding {
    let mut symbols = BTreeSet::new();
    for e in exprs {
        symbols.extend(e.free_symbols());
    }
    for _ in 0..200 {
        let b = draw_binding(&symbols, sbox, rng);
        let ok = exprs.iter().all(|e| match eval_guarded(e, &b, guard) {
            Ok(_) => true,
            Err(GuardedErr::Trip) => false,
            Err(GuardedErr::Unbound(n)) => panic!("sampling box left `{n}` unbound"),
        });
        if ok {
            return b;
        }
    }
    panic!("sampling box keeps hitting singularities; widen or shift the ranges");
}

/// Randomized check that `e1` and `e2` agree on the box:
/// |e1 - e2| <= tol * (1 + |e1|) at every sampled binding.
pub fn equiv(
    e1: &SymExpr,
    e2: &SymExpr,
    sbox: &SampleBox,
    cfg: EquivCfg,
) -> Result<(), Box<EquivWitness>> {
    assert!(
        cfg.trials >= 32,
        "identity testing needs at least 32 trials"
    );
    let results = exec::map_indexed(cfg.trials, |t| {
        let mut rng = ChaCha8Rng::seed_from_u64(
            cfg.seed
                .wrapping_add(0x9E3779B97F4A7C15u64.wrapping_mul(t as u64 + 1)),
        );
        let b = sample_admissible(&[e1, e2], sbox, &mut rng, cfg.guard);
        let v1 = e1.eval(&b).expect("admissible sample must evaluate");
        let v2 = e2.eval(&b).expect("admissible sample must evaluate");
        if (v1 - v2).norm() <= cfg.tol * (1.0 + v1.norm()) {
            None
        } else {
            Some(EquivWitness {
                binding: b,
                lhs: v1,
                rhs: v2,
            })
        }
    });
    for r in results {
        if let Some(w) = r {
            return Err(Box::new(w));
        }
    }
    Ok(())
}

/// True when the expressions are equivalent on the box; discards the witness.
pub fn equiv_bool(e1: &SymExpr, e2: &SymExpr, sbox: &SampleBox, cfg: EquivCfg) -> bool {
    equiv(e1, e2, sbox, cfg).is_ok()
}
