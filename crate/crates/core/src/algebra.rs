//! Lie algebra layer: structure constants with exact rational entries,
//! Jacobi validation, the Poisson-Lie bracket on the dual space, the algebra
//! index from generic rank sampling, Casimir verification, and the modular
//! covector of a subalgebra.

use num_traits::Zero;
use rand::RngExt;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::expr::{equiv, EquivCfg, Rat, SampleBox, SymExpr};
use crate::numeric::{rank_f64, rational_in_span};

#[derive(Debug, Error)]
pub enum AlgebraError {
    #[error("structure constants are not antisymmetric at C^{a}_{{{b}{c}}}")]
    NotAntisymmetric { a: usize, b: usize, c: usize },
    #[error("generic rank sampling disagrees across functionals ({0:?}); index is unstable")]
    RankUnstable(Vec<usize>),
    #[error("basis rows do not span a subalgebra: [h_{i}, h_{j}] leaves the span")]
    NotASubalgebra { i: usize, j: usize },
}

/// Structure constants C^a_{bc} of an n-dimensional Lie algebra, exact
/// rationals, validated antisymmetric on construction.
#[derive(Debug, Clone)]
pub struct LieAlgebraSpec {
    pub dim: usize,
    /// c[a][b][c] = C^a_{bc}, the e_a component of [e_b, e_c].
    c: Vec<Vec<Vec<Rat>>>,
    pub basis_labels: Vec<String>,
}

impl LieAlgebraSpec {
    pub fn new(dim: usize, nonzero: &[(usize, usize, usize, Rat)]) -> Result<Self, AlgebraError> {
        let mut c = vec![vec![vec![Rat::zero(); dim]; dim]; dim];
        for &(a, b, cc, v) in nonzero {
            c[a][b][cc] = c[a][b][cc] + v;
            c[a][cc][b] = c[a][cc][b] - v;
        }
        let labels = (1..=dim).map(|k| format!("e{k}")).collect();
        let spec = LieAlgebraSpec {
            dim,
            c,
            basis_labels: labels,
        };
        spec.check_antisymmetry()?;
        Ok(spec)
    }

    /// Build from an explicit full table (used by the file loader, where
    /// both orientations may be written out).
    pub fn from_full_table(dim: usize, table: Vec<Vec<Vec<Rat>>>) -> Result<Self, AlgebraError> {
        let labels = (1..=dim).map(|k| format!("e{k}")).collect();
        let spec = LieAlgebraSpec {
            dim,
            c: table,
            basis_labels: labels,
        };
        spec.check_antisymmetry()?;
        Ok(spec)
    }

    fn check_antisymmetry(&self) -> Result<(), AlgebraError> {
        for a in 0..self.dim {
            for b in 0..self.dim {
                for cc in 0..self.dim {
                    if self.c[a][b][cc] + self.c[a][cc][b] != Rat::zero() {
                        return Err(AlgebraError::NotAntisymmetric { a, b, c: cc });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn structure_constant(&self, a: usize, b: usize, c: usize) -> Rat {
        self.c[a][b][c]
    }

    /// Bracket of two coefficient vectors, exact.
    pub fn bracket(&self, x: &[Rat], y: &[Rat]) -> Vec<Rat> {
        let mut out = vec![Rat::zero(); self.dim];
        for a in 0..self.dim {
            let mut acc = Rat::zero();
            for b in 0..self.dim {
                if x[b].is_zero() {
                    continue;
                }
                for cc in 0..self.dim {
                    if !y[cc].is_zero() {
                        acc = acc + self.c[a][b][cc] * x[b] * y[cc];
                    }
                }
            }
            out[a] = acc;
        }
        out
    }

    /// Dual coordinate f_{a+1} as a variable expression.
    pub fn dual_coord(&self, a: usize) -> SymExpr {
        SymExpr::var(&format!("f{}", a + 1))
    }

    pub fn dual_coord_names(&self) -> Vec<String> {
        (1..=self.dim).map(|k| format!("f{k}")).collect()
    }
}

/// Max |Jacobi sum| over all index quadruples; exact in rationals, so a
/// valid algebra returns exactly zero.
pub fn jacobi_residual(algebra: &LieAlgebraSpec) -> f64 {
    let n = algebra.dim;
    let mut worst = Rat::zero();
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut sum = Rat::zero();
                    for e in 0..n {
                        sum = sum
                            + algebra.c[e][a][b] * algebra.c[d][e][c]
                            + algebra.c[e][b][c] * algebra.c[d][e][a]
                            + algebra.c[e][c][a] * algebra.c[d][e][b];
                    }
                    let mag = if sum < Rat::zero() { -sum } else { sum };
                    if mag > worst {
                        worst = mag;
                    }
                }
            }
        }
    }
    crate::expr::rat_to_f64(worst)
}

/// Poisson-Lie bracket {phi, psi}(f) = C^c_{ab} f_c dphi/df_a dpsi/df_b.
pub fn poisson_bracket(phi: &SymExpr, psi: &SymExpr, algebra: &LieAlgebraSpec) -> SymExpr {
    let n = algebra.dim;
    let names = algebra.dual_coord_names();
    let dphi: Vec<SymExpr> = names.iter().map(|v| phi.diff(v)).collect();
    let dpsi: Vec<SymExpr> = names.iter().map(|v| psi.diff(v)).collect();
    let mut terms = Vec::new();
    for a in 0..n {
        if dphi[a].is_zero() {
            continue;
        }
        for b in 0..n {
            if dpsi[b].is_zero() {
                continue;
            }
            for c in 0..n {
                let coeff = algebra.c[c][a][b];
                if coeff.is_zero() {
                    continue;
                }
                terms.push(SymExpr::prod(vec![
                    rat_expr(coeff),
                    algebra.dual_coord(c),
                    dphi[a].clone(),
                    dpsi[b].clone(),
                ]));
            }
        }
    }
    SymExpr::sum(terms)
}

fn rat_expr(r: Rat) -> SymExpr {
    SymExpr::rat(*r.numer(), *r.denom())
}

/// Index of the algebra: dim minus the generic rank of M_ab(f) = C^c_ab f_c,
/// sampled at independent random functionals which must agree.
pub fn index(algebra: &LieAlgebraSpec, seed: u64) -> Result<usize, AlgebraError> {
    let n = algebra.dim;
    let mut ranks = Vec::with_capacity(8);
    for s in 0..8u64 {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed ^ (0xD1B5_4A32_D192_ED03u64.wrapping_mul(s + 1)));
        let f: Vec<f64> = (0..n)
            .map(|_| {
                let mag: f64 = rng.random_range(0.5..2.0);
                let sign = if rng.random_range(0..2) == 0 {
                    -1.0
                } else {
                    1.0
                };
                mag * sign
            })
            .collect();
        let mut m = vec![vec![0.0; n]; n];
        for a in 0..n {
            for b in 0..n {
                let mut acc = 0.0;
                for c in 0..n {
                    acc += crate::expr::rat_to_f64(algebra.c[c][a][b]) * f[c];
                }
                m[a][b] = acc;
            }
        }
        ranks.push(rank_f64(&m, 1e-9));
    }
    if ranks.windows(2).any(|w| w[0] != w[1]) {
        return Err(AlgebraError::RankUnstable(ranks));
    }
    Ok(n - ranks[0])
}

/// A polynomial on the dual space claimed to Poisson-commute with all
/// coordinate functions.
#[derive(Debug, Clone)]
pub struct CasimirPolynomial {
    pub expr: SymExpr,
}

/// True iff {K, f_a} is identically zero for every dual coordinate.
pub fn is_casimir(
    k: &CasimirPolynomial,
    algebra: &LieAlgebraSpec,
    sbox: &SampleBox,
    cfg: EquivCfg,
) -> bool {
    for a in 0..algebra.dim {
        let br = poisson_bracket(&k.expr, &algebra.dual_coord(a), algebra);
        if equiv(&br, &SymExpr::zero(), sbox, cfg).is_err() {
            return false;
        }
    }
    true
}

/// Basis rows (rational coordinates in the ambient algebra) spanning a
/// subalgebra.
#[derive(Debug, Clone)]
pub struct SubalgebraSpec {
    pub rows: Vec<Vec<Rat>>,
}

impl SubalgebraSpec {
    pub fn new(rows: Vec<Vec<Rat>>) -> Self {
        SubalgebraSpec { rows }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Coefficients of [h_i, h_j] in the basis rows, or the closure failure.
    pub fn bracket_in_basis(
        &self,
        algebra: &LieAlgebraSpec,
        i: usize,
        j: usize,
    ) -> Result<Vec<Rat>, AlgebraError> {
        let br = algebra.bracket(&self.rows[i], &self.rows[j]);
        rational_in_span(&self.rows, &br).ok_or(AlgebraError::NotASubalgebra { i, j })
    }

    /// Validate [h, h] ⊆ h.
    pub fn check_closure(&self, algebra: &LieAlgebraSpec) -> Result<(), AlgebraError> {
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                self.bracket_in_basis(algebra, i, j)?;
            }
        }
        Ok(())
    }

    /// If every row is a distinct standard basis vector, return the axis
    /// indices (used by the chart-splitting machinery).
    pub fn axis_indices(&self) -> Option<Vec<usize>> {
        let mut idx = Vec::with_capacity(self.rows.len());
        for row in &self.rows {
            let mut hits = row
                .iter()
                .enumerate()
                .filter(|(_, v)| !v.is_zero())
                .collect::<Vec<_>>();
            if hits.len() != 1 {
                return None;
            }
            let (pos, v) = hits.pop().unwrap();
            if *v != Rat::from_integer(1) {
                return None;
            }
            if idx.contains(&pos) {
                return None;
            }
            idx.push(pos);
        }
        Some(idx)
    }
}

/// beta_a = -1/2 Tr(ad_{h_a}|_h) for each subalgebra basis row, exact.
pub fn beta_covector(
    algebra: &LieAlgebraSpec,
    h: &SubalgebraSpec,
) -> Result<Vec<Rat>, AlgebraError> {
    let k = h.dim();
    let mut beta = Vec::with_capacity(k);
    for i in 0..k {
        let mut trace = Rat::zero();
        for j in 0..k {
            let coeffs = h.bracket_in_basis(algebra, i, j)?;
            trace = trace + coeffs[j];
        }
        beta.push(-trace / Rat::from_integer(2));
    }
    Ok(beta)
}

#[cfg(test)]
pub(crate) mod test_algebras {
    use super::*;

    pub fn e2() -> LieAlgebraSpec {
        // [e1,e3] = -e2, [e2,e3] = e1
        LieAlgebraSpec::new(
            3,
            &[
                (1, 0, 2, Rat::from_integer(-1)),
                (0, 1, 2, Rat::from_integer(1)),
            ],
        )
        .unwrap()
    }

    pub fn solv4() -> LieAlgebraSpec {
        // [e2,e3] = e1, [e2,e4] = e2, [e3,e4] = -e3
        LieAlgebraSpec::new(
            4,
            &[
                (0, 1, 2, Rat::from_integer(1)),
                (1, 1, 3, Rat::from_integer(1)),
                (2, 2, 3, Rat::from_integer(-1)),
            ],
        )
        .unwrap()
    }

    pub fn abelian(n: usize) -> LieAlgebraSpec {
        LieAlgebraSpec::new(n, &[]).unwrap()
    }
}
