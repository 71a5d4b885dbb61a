//! Symbolic dense matrix helpers (dimensions here are 2..=4, so cofactor
//! expansion is fine).

use crate::expr::SymExpr;

pub type SymMat = Vec<Vec<SymExpr>>;

pub fn identity(n: usize) -> SymMat {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        SymExpr::one()
                    } else {
                        SymExpr::zero()
                    }
                })
                .collect()
        })
        .collect()
}

pub fn transpose(m: &SymMat) -> SymMat {
    let n = m.len();
    let c = m[0].len();
    (0..c)
        .map(|j| (0..n).map(|i| m[i][j].clone()).collect())
        .collect()
}

pub fn mat_mul(a: &SymMat, b: &SymMat) -> SymMat {
    let n = a.len();
    let k = b.len();
    let c = b[0].len();
    (0..n)
        .map(|i| {
            (0..c)
                .map(|j| SymExpr::sum((0..k).map(|t| a[i][t].clone() * b[t][j].clone()).collect()))
                .collect()
        })
        .collect()
}

fn minor(m: &SymMat, row: usize, col: usize) -> SymMat {
    m.iter()
        .enumerate()
        .filter(|(i, _)| *i != row)
        .map(|(_, r)| {
            r.iter()
                .enumerate()
                .filter(|(j, _)| *j != col)
                .map(|(_, e)| e.clone())
                .collect()
        })
        .collect()
}

pub fn det(m: &SymMat) -> SymExpr {
    let n = m.len();
    match n {
        0 => SymExpr::one(),
        1 => m[0][0].clone(),
        2 => m[0][0].clone() * m[1][1].clone() - m[0][1].clone() * m[1][0].clone(),
        _ => {
            let mut terms = Vec::with_capacity(n);
            for j in 0..n {
                if m[0][j].is_zero() {
                    continue;
                }
                let sign = if j % 2 == 0 {
                    SymExpr::one()
                } else {
                    SymExpr::int(-1)
                };
                terms.push(sign * m[0][j].clone() * det(&minor(m, 0, j)));
            }
            SymExpr::sum(terms)
        }
    }
}

/// Inverse via the adjugate; the determinant enters as an integer power
/// node, so the result stays inside the expression language. Returns the
/// inverse together with the determinant.
pub fn invert(m: &SymMat) -> (SymMat, SymExpr) {
    let n = m.len();
    let d = det(m);
    let dinv = d.inv();
    let mut inv = vec![vec![SymExpr::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            let sign = if (i + j) % 2 == 0 {
                SymExpr::one()
            } else {
                SymExpr::int(-1)
            };
            // adjugate transposes the cofactor matrix
            inv[j][i] = sign * det(&minor(m, i, j)) * dinv.clone();
        }
    }
    (inv, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{equiv_bool, EquivCfg, SampleBox, SymExpr};

    #[test]
    fn inverse_of_symbolic_matrix() {
        let x = SymExpr::var("x");
        let m = vec![vec![x.cos(), x.sin()], vec![-x.sin(), x.cos()]];
        let (inv, d) = invert(&m);
        assert!(d.is_one(), "rotation determinant should fold to 1, got {d}");
        let prod = mat_mul(&m, &inv);
        let sbox = SampleBox::new();
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j {
                    SymExpr::one()
                } else {
                    SymExpr::zero()
                };
                assert!(equiv_bool(&prod[i][j], &expect, &sbox, EquivCfg::default()));
            }
        }
    }
}
