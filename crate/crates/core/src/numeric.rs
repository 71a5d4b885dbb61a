//! Small dense numeric kernels: f64 rank/solve/inverse, exact rational
//! elimination, finite-difference stencils, and 1D quadrature.

use num_complex::Complex64;

use crate::expr::Rat;

/// Rank by Gaussian elimination with partial pivoting; entries below
/// `threshold * max_abs` count as zero.
pub fn rank_f64(matrix: &[Vec<f64>], threshold: f64) -> usize {
    let rows = matrix.len();
    if rows == 0 {
        return 0;
    }
    let cols = matrix[0].len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let scale = a
        .iter()
        .flat_map(|r| r.iter().map(|x| x.abs()))
        .fold(0.0f64, f64::max)
        .max(1.0);
    let cut = threshold * scale;
    let mut rank = 0;
    let mut row = 0;
    for col in 0..cols {
        let (pivot, pval) = (row..rows)
            .map(|r| (r, a[r][col].abs()))
            .fold((row, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pval <= cut {
            continue;
        }
        a.swap(row, pivot);
        for r in 0..rows {
            if r != row {
                let f = a[r][col] / a[row][col];
                for c in col..cols {
                    a[r][c] -= f * a[row][c];
                }
            }
        }
        rank += 1;
        row += 1;
        if row == rows {
            break;
        }
    }
    rank
}

/// Solve A x = b for square A (partial pivoting). Returns None when singular.
pub fn solve_f64(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let mut r = row.clone();
            r.push(*rhs);
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&r1, &r2| m[r1][col].abs().total_cmp(&m[r2][col].abs()))?;
        if m[pivot][col].abs() < 1e-13 {
            return None;
        }
        m.swap(col, pivot);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..=n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    Some((0..n).map(|r| m[r][n] / m[r][r]).collect())
}

/// Inverse of a square f64 matrix; None when singular.
pub fn invert_f64(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        cols.push(solve_f64(a, &e)?);
    }
    let mut inv = vec![vec![0.0; n]; n];
    for (j, col) in cols.iter().enumerate() {
        for i in 0..n {
            inv[i][j] = col[i];
        }
    }
    Some(inv)
}

/// Express `target` in the span of `rows` (exact rational elimination).
/// Returns the coefficients, or None when the system is inconsistent.
pub fn rational_in_span(rows: &[Vec<Rat>], target: &[Rat]) -> Option<Vec<Rat>> {
    let k = rows.len();
    let n = target.len();
    // Columns are the spanning rows; solve the overdetermined system exactly.
    let mut m: Vec<Vec<Rat>> = (0..n)
        .map(|i| {
            let mut r: Vec<Rat> = rows.iter().map(|row| row[i]).collect();
            r.push(target[i]);
            r
        })
        .collect();
    let zero = Rat::from_integer(0);
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut row = 0;
    for col in 0..k {
        let Some(p) = (row..n).find(|&r| m[r][col] != zero) else {
            continue;
        };
        m.swap(row, p);
        for r in 0..n {
            if r != row && m[r][col] != zero {
                let f = m[r][col] / m[row][col];
                for c in col..=k {
                    let sub = f * m[row][c];
                    m[r][c] = m[r][c] - sub;
                }
            }
        }
        pivots.push((row, col));
        row += 1;
        if row == n {
            break;
        }
    }
    // Any nonzero residual row means the target leaves the span.
    for r in row..n {
        if m[r][k] != zero {
            return None;
        }
    }
    let mut coeffs = vec![zero; k];
    for (r, c) in pivots {
        coeffs[c] = m[r][k] / m[r][c];
    }
    Some(coeffs)
}

/// Fourth-order central first derivative of a scalar function.
pub fn fd_derivative<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

/// Fourth-order first-derivative stencil on complex samples.
pub fn fd1_c64(
    fm2: Complex64,
    fm1: Complex64,
    fp1: Complex64,
    fp2: Complex64,
    h: f64,
) -> Complex64 {
    (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h)
}

/// Fourth-order second-derivative stencil on complex samples.
pub fn fd2_c64(
    fm2: Complex64,
    fm1: Complex64,
    f0: Complex64,
    fp1: Complex64,
    fp2: Complex64,
    h: f64,
) -> Complex64 {
    (-fp2 + 16.0 * fp1 - 30.0 * f0 + 16.0 * fm1 - fm2) / (12.0 * h * h)
}

/// Composite Simpson rule over [a, b]; n is rounded up to even.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// Trapezoid rule on a periodic interval [a, b) sampled at n points
/// (spectrally accurate for smooth periodic integrands).
pub fn periodic_trapezoid<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    (0..n).map(|k| f(a + k as f64 * h)).sum::<f64>() * h
}
