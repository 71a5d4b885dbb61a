//! Numerical engines for the reduced models: norm-conserving split-step
//! evolution on periodic or decayed-box grids, adaptive integration of the
//! stationary first-order reductions, the closed-form families, and
//! residual evaluation against the full equation on the group.

use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::exec;
use crate::expr::{sample_admissible, Binding, SampleBox, SymExpr};
use crate::numeric;
use crate::reduction::{FullPde, ReducedEquation, ReducedKind};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("grid must have at least 64 points, a power of two for spectral steps")]
    BadGrid,
    #[error("box data is not decayed at the boundary: |psi| = {0:.3e} at the edge")]
    BoundaryContamination(f64),
    #[error("integration span touches the degenerate point q = 0")]
    SingularSpan,
    #[error("equation shape unsupported here: {0}")]
    WrongEquation(String),
    #[error("coefficient `{0}` did not evaluate to a real constant")]
    BadCoefficient(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridDomain {
    Periodic { start: f64, len: f64 },
    Box { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct Grid1D {
    pub domain: GridDomain,
    pub n: usize,
}

impl Grid1D {
    pub fn new(domain: GridDomain, n: usize) -> Result<Self, SolverError> {
        if n < 64 || !n.is_power_of_two() {
            return Err(SolverError::BadGrid);
        }
        Ok(Grid1D { domain, n })
    }

    pub fn length(&self) -> f64 {
        match self.domain {
            GridDomain::Periodic { len, .. } => len,
            GridDomain::Box { lo, hi } => hi - lo,
        }
    }

    pub fn start(&self) -> f64 {
        match self.domain {
            GridDomain::Periodic { start, .. } => start,
            GridDomain::Box { lo, .. } => lo,
        }
    }

    pub fn spacing(&self) -> f64 {
        self.length() / self.n as f64
    }

    pub fn points(&self) -> Vec<f64> {
        let h = self.spacing();
        let s = self.start();
        (0..self.n).map(|k| s + k as f64 * h).collect()
    }

    /// Signed spectral wavenumbers 2 pi j / L.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let l = self.length();
        let n = self.n as i64;
        (0..n)
            .map(|j| {
                let jj = if j <= n / 2 { j } else { j - n };
                2.0 * std::f64::consts::PI * jj as f64 / l
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct GridSolution {
    pub grid: Grid1D,
    pub dt: f64,
    /// (time, field) pairs at the output cadence, final state included.
    pub snapshots: Vec<(f64, Vec<Complex64>)>,
    /// Discrete L2 norm after every step.
    pub norm_log: Vec<f64>,
    /// Spectral momentum after every step.
    pub momentum_log: Vec<f64>,
    pub warnings: Vec<String>,
}

impl GridSolution {
    pub fn final_state(&self) -> &[Complex64] {
        &self.snapshots.last().expect("at least one snapshot").1
    }

    pub fn norm_drift(&self) -> f64 {
        let first = self.norm_log.first().copied().unwrap_or(0.0);
        self.norm_log
            .iter()
            .map(|n| (n - first).abs())
            .fold(0.0, f64::max)
    }

    pub fn momentum_drift(&self) -> f64 {
        let first = self.momentum_log.first().copied().unwrap_or(0.0);
        self.momentum_log
            .iter()
            .map(|p| (p - first).abs())
            .fold(0.0, f64::max)
    }
}

fn real_constant(e: &SymExpr, var: &str, params: &Binding, what: &str) -> Result<f64, SolverError> {
    if !e.diff(var).is_zero() {
        return Err(SolverError::WrongEquation(format!(
            "{what} must not depend on the reduced coordinate"
        )));
    }
    let v = e
        .eval(params)
        .map_err(|_| SolverError::BadCoefficient(what.to_string()))?;
    if v.im.abs() > 1e-12 * (1.0 + v.re.abs()) {
        return Err(SolverError::BadCoefficient(what.to_string()));
    }
    Ok(v.re)
}

/// Strang-split evolution of a time-dependent reduced equation
/// i hbar psi_t = c2 psi'' + W(q) psi + nl |psi|^2 psi with constant c2:
/// half-step potential/nonlinear phase rotation, spectral kinetic step,
/// half-step rotation. Exactly norm-conserving per factor.
pub fn split_step_evolve(
    eq: &ReducedEquation,
    params: &Binding,
    psi0: &[Complex64],
    grid: &Grid1D,
    dt: f64,
    steps: usize,
    output_every: usize,
) -> Result<GridSolution, SolverError> {
    if eq.kind != ReducedKind::TimeDependent {
        return Err(SolverError::WrongEquation(
            "split-step needs the time-dependent kind".into(),
        ));
    }
    if !eq.c1.is_zero() {
        return Err(SolverError::WrongEquation(
            "split-step supports vanishing first-order drift only".into(),
        ));
    }
    if psi0.len() != grid.n {
        return Err(SolverError::BadGrid);
    }
    let c2 = real_constant(&eq.c2, &eq.var, params, "kinetic coefficient")?;
    let nl = real_constant(&eq.nl, &eq.var, params, "cubic coefficient")?;
    let hbar = params.get("hbar").expect("hbar must be bound").re;
    // Potential profile on the grid.
    let w_expr = eq.w0.clone() + eq.vext.clone();
    let points = grid.points();
    let w: Vec<f64> = points
        .iter()
        .map(|q| {
            let mut b = params.clone();
            b.set(&eq.var, Complex64::new(*q, 0.0));
            let v = w_expr
                .eval(&b)
                .map_err(|_| SolverError::BadCoefficient("potential".into()))?;
            if v.im.abs() > 1e-10 * (1.0 + v.re.abs()) {
                return Err(SolverError::BadCoefficient("potential".into()));
            }
            Ok(v.re)
        })
        .collect::<Result<_, _>>()?;

    if let GridDomain::Box { .. } = grid.domain {
        let edge = psi0[0].norm().max(psi0[grid.n - 1].norm());
        if edge > 1e-8 {
            return Err(SolverError::BoundaryContamination(edge));
        }
    }

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(grid.n);
    let ifft = planner.plan_fft_inverse(grid.n);
    let ks = grid.wavenumbers();
    // Kinetic multiplier exp(-i dt c2 (ik)^2 / hbar) = exp(i dt c2 k^2 / hbar).
    let kin_mul: Vec<Complex64> = ks
        .iter()
        .map(|k| (Complex64::i() * (dt * c2 * k * k / hbar)).exp())
        .collect();
    let k_max = ks.iter().cloned().fold(0.0, f64::max);
    let dx = grid.spacing();
    let inv_n = 1.0 / grid.n as f64;

    let mut psi: Vec<Complex64> = psi0.to_vec();
    let mut spec: Vec<Complex64> = psi.clone();
    let mut snapshots = vec![(0.0, psi.clone())];
    let mut norm_log = Vec::with_capacity(steps + 1);
    let mut momentum_log = Vec::with_capacity(steps + 1);
    let mut warnings: Vec<String> = Vec::new();
    let norm_of = |f: &[Complex64]| (f.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx).sqrt();
    norm_log.push(norm_of(&psi));

    let half_phase = |psi: &mut [Complex64], w: &[f64]| {
        for (z, wq) in psi.iter_mut().zip(w) {
            let arg = -(dt / 2.0) * (wq + nl * z.norm_sqr()) / hbar;
            *z *= Complex64::new(0.0, arg).exp();
        }
    };

    for step in 0..steps {
        half_phase(&mut psi, &w);
        spec.copy_from_slice(&psi);
        fft.process(&mut spec);
        // diagnostics in spectral space
        let total: f64 = spec.iter().map(|z| z.norm_sqr()).sum();
        let tail: f64 = spec
            .iter()
            .zip(&ks)
            .filter(|(_, k)| k.abs() >= 0.9 * k_max)
            .map(|(z, _)| z.norm_sqr())
            .sum();
        if warnings.is_empty() && total > 0.0 && tail / total > 1e-6 {
            warnings.push(format!(
                "spectral tail fraction {:.2e} exceeds 1e-6 at step {step}; refine the grid",
                tail / total
            ));
        }
        let momentum = if total > 0.0 {
            spec.iter()
                .zip(&ks)
                .map(|(z, k)| hbar * k * z.norm_sqr())
                .sum::<f64>()
                / total
        } else {
            0.0
        };
        for (z, mul) in spec.iter_mut().zip(&kin_mul) {
            *z *= mul;
        }
        ifft.process(&mut spec);
        for (z, s) in psi.iter_mut().zip(&spec) {
            *z = s * inv_n;
        }
        half_phase(&mut psi, &w);
        norm_log.push(norm_of(&psi));
        momentum_log.push(momentum);
        if (step + 1) % output_every == 0 || step + 1 == steps {
            snapshots.push(((step + 1) as f64 * dt, psi.clone()));
        }
    }

    Ok(GridSolution {
        grid: *grid,
        dt,
        snapshots,
        norm_log,
        momentum_log,
        warnings,
    })
}

/// Right-hand side and integration of the stationary first-order reduction
/// 0 = c1(q) psi' + (w0 + vext) psi + nl |psi|^2 psi - E psi.
pub fn ode_integrate(
    eq: &ReducedEquation,
    params: &Binding,
    psi_start: Complex64,
    q_start: f64,
    q_end: f64,
    outputs: usize,
    rtol: f64,
    atol: f64,
) -> Result<Vec<(f64, Complex64)>, SolverError> {
    if eq.kind != ReducedKind::Stationary {
        return Err(SolverError::WrongEquation(
            "integration needs the stationary kind".into(),
        ));
    }
    if !eq.c2.is_zero() {
        return Err(SolverError::WrongEquation(
            "stationary integration supports first-order reductions only".into(),
        ));
    }
    if q_start == 0.0 || q_end == 0.0 || (q_start < 0.0) != (q_end < 0.0) {
        return Err(SolverError::SingularSpan);
    }
    let e_val = params.get("E").expect("E must be bound");
    let var = eq.var.clone();
    let eval_at = |expr: &SymExpr, q: f64| -> Complex64 {
        let mut b = params.clone();
        b.set(&var, Complex64::new(q, 0.0));
        expr.eval(&b).expect("coefficients evaluate on the span")
    };
    let rhs = |q: f64, psi: Complex64| -> Complex64 {
        let c1 = eval_at(&eq.c1, q);
        let w = eval_at(&eq.w0, q) + eval_at(&eq.vext, q);
        let nl = eval_at(&eq.nl, q);
        (e_val * psi - w * psi - nl * psi.norm_sqr() * psi) / c1
    };

    let mut out = Vec::with_capacity(outputs + 1);
    let qs: Vec<f64> = (0..=outputs)
        .map(|k| q_start + (q_end - q_start) * k as f64 / outputs as f64)
        .collect();
    let mut y = psi_start;
    out.push((q_start, y));
    // Per-segment tolerances scaled so the whole-span accumulation stays
    // within the requested bounds.
    let seg_scale = outputs.max(1) as f64;
    for seg in qs.windows(2) {
        y = rk45(&rhs, seg[0], seg[1], y, rtol / seg_scale, atol / seg_scale)?;
        out.push((seg[1], y));
    }
    Ok(out)
}

/// Dormand-Prince 4(5) with adaptive step size for one complex unknown.
fn rk45(
    f: &dyn Fn(f64, Complex64) -> Complex64,
    t0: f64,
    t1: f64,
    y0: Complex64,
    rtol: f64,
    atol: f64,
) -> Result<Complex64, SolverError> {
    const A21: f64 = 1.0 / 5.0;
    const A31: f64 = 3.0 / 40.0;
    const A32: f64 = 9.0 / 40.0;
    const A41: f64 = 44.0 / 45.0;
    const A42: f64 = -56.0 / 15.0;
    const A43: f64 = 32.0 / 9.0;
    const A51: f64 = 19372.0 / 6561.0;
    const A52: f64 = -25360.0 / 2187.0;
    const A53: f64 = 64448.0 / 6561.0;
    const A54: f64 = -212.0 / 729.0;
    const A61: f64 = 9017.0 / 3168.0;
    const A62: f64 = -355.0 / 33.0;
    const A63: f64 = 46732.0 / 5247.0;
    const A64: f64 = 49.0 / 176.0;
    const A65: f64 = -5103.0 / 18656.0;
    const B1: f64 = 35.0 / 384.0;
    const B3: f64 = 500.0 / 1113.0;
    const B4: f64 = 125.0 / 192.0;
    const B5: f64 = -2187.0 / 6784.0;
    const B6: f64 = 11.0 / 84.0;
    const E1: f64 = 71.0 / 57600.0;
    const E3: f64 = -71.0 / 16695.0;
    const E4: f64 = 71.0 / 1920.0;
    const E5: f64 = -17253.0 / 339200.0;
    const E6: f64 = 22.0 / 525.0;
    const E7: f64 = -1.0 / 40.0;

    let span = t1 - t0;
    let mut t = t0;
    let mut y = y0;
    let mut h = span / 16.0;
    let mut steps = 0usize;
    while (t - t1).abs() > 1e-14 * (1.0 + t1.abs()) {
        if steps > 2_000_000 {
            return Err(SolverError::WrongEquation("step limit exceeded".into()));
        }
        steps += 1;
        if (span > 0.0 && t + h > t1) || (span < 0.0 && t + h < t1) {
            h = t1 - t;
        }
        let k1 = f(t, y);
        let k2 = f(t + A21 * h, y + h * A21 * k1);
        let k3 = f(t + 0.3 * h, y + h * (A31 * k1 + A32 * k2));
        let k4 = f(t + 0.8 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3));
        let k5 = f(
            t + 8.0 / 9.0 * h,
            y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4),
        );
        let k6 = f(
            t + h,
            y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5),
        );
        let y5 = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
        let k7 = f(t + h, y5);
        let err_c = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
        // Error-per-unit-step control: local errors summed over the span
        // stay within atol + rtol * |y|.
        let tol = (atol + rtol * y.norm().max(y5.norm())) * (h.abs() / span.abs()).max(1e-16);
        let err = err_c.norm() / tol;
        if err <= 1.0 {
            t += h;
            y = y5;
        }
        let factor = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
        h *= factor;
    }
    Ok(y)
}

/// Max |full residual| of a symbolic field over random sample points.
pub fn residual_full_max(
    full: &FullPde,
    psi: &SymExpr,
    params: &Binding,
    sbox: &SampleBox,
    points: usize,
    seed: u64,
) -> f64 {
    let linear = full.linear_residual(psi);
    exec::max_indexed(points, |t| {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(t as u64 + 1)));
        let b = sample_admissible(&[&linear, psi], sbox, &mut rng, 1e-3).merged(params);
        full.residual_at(psi, &linear, &b).norm()
    })
}

/// Fourth-order finite-difference residual of a symbolic candidate on a
/// grid; the time derivative (when present) uses five time levels at the
/// same spacing. Returns (max interior residual, spacing).
pub fn reduced_grid_residual(
    eq: &ReducedEquation,
    psi: &SymExpr,
    params: &Binding,
    grid: &Grid1D,
    t0: f64,
) -> (f64, f64) {
    let h = grid.spacing();
    let points = grid.points();
    let n = grid.n;
    let sample = |ti: f64| -> Vec<Complex64> {
        points
            .iter()
            .map(|q| {
                let mut b = params.clone();
                b.set(&eq.var, Complex64::new(*q, 0.0));
                b.set("t", Complex64::new(ti, 0.0));
                psi.eval(&b).expect("candidate evaluates on the grid")
            })
            .collect()
    };
    let levels: Vec<Vec<Complex64>> = (-2i32..=2).map(|k| sample(t0 + k as f64 * h)).collect();
    let f = &levels[2];
    let mut worst = 0.0f64;
    for i in 2..n - 2 {
        let d1 = numeric::fd1_c64(f[i - 2], f[i - 1], f[i + 1], f[i + 2], h);
        let d2 = numeric::fd2_c64(f[i - 2], f[i - 1], f[i], f[i + 1], f[i + 2], h);
        let mut b = params.clone();
        b.set(&eq.var, Complex64::new(points[i], 0.0));
        b.set("t", Complex64::new(t0, 0.0));
        let c2 = eq.c2.eval(&b).unwrap();
        let c1 = eq.c1.eval(&b).unwrap();
        let w = (eq.w0.clone() + eq.vext.clone()).eval(&b).unwrap();
        let nl = eq.nl.eval(&b).unwrap();
        let rhs = c2 * d2 + c1 * d1 + w * f[i] + nl * f[i].norm_sqr() * f[i];
        let r = match eq.kind {
            ReducedKind::TimeDependent => {
                let dt_psi =
                    numeric::fd1_c64(levels[0][i], levels[1][i], levels[3][i], levels[4][i], h);
                let hbar = params.get("hbar").unwrap();
                Complex64::i() * hbar * dt_psi - rhs
            }
            ReducedKind::Stationary => {
                let e = params.get("E").unwrap();
                e * f[i] - rhs
            }
        };
        let rn = r.norm();
        if rn > worst {
            worst = rn;
        }
    }
    (worst, h)
}

/// Sample a symbolic initial condition on a grid.
pub fn sample_on_grid(
    psi: &SymExpr,
    var: &str,
    params: &Binding,
    grid: &Grid1D,
    t: f64,
) -> Vec<Complex64> {
    grid.points()
        .iter()
        .map(|q| {
            let mut b = params.clone();
            b.set(var, Complex64::new(*q, 0.0));
            b.set("t", Complex64::new(t, 0.0));
            psi.eval(&b)
                .expect("initial condition evaluates on the grid")
        })
        .collect()
}

/// Validate a stationary first-order reduction against the closed-form
/// amplitude-phase family and return it with its max residual on the span.
pub fn amplitude_phase_solve(
    eq: &ReducedEquation,
    params: &Binding,
    samples: usize,
) -> Result<(crate::catalog::SolutionFamily, f64), SolverError> {
    if eq.kind != ReducedKind::Stationary || !eq.c2.is_zero() {
        return Err(SolverError::WrongEquation(
            "amplitude-phase splitting applies to the stationary first-order reduction".into(),
        ));
    }
    let family = crate::catalog::solv4_exact_solution();
    let mut worst = 0.0f64;
    for k in 0..samples {
        let q = 0.1 + 9.9 * k as f64 / (samples - 1) as f64;
        let mut b = params.clone();
        b.set(&eq.var, Complex64::new(q, 0.0));
        let r = eq.residual_at(&family.expr, &b).norm();
        if r > worst {
            worst = r;
        }
    }
    if worst > 1e-9 {
        return Err(SolverError::WrongEquation(format!(
            "closed form does not satisfy this equation (residual {worst:.3e})"
        )));
    }
    Ok((family, worst))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::expr::{equiv_bool, EquivCfg};
    use crate::reduction::FullPde;

    fn e2_pipe() -> catalog::Pipeline {
        catalog::build_pipeline(catalog::load("e2").unwrap(), EquivCfg::default()).unwrap()
    }

    fn solv4_pipe() -> catalog::Pipeline {
        catalog::build_pipeline(catalog::load("exp-solv-4").unwrap(), EquivCfg::default()).unwrap()
    }

    fn soliton_params() -> Binding {
        Binding::from_pairs(&[
            ("hbar", 1.0),
            ("m", 1.0),
            ("eps", 1.0),
            ("j", 1.0),
            ("d1", 1.0),
            ("d2", 1.0),
            ("d3", 1.0),
            ("q0", 1.7),
            ("a", 1.0),
            ("vel", 0.5),
        ])
    }

    #[test]
    fn soliton_satisfies_reduced_equation() {
        use rand::RngExt;
        let pipe = e2_pipe();
        let fam = catalog::e2_bright_soliton();
        let params = soliton_params();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let mut b = params.clone();
            b.set("q", Complex64::new(rng.random_range(-3.0..3.0), 0.0));
            b.set("t", Complex64::new(rng.random_range(0.0..1.0), 0.0));
            let r = pipe.reduced.residual_at(&fam.expr, &b).norm();
            assert!(r < 1e-10, "reduced soliton residual {r}");
        }
    }

    #[test]
    fn plane_wave_evolves_exactly_in_free_case() {
        let pipe = e2_pipe();
        // Equal transverse weights and no cubic term: constant potential.
        let params = Binding::from_pairs(&[
            ("hbar", 1.0),
            ("m", 1.0),
            ("eps", 0.0),
            ("j", 1.0),
            ("d1", 1.0),
            ("d2", 1.0),
            ("d3", 1.0),
        ]);
        let grid = Grid1D::new(
            GridDomain::Periodic {
                start: 0.0,
                len: std::f64::consts::TAU,
            },
            128,
        )
        .unwrap();
        let k_mode = 3.0;
        let psi0: Vec<Complex64> = grid
            .points()
            .iter()
            .map(|q| (Complex64::i() * k_mode * q).exp())
            .collect();
        let dt = 1e-3;
        let steps = 200;
        let sol = split_step_evolve(&pipe.reduced, &params, &psi0, &grid, dt, steps, 50).unwrap();
        // i psi_t = c2 (ik)^2 psi + W psi with c2 = -1/2, W = 1/2.
        let c2 = -0.5;
        let w = 0.5;
        let omega = (w - c2 * k_mode * k_mode) / 1.0;
        let t_end = steps as f64 * dt;
        let exact_factor = (-Complex64::i() * omega * t_end).exp();
        let final_state = sol.final_state();
        let mut worst = 0.0f64;
        for (z, z0) in final_state.iter().zip(&psi0) {
            worst = worst.max((z - z0 * exact_factor).norm());
        }
        assert!(worst < 1e-10, "plane-wave error {worst}");
        assert!(sol.warnings.is_empty());
    }

    fn soliton_on_grid(grid: &Grid1D, t: f64, params: &Binding) -> Vec<Complex64> {
        sample_on_grid(&catalog::e2_bright_soliton().expr, "q", params, grid, t)
    }

    #[test]
    fn soliton_evolution_matches_analytic_form() {
        let pipe = e2_pipe();
        let params = soliton_params();
        let grid = Grid1D::new(
            GridDomain::Box {
                lo: -20.0,
                hi: 20.0,
            },
            1024,
        )
        .unwrap();
        let psi0 = soliton_on_grid(&grid, 0.0, &params);
        let sol = split_step_evolve(&pipe.reduced, &params, &psi0, &grid, 1e-3, 1000, 200).unwrap();
        let exact = soliton_on_grid(&grid, 1.0, &params);
        let mut linf = 0.0f64;
        for (z, e) in sol.final_state().iter().zip(&exact) {
            linf = linf.max((z - e).norm());
        }
        assert!(linf < 1e-4, "soliton L-infinity error {linf}");
        assert!(sol.norm_drift() < 1e-8, "norm drift {}", sol.norm_drift());
    }

    #[test]
    fn halving_dt_quarters_the_error() {
        let pipe = e2_pipe();
        let params = soliton_params();
        let grid = Grid1D::new(
            GridDomain::Box {
                lo: -20.0,
                hi: 20.0,
            },
            1024,
        )
        .unwrap();
        let psi0 = soliton_on_grid(&grid, 0.0, &params);
        let t_end = 0.8;
        let err_at = |dt: f64| {
            let steps = (t_end / dt).round() as usize;
            let sol =
                split_step_evolve(&pipe.reduced, &params, &psi0, &grid, dt, steps, steps).unwrap();
            let exact = soliton_on_grid(&grid, t_end, &params);
            sol.final_state()
                .iter()
                .zip(&exact)
                .map(|(z, e)| (z - e).norm())
                .fold(0.0f64, f64::max)
        };
        let e_coarse = err_at(2e-3);
        let e_fine = err_at(1e-3);
        let ratio = e_coarse / e_fine;
        assert!(
            (ratio - 4.0).abs() <= 0.8,
            "second-order ratio {ratio} (coarse {e_coarse:.3e}, fine {e_fine:.3e})"
        );
    }

    #[test]
    fn long_run_conserves_norm_and_momentum() {
        let pipe = e2_pipe();
        let params = soliton_params();
        let grid = Grid1D::new(
            GridDomain::Box {
                lo: -20.0,
                hi: 20.0,
            },
            1024,
        )
        .unwrap();
        let psi0 = soliton_on_grid(&grid, 0.0, &params);
        let sol =
            split_step_evolve(&pipe.reduced, &params, &psi0, &grid, 1e-4, 10_000, 2000).unwrap();
        assert!(sol.norm_drift() < 1e-8, "norm drift {}", sol.norm_drift());
        assert!(
            sol.momentum_drift() < 1e-6,
            "momentum drift {}",
            sol.momentum_drift()
        );
    }

    #[test]
    fn under_resolved_grid_warns_and_contaminated_box_errors() {
        let pipe = e2_pipe();
        let params = soliton_params();
        let coarse = Grid1D::new(
            GridDomain::Box {
                lo: -20.0,
                hi: 20.0,
            },
            64,
        )
        .unwrap();
        let psi0 = soliton_on_grid(&coarse, 0.0, &params);
        let sol = split_step_evolve(&pipe.reduced, &params, &psi0, &coarse, 1e-3, 50, 50).unwrap();
        assert!(!sol.warnings.is_empty(), "expected a spectral-tail warning");
        let narrow = Grid1D::new(GridDomain::Box { lo: -5.0, hi: 5.0 }, 128).unwrap();
        let psi_narrow = soliton_on_grid(&narrow, 0.0, &params);
        let err = split_step_evolve(&pipe.reduced, &params, &psi_narrow, &narrow, 1e-3, 10, 10)
            .unwrap_err();
        assert!(matches!(err, SolverError::BoundaryContamination(_)));
    }

    fn linear_log_phase(params: &Binding) -> SymExpr {
        // q^(-1/2) exp(i kappa ln q) with kappa from the linear balance.
        let m = params.get("m").unwrap().re;
        let e = params.get("E").unwrap().re;
        let hbar = params.get("hbar").unwrap().re;
        let d1 = params.get("d1").unwrap().re;
        let d2 = params.get("d2").unwrap().re;
        let j1 = params.get("j1").unwrap().re;
        let j2 = params.get("j2").unwrap().re;
        let kappa = (m * e - 2.0 * d1 * j1 * j2) / (2.0 * hbar * j1 * (d1 + d2));
        let q = SymExpr::var("q");
        (q.log() * SymExpr::rat(-1, 2)).exp()
            * (SymExpr::i() * crate::orbit::f64_expr(kappa) * q.log()).exp()
    }

    #[test]
    fn stationary_integration_follows_linear_solution() {
        let pipe = solv4_pipe();
        let mut params = pipe.entry.params_typical.clone();
        params.set("eps", Complex64::new(0.0, 0.0));
        let exact = linear_log_phase(&params);
        let value_at = |q: f64| {
            let mut b = params.clone();
            b.set("q", Complex64::new(q, 0.0));
            exact.eval(&b).unwrap()
        };
        let out = ode_integrate(
            &pipe.reduced,
            &params,
            value_at(0.1),
            0.1,
            10.0,
            200,
            1e-10,
            1e-12,
        )
        .unwrap();
        let mut worst = 0.0f64;
        for (q, y) in &out {
            worst = worst.max((y - value_at(*q)).norm());
        }
        assert!(worst < 1e-8, "linear-solution deviation {worst}");
    }

    #[test]
    fn stationary_integration_follows_closed_form() {
        let pipe = solv4_pipe();
        let params = pipe.entry.params_typical.clone();
        let family = catalog::solv4_exact_solution();
        let value_at = |q: f64| {
            let mut b = params.clone();
            b.set("q", Complex64::new(q, 0.0));
            family.expr.eval(&b).unwrap()
        };
        let out = ode_integrate(
            &pipe.reduced,
            &params,
            value_at(0.1),
            0.1,
            10.0,
            200,
            1e-10,
            1e-12,
        )
        .unwrap();
        let mut worst = 0.0f64;
        for (q, y) in &out {
            worst = worst.max((y - value_at(*q)).norm());
        }
        assert!(worst < 1e-8, "closed-form deviation {worst}");
        // Zero data stays zero, and a span through the origin is rejected.
        let zero = ode_integrate(
            &pipe.reduced,
            &params,
            Complex64::new(0.0, 0.0),
            0.1,
            5.0,
            20,
            1e-10,
            1e-12,
        )
        .unwrap();
        assert!(zero.iter().all(|(_, y)| y.norm() == 0.0));
        assert!(matches!(
            ode_integrate(
                &pipe.reduced,
                &params,
                Complex64::new(1.0, 0.0),
                -1.0,
                1.0,
                10,
                1e-10,
                1e-12
            ),
            Err(SolverError::SingularSpan)
        ));
    }

    #[test]
    fn amplitude_phase_family_is_validated() {
        let pipe = solv4_pipe();
        let params = pipe.entry.params_typical.clone();
        let (family, resid) = amplitude_phase_solve(&pipe.reduced, &params, 200).unwrap();
        assert!(resid < 1e-9, "family residual {resid}");
        // The amplitude factor solves 2 q f' + f = 0.
        let q = SymExpr::var("q");
        let f = (q.pow(2).log() * SymExpr::rat(-1, 4)).exp();
        let ode = SymExpr::int(2) * q.clone() * f.diff("q") + f;
        assert!(equiv_bool(
            &ode,
            &SymExpr::zero(),
            &pipe.entry.sample_box,
            EquivCfg::default()
        ));
        // Quadrupling eps halves the amplitude and leaves the phase alone.
        let b1 = params.clone();
        let mut b4 = params.clone();
        b4.set("eps", params.get("eps").unwrap() * 4.0);
        let mut bq = b1.clone();
        bq.set("q", Complex64::new(2.0, 0.0));
        let mut bq4 = b4.clone();
        bq4.set("q", Complex64::new(2.0, 0.0));
        let v1 = family.expr.eval(&bq).unwrap();
        let v4 = family.expr.eval(&bq4).unwrap();
        assert!((v1.norm() / v4.norm() - 2.0).abs() < 1e-12);
        assert!((v1 / v1.norm() - v4 / v4.norm()).norm() < 1e-12);
        // The wrong equation is rejected.
        let e2 = e2_pipe();
        assert!(matches!(
            amplitude_phase_solve(&e2.reduced, &params, 10),
            Err(SolverError::WrongEquation(_))
        ));
    }

    #[test]
    fn lifted_soliton_satisfies_full_equation() {
        let pipe = e2_pipe();
        let mut params = soliton_params();
        // Generic equal transverse weights; the third weight must be one.
        for (k, v) in [
            ("d1", 0.8),
            ("d2", 0.8),
            ("d3", 1.0),
            ("hbar", 0.9),
            ("m", 1.1),
            ("eps", 0.8),
            ("j", 1.2),
        ] {
            params.set(k, Complex64::new(v, 0.0));
        }
        let full = FullPde {
            kind: crate::reduction::ReducedKind::TimeDependent,
            laplacian: pipe.geo.laplacian.clone(),
            potential: SymExpr::zero(),
            weight: SymExpr::one(),
            nl_sign: -1,
        };
        let lifted = pipe.ansatz.lift(&catalog::e2_bright_soliton().expr);
        let resid = residual_full_max(&full, &lifted, &params, &pipe.entry.sample_box, 1000, 11);
        assert!(resid < 1e-7, "lifted soliton residual {resid}");
        // The zero field has zero residual.
        let zero_resid = residual_full_max(
            &full,
            &SymExpr::zero(),
            &params,
            &pipe.entry.sample_box,
            10,
            11,
        );
        assert!(zero_resid < 1e-15);
    }

    #[test]
    fn lifted_closed_form_satisfies_stationary_equation() {
        let pipe = solv4_pipe();
        let params = pipe.entry.params_typical.clone();
        let full = FullPde {
            kind: crate::reduction::ReducedKind::Stationary,
            laplacian: pipe.geo.laplacian.clone(),
            potential: SymExpr::zero(),
            weight: SymExpr::var("x4").exp(),
            nl_sign: 1,
        };
        let lifted = pipe.ansatz.lift(&catalog::solv4_exact_solution().expr);
        let resid = residual_full_max(&full, &lifted, &params, &pipe.entry.sample_box, 1000, 13);
        assert!(resid < 1e-7, "lifted closed-form residual {resid}");
    }

    #[test]
    fn lifted_modulus_identity_both_sides_of_the_pole() {
        use rand::RngExt;
        let pipe = solv4_pipe();
        let params = pipe.entry.params_typical.clone();
        let lifted = pipe.ansatz.lift(&catalog::solv4_exact_solution().expr);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut checked = 0;
        while checked < 200 {
            let mut b = params.clone();
            b.set("x1", Complex64::new(rng.random_range(-2.0..2.0), 0.0));
            // Straddle the singular plane x2 = q0 = 5.
            b.set("x2", Complex64::new(rng.random_range(-2.0..10.0), 0.0));
            b.set("x3", Complex64::new(rng.random_range(-2.0..2.0), 0.0));
            b.set("x4", Complex64::new(rng.random_range(-1.2..1.2), 0.0));
            let x2 = b.get("x2").unwrap().re;
            if (5.0 - x2).abs() < 1e-2 {
                continue;
            }
            checked += 1;
            let lhs = lifted.eval(&b).unwrap().norm_sqr();
            let hbar = 0.9;
            let (d1, d2, j1, c1, eps, m) = (1.3, 0.7, 1.1, 0.9, 0.8, 1.1);
            let rhs = 2.0 * hbar * (d1 + d2) * (j1 * c1 / (5.0 - x2)).abs() / (eps * m);
            assert!(
                (lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()),
                "modulus identity off at x2 = {x2}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn grid_residual_of_the_soliton_converges_at_fourth_order() {
        let pipe = e2_pipe();
        let params = soliton_params();
        let fam = catalog::e2_bright_soliton();
        let coarse = Grid1D::new(GridDomain::Box { lo: -8.0, hi: 8.0 }, 128).unwrap();
        let fine = Grid1D::new(GridDomain::Box { lo: -8.0, hi: 8.0 }, 256).unwrap();
        let (rc, hc) = reduced_grid_residual(&pipe.reduced, &fam.expr, &params, &coarse, 0.3);
        let (rf, hf) = reduced_grid_residual(&pipe.reduced, &fam.expr, &params, &fine, 0.3);
        assert!((hc / hf - 2.0).abs() < 1e-12);
        let ratio = rc / rf;
        assert!(
            (ratio - 16.0).abs() <= 4.0,
            "fourth-order ratio {ratio} (coarse {rc:.3e}, fine {rf:.3e})"
        );
    }
}
