//! The noncommutative ansatz: lift reduced functions to the group through
//! the kernel data, verify that right-invariant generators transport to the
//! representation operators, test whether the cubic nonlinearity reduces
//! (the fiber-constancy of the weighted squared modulus), and assemble the
//! reduced equation from the frame metric and the representation.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::RngExt;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exec;
use crate::expr::{sample_admissible, Binding, EquivCfg, SampleBox, SymExpr, Symbol};
use crate::geometry::MetricSpec;
use crate::group::{CoordRange, FrameField, GroupChart};
use crate::operator::DiffOp;
use crate::orbit::{DKernelSpec, LambdaRep};

#[derive(Debug, Error)]
pub enum ReductionError {
    #[error("nonlinearity does not reduce: {witness}")]
    NotReducible { witness: String },
    #[error("external potential is not a function of the kernel pair: {witness}")]
    PotentialNotReducible { witness: String },
    #[error("reduced kinetic data unsupported: {0}")]
    UnsupportedForm(String),
}

/// A lift prescription: the inverse-oriented kernel data on a chart, with
/// the spectator index `q0` as a free parameter.
#[derive(Debug, Clone)]
pub struct AnsatzSpec {
    pub chart: GroupChart,
    pub kernel: DKernelSpec,
}

impl AnsatzSpec {
    /// Lift a reduced function of `q` (and possibly `t`) to the group:
    /// Psi(g) = phase(g; q0) psi(S(q0, g)).
    pub fn lift(&self, psi: &SymExpr) -> SymExpr {
        let moved = psi.subst_var("q", &self.kernel.point_map);
        self.kernel.phase() * moved
    }

    /// Negative control: drop the modulus weight from the phase.
    pub fn with_weight_dropped(&self) -> AnsatzSpec {
        let mut out = self.clone();
        out.kernel.weight = SymExpr::one();
        out
    }

    /// Negative control: multiply the unimodular factor by exp(i c coord).
    pub fn with_phase_nudge(&self, coord: &str, c: f64) -> AnsatzSpec {
        let mut out = self.clone();
        let nudge = (SymExpr::i() * crate::orbit::f64_expr(c) * SymExpr::var(coord)).exp();
        out.kernel.unit_phase = out.kernel.unit_phase.clone() * nudge;
        out
    }
}

/// Gaussian-bump test function with pseudorandom center and linear factor;
/// centers are drawn from the box's `q` range so the bump overlaps the
/// transported coordinate values.
fn random_test_function(rng: &mut ChaCha8Rng, sbox: &SampleBox) -> SymExpr {
    let q = SymExpr::var("q");
    let (lo, hi) = sbox.get("q");
    let c = crate::orbit::f64_expr(rng.random_range(lo..hi));
    let a = crate::orbit::f64_expr(rng.random_range(0.5..1.5));
    let b = crate::orbit::f64_expr(rng.random_range(-1.0..1.0));
    let width = crate::orbit::f64_expr(rng.random_range(0.3..0.8));
    (-(width * (q.clone() - c.clone()).pow(2))).exp() * (a + b * (q - c))
}

/// Max over random test functions and sample points of
/// |eta_a(lift psi) - lift(l_a psi)|: the correctness certificate tying the
/// kernel data to the representation operators.
pub fn generator_transport_check(
    ansatz: &AnsatzSpec,
    eta: &FrameField,
    rep: &LambdaRep,
    params: &Binding,
    sbox: &SampleBox,
    test_functions: usize,
    points_per_function: usize,
    seed: u64,
) -> f64 {
    let n = ansatz.chart.dim();
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..test_functions {
        let psi = random_test_function(&mut rng, sbox);
        let lifted = ansatz.lift(&psi);
        for a in 0..n {
            let lhs = eta.apply(a, &ansatz.chart.coords, &lifted);
            let l_psi = rep.op(a).apply(&psi);
            let rhs = ansatz.lift(&l_psi);
            let resid = lhs - rhs;
            let point_seed = rng.random_range(0..u64::MAX / 2);
            let max = exec::max_indexed(points_per_function, |t| {
                let mut prng = ChaCha8Rng::seed_from_u64(point_seed.wrapping_add(t as u64));
                let b = sample_admissible(&[&resid], sbox, &mut prng, 1e-3);
                let full = b.merged(params);
                resid.eval(&full).map(|z| z.norm()).unwrap_or(f64::INFINITY)
            });
            if max > worst {
                worst = max;
            }
        }
    }
    worst
}

/// Value of `expr` with the fiber coordinate eliminated through the kernel's
/// fiber solution: an expression in (q, q0, remaining coordinates).
pub fn on_fiber(ansatz: &AnsatzSpec, expr: &SymExpr) -> SymExpr {
    let mut map = BTreeMap::new();
    map.insert(
        Symbol::var(&ansatz.kernel.fiber_coord),
        ansatz.kernel.fiber_solve.clone(),
    );
    expr.subst(&map)
}

fn fiber_constancy(
    ansatz: &AnsatzSpec,
    candidate: &SymExpr,
    sbox: &SampleBox,
    cfg: EquivCfg,
) -> Result<SymExpr, String> {
    let on_fiber_expr = on_fiber(ansatz, candidate);
    // The expression must not depend on any chart coordinate once the fiber
    // coordinate is eliminated; q and q0 are the only admissible carriers.
    let free: Vec<Symbol> = on_fiber_expr
        .free_symbols()
        .into_iter()
        .filter(|s| ansatz.chart.coords.iter().any(|c| c == &*s.name))
        .collect();
    if free.is_empty() {
        return Ok(on_fiber_expr);
    }
    // Residual coordinates survive structurally; sample two fiber points
    // with equal (q, q0) and compare.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.trials {
        let base = sample_admissible(&[&on_fiber_expr], sbox, &mut rng, cfg.guard);
        let mut other = base.clone();
        for s in &free {
            let (lo, hi) = sbox.get(&s.name);
            other.set(&s.name, Complex64::new(rng.random_range(lo..hi), 0.0));
        }
        let v1 = on_fiber_expr.eval(&base).unwrap();
        let v2 = match on_fiber_expr.eval(&other) {
            Ok(v) => v,
            Err(_) => continue,
        };
        if (v1 - v2).norm() > cfg.tol * (1.0 + v1.norm()) {
            return Err(format!(
                "value changes along the fiber: {v1} vs {v2} when moving {:?}",
                free.iter().map(|s| s.name.to_string()).collect::<Vec<_>>()
            ));
        }
    }
    // Numerically fiber-constant but structurally coordinate-laden: pin the
    // surviving coordinates at reference values drawn from the box midpoint.
    let mut map = BTreeMap::new();
    for s in &free {
        let (lo, hi) = sbox.get(&s.name);
        map.insert(s.clone(), crate::orbit::f64_expr(0.5 * (lo + hi)));
    }
    Ok(on_fiber_expr.subst(&map))
}

/// Check the reducibility condition: w(g) |phase|^2 must be constant along
/// each fiber {g : S(q0, g) = q}. Returns kappa^2 as an expression in the
/// surviving variables; `NotReducible` carries a witness pair.
pub fn kappa_check(
    ansatz: &AnsatzSpec,
    weight_w: &SymExpr,
    sbox: &SampleBox,
    cfg: EquivCfg,
) -> Result<SymExpr, ReductionError> {
    let candidate = weight_w.clone() * ansatz.kernel.weight.pow(2);
    let kappa_sq = fiber_constancy(ansatz, &candidate, sbox, cfg)
        .map_err(|witness| ReductionError::NotReducible { witness })?;
    Ok(kappa_sq)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReducedKind {
    TimeDependent,
    Stationary,
}

/// The reduced model on the homogeneous space:
///
/// time-dependent: i hbar psi_t = c2 psi'' + c1 psi' + (w0 + vext) psi + nl |psi|^2 psi
/// stationary:     0 = c2 psi'' + c1 psi' + (w0 + vext) psi + nl |psi|^2 psi - E psi
#[derive(Debug, Clone)]
pub struct ReducedEquation {
    pub kind: ReducedKind,
    pub var: String,
    pub domain: CoordRange,
    pub c2: SymExpr,
    pub c1: SymExpr,
    /// Zeroth-order part contributed by the frame Hamiltonian.
    pub w0: SymExpr,
    /// Reduced external potential.
    pub vext: SymExpr,
    /// Signed cubic coefficient (eps kappa^2 with the original sign).
    pub nl: SymExpr,
    pub kappa_sq: SymExpr,
}

impl ReducedEquation {
    pub fn linear_op(&self) -> DiffOp {
        let mut op = DiffOp::zero(vec![self.var.clone()]);
        op.add_term(vec![2], self.c2.clone());
        op.add_term(vec![1], self.c1.clone());
        op.add_term(vec![0], self.w0.clone() + self.vext.clone());
        op
    }

    /// Residual of a symbolic candidate at one numeric binding (which must
    /// cover q, params, and t for the time-dependent kind).
    pub fn residual_at(&self, psi: &SymExpr, b: &Binding) -> Complex64 {
        let lin = self.linear_op().apply(psi);
        let psi_v = psi.eval(b).unwrap();
        let nl_v = self.nl.eval(b).unwrap();
        let mut r = -lin.eval(b).unwrap() - nl_v * psi_v.norm_sqr() * psi_v;
        match self.kind {
            ReducedKind::TimeDependent => {
                let hbar = b.get("hbar").expect("hbar must be bound");
                r += Complex64::i() * hbar * psi.diff("t").eval(b).unwrap();
            }
            ReducedKind::Stationary => {
                let e = b.get("E").expect("E must be bound");
                r += e * psi_v;
            }
        }
        r
    }
}

/// Assemble the reduced equation: linear part G^{ab} (-i hbar l_a)(-i hbar
/// l_b) / 2m expanded in the reduced coordinate, cubic term from the
/// verified kappa^2, external potential pushed through the fiber solution.
#[allow(clippy::too_many_arguments)]
pub fn reduce_equation(
    metric: &MetricSpec,
    rep: &LambdaRep,
    ansatz: &AnsatzSpec,
    weight_w: &SymExpr,
    potential: Option<&SymExpr>,
    nl_sign: i128,
    kind: ReducedKind,
    sbox: &SampleBox,
    cfg: EquivCfg,
) -> Result<ReducedEquation, ReductionError> {
    if rep.dim_q() != 1 {
        return Err(ReductionError::UnsupportedForm(format!(
            "reduction is implemented for one reduced coordinate, got {}",
            rep.dim_q()
        )));
    }
    let kappa_sq = kappa_check(ansatz, weight_w, sbox, cfg)?;
    // kappa^2 must be a strictly positive weight wherever it is sampled.
    {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x4B);
        for _ in 0..cfg.trials.min(32) {
            let b = sample_admissible(&[&kappa_sq], sbox, &mut rng, cfg.guard);
            let v = kappa_sq.eval(&b).unwrap();
            if v.re <= 0.0 || v.im.abs() > 1e-10 * (1.0 + v.re.abs()) {
                return Err(ReductionError::NotReducible {
                    witness: format!("kappa^2 = {v} is not a positive weight"),
                });
            }
        }
    }
    let n = rep.a.len();
    let ops: Vec<DiffOp> = (0..n).map(|a| rep.momentum_op(a)).collect();
    let mut h_op = DiffOp::zero(rep.q_vars.clone());
    for a in 0..n {
        for b in 0..n {
            if metric.upper[a][b].is_zero() {
                continue;
            }
            h_op = h_op.add(&ops[a].sym_compose(&ops[b]).scale(&metric.upper[a][b]));
        }
    }
    let half_inv_mass = SymExpr::rat(1, 2) * SymExpr::param("m").inv();
    let c2 = (h_op.coefficient(&[2]) * half_inv_mass.clone()).expand();
    let c1 = (h_op.coefficient(&[1]) * half_inv_mass.clone()).expand();
    let w0 = (h_op.coefficient(&[0]) * half_inv_mass).expand();
    let vext = match potential {
        None => SymExpr::zero(),
        Some(v) => fiber_constancy(ansatz, v, sbox, cfg)
            .map_err(|witness| ReductionError::PotentialNotReducible { witness })?,
    };
    let nl = SymExpr::int(nl_sign) * SymExpr::param("eps") * kappa_sq.clone();
    Ok(ReducedEquation {
        kind,
        var: rep.q_vars[0].clone(),
        domain: rep.q_ranges[0],
        c2,
        c1,
        w0,
        vext,
        nl,
        kappa_sq,
    })
}

/// Configuration of the full equation on the group for residual purposes.
#[derive(Debug, Clone)]
pub struct FullPde {
    pub kind: ReducedKind,
    /// Laplace operator of the chosen metric in chart coordinates.
    pub laplacian: DiffOp,
    /// External potential V(g); zero when absent.
    pub potential: SymExpr,
    /// Nonlinearity weight w(g).
    pub weight: SymExpr,
    /// Sign of the cubic term as it appears in U = V + sign * eps * w |psi|^2.
    pub nl_sign: i128,
}

impl FullPde {
    /// Linear part of the residual applied to a symbolic field:
    /// time-dependent: i hbar Psi_t + (hbar^2/2m) Delta Psi - V Psi
    /// stationary:     -(hbar^2/2m) Delta Psi - E Psi
    pub fn linear_residual(&self, psi: &SymExpr) -> SymExpr {
        let hbar = SymExpr::param("hbar");
        let kinetic = hbar.pow(2) * SymExpr::rat(1, 2) * SymExpr::param("m").inv();
        match self.kind {
            ReducedKind::TimeDependent => {
                SymExpr::i() * hbar * psi.diff("t") + kinetic * self.laplacian.apply(psi)
                    - self.potential.clone() * psi.clone()
            }
            ReducedKind::Stationary => {
                -(kinetic * self.laplacian.apply(psi)) - SymExpr::param("E") * psi.clone()
            }
        }
    }

    /// Full residual at a numeric binding. The cubic term sits on the
    /// right-hand side of the time-dependent equation (so it is subtracted
    /// from the linear residual) and on the left of the stationary one.
    pub fn residual_at(&self, psi: &SymExpr, linear: &SymExpr, b: &Binding) -> Complex64 {
        let lin = linear.eval(b).unwrap();
        let p = psi.eval(b).unwrap();
        let w = self.weight.eval(b).unwrap();
        let eps = b.get("eps").expect("eps must be bound");
        let cubic = Complex64::new(self.nl_sign as f64, 0.0) * eps * w * p.norm_sqr() * p;
        match self.kind {
            ReducedKind::TimeDependent => lin - cubic,
            ReducedKind::Stationary => lin + cubic,
        }
    }
}

/// Certify the reduction: at random points, |full residual of lift(psi)|
/// equals |phase| * |reduced residual of psi at the transported point|.
/// Returns the max mismatch over the sampled points.
#[allow(clippy::too_many_arguments)]
pub fn factorization_residual(
    full: &FullPde,
    eq: &ReducedEquation,
    ansatz: &AnsatzSpec,
    psi: &SymExpr,
    params: &Binding,
    sbox: &SampleBox,
    points: usize,
    seed: u64,
) -> f64 {
    let lifted = ansatz.lift(psi);
    let lifted_linear = full.linear_residual(&lifted);
    exec::max_indexed(points, |t| {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9E37_79B9u64.wrapping_mul(t as u64 + 1)));
        let b = sample_admissible(&[&lifted_linear, &lifted], sbox, &mut rng, 1e-3).merged(params);
        let full_resid = full.residual_at(&lifted, &lifted_linear, &b).norm();
        // Reduced residual evaluated at q' = S(q0, g).
        let qprime = ansatz.kernel.point_map.eval(&b).unwrap();
        let mut br = b.clone();
        br.set(&eq.var, qprime);
        let red_resid = eq.residual_at(psi, &br).norm();
        let phase_mag = ansatz.kernel.phase().eval(&b).unwrap().norm();
        let scale = 1.0 + red_resid;
        (full_resid - phase_mag * red_resid).abs() / scale
    })
}

/// Residuals of eigenrelations (Op - value) psi at sampled points, for the
/// separation-of-variables oracle.
pub fn separation_eigencheck(
    psi: &SymExpr,
    ops: &[(DiffOp, SymExpr)],
    params: &Binding,
    sbox: &SampleBox,
    points: usize,
    seed: u64,
) -> Vec<f64> {
    ops.iter()
        .enumerate()
        .map(|(k, (op, value))| {
            let resid = op.apply(psi) - value.clone() * psi.clone();
            exec::max_indexed(points, |t| {
                let mut rng = ChaCha8Rng::seed_from_u64(
                    seed ^ (0xD1B5_4A32u64.wrapping_mul((k * points + t) as u64 + 1)),
                );
                let b = sample_admissible(&[&resid], sbox, &mut rng, 1e-3).merged(params);
                resid.eval(&b).map(|z| z.norm()).unwrap_or(f64::INFINITY)
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::expr::equiv_bool;
    use crate::group::right_invariant_frame;

    fn cfg() -> EquivCfg {
        EquivCfg::default()
    }

    fn pipeline(name: &str) -> catalog::Pipeline {
        catalog::build_pipeline(catalog::load(name).unwrap(), cfg()).unwrap()
    }

    #[test]
    fn lift_is_identity_at_group_unit() {
        for name in catalog::CATALOG_NAMES {
            let pipe = pipeline(name);
            let psi = SymExpr::var("q").sin() + SymExpr::int(2);
            let lifted = pipe.ansatz.lift(&psi);
            let id = pipe.entry.def.chart.identity_f64();
            let at_e = catalog::bind_point(&pipe.entry.def.chart.coords, &id, &lifted);
            let expect = psi.subst_var("q", &SymExpr::param("q0"));
            assert!(
                equiv_bool(&at_e, &expect, &pipe.entry.sample_box, cfg()),
                "{name}"
            );
        }
    }

    #[test]
    fn lift_is_linear_and_scales_modulus_by_weight() {
        use rand_chacha::rand_core::SeedableRng;
        let pipe = pipeline("exp-solv-4");
        let q = SymExpr::var("q");
        let psi1 = (-(q.clone() - SymExpr::one()).pow(2)).exp();
        let psi2 = q.clone() * (-(q.pow(2) * SymExpr::rat(1, 3))).exp();
        let both = pipe.ansatz.lift(&(psi1.clone() + psi2.clone()));
        let separate = pipe.ansatz.lift(&psi1) + pipe.ansatz.lift(&psi2);
        assert!(equiv_bool(&both, &separate, &pipe.entry.sample_box, cfg()));
        // |lift psi|^2 = weight^2 |psi(S)|^2 at sampled points
        let lifted = pipe.ansatz.lift(&psi1);
        let moved = psi1.subst_var("q", &pipe.ansatz.kernel.point_map);
        let w2 = pipe.ansatz.kernel.weight.pow(2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let b = crate::expr::sample_admissible(
                &[&lifted, &moved, &w2],
                &pipe.entry.sample_box,
                &mut rng,
                1e-3,
            );
            let lhs = lifted.eval(&b).unwrap().norm_sqr();
            let rhs = w2.eval(&b).unwrap().re * moved.eval(&b).unwrap().norm_sqr();
            assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs));
        }
    }

    #[test]
    fn transport_certificate_holds_and_detects_corruption() {
        for name in catalog::CATALOG_NAMES {
            let pipe = pipeline(name);
            let eta = right_invariant_frame(&pipe.entry.def.chart).unwrap();
            let resid = generator_transport_check(
                &pipe.ansatz,
                &eta,
                &pipe.rep,
                &pipe.entry.params_typical,
                &pipe.entry.sample_box,
                8,
                12,
                2024,
            );
            assert!(resid < 1e-9, "{name}: transport residual {resid}");
            // Corrupt the phase and expect an O(1) violation.
            let corrupted = if name == "exp-solv-4" {
                pipe.ansatz.with_weight_dropped()
            } else {
                pipe.ansatz.with_phase_nudge("x", 0.3)
            };
            let bad = generator_transport_check(
                &corrupted,
                &eta,
                &pipe.rep,
                &pipe.entry.params_typical,
                &pipe.entry.sample_box,
                4,
                12,
                2024,
            );
            assert!(bad > 0.1, "{name}: corrupted residual only {bad}");
        }
    }

    #[test]
    fn transport_residual_scales_linearly_in_phase_perturbation() {
        let pipe = pipeline("e2");
        let eta = right_invariant_frame(&pipe.entry.def.chart).unwrap();
        let mut resids = Vec::new();
        for c in [0.05, 0.1, 0.2] {
            let nudged = pipe.ansatz.with_phase_nudge("x", c);
            resids.push(generator_transport_check(
                &nudged,
                &eta,
                &pipe.rep,
                &pipe.entry.params_typical,
                &pipe.entry.sample_box,
                4,
                12,
                99,
            ));
        }
        let r1 = resids[1] / resids[0];
        let r2 = resids[2] / resids[1];
        assert!((r1 - 2.0).abs() < 0.3, "ratio {r1}");
        assert!((r2 - 2.0).abs() < 0.3, "ratio {r2}");
    }

    #[test]
    fn reducibility_of_the_cubic_term() {
        // Unit weight on the motion group: kappa^2 = 1 exactly.
        let pipe = pipeline("e2");
        let k = kappa_check(&pipe.ansatz, &SymExpr::one(), &pipe.entry.sample_box, cfg()).unwrap();
        assert!(k.is_one(), "kappa^2 = {k}");
        // Exponential weight on the solvable group cancels the kernel
        // half-density: kappa^2 = 1.
        let pipe4 = pipeline("exp-solv-4");
        let w = SymExpr::var("x4").exp();
        let k4 = kappa_check(&pipe4.ansatz, &w, &pipe4.entry.sample_box, cfg()).unwrap();
        assert!(k4.is_one(), "kappa^2 = {k4}");
        // Unit weight there fails: the value drifts with x4 along the fiber.
        let err = kappa_check(
            &pipe4.ansatz,
            &SymExpr::one(),
            &pipe4.entry.sample_box,
            cfg(),
        )
        .unwrap_err();
        assert!(matches!(err, ReductionError::NotReducible { .. }), "{err}");
    }

    #[test]
    fn separable_eigenfunction_obstruction() {
        // The separable eigenfunction ansatz cannot reduce the cubic term:
        // its weighted squared modulus varies along the fibers.
        let pipe = pipeline("exp-solv-4");
        let sov = catalog::solv4_sov_ansatz(&pipe.entry.def);
        let sbox = pipe.entry.sample_box.clone().range("x3", 0.2, 2.0);
        let w = SymExpr::var("x4").exp();
        let err = kappa_check(&sov, &w, &sbox, cfg()).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("x3"),
            "witness should name the drifting coordinate: {msg}"
        );
    }

    #[test]
    fn reduced_equation_motion_group() {
        let pipe = pipeline("e2");
        let sbox = &pipe.entry.sample_box;
        let d = |k: usize| SymExpr::param(&format!("d{k}"));
        let q = SymExpr::var("q");
        // Kinetic coefficient -hbar^2 d3 / 2m, no drift.
        let c2_expect = -(SymExpr::param("hbar").pow(2)
            * d(3)
            * SymExpr::rat(1, 2)
            * SymExpr::param("m").inv());
        assert!(equiv_bool(&pipe.reduced.c2, &c2_expect, sbox, cfg()));
        assert!(pipe.reduced.c1.is_zero());
        // Trigonometric well with the j^2 scale fixed by the Casimir.
        let w0_expect = SymExpr::param("j").pow(2)
            * SymExpr::rat(1, 2)
            * SymExpr::param("m").inv()
            * (d(1) * q.cos().pow(2) + d(2) * q.sin().pow(2));
        assert!(equiv_bool(&pipe.reduced.w0, &w0_expect, sbox, cfg()));
        assert!(equiv_bool(
            &pipe.reduced.nl,
            &(-SymExpr::param("eps")),
            sbox,
            cfg()
        ));
        assert_eq!(pipe.reduced.kind, ReducedKind::TimeDependent);
        // An angular potential reduces through the fiber solution.
        let v = SymExpr::var("al").cos() * SymExpr::rat(1, 2);
        let eq = reduce_equation(
            &pipe.metric,
            &pipe.rep,
            &pipe.ansatz,
            &SymExpr::one(),
            Some(&v),
            -1,
            ReducedKind::TimeDependent,
            sbox,
            cfg(),
        )
        .unwrap();
        let vext_expect = (SymExpr::param("q0") - q).cos() * SymExpr::rat(1, 2);
        assert!(equiv_bool(&eq.vext, &vext_expect, sbox, cfg()));
    }

    #[test]
    fn reduced_equation_solvable_group() {
        let pipe = pipeline("exp-solv-4");
        let sbox = &pipe.entry.sample_box;
        let d = |k: usize| SymExpr::param(&format!("d{k}"));
        let q = SymExpr::var("q");
        let i = SymExpr::i();
        let hbar = SymExpr::param("hbar");
        let m_inv = SymExpr::param("m").inv();
        assert!(pipe.reduced.c2.is_zero());
        let c1_expect = SymExpr::int(-2)
            * i.clone()
            * hbar.clone()
            * SymExpr::param("j1")
            * (d(1) + d(2))
            * m_inv.clone()
            * q.clone();
        assert!(equiv_bool(&pipe.reduced.c1, &c1_expect, sbox, cfg()));
        let w0_expect = -(i * hbar * SymExpr::param("j1") * (d(1) + d(2)) * m_inv.clone())
            + SymExpr::int(2) * d(1) * SymExpr::param("j1") * SymExpr::param("j2") * m_inv;
        assert!(equiv_bool(&pipe.reduced.w0, &w0_expect, sbox, cfg()));
        assert!(equiv_bool(
            &pipe.reduced.nl,
            &SymExpr::param("eps"),
            sbox,
            cfg()
        ));
        assert_eq!(pipe.reduced.kind, ReducedKind::Stationary);
    }

    #[test]
    fn residual_factorization_certifies_both_reductions() {
        // Time-dependent motion-group case with an external potential.
        let pipe = pipeline("e2");
        let v = SymExpr::var("al").cos() * SymExpr::rat(1, 2);
        let eq = reduce_equation(
            &pipe.metric,
            &pipe.rep,
            &pipe.ansatz,
            &SymExpr::one(),
            Some(&v),
            -1,
            ReducedKind::TimeDependent,
            &pipe.entry.sample_box,
            cfg(),
        )
        .unwrap();
        let full = FullPde {
            kind: ReducedKind::TimeDependent,
            laplacian: pipe.geo.laplacian.clone(),
            potential: v,
            weight: SymExpr::one(),
            nl_sign: -1,
        };
        let q = SymExpr::var("q");
        let t = SymExpr::var("t");
        let psi = (-(q.clone() - SymExpr::rat(1, 2)).pow(2)).exp()
            * (SymExpr::one() + q * SymExpr::rat(1, 3))
            * (SymExpr::one()
                + t.clone() * SymExpr::rat(2, 5)
                + SymExpr::i() * t.pow(2) * SymExpr::rat(1, 10));
        let mismatch = factorization_residual(
            &full,
            &eq,
            &pipe.ansatz,
            &psi,
            &pipe.entry.params_typical,
            &pipe.entry.sample_box,
            100,
            7,
        );
        assert!(mismatch < 1e-9, "factorization mismatch {mismatch}");

        // Stationary solvable case with the exponential weight.
        let pipe4 = pipeline("exp-solv-4");
        let full4 = FullPde {
            kind: ReducedKind::Stationary,
            laplacian: pipe4.geo.laplacian.clone(),
            potential: SymExpr::zero(),
            weight: SymExpr::var("x4").exp(),
            nl_sign: 1,
        };
        let q = SymExpr::var("q");
        let psi4 = (-(q.clone() - SymExpr::int(2)).pow(2) * SymExpr::rat(1, 8)).exp()
            * (SymExpr::one() + SymExpr::i() * q * SymExpr::rat(1, 4));
        let mismatch4 = factorization_residual(
            &full4,
            &pipe4.reduced,
            &pipe4.ansatz,
            &psi4,
            &pipe4.entry.params_typical,
            &pipe4.entry.sample_box,
            100,
            7,
        );
        assert!(mismatch4 < 1e-9, "factorization mismatch {mismatch4}");
    }

    #[test]
    fn separation_eigenrelations_hold_with_generic_profile() {
        let pipe = pipeline("exp-solv-4");
        let z = SymExpr::var("z");
        let profile = (-(z.pow(2) * SymExpr::rat(1, 4))).exp()
            * (SymExpr::one() + z.clone() * SymExpr::rat(1, 3));
        let psi = catalog::solv4_sov_function(&profile);
        let ops = catalog::solv4_sov_operators(&pipe.entry.def, &pipe.xi);
        let sbox = pipe.entry.sample_box.clone().range("x3", 0.2, 2.0);
        let resids = separation_eigencheck(&psi, &ops, &pipe.entry.params_typical, &sbox, 40, 5);
        for (k, r) in resids.iter().enumerate() {
            assert!(*r < 1e-9, "eigenrelation {k} residual {r}");
        }
        // A wrong eigenvalue must be detected.
        let bad_ops = vec![(ops[0].0.clone(), SymExpr::param("p1") + SymExpr::one())];
        let bad = separation_eigencheck(&psi, &bad_ops, &pipe.entry.params_typical, &sbox, 20, 5);
        assert!(bad[0] > 1e-3, "wrong eigenvalue went unnoticed: {}", bad[0]);
    }
}
