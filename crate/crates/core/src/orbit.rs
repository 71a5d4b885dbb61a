//! Orbit layer: orbit dimension, polarization validation, representation
//! operators on the homogeneous space, Casimir scalars, and the kernel data
//! (phase plus point map) of the induced representation.
//!
//! The representation operators are built from first principles: for the
//! section s(q) through the polarization-complementary axes, the curve
//! s(q) exp(t e_a) is factored through H s(q') by inverting the local
//! product map, all symbolically, so no printed operator is ever an input.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::RngExt;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::algebra::{beta_covector, LieAlgebraSpec, SubalgebraSpec};
use crate::expr::{equiv, rat_to_f64, Binding, EquivCfg, Rat, SampleBox, SymExpr, Symbol};
use crate::group::{CoordRange, FrameField, GroupChart};
use crate::numeric;
use crate::operator::DiffOp;
use crate::symmat;

#[derive(Debug, Error)]
pub enum OrbitError {
    #[error("polarization invalid: {condition}")]
    PolarizationInvalid { condition: String },
    #[error("orbit dimension sampling disagrees: {0:?}")]
    RankUnstable(Vec<usize>),
    #[error("chart split incompatible with the polarization: {0}")]
    SplitIncompatible(String),
    #[error("Casimir did not collapse to a scalar: {0}")]
    NonScalarCasimir(String),
    #[error("kernel data is only catalogued for known groups; `{0}` is not one")]
    UnsupportedGroup(String),
}

/// Orbit dimension: rank of C^c_{ab} lambda_c, sampled over the covector's
/// free parameters at eight independent draws that must agree.
pub fn orbit_dim(
    algebra: &LieAlgebraSpec,
    lambda: &[SymExpr],
    seed: u64,
) -> Result<usize, OrbitError> {
    let n = algebra.dim;
    let mut free = std::collections::BTreeSet::new();
    for l in lambda {
        free.extend(l.free_symbols());
    }
    let mut ranks = Vec::with_capacity(8);
    for s in 0..8u64 {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed ^ (0xA076_1D64_78BD_642Fu64.wrapping_mul(s + 1)));
        let mut b = Binding::new();
        for sym in &free {
            b.set(&sym.name, Complex64::new(rng.random_range(0.5..2.0), 0.0));
        }
        let lam: Vec<f64> = lambda
            .iter()
            .map(|l| l.eval(&b).expect("covector must evaluate").re)
            .collect();
        let mut m = vec![vec![0.0; n]; n];
        for a in 0..n {
            for bb in 0..n {
                let mut acc = 0.0;
                for c in 0..n {
                    acc += rat_to_f64(algebra.structure_constant(c, a, bb)) * lam[c];
                }
                m[a][bb] = acc;
            }
        }
        ranks.push(numeric::rank_f64(&m, 1e-9));
    }
    if ranks.windows(2).any(|w| w[0] != w[1]) {
        return Err(OrbitError::RankUnstable(ranks));
    }
    Ok(ranks[0])
}

/// A validated orbit datum: covector, polarization, modular covector, and
/// the Casimir values on the orbit.
#[derive(Debug, Clone)]
pub struct OrbitData {
    pub lambda: Vec<SymExpr>,
    pub orbit_dim: usize,
    pub polarization: SubalgebraSpec,
    /// beta components along the polarization basis rows.
    pub beta: Vec<Rat>,
    pub casimir_values: Vec<SymExpr>,
}

/// Validate the polarization conditions for `lambda` and assemble the orbit
/// datum. Casimir values are the supplied Casimirs evaluated at f = lambda.
pub fn polarization_check(
    algebra: &LieAlgebraSpec,
    lambda: Vec<SymExpr>,
    h: SubalgebraSpec,
    casimirs: &[SymExpr],
    sbox: &SampleBox,
    cfg: EquivCfg,
) -> Result<OrbitData, OrbitError> {
    h.check_closure(algebra)
        .map_err(|e| OrbitError::PolarizationInvalid {
            condition: format!("closure: {e}"),
        })?;
    let dim_orbit = orbit_dim(algebra, &lambda, cfg.seed)?;
    if dim_orbit % 2 != 0 {
        return Err(OrbitError::PolarizationInvalid {
            condition: format!("orbit dimension {dim_orbit} is odd"),
        });
    }
    let expect_h = algebra.dim - dim_orbit / 2;
    if h.dim() != expect_h {
        return Err(OrbitError::PolarizationInvalid {
            condition: format!("dim h = {} but dim g - dim O/2 = {expect_h}", h.dim()),
        });
    }
    // <lambda, [h_i, h_j]> must vanish identically in the orbit parameters.
    for i in 0..h.dim() {
        for j in 0..h.dim() {
            let br = algebra.bracket(&h.rows[i], &h.rows[j]);
            let pairing = SymExpr::sum(
                br.iter()
                    .enumerate()
                    .map(|(k, c)| SymExpr::rat(*c.numer(), *c.denom()) * lambda[k].clone())
                    .collect(),
            );
            equiv(&pairing, &SymExpr::zero(), sbox, cfg).map_err(|w| {
                OrbitError::PolarizationInvalid {
                    condition: format!("<lambda,[h_{i},h_{j}]> != 0: {w}"),
                }
            })?;
        }
    }
    let beta = beta_covector(algebra, &h).map_err(|e| OrbitError::PolarizationInvalid {
        condition: format!("beta: {e}"),
    })?;
    // Casimir values on the orbit: K(f)|_{f = lambda}.
    let mut map = BTreeMap::new();
    for (k, l) in lambda.iter().enumerate() {
        map.insert(Symbol::var(&format!("f{}", k + 1)), l.clone());
    }
    let casimir_values = casimirs.iter().map(|k| k.subst(&map)).collect();
    Ok(OrbitData {
        lambda,
        orbit_dim: dim_orbit,
        polarization: h,
        beta,
        casimir_values,
    })
}

/// First-order representation operators l_a = A_a(q) d_q + B_a(q) on the
/// reduced coordinates, with the measure density rho(q) they are symmetric
/// against (identically one for the catalogued groups).
#[derive(Debug, Clone)]
pub struct LambdaRep {
    pub q_vars: Vec<String>,
    pub q_ranges: Vec<CoordRange>,
    /// a[op][q_slot]: coefficient of d/dq_slot in l_op.
    pub a: Vec<Vec<SymExpr>>,
    /// zeroth-order part of each operator.
    pub b: Vec<SymExpr>,
    pub rho: SymExpr,
    /// Chart axes carrying the polarization (ascending).
    pub h_axes: Vec<usize>,
    /// Chart axes carrying the reduced coordinates (ascending).
    pub q_axes: Vec<usize>,
}

impl LambdaRep {
    pub fn dim_q(&self) -> usize {
        self.q_vars.len()
    }

    pub fn op(&self, a: usize) -> DiffOp {
        DiffOp::first_order(self.q_vars.clone(), &self.a[a], self.b[a].clone())
    }

    /// -i hbar l_a as an operator.
    pub fn momentum_op(&self, a: usize) -> DiffOp {
        let factor = SymExpr::int(-1) * SymExpr::i() * SymExpr::param("hbar");
        self.op(a).scale(&factor)
    }

    /// Check [l_a, l_b] = C^c_{ab} l_c on the coefficient level.
    pub fn commutator_check(
        &self,
        algebra: &LieAlgebraSpec,
        sbox: &SampleBox,
        cfg: EquivCfg,
    ) -> Result<(), String> {
        let n = algebra.dim;
        for a in 0..n {
            for b in (a + 1)..n {
                let lhs = self
                    .op(a)
                    .compose(&self.op(b))
                    .add(&self.op(b).compose(&self.op(a)).scale(&SymExpr::int(-1)));
                let mut rhs = DiffOp::zero(self.q_vars.clone());
                for c in 0..n {
                    let k = algebra.structure_constant(c, a, b);
                    if k == Rat::from_integer(0) {
                        continue;
                    }
                    rhs = rhs.add(&self.op(c).scale(&SymExpr::rat(*k.numer(), *k.denom())));
                }
                let diff = lhs.add(&rhs.scale(&SymExpr::int(-1)));
                for (idx, coeff) in diff.terms() {
                    equiv(coeff, &SymExpr::zero(), sbox, cfg)
                        .map_err(|w| format!("[l_{a},l_{b}] coeff {idx:?}: {w}"))?;
                }
            }
        }
        Ok(())
    }

    /// Max integration-by-parts residual of -i hbar l_a against rho dq, over
    /// smooth test functions tied to the domain kind.
    pub fn symmetry_residual(&self, params: &Binding) -> f64 {
        assert_eq!(
            self.dim_q(),
            1,
            "symmetry quadrature is one-dimensional here"
        );
        let q = SymExpr::var(&self.q_vars[0]);
        let (tests, lo, hi, periodic): (Vec<SymExpr>, f64, f64, bool) = match self.q_ranges[0] {
            CoordRange::Periodic { start, period } => (
                vec![
                    (q.cos() + SymExpr::i() * q.sin()) * (SymExpr::int(2) + q.sin()),
                    q.sin() * q.cos() + SymExpr::i() * q.cos(),
                ],
                start,
                start + period,
                true,
            ),
            CoordRange::Line => (
                vec![
                    (-(q.pow(2) * SymExpr::rat(1, 2))).exp()
                        * (SymExpr::one() + q.clone() * SymExpr::rat(1, 2)),
                    (-(q.pow(2) * SymExpr::rat(1, 2))).exp()
                        * (q.pow(2) * SymExpr::rat(1, 3) - q.clone() * SymExpr::i()),
                ],
                -12.0,
                12.0,
                false,
            ),
        };
        let mut worst = 0.0f64;
        for a in 0..self.a.len() {
            let op = self.momentum_op(a);
            for psi1 in &tests {
                for psi2 in &tests {
                    let lpsi1 = op.apply(psi1);
                    let lpsi2 = op.apply(psi2);
                    let integrand_l = |qq: f64| -> Complex64 {
                        let mut bb = params.clone();
                        bb.set(&self.q_vars[0], Complex64::new(qq, 0.0));
                        let rho = self.rho.eval(&bb).unwrap().re;
                        lpsi1.eval(&bb).unwrap().conj() * psi2.eval(&bb).unwrap() * rho
                    };
                    let integrand_r = |qq: f64| -> Complex64 {
                        let mut bb = params.clone();
                        bb.set(&self.q_vars[0], Complex64::new(qq, 0.0));
                        let rho = self.rho.eval(&bb).unwrap().re;
                        psi1.eval(&bb).unwrap().conj() * lpsi2.eval(&bb).unwrap() * rho
                    };
                    let quad = |f: &dyn Fn(f64) -> Complex64| -> Complex64 {
                        if periodic {
                            Complex64::new(
                                numeric::periodic_trapezoid(|x| f(x).re, lo, hi, 256),
                                numeric::periodic_trapezoid(|x| f(x).im, lo, hi, 256),
                            )
                        } else {
                            Complex64::new(
                                numeric::simpson(|x| f(x).re, lo, hi, 600),
                                numeric::simpson(|x| f(x).im, lo, hi, 600),
                            )
                        }
                    };
                    let r = (quad(&integrand_l) - quad(&integrand_r)).norm();
                    if r > worst {
                        worst = r;
                    }
                }
            }
        }
        worst
    }
}

/// Build the representation operators for a validated orbit on a chart
/// whose polarization is spanned by coordinate axes.
pub fn lambda_rep(
    chart: &GroupChart,
    algebra: &LieAlgebraSpec,
    orbit: &OrbitData,
    xi: &FrameField,
) -> Result<LambdaRep, OrbitError> {
    let n = chart.dim();
    let h_axes = orbit.polarization.axis_indices().ok_or_else(|| {
        OrbitError::SplitIncompatible(
            "polarization rows must be distinct chart basis axes".to_string(),
        )
    })?;
    let mut h_sorted = h_axes.clone();
    h_sorted.sort_unstable();
    let q_axes: Vec<usize> = (0..n).filter(|mu| !h_sorted.contains(mu)).collect();
    let dim_q = q_axes.len();
    let q_vars: Vec<String> = if dim_q == 1 {
        vec!["q".to_string()]
    } else {
        (1..=dim_q).map(|k| format!("q{k}")).collect()
    };
    let id = chart.identity_exprs();

    // Product map F(c, q') = phi(h(c), s(q')) and its Jacobian at c = e_H.
    let c_vars: Vec<String> = (1..=h_sorted.len()).map(|k| format!("c{k}")).collect();
    let mut h_point = id.clone();
    for (i, &axis) in h_sorted.iter().enumerate() {
        h_point[axis] = SymExpr::var(&c_vars[i]);
    }
    let mut s_point = id.clone();
    for (j, &axis) in q_axes.iter().enumerate() {
        s_point[axis] = SymExpr::var(&q_vars[j]);
    }
    let f_map = chart.compose_exprs(&h_point, &s_point);

    let mut at_ch: BTreeMap<Symbol, SymExpr> = BTreeMap::new();
    for (i, cv) in c_vars.iter().enumerate() {
        at_ch.insert(Symbol::var(cv), id[h_sorted[i]].clone());
    }
    let k = h_sorted.len();
    let mut jac = vec![vec![SymExpr::zero(); n]; n];
    for mu in 0..n {
        for (col, cv) in c_vars.iter().enumerate() {
            jac[mu][col] = f_map[mu].diff(cv).subst(&at_ch);
        }
        for (j, qv) in q_vars.iter().enumerate() {
            jac[mu][k + j] = f_map[mu].diff(qv).subst(&at_ch);
        }
    }
    let (jinv, det) = symmat::invert(&jac);
    if det.is_zero() {
        return Err(OrbitError::SplitIncompatible(
            "product-map Jacobian is singular on the section".to_string(),
        ));
    }

    // Left frame restricted to the section.
    let mut on_section: BTreeMap<Symbol, SymExpr> = BTreeMap::new();
    for (mu, c) in chart.coords.iter().enumerate() {
        let val = match q_axes.iter().position(|&ax| ax == mu) {
            Some(j) => SymExpr::var(&q_vars[j]),
            None => id[mu].clone(),
        };
        on_section.insert(Symbol::var(c), val);
    }

    // lambda-tilde on the polarization slots.
    let hbar = SymExpr::param("hbar");
    let beta_by_axis: BTreeMap<usize, Rat> = {
        // beta was computed along the polarization rows in their original
        // order; map it onto the sorted axes.
        let axes = orbit.polarization.axis_indices().unwrap();
        axes.into_iter().zip(orbit.beta.iter().copied()).collect()
    };
    let lam_tilde: Vec<SymExpr> = h_sorted
        .iter()
        .map(|&axis| {
            let beta = beta_by_axis[&axis];
            orbit.lambda[axis].clone()
                + SymExpr::i() * hbar.clone() * SymExpr::rat(*beta.numer(), *beta.denom())
        })
        .collect();

    let mut a_coeffs = Vec::with_capacity(n);
    let mut b_coeffs = Vec::with_capacity(n);
    for gen in 0..algebra.dim {
        let v: Vec<SymExpr> = (0..n)
            .map(|mu| xi.coeffs[gen][mu].subst(&on_section))
            .collect();
        let w: Vec<SymExpr> = (0..n)
            .map(|row| {
                SymExpr::sum(
                    (0..n)
                        .map(|mu| jinv[row][mu].clone() * v[mu].clone())
                        .collect(),
                )
            })
            .collect();
        let a_row: Vec<SymExpr> = (0..dim_q).map(|j| w[k + j].clone()).collect();
        let b = SymExpr::i()
            * hbar.inv()
            * SymExpr::sum(
                (0..k)
                    .map(|i| w[i].clone() * lam_tilde[i].clone())
                    .collect(),
            );
        a_coeffs.push(a_row);
        b_coeffs.push(b);
    }

    let q_ranges: Vec<CoordRange> = q_axes.iter().map(|&ax| chart.ranges[ax]).collect();
    Ok(LambdaRep {
        q_vars,
        q_ranges,
        a: a_coeffs,
        b: b_coeffs,
        rho: SymExpr::one(),
        h_axes: h_sorted,
        q_axes,
    })
}

/// Substitute the symmetrized operator form of a dual-space polynomial:
/// each monomial f_{a1}...f_{ad} becomes the average over orderings of
/// (-i hbar l_{a1}) ... (-i hbar l_{ad}). Returns the scalar it collapses
/// to, in the orbit and hbar parameters.
pub fn casimir_scalar(
    k_poly: &SymExpr,
    rep: &LambdaRep,
    algebra: &LieAlgebraSpec,
    sbox: &SampleBox,
    cfg: EquivCfg,
) -> Result<SymExpr, OrbitError> {
    let names: Vec<String> = algebra.dual_coord_names();
    let ops: Vec<DiffOp> = (0..algebra.dim).map(|a| rep.momentum_op(a)).collect();
    let total = crate::operator::substitute_symmetrized(k_poly, &ops, &names);
    // All derivative coefficients must vanish and the zeroth-order part must
    // be independent of the reduced coordinates.
    let mut scalar = SymExpr::zero();
    for (idx, c) in total.terms() {
        if idx.iter().all(|d| *d == 0) {
            scalar = c.clone();
            continue;
        }
        equiv(c, &SymExpr::zero(), sbox, cfg).map_err(|w| {
            OrbitError::NonScalarCasimir(format!("derivative coefficient {idx:?} survives: {w}"))
        })?;
    }
    for qv in &rep.q_vars {
        equiv(&scalar.diff(qv), &SymExpr::zero(), sbox, cfg).map_err(|w| {
            OrbitError::NonScalarCasimir(format!("scalar still depends on {qv}: {w}"))
        })?;
    }
    Ok(scalar.expand())
}

/// Kernel of the induced representation in inverse orientation: the smooth
/// factor splits into a positive weight and a unimodular phase, and the
/// delta factor is carried structurally as the point map q' = q g^{-1}.
#[derive(Debug, Clone)]
pub struct DKernelSpec {
    /// Real positive modulus factor (the half-density of the subgroup).
    pub weight: SymExpr,
    /// Unimodular factor; |unit_phase| = 1 wherever sampled.
    pub unit_phase: SymExpr,
    /// Point map S(q0, g) = q0 . g^{-1} in chart coordinates and `q0`.
    pub point_map: SymExpr,
    /// Chart coordinate solved along the fiber {g : S(q0, g) = qp}, as an
    /// expression in `qp`, `q0` and the remaining coordinates.
    pub fiber_coord: String,
    pub fiber_solve: SymExpr,
    /// Orbit-space measure: density(lambda-params) * d lambda / (2 pi)^k.
    pub measure_density: SymExpr,
    pub measure_two_pi_power: i32,
}

impl DKernelSpec {
    pub fn phase(&self) -> SymExpr {
        self.weight.clone() * self.unit_phase.clone()
    }

    /// Basic structural invariants: phase(e) = 1, S(q0, e) = q0, and unit
    /// modulus of the unimodular factor at sampled points.
    pub fn check_basics(
        &self,
        chart: &GroupChart,
        sbox: &SampleBox,
        cfg: EquivCfg,
    ) -> Result<(), String> {
        let id = chart.identity_exprs();
        let mut at_e = BTreeMap::new();
        for (mu, c) in chart.coords.iter().enumerate() {
            at_e.insert(Symbol::var(c), id[mu].clone());
        }
        let phase_e = self.phase().subst(&at_e);
        equiv(&phase_e, &SymExpr::one(), sbox, cfg).map_err(|w| format!("phase(e) != 1: {w}"))?;
        let s_e = self.point_map.subst(&at_e);
        equiv(&s_e, &SymExpr::param("q0"), sbox, cfg).map_err(|w| format!("S(q0,e) != q0: {w}"))?;
        // |unit_phase|^2 = 1: evaluate at samples directly.
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for _ in 0..cfg.trials {
            let b = crate::expr::sample_admissible(&[&self.unit_phase], sbox, &mut rng, cfg.guard);
            let v = self.unit_phase.eval(&b).unwrap();
            if (v.norm() - 1.0).abs() > 1e-10 {
                return Err(format!("|unit phase| = {} away from 1", v.norm()));
            }
        }
        Ok(())
    }
}

/// Apply the induced representation T_g to a function of the reduced
/// coordinate: (T_g psi)(q) = U(h(q,g)) psi(q g), realized by evaluating the
/// inverse-oriented kernel data at the chart coordinates of g^{-1}.
pub fn induced_rep_apply(
    chart: &GroupChart,
    kernel: &DKernelSpec,
    g: &[f64],
    psi: &SymExpr,
) -> Result<SymExpr, crate::group::GroupError> {
    let ginv = chart.inverse_point(g)?;
    let mut at_ginv: BTreeMap<Symbol, SymExpr> = BTreeMap::new();
    for (mu, c) in chart.coords.iter().enumerate() {
        at_ginv.insert(Symbol::var(c), f64_expr(ginv[mu]));
    }
    let phase = kernel.phase().subst(&at_ginv);
    let smap = kernel.point_map.subst(&at_ginv);
    let moved = psi.subst_var("q", &smap);
    // The spectator index becomes the active variable of the output.
    let mut rename = BTreeMap::new();
    rename.insert(Symbol::param("q0"), SymExpr::var("q"));
    Ok((phase * moved).subst(&rename))
}

/// Exact dyadic representation of an f64 as a rational expression (every
/// finite double with moderate exponent is m / 2^k exactly).
pub fn f64_expr(v: f64) -> SymExpr {
    assert!(v.is_finite(), "cannot embed a non-finite value");
    let mut num = v;
    let mut den: i128 = 1;
    let mut guard = 0;
    while num.fract() != 0.0 && guard < 80 && num.abs() < 4.0e18 {
        num *= 2.0;
        den <<= 1;
        guard += 1;
    }
    SymExpr::rat(num.round() as i128, den)
}
