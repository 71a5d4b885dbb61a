//! Group-level geometry: charts in canonical coordinates of the second
//! kind, composition and inverse, derived left/right-invariant frames,
//! Maurer-Cartan coframes, and the Haar density.
//!
//! Frames are always derived from the composition law by exact
//! differentiation, never transcribed, so printed frames elsewhere act as
//! test oracles against these.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::algebra::LieAlgebraSpec;
use crate::expr::{equiv, rat_to_f64, EquivCfg, EquivWitness, Rat, SampleBox, SymExpr, Symbol};
use crate::symmat::{self, SymMat};

#[derive(Debug, Error)]
pub enum GroupError {
    #[error("point has a non-finite coordinate (out of chart)")]
    OutOfChart,
    #[error("chart law `{law}` fails: {witness}")]
    ChartLaw { law: &'static str, witness: String },
    #[error("derived frame matrix is degenerate (determinant vanishes identically)")]
    FrameDegenerate,
    #[error("frame commutators do not close on the structure constants at ({a},{b}): {witness}")]
    CommutatorMismatch { a: usize, b: usize, witness: String },
    #[error("structure equation residual nonzero for sigma^{a} at ({mu},{nu}): {witness}")]
    StructureEquation {
        a: usize,
        mu: usize,
        nu: usize,
        witness: String,
    },
    #[error("group is not unimodular: left and right densities differ ({witness})")]
    NonUnimodular { witness: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoordRange {
    Line,
    /// Half-open interval [start, start + period), wrapped by composition.
    Periodic {
        start: f64,
        period: f64,
    },
}

/// Chart of a Lie group in canonical coordinates of the second kind: the
/// exponential factor of the last coordinate stands leftmost in the product.
#[derive(Debug, Clone)]
pub struct GroupChart {
    pub coords: Vec<String>,
    pub ranges: Vec<CoordRange>,
    /// Composition expressions in variables `<coord>:1` (left factor) and
    /// `<coord>:2` (right factor).
    pub compose: Vec<SymExpr>,
    pub identity: Vec<Rat>,
    /// Inverse expressions in the bare coordinate variables.
    pub inverse: Vec<SymExpr>,
}

impl GroupChart {
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn left_var(&self, mu: usize) -> String {
        format!("{}:1", self.coords[mu])
    }

    pub fn right_var(&self, mu: usize) -> String {
        format!("{}:2", self.coords[mu])
    }

    pub fn identity_exprs(&self) -> Vec<SymExpr> {
        self.identity
            .iter()
            .map(|r| SymExpr::rat(*r.numer(), *r.denom()))
            .collect()
    }

    pub fn identity_f64(&self) -> Vec<f64> {
        self.identity.iter().map(|r| rat_to_f64(*r)).collect()
    }

    /// Composition with both slots substituted by arbitrary expressions.
    pub fn compose_exprs(&self, left: &[SymExpr], right: &[SymExpr]) -> Vec<SymExpr> {
        let mut map: BTreeMap<Symbol, SymExpr> = BTreeMap::new();
        for mu in 0..self.dim() {
            map.insert(Symbol::var(&self.left_var(mu)), left[mu].clone());
            map.insert(Symbol::var(&self.right_var(mu)), right[mu].clone());
        }
        self.compose.iter().map(|e| e.subst(&map)).collect()
    }

    /// Inverse with coordinates substituted by arbitrary expressions.
    pub fn inverse_exprs(&self, point: &[SymExpr]) -> Vec<SymExpr> {
        let mut map: BTreeMap<Symbol, SymExpr> = BTreeMap::new();
        for mu in 0..self.dim() {
            map.insert(Symbol::var(&self.coords[mu]), point[mu].clone());
        }
        self.inverse.iter().map(|e| e.subst(&map)).collect()
    }

    pub fn coord_exprs(&self) -> Vec<SymExpr> {
        self.coords.iter().map(|c| SymExpr::var(c)).collect()
    }

    fn wrap(&self, mu: usize, v: f64) -> f64 {
        match self.ranges[mu] {
            CoordRange::Line => v,
            CoordRange::Periodic { start, period } => {
                let mut t = (v - start) % period;
                if t < 0.0 {
                    t += period;
                }
                start + t
            }
        }
    }

    pub fn wrap_point(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .enumerate()
            .map(|(mu, v)| self.wrap(mu, *v))
            .collect()
    }

    /// Numeric composition; periodic coordinates wrapped into range.
    pub fn compose_points(&self, g1: &[f64], g2: &[f64]) -> Result<Vec<f64>, GroupError> {
        if g1.iter().chain(g2).any(|v| !v.is_finite()) {
            return Err(GroupError::OutOfChart);
        }
        let mut b = crate::expr::Binding::new();
        for mu in 0..self.dim() {
            b.set(&self.left_var(mu), num_complex::Complex64::new(g1[mu], 0.0));
            b.set(
                &self.right_var(mu),
                num_complex::Complex64::new(g2[mu], 0.0),
            );
        }
        let mut out = Vec::with_capacity(self.dim());
        for (mu, e) in self.compose.iter().enumerate() {
            let v = e.eval(&b).map_err(|_| GroupError::OutOfChart)?;
            if !v.re.is_finite() || v.im.abs() > 1e-12 {
                return Err(GroupError::OutOfChart);
            }
            out.push(self.wrap(mu, v.re));
        }
        Ok(out)
    }

    pub fn inverse_point(&self, g: &[f64]) -> Result<Vec<f64>, GroupError> {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(GroupError::OutOfChart);
        }
        let mut b = crate::expr::Binding::new();
        for mu in 0..self.dim() {
            b.set(&self.coords[mu], num_complex::Complex64::new(g[mu], 0.0));
        }
        let mut out = Vec::with_capacity(self.dim());
        for (mu, e) in self.inverse.iter().enumerate() {
            let v = e.eval(&b).map_err(|_| GroupError::OutOfChart)?;
            out.push(self.wrap(mu, v.re));
        }
        Ok(out)
    }

    /// Sampling box covering the chart coordinates (periodic ranges sampled
    /// over a full period, line coordinates over `half_width`).
    pub fn sample_box(&self, half_width: f64) -> SampleBox {
        let mut sbox = SampleBox::new().default_range(-half_width, half_width);
        for (mu, c) in self.coords.iter().enumerate() {
            let (lo, hi) = match self.ranges[mu] {
                CoordRange::Line => (-half_width, half_width),
                CoordRange::Periodic { start, period } => (start, start + period),
            };
            sbox = sbox.range(c, lo, hi);
            sbox = sbox.range(&format!("{c}:1"), lo, hi);
            sbox = sbox.range(&format!("{c}:2"), lo, hi);
            sbox = sbox.range(&format!("{c}:3"), lo, hi);
        }
        sbox
    }

    /// Identity laws as expressions, inverse and associativity by sampling.
    pub fn validate(&self, cfg: EquivCfg) -> Result<(), GroupError> {
        let n = self.dim();
        let sbox = self.sample_box(2.0);
        let coords = self.coord_exprs();
        let id = self.identity_exprs();

        let right_id = self.compose_exprs(&coords, &id);
        let left_id = self.compose_exprs(&id, &coords);
        for mu in 0..n {
            check_law(&right_id[mu], &coords[mu], &sbox, cfg, "g * e = g")?;
            check_law(&left_id[mu], &coords[mu], &sbox, cfg, "e * g = g")?;
        }

        let inv = self.inverse_exprs(&coords);
        let g_ginv = self.compose_exprs(&coords, &inv);
        let ginv_g = self.compose_exprs(&inv, &coords);
        for mu in 0..n {
            check_law(&g_ginv[mu], &id[mu], &sbox, cfg, "g * inv(g) = e")?;
            check_law(&ginv_g[mu], &id[mu], &sbox, cfg, "inv(g) * g = e")?;
        }

        // Associativity over three independent points.
        let a: Vec<SymExpr> = (0..n).map(|mu| SymExpr::var(&self.left_var(mu))).collect();
        let b: Vec<SymExpr> = (0..n).map(|mu| SymExpr::var(&self.right_var(mu))).collect();
        let c: Vec<SymExpr> = (0..n)
            .map(|mu| SymExpr::var(&format!("{}:3", self.coords[mu])))
            .collect();
        let ab_c = self.compose_exprs(&self.compose_exprs(&a, &b), &c);
        let a_bc = self.compose_exprs(&a, &self.compose_exprs(&b, &c));
        for mu in 0..n {
            check_law(
                &ab_c[mu],
                &a_bc[mu],
                &sbox,
                EquivCfg { trials: 100, ..cfg },
                "associativity",
            )?;
        }
        Ok(())
    }
}

fn check_law(
    lhs: &SymExpr,
    rhs: &SymExpr,
    sbox: &SampleBox,
    cfg: EquivCfg,
    law: &'static str,
) -> Result<(), GroupError> {
    equiv(lhs, rhs, sbox, cfg).map_err(|w| GroupError::ChartLaw {
        law,
        witness: w.to_string(),
    })
}

/// Coefficients of an invariant frame: `coeffs[a][mu]` is the d/dg^mu
/// component of the a-th field.
#[derive(Debug, Clone)]
pub struct FrameField {
    pub coeffs: SymMat,
}

impl FrameField {
    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    /// Apply the a-th field to a scalar expression.
    pub fn apply(&self, a: usize, coords: &[String], f: &SymExpr) -> SymExpr {
        SymExpr::sum(
            coords
                .iter()
                .enumerate()
                .map(|(mu, c)| self.coeffs[a][mu].clone() * f.diff(c))
                .collect(),
        )
    }

    /// Coordinate components of the commutator [X_a, X_b].
    pub fn bracket(&self, a: usize, b: usize, coords: &[String]) -> Vec<SymExpr> {
        (0..self.dim())
            .map(|mu| {
                let xa_on_b = self.apply(a, coords, &self.coeffs[b][mu]);
                let xb_on_a = self.apply(b, coords, &self.coeffs[a][mu]);
                xa_on_b - xb_on_a
            })
            .collect()
    }

    /// Check [X_a, X_b] = C^c_{ab} X_c componentwise.
    pub fn commutator_check(
        &self,
        algebra: &LieAlgebraSpec,
        coords: &[String],
        sbox: &SampleBox,
        cfg: EquivCfg,
    ) -> Result<(), GroupError> {
        let n = self.dim();
        for a in 0..n {
            for b in (a + 1)..n {
                let lhs = self.bracket(a, b, coords);
                for mu in 0..n {
                    let rhs = SymExpr::sum(
                        (0..n)
                            .map(|c| {
                                let k = algebra.structure_constant(c, a, b);
                                SymExpr::rat(*k.numer(), *k.denom()) * self.coeffs[c][mu].clone()
                            })
                            .collect(),
                    );
                    equiv(&lhs[mu], &rhs, sbox, cfg).map_err(|w| {
                        GroupError::CommutatorMismatch {
                            a: a + 1,
                            b: b + 1,
                            witness: w.to_string(),
                        }
                    })?;
                }
            }
        }
        Ok(())
    }
}

/// Check [X_a, Y_b] = 0 for two frames (mixed left/right commutators).
pub fn mixed_commutators_vanish(
    xi: &FrameField,
    eta: &FrameField,
    coords: &[String],
    sbox: &SampleBox,
    cfg: EquivCfg,
) -> Result<(), Box<EquivWitness>> {
    let n = xi.dim();
    for a in 0..n {
        for b in 0..n {
            for mu in 0..n {
                let lhs = xi.apply(a, coords, &eta.coeffs[b][mu])
                    - eta.apply(b, coords, &xi.coeffs[a][mu]);
                equiv(&lhs, &SymExpr::zero(), sbox, cfg)?;
            }
        }
    }
    Ok(())
}

fn frame_from_derivative(
    chart: &GroupChart,
    differentiate_left_slot: bool,
    negate: bool,
) -> Result<FrameField, GroupError> {
    let n = chart.dim();
    let tmp: Vec<SymExpr> = (0..n)
        .map(|mu| SymExpr::var(&format!("arg:{}", chart.coords[mu])))
        .collect();
    let coords = chart.coord_exprs();
    let composed = if differentiate_left_slot {
        chart.compose_exprs(&tmp, &coords)
    } else {
        chart.compose_exprs(&coords, &tmp)
    };
    let id = chart.identity_exprs();
    let mut at_identity: BTreeMap<Symbol, SymExpr> = BTreeMap::new();
    for mu in 0..n {
        at_identity.insert(
            Symbol::var(&format!("arg:{}", chart.coords[mu])),
            id[mu].clone(),
        );
    }
    let mut coeffs = vec![vec![SymExpr::zero(); n]; n];
    for a in 0..n {
        for mu in 0..n {
            let d = composed[mu].diff(&format!("arg:{}", chart.coords[a]));
            let v = d.subst(&at_identity);
            coeffs[a][mu] = if negate { -v } else { v };
        }
    }
    let frame = FrameField { coeffs };
    // Degeneracy guard: the determinant must not vanish identically.
    let d = symmat::det(&frame.coeffs);
    if equiv(
        &d,
        &SymExpr::zero(),
        &chart.sample_box(2.0),
        EquivCfg::default(),
    )
    .is_ok()
    {
        return Err(GroupError::FrameDegenerate);
    }
    Ok(frame)
}

/// Left-invariant frame: xi_a^mu(g) = d phi^mu(g, h)/dh^a at h = e.
pub fn left_invariant_frame(chart: &GroupChart) -> Result<FrameField, GroupError> {
    frame_from_derivative(chart, false, false)
}

/// Right-invariant frame: eta_a^mu(g) = -d phi^mu(h, g)/dh^a at h = e.
pub fn right_invariant_frame(chart: &GroupChart) -> Result<FrameField, GroupError> {
    frame_from_derivative(chart, true, true)
}

/// Dual coframe: sigma^a_mu with sigma^a(X_b) = delta^a_b.
#[derive(Debug, Clone)]
pub struct CoframeField {
    pub coeffs: SymMat,
    pub frame_det: SymExpr,
}

pub fn coframe(frame: &FrameField) -> CoframeField {
    let et = symmat::transpose(&frame.coeffs);
    let (inv, d) = symmat::invert(&et);
    CoframeField {
        coeffs: inv,
        frame_det: d,
    }
}

/// Residual of d sigma^a + 1/2 C^a_{bc} sigma^b ^ sigma^c, component by
/// component via exact exterior differentiation.
pub fn structure_equation_check(
    sigma: &CoframeField,
    algebra: &LieAlgebraSpec,
    coords: &[String],
    sbox: &SampleBox,
    cfg: EquivCfg,
) -> Result<(), GroupError> {
    let n = coords.len();
    for a in 0..n {
        for mu in 0..n {
            for nu in (mu + 1)..n {
                let dsigma =
                    sigma.coeffs[a][nu].diff(&coords[mu]) - sigma.coeffs[a][mu].diff(&coords[nu]);
                let mut wedge_terms = Vec::new();
                for b in 0..n {
                    for c in 0..n {
                        let k = algebra.structure_constant(a, b, c);
                        if k == Rat::from_integer(0) {
                            continue;
                        }
                        wedge_terms.push(
                            SymExpr::rat(*k.numer(), *k.denom())
                                * SymExpr::rat(1, 2)
                                * (sigma.coeffs[b][mu].clone() * sigma.coeffs[c][nu].clone()
                                    - sigma.coeffs[b][nu].clone() * sigma.coeffs[c][mu].clone()),
                        );
                    }
                }
                let residual = dsigma + SymExpr::sum(wedge_terms);
                equiv(&residual, &SymExpr::zero(), sbox, cfg).map_err(|w| {
                    GroupError::StructureEquation {
                        a: a + 1,
                        mu,
                        nu,
                        witness: w.to_string(),
                    }
                })?;
            }
        }
    }
    Ok(())
}

/// Density of the bi-invariant measure in chart coordinates, normalized to
/// one at the identity. Errors when left and right densities disagree.
pub fn haar_density(
    chart: &GroupChart,
    xi: &FrameField,
    eta: &FrameField,
    cfg: EquivCfg,
) -> Result<SymExpr, GroupError> {
    let n = chart.dim();
    // Right density: det sigma(g)/det sigma(e) = (-1)^n / det(eta matrix),
    // since eta(e) = -identity. Left density: 1 / det(xi matrix).
    let sign_r = if n % 2 == 0 {
        SymExpr::one()
    } else {
        SymExpr::int(-1)
    };
    let rho_r = sign_r * symmat::det(&eta.coeffs).inv();
    let rho_l = symmat::det(&xi.coeffs).inv();
    let sbox = chart.sample_box(2.0);
    equiv(&rho_r, &rho_l, &sbox, cfg).map_err(|w| GroupError::NonUnimodular {
        witness: w.to_string(),
    })?;
    Ok(rho_r)
}


#[cfg(test)]
mod tests {
    use super::test_groups::*;
    use super::*;
    use crate::expr::{equiv_bool, SymExpr};

    fn cfg() -> EquivCfg {
        EquivCfg::default()
    }

    #[test]
    fn charts_satisfy_group_laws() {
        for def in [e2(), solv4(), abelian2()] {
            def.chart.validate(cfg()).unwrap();
        }
    }

    #[test]
    fn e2_composition_matches_rotation_translation_action() {
        let def = e2();
        let g1 = [0.4, -0.7, 1.2];
        let g2 = [0.9, 0.3, 2.5];
        let out = def.chart.compose_points(&g1, &g2).unwrap();
        let (s, c) = g2[2].sin_cos();
        assert!((out[0] - (g2[0] + g1[0] * c + g1[1] * s)).abs() < 1e-14);
        assert!((out[1] - (g2[1] - g1[0] * s + g1[1] * c)).abs() < 1e-14);
        assert!((out[2] - (g1[2] + g2[2])).abs() < 1e-14);
    }

    #[test]
    fn compose_with_identity_and_inverse_numeric() {
        let def = solv4();
        let g = [0.3, -1.1, 0.8, 0.5];
        let e = def.chart.identity_f64();
        assert_eq!(def.chart.compose_points(&g, &e).unwrap(), g.to_vec());
        let ginv = def.chart.inverse_point(&g).unwrap();
        let prod = def.chart.compose_points(&g, &ginv).unwrap();
        for v in prod {
            assert!(v.abs() < 1e-12);
        }
        assert!(def
            .chart
            .compose_points(&[f64::NAN, 0.0, 0.0, 0.0], &e)
            .is_err());
    }

    #[test]
    fn periodic_coordinate_wraps() {
        let def = e2();
        let g1 = [0.0, 0.0, 4.0];
        let g2 = [0.0, 0.0, 4.0];
        let out = def.chart.compose_points(&g1, &g2).unwrap();
        assert!(out[2] >= 0.0 && out[2] < 6.283185307179586);
        assert!((out[2] - (8.0 - 6.283185307179586)).abs() < 1e-12);
    }

    #[test]
    fn e2_frames_match_printed_forms() {
        let def = e2();
        let xi = left_invariant_frame(&def.chart).unwrap();
        let eta = right_invariant_frame(&def.chart).unwrap();
        let sbox = def.chart.sample_box(2.0);
        let x = SymExpr::var("x");
        let y = SymExpr::var("y");
        let al = SymExpr::var("al");
        let expect_xi = [
            [SymExpr::one(), SymExpr::zero(), SymExpr::zero()],
            [SymExpr::zero(), SymExpr::one(), SymExpr::zero()],
            [y.clone(), -x.clone(), SymExpr::one()],
        ];
        let expect_eta = [
            [-al.cos(), al.sin(), SymExpr::zero()],
            [-al.sin(), -al.cos(), SymExpr::zero()],
            [SymExpr::zero(), SymExpr::zero(), SymExpr::int(-1)],
        ];
        for a in 0..3 {
            for mu in 0..3 {
                assert!(
                    equiv_bool(&xi.coeffs[a][mu], &expect_xi[a][mu], &sbox, cfg()),
                    "xi[{a}][{mu}] = {}",
                    xi.coeffs[a][mu]
                );
                assert!(
                    equiv_bool(&eta.coeffs[a][mu], &expect_eta[a][mu], &sbox, cfg()),
                    "eta[{a}][{mu}] = {}",
                    eta.coeffs[a][mu]
                );
            }
        }
    }

    #[test]
    fn frames_at_identity_are_plus_minus_basis() {
        for def in [e2(), solv4()] {
            let xi = left_invariant_frame(&def.chart).unwrap();
            let eta = right_invariant_frame(&def.chart).unwrap();
            let id = def.chart.identity_exprs();
            let mut map = std::collections::BTreeMap::new();
            for (mu, c) in def.chart.coords.iter().enumerate() {
                map.insert(Symbol::var(c), id[mu].clone());
            }
            for a in 0..def.chart.dim() {
                for mu in 0..def.chart.dim() {
                    let want = if a == mu {
                        SymExpr::one()
                    } else {
                        SymExpr::zero()
                    };
                    assert_eq!(xi.coeffs[a][mu].subst(&map), want);
                    assert_eq!(eta.coeffs[a][mu].subst(&map), -want);
                }
            }
        }
    }

    #[test]
    fn solv4_right_frame_e3_component() {
        // eta_3 = -exp(-x4) d/dx3
        let def = solv4();
        let eta = right_invariant_frame(&def.chart).unwrap();
        let sbox = def.chart.sample_box(1.5);
        let expect = -((-SymExpr::var("x4")).exp());
        assert!(equiv_bool(&eta.coeffs[2][2], &expect, &sbox, cfg()));
        for mu in [0usize, 1, 3] {
            assert!(equiv_bool(
                &eta.coeffs[2][mu],
                &SymExpr::zero(),
                &sbox,
                cfg()
            ));
        }
    }

    #[test]
    fn solv4_left_frame_derivation_disambiguates_printed_typos() {
        // The derived fields satisfy [xi2,xi3] = xi1 with xi2 = d/dx2;
        // a frame with xi2 = d/dx3 cannot.
        let def = solv4();
        let xi = left_invariant_frame(&def.chart).unwrap();
        let sbox = def.chart.sample_box(1.5);
        assert!(equiv_bool(&xi.coeffs[1][1], &SymExpr::one(), &sbox, cfg()));
        assert!(equiv_bool(&xi.coeffs[1][2], &SymExpr::zero(), &sbox, cfg()));
        // xi4 carries the d/dx4 component required by xi_a(e) = e_a.
        assert!(equiv_bool(&xi.coeffs[3][3], &SymExpr::one(), &sbox, cfg()));
    }

    #[test]
    fn frame_commutators_close_on_structure_constants() {
        for def in [e2(), solv4(), abelian2()] {
            let sbox = def.chart.sample_box(1.5);
            let xi = left_invariant_frame(&def.chart).unwrap();
            let eta = right_invariant_frame(&def.chart).unwrap();
            xi.commutator_check(&def.algebra, &def.chart.coords, &sbox, cfg())
                .unwrap();
            eta.commutator_check(&def.algebra, &def.chart.coords, &sbox, cfg())
                .unwrap();
            mixed_commutators_vanish(&xi, &eta, &def.chart.coords, &sbox, cfg()).unwrap();
        }
    }

    #[test]
    fn coframes_satisfy_structure_equations() {
        for def in [e2(), solv4()] {
            let sbox = def.chart.sample_box(1.5);
            let eta = right_invariant_frame(&def.chart).unwrap();
            let sigma = coframe(&eta);
            structure_equation_check(&sigma, &def.algebra, &def.chart.coords, &sbox, cfg())
                .unwrap();
            // sigma^a(eta_b) = delta^a_b
            let prod =
                crate::symmat::mat_mul(&sigma.coeffs, &crate::symmat::transpose(&eta.coeffs));
            for i in 0..def.chart.dim() {
                for j in 0..def.chart.dim() {
                    let want = if i == j {
                        SymExpr::one()
                    } else {
                        SymExpr::zero()
                    };
                    assert!(equiv_bool(&prod[i][j], &want, &sbox, cfg()));
                }
            }
        }
        // Abelian group with the constant frame: d sigma = 0 termwise.
        let ab = abelian2();
        let eta = right_invariant_frame(&ab.chart).unwrap();
        let sigma = coframe(&eta);
        for a in 0..2 {
            for mu in 0..2 {
                assert!(sigma.coeffs[a][mu].diff("u").is_zero());
                assert!(sigma.coeffs[a][mu].diff("v").is_zero());
            }
        }
        structure_equation_check(
            &sigma,
            &ab.algebra,
            &ab.chart.coords,
            &ab.chart.sample_box(2.0),
            cfg(),
        )
        .unwrap();
    }

    #[test]
    fn haar_density_is_one_for_catalog_groups() {
        for def in [e2(), solv4(), abelian2()] {
            let xi = left_invariant_frame(&def.chart).unwrap();
            let eta = right_invariant_frame(&def.chart).unwrap();
            let rho = haar_density(&def.chart, &xi, &eta, cfg()).unwrap();
            let sbox = def.chart.sample_box(1.5);
            assert!(
                equiv_bool(&rho, &SymExpr::one(), &sbox, cfg()),
                "group {} density {rho}",
                def.name
            );
        }
    }

    #[test]
    fn associativity_sampled_at_random_triples() {
        // chart.validate already tests this symbolically at 100 samples;
        // spot-check numerically for the solvable group as well.
        let def = solv4();
        use rand::RngExt;
        use rand_chacha::rand_core::SeedableRng;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let p = |rng: &mut ChaCha8Rng| {
                (0..4)
                    .map(|_| rng.random_range(-1.5..1.5))
                    .collect::<Vec<f64>>()
            };
            let (a, b, c) = (p(&mut rng), p(&mut rng), p(&mut rng));
            let ab_c = def
                .chart
                .compose_points(&def.chart.compose_points(&a, &b).unwrap(), &c)
                .unwrap();
            let a_bc = def
                .chart
                .compose_points(&a, &def.chart.compose_points(&b, &c).unwrap())
                .unwrap();
            for (u, v) in ab_c.iter().zip(&a_bc) {
                assert!((u - v).abs() < 1e-10);
            }
        }
    }
}
