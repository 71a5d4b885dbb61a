//! Right-invariant metric machinery: coordinate metric from the constant
//! frame matrix, Christoffel symbols, curvature tensors, and the group
//! Laplacian as a quadratic expression in the right-invariant frame.
//!
//! Curvature sign convention: R^rho_{sigma mu nu} = d_nu Gamma^rho_{mu
//! sigma} - d_mu Gamma^rho_{nu sigma} + Gamma^rho_{nu lam} Gamma^lam_{mu
//! sigma} - Gamma^rho_{mu lam} Gamma^lam_{nu sigma}, with Ricci_{sigma nu}
//! = R^rho_{sigma rho nu}. The overall sign is pinned by the motion-group
//! scalar curvature test (flat-space conventions differ across sources).

use num_complex::Complex64;
use thiserror::Error;

use crate::expr::{equiv, Binding, EquivCfg, SampleBox, SymExpr};
use crate::group::{CoframeField, FrameField, GroupChart};
use crate::numeric;
use crate::operator::DiffOp;
use crate::symmat::{self, SymMat};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("frame metric matrix is not symmetric at ({0},{1})")]
    NotSymmetric(usize, usize),
    #[error("metric is singular: {0}")]
    SingularMetric(String),
    #[error("metric inverse pair fails G^ac G_cb = delta at ({0},{1}): {2}")]
    InversePair(usize, usize, String),
}

/// Constant frame metric: G^{ab} and its exact symbolic inverse G_{ab}.
#[derive(Debug, Clone)]
pub struct MetricSpec {
    pub upper: SymMat,
    pub lower: SymMat,
}

impl MetricSpec {
    /// Build from G^{ab}; entries may be rationals or parameter symbols.
    pub fn from_upper(
        upper: SymMat,
        sbox: &SampleBox,
        cfg: EquivCfg,
    ) -> Result<Self, GeometryError> {
        let n = upper.len();
        for i in 0..n {
            for j in (i + 1)..n {
                if upper[i][j] != upper[j][i] {
                    return Err(GeometryError::NotSymmetric(i, j));
                }
            }
        }
        let (lower, det) = symmat::invert(&upper);
        if equiv(&det, &SymExpr::zero(), sbox, cfg).is_ok() {
            return Err(GeometryError::SingularMetric(format!("det {det}")));
        }
        let spec = MetricSpec { upper, lower };
        spec.check_inverse_pair(sbox, cfg)?;
        Ok(spec)
    }

    fn check_inverse_pair(&self, sbox: &SampleBox, cfg: EquivCfg) -> Result<(), GeometryError> {
        let n = self.upper.len();
        let prod = symmat::mat_mul(&self.upper, &self.lower);
        for i in 0..n {
            for j in 0..n {
                let want = if i == j {
                    SymExpr::one()
                } else {
                    SymExpr::zero()
                };
                equiv(&prod[i][j], &want, sbox, cfg)
                    .map_err(|w| GeometryError::InversePair(i, j, w.to_string()))?;
            }
        }
        Ok(())
    }
}

/// Everything derived from one (chart, frame metric) pair. Built once,
/// immutable afterwards.
#[derive(Debug, Clone)]
pub struct GeometryCache {
    pub coords: Vec<String>,
    pub metric: MetricSpec,
    /// g_{mu nu}(g)
    pub g_lower: SymMat,
    /// g^{mu nu}(g)
    pub g_upper: SymMat,
    /// gamma[rho][nu][mu] = Gamma^rho_{nu mu}
    pub gamma: Vec<SymMat>,
    /// riemann[rho][sigma][mu][nu] = R^rho_{sigma mu nu}
    pub riemann: Vec<Vec<SymMat>>,
    /// ricci[sigma][nu]
    pub ricci: SymMat,
    pub scalar: SymExpr,
    /// Laplace operator G^{ab} eta_a eta_b expanded in coordinates.
    pub laplacian: DiffOp,
}

/// Assemble the metric pair on the chart from the frame matrix:
/// g_{mu nu} = G_ab sigma^a_mu sigma^b_nu, g^{mu nu} = G^{ab} eta_a^mu eta_b^nu.
pub fn metric_tensor(
    metric: &MetricSpec,
    eta: &FrameField,
    sigma: &CoframeField,
) -> (SymMat, SymMat) {
    let n = eta.dim();
    let mut g_lower = vec![vec![SymExpr::zero(); n]; n];
    let mut g_upper = vec![vec![SymExpr::zero(); n]; n];
    for mu in 0..n {
        for nu in 0..n {
            let mut lo = Vec::new();
            let mut up = Vec::new();
            for a in 0..n {
                for b in 0..n {
                    if !metric.lower[a][b].is_zero() {
                        lo.push(
                            metric.lower[a][b].clone()
                                * sigma.coeffs[a][mu].clone()
                                * sigma.coeffs[b][nu].clone(),
                        );
                    }
                    if !metric.upper[a][b].is_zero() {
                        up.push(
                            metric.upper[a][b].clone()
                                * eta.coeffs[a][mu].clone()
                                * eta.coeffs[b][nu].clone(),
                        );
                    }
                }
            }
            g_lower[mu][nu] = SymExpr::sum(lo);
            g_upper[mu][nu] = SymExpr::sum(up);
        }
    }
    (g_lower, g_upper)
}

/// Christoffel symbols of the metric-compatible symmetric connection.
pub fn christoffels(coords: &[String], g_lower: &SymMat, g_upper: &SymMat) -> Vec<SymMat> {
    let n = coords.len();
    let mut gamma = vec![vec![vec![SymExpr::zero(); n]; n]; n];
    // Precompute first derivatives of the metric.
    let mut dg = vec![vec![vec![SymExpr::zero(); n]; n]; n];
    for tau in 0..n {
        for mu in 0..n {
            for nu in 0..n {
                dg[tau][mu][nu] = g_lower[mu][nu].diff(&coords[tau]);
            }
        }
    }
    for rho in 0..n {
        for nu in 0..n {
            for mu in 0..n {
                let mut terms = Vec::new();
                for tau in 0..n {
                    if g_upper[rho][tau].is_zero() {
                        continue;
                    }
                    let inner =
                        dg[nu][tau][mu].clone() + dg[mu][nu][tau].clone() - dg[tau][nu][mu].clone();
                    terms.push(SymExpr::rat(1, 2) * g_upper[rho][tau].clone() * inner);
                }
                gamma[rho][nu][mu] = SymExpr::sum(terms);
            }
        }
    }
    gamma
}

/// Riemann, Ricci and scalar curvature from the Christoffels by exact
/// differentiation.
pub fn curvature(
    coords: &[String],
    gamma: &[SymMat],
    g_upper: &SymMat,
) -> (Vec<Vec<SymMat>>, SymMat, SymExpr) {
    let n = coords.len();
    let mut riemann = vec![vec![vec![vec![SymExpr::zero(); n]; n]; n]; n];
    for rho in 0..n {
        for sigma in 0..n {
            for mu in 0..n {
                for nu in 0..n {
                    let d_nu = gamma[rho][mu][sigma].diff(&coords[nu]);
                    let d_mu = gamma[rho][nu][sigma].diff(&coords[mu]);
                    let mut quad = Vec::new();
                    for lam in 0..n {
                        quad.push(gamma[rho][nu][lam].clone() * gamma[lam][mu][sigma].clone());
                        quad.push(
                            SymExpr::int(-1)
                                * gamma[rho][mu][lam].clone()
                                * gamma[lam][nu][sigma].clone(),
                        );
                    }
                    riemann[rho][sigma][mu][nu] = d_nu - d_mu + SymExpr::sum(quad);
                }
            }
        }
    }
    let mut ricci = vec![vec![SymExpr::zero(); n]; n];
    for sigma in 0..n {
        for nu in 0..n {
            ricci[sigma][nu] = SymExpr::sum(
                (0..n)
                    .map(|rho| riemann[rho][sigma][rho][nu].clone())
                    .collect(),
            );
        }
    }
    let scalar = SymExpr::sum(
        (0..n)
            .flat_map(|sigma| {
                let ricci = &ricci;
                let g_upper = &g_upper;
                (0..n).map(move |nu| g_upper[sigma][nu].clone() * ricci[sigma][nu].clone())
            })
            .collect(),
    );
    (riemann, ricci, scalar)
}

/// Laplace operator as the quadratic frame polynomial G^{ab} eta_a eta_b,
/// expanded into coordinate coefficients. With a symmetric G this equals the
/// symmetrized ordering, which makes the operator formally self-adjoint.
pub fn laplacian(metric: &MetricSpec, eta: &FrameField, coords: &[String]) -> DiffOp {
    let n = eta.dim();
    let vars: Vec<String> = coords.to_vec();
    let eta_ops: Vec<DiffOp> = (0..n)
        .map(|a| DiffOp::first_order(vars.clone(), &eta.coeffs[a], SymExpr::zero()))
        .collect();
    let mut out = DiffOp::zero(vars);
    for a in 0..n {
        for b in 0..n {
            if metric.upper[a][b].is_zero() {
                continue;
            }
            out = out.add(
                &eta_ops[a]
                    .sym_compose(&eta_ops[b])
                    .scale(&metric.upper[a][b]),
            );
        }
    }
    out
}

pub fn build_geometry(
    chart: &GroupChart,
    eta: &FrameField,
    sigma: &CoframeField,
    metric: MetricSpec,
) -> GeometryCache {
    let coords = chart.coords.clone();
    let (g_lower, g_upper) = metric_tensor(&metric, eta, sigma);
    let gamma = christoffels(&coords, &g_lower, &g_upper);
    let (riemann, ricci, scalar) = curvature(&coords, &gamma, &g_upper);
    let laplacian = laplacian(&metric, eta, &coords);
    GeometryCache {
        coords,
        metric,
        g_lower,
        g_upper,
        gamma,
        riemann,
        ricci,
        scalar,
        laplacian,
    }
}

impl GeometryCache {
    /// Residual of nabla_rho g_{mu nu} at the worst sampled component.
    pub fn metric_compatibility(&self, sbox: &SampleBox, cfg: EquivCfg) -> Result<(), String> {
        let n = self.coords.len();
        for rho in 0..n {
            for mu in 0..n {
                for nu in 0..n {
                    let mut expr = self.g_lower[mu][nu].diff(&self.coords[rho]);
                    for lam in 0..n {
                        expr = expr
                            - self.gamma[lam][rho][mu].clone() * self.g_lower[lam][nu].clone()
                            - self.gamma[lam][rho][nu].clone() * self.g_lower[mu][lam].clone();
                    }
                    equiv(&expr, &SymExpr::zero(), sbox, cfg)
                        .map_err(|w| format!("nabla_{rho} g_[{mu}][{nu}]: {w}"))?;
                }
            }
        }
        Ok(())
    }

    /// First Bianchi identity residual, sampled.
    pub fn bianchi_first(&self, sbox: &SampleBox, cfg: EquivCfg) -> Result<(), String> {
        let n = self.coords.len();
        for rho in 0..n {
            for sigma in 0..n {
                for mu in 0..n {
                    for nu in 0..n {
                        let expr = self.riemann[rho][sigma][mu][nu].clone()
                            + self.riemann[rho][mu][nu][sigma].clone()
                            + self.riemann[rho][nu][sigma][mu].clone();
                        equiv(&expr, &SymExpr::zero(), sbox, cfg)
                            .map_err(|w| format!("bianchi [{rho}{sigma}{mu}{nu}]: {w}"))?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Evaluate g_{mu nu} numerically at a point (parameters from `params`).
    pub fn g_lower_at(&self, point: &[f64], params: &Binding) -> Option<Vec<Vec<f64>>> {
        let n = self.coords.len();
        let mut b = params.clone();
        for (mu, c) in self.coords.iter().enumerate() {
            b.set(c, Complex64::new(point[mu], 0.0));
        }
        let mut out = vec![vec![0.0; n]; n];
        for mu in 0..n {
            for nu in 0..n {
                out[mu][nu] = self.g_lower[mu][nu].eval(&b).ok()?.re;
            }
        }
        Some(out)
    }

    /// Scalar curvature of the symbolic pipeline evaluated at a point.
    pub fn scalar_at(&self, point: &[f64], params: &Binding) -> Option<f64> {
        let mut b = params.clone();
        for (mu, c) in self.coords.iter().enumerate() {
            b.set(c, Complex64::new(point[mu], 0.0));
        }
        self.scalar.eval(&b).ok().map(|z| z.re)
    }
}

/// Scalar curvature by nested fourth-order finite differences of the metric
/// samples alone; independent of the symbolic differentiation path.
pub fn scalar_curvature_fd<F>(g_at: &F, point: &[f64], h: f64) -> Option<f64>
where
    F: Fn(&[f64]) -> Option<Vec<Vec<f64>>>,
{
    let n = point.len();
    let gamma_at = |x: &[f64]| -> Option<Vec<Vec<Vec<f64>>>> {
        let g = g_at(x)?;
        let ginv = numeric::invert_f64(&g)?;
        // dg[tau][mu][nu]
        let mut dg = vec![vec![vec![0.0; n]; n]; n];
        for tau in 0..n {
            let sample = |s: f64| -> Option<Vec<Vec<f64>>> {
                let mut y = x.to_vec();
                y[tau] += s;
                g_at(&y)
            };
            let (g2p, g1p, g1m, g2m) =
                (sample(2.0 * h)?, sample(h)?, sample(-h)?, sample(-2.0 * h)?);
            for mu in 0..n {
                for nu in 0..n {
                    dg[tau][mu][nu] = (-g2p[mu][nu] + 8.0 * g1p[mu][nu] - 8.0 * g1m[mu][nu]
                        + g2m[mu][nu])
                        / (12.0 * h);
                }
            }
        }
        let mut gamma = vec![vec![vec![0.0; n]; n]; n];
        for rho in 0..n {
            for nu in 0..n {
                for mu in 0..n {
                    let mut acc = 0.0;
                    for tau in 0..n {
                        acc += 0.5
                            * ginv[rho][tau]
                            * (dg[nu][tau][mu] + dg[mu][nu][tau] - dg[tau][nu][mu]);
                    }
                    gamma[rho][nu][mu] = acc;
                }
            }
        }
        Some(gamma)
    };

    let gamma0 = gamma_at(point)?;
    // dGamma[mu][rho][nu][sigma] = d_mu Gamma^rho_{nu sigma}
    let mut dgamma = vec![vec![vec![vec![0.0; n]; n]; n]; n];
    for mu in 0..n {
        let sample = |s: f64| -> Option<Vec<Vec<Vec<f64>>>> {
            let mut y = point.to_vec();
            y[mu] += s;
            gamma_at(&y)
        };
        let (g2p, g1p, g1m, g2m) = (sample(2.0 * h)?, sample(h)?, sample(-h)?, sample(-2.0 * h)?);
        for rho in 0..n {
            for nu in 0..n {
                for sigma in 0..n {
                    dgamma[mu][rho][nu][sigma] = (-g2p[rho][nu][sigma] + 8.0 * g1p[rho][nu][sigma]
                        - 8.0 * g1m[rho][nu][sigma]
                        + g2m[rho][nu][sigma])
                        / (12.0 * h);
                }
            }
        }
    }
    let g = g_at(point)?;
    let ginv = numeric::invert_f64(&g)?;
    let mut scalar = 0.0;
    for sigma in 0..n {
        for nu in 0..n {
            let mut ric = 0.0;
            for rho in 0..n {
                let mut quad = 0.0;
                for lam in 0..n {
                    quad += gamma0[rho][nu][lam] * gamma0[lam][rho][sigma]
                        - gamma0[rho][rho][lam] * gamma0[lam][nu][sigma];
                }
                ric += dgamma[nu][rho][rho][sigma] - dgamma[rho][rho][nu][sigma] + quad;
            }
            scalar += ginv[sigma][nu] * ric;
        }
    }
    Some(scalar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{equiv_bool, Binding};
    use crate::group::test_groups::*;
    use crate::group::{coframe, left_invariant_frame, right_invariant_frame};
    use rand::RngExt;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> EquivCfg {
        EquivCfg::default()
    }

    fn param_box(chart: &GroupChart) -> SampleBox {
        let mut sbox = chart.sample_box(1.5);
        for d in ["d1", "d2", "d3"] {
            sbox = sbox.range(d, 0.5, 2.0);
        }
        sbox
    }

    fn e2_metric(sbox: &SampleBox) -> MetricSpec {
        let d = |k: usize| SymExpr::param(&format!("d{k}"));
        let z = SymExpr::zero;
        MetricSpec::from_upper(
            vec![
                vec![d(1), z(), z()],
                vec![z(), d(2), z()],
                vec![z(), z(), d(3)],
            ],
            sbox,
            cfg(),
        )
        .unwrap()
    }

    fn solv4_metric(sbox: &SampleBox) -> MetricSpec {
        let d = |k: usize| SymExpr::int(2) * SymExpr::param(&format!("d{k}"));
        let z = SymExpr::zero;
        MetricSpec::from_upper(
            vec![
                vec![z(), z(), z(), d(1)],
                vec![z(), z(), d(2), z()],
                vec![z(), d(2), z(), z()],
                vec![d(1), z(), z(), z()],
            ],
            sbox,
            cfg(),
        )
        .unwrap()
    }

    fn build(def: &crate::config::GroupDef, metric: MetricSpec) -> GeometryCache {
        let eta = right_invariant_frame(&def.chart).unwrap();
        let sigma = coframe(&eta);
        build_geometry(&def.chart, &eta, &sigma, metric)
    }

    #[test]
    fn e2_line_element_matches_printed_diagonal() {
        let def = e2();
        let sbox = param_box(&def.chart);
        let geo = build(&def, e2_metric(&sbox));
        let al = SymExpr::var("al");
        let di = |k: usize| SymExpr::param(&format!("d{k}")).inv();
        // Printed diagonal entries of the line element.
        let gxx = di(1) * al.cos().pow(2) + di(2) * al.sin().pow(2);
        let gyy = di(1) * al.sin().pow(2) + di(2) * al.cos().pow(2);
        assert!(equiv_bool(&geo.g_lower[0][0], &gxx, &sbox, cfg()));
        assert!(equiv_bool(&geo.g_lower[1][1], &gyy, &sbox, cfg()));
        assert!(equiv_bool(&geo.g_lower[2][2], &di(3), &sbox, cfg()));
        // The display omits the cross term; the exact inverse has one.
        let gxy = al.cos() * al.sin() * (di(2) - di(1));
        assert!(equiv_bool(&geo.g_lower[0][1], &gxy, &sbox, cfg()));
        // and g^{mu rho} g_{rho nu} = delta
        let prod = symmat::mat_mul(&geo.g_upper, &geo.g_lower);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j {
                    SymExpr::one()
                } else {
                    SymExpr::zero()
                };
                assert!(equiv_bool(&prod[i][j], &want, &sbox, cfg()));
            }
        }
    }

    #[test]
    fn abelian_identity_metric_is_euclidean() {
        let def = abelian2();
        let sbox = def.chart.sample_box(2.0);
        let metric = MetricSpec::from_upper(
            vec![
                vec![SymExpr::one(), SymExpr::zero()],
                vec![SymExpr::zero(), SymExpr::one()],
            ],
            &sbox,
            cfg(),
        )
        .unwrap();
        let geo = build(&def, metric);
        for mu in 0..2 {
            for nu in 0..2 {
                let want = if mu == nu {
                    SymExpr::one()
                } else {
                    SymExpr::zero()
                };
                assert_eq!(geo.g_lower[mu][nu], want);
                for rho in 0..2 {
                    assert!(geo.gamma[rho][mu][nu].is_zero());
                }
            }
        }
        assert!(geo.scalar.is_zero());
        // Laplacian is the flat sum of second derivatives.
        assert!(geo.laplacian.coefficient(&[2, 0]).is_one());
        assert!(geo.laplacian.coefficient(&[0, 2]).is_one());
        assert!(geo.laplacian.coefficient(&[1, 1]).is_zero());
        assert!(geo.laplacian.coefficient(&[1, 0]).is_zero());
    }

    #[test]
    fn christoffels_are_symmetric_and_metric_compatible() {
        let def = e2();
        let sbox = param_box(&def.chart);
        let geo = build(&def, e2_metric(&sbox));
        for rho in 0..3 {
            for mu in 0..3 {
                for nu in 0..3 {
                    assert_eq!(geo.gamma[rho][mu][nu], geo.gamma[rho][nu][mu]);
                }
            }
        }
        geo.metric_compatibility(&sbox, cfg()).unwrap();
    }

    #[test]
    fn christoffels_match_frame_decomposition() {
        // Gamma^rho_{nu mu} = Gamma^a_{bd} sigma^b_nu sigma^d_mu eta_a^rho
        //                   + eta_a^rho d_mu sigma^a_nu,
        // Gamma^a_{bd} = -1/2 C^a_{bd} - 1/2 G^{ac} (G_eb C^e_{dc} + G_ed C^e_{bc}).
        let def = e2();
        let sbox = param_box(&def.chart);
        let metric = e2_metric(&sbox);
        let eta = right_invariant_frame(&def.chart).unwrap();
        let sigma = coframe(&eta);
        let geo = build(&def, metric.clone());
        let n = 3;
        let rat = |r: crate::expr::Rat| SymExpr::rat(*r.numer(), *r.denom());
        let mut frame_gamma = vec![vec![vec![SymExpr::zero(); n]; n]; n];
        for a in 0..n {
            for b in 0..n {
                for d in 0..n {
                    let mut terms =
                        vec![SymExpr::rat(-1, 2) * rat(def.algebra.structure_constant(a, b, d))];
                    for c in 0..n {
                        if metric.upper[a][c].is_zero() {
                            continue;
                        }
                        for e in 0..n {
                            let inner = metric.lower[e][b].clone()
                                * rat(def.algebra.structure_constant(e, d, c))
                                + metric.lower[e][d].clone()
                                    * rat(def.algebra.structure_constant(e, b, c));
                            terms.push(SymExpr::rat(-1, 2) * metric.upper[a][c].clone() * inner);
                        }
                    }
                    frame_gamma[a][b][d] = SymExpr::sum(terms);
                }
            }
        }
        for rho in 0..n {
            for nu in 0..n {
                for mu in 0..n {
                    let mut terms = Vec::new();
                    for a in 0..n {
                        for b in 0..n {
                            for d in 0..n {
                                terms.push(
                                    frame_gamma[a][b][d].clone()
                                        * sigma.coeffs[b][nu].clone()
                                        * sigma.coeffs[d][mu].clone()
                                        * eta.coeffs[a][rho].clone(),
                                );
                            }
                        }
                        terms.push(
                            eta.coeffs[a][rho].clone()
                                * sigma.coeffs[a][nu].diff(&def.chart.coords[mu]),
                        );
                    }
                    let expect = SymExpr::sum(terms);
                    assert!(
                        equiv_bool(&geo.gamma[rho][nu][mu], &expect, &sbox, cfg()),
                        "Gamma^{rho}_{nu}{mu}"
                    );
                }
            }
        }
    }

    #[test]
    fn e2_scalar_curvature_matches_closed_form() {
        let def = e2();
        let sbox = param_box(&def.chart);
        let geo = build(&def, e2_metric(&sbox));
        let d = |k: usize| SymExpr::param(&format!("d{k}"));
        let expect = d(3) * (d(1) - d(2)).pow(2) * SymExpr::rat(1, 2) * d(1).inv() * d(2).inv();
        assert!(
            equiv_bool(&geo.scalar, &expect, &sbox, EquivCfg { tol: 1e-8, ..cfg() }),
            "scalar = {}",
            geo.scalar
        );
        // Equal transverse weights flatten the scalar curvature.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10 {
            let d1 = rng.random_range(0.5..2.0);
            let d3 = rng.random_range(0.5..2.0);
            let params = Binding::from_pairs(&[("d1", d1), ("d2", d1), ("d3", d3)]);
            let pt = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(0.0..6.28),
            ];
            let r = geo.scalar_at(&pt, &params).unwrap();
            assert!(r.abs() < 1e-10, "R = {r} at d1 = d2");
        }
    }

    #[test]
    fn scalar_curvature_agrees_with_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for (def, metric_of) in [
            (e2(), e2_metric as fn(&SampleBox) -> MetricSpec),
            (solv4(), solv4_metric as fn(&SampleBox) -> MetricSpec),
        ] {
            let sbox = param_box(&def.chart);
            let geo = build(&def, metric_of(&sbox));
            for _ in 0..20 {
                let params = Binding::from_pairs(&[
                    ("d1", rng.random_range(0.5..2.0)),
                    ("d2", rng.random_range(0.5..2.0)),
                    ("d3", rng.random_range(0.5..2.0)),
                ]);
                let pt: Vec<f64> = (0..def.chart.dim())
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect();
                let sym = geo.scalar_at(&pt, &params).unwrap();
                let fd = scalar_curvature_fd(&|x: &[f64]| geo.g_lower_at(x, &params), &pt, 2e-3)
                    .unwrap();
                assert!(
                    (sym - fd).abs() <= 1e-6 * (1.0 + sym.abs()),
                    "group {}: sym {sym} vs fd {fd}",
                    def.name
                );
            }
        }
    }

    #[test]
    fn bianchi_identity_sampled() {
        let def = e2();
        let sbox = param_box(&def.chart);
        let geo = build(&def, e2_metric(&sbox));
        geo.bianchi_first(
            &sbox,
            EquivCfg {
                trials: 32,
                ..cfg()
            },
        )
        .unwrap();
    }

    #[test]
    fn e2_laplacian_matches_printed_operator() {
        let def = e2();
        let sbox = param_box(&def.chart);
        let geo = build(&def, e2_metric(&sbox));
        let al = SymExpr::var("al");
        let d = |k: usize| SymExpr::param(&format!("d{k}"));
        let cases: Vec<(Vec<u8>, SymExpr)> = vec![
            (
                vec![2, 0, 0],
                d(1) * al.cos().pow(2) + d(2) * al.sin().pow(2),
            ),
            (
                vec![0, 2, 0],
                d(1) * al.sin().pow(2) + d(2) * al.cos().pow(2),
            ),
            (
                vec![1, 1, 0],
                (d(2) - d(1)) * SymExpr::int(2) * al.sin() * al.cos(),
            ),
            (vec![0, 0, 2], d(3)),
            (vec![1, 0, 0], SymExpr::zero()),
            (vec![0, 1, 0], SymExpr::zero()),
            (vec![0, 0, 1], SymExpr::zero()),
        ];
        for (idx, want) in cases {
            assert!(
                equiv_bool(&geo.laplacian.coefficient(&idx), &want, &sbox, cfg()),
                "coefficient {idx:?}: {}",
                geo.laplacian.coefficient(&idx)
            );
        }
    }

    #[test]
    fn solv4_laplacian_matches_printed_operator() {
        let def = solv4();
        let sbox = param_box(&def.chart);
        let geo = build(&def, solv4_metric(&sbox));
        let d = |k: usize| SymExpr::param(&format!("d{k}"));
        let x3 = SymExpr::var("x3");
        let cases: Vec<(Vec<u8>, SymExpr)> = vec![
            (vec![1, 0, 0, 1], SymExpr::int(4) * d(1)),
            (vec![0, 1, 1, 0], SymExpr::int(4) * d(2)),
            (vec![1, 0, 1, 0], SymExpr::int(4) * d(2) * x3),
            (vec![1, 0, 0, 0], SymExpr::int(2) * d(2)),
            (vec![2, 0, 0, 0], SymExpr::zero()),
            (vec![0, 2, 0, 0], SymExpr::zero()),
            (vec![0, 0, 2, 0], SymExpr::zero()),
            (vec![0, 0, 0, 2], SymExpr::zero()),
            (vec![0, 1, 0, 0], SymExpr::zero()),
            (vec![0, 0, 1, 0], SymExpr::zero()),
            (vec![0, 0, 0, 1], SymExpr::zero()),
        ];
        for (idx, want) in cases {
            assert!(
                equiv_bool(&geo.laplacian.coefficient(&idx), &want, &sbox, cfg()),
                "coefficient {idx:?}: {}",
                geo.laplacian.coefficient(&idx)
            );
        }
    }

    #[test]
    fn solv4_line_element_matches_printed_form() {
        let def = solv4();
        let sbox = param_box(&def.chart);
        let geo = build(&def, solv4_metric(&sbox));
        let di = |k: usize| SymExpr::param(&format!("d{k}")).inv();
        let x3 = SymExpr::var("x3");
        let half = || SymExpr::rat(1, 2);
        // ds^2 = d1^-1 dx1 dx4 + d2^-1 dx2 dx3 - d1^-1 x3 dx2 dx4
        assert!(equiv_bool(
            &geo.g_lower[0][3],
            &(half() * di(1)),
            &sbox,
            cfg()
        ));
        assert!(equiv_bool(
            &geo.g_lower[1][2],
            &(half() * di(2)),
            &sbox,
            cfg()
        ));
        assert!(equiv_bool(
            &geo.g_lower[1][3],
            &(-(half() * di(1) * x3)),
            &sbox,
            cfg()
        ));
        for (i, j) in [(0, 0), (0, 1), (0, 2), (1, 1), (2, 2), (2, 3), (3, 3)] {
            assert!(
                equiv_bool(&geo.g_lower[i][j], &SymExpr::zero(), &sbox, cfg()),
                "g[{i}][{j}]"
            );
        }
    }

    #[test]
    fn solv4_ricci_44_reported_against_printed_value() {
        let def = solv4();
        let sbox = param_box(&def.chart);
        let geo = build(&def, solv4_metric(&sbox));
        let d = |k: usize| SymExpr::param(&format!("d{k}"));
        // The nonzero component must exist.
        assert!(
            equiv(&geo.ricci[3][3], &SymExpr::zero(), &sbox, cfg()).is_err(),
            "R_44 unexpectedly vanishes"
        );
        // Printed claim: R_44 = (d2/d1)^2 / 2. Record agreement or not.
        let printed = d(2).pow(2) * d(1).pow(-2) * SymExpr::rat(1, 2);
        let matches = equiv_bool(
            &geo.ricci[3][3],
            &printed,
            &sbox,
            EquivCfg { tol: 1e-8, ..cfg() },
        );
        // The comparison outcome is catalogued by the verification report;
        // here we only pin that the derived value is what the pipeline says.
        let fd_consistent = {
            let params = Binding::from_pairs(&[("d1", 1.3), ("d2", 0.7)]);
            let pt = [0.2, -0.4, 0.6, 0.3];
            let sym = geo.scalar_at(&pt, &params).unwrap();
            let fd =
                scalar_curvature_fd(&|x: &[f64]| geo.g_lower_at(x, &params), &pt, 2e-3).unwrap();
            (sym - fd).abs() <= 1e-6 * (1.0 + sym.abs())
        };
        assert!(fd_consistent);
        println!(
            "solv4 R_44 printed-form match: {matches}; derived = {}",
            geo.ricci[3][3]
        );
    }

    #[test]
    fn laplacian_commutes_with_left_invariant_fields() {
        let def = e2();
        let sbox = param_box(&def.chart);
        let geo = build(&def, e2_metric(&sbox));
        let xi = left_invariant_frame(&def.chart).unwrap();
        let x = SymExpr::var("x");
        let y = SymExpr::var("y");
        let al = SymExpr::var("al");
        let fields = [
            x.clone() * y.clone() + al.sin(),
            (x.clone() + y.clone()).cos() * al.clone(),
            x.pow(2) * al.sin() + y.pow(2),
        ];
        for f in &fields {
            for a in 0..3 {
                let xi_f = xi.apply(a, &def.chart.coords, f);
                let lhs = geo.laplacian.apply(&xi_f);
                let rhs = xi.apply(a, &def.chart.coords, &geo.laplacian.apply(f));
                assert!(
                    equiv_bool(
                        &(lhs - rhs),
                        &SymExpr::zero(),
                        &sbox,
                        EquivCfg { tol: 1e-9, ..cfg() }
                    ),
                    "[Delta, xi_{a}] f != 0"
                );
            }
        }
    }

    #[test]
    fn laplacian_symmetric_under_haar_quadrature() {
        // <Delta u, v> = <u, Delta v> for compactly concentrated fields on
        // E(2), via product quadrature with the Lebesgue Haar measure.
        let def = e2();
        let sbox = param_box(&def.chart);
        let geo = build(&def, e2_metric(&sbox));
        let x = SymExpr::var("x");
        let y = SymExpr::var("y");
        let al = SymExpr::var("al");
        let gauss = (-(x.pow(2) + y.pow(2))).exp();
        let u = gauss.clone() * al.sin();
        let v = gauss * (x.clone() + al.cos());
        let du = geo.laplacian.apply(&u);
        let dv = geo.laplacian.apply(&v);
        let params = Binding::from_pairs(&[("d1", 1.4), ("d2", 0.8), ("d3", 1.1)]);
        let eval_at = |e: &SymExpr, xx: f64, yy: f64, aa: f64| {
            let mut b = params.clone();
            b.set("x", Complex64::new(xx, 0.0));
            b.set("y", Complex64::new(yy, 0.0));
            b.set("al", Complex64::new(aa, 0.0));
            e.eval(&b).unwrap().re
        };
        let nx = 28;
        let na = 24;
        let lim = 4.5;
        let integ = |f: &dyn Fn(f64, f64, f64) -> f64| {
            crate::numeric::simpson(
                |xx| {
                    crate::numeric::simpson(
                        |yy| {
                            crate::numeric::periodic_trapezoid(
                                |aa| f(xx, yy, aa),
                                0.0,
                                std::f64::consts::TAU,
                                na,
                            )
                        },
                        -lim,
                        lim,
                        nx,
                    )
                },
                -lim,
                lim,
                nx,
            )
        };
        let lhs = integ(&|xx, yy, aa| eval_at(&du, xx, yy, aa) * eval_at(&v, xx, yy, aa));
        let rhs = integ(&|xx, yy, aa| eval_at(&u, xx, yy, aa) * eval_at(&dv, xx, yy, aa));
        assert!(
            (lhs - rhs).abs() <= 1e-6 * (1.0 + lhs.abs()),
            "<Du,v> = {lhs}, <u,Dv> = {rhs}"
        );
    }
}
