//! Discrete gradient/divergence, the saturated flux map, the regularized
//! energy, and the pairing-defect residual.
//!
//! Gradients and fluxes live on staggered faces, one component per axis, and
//! the divergence is assembled as the exact negative adjoint of the face
//! gradient under the grid's quadrature weights. Every face therefore carries
//! a scalar flux law, the energy below is an exact potential for
//! [`apply_operator`], and the algebraic flux identities hold face by face to
//! rounding.

use crate::field::{ScalarField, VectorField};
use crate::nonlinearity::AbsorptionSpec;

/// Regularization exponent and the coefficient of the extra p-Laplacian term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorConfig {
    pub p: f64,
    /// Coefficient `p - 1` of the p-Laplacian flux.
    pub p_weight: f64,
    /// Cached [`p_flux_secant_width`] of `p`.
    pub secant_width: f64,
}

impl OperatorConfig {
    pub fn new(p: f64) -> OperatorConfig {
        assert!(p >= 1.0, "regularization exponent must satisfy p >= 1, got {p}");
        OperatorConfig { p, p_weight: p - 1.0, secant_width: p_flux_secant_width(p) }
    }
}

/// Smallest Jacobian conductance kept on a face; guards solvability when the
/// saturated flux flattens out at huge gradients.
pub const CONDUCTANCE_FLOOR: f64 = 1e-14;

/// Cap on the p-flux slope. Near the origin the raw law `sgn(a) |a|^{p-1}`
/// for p < 2 has unbounded slope, which quantizes the representable fluxes
/// of flat-top states so coarsely that no f64 iterate balances them, and
/// Newton random-walks. Below [`p_flux_secant_width`] the law is replaced
/// by its secant line through the origin; the width is chosen so the slope
/// (times the `p - 1` coefficient) is exactly this cap, which then bounds
/// the p-term conductance of every face, because on the power branch the
/// slope decreases in |a|.
pub const P_FLUX_SLOPE_CAP: f64 = 100.0;

/// Width of the linearized region of the p-flux for this exponent:
/// `((p-1)/cap)^{1/(2-p)}`, zero for p >= 2. Shrinks to zero at both ends
/// of (1,2): deep exponents need no help (the law flattens to a bounded
/// sign profile), and near 2 the law is already smooth.
pub fn p_flux_secant_width(p: f64) -> f64 {
    if p >= 2.0 {
        return 0.0;
    }
    let t = ((p - 1.0) / P_FLUX_SLOPE_CAP).ln() / (2.0 - p);
    if t < -700.0 {
        0.0
    } else {
        t.exp()
    }
}

/// `a / sqrt(1 + a^2)` for one face component.
pub fn mc_flux_scalar(a: f64) -> f64 {
    a / a.hypot(1.0)
}

/// Derivative of [`mc_flux_scalar`]: `(1 + a^2)^{-3/2}`.
pub fn mc_flux_derivative_scalar(a: f64) -> f64 {
    let s = a.hypot(1.0);
    1.0 / (s * s * s)
}

fn p_flux_scalar_w(a: f64, p: f64, w: f64) -> f64 {
    if a.abs() < w {
        a * w.powf(p - 2.0)
    } else if a == 0.0 {
        0.0
    } else {
        a.abs().powf(p - 2.0) * a
    }
}

fn p_flux_derivative_scalar_w(a: f64, p: f64, w: f64) -> f64 {
    if a.abs() < w {
        w.powf(p - 2.0)
    } else if a == 0.0 {
        // p = 2 gives slope 1; p > 2 flattens out.
        if p == 2.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (p - 1.0) * a.abs().powf(p - 2.0)
    }
}

fn p_flux_potential_scalar_w(a: f64, p: f64, w: f64) -> f64 {
    if a.abs() < w {
        0.5 * w.powf(p - 2.0) * a * a
    } else {
        a.abs().powf(p) / p + w.powf(p) * (0.5 - 1.0 / p)
    }
}

/// `|a|^{p-2} a`, with the near-origin region for `p < 2` linearized over
/// the width from [`p_flux_secant_width`] (value at 0 stays exactly 0).
pub fn p_flux_scalar(a: f64, p: f64) -> f64 {
    p_flux_scalar_w(a, p, p_flux_secant_width(p))
}

/// Derivative of [`p_flux_scalar`]: `(p-1) |a|^{p-2}` outside the secant
/// region, the constant secant slope inside it.
pub fn p_flux_derivative_scalar(a: f64, p: f64) -> f64 {
    p_flux_derivative_scalar_w(a, p, p_flux_secant_width(p))
}

/// Antiderivative of [`p_flux_scalar`] vanishing at 0: the parabola
/// `w^{p-2} a^2 / 2` inside the secant region, `|a|^p / p` plus the
/// constant that joins the branches outside it.
pub fn p_flux_potential_scalar(a: f64, p: f64) -> f64 {
    p_flux_potential_scalar_w(a, p, p_flux_secant_width(p))
}

/// Combined face flux `mc_flux(a) + (p-1) |a|^{p-2} a`.
pub fn flux_scalar(a: f64, cfg: &OperatorConfig) -> f64 {
    let mut v = mc_flux_scalar(a);
    if cfg.p_weight > 0.0 {
        v += cfg.p_weight * p_flux_scalar_w(a, cfg.p, cfg.secant_width);
    }
    v
}

/// Face conductance used by Newton linearization, floored for solvability.
pub fn flux_derivative_scalar(a: f64, cfg: &OperatorConfig) -> f64 {
    let mut v = mc_flux_derivative_scalar(a);
    if cfg.p_weight > 0.0 {
        v += cfg.p_weight * p_flux_derivative_scalar_w(a, cfg.p, cfg.secant_width);
    }
    v.max(CONDUCTANCE_FLOOR)
}

/// Face-centered first differences of a nodal field.
pub fn gradient(u: &ScalarField) -> VectorField {
    let g = u.grid().clone();
    let mut out = VectorField::zeros(&g);
    let data = u.data();
    for axis in 0..g.axes() {
        let h = g.spacing()[axis];
        let comp = out.axis_mut(axis);
        for f in 0..g.num_faces(axis) {
            let (l, r) = g.face_nodes(axis, f);
            comp[f] = (data[r] - data[l]) / h;
        }
    }
    out
}

/// Discrete divergence, the exact negative adjoint of [`gradient`]:
/// `<-div F, v> = <F, grad v>` for every `v` vanishing on the boundary,
/// where both pairings use the grid's node and face weights.
pub fn divergence(flux: &VectorField) -> ScalarField {
    let g = flux.grid().clone();
    let mut acc = vec![0.0; g.num_nodes()];
    for axis in 0..g.axes() {
        let h = g.spacing()[axis];
        let comp = flux.axis(axis);
        for f in 0..g.num_faces(axis) {
            let (l, r) = g.face_nodes(axis, f);
            let c = g.face_weight(axis, f) * comp[f] / h;
            acc[l] += c;
            acc[r] -= c;
        }
    }
    for i in 0..acc.len() {
        acc[i] /= g.node_weight(i);
    }
    ScalarField::from_vec(&g, acc)
}

/// Saturated flux `z = gu / sqrt(1 + gu^2)` applied face-wise.
pub fn mc_flux(gu: &VectorField) -> VectorField {
    gu.map(mc_flux_scalar)
}

/// p-Laplacian flux `|gu|^{p-2} gu` applied face-wise.
pub fn p_flux(gu: &VectorField, p: f64) -> VectorField {
    gu.map(|a| p_flux_scalar(a, p))
}

/// Combined face flux for the regularized operator.
pub fn total_flux(gu: &VectorField, cfg: &OperatorConfig) -> VectorField {
    gu.map(|a| flux_scalar(a, cfg))
}

/// `A_p(u) = -div(mc_flux(grad u)) - (p-1) div(p_flux(grad u))`.
pub fn apply_operator(u: &ScalarField, cfg: &OperatorConfig) -> ScalarField {
    let flux = total_flux(&gradient(u), cfg);
    divergence(&flux).map(|v| -v)
}

/// `g(u) + A_p(u) - f` at interior nodes, zero at boundary nodes.
///
/// The datum and absorption are used exactly as passed; callers that want the
/// p-coupled truncations apply them to `f` and `g` first.
pub fn residual(
    u: &ScalarField,
    f: &ScalarField,
    g: &AbsorptionSpec,
    cfg: &OperatorConfig,
) -> ScalarField {
    let au = apply_operator(u, cfg);
    let grid = u.grid().clone();
    let mut out = vec![0.0; grid.num_nodes()];
    for i in grid.interior_nodes() {
        out[i] = g.g(u.data()[i]) + au.data()[i] - f.data()[i];
    }
    ScalarField::from_vec(&grid, out)
}

/// The functional whose Euler-Lagrange system is `g(u) + A_p(u) = f`:
///
/// `J(u) = int sqrt(1+|grad u|^2) + (p-1)/p int |grad u|^p + int G(u) - int f u`
///
/// evaluated with the same face-split quadrature as the operators, so its
/// exact nodal gradient is the weighted residual. The area term is anchored
/// so a flat state has energy exactly `|Omega|`.
pub fn energy(u: &ScalarField, f: &ScalarField, g: &AbsorptionSpec, cfg: &OperatorConfig) -> f64 {
    let grid = u.grid().clone();
    let gu = gradient(u);
    let mut area_excess = 0.0;
    let mut p_term = 0.0;
    for axis in 0..grid.axes() {
        let comp = gu.axis(axis);
        for fidx in 0..grid.num_faces(axis) {
            let a = comp[fidx];
            let v = grid.face_weight(axis, fidx);
            // sqrt(1+a^2) - 1 without cancellation for small a
            area_excess += v * (a * a) / (1.0 + a.hypot(1.0));
            if cfg.p_weight > 0.0 {
                p_term += v * p_flux_potential_scalar_w(a, cfg.p, cfg.secant_width);
            }
        }
    }
    let mut point_terms = 0.0;
    for i in 0..grid.num_nodes() {
        let w = grid.node_weight(i);
        let ui = u.data()[i];
        point_terms += w * (g.big_g(ui) - f.data()[i] * ui);
    }
    grid.measure() + area_excess + cfg.p_weight * p_term + point_terms
}

/// Pairing defect per face: `sqrt(1+gu^2) - sqrt(1-z^2) - z gu`.
///
/// Nonnegative for `|z| <= 1`, zero exactly when `z = mc_flux(gu)`.
/// Panics when some `|z|` exceeds `1 + 1e-12`.
pub fn pairing_defect(z: &VectorField, gu: &VectorField) -> VectorField {
    let g = z.grid().clone();
    let mut out = VectorField::zeros(&g);
    for axis in 0..g.axes() {
        let zc = z.axis(axis);
        let gc = gu.axis(axis);
        let oc = out.axis_mut(axis);
        for f in 0..zc.len() {
            oc[f] = pairing_defect_point(&[zc[f]], &[gc[f]]);
        }
    }
    out
}

/// The same defect for full vectors `z . gu` at a point; used on
/// reconstructed (non-staggered) vector data.
pub fn pairing_defect_point(z: &[f64], gu: &[f64]) -> f64 {
    let z2: f64 = z.iter().map(|v| v * v).sum();
    assert!(
        z2 <= (1.0 + 1e-12) * (1.0 + 1e-12),
        "flux magnitude {} exceeds 1 + 1e-12",
        z2.sqrt()
    );
    let g2: f64 = gu.iter().map(|v| v * v).sum();
    let dot: f64 = z.iter().zip(gu).map(|(a, b)| a * b).sum();
    (1.0 + g2).sqrt() - (1.0 - z2).max(0.0).sqrt() - dot
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, GridSpec};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::sync::Arc;

    fn interval(n: usize) -> Arc<Grid> {
        Arc::new(Grid::build(&GridSpec::Interval { a: 0.0, b: 1.0, nodes: n }).unwrap())
    }

    fn square(n: usize) -> Arc<Grid> {
        Arc::new(
            Grid::build(&GridSpec::Rectangle { x: (0.0, 1.0), y: (0.0, 1.0), nodes: (n, n) })
                .unwrap(),
        )
    }

    #[test]
    fn gradient_exact_on_affine_fields() {
        let g = interval(11);
        let u = ScalarField::from_fn(&g, |c| c[0]);
        let gu = gradient(&u);
        assert!(gu.axis(0).iter().all(|&a| (a - 1.0).abs() < 1e-13));

        let c = ScalarField::constant(&g, 4.2);
        assert_eq!(gradient(&c).abs_max(), 0.0);

        let sq = square(9);
        let u2 = ScalarField::from_fn(&sq, |c| c[0] + 2.0 * c[1]);
        let gu2 = gradient(&u2);
        assert!(gu2.axis(0).iter().all(|&a| (a - 1.0).abs() < 1e-12));
        assert!(gu2.axis(1).iter().all(|&a| (a - 2.0).abs() < 1e-12));
    }

    #[test]
    fn mc_flux_matches_formula_and_saturates() {
        assert_eq!(mc_flux_scalar(0.0), 0.0);
        assert_relative_eq!(mc_flux_scalar(1.0), 1.0 / 2.0f64.sqrt(), max_relative = 1e-15);
        let z = mc_flux_scalar(1e6);
        assert_abs_diff_eq!(z, 1.0 - 5e-13, epsilon = 1e-15);
        assert!(z < 1.0);
        // odd and monotone
        for a in [-3.0, -0.5, 0.0, 0.7, 2.0] {
            assert_abs_diff_eq!(mc_flux_scalar(-a), -mc_flux_scalar(a), epsilon = 1e-16);
        }
        let mut prev = f64::NEG_INFINITY;
        for i in -100..=100 {
            let v = mc_flux_scalar(i as f64 * 0.1);
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn adjointness_is_exact_on_all_grid_kinds() {
        use rand::{Rng, SeedableRng};
        let grids: Vec<Arc<Grid>> = vec![
            interval(23),
            square(12),
            Arc::new(
                Grid::build(&GridSpec::Radial { r_min: 0.05, r_max: 1.0, nodes: 41, dim: 3 })
                    .unwrap(),
            ),
        ];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for g in grids {
            let mut flux = VectorField::zeros(&g);
            for axis in 0..g.axes() {
                for v in flux.axis_mut(axis) {
                    *v = rng.random_range(-2.0..2.0);
                }
            }
            let mut v = ScalarField::zeros(&g);
            for i in 0..g.num_nodes() {
                if !g.is_boundary(i) {
                    v.data_mut()[i] = rng.random_range(-1.0..1.0);
                }
            }
            let div = divergence(&flux);
            let lhs: f64 = (0..g.num_nodes())
                .map(|i| -div.data()[i] * v.data()[i] * g.node_weight(i))
                .sum();
            let gv = gradient(&v);
            let mut rhs = 0.0;
            for axis in 0..g.axes() {
                let gva = gv.axis(axis);
                let fa = flux.axis(axis);
                for f in 0..g.num_faces(axis) {
                    rhs += g.face_weight(axis, f) * fa[f] * gva[f];
                }
            }
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn operator_on_flat_and_linear_fields() {
        let g = interval(21);
        let cfg = OperatorConfig::new(1.0);
        let zero = ScalarField::zeros(&g);
        assert_eq!(apply_operator(&zero, &cfg).abs_max(), 0.0);
        let u = ScalarField::from_fn(&g, |c| c[0]);
        let au = apply_operator(&u, &cfg);
        for i in g.interior_nodes() {
            assert_abs_diff_eq!(au.data()[i], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn energy_of_flat_state_is_domain_measure() {
        let g = square(17);
        let u = ScalarField::zeros(&g);
        let f = ScalarField::zeros(&g);
        let cfg = OperatorConfig::new(1.5);
        let j0 = energy(&u, &f, &AbsorptionSpec::zero(), &cfg);
        assert_relative_eq!(j0, 1.0, max_relative = 1e-12);
        let j1 = energy(&u, &f, &AbsorptionSpec::identity(), &OperatorConfig::new(2.0));
        assert_relative_eq!(j1, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn energy_gradient_matches_residual() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for gidx in 0..3 {
            let g: Arc<Grid> = match gidx {
                0 => interval(31),
                1 => square(9),
                _ => Arc::new(
                    Grid::build(&GridSpec::Radial { r_min: 0.2, r_max: 1.0, nodes: 25, dim: 3 })
                        .unwrap(),
                ),
            };
            let cfg = OperatorConfig::new(1.5);
            let gspec = AbsorptionSpec::identity();
            let mut u = ScalarField::zeros(&g);
            let mut v = ScalarField::zeros(&g);
            // small amplitudes keep the second-order term of the one-sided
            // quotient below the comparison tolerance
            for i in 0..g.num_nodes() {
                if !g.is_boundary(i) {
                    u.data_mut()[i] = rng.random_range(-0.3..0.3);
                    v.data_mut()[i] = rng.random_range(-0.05..0.05);
                }
            }
            let f = ScalarField::from_fn(&g, |c| c[0].cos());
            let res = residual(&u, &f, &gspec, &cfg);
            let pairing: f64 = (0..g.num_nodes())
                .map(|i| res.data()[i] * v.data()[i] * g.node_weight(i))
                .sum();
            let eps = 1e-6;
            let mut up = u.clone();
            for i in 0..g.num_nodes() {
                up.data_mut()[i] += eps * v.data()[i];
            }
            let dj = (energy(&up, &f, &gspec, &cfg) - energy(&u, &f, &gspec, &cfg)) / eps;
            assert_abs_diff_eq!(dj, pairing, epsilon = 1e-5);
        }
    }

    #[test]
    fn radial_operator_matches_closed_form_curvature() {
        // u(r) = 1/r - 1 in R^3 has -div(mc_flux(grad u)) = (2/r) (r^4+1)^{-3/2}
        let build = |nodes: usize| {
            Arc::new(
                Grid::build(&GridSpec::Radial { r_min: 0.05, r_max: 1.0, nodes, dim: 3 }).unwrap(),
            )
        };
        let sup_err = |nodes: usize| {
            let g = build(nodes);
            let u = ScalarField::from_fn(&g, |c| 1.0 / c[0] - 1.0);
            let au = apply_operator(&u, &OperatorConfig::new(1.0));
            g.interior_nodes()
                .map(|i| {
                    let r = g.node_coord(i)[0];
                    let exact = 2.0 / r / (r.powi(4) + 1.0).powf(1.5);
                    (au.data()[i] - exact).abs()
                })
                .fold(0.0f64, f64::max)
        };
        let e1 = sup_err(501);
        let e2 = sup_err(1001);
        assert!(e1 < 5e-5, "e1={e1:.3e}");
        assert!(e2 < e1 / 3.0, "e1={e1:.3e} e2={e2:.3e}");
    }

    #[test]
    fn pairing_defect_vanishes_only_at_the_flux() {
        let g = interval(41);
        let u = ScalarField::from_fn(&g, |c| (3.0 * c[0]).sin());
        let gu = gradient(&u);
        let z = mc_flux(&gu);
        let d = pairing_defect(&z, &gu);
        assert!(d.abs_max() < 1e-12);
        // perturb one face away from the flux: defect strictly positive there
        let mut z2 = z.clone();
        z2.axis_mut(0)[7] *= 0.5;
        let d2 = pairing_defect(&z2, &gu);
        assert!(d2.axis(0)[7] > 1e-4);
    }

    #[test]
    fn pairing_defect_point_formula() {
        let d = pairing_defect_point(&[0.0, 0.0], &[3.0, 4.0]);
        assert_relative_eq!(d, 26.0f64.sqrt() - 1.0, max_relative = 1e-12);
        assert!((d - 4.0990).abs() < 1e-4);
    }

    #[test]
    #[should_panic(expected = "exceeds")]
    fn pairing_defect_rejects_inadmissible_flux() {
        pairing_defect_point(&[1.1], &[0.0]);
    }

    #[test]
    fn p_flux_and_derivative_handle_the_origin() {
        assert_eq!(p_flux_scalar(0.0, 1.3), 0.0);
        // secant slope at the origin is the cap divided by the p-term coefficient
        assert_relative_eq!(
            0.3 * p_flux_derivative_scalar(0.0, 1.3),
            P_FLUX_SLOPE_CAP,
            max_relative = 1e-12
        );
        assert_eq!(p_flux_derivative_scalar(0.0, 2.0), 1.0);
        assert_relative_eq!(p_flux_scalar(2.0, 1.5), 2.0f64.powf(-0.5) * 2.0, max_relative = 1e-14);
        // conductance floor
        let cfg = OperatorConfig::new(1.0);
        assert!(flux_derivative_scalar(1e8, &cfg) >= CONDUCTANCE_FLOOR);
    }

    #[test]
    fn p_flux_secant_region_is_continuous_monotone_and_consistent() {
        for &p in &[1.01, 1.1, 1.5, 1.9] {
            let w = p_flux_secant_width(p);
            assert!(w > 0.0 && w < 1e-2);
            // flux matches the raw power law at the seam, and the potential's
            // two branches join there with value zero at the origin
            assert_relative_eq!(p_flux_scalar(w, p), w.powf(p - 1.0), max_relative = 1e-12);
            assert_eq!(p_flux_potential_scalar(0.0, p), 0.0);
            assert_relative_eq!(
                p_flux_potential_scalar(w, p),
                0.5 * w.powf(p),
                max_relative = 1e-12
            );
            // odd, monotone through zero
            let inner = p_flux_scalar(0.4 * w, p);
            assert_eq!(p_flux_scalar(-0.4 * w, p), -inner);
            assert!(inner > 0.0 && inner < p_flux_scalar(w, p));
            // the derivative is the actual slope inside the secant region
            let fd = (p_flux_scalar(0.5 * w + 1e-12 * w, p) - p_flux_scalar(0.5 * w, p))
                / (1e-12 * w);
            assert_relative_eq!(fd, p_flux_derivative_scalar(0.5 * w, p), max_relative = 1e-3);
            // potential differentiates to the flux across the seam
            for &a in &[0.3 * w, 2.0 * w, 5.0] {
                let eps = 1e-7 * a.max(w);
                let fd = (p_flux_potential_scalar(a + eps, p)
                    - p_flux_potential_scalar(a - eps, p))
                    / (2.0 * eps);
                assert_relative_eq!(fd, p_flux_scalar(a, p), max_relative = 1e-5, epsilon = 1e-12);
            }
        }
    }
}
