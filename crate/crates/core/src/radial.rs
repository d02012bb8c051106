//! Closed-form radial benchmark on balls and shells.
//!
//! The family `u_a(r) = r^{-a} - 1` solves the saturated-flux problem with
//! identity absorption on the unit ball for an explicit radial datum, and
//! serves as the primary verification oracle: every piece of the pipeline
//! that touches radial grids is measured against it.

use std::sync::Arc;

use crate::field::{ScalarField, VectorField};
use crate::grid::{Grid, GridKind};
use crate::nonlinearity::{AbsorptionSpec, DatumSpec};
use crate::operators::{apply_operator, OperatorConfig};
use crate::solver::{
    continue_with_boundary, ContinuationSchedule, NewtonOptions, SolveReport, SolverError,
};

/// The exact solution `u_a(r) = r^{-a} - 1` on the unit ball in dimension
/// `dim`, together with the datum `f_a` that produces it under identity
/// absorption. Requires `dim >= 3` and `0 < a < dim - 1`; the datum is
/// unbounded at the origin, so sampled fields live on shells `r_min > 0`.
#[derive(Clone, Copy, Debug)]
pub struct RadialExample {
    pub alpha: f64,
    pub dim: usize,
}

/// Radius below which [`RadialExample::v`] switches to the factored form;
/// the raw formula needs `r^{-2a-2}`, which loses range long before the
/// factored one does.
const V_SAFE_RADIUS: f64 = 0.1;

impl RadialExample {
    pub fn new(alpha: f64, dim: usize) -> RadialExample {
        assert!(dim >= 3, "the closed-form family needs dimension >= 3, got {dim}");
        assert!(
            alpha > 0.0 && alpha < (dim - 1) as f64,
            "exponent must lie in (0, {}), got {alpha}",
            dim - 1
        );
        RadialExample { alpha, dim }
    }

    /// `r^{-a} - 1`; vanishes at r = 1.
    pub fn u(&self, r: f64) -> f64 {
        r.powf(-self.alpha) - 1.0
    }

    /// The profile multiplying `(dim-1)/r` in the datum. Positive on (0, 1)
    /// and bounded: it tends to 1 at the origin as the flux saturates.
    pub fn v(&self, r: f64) -> f64 {
        let a = self.alpha;
        let c = (a + 2.0 - self.dim as f64) / (self.dim as f64 - 1.0);
        if r < V_SAFE_RADIUS {
            // factor a^3 r^{-3a-3} from the numerator and r^{-3a-3} from the
            // denominator so only positive powers of r remain
            let s = r.powf(2.0 * a + 2.0);
            a.powi(3) * (1.0 - c / (a * a) * s) / (s + a * a).powf(1.5)
        } else {
            let q = a * a * r.powf(-2.0 * a - 2.0);
            a * r.powf(-a - 1.0) * (q - c) / (1.0 + q).powf(1.5)
        }
    }

    /// Datum `f_a(r) = (dim-1) v_a(r) / r + u_a(r)`.
    pub fn f(&self, r: f64) -> f64 {
        (self.dim as f64 - 1.0) * self.v(r) / r + self.u(r)
    }
}

fn check_radial(grid: &Grid, dim: usize) {
    assert!(grid.kind() == GridKind::Radial, "radial fields need a radial grid");
    assert!(
        grid.dim() == dim,
        "grid carries dimension {}, requested {dim}",
        grid.dim()
    );
}

/// Sampled `(u_a, f_a)` on a radial shell grid.
pub fn example_fields(
    alpha: f64,
    dim: usize,
    grid: &Arc<Grid>,
) -> (ScalarField, ScalarField) {
    check_radial(grid, dim);
    assert!(grid.inner_radius() > 0.0, "the example datum is singular at r = 0");
    let ex = RadialExample::new(alpha, dim);
    let u = ScalarField::from_fn(grid, |c| ex.u(c[0]));
    let f = ScalarField::from_fn(grid, |c| ex.f(c[0]));
    (u, f)
}

/// `-r^{1-N} (r^{N-1} u' / sqrt(1 + u'^2))'` on the interior nodes of a
/// radial grid (zero on the boundary nodes, where the one-sided stencil has
/// no meaning). The face weights already carry the metric factor, so this
/// is the plain saturated-flux operator; second-order accurate in h.
pub fn radial_apply(u: &ScalarField, dim: usize) -> ScalarField {
    let grid = u.grid();
    check_radial(grid, dim);
    assert!(grid.inner_radius() > 0.0, "one-sided application needs r_min > 0");
    let mut out = apply_operator(u, &OperatorConfig::new(1.0));
    for i in 0..grid.num_nodes() {
        if grid.is_boundary(i) {
            out.data_mut()[i] = 0.0;
        }
    }
    out
}

/// Dirichlet problem on a shell (or ball when `r_min = 0`, where the inner
/// value is ignored and symmetry closes the flux), solved by the same
/// continuation as the general path. The inner boundary value makes the
/// closed-form family reachable: its trace at `r_min` is far from zero.
#[allow(clippy::too_many_arguments)]
pub fn solve_radial_bvp(
    f: &DatumSpec,
    g: &AbsorptionSpec,
    dim: usize,
    grid: &Arc<Grid>,
    inner: f64,
    outer: f64,
    sched: &ContinuationSchedule,
    opts: &NewtonOptions,
) -> Result<SolveReport, SolverError> {
    check_radial(grid, dim);
    assert!(inner.is_finite() && outer.is_finite());
    let f_field = f.sample(grid);
    let n = grid.num_nodes();
    let mut b = ScalarField::zeros(grid);
    if grid.inner_radius() > 0.0 {
        b.data_mut()[0] = inner;
    }
    b.data_mut()[n - 1] = outer;
    continue_with_boundary(grid, &f_field, g, sched, opts, None, Some(&b))
}

/// Saturated radial flux of a nodal field, for boundary diagnostics.
pub fn radial_flux(u: &ScalarField) -> VectorField {
    crate::operators::mc_flux(&crate::operators::gradient(u))
}
