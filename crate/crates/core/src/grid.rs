//! Uniform tensor grids with nodal quadrature and staggered faces.
//!
//! Three grid kinds: an interval, an axis-aligned rectangle, and a radial
//! grid representing a ball or spherical shell in dimension `N >= 2`.
//! Unknowns live on nodes; fluxes live on the faces between adjacent nodes.
//! Node quadrature weights and face dual volumes are chosen so that weight
//! sums telescope to the exact domain measure and the discrete divergence
//! built on them is the exact negative adjoint of the face gradient.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Interval,
    Rectangle,
    Radial,
}

impl GridKind {
    pub fn label(&self) -> &'static str {
        match self {
            GridKind::Interval => "interval",
            GridKind::Rectangle => "rectangle",
            GridKind::Radial => "radial",
        }
    }
}

/// Build request for [`Grid::build`].
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    Interval { a: f64, b: f64, nodes: usize },
    Rectangle { x: (f64, f64), y: (f64, f64), nodes: (usize, usize) },
    /// Shell `r_min <= r <= r_max` in ambient dimension `dim`; `r_min = 0`
    /// gives a ball, where the center node is interior (no Dirichlet there).
    Radial { r_min: f64, r_max: f64, nodes: usize, dim: usize },
}

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("each axis needs at least 3 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("empty or inverted bounds [{0}, {1}]")]
    BadBounds(f64, f64),
    #[error("radial grids need dimension >= 2, got {0}")]
    BadDimension(usize),
    #[error("negative inner radius {0}")]
    NegativeRadius(f64),
}

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    // omega_n = omega_{n-2} * 2 pi / n, starting from omega_1 = 2, omega_2 = pi.
    let mut v = if n % 2 == 1 { 2.0 } else { std::f64::consts::PI };
    let mut k = if n % 2 == 1 { 1 } else { 2 };
    while k < n {
        k += 2;
        v *= 2.0 * std::f64::consts::PI / k as f64;
    }
    v
}

/// Surface area of the unit sphere `S^{n-1}`.
pub fn unit_sphere_area(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}

#[derive(Debug, Clone)]
pub struct Grid {
    kind: GridKind,
    /// Nodes per axis; 1-D grids store `[n, 1]`.
    shape: [usize; 2],
    bounds: [[f64; 2]; 2],
    h: [f64; 2],
    /// Ambient dimension: 1, 2, or `N` for radial grids.
    dim: usize,
    node_w: Vec<f64>,
    face_w: [Vec<f64>; 2],
    boundary: Vec<bool>,
    measure: f64,
}

impl Grid {
    pub fn build(spec: &GridSpec) -> Result<Grid, GridError> {
        match *spec {
            GridSpec::Interval { a, b, nodes } => {
                check_axis(a, b, nodes)?;
                let h = (b - a) / (nodes - 1) as f64;
                let mut node_w = trapezoid_weights(nodes, h);
                let face_w = vec![h; nodes - 1];
                let mut boundary = vec![false; nodes];
                boundary[0] = true;
                boundary[nodes - 1] = true;
                let measure = b - a;
                normalize_sum(&mut node_w, measure);
                Ok(Grid {
                    kind: GridKind::Interval,
                    shape: [nodes, 1],
                    bounds: [[a, b], [0.0, 0.0]],
                    h: [h, 0.0],
                    dim: 1,
                    node_w,
                    face_w: [face_w, Vec::new()],
                    boundary,
                    measure,
                })
            }
            GridSpec::Rectangle { x, y, nodes } => {
                check_axis(x.0, x.1, nodes.0)?;
                check_axis(y.0, y.1, nodes.1)?;
                let (nx, ny) = nodes;
                let hx = (x.1 - x.0) / (nx - 1) as f64;
                let hy = (y.1 - y.0) / (ny - 1) as f64;
                let wx = trapezoid_weights(nx, hx);
                let wy = trapezoid_weights(ny, hy);
                let mut node_w = vec![0.0; nx * ny];
                let mut boundary = vec![false; nx * ny];
                for iy in 0..ny {
                    for ix in 0..nx {
                        let i = ix + nx * iy;
                        node_w[i] = wx[ix] * wy[iy];
                        boundary[i] = ix == 0 || ix + 1 == nx || iy == 0 || iy + 1 == ny;
                    }
                }
                // x-faces between (ix,iy)-(ix+1,iy): dual volume hx * wy.
                let mut fx = vec![0.0; (nx - 1) * ny];
                for iy in 0..ny {
                    for ix in 0..nx - 1 {
                        fx[ix + (nx - 1) * iy] = hx * wy[iy];
                    }
                }
                let mut fy = vec![0.0; nx * (ny - 1)];
                for iy in 0..ny - 1 {
                    for ix in 0..nx {
                        fy[ix + nx * iy] = wx[ix] * hy;
                    }
                }
                let measure = (x.1 - x.0) * (y.1 - y.0);
                normalize_sum(&mut node_w, measure);
                Ok(Grid {
                    kind: GridKind::Rectangle,
                    shape: [nx, ny],
                    bounds: [[x.0, x.1], [y.0, y.1]],
                    h: [hx, hy],
                    dim: 2,
                    node_w,
                    face_w: [fx, fy],
                    boundary,
                    measure,
                })
            }
            GridSpec::Radial { r_min, r_max, nodes, dim } => {
                if dim < 2 {
                    return Err(GridError::BadDimension(dim));
                }
                if r_min < 0.0 {
                    return Err(GridError::NegativeRadius(r_min));
                }
                check_axis(r_min, r_max, nodes)?;
                let h = (r_max - r_min) / (nodes - 1) as f64;
                let omega = unit_ball_volume(dim);
                let sigma = unit_sphere_area(dim);
                let shell = |a: f64, b: f64| omega * (b.powi(dim as i32) - a.powi(dim as i32));
                let r = |i: usize| r_min + i as f64 * h;
                // Interior nodes and faces carry the midpoint metric
                // sigma r^{N-1} h. Exact shell volumes would also work, but
                // their h^2/12 metric correction does not cancel against the
                // face volumes and leaves the divergence with an O(h^2/r^3)
                // truncation term; the midpoint products keep the constant
                // small near the inner radius. The two end nodes absorb the
                // quadrature remainder so the weights still sum to the exact
                // shell volume, which is safe because the operator is never
                // evaluated on Dirichlet nodes.
                let mut node_w = vec![0.0; nodes];
                for (i, w) in node_w.iter_mut().enumerate().take(nodes - 1).skip(1) {
                    *w = sigma * r(i).powi(dim as i32 - 1) * h;
                }
                node_w[0] = shell(r_min, r_min + 0.5 * h);
                let measure = shell(r_min, r_max);
                let partial: f64 = node_w.iter().take(nodes - 1).sum();
                node_w[nodes - 1] = measure - partial;
                let face_w: Vec<f64> = (0..nodes - 1)
                    .map(|i| sigma * (r(i) + 0.5 * h).powi(dim as i32 - 1) * h)
                    .collect();
                let mut boundary = vec![false; nodes];
                boundary[nodes - 1] = true;
                if r_min > 0.0 {
                    boundary[0] = true;
                }
                Ok(Grid {
                    kind: GridKind::Radial,
                    shape: [nodes, 1],
                    bounds: [[r_min, r_max], [0.0, 0.0]],
                    h: [h, 0.0],
                    dim,
                    node_w,
                    face_w: [face_w, Vec::new()],
                    boundary,
                    measure,
                })
            }
        }
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    /// Number of tensor axes (1 for interval and radial, 2 for rectangle).
    pub fn axes(&self) -> usize {
        if self.kind == GridKind::Rectangle {
            2
        } else {
            1
        }
    }

    /// Ambient dimension `N` (radial grids report their configured `N`).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    pub fn num_nodes(&self) -> usize {
        self.shape[0] * self.shape[1]
    }

    pub fn spacing(&self) -> [f64; 2] {
        self.h
    }

    pub fn bounds(&self) -> [[f64; 2]; 2] {
        self.bounds
    }

    pub fn inner_radius(&self) -> f64 {
        debug_assert!(self.kind == GridKind::Radial);
        self.bounds[0][0]
    }

    pub fn measure(&self) -> f64 {
        self.measure
    }

    pub fn node_coord(&self, i: usize) -> [f64; 2] {
        let ix = i % self.shape[0];
        let iy = i / self.shape[0];
        [
            self.bounds[0][0] + ix as f64 * self.h[0],
            self.bounds[1][0] + iy as f64 * self.h[1],
        ]
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    pub fn node_weight(&self, i: usize) -> f64 {
        self.node_w[i]
    }

    pub fn node_weights(&self) -> &[f64] {
        &self.node_w
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_nodes()).filter(move |&i| !self.boundary[i])
    }

    /// Number of staggered faces along `axis`.
    pub fn num_faces(&self, axis: usize) -> usize {
        self.face_w[axis].len()
    }

    /// Dual volume carried by face `f` of the given axis family.
    pub fn face_weight(&self, axis: usize, f: usize) -> f64 {
        self.face_w[axis][f]
    }

    pub fn face_weights(&self, axis: usize) -> &[f64] {
        &self.face_w[axis]
    }

    /// Node pair `(left, right)` joined by face `f` of the given axis.
    pub fn face_nodes(&self, axis: usize, f: usize) -> (usize, usize) {
        let nx = self.shape[0];
        if axis == 0 {
            let ix = f % (nx - 1);
            let iy = f / (nx - 1);
            let i = ix + nx * iy;
            (i, i + 1)
        } else {
            (f, f + nx)
        }
    }
}

fn check_axis(a: f64, b: f64, nodes: usize) -> Result<(), GridError> {
    if nodes < 3 {
        return Err(GridError::TooFewNodes(nodes));
    }
    if !(b > a) || !a.is_finite() || !b.is_finite() {
        return Err(GridError::BadBounds(a, b));
    }
    Ok(())
}

fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    w[0] = 0.5 * h;
    w[n - 1] = 0.5 * h;
    w
}

/// Rescale weights so they sum exactly to `target`, absorbing the last few
/// ulps of accumulated rounding.
fn normalize_sum(w: &mut [f64], target: f64) {
    let s: f64 = w.iter().sum();
    if s > 0.0 && target > 0.0 {
        let c = target / s;
        for v in w.iter_mut() {
            *v *= c;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ball_volumes_match_closed_forms() {
        assert_relative_eq!(unit_ball_volume(1), 2.0, max_relative = 1e-15);
        assert_relative_eq!(unit_ball_volume(2), std::f64::consts::PI, max_relative = 1e-15);
        assert_relative_eq!(
            unit_ball_volume(3),
            4.0 * std::f64::consts::PI / 3.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            unit_ball_volume(4),
            std::f64::consts::PI * std::f64::consts::PI / 2.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(unit_sphere_area(3), 4.0 * std::f64::consts::PI, max_relative = 1e-15);
    }

    #[test]
    fn interval_weights_sum_to_length() {
        let g = Grid::build(&GridSpec::Interval { a: -1.0, b: 1.0, nodes: 401 }).unwrap();
        let s: f64 = g.node_weights().iter().sum();
        assert_relative_eq!(s, 2.0, max_relative = 1e-12);
        let sf: f64 = g.face_weights(0).iter().sum();
        assert_relative_eq!(sf, 2.0, max_relative = 1e-12);
        assert!(g.node_weights().iter().all(|&w| w > 0.0));
        assert_eq!(g.interior_nodes().count(), 399);
    }

    #[test]
    fn rectangle_weights_and_boundary() {
        let g = Grid::build(&GridSpec::Rectangle {
            x: (0.0, 1.0),
            y: (0.0, 2.0),
            nodes: (17, 33),
        })
        .unwrap();
        let s: f64 = g.node_weights().iter().sum();
        assert_relative_eq!(s, 2.0, max_relative = 1e-12);
        for axis in 0..2 {
            let sf: f64 = g.face_weights(axis).iter().sum();
            assert_relative_eq!(sf, 2.0, max_relative = 1e-12);
        }
        let nb = (0..g.num_nodes()).filter(|&i| g.is_boundary(i)).count();
        assert_eq!(nb, 2 * 17 + 2 * 33 - 4);
        // face adjacency round trip
        let (l, r) = g.face_nodes(0, 5);
        assert_eq!(r, l + 1);
        let (l, r) = g.face_nodes(1, 40);
        assert_eq!(r, l + 17);
    }

    #[test]
    fn radial_weights_sum_to_shell_volume() {
        let g = Grid::build(&GridSpec::Radial { r_min: 0.05, r_max: 1.0, nodes: 501, dim: 3 })
            .unwrap();
        let vol = 4.0 * std::f64::consts::PI / 3.0 * (1.0 - 0.05f64.powi(3));
        let s: f64 = g.node_weights().iter().sum();
        assert_relative_eq!(s, vol, max_relative = 1e-12);
        // face volumes are midpoint products, exact only to O(h^2)
        let sf: f64 = g.face_weights(0).iter().sum();
        assert_relative_eq!(sf, vol, max_relative = 1e-5);
        assert!(g.is_boundary(0) && g.is_boundary(500));
        // interior nodes carry sigma r^2 h exactly
        let sigma = 4.0 * std::f64::consts::PI;
        let h = g.spacing()[0];
        let r7 = g.node_coord(7)[0];
        assert_relative_eq!(g.node_weight(7), sigma * r7 * r7 * h, max_relative = 1e-14);
        assert!(g.node_weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn full_ball_center_is_interior() {
        let g = Grid::build(&GridSpec::Radial { r_min: 0.0, r_max: 1.0, nodes: 101, dim: 2 })
            .unwrap();
        assert!(!g.is_boundary(0));
        assert!(g.is_boundary(100));
        let s: f64 = g.node_weights().iter().sum();
        assert_relative_eq!(s, std::f64::consts::PI, max_relative = 1e-12);
    }

    #[test]
    fn radial_quadrature_is_second_order() {
        // integrate v(r) = cos(3 r) over the shell 0.1 <= r <= 1 in R^3
        let exact = {
            // 4 pi * int r^2 cos(3 r) dr via the antiderivative
            let anti = |r: f64| {
                let (s, c) = (3.0 * r).sin_cos();
                // int r^2 cos(ar) dr = (r^2/a - 2/a^3) sin + (2 r / a^2) cos, a = 3
                (r * r / 3.0 - 2.0 / 27.0) * s + 2.0 * r / 9.0 * c
            };
            4.0 * std::f64::consts::PI * (anti(1.0) - anti(0.1))
        };
        let approx_on = |nodes: usize| {
            let g = Grid::build(&GridSpec::Radial { r_min: 0.1, r_max: 1.0, nodes, dim: 3 })
                .unwrap();
            (0..g.num_nodes())
                .map(|i| g.node_weight(i) * (3.0 * g.node_coord(i)[0]).cos())
                .sum::<f64>()
        };
        let e1 = (approx_on(101) - exact).abs();
        let e2 = (approx_on(201) - exact).abs();
        assert!(e2 < e1 / 3.0, "e1={e1:.3e} e2={e2:.3e}");
    }

    #[test]
    fn build_rejects_bad_specs() {
        assert!(matches!(
            Grid::build(&GridSpec::Interval { a: 0.0, b: 1.0, nodes: 2 }),
            Err(GridError::TooFewNodes(2))
        ));
        assert!(matches!(
            Grid::build(&GridSpec::Interval { a: 1.0, b: 1.0, nodes: 5 }),
            Err(GridError::BadBounds(_, _))
        ));
        assert!(matches!(
            Grid::build(&GridSpec::Radial { r_min: 0.1, r_max: 1.0, nodes: 9, dim: 1 }),
            Err(GridError::BadDimension(1))
        ));
        assert!(matches!(
            Grid::build(&GridSpec::Radial { r_min: -0.1, r_max: 1.0, nodes: 9, dim: 3 }),
            Err(GridError::NegativeRadius(_))
        ));
    }
}
