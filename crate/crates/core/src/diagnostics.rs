//! Norms, level-set tables, and admissibility checks on discrete fields.

use crate::field::{BoundaryTrace, ScalarField, VectorField};
use crate::grid::{unit_ball_volume, unit_sphere_area, Grid, GridKind};
use crate::nonlinearity::{tail, AbsorptionSpec};
use serde::Serialize;

pub fn linf_norm(u: &ScalarField) -> f64 {
    u.abs_max()
}

/// `(sum w |u|^q)^{1/q}`. Panics for `q < 1`.
pub fn lq_norm(u: &ScalarField, q: f64) -> f64 {
    assert!(q >= 1.0, "lq_norm needs q >= 1, got {q}");
    let g = u.grid();
    let s: f64 = (0..g.num_nodes())
        .map(|i| g.node_weight(i) * u.data()[i].abs().powf(q))
        .sum();
    s.powf(1.0 / q)
}

/// Marcinkiewicz quasinorm `sup_t t |{|u| > t}|^{1/N}`.
///
/// On a sampled field the distribution function is a right-continuous step
/// function, so the supremum is attained just below each sample level; that
/// is the level itself times the inclusive measure `|{|u| >= level}|`.
pub fn weak_ln_norm(u: &ScalarField, n: u32) -> f64 {
    assert!(n >= 2, "weak_ln_norm needs N >= 2, got {n}");
    let g = u.grid();
    let mut pairs: Vec<(f64, f64)> = (0..g.num_nodes())
        .map(|i| (u.data()[i].abs(), g.node_weight(i)))
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let inv = 1.0 / n as f64;
    let mut cum = 0.0;
    let mut best = 0.0f64;
    for (v, w) in pairs {
        cum += w;
        best = best.max(v * cum.powf(inv));
    }
    best
}

/// The two datum-size constants `N omega_N^{1/N}` and `(N-1) omega_N^{1/N}`.
pub fn thresholds(n: u32) -> (f64, f64) {
    assert!(n >= 2, "thresholds need N >= 2, got {n}");
    let root = unit_ball_volume(n as usize).powf(1.0 / n as f64);
    (n as f64 * root, (n as f64 - 1.0) * root)
}

/// Node-centered gradient magnitude: per axis the mean of the squared
/// gradients on the incident faces, then the root of the axis sum. Boundary
/// nodes average over their one existing face.
fn gradient_magnitude(u: &ScalarField) -> Vec<f64> {
    let g = u.grid();
    let mut sq = vec![[0.0f64; 2]; g.num_nodes()];
    let mut cnt = vec![[0u32; 2]; g.num_nodes()];
    for axis in 0..g.axes() {
        let h = g.spacing()[axis];
        for f in 0..g.num_faces(axis) {
            let (l, r) = g.face_nodes(axis, f);
            let d = (u.data()[r] - u.data()[l]) / h;
            sq[l][axis] += d * d;
            sq[r][axis] += d * d;
            cnt[l][axis] += 1;
            cnt[r][axis] += 1;
        }
    }
    (0..g.num_nodes())
        .map(|i| {
            let mut total = 0.0;
            for axis in 0..g.axes() {
                if cnt[i][axis] > 0 {
                    total += sq[i][axis] / cnt[i][axis] as f64;
                }
            }
            total.sqrt()
        })
        .collect()
}

/// `int |grad u|` by node-centered quadrature.
pub fn bv_seminorm(u: &ScalarField) -> f64 {
    let g = u.grid();
    gradient_magnitude(u)
        .iter()
        .enumerate()
        .map(|(i, &m)| g.node_weight(i) * m)
        .sum()
}

/// Graph-area functional `int sqrt(1 + |grad u|^2)`.
pub fn area_measure(u: &ScalarField) -> f64 {
    let g = u.grid();
    gradient_magnitude(u)
        .iter()
        .enumerate()
        .map(|(i, &m)| g.node_weight(i) * (1.0 + m * m).sqrt())
        .sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct StampacchiaRow {
    pub level: f64,
    /// `|{|u| > k}|` by nodal indicator quadrature.
    pub measure_above: f64,
    /// `int |grad G_k(u)|`, the variation carried by the tail above the level.
    pub tail_variation: f64,
}

/// Distribution-function table over increasing positive levels.
pub fn stampacchia_table(u: &ScalarField, levels: &[f64]) -> Vec<StampacchiaRow> {
    assert!(
        levels.windows(2).all(|w| w[0] < w[1]) && levels.first().map_or(true, |&k| k > 0.0),
        "levels must be positive and increasing"
    );
    let g = u.grid();
    levels
        .iter()
        .map(|&k| {
            let measure_above: f64 = (0..g.num_nodes())
                .filter(|&i| u.data()[i].abs() > k)
                .map(|i| g.node_weight(i))
                .sum();
            let tail_u = u.map(|s| tail(s, k));
            StampacchiaRow { level: k, measure_above, tail_variation: bv_seminorm(&tail_u) }
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct EquintCheck {
    pub level: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Compares `int_{|u|>=k} |g(u)|` against `int_{|u|>=k} |f|`; the absorption
/// mass on a superlevel set never exceeds the datum mass there.
pub fn equint_check(u: &ScalarField, g: &AbsorptionSpec, f: &ScalarField, k: f64) -> EquintCheck {
    assert!(k > 0.0, "equint level must be positive, got {k}");
    let gr = u.grid();
    assert_eq!(gr.shape(), f.grid().shape(), "fields must share a grid");
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for i in 0..gr.num_nodes() {
        if u.data()[i].abs() >= k {
            let w = gr.node_weight(i);
            lhs += w * g.g(u.data()[i]).abs();
            rhs += w * f.data()[i].abs();
        }
    }
    EquintCheck { level: k, lhs, rhs, pass: lhs <= rhs + 1e-8 + 1e-3 * rhs }
}

/// An axis-aligned member of the scan family, with its exact perimeter.
#[derive(Clone, Debug, Serialize)]
pub enum ScanRegion {
    Interval { a: f64, b: f64 },
    Rect { x: (f64, f64), y: (f64, f64) },
    Annulus { r_in: f64, r_out: f64, dim: usize },
}

impl ScanRegion {
    pub fn perimeter(&self) -> f64 {
        match self {
            ScanRegion::Interval { .. } => 2.0,
            ScanRegion::Rect { x, y } => 2.0 * ((x.1 - x.0) + (y.1 - y.0)),
            ScanRegion::Annulus { r_in, r_out, dim } => {
                let sigma = unit_sphere_area(*dim);
                let inner = if *r_in > 0.0 { r_in.powi(*dim as i32 - 1) } else { 0.0 };
                sigma * (r_out.powi(*dim as i32 - 1) + inner)
            }
        }
    }

    pub fn contains(&self, c: &[f64]) -> bool {
        match self {
            ScanRegion::Interval { a, b } => c[0] >= *a && c[0] <= *b,
            ScanRegion::Rect { x, y } => {
                c[0] >= x.0 && c[0] <= x.1 && c[1] >= y.0 && c[1] <= y.1
            }
            ScanRegion::Annulus { r_in, r_out, .. } => c[0] >= *r_in && c[0] <= *r_out,
        }
    }

    pub fn label(&self) -> String {
        match self {
            ScanRegion::Interval { a, b } => format!("interval[{a:.4},{b:.4}]"),
            ScanRegion::Rect { x, y } => {
                format!("rect[{:.4},{:.4}]x[{:.4},{:.4}]", x.0, x.1, y.0, y.1)
            }
            ScanRegion::Annulus { r_in, r_out, .. } => format!("annulus[{r_in:.4},{r_out:.4}]"),
        }
    }
}

/// Twenty concentric scaled copies of the domain, the largest being the
/// domain itself.
pub fn default_scan_family(grid: &Grid) -> Vec<ScanRegion> {
    let scales = (1..=20).map(|j| j as f64 / 20.0);
    match grid.kind() {
        GridKind::Interval => {
            let (a, b) = (grid.bounds()[0][0], grid.bounds()[0][1]);
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a);
            scales
                .map(|t| ScanRegion::Interval { a: mid - t * half, b: mid + t * half })
                .collect()
        }
        GridKind::Rectangle => {
            let bx = grid.bounds()[0];
            let by = grid.bounds()[1];
            let (mx, my) = (0.5 * (bx[0] + bx[1]), 0.5 * (by[0] + by[1]));
            let (hx, hy) = (0.5 * (bx[1] - bx[0]), 0.5 * (by[1] - by[0]));
            scales
                .map(|t| ScanRegion::Rect {
                    x: (mx - t * hx, mx + t * hx),
                    y: (my - t * hy, my + t * hy),
                })
                .collect()
        }
        GridKind::Radial => {
            let (r0, r1) = (grid.bounds()[0][0], grid.bounds()[0][1]);
            let dim = grid.dim();
            if r0 == 0.0 {
                scales
                    .map(|t| ScanRegion::Annulus { r_in: 0.0, r_out: t * r1, dim })
                    .collect()
            } else {
                let mid = 0.5 * (r0 + r1);
                let half = 0.5 * (r1 - r0);
                scales
                    .map(|t| ScanRegion::Annulus {
                        r_in: mid - t * half,
                        r_out: mid + t * half,
                        dim,
                    })
                    .collect()
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanRow {
    pub label: String,
    pub integral: f64,
    pub perimeter: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanResult {
    pub rows: Vec<ScanRow>,
    pub worst_ratio: f64,
    pub witness: String,
}

/// Worst `|int_A f| / Per(A)` over the family. A ratio at or above one means
/// no variational solution can balance this datum without absorption.
pub fn necessary_condition_scan(f: &ScalarField, family: &[ScanRegion]) -> ScanResult {
    let g = f.grid();
    let mut rows = Vec::with_capacity(family.len());
    let mut worst = (0.0f64, String::from("none"));
    for region in family {
        let integral: f64 = (0..g.num_nodes())
            .filter(|&i| region.contains(&g.node_coord(i)))
            .map(|i| g.node_weight(i) * f.data()[i])
            .sum();
        let perimeter = region.perimeter();
        let ratio = integral.abs() / perimeter;
        if ratio > worst.0 {
            worst = (ratio, region.label());
        }
        rows.push(ScanRow { label: region.label(), integral, perimeter, ratio });
    }
    ScanResult { rows, worst_ratio: worst.0, witness: worst.1 }
}

/// Boundary values extrapolated from the interior plus the outward normal
/// flux on the adjacent face.
///
/// The trace uses the quadratic through the three nearest inline interior
/// nodes (`3 u_1 - 3 u_2 + u_3`). Corner nodes in 2-D carry two candidate
/// faces; the one with the larger flux magnitude is reported, since that is
/// the side where the saturation constraint can bind.
pub fn boundary_trace(u: &ScalarField, z: &VectorField) -> BoundaryTrace {
    let g = u.grid();
    let [nx, ny] = g.shape();
    let mut nodes = Vec::new();
    let mut trace = Vec::new();
    let mut normal_flux = Vec::new();
    let stride = [1usize, nx];
    for i in 0..g.num_nodes() {
        if !g.is_boundary(i) {
            continue;
        }
        let ix = i % nx;
        let iy = i / nx;
        // (axis, inward sign, face index of the adjacent face)
        let mut candidates: Vec<(usize, f64, usize)> = Vec::new();
        if nx > 1 {
            if ix == 0 {
                candidates.push((0, 1.0, face_index(g, 0, i)));
            } else if ix == nx - 1 {
                candidates.push((0, -1.0, face_index(g, 0, i - 1)));
            }
        }
        if ny > 1 {
            if iy == 0 {
                candidates.push((1, 1.0, i));
            } else if iy == ny - 1 {
                // the y-face joining (i - nx, i) is indexed by its lower node
                candidates.push((1, -1.0, i - nx));
            }
        }
        if candidates.is_empty() {
            continue;
        }
        let (axis, inward, face) = candidates
            .into_iter()
            .max_by(|a, b| {
                let za = z.axis(a.0)[a.2].abs();
                let zb = z.axis(b.0)[b.2].abs();
                za.partial_cmp(&zb).unwrap()
            })
            .unwrap();
        let s = stride[axis];
        let step = |k: usize| {
            if inward > 0.0 {
                i + k * s
            } else {
                i - k * s
            }
        };
        let extrapolated = 3.0 * u.data()[step(1)] - 3.0 * u.data()[step(2)] + u.data()[step(3)];
        // outward normal is minus the inward direction; the face gradient
        // points from left to right along the axis
        let zf = z.axis(axis)[face];
        nodes.push(i);
        trace.push(extrapolated);
        normal_flux.push(-inward * zf);
    }
    BoundaryTrace { nodes, trace, normal_flux }
}

fn face_index(g: &Grid, axis: usize, node: usize) -> usize {
    debug_assert_eq!(axis, 0);
    let nx = g.shape()[0];
    let ix = node % nx;
    let iy = node / nx;
    ix + (nx - 1) * iy
}

#[derive(Clone, Debug, Serialize)]
pub struct DiagnosticsBundle {
    pub linf: f64,
    pub lq: Vec<(f64, f64)>,
    pub weak_ln: f64,
    pub bv: f64,
    pub area: f64,
    pub level_table: Vec<StampacchiaRow>,
    pub pairing_defect_max: f64,
    pub equint: Vec<EquintCheck>,
    pub scan: ScanResult,
    pub thresholds: (f64, f64),
}

impl DiagnosticsBundle {
    /// Every summary the run manifest reports, at the default levels
    /// `{1, 2, 4, 8}` and exponents `{1, 2, N}`.
    pub fn compute(
        u: &ScalarField,
        z: &VectorField,
        f: &ScalarField,
        g: &AbsorptionSpec,
        n: u32,
    ) -> DiagnosticsBundle {
        let levels = [1.0, 2.0, 4.0, 8.0];
        let gu = crate::operators::gradient(u);
        let defect = crate::operators::pairing_defect(z, &gu);
        let mut defect_max = 0.0f64;
        for axis in 0..u.grid().axes() {
            for &d in defect.axis(axis) {
                defect_max = defect_max.max(d);
            }
        }
        DiagnosticsBundle {
            linf: linf_norm(u),
            lq: vec![
                (1.0, lq_norm(u, 1.0)),
                (2.0, lq_norm(u, 2.0)),
                (n as f64, lq_norm(u, n as f64)),
            ],
            weak_ln: weak_ln_norm(u, n),
            bv: bv_seminorm(u),
            area: area_measure(u),
            level_table: stampacchia_table(u, &levels),
            pairing_defect_max: defect_max,
            equint: levels.iter().map(|&k| equint_check(u, g, f, k)).collect(),
            scan: necessary_condition_scan(f, &default_scan_family(u.grid())),
            thresholds: thresholds(n),
        }
    }
}
