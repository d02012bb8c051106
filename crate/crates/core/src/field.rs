//! Nodal scalar fields and face-staggered vector fields.

use crate::grid::{Grid, GridKind};
use std::io::{self, Write};
use std::sync::Arc;

/// One real value per grid node.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<Grid>,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Arc<Grid>) -> ScalarField {
        ScalarField { grid: grid.clone(), data: vec![0.0; grid.num_nodes()] }
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> ScalarField {
        ScalarField { grid: grid.clone(), data: vec![c; grid.num_nodes()] }
    }

    /// Sample `f` at the node coordinates (1-D grids pass `[x]`-style slices
    /// of length 1, rectangles length 2).
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> ScalarField {
        let k = grid.axes();
        let data = (0..grid.num_nodes())
            .map(|i| {
                let c = grid.node_coord(i);
                f(&c[..k])
            })
            .collect();
        ScalarField { grid: grid.clone(), data }
    }

    pub fn from_vec(grid: &Arc<Grid>, data: Vec<f64>) -> ScalarField {
        assert_eq!(data.len(), grid.num_nodes());
        ScalarField { grid: grid.clone(), data }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField { grid: self.grid.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Quadrature-weighted integral over the domain.
    pub fn integrate(&self) -> f64 {
        self.data.iter().zip(self.grid.node_weights()).map(|(v, w)| v * w).sum()
    }

    pub fn abs_max(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn sup_diff(&self, other: &ScalarField) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Write the field as CSV: a `# grid=...` header line, then one
    /// `coord...,value` row per node with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let g = &self.grid;
        let counts = match g.kind() {
            GridKind::Rectangle => format!("{}x{}", g.shape()[0], g.shape()[1]),
            _ => format!("{}", g.shape()[0]),
        };
        let spacing = match g.kind() {
            GridKind::Rectangle => format!("{:e}x{:e}", g.spacing()[0], g.spacing()[1]),
            _ => format!("{:e}", g.spacing()[0]),
        };
        writeln!(out, "# grid={} n={} h={}", g.kind().label(), counts, spacing)?;
        for i in 0..g.num_nodes() {
            let c = g.node_coord(i);
            match g.kind() {
                GridKind::Rectangle => {
                    writeln!(out, "{:.16e},{:.16e},{:.16e}", c[0], c[1], self.data[i])?
                }
                _ => writeln!(out, "{:.16e},{:.16e}", c[0], self.data[i])?,
            }
        }
        Ok(())
    }
}

/// One real value per staggered face, grouped by axis family. A face holds
/// the component of a vector quantity along its own axis; the two families
/// of a rectangle grid together represent a plane vector field.
#[derive(Debug, Clone)]
pub struct VectorField {
    grid: Arc<Grid>,
    comp: [Vec<f64>; 2],
}

impl VectorField {
    pub fn zeros(grid: &Arc<Grid>) -> VectorField {
        let comp = [vec![0.0; grid.num_faces(0)], if grid.axes() == 2 {
            vec![0.0; grid.num_faces(1)]
        } else {
            Vec::new()
        }];
        VectorField { grid: grid.clone(), comp }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn axis(&self, axis: usize) -> &[f64] {
        &self.comp[axis]
    }

    pub fn axis_mut(&mut self, axis: usize) -> &mut [f64] {
        &mut self.comp[axis]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> VectorField {
        VectorField {
            grid: self.grid.clone(),
            comp: [
                self.comp[0].iter().map(|&v| f(v)).collect(),
                self.comp[1].iter().map(|&v| f(v)).collect(),
            ],
        }
    }

    /// Largest face-value magnitude over all families.
    pub fn abs_max(&self) -> f64 {
        self.comp
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Extrapolated boundary data attached to the outcome of a solve: for each
/// boundary node, the solution value seen from the interior and the normal
/// component of the saturated flux on the adjacent face.
#[derive(Debug, Clone)]
pub struct BoundaryTrace {
    pub nodes: Vec<usize>,
    /// One-sided quadratic extrapolation of `u` to the boundary coordinate.
    pub trace: Vec<f64>,
    /// `z . nu` with `nu` the outward normal of the node's edge.
    pub normal_flux: Vec<f64>,
}
