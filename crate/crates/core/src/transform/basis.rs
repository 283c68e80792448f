//! Spatial bases for the discretized forward operator.

use nalgebra::Vector2;

use crate::error::{Error, Result};

/// Indicator functions of the cells of an `n x n` partition of `[-1, 1]^2`,
/// optionally clipped to cells with enough overlap with the disk.
#[derive(Debug, Clone)]
pub struct PixelBasis {
    pub n: usize,
    /// Cell index -> column index, `None` for dropped cells.
    cell_to_col: Vec<Option<usize>>,
    /// Column index -> cell index.
    col_to_cell: Vec<usize>,
    /// Fraction of each kept cell inside the disk.
    coverage: Vec<f64>,
}

impl PixelBasis {
    fn build(n: usize, min_coverage: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::usage("pixel basis needs n >= 2"));
        }
        let cell = 2.0 / n as f64;
        let sub = 8usize;
        let mut cell_to_col = vec![None; n * n];
        let mut col_to_cell = Vec::new();
        let mut coverage = Vec::new();
        for iy in 0..n {
            for ix in 0..n {
                let x0 = -1.0 + ix as f64 * cell;
                let y0 = -1.0 + iy as f64 * cell;
                let mut inside = 0usize;
                for sy in 0..sub {
                    for sx in 0..sub {
                        let p = Vector2::new(
                            x0 + (sx as f64 + 0.5) * cell / sub as f64,
                            y0 + (sy as f64 + 0.5) * cell / sub as f64,
                        );
                        if p.norm_squared() < 1.0 {
                            inside += 1;
                        }
                    }
                }
                let frac = inside as f64 / (sub * sub) as f64;
                if frac > min_coverage {
                    cell_to_col[iy * n + ix] = Some(col_to_cell.len());
                    col_to_cell.push(iy * n + ix);
                    coverage.push(frac);
                }
            }
        }
        Ok(PixelBasis {
            n,
            cell_to_col,
            col_to_cell,
            coverage,
        })
    }

    /// Keep every cell that meets the open disk (partition of unity on M).
    pub fn full_cover(n: usize) -> Result<Self> {
        Self::build(n, 0.0)
    }

    /// Keep cells with at least `min_coverage` of their area inside the
    /// disk; rim slivers otherwise produce spurious near-null columns.
    pub fn clipped(n: usize, min_coverage: f64) -> Result<Self> {
        Self::build(n, min_coverage)
    }

    pub fn len(&self) -> usize {
        self.col_to_cell.len()
    }

    pub fn is_empty(&self) -> bool {
        self.col_to_cell.is_empty()
    }

    /// Column of the cell containing `x`, if that cell is kept.
    pub fn locate(&self, x: Vector2<f64>) -> Option<usize> {
        let cell = 2.0 / self.n as f64;
        let ix = ((x.x + 1.0) / cell).floor();
        let iy = ((x.y + 1.0) / cell).floor();
        if ix < 0.0 || iy < 0.0 || ix >= self.n as f64 || iy >= self.n as f64 {
            return None;
        }
        self.cell_to_col[iy as usize * self.n + ix as usize]
    }

    /// Center of a column's cell.
    pub fn center(&self, col: usize) -> Vector2<f64> {
        let cell = 2.0 / self.n as f64;
        let idx = self.col_to_cell[col];
        let ix = idx % self.n;
        let iy = idx / self.n;
        Vector2::new(
            -1.0 + (ix as f64 + 0.5) * cell,
            -1.0 + (iy as f64 + 0.5) * cell,
        )
    }

    /// In-disk area of a column's cell.
    pub fn area_weight(&self, col: usize) -> f64 {
        let cell = 2.0 / self.n as f64;
        self.coverage[col] * cell * cell
    }

    /// L2 projection onto the disk-restricted pixel functions: the in-disk
    /// average of `f` over each kept cell (subsampled deterministically).
    pub fn project(&self, f: impl Fn(Vector2<f64>) -> f64) -> Vec<f64> {
        let cell = 2.0 / self.n as f64;
        let sub = 8usize;
        (0..self.len())
            .map(|c| {
                let idx = self.col_to_cell[c];
                let x0 = -1.0 + (idx % self.n) as f64 * cell;
                let y0 = -1.0 + (idx / self.n) as f64 * cell;
                let mut acc = 0.0;
                let mut hits = 0usize;
                for sy in 0..sub {
                    for sx in 0..sub {
                        let p = Vector2::new(
                            x0 + (sx as f64 + 0.5) * cell / sub as f64,
                            y0 + (sy as f64 + 0.5) * cell / sub as f64,
                        );
                        if p.norm_squared() < 1.0 {
                            acc += f(p);
                            hits += 1;
                        }
                    }
                }
                if hits > 0 {
                    acc / hits as f64
                } else {
                    f(self.center(c))
                }
            })
            .collect()
    }

    /// Area-weighted relative L2 distance between coefficient vectors.
    pub fn relative_l2_error(&self, got: &[f64], truth: &[f64]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for c in 0..self.len() {
            let w = self.area_weight(c);
            num += w * (got[c] - truth[c]) * (got[c] - truth[c]);
            den += w * truth[c] * truth[c];
        }
        (num / den.max(1e-300)).sqrt()
    }

    pub fn descriptor(&self) -> String {
        format!("pixel_{}x{}_cols{}", self.n, self.n, self.len())
    }
}

/// Derivative-compatible 1-form basis built from bilinear node functions.
///
/// Potentials `p` are tensor hats on the nodes of an `n x n` cell grid;
/// the component spaces are the mixed-degree pairs
/// `comp1 in span(cell_x (x) hat_y)` and `comp2 in span(hat_x (x) cell_y)`,
/// so the gradient of any kept potential is representable exactly and the
/// discrete gauge space sits inside the forward matrix's null space up to
/// quadrature error.
#[derive(Debug, Clone)]
pub struct SplineOneFormBasis {
    pub n: usize,
    /// Kept columns of component 1: indices `(cell_ix, node_iy)`.
    comp1_cols: Vec<(usize, usize)>,
    comp1_map: Vec<Option<usize>>,
    /// Kept columns of component 2: indices `(node_ix, cell_iy)`.
    comp2_cols: Vec<(usize, usize)>,
    comp2_map: Vec<Option<usize>>,
    /// Interior potential nodes (their four incident cells lie in the disk).
    interior_nodes: Vec<(usize, usize)>,
}

impl SplineOneFormBasis {
    pub fn new(n: usize, min_coverage: f64) -> Result<Self> {
        if n < 4 {
            return Err(Error::usage("spline basis needs n >= 4 cells per side"));
        }
        let cell = 2.0 / n as f64;
        let nodes = n + 1;
        let corner_in = |ix: isize, iy: isize| -> bool {
            let x = -1.0 + ix as f64 * cell;
            let y = -1.0 + iy as f64 * cell;
            x * x + y * y < 1.0
        };
        let cell_inside = |cx: usize, cy: usize| -> bool {
            corner_in(cx as isize, cy as isize)
                && corner_in(cx as isize + 1, cy as isize)
                && corner_in(cx as isize, cy as isize + 1)
                && corner_in(cx as isize + 1, cy as isize + 1)
        };
        let cell_coverage = |cx: usize, cy: usize| -> f64 {
            let sub = 8;
            let mut hit = 0usize;
            for sy in 0..sub {
                for sx in 0..sub {
                    let x = -1.0 + cx as f64 * cell + (sx as f64 + 0.5) * cell / sub as f64;
                    let y = -1.0 + cy as f64 * cell + (sy as f64 + 0.5) * cell / sub as f64;
                    if x * x + y * y < 1.0 {
                        hit += 1;
                    }
                }
            }
            hit as f64 / (sub * sub) as f64
        };

        // Component 1 support: cell column cx crossed with node row ny
        // (hat support = rows ny-1, ny).
        let mut comp1_cols = Vec::new();
        let mut comp1_map = vec![None; n * nodes];
        for ny in 0..nodes {
            for cx in 0..n {
                let mut cov = 0.0;
                let mut cells = 0.0;
                for dy in [-1isize, 0] {
                    let cy = ny as isize + dy;
                    if cy >= 0 && (cy as usize) < n {
                        cov += cell_coverage(cx, cy as usize);
                        cells += 1.0;
                    }
                }
                if cells > 0.0 && cov / cells > min_coverage {
                    comp1_map[ny * n + cx] = Some(comp1_cols.len());
                    comp1_cols.push((cx, ny));
                }
            }
        }
        let mut comp2_cols = Vec::new();
        let mut comp2_map = vec![None; nodes * n];
        for cy in 0..n {
            for nx in 0..nodes {
                let mut cov = 0.0;
                let mut cells = 0.0;
                for dx in [-1isize, 0] {
                    let cx = nx as isize + dx;
                    if cx >= 0 && (cx as usize) < n {
                        cov += cell_coverage(cx as usize, cy);
                        cells += 1.0;
                    }
                }
                if cells > 0.0 && cov / cells > min_coverage {
                    comp2_map[cy * nodes + nx] = Some(comp2_cols.len());
                    comp2_cols.push((nx, cy));
                }
            }
        }

        // Interior potential nodes: all four incident cells fully inside.
        let mut interior_nodes = Vec::new();
        for ny in 1..n {
            for nx in 1..n {
                if cell_inside(nx - 1, ny - 1)
                    && cell_inside(nx, ny - 1)
                    && cell_inside(nx - 1, ny)
                    && cell_inside(nx, ny)
                {
                    interior_nodes.push((nx, ny));
                }
            }
        }

        Ok(SplineOneFormBasis {
            n,
            comp1_cols,
            comp1_map,
            comp2_cols,
            comp2_map,
            interior_nodes,
        })
    }

    pub fn columns(&self) -> usize {
        self.comp1_cols.len() + self.comp2_cols.len()
    }

    pub fn gauge_dimension(&self) -> usize {
        self.interior_nodes.len()
    }

    pub fn descriptor(&self) -> String {
        format!(
            "spline1f_{}cells_cols{}_gauge{}",
            self.n,
            self.columns(),
            self.gauge_dimension()
        )
    }

    /// Nonzero component-1 columns at `x` (values of `chi_cell (x) hat`).
    pub fn eval_comp1(&self, x: Vector2<f64>, out: &mut Vec<(usize, f64)>) {
        let cell = 2.0 / self.n as f64;
        let fx = (x.x + 1.0) / cell;
        let fy = (x.y + 1.0) / cell;
        let cx = fx.floor();
        if cx < 0.0 || cx >= self.n as f64 {
            return;
        }
        let cx = cx as usize;
        let iy = fy.floor();
        let ty = fy - iy;
        for (node, weight) in [(iy as isize, 1.0 - ty), (iy as isize + 1, ty)] {
            if node < 0 || node > self.n as isize {
                continue;
            }
            if let Some(col) = self.comp1_map[node as usize * self.n + cx] {
                out.push((col, weight));
            }
        }
    }

    /// Nonzero component-2 columns at `x`, offset by `comp1` count.
    pub fn eval_comp2(&self, x: Vector2<f64>, out: &mut Vec<(usize, f64)>) {
        let cell = 2.0 / self.n as f64;
        let nodes = self.n + 1;
        let fx = (x.x + 1.0) / cell;
        let fy = (x.y + 1.0) / cell;
        let cy = fy.floor();
        if cy < 0.0 || cy >= self.n as f64 {
            return;
        }
        let cy = cy as usize;
        let ix = fx.floor();
        let tx = fx - ix;
        let offset = self.comp1_cols.len();
        for (node, weight) in [(ix as isize, 1.0 - tx), (ix as isize + 1, tx)] {
            if node < 0 || node > self.n as isize {
                continue;
            }
            if let Some(col) = self.comp2_map[cy * nodes + node as usize] {
                out.push((offset + col, weight));
            }
        }
    }

    /// Coefficient vectors (in the 1-form column space) of `d p` for each
    /// interior potential node: the discrete gauge space.
    pub fn gauge_vectors(&self) -> Vec<Vec<f64>> {
        let cell = 2.0 / self.n as f64;
        let nodes = self.n + 1;
        let offset = self.comp1_cols.len();
        let cols = self.columns();
        self.interior_nodes
            .iter()
            .map(|&(nx, ny)| {
                let mut v = vec![0.0; cols];
                // d/dx of hat_nx(x) hat_ny(y): slope +1/cell on cell nx-1,
                // -1/cell on cell nx, tensored with hat_ny.
                for (cx, slope) in [(nx as isize - 1, 1.0 / cell), (nx as isize, -1.0 / cell)] {
                    if cx < 0 || cx >= self.n as isize {
                        continue;
                    }
                    if let Some(col) = self.comp1_map[ny * self.n + cx as usize] {
                        v[col] += slope;
                    }
                }
                for (cy, slope) in [(ny as isize - 1, 1.0 / cell), (ny as isize, -1.0 / cell)] {
                    if cy < 0 || cy >= self.n as isize {
                        continue;
                    }
                    if let Some(col) = self.comp2_map[cy as usize * nodes + nx] {
                        v[offset + col] += slope;
                    }
                }
                v
            })
            .collect()
    }

    /// Evaluate the 1-form with the given coefficients at `x`.
    pub fn eval_form(&self, coeffs: &[f64], x: Vector2<f64>) -> (f64, f64) {
        let mut tmp = Vec::with_capacity(4);
        self.eval_comp1(x, &mut tmp);
        let mut h1 = 0.0;
        for &(c, w) in &tmp {
            h1 += coeffs[c] * w;
        }
        tmp.clear();
        self.eval_comp2(x, &mut tmp);
        let mut h2 = 0.0;
        for &(c, w) in &tmp {
            h2 += coeffs[c] * w;
        }
        (h1, h2)
    }
}
