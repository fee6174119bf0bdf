//! Binary occupancy grid, patch decomposition, and PGM export.
//!
//! Grid layout is image-like: row 0 is the top edge of the workspace, columns
//! grow with x. A cell is occupied iff its center lies inside an obstacle
//! footprint; cells outside the workspace are clipped.

use super::geometry::{Footprint, Vec2};
use super::Workspace;
use crate::error::Result;
use ndarray::Array2;
use std::io::Write;

/// Patch edge length in cells.
pub const PATCH_SIZE: usize = 16;

/// Row-major binary grid (1 occupied, 0 free).
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub rows: usize,
    pub cols: usize,
    pub resolution: f64,
    /// World position of the workspace lower-left corner.
    pub origin: Vec2,
    pub cells: Vec<u8>,
}

impl OccupancyGrid {
    pub fn zeros(ws: &Workspace) -> Self {
        OccupancyGrid {
            rows: ws.rows(),
            cols: ws.cols(),
            resolution: ws.resolution,
            origin: ws.origin,
            cells: vec![0; ws.rows() * ws.cols()],
        }
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> u8 {
        self.cells[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: u8) {
        self.cells[row * self.cols + col] = v;
    }

    /// World coordinates of a cell center. Row 0 is the top edge.
    pub fn cell_center(&self, row: usize, col: usize) -> Vec2 {
        Vec2::new(
            self.origin.x + (col as f64 + 0.5) * self.resolution,
            self.origin.y + (self.rows as f64 - row as f64 - 0.5) * self.resolution,
        )
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c != 0).count()
    }
}

/// Mark every cell whose center lies inside any obstacle footprint.
pub fn rasterize(obstacles: &[Footprint], ws: &Workspace) -> OccupancyGrid {
    let mut grid = OccupancyGrid::zeros(ws);
    let top = ws.origin.y + ws.height;
    for fp in obstacles {
        let (lo, hi) = fp.aabb();
        // Clip the AABB to the workspace, then test only covered cells.
        let col_lo = (((lo.x - ws.origin.x) / ws.resolution).floor().max(0.0)) as usize;
        let col_hi = (((hi.x - ws.origin.x) / ws.resolution).ceil()).min(grid.cols as f64) as usize;
        let row_lo = (((top - hi.y) / ws.resolution).floor().max(0.0)) as usize;
        let row_hi = (((top - lo.y) / ws.resolution).ceil()).min(grid.rows as f64) as usize;
        for row in row_lo..row_hi {
            for col in col_lo..col_hi {
                if grid.at(row, col) == 0 && fp.contains(grid.cell_center(row, col)) {
                    grid.set(row, col, 1);
                }
            }
        }
    }
    grid
}

/// Fixed non-overlapping patch decomposition of a grid.
#[derive(Debug, Clone)]
pub struct PatchSet {
    /// Patch count along rows and columns of the padded grid.
    pub patch_rows: usize,
    pub patch_cols: usize,
    /// One flattened row-major patch per row, values 0.0 / 1.0.
    pub patches: Array2<f64>,
    /// World position of each patch's upper-left corner, patch row-major.
    pub origins: Vec<Vec2>,
}

impl PatchSet {
    pub fn len(&self) -> usize {
        self.patch_rows * self.patch_cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Split the grid into 16 x 16 patches, zero-padding on the right and bottom
/// so every patch is complete. Patches are ordered row-major over the padded
/// grid; each origin is the world position of the patch's upper-left corner.
pub fn decompose_patches(grid: &OccupancyGrid) -> PatchSet {
    let patch_rows = grid.rows.div_ceil(PATCH_SIZE);
    let patch_cols = grid.cols.div_ceil(PATCH_SIZE);
    let n = patch_rows * patch_cols;
    let flat = PATCH_SIZE * PATCH_SIZE;
    let top = grid.origin.y + grid.rows as f64 * grid.resolution;

    let mut patches = Array2::<f64>::zeros((n, flat));
    let mut origins = Vec::with_capacity(n);
    for pr in 0..patch_rows {
        for pc in 0..patch_cols {
            let idx = pr * patch_cols + pc;
            origins.push(Vec2::new(
                grid.origin.x + (pc * PATCH_SIZE) as f64 * grid.resolution,
                top - (pr * PATCH_SIZE) as f64 * grid.resolution,
            ));
            for r in 0..PATCH_SIZE {
                let row = pr * PATCH_SIZE + r;
                if row >= grid.rows {
                    break; // bottom padding stays zero
                }
                for c in 0..PATCH_SIZE {
                    let col = pc * PATCH_SIZE + c;
                    if col >= grid.cols {
                        break; // right padding stays zero
                    }
                    patches[[idx, r * PATCH_SIZE + c]] = f64::from(grid.at(row, col));
                }
            }
        }
    }
    PatchSet {
        patch_rows,
        patch_cols,
        patches,
        origins,
    }
}

/// Write the grid as a binary PGM (P5): occupied cells black, free cells white.
pub fn write_pgm<W: Write>(grid: &OccupancyGrid, mut out: W) -> Result<()> {
    write!(out, "P5\n{} {}\n255\n", grid.cols, grid.rows)?;
    let bytes: Vec<u8> = grid
        .cells
        .iter()
        .map(|&c| if c != 0 { 0u8 } else { 255u8 })
        .collect();
    out.write_all(&bytes)?;
    Ok(())
}
