//! Inclusion shapes, voxelization, and the derived interior index sets.
//!
//! A cell is occupied when its center lies inside the shape. From the
//! occupancy the mask derives the staggered interior sets: a face is interior
//! when both adjacent cells are occupied, an edge when all four surrounding
//! faces are interior, a node when all incident edges are interior. Curls of
//! edge fields supported on interior edges then stay supported on interior
//! faces, and fields supported on interior faces have exactly vanishing
//! normal trace on the inclusion boundary.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::grid::{cyc, FaceField, FieldScalar, GridSpec};

/// Axis-aligned box used to carve shapes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3 {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Box3 {
    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }
}

/// Inclusion geometry inside the unit cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InclusionShape {
    /// Open cube `(-half_side, half_side)^3`.
    Cube { half_side: f64 },
    /// Open cube with an axis-aligned box removed (closed cut).
    LShape { outer_half_side: f64, cut: Box3 },
    /// Open ball of the given radius about the cell center.
    Sphere { radius: f64 },
    /// Occupancy read from a voxel mask file (see [`crate::io`]).
    VoxelMask { path: PathBuf },
}

impl InclusionShape {
    /// The L-shaped reference inclusion: cube of half-side 0.3 minus the
    /// closed corner box `[-0.3, 0.1]^2` through the full vertical extent.
    pub fn lshape_reference() -> Self {
        InclusionShape::LShape {
            outer_half_side: 0.3,
            cut: Box3 {
                min: [-0.3, -0.3, -0.5],
                max: [0.1, 0.1, 0.5],
            },
        }
    }

    fn contains(&self, p: [f64; 3]) -> bool {
        match self {
            InclusionShape::Cube { half_side } => p.iter().all(|c| c.abs() < *half_side),
            InclusionShape::LShape {
                outer_half_side,
                cut,
            } => p.iter().all(|c| c.abs() < *outer_half_side) && !cut.contains(p),
            InclusionShape::Sphere { radius } => {
                p[0] * p[0] + p[1] * p[1] + p[2] * p[2] < radius * radius
            }
            InclusionShape::VoxelMask { .. } => {
                unreachable!("voxel masks are loaded, not sampled")
            }
        }
    }
}

/// Voxelized inclusion with the derived staggered index sets.
#[derive(Debug, Clone)]
pub struct CellMask {
    grid: GridSpec,
    occupied: Vec<bool>,
    occupied_count: usize,
    /// Faces whose both adjacent cells are occupied, per normal axis.
    interior_face: [Vec<bool>; 3],
    /// Flat indices of interior faces, per axis, ascending.
    interior_face_idx: [Vec<u32>; 3],
    /// Faces with exactly one occupied side (the discrete inclusion boundary).
    boundary_face: [Vec<bool>; 3],
    /// Edges all four of whose surrounding faces are interior.
    interior_edge: [Vec<bool>; 3],
    /// Nodes all of whose incident edges are interior.
    interior_node: Vec<bool>,
}

impl CellMask {
    #[inline]
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    #[inline]
    pub fn occupied(&self) -> &[bool] {
        &self.occupied
    }

    #[inline]
    pub fn occupied_count(&self) -> usize {
        self.occupied_count
    }

    pub fn volume_fraction(&self) -> f64 {
        self.occupied_count as f64 / self.grid.len() as f64
    }

    #[inline]
    pub fn is_interior_face(&self, axis: usize, idx: usize) -> bool {
        self.interior_face[axis][idx]
    }

    #[inline]
    pub fn interior_faces(&self, axis: usize) -> &[u32] {
        &self.interior_face_idx[axis]
    }

    pub fn interior_face_count(&self) -> usize {
        self.interior_face_idx.iter().map(|v| v.len()).sum()
    }

    #[inline]
    pub fn is_boundary_face(&self, axis: usize, idx: usize) -> bool {
        self.boundary_face[axis][idx]
    }

    #[inline]
    pub fn is_interior_edge(&self, axis: usize, idx: usize) -> bool {
        self.interior_edge[axis][idx]
    }

    #[inline]
    pub fn is_interior_node(&self, idx: usize) -> bool {
        self.interior_node[idx]
    }

    /// Zero every component outside the interior face set.
    pub fn restrict_to_interior<S: FieldScalar>(&self, f: &mut FaceField<S>) {
        for a in 0..3 {
            for (idx, v) in f.comp[a].iter_mut().enumerate() {
                if !self.interior_face[a][idx] {
                    *v = S::ZERO;
                }
            }
        }
    }

    /// Hex digest identifying the resolution and occupancy pattern.
    pub fn geometry_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.grid.n() as u64).to_le_bytes());
        let bytes: Vec<u8> = self.occupied.iter().map(|b| *b as u8).collect();
        hasher.update(&bytes);
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Build a mask directly from an occupancy vector (used by file loading
    /// and by tests); runs the same boundary/connectivity validation as
    /// [`voxelize`].
    pub fn from_occupancy(grid: GridSpec, occupied: Vec<bool>) -> Result<Self> {
        assert_eq!(occupied.len(), grid.len());
        let n = grid.n();

        for (idx, occ) in occupied.iter().enumerate() {
            if !occ {
                continue;
            }
            let (i, j, k) = grid.coords(idx);
            if i == 0 || i == n - 1 || j == 0 || j == n - 1 || k == 0 || k == n - 1 {
                return Err(Error::ShapeTouchesBoundary(i, j, k));
            }
        }

        let components = count_components(grid, &occupied);
        if components > 1 {
            return Err(Error::DisconnectedInclusion { components });
        }

        let occupied_count = occupied.iter().filter(|b| **b).count();

        // Interior faces: both adjacent cells occupied. Face (a; i,j,k)
        // separates the cell at (i,j,k) shifted by -1 along a from (i,j,k).
        let mut interior_face: [Vec<bool>; 3] = Default::default();
        let mut boundary_face: [Vec<bool>; 3] = Default::default();
        let mut interior_face_idx: [Vec<u32>; 3] = Default::default();
        for a in 0..3 {
            let mut int = vec![false; grid.len()];
            let mut bnd = vec![false; grid.len()];
            let mut ids = Vec::new();
            for idx in 0..grid.len() {
                let (i, j, k) = grid.coords(idx);
                let mut c = [i as isize, j as isize, k as isize];
                c[a] -= 1;
                let behind = grid.idx_wrap(c[0], c[1], c[2]);
                let (ahead_occ, behind_occ) = (occupied[idx], occupied[behind]);
                if ahead_occ && behind_occ {
                    int[idx] = true;
                    ids.push(idx as u32);
                } else if ahead_occ != behind_occ {
                    bnd[idx] = true;
                }
            }
            interior_face[a] = int;
            boundary_face[a] = bnd;
            interior_face_idx[a] = ids;
        }

        // Interior edges: the four cells sharing the edge are all occupied.
        // For the edge along axis a at (i,j,k) those are the cells at
        // (i,j,k) with offsets {0,-1} along both transverse axes.
        let mut interior_edge: [Vec<bool>; 3] = Default::default();
        for a in 0..3 {
            let (b, c) = cyc(a);
            let mut int = vec![false; grid.len()];
            for idx in 0..grid.len() {
                let (i, j, k) = grid.coords(idx);
                let base = [i as isize, j as isize, k as isize];
                let mut all = true;
                'probe: for db in [-1isize, 0] {
                    for dc in [-1isize, 0] {
                        let mut cc = base;
                        cc[b] += db;
                        cc[c] += dc;
                        if !occupied[grid.idx_wrap(cc[0], cc[1], cc[2])] {
                            all = false;
                            break 'probe;
                        }
                    }
                }
                int[idx] = all;
            }
            interior_edge[a] = int;
        }

        // Interior nodes: all eight incident cells occupied.
        let mut interior_node = vec![false; grid.len()];
        for idx in 0..grid.len() {
            let (i, j, k) = grid.coords(idx);
            let base = [i as isize, j as isize, k as isize];
            let mut all = true;
            'probe: for di in [-1isize, 0] {
                for dj in [-1isize, 0] {
                    for dk in [-1isize, 0] {
                        let c = [base[0] + di, base[1] + dj, base[2] + dk];
                        if !occupied[grid.idx_wrap(c[0], c[1], c[2])] {
                            all = false;
                            break 'probe;
                        }
                    }
                }
            }
            interior_node[idx] = all;
        }

        Ok(CellMask {
            grid,
            occupied,
            occupied_count,
            interior_face,
            interior_face_idx,
            boundary_face,
            interior_edge,
            interior_node,
        })
    }
}

/// Voxelize a shape on the given grid: a cell is occupied when its center
/// lies inside the shape. Fails when the occupied set touches the outermost
/// cell layer or is not face-connected.
pub fn voxelize(shape: &InclusionShape, grid: GridSpec) -> Result<CellMask> {
    let occupied = match shape {
        InclusionShape::VoxelMask { path } => {
            let (n, occ) = crate::io::read_mask(path)?;
            if n != grid.n() {
                return Err(Error::VoxelFile {
                    path: path.display().to_string(),
                    reason: format!("file resolution {n} does not match grid {}", grid.n()),
                });
            }
            occ
        }
        _ => {
            let n = grid.n();
            let mut occ = vec![false; grid.len()];
            for k in 0..n {
                for j in 0..n {
                    for i in 0..n {
                        let p = [
                            grid.center_coord(i),
                            grid.center_coord(j),
                            grid.center_coord(k),
                        ];
                        occ[grid.idx(i, j, k)] = shape.contains(p);
                    }
                }
            }
            occ
        }
    };
    CellMask::from_occupancy(grid, occupied)
}

/// Number of face-connected components of the occupied set (0 for empty).
fn count_components(grid: GridSpec, occupied: &[bool]) -> usize {
    let mut seen = vec![false; occupied.len()];
    let mut components = 0;
    let mut stack = Vec::new();
    for start in 0..occupied.len() {
        if !occupied[start] || seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            let (i, j, k) = grid.coords(idx);
            let base = [i as isize, j as isize, k as isize];
            for a in 0..3 {
                for d in [-1isize, 1] {
                    let mut c = base;
                    c[a] += d;
                    let nb = grid.idx_wrap(c[0], c[1], c[2]);
                    if occupied[nb] && !seen[nb] {
                        seen[nb] = true;
                        stack.push(nb);
                    }
                }
            }
        }
    }
    components
}
