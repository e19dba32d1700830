//! Effective permittivity of the composite cell.
//!
//! For each axis `k` the potential `chi_k` is pinned to `-y_k` on every node
//! touching the inclusion and is discretely harmonic on the remaining nodes.
//! The shape electric fields `E^k = e_k + grad chi_k` then assemble the
//! effective tensor `eps_eff[k][l] = eps_e * <E^k, E^l>`, which is symmetric,
//! frequency independent, and bounded below by `eps_e * I`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{EdgeField, GridSpec, NodalField};
use crate::mask::CellMask;
use crate::solvers::conjugate_gradient;
use crate::tolerances;

/// The three potential solves with solver diagnostics.
#[derive(Debug, Clone)]
pub struct ChiSolution {
    pub chi: [NodalField; 3],
    pub residuals: [f64; 3],
    pub iterations: [usize; 3],
}

/// Effective permittivity tensor with provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PermittivityTensor {
    pub tensor: [[f64; 3]; 3],
    pub eps_e: f64,
    pub resolution: usize,
}

impl PermittivityTensor {
    /// Eigenvalues of the (symmetric) tensor, ascending.
    pub fn eigenvalues(&self) -> [f64; 3] {
        let m = nalgebra::Matrix3::from_fn(|r, c| self.tensor[r][c]);
        let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        [ev[0], ev[1], ev[2]]
    }
}

/// Nodes carrying the Dirichlet value `-y_k`: every node incident to at
/// least one occupied cell (the discrete closure of the inclusion).
fn dirichlet_nodes(mask: &CellMask) -> Vec<bool> {
    let grid = mask.grid();
    let mut pinned = vec![false; grid.len()];
    for idx in 0..grid.len() {
        let (i, j, k) = grid.coords(idx);
        let base = [i as isize, j as isize, k as isize];
        'probe: for di in [-1isize, 0] {
            for dj in [-1isize, 0] {
                for dk in [-1isize, 0] {
                    let c = [base[0] + di, base[1] + dj, base[2] + dk];
                    if mask.occupied()[grid.idx_wrap(c[0], c[1], c[2])] {
                        pinned[idx] = true;
                        break 'probe;
                    }
                }
            }
        }
    }
    pinned
}

/// Solve the potential cell problem for one axis: `chi = -y_axis` on pinned
/// nodes, discretely harmonic elsewhere, to relative residual
/// [`tolerances::CHI_CG_REL`].
pub fn solve_chi(mask: &CellMask, axis: usize) -> Result<(NodalField, usize, f64)> {
    assert!(axis < 3);
    let grid = mask.grid();
    let n = grid.n();
    let pinned = dirichlet_nodes(mask);

    let mut chi = NodalField::zeros(grid);
    for idx in 0..grid.len() {
        if pinned[idx] {
            let (i, j, k) = grid.coords(idx);
            let y = [grid.node_coord(i), grid.node_coord(j), grid.node_coord(k)];
            chi.data[idx] = -y[axis];
        }
    }

    // Compress the free nodes.
    let mut rank = vec![usize::MAX; grid.len()];
    let mut free: Vec<u32> = Vec::new();
    for idx in 0..grid.len() {
        if !pinned[idx] {
            rank[idx] = free.len();
            free.push(idx as u32);
        }
    }
    if free.is_empty() {
        return Ok((chi, 0, 0.0));
    }

    // Neighbor table: global lattice index of the six neighbors per free node.
    let mut nbrs: Vec<[u32; 6]> = Vec::with_capacity(free.len());
    for &fidx in &free {
        let (i, j, k) = grid.coords(fidx as usize);
        let base = [i as isize, j as isize, k as isize];
        let mut row = [0u32; 6];
        let mut t = 0;
        for a in 0..3 {
            for d in [-1isize, 1] {
                let mut c = base;
                c[a] += d;
                row[t] = grid.idx_wrap(c[0], c[1], c[2]) as u32;
                t += 1;
            }
        }
        nbrs.push(row);
    }

    let inv_h2 = (n * n) as f64;
    // System: (-Δ_h chi)|free = 0 with pinned values moved to the RHS.
    let mut b = vec![0.0; free.len()];
    for (r, row) in nbrs.iter().enumerate() {
        let mut acc = 0.0;
        for &g in row {
            if pinned[g as usize] {
                acc += chi.data[g as usize];
            }
        }
        b[r] = acc * inv_h2;
    }

    let mut apply = |x: &[f64], out: &mut [f64]| {
        for (r, row) in nbrs.iter().enumerate() {
            let mut acc = 6.0 * x[r];
            for &g in row {
                let rr = rank[g as usize];
                if rr != usize::MAX {
                    acc -= x[rr];
                }
            }
            out[r] = acc * inv_h2;
        }
    };

    let mut x = vec![0.0; free.len()];
    let max_iter = tolerances::CG_MAX_ITER_PER_N * n;
    let stats = conjugate_gradient(
        &mut apply,
        &b,
        &mut x,
        tolerances::CHI_CG_REL,
        max_iter,
        pinned.iter().all(|p| !p),
    );
    if stats.relative_residual > tolerances::CHI_CG_REL {
        return Err(Error::CgNoConvergence {
            iterations: stats.iterations,
            residual: stats.relative_residual,
        });
    }
    for (r, &fidx) in free.iter().enumerate() {
        chi.data[fidx as usize] = x[r];
    }
    Ok((chi, stats.iterations, stats.relative_residual))
}

/// Solve all three axes.
pub fn solve_all_chi(mask: &CellMask) -> Result<ChiSolution> {
    let mut chi: [Option<NodalField>; 3] = [None, None, None];
    let mut residuals = [0.0; 3];
    let mut iterations = [0; 3];
    for axis in 0..3 {
        let (c, it, r) = solve_chi(mask, axis)?;
        chi[axis] = Some(c);
        residuals[axis] = r;
        iterations[axis] = it;
    }
    Ok(ChiSolution {
        chi: chi.map(|c| c.unwrap()),
        residuals,
        iterations,
    })
}

/// Shape electric field `E^k = e_k + grad chi_k`, sampled on edges.
pub fn shape_electric_field(grid: GridSpec, chi: &NodalField, axis: usize) -> EdgeField {
    let mut e = grid.grad(chi);
    for v in &mut e.comp[axis] {
        *v += 1.0;
    }
    e
}

/// Assemble the effective permittivity tensor.
pub fn effective_permittivity(mask: &CellMask, eps_e: f64) -> Result<PermittivityTensor> {
    if eps_e <= 0.0 {
        return Err(Error::pre(format!(
            "matrix permittivity must be positive, got {eps_e}"
        )));
    }
    let grid = mask.grid();
    let sol = solve_all_chi(mask)?;
    let fields: Vec<EdgeField> = (0..3)
        .map(|k| shape_electric_field(grid, &sol.chi[k], k))
        .collect();
    let mut tensor = [[0.0; 3]; 3];
    for k in 0..3 {
        for l in k..3 {
            let v = eps_e * fields[k].dot(&fields[l]);
            tensor[k][l] = v;
            tensor[l][k] = v;
        }
    }
    Ok(PermittivityTensor {
        tensor,
        eps_e,
        resolution: grid.n(),
    })
}
