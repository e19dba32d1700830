//! Resonance eigenspectrum of the inclusion.
//!
//! The working space is the discrete analog of the divergence-free fields
//! supported inside the inclusion with vanishing normal trace: face fields
//! supported on interior faces whose discrete divergence vanishes at every
//! cell. The compact self-adjoint cell operator
//!
//! `K f = P (psi_f + (1/4) (m_f ∧ y))`,   `m_f = ∫ y ∧ f`
//!
//! is applied matrix-free: a spectral Poisson solve for `psi_f`, the rank-3
//! moment term, and the divergence projector `P` (a Neumann solve on the
//! occupied cells). Its leading eigenpairs `(alpha_n, f_n)` are extracted by
//! a deflated, fully reorthogonalized Lanczos iteration; each eigenpair
//! carries the magnetic moment `m_n` and the bulk average
//! `avg_u_n = m_n / (2 sqrt(alpha_n))` of the associated magnetic corrector
//! `u_n = (curl^T psi_{f_n} + m_n/2) / sqrt(alpha_n)`.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{EdgeField, FaceField, GridSpec};
use crate::mask::CellMask;
use crate::poisson::PoissonSolver;
use crate::solvers::conjugate_gradient;
use crate::tolerances;

#[inline]
fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Magnetic moment `m = h^3 Σ y_face ∧ (f e_axis)` over the interior faces.
pub fn strength_vector(mask: &CellMask, f: &FaceField) -> [f64; 3] {
    let grid = mask.grid();
    let mut m = [0.0; 3];
    for axis in 0..3 {
        let mut unit = [0.0; 3];
        unit[axis] = 1.0;
        for &fidx in mask.interior_faces(axis) {
            let idx = fidx as usize;
            let (i, j, k) = grid.coords(idx);
            let y = grid.face_center(axis, i, j, k);
            let c = cross(y, unit);
            let v = f.comp[axis][idx];
            m[0] += v * c[0];
            m[1] += v * c[1];
            m[2] += v * c[2];
        }
    }
    let w = grid.weight();
    [m[0] * w, m[1] * w, m[2] * w]
}

/// One resonance mode. Indices are reported 1-based; `alpha` values are
/// sorted descending across a catalog.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenMode {
    pub index: usize,
    pub alpha: f64,
    pub lambda: f64,
    /// Unit-norm eigenvector on interior faces.
    pub field: FaceField,
    /// Magnetic moment `∫ y ∧ f_n`.
    pub strength: [f64; 3],
    /// Bulk average of the magnetic corrector, `m_n / (2 sqrt(alpha_n))`.
    pub avg_u: [f64; 3],
    /// Verified residual `|K f_n - alpha_n f_n|`.
    pub residual: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SpectrumDiagnostics {
    pub operator_applications: usize,
    pub sweeps: usize,
    pub residuals: Vec<f64>,
}

/// Eigenmodes of one geometry, with provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeCatalog {
    pub resolution: usize,
    pub geometry_hash: String,
    pub modes: Vec<EigenMode>,
    pub diagnostics: SpectrumDiagnostics,
}

/// Discretized divergence-free interior subspace with its projector and the
/// machinery to apply the cell operator. Immutable after construction.
pub struct Z0Subspace {
    mask: Arc<CellMask>,
    poisson: PoissonSolver,
    packed_len: usize,
    offsets: [usize; 3],
    /// Occupied-cell compression.
    cell_rank: Vec<u32>,
    n_cells: usize,
    /// Neighbor ranks across interior faces (u32::MAX = none).
    adj: Vec<[u32; 6]>,
    deg: Vec<f64>,
    /// Per packed face column: (behind cell rank, ahead cell rank).
    face_cells: Vec<(u32, u32)>,
}

const NONE: u32 = u32::MAX;

impl Z0Subspace {
    pub fn new(mask: Arc<CellMask>) -> Self {
        let grid = mask.grid();
        let poisson = PoissonSolver::new(grid);

        let mut offsets = [0usize; 3];
        let mut total = 0;
        for a in 0..3 {
            offsets[a] = total;
            total += mask.interior_faces(a).len();
        }

        let mut cell_rank = vec![NONE; grid.len()];
        let mut n_cells = 0u32;
        for idx in 0..grid.len() {
            if mask.occupied()[idx] {
                cell_rank[idx] = n_cells;
                n_cells += 1;
            }
        }

        let mut adj = vec![[NONE; 6]; n_cells as usize];
        let mut deg = vec![0.0; n_cells as usize];
        let mut face_cells = Vec::with_capacity(total);
        for a in 0..3 {
            for &fidx in mask.interior_faces(a) {
                let idx = fidx as usize;
                let (i, j, k) = grid.coords(idx);
                let mut c = [i as isize, j as isize, k as isize];
                c[a] -= 1;
                let behind = grid.idx_wrap(c[0], c[1], c[2]);
                let rb = cell_rank[behind];
                let ra = cell_rank[idx];
                debug_assert!(rb != NONE && ra != NONE);
                face_cells.push((rb, ra));
                // Fill adjacency: slot 2a = towards -a, slot 2a+1 = +a.
                adj[ra as usize][2 * a] = rb;
                adj[rb as usize][2 * a + 1] = ra;
                deg[ra as usize] += 1.0;
                deg[rb as usize] += 1.0;
            }
        }

        Z0Subspace {
            mask,
            poisson,
            packed_len: total,
            offsets,
            cell_rank,
            n_cells: n_cells as usize,
            adj,
            deg,
            face_cells,
        }
    }

    #[inline]
    pub fn grid(&self) -> GridSpec {
        self.mask.grid()
    }

    #[inline]
    pub fn mask(&self) -> &CellMask {
        &self.mask
    }

    #[inline]
    pub fn poisson(&self) -> &PoissonSolver {
        &self.poisson
    }

    /// Dimension of the divergence-free interior subspace:
    /// interior faces minus the rank of the cell divergence map.
    pub fn dim(&self) -> usize {
        if self.n_cells == 0 {
            0
        } else {
            self.packed_len - (self.n_cells - 1)
        }
    }

    #[inline]
    pub fn packed_len(&self) -> usize {
        self.packed_len
    }

    /// Occupied-cell count backing the divergence map.
    pub fn sigma_cell_count(&self) -> usize {
        self.n_cells
    }

    /// For each packed face column, the compressed ranks of the (behind,
    /// ahead) occupied cells it separates. Exposed for the dense oracle,
    /// which refactorizes the divergence map independently.
    pub fn face_cell_ranks(&self) -> &[(u32, u32)] {
        &self.face_cells
    }

    /// Gather the interior-face values into a packed vector.
    pub fn pack(&self, f: &FaceField) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.packed_len);
        for a in 0..3 {
            for &fidx in self.mask.interior_faces(a) {
                out.push(f.comp[a][fidx as usize]);
            }
        }
        out
    }

    /// Scatter a packed vector to a face field (zero off the interior set).
    pub fn unpack(&self, v: &[f64]) -> FaceField {
        assert_eq!(v.len(), self.packed_len);
        let mut f = FaceField::zeros(self.grid());
        let mut t = 0;
        for a in 0..3 {
            for &fidx in self.mask.interior_faces(a) {
                f.comp[a][fidx as usize] = v[t];
                t += 1;
            }
        }
        f
    }

    fn wdot(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * self.grid().weight()
    }

    fn wnorm(&self, a: &[f64]) -> f64 {
        self.wdot(a, a).sqrt()
    }

    /// Divergence of a packed field at the occupied cells, times `h`
    /// cancelled later; entries are `(1/h) Σ ± f`.
    fn cell_divergence(&self, v: &[f64]) -> Vec<f64> {
        let inv_h = self.grid().n() as f64;
        let mut b = vec![0.0; self.n_cells];
        for (col, &(rb, ra)) in self.face_cells.iter().enumerate() {
            let val = v[col] * inv_h;
            b[rb as usize] += val;
            b[ra as usize] -= val;
        }
        b
    }

    /// Remove the discrete gradient part: subtract `D^T p` where
    /// `D D^T p = D v` is solved on the occupied cells (Neumann problem,
    /// constant nullspace removed by zero-mean pinning).
    pub fn project_packed(&self, v: &mut [f64]) -> Result<()> {
        if self.n_cells == 0 || self.packed_len == 0 {
            return Ok(());
        }
        let n = self.grid().n();
        let inv_h = n as f64;
        let inv_h2 = inv_h * inv_h;
        let b = self.cell_divergence(v);

        let adj = &self.adj;
        let deg = &self.deg;
        let mut apply = |p: &[f64], out: &mut [f64]| {
            for r in 0..p.len() {
                let mut acc = deg[r] * p[r];
                for &nb in &adj[r] {
                    if nb != NONE {
                        acc -= p[nb as usize];
                    }
                }
                out[r] = acc * inv_h2;
            }
        };

        let mut p = vec![0.0; self.n_cells];
        let stats = conjugate_gradient(
            &mut apply,
            &b,
            &mut p,
            tolerances::PROJECTOR_TARGET_REL,
            tolerances::CG_MAX_ITER_PER_N * n,
            true,
        );
        if stats.relative_residual > tolerances::PROJECTOR_FAIL_REL {
            return Err(Error::ProjectorSolveFailure {
                iterations: stats.iterations,
                residual: stats.relative_residual,
            });
        }
        for (col, &(rb, ra)) in self.face_cells.iter().enumerate() {
            v[col] -= (p[rb as usize] - p[ra as usize]) * inv_h;
        }
        Ok(())
    }

    /// Orthogonal projection onto the divergence-free interior subspace.
    /// Components off the interior face set are zeroed.
    pub fn leray_project(&self, f: &FaceField) -> Result<FaceField> {
        let mut v = self.pack(f);
        self.project_packed(&mut v)?;
        Ok(self.unpack(&v))
    }

    fn strength_packed(&self, v: &[f64]) -> [f64; 3] {
        let grid = self.grid();
        let mut m = [0.0; 3];
        let mut t = 0;
        for a in 0..3 {
            let mut unit = [0.0; 3];
            unit[a] = 1.0;
            for &fidx in self.mask.interior_faces(a) {
                let idx = fidx as usize;
                let (i, j, k) = grid.coords(idx);
                let c = cross(grid.face_center(a, i, j, k), unit);
                let val = v[t];
                m[0] += val * c[0];
                m[1] += val * c[1];
                m[2] += val * c[2];
                t += 1;
            }
        }
        let w = grid.weight();
        [m[0] * w, m[1] * w, m[2] * w]
    }

    /// Matrix-free application of the cell operator on a packed vector.
    pub fn apply_k_packed(&self, v: &[f64]) -> Result<Vec<f64>> {
        let f = self.unpack(v);
        let psi = self.poisson.solve_face(&f)?.psi;
        let m = self.strength_packed(v);

        let grid = self.grid();
        let mut out = Vec::with_capacity(self.packed_len);
        for a in 0..3 {
            for &fidx in self.mask.interior_faces(a) {
                let idx = fidx as usize;
                let (i, j, k) = grid.coords(idx);
                let y = grid.face_center(a, i, j, k);
                let mv = cross(m, y);
                out.push(psi.comp[a][idx] + 0.25 * mv[a]);
            }
        }
        self.project_packed(&mut out)?;
        Ok(out)
    }

    /// Full-field variant of [`Self::apply_k_packed`]; the input is
    /// restricted to interior faces first.
    pub fn apply_k(&self, f: &FaceField) -> Result<FaceField> {
        let v = self.pack(f);
        Ok(self.unpack(&self.apply_k_packed(&v)?))
    }

    /// Magnetic corrector of one mode, sampled on edges:
    /// `u_n = (curl^T psi_{f_n} + m_n / 2) / sqrt(alpha_n)`.
    pub fn gamma_map(&self, mode: &EigenMode) -> Result<EdgeField> {
        let grid = self.grid();
        let psi = self.poisson.solve_face(&mode.field)?.psi;
        let mut u = grid.curl_adjoint(&psi);
        for a in 0..3 {
            let half_m = 0.5 * mode.strength[a];
            for v in &mut u.comp[a] {
                *v += half_m;
            }
        }
        u.scale_in_place(1.0 / mode.alpha.sqrt());
        Ok(u)
    }

    /// Leading eigenpairs by deflated, fully reorthogonalized Lanczos
    /// iteration with verified residuals.
    pub fn solve_spectrum(&self, n_modes: usize, seed: u64) -> Result<ModeCatalog> {
        let dim = self.dim();
        if n_modes == 0 {
            return Err(Error::pre("n_modes must be at least 1"));
        }
        if n_modes > dim {
            return Err(Error::pre(format!(
                "requested {n_modes} modes but the divergence-free subspace has dimension {dim}"
            )));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut locked: Vec<Vec<f64>> = Vec::new();
        let mut locked_alpha: Vec<f64> = Vec::new();
        let mut applies = 0usize;
        let mut sweeps = 0usize;
        let lock_cap = n_modes + 30;
        let mut confirm_threshold: Option<f64> = None;

        let order_desc = |alphas: &[f64]| {
            let mut idx: Vec<usize> = (0..alphas.len()).collect();
            idx.sort_by(|&a, &b| alphas[b].partial_cmp(&alphas[a]).unwrap());
            idx
        };

        loop {
            if sweeps >= tolerances::MAX_RESTARTS {
                return Err(Error::LanczosStagnation {
                    converged_count: locked.len().min(n_modes),
                    requested: n_modes,
                });
            }
            sweeps += 1;

            // Fresh start vector, projected and deflated.
            let mut v0: Vec<f64> = (0..self.packed_len)
                .map(|_| rng.random::<f64>() - 0.5)
                .collect();
            self.project_packed(&mut v0)?;
            for pass in 0..2 {
                let _ = pass;
                for l in &locked {
                    let c = self.wdot(&v0, l);
                    for (x, y) in v0.iter_mut().zip(l) {
                        *x -= c * y;
                    }
                }
            }
            let nv = self.wnorm(&v0);
            if nv < 1e-12 {
                continue;
            }
            for x in &mut v0 {
                *x /= nv;
            }

            let remaining = n_modes.saturating_sub(locked.len());
            let m_target = (2 * remaining + 30).max(60).min(dim.saturating_sub(locked.len()).max(1));

            let mut basis: Vec<Vec<f64>> = vec![v0];
            let mut diag: Vec<f64> = Vec::new();
            let mut off: Vec<f64> = Vec::new();
            let mut exhausted = false;

            for j in 0..m_target {
                let mut w = self.apply_k_packed(&basis[j])?;
                applies += 1;
                // Deflate against locked eigenvectors.
                for l in &locked {
                    let c = self.wdot(&w, l);
                    for (x, y) in w.iter_mut().zip(l) {
                        *x -= c * y;
                    }
                }
                let a_j = self.wdot(&w, &basis[j]);
                diag.push(a_j);
                for (x, y) in w.iter_mut().zip(&basis[j]) {
                    *x -= a_j * y;
                }
                if j > 0 {
                    let b_prev = off[j - 1];
                    let prev = &basis[j - 1];
                    for (x, y) in w.iter_mut().zip(prev) {
                        *x -= b_prev * y;
                    }
                }
                // Full reorthogonalization, two passes.
                for pass in 0..2 {
                    let _ = pass;
                    for u in &basis {
                        let c = self.wdot(&w, u);
                        for (x, y) in w.iter_mut().zip(u) {
                            *x -= c * y;
                        }
                    }
                    for l in &locked {
                        let c = self.wdot(&w, l);
                        for (x, y) in w.iter_mut().zip(l) {
                            *x -= c * y;
                        }
                    }
                }
                let b_j = self.wnorm(&w);
                if b_j < 1e-13 {
                    exhausted = true;
                    break;
                }
                off.push(b_j);
                for x in &mut w {
                    *x /= b_j;
                }
                basis.push(w);
            }

            // Ritz pairs of the tridiagonal section.
            let k = diag.len();
            if k == 0 {
                continue;
            }
            let mut t = DMatrix::<f64>::zeros(k, k);
            for i in 0..k {
                t[(i, i)] = diag[i];
                if i + 1 < k {
                    t[(i, i + 1)] = off[i];
                    t[(i + 1, i)] = off[i];
                }
            }
            let eig = t.symmetric_eigen();
            let theta: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            let order = order_desc(&theta);
            let theta_max = theta[order[0]].abs().max(f64::MIN_POSITIVE);
            let beta_last = if exhausted || k >= basis.len() {
                // Invariant subspace found: residual estimates vanish.
                0.0
            } else {
                off[k - 1]
            };

            let mut newly_locked_max: Option<f64> = None;
            for &i in &order {
                if locked.len() >= lock_cap {
                    break;
                }
                let th = theta[i];
                if th <= 1e-14 * theta_max {
                    continue;
                }
                let est = (beta_last * eig.eigenvectors[(k - 1, i)]).abs();
                if est > tolerances::EIGEN_LOCK_ESTIMATE {
                    continue;
                }
                // Assemble the Ritz vector.
                let mut x = vec![0.0; self.packed_len];
                for (j, u) in basis.iter().take(k).enumerate() {
                    let s = eig.eigenvectors[(j, i)];
                    if s != 0.0 {
                        for (xx, uu) in x.iter_mut().zip(u) {
                            *xx += s * uu;
                        }
                    }
                }
                for pass in 0..2 {
                    let _ = pass;
                    for l in &locked {
                        let c = self.wdot(&x, l);
                        for (xx, ll) in x.iter_mut().zip(l) {
                            *xx -= c * ll;
                        }
                    }
                }
                let nx = self.wnorm(&x);
                if nx < 0.1 {
                    continue; // duplicate of an already locked vector
                }
                for xx in &mut x {
                    *xx /= nx;
                }
                locked.push(x);
                locked_alpha.push(th);
                newly_locked_max = Some(newly_locked_max.map_or(th, |m: f64| m.max(th)));
            }

            if locked.len() < n_modes {
                confirm_threshold = None;
                continue;
            }

            let order_locked = order_desc(&locked_alpha);
            let nth = locked_alpha[order_locked[n_modes - 1]];
            let confirmed = match confirm_threshold {
                Some(th) => newly_locked_max.map_or(true, |a| a <= th * (1.0 + 1e-9)),
                None => false,
            };
            if !confirmed {
                confirm_threshold = Some(nth);
                continue;
            }

            // Verify true residuals of the leading candidates.
            let mut failures = Vec::new();
            let mut verified: Vec<(f64, usize, f64)> = Vec::new(); // (alpha, locked idx, residual)
            for &li in order_locked.iter().take(n_modes) {
                let x = &locked[li];
                let kx = self.apply_k_packed(x)?;
                applies += 1;
                let rho = self.wdot(&kx, x);
                let mut r = 0.0;
                for (a, b) in kx.iter().zip(x) {
                    let d = a - rho * b;
                    r += d * d;
                }
                let r = (r * self.grid().weight()).sqrt();
                if r > tolerances::EIGEN_RESIDUAL {
                    failures.push(li);
                } else {
                    verified.push((rho, li, r));
                }
            }
            if !failures.is_empty() {
                // Drop the failed candidates and keep iterating.
                failures.sort_unstable_by(|a, b| b.cmp(a));
                for li in failures {
                    locked.swap_remove(li);
                    locked_alpha.swap_remove(li);
                }
                confirm_threshold = None;
                continue;
            }

            // Build the catalog, descending alpha.
            verified.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
            let mut modes = Vec::with_capacity(n_modes);
            let mut residuals = Vec::with_capacity(n_modes);
            for (rank, &(alpha, li, resid)) in verified.iter().enumerate() {
                let mut v = locked[li].clone();
                sign_fix(&mut v);
                let field = self.unpack(&v);
                let strength = self.strength_packed(&v);
                let avg_u = [
                    strength[0] / (2.0 * alpha.sqrt()),
                    strength[1] / (2.0 * alpha.sqrt()),
                    strength[2] / (2.0 * alpha.sqrt()),
                ];
                residuals.push(resid);
                modes.push(EigenMode {
                    index: rank + 1,
                    alpha,
                    lambda: 1.0 / alpha,
                    field,
                    strength,
                    avg_u,
                    residual: resid,
                });
            }
            return Ok(ModeCatalog {
                resolution: self.grid().n(),
                geometry_hash: self.mask.geometry_hash(),
                modes,
                diagnostics: SpectrumDiagnostics {
                    operator_applications: applies,
                    sweeps,
                    residuals,
                },
            });
        }
    }
}

/// Fix the sign so the largest-magnitude entry is positive (first index wins
/// ties); reproducible serialization depends on this.
fn sign_fix(v: &mut [f64]) {
    let mut best = 0.0f64;
    let mut best_val = 0.0f64;
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            best_val = x;
        }
    }
    if best_val < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::{voxelize, InclusionShape};

    fn cube_subspace(n: usize) -> Z0Subspace {
        let grid = GridSpec::new(n).unwrap();
        let mask = voxelize(&InclusionShape::Cube { half_side: 0.3 }, grid).unwrap();
        Z0Subspace::new(Arc::new(mask))
    }

    fn random_interior(z: &Z0Subspace, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..z.packed_len())
            .map(|_| rng.random::<f64>() - 0.5)
            .collect()
    }

    #[test]
    fn projector_output_is_divergence_free() {
        let z = cube_subspace(16);
        let mut v = random_interior(&z, 7);
        let norm = z.wnorm(&v);
        z.project_packed(&mut v).unwrap();
        let f = z.unpack(&v);
        let div = z.grid().div(&f);
        let max = div.data.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(max <= 1e-10 * norm, "max div {max:e} for norm {norm:e}");
    }

    #[test]
    fn projector_is_idempotent_and_kills_gradients() {
        let z = cube_subspace(12);
        let mut v = random_interior(&z, 8);
        z.project_packed(&mut v).unwrap();
        let mut v2 = v.clone();
        z.project_packed(&mut v2).unwrap();
        let mut diff = 0.0;
        for (a, b) in v.iter().zip(&v2) {
            diff += (a - b) * (a - b);
        }
        let diff = (diff * z.grid().weight()).sqrt();
        assert!(diff <= 1e-11 * z.wnorm(&v).max(1.0));

        // A pure cell-gradient field projects to (nearly) zero.
        let grid = z.grid();
        let mut q = crate::grid::CellField::zeros(grid);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for idx in 0..grid.len() {
            if z.mask.occupied()[idx] {
                q.data[idx] = rng.random::<f64>() - 0.5;
            }
        }
        let g = grid.div_adjoint(&q);
        let mut gv = z.pack(&g);
        let gnorm = z.wnorm(&gv);
        z.project_packed(&mut gv).unwrap();
        assert!(z.wnorm(&gv) <= 1e-10 * gnorm, "{:e}", z.wnorm(&gv) / gnorm);
    }

    #[test]
    fn projector_self_adjoint() {
        let z = cube_subspace(12);
        let a = random_interior(&z, 10);
        let b = random_interior(&z, 11);
        let mut pa = a.clone();
        let mut pb = b.clone();
        z.project_packed(&mut pa).unwrap();
        z.project_packed(&mut pb).unwrap();
        let lhs = z.wdot(&pa, &b);
        let rhs = z.wdot(&a, &pb);
        let scale = z.wnorm(&a) * z.wnorm(&b);
        assert!((lhs - rhs).abs() <= 1e-11 * scale);
    }

    #[test]
    fn strength_of_axisymmetric_curl_is_axial() {
        // A rotationally symmetric potential about e3 yields a moment along
        // e3 only.
        let n = 16;
        let z = cube_subspace(n);
        let grid = z.grid();
        let mut w = EdgeField::zeros(grid);
        for idx in 0..grid.len() {
            if z.mask.is_interior_edge(2, idx) {
                let (i, j, k) = grid.coords(idx);
                let p = grid.edge_center(2, i, j, k);
                let r2 = p[0] * p[0] + p[1] * p[1];
                w.comp[2][idx] = (-20.0 * r2).exp() * (1.0 - (p[2] * 8.0).powi(2)).max(0.0);
            }
        }
        let f = grid.curl(&w);
        let norm = f.norm();
        assert!(norm > 0.0);
        let f = {
            let mut f = f;
            f.scale_in_place(1.0 / norm);
            f
        };
        let m = strength_vector(&z.mask, &f);
        assert!(m[0].abs() < 1e-12, "m1 = {:e}", m[0]);
        assert!(m[1].abs() < 1e-12, "m2 = {:e}", m[1]);
        assert!(m[2].abs() > 1e-6, "m3 = {:e}", m[2]);
    }

    #[test]
    fn strength_of_counter_rotating_loops_vanishes() {
        // Odd-in-x potential: two counter-rotating current loops whose
        // moment cancels.
        let n = 16;
        let z = cube_subspace(n);
        let grid = z.grid();
        let mut w = EdgeField::zeros(grid);
        for idx in 0..grid.len() {
            if z.mask.is_interior_edge(2, idx) {
                let (i, j, k) = grid.coords(idx);
                let p = grid.edge_center(2, i, j, k);
                let bump = (-30.0 * (p[1] * p[1] + p[2] * p[2])).exp();
                w.comp[2][idx] = p[0] * bump; // odd in x, even in y and z
            }
        }
        let mut f = grid.curl(&w);
        let norm = f.norm();
        assert!(norm > 0.0);
        f.scale_in_place(1.0 / norm);
        let m = strength_vector(&z.mask, &f);
        let mag = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
        assert!(mag < 1e-10, "|m| = {mag:e}");
    }

    #[test]
    fn strength_of_zero_field_is_zero() {
        let z = cube_subspace(8);
        let f = FaceField::zeros(z.grid());
        assert_eq!(strength_vector(&z.mask, &f), [0.0; 3]);
    }

    #[test]
    fn operator_is_self_adjoint_and_positive() {
        let z = cube_subspace(12);
        let mut f = random_interior(&z, 21);
        let mut g = random_interior(&z, 22);
        z.project_packed(&mut f).unwrap();
        z.project_packed(&mut g).unwrap();
        let kf = z.apply_k_packed(&f).unwrap();
        let kg = z.apply_k_packed(&g).unwrap();
        let lhs = z.wdot(&kf, &g);
        let rhs = z.wdot(&f, &kg);
        let scale = (z.wnorm(&f) * z.wnorm(&g)).max(f64::MIN_POSITIVE);
        assert!((lhs - rhs).abs() <= 1e-10 * scale, "asym {:e}", (lhs - rhs).abs() / scale);
        assert!(z.wdot(&kf, &f) >= 0.0);
    }

    #[test]
    fn galerkin_pairing_matches_potential_plus_moment() {
        let z = cube_subspace(12);
        let mut f = random_interior(&z, 31);
        let mut g = random_interior(&z, 32);
        z.project_packed(&mut f).unwrap();
        z.project_packed(&mut g).unwrap();
        let kf = z.apply_k_packed(&f).unwrap();
        let lhs = z.wdot(&kf, &g);

        let ff = z.unpack(&f);
        let gf = z.unpack(&g);
        let psi = z.poisson().solve_face(&ff).unwrap().psi;
        let mf = strength_vector(&z.mask, &ff);
        let mg = strength_vector(&z.mask, &gf);
        let rhs = psi.dot(&gf) + 0.25 * (mf[0] * mg[0] + mf[1] * mg[1] + mf[2] * mg[2]);
        let scale = lhs.abs().max(rhs.abs());
        assert!((lhs - rhs).abs() <= 1e-10 * scale, "lhs {lhs:e} rhs {rhs:e}");
    }

    #[test]
    fn spectrum_is_deterministic_and_orthonormal() {
        let z = cube_subspace(10);
        let cat1 = z.solve_spectrum(6, 42).unwrap();
        let cat2 = z.solve_spectrum(6, 42).unwrap();
        for (a, b) in cat1.modes.iter().zip(&cat2.modes) {
            assert_eq!(a.alpha.to_bits(), b.alpha.to_bits(), "alpha not bit-identical");
        }
        // Orthonormality and zero mean.
        for i in 0..cat1.modes.len() {
            for j in i..cat1.modes.len() {
                let d = cat1.modes[i].field.dot(&cat1.modes[j].field);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-9, "gram[{i}][{j}] = {d}");
            }
            let mean = cat1.modes[i].field.mean();
            for c in mean {
                assert!(c.abs() < 1e-10, "mode mean {c:e}");
            }
            assert!(cat1.modes[i].residual <= tolerances::EIGEN_RESIDUAL);
        }
        // Sorted descending.
        for w in cat1.modes.windows(2) {
            assert!(w[0].alpha >= w[1].alpha);
        }
    }

    #[test]
    fn cube_fundamental_is_triply_degenerate() {
        let z = cube_subspace(16);
        let cat = z.solve_spectrum(4, 7).unwrap();
        let a = &cat.modes;
        assert!((a[0].alpha - a[2].alpha) / a[0].alpha < 0.02);
    }

    #[test]
    fn gamma_map_satisfies_curl_and_average_identities() {
        let z = cube_subspace(12);
        let cat = z.solve_spectrum(3, 5).unwrap();
        let grid = z.grid();
        for mode in &cat.modes {
            let u = z.gamma_map(mode).unwrap();
            // Bulk average equals avg_u.
            let mean = u.mean();
            for a in 0..3 {
                assert!((mean[a] - mode.avg_u[a]).abs() < 1e-10);
            }
            // curl u = f / sqrt(alpha) on faces.
            let cu = grid.curl(&u);
            let mut worst = 0.0f64;
            for a in 0..3 {
                for idx in 0..grid.len() {
                    let expect = mode.field.comp[a][idx] / mode.alpha.sqrt();
                    worst = worst.max((cu.comp[a][idx] - expect).abs());
                }
            }
            assert!(worst < 1e-9 / mode.alpha.sqrt(), "curl defect {worst:e}");
            // b0 normalization: |curl u|^2 = lambda.
            let b0 = cu.norm_sq();
            assert!((b0 - mode.lambda).abs() <= 1e-7 * mode.lambda);
        }
    }

    #[test]
    fn rejects_oversized_mode_request() {
        let z = cube_subspace(8);
        let dim = z.dim();
        assert!(z.solve_spectrum(dim + 1, 1).is_err());
    }

    #[test]
    fn rotated_mask_preserves_spectrum() {
        // 90-degree rotation about e3 maps the lattice onto itself, so the
        // eigenvalues of an L-shaped inclusion are preserved.
        let grid = GridSpec::new(12).unwrap();
        let mask = voxelize(&InclusionShape::lshape_reference(), grid).unwrap();
        let n = grid.n();
        let mut rot = vec![false; grid.len()];
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    // (x, y) -> (y, -x): cell (i,j,k) maps to (j, n-1-i, k).
                    rot[grid.idx(j, n - 1 - i, k)] = mask.occupied()[grid.idx(i, j, k)];
                }
            }
        }
        let mask_rot = CellMask::from_occupancy(grid, rot).unwrap();
        let z1 = Z0Subspace::new(Arc::new(mask));
        let z2 = Z0Subspace::new(Arc::new(mask_rot));
        let c1 = z1.solve_spectrum(6, 3).unwrap();
        let c2 = z2.solve_spectrum(6, 3).unwrap();
        for (a, b) in c1.modes.iter().zip(&c2.modes) {
            assert!(
                (a.alpha - b.alpha).abs() <= 1e-6 * a.alpha,
                "{} vs {}",
                a.alpha,
                b.alpha
            );
        }
    }
}
