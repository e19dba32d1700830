//! Zero-mean periodic Poisson solves on the discrete torus.
//!
//! The seven-point Laplacian is diagonal in the discrete Fourier basis, so
//! `-Δψ = f` is solved exactly (up to roundoff) by dividing each Fourier
//! coefficient by the symbol `Σ_a (4/h²) sin²(π k_a / N)` and zeroing the
//! constant mode. Each staggered component array is treated as a periodic
//! scalar array; the lattice shift does not change the symbol.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{FaceField, GridSpec};
use crate::tolerances;

/// Three-dimensional FFT by axis passes on an `n^3` complex buffer
/// (x-fastest layout).
pub struct Fft3 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft3 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft3 {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    fn pass(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>, axis: usize) {
        let n = self.n;
        match axis {
            0 => fft.process(data),
            _ => {
                let stride = if axis == 1 { n } else { n * n };
                let mut line = vec![Complex64::new(0.0, 0.0); n];
                // Iterate over all lines along `axis`.
                for outer in 0..n {
                    for inner in 0..n {
                        let base = match axis {
                            1 => inner + n * n * outer,
                            _ => inner + n * outer,
                        };
                        for (t, slot) in line.iter_mut().enumerate() {
                            *slot = data[base + t * stride];
                        }
                        fft.process(&mut line);
                        for (t, slot) in line.iter().enumerate() {
                            data[base + t * stride] = *slot;
                        }
                    }
                }
            }
        }
    }

    /// Unnormalized forward transform.
    pub fn forward(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.n * self.n * self.n);
        for axis in 0..3 {
            self.pass(data, &self.fwd, axis);
        }
    }

    /// Inverse transform including the `1/n^3` normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.n * self.n * self.n);
        for axis in 0..3 {
            self.pass(data, &self.inv, axis);
        }
        let scale = 1.0 / (self.n * self.n * self.n) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// Componentwise solution of the zero-mean periodic Poisson problem.
pub struct PoissonSolution {
    pub psi: FaceField,
    /// Mean removed from each source component before the solve.
    pub removed_mean: [f64; 3],
}

/// Spectral Poisson solver; plan construction is not reentrant, solves are.
pub struct PoissonSolver {
    grid: GridSpec,
    fft: Fft3,
    /// Symbol of `-Δ_h` per Fourier index, zero at the constant mode.
    symbol: Vec<f64>,
}

impl PoissonSolver {
    pub fn new(grid: GridSpec) -> Self {
        let n = grid.n();
        let fft = Fft3::new(n);
        let h = grid.h();
        let sin2 = |k: usize| {
            let s = (std::f64::consts::PI * k as f64 / n as f64).sin();
            4.0 * s * s / (h * h)
        };
        let mut symbol = vec![0.0; grid.len()];
        for kz in 0..n {
            for ky in 0..n {
                for kx in 0..n {
                    symbol[grid.idx(kx, ky, kz)] = sin2(kx) + sin2(ky) + sin2(kz);
                }
            }
        }
        PoissonSolver { grid, fft, symbol }
    }

    #[inline]
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// Solve `-Δ_h ψ = src` for a periodic scalar array with the constant
    /// mode of source and solution removed.
    pub fn solve_scalar(&self, src: &[f64]) -> Vec<f64> {
        assert_eq!(src.len(), self.grid.len());
        let mut buf: Vec<Complex64> = src.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        self.fft.forward(&mut buf);
        buf[0] = Complex64::new(0.0, 0.0);
        for (v, s) in buf.iter_mut().zip(&self.symbol).skip(1) {
            if *s > 0.0 {
                *v /= *s;
            } else {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        self.fft.inverse(&mut buf);
        buf.iter().map(|z| z.re).collect()
    }

    /// Solve componentwise for a face-sampled vector source. Each component
    /// must have (numerically) zero mean; the residual mean is removed.
    pub fn solve_face(&self, f: &FaceField) -> Result<PoissonSolution> {
        assert_eq!(f.n(), self.grid.n());
        let norm = f.norm();
        let mut removed = [0.0; 3];
        let mut psi = FaceField::zeros(self.grid);
        for a in 0..3 {
            let mean: f64 = f.comp[a].iter().sum::<f64>() * self.grid.weight();
            if mean.abs() > tolerances::SOURCE_MEAN_REL * norm.max(f64::MIN_POSITIVE) {
                return Err(Error::NonZeroMeanSource {
                    component: a,
                    mean,
                    norm,
                });
            }
            removed[a] = mean;
            psi.comp[a] = self.solve_scalar(&f.comp[a]);
        }
        Ok(PoissonSolution {
            psi,
            removed_mean: removed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn residual_rel(grid: GridSpec, psi: &[f64], f: &[f64]) -> f64 {
        let mut lap = vec![0.0; grid.len()];
        grid.laplacian_scalar(psi, &mut lap);
        let num: f64 = lap
            .iter()
            .zip(f)
            .map(|(l, s)| (l + s) * (l + s))
            .sum::<f64>()
            .sqrt();
        let den: f64 = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        num / den
    }

    #[test]
    fn single_mode_inverts_symbol() {
        let grid = GridSpec::new(16).unwrap();
        let solver = PoissonSolver::new(grid);
        let n = grid.n();
        // x-face lattice: the x coordinate is node-valued.
        let mut f = FaceField::zeros(grid);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let x = grid.node_coord(i);
                    f.comp[0][grid.idx(i, j, k)] = (2.0 * std::f64::consts::PI * x).sin();
                }
            }
        }
        let sigma = {
            let h = grid.h();
            let s = (std::f64::consts::PI / n as f64).sin();
            4.0 * s * s / (h * h)
        };
        let sol = solver.solve_face(&f).unwrap();
        for idx in 0..grid.len() {
            let expect = f.comp[0][idx] / sigma;
            assert!((sol.psi.comp[0][idx] - expect).abs() < 1e-12);
        }
        assert!(residual_rel(grid, &sol.psi.comp[0], &f.comp[0]) < 1e-12);
    }

    #[test]
    fn zero_source_gives_zero() {
        let grid = GridSpec::new(8).unwrap();
        let solver = PoissonSolver::new(grid);
        let f = FaceField::zeros(grid);
        let sol = solver.solve_face(&f).unwrap();
        assert!(sol.psi.norm() == 0.0);
    }

    #[test]
    fn random_zero_mean_residual() {
        let grid = GridSpec::new(16).unwrap();
        let solver = PoissonSolver::new(grid);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut f = FaceField::zeros(grid);
        for a in 0..3 {
            for v in &mut f.comp[a] {
                *v = rng.random::<f64>() - 0.5;
            }
            let mean: f64 = f.comp[a].iter().sum::<f64>() / grid.len() as f64;
            for v in &mut f.comp[a] {
                *v -= mean;
            }
        }
        let sol = solver.solve_face(&f).unwrap();
        for a in 0..3 {
            assert!(residual_rel(grid, &sol.psi.comp[a], &f.comp[a]) < 1e-10);
            let mean: f64 = sol.psi.comp[a].iter().sum::<f64>() * grid.weight();
            assert!(mean.abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_nonzero_mean() {
        let grid = GridSpec::new(8).unwrap();
        let solver = PoissonSolver::new(grid);
        let mut f = FaceField::zeros(grid);
        for v in &mut f.comp[1] {
            *v = 1.0;
        }
        assert!(matches!(
            solver.solve_face(&f),
            Err(Error::NonZeroMeanSource { component: 1, .. })
        ));
    }

    #[test]
    fn self_adjoint_and_positive() {
        let grid = GridSpec::new(12).unwrap();
        let solver = PoissonSolver::new(grid);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut mk = |seed_shift: u64| {
            let _ = seed_shift;
            let mut f = FaceField::zeros(grid);
            for a in 0..3 {
                for v in &mut f.comp[a] {
                    *v = rng.random::<f64>() - 0.5;
                }
                let mean: f64 = f.comp[a].iter().sum::<f64>() / grid.len() as f64;
                for v in &mut f.comp[a] {
                    *v -= mean;
                }
            }
            f
        };
        let f = mk(0);
        let g = mk(1);
        let pf = solver.solve_face(&f).unwrap().psi;
        let pg = solver.solve_face(&g).unwrap().psi;
        let lhs = pf.dot(&g);
        let rhs = f.dot(&pg);
        assert!((lhs - rhs).abs() <= 1e-12 * f.norm() * g.norm());
        assert!(pf.dot(&f) >= 0.0);
    }

    #[test]
    fn green_identity_via_symbols() {
        // <psi_f, g> equals the symbol-side gradient pairing of psi_f and
        // psi_g: sum over modes of sigma(k) psi_f(k) conj(psi_g(k)).
        let grid = GridSpec::new(12).unwrap();
        let solver = PoissonSolver::new(grid);
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let mut mk = || {
            let mut v: Vec<f64> = (0..grid.len()).map(|_| rng.random::<f64>() - 0.5).collect();
            let mean: f64 = v.iter().sum::<f64>() / grid.len() as f64;
            for x in &mut v {
                *x -= mean;
            }
            v
        };
        let f = mk();
        let g = mk();
        let pf = solver.solve_scalar(&f);
        let pg = solver.solve_scalar(&g);
        let lhs: f64 = pf.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() * grid.weight();

        // Symbol-side evaluation.
        let to_c = |v: &[f64]| -> Vec<Complex64> { v.iter().map(|x| Complex64::new(*x, 0.0)).collect() };
        let mut fh = to_c(&pf);
        let mut gh = to_c(&pg);
        solver.fft.forward(&mut fh);
        solver.fft.forward(&mut gh);
        let mut rhs = 0.0;
        for idx in 0..grid.len() {
            rhs += solver.symbol[idx] * (fh[idx] * gh[idx].conj()).re;
        }
        rhs /= (grid.len() * grid.len()) as f64; // Parseval normalization
        rhs *= grid.weight() * grid.len() as f64;
        let scale = lhs.abs().max(rhs.abs());
        assert!((lhs - rhs).abs() <= 1e-10 * scale, "lhs {lhs:e} rhs {rhs:e}");
    }
}
