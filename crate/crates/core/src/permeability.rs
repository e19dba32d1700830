//! Frequency-dependent effective permeability, band gaps and resonances.
//!
//! With eigenpairs `(alpha_n, f_n)` and moments `m_n` from the catalog, the
//! tensor is the truncated series
//!
//! `mu(k0) = I + (1/4) Σ_n  eps_r k0² / (1 - eps_r alpha_n k0²)  m_n ⊗ m_n`
//!
//! evaluated at `k0 = 2π / (lambda/d)`. The equivalent form through the
//! corrector averages `avg_u_n` and `lambda_n = 1/alpha_n` is provided for
//! cross-checking, as is the moment of the displacement current `J^k`.
//! Sweeps tabulate the tensor over a wavelength grid, locate maximal
//! intervals where every eigenvalue of `Re(mu)` is negative, and annotate
//! resonant multiplets with their strength matrices.

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{EdgeField, FaceField};
use crate::spectrum::{EigenMode, ModeCatalog, Z0Subspace};
use crate::tolerances;

/// One evaluation frequency in dimensionless units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPoint {
    pub lambda_over_d: f64,
    pub k0: f64,
    pub eps_r: Complex64,
}

impl FrequencyPoint {
    pub fn new(lambda_over_d: f64, eps_r: Complex64) -> Result<Self> {
        if !(lambda_over_d > 0.0) {
            return Err(Error::pre(format!(
                "lambda/d must be positive, got {lambda_over_d}"
            )));
        }
        if eps_r.im < 0.0 {
            return Err(Error::pre(format!(
                "Im(eps_r) must be nonnegative, got {}",
                eps_r.im
            )));
        }
        Ok(FrequencyPoint {
            lambda_over_d,
            k0: 2.0 * std::f64::consts::PI / lambda_over_d,
            eps_r,
        })
    }
}

/// Series truncation: keep at most `n_max` leading modes, drop modes whose
/// squared moment is below `strength_tol` times the largest.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TruncationRule {
    pub n_max: usize,
    pub strength_tol: f64,
}

impl Default for TruncationRule {
    fn default() -> Self {
        TruncationRule {
            n_max: 40,
            strength_tol: tolerances::STRENGTH_TOL_DEFAULT,
        }
    }
}

fn norm_sq3(v: [f64; 3]) -> f64 {
    v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
}

/// Modes retained by a truncation rule, in catalog (descending alpha) order.
pub fn retained_modes<'c>(catalog: &'c ModeCatalog, trunc: &TruncationRule) -> Vec<&'c EigenMode> {
    let cut = catalog
        .modes
        .iter()
        .take(trunc.n_max)
        .map(|m| norm_sq3(m.strength))
        .fold(0.0f64, f64::max)
        * trunc.strength_tol;
    catalog
        .modes
        .iter()
        .take(trunc.n_max)
        .filter(|m| norm_sq3(m.strength) > cut)
        .collect()
}

/// Complex symmetric effective permeability with truncation metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PermeabilityTensor {
    pub mu: [[Complex64; 3]; 3],
    /// Number of series terms actually summed.
    pub n_used: usize,
    /// Squared-moment mass of the dropped modes, relative to the total.
    pub truncation_residual: f64,
}

impl PermeabilityTensor {
    pub fn re(&self) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for k in 0..3 {
            for l in 0..3 {
                out[k][l] = self.mu[k][l].re;
            }
        }
        out
    }

    pub fn im(&self) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for k in 0..3 {
            for l in 0..3 {
                out[k][l] = self.mu[k][l].im;
            }
        }
        out
    }

    /// Eigenvalues of `Re(mu)`, ascending.
    pub fn re_eigenvalues(&self) -> [f64; 3] {
        sym_eigenvalues(self.re())
    }

    /// Eigenvalues of `Im(mu)`, ascending.
    pub fn im_eigenvalues(&self) -> [f64; 3] {
        sym_eigenvalues(self.im())
    }
}

pub(crate) fn sym_eigenvalues(m: [[f64; 3]; 3]) -> [f64; 3] {
    let mat = Matrix3::from_fn(|r, c| m[r][c]);
    let mut ev: Vec<f64> = mat.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    [ev[0], ev[1], ev[2]]
}

fn truncation_residual(catalog: &ModeCatalog, retained: &[&EigenMode]) -> f64 {
    let total: f64 = catalog.modes.iter().map(|m| norm_sq3(m.strength)).sum();
    if total == 0.0 {
        return 0.0;
    }
    let kept: f64 = retained.iter().map(|m| norm_sq3(m.strength)).sum();
    ((total - kept) / total).max(0.0)
}

fn check_singularity(fp: &FrequencyPoint, modes: &[&EigenMode]) -> Result<()> {
    if fp.eps_r.im != 0.0 {
        return Ok(());
    }
    let k2 = fp.k0 * fp.k0;
    for m in modes {
        let denom = Complex64::new(1.0, 0.0) - fp.eps_r * m.alpha * k2;
        if denom.norm() < tolerances::RESONANCE_SINGULARITY {
            return Err(Error::ResonanceSingularity {
                mode_index: m.index,
                lambda_over_d: fp.lambda_over_d,
            });
        }
    }
    Ok(())
}

/// Effective permeability via the moment series.
pub fn mu_eff(
    catalog: &ModeCatalog,
    fp: &FrequencyPoint,
    trunc: &TruncationRule,
) -> Result<PermeabilityTensor> {
    if catalog.modes.is_empty() {
        return Err(Error::pre("mode catalog is empty"));
    }
    let retained = retained_modes(catalog, trunc);
    check_singularity(fp, &retained)?;
    let k2 = fp.k0 * fp.k0;
    let mut mu = [[Complex64::new(0.0, 0.0); 3]; 3];
    for k in 0..3 {
        mu[k][k] = Complex64::new(1.0, 0.0);
    }
    for m in &retained {
        let denom = Complex64::new(1.0, 0.0) - fp.eps_r * m.alpha * k2;
        let coeff = fp.eps_r * k2 / denom * 0.25;
        for k in 0..3 {
            for l in 0..3 {
                mu[k][l] += coeff * (m.strength[k] * m.strength[l]);
            }
        }
    }
    Ok(PermeabilityTensor {
        mu,
        n_used: retained.len(),
        truncation_residual: truncation_residual(catalog, &retained),
    })
}

/// Effective permeability via the corrector averages (`avg_u`, `lambda`);
/// algebraically identical to [`mu_eff`].
pub fn mu_eff_from_avg_u(
    catalog: &ModeCatalog,
    fp: &FrequencyPoint,
    trunc: &TruncationRule,
) -> Result<PermeabilityTensor> {
    if catalog.modes.is_empty() {
        return Err(Error::pre("mode catalog is empty"));
    }
    let retained = retained_modes(catalog, trunc);
    check_singularity(fp, &retained)?;
    let k2 = fp.k0 * fp.k0;
    let mut mu = [[Complex64::new(0.0, 0.0); 3]; 3];
    for k in 0..3 {
        mu[k][k] = Complex64::new(1.0, 0.0);
    }
    for m in &retained {
        let coeff = fp.eps_r * k2 / (Complex64::new(m.lambda, 0.0) - fp.eps_r * k2);
        for k in 0..3 {
            for l in 0..3 {
                mu[k][l] += coeff * (m.avg_u[k] * m.avg_u[l]);
            }
        }
    }
    Ok(PermeabilityTensor {
        mu,
        n_used: retained.len(),
        truncation_residual: truncation_residual(catalog, &retained),
    })
}

/// Per-mode series coefficients of the shape magnetic field
/// `H^k = e_k + Σ_n c_n(k) u_n`, with `c_n(k) = avg_u_n[k] eps_r k0² /
/// (lambda_n - eps_r k0²)`.
pub fn magnetic_coefficients(
    retained: &[&EigenMode],
    fp: &FrequencyPoint,
    axis: usize,
) -> Vec<Complex64> {
    let k2 = fp.k0 * fp.k0;
    retained
        .iter()
        .map(|m| {
            fp.eps_r * k2 / (Complex64::new(m.lambda, 0.0) - fp.eps_r * k2) * m.avg_u[axis]
        })
        .collect()
}

/// Corrector fields of the retained modes, for field-level series
/// evaluation.
pub struct ModeBasis<'c> {
    pub retained: Vec<&'c EigenMode>,
    pub u: Vec<EdgeField>,
}

impl<'c> ModeBasis<'c> {
    pub fn build(
        z: &Z0Subspace,
        catalog: &'c ModeCatalog,
        trunc: &TruncationRule,
    ) -> Result<Self> {
        let retained = retained_modes(catalog, trunc);
        let mut u = Vec::with_capacity(retained.len());
        for m in &retained {
            u.push(z.gamma_map(m)?);
        }
        Ok(ModeBasis { retained, u })
    }
}

/// Shape magnetic field `H^k` as a complex edge field.
pub fn shape_magnetic_field(
    basis: &ModeBasis,
    fp: &FrequencyPoint,
    axis: usize,
) -> Result<EdgeField<Complex64>> {
    check_singularity(fp, &basis.retained)?;
    let grid = basis
        .u
        .first()
        .map(|u| u.grid())
        .ok_or_else(|| Error::pre("mode basis is empty"))?;
    let coeffs = magnetic_coefficients(&basis.retained, fp, axis);
    let mut h = EdgeField::<Complex64>::zeros(grid);
    for v in &mut h.comp[axis] {
        *v = Complex64::new(1.0, 0.0);
    }
    for (c, u) in coeffs.iter().zip(&basis.u) {
        for a in 0..3 {
            for (slot, val) in h.comp[a].iter_mut().zip(&u.comp[a]) {
                *slot += c * val;
            }
        }
    }
    Ok(h)
}

/// Displacement current `J^k = (1/2) Σ_n eps_r k0²/(1 - alpha_n eps_r k0²)
/// m_n[k] f_n`, supported on interior faces.
pub fn displacement_current(
    catalog: &ModeCatalog,
    fp: &FrequencyPoint,
    trunc: &TruncationRule,
    axis: usize,
) -> Result<FaceField<Complex64>> {
    if catalog.modes.is_empty() {
        return Err(Error::pre("mode catalog is empty"));
    }
    let retained = retained_modes(catalog, trunc);
    check_singularity(fp, &retained)?;
    let grid = catalog.modes[0].field.grid();
    let k2 = fp.k0 * fp.k0;
    let mut j = FaceField::<Complex64>::zeros(grid);
    for m in &retained {
        let coeff =
            fp.eps_r * k2 / (Complex64::new(1.0, 0.0) - fp.eps_r * m.alpha * k2) * (0.5 * m.strength[axis]);
        for a in 0..3 {
            for (slot, val) in j.comp[a].iter_mut().zip(&m.field.comp[a]) {
                *slot += coeff * val;
            }
        }
    }
    Ok(j)
}

/// Moment route to the tensor: `mu[k][l] = delta_kl + (1/2) <y ∧ J^k, e_l>`,
/// with the moment taken mode-wise through the catalog strengths.
pub fn mu_eff_from_current_moment(
    catalog: &ModeCatalog,
    fp: &FrequencyPoint,
    trunc: &TruncationRule,
) -> Result<PermeabilityTensor> {
    if catalog.modes.is_empty() {
        return Err(Error::pre("mode catalog is empty"));
    }
    let retained = retained_modes(catalog, trunc);
    check_singularity(fp, &retained)?;
    let k2 = fp.k0 * fp.k0;
    let mut mu = [[Complex64::new(0.0, 0.0); 3]; 3];
    for k in 0..3 {
        mu[k][k] = Complex64::new(1.0, 0.0);
    }
    for m in &retained {
        // J^k carries (1/2) coeff m[k] f_n; its moment adds (1/2) m[l].
        let coeff = fp.eps_r * k2 / (Complex64::new(1.0, 0.0) - fp.eps_r * m.alpha * k2);
        for k in 0..3 {
            for l in 0..3 {
                mu[k][l] += coeff * (0.25 * m.strength[k] * m.strength[l]);
            }
        }
    }
    Ok(PermeabilityTensor {
        mu,
        n_used: retained.len(),
        truncation_residual: truncation_residual(catalog, &retained),
    })
}

/// Resonant multiplet annotation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResonanceInfo {
    /// Eigenvalue `lambda = 1/alpha` shared by the multiplet (mean).
    pub lambda: f64,
    /// Resonance wavelength `2π sqrt(Re(eps_r) * alpha)`.
    pub lambda_over_d: f64,
    /// 1-based catalog indices of the member modes.
    pub members: Vec<usize>,
    /// Strength matrix `Σ avg_u ⊗ avg_u` over the multiplet.
    pub strength_matrix: [[f64; 3]; 3],
    /// Numerical rank of the strength matrix.
    pub rank: usize,
    /// Kernel directions (propagative directions) when rank < 3.
    pub kernel: Vec<[f64; 3]>,
    pub contributes: bool,
    /// Spectral norm of the strength matrix.
    pub strength_norm: f64,
}

/// Group a catalog into degenerate multiplets (relative gap below
/// [`tolerances::MULTIPLET_GAP_REL`]), preserving descending order.
pub fn multiplets<'c>(modes: &[&'c EigenMode]) -> Vec<Vec<&'c EigenMode>> {
    let mut groups: Vec<Vec<&EigenMode>> = Vec::new();
    for m in modes {
        match groups.last_mut() {
            Some(g) => {
                let head = g.last().unwrap().alpha;
                if (head - m.alpha).abs() <= tolerances::MULTIPLET_GAP_REL * head.abs() {
                    g.push(m);
                } else {
                    groups.push(vec![m]);
                }
            }
            None => groups.push(vec![m]),
        }
    }
    groups
}

/// Resonances of a catalog for a given dielectric contrast, sorted by
/// resonance wavelength descending.
pub fn resonance_list(
    catalog: &ModeCatalog,
    eps_r_re: f64,
    strength_tol: f64,
) -> Vec<ResonanceInfo> {
    let all: Vec<&EigenMode> = catalog.modes.iter().collect();
    let groups = multiplets(&all);
    let mut infos: Vec<ResonanceInfo> = groups
        .iter()
        .map(|g| {
            let mut m_mat = [[0.0; 3]; 3];
            for mode in g {
                for k in 0..3 {
                    for l in 0..3 {
                        m_mat[k][l] += mode.avg_u[k] * mode.avg_u[l];
                    }
                }
            }
            let ev = sym_eigenvalues(m_mat);
            let norm = ev[2].abs().max(ev[0].abs());
            let rank_tol = tolerances::STRENGTH_RANK_REL * ev[2].abs().max(f64::MIN_POSITIVE);
            let rank = ev.iter().filter(|v| **v > rank_tol).count();
            let kernel = if rank < 3 {
                kernel_directions(m_mat, rank_tol)
            } else {
                Vec::new()
            };
            let alpha_mean = g.iter().map(|m| m.alpha).sum::<f64>() / g.len() as f64;
            ResonanceInfo {
                lambda: 1.0 / alpha_mean,
                lambda_over_d: 2.0 * std::f64::consts::PI * (eps_r_re * alpha_mean).sqrt(),
                members: g.iter().map(|m| m.index).collect(),
                strength_matrix: m_mat,
                rank,
                kernel,
                contributes: false,
                strength_norm: norm,
            }
        })
        .collect();
    let max_norm = infos.iter().map(|i| i.strength_norm).fold(0.0, f64::max);
    for info in &mut infos {
        info.contributes = info.strength_norm > strength_tol * max_norm;
    }
    infos.sort_by(|a, b| b.lambda_over_d.partial_cmp(&a.lambda_over_d).unwrap());
    infos
}

fn kernel_directions(m: [[f64; 3]; 3], tol: f64) -> Vec<[f64; 3]> {
    let mat = Matrix3::from_fn(|r, c| m[r][c]);
    let eig = mat.symmetric_eigen();
    let mut out = Vec::new();
    for i in 0..3 {
        if eig.eigenvalues[i] <= tol {
            let col = eig.eigenvectors.column(i);
            out.push([col[0], col[1], col[2]]);
        }
    }
    out
}

/// One tabulated sweep row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda_over_d: f64,
    /// `None` when the evaluation hit a lossless resonance singularity.
    pub mu: Option<PermeabilityTensor>,
    pub re_eigenvalues: [f64; 3],
    pub flagged: bool,
}

/// Maximal interval on which every eigenvalue of `Re(mu)` is negative.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GapInterval {
    pub lambda_lo: f64,
    pub lambda_hi: f64,
}

/// Sweep result: rows ascending in wavelength, full band gaps, resonance
/// annotations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub gaps: Vec<GapInterval>,
    pub resonances: Vec<ResonanceInfo>,
}

/// Tabulate the tensor over a uniform wavelength grid and detect full band
/// gaps. Lossless singular rows are flagged rather than fatal.
pub fn sweep(
    catalog: &ModeCatalog,
    lambda_min: f64,
    lambda_max: f64,
    steps: usize,
    eps_r: Complex64,
    trunc: &TruncationRule,
) -> Result<SweepTable> {
    if !(lambda_min > 0.0) || lambda_max <= lambda_min {
        return Err(Error::pre("sweep range must satisfy 0 < lambda_min < lambda_max"));
    }
    if steps < 2 {
        return Err(Error::pre("sweep needs at least 2 steps"));
    }
    let mut rows = Vec::with_capacity(steps);
    for s in 0..steps {
        let lambda =
            lambda_min + (lambda_max - lambda_min) * s as f64 / (steps - 1) as f64;
        let fp = FrequencyPoint::new(lambda, eps_r)?;
        match mu_eff(catalog, &fp, trunc) {
            Ok(mu) => {
                let ev = mu.re_eigenvalues();
                rows.push(SweepRow {
                    lambda_over_d: lambda,
                    mu: Some(mu),
                    re_eigenvalues: ev,
                    flagged: false,
                });
            }
            Err(Error::ResonanceSingularity { .. }) => rows.push(SweepRow {
                lambda_over_d: lambda,
                mu: None,
                re_eigenvalues: [f64::NAN; 3],
                flagged: true,
            }),
            Err(e) => return Err(e),
        }
    }

    let max_eig = |lambda: f64| -> Option<f64> {
        let fp = FrequencyPoint::new(lambda, eps_r).ok()?;
        mu_eff(catalog, &fp, trunc).ok().map(|m| m.re_eigenvalues()[2])
    };

    // A row is inside a full gap when even the largest eigenvalue is
    // negative; refine interval endpoints by bisection between rows.
    let mut gaps = Vec::new();
    let in_gap = |row: &SweepRow| !row.flagged && row.re_eigenvalues[2] < 0.0;
    let mut s = 0;
    while s < rows.len() {
        if !in_gap(&rows[s]) {
            s += 1;
            continue;
        }
        let mut e = s;
        while e + 1 < rows.len() && in_gap(&rows[e + 1]) {
            e += 1;
        }
        let mut lo = rows[s].lambda_over_d;
        if s > 0 && !rows[s - 1].flagged {
            lo = bisect_sign_change(rows[s - 1].lambda_over_d, rows[s].lambda_over_d, &max_eig);
        }
        let mut hi = rows[e].lambda_over_d;
        if e + 1 < rows.len() && !rows[e + 1].flagged {
            hi = bisect_sign_change(rows[e + 1].lambda_over_d, rows[e].lambda_over_d, &max_eig);
        }
        gaps.push(GapInterval {
            lambda_lo: lo,
            lambda_hi: hi,
        });
        s = e + 1;
    }

    let resonances = resonance_list(catalog, eps_r.re, trunc.strength_tol);
    Ok(SweepTable {
        rows,
        gaps,
        resonances,
    })
}

/// Bisection for the boundary of the negative region; `outside` has
/// `max_eig >= 0`, `inside` has `max_eig < 0`.
fn bisect_sign_change(outside: f64, inside: f64, max_eig: &dyn Fn(f64) -> Option<f64>) -> f64 {
    let mut a = outside;
    let mut b = inside;
    for _ in 0..64 {
        if (a - b).abs() <= tolerances::GAP_BISECTION {
            break;
        }
        let mid = 0.5 * (a + b);
        match max_eig(mid) {
            Some(v) if v < 0.0 => b = mid,
            Some(_) => a = mid,
            None => break,
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    /// Catalog with hand-set eigendata (fields left empty: series routes
    /// only need alpha, m and avg_u).
    fn synthetic_catalog(data: &[(f64, [f64; 3])]) -> ModeCatalog {
        let grid = GridSpec::new(4).unwrap();
        let modes = data
            .iter()
            .enumerate()
            .map(|(i, (alpha, m))| EigenMode {
                index: i + 1,
                alpha: *alpha,
                lambda: 1.0 / alpha,
                field: FaceField::zeros(grid),
                strength: *m,
                avg_u: [
                    m[0] / (2.0 * alpha.sqrt()),
                    m[1] / (2.0 * alpha.sqrt()),
                    m[2] / (2.0 * alpha.sqrt()),
                ],
                residual: 0.0,
            })
            .collect();
        ModeCatalog {
            resolution: 4,
            geometry_hash: "synthetic".into(),
            modes,
            diagnostics: Default::default(),
        }
    }

    fn max_abs_diff(a: &PermeabilityTensor, b: &PermeabilityTensor) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..3 {
            for l in 0..3 {
                worst = worst.max((a.mu[k][l] - b.mu[k][l]).norm());
            }
        }
        worst
    }

    #[test]
    fn long_wavelength_limit_is_identity() {
        let cat = synthetic_catalog(&[(0.02, [0.3, 0.1, 0.0]), (0.01, [0.0, 0.2, 0.4])]);
        let fp = FrequencyPoint::new(1e9, Complex64::new(100.0, 1.0)).unwrap();
        let mu = mu_eff(&cat, &fp, &TruncationRule::default()).unwrap();
        for k in 0..3 {
            for l in 0..3 {
                let expect = if k == l { 1.0 } else { 0.0 };
                assert!((mu.mu[k][l] - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn series_routes_agree() {
        let cat = synthetic_catalog(&[
            (0.031, [0.21, -0.11, 0.05]),
            (0.017, [-0.04, 0.33, 0.12]),
            (0.009, [0.02, 0.0, -0.27]),
        ]);
        let trunc = TruncationRule::default();
        for (lam, er) in [
            (7.5, Complex64::new(100.0, 1.0)),
            (3.3, Complex64::new(80.0, 0.5)),
            (12.0, Complex64::new(40.0, 2.0)),
        ] {
            let fp = FrequencyPoint::new(lam, er).unwrap();
            let a = mu_eff(&cat, &fp, &trunc).unwrap();
            let b = mu_eff_from_avg_u(&cat, &fp, &trunc).unwrap();
            let c = mu_eff_from_current_moment(&cat, &fp, &trunc).unwrap();
            let scale = a.mu[0][0].norm().max(1.0);
            assert!(max_abs_diff(&a, &b) <= 1e-12 * scale);
            assert!(max_abs_diff(&a, &c) <= 1e-12 * scale);
        }
    }

    #[test]
    fn dark_modes_do_not_change_the_sum() {
        let bright = [(0.03, [0.3, 0.0, 0.1]), (0.01, [0.05, 0.2, 0.0])];
        let with_dark = [
            (0.03, [0.3, 0.0, 0.1]),
            (0.02, [0.0, 0.0, 0.0]),
            (0.01, [0.05, 0.2, 0.0]),
            (0.005, [0.0, 0.0, 0.0]),
        ];
        let fp = FrequencyPoint::new(5.0, Complex64::new(100.0, 1.0)).unwrap();
        let trunc = TruncationRule::default();
        let a = mu_eff(&synthetic_catalog(&bright), &fp, &trunc).unwrap();
        let b = mu_eff(&synthetic_catalog(&with_dark), &fp, &trunc).unwrap();
        for k in 0..3 {
            for l in 0..3 {
                assert_eq!(a.mu[k][l].re.to_bits(), b.mu[k][l].re.to_bits());
                assert_eq!(a.mu[k][l].im.to_bits(), b.mu[k][l].im.to_bits());
            }
        }
    }

    #[test]
    fn lossless_resonance_is_flagged_in_sweep() {
        let alpha = 0.02;
        let cat = synthetic_catalog(&[(alpha, [0.3, 0.3, 0.3])]);
        let eps = Complex64::new(100.0, 0.0);
        // Resonance at lambda/d = 2 pi sqrt(eps alpha).
        let lam_res = 2.0 * std::f64::consts::PI * (100.0 * alpha).sqrt();
        let fp = FrequencyPoint::new(lam_res, eps).unwrap();
        assert!(matches!(
            mu_eff(&cat, &fp, &TruncationRule::default()),
            Err(Error::ResonanceSingularity { .. })
        ));
        // A sweep centered there flags the singular row and keeps neighbors.
        let table = sweep(
            &cat,
            lam_res - 0.01,
            lam_res + 0.01,
            3,
            eps,
            &TruncationRule::default(),
        )
        .unwrap();
        assert!(table.rows[1].flagged);
        assert!(!table.rows[0].flagged && !table.rows[2].flagged);
    }

    #[test]
    fn dissipative_tensor_has_positive_definite_imaginary_part() {
        let cat = synthetic_catalog(&[
            (0.03, [0.3, 0.0, 0.0]),
            (0.03, [0.0, 0.3, 0.0]),
            (0.03, [0.0, 0.0, 0.3]),
        ]);
        let trunc = TruncationRule::default();
        for lam in [3.0, 5.0, 8.0, 20.0] {
            let fp = FrequencyPoint::new(lam, Complex64::new(100.0, 1.0)).unwrap();
            let mu = mu_eff(&cat, &fp, &trunc).unwrap();
            let ev = mu.im_eigenvalues();
            assert!(ev[0] > 0.0, "min Im eigenvalue {:e} at lambda {lam}", ev[0]);
        }
    }

    #[test]
    fn gap_detection_brackets_the_negative_window() {
        // Single strong isotropic resonance: Re(mu) dips below zero just
        // under the resonance wavelength.
        let alpha = 0.0144; // lambda/d resonance near 7.54 for eps = 100
        let cat = synthetic_catalog(&[
            (alpha, [0.4, 0.0, 0.0]),
            (alpha, [0.0, 0.4, 0.0]),
            (alpha, [0.0, 0.0, 0.4]),
        ]);
        let table = sweep(
            &cat,
            6.0,
            9.0,
            301,
            Complex64::new(100.0, 1.0),
            &TruncationRule::default(),
        )
        .unwrap();
        assert_eq!(table.gaps.len(), 1, "gaps: {:?}", table.gaps);
        let gap = table.gaps[0];
        let lam_res = 2.0 * std::f64::consts::PI * (100.0 * alpha).sqrt();
        assert!(gap.lambda_lo < lam_res && lam_res < gap.lambda_hi + 0.5);
        // Rows inside the reported gap indeed have all eigenvalues negative.
        for row in &table.rows {
            if row.lambda_over_d > gap.lambda_lo + 1e-9
                && row.lambda_over_d < gap.lambda_hi - 1e-9
            {
                assert!(row.re_eigenvalues[2] < 0.0);
            }
        }
    }

    #[test]
    fn resonance_list_marks_dark_multiplets() {
        let cat = synthetic_catalog(&[
            (0.0300, [0.3, 0.0, 0.0]),
            (0.0300, [0.0, 0.3, 0.0]),
            (0.0300, [0.0, 0.0, 0.3]),
            (0.0200, [0.0, 0.0, 0.0]),
            (0.0100, [0.2, 0.0, 0.0]),
        ]);
        let infos = resonance_list(&cat, 100.0, 1e-6);
        assert_eq!(infos.len(), 3);
        // Sorted by resonance wavelength descending.
        assert!(infos[0].lambda_over_d > infos[1].lambda_over_d);
        let full = &infos[0];
        assert_eq!(full.members, vec![1, 2, 3]);
        assert_eq!(full.rank, 3);
        assert!(full.contributes);
        let dark = infos.iter().find(|i| i.members == vec![4]).unwrap();
        assert!(!dark.contributes);
        assert_eq!(dark.rank, 0);
        let partial = infos.iter().find(|i| i.members == vec![5]).unwrap();
        assert_eq!(partial.rank, 1);
        assert_eq!(partial.kernel.len(), 2);
        assert!(partial.contributes);
    }

    #[test]
    fn truncation_metadata_reports_dropped_mass() {
        let cat = synthetic_catalog(&[
            (0.03, [1.0, 0.0, 0.0]),
            (0.02, [1e-6, 0.0, 0.0]),
        ]);
        let trunc = TruncationRule {
            n_max: 40,
            strength_tol: 1e-6,
        };
        let fp = FrequencyPoint::new(5.0, Complex64::new(100.0, 1.0)).unwrap();
        let mu = mu_eff(&cat, &fp, &trunc).unwrap();
        assert_eq!(mu.n_used, 1);
        assert!(mu.truncation_residual > 0.0 && mu.truncation_residual < 1e-11);
    }

    #[test]
    fn rejects_negative_im_eps() {
        assert!(FrequencyPoint::new(5.0, Complex64::new(100.0, -1.0)).is_err());
        assert!(FrequencyPoint::new(-1.0, Complex64::new(100.0, 1.0)).is_err());
    }
}
