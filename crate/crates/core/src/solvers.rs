//! Matrix-free conjugate gradients shared by the potential and projector
//! solves.

/// Outcome of a CG run.
#[derive(Debug, Clone, Copy)]
pub struct CgStats {
    pub iterations: usize,
    /// Final residual relative to the right-hand side norm.
    pub relative_residual: f64,
}

/// Plain CG on an SPD operator. `apply` writes `A x` into its second
/// argument. When `zero_mean` is set the iterates and residuals are kept
/// orthogonal to constants (for operators whose nullspace is the constants).
/// Stops when the relative residual drops below `tol_rel`, stagnates, or
/// `max_iter` is reached; returns the best achieved state.
pub fn conjugate_gradient(
    apply: &mut dyn FnMut(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    tol_rel: f64,
    max_iter: usize,
    zero_mean: bool,
) -> CgStats {
    let dim = b.len();
    assert_eq!(x.len(), dim);
    let norm = |v: &[f64]| v.iter().map(|t| t * t).sum::<f64>().sqrt();
    let dot = |a: &[f64], c: &[f64]| a.iter().zip(c).map(|(s, t)| s * t).sum::<f64>();
    let remove_mean = |v: &mut [f64]| {
        let m: f64 = v.iter().sum::<f64>() / v.len() as f64;
        for t in v.iter_mut() {
            *t -= m;
        }
    };

    let mut bp = b.to_vec();
    if zero_mean {
        remove_mean(&mut bp);
    }
    let b_norm = norm(&bp);
    if b_norm == 0.0 {
        x.fill(0.0);
        return CgStats {
            iterations: 0,
            relative_residual: 0.0,
        };
    }

    let mut r = vec![0.0; dim];
    let mut ax = vec![0.0; dim];
    apply(x, &mut ax);
    for i in 0..dim {
        r[i] = bp[i] - ax[i];
    }
    if zero_mean {
        remove_mean(&mut r);
    }
    let mut p = r.clone();
    let mut rs = dot(&r, &r);
    let mut best = rs.sqrt() / b_norm;
    let mut stagnant = 0usize;

    for it in 0..max_iter {
        let rel = rs.sqrt() / b_norm;
        if rel <= tol_rel {
            return CgStats {
                iterations: it,
                relative_residual: rel,
            };
        }
        if rel < best * 0.999 {
            best = rel;
            stagnant = 0;
        } else {
            stagnant += 1;
            if stagnant > 60 {
                return CgStats {
                    iterations: it,
                    relative_residual: rel,
                };
            }
        }
        apply(&p, &mut ax);
        let pap = dot(&p, &ax);
        if pap <= 0.0 {
            return CgStats {
                iterations: it,
                relative_residual: rel,
            };
        }
        let alpha = rs / pap;
        for i in 0..dim {
            x[i] += alpha * p[i];
            r[i] -= alpha * ax[i];
        }
        if zero_mean {
            remove_mean(&mut r);
        }
        let rs_new = dot(&r, &r);
        let beta = rs_new / rs;
        rs = rs_new;
        for i in 0..dim {
            p[i] = r[i] + beta * p[i];
        }
    }
    CgStats {
        iterations: max_iter,
        relative_residual: rs.sqrt() / b_norm,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_spd_system() {
        // Tridiagonal SPD system.
        let n = 50;
        let mut apply = |x: &[f64], out: &mut [f64]| {
            for i in 0..n {
                let mut v = 2.5 * x[i];
                if i > 0 {
                    v -= x[i - 1];
                }
                if i + 1 < n {
                    v -= x[i + 1];
                }
                out[i] = v;
            }
        };
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut x = vec![0.0; n];
        let stats = conjugate_gradient(&mut apply, &b, &mut x, 1e-12, 1000, false);
        assert!(stats.relative_residual < 1e-12);
        let mut ax = vec![0.0; n];
        apply(&x, &mut ax);
        let err: f64 = ax.iter().zip(&b).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
        assert!(err < 1e-10);
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let mut apply = |x: &[f64], out: &mut [f64]| out.copy_from_slice(x);
        let b = vec![0.0; 8];
        let mut x = vec![1.0; 8];
        let stats = conjugate_gradient(&mut apply, &b, &mut x, 1e-12, 10, false);
        assert_eq!(stats.iterations, 0);
        assert!(x.iter().all(|v| *v == 0.0));
    }
}
