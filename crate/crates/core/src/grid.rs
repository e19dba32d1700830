//! Staggered periodic grid on the unit cell `Y = (-1/2, 1/2)^3` and the
//! discrete vector-calculus operators acting on it.
//!
//! The layout is the classical marker-and-cell arrangement on the 3-torus:
//! scalars live on nodes or cell centers, tangential vector components on
//! edge midpoints, normal components on face centers. All index arithmetic
//! wraps modulo the resolution, and the forward-difference `grad`, `curl`,
//! `div` form an exact complex: `curl∘grad = 0` and `div∘curl = 0` hold to
//! machine precision, while the backward-difference adjoints satisfy the
//! summation-by-parts pairings exactly.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar types fields can carry (`f64` for static problems, `Complex64`
/// for frequency-domain fields).
pub trait FieldScalar:
    Copy
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Neg<Output = Self>
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::fmt::Debug
    + 'static
{
    const ZERO: Self;
    fn scale(self, s: f64) -> Self;
    /// `self * conj(other)`; plain product for real scalars.
    fn mul_conj(self, other: Self) -> Self;
    fn abs_sq(self) -> f64;
    fn re(self) -> f64;
}

impl FieldScalar for f64 {
    const ZERO: Self = 0.0;
    #[inline]
    fn scale(self, s: f64) -> Self {
        self * s
    }
    #[inline]
    fn mul_conj(self, other: Self) -> Self {
        self * other
    }
    #[inline]
    fn abs_sq(self) -> f64 {
        self * self
    }
    #[inline]
    fn re(self) -> f64 {
        self
    }
}

impl FieldScalar for Complex64 {
    const ZERO: Self = Complex64::new(0.0, 0.0);
    #[inline]
    fn scale(self, s: f64) -> Self {
        self * s
    }
    #[inline]
    fn mul_conj(self, other: Self) -> Self {
        self * other.conj()
    }
    #[inline]
    fn abs_sq(self) -> f64 {
        self.norm_sqr()
    }
    #[inline]
    fn re(self) -> f64 {
        self.re
    }
}

/// Uniform periodic grid: `n` cells per axis, spacing `h = 1/n`, cell centers
/// at `(i + 1/2) h - 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    n: usize,
}

impl GridSpec {
    pub const MIN_RESOLUTION: usize = 4;

    pub fn new(n: usize) -> Result<Self> {
        if n < Self::MIN_RESOLUTION {
            return Err(Error::pre(format!(
                "grid resolution must be at least {}, got {n}",
                Self::MIN_RESOLUTION
            )));
        }
        Ok(GridSpec { n })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Number of sites on any one of the staggered lattices.
    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    /// Quadrature weight of one site, `h^3`.
    #[inline]
    pub fn weight(&self) -> f64 {
        let h = self.h();
        h * h * h
    }

    /// Flat index with periodic wrap; `i, j, k` may be any `isize`.
    #[inline]
    pub fn idx_wrap(&self, i: isize, j: isize, k: isize) -> usize {
        let n = self.n as isize;
        let i = i.rem_euclid(n) as usize;
        let j = j.rem_euclid(n) as usize;
        let k = k.rem_euclid(n) as usize;
        self.idx(i, j, k)
    }

    /// Flat index for in-range coordinates (x fastest).
    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.n && j < self.n && k < self.n);
        i + self.n * (j + self.n * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let i = idx % self.n;
        let j = (idx / self.n) % self.n;
        let k = idx / (self.n * self.n);
        (i, j, k)
    }

    /// Node coordinate along one axis: `i h - 1/2`.
    #[inline]
    pub fn node_coord(&self, i: usize) -> f64 {
        i as f64 * self.h() - 0.5
    }

    /// Cell-center coordinate along one axis: `(i + 1/2) h - 1/2`.
    #[inline]
    pub fn center_coord(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h() - 0.5
    }

    /// Center of the face with normal `axis` at grid index `(i, j, k)`.
    /// The coordinate along `axis` is node-valued, the other two are
    /// cell-centered.
    pub fn face_center(&self, axis: usize, i: usize, j: usize, k: usize) -> [f64; 3] {
        let mut p = [
            self.center_coord(i),
            self.center_coord(j),
            self.center_coord(k),
        ];
        let ijk = [i, j, k];
        p[axis] = self.node_coord(ijk[axis]);
        p
    }

    /// Midpoint of the edge parallel to `axis` at grid index `(i, j, k)`.
    /// The coordinate along `axis` is cell-centered, the other two are
    /// node-valued.
    pub fn edge_center(&self, axis: usize, i: usize, j: usize, k: usize) -> [f64; 3] {
        let mut p = [
            self.node_coord(i),
            self.node_coord(j),
            self.node_coord(k),
        ];
        let ijk = [i, j, k];
        p[axis] = self.center_coord(ijk[axis]);
        p
    }
}

macro_rules! scalar_field {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        pub struct $name<S = f64> {
            n: usize,
            pub data: Vec<S>,
        }

        impl<S: FieldScalar> $name<S> {
            pub fn zeros(grid: GridSpec) -> Self {
                Self { n: grid.n(), data: vec![S::ZERO; grid.len()] }
            }

            pub fn from_fn(grid: GridSpec, mut f: impl FnMut(usize, usize, usize) -> S) -> Self {
                let n = grid.n();
                let mut data = Vec::with_capacity(grid.len());
                for k in 0..n {
                    for j in 0..n {
                        for i in 0..n {
                            data.push(f(i, j, k));
                        }
                    }
                }
                Self { n, data }
            }

            #[inline]
            pub fn n(&self) -> usize {
                self.n
            }

            #[inline]
            pub fn grid(&self) -> GridSpec {
                GridSpec { n: self.n }
            }

            #[inline]
            pub fn at(&self, i: usize, j: usize, k: usize) -> S {
                self.data[self.grid().idx(i, j, k)]
            }

            /// `h^3`-weighted inner product (second argument conjugated).
            pub fn dot(&self, other: &Self) -> S {
                assert_eq!(self.n, other.n);
                let mut acc = S::ZERO;
                for (a, b) in self.data.iter().zip(&other.data) {
                    acc += a.mul_conj(*b);
                }
                acc.scale(self.grid().weight())
            }

            pub fn norm_sq(&self) -> f64 {
                self.data.iter().map(|v| v.abs_sq()).sum::<f64>() * self.grid().weight()
            }

            pub fn norm(&self) -> f64 {
                self.norm_sq().sqrt()
            }

            /// Mean value over the cell (the `h^3`-weighted sum; |Y| = 1).
            pub fn mean(&self) -> S {
                let mut acc = S::ZERO;
                for v in &self.data {
                    acc += *v;
                }
                acc.scale(self.grid().weight())
            }

            pub fn scaled(&self, s: f64) -> Self {
                Self { n: self.n, data: self.data.iter().map(|v| v.scale(s)).collect() }
            }
        }
    };
}

scalar_field!(
    /// Scalar samples at grid nodes `(i h - 1/2, j h - 1/2, k h - 1/2)`.
    NodalField
);
scalar_field!(
    /// Scalar samples at cell centers; the natural home of discrete
    /// divergences and projector pressures.
    CellField
);

macro_rules! vector_field {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        pub struct $name<S = f64> {
            n: usize,
            pub comp: [Vec<S>; 3],
        }

        impl<S: FieldScalar> $name<S> {
            pub fn zeros(grid: GridSpec) -> Self {
                let z = vec![S::ZERO; grid.len()];
                Self { n: grid.n(), comp: [z.clone(), z.clone(), z] }
            }

            #[inline]
            pub fn n(&self) -> usize {
                self.n
            }

            #[inline]
            pub fn grid(&self) -> GridSpec {
                GridSpec { n: self.n }
            }

            #[inline]
            pub fn at(&self, axis: usize, i: usize, j: usize, k: usize) -> S {
                self.comp[axis][self.grid().idx(i, j, k)]
            }

            /// `h^3`-weighted inner product over all three component lattices
            /// (second argument conjugated).
            pub fn dot(&self, other: &Self) -> S {
                assert_eq!(self.n, other.n);
                let mut acc = S::ZERO;
                for a in 0..3 {
                    for (x, y) in self.comp[a].iter().zip(&other.comp[a]) {
                        acc += x.mul_conj(*y);
                    }
                }
                acc.scale(self.grid().weight())
            }

            pub fn norm_sq(&self) -> f64 {
                let mut acc = 0.0;
                for a in 0..3 {
                    acc += self.comp[a].iter().map(|v| v.abs_sq()).sum::<f64>();
                }
                acc * self.grid().weight()
            }

            pub fn norm(&self) -> f64 {
                self.norm_sq().sqrt()
            }

            /// Componentwise mean over the cell.
            pub fn mean(&self) -> [S; 3] {
                let w = self.grid().weight();
                let mut out = [S::ZERO; 3];
                for a in 0..3 {
                    let mut acc = S::ZERO;
                    for v in &self.comp[a] {
                        acc += *v;
                    }
                    out[a] = acc.scale(w);
                }
                out
            }

            pub fn scale_in_place(&mut self, s: f64) {
                for a in 0..3 {
                    for v in &mut self.comp[a] {
                        *v = v.scale(s);
                    }
                }
            }

            pub fn axpy(&mut self, s: f64, other: &Self) {
                assert_eq!(self.n, other.n);
                for a in 0..3 {
                    for (x, y) in self.comp[a].iter_mut().zip(&other.comp[a]) {
                        *x += y.scale(s);
                    }
                }
            }
        }
    };
}

vector_field!(
    /// Tangential vector components at edge midpoints; hosts potentials,
    /// gradients and the oscillating magnetic correctors.
    EdgeField
);
vector_field!(
    /// Normal vector components at face centers; hosts divergence-free
    /// vorticities and displacement currents.
    FaceField
);

// Cyclic successors: axis, axis+1, axis+2 (mod 3).
#[inline]
pub(crate) fn cyc(axis: usize) -> (usize, usize) {
    ((axis + 1) % 3, (axis + 2) % 3)
}

#[inline]
fn shift(grid: &GridSpec, idx: usize, axis: usize, by: isize) -> usize {
    let (i, j, k) = grid.coords(idx);
    let mut c = [i as isize, j as isize, k as isize];
    c[axis] += by;
    grid.idx_wrap(c[0], c[1], c[2])
}

impl GridSpec {
    /// Forward-difference gradient, nodes to edges.
    pub fn grad<S: FieldScalar>(&self, p: &NodalField<S>) -> EdgeField<S> {
        assert_eq!(p.n(), self.n);
        let inv_h = self.n as f64;
        let mut out = EdgeField::zeros(*self);
        for a in 0..3 {
            for idx in 0..self.len() {
                let up = shift(self, idx, a, 1);
                out.comp[a][idx] = (p.data[up] - p.data[idx]).scale(inv_h);
            }
        }
        out
    }

    /// Adjoint of `grad` in the `h^3` pairings: `⟨grad p, w⟩ = ⟨p, grad_adjoint w⟩`.
    /// Equals minus the backward-difference divergence of the edge field.
    pub fn grad_adjoint<S: FieldScalar>(&self, w: &EdgeField<S>) -> NodalField<S> {
        assert_eq!(w.n(), self.n);
        let inv_h = self.n as f64;
        let mut out = NodalField::zeros(*self);
        for a in 0..3 {
            for idx in 0..self.len() {
                let dn = shift(self, idx, a, -1);
                out.data[idx] += (w.comp[a][dn] - w.comp[a][idx]).scale(inv_h);
            }
        }
        out
    }

    /// Forward-difference curl, edges to faces: the circulation of the edge
    /// field around each face divided by the face area.
    pub fn curl<S: FieldScalar>(&self, w: &EdgeField<S>) -> FaceField<S> {
        assert_eq!(w.n(), self.n);
        let inv_h = self.n as f64;
        let mut out = FaceField::zeros(*self);
        for a in 0..3 {
            let (b, c) = cyc(a);
            for idx in 0..self.len() {
                let up_b = shift(self, idx, b, 1);
                let up_c = shift(self, idx, c, 1);
                // (curl w)_a = D_b^+ w_c - D_c^+ w_b
                out.comp[a][idx] = ((w.comp[c][up_b] - w.comp[c][idx])
                    - (w.comp[b][up_c] - w.comp[b][idx]))
                    .scale(inv_h);
            }
        }
        out
    }

    /// Adjoint of `curl`: the backward-difference curl, faces to edges.
    pub fn curl_adjoint<S: FieldScalar>(&self, f: &FaceField<S>) -> EdgeField<S> {
        assert_eq!(f.n(), self.n);
        let inv_h = self.n as f64;
        let mut out = EdgeField::zeros(*self);
        for a in 0..3 {
            let (b, c) = cyc(a);
            for idx in 0..self.len() {
                let dn_b = shift(self, idx, b, -1);
                let dn_c = shift(self, idx, c, -1);
                // (curl^T f)_a = D_b^- f_c - D_c^- f_b
                out.comp[a][idx] = ((f.comp[c][idx] - f.comp[c][dn_b])
                    - (f.comp[b][idx] - f.comp[b][dn_c]))
                    .scale(inv_h);
            }
        }
        out
    }

    /// Forward-difference divergence, faces to cells: the signed sum of the
    /// face values around each cell divided by `h`.
    pub fn div<S: FieldScalar>(&self, f: &FaceField<S>) -> CellField<S> {
        assert_eq!(f.n(), self.n);
        let inv_h = self.n as f64;
        let mut out = CellField::zeros(*self);
        for a in 0..3 {
            for idx in 0..self.len() {
                let up = shift(self, idx, a, 1);
                out.data[idx] += (f.comp[a][up] - f.comp[a][idx]).scale(inv_h);
            }
        }
        out
    }

    /// Adjoint of `div`: cells to faces, `(div_adjoint q)_a(face) =
    /// (q(cell behind) - q(cell ahead)) / h`.
    pub fn div_adjoint<S: FieldScalar>(&self, q: &CellField<S>) -> FaceField<S> {
        assert_eq!(q.n(), self.n);
        let inv_h = self.n as f64;
        let mut out = FaceField::zeros(*self);
        for a in 0..3 {
            for idx in 0..self.len() {
                let dn = shift(self, idx, a, -1);
                out.comp[a][idx] = (q.data[dn] - q.data[idx]).scale(inv_h);
            }
        }
        out
    }

    /// Seven-point periodic Laplacian of a scalar lattice array (any of the
    /// staggered lattices; the stencil is lattice-shift invariant).
    pub fn laplacian_scalar(&self, u: &[f64], out: &mut [f64]) {
        assert_eq!(u.len(), self.len());
        assert_eq!(out.len(), self.len());
        let inv_h2 = (self.n * self.n) as f64;
        for idx in 0..self.len() {
            let mut acc = -6.0 * u[idx];
            for a in 0..3 {
                acc += u[shift(self, idx, a, 1)] + u[shift(self, idx, a, -1)];
            }
            out[idx] = acc * inv_h2;
        }
    }
}
