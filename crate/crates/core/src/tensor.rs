//! Small dense tensors and frame utilities shared by all modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Index of `(a, b)` with `a <= b` in row-major upper-triangular storage.
pub(crate) fn sym_index(n: usize, a: usize, b: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    a * n - a * (a + 1) / 2 + b
}

pub(crate) fn sym_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Components `h^α_{ab}` of a symmetric bilinear map `T ⊙ T → N`, with
/// `dim T = n` and `dim N = s`. Symmetric in `a, b` by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondForm {
    n: usize,
    s: usize,
    data: Vec<f64>,
}

impl SecondForm {
    pub fn zeros(n: usize, s: usize) -> Self {
        SecondForm {
            n,
            s,
            data: vec![0.0; s * n * n],
        }
    }

    /// Builds from `f(alpha, a, b)`, evaluated for `a <= b` only.
    pub fn from_fn(n: usize, s: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut h = SecondForm::zeros(n, s);
        for alpha in 0..s {
            for a in 0..n {
                for b in a..n {
                    h.set(alpha, a, b, f(alpha, a, b));
                }
            }
        }
        h
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> usize {
        self.s
    }

    #[inline]
    pub fn get(&self, alpha: usize, a: usize, b: usize) -> f64 {
        self.data[(alpha * self.n + a) * self.n + b]
    }

    /// Sets both `(a, b)` and `(b, a)`.
    pub fn set(&mut self, alpha: usize, a: usize, b: usize, value: f64) {
        let n = self.n;
        self.data[(alpha * n + a) * n + b] = value;
        self.data[(alpha * n + b) * n + a] = value;
    }

    /// The `n × n` matrix of the `alpha` component.
    pub fn component(&self, alpha: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |a, b| self.get(alpha, a, b))
    }

    /// `h(u, w)` as an `s`-vector.
    pub fn apply(&self, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.s, |alpha, _| {
            let mut acc = 0.0;
            for a in 0..self.n {
                for b in 0..self.n {
                    acc += self.get(alpha, a, b) * u[a] * w[b];
                }
            }
            acc
        })
    }

    /// `H[a][alpha] = h^α_{ab} v_b`, the frame-rotation rates driven by `v`.
    pub fn contract_velocity(&self, v: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.s, |a, alpha| {
            (0..self.n).map(|b| self.get(alpha, a, b) * v[b]).sum()
        })
    }

    pub fn scale(&self, c: f64) -> SecondForm {
        SecondForm {
            n: self.n,
            s: self.s,
            data: self.data.iter().map(|x| x * c).collect(),
        }
    }

    pub fn axpy(&mut self, c: f64, other: &SecondForm) {
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += c * y;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Re-expresses the form in new bases: tangent arguments through the
    /// columns of `tangent`, and values through `normal_coeffs` (row `β`
    /// gives the new `β` component as a combination of the old ones).
    pub fn transform(&self, tangent: &DMatrix<f64>, normal_coeffs: &DMatrix<f64>) -> SecondForm {
        let n2 = tangent.ncols();
        let s2 = normal_coeffs.nrows();
        let mut pulled = vec![DMatrix::<f64>::zeros(n2, n2); self.s];
        for (alpha, p) in pulled.iter_mut().enumerate() {
            *p = tangent.transpose() * self.component(alpha) * tangent;
        }
        SecondForm::from_fn(n2, s2, |beta, a, b| {
            (0..self.s).map(|alpha| normal_coeffs[(beta, alpha)] * pulled[alpha][(a, b)]).sum()
        })
    }
}

/// Dense rank-4 array with independent slot dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    dims: [usize; 4],
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(dims: [usize; 4]) -> Self {
        Tensor4 {
            dims,
            data: vec![0.0; dims.iter().product()],
        }
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        let [_, d1, d2, d3] = self.dims;
        ((i * d1 + j) * d2 + k) * d3 + l
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[self.offset(i, j, k, l)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        let o = self.offset(i, j, k, l);
        self.data[o] = v;
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    /// Evaluates the multilinear form on the columns of four matrices:
    /// `out[A,B,C,D] = T(F1_A, F2_B, F3_C, F4_D)`.
    pub fn on_frames(&self, f: [&DMatrix<f64>; 4]) -> Tensor4 {
        for (slot, m) in f.iter().enumerate() {
            assert_eq!(m.nrows(), self.dims[slot], "frame rows must match slot {slot}");
        }
        // Contract one slot at a time; each pass keeps the remaining order.
        let mut cur = self.clone();
        for slot in 0..4 {
            let m = f[slot];
            let mut dims = cur.dims;
            dims[slot] = m.ncols();
            let mut next = Tensor4::zeros(dims);
            for i in 0..dims[0] {
                for j in 0..dims[1] {
                    for k in 0..dims[2] {
                        for l in 0..dims[3] {
                            let idx = [i, j, k, l];
                            let mut acc = 0.0;
                            for r in 0..cur.dims[slot] {
                                let mut src = idx;
                                src[slot] = r;
                                let c = m[(r, idx[slot])];
                                if c != 0.0 {
                                    acc += c * cur.get(src[0], src[1], src[2], src[3]);
                                }
                            }
                            next.set(i, j, k, l, acc);
                        }
                    }
                }
            }
            cur = next;
        }
        cur
    }
}

/// Modified Gram–Schmidt on the columns of `basis` with respect to the inner
/// product `gram`. Column `k` of the result spans the same flag as the input.
pub fn orthonormalize(basis: &DMatrix<f64>, gram: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = basis.clone();
    for k in 0..out.ncols() {
        let mut v = out.column(k).into_owned();
        for j in 0..k {
            let e = out.column(j).into_owned();
            let c = (e.transpose() * gram * &v)[(0, 0)];
            v -= e * c;
        }
        let norm2 = (v.transpose() * gram * &v)[(0, 0)];
        if !(norm2 > 1e-24) {
            return Err(Error::Degenerate(format!(
                "vector {k} is linearly dependent on its predecessors"
            )));
        }
        out.set_column(k, &(v / norm2.sqrt()));
    }
    Ok(out)
}

/// `max |Fᵀ G F − I|` over all entries.
pub fn gram_deviation(frame: &DMatrix<f64>, gram: &DMatrix<f64>) -> f64 {
    let m = frame.transpose() * gram * frame;
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((m[(i, j)] - target).abs());
        }
    }
    worst
}

/// Block-diagonal matrix `diag(a, b)`.
pub fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    m
}

/// Solves `m x = rhs`, reporting singular systems as errors.
pub fn solve(m: &DMatrix<f64>, rhs: &DVector<f64>, what: &str) -> Result<DVector<f64>> {
    m.clone()
        .lu()
        .solve(rhs)
        .ok_or_else(|| Error::Singular(what.to_string()))
}

pub fn inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular(what.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sym_index_is_dense() {
        let n = 4;
        let mut seen = vec![false; sym_len(n)];
        for a in 0..n {
            for b in a..n {
                let i = sym_index(n, a, b);
                assert!(!seen[i]);
                seen[i] = true;
                assert_eq!(i, sym_index(n, b, a));
            }
        }
        assert!(seen.into_iter().all(|x| x));
    }

    #[test]
    fn gram_schmidt_under_metric() {
        let g = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let e = orthonormalize(&DMatrix::identity(2, 2), &g).unwrap();
        assert!(gram_deviation(&e, &g) < 1e-14);
        assert_eq!(e[(1, 0)], 0.0);
        assert!(orthonormalize(&DMatrix::from_element(2, 2, 1.0), &g).is_err());
    }

    #[test]
    fn on_frames_matches_direct_sum() {
        let mut t = Tensor4::zeros([2, 2, 2, 2]);
        for (k, v) in [(0, 1.0), (5, -2.0), (9, 0.5), (15, 3.0)] {
            t.data[k] = v;
        }
        let f = DMatrix::from_row_slice(2, 2, &[0.3, -1.0, 2.0, 0.7]);
        let out = t.on_frames([&f, &f, &f, &f]);
        let (a, b, c, d) = (1, 0, 1, 1);
        let mut direct = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        direct += t.get(i, j, k, l) * f[(i, a)] * f[(j, b)] * f[(k, c)] * f[(l, d)];
                    }
                }
            }
        }
        assert!((out.get(a, b, c, d) - direct).abs() < 1e-14);
    }

    #[test]
    fn second_form_transform_identity() {
        let h = SecondForm::from_fn(2, 1, |_, a, b| (a + 2 * b) as f64);
        let id = DMatrix::identity(2, 2);
        assert_eq!(h.transform(&id, &DMatrix::identity(1, 1)), h);
    }
}
