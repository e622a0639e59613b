//! Riemannian metrics on a single chart: Christoffel symbols and curvature.

use nalgebra::{DMatrix, DVector};

use super::expr::ScalarField;
use crate::error::{Error, Result};
use crate::tensor::{sym_index, sym_len, Tensor4};

/// Symmetric metric tensor `g_ab` given by expressions on one chart.
///
/// First and second partial derivatives of every component are prepared
/// symbolically at construction time.
#[derive(Debug, Clone)]
pub struct MetricField {
    dim: usize,
    comps: Vec<ScalarField>,
    d1: Vec<Vec<ScalarField>>,
    d2: Vec<Vec<ScalarField>>,
    domain: Option<Vec<(f64, f64)>>,
}

/// Metric value and first derivatives at a point.
#[derive(Debug, Clone)]
pub struct MetricJet {
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    /// `dg[c][(a, b)] = ∂_c g_ab`.
    pub dg: Vec<DMatrix<f64>>,
}

impl MetricField {
    /// `comps` lists `g_ab` for `a <= b` in row-major upper-triangular order.
    pub fn new(dim: usize, comps: Vec<ScalarField>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("metric dimension must be positive".into()));
        }
        if comps.len() != sym_len(dim) {
            return Err(Error::Dimension(format!(
                "metric of dimension {dim} needs {} components, got {}",
                sym_len(dim),
                comps.len()
            )));
        }
        if let Some(f) = comps.iter().find(|f| f.dim() != dim) {
            return Err(Error::Dimension(format!(
                "metric component over {} variables in a {dim}-dimensional chart",
                f.dim()
            )));
        }
        let d1: Vec<Vec<ScalarField>> = comps
            .iter()
            .map(|f| (0..dim).map(|c| f.derivative(c)).collect())
            .collect();
        let d2 = d1
            .iter()
            .map(|row| {
                let mut out = Vec::with_capacity(sym_len(dim));
                for c in 0..dim {
                    for d in c..dim {
                        out.push(row[c].derivative(d));
                    }
                }
                out
            })
            .collect();
        Ok(MetricField {
            dim,
            comps,
            d1,
            d2,
            domain: None,
        })
    }

    /// Builds from `f(a, b)` evaluated for `a <= b`.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> ScalarField) -> Result<Self> {
        let mut comps = Vec::with_capacity(sym_len(dim));
        for a in 0..dim {
            for b in a..dim {
                comps.push(f(a, b));
            }
        }
        MetricField::new(dim, comps)
    }

    pub fn euclidean(dim: usize) -> Self {
        MetricField::from_fn(dim, |a, b| ScalarField::constant(if a == b { 1.0 } else { 0.0 }, dim))
            .expect("euclidean metric is well formed")
    }

    /// Parses `g_ab` from text, indexed as `entries[a][b]` (only `a <= b` is read).
    pub fn parse(dim: usize, mut entry: impl FnMut(usize, usize) -> String) -> Result<Self> {
        let mut comps = Vec::with_capacity(sym_len(dim));
        for a in 0..dim {
            for b in a..dim {
                comps.push(ScalarField::parse(&entry(a, b), dim)?);
            }
        }
        MetricField::new(dim, comps)
    }

    /// Restricts evaluation to the open box `lo < x_i < hi`.
    pub fn with_domain(mut self, domain: Vec<(f64, f64)>) -> Result<Self> {
        if domain.len() != self.dim {
            return Err(Error::Dimension(format!(
                "domain has {} ranges for a {}-dimensional chart",
                domain.len(),
                self.dim
            )));
        }
        self.domain = Some(domain);
        Ok(self)
    }

    pub fn domain(&self) -> Option<&[(f64, f64)]> {
        self.domain.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn component(&self, a: usize, b: usize) -> &ScalarField {
        &self.comps[sym_index(self.dim, a, b)]
    }

    pub fn check_domain(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Dimension(format!(
                "point has {} coordinates, chart has {}",
                x.len(),
                self.dim
            )));
        }
        if let Some(domain) = &self.domain {
            if x.iter().zip(domain).any(|(v, (lo, hi))| !(*v > *lo && *v < *hi)) {
                return Err(Error::OutsideDomain { point: x.to_vec() });
            }
        }
        Ok(())
    }

    fn eval_sym(&self, fields: &[ScalarField], x: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.dim;
        let mut m = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let v = fields[sym_index(n, a, b)].eval(x)?;
                m[(a, b)] = v;
                m[(b, a)] = v;
            }
        }
        Ok(m)
    }

    /// Metric matrix at `x`, checked for positive definiteness.
    pub fn eval(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_domain(x)?;
        let g = self.eval_sym(&self.comps, x)?;
        check_positive_definite(&g, x)?;
        Ok(g)
    }

    /// Metric, inverse and first derivatives at `x`.
    pub fn jet(&self, x: &[f64]) -> Result<MetricJet> {
        let g = self.eval(x)?;
        let g_inv = g
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Singular(format!("metric at {x:?}")))?
            .inverse();
        let n = self.dim;
        let mut dg = vec![DMatrix::zeros(n, n); n];
        for a in 0..n {
            for b in a..n {
                let row = &self.d1[sym_index(n, a, b)];
                for (c, m) in dg.iter_mut().enumerate() {
                    let v = row[c].eval(x)?;
                    m[(a, b)] = v;
                    m[(b, a)] = v;
                }
            }
        }
        Ok(MetricJet { g, g_inv, dg })
    }

    /// Christoffel symbols `Γ^c_ab` of the Levi-Civita connection at `x`.
    pub fn christoffel(&self, x: &[f64]) -> Result<Christoffel> {
        let jet = self.jet(x)?;
        Ok(Christoffel::from_jet(&jet))
    }

    /// Fully lowered Riemann tensor `R_abcd = ⟨R(∂_a, ∂_b)∂_c, ∂_d⟩` with
    /// `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z`. The unit sphere has `K = +1`.
    pub fn riemann(&self, x: &[f64]) -> Result<CurvatureValue> {
        let n = self.dim;
        let jet = self.jet(x)?;
        let gamma = Christoffel::from_jet(&jet);
        let first = first_kind(&jet);
        // ∂_e g_ab for all e, (a, b); needed as second derivatives.
        let mut ddg = vec![0.0; n * n * n * n];
        let idx = |e: usize, f: usize, a: usize, b: usize| ((e * n + f) * n + a) * n + b;
        for a in 0..n {
            for b in a..n {
                let row = &self.d2[sym_index(n, a, b)];
                for e in 0..n {
                    for f in e..n {
                        let v = row[sym_index(n, e, f)].eval(x)?;
                        for (p, q) in [(e, f), (f, e)] {
                            ddg[idx(p, q, a, b)] = v;
                            ddg[idx(p, q, b, a)] = v;
                        }
                    }
                }
            }
        }
        // ∂_e Γ_{l;jk} = ½(∂_e∂_j g_lk + ∂_e∂_k g_lj − ∂_e∂_l g_jk)
        let d_first = |e: usize, l: usize, j: usize, k: usize| {
            0.5 * (ddg[idx(e, j, l, k)] + ddg[idx(e, k, l, j)] - ddg[idx(e, l, j, k)])
        };
        let mut r = Tensor4::zeros([n; 4]);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        // R_ijkl = ∂_iΓ_{l;jk} − ∂_jΓ_{l;ik} − Γ_{m;il}Γ^m_jk + Γ_{m;jl}Γ^m_ik
                        let mut v = d_first(i, l, j, k) - d_first(j, l, i, k);
                        for m in 0..n {
                            v -= first[(m * n + i) * n + l] * gamma.get(m, j, k);
                            v += first[(m * n + j) * n + l] * gamma.get(m, i, k);
                        }
                        r.set(i, j, k, l, v);
                    }
                }
            }
        }
        Ok(CurvatureValue(r))
    }
}

/// Christoffel symbols of the first kind, `Γ_{d;ab}` at `[(d n + a) n + b]`.
fn first_kind(jet: &MetricJet) -> Vec<f64> {
    let n = jet.g.nrows();
    let mut out = vec![0.0; n * n * n];
    for d in 0..n {
        for a in 0..n {
            for b in a..n {
                let v = 0.5 * (jet.dg[a][(d, b)] + jet.dg[b][(d, a)] - jet.dg[d][(a, b)]);
                out[(d * n + a) * n + b] = v;
                out[(d * n + b) * n + a] = v;
            }
        }
    }
    out
}

pub(crate) fn check_positive_definite(g: &DMatrix<f64>, x: &[f64]) -> Result<()> {
    if g.clone().cholesky().is_some() {
        let min = g.clone().symmetric_eigenvalues().min();
        if min > 0.0 {
            return Ok(());
        }
    }
    let min_eigenvalue = g.clone().symmetric_eigenvalues().min();
    Err(Error::NotPositiveDefinite {
        point: x.to_vec(),
        min_eigenvalue,
    })
}

/// Christoffel symbols `Γ^c_ab`, stored exactly symmetric in `a, b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(dim: usize) -> Self {
        Christoffel {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn from_jet(jet: &MetricJet) -> Self {
        let n = jet.g.nrows();
        let first = first_kind(jet);
        let mut out = Christoffel::zeros(n);
        for c in 0..n {
            for a in 0..n {
                for b in a..n {
                    let v: f64 = (0..n)
                        .map(|d| jet.g_inv[(c, d)] * first[(d * n + a) * n + b])
                        .sum();
                    out.data[(c * n + a) * n + b] = v;
                    out.data[(c * n + b) * n + a] = v;
                }
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, c: usize, a: usize, b: usize) -> f64 {
        self.data[(c * self.dim + a) * self.dim + b]
    }

    /// `Γ^c_ab u^a w^b`.
    pub fn contract(&self, u: &[f64], w: &[f64]) -> DVector<f64> {
        let n = self.dim;
        DVector::from_fn(n, |c, _| {
            let mut acc = 0.0;
            for a in 0..n {
                if u[a] == 0.0 {
                    continue;
                }
                for b in 0..n {
                    acc += self.get(c, a, b) * u[a] * w[b];
                }
            }
            acc
        })
    }

    /// The matrix `M[c][b] = Γ^c_ab u^a`, so that transport reads `v' = −M v`.
    pub fn along(&self, u: &[f64]) -> DMatrix<f64> {
        let n = self.dim;
        DMatrix::from_fn(n, n, |c, b| (0..n).map(|a| self.get(c, a, b) * u[a]).sum())
    }
}

/// Curvature components at a point as a dense 4-index array.
///
/// For Riemann tensors the slots are `(a, b, c, d)` with dimension `n` each;
/// for bundle curvature they are `(α, β, a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureValue(pub Tensor4);

/// Largest violations of the algebraic curvature identities, relative to the
/// sup-norm of the array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryReport {
    pub antisym_first: f64,
    pub antisym_last: f64,
    pub pair_swap: f64,
    pub bianchi: f64,
}

impl SymmetryReport {
    pub fn max(&self) -> f64 {
        self.antisym_first
            .max(self.antisym_last)
            .max(self.pair_swap)
            .max(self.bianchi)
    }
}

impl CurvatureValue {
    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.0.get(a, b, c, d)
    }

    pub fn dims(&self) -> [usize; 4] {
        self.0.dims()
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.sup_norm()
    }

    pub fn tensor(&self) -> &Tensor4 {
        &self.0
    }

    /// Antisymmetry in both pairs always; pair exchange and the first Bianchi
    /// identity only when all four slots share a dimension.
    pub fn symmetry_report(&self) -> SymmetryReport {
        let [d0, d1, d2, d3] = self.dims();
        let scale = self.sup_norm().max(f64::MIN_POSITIVE);
        let mut rep = SymmetryReport {
            antisym_first: 0.0,
            antisym_last: 0.0,
            pair_swap: 0.0,
            bianchi: 0.0,
        };
        let full = d0 == d1 && d1 == d2 && d2 == d3;
        for a in 0..d0 {
            for b in 0..d1 {
                for c in 0..d2 {
                    for d in 0..d3 {
                        let v = self.get(a, b, c, d);
                        if d0 == d1 {
                            rep.antisym_first = rep.antisym_first.max((v + self.get(b, a, c, d)).abs());
                        }
                        if d2 == d3 {
                            rep.antisym_last = rep.antisym_last.max((v + self.get(a, b, d, c)).abs());
                        }
                        if full {
                            rep.pair_swap = rep.pair_swap.max((v - self.get(c, d, a, b)).abs());
                            let cyc = v + self.get(b, c, a, d) + self.get(c, a, b, d);
                            rep.bianchi = rep.bianchi.max(cyc.abs());
                        }
                    }
                }
            }
        }
        rep.antisym_first /= scale;
        rep.antisym_last /= scale;
        rep.pair_swap /= scale;
        rep.bianchi /= scale;
        rep
    }

    /// Components on the columns of four frames.
    pub fn on_frames(&self, f: [&DMatrix<f64>; 4]) -> CurvatureValue {
        CurvatureValue(self.0.on_frames(f))
    }
}

/// Wrapper marking a metric as the ambient space `(M̃, g̃)` of dimension `n + s`.
#[derive(Debug, Clone)]
pub struct AmbientSpec {
    metric: MetricField,
}

impl AmbientSpec {
    pub fn new(metric: MetricField) -> Self {
        AmbientSpec { metric }
    }

    pub fn euclidean(dim: usize) -> Self {
        AmbientSpec::new(MetricField::euclidean(dim))
    }

    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }
}

impl std::ops::Deref for AmbientSpec {
    type Target = MetricField;
    fn deref(&self) -> &MetricField {
        &self.metric
    }
}
