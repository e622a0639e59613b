//! Reconstruction problems: base data, ambient space and seeds.

use nalgebra::{DMatrix, DVector};

use crate::charts::{AmbientSpec, BundleSpec, MetricField, ScalarField, SecondFundamentalField};
use crate::error::{Error, Result};
use crate::tensor::{block_diag, inverse, orthonormalize, sym_index, sym_len};
use crate::transport::SplitSeed;

/// Tolerance of the isometry test on `φ`.
pub const PHI_TOL: f64 = 1e-12;
/// Tolerance of the metric test on `ψ̃`.
pub const PSI_TOL: f64 = 1e-10;
/// Tolerance of `ψ*σ̃ = σ + h|_S`.
pub const SIGMA_TOL: f64 = 1e-8;

/// `p`, `p̃` and the linear isometry `φ: T_pM ⊕ V_p → T_p̃M̃` in chart components.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSeed {
    pub p: Vec<f64>,
    pub ptilde: Vec<f64>,
    pub phi: DMatrix<f64>,
}

/// Seed data along embedded submanifolds `S ⊂ M` and `S̃ ⊂ M̃`, both
/// parametrized by `u ∈ R^r` (variables `x1..xr` in the expressions).
#[derive(Debug, Clone)]
pub struct SubmanifoldSeed {
    r: usize,
    ranges: Vec<(f64, f64)>,
    s: Vec<ScalarField>,
    s_d: Vec<Vec<ScalarField>>,
    s_dd: Vec<Vec<ScalarField>>,
    st: Vec<ScalarField>,
    st_d: Vec<Vec<ScalarField>>,
    st_dd: Vec<Vec<ScalarField>>,
    // row-major (n+s) × (n+s); only its action on T⊥S ⊕ V is used
    psi: Vec<ScalarField>,
    sigma: Option<Vec<ScalarField>>,
    sigma_tilde: Option<Vec<ScalarField>>,
}

fn derivs(fields: &[ScalarField], r: usize) -> (Vec<Vec<ScalarField>>, Vec<Vec<ScalarField>>) {
    let d: Vec<Vec<ScalarField>> = fields.iter().map(|f| (0..r).map(|i| f.derivative(i)).collect()).collect();
    let dd = d
        .iter()
        .map(|row| {
            let mut out = Vec::with_capacity(sym_len(r));
            for i in 0..r {
                for j in i..r {
                    out.push(row[i].derivative(j));
                }
            }
            out
        })
        .collect();
    (d, dd)
}

fn eval_all(fields: &[ScalarField], u: &[f64]) -> Result<Vec<f64>> {
    fields.iter().map(|f| f.eval(u)).collect()
}

impl SubmanifoldSeed {
    /// `s` has `n` components, `stilde` has `n + s` components and `psi`
    /// `(n + s)²` row-major entries, all over `r` parameters.
    pub fn new(
        r: usize,
        ranges: Vec<(f64, f64)>,
        s: Vec<ScalarField>,
        stilde: Vec<ScalarField>,
        psi: Vec<ScalarField>,
    ) -> Result<Self> {
        let d = stilde.len();
        if r == 0 || ranges.len() != r || s.is_empty() || s.len() >= d || psi.len() != d * d {
            return Err(Error::Dimension(
                "submanifold seed needs r ranges, n base components, n + s ambient components and a square ψ".into(),
            ));
        }
        if s.iter().chain(&stilde).chain(&psi).any(|f| f.dim() != r) {
            return Err(Error::Dimension(format!("submanifold expressions must use {r} parameters")));
        }
        let (s_d, s_dd) = derivs(&s, r);
        let (st_d, st_dd) = derivs(&stilde, r);
        Ok(SubmanifoldSeed {
            r,
            ranges,
            s,
            s_d,
            s_dd,
            st: stilde,
            st_d,
            st_dd,
            psi,
            sigma: None,
            sigma_tilde: None,
        })
    }

    /// Overrides the derived second fundamental forms; each list holds, for
    /// `i <= j`, the `n` (resp. `n + s`) chart components of `σ(∂_i, ∂_j)`.
    pub fn with_sigma(mut self, sigma: Option<Vec<ScalarField>>, sigma_tilde: Option<Vec<ScalarField>>) -> Result<Self> {
        let (n, d) = (self.s.len(), self.st.len());
        if sigma.as_ref().is_some_and(|v| v.len() != sym_len(self.r) * n)
            || sigma_tilde.as_ref().is_some_and(|v| v.len() != sym_len(self.r) * d)
        {
            return Err(Error::Dimension("σ overrides have the wrong number of components".into()));
        }
        self.sigma = sigma;
        self.sigma_tilde = sigma_tilde;
        Ok(self)
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn ranges(&self) -> &[(f64, f64)] {
        &self.ranges
    }

    pub fn point(&self, u: &[f64]) -> Result<Vec<f64>> {
        eval_all(&self.s, u)
    }

    pub fn ambient_point(&self, u: &[f64]) -> Result<Vec<f64>> {
        eval_all(&self.st, u)
    }

    fn jacobian(d: &[Vec<ScalarField>], u: &[f64], r: usize) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(d.len(), r);
        for (k, row) in d.iter().enumerate() {
            for i in 0..r {
                m[(k, i)] = row[i].eval(u)?;
            }
        }
        Ok(m)
    }

    /// `∂s/∂u` as an `n × r` matrix.
    pub fn tangent(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        Self::jacobian(&self.s_d, u, self.r)
    }

    /// `∂s̃/∂u` as an `(n + s) × r` matrix.
    pub fn ambient_tangent(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        Self::jacobian(&self.st_d, u, self.r)
    }

    pub fn psi(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        let d = self.st.len();
        Ok(DMatrix::from_row_slice(d, d, &eval_all(&self.psi, u)?))
    }

    /// `g`-orthogonal projection of `T_xM` onto `T S`.
    fn tangent_projection(&self, u: &[f64], g: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let ds = self.tangent(u)?;
        let gs = ds.transpose() * g * &ds;
        let gs_inv = inverse(&gs, "induced metric on S")?;
        // coefficients on ∂_i s of the tangential part of a vector
        let coeff = gs_inv * ds.transpose() * g;
        Ok((&ds * &coeff, coeff))
    }

    /// `ψ̃ = φ_* + ψ|_{T⊥S ⊕ V}` at `s(u)` as an `(n + s) × (n + s)` matrix.
    pub fn psi_tilde(&self, u: &[f64], problem: &Problem) -> Result<DMatrix<f64>> {
        let n = problem.n();
        let d = problem.dim();
        let x = self.point(u)?;
        let g = problem.base.eval(&x)?;
        let (proj, coeff) = self.tangent_projection(u, &g)?;
        let dst = self.ambient_tangent(u)?;
        let mut normal_part = DMatrix::<f64>::identity(d, d);
        normal_part.view_mut((0, 0), (n, n)).copy_from(&(DMatrix::identity(n, n) - proj));
        let mut out = self.psi(u)? * normal_part;
        let tang = dst * coeff;
        let mut block = out.view_mut((0, 0), (d, n));
        block += tang;
        Ok(out)
    }

    /// Effective point seed `(s(u), s̃(u), ψ̃(u))` for curves starting at `s(u)`.
    pub fn point_seed(&self, u: &[f64], problem: &Problem) -> Result<PointSeed> {
        Ok(PointSeed {
            p: self.point(u)?,
            ptilde: self.ambient_point(u)?,
            phi: self.psi_tilde(u, problem)?,
        })
    }

    fn second_form(
        &self,
        u: &[f64],
        metric: &MetricField,
        pos: &[ScalarField],
        d: &[Vec<ScalarField>],
        dd: &[Vec<ScalarField>],
        over: &Option<Vec<ScalarField>>,
    ) -> Result<Vec<DVector<f64>>> {
        let r = self.r;
        let m = pos.len();
        if let Some(fields) = over {
            return (0..sym_len(r))
                .map(|k| Ok(DVector::from_vec(eval_all(&fields[k * m..(k + 1) * m], u)?)))
                .collect();
        }
        let x = eval_all(pos, u)?;
        let g = metric.eval(&x)?;
        let gamma = metric.christoffel(&x)?;
        let jac = Self::jacobian(d, u, r)?;
        let gs = jac.transpose() * &g * &jac;
        let proj = &jac * inverse(&gs, "induced metric on S")? * jac.transpose() * &g;
        let normal = DMatrix::<f64>::identity(m, m) - proj;
        let mut out = Vec::with_capacity(sym_len(r));
        for i in 0..r {
            for j in i..r {
                let a: Vec<f64> = jac.column(i).iter().copied().collect();
                let b: Vec<f64> = jac.column(j).iter().copied().collect();
                let mut acc = gamma.contract(&a, &b);
                for k in 0..m {
                    acc[k] += dd[k][sym_index(r, i, j)].eval(u)?;
                }
                out.push(&normal * acc);
            }
        }
        Ok(out)
    }

    /// `σ(∂_i s, ∂_j s)` in chart components, for `i <= j`.
    pub fn sigma(&self, u: &[f64], problem: &Problem) -> Result<Vec<DVector<f64>>> {
        self.second_form(u, &problem.base, &self.s, &self.s_d, &self.s_dd, &self.sigma)
    }

    /// `σ̃(∂_i s̃, ∂_j s̃)` in chart components, for `i <= j`.
    pub fn sigma_tilde(&self, u: &[f64], problem: &Problem) -> Result<Vec<DVector<f64>>> {
        self.second_form(u, &problem.ambient, &self.st, &self.st_d, &self.st_dd, &self.sigma_tilde)
    }

    /// Checks that `ψ̃` is an isometry and `ψ*σ̃ = σ + h|_S` at `u`.
    pub fn check_at(&self, u: &[f64], problem: &Problem) -> Result<()> {
        let n = problem.n();
        let x = self.point(u)?;
        let xt = self.ambient_point(u)?;
        let psi_t = self.psi_tilde(u, problem)?;
        let g = problem.block_metric(&x)?;
        let gt = problem.ambient.eval(&xt)?;
        let defect = (psi_t.transpose() * &gt * &psi_t - &g).amax();
        if !(defect <= PSI_TOL * g.amax().max(1.0)) {
            return Err(Error::Invalid(format!(
                "ψ̃ is not an isometry at u = {u:?} (defect {defect:e})"
            )));
        }
        let sigma = self.sigma(u, problem)?;
        let sigma_t = self.sigma_tilde(u, problem)?;
        let h = problem.h.eval(&x)?;
        let ds = self.tangent(u)?;
        let r = self.r;
        for i in 0..r {
            for j in i..r {
                let k = sym_index(r, i, j);
                let hv = h.apply(&ds.column(i).into_owned(), &ds.column(j).into_owned());
                let mut v = DVector::zeros(problem.dim());
                v.rows_mut(0, n).copy_from(&sigma[k]);
                v.rows_mut(n, problem.s()).copy_from(&hv);
                let defect = (&psi_t * v - &sigma_t[k]).amax();
                if !(defect <= SIGMA_TOL) {
                    return Err(Error::Invalid(format!(
                        "ψ*σ̃ differs from σ + h|_S at u = {u:?} (defect {defect:e})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Parameter grid used for validation and as starting guesses.
    fn sample_params(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new()];
        for &(lo, hi) in &self.ranges {
            let mut next = Vec::new();
            for u in &out {
                for k in 0..per_axis {
                    let mut v = u.clone();
                    v.push(lo + (hi - lo) * (k as f64 + 0.5) / per_axis as f64);
                    next.push(v);
                }
            }
            out = next;
        }
        out
    }

    /// Checks the seed hypotheses at a grid of sample parameters.
    pub fn validate(&self, problem: &Problem) -> Result<()> {
        for u in self.sample_params(5) {
            self.check_at(&u, problem)?;
        }
        Ok(())
    }

    /// Finds `u` with `s(u) = x` by a coarse search and Gauss–Newton.
    pub fn locate(&self, x: &[f64]) -> Result<Vec<f64>> {
        let dist = |u: &[f64]| -> f64 {
            match self.point(u) {
                Ok(p) => p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum(),
                Err(_) => f64::INFINITY,
            }
        };
        let per_axis = if self.r == 1 { 64 } else { 12 };
        let mut u = self
            .sample_params(per_axis)
            .into_iter()
            .min_by(|a, b| dist(a).total_cmp(&dist(b)))
            .ok_or_else(|| Error::Invalid("empty parameter range".into()))?;
        for _ in 0..50 {
            let p = self.point(&u)?;
            let jac = self.tangent(&u)?;
            let res = DVector::from_iterator(p.len(), p.iter().zip(x).map(|(a, b)| a - b));
            let step = (jac.transpose() * &jac)
                .lu()
                .solve(&(jac.transpose() * res))
                .ok_or_else(|| Error::Singular("submanifold parametrization".into()))?;
            for (ui, si) in u.iter_mut().zip(step.iter()) {
                *ui -= si;
            }
            if step.amax() < 1e-15 {
                break;
            }
        }
        let d = dist(&u).sqrt();
        if !(d <= 1e-10) {
            return Err(Error::Invalid(format!(
                "curve start {x:?} is not on the seed submanifold (distance {d:e})"
            )));
        }
        Ok(u)
    }
}

#[derive(Debug, Clone)]
pub enum Seed {
    Point(PointSeed),
    Submanifold(SubmanifoldSeed),
}

/// Prescribed data `(M, g)`, `(V, 𝔥, D)`, `h`, `(M̃, g̃)` and a seed.
#[derive(Debug, Clone)]
pub struct Problem {
    pub base: MetricField,
    pub bundle: BundleSpec,
    pub h: SecondFundamentalField,
    pub ambient: AmbientSpec,
    pub seed: Seed,
}

impl Problem {
    pub fn new(
        base: MetricField,
        bundle: BundleSpec,
        h: SecondFundamentalField,
        ambient: AmbientSpec,
        seed: Seed,
    ) -> Result<Self> {
        let n = base.dim();
        let s = bundle.rank();
        if bundle.base_dim() != n || h.n() != n || h.s() != s || ambient.dim() != n + s {
            return Err(Error::Dimension(format!(
                "inconsistent dimensions: base {n}, bundle rank {s} over {}, h {}→{}, ambient {}",
                bundle.base_dim(),
                h.n(),
                h.s(),
                ambient.dim()
            )));
        }
        let problem = Problem {
            base,
            bundle,
            h,
            ambient,
            seed,
        };
        match &problem.seed {
            Seed::Point(ps) => {
                problem.check_point_seed(ps)?;
                problem.bundle.validate(&problem.sample_points(&ps.p))?;
            }
            Seed::Submanifold(ss) => {
                if ss.s.len() != n || ss.st.len() != n + s {
                    return Err(Error::Dimension("submanifold seed dimensions do not match the problem".into()));
                }
                ss.validate(&problem)?;
                let x = ss.point(&ss.sample_params(1)[0])?;
                problem.bundle.validate(&problem.sample_points(&x))?;
            }
        }
        Ok(problem)
    }

    fn sample_points(&self, p: &[f64]) -> Vec<Vec<f64>> {
        let mut out = vec![p.to_vec()];
        for i in 0..p.len() {
            for sign in [-1.0, 1.0] {
                let mut q = p.to_vec();
                q[i] += sign * 0.1;
                if self.base.eval(&q).is_ok() {
                    out.push(q);
                }
            }
        }
        out
    }

    fn check_point_seed(&self, ps: &PointSeed) -> Result<()> {
        let d = self.dim();
        if ps.p.len() != self.n() || ps.ptilde.len() != d || ps.phi.nrows() != d || ps.phi.ncols() != d {
            return Err(Error::Dimension(format!(
                "seed needs p in R^{}, p̃ in R^{d} and a {d}×{d} φ",
                self.n()
            )));
        }
        let g = self.block_metric(&ps.p)?;
        let gt = self.ambient.eval(&ps.ptilde)?;
        let defect = (ps.phi.transpose() * gt * &ps.phi - &g).amax();
        if !(defect <= PHI_TOL * g.amax().max(1.0)) {
            return Err(Error::Invalid(format!("φ is not a linear isometry (defect {defect:e})")));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.base.dim()
    }

    pub fn s(&self) -> usize {
        self.bundle.rank()
    }

    pub fn dim(&self) -> usize {
        self.ambient.dim()
    }

    /// `g ⊕ 𝔥` at `x`.
    pub fn block_metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        Ok(block_diag(&self.base.eval(x)?, &self.bundle.frak(x)?))
    }

    /// Orthonormal frames of `T_xM` and `V_x` by Gram–Schmidt on the
    /// coordinate and local bundle frames.
    pub fn base_frames(&self, x: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let et = orthonormalize(&DMatrix::identity(self.n(), self.n()), &self.base.eval(x)?)?;
        let eb = orthonormalize(&DMatrix::identity(self.s(), self.s()), &self.bundle.frak(x)?)?;
        Ok((et, eb))
    }

    /// The point seed for curves starting at `x`: the problem's own seed, or
    /// the submanifold seed at the parameter of `x`.
    pub fn point_seed_at(&self, x: &[f64]) -> Result<PointSeed> {
        match &self.seed {
            Seed::Point(ps) => {
                let dist = ps.p.iter().zip(x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if dist > 1e-10 {
                    return Err(Error::Invalid(format!("curve must start at p = {:?}, starts at {x:?}", ps.p)));
                }
                Ok(ps.clone())
            }
            Seed::Submanifold(ss) => {
                let u = ss.locate(x)?;
                ss.point_seed(&u, self)
            }
        }
    }

    /// The initial split frame `φ(e_A)` for a point seed.
    pub fn split_seed(&self, ps: &PointSeed) -> Result<SplitSeed> {
        let (et, eb) = self.base_frames(&ps.p)?;
        let frame = &ps.phi * block_diag(&et, &eb);
        SplitSeed::new(&self.ambient, ps.ptilde.clone(), frame, self.n())
    }

    /// The same problem with `h` replaced by `c·h`. The seed is kept.
    pub fn with_scaled_h(&self, c: f64) -> Self {
        Problem {
            h: self.h.scaled(c),
            ..self.clone()
        }
    }
}
