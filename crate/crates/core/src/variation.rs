//! Variations of (generalized) developments along one-parameter families.
//!
//! A family `(v(u, t), h(u, t))` is developed for each fixed `u`; the
//! variation field `∂_u` of the developed curves is integrated together with
//! the development itself. Components are taken in the moving orthonormal
//! frame: `U_A = ⟨∂_u, E_A⟩` and `X_AB = ⟨∇_u E_A, E_B⟩`.

use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};

use crate::charts::ScalarField;
use crate::error::{Error, Result};
use crate::fundeq::json_f64;
use crate::odeint::{integrate, Method, OdeSystem, Trajectory};
use crate::reconstruct::{Problem, Seed};
use crate::tensor::{block_diag, inverse, orthonormalize, sym_index, sym_len, SecondForm};

/// Step of the default central differences in `u` and `t`.
pub const FD_STEP: f64 = 1e-6;
/// Step of the default mixed difference `∂_u ∂_t`.
pub const MIXED_FD_STEP: f64 = 1e-4;

fn central<T>(f: impl Fn(f64) -> Result<T>, x: f64, eps: f64, sub: impl Fn(T, T) -> T, scale: impl Fn(T, f64) -> T) -> Result<T> {
    let hi = f(x + eps)?;
    let lo = f(x - eps)?;
    Ok(scale(sub(hi, lo), 0.5 / eps))
}

fn form_diff(a: SecondForm, b: SecondForm) -> SecondForm {
    let mut out = a;
    out.axpy(-1.0, &b);
    out
}

/// A one-parameter family of development data in frame coefficients.
///
/// Derivatives default to central differences; implementations with exact
/// derivatives should override them.
pub trait Family: Send + Sync {
    fn n(&self) -> usize;

    fn s(&self) -> usize;

    fn v(&self, u: f64, t: f64) -> Result<DVector<f64>>;

    fn h(&self, u: f64, t: f64) -> Result<SecondForm>;

    fn v_u(&self, u: f64, t: f64) -> Result<DVector<f64>> {
        central(|x| self.v(x, t), u, FD_STEP, |a, b| a - b, |a, c| a * c)
    }

    fn v_t(&self, u: f64, t: f64) -> Result<DVector<f64>> {
        central(|x| self.v(u, x), t, FD_STEP, |a, b| a - b, |a, c| a * c)
    }

    fn v_ut(&self, u: f64, t: f64) -> Result<DVector<f64>> {
        let e = MIXED_FD_STEP;
        let pp = self.v(u + e, t + e)?;
        let pm = self.v(u + e, t - e)?;
        let mp = self.v(u - e, t + e)?;
        let mm = self.v(u - e, t - e)?;
        Ok((pp - pm - mp + mm) / (4.0 * e * e))
    }

    fn h_u(&self, u: f64, t: f64) -> Result<SecondForm> {
        central(|x| self.h(x, t), u, FD_STEP, form_diff, |a, c| a.scale(c))
    }

    fn h_t(&self, u: f64, t: f64) -> Result<SecondForm> {
        central(|x| self.h(u, x), t, FD_STEP, form_diff, |a, c| a.scale(c))
    }
}

struct Sym {
    f: ScalarField,
    du: ScalarField,
    dt: ScalarField,
    dut: ScalarField,
}

impl Sym {
    fn parse(src: &str) -> Result<Self> {
        let f = ScalarField::parse(src, 2)?;
        let du = f.derivative(0);
        let dt = f.derivative(1);
        let dut = du.derivative(1);
        Ok(Sym { f, du, dt, dut })
    }
}

/// Family given by expressions in `x1 = u` and `x2 = t`, differentiated
/// symbolically.
pub struct ExprFamily {
    n: usize,
    s: usize,
    v: Vec<Sym>,
    // h^α_ab for a <= b, α-major; empty means h = 0
    h: Vec<Sym>,
}

impl ExprFamily {
    /// `v` lists the `n` frame coefficients; `h` is either empty or lists
    /// `h^α_ab` for `α = 1..s` and `a <= b` in row-major order.
    pub fn new(v: &[&str], s: usize, h: &[&str]) -> Result<Self> {
        let n = v.len();
        if n == 0 {
            return Err(Error::Dimension("a family needs at least one velocity component".into()));
        }
        if !h.is_empty() && h.len() != s * sym_len(n) {
            return Err(Error::Dimension(format!(
                "h needs {} components (s = {s}, n = {n}), got {}",
                s * sym_len(n),
                h.len()
            )));
        }
        Ok(ExprFamily {
            n,
            s,
            v: v.iter().map(|src| Sym::parse(src)).collect::<Result<_>>()?,
            h: h.iter().map(|src| Sym::parse(src)).collect::<Result<_>>()?,
        })
    }

    fn vec(&self, u: f64, t: f64, pick: impl Fn(&Sym) -> &ScalarField) -> Result<DVector<f64>> {
        let x = [u, t];
        let vals: Vec<f64> = self.v.iter().map(|c| pick(c).eval(&x)).collect::<Result<_>>()?;
        Ok(DVector::from_vec(vals))
    }

    fn form(&self, u: f64, t: f64, pick: impl Fn(&Sym) -> &ScalarField) -> Result<SecondForm> {
        let mut out = SecondForm::zeros(self.n, self.s);
        if self.h.is_empty() {
            return Ok(out);
        }
        let x = [u, t];
        let m = sym_len(self.n);
        for alpha in 0..self.s {
            for a in 0..self.n {
                for b in a..self.n {
                    out.set(alpha, a, b, pick(&self.h[alpha * m + sym_index(self.n, a, b)]).eval(&x)?);
                }
            }
        }
        Ok(out)
    }
}

impl Family for ExprFamily {
    fn n(&self) -> usize {
        self.n
    }

    fn s(&self) -> usize {
        self.s
    }

    fn v(&self, u: f64, t: f64) -> Result<DVector<f64>> {
        self.vec(u, t, |c| &c.f)
    }

    fn h(&self, u: f64, t: f64) -> Result<SecondForm> {
        self.form(u, t, |c| &c.f)
    }

    fn v_u(&self, u: f64, t: f64) -> Result<DVector<f64>> {
        self.vec(u, t, |c| &c.du)
    }

    fn v_t(&self, u: f64, t: f64) -> Result<DVector<f64>> {
        self.vec(u, t, |c| &c.dt)
    }

    fn v_ut(&self, u: f64, t: f64) -> Result<DVector<f64>> {
        self.vec(u, t, |c| &c.dut)
    }

    fn h_u(&self, u: f64, t: f64) -> Result<SecondForm> {
        self.form(u, t, |c| &c.du)
    }

    fn h_t(&self, u: f64, t: f64) -> Result<SecondForm> {
        self.form(u, t, |c| &c.dt)
    }
}

/// Where the curves of the family start.
#[derive(Debug, Clone, PartialEq)]
pub enum SeedKind {
    /// Every curve starts at the problem's point seed.
    Point,
    /// Curve `u` starts at `θ(u) = s(w0 + u·direction)` on the seed
    /// submanifold, with the Gram–Schmidt frames at `θ(u)`.
    Submanifold { w0: Vec<f64>, direction: Vec<f64> },
}

/// Initial data at `θ(u)` for a submanifold seed.
#[derive(Debug, Clone)]
pub struct SubmanifoldData {
    pub r: usize,
    pub point: Vec<f64>,
    /// Tangent frame; the first `r` columns span `T S`.
    pub tangent_frame: DMatrix<f64>,
    pub bundle_frame: DMatrix<f64>,
    /// `θ_i = ⟨θ', e_i⟩`.
    pub theta: DVector<f64>,
    /// `σ^μ_ij` with `μ` counting normal directions of `S` in `M`.
    pub sigma: SecondForm,
    pub ambient_point: Vec<f64>,
    /// `ψ̃(e_A)` as columns.
    pub ambient_frame: DMatrix<f64>,
}

/// Builds the frames and `θ`, `σ` data at parameter `u`.
///
/// The initial conditions used downstream assume the frames are parallel
/// along `θ`. Gram–Schmidt frames have that property only when `S` is a
/// curve of codimension at most one and the bundle has rank at most one,
/// so other shapes are rejected.
pub fn submanifold_data(problem: &Problem, w0: &[f64], direction: &[f64], u: f64) -> Result<SubmanifoldData> {
    let Seed::Submanifold(ss) = &problem.seed else {
        return Err(Error::Invalid("the problem has no submanifold seed".into()));
    };
    let (n, s) = (problem.n(), problem.s());
    let r = ss.r();
    if w0.len() != r || direction.len() != r {
        return Err(Error::Dimension(format!("seed parameters need {r} components")));
    }
    if r != 1 || n - r > 1 || s > 1 {
        return Err(Error::Invalid(format!(
            "submanifold variations need a seed curve of codimension ≤ 1 and bundle rank ≤ 1 (r = {r}, n = {n}, s = {s})"
        )));
    }
    let w: Vec<f64> = w0.iter().zip(direction).map(|(a, b)| a + u * b).collect();
    let point = ss.point(&w)?;
    let g = problem.base.eval(&point)?;
    let ds = ss.tangent(&w)?;
    let mut basis = DMatrix::zeros(n, n);
    basis.view_mut((0, 0), (n, r)).copy_from(&ds);
    // complete with coordinate vectors; the least aligned one for codim 1
    if n > r {
        let t = ds.column(0);
        let k = (0..n)
            .min_by(|&i, &j| t[i].abs().total_cmp(&t[j].abs()))
            .expect("n > 0");
        basis[(k, 1)] = 1.0;
    }
    let et = orthonormalize(&basis, &g)?;
    let (_, eb) = problem.base_frames(&point)?;
    let theta_dir = &ds * DVector::from_column_slice(direction);
    let theta = DVector::from_fn(r, |i, _| (et.column(i).transpose() * &g * &theta_dir)[(0, 0)]);
    // σ(e_i, e_j) through e_i = ds · c_i
    let coeff = inverse(&(ds.transpose() * &g * &ds), "induced metric on S")? * ds.transpose() * &g * et.columns(0, r);
    let raw = ss.sigma(&w, problem)?;
    let sigma = SecondForm::from_fn(r, n - r, |mu, i, j| {
        let mut acc = DVector::zeros(n);
        for k in 0..r {
            for l in 0..r {
                acc += &raw[sym_index(r, k, l)] * (coeff[(k, i)] * coeff[(l, j)]);
            }
        }
        (et.column(r + mu).transpose() * &g * acc)[(0, 0)]
    });
    let ambient_frame = ss.psi_tilde(&w, problem)? * block_diag(&et, &eb);
    Ok(SubmanifoldData {
        r,
        point,
        tangent_frame: et,
        bundle_frame: eb,
        theta,
        sigma,
        ambient_point: ss.ambient_point(&w)?,
        ambient_frame,
    })
}

/// Frame components at one parameter. Base variations fill `U_α = 0` and
/// the off-diagonal blocks of `X` with zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationState {
    pub u: DVector<f64>,
    pub du: DVector<f64>,
    pub x: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Base,
    Ambient,
}

/// The integrated development together with its variation field.
#[derive(Debug, Clone)]
pub struct VariationTrajectory {
    kind: Kind,
    u: f64,
    n: usize,
    s: usize,
    traj: Trajectory,
}

impl VariationTrajectory {
    /// The family parameter.
    pub fn parameter(&self) -> f64 {
        self.u
    }

    pub fn is_ambient(&self) -> bool {
        self.kind == Kind::Ambient
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }

    pub fn knots(&self) -> &[f64] {
        self.traj.knots()
    }

    fn chart_dim(&self) -> usize {
        match self.kind {
            Kind::Base => self.n,
            Kind::Ambient => self.n + self.s,
        }
    }

    fn unpack(&self, y: &[f64]) -> (Vec<f64>, DMatrix<f64>, VariationState) {
        let (n, s) = (self.n, self.s);
        let d = n + s;
        match self.kind {
            Kind::Base => {
                let l = BaseLayout::new(n, s);
                let et = DMatrix::from_column_slice(n, n, &y[l.et..l.eb]);
                let eb = DMatrix::from_column_slice(s, s, &y[l.eb..l.u]);
                let mut u = DVector::zeros(d);
                let mut du = DVector::zeros(d);
                u.rows_mut(0, n).copy_from_slice(&y[l.u..l.du]);
                du.rows_mut(0, n).copy_from_slice(&y[l.du..l.xt]);
                let x = block_diag(
                    &DMatrix::from_column_slice(n, n, &y[l.xt..l.xb]),
                    &DMatrix::from_column_slice(s, s, &y[l.xb..l.len]),
                );
                (y[..n].to_vec(), block_diag(&et, &eb), VariationState { u, du, x })
            }
            Kind::Ambient => {
                let l = AmbientLayout::new(d);
                let e = DMatrix::from_column_slice(d, d, &y[l.e..l.u]);
                let u = DVector::from_column_slice(&y[l.u..l.du]);
                let du = DVector::from_column_slice(&y[l.du..l.x]);
                let x = DMatrix::from_column_slice(d, d, &y[l.x..l.len]);
                (y[..d].to_vec(), e, VariationState { u, du, x })
            }
        }
    }

    pub fn state(&self, t: f64) -> VariationState {
        self.unpack(&self.traj.eval(t)).2
    }

    /// Chart point of the developed curve.
    pub fn point(&self, t: f64) -> Vec<f64> {
        self.traj.eval(t)[..self.chart_dim()].to_vec()
    }

    /// The moving frame. For base variations this is `diag(E_tangent, E_bundle)`.
    pub fn frame(&self, t: f64) -> DMatrix<f64> {
        self.unpack(&self.traj.eval(t)).1
    }

    /// `∂_u` of the developed curve in chart components. For base variations
    /// this lies in `T M`.
    pub fn field(&self, t: f64) -> DVector<f64> {
        let (_, e, st) = self.unpack(&self.traj.eval(t));
        match self.kind {
            Kind::Base => e.view((0, 0), (self.n, self.n)) * st.u.rows(0, self.n),
            Kind::Ambient => e * st.u,
        }
    }

    /// Largest `|X_AB + X_BA|` over the knots.
    pub fn antisymmetry_defect(&self) -> f64 {
        (0..self.traj.len())
            .map(|i| {
                let x = self.unpack(self.traj.value(i)).2.x;
                (&x + x.transpose()).amax()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy)]
struct BaseLayout {
    et: usize,
    eb: usize,
    u: usize,
    du: usize,
    xt: usize,
    xb: usize,
    len: usize,
}

impl BaseLayout {
    fn new(n: usize, s: usize) -> Self {
        let et = n;
        let eb = et + n * n;
        let u = eb + s * s;
        let du = u + n;
        let xt = du + n;
        let xb = xt + n * n;
        BaseLayout {
            et,
            eb,
            u,
            du,
            xt,
            xb,
            len: xb + s * s,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct AmbientLayout {
    e: usize,
    u: usize,
    du: usize,
    x: usize,
    len: usize,
}

impl AmbientLayout {
    fn new(d: usize) -> Self {
        let e = d;
        let u = e + d * d;
        let du = u + d;
        let x = du + d;
        AmbientLayout {
            e,
            u,
            du,
            x,
            len: x + d * d,
        }
    }
}

fn check_finite(v: &DVector<f64>, what: &str, t: f64) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            context: format!("{what} at t = {t}"),
        })
    }
}

/// `Σ R_{ijkl} a_i b_j c_k` as a covector in `l`.
fn curvature_contract(r: &crate::charts::CurvatureValue, a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>) -> DVector<f64> {
    let m = a.len();
    DVector::from_fn(m, |l, _| {
        let mut acc = 0.0;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    acc += r.get(i, j, k, l) * a[i] * b[j] * c[k];
                }
            }
        }
        acc
    })
}

/// `M_ij = Σ R_{ijkl} a_k b_l` for a tensor with slot dims `[p, p, m, m]`.
fn curvature_pair(r: &crate::charts::CurvatureValue, a: &DVector<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    let [p, _, m, _] = r.dims();
    DMatrix::from_fn(p, p, |i, j| {
        let mut acc = 0.0;
        for k in 0..m {
            for l in 0..m {
                acc += r.get(i, j, k, l) * a[k] * b[l];
            }
        }
        acc
    })
}

struct BaseSystem<'a> {
    problem: &'a Problem,
    family: &'a dyn Family,
    u: f64,
    layout: BaseLayout,
}

impl OdeSystem for BaseSystem<'_> {
    fn dim(&self) -> usize {
        self.layout.len
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let (n, s) = (self.problem.n(), self.problem.s());
        let l = self.layout;
        let v = self.family.v(self.u, t)?;
        let vt = self.family.v_t(self.u, t)?;
        let vut = self.family.v_ut(self.u, t)?;
        check_finite(&v, "family velocity", t)?;
        check_finite(&vt, "∂_t v", t)?;
        check_finite(&vut, "∂_u ∂_t v", t)?;
        let x = &y[..n];
        let et = DMatrix::from_column_slice(n, n, &y[l.et..l.eb]);
        let eb = DMatrix::from_column_slice(s, s, &y[l.eb..l.u]);
        let uu = DVector::from_column_slice(&y[l.u..l.du]);
        let xt = DMatrix::from_column_slice(n, n, &y[l.xt..l.xb]);
        let xd = &et * &v;
        let uc = &et * &uu;
        let xd_s: Vec<f64> = xd.iter().copied().collect();
        let m = self.problem.base.christoffel(x)?.along(&xd_s);
        let w = self.problem.bundle.along(x, &xd_s)?;
        let riem = self.problem.base.riemann(x)?;

        dy[..n].copy_from_slice(xd.as_slice());
        dy[l.et..l.eb].copy_from_slice((-(&m * &et)).as_slice());
        dy[l.eb..l.u].copy_from_slice((-(&w * &eb)).as_slice());
        dy[l.u..l.du].copy_from_slice(&y[l.du..l.xt]);
        // U'' = ∂u∂t v + Xᵀ ∂t v + R(v, U, v, E_·)
        let ruv = et.transpose() * curvature_contract(&riem, &xd, &uc, &xd);
        let ddu = &vut + xt.transpose() * &vt + ruv;
        dy[l.du..l.xt].copy_from_slice(ddu.as_slice());
        let dxt = et.transpose() * curvature_pair(&riem, &xd, &uc) * &et;
        dy[l.xt..l.xb].copy_from_slice(dxt.as_slice());
        if s > 0 {
            let rv = self.problem.bundle.curvature(x)?;
            let dxb = eb.transpose() * curvature_pair(&rv, &xd, &uc) * &eb;
            dy[l.xb..l.len].copy_from_slice(dxb.as_slice());
        }
        Ok(())
    }
}

/// Terms of the ambient system that depend on the family only.
struct Drive {
    v: DVector<f64>,
    vt: DVector<f64>,
    // ∂_u of the connection-free acceleration components
    accel_u: DVector<f64>,
    omega: DMatrix<f64>,
    omega_t: DMatrix<f64>,
    omega_u: DMatrix<f64>,
}

/// `Ω = [[0, K], [−Kᵀ, 0]]` with `K_{aα} = h^α_ab v_b`: `∇_t Ẽ_A = Ω_AB Ẽ_B`.
fn rotation(k: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, s) = k.shape();
    let mut o = DMatrix::zeros(n + s, n + s);
    o.view_mut((0, n), (n, s)).copy_from(k);
    o.view_mut((n, 0), (s, n)).copy_from(&(-k.transpose()));
    o
}

impl Drive {
    fn sample(family: &dyn Family, u: f64, t: f64) -> Result<Self> {
        let (n, s) = (family.n(), family.s());
        let v = family.v(u, t)?;
        let vt = family.v_t(u, t)?;
        let vu = family.v_u(u, t)?;
        let vut = family.v_ut(u, t)?;
        for (vec, what) in [(&v, "family velocity"), (&vt, "∂_t v"), (&vu, "∂_u v"), (&vut, "∂_u ∂_t v")] {
            check_finite(vec, what, t)?;
        }
        let h = family.h(u, t)?;
        let ht = family.h_t(u, t)?;
        let hu = family.h_u(u, t)?;
        if !(h.is_finite() && ht.is_finite() && hu.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("family second form at t = {t}"),
            });
        }
        let k = h.contract_velocity(&v);
        let kt = ht.contract_velocity(&v) + h.contract_velocity(&vt);
        let ku = hu.contract_velocity(&v) + h.contract_velocity(&vu);
        let mut accel_u = DVector::zeros(n + s);
        accel_u.rows_mut(0, n).copy_from(&vut);
        accel_u.rows_mut(n, s).copy_from(&(ku.transpose() * &v + k.transpose() * &vu));
        Ok(Drive {
            v,
            vt,
            accel_u,
            omega: rotation(&k),
            omega_t: rotation(&kt),
            omega_u: rotation(&ku),
        })
    }

    fn padded(&self, w: &DVector<f64>, d: usize) -> DVector<f64> {
        let mut out = DVector::zeros(d);
        out.rows_mut(0, w.len()).copy_from(w);
        out
    }

    /// Right-hand sides `(Ũ'', X̃')` given the frame-component state and
    /// the curvature terms `R̃(v, U, v, Ẽ_B)` and `R̃(Ẽ_A, Ẽ_B, v, U)`.
    fn variation_rates(
        &self,
        st: &VariationState,
        r_vec: &DVector<f64>,
        r_mat: &DMatrix<f64>,
    ) -> (DVector<f64>, DMatrix<f64>) {
        let d = st.u.len();
        let om = &self.omega;
        let omt = om.transpose();
        let vv = self.padded(&self.v, d);
        // components of ∇_t ∂_t
        let accel = self.padded(&self.vt, d) + &omt * &vv;
        let w = &st.du + &omt * &st.u;
        let ddu = -(&omt * w) - &omt * &st.du - self.omega_t.transpose() * &st.u
            + &self.accel_u
            + st.x.transpose() * accel
            + r_vec;
        let dx = &self.omega_u + om * &st.x - &st.x * om + r_mat;
        (ddu, dx)
    }
}

struct AmbientSystem<'a> {
    problem: &'a Problem,
    family: &'a dyn Family,
    u: f64,
    layout: AmbientLayout,
}

impl OdeSystem for AmbientSystem<'_> {
    fn dim(&self) -> usize {
        self.layout.len
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let d = self.problem.dim();
        let l = self.layout;
        let drive = Drive::sample(self.family, self.u, t)?;
        let x = &y[..d];
        let e = DMatrix::from_column_slice(d, d, &y[l.e..l.u]);
        let st = VariationState {
            u: DVector::from_column_slice(&y[l.u..l.du]),
            du: DVector::from_column_slice(&y[l.du..l.x]),
            x: DMatrix::from_column_slice(d, d, &y[l.x..l.len]),
        };
        let xd = &e * drive.padded(&drive.v, d);
        let uc = &e * &st.u;
        let xd_s: Vec<f64> = xd.iter().copied().collect();
        let metric = self.problem.ambient.metric();
        let m = metric.christoffel(x)?.along(&xd_s);
        let riem = metric.riemann(x)?;
        let r_vec = e.transpose() * curvature_contract(&riem, &xd, &uc, &xd);
        let r_mat = e.transpose() * curvature_pair(&riem, &xd, &uc) * &e;
        let (ddu, dx) = drive.variation_rates(&st, &r_vec, &r_mat);
        let de = -(&m * &e) + &e * drive.omega.transpose();
        dy[..d].copy_from_slice(xd.as_slice());
        dy[l.e..l.u].copy_from_slice(de.as_slice());
        dy[l.u..l.du].copy_from_slice(st.du.as_slice());
        dy[l.du..l.x].copy_from_slice(ddu.as_slice());
        dy[l.x..l.len].copy_from_slice(dx.as_slice());
        Ok(())
    }
}

fn check_family(problem: &Problem, family: &dyn Family, ambient: bool) -> Result<()> {
    if family.n() != problem.n() || (ambient && family.s() != problem.s()) {
        return Err(Error::Dimension(format!(
            "family has n = {}, s = {} but the problem has n = {}, s = {}",
            family.n(),
            family.s(),
            problem.n(),
            problem.s()
        )));
    }
    Ok(())
}

/// Initial `(U, U', X)` of a submanifold-seeded family in the frame at `θ(u)`,
/// padded to `n + s` components. `h0` is only used for the ambient blocks.
fn submanifold_initial(
    data: &SubmanifoldData,
    v: &DVector<f64>,
    vu: &DVector<f64>,
    h0: Option<&SecondForm>,
    s: usize,
) -> VariationState {
    let r = data.r;
    let n = v.len();
    let d = n + s;
    let mut u = DVector::zeros(d);
    let mut du = DVector::zeros(d);
    let mut x = DMatrix::zeros(d, d);
    du.rows_mut(0, n).copy_from(vu);
    for i in 0..r {
        u[i] = data.theta[i];
        for mu in 0..n - r {
            let sig: f64 = (0..r).map(|j| data.sigma.get(mu, i, j) * data.theta[j]).sum();
            x[(i, r + mu)] = sig;
            x[(r + mu, i)] = -sig;
            du[i] -= v[r + mu] * sig;
            du[r + mu] += v[i] * sig;
        }
    }
    if let Some(h) = h0 {
        for a in 0..n {
            for alpha in 0..s {
                let val: f64 = (0..r).map(|i| h.get(alpha, a, i) * data.theta[i]).sum();
                x[(a, n + alpha)] = val;
                x[(n + alpha, a)] = -val;
            }
        }
    }
    VariationState { u, du, x }
}

fn seed_point(problem: &Problem) -> Result<&crate::reconstruct::PointSeed> {
    match &problem.seed {
        Seed::Point(ps) => Ok(ps),
        Seed::Submanifold(_) => Err(Error::Invalid(
            "point-seeded variations need a problem with a point seed".into(),
        )),
    }
}

/// Integrates the development of `v(u, ·)` in `M` together with `U`, `U'`,
/// `X_ab` and `X_αβ` from the curvature of `M` and of `D`.
pub fn integrate_base_variation(
    problem: &Problem,
    family: &dyn Family,
    u: f64,
    seed: &SeedKind,
    method: Method,
) -> Result<VariationTrajectory> {
    check_family(problem, family, false)?;
    let (n, s) = (problem.n(), problem.s());
    let layout = BaseLayout::new(n, s);
    let v0 = family.v(u, 0.0)?;
    let vu0 = family.v_u(u, 0.0)?;
    let (point, et, eb, init) = match seed {
        SeedKind::Point => {
            let ps = seed_point(problem)?;
            let (et, eb) = problem.base_frames(&ps.p)?;
            let mut init = VariationState {
                u: DVector::zeros(n + s),
                du: DVector::zeros(n + s),
                x: DMatrix::zeros(n + s, n + s),
            };
            init.du.rows_mut(0, n).copy_from(&vu0);
            (ps.p.clone(), et, eb, init)
        }
        SeedKind::Submanifold { w0, direction } => {
            let data = submanifold_data(problem, w0, direction, u)?;
            let init = submanifold_initial(&data, &v0, &vu0, None, s);
            (data.point, data.tangent_frame, data.bundle_frame, init)
        }
    };
    let mut y0 = vec![0.0; layout.len];
    y0[..n].copy_from_slice(&point);
    y0[layout.et..layout.eb].copy_from_slice(et.as_slice());
    y0[layout.eb..layout.u].copy_from_slice(eb.as_slice());
    y0[layout.u..layout.du].copy_from_slice(&init.u.as_slice()[..n]);
    y0[layout.du..layout.xt].copy_from_slice(&init.du.as_slice()[..n]);
    y0[layout.xt..layout.xb].copy_from_slice(init.x.view((0, 0), (n, n)).clone_owned().as_slice());
    let sys = BaseSystem {
        problem,
        family,
        u,
        layout,
    };
    let traj = integrate(&sys, &y0, 0.0, 1.0, method)?;
    Ok(VariationTrajectory {
        kind: Kind::Base,
        u,
        n,
        s,
        traj,
    })
}

/// Integrates the generalized development of `(v(u, ·), h(u, ·))` in `M̃`
/// together with `Ũ`, `Ũ'` and the full matrix `X̃`.
///
/// `X̃` is not assumed antisymmetric; its symmetric part stays at rounding
/// level and is reported by `antisymmetry_defect`.
pub fn integrate_gvariation(
    problem: &Problem,
    family: &dyn Family,
    u: f64,
    seed: &SeedKind,
    method: Method,
) -> Result<VariationTrajectory> {
    check_family(problem, family, true)?;
    let (n, s) = (problem.n(), problem.s());
    let d = n + s;
    let layout = AmbientLayout::new(d);
    let (point, frame, init) = match seed {
        SeedKind::Point => {
            let ps = seed_point(problem)?;
            let split = problem.split_seed(ps)?;
            let mut du = DVector::zeros(d);
            du.rows_mut(0, n).copy_from(&family.v_u(u, 0.0)?);
            let init = VariationState {
                u: DVector::zeros(d),
                du,
                x: DMatrix::zeros(d, d),
            };
            (split.point().to_vec(), split.frame().clone(), init)
        }
        SeedKind::Submanifold { w0, direction } => {
            let data = submanifold_data(problem, w0, direction, u)?;
            let h0 = family.h(u, 0.0)?;
            let init = submanifold_initial(&data, &family.v(u, 0.0)?, &family.v_u(u, 0.0)?, Some(&h0), s);
            (data.ambient_point, data.ambient_frame, init)
        }
    };
    let mut y0 = vec![0.0; layout.len];
    y0[..d].copy_from_slice(&point);
    y0[layout.e..layout.u].copy_from_slice(frame.as_slice());
    y0[layout.u..layout.du].copy_from_slice(init.u.as_slice());
    y0[layout.du..layout.x].copy_from_slice(init.du.as_slice());
    y0[layout.x..layout.len].copy_from_slice(init.x.as_slice());
    let sys = AmbientSystem {
        problem,
        family,
        u,
        layout,
    };
    let traj = integrate(&sys, &y0, 0.0, 1.0, method)?;
    Ok(VariationTrajectory {
        kind: Kind::Ambient,
        u,
        n,
        s,
        traj,
    })
}

/// A velocity family paired with the problem's `h`, read along the base
/// developments of the family in the transported frames.
///
/// `∂_t h` and `∂_u h` are exact: covariant derivatives of `h` plus the
/// frame rotation `X` of the base variation.
pub struct InducedFamily<F> {
    problem: Problem,
    inner: F,
    seed: SeedKind,
    method: Method,
    cache: Mutex<Vec<(u64, Arc<VariationTrajectory>)>>,
}

impl<F: Family> InducedFamily<F> {
    pub fn new(problem: Problem, inner: F, seed: SeedKind, method: Method) -> Self {
        InducedFamily {
            problem,
            inner,
            seed,
            method,
            cache: Mutex::new(Vec::new()),
        }
    }

    /// The base variation at `u`, computed once.
    pub fn base(&self, u: f64) -> Result<Arc<VariationTrajectory>> {
        let key = u.to_bits();
        if let Some((_, b)) = self.cache.lock().expect("cache lock").iter().find(|(k, _)| *k == key) {
            return Ok(Arc::clone(b));
        }
        let b = Arc::new(integrate_base_variation(&self.problem, &self.inner, u, &self.seed, self.method)?);
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.len() > 16 {
            cache.remove(0);
        }
        cache.push((key, Arc::clone(&b)));
        Ok(b)
    }

    fn frames(&self, base: &VariationTrajectory, t: f64) -> Result<(Vec<f64>, DMatrix<f64>, DMatrix<f64>, VariationState)> {
        let (n, s) = (self.problem.n(), self.problem.s());
        let (x, e, st) = base.unpack(&base.traj.eval(t));
        let et = e.view((0, 0), (n, n)).clone_owned();
        let eb = e.view((n, n), (s, s)).clone_owned();
        Ok((x, et, eb, st))
    }

    fn derivative_along(&self, x: &[f64], dir: &DVector<f64>, et: &DMatrix<f64>, eb_inv: &DMatrix<f64>) -> Result<SecondForm> {
        let (n, s) = (self.problem.n(), self.problem.s());
        let dh = self.problem.h.covariant_derivative_at(x, &self.problem.base, &self.problem.bundle)?;
        let mut acc = SecondForm::zeros(n, s);
        for (c, f) in dh.iter().enumerate() {
            acc.axpy(dir[c], f);
        }
        Ok(acc.transform(et, eb_inv))
    }
}

impl<F: Family> Family for InducedFamily<F> {
    fn n(&self) -> usize {
        self.problem.n()
    }

    fn s(&self) -> usize {
        self.problem.s()
    }

    fn v(&self, u: f64, t: f64) -> Result<DVector<f64>> {
        self.inner.v(u, t)
    }

    fn v_u(&self, u: f64, t: f64) -> Result<DVector<f64>> {
        self.inner.v_u(u, t)
    }

    fn v_t(&self, u: f64, t: f64) -> Result<DVector<f64>> {
        self.inner.v_t(u, t)
    }

    fn v_ut(&self, u: f64, t: f64) -> Result<DVector<f64>> {
        self.inner.v_ut(u, t)
    }

    fn h(&self, u: f64, t: f64) -> Result<SecondForm> {
        let base = self.base(u)?;
        let (x, et, eb, _) = self.frames(&base, t)?;
        let eb_inv = inverse(&eb, "bundle frame")?;
        Ok(self.problem.h.eval(&x)?.transform(&et, &eb_inv))
    }

    fn h_t(&self, u: f64, t: f64) -> Result<SecondForm> {
        let base = self.base(u)?;
        let (x, et, eb, _) = self.frames(&base, t)?;
        let eb_inv = inverse(&eb, "bundle frame")?;
        let xd = &et * self.inner.v(u, t)?;
        self.derivative_along(&x, &xd, &et, &eb_inv)
    }

    fn h_u(&self, u: f64, t: f64) -> Result<SecondForm> {
        let (n, s) = (self.problem.n(), self.problem.s());
        let base = self.base(u)?;
        let (x, et, eb, st) = self.frames(&base, t)?;
        let eb_inv = inverse(&eb, "bundle frame")?;
        let uc = &et * st.u.rows(0, n);
        let mut out = self.derivative_along(&x, &uc, &et, &eb_inv)?;
        let h = self.problem.h.eval(&x)?.transform(&et, &eb_inv);
        let xm = &st.x;
        // ∂_u h^α_ab = (∇_U h)^α_ab + X_ac h^α_cb + X_bc h^α_ac + X_αβ h^β_ab
        let rot = SecondForm::from_fn(n, s, |alpha, a, b| {
            let mut acc = 0.0;
            for c in 0..n {
                acc += xm[(a, c)] * h.get(alpha, c, b) + xm[(b, c)] * h.get(alpha, a, c);
            }
            for beta in 0..s {
                acc += xm[(n + alpha, n + beta)] * h.get(beta, a, b);
            }
            acc
        });
        out.axpy(1.0, &rot);
        Ok(out)
    }
}

/// One member `u` of a family as a development drive.
pub struct FamilyDrive<F: ?Sized> {
    family: Arc<F>,
    u: f64,
}

impl<F: Family + ?Sized> FamilyDrive<F> {
    pub fn new(family: Arc<F>, u: f64) -> Self {
        FamilyDrive { family, u }
    }
}

impl<F: Family + ?Sized> crate::transport::Drive for FamilyDrive<F> {
    fn n(&self) -> usize {
        self.family.n()
    }

    fn s(&self) -> usize {
        self.family.s()
    }

    fn velocity(&self, t: f64) -> Result<DVector<f64>> {
        self.family.v(self.u, t)
    }

    fn second_form(&self, t: f64) -> Result<SecondForm> {
        self.family.h(self.u, t)
    }
}

/// Deviations from `Ũ_a = U_a`, `Ũ_α = 0`, `X̃_ab = X_ab`, `X̃_αβ = X_αβ`
/// and `X̃_aα = h^α_ab U_b`, maximized over the knots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnsatzReport {
    pub max_u_alpha: f64,
    pub max_u_diff: f64,
    pub max_xab_diff: f64,
    pub max_xalphabeta_diff: f64,
    pub max_xaalpha_diff: f64,
}

impl AnsatzReport {
    pub fn max(&self) -> f64 {
        [
            self.max_u_alpha,
            self.max_u_diff,
            self.max_xab_diff,
            self.max_xalphabeta_diff,
            self.max_xaalpha_diff,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        format!(
            "{{\"max_U_alpha\": {}, \"max_U_diff\": {}, \"max_Xab_diff\": {}, \"max_Xalphabeta_diff\": {}, \"max_Xaalpha_diff\": {}}}",
            json_f64(self.max_u_alpha),
            json_f64(self.max_u_diff),
            json_f64(self.max_xab_diff),
            json_f64(self.max_xalphabeta_diff),
            json_f64(self.max_xaalpha_diff)
        )
    }
}

/// Compares a base variation with an ambient one of the same family.
/// `family` supplies `h^α_ab(u, t)` in the frames of the ambient run.
pub fn verify_ansatz(base: &VariationTrajectory, ambient: &VariationTrajectory, family: &dyn Family) -> Result<AnsatzReport> {
    if base.kind != Kind::Base || ambient.kind != Kind::Ambient {
        return Err(Error::Invalid("verify_ansatz needs a base and an ambient variation".into()));
    }
    if base.n != ambient.n || base.s != ambient.s || base.u != ambient.u {
        return Err(Error::Dimension("variations belong to different families".into()));
    }
    let (n, s) = (base.n, base.s);
    let u = base.u;
    let mut ts: Vec<f64> = base.knots().iter().chain(ambient.knots()).copied().collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let mut rep = AnsatzReport {
        max_u_alpha: 0.0,
        max_u_diff: 0.0,
        max_xab_diff: 0.0,
        max_xalphabeta_diff: 0.0,
        max_xaalpha_diff: 0.0,
    };
    for t in ts {
        let b = base.state(t);
        let a = ambient.state(t);
        let h = family.h(u, t)?;
        for alpha in 0..s {
            rep.max_u_alpha = rep.max_u_alpha.max(a.u[n + alpha].abs());
        }
        for i in 0..n {
            rep.max_u_diff = rep.max_u_diff.max((a.u[i] - b.u[i]).abs());
            for j in 0..n {
                rep.max_xab_diff = rep.max_xab_diff.max((a.x[(i, j)] - b.x[(i, j)]).abs());
            }
            for alpha in 0..s {
                let hu: f64 = (0..n).map(|k| h.get(alpha, i, k) * b.u[k]).sum();
                rep.max_xaalpha_diff = rep.max_xaalpha_diff.max((a.x[(i, n + alpha)] - hu).abs());
            }
        }
        for alpha in 0..s {
            for beta in 0..s {
                let (p, q) = (n + alpha, n + beta);
                rep.max_xalphabeta_diff = rep.max_xalphabeta_diff.max((a.x[(p, q)] - b.x[(p, q)]).abs());
            }
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems;
    use crate::transport::{develop, generalized_develop, DevelopOptions};
    use proptest::prelude::*;

    fn rk4(step: f64) -> Method {
        Method::Rk4 { step }
    }

    fn rand_mat(vals: &[f64], r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |i, j| vals[(i * c + j) % vals.len()] * (1.0 + 0.1 * (i + 2 * j) as f64))
    }

    proptest! {
        // componentwise transcription of the ambient system, index by index
        #[test]
        fn matrix_form_matches_components(vals in prop::collection::vec(-1.0f64..1.0, 40)) {
            let (n, s) = (2usize, 2usize);
            let d = n + s;
            let mut it = vals.iter().copied().cycle();
            let mut next = || it.next().unwrap();
            let form = |f: &mut dyn FnMut() -> f64| SecondForm::from_fn(n, s, |_, _, _| f());
            let h = form(&mut next);
            let ht = form(&mut next);
            let hu = form(&mut next);
            let v = DVector::from_fn(n, |_, _| next());
            let vt = DVector::from_fn(n, |_, _| next());
            let vu = DVector::from_fn(n, |_, _| next());
            let vut = DVector::from_fn(n, |_, _| next());
            let uu = DVector::from_fn(d, |_, _| next());
            let du = DVector::from_fn(d, |_, _| next());
            let raw = rand_mat(&vals[3..], d, d);
            let x = &raw - raw.transpose();
            let r_vec = DVector::from_fn(d, |_, _| next());
            let r_raw = rand_mat(&vals[7..], d, d);
            let r_mat = &r_raw - r_raw.transpose();

            let k = h.contract_velocity(&v);
            let kt = ht.contract_velocity(&v) + h.contract_velocity(&vt);
            let ku = hu.contract_velocity(&v) + h.contract_velocity(&vu);
            let mut accel_u = DVector::zeros(d);
            accel_u.rows_mut(0, n).copy_from(&vut);
            accel_u.rows_mut(n, s).copy_from(&(ku.transpose() * &v + k.transpose() * &vu));
            let drive = Drive { v: v.clone(), vt: vt.clone(), accel_u, omega: rotation(&k), omega_t: rotation(&kt), omega_u: rotation(&ku) };
            let st = VariationState { u: uu.clone(), du: du.clone(), x: x.clone() };
            let (ddu, dx) = drive.variation_rates(&st, &r_vec, &r_mat);

            let hv = |al: usize, a: usize| -> f64 { (0..n).map(|b| h.get(al, a, b) * v[b]).sum() };
            let dt_hv = |al: usize, a: usize| -> f64 { (0..n).map(|b| ht.get(al, a, b) * v[b] + h.get(al, a, b) * vt[b]).sum() };
            let du_hv = |al: usize, a: usize| -> f64 { (0..n).map(|b| hu.get(al, a, b) * v[b] + h.get(al, a, b) * vu[b]).sum() };
            let vhv = |al: usize| -> f64 { (0..n).map(|a| v[a] * hv(al, a)).sum() };
            let du_vhv = |al: usize| -> f64 {
                (0..n).map(|a| vu[a] * hv(al, a) + v[a] * du_hv(al, a)).sum()
            };
            let ua = |al: usize| uu[n + al];
            for a in 0..n {
                let mut e = vut[a] + r_vec[a];
                for al in 0..s {
                    e += 2.0 * du[n + al] * hv(al, a) + ua(al) * dt_hv(al, a);
                    for c in 0..n {
                        e += uu[c] * hv(al, c) * hv(al, a);
                    }
                    e -= vhv(al) * x[(a, n + al)];
                }
                for b in 0..n {
                    e += vt[b] * x[(b, a)];
                }
                prop_assert!((ddu[a] - e).abs() < 1e-12);
            }
            for al in 0..s {
                let mut e = r_vec[n + al] + du_vhv(al);
                for a in 0..n {
                    e += -2.0 * du[a] * hv(al, a) - uu[a] * dt_hv(al, a) + vt[a] * x[(a, n + al)];
                }
                for be in 0..s {
                    let kk: f64 = (0..n).map(|b| hv(be, b) * hv(al, b)).sum();
                    e += ua(be) * kk + vhv(be) * x[(n + be, n + al)];
                }
                prop_assert!((ddu[n + al] - e).abs() < 1e-12);
            }
            for a in 0..n {
                for b in 0..n {
                    let mut e = r_mat[(a, b)];
                    for al in 0..s {
                        e += x[(a, n + al)] * hv(al, b) - hv(al, a) * x[(b, n + al)];
                    }
                    prop_assert!((dx[(a, b)] - e).abs() < 1e-12);
                }
                for al in 0..s {
                    let mut e = r_mat[(a, n + al)] + du_hv(al, a);
                    for b in 0..n {
                        e -= x[(a, b)] * hv(al, b);
                    }
                    for be in 0..s {
                        e += hv(be, a) * x[(n + be, n + al)];
                    }
                    prop_assert!((dx[(a, n + al)] - e).abs() < 1e-12);
                }
            }
            for al in 0..s {
                for be in 0..s {
                    let mut e = r_mat[(n + al, n + be)];
                    for a in 0..n {
                        e += x[(a, n + al)] * hv(be, a) - x[(a, n + be)] * hv(al, a);
                    }
                    prop_assert!((dx[(n + al, n + be)] - e).abs() < 1e-12);
                }
            }
            // X' stays antisymmetric for antisymmetric X and curvature block
            prop_assert!((&dx + dx.transpose()).amax() < 1e-12);
        }
    }

    #[test]
    fn expr_family_derivatives() {
        let f = ExprFamily::new(&["cos(x1) * x2^2", "x1 * x2"], 1, &["x1", "x2", "x1 * x2"]).unwrap();
        let (u, t) = (0.4, 0.7);
        let fd = |g: &dyn Fn(f64, f64) -> DVector<f64>, du: f64, dt: f64| {
            let e = 1e-5;
            (g(u + du * e, t + dt * e) - g(u - du * e, t - dt * e)) / (2.0 * e)
        };
        let v = |a: f64, b: f64| f.v(a, b).unwrap();
        assert!((f.v_u(u, t).unwrap() - fd(&v, 1.0, 0.0)).amax() < 1e-8);
        assert!((f.v_t(u, t).unwrap() - fd(&v, 0.0, 1.0)).amax() < 1e-8);
        let exact = f.v_ut(u, t).unwrap();
        assert!((exact[0] - (-u.sin() * 2.0 * t)).abs() < 1e-14);
        assert!((exact[1] - 1.0).abs() < 1e-14);
        // the trait defaults agree with the symbolic derivatives
        struct Plain<'a>(&'a ExprFamily);
        impl Family for Plain<'_> {
            fn n(&self) -> usize {
                2
            }
            fn s(&self) -> usize {
                1
            }
            fn v(&self, u: f64, t: f64) -> Result<DVector<f64>> {
                self.0.v(u, t)
            }
            fn h(&self, u: f64, t: f64) -> Result<SecondForm> {
                self.0.h(u, t)
            }
        }
        let p = Plain(&f);
        assert!((p.v_ut(u, t).unwrap() - exact).amax() < 1e-6);
        assert!((p.h_u(u, t).unwrap().get(0, 1, 1) - t).abs() < 1e-8);
        assert!((p.h_t(u, t).unwrap().get(0, 0, 1) - 1.0).abs() < 1e-8);
        assert!(ExprFamily::new(&["1", "2"], 1, &["1"]).is_err());
    }

    fn flat_problem() -> Problem {
        problems::flat(2, 1).problem
    }

    #[test]
    fn base_field_matches_endpoint_differences() {
        let ex = problems::sphere(1.0);
        let fam = ExprFamily::new(&["0.7*cos(x1) + 0.2*x2", "0.7*sin(x1) - 0.3*x2^2"], 1, &[]).unwrap();
        let u = 0.3;
        let var = integrate_base_variation(&ex.problem, &fam, u, &SeedKind::Point, rk4(1e-3)).unwrap();
        let ps = seed_point(&ex.problem).unwrap();
        let (et, _) = ex.problem.base_frames(&ps.p).unwrap();
        let end = |uu: f64| {
            let dev = develop(
                &ex.problem.base,
                &ps.p,
                &et,
                |t| fam.v(uu, t),
                &[],
                &DevelopOptions::with_method(rk4(1e-3)),
            )
            .unwrap();
            DVector::from_vec(dev.endpoint())
        };
        let eps = 1e-4;
        let fd = (end(u + eps) - end(u - eps)) / (2.0 * eps);
        assert!((var.field(1.0) - &fd).amax() < 1e-6, "{} vs {fd}", var.field(1.0));
        assert!(var.antisymmetry_defect() < 1e-12);
    }

    #[test]
    fn sphere_jacobi_field() {
        let ex = problems::sphere(1.0);
        let c: f64 = 0.9;
        let fam = ExprFamily::new(&[&format!("{c}*cos(x1)"), &format!("{c}*sin(x1)")], 1, &[]).unwrap();
        let u = 0.5;
        let var = integrate_base_variation(&ex.problem, &fam, u, &SeedKind::Point, rk4(1e-3)).unwrap();
        let vu = fam.v_u(u, 0.0).unwrap();
        for t in [0.25, 0.5, 1.0] {
            let expect = &vu * ((c * t).sin() / c);
            let st = var.state(t);
            assert!((st.u.rows(0, 2) - expect).amax() < 1e-10, "t = {t}");
        }
    }

    #[test]
    fn flat_ambient_straight_lines() {
        let p = flat_problem();
        let fam = ExprFamily::new(&["cos(x1)", "sin(x1)"], 1, &["0.5", "0.2*x1", "x2"]).unwrap();
        let u = 0.2;
        let var = integrate_gvariation(&p, &fam, u, &SeedKind::Point, rk4(1e-3)).unwrap();
        let Seed::Point(ps) = &p.seed else { unreachable!() };
        let split = p.split_seed(ps).unwrap();
        let fam = Arc::new(fam);
        let end = |uu: f64| {
            let drive = FamilyDrive::new(fam.clone(), uu);
            let dev = generalized_develop(&p.ambient, &split, Arc::new(drive), &DevelopOptions::with_method(rk4(1e-3))).unwrap();
            DVector::from_vec(dev.endpoint())
        };
        let eps = 1e-4;
        let fd = (end(u + eps) - end(u - eps)) / (2.0 * eps);
        assert!((var.field(1.0) - &fd).amax() < 1e-6, "{} vs {fd}", var.field(1.0));
        assert!(var.antisymmetry_defect() < 1e-9);
    }

    fn sphere_family() -> ExprFamily {
        ExprFamily::new(&["0.8*cos(x1 + 0.5*x2)", "0.8*sin(x1) + 0.3*x2"], 1, &[]).unwrap()
    }

    fn ansatz_on(problem: &Problem, seed: SeedKind, u: f64) -> AnsatzReport {
        let base = integrate_base_variation(problem, &sphere_family(), u, &seed, rk4(1e-3)).unwrap();
        let fam = InducedFamily::new(problem.clone(), sphere_family(), seed.clone(), rk4(1e-3));
        let amb = integrate_gvariation(problem, &fam, u, &seed, rk4(1e-3)).unwrap();
        assert!(amb.antisymmetry_defect() < 1e-9);
        verify_ansatz(&base, &amb, &fam).unwrap()
    }

    #[test]
    fn ansatz_holds_on_the_sphere() {
        let rep = ansatz_on(&problems::sphere(1.0).problem, SeedKind::Point, 0.4);
        assert!(rep.max() < 1e-7, "{}", rep.to_json());
    }

    #[test]
    fn ansatz_fails_without_gauss() {
        let rep = ansatz_on(&problems::sphere(1.1).problem, SeedKind::Point, 0.4);
        // h = λg is umbilic: every development lies on the sphere of radius
        // 1/λ through p̃, so Ũ_α vanishes and the defect shows tangentially
        assert!(rep.max_u_alpha < 1e-9, "{}", rep.to_json());
        assert!(rep.max_u_diff >= 1e-3, "{}", rep.to_json());
        assert!(rep.max_xab_diff >= 1e-3, "{}", rep.to_json());
    }

    #[test]
    fn induced_derivatives_match_differences() {
        let ex = problems::tilted_product(0.4);
        let fam = InducedFamily::new(ex.problem.clone(), sphere_family(), SeedKind::Point, rk4(1e-3));
        let (u, t) = (0.3, 0.6);
        let e = 1e-4;
        let diff = |a: SecondForm, b: SecondForm| form_diff(a, b).scale(0.5 / e);
        let fd_u = diff(fam.h(u + e, t).unwrap(), fam.h(u - e, t).unwrap());
        let fd_t = diff(fam.h(u, t + e).unwrap(), fam.h(u, t - e).unwrap());
        assert!(form_diff(fam.h_u(u, t).unwrap(), fd_u).sup_norm() < 1e-6);
        assert!(form_diff(fam.h_t(u, t).unwrap(), fd_t).sup_norm() < 1e-6);
    }

    fn equator_seed() -> SeedKind {
        SeedKind::Submanifold {
            w0: vec![0.3],
            direction: vec![1.0],
        }
    }

    fn normal_family() -> ExprFamily {
        ExprFamily::new(&["0.2*sin(x1) + 0.1*x2", "0.6 + 0.2*cos(x1)"], 1, &[]).unwrap()
    }

    #[test]
    fn submanifold_initial_data() {
        let ex = problems::sphere_equator();
        let fam = normal_family();
        let u = 0.2;
        let data = submanifold_data(&ex.problem, &[0.3], &[1.0], u).unwrap();
        let base = integrate_base_variation(&ex.problem, &fam, u, &equator_seed(), rk4(1e-3)).unwrap();
        let st = base.state(0.0);
        let th = data.theta[0];
        let sig = data.sigma.get(0, 0, 0);
        let v = fam.v(u, 0.0).unwrap();
        let vu = fam.v_u(u, 0.0).unwrap();
        // the equator is a geodesic: σ = 0 and |θ'| = 1 in the round metric
        assert!(sig.abs() < 1e-12 && (th.abs() - 1.0).abs() < 1e-12);
        assert_eq!(st.u[0], th);
        assert_eq!(st.u[1], 0.0);
        assert_eq!(st.x[(0, 1)], sig * th);
        assert_eq!(st.du[0], vu[0] - v[1] * sig * th);
        assert_eq!(st.du[1], vu[1] + v[0] * sig * th);
        let fam_i = InducedFamily::new(ex.problem.clone(), normal_family(), equator_seed(), rk4(1e-3));
        let amb = integrate_gvariation(&ex.problem, &fam_i, u, &equator_seed(), rk4(1e-3)).unwrap();
        let a0 = amb.state(0.0);
        let h0 = fam_i.h(u, 0.0).unwrap();
        assert_eq!(a0.u[2], 0.0);
        assert_eq!(a0.du[2], 0.0);
        assert_eq!(a0.x[(0, 2)], h0.get(0, 0, 0) * th);
        assert_eq!(a0.x[(1, 2)], h0.get(0, 1, 0) * th);
    }

    #[test]
    fn submanifold_fields_match_differences() {
        let ex = problems::sphere_equator();
        let fam = normal_family();
        let u = 0.2;
        let base = integrate_base_variation(&ex.problem, &fam, u, &equator_seed(), rk4(1e-3)).unwrap();
        let fam_i = InducedFamily::new(ex.problem.clone(), normal_family(), equator_seed(), rk4(1e-3));
        let amb = integrate_gvariation(&ex.problem, &fam_i, u, &equator_seed(), rk4(1e-3)).unwrap();
        let e = 1e-4;
        let end_base = |uu: f64| DVector::from_vec(
            integrate_base_variation(&ex.problem, &fam, uu, &equator_seed(), rk4(1e-3)).unwrap().point(1.0),
        );
        let fd = (end_base(u + e) - end_base(u - e)) / (2.0 * e);
        assert!((base.field(1.0) - &fd).amax() < 1e-6, "{} vs {fd}", base.field(1.0));
        let end_amb = |uu: f64| DVector::from_vec(
            integrate_gvariation(&ex.problem, &fam_i, uu, &equator_seed(), rk4(1e-3)).unwrap().point(1.0),
        );
        let fd = (end_amb(u + e) - end_amb(u - e)) / (2.0 * e);
        assert!((amb.field(1.0) - &fd).amax() < 1e-6, "{} vs {fd}", amb.field(1.0));
        let rep = verify_ansatz(&base, &amb, &fam_i).unwrap();
        assert!(rep.max() < 1e-7, "{}", rep.to_json());
    }

    #[test]
    fn point_kind_needs_point_seed() {
        let ex = problems::sphere_equator();
        assert!(integrate_base_variation(&ex.problem, &normal_family(), 0.0, &SeedKind::Point, rk4(1e-2)).is_err());
        let sph = problems::sphere(1.0);
        assert!(integrate_base_variation(&sph.problem, &normal_family(), 0.0, &equator_seed(), rk4(1e-2)).is_err());
        let bad = ExprFamily::new(&["1", "0", "0"], 1, &[]).unwrap();
        assert!(integrate_base_variation(&sph.problem, &bad, 0.0, &SeedKind::Point, rk4(1e-2)).is_err());
    }
}
