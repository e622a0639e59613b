//! Parallel transport, developments and generalized developments.

mod curve;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

pub use curve::{read_curve_csv, write_curve_csv, Curve};

use crate::charts::{AmbientSpec, BundleSpec, MetricField};
use crate::error::{Error, Result};
use crate::odeint::{integrate, Method, OdeSystem, Trajectory};
use crate::tensor::{gram_deviation, orthonormalize, solve, SecondForm};

/// Tolerance on the Gram matrix of a seed frame.
pub const SEED_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DevelopOptions {
    pub method: Method,
    /// Largest admissible frame Gram drift per unit parameter; `None` only reports.
    pub drift_bound: Option<f64>,
    /// Re-orthonormalize the frame after every accepted step.
    pub reorthonormalize: bool,
}

impl Default for DevelopOptions {
    fn default() -> Self {
        DevelopOptions {
            method: Method::default(),
            drift_bound: Some(1e-8),
            reorthonormalize: false,
        }
    }
}

impl DevelopOptions {
    pub fn with_method(method: Method) -> Self {
        DevelopOptions {
            method,
            ..Default::default()
        }
    }
}

/// The data `t ↦ (ṽ(t), h̃(t))` driving a generalized development, expressed
/// in the coefficients of the moving frame: `ṽ = v_a ẽ_a` and
/// `h̃(ẽ_a, ẽ_b) = h^α_{ab} ẽ_{n+α}`.
pub trait Drive: Send + Sync {
    fn n(&self) -> usize;

    fn s(&self) -> usize;

    fn velocity(&self, t: f64) -> Result<DVector<f64>>;

    fn second_form(&self, t: f64) -> Result<SecondForm>;

    /// Parameters where the samplers are only piecewise smooth.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Time-independent `(v, h)`.
#[derive(Debug, Clone)]
pub struct ConstantDrive {
    pub v: DVector<f64>,
    pub h: SecondForm,
}

impl Drive for ConstantDrive {
    fn n(&self) -> usize {
        self.v.len()
    }

    fn s(&self) -> usize {
        self.h.s()
    }

    fn velocity(&self, _t: f64) -> Result<DVector<f64>> {
        Ok(self.v.clone())
    }

    fn second_form(&self, _t: f64) -> Result<SecondForm> {
        Ok(self.h.clone())
    }
}

/// Drive given by two closures.
pub struct FnDrive<V, H> {
    n: usize,
    s: usize,
    v: V,
    h: H,
    breaks: Vec<f64>,
}

impl<V, H> FnDrive<V, H>
where
    V: Fn(f64) -> Result<DVector<f64>> + Send + Sync,
    H: Fn(f64) -> Result<SecondForm> + Send + Sync,
{
    pub fn new(n: usize, s: usize, v: V, h: H) -> Self {
        FnDrive {
            n,
            s,
            v,
            h,
            breaks: Vec::new(),
        }
    }

    pub fn with_breakpoints(mut self, breaks: Vec<f64>) -> Self {
        self.breaks = breaks;
        self
    }
}

impl<V, H> Drive for FnDrive<V, H>
where
    V: Fn(f64) -> Result<DVector<f64>> + Send + Sync,
    H: Fn(f64) -> Result<SecondForm> + Send + Sync,
{
    fn n(&self) -> usize {
        self.n
    }

    fn s(&self) -> usize {
        self.s
    }

    fn velocity(&self, t: f64) -> Result<DVector<f64>> {
        (self.v)(t)
    }

    fn second_form(&self, t: f64) -> Result<SecondForm> {
        (self.h)(t)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breaks.clone()
    }
}

/// Starting point `p̃` and an orthonormal frame whose first `n` columns span
/// `T` and last `s` columns span `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSeed {
    point: Vec<f64>,
    frame: DMatrix<f64>,
    n: usize,
}

impl SplitSeed {
    pub fn new(ambient: &AmbientSpec, point: Vec<f64>, frame: DMatrix<f64>, n: usize) -> Result<Self> {
        let dim = ambient.dim();
        if point.len() != dim || frame.nrows() != dim || frame.ncols() != dim || n > dim {
            return Err(Error::Dimension(format!(
                "seed for a {dim}-dimensional ambient needs a point of length {dim} and a square frame"
            )));
        }
        let g = ambient.eval(&point)?;
        let dev = gram_deviation(&frame, &g);
        if !(dev <= SEED_TOL) {
            return Err(Error::Invalid(format!(
                "seed frame is not orthonormal (Gram deviation {dev:e})"
            )));
        }
        Ok(SplitSeed { point, frame, n })
    }

    pub fn point(&self) -> &[f64] {
        &self.point
    }

    pub fn frame(&self) -> &DMatrix<f64> {
        &self.frame
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> usize {
        self.frame.ncols() - self.n
    }
}

/// Integrates over `[t0, t1]`, restarting at every interior knot of `cuts`.
pub(crate) fn integrate_pieces(sys: &impl OdeSystem, y0: &[f64], cuts: &[f64], method: Method) -> Result<Trajectory> {
    let mut traj: Option<Trajectory> = None;
    let mut y = y0.to_vec();
    for w in cuts.windows(2) {
        if !(w[1] > w[0]) {
            continue;
        }
        let piece = integrate(sys, &y, w[0], w[1], method)?;
        y = piece.last().to_vec();
        match &mut traj {
            None => traj = Some(piece),
            Some(t) => t.append(&piece)?,
        }
    }
    Ok(traj.unwrap_or_else(|| Trajectory::constant(cuts[0], y0)))
}

fn merge_cuts(t0: f64, t1: f64, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = a.iter().chain(b).copied().filter(|&x| x > t0 && x < t1).collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out.insert(0, t0);
    out.push(t1);
    out
}

/// Frames of `T M` and `V` parallel along a base curve.
struct FrameTransportSystem<'a> {
    metric: &'a MetricField,
    bundle: Option<&'a BundleSpec>,
    curve: &'a Curve,
    k: usize,
    m: usize,
}

impl OdeSystem for FrameTransportSystem<'_> {
    fn dim(&self) -> usize {
        self.metric.dim() * self.k + self.bundle.map_or(0, |b| b.rank()) * self.m
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let n = self.metric.dim();
        let (x, xd) = self.curve.jet(t)?;
        let gamma = self.metric.christoffel(&x)?;
        let a = gamma.along(&xd);
        for c in 0..self.k {
            let v = &y[c * n..(c + 1) * n];
            for i in 0..n {
                dy[c * n + i] = -(0..n).map(|j| a[(i, j)] * v[j]).sum::<f64>();
            }
        }
        if let Some(bundle) = self.bundle {
            let s = bundle.rank();
            let w = bundle.along(&x, &xd)?;
            let off = n * self.k;
            for c in 0..self.m {
                let xi = &y[off + c * s..off + (c + 1) * s];
                for i in 0..s {
                    dy[off + c * s + i] = -(0..s).map(|j| w[(i, j)] * xi[j]).sum::<f64>();
                }
            }
        }
        Ok(())
    }
}

/// Tangent and bundle frames carried parallel along a curve on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct FrameTransport {
    traj: Trajectory,
    n: usize,
    k: usize,
    s: usize,
    m: usize,
}

impl FrameTransport {
    /// Transports the columns of `tangent` (`n × k`) by Levi-Civita and the
    /// columns of `fibre` (`s × m`) by the bundle connection.
    pub fn integrate(
        metric: &MetricField,
        bundle: Option<&BundleSpec>,
        curve: &Curve,
        tangent: &DMatrix<f64>,
        fibre: &DMatrix<f64>,
        method: Method,
    ) -> Result<Self> {
        let n = metric.dim();
        let s = bundle.map_or(0, |b| b.rank());
        if curve.dim() != n || tangent.nrows() != n || (fibre.ncols() > 0 && fibre.nrows() != s) {
            return Err(Error::Dimension("frame transport inputs have inconsistent dimensions".into()));
        }
        let (k, m) = (tangent.ncols(), if s == 0 { 0 } else { fibre.ncols() });
        let sys = FrameTransportSystem {
            metric,
            bundle,
            curve,
            k,
            m,
        };
        let mut y0: Vec<f64> = tangent.iter().copied().collect();
        if m > 0 {
            y0.extend(fibre.iter());
        }
        let traj = integrate_pieces(&sys, &y0, &curve.segments(0.0, 1.0), method)?;
        Ok(FrameTransport { traj, n, k, s, m })
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }

    fn split(&self, y: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let nk = self.n * self.k;
        (
            DMatrix::from_column_slice(self.n, self.k, &y[..nk]),
            DMatrix::from_column_slice(self.s, self.m, &y[nk..]),
        )
    }

    /// Transported tangent and bundle frames at `t`.
    pub fn frames(&self, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        self.split(&self.traj.eval(t))
    }

    pub fn tangent(&self, t: f64) -> DMatrix<f64> {
        self.frames(t).0
    }

    pub fn fibre(&self, t: f64) -> DMatrix<f64> {
        self.frames(t).1
    }
}

/// `P_{t1}^{t2}(γ) v0`. For `t1 > t2` the reversed curve is used.
pub fn parallel_transport(
    metric: &MetricField,
    curve: &Curve,
    v0: &DVector<f64>,
    t1: f64,
    t2: f64,
    method: Method,
) -> Result<DVector<f64>> {
    let n = metric.dim();
    if v0.len() != n || curve.dim() != n {
        return Err(Error::Dimension("vector and curve must match the metric dimension".into()));
    }
    if !(0.0..=1.0).contains(&t1) || !(0.0..=1.0).contains(&t2) {
        return Err(Error::Invalid(format!("transport times must lie in [0, 1], got {t1}, {t2}")));
    }
    if t1 == t2 {
        return Ok(v0.clone());
    }
    let (c, a, b) = if t1 < t2 {
        (curve.clone(), t1, t2)
    } else {
        (curve.reversed(), 1.0 - t1, 1.0 - t2)
    };
    let sys = FrameTransportSystem {
        metric,
        bundle: None,
        curve: &c,
        k: 1,
        m: 0,
    };
    let traj = integrate_pieces(&sys, v0.as_slice(), &c.segments(a, b), method)?;
    Ok(DVector::from_column_slice(traj.last()))
}

/// Solves the geodesic equation from `(x0, v0)` over `[0, 1]`.
pub fn geodesic(metric: &MetricField, x0: &[f64], v0: &[f64], method: Method) -> Result<Curve> {
    let n = metric.dim();
    if x0.len() != n || v0.len() != n {
        return Err(Error::Dimension("geodesic data must match the metric dimension".into()));
    }
    let sys = (2 * n, |_t: f64, y: &[f64], dy: &mut [f64]| {
        let (x, v) = y.split_at(n);
        let acc = metric.christoffel(x)?.contract(v, v);
        dy[..n].copy_from_slice(v);
        for c in 0..n {
            dy[n + c] = -acc[c];
        }
        Ok(())
    });
    let y0: Vec<f64> = x0.iter().chain(v0).copied().collect();
    let traj = integrate(&sys, &y0, 0.0, 1.0, method)?;
    Curve::from_state(Arc::new(traj), n)
}

/// A curve in an ambient chart together with a moving frame `Ẽ_A(t)`.
#[derive(Clone)]
pub struct DevelopmentResult {
    metric: MetricField,
    n: usize,
    traj: Trajectory,
    drift: f64,
    drive: Option<Arc<dyn Drive>>,
}

impl fmt::Debug for DevelopmentResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DevelopmentResult")
            .field("dim", &self.dim())
            .field("n", &self.n)
            .field("knots", &self.traj.len())
            .field("drift", &self.drift)
            .finish()
    }
}

impl DevelopmentResult {
    fn finish(
        metric: &MetricField,
        n: usize,
        traj: Trajectory,
        drive: Option<Arc<dyn Drive>>,
        bound: Option<f64>,
    ) -> Result<Self> {
        let mut res = DevelopmentResult {
            metric: metric.clone(),
            n,
            traj,
            drift: 0.0,
            drive,
        };
        let mut drift: f64 = 0.0;
        for i in 0..res.traj.len() {
            let y = res.traj.value(i);
            let (x, e) = res.split(y);
            let g = metric.eval(&x).map_err(|e| Error::ChartExit {
                t: res.traj.knots()[i],
                source: Box::new(e),
            })?;
            drift = drift.max(gram_deviation(&e, &g));
        }
        res.drift = drift;
        if let Some(bound) = bound {
            let span = res.traj.t1() - res.traj.t0();
            if drift > bound * span.max(1.0) {
                return Err(Error::Drift { drift, bound });
            }
        }
        Ok(res)
    }

    fn split(&self, y: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        let d = self.dim();
        (y[..d].to_vec(), DMatrix::from_column_slice(d, d, &y[d..]))
    }

    /// Ambient dimension `n + s`.
    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    /// Number of tangent frame vectors.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }

    pub fn drive(&self) -> Option<&Arc<dyn Drive>> {
        self.drive.as_ref()
    }

    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    /// Largest `|⟨Ẽ_A, Ẽ_B⟩ − δ_AB|` over all knots.
    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn point(&self, t: f64) -> Vec<f64> {
        self.traj.eval(t)[..self.dim()].to_vec()
    }

    /// Frame columns `Ẽ_A(t)` in chart components.
    pub fn frame(&self, t: f64) -> DMatrix<f64> {
        self.split(&self.traj.eval(t)).1
    }

    pub fn endpoint(&self) -> Vec<f64> {
        self.traj.last()[..self.dim()].to_vec()
    }

    pub fn end_frame(&self) -> DMatrix<f64> {
        self.split(self.traj.last()).1
    }

    /// `D_{t1}^{t2}`: expands `w` in `Ẽ(t1)` and re-emits the coefficients on `Ẽ(t2)`.
    pub fn d_map(&self, t1: f64, t2: f64, w: &DVector<f64>) -> Result<DVector<f64>> {
        if t1 == t2 {
            return Ok(w.clone());
        }
        let c = solve(&self.frame(t1), w, "development frame")?;
        Ok(self.frame(t2) * c)
    }

    /// `(t, γ̃(t))` at every knot.
    pub fn points(&self) -> impl Iterator<Item = (f64, Vec<f64>)> + '_ {
        let d = self.dim();
        (0..self.traj.len()).map(move |i| (self.traj.knots()[i], self.traj.value(i)[..d].to_vec()))
    }
}

struct DevelopSystem<'a, V> {
    metric: &'a MetricField,
    v: V,
    k: usize,
}

impl<V> OdeSystem for DevelopSystem<'_, V>
where
    V: Fn(f64) -> Result<DVector<f64>>,
{
    fn dim(&self) -> usize {
        let n = self.metric.dim();
        n + n * self.k
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let n = self.metric.dim();
        let v = (self.v)(t)?;
        let (x, e) = y.split_at(n);
        let mut xd = vec![0.0; n];
        for a in 0..self.k {
            for i in 0..n {
                xd[i] += v[a] * e[a * n + i];
            }
        }
        let m = self.metric.christoffel(x)?.along(&xd);
        dy[..n].copy_from_slice(&xd);
        for a in 0..self.k {
            for i in 0..n {
                dy[n + a * n + i] = -(0..n).map(|j| m[(i, j)] * e[a * n + j]).sum::<f64>();
            }
        }
        Ok(())
    }
}

/// Classical development of `t ↦ v(t)` (coefficients on `frame`) from `p`:
/// `γ'(t) = P_0^t(γ) v(t)`, realized by transporting the frame along `γ`.
pub fn develop<V>(
    metric: &MetricField,
    p: &[f64],
    frame: &DMatrix<f64>,
    v: V,
    breakpoints: &[f64],
    opts: &DevelopOptions,
) -> Result<DevelopmentResult>
where
    V: Fn(f64) -> Result<DVector<f64>>,
{
    let n = metric.dim();
    if p.len() != n || frame.nrows() != n || frame.ncols() != n {
        return Err(Error::Dimension("develop needs a point and a square frame of the metric's dimension".into()));
    }
    let g = metric.eval(p)?;
    let dev = gram_deviation(frame, &g);
    if !(dev <= SEED_TOL) {
        return Err(Error::Invalid(format!("frame is not orthonormal at p (Gram deviation {dev:e})")));
    }
    let sys = DevelopSystem { metric, v, k: n };
    let y0: Vec<f64> = p.iter().chain(frame.iter()).copied().collect();
    let traj = integrate_pieces(&sys, &y0, &merge_cuts(0.0, 1.0, breakpoints, &[]), opts.method)?;
    DevelopmentResult::finish(metric, n, traj, None, opts.drift_bound)
}

struct GeneralizedSystem<'a> {
    metric: &'a MetricField,
    drive: &'a dyn Drive,
    n: usize,
    project: bool,
}

impl OdeSystem for GeneralizedSystem<'_> {
    fn dim(&self) -> usize {
        let d = self.metric.dim();
        d + d * d
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let d = self.metric.dim();
        let n = self.n;
        let v = self.drive.velocity(t)?;
        let h = self.drive.second_form(t)?;
        if !h.is_finite() || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("development samplers at t = {t}"),
            });
        }
        let (x, e) = y.split_at(d);
        let col = |a: usize| &e[a * d..(a + 1) * d];
        let mut xd = vec![0.0; d];
        for a in 0..n {
            for (i, xi) in xd.iter_mut().enumerate() {
                *xi += v[a] * col(a)[i];
            }
        }
        let m = self.metric.christoffel(x)?.along(&xd);
        let coupling = h.contract_velocity(&v);
        dy[..d].copy_from_slice(&xd);
        for big_a in 0..d {
            let ea = col(big_a);
            for i in 0..d {
                let mut acc = -(0..d).map(|j| m[(i, j)] * ea[j]).sum::<f64>();
                if big_a < n {
                    // Ẽ_a' += h^α_ab v_b Ẽ_α
                    for alpha in 0..d - n {
                        acc += coupling[(big_a, alpha)] * col(n + alpha)[i];
                    }
                } else {
                    // Ẽ_α' −= h^α_ab v_b Ẽ_a
                    let alpha = big_a - n;
                    for a in 0..n {
                        acc -= coupling[(a, alpha)] * col(a)[i];
                    }
                }
                dy[d + big_a * d + i] = acc;
            }
        }
        Ok(())
    }

    fn post_step(&self, _t: f64, y: &mut [f64]) {
        if !self.project {
            return;
        }
        let d = self.metric.dim();
        let Ok(g) = self.metric.eval(&y[..d]) else { return };
        let e = DMatrix::from_column_slice(d, d, &y[d..]);
        if let Ok(q) = orthonormalize(&e, &g) {
            y[d..].copy_from_slice(q.as_slice());
        }
    }
}

/// Integrates the generalized development of `(ṽ, h̃)` from `seed`:
/// `γ̃' = v_a Ẽ_a`, `∇̃_t Ẽ_a = h^α_{ab} v_b Ẽ_α`, `∇̃_t Ẽ_α = −h^α_{ab} v_b Ẽ_a`.
pub fn generalized_develop(
    ambient: &AmbientSpec,
    seed: &SplitSeed,
    drive: Arc<dyn Drive>,
    opts: &DevelopOptions,
) -> Result<DevelopmentResult> {
    let d = ambient.dim();
    if drive.n() != seed.n() || drive.n() + drive.s() != d {
        return Err(Error::Dimension(format!(
            "drive has n = {}, s = {} but the seed splits a {d}-dimensional space as {} + {}",
            drive.n(),
            drive.s(),
            seed.n(),
            seed.s()
        )));
    }
    let sys = GeneralizedSystem {
        metric: ambient.metric(),
        drive: drive.as_ref(),
        n: seed.n(),
        project: opts.reorthonormalize,
    };
    let y0: Vec<f64> = seed.point().iter().chain(seed.frame().iter()).copied().collect();
    let cuts = merge_cuts(0.0, 1.0, &drive.breakpoints(), &[]);
    let traj = integrate_pieces(&sys, &y0, &cuts, opts.method)?;
    DevelopmentResult::finish(ambient.metric(), seed.n(), traj, Some(drive), opts.drift_bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charts::ScalarField;
    use std::f64::consts::PI;

    fn sphere_metric() -> MetricField {
        MetricField::parse(2, |a, b| match (a, b) {
            (0, 0) => "1".into(),
            (1, 1) => "sin(x1)^2".into(),
            _ => "0".into(),
        })
        .unwrap()
    }

    fn norm(g: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
        (v.transpose() * g * v)[(0, 0)].sqrt()
    }

    #[test]
    fn flat_transport_is_identity() {
        let g = MetricField::euclidean(3);
        let c = Curve::expr(&["x1^2", "sin(3*x1)", "1 - x1"]).unwrap();
        let v = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        let w = parallel_transport(&g, &c, &v, 0.0, 1.0, Method::default()).unwrap();
        assert!((w - v).amax() < 1e-15);
    }

    #[test]
    fn latitude_holonomy() {
        let theta = PI / 3.0;
        let g = sphere_metric();
        let c = Curve::expr(&[&format!("{theta}"), "2*pi*x1"]).unwrap();
        let v = DVector::from_vec(vec![1.0, 0.0]);
        let w = parallel_transport(&g, &c, &v, 0.0, 1.0, Method::default()).unwrap();
        // in the orthonormal frame (∂θ, ∂φ / sin θ) the vector turns by 2π cos θ
        let angle = (w[1] * theta.sin()).atan2(w[0]);
        let expected = 2.0 * PI * theta.cos();
        let diff = (angle - expected).rem_euclid(2.0 * PI);
        assert!(diff.min(2.0 * PI - diff) < 1e-6, "angle {angle}");
    }

    #[test]
    fn transport_then_reverse_is_identity() {
        let g = sphere_metric();
        let c = Curve::expr(&["1 + 0.3*sin(2*x1)", "3*x1"]).unwrap();
        let v = DVector::from_vec(vec![0.4, 0.7]);
        let w = parallel_transport(&g, &c, &v, 0.0, 1.0, Method::default()).unwrap();
        let back = parallel_transport(&g, &c, &w, 1.0, 0.0, Method::default()).unwrap();
        assert!((back - &v).amax() < 1e-8);
        let gx = g.eval(&c.end().unwrap()).unwrap();
        let g0 = g.eval(&c.start().unwrap()).unwrap();
        assert!((norm(&gx, &w) - norm(&g0, &v)).abs() < 1e-9);
    }

    #[test]
    fn flat_develop_is_a_line() {
        let g = MetricField::euclidean(2);
        let res = develop(
            &g,
            &[1.0, 2.0],
            &DMatrix::identity(2, 2),
            |_| Ok(DVector::from_vec(vec![1.0, 0.0])),
            &[],
            &DevelopOptions::default(),
        )
        .unwrap();
        let end = res.endpoint();
        assert!((end[0] - 2.0).abs() < 1e-12 && (end[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn circle_development() {
        // n = 1, s = 1, κ = 1: the unit circle through p̃.
        let amb = AmbientSpec::euclidean(2);
        let seed = SplitSeed::new(&amb, vec![0.5, -1.0], DMatrix::identity(2, 2), 1).unwrap();
        let drive = ConstantDrive {
            v: DVector::from_vec(vec![1.0]),
            h: SecondForm::from_fn(1, 1, |_, _, _| 1.0),
        };
        let res = generalized_develop(&amb, &seed, Arc::new(drive), &DevelopOptions::default()).unwrap();
        for t in [0.25, 0.5, 1.0] {
            let x = res.point(t);
            assert!((x[0] - 0.5 - t.sin()).abs() < 1e-12);
            assert!((x[1] + 1.0 - (1.0 - t.cos())).abs() < 1e-12);
        }
        assert!(res.drift() < 1e-12);
    }

    #[test]
    fn d_map_is_an_isometry() {
        let amb = AmbientSpec::new(
            MetricField::parse(3, |a, b| if a == b { "1 + 0.1*x1^2 + 0.2*x2^2".into() } else { "0".into() }).unwrap(),
        );
        let g0 = amb.eval(&[0.0, 0.0, 0.0]).unwrap();
        let seed = SplitSeed::new(&amb, vec![0.0; 3], orthonormalize(&DMatrix::identity(3, 3), &g0).unwrap(), 2).unwrap();
        let drive = FnDrive::new(
            2,
            1,
            |t| Ok(DVector::from_vec(vec![1.0, t])),
            |t| Ok(SecondForm::from_fn(2, 1, |_, a, b| if a == b { 0.5 + t } else { 0.2 })),
        );
        let res = generalized_develop(&amb, &seed, Arc::new(drive), &DevelopOptions::default()).unwrap();
        assert!(res.drift() < 1e-8);
        let w = DVector::from_vec(vec![0.3, -0.4, 1.2]);
        let gw = amb.eval(&res.point(0.3)).unwrap();
        let u = res.d_map(0.3, 0.9, &w).unwrap();
        let gu = amb.eval(&res.point(0.9)).unwrap();
        assert!((norm(&gw, &w) - norm(&gu, &u)).abs() < 1e-9);
        assert_eq!(res.d_map(0.4, 0.4, &w).unwrap(), w);
    }

    #[test]
    fn geodesic_on_sphere_has_expected_length() {
        let g = sphere_metric();
        let c = geodesic(&g, &[1.0, 0.0], &[0.0, 0.8 / 1.0f64.sin()], Method::default()).unwrap();
        // speed stays 0.8
        for t in [0.0, 0.5, 1.0] {
            let (x, v) = c.jet(t).unwrap();
            let gx = g.eval(&x).unwrap();
            assert!((norm(&gx, &DVector::from_vec(v)) - 0.8).abs() < 1e-10);
        }
    }

    #[test]
    fn seed_must_be_orthonormal() {
        let amb = AmbientSpec::euclidean(2);
        assert!(SplitSeed::new(&amb, vec![0.0, 0.0], DMatrix::identity(2, 2) * 1.001, 1).is_err());
        let _ = ScalarField::constant(1.0, 1);
    }
}
