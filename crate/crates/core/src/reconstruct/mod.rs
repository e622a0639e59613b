//! Pointwise reconstruction `f(γ(1)) = γ̃(1)`, sampled immersions and the
//! path-independence audit.

mod align;
mod export;
mod problem;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand_core::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use rayon::prelude::*;

pub use align::{align_rigid, Alignment};
pub use export::{write_csv, write_json, write_obj};
pub use problem::{PointSeed, Problem, Seed, SubmanifoldSeed, PHI_TOL, PSI_TOL, SIGMA_TOL};

use crate::charts::SecondFundamentalField;
use crate::error::{Error, Result};
use crate::fundeq::{json_array, json_f64, residuals, ResidualReport, TauMap};
use crate::tensor::{block_diag, inverse, orthonormalize, SecondForm};
use crate::transport::{generalized_develop, geodesic, Curve, DevelopOptions, DevelopmentResult, Drive, FrameTransport};

/// `ṽ` and `h̃` read off a base curve through parallel frames:
/// `v_a(t) = ⟨γ'(t), E_a(t)⟩` and `h^β_{ab}(t) = ⟨h(E_a, E_b), E_β⟩` at `γ(t)`.
struct ReconstructDrive {
    curve: Curve,
    frames: FrameTransport,
    h: SecondFundamentalField,
}

impl Drive for ReconstructDrive {
    fn n(&self) -> usize {
        self.h.n()
    }

    fn s(&self) -> usize {
        self.h.s()
    }

    fn velocity(&self, t: f64) -> Result<DVector<f64>> {
        let et = self.frames.tangent(t);
        let v = DVector::from_vec(self.curve.velocity(t)?);
        inverse(&et, "transported tangent frame").map(|m| m * v)
    }

    fn second_form(&self, t: f64) -> Result<SecondForm> {
        let (et, eb) = self.frames.frames(t);
        let x = self.curve.eval(t)?;
        let eb_inv = inverse(&eb, "transported bundle frame")?;
        Ok(self.h.eval(&x)?.transform(&et, &eb_inv))
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.curve.breakpoints()
    }
}

/// Output of [`reconstruct_point`].
#[derive(Debug, Clone)]
pub struct PointResult {
    /// `f(γ(1))` in ambient chart coordinates.
    pub point: Vec<f64>,
    pub tau: TauMap,
    pub residuals: ResidualReport,
    pub development: DevelopmentResult,
}

/// Develops `curve` and returns `γ̃(1)`, `τ_γ` and the residuals at `γ(1)`.
///
/// `τ_γ` is read off the constructive frames: the base frames transported
/// to `γ(1)` are sent to the development's frame at `t = 1`.
pub fn reconstruct_point(problem: &Problem, curve: &Curve, opts: &DevelopOptions) -> Result<PointResult> {
    if curve.dim() != problem.n() {
        return Err(Error::Dimension(format!(
            "curve has dimension {}, base has {}",
            curve.dim(),
            problem.n()
        )));
    }
    let x0 = curve.start()?;
    let seed = problem.point_seed_at(&x0)?;
    let (et, eb) = problem.base_frames(&seed.p)?;
    let frames = FrameTransport::integrate(&problem.base, Some(&problem.bundle), curve, &et, &eb, opts.method)?;
    let split = problem.split_seed(&seed)?;
    let drive = Arc::new(ReconstructDrive {
        curve: curve.clone(),
        frames,
        h: problem.h.clone(),
    });
    let dev = generalized_develop(&problem.ambient, &split, drive.clone(), opts)?;
    let (et1, eb1) = drive.frames.frames(1.0);
    let tau = TauMap {
        x: curve.end()?,
        target: dev.endpoint(),
        base_frame: block_diag(&et1, &eb1),
        ambient_frame: dev.end_frame(),
        n: problem.n(),
    };
    tau.check(problem)?;
    let residuals = residuals(problem, &tau, "curve")?;
    Ok(PointResult {
        point: dev.endpoint(),
        tau,
        residuals,
        development: dev,
    })
}

/// Node layout of a two-dimensional grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    /// Node `(i, j)` sits at the chart point `(u_i, w_j)`.
    Rect,
    /// Axis 1 is an angle and axis 2 a radius around the seed point.
    Polar,
}

/// How the curve from the seed to a grid node is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvePolicy {
    /// Straight chart segment from `p`.
    Radial,
    /// `p → (x1, p2, …) → x` with smoothstep legs.
    Polyline,
    /// Normal geodesic from a submanifold seed curve: axis 1 is the curve
    /// parameter, axis 2 the signed geodesic offset.
    Normal,
}

impl CurvePolicy {
    pub fn name(self) -> &'static str {
        match self {
            CurvePolicy::Radial => "radial",
            CurvePolicy::Polyline => "polyline",
            CurvePolicy::Normal => "normal",
        }
    }
}

impl std::str::FromStr for CurvePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "radial" => Ok(CurvePolicy::Radial),
            "polyline" => Ok(CurvePolicy::Polyline),
            "normal" => Ok(CurvePolicy::Normal),
            other => Err(Error::Invalid(format!("unknown curve policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub kind: GridKind,
    pub ranges: [(f64, f64); 2],
    pub counts: [usize; 2],
}

impl GridSpec {
    pub fn rect(ranges: [(f64, f64); 2], counts: [usize; 2]) -> Self {
        GridSpec {
            kind: GridKind::Rect,
            ranges,
            counts,
        }
    }

    /// `angles` × `radii` around the seed point.
    pub fn polar(angles: (f64, f64), radii: (f64, f64), counts: [usize; 2]) -> Self {
        GridSpec {
            kind: GridKind::Polar,
            ranges: [angles, radii],
            counts,
        }
    }

    /// Parameter of node `k` on axis `axis`, endpoints included.
    pub fn param(&self, axis: usize, k: usize) -> f64 {
        let (lo, hi) = self.ranges[axis];
        let m = self.counts[axis];
        if m == 1 {
            lo
        } else {
            lo + (hi - lo) * k as f64 / (m - 1) as f64
        }
    }

    pub fn len(&self) -> usize {
        self.counts[0] * self.counts[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quads `(i, j), (i+1, j), (i+1, j+1), (i, j+1)` as record indices.
    pub fn faces(&self) -> Vec<[usize; 4]> {
        let [na, nb] = self.counts;
        let mut out = Vec::new();
        for i in 0..na.saturating_sub(1) {
            for j in 0..nb.saturating_sub(1) {
                let k = i * nb + j;
                out.push([k, k + nb, k + nb + 1, k + 1]);
            }
        }
        out
    }
}

/// One grid node.
#[derive(Debug, Clone)]
pub struct GridRecord {
    pub index: [usize; 2],
    /// Base chart point `γ(1)`, when the curve could be built.
    pub base: Option<Vec<f64>>,
    /// Description of the curve used.
    pub curve: String,
    pub result: std::result::Result<PointResult, String>,
}

impl GridRecord {
    pub fn is_valid(&self) -> bool {
        self.result.is_ok()
    }

    pub fn point(&self) -> Option<&[f64]> {
        self.result.as_ref().ok().map(|r| r.point.as_slice())
    }
}

/// Sampled immersion with quad connectivity over record indices.
#[derive(Debug, Clone)]
pub struct ImmersionSample {
    pub grid: GridSpec,
    pub policy: CurvePolicy,
    pub records: Vec<GridRecord>,
    pub faces: Vec<[usize; 4]>,
}

impl ImmersionSample {
    pub fn valid_count(&self) -> usize {
        self.records.iter().filter(|r| r.is_valid()).count()
    }

    /// Ambient dimension, from the first valid record.
    pub fn ambient_dim(&self) -> Option<usize> {
        self.records.iter().find_map(|r| r.point().map(<[f64]>::len))
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn is_zero(v: &[f64]) -> bool {
    v.iter().all(|x| *x == 0.0)
}

/// Unit normal of a seed curve in a 2D base, on the left of its tangent.
fn curve_normal(problem: &Problem, seed: &SubmanifoldSeed, u: f64) -> Result<(Vec<f64>, DVector<f64>)> {
    let x = seed.point(&[u])?;
    let ds = seed.tangent(&[u])?;
    let g = problem.base.eval(&x)?;
    let basis = DMatrix::from_column_slice(2, 2, &[ds[(0, 0)], ds[(1, 0)], -ds[(1, 0)], ds[(0, 0)]]);
    let frame = orthonormalize(&basis, &g)?;
    Ok((x, frame.column(1).into_owned()))
}

/// The chart node and the curve leading to it.
fn node_curve(problem: &Problem, grid: &GridSpec, policy: CurvePolicy, i: usize, j: usize, opts: &DevelopOptions) -> Result<(Curve, String)> {
    let (a, b) = (grid.param(0, i), grid.param(1, j));
    if policy == CurvePolicy::Normal {
        let Seed::Submanifold(ss) = &problem.seed else {
            return Err(Error::Invalid("the normal policy needs a submanifold seed".into()));
        };
        if problem.n() != 2 || ss.r() != 1 || grid.kind != GridKind::Rect {
            return Err(Error::Invalid(
                "the normal policy needs a curve seed in a 2D base and a rectangular grid".into(),
            ));
        }
        let (x0, nu) = curve_normal(problem, ss, a)?;
        let v0: Vec<f64> = nu.iter().map(|c| c * b).collect();
        let curve = if b == 0.0 {
            Curve::constant(x0)
        } else {
            geodesic(&problem.base, &x0, &v0, opts.method)?
        };
        return Ok((curve, format!("normal u={a} t={b}")));
    }
    let Seed::Point(ps) = &problem.seed else {
        return Err(Error::Invalid(format!("the {} policy needs a point seed", policy.name())));
    };
    let p = ps.p.clone();
    let mut x = p.clone();
    match grid.kind {
        GridKind::Rect => {
            if p.len() != 2 {
                return Err(Error::Dimension("grids need a 2D base".into()));
            }
            x = vec![a, b];
        }
        GridKind::Polar => {
            if p.len() < 2 {
                return Err(Error::Dimension("polar grids need at least 2 dimensions".into()));
            }
            x[0] += b * a.cos();
            x[1] += b * a.sin();
        }
    }
    let curve = match policy {
        CurvePolicy::Radial if is_zero(&sub(&x, &p)) => Curve::constant(p),
        CurvePolicy::Radial => Curve::line(p, x.clone())?,
        _ => {
            let mut corner = x.clone();
            corner[1..].copy_from_slice(&p[1..]);
            let mut pts = vec![p];
            for q in [corner, x.clone()] {
                if !is_zero(&sub(&q, pts.last().expect("nonempty"))) {
                    pts.push(q);
                }
            }
            if pts.len() == 1 {
                Curve::constant(pts.pop().expect("nonempty"))
            } else {
                Curve::polyline(pts)?
            }
        }
    };
    Ok((curve, format!("{} to {x:?}", policy.name())))
}

fn run_node(problem: &Problem, grid: &GridSpec, policy: CurvePolicy, i: usize, j: usize, opts: &DevelopOptions) -> GridRecord {
    let id = format!("{i},{j}");
    let mut rec = GridRecord {
        index: [i, j],
        base: None,
        curve: String::new(),
        result: Err(String::new()),
    };
    let (curve, desc) = match node_curve(problem, grid, policy, i, j, opts) {
        Ok(c) => c,
        Err(e) => {
            rec.result = Err(e.to_string());
            return rec;
        }
    };
    rec.curve = desc;
    rec.base = curve.end().ok();
    rec.result = reconstruct_point(problem, &curve, opts)
        .map(|mut r| {
            r.residuals.curve_id = id;
            r
        })
        .map_err(|e| e.to_string());
    rec
}

/// Reconstructs every node of a 2D grid. Failing nodes are recorded with
/// their error. `jobs = 0` uses rayon's default pool size.
pub fn reconstruct_grid(
    problem: &Problem,
    grid: &GridSpec,
    policy: CurvePolicy,
    opts: &DevelopOptions,
    jobs: usize,
) -> Result<ImmersionSample> {
    if grid.counts.contains(&0) {
        return Err(Error::Invalid("grid counts must be positive".into()));
    }
    let nodes: Vec<(usize, usize)> = (0..grid.counts[0])
        .flat_map(|i| (0..grid.counts[1]).map(move |j| (i, j)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    let records = pool.install(|| {
        nodes
            .par_iter()
            .map(|&(i, j)| run_node(problem, grid, policy, i, j, opts))
            .collect()
    });
    Ok(ImmersionSample {
        grid: grid.clone(),
        policy,
        records,
        faces: grid.faces(),
    })
}

/// Uniform doubles from a seeded PCG generator.
pub(crate) struct UnitRng(Pcg64);

impl UnitRng {
    pub(crate) fn new(seed: u64) -> Self {
        UnitRng(Pcg64::seed_from_u64(seed))
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub(crate) fn next_f64(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub(crate) fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

/// Number of in-chart checks per candidate audit curve.
const AUDIT_SAMPLES: usize = 65;
/// Total number of rejected candidate curves allowed per audit.
pub const AUDIT_RETRIES: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub target: Vec<f64>,
    pub k: usize,
    /// Largest pairwise Euclidean distance between endpoints.
    pub spread: f64,
    pub endpoints: Vec<Vec<f64>>,
}

impl AuditReport {
    pub fn to_json(&self) -> String {
        let eps: Vec<String> = self.endpoints.iter().map(|e| json_array(e)).collect();
        format!(
            "{{\"target\": {}, \"k\": {}, \"spread\": {}, \"endpoints\": [{}]}}",
            json_array(&self.target),
            self.k,
            json_f64(self.spread),
            eps.join(", ")
        )
    }
}

/// Random cubic curves from the seed point to `target`, kept when 65
/// samples lie in the chart.
pub fn audit_curves(problem: &Problem, target: &[f64], k: usize, rng_seed: u64) -> Result<Vec<Curve>> {
    let p = match &problem.seed {
        Seed::Point(ps) => ps.p.clone(),
        Seed::Submanifold(ss) => {
            let mid: Vec<f64> = ss.ranges().iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
            ss.point(&mid)?
        }
    };
    let n = problem.n();
    if target.len() != n {
        return Err(Error::Dimension(format!("target must have {n} components")));
    }
    let mut rng = UnitRng::new(rng_seed);
    let mut curves = Vec::with_capacity(k);
    let mut rejected = 0;
    while curves.len() < k {
        let c0: Vec<f64> = (0..n).map(|_| rng.uniform(-0.5, 0.5)).collect();
        let c1: Vec<f64> = (0..n).map(|_| rng.uniform(-0.5, 0.5)).collect();
        let curve = Curve::cubic(p.clone(), target.to_vec(), c0, c1)?;
        let inside = (0..AUDIT_SAMPLES).all(|i| {
            let t = i as f64 / (AUDIT_SAMPLES - 1) as f64;
            curve.eval(t).is_ok_and(|x| problem.base.eval(&x).is_ok())
        });
        if inside {
            curves.push(curve);
        } else {
            rejected += 1;
            if rejected > AUDIT_RETRIES {
                return Err(Error::RetryBudget(format!(
                    "only {} of {k} audit curves stayed in the chart",
                    curves.len()
                )));
            }
        }
    }
    Ok(curves)
}

/// Develops `k` random curves ending at `target` and measures how far apart
/// their endpoints land.
pub fn path_independence_audit(
    problem: &Problem,
    target: &[f64],
    k: usize,
    rng_seed: u64,
    opts: &DevelopOptions,
) -> Result<AuditReport> {
    if k < 2 {
        return Err(Error::Invalid("the audit needs at least 2 curves".into()));
    }
    let curves = audit_curves(problem, target, k, rng_seed)?;
    let endpoints: Vec<Vec<f64>> = curves
        .par_iter()
        .map(|c| reconstruct_point(problem, c, opts).map(|r| r.point))
        .collect::<Result<_>>()?;
    let mut spread: f64 = 0.0;
    for (i, a) in endpoints.iter().enumerate() {
        for b in &endpoints[i + 1..] {
            let d = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            spread = spread.max(d);
        }
    }
    Ok(AuditReport {
        target: target.to_vec(),
        k,
        spread,
        endpoints,
    })
}
