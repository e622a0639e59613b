//! The isometry `τ_γ` and the Gauss, Codazzi and Ricci residuals.

use nalgebra::{DMatrix, DVector};

use crate::charts::{BundleSpec, MetricField, SecondFundamentalField};
use crate::error::{Error, Result};
use crate::odeint::Method;
use crate::reconstruct::Problem;
use crate::tensor::{block_diag, gram_deviation, inverse, solve, SecondForm, Tensor4};
use crate::transport::{Curve, DevelopmentResult, FrameTransport};

/// Tolerance of the Gram test on `τ`.
pub const TAU_TOL: f64 = 1e-9;

/// `τ_γ: T_xM ⊕ V_x → T_{γ̃(1)}M̃`, stored on an orthonormal frame: column
/// `A` of `ambient_frame` is the image of column `A` of `base_frame`.
#[derive(Debug, Clone, PartialEq)]
pub struct TauMap {
    pub x: Vec<f64>,
    pub target: Vec<f64>,
    /// Orthonormal frame of `T_xM ⊕ V_x` (tangent block first), chart components.
    pub base_frame: DMatrix<f64>,
    /// Images of `base_frame` in chart components at `target`.
    pub ambient_frame: DMatrix<f64>,
    pub n: usize,
}

impl TauMap {
    /// The map on chart components: `ambient_frame · base_frame⁻¹`.
    pub fn coordinate_matrix(&self) -> Result<DMatrix<f64>> {
        Ok(&self.ambient_frame * inverse(&self.base_frame, "base frame")?)
    }

    pub fn apply(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(&self.ambient_frame * solve(&self.base_frame, w, "base frame")?)
    }

    /// `max |τᵀ G̃ τ − (g ⊕ 𝔥)|` in coordinates.
    pub fn gram_defect(&self, problem: &Problem) -> Result<f64> {
        let t = self.coordinate_matrix()?;
        let gt = problem.ambient.eval(&self.target)?;
        let g = problem.block_metric(&self.x)?;
        Ok((t.transpose() * gt * t - g).amax())
    }

    /// Largest deviation of the image frame from orthonormality.
    pub fn frame_defect(&self, problem: &Problem) -> Result<f64> {
        Ok(gram_deviation(&self.ambient_frame, &problem.ambient.eval(&self.target)?))
    }

    pub fn check(&self, problem: &Problem) -> Result<()> {
        let d = self.gram_defect(problem)?;
        if d > TAU_TOL {
            return Err(Error::Drift { drift: d, bound: TAU_TOL });
        }
        Ok(())
    }

    /// Re-expresses the map on the rotated frame `base_frame · diag(qt, qb)`.
    pub fn reframed(&self, qt: &DMatrix<f64>, qb: &DMatrix<f64>) -> TauMap {
        let q = block_diag(qt, qb);
        TauMap {
            base_frame: &self.base_frame * &q,
            ambient_frame: &self.ambient_frame * &q,
            ..self.clone()
        }
    }

    /// The bundle block `f̃ = τ|_V` as images of the orthonormal bundle frame.
    pub fn bundle_images(&self) -> DMatrix<f64> {
        self.ambient_frame.columns(self.n, self.ambient_frame.ncols() - self.n).into_owned()
    }
}

/// `τ_γ = D_0^1(γ̃) ∘ φ ∘ P_1^0(γ)`, each factor computed separately: the
/// base frame at `γ(1)` is transported back to `γ(0)`, mapped by the seed
/// isometry, and carried forward along the development.
pub fn tau_gamma(problem: &Problem, curve: &Curve, dev: &DevelopmentResult, method: Method) -> Result<TauMap> {
    let x = curve.end()?;
    let x0 = curve.start()?;
    let seed = problem.point_seed_at(&x0)?;
    let (et, eb) = problem.base_frames(&x)?;
    let back = FrameTransport::integrate(&problem.base, Some(&problem.bundle), &curve.reversed(), &et, &eb, method)?;
    let (bt, bb) = back.frames(1.0);
    let at_start = seed.phi * block_diag(&bt, &bb);
    let mut images = DMatrix::zeros(problem.dim(), problem.dim());
    for a in 0..problem.dim() {
        images.set_column(a, &dev.d_map(0.0, 1.0, &at_start.column(a).into_owned())?);
    }
    Ok(TauMap {
        x,
        target: dev.endpoint(),
        base_frame: block_diag(&et, &eb),
        ambient_frame: images,
        n: problem.n(),
    })
}

/// Weingarten operator `A_ξ = g⁻¹ ⟨h, ξ⟩_𝔥` on coordinate tangent vectors;
/// `ξ` is given in the local bundle frame.
pub fn weingarten(
    h: &SecondFundamentalField,
    metric: &MetricField,
    bundle: &BundleSpec,
    xi: &DVector<f64>,
    x: &[f64],
) -> Result<DMatrix<f64>> {
    let g = metric.eval(x)?;
    let frak = bundle.frak(x)?;
    let hv = h.eval(x)?;
    let w = frak * xi;
    let n = metric.dim();
    let hx = DMatrix::from_fn(n, n, |a, b| (0..hv.s()).map(|alpha| hv.get(alpha, a, b) * w[alpha]).sum());
    let chol = g.cholesky().ok_or_else(|| Error::Singular(format!("metric at {x:?}")))?;
    Ok(chol.solve(&hx))
}

/// Per-equation sup-norms at the endpoint of one curve.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub curve_id: String,
    pub point: Vec<f64>,
    pub gauss: f64,
    pub codazzi: f64,
    pub ricci: f64,
}

pub fn json_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:e}")
    } else {
        "null".to_string()
    }
}

pub fn json_array(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| json_f64(*x)).collect();
    format!("[{}]", items.join(", "))
}

pub fn json_string(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.gauss.max(self.codazzi).max(self.ricci)
    }

    /// JSON fields without the enclosing braces.
    pub fn json_fields(&self) -> String {
        format!(
            "\"curve_id\": {}, \"point\": {}, \"gauss\": {}, \"codazzi\": {}, \"ricci\": {}",
            json_string(&self.curve_id),
            json_array(&self.point),
            json_f64(self.gauss),
            json_f64(self.codazzi),
            json_f64(self.ricci)
        )
    }

    pub fn to_json(&self) -> String {
        format!("{{{}}}", self.json_fields())
    }
}

/// Frame components of everything the three equations need.
struct FrameData {
    n: usize,
    s: usize,
    r: Tensor4,
    rt: Tensor4,
    rv: Tensor4,
    h: SecondForm,
    dh: Vec<SecondForm>,
}

impl FrameData {
    fn new(problem: &Problem, tau: &TauMap) -> Result<Self> {
        let (n, s) = (problem.n(), problem.s());
        let x = &tau.x;
        let et = tau.base_frame.view((0, 0), (n, n)).into_owned();
        let eb = tau.base_frame.view((n, n), (s, s)).into_owned();
        let eb_inv = inverse(&eb, "bundle frame")?;
        let r = problem.base.riemann(x)?.tensor().on_frames([&et, &et, &et, &et]);
        let rt = problem
            .ambient
            .riemann(&tau.target)?
            .tensor()
            .on_frames([&tau.ambient_frame, &tau.ambient_frame, &tau.ambient_frame, &tau.ambient_frame]);
        let rv = problem.bundle.curvature(x)?.tensor().on_frames([&eb, &eb, &et, &et]);
        let h = problem.h.eval(x)?.transform(&et, &eb_inv);
        let dh_coord = problem.h.covariant_derivative_at(x, &problem.base, &problem.bundle)?;
        // (∇_{E_c} h)(E_a, E_b) in the orthonormal bundle frame
        let dh = (0..n)
            .map(|c| {
                let mut acc = SecondForm::zeros(n, s);
                for (k, d) in dh_coord.iter().enumerate() {
                    if et[(k, c)] != 0.0 {
                        acc.axpy(et[(k, c)], d);
                    }
                }
                acc.transform(&et, &eb_inv)
            })
            .collect();
        Ok(FrameData { n, s, r, rt, rv, h, dh })
    }

    fn gauss(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let mut hh = 0.0;
                        for alpha in 0..self.s {
                            hh += self.h.get(alpha, a, d) * self.h.get(alpha, b, c)
                                - self.h.get(alpha, a, c) * self.h.get(alpha, b, d);
                        }
                        let res = self.r.get(a, b, c, d) - self.rt.get(a, b, c, d) - hh;
                        worst = worst.max(res.abs());
                    }
                }
            }
        }
        worst
    }

    fn codazzi(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for alpha in 0..self.s {
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        let lhs = self.dh[a].get(alpha, b, c) - self.dh[b].get(alpha, a, c);
                        let res = lhs - self.rt.get(c, n + alpha, a, b);
                        worst = worst.max(res.abs());
                    }
                }
            }
        }
        worst
    }

    fn ricci(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for alpha in 0..self.s {
            for beta in 0..self.s {
                for a in 0..n {
                    for b in 0..n {
                        // ⟨A_ξ E_b, A_η E_a⟩ − ⟨A_η E_b, A_ξ E_a⟩
                        let mut aa = 0.0;
                        for c in 0..n {
                            aa += self.h.get(alpha, b, c) * self.h.get(beta, a, c)
                                - self.h.get(beta, b, c) * self.h.get(alpha, a, c);
                        }
                        let res = self.rv.get(alpha, beta, a, b) - self.rt.get(n + alpha, n + beta, a, b) - aa;
                        worst = worst.max(res.abs());
                    }
                }
            }
        }
        worst
    }
}

/// `sup |R − τ*R̃ − (⟨h(X,W),h(Y,Z)⟩ − ⟨h(X,Z),h(Y,W)⟩)|` over frame indices.
pub fn gauss_residual(problem: &Problem, tau: &TauMap) -> Result<f64> {
    Ok(FrameData::new(problem, tau)?.gauss())
}

/// `sup |(D_X h)(Y,Z) − (D_Y h)(X,Z) − (τ*R̃)(Z,ξ,X,Y)|` over frame indices.
pub fn codazzi_residual(problem: &Problem, tau: &TauMap) -> Result<f64> {
    Ok(FrameData::new(problem, tau)?.codazzi())
}

/// `sup |R^V(ξ,η,X,Y) − (τ*R̃)(ξ,η,X,Y) − ⟨A_ξY,A_ηX⟩ + ⟨A_ηY,A_ξX⟩|` over frame indices.
pub fn ricci_residual(problem: &Problem, tau: &TauMap) -> Result<f64> {
    Ok(FrameData::new(problem, tau)?.ricci())
}

/// All three residuals, sharing one evaluation of the curvature data.
pub fn residuals(problem: &Problem, tau: &TauMap, curve_id: &str) -> Result<ResidualReport> {
    let fd = FrameData::new(problem, tau)?;
    let report = ResidualReport {
        curve_id: curve_id.to_string(),
        point: tau.x.clone(),
        gauss: fd.gauss(),
        codazzi: fd.codazzi(),
        ricci: fd.ricci(),
    };
    if [report.gauss, report.codazzi, report.ricci].iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: format!("residuals at {:?}", tau.x),
        });
    }
    Ok(report)
}
