//! Abstract Riemannian vector bundles over a chart and candidate second
//! fundamental forms with values in them.

use nalgebra::DMatrix;

use super::expr::ScalarField;
use super::metric::{check_positive_definite, Christoffel, CurvatureValue, MetricField};
use crate::error::{Error, Result};
use crate::tensor::{sym_index, sym_len, SecondForm, Tensor4};

/// Tolerance of the metric-compatibility check `D𝔥 = 0`.
pub const COMPATIBILITY_TOL: f64 = 1e-10;

/// A trivialized bundle `(V, 𝔥, D)` of rank `s` over an `n`-dimensional chart.
///
/// The connection is given in the local frame `e_α` by
/// `D_{∂_a} e_α = ω^β_{aα} e_β`.
#[derive(Debug, Clone)]
pub struct BundleSpec {
    n: usize,
    s: usize,
    frak: Vec<ScalarField>,
    frak_d: Vec<Vec<ScalarField>>,
    // omega[(a * s + alpha) * s + beta] = ω^β_{aα}
    omega: Vec<ScalarField>,
    omega_d: Vec<Vec<ScalarField>>,
}

impl BundleSpec {
    /// `frak` lists `𝔥_αβ` for `α <= β`; `omega(a, alpha, beta)` yields `ω^β_{aα}`.
    pub fn new(
        n: usize,
        s: usize,
        frak: Vec<ScalarField>,
        mut omega: impl FnMut(usize, usize, usize) -> ScalarField,
    ) -> Result<Self> {
        if frak.len() != sym_len(s) {
            return Err(Error::Dimension(format!(
                "bundle metric of rank {s} needs {} components, got {}",
                sym_len(s),
                frak.len()
            )));
        }
        let mut om = Vec::with_capacity(n * s * s);
        for a in 0..n {
            for alpha in 0..s {
                for beta in 0..s {
                    om.push(omega(a, alpha, beta));
                }
            }
        }
        if let Some(f) = frak.iter().chain(&om).find(|f| f.dim() != n) {
            return Err(Error::Dimension(format!(
                "bundle component over {} variables on a {n}-dimensional base",
                f.dim()
            )));
        }
        let grad = |f: &ScalarField| (0..n).map(|c| f.derivative(c)).collect::<Vec<_>>();
        Ok(BundleSpec {
            n,
            s,
            frak_d: frak.iter().map(grad).collect(),
            omega_d: om.iter().map(grad).collect(),
            frak,
            omega: om,
        })
    }

    /// Rank-`s` bundle with `𝔥 = δ` and `ω = 0`.
    pub fn trivial(n: usize, s: usize) -> Self {
        let frak = (0..s)
            .flat_map(|a| (a..s).map(move |b| ScalarField::constant(if a == b { 1.0 } else { 0.0 }, n)))
            .collect();
        BundleSpec::new(n, s, frak, |_, _, _| ScalarField::constant(0.0, n)).expect("trivial bundle")
    }

    pub fn rank(&self) -> usize {
        self.s
    }

    pub fn base_dim(&self) -> usize {
        self.n
    }

    pub fn frak_component(&self, alpha: usize, beta: usize) -> &ScalarField {
        &self.frak[sym_index(self.s, alpha, beta)]
    }

    pub fn omega_component(&self, a: usize, alpha: usize, beta: usize) -> &ScalarField {
        &self.omega[(a * self.s + alpha) * self.s + beta]
    }

    /// Fiber metric `𝔥` at `x`, checked for positive definiteness.
    pub fn frak(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let s = self.s;
        let mut m = DMatrix::zeros(s, s);
        for a in 0..s {
            for b in a..s {
                let v = self.frak[sym_index(s, a, b)].eval(x)?;
                m[(a, b)] = v;
                m[(b, a)] = v;
            }
        }
        if s > 0 {
            check_positive_definite(&m, x)?;
        }
        Ok(m)
    }

    /// Connection matrices `W_a` with `(W_a)_{βα} = ω^β_{aα}`, so that
    /// `D_a ξ = ∂_a ξ + W_a ξ` on component vectors.
    pub fn connection(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        let s = self.s;
        (0..self.n)
            .map(|a| {
                let mut w = DMatrix::zeros(s, s);
                for alpha in 0..s {
                    for beta in 0..s {
                        w[(beta, alpha)] = self.omega[(a * s + alpha) * s + beta].eval(x)?;
                    }
                }
                Ok(w)
            })
            .collect()
    }

    /// `Σ_a u^a W_a`; bundle transport along a curve reads `ξ' = −M ξ`.
    pub fn along(&self, x: &[f64], u: &[f64]) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(self.s, self.s);
        for (a, w) in self.connection(x)?.into_iter().enumerate() {
            if u[a] != 0.0 {
                m += w * u[a];
            }
        }
        Ok(m)
    }

    /// `dw[c][a] = ∂_c W_a`.
    fn connection_derivative(&self, x: &[f64]) -> Result<Vec<Vec<DMatrix<f64>>>> {
        let (n, s) = (self.n, self.s);
        let mut out = vec![vec![DMatrix::zeros(s, s); n]; n];
        for a in 0..n {
            for alpha in 0..s {
                for beta in 0..s {
                    let grad = &self.omega_d[(a * s + alpha) * s + beta];
                    for (c, row) in out.iter_mut().enumerate() {
                        row[a][(beta, alpha)] = grad[c].eval(x)?;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Largest violation of `∂_a 𝔥_αβ = 𝔥_γβ ω^γ_{aα} + 𝔥_αγ ω^γ_{aβ}` at `x`.
    pub fn compatibility_defect(&self, x: &[f64]) -> Result<f64> {
        let s = self.s;
        let frak = self.frak(x)?;
        let w = self.connection(x)?;
        let mut worst: f64 = 0.0;
        for (a, wa) in w.iter().enumerate() {
            // (W_aᵀ 𝔥 + 𝔥 W_a)_{αβ}
            let rhs = wa.transpose() * &frak + &frak * wa;
            for alpha in 0..s {
                for beta in alpha..s {
                    let lhs = self.frak_d[sym_index(s, alpha, beta)][a].eval(x)?;
                    worst = worst.max((lhs - rhs[(alpha, beta)]).abs());
                }
            }
        }
        Ok(worst)
    }

    /// Checks metric compatibility at every sample point.
    pub fn validate(&self, points: &[Vec<f64>]) -> Result<()> {
        for x in points {
            let d = self.compatibility_defect(x)?;
            if d > COMPATIBILITY_TOL {
                return Err(Error::Invalid(format!(
                    "bundle connection is not compatible with its metric at {x:?} (defect {d:e})"
                )));
            }
        }
        Ok(())
    }

    /// `R^V_{αβab} = ⟨(∂_a W_b − ∂_b W_a + [W_a, W_b]) e_α, e_β⟩_𝔥`, taken
    /// antisymmetric in `(α, β)`. For a compatible connection the
    /// antisymmetrization changes nothing beyond rounding.
    pub fn curvature(&self, x: &[f64]) -> Result<CurvatureValue> {
        let (n, s) = (self.n, self.s);
        let frak = self.frak(x)?;
        let w = self.connection(x)?;
        let dw = self.connection_derivative(x)?;
        let mut r = Tensor4::zeros([s, s, n, n]);
        for a in 0..n {
            for b in 0..n {
                let f = &dw[a][b] - &dw[b][a] + &w[a] * &w[b] - &w[b] * &w[a];
                // ⟨F e_α, e_β⟩ = Σ_γ F_{γα} 𝔥_{γβ}
                let fh = f.transpose() * &frak;
                for alpha in 0..s {
                    for beta in 0..s {
                        r.set(alpha, beta, a, b, 0.5 * (fh[(alpha, beta)] - fh[(beta, alpha)]));
                    }
                }
            }
        }
        Ok(CurvatureValue(r))
    }
}

/// Candidate second fundamental form `h^α_{ab}` in coordinate tangent
/// vectors and the bundle's local frame.
#[derive(Debug, Clone)]
pub struct SecondFundamentalField {
    n: usize,
    s: usize,
    // comps[alpha * sym_len(n) + sym_index(n, a, b)]
    comps: Vec<ScalarField>,
    grads: Vec<Vec<ScalarField>>,
}

impl SecondFundamentalField {
    /// `f(alpha, a, b)` is called for `a <= b` only.
    pub fn new(
        n: usize,
        s: usize,
        mut f: impl FnMut(usize, usize, usize) -> ScalarField,
    ) -> Result<Self> {
        let mut comps = Vec::with_capacity(s * sym_len(n));
        for alpha in 0..s {
            for a in 0..n {
                for b in a..n {
                    let c = f(alpha, a, b);
                    if c.dim() != n {
                        return Err(Error::Dimension(format!(
                            "h component over {} variables on a {n}-dimensional base",
                            c.dim()
                        )));
                    }
                    comps.push(c);
                }
            }
        }
        let grads = comps
            .iter()
            .map(|c| (0..n).map(|d| c.derivative(d)).collect())
            .collect();
        Ok(SecondFundamentalField { n, s, comps, grads })
    }

    pub fn zero(n: usize, s: usize) -> Self {
        SecondFundamentalField::new(n, s, |_, _, _| ScalarField::constant(0.0, n)).expect("zero form")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn component(&self, alpha: usize, a: usize, b: usize) -> &ScalarField {
        &self.comps[alpha * sym_len(self.n) + sym_index(self.n, a, b)]
    }

    /// Multiplies every component by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let n = self.n;
        SecondFundamentalField::new(n, self.s, |alpha, a, b| {
            let e = self.component(alpha, a, b).expr().clone() * crate::charts::Expr::constant(c);
            ScalarField::new(e, n).expect("same arity")
        })
        .expect("same shape")
    }

    pub fn eval(&self, x: &[f64]) -> Result<SecondForm> {
        let mut h = SecondForm::zeros(self.n, self.s);
        for alpha in 0..self.s {
            for a in 0..self.n {
                for b in a..self.n {
                    h.set(alpha, a, b, self.component(alpha, a, b).eval(x)?);
                }
            }
        }
        Ok(h)
    }

    /// Coordinate partials `∂_c h` for each `c`.
    pub fn partials(&self, x: &[f64]) -> Result<Vec<SecondForm>> {
        let (n, s) = (self.n, self.s);
        let mut out = vec![SecondForm::zeros(n, s); n];
        for alpha in 0..s {
            for a in 0..n {
                for b in a..n {
                    let g = &self.grads[alpha * sym_len(n) + sym_index(n, a, b)];
                    for (c, dh) in out.iter_mut().enumerate() {
                        dh.set(alpha, a, b, g[c].eval(x)?);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Covariant derivative `(D_{∂_c} h)^α_{ab}`: Levi-Civita on the tangent
    /// slots, the bundle connection on the value.
    pub fn covariant_derivative(
        &self,
        x: &[f64],
        gamma: &Christoffel,
        connection: &[DMatrix<f64>],
    ) -> Result<Vec<SecondForm>> {
        let (n, s) = (self.n, self.s);
        let h = self.eval(x)?;
        let mut out = self.partials(x)?;
        for (c, dh) in out.iter_mut().enumerate() {
            for alpha in 0..s {
                for a in 0..n {
                    for b in a..n {
                        let mut v = dh.get(alpha, a, b);
                        for d in 0..n {
                            v -= gamma.get(d, c, a) * h.get(alpha, d, b);
                            v -= gamma.get(d, c, b) * h.get(alpha, a, d);
                        }
                        for beta in 0..s {
                            v += connection[c][(alpha, beta)] * h.get(beta, a, b);
                        }
                        dh.set(alpha, a, b, v);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Convenience wrapper evaluating Christoffels and connection at `x`.
    pub fn covariant_derivative_at(
        &self,
        x: &[f64],
        metric: &MetricField,
        bundle: &BundleSpec,
    ) -> Result<Vec<SecondForm>> {
        let gamma = metric.christoffel(x)?;
        let w = bundle.connection(x)?;
        self.covariant_derivative(x, &gamma, &w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(src: &str) -> ScalarField {
        ScalarField::parse(src, 2).unwrap()
    }

    fn rotating_bundle() -> BundleSpec {
        // D_1 e_1 = x2 e_2, D_1 e_2 = −x2 e_1
        let frak = vec![field("1"), field("0"), field("1")];
        BundleSpec::new(2, 2, frak, |a, alpha, beta| match (a, alpha, beta) {
            (0, 0, 1) => field("x2"),
            (0, 1, 0) => field("-x2"),
            _ => field("0"),
        })
        .unwrap()
    }

    #[test]
    fn flat_bundle_has_zero_curvature() {
        let b = BundleSpec::trivial(2, 3);
        assert_eq!(b.curvature(&[0.4, -0.1]).unwrap().sup_norm(), 0.0);
    }

    #[test]
    fn rank_one_curvature_vanishes() {
        let b = BundleSpec::new(2, 1, vec![field("1")], |a, _, _| field(if a == 0 { "x2^2" } else { "sin(x1)" }))
            .unwrap();
        assert_eq!(b.curvature(&[0.3, 0.7]).unwrap().sup_norm(), 0.0);
    }

    #[test]
    fn rotation_generator_curvature() {
        let b = rotating_bundle();
        b.validate(&[vec![0.0, 0.0], vec![1.0, -2.0]]).unwrap();
        for x in [[0.0, 0.0], [0.5, 2.0], [-3.0, 1.0]] {
            let r = b.curvature(&x).unwrap();
            assert!((r.get(0, 1, 0, 1) + 1.0).abs() < 1e-15);
            assert!((r.get(1, 0, 0, 1) - 1.0).abs() < 1e-15);
            assert!((r.get(0, 1, 1, 0) - 1.0).abs() < 1e-15);
            assert_eq!(r.get(0, 0, 0, 1), 0.0);
        }
    }

    #[test]
    fn incompatible_connection_is_rejected() {
        let frak = vec![field("1"), field("0"), field("1")];
        let b = BundleSpec::new(2, 2, frak, |a, alpha, beta| {
            if a == 0 && alpha == 0 && beta == 1 { field("1") } else { field("0") }
        })
        .unwrap();
        assert!(b.validate(&[vec![0.0, 0.0]]).is_err());
    }

    #[test]
    fn scaled_metric_bundle_is_compatible() {
        // 𝔥 = exp(2 x1), ω_1 = 1 keeps D𝔥 = 0.
        let b = BundleSpec::new(2, 1, vec![field("exp(2*x1)")], |a, _, _| field(if a == 0 { "1" } else { "0" }))
            .unwrap();
        b.validate(&[vec![0.3, 0.1], vec![-1.0, 2.0]]).unwrap();
    }

    #[test]
    fn covariant_derivative_of_metric_multiple_vanishes() {
        // h = g ⊗ e on the round sphere with a flat line bundle is parallel.
        let g = MetricField::parse(2, |a, b| match (a, b) {
            (0, 0) => "1".into(),
            (1, 1) => "sin(x1)^2".into(),
            _ => "0".into(),
        })
        .unwrap();
        let h = SecondFundamentalField::new(2, 1, |_, a, b| g.component(a, b).clone()).unwrap();
        let bundle = BundleSpec::trivial(2, 1);
        let dh = h.covariant_derivative_at(&[0.9, 0.2], &g, &bundle).unwrap();
        for d in dh {
            assert!(d.sup_norm() < 1e-15);
        }
    }
}
