//! A corpus of reconstruction problems with known solutions.
//!
//! Every [`Example`] whose data come from an actual immersion carries that
//! immersion in closed form, so reconstructions can be compared against it.

use nalgebra::DMatrix;

use crate::charts::{AmbientSpec, BundleSpec, Expr, MetricField, ScalarField, SecondFundamentalField};
use crate::error::Result;
use crate::reconstruct::{PointSeed, Problem, Seed, SubmanifoldSeed};
use crate::tensor::orthonormalize;

/// A problem and, when known, the immersion it should reconstruct.
#[derive(Debug, Clone)]
pub struct Example {
    pub name: String,
    pub problem: Problem,
    /// Ambient chart components of the immersion as functions of base coordinates.
    pub embedding: Option<Vec<ScalarField>>,
}

impl Example {
    /// The closed-form immersion at `x`.
    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        let e = self
            .embedding
            .as_ref()
            .ok_or_else(|| crate::Error::Invalid(format!("{} has no closed-form immersion", self.name)))?;
        e.iter().map(|f| f.eval(x)).collect()
    }
}

fn field(e: Expr, dim: usize) -> ScalarField {
    ScalarField::new(e, dim).expect("corpus expression fits its chart")
}

fn parse(src: &str, dim: usize) -> ScalarField {
    ScalarField::parse(src, dim).expect("corpus expression parses")
}

fn c(v: f64) -> Expr {
    Expr::constant(v)
}

fn x(i: usize) -> Expr {
    Expr::var(i)
}

const SPHERE_METRIC: &str = "4/(1 + x1^2 + x2^2)^2";

fn stereographic() -> Vec<ScalarField> {
    ["2*x1/(1 + x1^2 + x2^2)", "2*x2/(1 + x1^2 + x2^2)", "(1 - x1^2 - x2^2)/(1 + x1^2 + x2^2)"]
        .iter()
        .map(|s| parse(s, 2))
        .collect()
}

fn sphere_parts(lambda: f64) -> (MetricField, BundleSpec, SecondFundamentalField) {
    let base = MetricField::parse(2, |a, b| if a == b { SPHERE_METRIC.into() } else { "0".into() })
        .expect("sphere metric");
    let g = parse(SPHERE_METRIC, 2);
    let h = SecondFundamentalField::new(2, 1, |_, a, b| {
        if a == b {
            field(c(lambda) * g.expr().clone(), 2)
        } else {
            ScalarField::constant(0.0, 2)
        }
    })
    .expect("sphere h");
    (base, BundleSpec::trivial(2, 1), h)
}

/// Unit sphere in stereographic coordinates from the north pole's antipode
/// chart: `g = 4/(1+|x|²)² δ`, `h = λ g` on a trivial line bundle, flat `R³`.
/// The seed sends the origin to `(0, 0, 1)` with inward normal.
/// For `λ = 1` the solution is the inverse stereographic projection.
pub fn sphere(lambda: f64) -> Example {
    let (base, bundle, h) = sphere_parts(lambda);
    let seed = PointSeed {
        p: vec![0.0, 0.0],
        ptilde: vec![0.0, 0.0, 1.0],
        phi: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 2.0, -1.0])),
    };
    let problem = Problem::new(base, bundle, h, AmbientSpec::euclidean(3), Seed::Point(seed)).expect("sphere problem");
    Example {
        name: format!("sphere(λ={lambda})"),
        problem,
        embedding: (lambda == 1.0).then(stereographic),
    }
}

/// The sphere problem seeded along the equator `|x| = 1`, parametrized by
/// `u ∈ (0, 2π)`. The chart normal `−(cos u, sin u)` maps to `(0, 0, 1)`,
/// so offset `t` along it reaches latitude `t`.
pub fn sphere_equator() -> Example {
    let (base, bundle, h) = sphere_parts(1.0);
    let s: Vec<ScalarField> = ["cos(x1)", "sin(x1)"].iter().map(|e| parse(e, 1)).collect();
    let st: Vec<ScalarField> = ["cos(x1)", "sin(x1)", "0"].iter().map(|e| parse(e, 1)).collect();
    let psi: Vec<ScalarField> = [
        "sin(x1)^2",
        "-sin(x1)*cos(x1)",
        "-cos(x1)",
        "-sin(x1)*cos(x1)",
        "cos(x1)^2",
        "-sin(x1)",
        "-cos(x1)",
        "-sin(x1)",
        "0",
    ]
    .iter()
    .map(|e| parse(e, 1))
    .collect();
    let seed = SubmanifoldSeed::new(1, vec![(0.0, 2.0 * std::f64::consts::PI)], s, st, psi).expect("equator seed");
    let problem =
        Problem::new(base, bundle, h, AmbientSpec::euclidean(3), Seed::Submanifold(seed)).expect("equator problem");
    Example {
        name: "sphere-equator".into(),
        problem,
        embedding: Some(stereographic()),
    }
}

/// The latitude band of the unit sphere: `(cos t cos u, cos t sin u, sin t)`.
pub fn latitude_point(u: f64, t: f64) -> [f64; 3] {
    [t.cos() * u.cos(), t.cos() * u.sin(), t.sin()]
}

/// Flat plane with `h^1_{11} = 1/r` in flat `R³`, `φ = I`, `p = p̃ = 0`:
/// the cylinder of radius `r` around the line `{y1 = 0, y3 = r}`.
pub fn cylinder(r: f64) -> Example {
    let h = SecondFundamentalField::new(2, 1, |_, a, b| {
        ScalarField::constant(if (a, b) == (0, 0) { 1.0 / r } else { 0.0 }, 2)
    })
    .expect("cylinder h");
    let seed = PointSeed {
        p: vec![0.0, 0.0],
        ptilde: vec![0.0; 3],
        phi: DMatrix::identity(3, 3),
    };
    let problem = Problem::new(
        MetricField::euclidean(2),
        BundleSpec::trivial(2, 1),
        h,
        AmbientSpec::euclidean(3),
        Seed::Point(seed),
    )
    .expect("cylinder problem");
    let embedding = vec![
        field(c(r) * (x(0) / c(r)).sin(), 2),
        field(x(1), 2),
        field(c(r) * (c(1.0) - (x(0) / c(r)).cos()), 2),
    ];
    Example {
        name: format!("cylinder(r={r})"),
        problem,
        embedding: Some(embedding),
    }
}

/// A fixed rotation of `R^d`.
pub fn fixed_rotation(d: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            2.0
        } else {
            0.5 * ((i + 2 * j + 1) as f64).sin()
        }
    });
    orthonormalize(&m, &DMatrix::identity(d, d)).expect("diagonally dominant matrix")
}

/// `R^n` with `h = 0` and a flat rank-`s` bundle in `R^{n+s}`; the solution
/// is the affine map `x ↦ p̃ + φ(x − p)`.
pub fn flat(n: usize, s: usize) -> Example {
    let d = n + s;
    let phi = fixed_rotation(d);
    let p: Vec<f64> = (0..n).map(|i| 0.1 * (i as f64 + 1.0) * if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let ptilde: Vec<f64> = (0..d).map(|i| 0.5 * (i as f64 + 1.0)).collect();
    let embedding = (0..d)
        .map(|k| {
            let mut e = c(ptilde[k]);
            for a in 0..n {
                e = e + c(phi[(k, a)]) * (x(a) - c(p[a]));
            }
            field(e, n)
        })
        .collect();
    let seed = PointSeed { p, ptilde, phi };
    let problem = Problem::new(
        MetricField::euclidean(n),
        BundleSpec::trivial(n, s),
        SecondFundamentalField::zero(n, s),
        AmbientSpec::euclidean(d),
        Seed::Point(seed),
    )
    .expect("flat problem");
    Example {
        name: format!("flat(n={n}, s={s})"),
        problem,
        embedding: Some(embedding),
    }
}

/// A surface `F(x1, x2)` in a 3D chart with diagonal metric `diag(w)`; the
/// induced `g` and the `h` of the unit normal along `∂1F × ∂2F` (raised by
/// `w`) are derived symbolically. The seed is `F(p)` with `φ = (dF_p, ν(p))`.
pub fn embedded_surface(
    name: &str,
    weights: [&str; 3],
    embedding: [&str; 3],
    p: [f64; 2],
    domain: Option<Vec<(f64, f64)>>,
    ambient_domain: Option<Vec<(f64, f64)>>,
) -> Result<Example> {
    let w: Vec<ScalarField> = weights.iter().map(|s| ScalarField::parse(s, 3)).collect::<Result<_>>()?;
    let f: Vec<ScalarField> = embedding.iter().map(|s| ScalarField::parse(s, 2)).collect::<Result<_>>()?;
    let fe: Vec<Expr> = f.iter().map(|s| s.expr().clone()).collect();
    // weights and their gradients pulled back to the base chart
    let wx: Vec<Expr> = w.iter().map(|wa| wa.expr().substitute(&fe)).collect();
    let dwx: Vec<Vec<Expr>> = w
        .iter()
        .map(|wa| (0..3).map(|b| wa.expr().derivative(b).substitute(&fe)).collect())
        .collect();
    let df: Vec<Vec<Expr>> = fe.iter().map(|e| (0..2).map(|a| e.derivative(a)).collect()).collect();
    let mut g = Vec::new();
    for a in 0..2 {
        for b in a..2 {
            let mut e = c(0.0);
            for k in 0..3 {
                e = e + wx[k].clone() * df[k][a].clone() * df[k][b].clone();
            }
            g.push(field(e, 2));
        }
    }
    // covector annihilating the tangent plane
    let cross = |i: usize, j: usize| df[i][0].clone() * df[j][1].clone() - df[j][0].clone() * df[i][1].clone();
    let normal = [cross(1, 2), cross(2, 0), cross(0, 1)];
    let mut norm2 = c(0.0);
    for k in 0..3 {
        norm2 = norm2 + normal[k].clone().powi(2) / wx[k].clone();
    }
    let norm = norm2.sqrt();
    let christoffel = |a_: usize, b_: usize, c_: usize| -> Expr {
        let mut e = c(0.0);
        if a_ == c_ {
            e = e + dwx[a_][b_].clone();
        }
        if a_ == b_ {
            e = e + dwx[a_][c_].clone();
        }
        if b_ == c_ {
            e = e - dwx[b_][a_].clone();
        }
        c(0.5) * e / wx[a_].clone()
    };
    let h = SecondFundamentalField::new(2, 1, |_, a, b| {
        let mut e = c(0.0);
        for k in 0..3 {
            let mut acc = df[k][a].derivative(b);
            for i in 0..3 {
                for j in 0..3 {
                    let gam = christoffel(k, i, j);
                    if gam.as_const() != Some(0.0) {
                        acc = acc + gam * df[i][a].clone() * df[j][b].clone();
                    }
                }
            }
            e = e + normal[k].clone() * acc;
        }
        field(e / norm.clone(), 2)
    })?;
    let mut base = MetricField::new(2, g)?;
    if let Some(dom) = domain {
        base = base.with_domain(dom)?;
    }
    let mut ambient_metric = MetricField::from_fn(3, |a, b| {
        if a == b {
            w[a].clone()
        } else {
            ScalarField::constant(0.0, 3)
        }
    })?;
    if let Some(dom) = ambient_domain {
        ambient_metric = ambient_metric.with_domain(dom)?;
    }
    let ambient = AmbientSpec::new(ambient_metric);
    let ptilde: Vec<f64> = f.iter().map(|s| s.eval(&p)).collect::<Result<_>>()?;
    let mut phi = DMatrix::zeros(3, 3);
    for k in 0..3 {
        for a in 0..2 {
            phi[(k, a)] = df[k][a].eval(&p);
        }
        let wk = w[k].eval(&ptilde)?;
        phi[(k, 2)] = normal[k].eval(&p) / wk / norm.eval(&p);
    }
    let seed = PointSeed {
        p: p.to_vec(),
        ptilde,
        phi,
    };
    let problem = Problem::new(base, BundleSpec::trivial(2, 1), h, ambient, Seed::Point(seed))?;
    Ok(Example {
        name: name.to_string(),
        problem,
        embedding: Some(f),
    })
}

/// The graph `z = f(x1, x2)` in flat `R³`, seeded at `(p, f(p))`.
pub fn graph(f: &str, p: [f64; 2]) -> Result<Example> {
    embedded_surface(&format!("graph z = {f}"), ["1", "1", "1"], ["x1", "x2", f], p, None, None)
}

/// The tilted plane `(x1, x2, a·x1)` in `S² × R` with chart
/// `(polar angle, azimuth, height)`.
pub fn tilted_product(a: f64) -> Example {
    let pi = std::f64::consts::PI;
    embedded_surface(
        &format!("tilted plane in S²×R (a={a})"),
        ["1", "sin(x1)^2", "1"],
        ["x1", "x2", &format!("{a}*x1")],
        [1.0, 0.3],
        Some(vec![(0.0, pi), (-10.0, 10.0)]),
        Some(vec![(0.0, pi), (-10.0, 10.0), (-100.0, 100.0)]),
    )
    .expect("tilted plane")
}

/// The horosphere `y3 = 1` in the upper half-space model of hyperbolic space.
pub fn horosphere() -> Example {
    embedded_surface(
        "horosphere",
        ["1/x3^2", "1/x3^2", "1/x3^2"],
        ["x1", "x2", "1"],
        [0.0, 0.0],
        None,
        Some(vec![(-1e3, 1e3), (-1e3, 1e3), (0.0, 1e3)]),
    )
    .expect("horosphere")
}

/// The Clifford torus `(cos x1, sin x1, cos x2, sin x2)/√2` in flat `R⁴`
/// with normal frame `(cos x1, sin x1, 0, 0)`, `(0, 0, cos x2, sin x2)`.
pub fn clifford_torus() -> Example {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let base = MetricField::from_fn(2, |a, b| ScalarField::constant(if a == b { 0.5 } else { 0.0 }, 2))
        .expect("torus metric");
    let h = SecondFundamentalField::new(2, 2, |alpha, a, b| {
        ScalarField::constant(if a == b && a == alpha { -r } else { 0.0 }, 2)
    })
    .expect("torus h");
    let mut phi = DMatrix::zeros(4, 4);
    phi[(1, 0)] = r;
    phi[(3, 1)] = r;
    phi[(0, 2)] = 1.0;
    phi[(2, 3)] = 1.0;
    let seed = PointSeed {
        p: vec![0.0, 0.0],
        ptilde: vec![r, 0.0, r, 0.0],
        phi,
    };
    let problem = Problem::new(base, BundleSpec::trivial(2, 2), h, AmbientSpec::euclidean(4), Seed::Point(seed))
        .expect("torus problem");
    let embedding = vec![
        field(c(r) * x(0).cos(), 2),
        field(c(r) * x(0).sin(), 2),
        field(c(r) * x(1).cos(), 2),
        field(c(r) * x(1).sin(), 2),
    ];
    Example {
        name: "clifford-torus".into(),
        problem,
        embedding: Some(embedding),
    }
}

/// Flat data in `R⁴` whose shape operators `A_ξ = diag(1, 0)` and
/// `A_η = [[0, 1], [1, 0]]` do not commute while the bundle is flat, so the
/// Ricci equation fails by exactly 1.
pub fn ricci_violation() -> Example {
    let h = SecondFundamentalField::new(2, 2, |alpha, a, b| {
        let v = match (alpha, a, b) {
            (0, 0, 0) | (1, 0, 1) => 1.0,
            _ => 0.0,
        };
        ScalarField::constant(v, 2)
    })
    .expect("ricci h");
    let seed = PointSeed {
        p: vec![0.0, 0.0],
        ptilde: vec![0.0; 4],
        phi: DMatrix::identity(4, 4),
    };
    let problem = Problem::new(
        MetricField::euclidean(2),
        BundleSpec::trivial(2, 2),
        h,
        AmbientSpec::euclidean(4),
        Seed::Point(seed),
    )
    .expect("ricci problem");
    Example {
        name: "ricci-violation".into(),
        problem,
        embedding: None,
    }
}
