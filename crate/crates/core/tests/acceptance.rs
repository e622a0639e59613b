//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use gendev::fundeq::residuals;
use gendev::odeint::integrate;
use gendev::problems::{self, latitude_point};
use gendev::reconstruct::{
    align_rigid, path_independence_audit, reconstruct_grid, reconstruct_point, CurvePolicy, GridSpec,
};
use gendev::tensor::orthonormalize;
use gendev::transport::{develop, generalized_develop, parallel_transport, FnDrive};
use gendev::variation::{
    integrate_base_variation, integrate_gvariation, submanifold_data, verify_ansatz, InducedFamily,
};
use gendev::{
    AmbientSpec, Curve, DevelopOptions, ExprFamily, Family, Method, MetricField, Problem, SecondForm, Seed, SeedKind,
    SplitSeed,
};
use nalgebra::{DMatrix, DVector};
use rand_core::{Rng, SeedableRng};
use rand_pcg::Pcg64;

type Check = fn() -> Result<String, String>;

const STEP: f64 = 1e-3;

fn rk4(step: f64) -> Method {
    Method::Rk4 { step }
}

fn opts() -> DevelopOptions {
    DevelopOptions::with_method(rk4(STEP))
}

struct Uniform(Pcg64);

impl Uniform {
    fn new(seed: u64) -> Self {
        Uniform(Pcg64::seed_from_u64(seed))
    }

    fn next(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * ((self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn seed_point(problem: &Problem) -> Vec<f64> {
    match &problem.seed {
        Seed::Point(ps) => ps.p.clone(),
        Seed::Submanifold(_) => unreachable!(),
    }
}

fn random_cubic(rng: &mut Uniform, p: &[f64], reach: f64) -> Curve {
    let q: Vec<f64> = p.iter().map(|x| x + rng.next(-reach, reach)).collect();
    let c0: Vec<f64> = p.iter().map(|_| rng.next(-0.5, 0.5)).collect();
    let c1: Vec<f64> = p.iter().map(|_| rng.next(-0.5, 0.5)).collect();
    Curve::cubic(p.to_vec(), q, c0, c1).unwrap()
}

fn ensure(ok: bool, msg: String) -> Result<String, String> {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn frame_isometry() -> Result<String, String> {
    let mut rng = Uniform::new(1);
    let mut worst = 0.0f64;
    for i in 0..20 {
        let ex = if i % 2 == 0 { problems::sphere(1.0) } else { problems::cylinder(0.7) };
        let c = random_cubic(&mut rng, &seed_point(&ex.problem), 1.0);
        let o = DevelopOptions { drift_bound: None, ..opts() };
        let res = reconstruct_point(&ex.problem, &c, &o).map_err(|e| e.to_string())?;
        worst = worst.max(res.development.drift());
    }
    ensure(worst <= 1e-8, format!("max Gram drift {worst:.2e} over 20 developments (bound 1e-8)"))
}

fn reduction() -> Result<String, String> {
    let mut rng = Uniform::new(2);
    let ambients = [
        problems::tilted_product(0.5).problem,
        problems::horosphere().problem,
        problems::sphere(1.0).problem,
    ];
    let mut worst = 0.0f64;
    for i in 0..20 {
        let pr = &ambients[i % 3];
        let Seed::Point(ps) = &pr.seed else { unreachable!() };
        let ambient: &AmbientSpec = &pr.ambient;
        let d = ambient.dim();
        let n = 1 + i % 2;
        let p = ps.ptilde.clone();
        let g = ambient.metric().eval(&p).map_err(|e| e.to_string())?;
        let raw = DMatrix::from_fn(d, d, |r, c| if r == c { 1.0 } else { 0.0 } + rng.next(-0.4, 0.4));
        let frame = orthonormalize(&raw, &g).map_err(|e| e.to_string())?;
        let coef: Vec<[f64; 3]> = (0..n).map(|_| [rng.next(-0.6, 0.6), rng.next(-0.6, 0.6), rng.next(-0.6, 0.6)]).collect();
        let v = move |t: f64| -> gendev::Result<DVector<f64>> {
            Ok(DVector::from_fn(d, |a, _| coef.get(a).map_or(0.0, |c| c[0] + c[1] * t + c[2] * t * t)))
        };
        let classical = develop(ambient.metric(), &p, &frame, &v, &[], &opts()).map_err(|e| e.to_string())?;
        let seed = SplitSeed::new(ambient, p.clone(), frame.clone(), n).map_err(|e| e.to_string())?;
        let vn = v.clone();
        let drive = FnDrive::new(
            n,
            d - n,
            move |t| Ok(vn(t)?.rows(0, n).into_owned()),
            move |_| Ok(SecondForm::zeros(n, d - n)),
        );
        let gen = generalized_develop(ambient, &seed, Arc::new(drive), &opts()).map_err(|e| e.to_string())?;
        let dp = dist(&classical.endpoint(), &gen.endpoint());
        let df = (classical.end_frame() - gen.end_frame()).amax();
        worst = worst.max(dp).max(df);
    }
    ensure(worst <= 1e-10, format!("max endpoint/frame difference {worst:.2e} on 20 cases (bound 1e-10)"))
}

fn sphere_reconstruction() -> Result<String, String> {
    let ex = problems::sphere(1.0);
    let grid = GridSpec::polar((0.0, 2.0 * PI), (0.0, 1.5), [33, 17]);
    let sample = reconstruct_grid(&ex.problem, &grid, CurvePolicy::Radial, &opts(), 0).map_err(|e| e.to_string())?;
    if sample.valid_count() != 33 * 17 {
        return Err(format!("only {} of {} nodes reconstructed", sample.valid_count(), 33 * 17));
    }
    let got: Vec<Vec<f64>> = sample.records.iter().map(|r| r.point().unwrap().to_vec()).collect();
    let want: Vec<Vec<f64>> = sample.records.iter().map(|r| ex.embed(r.base.as_ref().unwrap()).unwrap()).collect();
    let al = align_rigid(&got, &want).map_err(|e| e.to_string())?;
    let mut off_sphere = 0.0f64;
    let mut off_closed = 0.0f64;
    let mut resid = 0.0f64;
    for (rec, (g, w)) in sample.records.iter().zip(got.iter().zip(&want)) {
        let q = al.apply(g);
        off_sphere = off_sphere.max((dist(&q, &[0.0; 3]) - 1.0).abs());
        off_closed = off_closed.max(dist(&q, w));
        resid = resid.max(rec.result.as_ref().unwrap().residuals.max());
    }
    ensure(
        off_sphere <= 1e-6 && off_closed <= 1e-6 && resid <= 1e-7,
        format!("| |f|-1 | ≤ {off_sphere:.2e}, closed-form distance ≤ {off_closed:.2e}, residuals ≤ {resid:.2e}"),
    )
}

fn cylinder_reconstruction() -> Result<String, String> {
    let r = 1.0;
    let ex = problems::cylinder(r);
    let grid = GridSpec::rect([(-PI * r, PI * r), (-1.0, 1.0)], [65, 9]);
    let sample = reconstruct_grid(&ex.problem, &grid, CurvePolicy::Polyline, &opts(), 0).map_err(|e| e.to_string())?;
    if sample.valid_count() != 65 * 9 {
        return Err(format!("only {} of {} nodes reconstructed", sample.valid_count(), 65 * 9));
    }
    let got: Vec<Vec<f64>> = sample.records.iter().map(|r| r.point().unwrap().to_vec()).collect();
    let want: Vec<Vec<f64>> = sample.records.iter().map(|r| ex.embed(r.base.as_ref().unwrap()).unwrap()).collect();
    let al = align_rigid(&got, &want).map_err(|e| e.to_string())?;
    let off = got.iter().zip(&want).map(|(g, w)| dist(&al.apply(g), w)).fold(0.0, f64::max);
    let p = seed_point(&ex.problem);
    let wrap = Curve::line(p.clone(), vec![p[0] + 2.0 * PI * r, p[1]]).map_err(|e| e.to_string())?;
    let start = reconstruct_point(&ex.problem, &Curve::constant(p.clone()), &opts()).map_err(|e| e.to_string())?;
    let end = reconstruct_point(&ex.problem, &wrap, &opts()).map_err(|e| e.to_string())?;
    let gap = dist(&start.point, &end.point);
    ensure(off <= 1e-6 && gap <= 1e-6, format!("closed-form distance ≤ {off:.2e}, wrap gap {gap:.2e}"))
}

fn well_definedness() -> Result<String, String> {
    let rho = 0.5f64.tan();
    let target = [rho * 0.6, rho * 0.8];
    let sphere = problems::sphere(1.0).problem;
    let good = path_independence_audit(&sphere, &target, 10, 42, &opts()).map_err(|e| e.to_string())?;
    let bad = path_independence_audit(&sphere.with_scaled_h(1.1), &target, 10, 42, &opts()).map_err(|e| e.to_string())?;
    ensure(
        good.spread <= 1e-6 && bad.spread >= 1e-3,
        format!("spread {:.2e} (≤ 1e-6), scaled h spread {:.2e} (≥ 1e-3)", good.spread, bad.spread),
    )
}

fn ansatz() -> Result<String, String> {
    let problem = problems::sphere(1.0).problem;
    let family = || ExprFamily::new(&["0.8*cos(x1 + 0.5*x2)", "0.8*sin(x1) + 0.3*x2"], 1, &[]).unwrap();
    let induced = InducedFamily::new(problem.clone(), family(), SeedKind::Point, rk4(STEP));
    let (mut ua, mut ud, mut xd) = (0.0f64, 0.0f64, 0.0f64);
    for u in [0.0, 0.4, 0.8, 1.2] {
        let base = integrate_base_variation(&problem, &family(), u, &SeedKind::Point, rk4(STEP)).map_err(|e| e.to_string())?;
        let amb = integrate_gvariation(&problem, &induced, u, &SeedKind::Point, rk4(STEP)).map_err(|e| e.to_string())?;
        let rep = verify_ansatz(&base, &amb, &induced).map_err(|e| e.to_string())?;
        ua = ua.max(rep.max_u_alpha);
        ud = ud.max(rep.max_u_diff);
        xd = xd.max(rep.max_xaalpha_diff);
    }
    ensure(
        ua <= 1e-7 && ud <= 1e-7 && xd <= 1e-7,
        format!("max|Ũ_α| {ua:.2e}, max|Ũ_a − U_a| {ud:.2e}, max|X̃_aα − h U| {xd:.2e}"),
    )
}

fn holonomy() -> Result<String, String> {
    let theta = PI / 3.0;
    let g = MetricField::parse(2, |a, b| match (a, b) {
        (0, 0) => "1".into(),
        (1, 1) => "sin(x1)^2".into(),
        _ => "0".into(),
    })
    .map_err(|e| e.to_string())?;
    let c = Curve::expr(&[&format!("{theta}"), "2*pi*x1"]).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for k in 0..8 {
        let a = k as f64 * PI / 4.0;
        // components in the coordinate basis of a unit vector at angle a
        // from ∂θ in the orthonormal frame (∂θ, ∂φ/sin θ)
        let v = DVector::from_vec(vec![a.cos(), a.sin() / theta.sin()]);
        let w = parallel_transport(&g, &c, &v, 0.0, 1.0, rk4(STEP)).map_err(|e| e.to_string())?;
        let turned = (w[1] * theta.sin()).atan2(w[0]) - a;
        let err = (turned.rem_euclid(2.0 * PI) - PI).abs();
        worst = worst.max(err);
    }
    ensure(worst <= 1e-6, format!("rotation angle off π by ≤ {worst:.2e}"))
}

fn submanifold_seeding() -> Result<String, String> {
    let ex = problems::sphere_equator();
    let grid = GridSpec::rect([(0.0, 2.0 * PI), (-0.5, 0.5)], [17, 9]);
    let sample = reconstruct_grid(&ex.problem, &grid, CurvePolicy::Normal, &opts(), 0).map_err(|e| e.to_string())?;
    let mut off = 0.0f64;
    for rec in &sample.records {
        let (u, t) = (grid.param(0, rec.index[0]), grid.param(1, rec.index[1]));
        let p = rec.point().ok_or_else(|| format!("node ({u}, {t}) failed"))?;
        off = off.max(dist(p, &latitude_point(u, t)));
    }
    // initial data of the base variation along a family leaving S
    let seed = SeedKind::Submanifold { w0: vec![0.3], direction: vec![1.0] };
    let family = ExprFamily::new(&["0.2*sin(x1) + 0.1*x2", "0.6 + 0.2*cos(x1)"], 1, &[]).unwrap();
    let mut exact = true;
    for u in [0.0, 0.2, 0.7] {
        let data = submanifold_data(&ex.problem, &[0.3], &[1.0], u).map_err(|e| e.to_string())?;
        let base = integrate_base_variation(&ex.problem, &family, u, &seed, rk4(STEP)).map_err(|e| e.to_string())?;
        let st = base.state(0.0);
        let v = family.v(u, 0.0).map_err(|e| e.to_string())?;
        let vu = family.v_u(u, 0.0).map_err(|e| e.to_string())?;
        let th = data.theta[0];
        let sig = data.sigma.get(0, 0, 0);
        exact &= st.u[0] == th && st.u[1] == 0.0;
        exact &= st.x[(0, 1)] == sig * th;
        exact &= st.du[0] == vu[0] - v[1] * sig * th && st.du[1] == vu[1] + v[0] * sig * th;
    }
    ensure(
        off <= 1e-6 && exact,
        format!("band distance ≤ {off:.2e}, initial data {}", if exact { "exact" } else { "NOT exact" }),
    )
}

fn integrator_order() -> Result<String, String> {
    let sys = (2usize, |_t: f64, y: &[f64], dy: &mut [f64]| -> gendev::Result<()> {
        dy[0] = y[1];
        dy[1] = -y[0];
        Ok(())
    });
    let end = |h: f64| -> Result<Vec<f64>, String> {
        Ok(integrate(&sys, &[1.0, 0.0], 0.0, 2.0 * PI, rk4(h)).map_err(|e| e.to_string())?.last().to_vec())
    };
    let (a, b, c) = (end(1e-2)?, end(5e-3)?, end(2.5e-3)?);
    let exact_order = (dist(&a, &[1.0, 0.0]) / dist(&b, &[1.0, 0.0])).log2();
    // Richardson: no exact solution used
    let rich_order = (dist(&a, &b) / dist(&b, &c)).log2();
    ensure(
        exact_order >= 3.8 && rich_order >= 3.8,
        format!("observed order {exact_order:.3}, Richardson estimate {rich_order:.3}"),
    )
}

fn random_orthogonal(rng: &mut Uniform, k: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(k, k, |_, _| rng.next(-1.0, 1.0));
    orthonormalize(&m, &DMatrix::identity(k, k)).unwrap()
}

fn residual_invariance() -> Result<String, String> {
    let mut rng = Uniform::new(10);
    let cases = [problems::sphere(1.0), problems::sphere(1.2), problems::ricci_violation(), problems::tilted_product(0.5)];
    let mut worst = 0.0f64;
    for i in 0..50 {
        let ex = &cases[i % cases.len()];
        let c = random_cubic(&mut rng, &seed_point(&ex.problem), 0.6);
        let res = reconstruct_point(&ex.problem, &c, &opts()).map_err(|e| e.to_string())?;
        let qt = random_orthogonal(&mut rng, ex.problem.n());
        let qb = random_orthogonal(&mut rng, ex.problem.s());
        let r2 = residuals(&ex.problem, &res.tau.reframed(&qt, &qb), "reframed").map_err(|e| e.to_string())?;
        let r1 = &res.residuals;
        worst = worst
            .max((r1.gauss - r2.gauss).abs())
            .max((r1.codazzi - r2.codazzi).abs())
            .max((r1.ricci - r2.ricci).abs());
    }
    ensure(worst <= 1e-9, format!("max residual change {worst:.2e} at 50 points"))
}

fn main() -> ExitCode {
    let checks: [(&str, &str, Check); 10] = [
        ("AC1", "frame isometry", frame_isometry),
        ("AC2", "reduction to classical development", reduction),
        ("AC3", "sphere reconstruction", sphere_reconstruction),
        ("AC4", "cylinder reconstruction", cylinder_reconstruction),
        ("AC5", "well-definedness audit", well_definedness),
        ("AC6", "variation ansatz", ansatz),
        ("AC7", "latitude holonomy", holonomy),
        ("AC8", "submanifold seeding", submanifold_seeding),
        ("AC9", "RK4 order", integrator_order),
        ("AC10", "residual frame invariance", residual_invariance),
    ];
    let mut failed = 0;
    for (id, name, check) in checks {
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS {id} {name}: {msg} [{secs:.1}s]"),
            Err(msg) => {
                failed += 1;
                println!("FAIL {id} {name}: {msg} [{secs:.1}s]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
