//! Parametrized curves `[0, 1] → chart` with velocities.

use std::sync::Arc;

use crate::charts::ScalarField;
use crate::error::{Error, Result};
use crate::odeint::Trajectory;

#[derive(Debug, Clone)]
enum Kind {
    /// Components as expressions in `x1 = t`.
    Expr { x: Vec<ScalarField>, dx: Vec<ScalarField> },
    /// C¹ cubic Hermite spline through samples.
    Sampled { ts: Vec<f64>, xs: Vec<Vec<f64>>, ds: Vec<Vec<f64>> },
    /// Vertices joined by smoothstep segments on equal parameter intervals.
    Polyline(Vec<Vec<f64>>),
    /// `p + (q − p) t + t (1 − t)(c0 + c1 t)`.
    Cubic { p: Vec<f64>, q: Vec<f64>, c0: Vec<f64>, c1: Vec<f64> },
    Constant(Vec<f64>),
    /// Dense solution whose state is `(x, x')`.
    State { traj: Arc<Trajectory>, n: usize },
    Reversed(Box<Curve>),
}

/// A curve in an `n`-dimensional chart, parametrized by `t ∈ [0, 1]`.
#[derive(Debug, Clone)]
pub struct Curve {
    n: usize,
    kind: Kind,
}

fn smoothstep(s: f64) -> (f64, f64) {
    (s * s * (3.0 - 2.0 * s), 6.0 * s * (1.0 - s))
}

fn hermite(s: f64, h: f64, ya: f64, da: f64, yb: f64, db: f64) -> (f64, f64) {
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    let d00 = 6.0 * s * (s - 1.0) / h;
    let d10 = (1.0 - s) * (1.0 - 3.0 * s);
    let d11 = s * (3.0 * s - 2.0);
    (
        h00 * ya + h10 * h * da + h01 * yb + h11 * h * db,
        d00 * ya + d10 * da - d00 * yb + d11 * db,
    )
}

impl Curve {
    /// Parses one expression per component, in the variable `x1 = t`.
    pub fn expr(components: &[&str]) -> Result<Self> {
        let x = components
            .iter()
            .map(|src| ScalarField::parse(src, 1))
            .collect::<Result<Vec<_>>>()?;
        Curve::from_fields(x)
    }

    pub fn from_fields(x: Vec<ScalarField>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Dimension("a curve needs at least one component".into()));
        }
        if x.iter().any(|f| f.dim() != 1) {
            return Err(Error::Dimension("curve components must depend on x1 only".into()));
        }
        let dx = x.iter().map(|f| f.derivative(0)).collect();
        Ok(Curve {
            n: x.len(),
            kind: Kind::Expr { x, dx },
        })
    }

    /// Hermite spline through `(ts[i], xs[i])` with three-point derivative
    /// estimates. `ts` must run from 0 to 1, strictly increasing.
    pub fn from_samples(ts: Vec<f64>, xs: Vec<Vec<f64>>) -> Result<Self> {
        if ts.len() < 2 || ts.len() != xs.len() {
            return Err(Error::Invalid("a sampled curve needs at least two rows".into()));
        }
        let n = xs[0].len();
        if n == 0 || xs.iter().any(|x| x.len() != n) {
            return Err(Error::Dimension("sampled curve rows have inconsistent widths".into()));
        }
        if ts.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Invalid("curve samples must be strictly increasing in t".into()));
        }
        if ts[0] != 0.0 || *ts.last().unwrap() != 1.0 {
            return Err(Error::Invalid(format!(
                "curve parameter must run over [0, 1], got [{}, {}]",
                ts[0],
                ts.last().unwrap()
            )));
        }
        if xs.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("curve samples must be finite".into()));
        }
        let m = ts.len();
        let ds = (0..m)
            .map(|i| {
                (0..n)
                    .map(|k| {
                        if m == 2 {
                            return (xs[1][k] - xs[0][k]) / (ts[1] - ts[0]);
                        }
                        // derivative at ts[i] of the quadratic through three neighbours
                        let j = i.clamp(1, m - 2);
                        let (t0, t1, t2) = (ts[j - 1], ts[j], ts[j + 1]);
                        let (y0, y1, y2) = (xs[j - 1][k], xs[j][k], xs[j + 1][k]);
                        let t = ts[i];
                        y0 * (2.0 * t - t1 - t2) / ((t0 - t1) * (t0 - t2))
                            + y1 * (2.0 * t - t0 - t2) / ((t1 - t0) * (t1 - t2))
                            + y2 * (2.0 * t - t0 - t1) / ((t2 - t0) * (t2 - t1))
                    })
                    .collect()
            })
            .collect();
        Ok(Curve {
            n,
            kind: Kind::Sampled { ts, xs, ds },
        })
    }

    /// Visits `points` in order, one smoothstep segment per equal parameter
    /// interval. Velocity vanishes at every vertex.
    pub fn polyline(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Invalid("a polyline needs at least two vertices".into()));
        }
        let n = points[0].len();
        if points.iter().any(|p| p.len() != n) {
            return Err(Error::Dimension("polyline vertices have inconsistent dimensions".into()));
        }
        Ok(Curve {
            n,
            kind: Kind::Polyline(points),
        })
    }

    pub fn cubic(p: Vec<f64>, q: Vec<f64>, c0: Vec<f64>, c1: Vec<f64>) -> Result<Self> {
        let n = p.len();
        if q.len() != n || c0.len() != n || c1.len() != n {
            return Err(Error::Dimension("cubic curve coefficients differ in length".into()));
        }
        Ok(Curve {
            n,
            kind: Kind::Cubic { p, q, c0, c1 },
        })
    }

    /// Straight segment from `p` to `q` at constant coordinate speed.
    pub fn line(p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        let z = vec![0.0; p.len()];
        Curve::cubic(p, q, z.clone(), z)
    }

    pub fn constant(p: Vec<f64>) -> Self {
        Curve {
            n: p.len(),
            kind: Kind::Constant(p),
        }
    }

    /// Wraps a dense trajectory over `[0, 1]` whose state is `(x, x')`.
    pub fn from_state(traj: Arc<Trajectory>, n: usize) -> Result<Self> {
        if traj.dim() != 2 * n {
            return Err(Error::Dimension(format!(
                "state trajectory has dimension {}, expected {}",
                traj.dim(),
                2 * n
            )));
        }
        if traj.t0() != 0.0 || traj.t1() != 1.0 {
            return Err(Error::Invalid("state trajectory must cover [0, 1]".into()));
        }
        Ok(Curve {
            n,
            kind: Kind::State { traj, n },
        })
    }

    /// The same image traversed backwards: `t ↦ c(1 − t)`.
    pub fn reversed(&self) -> Curve {
        match &self.kind {
            Kind::Reversed(inner) => (**inner).clone(),
            _ => Curve {
                n: self.n,
                kind: Kind::Reversed(Box::new(self.clone())),
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Position and velocity at `t`.
    pub fn jet(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.n;
        match &self.kind {
            Kind::Expr { x, dx } => {
                let pos = x.iter().map(|f| f.eval(&[t])).collect::<Result<Vec<_>>>()?;
                let vel = dx.iter().map(|f| f.eval(&[t])).collect::<Result<Vec<_>>>()?;
                Ok((pos, vel))
            }
            Kind::Sampled { ts, xs, ds } => {
                let t = t.clamp(0.0, 1.0);
                let i = ts.partition_point(|&s| s <= t).saturating_sub(1).min(ts.len() - 2);
                let h = ts[i + 1] - ts[i];
                let s = (t - ts[i]) / h;
                let mut pos = vec![0.0; n];
                let mut vel = vec![0.0; n];
                for k in 0..n {
                    (pos[k], vel[k]) = hermite(s, h, xs[i][k], ds[i][k], xs[i + 1][k], ds[i + 1][k]);
                }
                Ok((pos, vel))
            }
            Kind::Polyline(points) => {
                let m = points.len() - 1;
                let tt = t.clamp(0.0, 1.0) * m as f64;
                let i = (tt.floor() as usize).min(m - 1);
                let (w, dw) = smoothstep(tt - i as f64);
                let (a, b) = (&points[i], &points[i + 1]);
                let pos = (0..n).map(|k| a[k] + (b[k] - a[k]) * w).collect();
                let vel = (0..n).map(|k| (b[k] - a[k]) * dw * m as f64).collect();
                Ok((pos, vel))
            }
            Kind::Cubic { p, q, c0, c1 } => {
                let pos = (0..n)
                    .map(|k| p[k] + (q[k] - p[k]) * t + t * (1.0 - t) * (c0[k] + c1[k] * t))
                    .collect();
                let vel = (0..n)
                    .map(|k| q[k] - p[k] + (1.0 - 2.0 * t) * c0[k] + (2.0 * t - 3.0 * t * t) * c1[k])
                    .collect();
                Ok((pos, vel))
            }
            Kind::Constant(p) => Ok((p.clone(), vec![0.0; n])),
            Kind::State { traj, n } => {
                let y = traj.eval(t);
                Ok((y[..*n].to_vec(), y[*n..].to_vec()))
            }
            Kind::Reversed(inner) => {
                let (pos, vel) = inner.jet(1.0 - t)?;
                Ok((pos, vel.into_iter().map(|v| -v).collect()))
            }
        }
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        Ok(self.jet(t)?.0)
    }

    pub fn velocity(&self, t: f64) -> Result<Vec<f64>> {
        Ok(self.jet(t)?.1)
    }

    pub fn start(&self) -> Result<Vec<f64>> {
        self.eval(0.0)
    }

    pub fn end(&self) -> Result<Vec<f64>> {
        self.eval(1.0)
    }

    /// Interior parameters in `(0, 1)` where the curve is only C¹; integrators
    /// restart there.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            Kind::Sampled { ts, .. } => ts[1..ts.len() - 1].to_vec(),
            Kind::Polyline(points) => {
                let m = points.len() - 1;
                (1..m).map(|i| i as f64 / m as f64).collect()
            }
            Kind::State { traj, .. } => {
                // knots of a dense solution are smooth joins; no restart needed
                let _ = traj;
                Vec::new()
            }
            Kind::Reversed(inner) => inner.breakpoints().into_iter().rev().map(|b| 1.0 - b).collect(),
            _ => Vec::new(),
        }
    }

    /// `[0, b_1, ..., b_k, 1]`, restricted to `[t0, t1]`.
    pub fn segments(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut out = vec![t0];
        out.extend(self.breakpoints().into_iter().filter(|&b| b > t0 && b < t1));
        out.push(t1);
        out
    }
}

/// Parses a curve CSV with header `t,x1,...,xn`.
pub fn read_curve_csv(text: &str) -> Result<Curve> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Invalid("curve file is empty".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let expected: Vec<String> = std::iter::once("t".to_string())
        .chain((1..cols.len()).map(|i| format!("x{i}")))
        .collect();
    if cols.len() < 2 || cols != expected {
        return Err(Error::Invalid(format!(
            "curve header must be `t,x1,...,xn`, got `{header}`"
        )));
    }
    let mut ts = Vec::new();
    let mut xs = Vec::new();
    for (lineno, line) in lines {
        let vals = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Invalid(format!("line {}: {e}", lineno + 1)))?;
        if vals.len() != cols.len() {
            return Err(Error::Invalid(format!(
                "line {}: expected {} fields, got {}",
                lineno + 1,
                cols.len(),
                vals.len()
            )));
        }
        ts.push(vals[0]);
        xs.push(vals[1..].to_vec());
    }
    Curve::from_samples(ts, xs)
}

/// Formats rows `t, x1, ..., xn` with 17 significant digits.
pub fn write_curve_csv(rows: impl IntoIterator<Item = (f64, Vec<f64>)>, n: usize) -> String {
    let mut out = String::from("t");
    for i in 1..=n {
        out.push_str(&format!(",x{i}"));
    }
    out.push('\n');
    for (t, x) in rows {
        out.push_str(&format!("{t:.16e}"));
        for v in x {
            out.push_str(&format!(",{v:.16e}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_velocity(c: &Curve, t: f64) -> Vec<f64> {
        let e = 1e-6;
        let a = c.eval(t + e).unwrap();
        let b = c.eval(t - e).unwrap();
        a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * e)).collect()
    }

    fn check_velocity(c: &Curve) {
        for t in [0.1, 0.33, 0.45, 0.77, 0.9] {
            let v = c.velocity(t).unwrap();
            for (a, b) in v.iter().zip(fd_velocity(c, t)) {
                assert!((a - b).abs() < 1e-7, "{a} vs {b} at {t}");
            }
        }
    }

    #[test]
    fn velocities_match_finite_differences() {
        check_velocity(&Curve::expr(&["cos(x1)", "x1^3 - 2*x1"]).unwrap());
        check_velocity(&Curve::polyline(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 2.0]]).unwrap());
        check_velocity(&Curve::cubic(vec![0.0], vec![1.0], vec![0.3], vec![-0.2]).unwrap());
        let ts: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        let xs = ts.iter().map(|t| vec![t.sin(), t * t]).collect();
        check_velocity(&Curve::from_samples(ts, xs).unwrap());
        check_velocity(&Curve::expr(&["x1^2"]).unwrap().reversed());
    }

    #[test]
    fn endpoints() {
        let c = Curve::cubic(vec![1.0, 2.0], vec![3.0, -1.0], vec![0.5, 0.5], vec![1.0, 0.0]).unwrap();
        assert_eq!(c.start().unwrap(), vec![1.0, 2.0]);
        assert_eq!(c.end().unwrap(), vec![3.0, -1.0]);
        let r = c.reversed();
        assert_eq!(r.start().unwrap(), vec![3.0, -1.0]);
        assert_eq!(r.reversed().end().unwrap(), vec![3.0, -1.0]);
        let p = Curve::polyline(vec![vec![0.0], vec![2.0], vec![5.0]]).unwrap();
        assert_eq!(p.eval(0.5).unwrap(), vec![2.0]);
        assert_eq!(p.velocity(0.5).unwrap(), vec![0.0]);
        assert_eq!(p.breakpoints(), vec![0.5]);
        assert_eq!(p.reversed().breakpoints(), vec![0.5]);
    }

    #[test]
    fn sampled_spline_reproduces_quadratics() {
        let ts = vec![0.0, 0.3, 0.5, 1.0];
        let xs = ts.iter().map(|t| vec![2.0 * t * t - t]).collect();
        let c = Curve::from_samples(ts, xs).unwrap();
        for t in [0.1, 0.4, 0.8] {
            assert!((c.eval(t).unwrap()[0] - (2.0 * t * t - t)).abs() < 1e-14);
        }
    }

    #[test]
    fn csv_round_trip() {
        let rows: Vec<(f64, Vec<f64>)> = (0..=4).map(|i| {
            let t = i as f64 / 4.0;
            (t, vec![t, 1.0 / 3.0 + t])
        }).collect();
        let text = write_curve_csv(rows.clone(), 2);
        assert!(text.starts_with("t,x1,x2\n"));
        let c = read_curve_csv(&text).unwrap();
        for (t, x) in rows {
            assert_eq!(c.eval(t).unwrap(), x);
        }
    }

    #[test]
    fn csv_errors() {
        assert!(read_curve_csv("").is_err());
        assert!(read_curve_csv("t,y\n0,1\n1,2\n").is_err());
        assert!(read_curve_csv("t,x1\n0,1\n1\n").is_err());
        assert!(read_curve_csv("t,x1\n0,1\n0.5,2\n").is_err());
        assert!(read_curve_csv("t,x1\n0,1\n1,abc\n").is_err());
    }
}
