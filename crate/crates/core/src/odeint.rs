//! Explicit Runge–Kutta integration with cubic Hermite dense output.

use crate::error::{Error, Result};

/// A first-order system `y' = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;

    /// Called after every accepted step; may project the state back onto a
    /// constraint manifold. The default does nothing.
    fn post_step(&self, _t: f64, _y: &mut [f64]) {}
}

impl<F> OdeSystem for (usize, F)
where
    F: Fn(f64, &[f64], &mut [f64]) -> Result<()>,
{
    fn dim(&self) -> usize {
        self.0
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        (self.1)(t, y, dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Classical RK4 with `ceil((t1 − t0) / step)` equal steps.
    Rk4 { step: f64 },
    /// Dormand–Prince 5(4) with error control `|err_i| ≤ abs + rel·|y_i|`.
    Dopri5 { abs_tol: f64, rel_tol: f64 },
}

impl Default for Method {
    fn default() -> Self {
        Method::Rk4 { step: 1e-3 }
    }
}

impl Method {
    fn validate(&self) -> Result<()> {
        match *self {
            Method::Rk4 { step } if !(step > 0.0 && step.is_finite()) => {
                Err(Error::Invalid(format!("step must be positive, got {step}")))
            }
            Method::Dopri5 { abs_tol, rel_tol } if !(abs_tol > 0.0 && rel_tol >= 0.0) => Err(Error::Invalid(
                format!("tolerances must be positive, got abs {abs_tol}, rel {rel_tol}"),
            )),
            _ => Ok(()),
        }
    }
}

/// Knots `(t_i, y_i)` with the derivative at both ends of every interval.
///
/// Intervals carry their own end derivatives so that trajectories glued at a
/// discontinuity of the right-hand side still interpolate each side correctly.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: usize,
    ts: Vec<f64>,
    ys: Vec<f64>,
    // two derivative vectors per interval: start, end
    ds: Vec<f64>,
}

impl Trajectory {
    /// A single-knot trajectory (zero-length time range).
    pub fn constant(t: f64, y: &[f64]) -> Self {
        Trajectory {
            dim: y.len(),
            ts: vec![t],
            ys: y.to_vec(),
            ds: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t0(&self) -> f64 {
        self.ts[0]
    }

    pub fn t1(&self) -> f64 {
        *self.ts.last().unwrap()
    }

    pub fn knots(&self) -> &[f64] {
        &self.ts
    }

    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.ys[i * self.dim..(i + 1) * self.dim]
    }

    pub fn first(&self) -> &[f64] {
        self.value(0)
    }

    pub fn last(&self) -> &[f64] {
        self.value(self.ts.len() - 1)
    }

    fn push_interval(&mut self, t: f64, y: &[f64], d_start: &[f64], d_end: &[f64]) {
        self.ts.push(t);
        self.ys.extend_from_slice(y);
        self.ds.extend_from_slice(d_start);
        self.ds.extend_from_slice(d_end);
    }

    fn interval_derivs(&self, i: usize) -> (&[f64], &[f64]) {
        let m = self.dim;
        let base = 2 * i * m;
        (&self.ds[base..base + m], &self.ds[base + m..base + 2 * m])
    }

    /// Index `i` of the interval `[t_i, t_{i+1}]` containing `t`; clamped.
    fn interval(&self, t: f64) -> usize {
        let k = self.ts.partition_point(|&s| s <= t);
        k.saturating_sub(1).min(self.ts.len().saturating_sub(2))
    }

    /// Dense value at `t`; exact at knots, clamped outside `[t0, t1]`.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let m = self.dim;
        if self.ts.len() == 1 || t <= self.t0() {
            out.copy_from_slice(self.first());
            return;
        }
        if t >= self.t1() {
            out.copy_from_slice(self.last());
            return;
        }
        let i = self.interval(t);
        let (ta, tb) = (self.ts[i], self.ts[i + 1]);
        if t == ta {
            out.copy_from_slice(self.value(i));
            return;
        }
        let h = tb - ta;
        let s = (t - ta) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let (da, db) = self.interval_derivs(i);
        let (ya, yb) = (self.value(i), self.value(i + 1));
        for k in 0..m {
            out[k] = h00 * ya[k] + h10 * h * da[k] + h01 * yb[k] + h11 * h * db[k];
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out);
        out
    }

    /// Derivative of the interpolant at `t`.
    pub fn derivative(&self, t: f64) -> Vec<f64> {
        let m = self.dim;
        if self.ts.len() == 1 {
            return vec![0.0; m];
        }
        let t = t.clamp(self.t0(), self.t1());
        let i = self.interval(t);
        let (ta, tb) = (self.ts[i], self.ts[i + 1]);
        let h = tb - ta;
        let s = (t - ta) / h;
        let d00 = 6.0 * s * (s - 1.0) / h;
        let d10 = (1.0 - s) * (1.0 - 3.0 * s);
        let d01 = -d00;
        let d11 = s * (3.0 * s - 2.0);
        let (da, db) = self.interval_derivs(i);
        let (ya, yb) = (self.value(i), self.value(i + 1));
        (0..m)
            .map(|k| d00 * ya[k] + d10 * da[k] + d01 * yb[k] + d11 * db[k])
            .collect()
    }

    /// Appends `other`, whose first knot must coincide with this trajectory's last.
    pub fn append(&mut self, other: &Trajectory) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::Dimension("trajectory dimensions differ".into()));
        }
        if other.t0() != self.t1() {
            return Err(Error::Invalid(format!(
                "cannot join trajectories ending at {} and starting at {}",
                self.t1(),
                other.t0()
            )));
        }
        self.ts.extend_from_slice(&other.ts[1..]);
        self.ys.extend_from_slice(&other.ys[self.dim..]);
        self.ds.extend_from_slice(&other.ds);
        Ok(())
    }
}

fn check_finite(t: f64, y: &[f64], dy: &[f64]) -> Result<()> {
    if dy.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteRhs { t, y: y.to_vec() })
    }
}

fn eval_rhs(sys: &impl OdeSystem, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
    match sys.rhs(t, y, dy) {
        Ok(()) => check_finite(t, y, dy),
        Err(
            e @ (Error::OutsideDomain { .. }
            | Error::NotPositiveDefinite { .. }
            | Error::NonFinite { .. }
            | Error::Singular(_)),
        ) => Err(Error::ChartExit { t, source: Box::new(e) }),
        Err(e) => Err(e),
    }
}

/// Number of equal RK4 steps covering `span` with steps no longer than `step`.
pub fn rk4_step_count(span: f64, step: f64) -> usize {
    let r = span / step;
    let n = if (r - r.round()).abs() <= 1e-9 * r.max(1.0) {
        r.round()
    } else {
        r.ceil()
    };
    (n as usize).max(1)
}

/// Integrates `sys` from `(t0, y0)` to `t1 > t0`.
pub fn integrate(sys: &impl OdeSystem, y0: &[f64], t0: f64, t1: f64, method: Method) -> Result<Trajectory> {
    method.validate()?;
    if y0.len() != sys.dim() {
        return Err(Error::Dimension(format!(
            "initial state has {} entries, system has {}",
            y0.len(),
            sys.dim()
        )));
    }
    if !(t1 > t0) {
        return Err(Error::Invalid(format!("integration needs t0 < t1, got [{t0}, {t1}]")));
    }
    match method {
        Method::Rk4 { step } => rk4(sys, y0, t0, t1, step),
        Method::Dopri5 { abs_tol, rel_tol } => dopri5(sys, y0, t0, t1, abs_tol, rel_tol),
    }
}

fn rk4(sys: &impl OdeSystem, y0: &[f64], t0: f64, t1: f64, step: f64) -> Result<Trajectory> {
    let m = y0.len();
    let n = rk4_step_count(t1 - t0, step);
    let h = (t1 - t0) / n as f64;
    let mut traj = Trajectory::constant(t0, y0);
    traj.ts.reserve(n);
    traj.ys.reserve(n * m);
    traj.ds.reserve(2 * n * m);
    let mut y = y0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let mut tmp = vec![0.0; m];
    eval_rhs(sys, t0, &y, &mut k1)?;
    for i in 0..n {
        let t = t0 + i as f64 * h;
        let t_next = if i + 1 == n { t1 } else { t0 + (i + 1) as f64 * h };
        let hh = t_next - t;
        for k in 0..m {
            tmp[k] = y[k] + 0.5 * hh * k1[k];
        }
        eval_rhs(sys, t + 0.5 * hh, &tmp, &mut k2)?;
        for k in 0..m {
            tmp[k] = y[k] + 0.5 * hh * k2[k];
        }
        eval_rhs(sys, t + 0.5 * hh, &tmp, &mut k3)?;
        for k in 0..m {
            tmp[k] = y[k] + hh * k3[k];
        }
        eval_rhs(sys, t_next, &tmp, &mut k4)?;
        for k in 0..m {
            y[k] += hh / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
        }
        sys.post_step(t_next, &mut y);
        let d_start = k1.clone();
        eval_rhs(sys, t_next, &y, &mut k1)?;
        traj.push_interval(t_next, &y, &d_start, &k1);
    }
    Ok(traj)
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const MAX_STEPS: usize = 10_000_000;

fn dopri5(sys: &impl OdeSystem, y0: &[f64], t0: f64, t1: f64, abs_tol: f64, rel_tol: f64) -> Result<Trajectory> {
    let m = y0.len();
    let span = t1 - t0;
    let h_min = 1e-14 * span;
    let mut traj = Trajectory::constant(t0, y0);
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; m]; 7];
    let mut tmp = vec![0.0; m];
    let mut y_new = vec![0.0; m];
    eval_rhs(sys, t0, &y, &mut k[0])?;
    let mut t = t0;
    let mut h = initial_step(&y, &k[0], span, abs_tol, rel_tol);
    let mut steps = 0;
    while t < t1 {
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::StepUnderflow { t, h });
        }
        let last = t + h >= t1;
        let hh = if last { t1 - t } else { h };
        for s in 1..7 {
            for j in 0..m {
                let mut acc = 0.0;
                for r in 0..s {
                    acc += A[s][r] * k[r][j];
                }
                tmp[j] = y[j] + hh * acc;
            }
            if s == 6 {
                y_new.copy_from_slice(&tmp);
            }
            let ts = if s >= 5 { t + hh } else { t + C[s] * hh };
            let (head, tail) = k.split_at_mut(s);
            let _ = head;
            eval_rhs(sys, ts, &tmp, &mut tail[0])?;
        }
        let mut err: f64 = 0.0;
        for j in 0..m {
            let mut e = 0.0;
            for s in 0..7 {
                e += E[s] * k[s][j];
            }
            let scale = abs_tol + rel_tol * y[j].abs().max(y_new[j].abs());
            err = err.max((hh * e).abs() / scale);
        }
        if !err.is_finite() {
            return Err(Error::NonFiniteRhs { t, y: y.clone() });
        }
        if err <= 1.0 {
            let t_next = if last { t1 } else { t + hh };
            let mut projected = y_new.clone();
            sys.post_step(t_next, &mut projected);
            let d_start = k[0].clone();
            let d_end = if projected != y_new {
                let mut d = vec![0.0; m];
                eval_rhs(sys, t_next, &projected, &mut d)?;
                d
            } else {
                k[6].clone()
            };
            traj.push_interval(t_next, &projected, &d_start, &d_end);
            y = projected;
            k[0] = d_end;
            t = t_next;
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = hh * fac;
        } else {
            h = hh * (0.9 * err.powf(-0.2)).max(0.2);
            if h < h_min {
                return Err(Error::StepUnderflow { t, h });
            }
        }
    }
    Ok(traj)
}

fn initial_step(y: &[f64], dy: &[f64], span: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    let mut d0: f64 = 0.0;
    let mut d1: f64 = 0.0;
    for (a, b) in y.iter().zip(dy) {
        let sc = abs_tol + rel_tol * a.abs();
        d0 = d0.max(a.abs() / sc);
        d1 = d1.max(b.abs() / sc);
    }
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span } else { 0.01 * d0 / d1 };
    h.clamp(1e-6 * span, 0.1 * span)
}
