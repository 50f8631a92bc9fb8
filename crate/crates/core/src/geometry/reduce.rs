//! Removal of the shift by a spatial flow and of the lapse by a conformal
//! rescaling.

use super::family::MetricFamily;
use super::fields::{constant_field, FieldRef, FieldSamples, FrozenField, PowerField, ProductField, ScalarField, TimeEnd};
use crate::error::{Error, Result};
use std::sync::{Arc, Mutex};

/// Time at which pulled-back fields are frozen to represent their limits.
pub const FLOW_FREEZE_TIME: f64 = 1e6;

/// Solution `X(t, y)` of `dX/dt = -b(t, X)`, `X(0, y) = y`, together with
/// `X_y` from the variational equation `d X_y/dt = -b_x(t, X) X_y`.
#[derive(Debug)]
pub struct ShiftFlow {
    shift: FieldRef,
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    cache: Mutex<Vec<(u64, Vec<u64>, Arc<FlowPoint>)>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowPoint {
    pub x: Vec<f64>,
    pub x_y: Vec<f64>,
}

// Dormand-Prince 5(4) tableau
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
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

impl ShiftFlow {
    pub fn new(shift: FieldRef) -> Self {
        ShiftFlow { shift, rtol: 1e-12, atol: 1e-13, max_steps: 200_000, cache: Mutex::new(Vec::new()) }
    }

    fn rhs(&self, t: f64, z: &[f64]) -> Result<Vec<f64>> {
        let n = z.len() / 2;
        let b = self.shift.sample(t, &z[..n])?;
        let mut out = vec![0.0; 2 * n];
        for i in 0..n {
            out[i] = -b.value[i];
            out[n + i] = -b.dx[i] * z[n + i];
        }
        Ok(out)
    }

    /// Flow map and its derivative at time `t` for the starting points `ys`.
    pub fn solve(&self, t: f64, ys: &[f64]) -> Result<Arc<FlowPoint>> {
        let key_t = t.to_bits();
        let key_y: Vec<u64> = ys.iter().map(|y| y.to_bits()).collect();
        if let Some((_, _, p)) = self.cache.lock().unwrap().iter().find(|(kt, ky, _)| *kt == key_t && *ky == key_y) {
            return Ok(p.clone());
        }
        let p = Arc::new(self.integrate(t, ys)?);
        let mut cache = self.cache.lock().unwrap();
        if cache.len() >= 16 {
            cache.remove(0);
        }
        cache.push((key_t, key_y, p.clone()));
        Ok(p)
    }

    fn integrate(&self, t_end: f64, ys: &[f64]) -> Result<FlowPoint> {
        let n = ys.len();
        let mut z: Vec<f64> = ys.iter().copied().chain(std::iter::repeat(1.0).take(n)).collect();
        if t_end == 0.0 {
            return Ok(FlowPoint { x: z[..n].to_vec(), x_y: z[n..].to_vec() });
        }
        let dir = t_end.signum();
        let mut t = 0.0;
        let mut h = 1e-2 * dir;
        let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
        for step in 0.. {
            if step >= self.max_steps {
                return Err(Error::FlowIntegration { t, message: format!("exceeded {} steps", self.max_steps) });
            }
            if (t_end - t) * dir <= 0.0 {
                break;
            }
            if (t + h - t_end) * dir > 0.0 {
                h = t_end - t;
            }
            k.clear();
            for s in 0..7 {
                let mut zs = z.clone();
                for (j, kj) in k.iter().enumerate() {
                    let a = A[s][j];
                    if a != 0.0 {
                        for i in 0..2 * n {
                            zs[i] += h * a * kj[i];
                        }
                    }
                }
                k.push(self.rhs(t + C[s] * h, &zs)?);
            }
            let mut z5 = z.clone();
            let mut err = 0.0f64;
            for i in 0..2 * n {
                let mut d5 = 0.0;
                let mut d4 = 0.0;
                for s in 0..7 {
                    d5 += B5[s] * k[s][i];
                    d4 += B4[s] * k[s][i];
                }
                z5[i] += h * d5;
                let sc = self.atol + self.rtol * z[i].abs().max(z5[i].abs());
                err = err.max((h * (d5 - d4)).abs() / sc);
            }
            if !err.is_finite() {
                return Err(Error::FlowIntegration { t, message: "non-finite state".into() });
            }
            if err <= 1.0 {
                t += h;
                z = z5;
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
            if h.abs() < 1e-14 * t.abs().max(1.0) {
                return Err(Error::FlowIntegration { t, message: "step size underflow".into() });
            }
        }
        Ok(FlowPoint { x: z[..n].to_vec(), x_y: z[n..].to_vec() })
    }
}

/// `(t, y) -> f(t, X(t, y))`.
#[derive(Clone, Debug)]
pub struct PullbackField {
    pub inner: FieldRef,
    pub flow: Arc<ShiftFlow>,
}

impl ScalarField for PullbackField {
    fn sample(&self, t: f64, ys: &[f64]) -> Result<FieldSamples> {
        let p = self.flow.solve(t, ys)?;
        let f = self.inner.sample(t, &p.x)?;
        let b = self.flow.shift.sample(t, &p.x)?;
        let n = ys.len();
        Ok(FieldSamples {
            dt: (0..n).map(|i| f.dt[i] - f.dx[i] * b.value[i]).collect(),
            dx: (0..n).map(|i| f.dx[i] * p.x_y[i]).collect(),
            value: f.value,
        })
    }

    fn asymptote(&self, end: TimeEnd) -> Option<FieldRef> {
        if let Some(v) = self.inner.constant() {
            return Some(constant_field(v, 1.0));
        }
        Some(Arc::new(FrozenField { inner: Arc::new(self.clone()), t0: end.sign() * FLOW_FREEZE_TIME }))
    }

    fn is_static(&self) -> bool {
        self.inner.constant().is_some()
    }

    fn constant(&self) -> Option<f64> {
        self.inner.constant()
    }
}

/// Pulled-back spatial metric `h(t, X) X_y^2`.
#[derive(Clone, Debug)]
pub struct PullbackMetric {
    pub inner: FieldRef,
    pub flow: Arc<ShiftFlow>,
}

impl PullbackMetric {
    fn values(&self, t: f64, ys: &[f64]) -> Result<Vec<f64>> {
        let p = self.flow.solve(t, ys)?;
        let h = self.inner.sample(t, &p.x)?;
        Ok((0..ys.len()).map(|i| h.value[i] * p.x_y[i] * p.x_y[i]).collect())
    }
}

impl ScalarField for PullbackMetric {
    fn sample(&self, t: f64, ys: &[f64]) -> Result<FieldSamples> {
        let p = self.flow.solve(t, ys)?;
        let h = self.inner.sample(t, &p.x)?;
        let b = self.flow.shift.sample(t, &p.x)?;
        let n = ys.len();
        let mut value = vec![0.0; n];
        let mut dt = vec![0.0; n];
        for i in 0..n {
            let xy = p.x_y[i];
            let xdot = -b.value[i];
            let xy_dot = -b.dx[i] * xy;
            value[i] = h.value[i] * xy * xy;
            dt[i] = (h.dt[i] + h.dx[i] * xdot) * xy * xy + 2.0 * h.value[i] * xy * xy_dot;
        }
        let d = 1e-5;
        let plus: Vec<f64> = ys.iter().map(|y| y + d).collect();
        let minus: Vec<f64> = ys.iter().map(|y| y - d).collect();
        let vp = self.values(t, &plus)?;
        let vm = self.values(t, &minus)?;
        let dx = (0..n).map(|i| (vp[i] - vm[i]) / (2.0 * d)).collect();
        Ok(FieldSamples { value, dt, dx })
    }

    fn asymptote(&self, end: TimeEnd) -> Option<FieldRef> {
        Some(Arc::new(FrozenField { inner: Arc::new(self.clone()), t0: end.sign() * FLOW_FREEZE_TIME }))
    }

    fn is_static(&self) -> bool {
        false
    }
}

/// Pull the family back along the flow that removes the shift.  Families
/// without shift are returned unchanged.
pub fn shift_flow_reduce(family: &MetricFamily) -> Result<MetricFamily> {
    if !family.has_shift() {
        return Ok(family.clone());
    }
    let flow = Arc::new(ShiftFlow::new(family.shift.clone()));
    // probe the flow once so integration failures surface here
    flow.solve(1.0, &[0.0])?;
    let pull = |f: &FieldRef| -> FieldRef { Arc::new(PullbackField { inner: f.clone(), flow: flow.clone() }) };
    Ok(MetricFamily {
        name: format!("{}|flow", family.name),
        lapse: pull(&family.lapse),
        shift: constant_field(0.0, family.circumference),
        spatial: Arc::new(PullbackMetric { inner: family.spatial.clone(), flow: flow.clone() }),
        mass: pull(&family.mass),
        mu: family.mu,
        circumference: family.circumference,
    })
}

/// Conformal rescaling to unit lapse: `h -> h / c^2`, `m -> c m`.
pub fn conformal_reduce(family: &MetricFamily) -> Result<MetricFamily> {
    if family.has_unit_lapse() {
        return Ok(family.clone());
    }
    let c = family.lapse.clone();
    Ok(MetricFamily {
        name: format!("{}|conformal", family.name),
        lapse: constant_field(1.0, family.circumference),
        shift: family.shift.clone(),
        spatial: Arc::new(ProductField(family.spatial.clone(), Arc::new(PowerField(c.clone(), -2.0)))),
        mass: Arc::new(ProductField(c, family.mass.clone())),
        mu: family.mu,
        circumference: family.circumference,
    })
}

/// Both reductions in sequence.
pub fn reduce(family: &MetricFamily) -> Result<MetricFamily> {
    conformal_reduce(&shift_flow_reduce(family)?)
}

/// Coordinate Christoffel symbols `gamma[a][b][c] = Gamma^a_{bc}` in `(t, x)`.
pub fn christoffel(family: &MetricFamily, t: f64, x: f64) -> Result<[[[f64; 2]; 2]; 2]> {
    let c = family.lapse.sample(t, &[x])?;
    let b = family.shift.sample(t, &[x])?;
    let h = family.spatial.sample(t, &[x])?;
    let (cv, bv, hv) = (c.value[0], b.value[0], h.value[0]);
    // d[k] = partial_k, k = 0 (t), 1 (x)
    let dc = [c.dt[0], c.dx[0]];
    let db = [b.dt[0], b.dx[0]];
    let dh = [h.dt[0], h.dx[0]];
    let g = [[-cv * cv + hv * bv * bv, hv * bv], [hv * bv, hv]];
    let mut dg = [[[0.0; 2]; 2]; 2];
    for k in 0..2 {
        let d00 = -2.0 * cv * dc[k] + dh[k] * bv * bv + 2.0 * hv * bv * db[k];
        let d01 = dh[k] * bv + hv * db[k];
        dg[k] = [[d00, d01], [d01, dh[k]]];
    }
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    let gi = [[g[1][1] / det, -g[0][1] / det], [-g[1][0] / det, g[0][0] / det]];
    let mut out = [[[0.0; 2]; 2]; 2];
    for a in 0..2 {
        for bb in 0..2 {
            for cc in 0..2 {
                let mut s = 0.0;
                for d in 0..2 {
                    s += gi[a][d] * (dg[bb][d][cc] + dg[cc][d][bb] - dg[d][bb][cc]);
                }
                out[a][bb][cc] = 0.5 * s;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::family::FamilySpec;
    use crate::geometry::fields::{FieldSpec, FourierSeries, Term, TimeProfile};
    use std::f64::consts::PI;

    /// Fixed-step RK4 for the same flow, used as an independent route.
    fn rk4_flow(b: &FieldRef, t_end: f64, y: f64, steps: usize) -> (f64, f64) {
        let f = |t: f64, x: f64, xy: f64| {
            let s = b.sample(t, &[x]).unwrap();
            (-s.value[0], -s.dx[0] * xy)
        };
        let h = t_end / steps as f64;
        let (mut x, mut xy) = (y, 1.0);
        for i in 0..steps {
            let t = i as f64 * h;
            let k1 = f(t, x, xy);
            let k2 = f(t + h / 2.0, x + h / 2.0 * k1.0, xy + h / 2.0 * k1.1);
            let k3 = f(t + h / 2.0, x + h / 2.0 * k2.0, xy + h / 2.0 * k2.1);
            let k4 = f(t + h, x + h * k3.0, xy + h * k3.1);
            x += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            xy += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        }
        (x, xy)
    }

    #[test]
    fn flow_matches_rk4() {
        let fam = FamilySpec::shifted(1.0).build().unwrap();
        let flow = ShiftFlow::new(fam.shift.clone());
        for &t in &[2.0, -3.0] {
            let p = flow.solve(t, &[0.3, 2.0]).unwrap();
            for (i, &y) in [0.3, 2.0].iter().enumerate() {
                let (x, xy) = rk4_flow(&fam.shift, t, y, 4000);
                assert!((p.x[i] - x).abs() < 1e-10, "{} vs {}", p.x[i], x);
                assert!((p.x_y[i] - xy).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_shift_is_identity() {
        let fam = FamilySpec::bump(1.0).build().unwrap();
        let red = shift_flow_reduce(&fam).unwrap();
        assert_eq!(red.name, fam.name);
    }

    #[test]
    fn pulled_back_metric_time_derivative() {
        let fam = FamilySpec::shifted(1.0).build().unwrap();
        let red = shift_flow_reduce(&fam).unwrap();
        assert!(!red.has_shift());
        let (t, y) = (0.8, 1.1);
        let s = red.spatial.sample(t, &[y]).unwrap();
        let d = 1e-4;
        let fd = (red.spatial.value(t + d, y).unwrap() - red.spatial.value(t - d, y).unwrap()) / (2.0 * d);
        assert!((s.dt[0] - fd).abs() < 1e-7, "{} vs {}", s.dt[0], fd);
    }

    #[test]
    fn christoffel_exponential_scale_factor() {
        let fam = FamilySpec::Custom {
            mu: 1.0,
            lapse: None,
            shift: None,
            spatial: FieldSpec { terms: vec![Term { spatial: FourierSeries::constant(1.0), time: TimeProfile::Exp { rate: 2.0 } }] },
            mass: FieldSpec::constant(1.0),
            circumference: 2.0 * PI,
        }
        .build()
        .unwrap();
        for &t in &[0.0, 0.7] {
            let g = christoffel(&fam, t, 0.4).unwrap();
            assert!((g[0][1][1] - (2.0 * t).exp()).abs() < 1e-12);
            assert!((g[1][0][1] - 1.0).abs() < 1e-12);
            assert!((g[1][1][0] - 1.0).abs() < 1e-12);
            assert!(g[0][0][0].abs() < 1e-14 && g[1][1][1].abs() < 1e-14);
        }
    }

    #[test]
    fn christoffel_matches_metric_differences() {
        let fam = FamilySpec::shifted(1.0).build().unwrap();
        let metric = |t: f64, x: f64| {
            let c = fam.lapse.value(t, x).unwrap();
            let b = fam.shift.value(t, x).unwrap();
            let h = fam.spatial.value(t, x).unwrap();
            [[-c * c + h * b * b, h * b], [h * b, h]]
        };
        let (t, x) = (0.5, 1.2);
        let d = 1e-5;
        let mut dg = [[[0.0; 2]; 2]; 2];
        for k in 0..2 {
            let (tp, xp, tm, xm) = if k == 0 { (t + d, x, t - d, x) } else { (t, x + d, t, x - d) };
            let (gp, gm) = (metric(tp, xp), metric(tm, xm));
            for i in 0..2 {
                for j in 0..2 {
                    dg[k][i][j] = (gp[i][j] - gm[i][j]) / (2.0 * d);
                }
            }
        }
        let g = metric(t, x);
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        let gi = [[g[1][1] / det, -g[0][1] / det], [-g[1][0] / det, g[0][0] / det]];
        let ch = christoffel(&fam, t, x).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    let mut s = 0.0;
                    for e in 0..2 {
                        s += 0.5 * gi[a][e] * (dg[b][e][c] + dg[c][e][b] - dg[e][b][c]);
                    }
                    assert!((s - ch[a][b][c]).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn conformal_reduction_fields() {
        let fam = FamilySpec::Custom {
            mu: 1.0,
            lapse: Some(FieldSpec { terms: vec![Term { spatial: FourierSeries { mean: 1.0, cos: vec![], sin: vec![0.5] }, time: TimeProfile::Const }] }),
            shift: None,
            spatial: FieldSpec::constant(2.0),
            mass: FieldSpec::constant(1.5),
            circumference: 2.0 * PI,
        }
        .build()
        .unwrap();
        let red = conformal_reduce(&fam).unwrap();
        assert!(red.is_reduced());
        let x: f64 = 0.9;
        let c = 1.0 + 0.5 * x.sin();
        assert!((red.spatial.value(0.0, x).unwrap() - 2.0 / (c * c)).abs() < 1e-14);
        assert!((red.mass.value(0.0, x).unwrap() - 1.5 * c).abs() < 1e-14);
    }
}
