//! Fixed-step RK4 simulation of a plant and its distributed estimator.
//!
//! The stacked state is integrated in error coordinates `(x, ẽ₁, …, ẽ_l)`
//! with `ẽᵢ = wᵢ - Tx`. This is an exact linear change of variables (RK4
//! commutes with it), but it keeps the estimation error resolvable when the
//! plant state itself grows by many orders of magnitude.
//!
//! When every identity residual vanishes the errors obey `ẽ' = G ẽ` on their
//! own. RK4 on that block is then a fixed matrix per sampling interval, and
//! the plant is stepped with its own (usually much coarser) substep count.

use std::io::Write;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matnum::{self, Matrix};
use crate::synth::{self, DistributedEstimator};
use crate::sysmodel::{CommGraph, PlantModel};

pub type Vector = DVector<f64>;

/// Radius of the convergence ball used by [`convergence_metrics`].
pub const BALL_RADIUS: f64 = 1e-3;

/// Relative tolerance for a step to count as an increase of `V`.
pub const V_INCREASE_TOL: f64 = 1e-9;

/// Largest `h·ρ` allowed for one RK4 substep.
const MAX_STEP_RADIUS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalKind {
    Constant,
    Sin,
    Cos,
    Exp,
    /// `max(s, 0)`
    Ramp,
    /// `1` for `s ≥ 0`, else `0`
    Step,
}

fn one() -> f64 {
    1.0
}

/// `amplitude · kind(rate·t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalTerm {
    pub kind: SignalKind,
    pub amplitude: f64,
    #[serde(default = "one")]
    pub rate: f64,
    #[serde(default)]
    pub phase: f64,
}

impl SignalTerm {
    pub fn new(kind: SignalKind, amplitude: f64) -> Self {
        Self { kind, amplitude, rate: 1.0, phase: 0.0 }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let s = self.rate * t + self.phase;
        let v = match self.kind {
            SignalKind::Constant => 1.0,
            SignalKind::Sin => s.sin(),
            SignalKind::Cos => s.cos(),
            SignalKind::Exp => s.exp(),
            SignalKind::Ramp => s.max(0.0),
            SignalKind::Step => {
                if s >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        };
        self.amplitude * v
    }
}

/// Sum of terms per input channel.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SignalSpec {
    pub channels: Vec<Vec<SignalTerm>>,
}

impl SignalSpec {
    pub fn new(channels: Vec<Vec<SignalTerm>>) -> Self {
        Self { channels }
    }

    pub fn zero(m: usize) -> Self {
        Self { channels: vec![Vec::new(); m] }
    }

    pub fn m(&self) -> usize {
        self.channels.len()
    }

    pub fn evaluate(&self, t: f64) -> Vector {
        Vector::from_iterator(self.m(), self.channels.iter().map(|terms| terms.iter().map(|s| s.eval(t)).sum()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub t_end: f64,
    /// Sampling step of the trace; RK4 may subdivide it.
    pub dt: f64,
    pub x0: Vector,
    /// Per-node initial estimator states, zero when absent.
    pub w0: Option<Vec<Vector>>,
    pub input: SignalSpec,
}

/// Sampled trajectories; every per-step field has `times.len()` entries and
/// per-node fields are indexed `[step][node]`.
#[derive(Debug, Clone)]
pub struct SimulationTrace {
    pub times: Vec<f64>,
    pub x: Vec<Vector>,
    pub w: Vec<Vec<Vector>>,
    pub z: Vec<Vector>,
    pub z_i: Vec<Vec<Vector>>,
    pub e_i: Vec<Vec<Vector>>,
    pub etilde: Vec<Vec<Vector>>,
    pub v: Vec<f64>,
    /// RK4 substeps per sampling interval for the estimator errors.
    pub substeps: usize,
    /// Same for the plant; differs from `substeps` only when the error
    /// dynamics are decoupled from the plant.
    pub plant_substeps: usize,
}

impl SimulationTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn l(&self) -> usize {
        self.e_i.first().map_or(0, Vec::len)
    }

    pub fn error_norms(&self, node: usize) -> Vec<f64> {
        self.e_i.iter().map(|e| e[node].norm()).collect()
    }
}

fn snap(residual: Matrix, limit: f64) -> Matrix {
    if residual.norm() <= limit {
        Matrix::zeros(residual.nrows(), residual.ncols())
    } else {
        residual
    }
}

fn time_grid(t_end: f64, dt: f64) -> Vec<f64> {
    let steps = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut times: Vec<f64> = (0..steps).map(|k| k as f64 * dt).collect();
    times.push(t_end);
    times
}

struct Rk4<'a> {
    a: &'a Matrix,
    b: &'a Matrix,
    input: &'a SignalSpec,
}

impl Rk4<'_> {
    fn f(&self, t: f64, s: &Vector) -> Vector {
        self.a * s + self.b * self.input.evaluate(t)
    }

    fn step(&self, t: f64, h: f64, s: &Vector) -> Vector {
        let k1 = self.f(t, s);
        let k2 = self.f(t + 0.5 * h, &(s + 0.5 * h * &k1));
        let k3 = self.f(t + 0.5 * h, &(s + 0.5 * h * &k2));
        let k4 = self.f(t + h, &(s + h * &k3));
        s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    }
}

fn substeps_for(dt: f64, a: &Matrix) -> Result<usize> {
    let radius = if a.is_empty() { 0.0 } else { matnum::eigenvalues(a)?.radius() };
    Ok(((dt * radius / MAX_STEP_RADIUS).ceil() as usize).max(1))
}

/// One RK4 step of `ṡ = As` as a matrix.
fn rk4_propagator(a: &Matrix, h: f64) -> Matrix {
    let ha = h * a;
    let mut term = Matrix::identity(a.nrows(), a.ncols());
    let mut out = term.clone();
    for k in 1..=4 {
        term = &term * &ha / k as f64;
        out += &term;
    }
    out
}

/// Integrates `ẋ = Ax + Bu` together with every node's estimator.
pub fn simulate(
    p: &PlantModel,
    d: &DistributedEstimator,
    g: &CommGraph,
    sim: &SimulationConfig,
) -> Result<SimulationTrace> {
    simulate_impl(p, d, g, sim, false)
}

fn simulate_impl(
    p: &PlantModel,
    d: &DistributedEstimator,
    g: &CommGraph,
    sim: &SimulationConfig,
    force_stacked: bool,
) -> Result<SimulationTrace> {
    let (n, q, l) = (p.n(), d.q(), d.l());
    if d.n_state() != n || l != p.l() || g.l() != l {
        return Err(Error::DimensionMismatch(format!(
            "estimator (n = {}, {} nodes), plant (n = {n}, {} sensors) and graph ({} nodes) disagree",
            d.n_state(),
            l,
            p.l(),
            g.l()
        )));
    }
    for (i, v) in d.nodes.iter().enumerate() {
        if v.n.shape() != (q, q)
            || v.h.shape() != (q, p.m())
            || v.l.shape() != (q, p.sensors[i].c.nrows())
            || v.m.shape() != (q, q)
            || v.r.shape() != (p.r(), q)
        {
            return Err(Error::DimensionMismatch(format!("node {} matrices do not fit the plant", i + 1)));
        }
    }
    if sim.x0.len() != n {
        return Err(Error::DimensionMismatch(format!("x0 has {} entries, expected {n}", sim.x0.len())));
    }
    if sim.input.m() != p.m() {
        return Err(Error::DimensionMismatch(format!(
            "input has {} channels, expected {}",
            sim.input.m(),
            p.m()
        )));
    }
    if let Some(w0) = &sim.w0 {
        if w0.len() != l || w0.iter().any(|w| w.len() != q) {
            return Err(Error::DimensionMismatch(format!("w0 must hold {l} vectors of length {q}")));
        }
    }
    if !(sim.dt > 0.0 && sim.dt.is_finite() && sim.t_end > 0.0 && sim.t_end.is_finite()) {
        return Err(Error::Precondition("dt and t_end must be positive and finite".into()));
    }

    let dim = n + l * q;
    let mut a_full = Matrix::zeros(dim, dim);
    let mut b_full = Matrix::zeros(dim, p.m());
    a_full.view_mut((0, 0), (n, n)).copy_from(&p.a);
    b_full.view_mut((0, 0), (n, p.m())).copy_from(&p.b);
    let gcl = d.closed_loop(&g.laplacian());
    a_full.view_mut((n, n), (l * q, l * q)).copy_from(&gcl);
    let mut out_res = Vec::with_capacity(l);
    let mut m_inv = Vec::with_capacity(l);
    for i in 0..l {
        let (dx, lim) = synth::state_identity(p, d, i);
        a_full.view_mut((n + i * q, 0), (q, n)).copy_from(&snap(dx, lim));
        let (du, lim) = synth::input_identity(p, d, i);
        b_full.view_mut((n + i * q, 0), (q, p.m())).copy_from(&snap(du, lim));
        let (dk, lim) = synth::output_identity(p, d, i);
        out_res.push(snap(dk, lim));
        let mi = d.nodes[i]
            .m
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::NumericFailure(format!("node {} M is singular", i + 1)))?;
        m_inv.push(mi);
    }

    let decoupled = !force_stacked
        && a_full.view((n, 0), (l * q, n)).iter().all(|v| *v == 0.0)
        && b_full.view((n, 0), (l * q, p.m())).iter().all(|v| *v == 0.0);
    let (substeps, plant_substeps) = if decoupled {
        (substeps_for(sim.dt, &gcl)?, substeps_for(sim.dt, &p.a)?)
    } else {
        let k = substeps_for(sim.dt, &a_full)?;
        (k, k)
    };
    log::debug!("simulate: dim = {dim}, decoupled = {decoupled}, {substeps}/{plant_substeps} substep(s)");

    let mut s = Vector::zeros(dim);
    s.rows_mut(0, n).copy_from(&sim.x0);
    let tx0 = &d.t * &sim.x0;
    for i in 0..l {
        let wi = sim.w0.as_ref().map_or_else(|| Vector::zeros(q), |w| w[i].clone());
        s.rows_mut(n + i * q, q).copy_from(&(wi - &tx0));
    }

    let times = time_grid(sim.t_end, sim.dt);
    let mut tr = SimulationTrace {
        times: Vec::with_capacity(times.len()),
        x: Vec::with_capacity(times.len()),
        w: Vec::with_capacity(times.len()),
        z: Vec::with_capacity(times.len()),
        z_i: Vec::with_capacity(times.len()),
        e_i: Vec::with_capacity(times.len()),
        etilde: Vec::with_capacity(times.len()),
        v: Vec::with_capacity(times.len()),
        substeps,
        plant_substeps,
    };
    let record = |tr: &mut SimulationTrace, t: f64, s: &Vector| {
        let x = s.rows(0, n).into_owned();
        let z = &p.k * &x;
        let tx = &d.t * &x;
        let (mut w, mut zi, mut ei, mut et) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let mut v = 0.0;
        for i in 0..l {
            let e = s.rows(n + i * q, q).into_owned();
            let err = &d.nodes[i].r * &e + &out_res[i] * &x;
            v += e.dot(&(&m_inv[i] * &e));
            w.push(&tx + &e);
            zi.push(&z + &err);
            ei.push(err);
            et.push(e);
        }
        tr.times.push(t);
        tr.x.push(x);
        tr.w.push(w);
        tr.z.push(z);
        tr.z_i.push(zi);
        tr.e_i.push(ei);
        tr.etilde.push(et);
        tr.v.push(v);
    };

    record(&mut tr, times[0], &s);
    let full = Rk4 { a: &a_full, b: &b_full, input: &sim.input };
    let plant = Rk4 { a: &p.a, b: &p.b, input: &sim.input };
    let mut propagator: Option<(f64, Matrix)> = None;
    for k in 1..times.len() {
        let (t0, t1) = (times[k - 1], times[k]);
        if decoupled {
            let span = t1 - t0;
            if propagator.as_ref().is_none_or(|(h, _)| *h != span) {
                propagator = Some((span, rk4_propagator(&gcl, span / substeps as f64).pow(substeps as u32)));
            }
            let phi = &propagator.as_ref().expect("set above").1;
            let e = phi * s.rows(n, l * q);
            s.rows_mut(n, l * q).copy_from(&e);
            let h = span / plant_substeps as f64;
            let mut x = s.rows(0, n).into_owned();
            for j in 0..plant_substeps {
                x = plant.step(t0 + j as f64 * h, h, &x);
            }
            s.rows_mut(0, n).copy_from(&x);
        } else {
            let h = (t1 - t0) / substeps as f64;
            for j in 0..substeps {
                s = full.step(t0 + j as f64 * h, h, &s);
            }
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { last_valid_time: t0 });
        }
        record(&mut tr, t1, &s);
    }
    Ok(tr)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeMetrics {
    pub initial_error_norm: f64,
    pub final_error_norm: f64,
    pub max_error_norm: f64,
    /// First time after which `‖eᵢ‖ ≤ BALL_RADIUS` holds to the end of the
    /// trace; `None` if the trace ends outside the ball.
    pub time_to_ball: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceMetrics {
    pub t_end: f64,
    pub ball_radius: f64,
    pub nodes: Vec<NodeMetrics>,
    /// Steps where the network Lyapunov value `V` grew by more than
    /// `V_INCREASE_TOL · V`.
    pub v_violations: usize,
    pub all_converged: bool,
}

pub fn convergence_metrics(tr: &SimulationTrace) -> Result<ConvergenceMetrics> {
    if tr.is_empty() {
        return Err(Error::Precondition("empty trace".into()));
    }
    let nodes: Vec<NodeMetrics> = (0..tr.l())
        .map(|i| {
            let norms = tr.error_norms(i);
            let last_out = norms.iter().rposition(|&e| !(e <= BALL_RADIUS));
            let time_to_ball = match last_out {
                None => Some(tr.times[0]),
                Some(k) if k + 1 < norms.len() => Some(tr.times[k + 1]),
                Some(_) => None,
            };
            NodeMetrics {
                initial_error_norm: norms[0],
                final_error_norm: *norms.last().expect("nonempty"),
                max_error_norm: norms.iter().copied().fold(0.0, f64::max),
                time_to_ball,
            }
        })
        .collect();
    let v_violations = tr.v.windows(2).filter(|w| w[1] - w[0] > V_INCREASE_TOL * w[0]).count();
    let all_converged = nodes.iter().all(|m| m.time_to_ball.is_some());
    Ok(ConvergenceMetrics {
        t_end: *tr.times.last().expect("nonempty"),
        ball_radius: BALL_RADIUS,
        nodes,
        v_violations,
        all_converged,
    })
}

/// CSV with columns `t, x…, (wᵢ…, zᵢ…, eᵢ_norm) per node, z…, V`.
pub fn write_trace_csv<W: Write>(tr: &SimulationTrace, mut out: W) -> Result<()> {
    let n = tr.x.first().map_or(0, |x| x.len());
    let r = tr.z.first().map_or(0, |z| z.len());
    let q = tr.w.first().and_then(|w| w.first()).map_or(0, |w| w.len());
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|j| format!("x{j}")));
    for i in 1..=tr.l() {
        header.extend((1..=q).map(|j| format!("w{i}_{j}")));
        header.extend((1..=r).map(|j| format!("z{i}_{j}")));
        header.push(format!("e{i}_norm"));
    }
    header.extend((1..=r).map(|j| format!("z_{j}")));
    header.push("V".into());
    writeln!(out, "{}", header.join(","))?;

    let mut line = String::new();
    for k in 0..tr.len() {
        line.clear();
        let mut put = |v: f64| {
            if !line.is_empty() {
                line.push(',');
            }
            line.push_str(&format!("{v:.16e}"));
        };
        put(tr.times[k]);
        tr.x[k].iter().for_each(|&v| put(v));
        for i in 0..tr.l() {
            tr.w[k][i].iter().for_each(|&v| put(v));
            tr.z_i[k][i].iter().for_each(|&v| put(v));
            put(tr.e_i[k][i].norm());
        }
        tr.z[k].iter().for_each(|&v| put(v));
        put(tr.v[k]);
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Two-column `t ‖eᵢ(t)‖` data for gnuplot.
pub fn write_error_dat<W: Write>(tr: &SimulationTrace, node: usize, mut out: W) -> Result<()> {
    writeln!(out, "# t |e{}|", node + 1)?;
    for (t, e) in tr.times.iter().zip(tr.error_norms(node)) {
        writeln!(out, "{t:.16e} {e:.16e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::fixtures;
    use crate::synth::synth_distributed;

    fn demo() -> (PlantModel, DistributedEstimator, CommGraph, SimulationConfig) {
        let sc = fixtures::demo();
        let (est, _) = synth_distributed(&sc.plant, &sc.graph, &Default::default()).unwrap();
        (sc.plant, est, sc.graph, sc.simulation.unwrap())
    }

    #[test]
    fn signal_kinds() {
        let t = 0.5;
        assert_eq!(SignalTerm::new(SignalKind::Constant, 2.0).eval(t), 2.0);
        assert_eq!(SignalTerm::new(SignalKind::Sin, 1.0).eval(t), t.sin());
        assert_eq!(SignalTerm::new(SignalKind::Exp, 1.0).eval(t), t.exp());
        let late = SignalTerm { kind: SignalKind::Step, amplitude: 3.0, rate: 1.0, phase: -1.0 };
        assert_eq!(late.eval(0.5), 0.0);
        assert_eq!(late.eval(1.0), 3.0);
        let ramp = SignalTerm { kind: SignalKind::Ramp, amplitude: 1.0, rate: 2.0, phase: -1.0 };
        assert_eq!(ramp.eval(0.25), 0.0);
        assert_eq!(ramp.eval(1.0), 1.0);
    }

    #[test]
    fn signal_json_defaults() {
        let s: SignalTerm = serde_json::from_str(r#"{"kind":"cos","amplitude":2}"#).unwrap();
        assert_eq!(s, SignalTerm { kind: SignalKind::Cos, amplitude: 2.0, rate: 1.0, phase: 0.0 });
    }

    proptest! {
        #[test]
        fn grid_is_uniform_up_to_the_last_step(t_end in 1e-3f64..50.0, dt in 1e-3f64..1.0) {
            let g = time_grid(t_end, dt);
            prop_assert_eq!(g[0], 0.0);
            prop_assert_eq!(*g.last().unwrap(), t_end);
            for w in g.windows(2) {
                prop_assert!(w[1] > w[0]);
                prop_assert!(w[1] - w[0] <= dt * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn grid_ends_exactly_at_t_end() {
        let g = time_grid(1.0, 0.3);
        assert_eq!(g.len(), 5);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert_eq!(time_grid(10.0, 1e-3).len(), 10_001);
    }

    #[test]
    fn rk4_matches_exponential() {
        let a = Matrix::from_row_slice(1, 1, &[-1.0]);
        let b = Matrix::zeros(1, 0);
        let input = SignalSpec::zero(0);
        let rk = Rk4 { a: &a, b: &b, input: &input };
        let mut s = Vector::from_element(1, 1.0);
        for k in 0..100 {
            s = rk.step(k as f64 * 0.01, 0.01, &s);
        }
        assert!((s[0] - (-1.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn equilibrium_start_stays_at_zero_error() {
        let (p, est, g, mut sim) = demo();
        sim.t_end = 2.0;
        let tx = &est.t * &sim.x0;
        sim.w0 = Some(vec![tx.clone(), tx]);
        let tr = simulate(&p, &est, &g, &sim).unwrap();
        let m = convergence_metrics(&tr).unwrap();
        for node in &m.nodes {
            assert!(node.max_error_norm <= 1e-12);
            assert_eq!(node.time_to_ball, Some(0.0));
        }
    }

    #[test]
    fn error_equals_output_map_of_etilde() {
        let (p, est, g, mut sim) = demo();
        sim.t_end = 1.0;
        let tr = simulate(&p, &est, &g, &sim).unwrap();
        for k in (0..tr.len()).step_by(97) {
            for i in 0..2 {
                let direct = &est.nodes[i].r * &tr.etilde[k][i];
                assert!((&tr.e_i[k][i] - direct).norm() <= 1e-9);
            }
        }
    }

    #[test]
    fn error_dynamics_ignore_input_and_plant_state() {
        let (p, est, g, mut sim) = demo();
        sim.t_end = 1.0;
        let tr1 = simulate(&p, &est, &g, &sim).unwrap();
        let shift = Vector::from_fn(6, |i, _| i as f64 - 2.5);
        let mut sim2 = sim.clone();
        sim2.x0 = &sim.x0 + &shift;
        let dw = &est.t * &shift;
        sim2.w0 = Some(sim.w0.as_ref().unwrap().iter().map(|w| w + &dw).collect());
        sim2.input = SignalSpec::new(vec![
            vec![SignalTerm::new(SignalKind::Cos, 4.0)],
            vec![SignalTerm::new(SignalKind::Ramp, -1.0)],
        ]);
        let tr2 = simulate(&p, &est, &g, &sim2).unwrap();
        for k in 0..tr1.len() {
            for i in 0..2 {
                assert!((&tr1.etilde[k][i] - &tr2.etilde[k][i]).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn split_propagation_matches_stacked_rk4() {
        let (p, d, g, mut sim) = demo();
        sim.t_end = 1.0;
        sim.dt = 0.05;
        let a = simulate(&p, &d, &g, &sim).unwrap();
        let b = simulate_impl(&p, &d, &g, &sim, true).unwrap();
        assert!(a.plant_substeps < a.substeps);
        for k in 0..a.len() {
            for i in 0..a.l() {
                let scale = 1.0 + b.e_i[k][i].norm();
                assert!((&a.e_i[k][i] - &b.e_i[k][i]).norm() < 1e-10 * scale, "step {k}");
            }
            assert!((&a.x[k] - &b.x[k]).norm() < 1e-4 * (1.0 + b.x[k].norm()), "step {k}");
        }
    }

    #[test]
    fn negated_gamma_diverges() {
        let (p, mut est, g, mut sim) = demo();
        est.gamma = -est.gamma;
        sim.t_end = 0.01;
        let tr = simulate(&p, &est, &g, &sim).unwrap();
        let m = convergence_metrics(&tr).unwrap();
        for node in &m.nodes {
            assert!(node.final_error_norm > node.initial_error_norm);
            assert_eq!(node.time_to_ball, None);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let (p, est, g, mut sim) = demo();
        sim.x0 = Vector::zeros(5);
        assert!(matches!(simulate(&p, &est, &g, &sim), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn csv_layout() {
        let (p, est, g, mut sim) = demo();
        sim.t_end = 0.002;
        let tr = simulate(&p, &est, &g, &sim).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&tr, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        let header: Vec<&str> = lines[0].split(',').collect();
        assert_eq!(header.len(), 1 + 6 + 2 * (5 + 1 + 1) + 1 + 1);
        assert_eq!(header[7], "w1_1");
        assert_eq!(header[12], "z1_1");
        assert_eq!(header[13], "e1_norm");
        assert_eq!(*header.last().unwrap(), "V");
        assert!(lines[1..].iter().all(|l| l.split(',').count() == header.len()));
        assert!(!text.contains('\r'));
    }
}
