//! Acceptance suite: one PASS/FAIL line per criterion.

use std::time::{Duration, Instant};

use destimate::error::Error;
use destimate::fixtures;
use destimate::gen;
use destimate::matnum;
use destimate::netsim::{self, SignalKind, SignalSpec, SignalTerm, SimulationConfig};
use destimate::structan::{self, Tolerances};
use destimate::synth::{self, SynthesisOptions};
use destimate::sysmodel::{CommGraph, PlantModel, Scenario};
use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

const EIG_TOL: f64 = 1e-3;
const IDENTITY_TOL: f64 = 1e-8;
const LAMBDA2_TOL: f64 = 1e-12;
const BALL: f64 = 1e-3;
const EQUILIBRIUM_TOL: f64 = 1e-6;
const TRACE_MATCH_TOL: f64 = 1e-9;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed <= limit, format!("took {elapsed:.2?}, limit {limit:.0?}"))
}

fn c1_eigenvalues() -> Outcome {
    let start = Instant::now();
    let p = fixtures::demo_plant();
    let spec = matnum::eigenvalues(&p.a).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for &want in &fixtures::DEMO_REFERENCE_EIGENVALUES {
        let d = spec.values.iter().map(|z| (z - want).norm()).fold(f64::INFINITY, f64::min);
        worst = worst.max(d);
        check(d <= EIG_TOL, format!("no eigenvalue within {EIG_TOL} of {want} (closest {d:.3e})"))?;
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("max distance {worst:.2e}"))
}

fn c2_detectability() -> Outcome {
    let start = Instant::now();
    let p = fixtures::demo_plant();
    let tol = Tolerances::default();
    let cases = [(0, 2.0, 6, 5), (1, 3.0, 5, 4)];
    for (i, lam, with_k, without_k) in cases {
        let (v, _) = structan::partial_detectability(&p.a, &p.sensors[i].c, &p.k, &tol).map_err(|e| e.to_string())?;
        check(!v.detectable, format!("sensor {} reported detectable", i + 1))?;
        let w = v
            .witnesses
            .iter()
            .find(|w| (w.lambda - lam).norm() < 1e-9)
            .ok_or(format!("sensor {}: lambda = {lam} not tested", i + 1))?;
        check(
            (w.rank_with_k, w.rank_without_k) == (with_k, without_k),
            format!(
                "sensor {} at lambda = {lam}: {} vs {}, expected {with_k} vs {without_k}",
                i + 1,
                w.rank_with_k,
                w.rank_without_k
            ),
        )?;
    }
    let joint = structan::is_jointly_partially_detectable(&p, &tol).map_err(|e| e.to_string())?;
    check(joint.detectable, "joint verdict false")?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok("sensor 1: 6 vs 5 at 2, sensor 2: 5 vs 4 at 3, joint true".into())
}

fn c3_synthesis() -> Outcome {
    let start = Instant::now();
    let sc = fixtures::demo();
    let p = &sc.plant;
    let (est, rep) = synth::synth_distributed(p, &sc.graph, &SynthesisOptions::default()).map_err(|e| e.to_string())?;
    check(est.q() == 5, format!("q = {}", est.q()))?;
    let t = &est.t;
    let mut worst: f64 = 0.0;
    for (i, v) in est.nodes.iter().enumerate() {
        let s = &p.sensors[i];
        let ta = t * &p.a;
        let r1 = (&v.n * t + &v.l * &s.c - &ta).norm() / ta.norm().max(1.0);
        let tb = t * &p.b;
        let r2 = (&v.h - (&tb - &v.l * &s.d)).norm() / tb.norm().max(1.0);
        let kt = &p.k * t.transpose();
        let r3 = (&kt * t - &p.k).norm() / p.k.norm().max(1.0);
        let r4 = (&v.r - &kt).norm() / kt.norm().max(1.0);
        for (name, r) in [("NT + LC = TA", r1), ("H = TB - LD", r2), ("K Tᵀ T = K", r3), ("R = K Tᵀ", r4)] {
            worst = worst.max(r);
            check(r <= IDENTITY_TOL, format!("node {} {name}: relative residual {r:.3e}", i + 1))?;
        }
    }
    check(rep.big_lambda2 < 0.0, format!("Lambda2 = {}", rep.big_lambda2))?;
    let l2 = rep.lambda2.ok_or("lambda2 undefined")?;
    check((l2 - 4.0).abs() <= LAMBDA2_TOL, format!("lambda2 = {l2}"))?;
    let lap = sc.graph.laplacian();
    let a_syn = matnum::spectral_abscissa(&est.closed_loop(&lap)).map_err(|e| e.to_string())?;
    let a_66 = matnum::spectral_abscissa(&est.closed_loop_with_gamma(&lap, fixtures::DEMO_REFERENCE_GAMMA))
        .map_err(|e| e.to_string())?;
    check(a_syn < 0.0, format!("abscissa at gamma = {} is {a_syn}", est.gamma))?;
    check(a_66 < 0.0, format!("abscissa at gamma = 66 is {a_66}"))?;
    within(start.elapsed(), Duration::from_secs(2))?;
    Ok(format!(
        "worst identity {worst:.1e}, Lambda2 = {:.3}, lambda2 = {l2}, gamma = {:.2}, abscissa {a_syn:.3} / {a_66:.3} at 66",
        rep.big_lambda2, est.gamma
    ))
}

fn window_maxima(times: &[f64], e: &[f64], width: f64) -> Vec<f64> {
    let t_end = *times.last().unwrap();
    let windows = (t_end / width).round() as usize;
    let mut out = vec![0.0_f64; windows];
    for (t, v) in times.iter().zip(e) {
        let k = ((t / width).floor() as usize).min(windows - 1);
        out[k] = out[k].max(*v);
    }
    out
}

fn c4_error_decay() -> Outcome {
    let start = Instant::now();
    let sc = fixtures::demo();
    let (est, _) = synth::synth_distributed(&sc.plant, &sc.graph, &SynthesisOptions::default()).map_err(|e| e.to_string())?;
    let sim = sc.simulation.clone().ok_or("fixture has no simulation")?;
    check(sim.dt == 1e-3 && sim.t_end == 10.0, "fixture horizon changed")?;
    let tr = netsim::simulate(&sc.plant, &est, &sc.graph, &sim).map_err(|e| e.to_string())?;
    let m = netsim::convergence_metrics(&tr).map_err(|e| e.to_string())?;
    let mut finals = Vec::new();
    for i in 0..2 {
        let norms = tr.error_norms(i);
        let env = window_maxima(&tr.times, &norms, 1.0);
        for k in 1..env.len() {
            check(env[k] <= env[k - 1], format!("node {} envelope grows in window {k}", i + 1))?;
        }
        let last = *norms.last().unwrap();
        check(last <= BALL, format!("|e{}(10)| = {last:.3e}", i + 1))?;
        finals.push(last);
    }
    check(m.v_violations == 0, format!("{} Lyapunov increases", m.v_violations))?;
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!("|e1(10)| = {:.2e}, |e2(10)| = {:.2e}, V increases 0", finals[0], finals[1]))
}

fn c5_route_equivalence() -> Outcome {
    let start = Instant::now();
    let s = gen::route_equivalence_sweep(2024, 100, 8, &Tolerances::default());
    check(s.detectable > 0 && s.detectable < s.instances, "sweep is not mixed")?;
    check(s.disagreements == 0 && s.errors == 0, format!("{s:?}"))?;
    check(s.truth_mismatches == 0, format!("verdicts contradict construction: {s:?}"))?;
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("{} systems ({} detectable), 0 disagreements", s.instances, s.detectable))
}

fn random_input(rng: &mut impl Rng, m: usize) -> SignalSpec {
    let kinds = [SignalKind::Sin, SignalKind::Cos, SignalKind::Constant, SignalKind::Step];
    SignalSpec::new(
        (0..m)
            .map(|_| {
                vec![SignalTerm {
                    kind: kinds[rng.random_range(0..kinds.len())],
                    amplitude: rng.random_range(-2.0..2.0),
                    rate: rng.random_range(0.2..3.0),
                    phase: rng.random_range(0.0..1.0),
                }]
            })
            .collect(),
    )
}

fn gaussian_vec(rng: &mut impl Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn c6_sufficiency() -> Outcome {
    let start = Instant::now();
    let graphs = [
        CommGraph::path(2).unwrap(),
        CommGraph::directed_cycle(3).unwrap(),
        CommGraph::path(4).unwrap(),
    ];
    let mut slowest: f64 = 0.0;
    for i in 0..25 {
        let g = &graphs[i % 3];
        let mut rng = gen::instance_rng(77, i);
        let n = rng.random_range(2..=6);
        let m = rng.random_range(1..=2);
        let (plant, _) = gen::random_network_plant(&mut rng, n, g.l(), m, true);
        let (est, rep) = synth::synth_distributed(&plant, g, &SynthesisOptions::default())
            .map_err(|e| format!("instance {i}: {e}"))?;
        check(rep.closed_loop_abscissa < 0.0, format!("instance {i}: abscissa {}", rep.closed_loop_abscissa))?;
        let sim = SimulationConfig {
            t_end: 20.0,
            dt: 1e-2,
            x0: gaussian_vec(&mut rng, n),
            w0: Some((0..g.l()).map(|_| gaussian_vec(&mut rng, est.q())).collect()),
            input: random_input(&mut rng, m),
        };
        let tr = netsim::simulate(&plant, &est, g, &sim).map_err(|e| format!("instance {i}: {e}"))?;
        let met = netsim::convergence_metrics(&tr).map_err(|e| e.to_string())?;
        for (j, node) in met.nodes.iter().enumerate() {
            let t = node
                .time_to_ball
                .ok_or(format!("instance {i} node {}: |e(20)| = {:.3e}", j + 1, node.final_error_norm))?;
            slowest = slowest.max(t);
        }
    }
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!("25 plants on K2 / C3 / P4, slowest entry into the ball at t = {slowest:.2}"))
}

fn c7_necessity() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let graphs = [CommGraph::path(2).unwrap(), CommGraph::directed_cycle(3).unwrap()];
    for i in 0..10 {
        let g = graphs[i % 2].clone();
        let mut rng = gen::instance_rng(99, i);
        let n = rng.random_range(2..=6);
        let (plant, sys) = gen::random_network_plant(&mut rng, n, g.l(), 1, false);
        check(!sys.detectable, format!("instance {i} generated detectable"))?;
        match synth::synth_distributed(&plant, &g, &SynthesisOptions::default()) {
            Err(Error::NotDetectable { witnesses }) if !witnesses.is_empty() => {}
            Err(e) => return Err(format!("instance {i}: unexpected error {e}")),
            Ok(_) => return Err(format!("instance {i}: false acceptance")),
        }
        let sc = Scenario { plant, graph: g, synthesis: SynthesisOptions::default(), simulation: None };
        let path = dir.path().join(format!("s{i}.json"));
        std::fs::write(&path, sc.to_json()).map_err(|e| e.to_string())?;
        let est_path = dir.path().join(format!("e{i}.json"));
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = destimate::cli::run(
            ["destimate", "synthesize", path.to_str().unwrap(), "--out", est_path.to_str().unwrap()],
            &mut out,
            &mut err,
        );
        let msg = String::from_utf8_lossy(&err);
        check(code == 1, format!("instance {i}: exit {code}"))?;
        check(msg.contains("lambda = "), format!("instance {i}: no witness in {msg:?}"))?;
        check(!est_path.exists(), format!("instance {i}: estimator written"))?;
    }
    Ok("10 refusals with witnesses, 0 false acceptances".into())
}

fn c8_equilibrium() -> Outcome {
    let sc = fixtures::demo();
    let (est, _) = synth::synth_distributed(&sc.plant, &sc.graph, &SynthesisOptions::default()).map_err(|e| e.to_string())?;
    let mut sim = sc.simulation.clone().ok_or("fixture has no simulation")?;
    let tx = &est.t * &sim.x0;
    sim.w0 = Some(vec![tx.clone(), tx]);
    let tr = netsim::simulate(&sc.plant, &est, &sc.graph, &sim).map_err(|e| e.to_string())?;
    let worst = (0..2).flat_map(|i| tr.error_norms(i)).fold(0.0, f64::max);
    check(worst <= EQUILIBRIUM_TOL, format!("max |e| = {worst:.3e}"))?;
    Ok(format!("max |e_i(t)| = {worst:.2e}"))
}

fn c9_single_node() -> Outcome {
    let p = fixtures::demo_plant();
    let (c, d) = p.stacked_output();
    let single = PlantModel::single(p.a.clone(), p.b.clone(), c.clone(), d.clone(), p.k.clone()).map_err(|e| e.to_string())?;
    let g = CommGraph::single_node();
    let opts = SynthesisOptions::default();
    let (est, _) = synth::synth_distributed(&single, &g, &opts).map_err(|e| e.to_string())?;
    let cen = synth::synth_centralized(&p.a, &p.b, &c, &d, &p.k, &opts).map_err(|e| e.to_string())?;
    let node = &est.nodes[0];
    check(est.gamma == 0.0, "gamma is not zero")?;
    check(
        est.t == cen.t && node.n == cen.n && node.h == cen.h && node.l == cen.l && node.r == cen.r,
        "matrices differ",
    )?;
    let mut sim = fixtures::demo().simulation.ok_or("fixture has no simulation")?;
    sim.w0 = Some(vec![DVector::from_fn(est.q(), |i, _| i as f64 + 1.0)]);
    let a = netsim::simulate(&single, &est, &g, &sim).map_err(|e| e.to_string())?;
    let b = netsim::simulate(&single, &cen.to_distributed(), &g, &sim).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for k in 0..a.len() {
        let scale = a.w[k][0].norm().max(1.0);
        worst = worst.max((&a.w[k][0] - &b.w[k][0]).norm() / scale);
        worst = worst.max((&a.e_i[k][0] - &b.e_i[k][0]).norm());
    }
    check(worst <= TRACE_MATCH_TOL, format!("trace mismatch {worst:.3e}"))?;
    Ok(format!("matrices identical, trace mismatch {worst:.1e}"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("eigenvalues of the demo plant", c1_eigenvalues),
        ("per-sensor and joint detectability witnesses", c2_detectability),
        ("distributed synthesis identities and stability", c3_synthesis),
        ("error decay on the demo scenario", c4_error_decay),
        ("rank and structural routes agree on 100 systems", c5_route_equivalence),
        ("synthesis and convergence on 25 random networks", c6_sufficiency),
        ("refusal on 10 non-detectable plants", c7_necessity),
        ("equilibrium start keeps the error at zero", c8_equilibrium),
        ("single node equals centralized design", c9_single_node),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let res = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match res {
            Ok(detail) => println!("criterion {}: PASS  {name} ({detail}; {secs:.2}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} ({why}; {secs:.2}s)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
