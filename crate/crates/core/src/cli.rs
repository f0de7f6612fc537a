//! Command-line front end.
//!
//! Exit codes: `0` success, `1` a negative verdict or refused synthesis,
//! `2` unreadable or inconsistent input, `3` numerical failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::Complex;
use serde::Serialize;

use crate::error::{fmt_complex, Error, Result};
use crate::fixtures;
use crate::gen;
use crate::matnum;
use crate::netsim::{self, ConvergenceMetrics, SimulationConfig};
use crate::structan::{self, DetectabilityVerdict, Tolerances};
use crate::synth::{self, EstimatorFile, SynthesisReport};
use crate::sysmodel::{analyze_topology, Scenario, TopologyReport};

#[derive(Debug, Parser)]
#[command(name = "destimate", version, about = "Distributed partial-state estimator design and simulation")]
pub struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decomposition, detectability verdicts and topology checks.
    Analyze {
        scenario: PathBuf,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Build the distributed estimator and write it as JSON.
    Synthesize {
        scenario: PathBuf,
        #[arg(long, default_value = "estimator.json")]
        out: PathBuf,
        #[arg(long)]
        gamma: Option<f64>,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Simulate plant and estimator network; writes the trace CSV, a
    /// metrics JSON and one gnuplot file per node.
    Simulate {
        scenario: PathBuf,
        estimator: PathBuf,
        #[arg(long, default_value = "trace.csv")]
        out: PathBuf,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Full pipeline on the built-in two-sensor plant.
    Demo {
        /// Directory for the estimator, trace and metrics files.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        gamma: Option<f64>,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        tol: TolArgs,
        /// Also run the seeded route-equivalence sweep.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, Args)]
pub struct TolArgs {
    #[arg(long)]
    pub stab_tol: Option<f64>,
    #[arg(long)]
    pub rank_tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct SimArgs {
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) | Error::DimensionMismatch(_) | Error::Io(_) => 2,
        Error::NumericFailure(_) | Error::InternalInconsistency(_) | Error::NonFinite { .. } => 3,
        Error::NotDetectable { .. }
        | Error::Topology(_)
        | Error::SynthesisFailure(_)
        | Error::Precondition(_) => 1,
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Analyze { scenario, out: path, tol } => {
            let sc = load_scenario(scenario, tol, None)?;
            let rep = analyze(&sc)?;
            if let Some(p) = path {
                write_file(p, &to_json(&rep))?;
            }
            if cli.json {
                writeln!(out, "{}", to_json(&rep))?;
            } else {
                print_analysis(&rep, out)?;
            }
            Ok(if rep.ok { 0 } else { 1 })
        }
        Command::Synthesize { scenario, out: path, gamma, tol } => {
            let sc = load_scenario(scenario, tol, *gamma)?;
            let (est, rep) = synth::synth_distributed(&sc.plant, &sc.graph, &sc.synthesis)?;
            write_file(path, &EstimatorFile::new(&est, Some(&rep)).to_json())?;
            if cli.json {
                writeln!(out, "{}", to_json(&rep))?;
            } else {
                print_synthesis(&rep, est.q(), out)?;
                writeln!(out, "estimator written to {}", path.display())?;
            }
            Ok(0)
        }
        Command::Simulate { scenario, estimator, out: path, sim } => {
            let sc = load_scenario(scenario, &TolArgs { stab_tol: None, rank_tol: None }, None)?;
            let est = EstimatorFile::parse(&read_file(estimator)?)?.to_estimator()?;
            let cfg = sim_config(&sc, sim)?;
            let tr = netsim::simulate(&sc.plant, &est, &sc.graph, &cfg)?;
            let metrics = netsim::convergence_metrics(&tr)?;
            write_trace_files(&tr, &metrics, path)?;
            if cli.json {
                writeln!(out, "{}", to_json(&metrics))?;
            } else {
                print_metrics(&metrics, out)?;
                writeln!(out, "trace written to {}", path.display())?;
            }
            Ok(if metrics.all_converged { 0 } else { 1 })
        }
        Command::Demo { out: dir, gamma, sim, tol, seed } => demo(cli.json, dir.as_deref(), *gamma, sim, tol, *seed, out),
    }
}

fn read_file(p: &Path) -> Result<String> {
    fs::read_to_string(p).map_err(|e| Error::Parse(format!("{}: {e}", p.display())))
}

fn write_file(p: &Path, text: &str) -> Result<()> {
    fs::write(p, text)?;
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes")
}

fn apply_overrides(sc: &mut Scenario, tol: &TolArgs, gamma: Option<f64>) {
    if let Some(v) = tol.stab_tol {
        sc.synthesis.tolerances.stab_tol = v;
    }
    if tol.rank_tol.is_some() {
        sc.synthesis.tolerances.rank_tol = tol.rank_tol;
    }
    if gamma.is_some() {
        sc.synthesis.gamma = gamma;
    }
}

fn load_scenario(p: &Path, tol: &TolArgs, gamma: Option<f64>) -> Result<Scenario> {
    let mut sc = Scenario::from_json(&read_file(p)?)
        .map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", p.display())),
            other => other,
        })?;
    apply_overrides(&mut sc, tol, gamma);
    Ok(sc)
}

fn sim_config(sc: &Scenario, sim: &SimArgs) -> Result<SimulationConfig> {
    let mut cfg = sc
        .simulation
        .clone()
        .ok_or_else(|| Error::Parse("scenario has no simulation section".into()))?;
    if let Some(dt) = sim.dt {
        cfg.dt = dt;
    }
    if let Some(t) = sim.t_end {
        cfg.t_end = t;
    }
    Ok(cfg)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "trace".into());
    path.with_file_name(format!("{stem}{suffix}"))
}

fn write_trace_files(tr: &netsim::SimulationTrace, metrics: &ConvergenceMetrics, path: &Path) -> Result<()> {
    let mut csv = std::io::BufWriter::new(fs::File::create(path)?);
    netsim::write_trace_csv(tr, &mut csv)?;
    csv.flush()?;
    write_file(&sibling(path, ".metrics.json"), &(to_json(metrics) + "\n"))?;
    for i in 0..tr.l() {
        let mut f = std::io::BufWriter::new(fs::File::create(sibling(path, &format!(".e{}.dat", i + 1)))?);
        netsim::write_error_dat(tr, i, &mut f)?;
        f.flush()?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenEntry {
    pub re: f64,
    pub im: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub eigenvalues: Vec<EigenEntry>,
    pub sensors: Vec<DetectabilityVerdict>,
    pub joint: DetectabilityVerdict,
    pub topology: TopologyReport,
    pub ok: bool,
}

pub fn analyze(sc: &Scenario) -> Result<AnalysisReport> {
    let p = &sc.plant;
    let tol: Tolerances = sc.synthesis.tolerances;
    let spec = matnum::eigenvalues_with_tol(&p.a, tol.stab_tol)?;
    let mut values = spec.values.clone();
    values.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    let eigenvalues = values
        .iter()
        .map(|&z| EigenEntry { re: z.re, im: z.im, stable: spec.is_stable_value(z) })
        .collect();
    let sensors = p
        .sensors
        .iter()
        .map(|s| structan::partial_detectability(&p.a, &s.c, &p.k, &tol).map(|(v, _)| v))
        .collect::<Result<Vec<_>>>()?;
    let (ct, _) = p.stacked_output();
    let (joint, dec) = structan::partial_detectability(&p.a, &ct, &p.k, &tol)?;
    let topology = analyze_topology(&sc.graph)?;
    let ok = joint.detectable && topology.satisfies_assumption1;
    Ok(AnalysisReport { n1: dec.n1, n2: dec.n2, n3: dec.n3, eigenvalues, sensors, joint, topology, ok })
}

fn verdict_line(v: &DetectabilityVerdict) -> String {
    let mut s = if v.detectable { "partially detectable".to_string() } else { "NOT partially detectable".to_string() };
    for w in &v.witnesses {
        s.push_str(&format!(
            "\n      lambda = {}: rank [D; K] = {}, rank D = {}{}",
            fmt_complex(w.lambda),
            w.rank_with_k,
            w.rank_without_k,
            if w.holds() { "" } else { "  <- fails" }
        ));
    }
    s
}

fn print_analysis(rep: &AnalysisReport, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "decomposition: n1 = {}, n2 = {}, n3 = {}", rep.n1, rep.n2, rep.n3)?;
    writeln!(out, "eigenvalues of A:")?;
    for e in &rep.eigenvalues {
        writeln!(
            out,
            "  {:>24}  {}",
            fmt_complex(Complex::new(e.re, e.im)),
            if e.stable { "stable" } else { "unstable" }
        )?;
    }
    for (i, v) in rep.sensors.iter().enumerate() {
        writeln!(out, "sensor {}: {}", i + 1, verdict_line(v))?;
    }
    writeln!(out, "joint: {}", verdict_line(&rep.joint))?;
    let t = &rep.topology;
    writeln!(
        out,
        "graph: undirected = {}, balanced = {}, strongly connected = {}, connected = {}",
        t.is_undirected, t.is_balanced, t.is_strongly_connected, t.is_connected_undirected
    )?;
    match t.lambda2 {
        Some(l2) => writeln!(out, "graph: connectivity requirement holds, lambda2 = {l2}")?,
        None if t.satisfies_assumption1 => writeln!(out, "graph: connectivity requirement holds (single node)")?,
        None => writeln!(
            out,
            "graph: connectivity requirement FAILS (need undirected connected, or balanced strongly connected)"
        )?,
    }
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.6}"))
}

fn print_synthesis(rep: &SynthesisReport, q: usize, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "estimator order q = {q}")?;
    writeln!(out, "Lambda1 = {:.6}", rep.big_lambda1)?;
    writeln!(out, "Lambda2 = {:.6}", rep.big_lambda2)?;
    writeln!(out, "Lambda3 = {:.6}", rep.big_lambda3)?;
    writeln!(out, "lambda2 = {}", opt(rep.lambda2))?;
    writeln!(out, "gamma_bound = {}", opt(rep.gamma_bound))?;
    writeln!(
        out,
        "gamma_used = {:.6}{}",
        rep.gamma_used,
        if rep.gamma_overridden { " (override)" } else { "" }
    )?;
    writeln!(out, "closed-loop spectral abscissa = {:.6}", rep.closed_loop_abscissa)?;
    Ok(())
}

fn print_metrics(m: &ConvergenceMetrics, out: &mut dyn Write) -> Result<()> {
    for (i, node) in m.nodes.iter().enumerate() {
        writeln!(
            out,
            "node {}: |e(0)| = {:.3e}, |e(t_end)| = {:.3e}, time to {:.0e}-ball = {}",
            i + 1,
            node.initial_error_norm,
            node.final_error_norm,
            m.ball_radius,
            node.time_to_ball.map_or_else(|| "never".into(), |t| format!("{t:.3}"))
        )?;
    }
    writeln!(out, "Lyapunov increases: {}", m.v_violations)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoRow {
    pub quantity: String,
    pub reference: String,
    pub computed: String,
    pub note: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoReport {
    pub analysis: AnalysisReport,
    pub synthesis: SynthesisReport,
    pub metrics: ConvergenceMetrics,
    pub reference_gamma_abscissa: f64,
    pub sweep: Option<gen::SweepSummary>,
    pub table: Vec<DemoRow>,
    pub ok: bool,
}

fn row(q: &str, reference: impl Into<String>, computed: impl Into<String>, note: &str) -> DemoRow {
    DemoRow { quantity: q.into(), reference: reference.into(), computed: computed.into(), note: note.into() }
}

fn find_witness(v: &DetectabilityVerdict, lambda: f64) -> String {
    v.witnesses
        .iter()
        .find(|w| (w.lambda - lambda).norm() < 1e-6)
        .map_or_else(|| "not tested".into(), |w| format!("{} vs {}", w.rank_with_k, w.rank_without_k))
}

/// Runs analysis, synthesis and simulation on the built-in plant.
pub fn run_demo(
    gamma: Option<f64>,
    sim: &SimArgs,
    tol: &TolArgs,
    seed: Option<u64>,
) -> Result<(DemoReport, synth::DistributedEstimator, netsim::SimulationTrace)> {
    let mut sc = fixtures::demo();
    apply_overrides(&mut sc, tol, gamma);
    let analysis = analyze(&sc)?;
    let (est, rep) = synth::synth_distributed(&sc.plant, &sc.graph, &sc.synthesis)?;
    let cfg = sim_config(&sc, sim)?;
    let tr = netsim::simulate(&sc.plant, &est, &sc.graph, &cfg)?;
    let metrics = netsim::convergence_metrics(&tr)?;
    let lap = sc.graph.laplacian();
    let reference_gamma_abscissa =
        matnum::spectral_abscissa(&est.closed_loop_with_gamma(&lap, fixtures::DEMO_REFERENCE_GAMMA))?;
    let sweep = seed.map(|s| gen::route_equivalence_sweep(s, 100, 8, &sc.synthesis.tolerances));

    let mut table = Vec::new();
    for &lam in &fixtures::DEMO_REFERENCE_EIGENVALUES {
        let closest = analysis
            .eigenvalues
            .iter()
            .map(|e| Complex::new(e.re, e.im))
            .min_by(|x, y| (x - lam).norm().total_cmp(&(y - lam).norm()))
            .expect("nonempty spectrum");
        table.push(row("eigenvalue of A", format!("{lam}"), fmt_complex(closest), "closest computed eigenvalue"));
    }
    table.push(row(
        "sensor 1 ranks at lambda = 2",
        "6 vs 5",
        find_witness(&analysis.sensors[0], 2.0),
        "rank [D; K] vs rank D",
    ));
    table.push(row(
        "sensor 2 ranks at lambda = 3",
        "5 vs 4",
        find_witness(&analysis.sensors[1], 3.0),
        "rank [D; K] vs rank D",
    ));
    table.push(row("jointly detectable", "true", analysis.joint.detectable.to_string(), ""));
    table.push(row("estimator order q", "5", est.q().to_string(), "T is q x n"));
    table.push(row("lambda2", "4", opt(rep.lambda2), "from the two-node Laplacian"));
    table.push(row(
        "Lambda2",
        "-0.0994",
        format!("{:.4}", rep.big_lambda2),
        "depends on the Lyapunov weight and gain; only the sign is fixed",
    ));
    table.push(row(
        "gamma",
        "66",
        format!("{:.4}", rep.gamma_used),
        &format!("bound {}", opt(rep.gamma_bound)),
    ));
    table.push(row(
        "closed-loop abscissa at gamma = 66",
        "< 0",
        format!("{reference_gamma_abscissa:.4}"),
        "reference gain on this design",
    ));
    for (i, node) in metrics.nodes.iter().enumerate() {
        table.push(row(
            &format!("|e{}(t_end)|", i + 1),
            "-> 0",
            format!("{:.3e}", node.final_error_norm),
            "error response decays",
        ));
    }
    if let Some(s) = &sweep {
        table.push(row(
            "route agreement",
            "equivalent",
            format!("{}/{}", s.agreements, s.instances),
            "seeded random systems",
        ));
    }
    let sweep_ok = sweep.as_ref().is_none_or(|s| s.agreements == s.instances);
    let ok = analysis.ok && metrics.all_converged && sweep_ok;
    let report = DemoReport {
        analysis,
        synthesis: rep,
        metrics,
        reference_gamma_abscissa,
        sweep,
        table,
        ok,
    };
    Ok((report, est, tr))
}

fn demo(
    json: bool,
    dir: Option<&Path>,
    gamma: Option<f64>,
    sim: &SimArgs,
    tol: &TolArgs,
    seed: Option<u64>,
    out: &mut dyn Write,
) -> Result<i32> {
    let (rep, est, tr) = run_demo(gamma, sim, tol, seed)?;
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
        write_file(&dir.join("estimator.json"), &EstimatorFile::new(&est, Some(&rep.synthesis)).to_json())?;
        write_trace_files(&tr, &rep.metrics, &dir.join("trace.csv"))?;
    }
    if json {
        writeln!(out, "{}", to_json(&rep))?;
    } else {
        print_analysis(&rep.analysis, out)?;
        writeln!(out)?;
        print_synthesis(&rep.synthesis, est.q(), out)?;
        writeln!(out)?;
        print_metrics(&rep.metrics, out)?;
        writeln!(out)?;
        let w0 = rep.table.iter().map(|r| r.quantity.len()).max().unwrap_or(0);
        let w1 = rep.table.iter().map(|r| r.reference.len()).max().unwrap_or(0).max(8);
        let w2 = rep.table.iter().map(|r| r.computed.len()).max().unwrap_or(0).max(8);
        writeln!(out, "{:w0$}  {:w1$}  {:w2$}  note", "quantity", "reference", "computed")?;
        for r in &rep.table {
            writeln!(out, "{:w0$}  {:w1$}  {:w2$}  {}", r.quantity, r.reference, r.computed, r.note)?;
        }
    }
    Ok(if rep.ok { 0 } else { 1 })
}
