//! Centralized and distributed partial-state estimator synthesis.
//!
//! Each node `i` runs
//!
//! ```text
//! ẇᵢ = Nᵢwᵢ + Hᵢu + Lᵢyᵢ + γMᵢ Σⱼ γᵢⱼ (wⱼ - wᵢ),   zᵢ = Rᵢwᵢ
//! ```
//!
//! and `zᵢ → Kx` for every node when the plant is jointly partially
//! detectable and the graph is undirected connected or balanced strongly
//! connected.

use serde::{Deserialize, Serialize};

use crate::error::{fmt_complex, Error, Result};
use crate::matnum::{self, Matrix, DEFAULT_INJECTION_SHIFT};
use crate::structan::{self, Tolerances};
use crate::sysmodel::{analyze_topology, matrix_from_rows, matrix_to_rows, CommGraph, PlantModel};

/// Relative tolerance for the algebraic identities of an estimator.
pub const IDENTITY_TOL: f64 = 1e-8;

/// Estimator file `format` tag.
pub const ESTIMATOR_FORMAT: &str = "destimate-estimator";
pub const ESTIMATOR_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisOptions {
    /// Coupling gain override. The bound is skipped but the closed-loop
    /// eigenvalue check is not.
    pub gamma: Option<f64>,
    pub tolerances: Tolerances,
    pub injection_shift: f64,
    /// Use `√Λ₃` in place of `Λ₁`.
    pub lambda1_fast_path: bool,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            gamma: None,
            tolerances: Tolerances::default(),
            injection_shift: DEFAULT_INJECTION_SHIFT,
            lambda1_fast_path: false,
        }
    }
}

/// `ẇ = Nw + Hu + Ly`, `ẑ = Rw`.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralizedEstimator {
    pub t: Matrix,
    pub n: Matrix,
    pub h: Matrix,
    pub l: Matrix,
    pub r: Matrix,
}

impl CentralizedEstimator {
    pub fn q(&self) -> usize {
        self.t.nrows()
    }

    /// Single-node network form with `M = I` and `γ = 0`.
    pub fn to_distributed(&self) -> DistributedEstimator {
        let q = self.q();
        DistributedEstimator {
            t: self.t.clone(),
            nodes: vec![NodeEstimator {
                n: self.n.clone(),
                h: self.h.clone(),
                l: self.l.clone(),
                m: Matrix::identity(q, q),
                r: self.r.clone(),
            }],
            gamma: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeEstimator {
    pub n: Matrix,
    pub h: Matrix,
    pub l: Matrix,
    pub m: Matrix,
    pub r: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributedEstimator {
    pub t: Matrix,
    pub nodes: Vec<NodeEstimator>,
    pub gamma: f64,
}

impl DistributedEstimator {
    pub fn q(&self) -> usize {
        self.t.nrows()
    }

    pub fn n_state(&self) -> usize {
        self.t.ncols()
    }

    pub fn l(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_blk(&self) -> Matrix {
        block_diag(self.nodes.iter().map(|v| &v.n))
    }

    pub fn m_blk(&self) -> Matrix {
        block_diag(self.nodes.iter().map(|v| &v.m))
    }

    /// `N_blk - γ M_blk (𝓛 ⊗ I_q)`: the error dynamics of the network.
    pub fn closed_loop(&self, laplacian: &Matrix) -> Matrix {
        self.closed_loop_with_gamma(laplacian, self.gamma)
    }

    pub fn closed_loop_with_gamma(&self, laplacian: &Matrix, gamma: f64) -> Matrix {
        let q = self.q();
        let coupling = matnum::kron(laplacian, &Matrix::identity(q, q));
        self.n_blk() - gamma * self.m_blk() * coupling
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthesisReport {
    #[serde(rename = "Lbar", serialize_with = "ser_matrix")]
    pub lbar: Matrix,
    #[serde(rename = "Pbar", serialize_with = "ser_matrix")]
    pub pbar: Matrix,
    #[serde(rename = "Nbar", serialize_with = "ser_matrix")]
    pub nbar: Matrix,
    #[serde(rename = "Lambda1")]
    pub big_lambda1: f64,
    /// Largest eigenvalue of `N̄ᵀP̄ + P̄N̄`.
    #[serde(rename = "Lambda2")]
    pub big_lambda2: f64,
    #[serde(rename = "Lambda3")]
    pub big_lambda3: f64,
    /// Smallest nonzero eigenvalue of `𝓛 + 𝓛ᵀ`; `None` for one node.
    pub lambda2: Option<f64>,
    pub gamma_bound: Option<f64>,
    pub gamma_used: f64,
    pub gamma_overridden: bool,
    pub closed_loop_abscissa: f64,
}

fn ser_matrix<S: serde::Serializer>(m: &Matrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::Serialize;
    matrix_to_rows(m).serialize(s)
}

pub(crate) fn block_diag<'a>(blocks: impl IntoIterator<Item = &'a Matrix>) -> Matrix {
    let blocks: Vec<&Matrix> = blocks.into_iter().collect();
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

fn check_detectable(a: &Matrix, c: &Matrix, k: &Matrix, tol: &Tolerances) -> Result<structan::Decomposition> {
    let (verdict, dec) = structan::partial_detectability(a, c, k, tol)?;
    if !verdict.detectable {
        return Err(verdict.into_error());
    }
    Ok(dec)
}

fn injection(t: &Matrix, a: &Matrix, c: &Matrix, shift: f64) -> Result<Matrix> {
    let tt = t.transpose();
    matnum::stabilizing_output_injection(&(t * a * &tt), &(c * &tt), shift)
}

/// Single-sensor estimator for `(A, B, C, D, K)`.
pub fn synth_centralized(
    a: &Matrix,
    b: &Matrix,
    c: &Matrix,
    d: &Matrix,
    k: &Matrix,
    opts: &SynthesisOptions,
) -> Result<CentralizedEstimator> {
    let plant = PlantModel::single(a.clone(), b.clone(), c.clone(), d.clone(), k.clone())?;
    let dec = check_detectable(&plant.a, c, k, &opts.tolerances)?;
    let t = dec.t();
    let l = injection(&t, a, c, opts.injection_shift)?;
    let ta = &t * a;
    let n = (&ta - &l * c) * t.transpose();
    let spec = matnum::eigenvalues_with_tol(&n, opts.tolerances.stab_tol)?;
    if !spec.is_hurwitz() {
        return Err(Error::SynthesisFailure(format!(
            "estimator matrix N is not Hurwitz (spectral abscissa {:.6e})",
            spec.abscissa()
        )));
    }
    let h = &t * b - &l * d;
    let r = k * t.transpose();
    Ok(CentralizedEstimator { t, n, h, l, r })
}

/// Distributed synthesis over the communication graph `g`.
pub fn synth_distributed(
    p: &PlantModel,
    g: &CommGraph,
    opts: &SynthesisOptions,
) -> Result<(DistributedEstimator, SynthesisReport)> {
    let nodes_l = p.l();
    if g.l() != nodes_l {
        return Err(Error::DimensionMismatch(format!(
            "graph has {} nodes but the plant has {nodes_l} sensors",
            g.l()
        )));
    }
    let topo = analyze_topology(g)?;
    if !topo.satisfies_assumption1 {
        return Err(Error::Topology(
            "graph must be undirected and connected, or directed, balanced and strongly connected"
                .into(),
        ));
    }
    let tol = &opts.tolerances;
    let (ct, _) = p.stacked_output();
    let dec = check_detectable(&p.a, &ct, &p.k, tol)?;
    let t = dec.t();
    let q = t.nrows();
    let tt = t.transpose();
    let ta = &t * &p.a;
    let tb = &t * &p.b;
    let r_mat = &p.k * &tt;

    let lbar = injection(&t, &p.a, &ct, opts.injection_shift)?;
    let nbar = (&ta - &lbar * &ct) * &tt;
    let pbar = matnum::solve_lyapunov(&nbar, &Matrix::identity(q, q))?;
    let cert = nbar.transpose() * &pbar + &pbar * &nbar;
    let big_lambda2 = matnum::symmetric_eigenvalues(&cert)?.last().copied().unwrap_or(f64::NEG_INFINITY);
    if q > 0 && !(big_lambda2 < 0.0) {
        return Err(Error::NumericFailure(format!(
            "Lyapunov certificate is not negative definite (largest eigenvalue {big_lambda2:.6e})"
        )));
    }
    let m_mat = inverse_spd(&pbar)?;

    let scale = nodes_l as f64;
    let mut nodes = Vec::with_capacity(nodes_l);
    let mut col = 0;
    for s in &p.sensors {
        let pi = s.c.nrows();
        let li = lbar.columns(col, pi) * scale;
        col += pi;
        let ni = (&ta - &li * &s.c) * &tt;
        let hi = &tb - &li * &s.d;
        nodes.push(NodeEstimator { n: ni, h: hi, l: li, m: m_mat.clone(), r: r_mat.clone() });
    }
    let mut est = DistributedEstimator { t, nodes, gamma: 0.0 };

    let minv_blk = block_diag(std::iter::repeat_n(&pbar, nodes_l));
    let n_blk = est.n_blk();
    let s_mat = n_blk.transpose() * &minv_blk + &minv_blk * &n_blk;
    let s_eig = matnum::symmetric_eigenvalues(&(0.5 * (&s_mat + s_mat.transpose())))?;
    let s_max = s_eig.last().copied().unwrap_or(0.0);
    let s_abs = s_eig.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let big_lambda3 = s_abs * s_abs;
    let big_lambda1 = if opts.lambda1_fast_path { s_abs } else { s_max };

    let gamma_bound = topo.lambda2.map(|l2| (big_lambda1 - big_lambda3 / big_lambda2) / l2);
    let (gamma, overridden) = match (opts.gamma, gamma_bound) {
        (Some(gm), _) => {
            if !(gm.is_finite() && gm >= 0.0) {
                return Err(Error::Precondition(format!("coupling gain must be finite and >= 0, got {gm}")));
            }
            (gm, true)
        }
        (None, Some(bound)) => (1.05 * bound.max(0.0) + 0.1, false),
        (None, None) => (0.0, false),
    };
    est.gamma = gamma;

    let lap = g.laplacian();
    let spec = matnum::eigenvalues_with_tol(&est.closed_loop(&lap), tol.stab_tol)?;
    if !spec.is_hurwitz() {
        let worst = spec
            .values
            .iter()
            .copied()
            .max_by(|x, y| x.re.total_cmp(&y.re))
            .expect("nonempty spectrum");
        let msg = format!(
            "closed-loop matrix with gamma = {gamma} has eigenvalue {} in the closed right half plane",
            fmt_complex(worst)
        );
        return Err(if overridden { Error::SynthesisFailure(msg) } else { Error::InternalInconsistency(msg) });
    }
    log::info!("synthesis: q = {q}, gamma = {gamma}, closed-loop abscissa = {:.6e}", spec.abscissa());

    let report = SynthesisReport {
        lbar,
        pbar,
        nbar,
        big_lambda1,
        big_lambda2,
        big_lambda3,
        lambda2: topo.lambda2,
        gamma_bound,
        gamma_used: gamma,
        gamma_overridden: overridden,
        closed_loop_abscissa: spec.abscissa(),
    };
    Ok((est, report))
}

fn inverse_spd(m: &Matrix) -> Result<Matrix> {
    let inv = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NumericFailure("Lyapunov solution is not positive definite".into()))?
        .inverse();
    Ok(0.5 * (&inv + inv.transpose()))
}

/// One audited identity or property.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residual {
    pub name: String,
    pub node: Option<usize>,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub residuals: Vec<Residual>,
    pub sum_n_abscissa: f64,
    pub closed_loop_abscissa: f64,
    pub pass: bool,
}

impl VerificationReport {
    pub fn failures(&self) -> impl Iterator<Item = &Residual> {
        self.residuals.iter().filter(|r| !r.pass)
    }
}

/// `IDENTITY_TOL · max(1, Σ‖termᵢ‖_F)`.
pub(crate) fn identity_limit(terms: &[f64]) -> f64 {
    IDENTITY_TOL * terms.iter().sum::<f64>().max(1.0)
}

/// `NᵢT + LᵢCᵢ - TA` and its acceptance limit.
pub(crate) fn state_identity(p: &PlantModel, d: &DistributedEstimator, i: usize) -> (Matrix, f64) {
    let v = &d.nodes[i];
    let c = &p.sensors[i].c;
    let ta = &d.t * &p.a;
    let nt = &v.n * &d.t;
    let lc = &v.l * c;
    let limit = identity_limit(&[nt.norm(), lc.norm(), ta.norm()]);
    (nt + lc - ta, limit)
}

/// `Hᵢ + LᵢDᵢ - TB` and its acceptance limit.
pub(crate) fn input_identity(p: &PlantModel, d: &DistributedEstimator, i: usize) -> (Matrix, f64) {
    let v = &d.nodes[i];
    let tb = &d.t * &p.b;
    let ld = &v.l * &p.sensors[i].d;
    let limit = identity_limit(&[v.h.norm(), ld.norm(), tb.norm()]);
    (&v.h + ld - tb, limit)
}

/// `RᵢT - K` and its acceptance limit.
pub(crate) fn output_identity(p: &PlantModel, d: &DistributedEstimator, i: usize) -> (Matrix, f64) {
    let rt = &d.nodes[i].r * &d.t;
    let limit = identity_limit(&[rt.norm(), p.k.norm()]);
    (rt - &p.k, limit)
}

fn check_estimator_dims(p: &PlantModel, d: &DistributedEstimator) -> Result<()> {
    let (n, m, r, q) = (p.n(), p.m(), p.r(), d.q());
    if d.t.ncols() != n {
        return Err(Error::DimensionMismatch(format!("T has {} columns, plant has n = {n}", d.t.ncols())));
    }
    if d.l() != p.l() {
        return Err(Error::DimensionMismatch(format!(
            "estimator has {} nodes, plant has {} sensors",
            d.l(),
            p.l()
        )));
    }
    for (i, (v, s)) in d.nodes.iter().zip(&p.sensors).enumerate() {
        let expect = [
            ("N", v.n.shape(), (q, q)),
            ("H", v.h.shape(), (q, m)),
            ("L", v.l.shape(), (q, s.c.nrows())),
            ("M", v.m.shape(), (q, q)),
            ("R", v.r.shape(), (r, q)),
        ];
        for (name, got, want) in expect {
            if got != want {
                return Err(Error::DimensionMismatch(format!(
                    "node {} {name} is {}x{}, expected {}x{}",
                    i + 1,
                    got.0,
                    got.1,
                    want.0,
                    want.1
                )));
            }
        }
    }
    Ok(())
}

/// Re-derives every estimator invariant from the raw matrices.
pub fn verify_estimator(
    p: &PlantModel,
    d: &DistributedEstimator,
    g: &CommGraph,
    tol: &Tolerances,
) -> Result<VerificationReport> {
    check_estimator_dims(p, d)?;
    if g.l() != d.l() {
        return Err(Error::DimensionMismatch("graph and estimator node counts differ".into()));
    }
    let q = d.q();
    let mut out = Vec::new();
    let mut push = |name: &str, node: Option<usize>, value: f64, limit: f64| {
        out.push(Residual { name: name.into(), node, value, limit, pass: value <= limit })
    };

    let ttt = &d.t * d.t.transpose();
    push("T Tᵀ = I", None, (ttt - Matrix::identity(q, q)).norm(), 1e-9 * (q as f64).max(1.0));
    let ktt = &p.k * d.t.transpose() * &d.t;
    push("K Tᵀ T = K", None, (ktt - &p.k).norm(), identity_limit(&[p.k.norm()]));

    let m0 = d.nodes.first().map(|v| v.m.clone());
    for i in 0..d.l() {
        let v = &d.nodes[i];
        let (res, lim) = state_identity(p, d, i);
        push("N T + L C = T A", Some(i), res.norm(), lim);
        let (res, lim) = input_identity(p, d, i);
        push("H = T B - L D", Some(i), res.norm(), lim);
        let rk = &p.k * d.t.transpose();
        push("R = K Tᵀ", Some(i), (&v.r - &rk).norm(), identity_limit(&[rk.norm()]));
        let m_asym = (&v.m - v.m.transpose()).norm();
        push("M symmetric", Some(i), m_asym, identity_limit(&[v.m.norm()]));
        let pd = m_asym <= identity_limit(&[v.m.norm()])
            && matnum::is_positive_definite(&(0.5 * (&v.m + v.m.transpose())), 0.0).unwrap_or(false);
        push("M positive definite", Some(i), if pd { 0.0 } else { 1.0 }, 0.0);
        if let Some(m0) = &m0 {
            push("M equal across nodes", Some(i), (&v.m - m0).norm(), identity_limit(&[m0.norm()]));
        }
    }

    let mut sum_n = Matrix::zeros(q, q);
    for v in &d.nodes {
        sum_n += &v.n;
    }
    let sum_n_abscissa = if q == 0 { f64::NEG_INFINITY } else { matnum::spectral_abscissa(&sum_n)? };
    push("Σ Nᵢ Hurwitz", None, sum_n_abscissa.max(-tol.stab_tol) + tol.stab_tol, 0.0);
    let closed_loop_abscissa = if q == 0 {
        f64::NEG_INFINITY
    } else {
        matnum::spectral_abscissa(&d.closed_loop(&g.laplacian()))?
    };
    push("closed loop Hurwitz", None, closed_loop_abscissa.max(-tol.stab_tol) + tol.stab_tol, 0.0);

    let pass = out.iter().all(|r| r.pass);
    Ok(VerificationReport { residuals: out, sum_n_abscissa, closed_loop_abscissa, pass })
}

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorFile {
    pub format: String,
    pub version: u32,
    pub n: usize,
    pub q: usize,
    pub m: usize,
    pub r: usize,
    #[serde(rename = "T")]
    pub t: Rows,
    pub gamma: f64,
    pub nodes: Vec<NodeFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ReportScalars>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeFile {
    pub p: usize,
    #[serde(rename = "N")]
    pub n: Rows,
    #[serde(rename = "H")]
    pub h: Rows,
    #[serde(rename = "L")]
    pub l: Rows,
    #[serde(rename = "M")]
    pub m: Rows,
    #[serde(rename = "R")]
    pub r: Rows,
}

/// Scalars of a [`SynthesisReport`]; undefined values are `null`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportScalars {
    #[serde(rename = "Lambda1")]
    pub big_lambda1: f64,
    #[serde(rename = "Lambda2")]
    pub big_lambda2: f64,
    #[serde(rename = "Lambda3")]
    pub big_lambda3: f64,
    pub lambda2: Option<f64>,
    pub gamma_bound: Option<f64>,
    pub gamma_used: f64,
}

impl From<&SynthesisReport> for ReportScalars {
    fn from(r: &SynthesisReport) -> Self {
        Self {
            big_lambda1: r.big_lambda1,
            big_lambda2: r.big_lambda2,
            big_lambda3: r.big_lambda3,
            lambda2: r.lambda2,
            gamma_bound: r.gamma_bound,
            gamma_used: r.gamma_used,
        }
    }
}

impl EstimatorFile {
    pub fn new(d: &DistributedEstimator, report: Option<&SynthesisReport>) -> Self {
        let first = d.nodes.first();
        Self {
            format: ESTIMATOR_FORMAT.into(),
            version: ESTIMATOR_VERSION,
            n: d.n_state(),
            q: d.q(),
            m: first.map_or(0, |v| v.h.ncols()),
            r: first.map_or(0, |v| v.r.nrows()),
            t: matrix_to_rows(&d.t),
            gamma: d.gamma,
            nodes: d
                .nodes
                .iter()
                .map(|v| NodeFile {
                    p: v.l.ncols(),
                    n: matrix_to_rows(&v.n),
                    h: matrix_to_rows(&v.h),
                    l: matrix_to_rows(&v.l),
                    m: matrix_to_rows(&v.m),
                    r: matrix_to_rows(&v.r),
                })
                .collect(),
            report: report.map(ReportScalars::from),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("estimator serializes");
        s.push('\n');
        s
    }

    pub fn to_estimator(&self) -> Result<DistributedEstimator> {
        if self.format != ESTIMATOR_FORMAT || self.version != ESTIMATOR_VERSION {
            return Err(Error::Parse(format!(
                "unsupported estimator file {} v{}",
                self.format, self.version
            )));
        }
        let (n, q, m, r) = (self.n, self.q, self.m, self.r);
        let shaped = |rows: &Rows, nr: usize, nc: usize, name: &str| -> Result<Matrix> {
            let mat = matrix_from_rows(rows, Some(nc), name)?;
            if mat.nrows() != nr {
                return Err(Error::Parse(format!("{name}: expected {nr} rows, found {}", mat.nrows())));
            }
            Ok(mat)
        };
        let t = shaped(&self.t, q, n, "T")?;
        let nodes = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, v)| {
                Ok(NodeEstimator {
                    n: shaped(&v.n, q, q, &format!("nodes[{i}].N"))?,
                    h: shaped(&v.h, q, m, &format!("nodes[{i}].H"))?,
                    l: shaped(&v.l, q, v.p, &format!("nodes[{i}].L"))?,
                    m: shaped(&v.m, q, q, &format!("nodes[{i}].M"))?,
                    r: shaped(&v.r, r, q, &format!("nodes[{i}].R"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if !self.gamma.is_finite() {
            return Err(Error::Parse("gamma must be finite".into()));
        }
        Ok(DistributedEstimator { t, nodes, gamma: self.gamma })
    }
}
