//! Plants, sensor networks, communication graphs and the JSON scenario file.

use nalgebra::DVector;
use petgraph::algo::{connected_components, kosaraju_scc};
use petgraph::graph::{DiGraph, UnGraph};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matnum::{self, Matrix};
use crate::netsim::{SignalSpec, SignalTerm, SimulationConfig};
use crate::structan::Tolerances;
use crate::synth::SynthesisOptions;

/// One sensor node: `yᵢ = Cᵢx + Dᵢu`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sensor {
    pub c: Matrix,
    pub d: Matrix,
}

/// `ẋ = Ax + Bu`, `yᵢ = Cᵢx + Dᵢu` for `i = 1..l`, `z = Kx`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    pub a: Matrix,
    pub b: Matrix,
    pub sensors: Vec<Sensor>,
    pub k: Matrix,
}

impl PlantModel {
    pub fn new(a: Matrix, b: Matrix, sensors: Vec<Sensor>, k: Matrix) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!("A is {}x{}, must be square", n, a.ncols())));
        }
        if b.nrows() != n {
            return Err(Error::DimensionMismatch(format!("B has {} rows, expected {n}", b.nrows())));
        }
        if k.ncols() != n {
            return Err(Error::DimensionMismatch(format!("K has {} columns, expected {n}", k.ncols())));
        }
        if sensors.is_empty() {
            return Err(Error::DimensionMismatch("at least one sensor is required".into()));
        }
        let m = b.ncols();
        for (i, s) in sensors.iter().enumerate() {
            if s.c.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "sensor {} C has {} columns, expected {n}",
                    i + 1,
                    s.c.ncols()
                )));
            }
            if s.d.shape() != (s.c.nrows(), m) {
                return Err(Error::DimensionMismatch(format!(
                    "sensor {} D is {}x{}, expected {}x{m}",
                    i + 1,
                    s.d.nrows(),
                    s.d.ncols(),
                    s.c.nrows()
                )));
            }
        }
        let all = std::iter::once(&a)
            .chain(std::iter::once(&b))
            .chain(std::iter::once(&k))
            .chain(sensors.iter().flat_map(|s| [&s.c, &s.d]));
        for mat in all {
            if mat.iter().any(|v| !v.is_finite()) {
                return Err(Error::Precondition("plant matrices must be finite".into()));
            }
        }
        Ok(Self { a, b, sensors, k })
    }

    /// Single-sensor plant `ẋ = Ax + Bu`, `y = Cx + Du`, `z = Kx`.
    pub fn single(a: Matrix, b: Matrix, c: Matrix, d: Matrix, k: Matrix) -> Result<Self> {
        Self::new(a, b, vec![Sensor { c, d }], k)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn r(&self) -> usize {
        self.k.nrows()
    }

    pub fn l(&self) -> usize {
        self.sensors.len()
    }

    pub fn p_total(&self) -> usize {
        self.sensors.iter().map(|s| s.c.nrows()).sum()
    }

    /// Row-stacked `(C̃, D̃)` in sensor order.
    pub fn stacked_output(&self) -> (Matrix, Matrix) {
        let (n, m) = (self.n(), self.m());
        let p = self.p_total();
        let mut c = Matrix::zeros(p, n);
        let mut d = Matrix::zeros(p, m);
        let mut row = 0;
        for s in &self.sensors {
            let pi = s.c.nrows();
            c.view_mut((row, 0), (pi, n)).copy_from(&s.c);
            d.view_mut((row, 0), (pi, m)).copy_from(&s.d);
            row += pi;
        }
        (c, d)
    }
}

/// Unweighted communication graph; `adjacency[(i, j)] = 1` iff node `j`
/// sends to node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CommGraph {
    adjacency: Matrix,
}

impl CommGraph {
    pub fn new(adjacency: Matrix) -> Result<Self> {
        if !adjacency.is_square() {
            return Err(Error::DimensionMismatch("adjacency matrix must be square".into()));
        }
        let l = adjacency.nrows();
        if l == 0 {
            return Err(Error::DimensionMismatch("graph needs at least one node".into()));
        }
        for i in 0..l {
            for j in 0..l {
                let v = adjacency[(i, j)];
                if v != 0.0 && v != 1.0 {
                    return Err(Error::Parse(format!(
                        "adjacency entry ({}, {}) = {v}; only unweighted 0/1 graphs are supported",
                        i + 1,
                        j + 1
                    )));
                }
                if i == j && v != 0.0 {
                    return Err(Error::Parse(format!("adjacency has a self-loop at node {}", i + 1)));
                }
            }
        }
        Ok(Self { adjacency })
    }

    /// Edges as `(sender, receiver)` pairs, zero-based.
    pub fn from_edges(l: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut a = Matrix::zeros(l, l);
        for &(from, to) in edges {
            if from >= l || to >= l {
                return Err(Error::DimensionMismatch(format!("edge ({from}, {to}) out of range")));
            }
            a[(to, from)] = 1.0;
        }
        Self::new(a)
    }

    pub fn single_node() -> Self {
        Self { adjacency: Matrix::zeros(1, 1) }
    }

    /// Undirected path `1 - 2 - … - l`.
    pub fn path(l: usize) -> Result<Self> {
        let edges: Vec<_> = (0..l.saturating_sub(1)).flat_map(|i| [(i, i + 1), (i + 1, i)]).collect();
        Self::from_edges(l, &edges)
    }

    /// Directed cycle `1 → 2 → … → l → 1`.
    pub fn directed_cycle(l: usize) -> Result<Self> {
        let edges: Vec<_> = (0..l).map(|i| (i, (i + 1) % l)).collect();
        Self::from_edges(l, &edges)
    }

    pub fn l(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    /// In-neighbours of node `i` (nodes `j` with `γᵢⱼ = 1`).
    pub fn neighbours(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.l()).filter(move |&j| self.adjacency[(i, j)] != 0.0)
    }

    /// `𝓛 = D - 𝒜` with in-degrees on the diagonal.
    pub fn laplacian(&self) -> Matrix {
        let l = self.l();
        let mut lap = -self.adjacency.clone();
        for i in 0..l {
            lap[(i, i)] = self.adjacency.row(i).sum();
        }
        lap
    }
}

/// Free-function form of [`CommGraph::laplacian`].
pub fn laplacian(g: &CommGraph) -> Matrix {
    g.laplacian()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopologyReport {
    pub is_undirected: bool,
    pub is_balanced: bool,
    pub is_strongly_connected: bool,
    pub is_connected_undirected: bool,
    pub satisfies_assumption1: bool,
    /// Smallest nonzero eigenvalue of `𝓛 + 𝓛ᵀ`; defined only for valid
    /// topologies with at least two nodes.
    pub lambda2: Option<f64>,
}

pub fn analyze_topology(g: &CommGraph) -> Result<TopologyReport> {
    let l = g.l();
    let adj = g.adjacency();
    let is_undirected = adj == &adj.transpose();
    let is_balanced = (0..l).all(|i| adj.row(i).sum() == adj.column(i).sum());

    let mut di = DiGraph::<(), ()>::new();
    let nodes: Vec<_> = (0..l).map(|_| di.add_node(())).collect();
    let mut un = UnGraph::<(), ()>::new_undirected();
    let unodes: Vec<_> = (0..l).map(|_| un.add_node(())).collect();
    for i in 0..l {
        for j in g.neighbours(i) {
            di.add_edge(nodes[j], nodes[i], ());
            un.add_edge(unodes[j], unodes[i], ());
        }
    }
    let is_strongly_connected = kosaraju_scc(&di).len() == 1;
    let is_connected_undirected = connected_components(&un) == 1;

    let lap = g.laplacian();
    let zero_tol = 1e-9 * l as f64;
    if is_undirected && l >= 2 {
        // spectral route must agree with the graph search
        let eig = matnum::symmetric_eigenvalues(&lap)?;
        let spectral = eig[1] > zero_tol;
        if spectral != is_connected_undirected {
            return Err(Error::InternalInconsistency(format!(
                "graph search says connected = {is_connected_undirected}, Laplacian spectrum says {spectral}"
            )));
        }
    }

    let satisfies_assumption1 = (is_undirected && is_connected_undirected)
        || (!is_undirected && is_balanced && is_strongly_connected);

    let lambda2 = if satisfies_assumption1 && l >= 2 {
        let sym = &lap + lap.transpose();
        matnum::symmetric_eigenvalues(&sym)?.into_iter().find(|&v| v > zero_tol)
    } else {
        None
    };

    Ok(TopologyReport {
        is_undirected,
        is_balanced,
        is_strongly_connected,
        is_connected_undirected,
        satisfies_assumption1,
        lambda2,
    })
}

/// Fully validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub plant: PlantModel,
    pub graph: CommGraph,
    pub synthesis: SynthesisOptions,
    pub simulation: Option<SimulationConfig>,
}

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub plant: PlantFile,
    pub graph: GraphFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthesis: Option<SynthesisFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantFile {
    #[serde(rename = "A")]
    pub a: Rows,
    #[serde(rename = "B")]
    pub b: Rows,
    #[serde(rename = "K")]
    pub k: Rows,
    pub sensors: Vec<SensorFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorFile {
    #[serde(rename = "C")]
    pub c: Rows,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Rows>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub adjacency: Rows,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stab_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationFile {
    pub t_end: f64,
    pub dt: f64,
    pub x0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w0: Option<Rows>,
    /// One list of terms per input channel.
    #[serde(default)]
    pub input: Vec<Vec<SignalTerm>>,
}

/// Builds a matrix from row-major nested arrays; `cols` fixes the width
/// when there are no rows.
pub fn matrix_from_rows(rows: &[Vec<f64>], cols: Option<usize>, name: &str) -> Result<Matrix> {
    let width = match (rows.first(), cols) {
        (Some(r), Some(c)) if r.len() != c => {
            return Err(Error::Parse(format!("{name}: expected {c} columns, found {}", r.len())))
        }
        (Some(r), _) => r.len(),
        (None, Some(c)) => c,
        (None, None) => 0,
    };
    for (i, r) in rows.iter().enumerate() {
        if r.len() != width {
            return Err(Error::Parse(format!(
                "{name}: row {} has {} entries, expected {width}",
                i + 1,
                r.len()
            )));
        }
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parse(format!("{name}: entries must be finite")));
    }
    Ok(Matrix::from_row_slice(rows.len(), width, &flat))
}

pub fn matrix_to_rows(m: &Matrix) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<Scenario> {
        let p = &self.plant;
        let a = matrix_from_rows(&p.a, None, "plant.A")?;
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Parse(format!("plant.A: must be square, got {}x{}", n, a.ncols())));
        }
        let b = matrix_from_rows(&p.b, None, "plant.B")?;
        if b.nrows() != n {
            return Err(Error::Parse(format!("plant.B: expected {n} rows, found {}", b.nrows())));
        }
        let m = b.ncols();
        let k = matrix_from_rows(&p.k, Some(n), "plant.K")?;
        if p.sensors.is_empty() {
            return Err(Error::Parse("plant.sensors: at least one sensor is required".into()));
        }
        let mut sensors = Vec::with_capacity(p.sensors.len());
        for (i, s) in p.sensors.iter().enumerate() {
            let c = matrix_from_rows(&s.c, Some(n), &format!("plant.sensors[{i}].C"))?;
            let d = match &s.d {
                Some(rows) => {
                    let d = matrix_from_rows(rows, Some(m), &format!("plant.sensors[{i}].D"))?;
                    if d.nrows() != c.nrows() {
                        return Err(Error::Parse(format!(
                            "plant.sensors[{i}].D: expected {} rows, found {}",
                            c.nrows(),
                            d.nrows()
                        )));
                    }
                    d
                }
                None => Matrix::zeros(c.nrows(), m),
            };
            sensors.push(Sensor { c, d });
        }
        let plant = PlantModel::new(a, b, sensors, k)?;

        let adj = matrix_from_rows(&self.graph.adjacency, None, "graph.adjacency")?;
        let graph = CommGraph::new(adj)?;
        if graph.l() != plant.l() {
            return Err(Error::Parse(format!(
                "graph.adjacency: {} nodes but the plant has {} sensors",
                graph.l(),
                plant.l()
            )));
        }

        let mut synthesis = SynthesisOptions::default();
        if let Some(s) = &self.synthesis {
            synthesis.gamma = s.gamma;
            let mut tol = Tolerances::default();
            if let Some(v) = s.stab_tol {
                tol.stab_tol = v;
            }
            tol.rank_tol = s.rank_tol;
            synthesis.tolerances = tol;
        }

        let simulation = match &self.simulation {
            None => None,
            Some(sim) => {
                if sim.x0.len() != n {
                    return Err(Error::Parse(format!(
                        "simulation.x0: expected {n} entries, found {}",
                        sim.x0.len()
                    )));
                }
                if !sim.input.is_empty() && sim.input.len() != m {
                    return Err(Error::Parse(format!(
                        "simulation.input: expected {m} channels, found {}",
                        sim.input.len()
                    )));
                }
                let channels = if sim.input.is_empty() { vec![Vec::new(); m] } else { sim.input.clone() };
                let w0 = sim
                    .w0
                    .as_ref()
                    .map(|rows| rows.iter().map(|r| DVector::from_column_slice(r)).collect());
                Some(SimulationConfig {
                    t_end: sim.t_end,
                    dt: sim.dt,
                    x0: DVector::from_column_slice(&sim.x0),
                    w0,
                    input: SignalSpec::new(channels),
                })
            }
        };

        Ok(Scenario { plant, graph, synthesis, simulation })
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        ScenarioFile::parse(text)?.validate()
    }

    pub fn to_file(&self) -> ScenarioFile {
        let p = &self.plant;
        let tol = &self.synthesis.tolerances;
        ScenarioFile {
            plant: PlantFile {
                a: matrix_to_rows(&p.a),
                b: matrix_to_rows(&p.b),
                k: matrix_to_rows(&p.k),
                sensors: p
                    .sensors
                    .iter()
                    .map(|s| SensorFile { c: matrix_to_rows(&s.c), d: Some(matrix_to_rows(&s.d)) })
                    .collect(),
            },
            graph: GraphFile { adjacency: matrix_to_rows(self.graph.adjacency()) },
            synthesis: Some(SynthesisFile {
                gamma: self.synthesis.gamma,
                stab_tol: Some(tol.stab_tol),
                rank_tol: tol.rank_tol,
            }),
            simulation: self.simulation.as_ref().map(|s| SimulationFile {
                t_end: s.t_end,
                dt: s.dt,
                x0: s.x0.iter().copied().collect(),
                w0: s.w0.as_ref().map(|w| w.iter().map(|v| v.iter().copied().collect()).collect()),
                input: s.input.channels.clone(),
            }),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("scenario serializes")
    }
}
