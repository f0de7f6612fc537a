use nalgebra::Complex;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("communication graph violates the topology assumption: {0}")]
    Topology(String),

    #[error("not partially detectable with respect to K; failing eigenvalues: {}", format_witnesses(.witnesses))]
    NotDetectable { witnesses: Vec<(Complex<f64>, usize, usize)> },

    #[error("synthesis failed: {0}")]
    SynthesisFailure(String),

    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),

    #[error("non-finite state encountered; last valid time t = {last_valid_time}")]
    NonFinite { last_valid_time: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_witnesses(w: &[(Complex<f64>, usize, usize)]) -> String {
    w.iter()
        .map(|(l, with_k, without_k)| {
            format!("lambda = {} (rank [D;K] = {with_k} != {without_k} = rank D)", fmt_complex(*l))
        })
        .collect::<Vec<_>>()
        .join(", ")
}

pub(crate) fn fmt_complex(z: Complex<f64>) -> String {
    if z.im.abs() <= 1e-12 * z.re.abs().max(1.0) {
        format!("{:.6}", z.re)
    } else if z.im >= 0.0 {
        format!("{:.6}+{:.6}i", z.re, z.im)
    } else {
        format!("{:.6}-{:.6}i", z.re, -z.im)
    }
}
