//! Seeded random plants with a prescribed observability structure.
//!
//! Systems are built in decomposed coordinates
//!
//! ```text
//! A = [A_o1 0 0; A_21 A_ō2 0; A_31 A_32 A_ō3],  C = [C_o1 0 0],  K = [K_1 K_2 K_3]
//! ```
//!
//! and rotated by a random orthogonal matrix. `K_3 = 0` makes the system
//! partially detectable; a nonzero `K_3` with `n3 > 0` makes it fail.

use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use serde::Serialize;

use crate::matnum::Matrix;
use crate::structan::{self, Tolerances};
use crate::sysmodel::{PlantModel, Sensor};

/// Minimum distance between eigenvalues of a generated `A`.
const MIN_SEPARATION: f64 = 0.25;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone)]
pub struct GeneratedSystem {
    pub a: Matrix,
    pub c: Matrix,
    pub k: Matrix,
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    /// Ground truth by construction.
    pub detectable: bool,
}

fn gaussian(rng: &mut impl Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn random_orthogonal(rng: &mut impl Rng, n: usize) -> Matrix {
    let qr = gaussian(rng, n, n).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `dim × dim` block whose eigenvalues have real parts in `re` and are at
/// least `MIN_SEPARATION` away from everything in `taken`.
fn spectrum_block(rng: &mut impl Rng, dim: usize, re: (f64, f64), taken: &mut Vec<Complex<f64>>) -> Matrix {
    let mut d = Matrix::zeros(dim, dim);
    let mut i = 0;
    while i < dim {
        let pair = i + 1 < dim && rng.random_bool(0.4);
        let x = rng.random_range(re.0..=re.1);
        let y = if pair { rng.random_range(0.3..2.0) } else { 0.0 };
        let z = Complex::new(x, y);
        if taken.iter().any(|w| (w - z).norm() < MIN_SEPARATION || (w.conj() - z).norm() < MIN_SEPARATION) {
            continue;
        }
        taken.push(z);
        if pair {
            d[(i, i)] = x;
            d[(i + 1, i + 1)] = x;
            d[(i, i + 1)] = y;
            d[(i + 1, i)] = -y;
            i += 2;
        } else {
            d[(i, i)] = x;
            i += 1;
        }
    }
    let q = random_orthogonal(rng, dim);
    &q * d * q.transpose()
}

/// Random `(A, C, K)` with block sizes `n1, n2, n3`, `p` outputs and `r`
/// functionals. With `detectable = false` and `n3 > 0` the functional
/// touches the unstable unobservable block.
pub fn random_system(
    rng: &mut impl Rng,
    (n1, n2, n3): (usize, usize, usize),
    p: usize,
    r: usize,
    detectable: bool,
) -> GeneratedSystem {
    let n = n1 + n2 + n3;
    let mut taken = Vec::new();
    let a_o1 = spectrum_block(rng, n1, (-2.0, 2.0), &mut taken);
    let a_o2 = spectrum_block(rng, n2, (-3.0, -0.8), &mut taken);
    let a_o3 = spectrum_block(rng, n3, (0.2, 2.0), &mut taken);

    let mut a = Matrix::zeros(n, n);
    a.view_mut((0, 0), (n1, n1)).copy_from(&a_o1);
    a.view_mut((n1, n1), (n2, n2)).copy_from(&a_o2);
    a.view_mut((n1 + n2, n1 + n2), (n3, n3)).copy_from(&a_o3);
    let lower = 0.5 * gaussian(rng, n2 + n3, n1 + n2);
    for i in 0..n2 + n3 {
        for j in 0..n1 + n2 {
            // keep A_ō2 and the zero block above A_ō3 intact
            if (i < n2 && j < n1) || (i >= n2) {
                a[(n1 + i, j)] = lower[(i, j)];
            }
        }
    }

    let mut c = Matrix::zeros(p, n);
    c.view_mut((0, 0), (p, n1)).copy_from(&gaussian(rng, p, n1));
    let mut k = gaussian(rng, r, n);
    let detectable = detectable || n3 == 0;
    if detectable {
        k.view_mut((0, n1 + n2), (r, n3)).fill(0.0);
    } else {
        // make sure every row cannot cancel against the unstable block
        k.view_mut((0, n1 + n2), (r, n3)).add_scalar_mut(0.5);
    }

    let rot = random_orthogonal(rng, n);
    GeneratedSystem {
        a: rot.transpose() * &a * &rot,
        c: c * &rot,
        k: k * &rot,
        n1,
        n2,
        n3,
        detectable,
    }
}

/// Random block sizes with `n1 + n2 + n3 = n` and `n1 ≥ min_n1`.
pub fn random_sizes(rng: &mut impl Rng, n: usize, min_n1: usize) -> (usize, usize, usize) {
    let n1 = rng.random_range(min_n1.min(n)..=n);
    let n2 = rng.random_range(0..=n - n1);
    (n1, n2, n - n1 - n2)
}

/// Plant on `l` nodes with one output row per node, jointly partially
/// detectable when `detectable` is set.
pub fn random_network_plant(rng: &mut impl Rng, n: usize, l: usize, m: usize, detectable: bool) -> (PlantModel, GeneratedSystem) {
    let sizes = loop {
        let s = random_sizes(rng, n, 1);
        if detectable || s.2 > 0 {
            break s;
        }
    };
    let r = rng.random_range(1..=2);
    let sys = random_system(rng, sizes, l, r, detectable);
    let b = gaussian(rng, n, m);
    let sensors = (0..l)
        .map(|i| Sensor { c: sys.c.rows(i, 1).into_owned(), d: 0.1 * gaussian(rng, 1, m) })
        .collect();
    let plant = PlantModel::new(sys.a.clone(), b, sensors, sys.k.clone()).expect("generated plant is consistent");
    (plant, sys)
}

/// Instance `i` of a seeded family.
pub fn instance_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut r = rng(seed);
    r.set_stream(i as u64);
    r
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SweepSummary {
    pub instances: usize,
    pub detectable: usize,
    pub agreements: usize,
    /// Rank and structural routes disagree.
    pub disagreements: usize,
    /// Both routes agree but contradict the construction.
    pub truth_mismatches: usize,
    pub errors: usize,
}

/// Compares both detectability routes on `count` random systems with
/// `n ≤ n_max`.
pub fn route_equivalence_sweep(seed: u64, count: usize, n_max: usize, tol: &Tolerances) -> SweepSummary {
    let mut out = SweepSummary { instances: count, ..Default::default() };
    for i in 0..count {
        let mut rng = instance_rng(seed, i);
        let n = rng.random_range(1..=n_max);
        let sizes = random_sizes(&mut rng, n, 0);
        let p = rng.random_range(1..=2);
        let r = rng.random_range(1..=2);
        let want = rng.random_bool(0.5);
        let sys = random_system(&mut rng, sizes, p, r, want);
        let rank = structan::is_partially_detectable_rank(&sys.a, &sys.c, &sys.k, tol);
        let structural = structan::decompose(&sys.a, &sys.c, &sys.k, tol)
            .map(|d| structan::is_partially_detectable_structural(&d, tol));
        match (rank, structural) {
            (Ok(a), Ok(b)) if a.detectable == b.detectable => {
                out.agreements += 1;
                if a.detectable != sys.detectable {
                    out.truth_mismatches += 1;
                }
            }
            (Ok(_), Ok(_)) => out.disagreements += 1,
            _ => out.errors += 1,
        }
        if sys.detectable {
            out.detectable += 1;
        }
    }
    out
}
