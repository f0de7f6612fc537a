//! Observability decomposition and partial-detectability tests.
//!
//! Two independent routes decide whether `z = Kx` can be reconstructed
//! asymptotically from `y = Cx`:
//!
//! * the rank route compares `rank [D_λ; K]` with `rank D_λ` at every
//!   eigenvalue of `A` in the closed right half plane. Off the spectrum
//!   `(λI - A)ⁿ` is invertible, so `D_λ` already has full column rank and
//!   the condition holds trivially;
//! * the structural route rotates the system into observable / stable
//!   unobservable / unstable unobservable coordinates and checks that `K`
//!   does not touch the last block.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{fmt_complex, Error, Result};
use crate::matnum::{self, CMatrix, Matrix, DEFAULT_STAB_TOL};
use crate::sysmodel::PlantModel;

/// Distinct eigenvalues closer than this are tested once.
pub const EIGEN_DEDUP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// `Re(λ) < -stab_tol` counts as stable.
    pub stab_tol: f64,
    /// Relative rank threshold; `None` means `max(rows, cols)·ε`.
    pub rank_tol: Option<f64>,
    /// `‖K_ō3‖_F ≤ zero_tol · max(‖K‖_F, 1)` counts as zero.
    pub zero_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { stab_tol: DEFAULT_STAB_TOL, rank_tol: None, zero_tol: 1e-8 }
    }
}

/// Orthogonal change of coordinates `P` with
///
/// ```text
/// PᵀAP = [A_o1 0 0; A_21 A_ō2 0; A_31 A_32 A_ō3],  CP = [C_o1 0 0],
/// KP = [K_o1 K_ō2 K_ō3]
/// ```
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub p: Matrix,
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub a_o1: Matrix,
    pub a_21: Matrix,
    pub a_31: Matrix,
    pub a_32: Matrix,
    pub a_obar2: Matrix,
    pub a_obar3: Matrix,
    pub c_o1: Matrix,
    pub k_o1: Matrix,
    pub k_obar2: Matrix,
    pub k_obar3: Matrix,
}

impl Decomposition {
    pub fn n(&self) -> usize {
        self.n1 + self.n2 + self.n3
    }

    /// Dimension of the estimator state, `n1 + n2`.
    pub fn q(&self) -> usize {
        self.n1 + self.n2
    }

    /// `T = [I_q 0] Pᵀ`.
    pub fn t(&self) -> Matrix {
        self.p.columns(0, self.q()).transpose()
    }

    /// `(B_o1, B_ō2, B_ō3)` from `PᵀB`.
    pub fn input_blocks(&self, b: &Matrix) -> (Matrix, Matrix, Matrix) {
        let pb = self.p.transpose() * b;
        (
            pb.rows(0, self.n1).into_owned(),
            pb.rows(self.n1, self.n2).into_owned(),
            pb.rows(self.n1 + self.n2, self.n3).into_owned(),
        )
    }

    pub fn k_norm(&self) -> f64 {
        (self.k_o1.norm_squared() + self.k_obar2.norm_squared() + self.k_obar3.norm_squared()).sqrt()
    }
}

/// One tested eigenvalue of the rank route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    #[serde(serialize_with = "ser_complex")]
    pub lambda: Complex<f64>,
    pub rank_with_k: usize,
    pub rank_without_k: usize,
}

impl Witness {
    pub fn holds(&self) -> bool {
        self.rank_with_k == self.rank_without_k
    }
}

fn ser_complex<S: serde::Serializer>(z: &Complex<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeStruct;
    let mut st = s.serialize_struct("complex", 2)?;
    st.serialize_field("re", &z.re)?;
    st.serialize_field("im", &z.im)?;
    st.end()
}

#[derive(Debug, Clone, Serialize)]
pub struct DetectabilityVerdict {
    pub detectable: bool,
    /// Rank pairs at every tested eigenvalue (rank route only).
    pub witnesses: Vec<Witness>,
    /// `‖K_ō3‖_F` (structural route only).
    pub k_obar3_norm: Option<f64>,
    pub note: String,
}

impl DetectabilityVerdict {
    pub fn failing(&self) -> impl Iterator<Item = &Witness> {
        self.witnesses.iter().filter(|w| !w.holds())
    }

    pub fn into_error(self) -> Error {
        let witnesses: Vec<_> =
            self.failing().map(|w| (w.lambda, w.rank_with_k, w.rank_without_k)).collect();
        Error::NotDetectable { witnesses }
    }
}

fn check_dims(a: &Matrix, c: &Matrix, k: &Matrix) -> Result<()> {
    let n = a.nrows();
    if !a.is_square() || c.ncols() != n || k.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{}, C is {}x{}, K is {}x{}",
            a.nrows(),
            a.ncols(),
            c.nrows(),
            c.ncols(),
            k.nrows(),
            k.ncols()
        )));
    }
    Ok(())
}

/// Observability decomposition with the unobservable block split into a
/// stable leading part and an unstable trailing part.
pub fn decompose(a: &Matrix, c: &Matrix, k: &Matrix, tol: &Tolerances) -> Result<Decomposition> {
    check_dims(a, c, k)?;
    let n = a.nrows();
    let (v, n1) = matnum::observability_basis(a, c, tol.rank_tol)?;
    let a1 = v.transpose() * a * &v;
    let nu = n - n1;
    let a_unobs = a1.view((n1, n1), (nu, nu)).into_owned();
    let sch = matnum::ordered_real_schur(&a_unobs, tol.stab_tol)?;
    let n2 = sch.split;
    let n3 = nu - n2;

    let mut p = v.clone();
    if nu > 0 {
        let tail = v.columns(n1, nu) * &sch.q;
        p.columns_mut(n1, nu).copy_from(&tail);
    }

    let at = p.transpose() * a * &p;
    let ct = c * &p;
    let kt = k * &p;
    let scale = a.norm().max(c.norm()).max(f64::MIN_POSITIVE);
    let upper = at.view((0, n1), (n1, nu)).norm() + at.view((n1, n1 + n2), (n2, n3)).norm();
    let c_tail = ct.columns(n1, nu).norm();
    if upper > 1e-8 * scale || c_tail > 1e-8 * scale {
        return Err(Error::NumericFailure(format!(
            "observability decomposition lost its block structure (upper {upper:.3e}, C tail \
             {c_tail:.3e}); try a tighter rank tolerance"
        )));
    }

    let blk = |r0: usize, c0: usize, r: usize, cc: usize| at.view((r0, c0), (r, cc)).into_owned();
    let dec = Decomposition {
        n1,
        n2,
        n3,
        a_o1: blk(0, 0, n1, n1),
        a_21: blk(n1, 0, n2, n1),
        a_31: blk(n1 + n2, 0, n3, n1),
        a_32: blk(n1 + n2, n1, n3, n2),
        a_obar2: blk(n1, n1, n2, n2),
        a_obar3: blk(n1 + n2, n1 + n2, n3, n3),
        c_o1: ct.columns(0, n1).into_owned(),
        k_o1: kt.columns(0, n1).into_owned(),
        k_obar2: kt.columns(n1, n2).into_owned(),
        k_obar3: kt.columns(n1 + n2, n3).into_owned(),
        p,
    };

    let obs = matnum::observability_matrix(
        &(&dec.a_o1 * matnum::pow2_unit_scale(&dec.a_o1)),
        &(&dec.c_o1 * matnum::pow2_unit_scale(&dec.c_o1)),
    );
    if matnum::rank_tol(&obs, tol.rank_tol)? != n1 {
        return Err(Error::NumericFailure(
            "observable block failed its rank re-check; try a tighter rank tolerance".into(),
        ));
    }
    Ok(dec)
}

fn to_complex(m: &Matrix) -> CMatrix {
    m.map(|v| Complex::new(v, 0.0))
}

/// `[C; C(λI-A); …; C(λI-A)^{n-1}; (λI-A)ⁿ]`, `(np + n) × n`.
pub fn d_lambda(a: &Matrix, c: &Matrix, lambda: Complex<f64>) -> CMatrix {
    let n = a.nrows();
    let p = c.nrows();
    let shifted = CMatrix::identity(n, n) * lambda - to_complex(a);
    let mut out = CMatrix::zeros(n * p + n, n);
    let mut block = to_complex(c);
    for k in 0..n {
        out.view_mut((k * p, 0), (p, n)).copy_from(&block);
        block = &block * &shifted;
    }
    let mut power = CMatrix::identity(n, n);
    for _ in 0..n {
        power = &power * &shifted;
    }
    out.view_mut((n * p, 0), (n, n)).copy_from(&power);
    out
}

/// Eigenvalues of `A` in the closed right half plane, one per cluster and
/// only the upper-half-plane member of each conjugate pair.
pub fn unstable_test_points(a: &Matrix, stab_tol: f64) -> Result<Vec<Complex<f64>>> {
    let spec = matnum::eigenvalues_with_tol(a, stab_tol)?;
    let mut pts: Vec<Complex<f64>> = Vec::new();
    for z in spec.unstable() {
        if z.im < -EIGEN_DEDUP_TOL {
            continue;
        }
        let z = if z.im.abs() <= EIGEN_DEDUP_TOL { Complex::new(z.re, 0.0) } else { z };
        if pts.iter().all(|p| (p - z).norm() > EIGEN_DEDUP_TOL) {
            pts.push(z);
        }
    }
    pts.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    Ok(pts)
}

/// Rank route.
pub fn is_partially_detectable_rank(
    a: &Matrix,
    c: &Matrix,
    k: &Matrix,
    tol: &Tolerances,
) -> Result<DetectabilityVerdict> {
    check_dims(a, c, k)?;
    let n = a.nrows();
    // row-block scaling of D_λ by powers of two keeps both ranks
    let sa = matnum::pow2_unit_scale(a);
    let a_s = a * sa;
    let c_s = c * matnum::pow2_unit_scale(c);
    let kc = to_complex(&(k * matnum::pow2_unit_scale(k)));
    let mut witnesses = Vec::new();
    for lambda in unstable_test_points(a, tol.stab_tol)? {
        let d = d_lambda(&a_s, &c_s, lambda * sa);
        let mut dk = CMatrix::zeros(d.nrows() + k.nrows(), n);
        dk.view_mut((0, 0), d.shape()).copy_from(&d);
        dk.view_mut((d.nrows(), 0), kc.shape()).copy_from(&kc);
        witnesses.push(Witness {
            lambda,
            rank_with_k: matnum::rank_tol_complex(&dk, tol.rank_tol)?,
            rank_without_k: matnum::rank_tol_complex(&d, tol.rank_tol)?,
        });
    }
    let detectable = witnesses.iter().all(Witness::holds);
    Ok(DetectabilityVerdict {
        detectable,
        note: format!(
            "rank condition tested at {} eigenvalue(s) of A with Re >= -{:e}; elsewhere in the \
             closed right half plane (λI-A)^n is invertible and the condition holds trivially",
            witnesses.len(),
            tol.stab_tol
        ),
        witnesses,
        k_obar3_norm: None,
    })
}

/// Structural route: `K_ō3 = 0`.
pub fn is_partially_detectable_structural(d: &Decomposition, tol: &Tolerances) -> DetectabilityVerdict {
    let kn = d.k_obar3.norm();
    let detectable = kn <= tol.zero_tol * d.k_norm().max(1.0);
    DetectabilityVerdict {
        detectable,
        witnesses: Vec::new(),
        k_obar3_norm: Some(kn),
        note: format!("n1 = {}, n2 = {}, n3 = {}; ‖K_ō3‖_F = {kn:.3e}", d.n1, d.n2, d.n3),
    }
}

/// Runs both routes on `(A, C, K)` and insists they agree.
pub fn partial_detectability(
    a: &Matrix,
    c: &Matrix,
    k: &Matrix,
    tol: &Tolerances,
) -> Result<(DetectabilityVerdict, Decomposition)> {
    let rank = is_partially_detectable_rank(a, c, k, tol)?;
    let dec = decompose(a, c, k, tol)?;
    let structural = is_partially_detectable_structural(&dec, tol);
    if rank.detectable != structural.detectable {
        let failing: Vec<_> = rank.failing().map(|w| fmt_complex(w.lambda)).collect();
        return Err(Error::InternalInconsistency(format!(
            "rank route says {} (failing at [{}]) but structural route says {} (‖K_ō3‖ = {:.3e}); \
             tolerances are probably misconfigured",
            rank.detectable,
            failing.join(", "),
            structural.detectable,
            structural.k_obar3_norm.unwrap_or(f64::NAN)
        )));
    }
    let verdict = DetectabilityVerdict {
        detectable: rank.detectable,
        witnesses: rank.witnesses,
        k_obar3_norm: structural.k_obar3_norm,
        note: format!("{}; {}", rank.note, structural.note),
    };
    Ok((verdict, dec))
}

/// Partial detectability of `(A, C̃)` with respect to `K`.
pub fn is_jointly_partially_detectable(p: &PlantModel, tol: &Tolerances) -> Result<DetectabilityVerdict> {
    let (ct, _) = p.stacked_output();
    partial_detectability(&p.a, &ct, &p.k, tol).map(|(v, _)| v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::sysmodel::Sensor;

    fn m(r: usize, c: usize, v: &[f64]) -> Matrix {
        Matrix::from_row_slice(r, c, v)
    }

    #[test]
    fn decompose_scalar_observable() {
        let d = decompose(&m(1, 1, &[0.0]), &m(1, 1, &[1.0]), &m(1, 1, &[1.0]), &Tolerances::default()).unwrap();
        assert_eq!((d.n1, d.n2, d.n3), (1, 0, 0));
        assert!((d.p[(0, 0)].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn decompose_diagonal_with_stable_unobservable_mode() {
        let a = m(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let d = decompose(&a, &m(1, 2, &[1.0, 0.0]), &Matrix::zeros(0, 2), &Tolerances::default()).unwrap();
        assert_eq!((d.n1, d.n2, d.n3), (1, 1, 0));
        assert!((d.a_o1[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((d.a_obar2[(0, 0)] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn decompose_demo_joint_output() {
        let p = fixtures::demo_plant();
        let (ct, _) = p.stacked_output();
        let d = decompose(&p.a, &ct, &p.k, &Tolerances::default()).unwrap();
        assert_eq!(d.n1 + d.n2, 5);
        assert_eq!(d.n3, 1);
    }

    #[test]
    fn d_lambda_scalar() {
        let d = d_lambda(&m(1, 1, &[0.0]), &m(1, 1, &[1.0]), Complex::new(1.0, 0.0));
        assert_eq!(d.shape(), (2, 1));
        assert_eq!(d[(0, 0)], Complex::new(1.0, 0.0));
        assert_eq!(d[(1, 0)], Complex::new(1.0, 0.0));
    }

    #[test]
    fn d_lambda_diagonal_by_hand() {
        // λI - A = diag(0, 2): rows C, C(λI-A), (λI-A)²
        let d = d_lambda(&m(2, 2, &[1.0, 0.0, 0.0, -1.0]), &m(1, 2, &[1.0, 0.0]), Complex::new(1.0, 0.0));
        let expect = m(4, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 4.0]);
        assert_eq!(d.map(|z| z.re), expect);
        assert!(d.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn d_lambda_demo_rank_at_two() {
        let p = fixtures::demo_plant();
        let d = d_lambda(&p.a, &p.sensors[0].c, Complex::new(2.0, 0.0));
        assert_eq!(matnum::rank_tol_complex(&d, None).unwrap(), 5);
    }

    #[test]
    fn demo_single_sensors_fail_with_expected_witnesses() {
        let p = fixtures::demo_plant();
        let tol = Tolerances::default();
        let v1 = is_partially_detectable_rank(&p.a, &p.sensors[0].c, &p.k, &tol).unwrap();
        assert!(!v1.detectable);
        assert!(v1.failing().any(|w| (w.lambda - 2.0).norm() < 1e-6 && w.rank_with_k == 6 && w.rank_without_k == 5));
        let v2 = is_partially_detectable_rank(&p.a, &p.sensors[1].c, &p.k, &tol).unwrap();
        assert!(!v2.detectable);
        assert!(v2.failing().any(|w| (w.lambda - 3.0).norm() < 1e-6 && w.rank_with_k == 5 && w.rank_without_k == 4));
    }

    #[test]
    fn zero_functional_is_always_detectable() {
        let p = fixtures::demo_plant();
        let k0 = Matrix::zeros(1, 6);
        let v = is_partially_detectable_rank(&p.a, &p.sensors[0].c, &k0, &Tolerances::default()).unwrap();
        assert!(v.detectable);
        let d = decompose(&p.a, &p.sensors[0].c, &k0, &Tolerances::default()).unwrap();
        assert!(is_partially_detectable_structural(&d, &Tolerances::default()).detectable);
    }

    #[test]
    fn structural_route_catches_unstable_unobservable_mode() {
        let a = m(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let d = decompose(&a, &m(1, 2, &[0.0, 1.0]), &m(1, 2, &[1.0, 0.0]), &Tolerances::default()).unwrap();
        assert_eq!(d.n3, 1);
        assert!((d.k_obar3[(0, 0)].abs() - 1.0).abs() < 1e-12);
        assert!(!is_partially_detectable_structural(&d, &Tolerances::default()).detectable);
    }

    #[test]
    fn joint_detectability_examples() {
        let tol = Tolerances::default();
        assert!(is_jointly_partially_detectable(&fixtures::demo_plant(), &tol).unwrap().detectable);

        let p = PlantModel::new(
            m(2, 2, &[2.0, 0.0, 0.0, 3.0]),
            Matrix::zeros(2, 1),
            vec![Sensor { c: m(1, 2, &[1.0, 0.0]), d: Matrix::zeros(1, 1) }],
            Matrix::identity(2, 2),
        )
        .unwrap();
        let v = is_jointly_partially_detectable(&p, &tol).unwrap();
        assert!(!v.detectable);
        assert!(v.failing().any(|w| (w.lambda - 3.0).norm() < 1e-9));
    }

    #[test]
    fn fully_detectable_pair_accepts_any_functional() {
        let p = fixtures::demo_plant();
        let c = Matrix::identity(6, 6);
        let k = Matrix::from_fn(2, 6, |i, j| (i + 2 * j) as f64 - 3.0);
        let (v, d) = partial_detectability(&p.a, &c, &k, &Tolerances::default()).unwrap();
        assert!(v.detectable);
        assert_eq!(d.n3, 0);
    }
}
