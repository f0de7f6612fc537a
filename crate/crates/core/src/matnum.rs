//! Dense real-matrix kernels: SVD and numerical rank, eigenvalues, ordered
//! real Schur form, Lyapunov solves, definiteness tests and stabilizing
//! output injection.
//!
//! Everything here is sized for desk-scale problems (n up to a few dozen).
//! Complex rank tests run an SVD directly over complex entries rather than
//! through the real 2n embedding.

use nalgebra::linalg::{Cholesky, Schur, SymmetricEigen, LU, QR, SVD};
use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type CMatrix = DMatrix<Complex<f64>>;

/// Default half-plane margin: `Re(λ) < -DEFAULT_STAB_TOL` counts as stable.
pub const DEFAULT_STAB_TOL: f64 = 1e-9;

/// Default Bass shift used when synthesizing output-injection gains.
pub const DEFAULT_INJECTION_SHIFT: f64 = 2.0;

const SVD_MAX_ITER: usize = 10_000;

/// Eigenvalues together with the tolerance used to classify them.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<Complex<f64>>,
    pub stab_tol: f64,
}

impl Spectrum {
    pub fn is_stable_value(&self, z: Complex<f64>) -> bool {
        z.re < -self.stab_tol
    }

    pub fn stable(&self) -> Vec<Complex<f64>> {
        self.values.iter().copied().filter(|z| self.is_stable_value(*z)).collect()
    }

    pub fn unstable(&self) -> Vec<Complex<f64>> {
        self.values.iter().copied().filter(|z| !self.is_stable_value(*z)).collect()
    }

    /// Largest real part, `-inf` for an empty spectrum.
    pub fn abscissa(&self) -> f64 {
        self.values.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn radius(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_hurwitz(&self) -> bool {
        self.values.iter().all(|z| self.is_stable_value(*z))
    }
}

/// Real Schur form `Qᵀ M Q = T_low` with `T_low` block *lower*
/// quasi-triangular and the stable eigenvalues gathered in the leading
/// `split × split` block.
#[derive(Debug, Clone)]
pub struct OrderedSchur {
    pub q: Matrix,
    pub t_low: Matrix,
    pub split: usize,
}

fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Precondition(format!("{what} has non-finite entries")))
    }
}

fn ensure_square(m: &Matrix, what: &str) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// Extends the orthonormal columns of `u` to a full orthonormal basis of
/// `R^n`, picking the standard basis vectors with the largest residual.
fn complete_orthonormal(u: &Matrix) -> Matrix {
    let n = u.nrows();
    let mut cols: Vec<DVector<f64>> = u.column_iter().map(|c| c.into_owned()).collect();
    while cols.len() < n {
        let mut best: Option<(f64, DVector<f64>)> = None;
        for k in 0..n {
            let mut v = DVector::<f64>::zeros(n);
            v[k] = 1.0;
            // two passes of Gram-Schmidt
            for _ in 0..2 {
                for c in &cols {
                    let d = c.dot(&v);
                    v.axpy(-d, c, 1.0);
                }
            }
            let nv = v.norm();
            if best.as_ref().is_none_or(|(b, _)| nv > *b) {
                best = Some((nv, v));
            }
        }
        let (nv, v) = best.expect("n > 0");
        cols.push(v / nv);
    }
    Matrix::from_columns(&cols)
}

/// Full singular value decomposition `M = U·diag(S)·Vᵀ` with square
/// orthogonal `U` (rows×rows) and `V` (cols×cols) and `S` non-increasing.
pub fn svd(m: &Matrix) -> Result<(Matrix, Vec<f64>, Matrix)> {
    ensure_finite(m, "svd input")?;
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Ok((Matrix::identity(r, r), Vec::new(), Matrix::identity(c, c)));
    }
    if r < c {
        let (u, s, v) = svd(&m.transpose())?;
        return Ok((v, s, u));
    }
    let dec = SVD::try_new(m.clone(), true, true, f64::EPSILON, SVD_MAX_ITER)
        .ok_or_else(|| Error::NumericFailure("SVD did not converge".into()))?;
    let u_thin = dec.u.expect("requested U");
    let v = dec.v_t.expect("requested V").transpose();
    let s: Vec<f64> = dec.singular_values.iter().copied().collect();
    Ok((complete_orthonormal(&u_thin), s, v))
}

/// `max(rows, cols) · ε`, the relative threshold used when no explicit rank
/// tolerance is configured.
pub fn default_rank_tol(rows: usize, cols: usize) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON
}

fn count_above(s: &[f64], tol: f64) -> usize {
    let smax = s.iter().copied().fold(0.0, f64::max);
    let threshold = tol * smax;
    s.iter().filter(|&&v| v > threshold).count()
}

/// Numerical rank: singular values above `tol · σ_max`.
/// `tol = None` uses [`default_rank_tol`].
pub fn rank_tol(m: &Matrix, tol: Option<f64>) -> Result<usize> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(0);
    }
    ensure_finite(m, "rank input")?;
    let tol = tol.unwrap_or_else(|| default_rank_tol(m.nrows(), m.ncols()));
    let dec = SVD::try_new(m.clone(), false, false, f64::EPSILON, SVD_MAX_ITER)
        .ok_or_else(|| Error::NumericFailure("SVD did not converge".into()))?;
    Ok(count_above(dec.singular_values.as_slice(), tol))
}

/// Complex counterpart of [`rank_tol`].
pub fn rank_tol_complex(m: &CMatrix, tol: Option<f64>) -> Result<usize> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(0);
    }
    if !m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Precondition("rank input has non-finite entries".into()));
    }
    let tol = tol.unwrap_or_else(|| default_rank_tol(m.nrows(), m.ncols()));
    let dec = SVD::try_new(m.clone(), false, false, f64::EPSILON, SVD_MAX_ITER)
        .ok_or_else(|| Error::NumericFailure("complex SVD did not converge".into()))?;
    Ok(count_above(dec.singular_values.as_slice(), tol))
}

/// Deterministic orthogonal matrix used to re-seed a stalled QR iteration.
fn householder_probe(n: usize, variant: usize) -> Matrix {
    let v = DVector::from_fn(n, |i, _| 1.0 + ((i * (variant + 2) + variant) % 7) as f64 * 0.37);
    let v = v.normalize();
    Matrix::identity(n, n) - 2.0 * &v * v.transpose()
}

/// Unordered real Schur form `M = Q T Qᵀ` (T upper quasi-triangular,
/// 2×2 blocks only for complex pairs).
fn real_schur(m: &Matrix) -> Result<(Matrix, Matrix)> {
    let n = m.nrows();
    let max_iter = 200 + 100 * n;
    if let Some(s) = Schur::try_new(m.clone(), f64::EPSILON, max_iter) {
        return Ok(s.unpack());
    }
    // Retry on orthogonally similar copies; plain Francis shifts without
    // exceptional shifts can cycle on permutation-like matrices.
    for variant in 0..4 {
        let w = householder_probe(n, variant);
        let rotated = w.transpose() * m * &w;
        if let Some(s) = Schur::try_new(rotated, f64::EPSILON, max_iter) {
            let (q, t) = s.unpack();
            return Ok((w * q, t));
        }
    }
    Err(Error::NumericFailure(format!(
        "real Schur QR iteration did not converge for a {n}x{n} matrix"
    )))
}

/// Diagonal block layout `(start, size)` of an upper quasi-triangular matrix.
fn block_layout(t: &Matrix) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }
    blocks
}

fn block_eigenvalues(t: &Matrix, start: usize, size: usize) -> Vec<Complex<f64>> {
    if size == 1 {
        return vec![Complex::new(t[(start, start)], 0.0)];
    }
    let (a, b) = (t[(start, start)], t[(start, start + 1)]);
    let (c, d) = (t[(start + 1, start)], t[(start + 1, start + 1)]);
    let half_tr = 0.5 * (a + d);
    let disc = 0.25 * (a - d) * (a - d) + b * c;
    if disc >= 0.0 {
        let s = disc.sqrt();
        vec![Complex::new(half_tr + s, 0.0), Complex::new(half_tr - s, 0.0)]
    } else {
        let s = (-disc).sqrt();
        vec![Complex::new(half_tr, s), Complex::new(half_tr, -s)]
    }
}

/// Splits 2×2 diagonal blocks that carry real eigenvalues with a rotation so
/// every remaining 2×2 block holds a complex-conjugate pair.
fn split_real_pairs(t: &mut Matrix, q: &mut Matrix) {
    let n = t.nrows();
    let mut i = 0;
    while i + 1 < n {
        if t[(i + 1, i)] == 0.0 {
            i += 1;
            continue;
        }
        let ev = block_eigenvalues(t, i, 2);
        if ev[0].im != 0.0 {
            i += 2;
            continue;
        }
        // eigenvector of the 2x2 block for ev[0]
        let (a, b) = (t[(i, i)], t[(i, i + 1)]);
        let (c, d) = (t[(i + 1, i)], t[(i + 1, i + 1)]);
        let lam = ev[0].re;
        let (x, y) = if (a - lam).abs() + b.abs() >= (c).abs() + (d - lam).abs() {
            (b, lam - a)
        } else {
            (lam - d, c)
        };
        let r = x.hypot(y);
        let (cs, sn) = if r == 0.0 { (1.0, 0.0) } else { (x / r, y / r) };
        let g = Matrix::from_row_slice(2, 2, &[cs, -sn, sn, cs]);
        apply_local_similarity(t, q, i, &g);
        t[(i + 1, i)] = 0.0;
        i += 1;
    }
}

/// `T ← Gᵀ T G`, `Q ← Q G` where `G` acts on indices `start..start+k`.
fn apply_local_similarity(t: &mut Matrix, q: &mut Matrix, start: usize, g: &Matrix) {
    let k = g.nrows();
    let n = t.ncols();
    let rows = g.transpose() * t.view((start, 0), (k, n));
    t.view_mut((start, 0), (k, n)).copy_from(&rows);
    let cols = t.view((0, start), (n, k)) * g;
    t.view_mut((0, start), (n, k)).copy_from(&cols);
    let qc = q.view((0, start), (q.nrows(), k)) * g;
    q.view_mut((0, start), (q.nrows(), k)).copy_from(&qc);
}

/// Swaps the adjacent diagonal blocks at `start` (size `p`) and
/// `start + p` (size `s`) of an upper quasi-triangular `t`.
fn swap_blocks(t: &mut Matrix, q: &mut Matrix, start: usize, p: usize, s: usize) -> Result<()> {
    let t11 = t.view((start, start), (p, p)).into_owned();
    let t12 = t.view((start, start + p), (p, s)).into_owned();
    let t22 = t.view((start + p, start + p), (s, s)).into_owned();
    // T11 X - X T22 = -T12
    let kron = kron(&Matrix::identity(s, s), &t11) - kron(&t22.transpose(), &Matrix::identity(p, p));
    let rhs = -DVector::from_column_slice(t12.as_slice());
    let x = LU::new(kron)
        .solve(&rhs)
        .ok_or_else(|| Error::NumericFailure("block swap: singular Sylvester system".into()))?;
    let x = Matrix::from_column_slice(p, s, x.as_slice());
    let k = p + s;
    let mut z = Matrix::zeros(k, k);
    z.view_mut((0, 0), (p, s)).copy_from(&x);
    z.view_mut((p, 0), (s, s)).fill_with_identity();
    // pad with unit columns to square; Q's leading s columns span [X; I]
    for j in 0..p {
        z[(j, s + j)] = 1.0;
    }
    let g = QR::new(z).q();
    let scale = t.view((start, start), (k, k)).norm().max(f64::MIN_POSITIVE);
    apply_local_similarity(t, q, start, &g);
    let residual = t.view((start + s, start), (p, s)).norm();
    if residual > 1e-10 * scale {
        return Err(Error::NumericFailure(format!(
            "block swap rejected (residual {residual:.3e})"
        )));
    }
    t.view_mut((start + s, start), (p, s)).fill(0.0);
    Ok(())
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = Matrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij != 0.0 {
                out.view_mut((i * br, j * bc), (br, bc)).copy_from(&(b * aij));
            }
        }
    }
    out
}

/// Eigenvalues with algebraic multiplicity.
pub fn eigenvalues(m: &Matrix) -> Result<Spectrum> {
    eigenvalues_with_tol(m, DEFAULT_STAB_TOL)
}

pub fn eigenvalues_with_tol(m: &Matrix, stab_tol: f64) -> Result<Spectrum> {
    ensure_square(m, "eigenvalue input")?;
    ensure_finite(m, "eigenvalue input")?;
    let n = m.nrows();
    if n == 0 {
        return Ok(Spectrum { values: Vec::new(), stab_tol });
    }
    let (_, t) = real_schur(m)?;
    let values = block_layout(&t)
        .into_iter()
        .flat_map(|(s, k)| block_eigenvalues(&t, s, k))
        .collect();
    Ok(Spectrum { values, stab_tol })
}

/// Maximum real part of the eigenvalues of `m`.
pub fn spectral_abscissa(m: &Matrix) -> Result<f64> {
    Ok(eigenvalues(m)?.abscissa())
}

/// Eigenvalues of a symmetric matrix, ascending. The input is symmetrized.
pub fn symmetric_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    ensure_square(m, "symmetric eigenvalue input")?;
    ensure_finite(m, "symmetric eigenvalue input")?;
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let sym = 0.5 * (m + m.transpose());
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, SVD_MAX_ITER)
        .ok_or_else(|| Error::NumericFailure("symmetric eigensolver did not converge".into()))?;
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.total_cmp(b));
    Ok(v)
}

/// Orthogonal `Q` with `QᵀMQ` block lower quasi-triangular and the
/// eigenvalues with `Re < -stab_tol` in the leading block.
///
/// Built from the upper Schur form of `Mᵀ`, reordered by adjacent block
/// swaps, then transposed.
pub fn ordered_real_schur(m: &Matrix, stab_tol: f64) -> Result<OrderedSchur> {
    ensure_square(m, "Schur input")?;
    ensure_finite(m, "Schur input")?;
    let n = m.nrows();
    if n == 0 {
        return Ok(OrderedSchur { q: Matrix::zeros(0, 0), t_low: Matrix::zeros(0, 0), split: 0 });
    }
    let (mut q, mut t) = real_schur(&m.transpose())?;
    split_real_pairs(&mut t, &mut q);

    let is_stable = |t: &Matrix, s: usize, k: usize| {
        block_eigenvalues(t, s, k)[0].re < -stab_tol
    };

    // Move each stable block up to the end of the current stable prefix.
    let mut prefix = 0;
    loop {
        let blocks = block_layout(&t);
        let next = blocks
            .iter()
            .position(|&(s, k)| s >= prefix && is_stable(&t, s, k));
        let Some(mut idx) = next else { break };
        while blocks_start(&t, idx) > prefix {
            let layout = block_layout(&t);
            let (cur_start, cur_size) = layout[idx];
            let (prev_start, prev_size) = layout[idx - 1];
            debug_assert_eq!(prev_start + prev_size, cur_start);
            swap_blocks(&mut t, &mut q, prev_start, prev_size, cur_size)?;
            split_real_pairs(&mut t, &mut q);
            idx -= 1;
        }
        prefix += block_layout(&t)[idx].1;
    }

    let split = block_layout(&t)
        .iter()
        .filter(|&&(s, k)| is_stable(&t, s, k))
        .map(|&(_, k)| k)
        .sum();
    Ok(OrderedSchur { q, t_low: t.transpose(), split })
}

fn blocks_start(t: &Matrix, idx: usize) -> usize {
    block_layout(t)[idx].0
}

/// Solves `A X + X B = C` through the Kronecker-vectorized system.
pub(crate) fn solve_sylvester(a: &Matrix, b: &Matrix, c: &Matrix) -> Result<Matrix> {
    let (n, k) = c.shape();
    let sys = kron(&Matrix::identity(k, k), a) + kron(&b.transpose(), &Matrix::identity(n, n));
    let rhs = DVector::from_column_slice(c.as_slice());
    let x = LU::new(sys)
        .solve(&rhs)
        .ok_or_else(|| Error::NumericFailure("singular Kronecker system".into()))?;
    Ok(Matrix::from_column_slice(n, k, x.as_slice()))
}

/// Symmetric positive definite `P` with `NᵀP + PN + Q = 0`.
pub fn solve_lyapunov(nbar: &Matrix, q: &Matrix) -> Result<Matrix> {
    ensure_square(nbar, "Lyapunov coefficient")?;
    if q.shape() != nbar.shape() {
        return Err(Error::DimensionMismatch(format!(
            "Lyapunov right-hand side is {}x{}, expected {}x{}",
            q.nrows(),
            q.ncols(),
            nbar.nrows(),
            nbar.ncols()
        )));
    }
    if nbar.nrows() == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let absc = spectral_abscissa(nbar)?;
    if absc >= 0.0 {
        return Err(Error::Precondition(format!(
            "Lyapunov coefficient is not Hurwitz (spectral abscissa {absc:.6e})"
        )));
    }
    if !is_positive_definite(q, 1e-12 * q.norm().max(1.0))? {
        return Err(Error::Precondition("Lyapunov right-hand side is not positive definite".into()));
    }
    let nt = nbar.transpose();
    let p = solve_sylvester(&nt, nbar, &(-q))?;
    let p = 0.5 * (&p + p.transpose());
    if Cholesky::new(p.clone()).is_none() {
        return Err(Error::NumericFailure("Lyapunov solution is not positive definite".into()));
    }
    Ok(p)
}

/// True iff the (symmetric) matrix admits a Cholesky factorization whose
/// pivots all exceed `tol`.
pub fn is_positive_definite(m: &Matrix, tol: f64) -> Result<bool> {
    ensure_square(m, "definiteness input")?;
    let scale = m.norm().max(1.0);
    if (m - m.transpose()).norm() > 1e-9 * scale {
        return Err(Error::Precondition("definiteness test needs a symmetric matrix".into()));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(false);
    }
    // Plain Cholesky so the pivot threshold is explicit.
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > tol) {
            return Ok(false);
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / dj;
        }
    }
    Ok(true)
}

/// Power of two `s` with `‖s·M‖_F ∈ (1/2, 1]`, or 1 for a zero matrix.
/// Multiplying by `s` is exact, and the kernels of Krylov-type stacks do
/// not depend on it.
pub fn pow2_unit_scale<R: nalgebra::Dim, C: nalgebra::Dim, S>(m: &nalgebra::Matrix<f64, R, C, S>) -> f64
where
    S: nalgebra::storage::Storage<f64, R, C>,
{
    let norm = m.norm();
    if norm == 0.0 || !norm.is_finite() {
        return 1.0;
    }
    let s = 2f64.powi(-(norm.log2().ceil() as i32));
    if s * norm > 1.0 {
        0.5 * s
    } else {
        s
    }
}

/// Observability matrix `[C; CA; …; CA^{n-1}]`.
pub fn observability_matrix(a: &Matrix, c: &Matrix) -> Matrix {
    let n = a.nrows();
    let p = c.nrows();
    let mut out = Matrix::zeros(n * p, n);
    let mut block = c.clone();
    for k in 0..n {
        out.view_mut((k * p, 0), (p, n)).copy_from(&block);
        block = &block * a;
    }
    out
}

/// Right singular basis of the observability matrix: returns `(V, r)` with
/// the first `r` columns spanning the observable directions and the last
/// `n - r` spanning the unobservable subspace.
pub(crate) fn observability_basis(a: &Matrix, c: &Matrix, rank_tol: Option<f64>) -> Result<(Matrix, usize)> {
    let n = a.nrows();
    let o = observability_matrix(&(a * pow2_unit_scale(a)), &(c * pow2_unit_scale(c)));
    // pad to at least n rows so V comes back square
    let rows = o.nrows().max(n);
    let mut padded = Matrix::zeros(rows, n);
    padded.view_mut((0, 0), (o.nrows(), n)).copy_from(&o);
    let (_, s, v) = svd(&padded)?;
    let tol = rank_tol.unwrap_or_else(|| default_rank_tol(o.nrows(), n));
    let r = count_above(&s, tol);
    Ok((v, r))
}

/// Bass-type gain for an observable pair: moves every mode with
/// `Re ≥ -0.75·shift` left of `-shift` and leaves the faster modes alone.
fn partial_bass(a: &Matrix, c: &Matrix, shift: f64) -> Result<Matrix> {
    let n = a.nrows();
    let p = c.nrows();
    let keep_below = 0.75 * shift;
    let sch = ordered_real_schur(a, keep_below)?;
    let k = sch.split;
    let mut l = Matrix::zeros(n, p);
    if k == n {
        return Ok(l);
    }
    let m = n - k;
    let au = sch.t_low.view((k, k), (m, m)).into_owned();
    let cu = (c * &sch.q).columns(k, m).into_owned();
    // (Au + βI)ᵀ Z + Z (Au + βI) = CuᵀCu with -(Au + βI) Hurwitz
    let shifted = -(au + Matrix::identity(m, m) * shift);
    let z = solve_sylvester(&shifted.transpose(), &shifted, &(-(cu.transpose() * &cu)))?;
    let z = 0.5 * (&z + z.transpose());
    let chol = Cholesky::new(z).ok_or_else(|| {
        Error::SynthesisFailure("Bass Gramian is singular; pair is not observable".into())
    })?;
    let lu = chol.solve(&cu.transpose());
    l += sch.q.columns(k, m) * lu;
    Ok(l)
}

/// Output-injection gain `L` making `A - LC` Hurwitz for a detectable pair.
///
/// The gain acts only on the observable part of `(A, C)`; unobservable
/// modes keep their eigenvalues. `shift` is the Bass shift; on a failed
/// eigenvalue check the shift is doubled, at most three times.
pub fn stabilizing_output_injection(a: &Matrix, c: &Matrix, shift: f64) -> Result<Matrix> {
    ensure_square(a, "injection state matrix")?;
    ensure_finite(a, "injection state matrix")?;
    ensure_finite(c, "injection output matrix")?;
    let n = a.nrows();
    if c.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "C has {} columns, A is {n}x{n}",
            c.ncols()
        )));
    }
    if !(shift > 0.0) {
        return Err(Error::Precondition("injection shift must be positive".into()));
    }
    let p = c.nrows();
    if n == 0 {
        return Ok(Matrix::zeros(0, p));
    }
    let (v, r) = observability_basis(a, c, None)?;
    let vo = v.columns(0, r).into_owned();
    let ao = vo.transpose() * a * &vo;
    let co = c * &vo;

    let mut beta = shift;
    let mut last_abscissa = f64::NAN;
    for _ in 0..4 {
        let lo = partial_bass(&ao, &co, beta)?;
        let l = &vo * lo;
        let absc = spectral_abscissa(&(a - &l * c))?;
        if absc < -DEFAULT_STAB_TOL {
            return Ok(l);
        }
        last_abscissa = absc;
        beta *= 2.0;
    }
    Err(Error::SynthesisFailure(format!(
        "output injection could not stabilize the pair (spectral abscissa {last_abscissa:.6e}); \
         the pair is probably not detectable"
    )))
}
