//! Dense generalized eigenvalue solver for small complex pencils (M, N).
//!
//! Finds all (alpha, beta) pairs with det(beta * M - alpha * N) = 0 using a
//! single-shift complex QZ iteration: unitary reduction to
//! Hessenberg-triangular form followed by implicit shifted sweeps. Rank
//! deficiency of N is split off structurally before the iteration, so
//! infinite eigenvalues (beta = 0) are produced exactly rather than as noisy
//! quotients. A characteristic-polynomial fallback covers the rare
//! non-converged window.
//!
//! The solver targets the small pencils that arise when mapping Jacobian
//! eigenvalues back through an m x m coupling (m is the number of measured
//! outputs, in practice below ten); it is O(m^3) per sweep with no blocking.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative rank threshold used when compressing the right-hand matrix.
const RANK_TOL: f64 = 1e-10;
/// Shift sweeps allowed per eigenvalue before the fallback path engages.
const MAX_SWEEPS_PER_EIG: usize = 50;

/// One generalized eigenvalue in homogeneous form: the eigenvalue is
/// `alpha / beta`, and `beta = 0` encodes an infinite eigenvalue.
#[derive(Debug, Clone, Copy)]
pub struct PencilPair {
    pub alpha: Complex64,
    pub beta: Complex64,
}

impl PencilPair {
    /// The eigenvalue `alpha / beta`, or `None` when `|beta|` is at or below
    /// `beta_floor` and the pair represents an infinite eigenvalue.
    pub fn finite_value(&self, beta_floor: f64) -> Option<Complex64> {
        if self.beta.norm() > beta_floor {
            Some(self.alpha / self.beta)
        } else {
            None
        }
    }
}

/// Threshold under which a `beta` is treated as zero, relative to the norm of
/// the right-hand matrix of the pencil.
pub fn beta_floor(n_norm: f64) -> f64 {
    1e-12 * n_norm.max(1.0)
}

/// All generalized eigenvalues of the pencil (M, N) as homogeneous pairs.
/// Exactly `m` pairs are returned for an m x m pencil.
pub fn generalized_eigenvalues(
    m_mat: &DMatrix<Complex64>,
    n_mat: &DMatrix<Complex64>,
) -> Result<Vec<PencilPair>> {
    if !m_mat.is_square() || !n_mat.is_square() || m_mat.nrows() != n_mat.nrows() {
        return Err(Error::InvalidArgument(format!(
            "pencil matrices must be square and of equal size, got {}x{} and {}x{}",
            m_mat.nrows(),
            m_mat.ncols(),
            n_mat.nrows(),
            n_mat.ncols()
        )));
    }
    for x in m_mat.iter().chain(n_mat.iter()) {
        if !x.re.is_finite() || !x.im.is_finite() {
            return Err(Error::InvalidArgument("pencil contains non-finite entries".into()));
        }
    }
    geigs_impl(m_mat.clone(), n_mat.clone(), 0)
}

/// Recursive core: normalizes scales, splits off the rank deficiency of N,
/// then runs the QZ iteration on the remaining full-rank-N subpencil.
fn geigs_impl(
    m_mat: DMatrix<Complex64>,
    n_mat: DMatrix<Complex64>,
    depth: usize,
) -> Result<Vec<PencilPair>> {
    let dim = m_mat.nrows();
    if dim == 0 {
        return Ok(Vec::new());
    }
    if depth > dim + 2 {
        return Err(Error::Numerical(
            "pencil deflation did not terminate; the pencil is likely singular".into(),
        ));
    }
    let nu_m = m_mat.norm();
    let nu_n = n_mat.norm();

    if nu_n == 0.0 {
        // det(M - lambda N) is constant; a nonsingular M means every
        // eigenvalue is infinite, a singular M means the pencil is singular.
        if rank_of(&m_mat, nu_m) < dim {
            return Err(Error::Numerical(
                "singular pencil: both matrices are rank deficient on a common subspace".into(),
            ));
        }
        return Ok(vec![
            PencilPair {
                alpha: Complex64::ONE,
                beta: Complex64::ZERO,
            };
            dim
        ]);
    }

    let m_s = m_mat.map(|x| x / nu_m.max(f64::MIN_POSITIVE));
    let n_s = n_mat.map(|x| x / nu_n);

    // Column compression of N: QR with column pivoting of N^H yields a
    // unitary V = Q with N V = [N1 | 0] and N1 of full column rank.
    let qr_nh = qr_decompose(&n_s.adjoint(), true);
    let rank = qr_nh.rank(RANK_TOL);

    let pairs = if rank == dim {
        qz_full_rank(m_s, n_s, true)?
    } else {
        let v = qr_nh.q;
        let mut nv = &n_s * &v;
        for j in rank..dim {
            for i in 0..dim {
                nv[(i, j)] = Complex64::ZERO;
            }
        }
        let mv = &m_s * &v;

        // QR of the trailing columns of MV turns the pencil into block
        // triangular form after a cyclic row permutation; the bottom-right
        // block carries the infinite eigenvalues.
        let s_cols = mv.columns(rank, dim - rank).into_owned();
        let qr_s = qr_decompose(&s_cols, false);
        let r_s = &qr_s.r;
        let scale = mv.norm().max(1.0);
        for i in 0..(dim - rank) {
            if r_s[(i, i)].norm() <= 1e-12 * (dim as f64) * scale {
                return Err(Error::Numerical(format!(
                    "near-singular pencil: infinite-eigenvalue block has negligible pivot \
                     {:.3e} against scale {:.3e}",
                    r_s[(i, i)].norm(),
                    scale
                )));
            }
        }

        let qm = qr_s.q.adjoint() * &mv;
        let qn = qr_s.q.adjoint() * &nv;
        // Rows 0..dim-rank move to the bottom; the leading rank x rank block
        // of the permuted pencil holds every finite eigenvalue.
        let row_of = |i: usize| (i + (dim - rank)) % dim;
        let sub_m = DMatrix::from_fn(rank, rank, |i, j| qm[(row_of(i), j)]);
        let sub_n = DMatrix::from_fn(rank, rank, |i, j| qn[(row_of(i), j)]);

        let mut pairs = geigs_impl(sub_m, sub_n, depth + 1)?;
        for i in 0..(dim - rank) {
            pairs.push(PencilPair {
                alpha: r_s[(i, i)],
                beta: Complex64::ZERO,
            });
        }
        pairs
    };

    Ok(pairs
        .into_iter()
        .map(|p| PencilPair {
            alpha: p.alpha * nu_m.max(f64::MIN_POSITIVE),
            beta: p.beta * nu_n,
        })
        .collect())
}

/// QZ iteration for a pencil whose right-hand matrix has full rank.
fn qz_full_rank(
    m_s: DMatrix<Complex64>,
    n_s: DMatrix<Complex64>,
    allow_fallback: bool,
) -> Result<Vec<PencilPair>> {
    let dim = m_s.nrows();
    if dim == 1 {
        return Ok(vec![PencilPair {
            alpha: m_s[(0, 0)],
            beta: n_s[(0, 0)],
        }]);
    }

    // Hessenberg-triangular reduction: QR of N, then Givens elimination of M
    // below the first subdiagonal with right rotations repairing N.
    let qr_n = qr_decompose(&n_s, false);
    let mut h = qr_n.q.adjoint() * &m_s;
    let mut t = qr_n.r.clone();
    for j in 0..dim.saturating_sub(2) {
        for i in ((j + 2)..dim).rev() {
            if let Some(g) = Rot::from(h[(i - 1, j)], h[(i, j)]) {
                g.apply_left(&mut h, i - 1, i);
                g.apply_left(&mut t, i - 1, i);
            } else {
                h[(i, j)] = Complex64::ZERO;
                continue;
            }
            h[(i, j)] = Complex64::ZERO;
            if let Some(g) = Rot::from(t[(i, i - 1)], t[(i, i)]) {
                g.apply_right(&mut h, i - 1, i);
                g.apply_right(&mut t, i - 1, i);
            }
            t[(i, i - 1)] = Complex64::ZERO;
        }
    }

    match qz_iterate(&mut h, &mut t) {
        Ok(pairs) => Ok(pairs),
        Err(err) if allow_fallback => {
            log::warn!("QZ iteration failed ({err}); switching to characteristic-polynomial fallback");
            charpoly_eigenvalues(&m_s, &n_s)
        }
        Err(err) => Err(err),
    }
}

/// Implicit single-shift sweeps on a Hessenberg-triangular pencil.
fn qz_iterate(
    h: &mut DMatrix<Complex64>,
    t: &mut DMatrix<Complex64>,
) -> Result<Vec<PencilPair>> {
    let dim = h.nrows();
    let eps = f64::EPSILON;
    let norm_h = h.norm().max(f64::MIN_POSITIVE);
    let norm_t = t.norm().max(f64::MIN_POSITIVE);
    let mut pairs: Vec<PencilPair> = Vec::with_capacity(dim);
    let mut end = dim - 1;
    let mut sweeps = 0usize;
    let mut stall = 0usize;
    let budget = MAX_SWEEPS_PER_EIG * dim;

    'outer: loop {
        // Peel converged eigenvalues off the bottom of the active window.
        loop {
            if end == 0 {
                pairs.push(PencilPair {
                    alpha: h[(0, 0)],
                    beta: t[(0, 0)],
                });
                break 'outer;
            }
            let sub = h[(end, end - 1)].norm();
            let local = h[(end - 1, end - 1)].norm() + h[(end, end)].norm();
            if sub <= eps * local.max(eps * norm_h) {
                h[(end, end - 1)] = Complex64::ZERO;
                pairs.push(PencilPair {
                    alpha: h[(end, end)],
                    beta: t[(end, end)],
                });
                end -= 1;
                stall = 0;
                continue;
            }
            // A vanished T pivot at the bottom is rotated into an explicit
            // infinite eigenvalue; the column rotation leaves T triangular
            // because its last row is already negligible.
            if t[(end, end)].norm() <= eps * norm_t * dim as f64 {
                if let Some(g) = Rot::from(h[(end, end - 1)], h[(end, end)]) {
                    g.apply_right(h, end - 1, end);
                    g.apply_right(t, end - 1, end);
                }
                h[(end, end - 1)] = Complex64::ZERO;
                t[(end, end - 1)] = Complex64::ZERO;
                pairs.push(PencilPair {
                    alpha: h[(end, end)],
                    beta: Complex64::ZERO,
                });
                end -= 1;
                stall = 0;
                continue;
            }
            break;
        }

        // Active window [start, end]: walk up to the nearest deflation point.
        let mut start = end;
        while start > 0 {
            let sub = h[(start, start - 1)].norm();
            let local = h[(start - 1, start - 1)].norm() + h[(start, start)].norm();
            if sub <= eps * local.max(eps * norm_h) {
                h[(start, start - 1)] = Complex64::ZERO;
                break;
            }
            start -= 1;
        }

        sweeps += 1;
        stall += 1;
        if sweeps > budget {
            return Err(Error::Numerical(format!(
                "QZ did not converge within {budget} sweeps on a {dim}x{dim} pencil \
                 (trailing subdiagonal {:.3e})",
                h[(end, end - 1)].norm()
            )));
        }

        let shift = if stall.is_multiple_of(10) {
            // Exceptional shift: perturb deterministically off the stalled
            // Rayleigh quotient.
            (h[(end, end)] + Complex64::new(0.737, 0.521) * h[(end, end - 1)].norm())
                / t[(end, end)]
        } else {
            wilkinson_shift(h, t, end)
        };

        // Implicit sweep: rotate the first column of (H - shift T), then
        // chase the bulge down the window.
        let v0 = h[(start, start)] - shift * t[(start, start)];
        let v1 = h[(start + 1, start)];
        if let Some(g) = Rot::from(v0, v1) {
            g.apply_left(h, start, start + 1);
            g.apply_left(t, start, start + 1);
        }
        if let Some(g) = Rot::from(t[(start + 1, start)], t[(start + 1, start + 1)]) {
            g.apply_right(h, start, start + 1);
            g.apply_right(t, start, start + 1);
        }
        t[(start + 1, start)] = Complex64::ZERO;
        for k in start..end.saturating_sub(1) {
            if let Some(g) = Rot::from(h[(k + 1, k)], h[(k + 2, k)]) {
                g.apply_left(h, k + 1, k + 2);
                g.apply_left(t, k + 1, k + 2);
            }
            h[(k + 2, k)] = Complex64::ZERO;
            if let Some(g) = Rot::from(t[(k + 2, k + 1)], t[(k + 2, k + 2)]) {
                g.apply_right(h, k + 1, k + 2);
                g.apply_right(t, k + 1, k + 2);
            }
            t[(k + 2, k + 1)] = Complex64::ZERO;
        }
    }

    Ok(pairs)
}

/// Shift from the trailing 2x2 subpencil: the generalized eigenvalue closest
/// to the bottom-right Rayleigh quotient.
fn wilkinson_shift(h: &DMatrix<Complex64>, t: &DMatrix<Complex64>, end: usize) -> Complex64 {
    let (h11, h12, h21, h22) = (
        h[(end - 1, end - 1)],
        h[(end - 1, end)],
        h[(end, end - 1)],
        h[(end, end)],
    );
    let (t11, t12, t22) = (t[(end - 1, end - 1)], t[(end - 1, end)], t[(end, end)]);
    // det(H2 - rho T2) = a rho^2 + b rho + c.
    let a = t11 * t22;
    let b = -(h11 * t22 + h22 * t11 - h21 * t12);
    let c = h11 * h22 - h12 * h21;
    let disc = (b * b - 4.0 * a * c).sqrt();
    let q = if (b + disc).norm() >= (b - disc).norm() {
        -(b + disc) / 2.0
    } else {
        -(b - disc) / 2.0
    };
    // Roots q/a and c/q; prefer the one nearest the trailing quotient,
    // judged without dividing by a possibly tiny a.
    let mut best = h22 / t22;
    let mut best_score = f64::INFINITY;
    let mut consider = |rho: Complex64| {
        if rho.re.is_finite() && rho.im.is_finite() {
            let score = (rho * t22 - h22).norm();
            if score < best_score {
                best_score = score;
                best = rho;
            }
        }
    };
    if a.norm() > 0.0 {
        consider(q / a);
    }
    if q.norm() > 0.0 {
        consider(c / q);
    }
    best
}

/// Eigenvalues via explicit characteristic polynomial interpolation and a
/// companion matrix. Only reached when the iterative path fails; N must have
/// full rank here, so the polynomial has full degree.
fn charpoly_eigenvalues(
    m_s: &DMatrix<Complex64>,
    n_s: &DMatrix<Complex64>,
) -> Result<Vec<PencilPair>> {
    let dim = m_s.nrows();
    let nodes: Vec<f64> = chebyshev_nodes(dim + 1, 2.0);
    let samples: Vec<Complex64> = nodes
        .iter()
        .map(|&x| {
            let shifted = m_s - n_s.map(|v| v * Complex64::new(x, 0.0));
            determinant(&shifted)
        })
        .collect();
    let mut coeffs = fit_polynomial(&nodes, &samples)?;
    let max_coeff = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if max_coeff == 0.0 {
        return Err(Error::Numerical(
            "singular pencil: characteristic polynomial vanished identically".into(),
        ));
    }
    while coeffs.len() > 1 && coeffs.last().unwrap().norm() <= 1e-9 * max_coeff {
        coeffs.pop();
    }
    let deg = coeffs.len() - 1;
    if deg == 0 {
        return Err(Error::Numerical(
            "characteristic polynomial is constant; pencil has no finite eigenvalues \
             despite a full-rank right-hand side"
                .into(),
        ));
    }
    let lead = coeffs[deg];
    let mut companion = DMatrix::zeros(deg, deg);
    for i in 1..deg {
        companion[(i, i - 1)] = Complex64::ONE;
    }
    for i in 0..deg {
        companion[(i, deg - 1)] = -coeffs[i] / lead;
    }
    let ident = DMatrix::identity(deg, deg);
    let mut h = companion;
    let mut t = ident;
    let mut pairs = qz_iterate(&mut h, &mut t)?;
    // Degree loss means some eigenvalues escaped to infinity numerically.
    for _ in deg..dim {
        pairs.push(PencilPair {
            alpha: Complex64::ONE,
            beta: Complex64::ZERO,
        });
    }
    Ok(pairs)
}

pub(crate) fn chebyshev_nodes(count: usize, radius: f64) -> Vec<f64> {
    (0..count)
        .map(|i| {
            let theta = std::f64::consts::PI * (2.0 * i as f64 + 1.0) / (2.0 * count as f64);
            radius * theta.cos()
        })
        .collect()
}

/// Least-change polynomial through (nodes, samples): solves the Vandermonde
/// system exactly by Gaussian elimination (the node count stays below ten).
pub(crate) fn fit_polynomial(nodes: &[f64], samples: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = nodes.len();
    let mut a = DMatrix::<Complex64>::zeros(n, n);
    for (i, &x) in nodes.iter().enumerate() {
        let mut p = 1.0;
        for j in 0..n {
            a[(i, j)] = Complex64::new(p, 0.0);
            p *= x;
        }
    }
    let mut rhs: Vec<Complex64> = samples.to_vec();
    solve_in_place(&mut a, &mut rhs)?;
    Ok(rhs)
}

/// Gaussian elimination with partial pivoting; overwrites `rhs` with the
/// solution.
fn solve_in_place(a: &mut DMatrix<Complex64>, rhs: &mut [Complex64]) -> Result<()> {
    let n = a.nrows();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| {
                a[(i, col)]
                    .norm()
                    .partial_cmp(&a[(j, col)].norm())
                    .expect("finite pivots")
            })
            .expect("nonempty pivot range");
        if a[(pivot_row, col)].norm() == 0.0 {
            return Err(Error::Numerical("singular linear system in polynomial fit".into()));
        }
        if pivot_row != col {
            a.swap_rows(pivot_row, col);
            rhs.swap(pivot_row, col);
        }
        for row in (col + 1)..n {
            let factor = a[(row, col)] / a[(col, col)];
            for k in col..n {
                let update = factor * a[(col, k)];
                a[(row, k)] -= update;
            }
            let update = factor * rhs[col];
            rhs[row] -= update;
        }
    }
    for col in (0..n).rev() {
        let mut acc = rhs[col];
        for k in (col + 1)..n {
            acc -= a[(col, k)] * rhs[k];
        }
        rhs[col] = acc / a[(col, col)];
    }
    Ok(())
}

/// Determinant by LU with partial pivoting.
pub fn determinant(m: &DMatrix<Complex64>) -> Complex64 {
    let n = m.nrows();
    let mut a = m.clone();
    let mut det = Complex64::ONE;
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| {
                a[(i, col)]
                    .norm()
                    .partial_cmp(&a[(j, col)].norm())
                    .expect("finite pivots")
            })
            .expect("nonempty pivot range");
        if a[(pivot_row, col)].norm() == 0.0 {
            return Complex64::ZERO;
        }
        if pivot_row != col {
            a.swap_rows(pivot_row, col);
            det = -det;
        }
        det *= a[(col, col)];
        for row in (col + 1)..n {
            let factor = a[(row, col)] / a[(col, col)];
            for k in (col + 1)..n {
                let update = factor * a[(col, k)];
                a[(row, k)] -= update;
            }
        }
    }
    det
}

/// Smallest singular value, computed from the Hermitian eigenvalues of M^H M
/// by cyclic Jacobi iteration. Squaring floors the result near
/// sqrt(machine epsilon) times the largest singular value, which is accurate
/// enough for residual checks against thresholds of 1e-7 and coarser.
pub fn smallest_singular_value(m: &DMatrix<Complex64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let gram = m.adjoint() * m;
    let eigs = hermitian_eigenvalues(&gram);
    eigs.into_iter().fold(f64::INFINITY, f64::min).max(0.0).sqrt()
}

/// Eigenvalues of a Hermitian matrix by cyclic Jacobi rotations.
pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    let scale = a.norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..40 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let b = a[(p, q)];
                if b.norm() <= 1e-18 * scale {
                    continue;
                }
                let phase = b / b.norm();
                let tau = (a[(q, q)].re - a[(p, p)].re) / (2.0 * b.norm());
                let tan = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let cos = 1.0 / (1.0 + tan * tan).sqrt();
                let sin = tan * cos;
                // Unitary J with J[p][q] = sin * phase, diagonal cos; the
                // update A <- J^H A J annihilates the (p, q) entry.
                let n_dim = n;
                for k in 0..n_dim {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * cos - akq * sin * phase.conj();
                    a[(k, q)] = akp * sin * phase + akq * cos;
                }
                for k in 0..n_dim {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * cos - aqk * sin * phase;
                    a[(q, k)] = apk * sin * phase.conj() + aqk * cos;
                }
            }
        }
    }
    (0..n).map(|i| a[(i, i)].re).collect()
}

/// Complex Givens rotation built from a target pair (a, b). Applying it on
/// the left to rows (i1, i2) maps the pair stored at (a, b) positions to
/// (d, 0); applying it on the right to columns (c1, c2) maps a row holding
/// (a, b) to (0, d).
#[derive(Clone, Copy)]
struct Rot {
    a: Complex64,
    b: Complex64,
    d: f64,
}

impl Rot {
    fn from(a: Complex64, b: Complex64) -> Option<Self> {
        let d = (a.norm_sqr() + b.norm_sqr()).sqrt();
        if d <= f64::MIN_POSITIVE {
            None
        } else {
            Some(Self { a, b, d })
        }
    }

    fn apply_left(&self, x: &mut DMatrix<Complex64>, i1: usize, i2: usize) {
        for j in 0..x.ncols() {
            let p = x[(i1, j)];
            let q = x[(i2, j)];
            x[(i1, j)] = (self.a.conj() * p + self.b.conj() * q) / self.d;
            x[(i2, j)] = (self.b * p - self.a * q) / self.d;
        }
    }

    fn apply_right(&self, x: &mut DMatrix<Complex64>, c1: usize, c2: usize) {
        for i in 0..x.nrows() {
            let p = x[(i, c1)];
            let q = x[(i, c2)];
            x[(i, c1)] = (self.b * p - self.a * q) / self.d;
            x[(i, c2)] = (self.a.conj() * p + self.b.conj() * q) / self.d;
        }
    }
}

struct Qr {
    q: DMatrix<Complex64>,
    r: DMatrix<Complex64>,
    #[allow(dead_code)]
    perm: Vec<usize>,
}

impl Qr {
    /// Numerical rank from the pivoted R diagonal.
    fn rank(&self, rel_tol: f64) -> usize {
        let lead = self.r[(0, 0)].norm();
        if lead == 0.0 {
            return 0;
        }
        let k = self.r.nrows().min(self.r.ncols());
        (0..k)
            .take_while(|&i| self.r[(i, i)].norm() > rel_tol * lead)
            .count()
    }
}

/// Householder QR with optional column pivoting; Q is accumulated densely.
fn qr_decompose(a: &DMatrix<Complex64>, pivot: bool) -> Qr {
    let rows = a.nrows();
    let cols = a.ncols();
    let mut r = a.clone();
    let mut q = DMatrix::<Complex64>::identity(rows, rows);
    let mut perm: Vec<usize> = (0..cols).collect();
    let steps = rows.min(cols);
    for col in 0..steps {
        if pivot {
            let best = (col..cols)
                .max_by(|&i, &j| {
                    let ni: f64 = (col..rows).map(|r_i| r[(r_i, i)].norm_sqr()).sum();
                    let nj: f64 = (col..rows).map(|r_i| r[(r_i, j)].norm_sqr()).sum();
                    ni.partial_cmp(&nj).expect("finite column norms")
                })
                .expect("nonempty column range");
            if best != col {
                r.swap_columns(best, col);
                perm.swap(best, col);
            }
        }
        let sigma: f64 = (col..rows)
            .map(|i| r[(i, col)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if sigma <= f64::MIN_POSITIVE {
            continue;
        }
        let alpha = r[(col, col)];
        let phi = if alpha.norm() > 0.0 {
            alpha / alpha.norm()
        } else {
            Complex64::ONE
        };
        let mut v: Vec<Complex64> = (col..rows).map(|i| r[(i, col)]).collect();
        v[0] += phi * sigma;
        let vnorm_sq: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if vnorm_sq <= f64::MIN_POSITIVE {
            continue;
        }
        let beta = 2.0 / vnorm_sq;
        // R <- H R restricted to the trailing block.
        for j in col..cols {
            let dot: Complex64 = v
                .iter()
                .enumerate()
                .map(|(k, &vk)| vk.conj() * r[(col + k, j)])
                .sum();
            let f = beta * dot;
            for (k, &vk) in v.iter().enumerate() {
                let update = f * vk;
                r[(col + k, j)] -= update;
            }
        }
        // Q <- Q H.
        for i in 0..rows {
            let dot: Complex64 = v
                .iter()
                .enumerate()
                .map(|(k, &vk)| q[(i, col + k)] * vk)
                .sum();
            let f = beta * dot;
            for (k, &vk) in v.iter().enumerate() {
                let update = f * vk.conj();
                q[(i, col + k)] -= update;
            }
        }
        for i in (col + 1)..rows {
            r[(i, col)] = Complex64::ZERO;
        }
    }
    Qr { q, r, perm }
}

/// Crude rank estimate via unpivoted column norms after QR; used only for the
/// degenerate N = 0 check.
fn rank_of(m: &DMatrix<Complex64>, scale: f64) -> usize {
    if scale == 0.0 {
        return 0;
    }
    let qr = qr_decompose(m, true);
    qr.rank(RANK_TOL)
}
