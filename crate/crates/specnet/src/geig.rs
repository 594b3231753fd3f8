//! Per-eigenvalue pencil solves and characteristic-polynomial diagnostics.
//!
//! Every estimated Jacobian eigenvalue mu spawns the generalized eigenvalue
//! problem (A - mu I) w = lambda (BC^T) w; the finite solutions across all mu
//! values form the candidate multiset that the identification stage filters.
//! The bivariate characteristic polynomial chi(lambda, mu) =
//! det(A - lambda BC^T - mu I) explains the candidate structure: its cross
//! terms decide whether spurious solutions scatter (and are filtered by
//! multiplicity counting) or collapse into repeated decoy clusters.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qz;

/// Default relative tolerance for the pencil residual check.
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-7;
/// Interpolated polynomial coefficients below this fraction of the largest
/// are snapped to exact zero.
pub const COEFF_DROP_TOL: f64 = 1e-9;
/// Singular values below this fraction of the largest do not count toward
/// the feedthrough rank.
const RANK_TOL: f64 = 1e-10;

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

fn feedthrough_rank(bct: &DMatrix<f64>) -> usize {
    let svd = bct.clone().svd(false, false);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    if sigma_max <= 0.0 {
        return 0;
    }
    svd.singular_values
        .iter()
        .filter(|&&s| s > RANK_TOL * sigma_max)
        .count()
}

/// One finite pencil solution with its verification record. `within_tol`
/// is false when the determinant residual exceeded the requested tolerance;
/// such entries are kept (flagged, not silently dropped).
#[derive(Debug, Clone, Copy)]
pub struct PencilEigenvalue {
    pub value: Complex64,
    /// Smallest singular value of A - lambda BC^T - mu I, relative to its norm.
    pub residual: f64,
    pub within_tol: bool,
}

/// Finite solutions of (A - mu I) w = lambda BC^T w for one source value mu.
#[derive(Debug, Clone)]
pub struct PencilSolution {
    pub mu: Complex64,
    pub lambdas: Vec<PencilEigenvalue>,
    /// Count of infinite pencil eigenvalues (rank-deficient feedthrough).
    pub n_infinite: usize,
}

impl PencilSolution {
    pub fn values(&self) -> Vec<Complex64> {
        self.lambdas.iter().map(|l| l.value).collect()
    }

    pub fn flagged_count(&self) -> usize {
        self.lambdas.iter().filter(|l| !l.within_tol).count()
    }
}

/// Solves the pencil (A - mu I, BC^T) by the QZ factorization. Finite
/// eigenvalues are returned sorted by real then imaginary part, each with a
/// residual check at relative tolerance `tol`; infinite ones are counted.
pub fn solve_pencil(
    a: &DMatrix<f64>,
    bct: &DMatrix<f64>,
    mu: Complex64,
    tol: f64,
) -> Result<PencilSolution> {
    let m = a.nrows();
    if a.ncols() != m || bct.nrows() != m || bct.ncols() != m {
        return Err(Error::InvalidArgument(format!(
            "pencil wants square matrices of equal size, got {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            bct.nrows(),
            bct.ncols()
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "residual tolerance must be positive, got {tol}"
        )));
    }
    let n_c = to_complex(bct);
    let mut m_c = to_complex(a);
    for i in 0..m {
        m_c[(i, i)] -= mu;
    }
    let pairs = qz::generalized_eigenvalues(&m_c, &n_c)?;
    let floor = qz::beta_floor(bct.norm());

    let mut lambdas = Vec::new();
    let mut n_infinite = 0usize;
    for pair in &pairs {
        match pair.finite_value(floor) {
            None => n_infinite += 1,
            Some(lambda) => {
                let mut res_mat = to_complex(a);
                for i in 0..m {
                    for j in 0..m {
                        res_mat[(i, j)] -= lambda * n_c[(i, j)];
                    }
                    res_mat[(i, i)] -= mu;
                }
                let scale = res_mat.norm().max(f64::MIN_POSITIVE);
                let residual = qz::smallest_singular_value(&res_mat) / scale;
                let within_tol = residual <= tol;
                if !within_tol {
                    log::warn!(
                        "pencil solution {lambda} for source {mu} has residual {residual:.3e} above {tol:.1e}"
                    );
                }
                lambdas.push(PencilEigenvalue {
                    value: lambda,
                    residual,
                    within_tol,
                });
            }
        }
    }
    lambdas.sort_by(|x, y| {
        (x.value.re, x.value.im)
            .partial_cmp(&(y.value.re, y.value.im))
            .expect("finite eigenvalues")
    });
    Ok(PencilSolution {
        mu,
        lambdas,
        n_infinite,
    })
}

/// One candidate eigenvalue together with the source value it came from.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct CandidateEntry {
    pub lambda: Complex64,
    pub source_mu: Complex64,
    pub residual: f64,
    pub within_tol: bool,
}

/// A pencil solve that failed and was skipped.
#[derive(Debug, Clone)]
pub struct SkippedSource {
    pub mu: Complex64,
    pub reason: String,
}

/// The candidate multiset: all finite pencil solutions over all source
/// values, each tagged with its origin.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub entries: Vec<CandidateEntry>,
    /// Unit block size.
    pub m: usize,
    /// Feedthrough rank; at most this many finite solutions per source.
    pub m_bar: usize,
    pub skipped: Vec<SkippedSource>,
    pub n_infinite_total: usize,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lambdas(&self) -> Vec<Complex64> {
        self.entries.iter().map(|e| e.lambda).collect()
    }

    /// Serializes as `lambda_re,lambda_im,mu_re,mu_im` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda_re,lambda_im,mu_re,mu_im\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.lambda.re, e.lambda.im, e.source_mu.re, e.source_mu.im
            ));
        }
        out
    }

    /// Rebuilds a candidate set from its CSV form. Residual records are not
    /// part of the CSV; restored entries are marked as having passed.
    pub fn from_csv(text: &str, m: usize, m_bar: usize) -> Result<CandidateSet> {
        let mut entries = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with("lambda_re") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::InvalidArgument(format!(
                    "candidate row {} has {} fields, expected 4",
                    idx + 1,
                    fields.len()
                )));
            }
            let mut vals = [0.0_f64; 4];
            for (slot, field) in vals.iter_mut().zip(&fields) {
                *slot = field.trim().parse().map_err(|_| {
                    Error::InvalidArgument(format!("bad number {:?} in candidate row {}", field, idx + 1))
                })?;
            }
            entries.push(CandidateEntry {
                lambda: Complex64::new(vals[0], vals[1]),
                source_mu: Complex64::new(vals[2], vals[3]),
                residual: 0.0,
                within_tol: true,
            });
        }
        Ok(CandidateSet {
            entries,
            m,
            m_bar,
            skipped: Vec::new(),
            n_infinite_total: 0,
        })
    }
}

/// Solves the pencil for every source value and pools the finite solutions.
/// A failing solve is recorded and skipped; the remaining sources still
/// contribute.
pub fn build_candidate_set(
    a: &DMatrix<f64>,
    bct: &DMatrix<f64>,
    mus: &[Complex64],
    tol: f64,
) -> Result<CandidateSet> {
    if mus.is_empty() {
        return Err(Error::InvalidArgument("no source eigenvalues given".into()));
    }
    let m = a.nrows();
    let m_bar = feedthrough_rank(bct);
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    let mut n_infinite_total = 0usize;
    for &mu in mus {
        match solve_pencil(a, bct, mu, tol) {
            Ok(sol) => {
                n_infinite_total += sol.n_infinite;
                for l in &sol.lambdas {
                    entries.push(CandidateEntry {
                        lambda: l.value,
                        source_mu: mu,
                        residual: l.residual,
                        within_tol: l.within_tol,
                    });
                }
            }
            Err(err) => {
                log::warn!("pencil solve for source {mu} skipped: {err}");
                skipped.push(SkippedSource {
                    mu,
                    reason: err.to_string(),
                });
            }
        }
    }
    Ok(CandidateSet {
        entries,
        m,
        m_bar,
        skipped,
        n_infinite_total,
    })
}

/// chi(lambda, mu) = det(A - lambda BC^T - mu I), stored as the coefficient
/// grid coeffs[s][t] of lambda^s mu^t with s up to the feedthrough rank and
/// t up to the block size.
#[derive(Debug, Clone)]
pub struct BivariatePoly {
    pub coeffs: Vec<Vec<Complex64>>,
    pub m: usize,
    pub m_bar: usize,
}

impl BivariatePoly {
    pub fn eval(&self, lambda: Complex64, mu: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut lp = Complex64::new(1.0, 0.0);
        for row in &self.coeffs {
            let mut mp = Complex64::new(1.0, 0.0);
            for &c in row {
                acc += c * lp * mp;
                mp *= mu;
            }
            lp *= lambda;
        }
        acc
    }

    /// Coefficient of the pure lambda^p term, p >= 1.
    pub fn alpha(&self, p: usize) -> Complex64 {
        self.coeffs[p][0]
    }

    /// Coefficient of the pure mu^q term, negated: chi carries the mu
    /// polynomial with a minus sign, so beta(m) = (-1)^{m+1} ... beta(0)
    /// = -det(A) for the scalar-free slot.
    pub fn beta(&self, q: usize) -> Complex64 {
        -self.coeffs[0][q]
    }

    /// Mixed coefficient of lambda^s mu^t, s >= 1 and t >= 1.
    pub fn gamma(&self, s: usize, t: usize) -> Complex64 {
        self.coeffs[s][t]
    }
}

/// Recovers the coefficients of chi by evaluating the determinant on a
/// Chebyshev tensor grid and solving the two nested interpolation problems.
/// Degree in lambda is bounded by the feedthrough rank, total degree by the
/// block size; the block size is capped at 6 (diagnostic use only).
pub fn char_poly(a: &DMatrix<f64>, bct: &DMatrix<f64>) -> Result<BivariatePoly> {
    let m = a.nrows();
    if a.ncols() != m || bct.nrows() != m || bct.ncols() != m {
        return Err(Error::InvalidArgument(
            "characteristic polynomial wants square matrices of equal size".into(),
        ));
    }
    if m == 0 || m > 6 {
        return Err(Error::InvalidArgument(format!(
            "block size {m} outside the supported range 1..=6"
        )));
    }
    let m_bar = feedthrough_rank(bct);
    let radius = 1.0 + a.norm() + bct.norm();
    let lam_nodes = qz::chebyshev_nodes(m_bar + 1, radius);
    let mu_nodes = qz::chebyshev_nodes(m + 1, radius);

    let a_c = to_complex(a);
    let bct_c = to_complex(bct);
    // dets[i][j] = chi(lam_nodes[i], mu_nodes[j])
    let mut dets = vec![vec![Complex64::new(0.0, 0.0); m + 1]; m_bar + 1];
    for (i, &lam) in lam_nodes.iter().enumerate() {
        for (j, &mu) in mu_nodes.iter().enumerate() {
            let mut mat = a_c.clone();
            for r in 0..m {
                for c in 0..m {
                    mat[(r, c)] -= Complex64::new(lam, 0.0) * bct_c[(r, c)];
                }
                mat[(r, r)] -= Complex64::new(mu, 0.0);
            }
            dets[i][j] = qz::determinant(&mat);
        }
    }

    // First interpolate in lambda for each mu node, then in mu per degree.
    let mut lam_fits = vec![vec![Complex64::new(0.0, 0.0); m + 1]; m_bar + 1];
    for j in 0..=m {
        let column: Vec<Complex64> = (0..=m_bar).map(|i| dets[i][j]).collect();
        let fit = qz::fit_polynomial(&lam_nodes, &column)?;
        for (s, &c) in fit.iter().enumerate() {
            lam_fits[s][j] = c;
        }
    }
    let mut coeffs = vec![vec![Complex64::new(0.0, 0.0); m + 1]; m_bar + 1];
    for s in 0..=m_bar {
        let fit = qz::fit_polynomial(&mu_nodes, &lam_fits[s])?;
        for (t, &c) in fit.iter().enumerate() {
            if s + t <= m {
                coeffs[s][t] = c;
            }
        }
    }

    let max_abs = coeffs
        .iter()
        .flatten()
        .map(|c| c.norm())
        .fold(0.0_f64, f64::max);
    for row in coeffs.iter_mut() {
        for c in row.iter_mut() {
            if c.norm() <= COEFF_DROP_TOL * max_abs {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }

    let poly = BivariatePoly { coeffs, m, m_bar };
    let mut worst = 0.0_f64;
    for (i, &lam) in lam_nodes.iter().enumerate() {
        for (j, &mu) in mu_nodes.iter().enumerate() {
            let got = poly.eval(Complex64::new(lam, 0.0), Complex64::new(mu, 0.0));
            let rel = (got - dets[i][j]).norm() / (1.0 + dets[i][j].norm());
            worst = worst.max(rel);
        }
    }
    if worst > 1e-8 {
        return Err(Error::Numerical(format!(
            "characteristic-polynomial interpolation mismatches the determinant by {worst:.3e}"
        )));
    }
    Ok(poly)
}

/// Presence of mixed lambda-mu terms, and the coefficient of
/// lambda * mu^{m-1} whose value equals (-1)^m tr(BC^T).
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct CrossTermReport {
    pub has_cross_terms: bool,
    pub cross_coeff: Complex64,
}

/// Scans the coefficient grid for mixed terms. Without them the solution
/// sets from different sources share a rigid structure (constant root sum
/// per source) that defeats multiplicity filtering.
pub fn cross_term_diagnostic(poly: &BivariatePoly) -> CrossTermReport {
    let mut has_cross_terms = false;
    for (s, row) in poly.coeffs.iter().enumerate() {
        for (t, &c) in row.iter().enumerate() {
            if s >= 1 && t >= 1 && c.norm() > 0.0 {
                has_cross_terms = true;
            }
        }
    }
    let cross_coeff = if poly.m_bar >= 1 && poly.m >= 1 {
        poly.coeffs[1][poly.m - 1]
    } else {
        Complex64::new(0.0, 0.0)
    };
    CrossTermReport {
        has_cross_terms,
        cross_coeff,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, m: usize, scale: f64) -> DMatrix<f64> {
        DMatrix::from_fn(m, m, |_, _| rng.random_range(-scale..scale))
    }

    fn spectrum(a: &DMatrix<f64>) -> Vec<Complex64> {
        nalgebra::Schur::try_new(a.clone(), f64::EPSILON, 0)
            .unwrap()
            .complex_eigenvalues()
            .iter()
            .copied()
            .collect()
    }

    #[test]
    fn identity_feedthrough_shifts_the_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_matrix(&mut rng, 3, 1.0);
        let mu = Complex64::new(0.3, 0.2);
        let sol = solve_pencil(&a, &DMatrix::identity(3, 3), mu, DEFAULT_RESIDUAL_TOL).unwrap();
        assert_eq!(sol.n_infinite, 0);
        assert_eq!(sol.lambdas.len(), 3);
        assert_eq!(sol.flagged_count(), 0);
        for nu in spectrum(&a) {
            let want = nu - mu;
            let hit = sol.values().iter().any(|l| (l - want).norm() < 1e-8);
            assert!(hit, "missing {want}");
        }
    }

    #[test]
    fn zero_feedthrough_gives_only_infinite_solutions() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_matrix(&mut rng, 3, 1.0);
        let sol = solve_pencil(
            &a,
            &DMatrix::zeros(3, 3),
            Complex64::new(10.37, 0.0),
            DEFAULT_RESIDUAL_TOL,
        )
        .unwrap();
        assert!(sol.lambdas.is_empty());
        assert_eq!(sol.n_infinite, 3);
    }

    #[test]
    fn preset_pair_round_trip() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, -2.0, 1.0, -1.0]);
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let lambda0 = 0.7;
        let shifted = &a - &g * lambda0;
        for mu in spectrum(&shifted) {
            let sol = solve_pencil(&a, &g, mu, DEFAULT_RESIDUAL_TOL).unwrap();
            let hit = sol
                .values()
                .iter()
                .any(|l| (l - Complex64::new(lambda0, 0.0)).norm() < 1e-9);
            assert!(hit, "lambda0 not recovered from {mu}: {:?}", sol.values());
        }
    }

    #[test]
    fn random_round_trips_recover_the_seed_eigenvalue() {
        for m in 2..=4usize {
            let mut rng = ChaCha8Rng::seed_from_u64(40 + m as u64);
            let a = random_matrix(&mut rng, m, 1.0);
            let g = DMatrix::identity(m, m) + random_matrix(&mut rng, m, 0.3);
            let lambda0 = Complex64::new(0.4, -0.6);
            let mut shifted = to_complex(&a);
            let g_c = to_complex(&g);
            for i in 0..m {
                for j in 0..m {
                    shifted[(i, j)] -= lambda0 * g_c[(i, j)];
                }
            }
            let mus = qz::generalized_eigenvalues(&shifted, &to_complex(&DMatrix::identity(m, m)))
                .unwrap();
            for pair in mus {
                let mu = pair.finite_value(1e-12).unwrap();
                let sol = solve_pencil(&a, &g, mu, DEFAULT_RESIDUAL_TOL).unwrap();
                assert_eq!(sol.lambdas.len() + sol.n_infinite, m);
                assert!(sol.lambdas.len() <= m);
                let hit = sol.values().iter().any(|l| (l - lambda0).norm() < 1e-8);
                assert!(hit, "m={m}: seed eigenvalue missing from {:?}", sol.values());
                for l in &sol.lambdas {
                    assert!(l.within_tol, "residual {:.3e} flagged", l.residual);
                }
            }
        }
    }

    #[test]
    fn candidate_set_contains_the_graph_spectrum_with_multiplicity() {
        use crate::dynamics;
        use crate::graph;
        let g = graph::erdos_renyi_weighted(5, 0.7, 2024).unwrap();
        let lap = g.laplacian();
        let exact = graph::exact_spectrum(&lap).unwrap();
        let lin = dynamics::linearize(&dynamics::UnitModel::linear_preset()).unwrap();
        let a = lin.a.clone();
        let j = dynamics::build_jacobian(&lin, &lap);
        let mus = dynamics::jacobian_spectrum(&j).unwrap();
        let set = build_candidate_set(&a, &lin.feedthrough(), &mus, DEFAULT_RESIDUAL_TOL).unwrap();
        assert_eq!(set.m_bar, 2);
        assert_eq!(set.len(), 5 * 2 * 2);
        assert!(set.skipped.is_empty());
        for &ev in exact.values() {
            let count = set
                .lambdas()
                .iter()
                .filter(|l| (*l - Complex64::new(ev, 0.0)).norm() < 1e-8)
                .count();
            assert!(count >= 2, "eigenvalue {ev} appears {count} times");
        }
    }

    #[test]
    fn failed_solves_are_recorded_and_skipped() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 1.0]);
        let g = DMatrix::zeros(2, 2);
        let mus = [Complex64::new(0.5, 0.0), Complex64::new(10.0, 0.0)];
        let set = build_candidate_set(&a, &g, &mus, DEFAULT_RESIDUAL_TOL).unwrap();
        assert_eq!(set.skipped.len(), 1);
        assert!(set.is_empty());
        assert_eq!(set.n_infinite_total, 2);
        assert_eq!(set.m_bar, 0);
    }

    #[test]
    fn candidate_csv_round_trip() {
        let entries = vec![
            CandidateEntry {
                lambda: Complex64::new(1.5, -0.25),
                source_mu: Complex64::new(-2.0, 0.125),
                residual: 1e-12,
                within_tol: true,
            },
            CandidateEntry {
                lambda: Complex64::new(0.0, 0.0),
                source_mu: Complex64::new(-1.0, 0.0),
                residual: 1e-12,
                within_tol: true,
            },
        ];
        let set = CandidateSet {
            entries,
            m: 2,
            m_bar: 2,
            skipped: Vec::new(),
            n_infinite_total: 0,
        };
        let text = set.to_csv();
        let back = CandidateSet::from_csv(&text, 2, 2).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.entries[0].lambda, Complex64::new(1.5, -0.25));
        assert_eq!(back.entries[1].source_mu, Complex64::new(-1.0, 0.0));
    }

    #[test]
    fn scalar_char_poly_signs() {
        let a = DMatrix::from_row_slice(1, 1, &[2.5]);
        let g = DMatrix::from_row_slice(1, 1, &[0.7]);
        let poly = char_poly(&a, &g).unwrap();
        // chi = 2.5 - 0.7 lambda - mu
        assert!((poly.coeffs[0][0] - Complex64::new(2.5, 0.0)).norm() < 1e-10);
        assert!((poly.alpha(1) - Complex64::new(-0.7, 0.0)).norm() < 1e-10);
        assert!((poly.beta(0) - Complex64::new(-2.5, 0.0)).norm() < 1e-10);
        assert!((poly.beta(1) - Complex64::new(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn monic_in_mu_up_to_sign() {
        for m in 1..=3usize {
            let mut rng = ChaCha8Rng::seed_from_u64(60 + m as u64);
            let a = random_matrix(&mut rng, m, 1.0);
            let g = DMatrix::identity(m, m) + random_matrix(&mut rng, m, 0.2);
            let poly = char_poly(&a, &g).unwrap();
            let want = Complex64::new(if m % 2 == 0 { 1.0 } else { -1.0 }, 0.0);
            assert!((poly.coeffs[0][m] - want).norm() < 1e-9);
        }
    }

    #[test]
    fn mixed_coefficient_equals_signed_feedthrough_trace() {
        for m in 1..=3usize {
            for seed in 0..20u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(100 * m as u64 + seed);
                let a = random_matrix(&mut rng, m, 1.0);
                let g = DMatrix::identity(m, m) + random_matrix(&mut rng, m, 0.4);
                let poly = char_poly(&a, &g).unwrap();
                let report = cross_term_diagnostic(&poly);
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                let want = Complex64::new(sign * g.trace(), 0.0);
                let tol = 1e-9 * g.norm().max(1.0);
                assert!(
                    (report.cross_coeff - want).norm() < tol,
                    "m={m} seed={seed}: {} vs {want}",
                    report.cross_coeff
                );
            }
        }
    }

    #[test]
    fn coefficients_reproduce_the_determinant_at_fresh_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let a = random_matrix(&mut rng, 3, 1.0);
        let g = DMatrix::identity(3, 3) + random_matrix(&mut rng, 3, 0.4);
        let poly = char_poly(&a, &g).unwrap();
        let radius = 2.0 * (1.0 + a.norm() + g.norm());
        for _ in 0..20 {
            let lam = Complex64::new(
                rng.random_range(-radius..radius),
                rng.random_range(-radius..radius),
            );
            let mu = Complex64::new(
                rng.random_range(-radius..radius),
                rng.random_range(-radius..radius),
            );
            let mut mat = to_complex(&a);
            for r in 0..3 {
                for c in 0..3 {
                    mat[(r, c)] -= lam * Complex64::new(g[(r, c)], 0.0);
                }
                mat[(r, r)] -= mu;
            }
            let det = qz::determinant(&mat);
            let got = poly.eval(lam, mu);
            assert!(
                (got - det).norm() <= 1e-8 * (1.0 + det.norm()),
                "mismatch at ({lam}, {mu}): {got} vs {det}"
            );
        }
    }

    #[test]
    fn identity_feedthrough_has_cross_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_matrix(&mut rng, 2, 1.0);
        let poly = char_poly(&a, &DMatrix::identity(2, 2)).unwrap();
        assert!(cross_term_diagnostic(&poly).has_cross_terms);
    }

    #[test]
    fn scalar_blocks_have_no_mixed_slots() {
        let a = DMatrix::from_row_slice(1, 1, &[1.3]);
        let g = DMatrix::from_row_slice(1, 1, &[0.9]);
        let poly = char_poly(&a, &g).unwrap();
        assert!(!cross_term_diagnostic(&poly).has_cross_terms);
    }

    #[test]
    fn traceless_feedthrough_collapses_spurious_solutions() {
        // With a balanced diagonal feedthrough the root sum per source is
        // constant, so both sources spawned by one seed eigenvalue return
        // the same two-element solution set.
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.2, 2.0]);
        let g = DMatrix::from_row_slice(2, 2, &[0.8, 0.0, 0.0, -0.8]);
        let poly = char_poly(&a, &g).unwrap();
        assert!(!cross_term_diagnostic(&poly).has_cross_terms);

        let lambda0 = 0.9;
        let shifted = &a - &g * lambda0;
        let mus = spectrum(&shifted);
        let sols: Vec<Vec<Complex64>> = mus
            .iter()
            .map(|&mu| solve_pencil(&a, &g, mu, DEFAULT_RESIDUAL_TOL).unwrap().values())
            .collect();
        assert_eq!(sols[0].len(), 2);
        assert_eq!(sols[1].len(), 2);
        for (x, y) in sols[0].iter().zip(&sols[1]) {
            assert!((x - y).norm() < 1e-8, "sets differ: {sols:?}");
        }
    }

    #[test]
    fn generic_feedthrough_separates_spurious_solutions() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.2, 2.0]);
        let g = DMatrix::from_row_slice(2, 2, &[0.8, 0.0, 0.0, 0.5]);
        let poly = char_poly(&a, &g).unwrap();
        assert!(cross_term_diagnostic(&poly).has_cross_terms);

        let lambda0 = Complex64::new(0.9, 0.0);
        let shifted = &a - &g * 0.9;
        let mus = spectrum(&shifted);
        let spurious: Vec<Complex64> = mus
            .iter()
            .map(|&mu| {
                let vals = solve_pencil(&a, &g, mu, DEFAULT_RESIDUAL_TOL).unwrap().values();
                vals.into_iter()
                    .max_by(|x, y| {
                        (x - lambda0)
                            .norm()
                            .partial_cmp(&(y - lambda0).norm())
                            .unwrap()
                    })
                    .unwrap()
            })
            .collect();
        assert!(
            (spurious[0] - spurious[1]).norm() > 1e-6,
            "spurious solutions coincide: {spurious:?}"
        );
    }
}
