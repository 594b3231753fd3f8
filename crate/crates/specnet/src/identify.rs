//! Recovering the Laplacian spectrum from the candidate multiset.
//!
//! The core filter counts multiplicities: a true graph eigenvalue appears
//! once per source value spawned by it (m times), spurious pencil solutions
//! scatter. For nonlinear data too few candidates repeat, so hull-based
//! extensions re-admit candidates near the region spanned by the values the
//! filter did find, and for large networks only the spectral moments are
//! estimated, from the hull's geometry. A separate path recovers moments
//! exactly from the full Jacobian spectrum through a triangular recursion.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::LinearizedSystem;
use crate::error::{Error, Result};
use crate::geig::{CandidateEntry, CandidateSet};
use crate::graph::RealSpectrum;
use crate::hull::{mirror_conjugates, HullRegion};
use crate::qz;

/// Spectral moments of the feedthrough below this magnitude count as
/// vanishing (identification infeasible at that order).
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Identified values with imaginary part beyond this (times the value
/// scale) are not treated as real.
pub const REAL_AXIS_IMAG_TOL: f64 = 1e-10;
/// Matrix-power moments switch to eigenvalue powers beyond this order.
const MOMENT_POWER_LIMIT: usize = 30;
/// Roundoff slack on the lower real-axis bound, so a true zero eigenvalue
/// computed as a tiny negative number is not lost.
const ZERO_EDGE_SLACK: f64 = 1e-12;

/// Feedthrough spectral-moment screening: identification needs every
/// M_k(BC^T) nonzero up to the largest order used.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub trace_nonzero: bool,
    /// M_k(BC^T) for k = 1..=k_max.
    pub moments_bc: Vec<f64>,
    pub first_vanishing_k: Option<usize>,
    pub m_bar_equals_m: bool,
}

pub fn feasibility_check(sys: &LinearizedSystem, k_max: usize, threshold: f64) -> FeasibilityReport {
    let bc = sys.feedthrough();
    let m = sys.dim();
    let mut moments_bc = Vec::with_capacity(k_max);
    if k_max <= MOMENT_POWER_LIMIT {
        let mut power = DMatrix::<f64>::identity(m, m);
        for _ in 1..=k_max {
            power = &power * &bc;
            moments_bc.push(power.trace() / m as f64);
        }
    } else {
        let eigs = nalgebra::Schur::try_new(bc.clone(), f64::EPSILON, 0)
            .map(|s| s.complex_eigenvalues())
            .expect("feedthrough eigensolve");
        let mut powers: Vec<Complex64> = eigs.iter().copied().collect();
        for _ in 1..=k_max {
            let sum: Complex64 = powers.iter().sum();
            moments_bc.push(sum.re / m as f64);
            for (p, &e) in powers.iter_mut().zip(eigs.iter()) {
                *p *= e;
            }
        }
    }
    let first_vanishing_k = moments_bc
        .iter()
        .position(|mk| mk.abs() <= threshold)
        .map(|idx| idx + 1);
    FeasibilityReport {
        trace_nonzero: (moments_bc.first().copied().unwrap_or(0.0) * m as f64).abs() > threshold,
        moments_bc,
        first_vanishing_k,
        m_bar_equals_m: sys.feedthrough_rank() == m,
    }
}

/// A group of mutually close candidates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cluster {
    pub center: Complex64,
    pub members: Vec<CandidateEntry>,
    pub size: usize,
}

/// Single-linkage clustering of the candidate set at tolerance epsilon,
/// with the accepted clusters (size an exact multiple of the block size)
/// marked by index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterReport {
    pub clusters: Vec<Cluster>,
    pub epsilon: f64,
    pub accepted: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct MultiplicityOutcome {
    pub report: ClusterReport,
    /// Accepted cluster centers, one copy per block-size multiple, sorted
    /// by real then imaginary part.
    pub identified: Vec<Complex64>,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, i: usize) -> usize {
        let mut root = i;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut walk = i;
        while self.parent[walk] != root {
            let next = self.parent[walk];
            self.parent[walk] = root;
            walk = next;
        }
        root
    }

    fn union(&mut self, i: usize, j: usize) {
        let (ri, rj) = (self.find(i), self.find(j));
        if ri != rj {
            // Deterministic: smaller index wins.
            let (lo, hi) = if ri < rj { (ri, rj) } else { (rj, ri) };
            self.parent[hi] = lo;
        }
    }
}

/// Multiplicity filtering: candidates within epsilon are chained into
/// clusters; a cluster whose size is q times the block size yields q copies
/// of its mean. Everything else is rejected (an empty acceptance is a valid
/// outcome).
pub fn multiplicity_filter(set: &CandidateSet, epsilon: f64) -> Result<MultiplicityOutcome> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "clustering tolerance must be positive, got {epsilon}"
        )));
    }
    if set.is_empty() {
        return Err(Error::Precondition("empty candidate set".into()));
    }
    let lambdas = set.lambdas();
    let n = lambdas.len();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if (lambdas[i] - lambdas[j]).norm() <= epsilon {
                uf.union(i, j);
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = std::collections::BTreeMap::new();
    for i in 0..n {
        let root = uf.find(i);
        groups.entry(root).or_default().push(i);
    }
    let mut clusters: Vec<Cluster> = groups
        .into_values()
        .map(|members| {
            let sum: Complex64 = members.iter().map(|&i| lambdas[i]).sum();
            let center = sum / members.len() as f64;
            Cluster {
                center,
                size: members.len(),
                members: members.into_iter().map(|i| set.entries[i]).collect(),
            }
        })
        .collect();
    clusters.sort_by(|a, b| {
        (a.center.re, a.center.im)
            .partial_cmp(&(b.center.re, b.center.im))
            .expect("finite centers")
    });

    let m = set.m.max(1);
    let mut accepted = Vec::new();
    let mut identified = Vec::new();
    for (idx, cluster) in clusters.iter().enumerate() {
        if cluster.size >= m && cluster.size % m == 0 {
            accepted.push(idx);
            for _ in 0..cluster.size / m {
                identified.push(cluster.center);
            }
        }
    }
    identified.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).expect("finite values"));
    Ok(MultiplicityOutcome {
        report: ClusterReport {
            clusters,
            epsilon,
            accepted,
        },
        identified,
    })
}

#[derive(Debug, Clone)]
pub struct HullExtendOutcome {
    /// Candidates within epsilon of the hull, the extended spectrum estimate.
    pub extended: Vec<Complex64>,
    pub hull: HullRegion,
    /// True when the identified values were too degenerate for a polygon
    /// and a bounding-box dilation was used instead.
    pub used_bounding_box: bool,
}

/// Re-admits candidates near the convex hull of the identified values. The
/// identified cloud is mirrored across the real axis first (the target
/// spectrum is real and sources come in conjugate pairs). A degenerate
/// all-real cloud keeps its segment geometry; a degenerate cloud with
/// genuinely complex values falls back to a dilated bounding box.
pub fn hull_extend_filter(
    identified: &[Complex64],
    set: &CandidateSet,
    epsilon: f64,
) -> Result<HullExtendOutcome> {
    if identified.is_empty() {
        return Err(Error::Precondition(
            "hull extension needs at least one identified value".into(),
        ));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "hull tolerance must be positive, got {epsilon}"
        )));
    }
    let mirrored = mirror_conjugates(identified);
    let hull = HullRegion::from_points(&mirrored)?;
    let scale = identified.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
    let all_real = identified
        .iter()
        .all(|z| z.im.abs() <= REAL_AXIS_IMAG_TOL * scale);

    let mut used_bounding_box = false;
    let keep: Box<dyn Fn(Complex64) -> bool> = if !hull.degenerate || all_real {
        let hull = hull.clone();
        Box::new(move |z| hull.contains_dilated(z, epsilon))
    } else {
        used_bounding_box = true;
        log::warn!(
            "identified values are degenerate but not real; extending by a dilated bounding box"
        );
        let min_re = mirrored.iter().map(|z| z.re).fold(f64::INFINITY, f64::min) - epsilon;
        let max_re = mirrored.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max) + epsilon;
        let min_im = mirrored.iter().map(|z| z.im).fold(f64::INFINITY, f64::min) - epsilon;
        let max_im = mirrored.iter().map(|z| z.im).fold(f64::NEG_INFINITY, f64::max) + epsilon;
        Box::new(move |z| z.re >= min_re && z.re <= max_re && z.im >= min_im && z.im <= max_im)
    };

    let mut extended: Vec<Complex64> = set.lambdas().into_iter().filter(|&z| keep(z)).collect();
    extended.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).expect("finite values"));
    Ok(HullExtendOutcome {
        extended,
        hull,
        used_bounding_box,
    })
}

/// Keeps candidates in the box [0, rho + epsilon] x [-epsilon, epsilon],
/// where rho is the largest identified value: the target spectrum is real
/// and nonnegative, so everything outside is spurious. The lower real bound
/// tolerates negation at roundoff scale so a true zero eigenvalue computed
/// as -1e-16 survives.
pub fn real_axis_fallback(
    identified: &[Complex64],
    set: &CandidateSet,
    epsilon: f64,
) -> Result<Vec<Complex64>> {
    if identified.is_empty() {
        return Err(Error::Precondition(
            "real-axis filtering needs at least one identified value".into(),
        ));
    }
    let scale = identified.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
    if identified
        .iter()
        .any(|z| z.im.abs() > REAL_AXIS_IMAG_TOL * scale)
    {
        return Err(Error::Precondition(
            "real-axis filtering wants an all-real identified set".into(),
        ));
    }
    let rho = identified.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let slack = ZERO_EDGE_SLACK * scale.max(rho.abs());
    let mut kept: Vec<Complex64> = set
        .lambdas()
        .into_iter()
        .filter(|z| z.re >= -slack && z.re <= rho + epsilon && z.im.abs() <= epsilon)
        .collect();
    kept.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).expect("finite values"));
    Ok(kept)
}

/// Moment estimates read off the hull geometry, treating the spectrum as
/// uniformly spread over the hull.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HullMomentEstimate {
    pub m1_hat: f64,
    pub m2_hat: f64,
    /// Smallest nonzero eigenvalue estimate: minimum hull real part.
    pub lambda2_hat: f64,
    /// Largest eigenvalue estimate: maximum hull real part.
    pub lambdan_hat: f64,
    pub degenerate: bool,
}

pub fn hull_moments(hull: &HullRegion) -> HullMomentEstimate {
    HullMomentEstimate {
        m1_hat: hull.centroid.re,
        m2_hat: hull.second_moment.re,
        lambda2_hat: hull.min_re(),
        lambdan_hat: hull.max_re(),
        degenerate: hull.degenerate,
    }
}

/// Optional refinement: when the hull minimum sits within epsilon of the
/// origin (the always-present zero eigenvalue), the smallest identified
/// value clear of the origin is a better reading of the spectral gap.
pub fn refine_lambda2(
    estimate: &HullMomentEstimate,
    identified: &[Complex64],
    epsilon: f64,
) -> f64 {
    if estimate.lambda2_hat.abs() > epsilon {
        return estimate.lambda2_hat;
    }
    let smallest_clear = identified
        .iter()
        .filter(|z| z.re > epsilon)
        .map(|z| z.re)
        .fold(f64::INFINITY, f64::min);
    if smallest_clear.is_finite() {
        smallest_clear
    } else {
        estimate.lambda2_hat
    }
}

/// Exact moment recovery from the full Jacobian spectrum.
///
/// Averaging over the graph eigenvalues turns the block trace into a
/// polynomial identity: m M_k(J) = sum_j c_j^(k) M_j(L), where c_j^(k) is
/// the coefficient of s^j in tr((A - s BC^T)^k). The leading coefficient is
/// (-1)^k m M_k(BC^T), so the moments of L follow by a triangular
/// recursion as long as no feedthrough moment vanishes. The trace
/// polynomial is recovered by interpolation at k+1 real nodes, which keeps
/// the identity exact for non-commuting A and BC^T.
pub fn moments_via_recursion(
    mus: &[Complex64],
    sys: &LinearizedSystem,
    n: usize,
    k_max: usize,
    threshold: f64,
) -> Result<Vec<f64>> {
    let m = sys.dim();
    if n == 0 || k_max == 0 {
        return Err(Error::InvalidArgument(
            "node count and moment order must be positive".into(),
        ));
    }
    if mus.len() != m * n {
        return Err(Error::InvalidArgument(format!(
            "expected {} Jacobian eigenvalues ({} blocks of {}), got {}",
            m * n,
            n,
            m,
            mus.len()
        )));
    }
    let a = &sys.a;
    let bc = sys.feedthrough();
    let radius = 1.0 + a.norm() + bc.norm();

    // Moments of the Jacobian spectrum, complex until the final reading.
    let mut mk_j = Vec::with_capacity(k_max + 1);
    let mut powers: Vec<Complex64> = vec![Complex64::new(1.0, 0.0); mus.len()];
    mk_j.push(Complex64::new(1.0, 0.0));
    for _ in 1..=k_max {
        for (p, &mu) in powers.iter_mut().zip(mus) {
            *p *= mu;
        }
        let sum: Complex64 = powers.iter().sum();
        mk_j.push(sum / mus.len() as f64);
    }

    let mut ml: Vec<Complex64> = vec![Complex64::new(1.0, 0.0)];
    let mut out = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let nodes = qz::chebyshev_nodes(k + 1, radius);
        let traces: Vec<Complex64> = nodes
            .iter()
            .map(|&s| {
                let base = a - &bc * s;
                let mut power = base.clone();
                for _ in 1..k {
                    power = &power * &base;
                }
                Complex64::new(power.trace(), 0.0)
            })
            .collect();
        let coeffs = qz::fit_polynomial(&nodes, &traces)?;
        let leading = coeffs[k];
        // leading = (-1)^k tr((BC^T)^k) = (-1)^k m M_k(BC^T)
        if leading.norm() / m as f64 <= threshold {
            return Err(Error::InfeasibleAt {
                k,
                detail: format!(
                    "feedthrough spectral moment of order {k} is {:.3e}, below {threshold:.1e}",
                    leading.norm() / m as f64
                ),
            });
        }
        let mut acc = mk_j[k] * m as f64;
        for (j, &mlj) in ml.iter().enumerate() {
            acc -= coeffs[j] * mlj;
        }
        let next = acc / leading;
        ml.push(next);
        if next.im.abs() > 1e-8 * next.re.abs().max(1.0) {
            log::warn!(
                "moment of order {k} has imaginary residue {:.3e}; input spectrum may be inconsistent",
                next.im
            );
        }
        out.push(next.re);
    }
    Ok(out)
}

/// One matched identified/exact pair.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MatchedPair {
    pub identified: Complex64,
    pub exact: f64,
    pub error: f64,
}

/// Greedy one-to-one comparison of an identified spectrum against the exact
/// one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleComparison {
    pub matched: Vec<MatchedPair>,
    pub missed: usize,
    pub spurious: usize,
    pub max_error: f64,
    /// Relative errors of the first two spectral moments of the identified
    /// values against the exact ones.
    pub moment_errors: Vec<f64>,
}

/// Pairs identified values with exact eigenvalues, nearest first, stopping
/// at `match_tol`; leftovers on the exact side are missed, on the
/// identified side spurious.
pub fn compare_to_oracle(
    identified: &[Complex64],
    exact: &RealSpectrum,
    match_tol: f64,
) -> OracleComparison {
    let mut id_left: Vec<(usize, Complex64)> = identified.iter().copied().enumerate().collect();
    let mut ex_left: Vec<(usize, f64)> = exact.values().iter().copied().enumerate().collect();
    let mut matched = Vec::new();
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for (ii, &(_, z)) in id_left.iter().enumerate() {
            for (jj, &(_, e)) in ex_left.iter().enumerate() {
                let d = (z - Complex64::new(e, 0.0)).norm();
                if best.is_none_or(|(_, _, bd)| d < bd) {
                    best = Some((ii, jj, d));
                }
            }
        }
        match best {
            Some((ii, jj, d)) if d <= match_tol => {
                let (_, z) = id_left.remove(ii);
                let (_, e) = ex_left.remove(jj);
                matched.push(MatchedPair {
                    identified: z,
                    exact: e,
                    error: d,
                });
            }
            _ => break,
        }
    }
    let max_error = matched.iter().map(|p| p.error).fold(0.0_f64, f64::max);
    let mut moment_errors = Vec::new();
    for k in 1..=2usize {
        let exact_mk = exact.moment(k);
        let id_mk = if identified.is_empty() {
            0.0
        } else {
            let sum: Complex64 = identified.iter().map(|z| z.powu(k as u32)).sum();
            (sum / identified.len() as f64).re
        };
        moment_errors.push((id_mk - exact_mk).abs() / exact_mk.abs().max(1.0));
    }
    OracleComparison {
        matched,
        missed: ex_left.len(),
        spurious: id_left.len(),
        max_error,
        moment_errors,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{self, UnitModel};
    use crate::geig;
    use crate::graph;
    use nalgebra::DVector;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn linear_system(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> LinearizedSystem {
        let m = a.nrows();
        LinearizedSystem {
            a,
            b,
            c,
            x_star: DVector::zeros(m),
        }
    }

    fn manual_set(lambdas: &[Complex64], m: usize) -> CandidateSet {
        CandidateSet {
            entries: lambdas
                .iter()
                .map(|&lambda| CandidateEntry {
                    lambda,
                    source_mu: c(0.0, 0.0),
                    residual: 0.0,
                    within_tol: true,
                })
                .collect(),
            m,
            m_bar: m,
            skipped: Vec::new(),
            n_infinite_total: 0,
        }
    }

    #[test]
    fn feasibility_positive_diagonal() {
        let sys = linear_system(
            DMatrix::zeros(2, 2),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]),
            DMatrix::identity(2, 2),
        );
        let rep = feasibility_check(&sys, 5, FEASIBILITY_TOL);
        assert!(rep.trace_nonzero);
        assert!(rep.first_vanishing_k.is_none());
        assert!(rep.m_bar_equals_m);
        for (k, mk) in rep.moments_bc.iter().enumerate() {
            let want = (1.0 + 2.0_f64.powi(k as i32 + 1)) / 2.0;
            assert!((mk - want).abs() < 1e-12);
        }
    }

    #[test]
    fn feasibility_balanced_diagonal_fails_at_one() {
        let sys = linear_system(
            DMatrix::zeros(2, 2),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
            DMatrix::identity(2, 2),
        );
        let rep = feasibility_check(&sys, 4, FEASIBILITY_TOL);
        assert!(!rep.trace_nonzero);
        assert_eq!(rep.first_vanishing_k, Some(1));
        // Even powers are fine: M_2 = 1.
        assert!((rep.moments_bc[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn feasibility_nilpotent_fails_everywhere() {
        let sys = linear_system(
            DMatrix::zeros(2, 2),
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            DMatrix::identity(2, 2),
        );
        let rep = feasibility_check(&sys, 4, FEASIBILITY_TOL);
        assert_eq!(rep.first_vanishing_k, Some(1));
        assert!(rep.moments_bc.iter().all(|mk| mk.abs() < 1e-12));
        assert!(!rep.m_bar_equals_m);
    }

    #[test]
    fn feasibility_high_order_uses_eigenvalue_powers() {
        let sys = linear_system(
            DMatrix::zeros(2, 2),
            DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 2.0]),
            DMatrix::identity(2, 2),
        );
        let rep = feasibility_check(&sys, 35, FEASIBILITY_TOL);
        for (idx, mk) in rep.moments_bc.iter().enumerate() {
            let k = idx as i32 + 1;
            let want = (0.5_f64.powi(k) + 2.0_f64.powi(k)) / 2.0;
            assert!(
                (mk - want).abs() <= 1e-8 * want.abs(),
                "order {k}: {mk} vs {want}"
            );
        }
    }

    #[test]
    fn multiplicity_filter_accepts_exact_multiples_only() {
        let set = manual_set(
            &[
                c(1.0, 0.0),
                c(1.0 + 1e-6, 0.0),
                c(3.0, 0.0),
                c(3.0 - 2e-6, 0.0),
                c(2.5, 0.0),
                c(7.1, 0.0),
            ],
            2,
        );
        let out = multiplicity_filter(&set, 1e-4).unwrap();
        assert_eq!(out.identified.len(), 2);
        assert!((out.identified[0] - c(1.0 + 5e-7, 0.0)).norm() < 1e-6);
        assert!((out.identified[1] - c(3.0 - 1e-6, 0.0)).norm() < 1e-6);
        assert_eq!(out.report.accepted.len(), 2);
        assert_eq!(out.report.clusters.len(), 4);
    }

    #[test]
    fn double_size_cluster_emits_two_copies() {
        let set = manual_set(
            &[
                c(5.0, 0.0),
                c(5.0 + 1e-6, 0.0),
                c(5.0 - 1e-6, 0.0),
                c(5.0 + 2e-6, 0.0),
            ],
            2,
        );
        let out = multiplicity_filter(&set, 1e-4).unwrap();
        assert_eq!(out.identified.len(), 2);
        assert!((out.identified[0] - out.identified[1]).norm() < 1e-12);
    }

    #[test]
    fn filter_is_invariant_under_permutation_and_conjugation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut lambdas = Vec::new();
        for _ in 0..6 {
            let base = c(rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0));
            lambdas.push(base);
            lambdas.push(base + c(1e-7, -1e-7));
        }
        let base_out = multiplicity_filter(&manual_set(&lambdas, 2), 1e-4).unwrap();

        let mut shuffled = lambdas.clone();
        shuffled.reverse();
        shuffled.swap(0, 5);
        let shuf_out = multiplicity_filter(&manual_set(&shuffled, 2), 1e-4).unwrap();
        assert_eq!(base_out.identified.len(), shuf_out.identified.len());
        for (a, b) in base_out.identified.iter().zip(&shuf_out.identified) {
            assert!((a - b).norm() < 1e-12);
        }

        let conj: Vec<Complex64> = lambdas.iter().map(|z| z.conj()).collect();
        let conj_out = multiplicity_filter(&manual_set(&conj, 2), 1e-4).unwrap();
        let mut conj_back: Vec<Complex64> = conj_out.identified.iter().map(|z| z.conj()).collect();
        conj_back.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
        let mut base_sorted = base_out.identified.clone();
        base_sorted.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
        for (a, b) in base_sorted.iter().zip(&conj_back) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn exact_input_run_recovers_the_spectrum() {
        let g = graph::erdos_renyi_weighted(8, 0.6, 99).unwrap();
        let lap = g.laplacian();
        let exact = graph::exact_spectrum(&lap).unwrap();
        let lin = dynamics::linearize(&UnitModel::linear_preset()).unwrap();
        let j = dynamics::build_jacobian(&lin, &lap);
        let mus = dynamics::jacobian_spectrum(&j).unwrap();
        let set =
            geig::build_candidate_set(&lin.a, &lin.feedthrough(), &mus, geig::DEFAULT_RESIDUAL_TOL)
                .unwrap();
        let out = multiplicity_filter(&set, 1e-4).unwrap();
        assert_eq!(out.identified.len(), 8);
        let cmp = compare_to_oracle(&out.identified, &exact, 1e-3);
        assert_eq!(cmp.missed, 0);
        assert_eq!(cmp.spurious, 0);
        assert!(cmp.max_error < 1e-6, "max error {}", cmp.max_error);
        let has_zero = out.identified.iter().any(|z| z.norm() < 1e-6);
        assert!(has_zero, "zero eigenvalue not identified");
    }

    #[test]
    fn hull_extension_readmits_interior_candidates() {
        let identified = [c(0.0, 0.0), c(4.0, 0.0), c(2.0, 3.0)];
        let extras = [
            c(2.0, 1.0),
            c(1.0, 0.5),
            c(3.0, -0.5),
            c(2.5, 0.1),
            c(9.0, 0.0),
            c(2.0, 8.0),
        ];
        let mut all: Vec<Complex64> = identified.to_vec();
        all.extend_from_slice(&extras);
        let set = manual_set(&all, 2);
        let out = hull_extend_filter(&identified, &set, 0.05).unwrap();
        assert!(!out.used_bounding_box);
        // The mirrored hull spans the conjugate wedge, so all four interior
        // extras come back; the two far points stay out.
        assert_eq!(out.extended.len(), 7);
        assert!(out.extended.iter().all(|z| z.re < 8.0 && z.im < 4.0));
    }

    #[test]
    fn degenerate_real_identified_set_keeps_segment_geometry() {
        let identified = [c(0.0, 0.0), c(2.0, 0.0), c(5.0, 0.0)];
        let candidates = [
            c(1.0, 0.02),
            c(4.0, -0.04),
            c(5.04, 0.0),
            c(6.0, 0.0),
            c(3.0, 2.0),
        ];
        let set = manual_set(&candidates, 2);
        let out = hull_extend_filter(&identified, &set, 0.05).unwrap();
        assert!(!out.used_bounding_box);
        assert!(out.hull.degenerate);
        assert_eq!(out.extended.len(), 3);
        assert!(out.extended.iter().all(|z| z.im.abs() <= 0.05 && z.re <= 5.05));
    }

    #[test]
    fn real_axis_box_obeys_the_bounds() {
        let identified = [c(1.0, 0.0), c(4.0, 0.0)];
        let candidates = [
            c(2.0, 0.0),
            c(4.04, 0.0),
            c(4.2, 0.0),
            c(-0.3, 0.0),
            c(1.0, 0.5),
            c(1.0, 0.0),
            c(4.0, 0.0),
        ];
        let set = manual_set(&candidates, 2);
        let kept = real_axis_fallback(&identified, &set, 0.05).unwrap();
        let want = [c(1.0, 0.0), c(2.0, 0.0), c(4.0, 0.0), c(4.04, 0.0)];
        assert_eq!(kept.len(), want.len());
        for (a, b) in kept.iter().zip(&want) {
            assert!((a - b).norm() < 1e-12);
        }
        for z in &kept {
            assert!(z.re >= -1e-10 && z.re <= 4.05 + 1e-12 && z.im.abs() <= 0.05);
        }
    }

    #[test]
    fn real_axis_keeps_roundoff_negative_zero() {
        let identified = [c(0.0, 0.0), c(3.0, 0.0)];
        let set = manual_set(&[c(-1e-15, 0.0), c(3.0, 0.0), c(-0.2, 0.0)], 2);
        let kept = real_axis_fallback(&identified, &set, 0.1).unwrap();
        assert_eq!(kept.len(), 2);
        assert!(kept[0].re.abs() < 1e-12);
    }

    #[test]
    fn rectangle_hull_moment_readings() {
        let pts = [c(0.0, -1.0), c(4.0, -1.0), c(4.0, 1.0), c(0.0, 1.0)];
        let hull = HullRegion::from_points(&pts).unwrap();
        let est = hull_moments(&hull);
        assert!((est.m1_hat - 2.0).abs() < 1e-12);
        assert!((est.m2_hat - 5.0).abs() < 1e-12);
        assert_eq!(est.lambda2_hat, 0.0);
        assert_eq!(est.lambdan_hat, 4.0);
        assert!(!est.degenerate);
    }

    #[test]
    fn segment_hull_moment_readings() {
        let pts = [c(0.0, 0.0), c(6.0, 0.0)];
        let hull = HullRegion::from_points(&pts).unwrap();
        let est = hull_moments(&hull);
        assert!((est.m1_hat - 3.0).abs() < 1e-12);
        assert!((est.m2_hat - 12.0).abs() < 1e-12);
        assert!(est.degenerate);
    }

    #[test]
    fn lambda2_refinement_skips_the_origin() {
        let est = HullMomentEstimate {
            m1_hat: 3.0,
            m2_hat: 12.0,
            lambda2_hat: 0.02,
            lambdan_hat: 8.0,
            degenerate: false,
        };
        let identified = [c(0.0, 0.0), c(1.45, 0.0), c(4.0, 0.0)];
        let refined = refine_lambda2(&est, &identified, 0.3);
        assert!((refined - 1.45).abs() < 1e-12);
        // A hull minimum clear of the origin is returned untouched.
        let est2 = HullMomentEstimate {
            lambda2_hat: 0.9,
            ..est
        };
        assert_eq!(refine_lambda2(&est2, &identified, 0.3), 0.9);
    }

    #[test]
    fn scalar_moment_recursion_anchor() {
        // One-dimensional blocks with unit feedthrough on a two-node chain:
        // the first moment of L is a - mean(spectrum of J).
        let a = 1.3;
        let w = 0.7;
        let sys = linear_system(
            DMatrix::from_row_slice(1, 1, &[a]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
        );
        let mus = [c(a, 0.0), c(a - 2.0 * w, 0.0)];
        let ml = moments_via_recursion(&mus, &sys, 2, 1, FEASIBILITY_TOL).unwrap();
        assert!((ml[0] - w).abs() < 1e-12, "got {}", ml[0]);
    }

    #[test]
    fn decoupled_network_has_zero_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
        let sys = linear_system(
            a.clone(),
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
        );
        let eigs: Vec<Complex64> = nalgebra::Schur::try_new(a, f64::EPSILON, 0)
            .unwrap()
            .complex_eigenvalues()
            .iter()
            .copied()
            .collect();
        let mut mus = Vec::new();
        for _ in 0..3 {
            mus.extend_from_slice(&eigs);
        }
        let ml = moments_via_recursion(&mus, &sys, 3, 4, FEASIBILITY_TOL).unwrap();
        for (k, mk) in ml.iter().enumerate() {
            assert!(mk.abs() < 1e-9, "order {}: {}", k + 1, mk);
        }
    }

    #[test]
    fn recursion_inverts_the_forward_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let g = graph::erdos_renyi_weighted(6, 0.7, 77).unwrap();
        let lap = g.laplacian();
        let a = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-0.5..0.5));
        let b = DMatrix::identity(2, 2) + DMatrix::from_fn(2, 2, |_, _| rng.random_range(-0.1..0.1));
        let cc = DMatrix::identity(2, 2) + DMatrix::from_fn(2, 2, |_, _| rng.random_range(-0.1..0.1));
        let sys = linear_system(a, b, cc);
        let j = dynamics::build_jacobian(&sys, &lap);
        let mus = dynamics::jacobian_spectrum(&j).unwrap();
        let ml = moments_via_recursion(&mus, &sys, 6, 6, FEASIBILITY_TOL).unwrap();
        for (idx, got) in ml.iter().enumerate() {
            let k = idx + 1;
            let want = crate::graph::spectral_moment(lap.matrix(), k).unwrap();
            assert!(
                (got - want).abs() < 1e-8 * want.abs().max(1.0),
                "order {k}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn balanced_feedthrough_is_reported_infeasible() {
        let sys = linear_system(
            DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.2, 0.9]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
            DMatrix::identity(2, 2),
        );
        let mus = vec![c(0.0, 0.0); 4];
        match moments_via_recursion(&mus, &sys, 2, 3, FEASIBILITY_TOL) {
            Err(Error::InfeasibleAt { k: 1, .. }) => {}
            other => panic!("expected infeasibility at order 1, got {other:?}"),
        }
    }

    #[test]
    fn oracle_comparison_counts() {
        let exact = RealSpectrum::from_values(vec![0.0, 1.0, 2.5]);
        let perfect: Vec<Complex64> = exact.values().iter().map(|&v| c(v, 0.0)).collect();
        let cmp = compare_to_oracle(&perfect, &exact, 1e-8);
        assert_eq!(cmp.missed, 0);
        assert_eq!(cmp.spurious, 0);
        assert_eq!(cmp.max_error, 0.0);
        assert!(cmp.moment_errors.iter().all(|e| *e < 1e-14));

        let missing = [c(0.0, 0.0), c(2.5, 0.0)];
        let cmp = compare_to_oracle(&missing, &exact, 1e-8);
        assert_eq!(cmp.missed, 1);
        assert_eq!(cmp.spurious, 0);

        let extra = [c(0.0, 0.0), c(1.0, 0.0), c(2.5, 0.0), c(9.0, 0.0)];
        let cmp = compare_to_oracle(&extra, &exact, 1e-8);
        assert_eq!(cmp.missed, 0);
        assert_eq!(cmp.spurious, 1);
    }
}
