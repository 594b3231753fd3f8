//! Delay-embedded dynamic mode decomposition.
//!
//! Scalar or low-dimensional measurements are lifted with c delayed copies;
//! the q trajectories are stacked as extra rows, so the embedded data can
//! reach rank q * p * c even when a single trajectory spans only p * c
//! dimensions. DMD then fits the best linear one-step map on the paired
//! columns and returns its eigenvalues; the continuous-time spectrum follows
//! from the principal logarithm over the sampling period.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default relative singular value cutoff.
pub const DEFAULT_SVD_TOL: f64 = 1e-10;
/// Discrete eigenvalues with modulus at or below this are dropped before the
/// logarithm.
pub const MODULUS_FLOOR: f64 = 1e-12;
/// Fraction of the Nyquist phase treated as aliasing risk.
pub const ALIAS_GUARD: f64 = 0.95;

/// Paired snapshot matrices: each column of `y` is the one-step advance of
/// the matching column of `x`. Rows are the measured signals stacked over
/// delays, trajectory blocks stacked vertically.
#[derive(Debug, Clone)]
pub struct DelayEmbedding {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub delays: usize,
    pub signals: usize,
    pub trajectories: usize,
}

/// Subtracts the final snapshot of a series from every snapshot, leaving the
/// fluctuation around the trajectory's end state.
pub fn center_on_final(series: &DMatrix<f64>) -> DMatrix<f64> {
    let last = series.column(series.ncols() - 1).into_owned();
    let mut out = series.clone();
    for mut col in out.column_iter_mut() {
        col -= &last;
    }
    out
}

/// Builds the delay embedding from per-trajectory measurement series. Every
/// series must be p x (K+1) with the same shape; `c` is the number of delays,
/// and K must be at least c so at least one column pair exists.
pub fn hankel_embed(series: &[DMatrix<f64>], c: usize) -> Result<DelayEmbedding> {
    if series.is_empty() {
        return Err(Error::InvalidArgument("no trajectories to embed".into()));
    }
    if c == 0 {
        return Err(Error::InvalidArgument("delay count must be at least 1".into()));
    }
    let p = series[0].nrows();
    let snaps = series[0].ncols();
    if p == 0 || snaps == 0 {
        return Err(Error::InvalidArgument("empty measurement series".into()));
    }
    for (i, s) in series.iter().enumerate() {
        if s.nrows() != p || s.ncols() != snaps {
            return Err(Error::InvalidArgument(format!(
                "trajectory {i} has shape {}x{}, expected {p}x{snaps}",
                s.nrows(),
                s.ncols()
            )));
        }
    }
    // snaps = K + 1; pairs of c-long windows need K >= c.
    if snaps < c + 1 {
        return Err(Error::Precondition(format!(
            "embedding with {c} delays needs at least {} snapshots per trajectory, got {snaps}",
            c + 1
        )));
    }
    let q = series.len();
    let cols = snaps - c;
    let rows = q * p * c;
    let mut x = DMatrix::zeros(rows, cols);
    let mut y = DMatrix::zeros(rows, cols);
    for (j, s) in series.iter().enumerate() {
        for d in 0..c {
            for sig in 0..p {
                let row = j * p * c + d * p + sig;
                for t in 0..cols {
                    x[(row, t)] = s[(sig, t + d)];
                    y[(row, t)] = s[(sig, t + d + 1)];
                }
            }
        }
    }
    Ok(DelayEmbedding {
        x,
        y,
        delays: c,
        signals: p,
        trajectories: q,
    })
}

/// Eigenvalues of the best-fit one-step map, in the reduced SVD basis.
#[derive(Debug, Clone)]
pub struct RitzSpectrum {
    /// Discrete-time eigenvalues of the reduced operator.
    pub discrete: Vec<Complex64>,
    /// Retained SVD rank.
    pub rank: usize,
    /// All singular values of the data matrix, descending.
    pub singular_values: Vec<f64>,
}

/// Exact DMD: project the one-step map onto the leading left singular
/// subspace of X and take its eigenvalues. Singular values at or below
/// `svd_tol` times the largest are truncated.
pub fn dmd_eigs(emb: &DelayEmbedding, svd_tol: f64) -> Result<RitzSpectrum> {
    if !(svd_tol > 0.0) || svd_tol >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "svd_tol must lie in (0, 1), got {svd_tol}"
        )));
    }
    let svd = emb.x.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");

    // Do not assume the backend orders singular values.
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .expect("finite singular values")
    });
    let sigma_max = svd.singular_values[order[0]];
    if sigma_max <= 0.0 {
        return Err(Error::DegenerateData(
            "embedded data matrix is identically zero".into(),
        ));
    }
    let retained: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| svd.singular_values[i] > svd_tol * sigma_max)
        .collect();
    let rank = retained.len();

    let rows = emb.x.nrows();
    let cols = emb.x.ncols();
    let mut u_r = DMatrix::zeros(rows, rank);
    let mut v_r = DMatrix::zeros(cols, rank);
    for (k, &i) in retained.iter().enumerate() {
        u_r.set_column(k, &u.column(i));
        v_r.set_column(k, &v_t.row(i).transpose());
    }
    let mut reduced = u_r.transpose() * &emb.y * v_r;
    for (k, &i) in retained.iter().enumerate() {
        let inv = 1.0 / svd.singular_values[i];
        for row in 0..rank {
            reduced[(row, k)] *= inv;
        }
    }

    let schur = nalgebra::Schur::try_new(reduced, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("Schur iteration on the reduced operator failed".into()))?;
    let mut discrete: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    discrete.sort_by(|a, b| {
        (a.re, a.im)
            .partial_cmp(&(b.re, b.im))
            .expect("finite eigenvalues")
    });

    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    Ok(RitzSpectrum {
        discrete,
        rank,
        singular_values,
    })
}

/// Continuous-time spectrum with bookkeeping from the discrete-to-continuous
/// conversion.
#[derive(Debug, Clone)]
pub struct ContinuousSpectrum {
    /// log(z) / dt for each kept discrete eigenvalue, sorted by real then
    /// imaginary part.
    pub values: Vec<Complex64>,
    /// Discrete eigenvalues dropped for having negligible modulus.
    pub dropped_small: usize,
    /// Kept eigenvalues whose phase is close enough to the Nyquist limit
    /// that the principal branch may be wrong.
    pub near_alias: usize,
}

/// Principal-branch logarithm over the sampling period. Eigenvalues with
/// modulus at or below [`MODULUS_FLOOR`] carry no phase information and are
/// dropped with a warning; phases beyond [`ALIAS_GUARD`] of the Nyquist
/// limit are counted as aliasing risks.
pub fn to_continuous(discrete: &[Complex64], dt: f64) -> Result<ContinuousSpectrum> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sampling period must be positive, got {dt}"
        )));
    }
    let mut values = Vec::with_capacity(discrete.len());
    let mut dropped_small = 0usize;
    let mut near_alias = 0usize;
    for &z in discrete {
        if z.norm() <= MODULUS_FLOOR {
            dropped_small += 1;
            continue;
        }
        let mu = z.ln() / dt;
        if mu.im.abs() * dt >= ALIAS_GUARD * std::f64::consts::PI {
            near_alias += 1;
        }
        values.push(mu);
    }
    if dropped_small > 0 {
        log::warn!(
            "dropped {dropped_small} discrete eigenvalue(s) with modulus at or below {MODULUS_FLOOR:.0e}"
        );
    }
    if near_alias > 0 {
        log::warn!(
            "{near_alias} eigenvalue(s) near the Nyquist phase limit; continuous parts may be aliased"
        );
    }
    values.sort_by(|a, b| {
        (a.re, a.im)
            .partial_cmp(&(b.re, b.im))
            .expect("finite eigenvalues")
    });
    Ok(ContinuousSpectrum {
        values,
        dropped_small,
        near_alias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn trivial_embedding_shapes_and_entries() {
        // One scalar trajectory of 4 snapshots, 2 delays: two column pairs.
        let s = DMatrix::from_row_slice(1, 4, &[0.0, 1.0, 2.0, 3.0]);
        let emb = hankel_embed(&[s], 2).unwrap();
        assert_eq!(emb.x.shape(), (2, 2));
        assert_eq!(emb.y.shape(), (2, 2));
        // Columns are windows (s_t, s_{t+1}); Y advances by one step.
        assert_eq!(emb.x, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 2.0]));
        assert_eq!(emb.y, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]));
    }

    #[test]
    fn too_short_series_is_a_precondition_error() {
        let s = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        match hankel_embed(&[s], 2) {
            Err(Error::Precondition(_)) => {}
            other => panic!("expected precondition error, got {other:?}"),
        }
    }

    #[test]
    fn centering_removes_the_final_snapshot() {
        let s = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let cent = center_on_final(&s);
        assert_eq!(cent.column(2), DVector::from_vec(vec![0.0, 0.0]).column(0));
        assert_eq!(cent[(0, 0)], -2.0);
        assert_eq!(cent[(1, 0)], -2.0);
    }

    #[test]
    fn two_mode_scalar_series_is_recovered_exactly() {
        let dt = 0.3;
        let mu = [-0.5, -1.7];
        let k = 12;
        let series = DMatrix::from_fn(1, k + 1, |_, t| {
            let time = dt * t as f64;
            0.8 * (mu[0] * time).exp() + 0.5 * (mu[1] * time).exp()
        });
        let emb = hankel_embed(&[series], 2).unwrap();
        let ritz = dmd_eigs(&emb, 1e-10).unwrap();
        assert_eq!(ritz.rank, 2);
        let cont = to_continuous(&ritz.discrete, dt).unwrap();
        let mut got: Vec<f64> = cont.values.iter().map(|v| v.re).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((got[0] - mu[1]).abs() < 1e-9, "got {got:?}");
        assert!((got[1] - mu[0]).abs() < 1e-9, "got {got:?}");
        for v in &cont.values {
            assert!(v.im.abs() < 1e-9);
        }
    }

    #[test]
    fn full_state_linear_system_is_recovered_to_machine_precision() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let raw = DMatrix::<f64>::from_fn(6, 6, |_, _| rng.random_range(-1.0..1.0));
        let shift = raw.norm() + 0.5;
        let m = &raw - DMatrix::identity(6, 6) * shift;
        let dt = 0.1;
        let propagator = (m.clone() * dt).exp();
        let mut cols = vec![DVector::from_fn(6, |i, _| 0.3 + 0.1 * i as f64)];
        for t in 0..20 {
            let next = &propagator * &cols[t];
            cols.push(next);
        }
        let series = DMatrix::from_fn(6, 21, |i, t| cols[t][i]);
        let emb = hankel_embed(&[series], 1).unwrap();
        let ritz = dmd_eigs(&emb, 1e-12).unwrap();
        assert_eq!(ritz.rank, 6);
        let cont = to_continuous(&ritz.discrete, dt).unwrap();
        let mut want: Vec<Complex64> = nalgebra::Schur::try_new(m, f64::EPSILON, 0)
            .unwrap()
            .complex_eigenvalues()
            .iter()
            .copied()
            .collect();
        want.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
        assert_eq!(cont.values.len(), 6);
        for (g, w) in cont.values.iter().zip(&want) {
            assert!((g - w).norm() < 1e-9, "got {g}, want {w}");
        }
    }

    #[test]
    fn stacked_trajectories_raise_the_recoverable_rank() {
        // Six scalar trajectories of a 6-mode system: a single trajectory
        // embeds into rank <= 2 with two delays, the stack reaches 6 modes
        // when embedded with enough delays to span them.
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        let mus: Vec<f64> = (0..6).map(|i| -0.2 - 0.35 * i as f64).collect();
        let dt = 0.25;
        let k = 14;
        let mk_series = |rng: &mut rand_chacha::ChaCha8Rng| {
            let amps: Vec<f64> = (0..6).map(|_| rng.random_range(0.2..1.0)).collect();
            DMatrix::from_fn(1, k + 1, |_, t| {
                let time = dt * t as f64;
                mus.iter()
                    .zip(&amps)
                    .map(|(&mu, &a)| a * (mu * time).exp())
                    .sum()
            })
        };
        let series: Vec<DMatrix<f64>> = (0..6).map(|_| mk_series(&mut rng)).collect();
        let emb = hankel_embed(&series, 2).unwrap();
        assert_eq!(emb.x.nrows(), 12);
        let ritz = dmd_eigs(&emb, 1e-9).unwrap();
        assert!(ritz.rank >= 6, "rank {} too small", ritz.rank);
        let cont = to_continuous(&ritz.discrete, dt).unwrap();
        for &mu in &mus {
            let found = cont
                .values
                .iter()
                .any(|v| (v - Complex64::new(mu, 0.0)).norm() < 1e-6);
            assert!(found, "mode {mu} missing from {:?}", cont.values);
        }
    }

    #[test]
    fn conjugate_modes_come_out_paired() {
        let dt = 0.2;
        let series = DMatrix::from_fn(1, 20, |_, t| {
            let time = dt * t as f64;
            (0.9_f64 * time).exp() * (2.0 * time).cos() * 0.7 + (-0.4 * time).exp()
        });
        let emb = hankel_embed(&[series], 3).unwrap();
        let ritz = dmd_eigs(&emb, 1e-9).unwrap();
        let cont = to_continuous(&ritz.discrete, dt).unwrap();
        for v in &cont.values {
            if v.im.abs() > 1e-9 {
                let conj_found = cont.values.iter().any(|w| (w - v.conj()).norm() < 1e-7);
                assert!(conj_found, "unpaired complex eigenvalue {v}");
            }
        }
    }

    #[test]
    fn zero_data_is_degenerate() {
        let s = DMatrix::zeros(1, 6);
        let emb = hankel_embed(&[s], 2).unwrap();
        match dmd_eigs(&emb, 1e-10) {
            Err(Error::DegenerateData(_)) => {}
            other => panic!("expected degenerate data, got {other:?}"),
        }
    }

    #[test]
    fn aggressive_truncation_reduces_rank() {
        let dt = 0.3;
        let series = DMatrix::from_fn(1, 16, |_, t| {
            let time = dt * t as f64;
            (-0.4 * time).exp() + 1e-6 * (-2.5 * time).exp()
        });
        let emb = hankel_embed(std::slice::from_ref(&series), 2).unwrap();
        let fine = dmd_eigs(&emb, 1e-12).unwrap();
        let coarse = dmd_eigs(&emb, 1e-3).unwrap();
        assert_eq!(fine.rank, 2);
        assert_eq!(coarse.rank, 1);
    }

    #[test]
    fn logarithm_conversion_flags_and_drops() {
        let dt = 0.5;
        let clean = Complex64::new(-1.0, 2.0);
        let z = (clean * dt).exp();
        let tiny = Complex64::new(1e-15, 0.0);
        let nyquist = Complex64::new(-0.5, 0.001); // phase close to pi
        let cont = to_continuous(&[z, tiny, nyquist], dt).unwrap();
        assert_eq!(cont.dropped_small, 1);
        assert_eq!(cont.near_alias, 1);
        assert!(cont.values.iter().any(|v| (v - clean).norm() < 1e-12));
    }

    #[test]
    fn singular_values_are_reported_descending() {
        let s = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 3.0, 4.0, 0.1, 0.1, 0.2, 0.3]);
        let emb = hankel_embed(&[s], 1).unwrap();
        let ritz = dmd_eigs(&emb, 1e-12).unwrap();
        for w in ritz.singular_values.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }
}
