//! Coupled unit dynamics: models, linearization, network assembly and
//! simulation.
//!
//! A network couples n identical units through a weighted graph. Each unit
//! carries state x in R^m, drift F(x), input gain G(x) and output map H(x);
//! node k feels u_k = sum_j W_kj (y_j - y_k) through its gain. The
//! synchronized state replicates a fixed point x* of F across all nodes, and
//! the Jacobian there is I_n (x) A - L (x) B C^T with A = dF(x*), B = G(x*)
//! and C holding the output-map gradients at x* as columns.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Laplacian, WeightedGraph};

/// Relative tolerance for accepting x* as a fixed point of the drift.
pub const FIXED_POINT_TOL: f64 = 1e-8;
/// Finite-difference step scale for numerical Jacobians.
pub const FD_STEP_SCALE: f64 = 1e-6;
/// Relative singular value threshold when ranking the feedthrough B C^T.
pub const FEEDTHROUGH_RANK_TOL: f64 = 1e-10;
/// Substep count used when a config does not pin one.
pub const DEFAULT_SUBSTEPS: usize = 10;

type StateFn = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
type GainFn = Box<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
type JacFn = Box<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// Dynamics of one isolated unit together with its coupling maps.
pub struct UnitModel {
    dim: usize,
    outputs: usize,
    drift: StateFn,
    gain: GainFn,
    output: StateFn,
    drift_jacobian: Option<JacFn>,
    output_jacobian: Option<JacFn>,
    x_star: DVector<f64>,
}

impl UnitModel {
    /// Builds a model and checks that `x_star` is a fixed point of the drift.
    pub fn new(
        dim: usize,
        outputs: usize,
        drift: StateFn,
        gain: GainFn,
        output: StateFn,
        x_star: DVector<f64>,
    ) -> Result<Self> {
        if dim == 0 || outputs == 0 {
            return Err(Error::InvalidArgument(
                "unit models need at least one state and one output".into(),
            ));
        }
        if outputs > dim {
            return Err(Error::InvalidArgument(format!(
                "output count {outputs} exceeds state dimension {dim}"
            )));
        }
        if x_star.len() != dim {
            return Err(Error::InvalidArgument(format!(
                "fixed point has length {}, expected {dim}",
                x_star.len()
            )));
        }
        let model = Self {
            dim,
            outputs,
            drift,
            gain,
            output,
            drift_jacobian: None,
            output_jacobian: None,
            x_star,
        };
        model.check_fixed_point()?;
        Ok(model)
    }

    /// Attaches exact Jacobians of the drift and the output map.
    pub fn with_jacobians(mut self, drift_jacobian: JacFn, output_jacobian: JacFn) -> Self {
        self.drift_jacobian = Some(drift_jacobian);
        self.output_jacobian = Some(output_jacobian);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn x_star(&self) -> &DVector<f64> {
        &self.x_star
    }

    pub fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.drift)(x)
    }

    pub fn gain(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.gain)(x)
    }

    pub fn output(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.output)(x)
    }

    fn check_fixed_point(&self) -> Result<()> {
        let res = self.drift(&self.x_star).norm();
        let scale = 1.0 + self.x_star.norm();
        if res > FIXED_POINT_TOL * scale {
            return Err(Error::Precondition(format!(
                "x* is not a fixed point: |F(x*)| = {res:.3e} against scale {scale:.3e}"
            )));
        }
        Ok(())
    }

    /// Linear network unit: drift A x, constant gain B, output C^T x. The
    /// columns of `c` are the output gradients, so `c` is m x r.
    pub fn linear(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let dim = a.nrows();
        if !a.is_square() {
            return Err(Error::InvalidArgument("drift matrix must be square".into()));
        }
        let outputs = b.ncols();
        if b.nrows() != dim || c.nrows() != dim || c.ncols() != outputs {
            return Err(Error::InvalidArgument(format!(
                "coupling shapes must be {dim}x{outputs} for the gain and the output gradients, \
                 got {}x{} and {}x{}",
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        let a_cl = a.clone();
        let c_cl = c.clone();
        let a_jac = a.clone();
        let c_jac = c.clone();
        let model = Self::new(
            dim,
            outputs,
            Box::new(move |x| &a_cl * x),
            Box::new(move |_| b.clone()),
            Box::new(move |x| c_cl.transpose() * x),
            DVector::zeros(dim),
        )?;
        Ok(model.with_jacobians(
            Box::new(move |_| a_jac.clone()),
            Box::new(move |_| c_jac.transpose()),
        ))
    }

    /// Two-state linear benchmark unit: a stable rotation coupled through
    /// channel gains 1 and 2 with full-state outputs.
    pub fn linear_preset() -> Self {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, -2.0, 1.0, -1.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let c = DMatrix::identity(2, 2);
        Self::linear(a, b, c).expect("preset matrices are consistent")
    }

    /// Brusselator unit with full-state outputs and channel gains 1 and 4.5.
    /// The fixed point is (1, b/a).
    pub fn brusselator(a: f64, b: f64) -> Result<Self> {
        if a <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "brusselator parameter a must be positive, got {a}"
            )));
        }
        let x_star = DVector::from_vec(vec![1.0, b / a]);
        let drift = move |x: &DVector<f64>| {
            let (x1, x2) = (x[0], x[1]);
            DVector::from_vec(vec![
                1.0 - (b + 1.0) * x1 + a * x1 * x1 * x2,
                b * x1 - a * x1 * x1 * x2,
            ])
        };
        let gain_mat = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.5]);
        let model = Self::new(
            2,
            2,
            Box::new(drift),
            Box::new(move |_| gain_mat.clone()),
            Box::new(|x| x.clone()),
            x_star,
        )?;
        let jac = move |x: &DVector<f64>| {
            let (x1, x2) = (x[0], x[1]);
            DMatrix::from_row_slice(
                2,
                2,
                &[
                    -(b + 1.0) + 2.0 * a * x1 * x2,
                    a * x1 * x1,
                    b - 2.0 * a * x1 * x2,
                    -a * x1 * x1,
                ],
            )
        };
        Ok(model.with_jacobians(Box::new(jac), Box::new(|_| DMatrix::identity(2, 2))))
    }
}

/// Linearization of a unit at its fixed point. `c` keeps the output-map
/// gradients as columns, so the feedthrough is `b * c^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub x_star: DVector<f64>,
}

impl LinearizedSystem {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.b.ncols()
    }

    /// The m x m feedthrough B C^T that couples neighboring units.
    pub fn feedthrough(&self) -> DMatrix<f64> {
        &self.b * self.c.transpose()
    }

    /// Numerical rank of the feedthrough, with singular values below
    /// [`FEEDTHROUGH_RANK_TOL`] times the largest one treated as zero.
    pub fn feedthrough_rank(&self) -> usize {
        let bc = self.feedthrough();
        let svd = bc.svd(false, false);
        let sigma_max = svd.singular_values.iter().copied().fold(0.0_f64, f64::max);
        if sigma_max == 0.0 {
            return 0;
        }
        svd.singular_values
            .iter()
            .filter(|&&s| s > FEEDTHROUGH_RANK_TOL * sigma_max)
            .count()
    }
}

/// Evaluates A = dF(x*), B = G(x*) and the output gradients at the fixed
/// point, using exact Jacobians when the model carries them and central
/// differences otherwise.
pub fn linearize(model: &UnitModel) -> Result<LinearizedSystem> {
    model.check_fixed_point()?;
    let x = model.x_star();
    let a = match &model.drift_jacobian {
        Some(j) => j(x),
        None => fd_jacobian(|v| model.drift(v), x, model.dim()),
    };
    let grad_h = match &model.output_jacobian {
        Some(j) => j(x),
        None => fd_jacobian(|v| model.output(v), x, model.outputs()),
    };
    if a.nrows() != model.dim() || a.ncols() != model.dim() {
        return Err(Error::Numerical(format!(
            "drift Jacobian has shape {}x{}, expected {0}x{0}",
            a.nrows(),
            a.ncols()
        )));
    }
    if grad_h.nrows() != model.outputs() || grad_h.ncols() != model.dim() {
        return Err(Error::Numerical(format!(
            "output Jacobian has shape {}x{}, expected {}x{}",
            grad_h.nrows(),
            grad_h.ncols(),
            model.outputs(),
            model.dim()
        )));
    }
    Ok(LinearizedSystem {
        a,
        b: model.gain(x),
        c: grad_h.transpose(),
        x_star: x.clone(),
    })
}

/// Central-difference Jacobian with per-coordinate steps scaled to the state.
fn fd_jacobian<F>(f: F, x: &DVector<f64>, out_dim: usize) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = x.len();
    let mut jac = DMatrix::zeros(out_dim, n);
    for i in 0..n {
        let h = FD_STEP_SCALE * (1.0 + x[i].abs());
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        let diff = (f(&xp) - f(&xm)) / (2.0 * h);
        jac.set_column(i, &diff);
    }
    jac
}

/// Network Jacobian at the synchronized state: I_n (x) A - L (x) B C^T.
pub fn build_jacobian(lin: &LinearizedSystem, laplacian: &Laplacian) -> DMatrix<f64> {
    let n = laplacian.n();
    let eye = DMatrix::<f64>::identity(n, n);
    eye.kronecker(&lin.a) - laplacian.matrix().kronecker(&lin.feedthrough())
}

/// Eigenvalues of a real matrix, sorted by real part then imaginary part.
pub fn jacobian_spectrum(j: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if !j.is_square() {
        return Err(Error::InvalidArgument(format!(
            "spectrum needs a square matrix, got {}x{}",
            j.nrows(),
            j.ncols()
        )));
    }
    let schur = nalgebra::Schur::try_new(j.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("Schur iteration did not converge".into()))?;
    let mut eigs: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    eigs.sort_by(|a, b| {
        (a.re, a.im)
            .partial_cmp(&(b.re, b.im))
            .expect("finite eigenvalues")
    });
    Ok(eigs)
}

/// Right-hand side of the coupled network ODE. State is node-major: the
/// block x[k m .. (k+1) m] is node k.
pub struct NetworkRhs<'a> {
    model: &'a UnitModel,
    graph: &'a WeightedGraph,
}

/// Couples every node of the graph with a copy of the unit model.
pub fn assemble_network_rhs<'a>(
    model: &'a UnitModel,
    graph: &'a WeightedGraph,
) -> NetworkRhs<'a> {
    NetworkRhs { model, graph }
}

impl NetworkRhs<'_> {
    pub fn state_dim(&self) -> usize {
        self.model.dim() * self.graph.n()
    }

    /// The synchronized equilibrium: x* replicated on every node.
    pub fn synchronized_state(&self) -> DVector<f64> {
        let m = self.model.dim();
        let n = self.graph.n();
        let mut x = DVector::zeros(m * n);
        for k in 0..n {
            x.rows_mut(k * m, m).copy_from(self.model.x_star());
        }
        x
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        let m = self.model.dim();
        let r = self.model.outputs();
        let n = self.graph.n();
        let w = self.graph.adjacency();
        let outputs: Vec<DVector<f64>> = (0..n)
            .map(|k| self.model.output(&x.rows(k * m, m).into_owned()))
            .collect();
        let mut dx = DVector::zeros(m * n);
        for k in 0..n {
            let xk = x.rows(k * m, m).into_owned();
            let mut u = DVector::zeros(r);
            for j in 0..n {
                let wkj = w[(k, j)];
                if wkj != 0.0 {
                    u += (&outputs[j] - &outputs[k]) * wkj;
                }
            }
            let dxk = self.model.drift(&xk) + self.model.gain(&xk) * u;
            dx.rows_mut(k * m, m).copy_from(&dxk);
        }
        dx
    }
}

/// Classical fourth-order Runge-Kutta integration with fixed substeps.
/// Returns a matrix whose `steps + 1` columns are the states at multiples of
/// `dt`, starting from `x0` itself.
pub fn simulate<F>(
    f: F,
    x0: &DVector<f64>,
    dt: f64,
    steps: usize,
    substeps: usize,
) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if substeps == 0 {
        return Err(Error::InvalidArgument("substeps must be at least 1".into()));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("initial state contains non-finite entries".into()));
    }
    let dim = x0.len();
    let h = dt / substeps as f64;
    let bound = 1e8 * (1.0 + x0.norm());
    let mut out = DMatrix::zeros(dim, steps + 1);
    let mut x = x0.clone();
    out.set_column(0, &x);
    for step in 1..=steps {
        for _ in 0..substeps {
            let k1 = f(&x);
            let k2 = f(&(&x + &k1 * (h / 2.0)));
            let k3 = f(&(&x + &k2 * (h / 2.0)));
            let k4 = f(&(&x + &k3 * h));
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        let norm = x.norm();
        if !norm.is_finite() || norm > bound {
            return Err(Error::Divergence {
                step,
                detail: format!("state norm {norm:.3e} exceeded bound {bound:.3e}"),
            });
        }
        out.set_column(step, &x);
    }
    Ok(out)
}

/// Draws initial conditions uniformly from a hypercube of the given width
/// centered on `center`. Width zero reproduces the center exactly.
pub fn sample_initial_conditions(
    center: &DVector<f64>,
    width: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<DVector<f64>>> {
    if !(width >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "perturbation width must be nonnegative, got {width}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = width / 2.0;
    Ok((0..count)
        .map(|_| {
            center.map(|c| {
                if half > 0.0 {
                    c + rng.random_range(-half..half)
                } else {
                    c
                }
            })
        })
        .collect())
}

/// Applies the output map node by node and keeps the selected output
/// components. `selector` indexes into the stacked output vector of length
/// `outputs * n`, node-major.
pub fn measure(
    trajectory: &DMatrix<f64>,
    model: &UnitModel,
    n_nodes: usize,
    selector: &[usize],
) -> Result<DMatrix<f64>> {
    let m = model.dim();
    let r = model.outputs();
    if trajectory.nrows() != m * n_nodes {
        return Err(Error::InvalidArgument(format!(
            "trajectory has {} rows, expected {} for {n_nodes} nodes of dimension {m}",
            trajectory.nrows(),
            m * n_nodes
        )));
    }
    if selector.is_empty() {
        return Err(Error::InvalidArgument("measurement selector is empty".into()));
    }
    for &s in selector {
        if s >= r * n_nodes {
            return Err(Error::InvalidArgument(format!(
                "selector index {s} out of range for {n_nodes} nodes with {r} outputs"
            )));
        }
    }
    let cols = trajectory.ncols();
    let mut out = DMatrix::zeros(selector.len(), cols);
    for t in 0..cols {
        let state = trajectory.column(t);
        // Outputs are evaluated lazily per referenced node.
        let mut cache: Vec<Option<DVector<f64>>> = vec![None; n_nodes];
        for (row, &s) in selector.iter().enumerate() {
            let node = s / r;
            let comp = s % r;
            let y = cache[node].get_or_insert_with(|| {
                model.output(&state.rows(node * m, m).into_owned())
            });
            out[(row, t)] = y[comp];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{erdos_renyi_weighted, exact_spectrum, WeightedGraph};

    fn two_node_chain(weight: f64) -> WeightedGraph {
        let mut w = DMatrix::zeros(2, 2);
        w[(0, 1)] = weight;
        w[(1, 0)] = weight;
        WeightedGraph::new(w).unwrap()
    }

    #[test]
    fn brusselator_fixed_point_and_jacobian() {
        let model = UnitModel::brusselator(15.0, 9.0).unwrap();
        assert!(model.drift(model.x_star()).norm() < 1e-12);
        let lin = linearize(&model).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[8.0, 15.0, -9.0, -15.0]);
        assert!((lin.a.clone() - want).norm() < 1e-12);
        assert_eq!(lin.feedthrough_rank(), 2);
    }

    #[test]
    fn finite_differences_match_exact_jacobian() {
        let (a, b) = (15.0, 9.0);
        let exact = linearize(&UnitModel::brusselator(a, b).unwrap()).unwrap();
        // Same model without attached Jacobians takes the numeric path.
        let gain_mat = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.5]);
        let numeric_model = UnitModel::new(
            2,
            2,
            Box::new(move |x: &DVector<f64>| {
                DVector::from_vec(vec![
                    1.0 - (b + 1.0) * x[0] + a * x[0] * x[0] * x[1],
                    b * x[0] - a * x[0] * x[0] * x[1],
                ])
            }),
            Box::new(move |_| gain_mat.clone()),
            Box::new(|x| x.clone()),
            DVector::from_vec(vec![1.0, b / a]),
        )
        .unwrap();
        let numeric = linearize(&numeric_model).unwrap();
        assert!(
            (numeric.a.clone() - exact.a.clone()).norm() < 1e-6,
            "numeric {:?} vs exact {:?}",
            numeric.a,
            exact.a
        );
        assert!((numeric.c.clone() - exact.c.clone()).norm() < 1e-9);
    }

    #[test]
    fn wrong_fixed_point_is_rejected() {
        let result = UnitModel::new(
            1,
            1,
            Box::new(|x: &DVector<f64>| x.map(|v| v + 1.0)),
            Box::new(|_| DMatrix::identity(1, 1)),
            Box::new(|x| x.clone()),
            DVector::zeros(1),
        );
        match result {
            Err(Error::Precondition(_)) => {}
            Err(other) => panic!("expected precondition error, got {other}"),
            Ok(_) => panic!("expected precondition error, got a model"),
        }
    }

    #[test]
    fn network_jacobian_matches_hand_blocks() {
        let model = UnitModel::linear_preset();
        let lin = linearize(&model).unwrap();
        let g = two_node_chain(0.5);
        let lap = g.laplacian();
        let j = build_jacobian(&lin, &lap);
        assert_eq!(j.nrows(), 4);
        let bc = lin.feedthrough();
        // Diagonal block: A - 0.5 BC; off-diagonal block: +0.5 BC.
        let diag = &lin.a - &bc * 0.5;
        let off = &bc * 0.5;
        for i in 0..2 {
            for k in 0..2 {
                assert!((j[(i, k)] - diag[(i, k)]).abs() < 1e-14);
                assert!((j[(i, k + 2)] - off[(i, k)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn jacobian_spectrum_is_union_of_pencil_spectra() {
        let model = UnitModel::linear_preset();
        let lin = linearize(&model).unwrap();
        let g = erdos_renyi_weighted(5, 0.7, 21).unwrap();
        let lap = g.laplacian();
        let lam = exact_spectrum(&lap).unwrap();
        let j = build_jacobian(&lin, &lap);
        let mut direct = jacobian_spectrum(&j).unwrap();
        let mut union: Vec<Complex64> = Vec::new();
        for &l in lam.values() {
            let shifted = &lin.a - &lin.feedthrough() * l;
            union.extend(jacobian_spectrum(&shifted).unwrap());
        }
        union.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
        direct.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
        assert_eq!(direct.len(), union.len());
        for (d, u) in direct.iter().zip(&union) {
            assert!((d - u).norm() < 1e-9, "direct {d} vs union {u}");
        }
    }

    #[test]
    fn linear_simulation_matches_matrix_exponential() {
        let model = UnitModel::linear_preset();
        let lin = linearize(&model).unwrap();
        let g = two_node_chain(0.8);
        let lap = g.laplacian();
        let j = build_jacobian(&lin, &lap);
        let rhs = assemble_network_rhs(&model, &g);
        let x0 = DVector::from_vec(vec![0.3, -0.2, 0.1, 0.4]);
        let dt = 0.25;
        let traj = simulate(|x| rhs.eval(x), &x0, dt, 8, 64).unwrap();
        for step in [1usize, 4, 8] {
            let expected = (j.clone() * (dt * step as f64)).exp() * &x0;
            let got = traj.column(step).into_owned();
            assert!(
                (got.clone() - expected.clone()).norm() < 1e-9,
                "step {step}: {got:?} vs {expected:?}"
            );
        }
    }

    #[test]
    fn divergence_is_reported_with_step_index() {
        let f = |x: &DVector<f64>| x.map(|v| v * v);
        let x0 = DVector::from_vec(vec![5.0]);
        let err = simulate(f, &x0, 0.5, 20, 10).unwrap_err();
        match err {
            Error::Divergence { step, .. } => assert!(step >= 1),
            other => panic!("expected divergence, got {other}"),
        }
    }

    #[test]
    fn initial_conditions_stay_in_hypercube_and_are_seeded() {
        let center = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let a = sample_initial_conditions(&center, 0.2, 4, 3).unwrap();
        let b = sample_initial_conditions(&center, 0.2, 4, 3).unwrap();
        assert_eq!(a, b);
        for ic in &a {
            for i in 0..3 {
                assert!((ic[i] - center[i]).abs() <= 0.1);
            }
        }
        let exact = sample_initial_conditions(&center, 0.0, 2, 9).unwrap();
        assert_eq!(exact[0], center);
        assert!(sample_initial_conditions(&center, -1.0, 1, 0).is_err());
    }

    #[test]
    fn measurement_applies_output_map_and_selector() {
        let model = UnitModel::linear_preset();
        let g = two_node_chain(1.0);
        let traj = DMatrix::from_column_slice(4, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        // Identity outputs: selector 2 is node 1, first component.
        let y = measure(&traj, &model, g.n(), &[2]).unwrap();
        assert_eq!(y[(0, 0)], 3.0);
        assert_eq!(y[(0, 1)], 7.0);
        assert!(measure(&traj, &model, g.n(), &[4]).is_err());
        assert!(measure(&traj, &model, g.n(), &[]).is_err());
    }

    #[test]
    fn weakly_coupled_brusselators_synchronize() {
        // Coupling strengths below the instability band keep the
        // synchronized equilibrium attracting: deviations must shrink.
        let model = UnitModel::brusselator(15.0, 9.0).unwrap();
        let g = two_node_chain(0.3);
        let rhs = assemble_network_rhs(&model, &g);
        let sync = rhs.synchronized_state();
        let ics = sample_initial_conditions(&sync, 1e-4, 1, 5).unwrap();
        let traj = simulate(|x| rhs.eval(x), &ics[0], 0.4, 25, 20).unwrap();
        let dev = |col: usize| (traj.column(col) - &sync).norm();
        assert!(dev(25) < dev(0) * 0.5, "initial {:.3e}, final {:.3e}", dev(0), dev(25));
    }
}
