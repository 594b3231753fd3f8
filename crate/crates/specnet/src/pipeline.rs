//! File-mediated experiment pipeline. Every stage reads its inputs from the
//! run directory and writes its outputs back as plain CSV/JSON, so running
//! the stages one subcommand at a time produces exactly the same artifacts
//! as a single in-process run.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use log::warn;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{
    Centering, ExperimentConfig, GraphGenerator, GraphSpec, IdentifyMethod, ModelSpec,
};
use crate::dmd::{center_on_final, dmd_eigs, hankel_embed, to_continuous};
use crate::dynamics::{
    assemble_network_rhs, build_jacobian, jacobian_spectrum, linearize, measure,
    sample_initial_conditions, simulate, UnitModel,
};
use crate::error::{Error, Result};
use crate::geig::{
    build_candidate_set, char_poly, cross_term_diagnostic, CandidateSet, CrossTermReport,
    DEFAULT_RESIDUAL_TOL,
};
use crate::graph::{
    dense_uniform_graph, erdos_renyi_weighted, exact_spectrum, RealSpectrum, WeightedGraph,
};
use crate::hull::{mirror_conjugates, HullRegion};
use crate::identify::{
    compare_to_oracle, feasibility_check, hull_extend_filter, hull_moments, moments_via_recursion,
    multiplicity_filter, real_axis_fallback, refine_lambda2, ClusterReport, FeasibilityReport,
    HullMomentEstimate, OracleComparison, FEASIBILITY_TOL,
};
use crate::io::{self, SnapshotMeta, SnapshotSet};

/// Where the source eigenvalues for identification come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Simulated snapshots, measured outputs, spectrum estimated from data.
    Data,
    /// Exact network Jacobian eigenvalues, bypassing simulation entirely.
    Oracle,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Data => "data",
            Mode::Oracle => "oracle",
        }
    }

    pub fn parse(s: &str) -> Result<Mode> {
        match s {
            "data" => Ok(Mode::Data),
            "oracle" => Ok(Mode::Oracle),
            other => Err(Error::InvalidArgument(format!(
                "unknown mode {other:?}, expected \"data\" or \"oracle\""
            ))),
        }
    }
}

/// Fixed artifact layout inside one run directory.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> RunDir {
        RunDir { root: root.into() }
    }

    pub fn config_path(&self) -> PathBuf {
        self.root.join("config.json")
    }

    pub fn graph_path(&self) -> PathBuf {
        self.root.join("graph.csv")
    }

    pub fn exact_spectrum_path(&self) -> PathBuf {
        self.root.join("exact_spectrum.csv")
    }

    pub fn snapshots_dir(&self) -> PathBuf {
        self.root.join("snapshots")
    }

    pub fn dmd_spectrum_path(&self) -> PathBuf {
        self.root.join("dmd_spectrum.csv")
    }

    pub fn dmd_meta_path(&self) -> PathBuf {
        self.root.join("dmd_meta.json")
    }

    /// Exact network-Jacobian eigenvalues, written in oracle mode.
    pub fn jacobian_spectrum_path(&self) -> PathBuf {
        self.root.join("jacobian_spectrum.csv")
    }

    pub fn candidates_path(&self) -> PathBuf {
        self.root.join("candidates.csv")
    }

    pub fn candidates_meta_path(&self) -> PathBuf {
        self.root.join("candidates_meta.json")
    }

    pub fn identified_path(&self) -> PathBuf {
        self.root.join("identified.csv")
    }

    pub fn identify_meta_path(&self) -> PathBuf {
        self.root.join("identify_meta.json")
    }

    pub fn report_path(&self) -> PathBuf {
        self.root.join("report.json")
    }
}

/// Summary written next to the estimated spectrum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DmdMeta {
    pub c: usize,
    pub svd_tol: f64,
    pub dt: f64,
    pub rank: usize,
    pub n_values: usize,
    pub dropped_small: usize,
    pub near_alias: usize,
    pub centering: Centering,
    pub singular_values: Vec<f64>,
}

/// Summary written next to the candidate list; restores the counts that the
/// CSV itself does not carry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateMeta {
    pub m: usize,
    pub m_bar: usize,
    pub sources: usize,
    pub skipped: usize,
    pub n_infinite_total: usize,
}

/// Summary written next to the identified spectrum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentifyMeta {
    pub method: IdentifyMethod,
    pub epsilon: f64,
    pub clusters: Option<ClusterReport>,
    pub hull: Option<HullRegion>,
    pub used_bounding_box: bool,
    pub estimates: Option<HullMomentEstimate>,
}

/// Everything a run produced, assembled from the on-disk artifacts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: u32,
    pub timestamp_unix: u64,
    pub mode: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub feasibility: FeasibilityReport,
    pub cross_terms: Option<CrossTermReport>,
    pub dmd: Option<DmdMeta>,
    pub candidates: CandidateMeta,
    pub identified: Vec<Complex64>,
    pub clusters: Option<ClusterReport>,
    pub hull: Option<HullRegion>,
    pub hull_moment_estimates: Option<HullMomentEstimate>,
    /// Laplacian moments recovered from the source eigenvalues by the
    /// trace recursion; only available when all of them are known.
    pub recursion_moments: Option<Vec<f64>>,
    pub oracle: OracleComparison,
    pub notes: Vec<String>,
}

pub fn build_model(spec: &ModelSpec) -> Result<UnitModel> {
    match spec {
        ModelSpec::Linear => Ok(UnitModel::linear_preset()),
        ModelSpec::Brusselator { a, b } => UnitModel::brusselator(*a, *b),
        ModelSpec::CustomLinear { a, b, c } => UnitModel::linear(
            matrix_from_rows(a, "model.a")?,
            matrix_from_rows(b, "model.b")?,
            matrix_from_rows(c, "model.c")?,
        ),
    }
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::Config(format!("{what} must be a nonempty matrix")));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Config(format!("{what} rows have unequal lengths")));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn build_graph(spec: &GraphSpec, seed: u64) -> Result<WeightedGraph> {
    match spec.generator {
        GraphGenerator::ErdosRenyi => {
            let p = spec.p_edge.ok_or_else(|| {
                Error::Config("graph.p_edge is required for the erdos_renyi generator".into())
            })?;
            erdos_renyi_weighted(spec.n, p, seed)
        }
        GraphGenerator::DenseUniform => dense_uniform_graph(spec.n, seed),
    }
}

fn read_graph(dir: &RunDir, n: usize) -> Result<WeightedGraph> {
    let path = dir.graph_path();
    let text = std::fs::read_to_string(&path).map_err(|_| Error::MissingArtifact(path))?;
    WeightedGraph::from_edge_list_csv(&text, n)
}

/// Draws the graph and records it with its exact Laplacian spectrum.
pub fn stage_generate(cfg: &ExperimentConfig, seed: u64, dir: &RunDir) -> Result<()> {
    std::fs::create_dir_all(&dir.root)?;
    let graph = build_graph(&cfg.graph, seed)?;
    std::fs::write(dir.graph_path(), graph.to_edge_list_csv())?;
    let exact = exact_spectrum(&graph.laplacian())?;
    let as_complex: Vec<Complex64> = exact
        .values()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    io::write_complex_csv(&dir.exact_spectrum_path(), &as_complex)
}

/// Integrates the coupled network from perturbed synchronized states and
/// stores the raw trajectories.
pub fn stage_simulate(cfg: &ExperimentConfig, seed: u64, dir: &RunDir) -> Result<()> {
    let graph = read_graph(dir, cfg.graph.n)?;
    let model = build_model(&cfg.model)?;
    let rhs = assemble_network_rhs(&model, &graph);
    let center = rhs.synchronized_state();
    let sim = &cfg.simulation;
    let ics = sample_initial_conditions(&center, sim.width, sim.q, seed.wrapping_add(1))?;
    let mut data = Vec::with_capacity(sim.q);
    for ic in &ics {
        data.push(simulate(
            |x| rhs.eval(x),
            ic,
            sim.dt,
            sim.k,
            sim.substeps,
        )?);
    }
    let set = SnapshotSet {
        q: sim.q,
        k: sim.k,
        dt: sim.dt,
        data,
    };
    let meta = SnapshotMeta {
        q: sim.q,
        k: sim.k,
        dt: sim.dt,
        state_dim: rhs.state_dim(),
        selector: cfg.dmd.selector.clone(),
        seed,
        model: cfg.model.clone(),
    };
    io::write_snapshots(&dir.snapshots_dir(), &set, &meta)
}

/// Measures the stored trajectories, embeds them with delays, and estimates
/// the continuous-time spectrum.
pub fn stage_dmd(cfg: &ExperimentConfig, dir: &RunDir) -> Result<()> {
    let (set, _meta) = io::read_snapshots(&dir.snapshots_dir())?;
    let model = build_model(&cfg.model)?;
    let mut series = Vec::with_capacity(set.data.len());
    for traj in &set.data {
        let measured = measure(traj, &model, cfg.graph.n, &cfg.dmd.selector)?;
        series.push(match cfg.dmd.centering {
            Centering::Final => center_on_final(&measured),
            Centering::None => measured,
        });
    }
    let emb = hankel_embed(&series, cfg.dmd.c)?;
    let ritz = dmd_eigs(&emb, cfg.dmd.svd_tol)?;
    let cont = to_continuous(&ritz.discrete, set.dt)?;
    io::write_complex_csv(&dir.dmd_spectrum_path(), &cont.values)?;
    io::write_json(
        &dir.dmd_meta_path(),
        &DmdMeta {
            c: cfg.dmd.c,
            svd_tol: cfg.dmd.svd_tol,
            dt: set.dt,
            rank: ritz.rank,
            n_values: cont.values.len(),
            dropped_small: cont.dropped_small,
            near_alias: cont.near_alias,
            centering: cfg.dmd.centering,
            singular_values: ritz.singular_values.clone(),
        },
    )
}

fn source_values(cfg: &ExperimentConfig, mode: Mode, dir: &RunDir) -> Result<Vec<Complex64>> {
    match mode {
        Mode::Data => io::read_complex_csv(&dir.dmd_spectrum_path()),
        Mode::Oracle => {
            let graph = read_graph(dir, cfg.graph.n)?;
            let sys = linearize(&build_model(&cfg.model)?)?;
            let j = build_jacobian(&sys, &graph.laplacian());
            let mus = jacobian_spectrum(&j)?;
            io::write_complex_csv(&dir.jacobian_spectrum_path(), &mus)?;
            Ok(mus)
        }
    }
}

/// Solves the per-source pencils, filters the pooled candidates, and stores
/// the identified spectrum. With `reuse_candidates` an existing candidate
/// list is taken as-is instead of re-solving.
pub fn stage_identify(
    cfg: &ExperimentConfig,
    mode: Mode,
    dir: &RunDir,
    reuse_candidates: bool,
) -> Result<()> {
    let model = build_model(&cfg.model)?;
    let sys = linearize(&model)?;
    let bct = sys.feedthrough();
    let set = if reuse_candidates && dir.candidates_path().exists() {
        let meta: CandidateMeta = io::read_json(&dir.candidates_meta_path())?;
        let text = std::fs::read_to_string(dir.candidates_path())?;
        CandidateSet::from_csv(&text, meta.m, meta.m_bar)?
    } else {
        let mus = source_values(cfg, mode, dir)?;
        let set = build_candidate_set(&sys.a, &bct, &mus, DEFAULT_RESIDUAL_TOL)?;
        std::fs::write(dir.candidates_path(), set.to_csv())?;
        io::write_json(
            &dir.candidates_meta_path(),
            &CandidateMeta {
                m: set.m,
                m_bar: set.m_bar,
                sources: mus.len(),
                skipped: set.skipped.len(),
                n_infinite_total: set.n_infinite_total,
            },
        )?;
        set
    };
    let epsilon = cfg.identify.epsilon;
    let outcome = multiplicity_filter(&set, epsilon)?;
    let (identified, meta) = match cfg.identify.method {
        IdentifyMethod::Multiplicity => (
            outcome.identified.clone(),
            IdentifyMeta {
                method: cfg.identify.method,
                epsilon,
                clusters: Some(outcome.report),
                hull: None,
                used_bounding_box: false,
                estimates: None,
            },
        ),
        IdentifyMethod::HullExtend => {
            let ext = hull_extend_filter(&outcome.identified, &set, epsilon)?;
            (
                ext.extended,
                IdentifyMeta {
                    method: cfg.identify.method,
                    epsilon,
                    clusters: Some(outcome.report),
                    hull: Some(ext.hull),
                    used_bounding_box: ext.used_bounding_box,
                    estimates: None,
                },
            )
        }
        IdentifyMethod::RealAxis => {
            let kept = real_axis_fallback(&outcome.identified, &set, epsilon)?;
            (
                kept,
                IdentifyMeta {
                    method: cfg.identify.method,
                    epsilon,
                    clusters: Some(outcome.report),
                    hull: None,
                    used_bounding_box: false,
                    estimates: None,
                },
            )
        }
        IdentifyMethod::HullMoments => {
            let mirrored = mirror_conjugates(&outcome.identified);
            let hull = HullRegion::from_points(&mirrored)?;
            let mut est = hull_moments(&hull);
            if cfg.identify.lambda2_refined {
                est.lambda2_hat = refine_lambda2(&est, &outcome.identified, epsilon);
            }
            (
                outcome.identified.clone(),
                IdentifyMeta {
                    method: cfg.identify.method,
                    epsilon,
                    clusters: Some(outcome.report),
                    hull: Some(hull),
                    used_bounding_box: false,
                    estimates: Some(est),
                },
            )
        }
    };
    io::write_complex_csv(&dir.identified_path(), &identified)?;
    io::write_json(&dir.identify_meta_path(), &meta)
}

/// Folds every stored artifact into one report and writes it.
pub fn stage_report(
    cfg: &ExperimentConfig,
    mode: Mode,
    seed: u64,
    dir: &RunDir,
) -> Result<RunReport> {
    let model = build_model(&cfg.model)?;
    let sys = linearize(&model)?;
    let feasibility = feasibility_check(&sys, cfg.identify.k_max, FEASIBILITY_TOL);
    let cross_terms = match char_poly(&sys.a, &sys.feedthrough()) {
        Ok(poly) => Some(cross_term_diagnostic(&poly)),
        Err(e) => {
            warn!("cross-term diagnostic unavailable: {e}");
            None
        }
    };
    let dmd = match mode {
        Mode::Data => Some(io::read_json::<DmdMeta>(&dir.dmd_meta_path())?),
        Mode::Oracle => None,
    };
    let candidates: CandidateMeta = io::read_json(&dir.candidates_meta_path())?;
    let identify_meta: IdentifyMeta = io::read_json(&dir.identify_meta_path())?;
    let identified = io::read_complex_csv(&dir.identified_path())?;
    let exact_values = io::read_complex_csv(&dir.exact_spectrum_path())?;
    let exact = RealSpectrum::from_values(exact_values.iter().map(|z| z.re).collect());
    let oracle = compare_to_oracle(&identified, &exact, cfg.identify.epsilon);

    let mut notes = vec![
        "Coupling inputs are weighted sums of neighbor-minus-self output differences; \
         all reported eigenvalues follow that sign convention."
            .to_string(),
    ];
    let recursion_moments = match mode {
        Mode::Oracle => {
            let mus = io::read_complex_csv(&dir.jacobian_spectrum_path())?;
            match moments_via_recursion(&mus, &sys, cfg.graph.n, cfg.identify.k_max, FEASIBILITY_TOL)
            {
                Ok(v) => Some(v),
                Err(e) => {
                    warn!("moment recursion skipped: {e}");
                    notes.push(format!("Moment recursion was not applicable: {e}"));
                    None
                }
            }
        }
        Mode::Data => None,
    };
    if mode == Mode::Data {
        notes.push(match cfg.dmd.centering {
            Centering::Final => {
                "Measured series were centered on their final snapshot before embedding."
                    .to_string()
            }
            Centering::None => "Measured series were embedded without centering.".to_string(),
        });
    }
    if cfg.identify.delta.is_some() {
        notes.push("Config key identify.delta is accepted for compatibility and ignored.".into());
    }

    let timestamp_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let report = RunReport {
        schema: 1,
        timestamp_unix,
        mode: mode.as_str().to_string(),
        seed,
        config: cfg.clone(),
        feasibility,
        cross_terms,
        dmd,
        candidates,
        identified,
        clusters: identify_meta.clusters,
        hull: identify_meta.hull,
        hull_moment_estimates: identify_meta.estimates,
        recursion_moments,
        oracle,
        notes,
    };
    io::write_json(&dir.report_path(), &report)?;
    Ok(report)
}

/// Runs every stage in order on one directory. Artifacts written before a
/// failing stage are left in place.
pub fn run_pipeline(
    cfg: &ExperimentConfig,
    mode: Mode,
    seed: u64,
    root: &Path,
) -> Result<RunReport> {
    let dir = RunDir::new(root);
    std::fs::create_dir_all(&dir.root)?;
    io::write_json(&dir.config_path(), cfg)?;
    stage_generate(cfg, seed, &dir).map_err(|e| e.in_stage("generate"))?;
    if mode == Mode::Data {
        stage_simulate(cfg, seed, &dir).map_err(|e| e.in_stage("simulate"))?;
        stage_dmd(cfg, &dir).map_err(|e| e.in_stage("dmd"))?;
    }
    stage_identify(cfg, mode, &dir, false).map_err(|e| e.in_stage("identify"))?;
    stage_report(cfg, mode, seed, &dir).map_err(|e| e.in_stage("report"))
}
