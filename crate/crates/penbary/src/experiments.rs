//! Deterministic experiment tooling: seeded random instance generation, the
//! q-sweep and perturbation-stability protocols, and record formatting.
//!
//! Determinism contract: identical `(seed, configuration)` produce identical
//! matrices and metrics. Datasets draw from independent substreams
//! (`seed ⊕ dataset index`), so per-dataset work could be distributed without
//! changing any result, and records are assembled in `(q, γ, ε, dataset)`
//! order regardless of execution order.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::measures::MeasureFamily;
use crate::objective::ProblemInstance;
use crate::solvers::{solve, SolveReport, SolverConfig};
use crate::spd::SpdMatrix;

/// Recipe for one batch of random SPD matrices: eigenvalues uniform on
/// `[eiglb, eiglb + eigub]` in a uniformly random orthogonal frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenSpec {
    pub n: usize,
    pub d: usize,
    pub eiglb: f64,
    pub eigub: f64,
    pub seed: u64,
}

impl GenSpec {
    pub fn new(n: usize, d: usize, eiglb: f64, eigub: f64, seed: u64) -> Result<Self> {
        if n < 1 || d < 1 {
            return Err(Error::InvalidInput(format!(
                "need n >= 1 and d >= 1, got n={n}, d={d}"
            )));
        }
        if !(eiglb > 0.0 && eigub > 0.0 && eiglb.is_finite() && eigub.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "eigenvalue window requires eiglb > 0 and eigub > 0, got ({eiglb}, {eigub})"
            )));
        }
        Ok(Self {
            n,
            d,
            eiglb,
            eigub,
            seed,
        })
    }

    /// Default eigenvalue window [0.1, 10.0].
    pub fn with_defaults(n: usize, d: usize, seed: u64) -> Result<Self> {
        Self::new(n, d, 0.1, 9.9, seed)
    }

    /// Substream for one dataset; dataset 0 is the base stream.
    pub fn for_dataset(&self, dataset: usize) -> Self {
        Self {
            seed: self.seed ^ dataset as u64,
            ..*self
        }
    }
}

/// Draws `spec.n` random SPD matrices: `A = Q diag(eiglb + eigub·u) Qᵀ` with
/// Q from the QR factorization of a standard-normal square matrix (sign
/// convention: the triangular factor's diagonal is made positive, so a seed
/// reproduces bitwise-identical output) and u uniform on [0, 1).
pub fn gen_random_instance(spec: &GenSpec) -> Result<Vec<SpdMatrix>> {
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let d = spec.d;
        let raw = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let qr = raw.qr();
        let mut q = qr.q();
        let r = qr.r();
        for j in 0..d {
            if r[(j, j)] < 0.0 {
                let mut col = q.column_mut(j);
                col.neg_mut();
            }
        }
        let eigs: Vec<f64> = (0..d)
            .map(|_| spec.eiglb + spec.eigub * rng.random::<f64>())
            .collect();
        let mut m = DMatrix::zeros(d, d);
        for k in 0..d {
            let col = q.column(k);
            m += eigs[k] * &col * col.transpose();
        }
        out.push(SpdMatrix::from_matrix(m)?);
    }
    Ok(out)
}

/// One experiment cell: the metric plus bookkeeping for the output table.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub q: f64,
    pub gamma: f64,
    /// Perturbation size; 0 for q-sweep records.
    pub epsilon: f64,
    pub dataset: usize,
    /// Frobenius difference (q-sweep) or difference/ε ratio (stability).
    pub metric: f64,
    pub iterations: usize,
    pub runtime_s: f64,
    pub converged: bool,
}

fn q_instance(q: f64, mats: &[SpdMatrix], gamma: f64) -> Result<ProblemInstance> {
    ProblemInstance::with_uniform_weights(MeasureFamily::QGaussian { q }, mats.to_vec(), gamma)
}

/// Q-sweep protocol: per dataset and per γ, solve once at `base_q` and once
/// at each q in `qs`, recording `‖X_base − X_q‖_F`. The same matrices are
/// reused across every (q, γ) combination of a dataset.
pub fn run_q_sweep(
    base_q: f64,
    qs: &[f64],
    gammas: &[f64],
    spec: &GenSpec,
    datasets: usize,
    cfg: &SolverConfig,
) -> Result<Vec<ExperimentRecord>> {
    if datasets == 0 {
        return Err(Error::InvalidInput(
            "at least one dataset is required".into(),
        ));
    }
    let mut keyed: Vec<((usize, usize, usize), ExperimentRecord)> = Vec::new();
    for dataset in 0..datasets {
        let mats = gen_random_instance(&spec.for_dataset(dataset))?;
        for (gi, &gamma) in gammas.iter().enumerate() {
            let base = solve(&q_instance(base_q, &mats, gamma)?, cfg)?;
            for (qi, &q) in qs.iter().enumerate() {
                let report = solve(&q_instance(q, &mats, gamma)?, cfg)?;
                let metric = (report.x_final.as_matrix() - base.x_final.as_matrix()).norm();
                keyed.push((
                    (qi, gi, dataset),
                    ExperimentRecord {
                        q,
                        gamma,
                        epsilon: 0.0,
                        dataset,
                        metric,
                        iterations: report.iterations,
                        runtime_s: report.wall_time.as_secs_f64(),
                        converged: report.converged && base.converged,
                    },
                ));
            }
        }
    }
    keyed.sort_by_key(|(key, _)| *key);
    Ok(keyed.into_iter().map(|(_, r)| r).collect())
}

/// Perturbation-stability protocol at one q: per dataset and per γ, solve the
/// instance, then re-solve with every input shifted to `Aᵢ + ε I` for each ε,
/// recording `‖X_B − X_A‖_F / ε`.
///
/// `warm_start` seeds each perturbed solve at the unperturbed solution; the
/// minimizer is unique, so this changes runtime only.
pub fn run_stability(
    q: f64,
    gammas: &[f64],
    epsilons: &[f64],
    spec: &GenSpec,
    datasets: usize,
    cfg: &SolverConfig,
    warm_start: bool,
) -> Result<Vec<ExperimentRecord>> {
    if datasets == 0 {
        return Err(Error::InvalidInput(
            "at least one dataset is required".into(),
        ));
    }
    if epsilons.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidInput("perturbations must be positive".into()));
    }
    let mut keyed: Vec<((usize, usize, usize), ExperimentRecord)> = Vec::new();
    for dataset in 0..datasets {
        let mats = gen_random_instance(&spec.for_dataset(dataset))?;
        for (gi, &gamma) in gammas.iter().enumerate() {
            let inst_a = q_instance(q, &mats, gamma)?;
            let base = solve(&inst_a, cfg)?;
            for (ei, &eps) in epsilons.iter().enumerate() {
                let inst_b = inst_a.perturbed(eps)?;
                let mut run_cfg = cfg.clone();
                if warm_start {
                    run_cfg.x0 = Some(base.x_final.clone());
                }
                let report = solve(&inst_b, &run_cfg)?;
                let metric = (report.x_final.as_matrix() - base.x_final.as_matrix()).norm() / eps;
                keyed.push((
                    (gi, ei, dataset),
                    ExperimentRecord {
                        q,
                        gamma,
                        epsilon: eps,
                        dataset,
                        metric,
                        iterations: report.iterations,
                        runtime_s: report.wall_time.as_secs_f64(),
                        converged: report.converged && base.converged,
                    },
                ));
            }
        }
    }
    keyed.sort_by_key(|(key, _)| *key);
    Ok(keyed.into_iter().map(|(_, r)| r).collect())
}

/// CSV rendering with the fixed header
/// `q,gamma,epsilon,dataset,metric,iterations,runtime_s`.
pub fn records_to_csv(records: &[ExperimentRecord]) -> String {
    let mut out = String::from("q,gamma,epsilon,dataset,metric,iterations,runtime_s\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{:.6}\n",
            r.q, r.gamma, r.epsilon, r.dataset, r.metric, r.iterations, r.runtime_s
        ));
    }
    out
}

/// Markdown rendering: one table per (γ, ε) group, rows indexed by q and one
/// column per dataset.
pub fn records_to_markdown(records: &[ExperimentRecord]) -> String {
    let mut groups: Vec<(f64, f64)> = Vec::new();
    for r in records {
        if !groups.contains(&(r.gamma, r.epsilon)) {
            groups.push((r.gamma, r.epsilon));
        }
    }
    let datasets = records.iter().map(|r| r.dataset).max().map_or(0, |m| m + 1);
    let mut out = String::new();
    for (gamma, eps) in groups {
        if eps == 0.0 {
            out.push_str(&format!("### gamma = {gamma}\n\n"));
        } else {
            out.push_str(&format!("### gamma = {gamma}, epsilon = {eps}\n\n"));
        }
        out.push_str("| q |");
        for ds in 0..datasets {
            out.push_str(&format!(" dataset {ds} |"));
        }
        out.push('\n');
        out.push_str("|---|");
        for _ in 0..datasets {
            out.push_str("---|");
        }
        out.push('\n');
        let mut qs: Vec<f64> = Vec::new();
        for r in records
            .iter()
            .filter(|r| r.gamma == gamma && r.epsilon == eps)
        {
            if !qs.contains(&r.q) {
                qs.push(r.q);
            }
        }
        for q in qs {
            out.push_str(&format!("| {q} |"));
            for ds in 0..datasets {
                let cell = records
                    .iter()
                    .find(|r| r.gamma == gamma && r.epsilon == eps && r.q == q && r.dataset == ds)
                    .map_or(String::from(" |"), |r| format!(" {:.5} |", r.metric));
                out.push_str(&cell);
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

/// Asymptotic Kolmogorov–Smirnov p-value of the hypothesis that `samples`
/// are uniform on `[lo, hi]`.
pub fn ks_uniform_p_value(samples: &[f64], lo: f64, hi: f64) -> f64 {
    let n = samples.len();
    if n == 0 || hi <= lo {
        return 0.0;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let mut d_stat: f64 = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let cdf = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
        let hi_emp = (i + 1) as f64 / n as f64;
        let lo_emp = i as f64 / n as f64;
        d_stat = d_stat.max((hi_emp - cdf).abs()).max((cdf - lo_emp).abs());
    }
    let sqrt_n = (n as f64).sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d_stat;
    let mut p = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        p += 2.0 * (-1.0f64).powi(k + 1) * (-2.0 * kf * kf * lambda * lambda).exp();
    }
    p.clamp(0.0, 1.0)
}

/// Convenience wrapper tying a solve to a freshly generated instance.
pub fn solve_generated(
    family: MeasureFamily,
    gamma: f64,
    spec: &GenSpec,
    cfg: &SolverConfig,
) -> Result<(ProblemInstance, SolveReport)> {
    let mats = gen_random_instance(spec)?;
    let inst = ProblemInstance::with_uniform_weights(family, mats, gamma)?;
    let report = solve(&inst, cfg)?;
    Ok((inst, report))
}
