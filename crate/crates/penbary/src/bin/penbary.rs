//! Command-line interface: solve problem files, run the q-sweep and
//! stability experiments, generate random problems and self-check the
//! numerical invariants.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use penbary::error::Error;
use penbary::experiments::{
    gen_random_instance, ks_uniform_p_value, records_to_csv, records_to_markdown, run_q_sweep,
    run_stability, ExperimentRecord, GenSpec,
};
use penbary::fileio::{ProblemFile, ReportFile};
use penbary::measures::{
    boltzmann_entropy, q_gaussian_density, tsallis_entropy, GaussianMeasure, QGaussianMeasure,
};
use penbary::objective::{gradient, objective_value, ProblemInstance};
use penbary::solvers::{
    bracket, closed_form_1d, closed_form_two_measures, fixed_point_map, residual, solve,
    SolverConfig, SolverKind,
};
use penbary::spd::{frobenius, LownerInterval, SpdMatrix, SymMatrix};
use penbary::MeasureFamily;

#[derive(Parser)]
#[command(
    name = "penbary",
    version,
    about = "Penalized Wasserstein barycenters of Gaussian, q-Gaussian and phi-exponential measures"
)]
struct Cli {
    #[command(flatten)]
    solver: SolverArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Seed for every random generation in the invocation.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Stopping tolerance on the direction norm.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol: f64,

    #[arg(long, global = true, default_value_t = 100_000)]
    max_iter: usize,

    /// Armijo mesh ratio.
    #[arg(long, global = true, default_value_t = 0.5)]
    xi: f64,

    /// Armijo sufficient-decrease fraction.
    #[arg(long, global = true, default_value_t = 0.1)]
    sigma: f64,

    /// Lower end of the projection box.
    #[arg(long, global = true, default_value_t = 1e-5)]
    alpha_hat: f64,

    /// Upper end of the projection box.
    #[arg(long, global = true, default_value_t = 1e5)]
    beta_hat: f64,

    #[arg(long, global = true, value_enum, default_value_t = SolverChoice::GpmArmijo)]
    solver: SolverChoice,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverChoice {
    GpmArmijo,
    GpmConst,
    FixedPoint,
}

impl From<SolverChoice> for SolverKind {
    fn from(c: SolverChoice) -> Self {
        match c {
            SolverChoice::GpmArmijo => SolverKind::GpmArmijo,
            SolverChoice::GpmConst => SolverKind::GpmConst,
            SolverChoice::FixedPoint => SolverKind::FixedPoint,
        }
    }
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig, Error> {
        Ok(SolverConfig {
            kind: self.solver.into(),
            projection_box: LownerInterval::new(self.alpha_hat, self.beta_hat)?,
            xi: self.xi,
            sigma: self.sigma,
            tol: self.tol,
            max_iter: self.max_iter,
            x0: None,
            damping: 1.0,
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Regime {
    /// n = 100, d = 10, q below 1.
    Low,
    /// n = 50, d = 5, q above 1.
    High,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Markdown,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file and write the report JSON.
    Solve {
        #[arg(long)]
        input: PathBuf,
        /// Report destination; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Sweep q against a base solve and record solution differences.
    SweepQ {
        #[arg(long, value_enum)]
        regime: Regime,
        #[arg(long, default_value_t = 5)]
        datasets: usize,
        /// Base deformation parameter (default 0.5 low / 1.2 high).
        #[arg(long)]
        base_q: Option<f64>,
        /// Swept q values (defaults per regime).
        #[arg(long, value_delimiter = ',')]
        qs: Option<Vec<f64>>,
        /// Penalty strengths (defaults per regime).
        #[arg(long, value_delimiter = ',')]
        gammas: Option<Vec<f64>>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long, default_value_t = 0.1)]
        eiglb: f64,
        #[arg(long, default_value_t = 9.9)]
        eigub: f64,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Perturb inputs by epsilon·I and record solution sensitivity.
    Stability {
        #[arg(long, value_enum)]
        regime: Regime,
        #[arg(long, default_value_t = 5)]
        datasets: usize,
        /// Deformation parameters to test (defaults per regime).
        #[arg(long, value_delimiter = ',')]
        qs: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        gammas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', default_values_t = [1e-2, 1e-3, 1e-5])]
        epsilons: Vec<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long, default_value_t = 0.1)]
        eiglb: f64,
        #[arg(long, default_value_t = 9.9)]
        eigub: f64,
        /// Start perturbed solves from the identity instead of the
        /// unperturbed solution.
        #[arg(long)]
        cold: bool,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Emit a random problem file.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 0.1)]
        eiglb: f64,
        #[arg(long, default_value_t = 9.9)]
        eigub: f64,
        #[arg(long, default_value = "gaussian")]
        family: String,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        gamma: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the built-in invariant suite.
    Validate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidInput(_) | Error::DomainError(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn write_or_print(path: &Option<PathBuf>, content: &str) -> Result<(), Error> {
    match path {
        Some(p) => fs::write(p, content)
            .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn render(records: &[ExperimentRecord], format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => records_to_csv(records),
        OutputFormat::Markdown => records_to_markdown(records),
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    let cfg = cli.solver.config()?;
    let seed = cli.solver.seed;
    match cli.command {
        Command::Solve { input, output } => {
            let text = fs::read_to_string(&input).map_err(|e| {
                Error::InvalidInput(format!("cannot read {}: {e}", input.display()))
            })?;
            let inst = ProblemFile::from_json(&text)?.to_instance()?;
            let report = solve(&inst, &cfg)?;
            let ok = report.converged;
            write_or_print(
                &output,
                &(ReportFile::from_report(&report).to_json() + "\n"),
            )?;
            if ok {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("solver did not converge within {} iterations", cfg.max_iter);
                Ok(ExitCode::from(1))
            }
        }
        Command::SweepQ {
            regime,
            datasets,
            base_q,
            qs,
            gammas,
            n,
            d,
            eiglb,
            eigub,
            format,
            output,
        } => {
            let (def_n, def_d, def_base, def_qs, def_gammas): (
                usize,
                usize,
                f64,
                Vec<f64>,
                Vec<f64>,
            ) = match regime {
                Regime::Low => (
                    100,
                    10,
                    0.5,
                    vec![0.6, 0.7, 0.8, 0.9, 0.99],
                    vec![1.0, 0.1, 0.01],
                ),
                Regime::High => (50, 5, 1.2, vec![1.1, 1.01], vec![0.1, 0.01]),
            };
            let spec = GenSpec::new(n.unwrap_or(def_n), d.unwrap_or(def_d), eiglb, eigub, seed)?;
            let records = run_q_sweep(
                base_q.unwrap_or(def_base),
                &qs.unwrap_or(def_qs),
                &gammas.unwrap_or(def_gammas),
                &spec,
                datasets,
                &cfg,
            )?;
            write_or_print(&output, &render(&records, format))?;
            if records.iter().all(|r| r.converged) {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("some cells did not converge");
                Ok(ExitCode::from(1))
            }
        }
        Command::Stability {
            regime,
            datasets,
            qs,
            gammas,
            epsilons,
            n,
            d,
            eiglb,
            eigub,
            cold,
            format,
            output,
        } => {
            let (def_n, def_d, def_qs, def_gammas): (usize, usize, Vec<f64>, Vec<f64>) =
                match regime {
                    Regime::Low => (
                        100,
                        10,
                        vec![0.6, 0.7, 0.8, 0.9, 0.99],
                        vec![1.0, 0.1, 0.01],
                    ),
                    Regime::High => (50, 5, vec![1.2, 1.1, 1.01], vec![0.1, 0.01]),
                };
            let spec = GenSpec::new(n.unwrap_or(def_n), d.unwrap_or(def_d), eiglb, eigub, seed)?;
            let gammas = gammas.unwrap_or(def_gammas);
            let mut records = Vec::new();
            for q in qs.unwrap_or(def_qs) {
                records.extend(run_stability(
                    q, &gammas, &epsilons, &spec, datasets, &cfg, !cold,
                )?);
            }
            write_or_print(&output, &render(&records, format))?;
            if records.iter().all(|r| r.converged) {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("some cells did not converge");
                Ok(ExitCode::from(1))
            }
        }
        Command::Gen {
            n,
            d,
            eiglb,
            eigub,
            family,
            q,
            gamma,
            output,
        } => {
            let family = match family.as_str() {
                "gaussian" => MeasureFamily::Gaussian,
                "q-gaussian" => MeasureFamily::QGaussian {
                    q: q.ok_or_else(|| {
                        Error::InvalidInput("--family q-gaussian requires --q".into())
                    })?,
                },
                "phi-exponential" => MeasureFamily::PhiExponential,
                other => return Err(Error::InvalidInput(format!(
                    "unknown family \"{other}\" (expected gaussian, q-gaussian or phi-exponential)"
                ))),
            };
            let spec = GenSpec::new(n, d, eiglb, eigub, seed)?;
            let mats = gen_random_instance(&spec)?;
            let inst = ProblemInstance::with_uniform_weights(family, mats, gamma)?;
            write_or_print(
                &output,
                &(ProblemFile::from_instance(&inst).to_json() + "\n"),
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate => {
            let failures = validate(seed, &cfg);
            if failures == 0 {
                println!("all checks passed");
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("{failures} check(s) failed");
                Ok(ExitCode::from(1))
            }
        }
    }
}

/// Built-in invariant suite: each check exercises a closed form against an
/// independent route (quadrature, finite differences, an alternative solver
/// or a sampled self-map).
fn validate(seed: u64, cfg: &SolverConfig) -> usize {
    let mut failures = 0;
    let mut check = |name: &str, result: Result<bool, Error>| {
        match result {
            Ok(true) => println!("PASS {name}"),
            Ok(false) => {
                println!("FAIL {name}");
                failures += 1;
            }
            Err(e) => {
                println!("FAIL {name}: {e}");
                failures += 1;
            }
        };
    };

    check("scalar closed form vs gradient projection", {
        (|| {
            let spec = GenSpec::new(10, 1, 0.1, 9.9, seed)?;
            let mats = gen_random_instance(&spec)?;
            let inst = ProblemInstance::with_uniform_weights(MeasureFamily::Gaussian, mats, 0.1)?;
            let expect = closed_form_1d(&inst)?;
            let report = solve(&inst, cfg)?;
            Ok(report.converged && (report.x_final.as_matrix()[(0, 0)] - expect).abs() <= 1e-6)
        })()
    });

    check("two-measure closed form residual and solver agreement", {
        (|| {
            let spec = GenSpec::new(2, 5, 0.1, 9.9, seed ^ 0x51)?;
            let mats = gen_random_instance(&spec)?;
            let closed = closed_form_two_measures(&mats[0], &mats[1], 0.4, 0.6)?;
            let inst =
                ProblemInstance::new(MeasureFamily::PhiExponential, mats, vec![0.4, 0.6], 0.0)?;
            let res = residual(&closed, &inst)?;
            let report = solve(&inst, cfg)?;
            let gap = (report.x_final.as_matrix() - closed.as_matrix()).norm();
            Ok(res <= 1e-9 && report.converged && gap <= 1e-6)
        })()
    });

    check("gradient matches central finite differences", {
        (|| {
            let spec = GenSpec::new(3, 4, 0.5, 4.0, seed ^ 0x52)?;
            let mats = gen_random_instance(&spec)?;
            let x = gen_random_instance(&GenSpec::new(1, 4, 0.5, 4.0, seed ^ 0x53)?)?.remove(0);
            let h = {
                let probe =
                    gen_random_instance(&GenSpec::new(1, 4, 0.5, 4.0, seed ^ 0x54)?)?.remove(0);
                SymMatrix::new(probe.as_matrix() - SpdMatrix::identity(4).as_matrix() * 2.0)?
            };
            let mut ok = true;
            for family in [
                MeasureFamily::Gaussian,
                MeasureFamily::QGaussian { q: 0.7 },
                MeasureFamily::QGaussian { q: 1.15 },
            ] {
                let inst = ProblemInstance::with_uniform_weights(family, mats.clone(), 0.2)?;
                let g = gradient(&x, &inst)?;
                let (pairing, _) = frobenius(&g, &h)?;
                let eps = 1e-5;
                let xp = SpdMatrix::new(SymMatrix::new(x.as_matrix() + eps * h.as_matrix())?)?;
                let xm = SpdMatrix::new(SymMatrix::new(x.as_matrix() - eps * h.as_matrix())?)?;
                let fd =
                    (objective_value(&xp, &inst)? - objective_value(&xm, &inst)?) / (2.0 * eps);
                ok &= (pairing - fd).abs() <= 1e-5 * (1.0 + fd.abs());
            }
            Ok(ok)
        })()
    });

    check("fixed-point map is a self-map of its bracket", {
        (|| {
            let spec = GenSpec::new(5, 3, 0.1, 9.9, seed ^ 0x55)?;
            let mats = gen_random_instance(&spec)?;
            let inst = ProblemInstance::with_uniform_weights(
                MeasureFamily::QGaussian { q: 0.8 },
                mats,
                0.5,
            )?;
            let (lo, hi) = bracket(&inst)?;
            let mut ok = true;
            for k in 0..10u64 {
                let probe_spec = GenSpec::new(1, 3, lo, (hi - lo).max(1e-9), seed ^ (0x100 + k))?;
                let x = gen_random_instance(&probe_spec)?.remove(0);
                let image = fixed_point_map(&x, &inst)?;
                ok &= image.lambda_min() >= lo * (1.0 - 1e-9)
                    && image.lambda_max() <= hi * (1.0 + 1e-9);
            }
            Ok(ok)
        })()
    });

    check("entropy closed forms match quadrature (d = 1)", {
        (|| {
            use penbary::quad::integrate;
            let g = GaussianMeasure::new(
                nalgebra::DVector::zeros(1),
                SpdMatrix::from_diagonal(&[2.0])?,
            )?;
            let gauss_quad = integrate(
                |t: f64| {
                    let p = (-(t * t) / 4.0).exp() / (4.0 * std::f64::consts::PI).sqrt();
                    if p > 0.0 {
                        p * p.ln()
                    } else {
                        0.0
                    }
                },
                -40.0 * 2.0f64.sqrt(),
                40.0 * 2.0f64.sqrt(),
                1e-10,
            )?;
            let ok_gauss = (boltzmann_entropy(&g) - gauss_quad).abs() <= 1e-6;

            let qm = QGaussianMeasure::new(
                0.5,
                nalgebra::DVector::zeros(1),
                SpdMatrix::from_diagonal(&[1.0])?,
            )?;
            let c = *qm.constants();
            let r = (2.0 / ((1.0 - 0.5) * c.c1)).sqrt();
            let q_quad = integrate(
                |t: f64| {
                    let p =
                        q_gaussian_density(&qm, &nalgebra::DVector::from_element(1, t)).unwrap();
                    if p > 0.0 {
                        p * penbary::measures::q_log(0.5, p).unwrap()
                    } else {
                        0.0
                    }
                },
                -r,
                r,
                1e-10,
            )?;
            Ok(ok_gauss && (tsallis_entropy(&qm) - q_quad).abs() <= 1e-4)
        })()
    });

    check("generated eigenvalue distribution is uniform", {
        (|| {
            let spec = GenSpec::new(200, 10, 0.1, 9.9, seed ^ 0x56)?;
            let mats = gen_random_instance(&spec)?;
            let eigs: Vec<f64> = mats
                .iter()
                .flat_map(|a| a.eigenvalues().iter().copied().collect::<Vec<_>>())
                .collect();
            Ok(ks_uniform_p_value(&eigs, 0.1, 10.0) > 0.01)
        })()
    });

    check("generation is reproducible", {
        (|| {
            let spec = GenSpec::new(3, 6, 0.1, 9.9, seed ^ 0x57)?;
            let a = gen_random_instance(&spec)?;
            let b = gen_random_instance(&spec)?;
            Ok(a.iter()
                .zip(&b)
                .all(|(x, y)| x.as_matrix() == y.as_matrix()))
        })()
    });

    failures
}
