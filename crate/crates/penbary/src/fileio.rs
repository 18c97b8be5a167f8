//! JSON file formats shared by the CLI and the C API.
//!
//! Problem files carry the family, penalty, weights and row-major matrices;
//! report files carry the solution, residual and iteration traces.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::MeasureFamily;
use crate::objective::ProblemInstance;
use crate::solvers::SolveReport;
use crate::spd::{SpdMatrix, SymMatrix};

/// Maximum entrywise asymmetry accepted in an input matrix before it is
/// rejected (accepted matrices are then symmetrized exactly).
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// On-disk problem description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemFile {
    /// "gaussian", "q-gaussian" or "phi-exponential".
    pub family: String,
    /// Deformation parameter, required exactly when `family == "q-gaussian"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    pub gamma: f64,
    pub weights: Vec<f64>,
    /// One row-major d·d block per input matrix.
    pub matrices: Vec<Vec<f64>>,
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("problem file is not valid JSON: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files serialize")
    }

    pub fn family_tag(&self) -> Result<MeasureFamily> {
        match self.family.as_str() {
            "gaussian" => Ok(MeasureFamily::Gaussian),
            "q-gaussian" => {
                let q = self.q.ok_or_else(|| {
                    Error::InvalidInput("family \"q-gaussian\" requires the \"q\" field".into())
                })?;
                Ok(MeasureFamily::QGaussian { q })
            }
            "phi-exponential" => Ok(MeasureFamily::PhiExponential),
            other => Err(Error::InvalidInput(format!(
                "unknown family \"{other}\" (expected gaussian, q-gaussian or phi-exponential)"
            ))),
        }
    }

    /// Validates and converts into a solver-ready instance. Matrices must be
    /// square, symmetric within [`SYMMETRY_TOLERANCE`] and positive definite.
    pub fn to_instance(&self) -> Result<ProblemInstance> {
        let family = self.family_tag()?;
        if self.matrices.is_empty() {
            return Err(Error::InvalidInput("problem file lists no matrices".into()));
        }
        let mut mats = Vec::with_capacity(self.matrices.len());
        for (idx, flat) in self.matrices.iter().enumerate() {
            let len = flat.len();
            let d = (len as f64).sqrt().round() as usize;
            if d == 0 || d * d != len {
                return Err(Error::InvalidInput(format!(
                    "matrix {idx} has {len} entries, which is not a positive square"
                )));
            }
            let m = DMatrix::from_row_slice(d, d, flat);
            let asym = (0..d)
                .flat_map(|i| (0..d).map(move |j| (i, j)))
                .map(|(i, j)| (m[(i, j)] - m[(j, i)]).abs())
                .fold(0.0f64, f64::max);
            if !asym.is_finite() || asym > SYMMETRY_TOLERANCE {
                return Err(Error::InvalidInput(format!(
                    "matrix {idx} is not symmetric (max asymmetry {asym:e})"
                )));
            }
            mats.push(SpdMatrix::new(SymMatrix::new(m)?)?);
        }
        ProblemInstance::new(family, mats, self.weights.clone(), self.gamma)
    }

    pub fn from_instance(inst: &ProblemInstance) -> Self {
        let (family, q) = match inst.family() {
            MeasureFamily::Gaussian => ("gaussian", None),
            MeasureFamily::QGaussian { q } => ("q-gaussian", Some(q)),
            MeasureFamily::PhiExponential => ("phi-exponential", None),
        };
        let matrices = inst
            .matrices()
            .iter()
            .map(|a| a.as_matrix().transpose().as_slice().to_vec())
            .collect();
        Self {
            family: family.to_string(),
            q,
            gamma: inst.gamma(),
            weights: inst.weights().to_vec(),
            matrices,
        }
    }
}

/// On-disk solve report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFile {
    /// Row-major d·d solution matrix.
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub direction_norms: Vec<f64>,
    /// Objective value per visited iterate.
    pub objective: Vec<f64>,
    pub step_sizes: Vec<f64>,
    pub wall_time_s: f64,
    pub convexity_warning: bool,
}

impl ReportFile {
    pub fn from_report(report: &SolveReport) -> Self {
        Self {
            x: report.x_final.as_matrix().transpose().as_slice().to_vec(),
            residual: report.residual_norm,
            iterations: report.iterations,
            converged: report.converged,
            direction_norms: report.direction_norms.clone(),
            objective: report.objective_trace.clone(),
            step_sizes: report.step_sizes.clone(),
            wall_time_s: report.wall_time.as_secs_f64(),
            convexity_warning: report.convexity_warning,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report files serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("report file is not valid JSON: {e}")))
    }
}
