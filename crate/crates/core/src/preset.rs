//! Serializable problem descriptions and the built-in DC-motor preset.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Result};
use crate::numerics::{DenseMatrix, DenseVector};
use crate::problem::{shift_to_regulation, CostWeights, LinearPlant, MpcProblem, QsrTriple, TrackingShift};

/// Names accepted by [`ProblemSpec::by_name`].
pub const PRESETS: &[&str] = &["dc-motor"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSpec {
    /// Row-major `A_c`.
    pub a_c: Vec<Vec<f64>>,
    /// Row-major `B_c`.
    pub b_c: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateSpec {
    pub q_c: Vec<Vec<f64>>,
    pub s_c: Vec<Vec<f64>>,
    pub r_c: Vec<Vec<f64>>,
    pub delta: f64,
    /// Defaults to `2 λ_min(F)`.
    #[serde(default)]
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub name: String,
    pub plant: PlantSpec,
    pub reference: Vec<f64>,
    pub horizon: usize,
    pub dt: f64,
    pub input_weight: f64,
    pub state_weight: f64,
    #[serde(default)]
    pub terminal_weight: Option<f64>,
    pub certificate: CertificateSpec,
    /// Default case list, in the CLI case grammar.
    #[serde(default)]
    pub cases: Vec<String>,
}

/// Everything needed to simulate and certify one problem.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub plant: LinearPlant,
    pub problem: MpcProblem,
    pub shift: TrackingShift,
    pub qsr: QsrTriple,
    pub delta: f64,
    pub rho: f64,
}

pub fn matrix_from_rows(name: &str, rows: &[Vec<f64>]) -> Result<DenseMatrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(invalid(format!("{name} must be a nonempty matrix")));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(mismatch(format!("{name} has rows of different lengths")));
    }
    Ok(DenseMatrix::from_row_iterator(nrows, ncols, rows.iter().flatten().copied()))
}

impl ProblemSpec {
    /// Armature-current / angular-velocity DC motor tracking `r = (200/3, 5)`
    /// with `N = 30`, `Δt = 0.1 s`, `F = blkdiag(I_N, 1000 I_2N)`.
    pub fn dc_motor() -> Self {
        Self {
            name: "dc-motor".into(),
            plant: PlantSpec {
                a_c: vec![vec![-4.0, -0.03], vec![0.75, -10.0]],
                b_c: vec![vec![2.0], vec![0.0]],
            },
            reference: vec![200.0 / 3.0, 5.0],
            horizon: 30,
            dt: 0.1,
            input_weight: 1.0,
            state_weight: 1000.0,
            terminal_weight: None,
            certificate: CertificateSpec {
                q_c: vec![vec![-4.0, -0.03], vec![0.75, -10.0]],
                s_c: vec![vec![1.0], vec![0.0]],
                r_c: vec![vec![0.0]],
                delta: 1.0,
                rho: Some(2.0),
            },
            cases: vec!["mpc".into(), "impc:10,10".into(), "impc:10,1000".into()],
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "dc-motor" => Ok(Self::dc_motor()),
            other => Err(invalid(format!(
                "unknown preset '{other}' (available: {})",
                PRESETS.join(", ")
            ))),
        }
    }

    pub fn build(&self) -> Result<Experiment> {
        let plant = LinearPlant::new(
            matrix_from_rows("A_c", &self.plant.a_c)?,
            matrix_from_rows("B_c", &self.plant.b_c)?,
        )?;
        let weights = CostWeights {
            input: self.input_weight,
            state: self.state_weight,
            terminal: self.terminal_weight,
        };
        let problem = MpcProblem::new(&plant, self.horizon, self.dt, &weights)?;
        let shift = shift_to_regulation(&plant, &DenseVector::from_vec(self.reference.clone()))?;
        let qsr = QsrTriple::new(
            matrix_from_rows("Q_c", &self.certificate.q_c)?,
            matrix_from_rows("S_c", &self.certificate.s_c)?,
            matrix_from_rows("R_c", &self.certificate.r_c)?,
        )?;
        if qsr.n() != plant.n() || qsr.m() != plant.m() {
            return Err(mismatch("certificate QSR triple does not match the plant dimensions"));
        }
        if !(self.certificate.delta > 0.0 && self.certificate.delta.is_finite()) {
            return Err(invalid(format!("δ must be positive, got {}", self.certificate.delta)));
        }
        let rho = self.certificate.rho.unwrap_or(problem.rho());
        Ok(Experiment { plant, problem, shift, qsr, delta: self.certificate.delta, rho })
    }
}
