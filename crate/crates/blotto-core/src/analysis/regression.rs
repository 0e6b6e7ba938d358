//! Ordinary least squares with heteroskedasticity-robust standard errors,
//! plus the record builder joining tournament outcomes to survey
//! demographics.
//!
//! The solver factors the design once by column-pivoted QR and reuses the
//! factors for the coefficient solve, the leverage values, and the bread of
//! the sandwich covariance.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};
use thiserror::Error;

use crate::analysis::{classify_reasoning_level, LevelLabel};
use crate::ingestion::{Demographics, Education, Employment, FieldOfStudy, Sex};
use crate::tournament::{AgentType, StandingsEntry};

#[derive(Debug, Error)]
pub enum RegressionError {
    #[error("rank-deficient design: column {0:?} is collinear with earlier columns")]
    RankDeficientDesign(String),
    #[error("{n} observations cannot identify {p} coefficients")]
    TooFewObservations { n: usize, p: usize },
}

/// Weighting scheme of the robust covariance sandwich.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub enum HcType {
    /// Raw squared residuals.
    Hc0,
    /// Squared residuals scaled by `n/(n-p)`, the common reporting default.
    #[default]
    Hc1,
    /// Squared residuals divided by `1-h`.
    Hc2,
    /// Squared residuals divided by `(1-h)^2`.
    Hc3,
}

/// One observation: a human participant's points in one tournament joined
/// with their survey answers.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionRecord {
    pub participant_id: String,
    /// Round-robin points `S` in the tournament.
    pub points: f64,
    pub level: LevelLabel,
    pub age: f64,
    pub female: bool,
    pub education: Education,
    pub field: FieldOfStudy,
    pub employment: Employment,
}

/// What to do with strategies that fall outside the level taxonomy (no
/// strong state at all).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub enum UnclassifiedPolicy {
    /// Treat them like the reference category: keep the observation with
    /// every level indicator at zero.
    #[default]
    MergeWithBaseline,
    /// Drop the observation.
    Drop,
}

/// Joins human standings rows to demographics by participant id. Returns
/// the records plus the ids of human participants without survey data, who
/// are skipped.
pub fn build_regression_records(
    standings: &[StandingsEntry],
    demographics: &BTreeMap<String, Demographics>,
    policy: UnclassifiedPolicy,
) -> (Vec<RegressionRecord>, Vec<String>) {
    let mut records = Vec::new();
    let mut missing = Vec::new();
    for e in standings {
        if e.agent_type != AgentType::Human {
            continue;
        }
        let Some(d) = demographics.get(&e.participant_id) else {
            missing.push(e.participant_id.clone());
            continue;
        };
        let level = classify_reasoning_level(&e.allocation).label;
        if level == LevelLabel::Unclassified && policy == UnclassifiedPolicy::Drop {
            continue;
        }
        records.push(RegressionRecord {
            participant_id: e.participant_id.clone(),
            points: e.score(),
            level,
            age: d.age as f64,
            female: d.sex == Sex::Female,
            education: d.education,
            field: d.field,
            employment: d.employment,
        });
    }
    (records, missing)
}

/// Design column names, in matrix order.
pub const DESIGN_COLUMNS: [&str; 15] = [
    "Constant",
    "Level 1",
    "Level 2",
    "Level 3",
    "Level 4",
    "Level 5+",
    "Age",
    "Age squared",
    "Female",
    "Doctoral degree",
    "Secondary education",
    "Economics and management",
    "STEM",
    "Student",
    "Employed",
];

/// Lays records out as a dense design matrix and response vector. Reference
/// categories (level 0 and unclassified, higher education, the
/// humanities/social/other field block, not working) carry no column.
pub fn design_matrix(records: &[RegressionRecord]) -> (DMatrix<f64>, DVector<f64>, Vec<String>) {
    let n = records.len();
    let p = DESIGN_COLUMNS.len();
    let mut x = DMatrix::zeros(n, p);
    let mut y = DVector::zeros(n);
    for (i, r) in records.iter().enumerate() {
        y[i] = r.points;
        x[(i, 0)] = 1.0;
        let level_col = match r.level {
            LevelLabel::L0 | LevelLabel::Unclassified => None,
            LevelLabel::L1 => Some(1),
            LevelLabel::L2 => Some(2),
            LevelLabel::L3 => Some(3),
            LevelLabel::L4 => Some(4),
            LevelLabel::L5Plus4 | LevelLabel::L5Plus3 | LevelLabel::L5Plus2 => Some(5),
        };
        if let Some(c) = level_col {
            x[(i, c)] = 1.0;
        }
        x[(i, 6)] = r.age;
        x[(i, 7)] = r.age * r.age;
        x[(i, 8)] = f64::from(r.female);
        match r.education {
            Education::Doctoral => x[(i, 9)] = 1.0,
            Education::Secondary => x[(i, 10)] = 1.0,
            Education::Higher => {}
        }
        match r.field {
            FieldOfStudy::EconManagement => x[(i, 11)] = 1.0,
            FieldOfStudy::Stem => x[(i, 12)] = 1.0,
            FieldOfStudy::HumSocOther => {}
        }
        match r.employment {
            Employment::Student => x[(i, 13)] = 1.0,
            Employment::Working => x[(i, 14)] = 1.0,
            Employment::NotWorking => {}
        }
    }
    (x, y, DESIGN_COLUMNS.iter().map(|s| s.to_string()).collect())
}

/// One fitted coefficient.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub robust_se: f64,
    pub t_value: f64,
    pub p_value: f64,
}

impl Coefficient {
    /// Conventional significance stars: `*` below 10%, `**` below 5%,
    /// `***` below 1%.
    pub fn stars(&self) -> &'static str {
        significance_stars(self.p_value)
    }
}

pub fn significance_stars(p_value: f64) -> &'static str {
    if p_value < 0.01 {
        "***"
    } else if p_value < 0.05 {
        "**"
    } else if p_value < 0.1 {
        "*"
    } else {
        ""
    }
}

/// A fitted model with robust inference and the usual summary statistics.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RegressionFit {
    pub hc: HcType,
    pub coefficients: Vec<Coefficient>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub residual_se: f64,
    pub f_statistic: f64,
    pub f_p_value: f64,
    pub n: usize,
    pub p: usize,
    #[serde(skip)]
    pub residuals: DVector<f64>,
    #[serde(skip)]
    pub fitted: DVector<f64>,
}

impl RegressionFit {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

/// Rank of an upper-triangular factor, by the usual scaled-epsilon cut on
/// its diagonal (column pivoting makes the diagonal non-increasing).
fn triangular_rank(r: &DMatrix<f64>, n: usize) -> usize {
    let lead = r[(0, 0)].abs();
    if lead == 0.0 {
        return 0;
    }
    let tol = lead * f64::EPSILON * n.max(r.ncols()) as f64;
    (0..r.nrows().min(r.ncols()))
        .take_while(|&i| r[(i, i)].abs() > tol)
        .count()
}

/// Finds the first column (in caller order) that adds no rank over its
/// predecessors, to make the rank-deficiency error actionable.
fn first_dependent_column(x: &DMatrix<f64>, names: &[String]) -> String {
    let n = x.nrows();
    let mut prev_rank = 0;
    for j in 0..x.ncols() {
        let prefix = x.columns(0, j + 1).into_owned();
        let rank = triangular_rank(&prefix.col_piv_qr().r(), n);
        if rank == prev_rank {
            return names[j].clone();
        }
        prev_rank = rank;
    }
    // Unreachable when the caller has already established deficiency.
    names.last().cloned().unwrap_or_default()
}

/// Fits `y = X β + ε` by column-pivoted QR and computes an HC sandwich
/// covariance for the coefficients.
pub fn fit_ols(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    names: &[String],
    hc: HcType,
) -> Result<RegressionFit, RegressionError> {
    let n = x.nrows();
    let p = x.ncols();
    assert_eq!(names.len(), p, "one name per design column");
    assert_eq!(y.len(), n, "response length must match the design");
    if n <= p {
        return Err(RegressionError::TooFewObservations { n, p });
    }

    let qr = x.clone().col_piv_qr();
    let r = qr.r();
    if triangular_rank(&r, n) < p {
        return Err(RegressionError::RankDeficientDesign(
            first_dependent_column(x, names),
        ));
    }

    // X·Π = Q·R, so β = Π · R⁻¹ · Qᵀ y, un-permuted back to caller order.
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let qty = qty.rows(0, p).into_owned();
    let mut beta = r
        .solve_upper_triangular(&qty)
        .expect("full-rank triangular factor");
    qr.p().inv_permute_rows(&mut beta);

    let fitted = x * &beta;
    let residuals = y - &fitted;

    // Bread (XᵀX)⁻¹ = Π (RᵀR)⁻¹ Πᵀ via the triangular inverse.
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .expect("full-rank triangular factor");
    let mut bread = &r_inv * r_inv.transpose();
    qr.p().inv_permute_rows(&mut bread);
    qr.p().inv_permute_columns(&mut bread);

    // Leverages from the thin Q: h_i = ‖Q[i,·]‖².
    let q = qr.q();
    let leverage: Vec<f64> = (0..n).map(|i| q.row(i).norm_squared()).collect();

    let omega: Vec<f64> = residuals
        .iter()
        .enumerate()
        .map(|(i, &e)| match hc {
            HcType::Hc0 => e * e,
            HcType::Hc1 => e * e * n as f64 / (n - p) as f64,
            HcType::Hc2 => e * e / (1.0 - leverage[i]),
            HcType::Hc3 => e * e / (1.0 - leverage[i]).powi(2),
        })
        .collect();
    let mut meat = DMatrix::zeros(p, p);
    for i in 0..n {
        let xi = x.row(i).transpose();
        meat.ger(omega[i], &xi, &xi, 1.0);
    }
    let cov = &bread * meat * &bread;

    let df = (n - p) as f64;
    let t_dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    let coefficients = (0..p)
        .map(|j| {
            let estimate = beta[j];
            let robust_se = cov[(j, j)].max(0.0).sqrt();
            let t_value = estimate / robust_se;
            let p_value = 2.0 * (1.0 - t_dist.cdf(t_value.abs()));
            Coefficient {
                name: names[j].clone(),
                estimate,
                robust_se,
                t_value,
                p_value,
            }
        })
        .collect();

    let ss_res: f64 = residuals.iter().map(|e| e * e).sum();
    let y_mean = y.mean();
    let ss_tot: f64 = y.iter().map(|v| (v - y_mean).powi(2)).sum();
    let r_squared = 1.0 - ss_res / ss_tot;
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n as f64 - 1.0) / df;
    let residual_se = (ss_res / df).sqrt();
    let f_statistic = (r_squared / (p as f64 - 1.0)) / ((1.0 - r_squared) / df);
    let f_dist = FisherSnedecor::new(p as f64 - 1.0, df).expect("positive degrees of freedom");
    let f_p_value = 1.0 - f_dist.cdf(f_statistic);

    Ok(RegressionFit {
        hc,
        coefficients,
        r_squared,
        adj_r_squared,
        residual_se,
        f_statistic,
        f_p_value,
        n,
        p,
        residuals,
        fitted,
    })
}

/// Convenience wrapper: records in, fitted model out.
pub fn fit_performance_regression(
    records: &[RegressionRecord],
    hc: HcType,
) -> Result<RegressionFit, RegressionError> {
    let (x, y, names) = design_matrix(records);
    fit_ols(&x, &y, &names, hc)
}
