use nalgebra::{DMatrix, DVector};

use crate::baselines::{PrecisionEstimator, SampleMoments};
use crate::cv::{FoldEvaluator, ScoreDirection};
use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;

/// Feature rows with class labels. Classes are indexed in sorted label order, numeric when
/// every label parses as an integer.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    features: DMatrix<f64>,
    labels: Vec<usize>,
    classes: Vec<String>,
}

fn class_order(labels: &[String]) -> Vec<String> {
    let mut classes: Vec<String> = labels.to_vec();
    if labels.iter().all(|l| l.parse::<i64>().is_ok()) {
        classes.sort_by_key(|l| l.parse::<i64>().unwrap_or_default());
    } else {
        classes.sort();
    }
    classes.dedup();
    classes
}

impl LabeledDataset {
    pub fn new<S: AsRef<str>>(features: DMatrix<f64>, labels: &[S]) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                found: labels.len(),
            });
        }
        if features.ncols() == 0 {
            return Err(Error::Empty("features have no columns"));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let labels: Vec<String> = labels
            .iter()
            .map(|l| l.as_ref().trim().to_string())
            .collect();
        let classes = class_order(&labels);
        let index = labels
            .iter()
            .map(|l| {
                classes
                    .iter()
                    .position(|c| c == l)
                    .expect("label is a class")
            })
            .collect();
        let data = Self {
            features,
            labels: index,
            classes,
        };
        if data.classes.len() < 2 {
            return Err(Error::Invalid("at least two classes are required".into()));
        }
        data.check_counts(&(0..data.len()).collect::<Vec<_>>())?;
        Ok(data)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    /// Class index of every row.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    fn counts(&self, rows: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for &r in rows {
            counts[self.labels[r]] += 1;
        }
        counts
    }

    fn check_counts(&self, rows: &[usize]) -> Result<()> {
        let counts = self.counts(rows);
        if let Some(c) = counts.iter().position(|&k| k == 1) {
            return Err(Error::Invalid(format!(
                "class {} has a single sample",
                self.classes[c]
            )));
        }
        if counts.iter().filter(|&&k| k > 0).count() < 2 {
            return Err(Error::Invalid("at least two classes are required".into()));
        }
        Ok(())
    }
}

/// Class means and the shared precision of a fitted discriminant.
#[derive(Debug, Clone)]
pub struct LdaModel {
    /// Mean of each class present in the training rows.
    pub means: ClassMeans,
    pub precision: SymmetricMatrix,
    pub classes: Vec<String>,
}

/// Mean of each class present, keyed by class index.
pub type ClassMeans = Vec<(usize, DVector<f64>)>;

/// Class means and the pooled within-class covariance with divisor `n − |classes|`.
pub fn pooled_moments(
    data: &LabeledDataset,
    rows: &[usize],
) -> Result<(ClassMeans, SampleMoments)> {
    data.check_counts(rows)?;
    let counts = data.counts(rows);
    let p = data.dim();
    let mut sums = vec![DVector::zeros(p); counts.len()];
    for &r in rows {
        sums[data.labels[r]] += data.features.row(r).transpose();
    }
    let means: Vec<(usize, DVector<f64>)> = sums
        .into_iter()
        .enumerate()
        .filter(|(c, _)| counts[*c] > 0)
        .map(|(c, s)| (c, s / counts[c] as f64))
        .collect();
    let mut scatter = DMatrix::zeros(p, p);
    for &r in rows {
        let mean = &means
            .iter()
            .find(|(c, _)| *c == data.labels[r])
            .expect("present")
            .1;
        let resid = data.features.row(r).transpose() - mean;
        scatter += &resid * resid.transpose();
    }
    let divisor = (rows.len() - means.len()) as f64;
    let overall = data.features.select_rows(rows).row_mean().transpose();
    let moments = SampleMoments {
        mean: overall,
        covariance: SymmetricMatrix::symmetrize(&(scatter / divisor))?,
        sample_count: rows.len(),
        divisor,
    };
    Ok((means, moments))
}

pub fn lda_fit_rows(
    data: &LabeledDataset,
    rows: &[usize],
    estimator: &dyn PrecisionEstimator,
    param: f64,
) -> Result<LdaModel> {
    let (means, moments) = pooled_moments(data, rows)?;
    Ok(LdaModel {
        means,
        precision: estimator.estimate(&moments, param)?,
        classes: data.classes.clone(),
    })
}

pub fn lda_fit(
    data: &LabeledDataset,
    estimator: &dyn PrecisionEstimator,
    param: f64,
) -> Result<LdaModel> {
    lda_fit_rows(data, &(0..data.len()).collect::<Vec<_>>(), estimator, param)
}

/// Class index minimizing `(z − μ_y)ᵀ X̂ (z − μ_y)`; ties go to the smaller index.
pub fn lda_classify(model: &LdaModel, z: &DVector<f64>) -> Result<usize> {
    if z.len() != model.precision.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.precision.dim(),
            found: z.len(),
        });
    }
    let mut best = (usize::MAX, f64::INFINITY);
    for (c, mean) in &model.means {
        let d = z - mean;
        let score = d.dot(&(model.precision.as_matrix() * &d));
        if score < best.1 || (score == best.1 && *c < best.0) {
            best = (*c, score);
        }
    }
    if best.0 == usize::MAX {
        return Err(Error::NonFinite);
    }
    Ok(best.0)
}

/// Fraction of `rows` classified correctly.
pub fn accuracy(model: &LdaModel, data: &LabeledDataset, rows: &[usize]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::Empty("no rows to classify"));
    }
    let mut correct = 0usize;
    for &r in rows {
        if lda_classify(model, &data.features.row(r).transpose())? == data.labels[r] {
            correct += 1;
        }
    }
    Ok(correct as f64 / rows.len() as f64)
}

/// Cross-validation score: held-out classification accuracy.
pub struct LdaEvaluator<'a> {
    pub data: &'a LabeledDataset,
    pub estimator: &'a dyn PrecisionEstimator,
}

impl FoldEvaluator for LdaEvaluator<'_> {
    fn direction(&self) -> ScoreDirection {
        ScoreDirection::Maximize
    }

    fn evaluate(&self, train: &[usize], validation: &[usize], param: f64) -> Result<f64> {
        let model = lda_fit_rows(self.data, train, self.estimator, param)?;
        accuracy(&model, self.data, validation)
    }
}
