//! Invariant metrics on `m`, stored as the metric endomorphism `A` with
//! `<X, Y> = B(AX, Y)`, written in the orthonormal frame of `m`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::{BasisLabel, Family};
use crate::space::{Decomposition, SpaceSpec, SubmoduleKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricTolerances {
    pub symmetry: f64,
    pub eigen_floor: f64,
    pub equivariance: f64,
}

impl Default for MetricTolerances {
    fn default() -> Self {
        MetricTolerances { symmetry: 1e-12, eigen_floor: 1e-12, equivariance: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricOperator {
    spec: SpaceSpec,
    matrix: DMatrix<f64>,
}

impl MetricOperator {
    /// Wraps a raw matrix without validating it.
    pub fn from_matrix(dec: &Decomposition, matrix: DMatrix<f64>) -> Result<Self> {
        let d = dec.dim_m();
        if matrix.shape() != (d, d) {
            return Err(Error::Shape {
                expected: format!("{d}x{d}"),
                got: format!("{}x{}", matrix.nrows(), matrix.ncols()),
            });
        }
        Ok(MetricOperator { spec: dec.spec().clone(), matrix })
    }

    pub fn spec(&self) -> &SpaceSpec {
        &self.spec
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x
    }

    pub fn scaled(&self, c: f64) -> Self {
        MetricOperator { spec: self.spec.clone(), matrix: &self.matrix * c }
    }

    fn check_dec(&self, dec: &Decomposition) -> Result<()> {
        if *dec.spec() != self.spec {
            return Err(Error::Shape { expected: dec.spec().to_string(), got: self.spec.to_string() });
        }
        Ok(())
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let sym = (&self.matrix + self.matrix.transpose()) * 0.5;
        let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Scalar `λ` if `A = λ·Id` within `tol`.
    pub fn as_scalar(&self, tol: f64) -> Option<f64> {
        let lam = self.matrix[(0, 0)];
        let off = (&self.matrix - DMatrix::identity(self.dim(), self.dim()) * lam).amax();
        (off <= tol * lam.abs().max(1.0)).then_some(lam)
    }
}

fn check_positive(what: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::Positivity(format!("{what} = {v}, need a finite positive value")));
    }
    Ok(())
}

pub fn normal_metric(dec: &Decomposition, lam: f64) -> Result<MetricOperator> {
    check_positive("lambda", lam)?;
    let d = dec.dim_m();
    MetricOperator::from_matrix(dec, DMatrix::identity(d, d) * lam)
}

/// Eigenvalue assignment over the fine catalog.
///
/// Keys are fine ids, coarse ids (applied to every fine module they
/// contain) or the default key `*` (alias `rest`) for modules not named
/// otherwise.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EigMap(pub BTreeMap<String, f64>);

pub const DEFAULT_KEYS: [&str; 2] = ["*", "rest"];

impl EigMap {
    pub fn new() -> Self {
        EigMap(BTreeMap::new())
    }

    pub fn with(mut self, id: &str, value: f64) -> Self {
        self.0.insert(id.to_string(), value);
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("eigenvalue map: {e}")))
    }

    /// One value per fine catalog entry, in catalog order.
    pub fn resolve(&self, dec: &Decomposition) -> Result<Vec<f64>> {
        let fine = dec.fine_catalog();
        let mut values: Vec<Option<(f64, &str)>> = vec![None; fine.len()];
        let mut default = None;
        for (key, &v) in &self.0 {
            check_positive(&format!("eigenvalue for {key}"), v)?;
            if DEFAULT_KEYS.contains(&key.as_str()) {
                if default.replace(v).is_some() {
                    return Err(Error::Coverage("more than one default key".into()));
                }
                continue;
            }
            let targets: Vec<usize> = if let Some(p) = fine.iter().position(|s| &s.id == key) {
                vec![p]
            } else if let Some(c) = dec.coarse_catalog().iter().find(|s| &s.id == key) {
                // Fine modules contained in the coarse one.
                fine.iter()
                    .enumerate()
                    .filter(|(_, f)| (c.frame_g().transpose() * f.frame_g()).norm_squared() > 0.5 * f.dim() as f64)
                    .map(|(i, _)| i)
                    .collect()
            } else {
                return Err(Error::Coverage(format!("unknown submodule id {key:?}")));
            };
            for t in targets {
                if let Some((_, prev)) = values[t] {
                    return Err(Error::Coverage(format!("{} assigned by both {prev:?} and {key:?}", fine[t].id)));
                }
                values[t] = Some((v, key));
            }
        }
        values
            .iter()
            .zip(fine)
            .map(|(v, s)| {
                v.map(|(x, _)| x)
                    .or(default)
                    .ok_or_else(|| Error::Coverage(format!("no eigenvalue for {}", s.id)))
            })
            .collect()
    }
}

/// Block-scalar operator `λ_S·Id` on each fine module `S`, validated.
pub fn diagonal_metric(dec: &Decomposition, eig: &EigMap) -> Result<MetricOperator> {
    let values = eig.resolve(dec)?;
    let d = dec.dim_m();
    let mut a = DMatrix::zeros(d, d);
    for (s, v) in dec.fine_catalog().iter().zip(values) {
        a += s.projector_m() * v;
    }
    let op = MetricOperator::from_matrix(dec, a)?;
    let report = validate_metric(dec, &op, &MetricTolerances::default())?;
    if !report.pass {
        return Err(Error::InvalidMetric(report.summary()));
    }
    Ok(op)
}

/// `μ` on `z(n)`, 1 on `su(n0) ⊕ p`.
pub fn gmu_metric(dec: &Decomposition, mu: f64) -> Result<MetricOperator> {
    let spec = dec.spec();
    if spec.family() != Family::U || spec.n0() == 0 {
        return Err(Error::UnsupportedFamily(format!("g_mu needs a unitary quotient with n0 >= 1, got {spec}")));
    }
    check_positive("mu", mu)?;
    let z = dec
        .fine_catalog()
        .iter()
        .find(|s| s.kind == SubmoduleKind::CenterN)
        .expect("z(n) exists when n0 >= 1");
    let d = dec.dim_m();
    let a = DMatrix::identity(d, d) + z.projector_m() * (mu - 1.0);
    MetricOperator::from_matrix(dec, a)
}

/// A general operator as read from JSON: matrix entries row-major in the
/// orthonormal frame `ê = e/|e|_B` of the listed basis vectors of `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOperator {
    pub basis: Vec<String>,
    pub matrix: Vec<f64>,
}

impl RawOperator {
    pub fn from_operator(dec: &Decomposition, op: &MetricOperator) -> Self {
        let basis = dec.m_labels().iter().map(ToString::to_string).collect();
        let matrix = op.matrix().transpose().iter().copied().collect();
        RawOperator { basis, matrix }
    }

    pub fn into_operator(&self, dec: &Decomposition) -> Result<MetricOperator> {
        let d = dec.dim_m();
        if self.basis.len() != d || self.matrix.len() != d * d {
            return Err(Error::Shape {
                expected: format!("{d} basis labels and {} entries", d * d),
                got: format!("{} basis labels and {} entries", self.basis.len(), self.matrix.len()),
            });
        }
        let m_labels = dec.m_labels();
        let mut perm = Vec::with_capacity(d);
        for s in &self.basis {
            let l: BasisLabel = s.parse()?;
            let p = m_labels
                .iter()
                .position(|x| *x == l)
                .ok_or_else(|| Error::Domain(format!("{l} is not a basis vector of m")))?;
            if perm.contains(&p) {
                return Err(Error::Domain(format!("{l} listed twice")));
            }
            perm.push(p);
        }
        let mut a = DMatrix::zeros(d, d);
        for r in 0..d {
            for c in 0..d {
                a[(perm[r], perm[c])] = self.matrix[r * d + c];
            }
        }
        MetricOperator::from_matrix(dec, a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub symmetric: bool,
    pub positive: bool,
    pub equivariant: bool,
    pub symmetry_residual: f64,
    pub min_eigenvalue: f64,
    pub equivariance_residual: f64,
    pub pass: bool,
}

impl ValidationReport {
    pub fn summary(&self) -> String {
        let mut v = Vec::new();
        if !self.symmetric {
            v.push(format!("asymmetry {:.3e}", self.symmetry_residual));
        }
        if !self.positive {
            v.push(format!("smallest eigenvalue {:.3e}", self.min_eigenvalue));
        }
        if !self.equivariant {
            v.push(format!("equivariance residual {:.3e}", self.equivariance_residual));
        }
        if v.is_empty() {
            "ok".into()
        } else {
            v.join(", ")
        }
    }
}

/// Largest `‖ad(a)∘A − A∘ad(a)‖_F` on `m` over the orthonormal basis of `h`.
pub fn equivariance_residual(dec: &Decomposition, a: &DMatrix<f64>) -> f64 {
    dec.h_frame()
        .iter()
        .map(|h| {
            let ad = dec.ad_m(h);
            (&ad * a - a * &ad).norm()
        })
        .fold(0.0, f64::max)
}

pub fn validate_metric(dec: &Decomposition, op: &MetricOperator, tol: &MetricTolerances) -> Result<ValidationReport> {
    op.check_dec(dec)?;
    let a = op.matrix();
    let symmetry_residual = (a - a.transpose()).amax();
    let min_eigenvalue = if a.iter().all(|x| x.is_finite()) { op.eigenvalues()[0] } else { f64::NAN };
    let equivariance_residual = equivariance_residual(dec, a);
    let symmetric = symmetry_residual <= tol.symmetry;
    let positive = min_eigenvalue > tol.eigen_floor;
    let equivariant = equivariance_residual < tol.equivariance;
    Ok(ValidationReport {
        symmetric,
        positive,
        equivariant,
        symmetry_residual,
        min_eigenvalue,
        equivariance_residual,
        pass: symmetric && positive && equivariant,
    })
}
