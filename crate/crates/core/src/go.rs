//! Geodesic orbit test: a metric with endomorphism `A` is g.o. iff for every
//! `X ∈ m` some `a ∈ h` solves `[a + X, AX] = 0`. The equation is linear in
//! `a`, so each probe is a least-squares problem.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lie::{BasisLabel, Element, Family};
use crate::linalg;
use crate::metric::{diagonal_metric, EigMap, MetricOperator};
use crate::space::{decompose, Decomposition, SpaceSpec, SubmoduleKind};
use crate::structure::{derive_constraints, EigenvalueClasses};

/// Relative singular-value cutoff for the least-squares solve.
pub const LSTSQ_RTOL: f64 = 1e-12;

/// Residual above which a refuted grid metric counts as clearly failing.
pub const FAIL_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub label: String,
    /// Orthonormal `m`-coordinates.
    pub x: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    pub deterministic: Vec<Probe>,
    pub random: Vec<Probe>,
    pub seed: u64,
}

impl ProbeSet {
    /// Every frame vector of every fine module, every sum of two frame
    /// vectors from distinct fine modules, and `samples` Gaussian vectors.
    pub fn new(dec: &Decomposition, samples: usize, seed: u64) -> Self {
        let mut deterministic = Vec::new();
        let frames: Vec<(String, DVector<f64>)> = dec
            .fine_catalog()
            .iter()
            .flat_map(|s| {
                s.frame_m()
                    .column_iter()
                    .zip(&s.basis_labels)
                    .map(|(c, l)| (format!("{}:{l}", s.id), c.into_owned()))
                    .collect::<Vec<_>>()
            })
            .collect();
        let owner: Vec<&str> = frames.iter().map(|(l, _)| l.split(':').next().unwrap_or("")).collect();
        for (l, v) in &frames {
            deterministic.push(Probe { label: l.clone(), x: v.clone() });
        }
        for i in 0..frames.len() {
            for j in i + 1..frames.len() {
                if owner[i] != owner[j] {
                    deterministic.push(Probe {
                        label: format!("{} + {}", frames[i].0, frames[j].0),
                        x: &frames[i].1 + &frames[j].1,
                    });
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = dec.dim_m();
        let random = (0..samples)
            .map(|k| Probe {
                label: format!("random#{k}"),
                x: DVector::from_iterator(dim, (0..dim).map(|_| StandardNormal.sample(&mut rng))),
            })
            .collect();
        ProbeSet { deterministic, random, seed }
    }

    pub fn only(probes: Vec<Probe>) -> Self {
        ProbeSet { deterministic: probes, random: Vec::new(), seed: 0 }
    }

    pub fn len(&self) -> usize {
        self.deterministic.len() + self.random.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &Probe> {
        self.deterministic.iter().chain(&self.random)
    }
}

#[derive(Debug, Clone)]
pub struct GeodesicResidual {
    /// Minimum-norm least-squares solution in `h`.
    pub a_star: Element,
    /// `‖[a* + X, AX]‖_B / (‖X‖_B² ‖A‖_op)`.
    pub residual: f64,
}

fn operator_norm(a: &MetricOperator) -> f64 {
    a.eigenvalues().iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Returns `(α, relative residual)` with `α` in orthonormal `h` coordinates.
fn solve(dec: &Decomposition, a: &MetricOperator, a_norm: f64, x_m: &DVector<f64>) -> (DVector<f64>, f64) {
    let alg = dec.algebra();
    let xn2 = x_m.norm_squared();
    if xn2 == 0.0 {
        return (DVector::zeros(dec.dim_h()), 0.0);
    }
    let x = dec.embed_m(x_m);
    let y = dec.embed_m(&a.apply(x_m));
    let r = alg.bracket_ortho(&x, &y);
    // [ĥ_k, Y] = -ad(Y) ĥ_k.
    let m = -alg.ad_ortho(&y).select_columns(dec.h_indices());
    let alpha = linalg::min_norm_lstsq(&m, &(-&r), LSTSQ_RTOL);
    let res = (&m * &alpha + &r).norm();
    (alpha, res / (xn2 * a_norm))
}

fn h_element(dec: &Decomposition, alpha: &DVector<f64>) -> Element {
    let mut g = DVector::zeros(dec.algebra().dim());
    for (k, &i) in dec.h_indices().iter().enumerate() {
        g[i] = alpha[k];
    }
    dec.algebra().element_from_ortho(&g)
}

pub fn geodesic_residual(dec: &Decomposition, a: &MetricOperator, x: &Element) -> Result<GeodesicResidual> {
    let x_m = dec.m_coords(x)?;
    let (alpha, residual) = solve(dec, a, operator_norm(a), &x_m);
    Ok(GeodesicResidual { a_star: h_element(dec, &alpha), residual })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeResult {
    pub label: String,
    pub residual: f64,
    /// `a*` in the basis of `h`.
    pub a_coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub probe: String,
    pub residual: f64,
    pub labels: Vec<String>,
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VerdictKind {
    /// Every probe passed; sampling cannot prove the universal statement.
    #[serde(rename = "EVIDENCE")]
    Evidence,
    /// A probe with no solution `a`; the least-squares minimum is global.
    #[serde(rename = "CERTIFICATE")]
    Certificate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoVerdict {
    pub tol: f64,
    pub deterministic_probes: usize,
    pub random_probes: usize,
    pub seed: u64,
    pub max_relative_residual: f64,
    pub pass: bool,
    pub kind: VerdictKind,
    pub counterexample: Option<Counterexample>,
    #[serde(skip)]
    pub per_probe: Vec<ProbeResult>,
}

/// Sparse unnormalized-basis expansion of an element of `m`.
fn expansion(dec: &Decomposition, x_m: &DVector<f64>) -> (Vec<String>, Vec<f64>) {
    let el = dec.element_from_m(x_m);
    let mut labels = Vec::new();
    let mut coeffs = Vec::new();
    for (l, &k) in dec.m_labels().iter().zip(dec.m_indices()) {
        let c = el.coeffs()[k];
        if c.abs() > 1e-14 {
            labels.push(l.to_string());
            coeffs.push(c);
        }
    }
    (labels, coeffs)
}

pub fn check_go(dec: &Decomposition, a: &MetricOperator, probes: &ProbeSet, tol: f64) -> Result<GoVerdict> {
    if probes.is_empty() {
        return Err(Error::Configuration("probe set is empty".into()));
    }
    if a.dim() != dec.dim_m() || a.spec() != dec.spec() {
        return Err(Error::Shape { expected: dec.spec().to_string(), got: a.spec().to_string() });
    }
    let a_norm = operator_norm(a);
    let all: Vec<&Probe> = probes.iter().collect();
    let per_probe: Vec<ProbeResult> = all
        .par_iter()
        .map(|p| {
            let (alpha, residual) = solve(dec, a, a_norm, &p.x);
            let a_coeffs = h_element(dec, &alpha);
            let a_coeffs = dec.h_indices().iter().map(|&i| a_coeffs.coeffs()[i]).collect();
            ProbeResult { label: p.label.clone(), residual, a_coeffs }
        })
        .collect();
    let mut worst = 0;
    for (i, r) in per_probe.iter().enumerate() {
        if r.residual > per_probe[worst].residual || r.residual.is_nan() {
            worst = i;
        }
    }
    let max = per_probe[worst].residual;
    let pass = max < tol;
    let counterexample = (!pass).then(|| {
        let (labels, coeffs) = expansion(dec, &all[worst].x);
        Counterexample { probe: all[worst].label.clone(), residual: max, labels, coeffs }
    });
    Ok(GoVerdict {
        tol,
        deterministic_probes: probes.deterministic.len(),
        random_probes: probes.random.len(),
        seed: probes.seed,
        max_relative_residual: max,
        pass,
        kind: if pass { VerdictKind::Evidence } else { VerdictKind::Certificate },
        counterexample,
        per_probe,
    })
}

/// `Σ_{i ∈ range} f_ii`.
fn diag_sum(dec: &Decomposition, range: std::ops::RangeInclusive<usize>) -> Result<Element> {
    let terms: Vec<(f64, BasisLabel)> = range.map(|i| (1.0, BasisLabel::f(i, i))).collect();
    dec.algebra().combination(&terms)
}

/// For `g_μ` on a unitary quotient: `a = r(1-μ) Σ_{i>n0} f_ii`, where
/// `r Σ_{i≤n0} f_ii` is the `z(n)` component of `X`.
pub fn explicit_witness(dec: &Decomposition, mu: f64, x: &Element) -> Result<Element> {
    let spec = dec.spec();
    if spec.family() != Family::U || spec.n0() == 0 {
        return Err(Error::UnsupportedFamily(format!("explicit witness needs a unitary quotient with n0 >= 1, got {spec}")));
    }
    dec.m_coords(x)?;
    let z = diag_sum(dec, 1..=spec.n0())?;
    let r = crate::lie::inner(x, &z)? / crate::lie::inner(&z, &z)?;
    Ok(diag_sum(dec, spec.n0() + 1..=spec.n())?.scaled(r * (1.0 - mu)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Theorem {
    #[serde(rename = "so-normal")]
    SoNormal,
    #[serde(rename = "u-gmu")]
    UGmu,
}

impl Theorem {
    pub fn family(self) -> Family {
        match self {
            Theorem::SoNormal => Family::SO,
            Theorem::UGmu => Family::U,
        }
    }
}

impl std::str::FromStr for Theorem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "so-normal" => Ok(Theorem::SoNormal),
            "u-gmu" => Ok(Theorem::UGmu),
            _ => Err(Error::Parse(format!("unknown theorem {s:?} (so-normal | u-gmu)"))),
        }
    }
}

impl std::fmt::Display for Theorem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Theorem::SoNormal => "so-normal",
            Theorem::UGmu => "u-gmu",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterGrid {
    /// Scalars `λ` (SO) or `μ` (U) for the metrics predicted to pass.
    pub scales: Vec<f64>,
    /// Perturbation factors applied to one fine module at a time, cycled.
    pub ratios: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
}

impl ParameterGrid {
    pub fn default_for(theorem: Theorem) -> Self {
        let scales = match theorem {
            Theorem::SoNormal => vec![1.0],
            Theorem::UGmu => vec![0.25, 1.0, 4.0],
        };
        ParameterGrid { scales, ratios: vec![2.0, 0.5], samples: 1000, seed: 0, tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremEntry {
    pub label: String,
    pub eigenvalues: EigMap,
    pub expected_pass: bool,
    pub observed_pass: bool,
    pub max_relative_residual: f64,
    pub constant_on_classes: bool,
    pub counterexample: Option<Counterexample>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremReport {
    pub spec: String,
    pub theorem: Theorem,
    pub grid: ParameterGrid,
    pub classes: EigenvalueClasses,
    pub entries: Vec<TheoremEntry>,
    /// Observed pattern matches the theorem and the derived classes.
    pub pass: bool,
}

fn grid_metrics(dec: &Decomposition, theorem: Theorem, grid: &ParameterGrid) -> Result<Vec<(String, EigMap)>> {
    if grid.scales.is_empty() || grid.ratios.is_empty() {
        return Err(Error::Configuration("grid needs at least one scale and one ratio".into()));
    }
    for &v in grid.scales.iter().chain(&grid.ratios) {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Configuration(format!("grid value {v} must be positive")));
        }
    }
    let fine = dec.fine_catalog();
    let center = fine.iter().find(|s| s.kind == SubmoduleKind::CenterN).map(|s| s.id.clone());
    let mut out = Vec::new();
    for &s in &grid.scales {
        match (&center, theorem) {
            (Some(z), Theorem::UGmu) => out.push((format!("gmu:{s}"), EigMap::new().with(z, s).with("*", 1.0))),
            _ => out.push((format!("normal:{s}"), EigMap::new().with("*", s))),
        }
    }
    let perturbable: Vec<&str> = fine.iter().filter(|s| Some(&s.id) != center.as_ref()).map(|s| s.id.as_str()).collect();
    if perturbable.len() > 1 {
        for (k, id) in perturbable.iter().enumerate() {
            let r = grid.ratios[k % grid.ratios.len()];
            out.push((format!("{id}*{r}"), EigMap::new().with(id, r).with("*", 1.0)));
        }
        if let (Some(z), Theorem::UGmu) = (&center, theorem) {
            let mu = *grid.scales.last().expect("nonempty");
            let r = grid.ratios[0];
            out.push((
                format!("gmu:{mu}+{}*{r}", perturbable[0]),
                EigMap::new().with(z, mu).with(perturbable[0], r).with("*", 1.0),
            ));
        }
    }
    Ok(out)
}

fn theorem_predicts_pass(dec: &Decomposition, theorem: Theorem, values: &[f64]) -> bool {
    let fine = dec.fine_catalog();
    let rest: Vec<f64> = fine
        .iter()
        .zip(values)
        .filter(|(s, _)| theorem == Theorem::SoNormal || s.kind != SubmoduleKind::CenterN)
        .map(|(_, &v)| v)
        .collect();
    rest.windows(2).all(|w| w[0] == w[1])
}

fn constant_on_classes(dec: &Decomposition, classes: &EigenvalueClasses, values: &[f64]) -> bool {
    let pos = |id: &str| dec.fine_catalog().iter().position(|s| s.id == id).expect("catalog id");
    classes.classes.iter().all(|c| c.iter().all(|id| values[pos(id)] == values[pos(&c[0])]))
}

/// Runs the grid of diagonal metrics and compares pass/fail with the
/// theorem's prediction and with the classes from [`derive_constraints`].
pub fn reproduce_theorem(spec: &SpaceSpec, theorem: Theorem, grid: &ParameterGrid) -> Result<TheoremReport> {
    if spec.family() != theorem.family() {
        return Err(Error::Configuration(format!("theorem {theorem} does not apply to {spec}")));
    }
    let dec = decompose(spec)?;
    let classes = derive_constraints(&dec)?;
    let probes = ProbeSet::new(&dec, grid.samples, grid.seed);
    let mut entries = Vec::new();
    for (label, eig) in grid_metrics(&dec, theorem, grid)? {
        let values = eig.resolve(&dec)?;
        let a = diagonal_metric(&dec, &eig)?;
        let v = check_go(&dec, &a, &probes, grid.tol)?;
        entries.push(TheoremEntry {
            label,
            eigenvalues: eig,
            expected_pass: theorem_predicts_pass(&dec, theorem, &values),
            observed_pass: v.pass,
            max_relative_residual: v.max_relative_residual,
            constant_on_classes: constant_on_classes(&dec, &classes, &values),
            counterexample: v.counterexample,
        });
    }
    let pass = entries.iter().all(|e| {
        e.expected_pass == e.observed_pass
            && e.expected_pass == e.constant_on_classes
            && (e.observed_pass || e.max_relative_residual > FAIL_THRESHOLD)
    });
    Ok(TheoremReport { spec: spec.to_string(), theorem, grid: grid.clone(), classes, entries, pass })
}
