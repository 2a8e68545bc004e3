//! The compact classical Lie algebras so(n) and u(n) in the basis
//! `e_ab = E_ab - E_ba`, `f_ab = i(E_ab + E_ba)`, with the invariant inner
//! product `B(X, Y) = -Tr(XY)`.
//!
//! Elements carry real coefficients over the basis together with their
//! complex n×n matrix realisation. Brackets are matrix commutators. For the
//! heavy numerical paths the algebra also keeps a sparse table of structure
//! constants in the B-orthonormal frame `b_k / sqrt(B(b_k, b_k))`; the table
//! itself is built from commutators of the basis matrices.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on skewness accepted by [`Algebra::express`].
pub const SKEW_TOL: f64 = 1e-10;
/// Tolerance on the reconstruction of a matrix from its coefficients.
pub const RECONSTRUCT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "SO")]
    SO,
    #[serde(rename = "U")]
    U,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::SO => write!(f, "SO"),
            Family::U => write!(f, "U"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BasisKind {
    E,
    F,
}

/// `e_{a,b}` (a < b) or `f_{a,b}` (a <= b), 1-based indices.
///
/// The derived ordering is the basis ordering: every `e` before every `f`,
/// then by `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisLabel {
    pub kind: BasisKind,
    pub a: usize,
    pub b: usize,
}

impl BasisLabel {
    pub fn e(a: usize, b: usize) -> Self {
        BasisLabel { kind: BasisKind::E, a, b }
    }

    pub fn f(a: usize, b: usize) -> Self {
        BasisLabel { kind: BasisKind::F, a, b }
    }

    fn validate(&self, family: Family, n: usize) -> Result<()> {
        let in_range = self.a >= 1 && self.b <= n;
        let ordered = match self.kind {
            BasisKind::E => self.a < self.b,
            BasisKind::F => self.a <= self.b && family == Family::U,
        };
        if in_range && ordered {
            Ok(())
        } else {
            Err(Error::Domain(format!("{self} is not a basis label of {family}({n})")))
        }
    }
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            BasisKind::E => 'e',
            BasisKind::F => 'f',
        };
        write!(f, "{k}_{{{},{}}}", self.a, self.b)
    }
}

impl FromStr for BasisLabel {
    type Err = Error;

    /// Accepts `e_{1,2}` as well as the shorthand `e_12` / `e12` for
    /// single-digit indices.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parse(format!("bad basis label {s:?}"));
        let mut chars = s.chars();
        let kind = match chars.next() {
            Some('e') => BasisKind::E,
            Some('f') => BasisKind::F,
            _ => return Err(bad()),
        };
        let rest = chars.as_str().trim_start_matches('_');
        let (a, b) = if let Some(inner) = rest.strip_prefix('{').and_then(|r| r.strip_suffix('}')) {
            let (a, b) = inner.split_once(',').ok_or_else(bad)?;
            (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?)
        } else if rest.len() == 2 && rest.chars().all(|c| c.is_ascii_digit()) {
            let d: Vec<usize> = rest.chars().map(|c| c as usize - '0' as usize).collect();
            (d[0], d[1])
        } else {
            return Err(bad());
        };
        Ok(BasisLabel { kind, a, b })
    }
}

/// so(n) or u(n) with its fixed, lexicographically ordered basis.
pub struct Algebra {
    family: Family,
    n: usize,
    basis: Vec<BasisLabel>,
    gram: Vec<f64>,
    index: HashMap<BasisLabel, usize>,
    // Nonzero entries (row, col, value) of each basis matrix.
    entries: Vec<Vec<(usize, usize, Complex64)>>,
    // Orthonormal-frame structure constants: table[i * dim + j] lists (k, c)
    // with [ê_i, ê_j] = Σ c ê_k.
    table: Vec<Vec<(usize, f64)>>,
}

impl fmt::Debug for Algebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Algebra({})", self.name())
    }
}

impl PartialEq for Algebra {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family && self.n == other.n
    }
}

/// Builds so(n) or u(n). The Gram diagonal is computed from `-Tr(b_k b_k)`.
pub fn build_algebra(family: Family, n: usize) -> Result<Arc<Algebra>> {
    if n < 2 {
        return Err(Error::InvalidDimension(n));
    }
    let mut basis = Vec::new();
    for a in 1..=n {
        for b in a + 1..=n {
            basis.push(BasisLabel::e(a, b));
        }
    }
    if family == Family::U {
        for c in 1..=n {
            for d in c..=n {
                basis.push(BasisLabel::f(c, d));
            }
        }
    }
    basis.sort();

    let i = Complex64::new(0.0, 1.0);
    let one = Complex64::new(1.0, 0.0);
    let entries: Vec<Vec<(usize, usize, Complex64)>> = basis
        .iter()
        .map(|l| {
            let (r, c) = (l.a - 1, l.b - 1);
            match l.kind {
                BasisKind::E => vec![(r, c, one), (c, r, -one)],
                BasisKind::F if r == c => vec![(r, r, 2.0 * i)],
                BasisKind::F => vec![(r, c, i), (c, r, i)],
            }
        })
        .collect();

    let mut alg = Algebra {
        family,
        n,
        index: basis.iter().enumerate().map(|(k, l)| (*l, k)).collect(),
        basis,
        gram: Vec::new(),
        entries,
        table: Vec::new(),
    };
    alg.gram = (0..alg.dim())
        .map(|k| {
            let m = alg.basis_matrix(k);
            -(&m * &m).trace().re
        })
        .collect();
    alg.table = alg.structure_table();
    Ok(Arc::new(alg))
}

impl Algebra {
    pub fn family(&self) -> Family {
        self.family
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn name(&self) -> String {
        match self.family {
            Family::SO => format!("so({})", self.n),
            Family::U => format!("u({})", self.n),
        }
    }

    pub fn basis(&self) -> &[BasisLabel] {
        &self.basis
    }

    /// Diagonal of B over the basis.
    pub fn gram(&self) -> &[f64] {
        &self.gram
    }

    pub fn index_of(&self, label: &BasisLabel) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn basis_matrix(&self, k: usize) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for &(r, c, v) in &self.entries[k] {
            m[(r, c)] += v;
        }
        m
    }

    /// Matrix realisation of a coefficient vector.
    pub fn realize(&self, coeffs: &DVector<f64>) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (k, &x) in coeffs.iter().enumerate() {
            if x != 0.0 {
                for &(r, c, v) in &self.entries[k] {
                    m[(r, c)] += v * x;
                }
            }
        }
        m
    }

    /// Reads coefficients off the entries of a matrix assumed to lie in the
    /// algebra (upper triangle and diagonal).
    fn read_coeffs(&self, m: &DMatrix<Complex64>) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.basis.iter().map(|l| {
                let z = m[(l.a - 1, l.b - 1)];
                match l.kind {
                    BasisKind::E => z.re,
                    BasisKind::F if l.a == l.b => z.im / 2.0,
                    BasisKind::F => z.im,
                }
            }),
        )
    }

    /// Largest entry of `M + Mᴴ`, and for so(n) also of `Im M`.
    pub fn skew_violation(&self, m: &DMatrix<Complex64>) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                worst = worst.max((m[(r, c)] + m[(c, r)].conj()).norm());
                if self.family == Family::SO {
                    worst = worst.max(m[(r, c)].im.abs());
                }
            }
        }
        worst
    }

    /// Coordinates of a matrix in the algebra.
    pub fn express(self: &Arc<Self>, m: &DMatrix<Complex64>) -> Result<Element> {
        if m.shape() != (self.n, self.n) {
            return Err(Error::Shape {
                expected: format!("{0}x{0}", self.n),
                got: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
        let violation = self.skew_violation(m);
        if violation > SKEW_TOL {
            return Err(Error::NotInAlgebra { max_violation: violation });
        }
        let coeffs = self.read_coeffs(m);
        let matrix = self.realize(&coeffs);
        let err = (&matrix - m).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if err > SKEW_TOL.max(RECONSTRUCT_TOL) {
            return Err(Error::NotInAlgebra { max_violation: err });
        }
        Ok(Element { algebra: Arc::clone(self), coeffs, matrix })
    }

    pub fn express_real(self: &Arc<Self>, m: &DMatrix<f64>) -> Result<Element> {
        self.express(&m.map(|x| Complex64::new(x, 0.0)))
    }

    pub fn element(self: &Arc<Self>, coeffs: DVector<f64>) -> Result<Element> {
        if coeffs.len() != self.dim() {
            return Err(Error::Shape { expected: format!("{} coefficients", self.dim()), got: coeffs.len().to_string() });
        }
        let matrix = self.realize(&coeffs);
        Ok(Element { algebra: Arc::clone(self), coeffs, matrix })
    }

    pub fn zero(self: &Arc<Self>) -> Element {
        self.element(DVector::zeros(self.dim())).expect("length matches")
    }

    pub fn basis_element(self: &Arc<Self>, label: BasisLabel) -> Result<Element> {
        label.validate(self.family, self.n)?;
        let k = self.index_of(&label).ok_or_else(|| Error::Domain(format!("unknown label {label}")))?;
        let mut c = DVector::zeros(self.dim());
        c[k] = 1.0;
        self.element(c)
    }

    /// Element from a sparse combination of basis labels.
    pub fn combination(self: &Arc<Self>, terms: &[(f64, BasisLabel)]) -> Result<Element> {
        let mut c = DVector::zeros(self.dim());
        for (x, l) in terms {
            l.validate(self.family, self.n)?;
            c[self.index[l]] += x;
        }
        self.element(c)
    }

    /// Paper coordinates → orthonormal-frame coordinates.
    pub fn to_ortho(&self, coeffs: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.dim(), coeffs.iter().zip(&self.gram).map(|(x, g)| x * g.sqrt()))
    }

    pub fn from_ortho(&self, ortho: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.dim(), ortho.iter().zip(&self.gram).map(|(x, g)| x / g.sqrt()))
    }

    pub fn element_from_ortho(self: &Arc<Self>, ortho: &DVector<f64>) -> Element {
        self.element(self.from_ortho(ortho)).expect("length matches")
    }

    fn structure_table(&self) -> Vec<Vec<(usize, f64)>> {
        let dim = self.dim();
        let mats: Vec<DMatrix<Complex64>> = (0..dim).map(|k| self.basis_matrix(k)).collect();
        let mut table = vec![Vec::new(); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                let comm = &mats[i] * &mats[j] - &mats[j] * &mats[i];
                let c = self.read_coeffs(&comm);
                let scale = 1.0 / (self.gram[i] * self.gram[j]).sqrt();
                table[i * dim + j] = c
                    .iter()
                    .enumerate()
                    .filter(|(_, &x)| x != 0.0)
                    .map(|(k, &x)| (k, x * self.gram[k].sqrt() * scale))
                    .collect();
            }
        }
        table
    }

    /// Bracket in orthonormal coordinates, via the structure table.
    pub fn bracket_ortho(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let dim = self.dim();
        let mut out = DVector::zeros(dim);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &self.table[i * dim..(i + 1) * dim];
            for (j, &yj) in y.iter().enumerate() {
                if yj == 0.0 {
                    continue;
                }
                for &(k, c) in &row[j] {
                    out[k] += c * xi * yj;
                }
            }
        }
        out
    }

    /// Matrix of `ad(x)` in the orthonormal frame (antisymmetric).
    pub fn ad_ortho(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let dim = self.dim();
        let mut m = DMatrix::zeros(dim, dim);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for j in 0..dim {
                for &(k, c) in &self.table[i * dim + j] {
                    m[(k, j)] += c * xi;
                }
            }
        }
        m
    }
}

/// An element of so(n) or u(n): real coefficients plus matrix realisation.
#[derive(Clone)]
pub struct Element {
    algebra: Arc<Algebra>,
    coeffs: DVector<f64>,
    matrix: DMatrix<Complex64>,
}

impl fmt::Debug for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .zip(self.algebra.basis())
            .filter(|(c, _)| c.abs() > 1e-14)
            .map(|(c, l)| format!("{c}·{l}"))
            .collect();
        if terms.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", terms.join(" + "))
        }
    }
}

impl Element {
    pub fn algebra(&self) -> &Arc<Algebra> {
        &self.algebra
    }

    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// Real part of the matrix; exact for so(n).
    pub fn real_matrix(&self) -> DMatrix<f64> {
        self.matrix.map(|z| z.re)
    }

    pub fn ortho(&self) -> DVector<f64> {
        self.algebra.to_ortho(&self.coeffs)
    }

    pub fn coeff(&self, label: BasisLabel) -> f64 {
        self.algebra.index_of(&label).map_or(0.0, |k| self.coeffs[k])
    }

    pub fn norm(&self) -> f64 {
        self.ortho().norm()
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.coeffs.amax() <= tol
    }

    pub fn scaled(&self, s: f64) -> Element {
        Element { algebra: Arc::clone(&self.algebra), coeffs: &self.coeffs * s, matrix: self.matrix.map(|z| z * s) }
    }

    pub fn add(&self, other: &Element) -> Result<Element> {
        same_algebra(self, other)?;
        Ok(Element {
            algebra: Arc::clone(&self.algebra),
            coeffs: &self.coeffs + &other.coeffs,
            matrix: &self.matrix + &other.matrix,
        })
    }

    pub fn sub(&self, other: &Element) -> Result<Element> {
        self.add(&other.scaled(-1.0))
    }

    /// Largest coefficient difference.
    pub fn distance(&self, other: &Element) -> Result<f64> {
        same_algebra(self, other)?;
        Ok((&self.coeffs - &other.coeffs).amax())
    }
}

fn same_algebra(x: &Element, y: &Element) -> Result<()> {
    if *x.algebra == *y.algebra {
        Ok(())
    } else {
        Err(Error::AlgebraMismatch { left: x.algebra.name(), right: y.algebra.name() })
    }
}

/// `[X, Y] = XY - YX`, re-expressed in coordinates.
pub fn bracket(x: &Element, y: &Element) -> Result<Element> {
    same_algebra(x, y)?;
    let comm = &x.matrix * &y.matrix - &y.matrix * &x.matrix;
    let coeffs = x.algebra.read_coeffs(&comm);
    Ok(Element { algebra: Arc::clone(&x.algebra), coeffs, matrix: comm })
}

/// `B(X, Y) = -Tr(XY)`.
pub fn inner(x: &Element, y: &Element) -> Result<f64> {
    same_algebra(x, y)?;
    let t = (&x.matrix * &y.matrix).trace();
    let scale = 1.0 + x.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() * y.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    assert!(t.im.abs() <= 1e-12 * scale, "B(X,Y) has imaginary part {}", t.im);
    Ok(-t.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn so(n: usize) -> Arc<Algebra> {
        build_algebra(Family::SO, n).unwrap()
    }

    fn u(n: usize) -> Arc<Algebra> {
        build_algebra(Family::U, n).unwrap()
    }

    #[test]
    fn dimensions_and_basis_order() {
        let a = so(3);
        assert_eq!(a.dim(), 3);
        assert_eq!(a.basis(), &[BasisLabel::e(1, 2), BasisLabel::e(1, 3), BasisLabel::e(2, 3)]);
        let b = u(2);
        assert_eq!(b.dim(), 4);
        assert_eq!(b.basis(), &[BasisLabel::e(1, 2), BasisLabel::f(1, 1), BasisLabel::f(1, 2), BasisLabel::f(2, 2)]);
        for n in 2..8 {
            assert_eq!(so(n).dim(), n * (n - 1) / 2);
            assert_eq!(u(n).dim(), n * n);
        }
    }

    #[test]
    fn rejects_small_n() {
        assert_eq!(build_algebra(Family::SO, 1).unwrap_err(), Error::InvalidDimension(1));
        assert!(build_algebra(Family::U, 0).is_err());
    }

    #[test]
    fn gram_entries() {
        let b = u(3);
        for (l, g) in b.basis().iter().zip(b.gram()) {
            let expected = if l.kind == BasisKind::F && l.a == l.b { 4.0 } else { 2.0 };
            assert_eq!(*g, expected, "{l}");
        }
        assert!(so(5).gram().iter().all(|&g| g == 2.0));
    }

    #[test]
    fn bracket_examples() {
        let a = so(3);
        let e = |i, j| a.basis_element(BasisLabel::e(i, j)).unwrap();
        let r = bracket(&e(1, 2), &e(2, 3)).unwrap();
        assert_eq!(r.distance(&e(1, 3)).unwrap(), 0.0);
        let r = bracket(&e(1, 2), &e(1, 3)).unwrap();
        assert_eq!(r.distance(&e(2, 3).scaled(-1.0)).unwrap(), 0.0);

        let b = u(2);
        let f11 = b.basis_element(BasisLabel::f(1, 1)).unwrap();
        let e12 = b.basis_element(BasisLabel::e(1, 2)).unwrap();
        let f12 = b.basis_element(BasisLabel::f(1, 2)).unwrap();
        let r = bracket(&f11, &e12).unwrap();
        assert!(r.distance(&f12.scaled(2.0)).unwrap() < 1e-15);
    }

    #[test]
    fn mismatched_algebras() {
        let x = so(3).zero();
        let y = so(4).zero();
        assert!(matches!(bracket(&x, &y), Err(Error::AlgebraMismatch { .. })));
        assert!(matches!(inner(&x, &y), Err(Error::AlgebraMismatch { .. })));
        // Independently built copies of the same algebra are compatible.
        assert!(bracket(&so(3).zero(), &so(3).zero()).is_ok());
    }

    #[test]
    fn inner_examples() {
        let a = so(4);
        let e12 = a.basis_element(BasisLabel::e(1, 2)).unwrap();
        let e13 = a.basis_element(BasisLabel::e(1, 3)).unwrap();
        assert_eq!(inner(&e12, &e12).unwrap(), 2.0);
        assert_eq!(inner(&e12, &e13).unwrap(), 0.0);
        let b = u(2);
        let x = b.combination(&[(1.0, BasisLabel::e(1, 2)), (1.0, BasisLabel::f(1, 1))]).unwrap();
        assert!((inner(&x, &x).unwrap() - 6.0).abs() < 1e-14);
    }

    #[test]
    fn express_examples() {
        let a = so(4);
        let z = a.express_real(&DMatrix::zeros(4, 4)).unwrap();
        assert!(z.is_zero(0.0));
        let e13 = a.basis_element(BasisLabel::e(1, 3)).unwrap();
        let back = a.express(e13.matrix()).unwrap();
        assert_eq!(back.coeff(BasisLabel::e(1, 3)), 1.0);
        assert_eq!(back.coeffs().sum(), 1.0);

        let b = u(3);
        let x = b.combination(&[(3.0, BasisLabel::e(1, 2)), (-1.0, BasisLabel::f(2, 2))]).unwrap();
        let back = b.express(x.matrix()).unwrap();
        assert_eq!(back.coeffs()[0], 3.0);
        assert_eq!(back.coeff(BasisLabel::f(2, 2)), -1.0);
        assert_eq!(back.coeffs().iter().filter(|c| **c != 0.0).count(), 2);
    }

    #[test]
    fn express_rejects_non_skew() {
        let a = so(3);
        let mut m = DMatrix::zeros(3, 3);
        m[(0, 1)] = 1.0;
        match a.express_real(&m) {
            Err(Error::NotInAlgebra { max_violation }) => assert_eq!(max_violation, 1.0),
            other => panic!("unexpected {other:?}"),
        }
        // Imaginary entries are outside so(n) but fine in u(n).
        let mut c = DMatrix::zeros(3, 3);
        c[(0, 0)] = Complex64::new(0.0, 1.0);
        assert!(a.express(&c).is_err());
        assert!(u(3).express(&c).is_ok());
    }

    #[test]
    fn basis_is_b_orthogonal() {
        for alg in [so(5), u(4)] {
            for i in 0..alg.dim() {
                for j in 0..alg.dim() {
                    let x = alg.basis_element(alg.basis()[i]).unwrap();
                    let y = alg.basis_element(alg.basis()[j]).unwrap();
                    let b = inner(&x, &y).unwrap();
                    if i != j {
                        assert_eq!(b, 0.0);
                    } else {
                        assert_eq!(b, alg.gram()[i]);
                    }
                }
            }
        }
    }

    #[test]
    fn antisymmetry_exact_on_basis_pairs() {
        for n in 2..=8 {
            for alg in [so(n), u(n.min(5))] {
                let els: Vec<Element> = alg.basis().iter().map(|l| alg.basis_element(*l).unwrap()).collect();
                for x in &els {
                    for y in &els {
                        let s = bracket(x, y).unwrap().add(&bracket(y, x).unwrap()).unwrap();
                        assert_eq!(s.coeffs().amax(), 0.0);
                    }
                }
            }
        }
    }

    // Corrected form of the printed u(n) bracket relations, with
    // e_ab = -e_ba, e_aa = 0, f_ab = f_ba. The middle relation is printed with
    // a δ_ac f_bc term; the commutator gives δ_ac f_bd.
    #[test]
    fn u_bracket_relations_cross_check() {
        let n = 4;
        let alg = u(n);
        let e = |a: usize, b: usize| -> Element {
            if a == b {
                alg.zero()
            } else if a < b {
                alg.basis_element(BasisLabel::e(a, b)).unwrap()
            } else {
                alg.basis_element(BasisLabel::e(b, a)).unwrap().scaled(-1.0)
            }
        };
        let f = |a: usize, b: usize| alg.basis_element(BasisLabel::f(a.min(b), a.max(b))).unwrap();
        let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        let lin = |terms: Vec<(f64, Element)>| {
            terms.into_iter().fold(alg.zero(), |acc, (c, x)| acc.add(&x.scaled(c)).unwrap())
        };
        for a in 1..=n {
            for b in 1..=n {
                for c in 1..=n {
                    for dd in 1..=n {
                        let ee = lin(vec![(d(b, c), e(a, dd)), (-d(a, dd), e(c, b)), (-d(a, c), e(b, dd)), (-d(b, dd), e(a, c))]);
                        assert!(bracket(&e(a, b), &e(c, dd)).unwrap().distance(&ee).unwrap() < 1e-14);
                        let fe = lin(vec![(d(b, c), f(a, dd)), (-d(a, dd), f(c, b)), (d(a, c), f(b, dd)), (-d(b, dd), f(a, c))]);
                        assert!(bracket(&f(a, b), &e(c, dd)).unwrap().distance(&fe).unwrap() < 1e-14);
                        let ff = lin(vec![(-d(b, c), e(a, dd)), (d(a, dd), e(c, b)), (-d(a, c), e(b, dd)), (-d(b, dd), e(a, c))]);
                        assert!(bracket(&f(a, b), &f(c, dd)).unwrap().distance(&ff).unwrap() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn table_matches_matrix_commutator() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for alg in [so(6), u(4)] {
            for _ in 0..50 {
                let x = alg.element(DVector::from_fn(alg.dim(), |_, _| rng.random_range(-1.0..1.0))).unwrap();
                let y = alg.element(DVector::from_fn(alg.dim(), |_, _| rng.random_range(-1.0..1.0))).unwrap();
                let via_matrix = bracket(&x, &y).unwrap().ortho();
                let via_table = alg.bracket_ortho(&x.ortho(), &y.ortho());
                assert!((via_matrix - via_table).amax() < 1e-13);
                let via_ad = alg.ad_ortho(&x.ortho()) * y.ortho();
                assert!((via_ad - alg.bracket_ortho(&x.ortho(), &y.ortho())).amax() < 1e-13);
            }
        }
    }

    #[test]
    fn label_parsing() {
        assert_eq!("e_{1,12}".parse::<BasisLabel>().unwrap(), BasisLabel::e(1, 12));
        assert_eq!("f_22".parse::<BasisLabel>().unwrap(), BasisLabel::f(2, 2));
        assert_eq!(BasisLabel::f(3, 4).to_string(), "f_{3,4}");
        assert!("g_{1,2}".parse::<BasisLabel>().is_err());
    }

    fn random_triple(alg: &Arc<Algebra>, rng: &mut impl rand::Rng) -> [Element; 3] {
        std::array::from_fn(|_| alg.element(DVector::from_fn(alg.dim(), |_, _| rng.random_range(-1.0..1.0))).unwrap())
    }

    #[test]
    fn jacobi_identity() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for alg in [so(3), so(5), so(7), u(2), u(4)] {
            for _ in 0..1000 {
                let [x, y, z] = random_triple(&alg, &mut rng);
                let j1 = bracket(&x, &bracket(&y, &z).unwrap()).unwrap();
                let j2 = bracket(&y, &bracket(&z, &x).unwrap()).unwrap();
                let j3 = bracket(&z, &bracket(&x, &y).unwrap()).unwrap();
                let s = j1.add(&j2).unwrap().add(&j3).unwrap();
                assert!(s.norm() < 1e-10, "{}: {}", alg.name(), s.norm());
            }
        }
    }

    #[test]
    fn ad_invariance_of_b() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for alg in [so(4), so(6), u(3), u(5)] {
            for _ in 0..200 {
                let [x, y, z] = random_triple(&alg, &mut rng);
                let lhs = inner(&bracket(&z, &x).unwrap(), &y).unwrap() + inner(&x, &bracket(&z, &y).unwrap()).unwrap();
                assert!(lhs.abs() < 1e-10);
            }
        }
    }

    proptest! {
        #[test]
        fn realize_express_roundtrip(n in 2usize..6, family in prop_oneof![Just(Family::SO), Just(Family::U)], seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let alg = build_algebra(family, n).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x = alg.element(DVector::from_fn(alg.dim(), |_, _| rng.random_range(-5.0..5.0))).unwrap();
            prop_assert!(alg.skew_violation(x.matrix()) < 1e-12);
            let back = alg.express(x.matrix()).unwrap();
            prop_assert!(back.distance(&x).unwrap() < 1e-12);
        }
    }
}
