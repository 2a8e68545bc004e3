//! Quotients `SO(n)/SO(n_1)×…×SO(n_s)` and `U(n)/U(n_1)×…×U(n_s)`: parsing,
//! the B-orthogonal reductive decomposition `g = h ⊕ m`, the submodule
//! catalogs of `m`, and the normalizer of `h`.
//!
//! `H` sits block-diagonally with the identity block (size `n0`) first, then
//! the factors in the order given. Index blocks are numbered `0..=s`, block 0
//! being the identity block.

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lie::{build_algebra, Algebra, BasisLabel, Element, Family};
use crate::linalg::{self, RANK_RTOL};

/// Tolerance for `[a, S] ⊆ S` checks.
pub const INVARIANCE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaceSpec {
    family: Family,
    n: usize,
    parts: Vec<usize>,
    n0: usize,
}

impl SpaceSpec {
    pub fn new(family: Family, n: usize, parts: Vec<usize>) -> Result<Self> {
        if n < 2 {
            return Err(Error::Constraint(format!("n = {n}, need n >= 2")));
        }
        if parts.is_empty() {
            return Err(Error::Constraint("need at least one factor in H".into()));
        }
        match family {
            Family::SO => {
                if let Some(p) = parts.iter().find(|&&p| p < 2) {
                    return Err(Error::Constraint(format!("SO({p}) factor violates n_j>1")));
                }
            }
            Family::U => {
                if parts.contains(&0) {
                    return Err(Error::Constraint("U(0) factor, need n_j>=1".into()));
                }
            }
        }
        let total: usize = parts.iter().sum();
        if total > n {
            return Err(Error::Constraint(format!("n_1+...+n_s = {total} exceeds n = {n}")));
        }
        if parts.len() == 1 && total == n {
            return Err(Error::Constraint(format!("{family}({n})/{family}({n}) is a point")));
        }
        Ok(SpaceSpec { family, n, parts, n0: n - total })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    /// Number of factors `s`.
    pub fn s(&self) -> usize {
        self.parts.len()
    }

    /// Size of block `j` (block 0 is the identity block).
    pub fn block_size(&self, j: usize) -> usize {
        if j == 0 {
            self.n0
        } else {
            self.parts[j - 1]
        }
    }

    /// 1-based matrix indices of block `j`.
    pub fn block(&self, j: usize) -> RangeInclusive<usize> {
        let start = self.n0 + self.parts[..j.saturating_sub(1)].iter().sum::<usize>();
        let start = if j == 0 { 0 } else { start };
        start + 1..=start + self.block_size(j)
    }

    /// Block containing the 1-based matrix index `idx`.
    pub fn block_of(&self, idx: usize) -> usize {
        (0..=self.s()).find(|&j| self.block(j).contains(&idx)).expect("index within 1..=n")
    }
}

impl fmt::Display for SpaceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fam = self.family;
        let parts: Vec<String> = self.parts.iter().map(|p| format!("{fam}({p})")).collect();
        write!(f, "{fam}({})/{}", self.n, parts.join("x"))
    }
}

impl FromStr for SpaceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_spec(s)
    }
}

fn parse_group(tok: &str) -> Result<(Family, usize)> {
    let bad = || Error::Parse(format!("expected FAMILY(n), got {tok:?}"));
    let (fam, rest) = tok.split_once('(').ok_or_else(bad)?;
    let num = rest.strip_suffix(')').ok_or_else(bad)?;
    let family = match fam {
        "SO" => Family::SO,
        "U" => Family::U,
        _ => return Err(bad()),
    };
    let n = num.parse::<usize>().map_err(|_| bad())?;
    Ok((family, n))
}

/// Parses `FAMILY(n)/FAMILY(n_1)x…xFAMILY(n_s)`. Whitespace is ignored and
/// `×` / `X` are accepted for `x`.
pub fn parse_spec(text: &str) -> Result<SpaceSpec> {
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let compact = compact.replace(['×', 'X'], "x");
    let (g, h) = compact
        .split_once('/')
        .ok_or_else(|| Error::Parse(format!("missing '/' in {text:?}")))?;
    let (family, n) = parse_group(g)?;
    let mut parts = Vec::new();
    for tok in h.split('x') {
        let (fam, p) = parse_group(tok)?;
        if fam != family {
            return Err(Error::Parse(format!("mixed families {family} and {fam} in {text:?}")));
        }
        parts.push(p);
    }
    SpaceSpec::new(family, n, parts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SubmoduleKind {
    /// `z(n)`, the centre of `u(n0)`.
    CenterN,
    /// `su(n0)`.
    SimpleN,
    /// One of the two `so(3)` ideals of `n = so(4)`.
    So4Ideal,
    /// A line `span{e_ab}` of `n = so(n0)`.
    TrivialLine,
    MIj,
    /// `m^j_l`, one row of `m_{0j}`.
    StrandM0j,
    VSplit,
    /// The whole of `n` (coarse catalog only).
    NBlock,
}

/// An `ad(h)`-invariant subspace of `m` with an orthogonal spanning set and
/// the matching orthonormal frame.
#[derive(Debug, Clone)]
pub struct Submodule {
    pub id: String,
    pub kind: SubmoduleKind,
    pub indices: Option<(usize, usize)>,
    pub basis: Vec<Element>,
    pub basis_labels: Vec<String>,
    frame_g: DMatrix<f64>,
    frame_m: DMatrix<f64>,
}

impl Submodule {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Orthonormal frame as columns in orthonormal coordinates of `g`.
    pub fn frame_g(&self) -> &DMatrix<f64> {
        &self.frame_g
    }

    /// Orthonormal frame as columns in orthonormal coordinates of `m`.
    pub fn frame_m(&self) -> &DMatrix<f64> {
        &self.frame_m
    }

    /// Orthogonal projector onto the submodule, in `m` coordinates.
    pub fn projector_m(&self) -> DMatrix<f64> {
        &self.frame_m * self.frame_m.transpose()
    }
}

/// `g = h ⊕ m` together with the coarse and fine submodule catalogs.
#[derive(Debug, Clone)]
pub struct Decomposition {
    spec: SpaceSpec,
    algebra: Arc<Algebra>,
    h_idx: Vec<usize>,
    m_idx: Vec<usize>,
    h_basis: Vec<Element>,
    m_basis: Vec<Element>,
    coarse: Vec<Submodule>,
    fine: Vec<Submodule>,
}

fn term_label(terms: &[(f64, BasisLabel)]) -> String {
    let mut s = String::new();
    for (i, (c, l)) in terms.iter().enumerate() {
        let sign = if *c < 0.0 { "-" } else if i > 0 { "+" } else { "" };
        let mag = c.abs();
        if mag == 1.0 {
            s.push_str(&format!("{sign}{l}"));
        } else {
            s.push_str(&format!("{sign}{mag}{l}"));
        }
    }
    s
}

pub fn decompose(spec: &SpaceSpec) -> Result<Decomposition> {
    Decomposition::new(spec.clone())
}

impl Decomposition {
    pub fn new(spec: SpaceSpec) -> Result<Self> {
        let algebra = build_algebra(spec.family, spec.n)?;
        let in_h = |l: &BasisLabel| {
            let (ja, jb) = (spec.block_of(l.a), spec.block_of(l.b));
            ja == jb && ja != 0
        };
        let (h_idx, m_idx): (Vec<usize>, Vec<usize>) = (0..algebra.dim()).partition(|&k| in_h(&algebra.basis()[k]));
        let unit = |k: usize| algebra.basis_element(algebra.basis()[k]).expect("own label");
        let h_basis = h_idx.iter().map(|&k| unit(k)).collect();
        let m_basis = m_idx.iter().map(|&k| unit(k)).collect();
        let mut dec = Decomposition {
            spec,
            algebra,
            h_idx,
            m_idx,
            h_basis,
            m_basis,
            coarse: Vec::new(),
            fine: Vec::new(),
        };
        dec.coarse = dec.build_coarse()?;
        dec.fine = dec.build_fine()?;
        Ok(dec)
    }

    fn submodule(
        &self,
        id: String,
        kind: SubmoduleKind,
        indices: Option<(usize, usize)>,
        vectors: Vec<Vec<(f64, BasisLabel)>>,
    ) -> Result<Submodule> {
        let mut basis = Vec::with_capacity(vectors.len());
        let mut labels = Vec::with_capacity(vectors.len());
        let mut cols = Vec::with_capacity(vectors.len());
        for terms in &vectors {
            let el = self.algebra.combination(terms)?;
            let v = el.ortho();
            cols.push(&v / v.norm());
            labels.push(term_label(terms));
            basis.push(el);
        }
        let frame_g = DMatrix::from_columns(&cols);
        let frame_m = frame_g.select_rows(&self.m_idx);
        Ok(Submodule { id, kind, indices, basis, basis_labels: labels, frame_g, frame_m })
    }

    fn e(&self, a: usize, b: usize) -> Vec<(f64, BasisLabel)> {
        vec![(1.0, BasisLabel::e(a, b))]
    }

    fn cross_block(&self, i: usize, j: usize) -> Vec<Vec<(f64, BasisLabel)>> {
        let mut v = Vec::new();
        for a in self.spec.block(i) {
            for b in self.spec.block(j) {
                v.push(self.e(a, b));
            }
        }
        if self.spec.family == Family::U {
            for a in self.spec.block(i) {
                for b in self.spec.block(j) {
                    v.push(vec![(1.0, BasisLabel::f(a, b))]);
                }
            }
        }
        v
    }

    fn n_block(&self) -> Vec<Vec<(f64, BasisLabel)>> {
        let n0 = self.spec.n0;
        let mut v = Vec::new();
        for a in 1..=n0 {
            for b in a + 1..=n0 {
                v.push(self.e(a, b));
            }
        }
        if self.spec.family == Family::U {
            for c in 1..=n0 {
                for d in c..=n0 {
                    v.push(vec![(1.0, BasisLabel::f(c, d))]);
                }
            }
        }
        v
    }

    fn has_n(&self) -> bool {
        match self.spec.family {
            Family::SO => self.spec.n0 >= 2,
            Family::U => self.spec.n0 >= 1,
        }
    }

    fn build_coarse(&self) -> Result<Vec<Submodule>> {
        let mut out = Vec::new();
        if self.has_n() {
            out.push(self.submodule("n".into(), SubmoduleKind::NBlock, None, self.n_block())?);
        }
        let s = self.spec.s();
        let first = if self.spec.n0 == 0 { 1 } else { 0 };
        for i in first..=s {
            for j in i + 1..=s {
                out.push(self.submodule(format!("m_{{{i},{j}}}"), SubmoduleKind::MIj, Some((i, j)), self.cross_block(i, j))?);
            }
        }
        Ok(out)
    }

    fn build_fine(&self) -> Result<Vec<Submodule>> {
        let spec = &self.spec;
        let n0 = spec.n0;
        let mut out = Vec::new();
        match spec.family {
            Family::SO if n0 == 4 => {
                let ideal = |sign: f64| {
                    vec![
                        vec![(1.0, BasisLabel::e(1, 2)), (sign, BasisLabel::e(3, 4))],
                        vec![(-1.0, BasisLabel::e(1, 3)), (sign, BasisLabel::e(2, 4))],
                        vec![(1.0, BasisLabel::e(2, 3)), (sign, BasisLabel::e(1, 4))],
                    ]
                };
                out.push(self.submodule("n1(so4)".into(), SubmoduleKind::So4Ideal, None, ideal(1.0))?);
                out.push(self.submodule("n2(so4)".into(), SubmoduleKind::So4Ideal, None, ideal(-1.0))?);
            }
            Family::SO => {
                for a in 1..=n0 {
                    for b in a + 1..=n0 {
                        out.push(self.submodule(format!("triv_{{{a},{b}}}"), SubmoduleKind::TrivialLine, Some((a, b)), vec![self.e(a, b)])?);
                    }
                }
            }
            Family::U if n0 >= 1 => {
                let z: Vec<(f64, BasisLabel)> = (1..=n0).map(|i| (1.0, BasisLabel::f(i, i))).collect();
                out.push(self.submodule("z(n)".into(), SubmoduleKind::CenterN, None, vec![z])?);
                if n0 >= 2 {
                    let mut v = Vec::new();
                    for a in 1..=n0 {
                        for b in a + 1..=n0 {
                            v.push(self.e(a, b));
                        }
                    }
                    for a in 1..=n0 {
                        for b in a + 1..=n0 {
                            v.push(vec![(1.0, BasisLabel::f(a, b))]);
                        }
                    }
                    // Orthogonal diagonal generators Σ_{i≤k} f_ii - k f_{k+1,k+1}.
                    for k in 1..n0 {
                        let mut t: Vec<(f64, BasisLabel)> = (1..=k).map(|i| (1.0, BasisLabel::f(i, i))).collect();
                        t.push((-(k as f64), BasisLabel::f(k + 1, k + 1)));
                        v.push(t);
                    }
                    out.push(self.submodule("su(n0)".into(), SubmoduleKind::SimpleN, None, v)?);
                }
            }
            Family::U => {}
        }

        for j in 1..=spec.s() {
            for l in 1..=n0 {
                let mut v: Vec<Vec<(f64, BasisLabel)>> = spec.block(j).map(|b| self.e(l, b)).collect();
                if spec.family == Family::U {
                    v.extend(spec.block(j).map(|b| vec![(1.0, BasisLabel::f(l, b))]));
                }
                out.push(self.submodule(format!("m^{{{j}}}_{{{l}}}"), SubmoduleKind::StrandM0j, Some((j, l)), v)?);
            }
        }

        for i in 1..=spec.s() {
            for j in i + 1..=spec.s() {
                if spec.family == Family::SO && spec.block_size(i) == 2 && spec.block_size(j) == 2 {
                    let (ii, kk) = (*spec.block(i).start(), *spec.block(i).start() + 1);
                    let (jj, ll) = (*spec.block(j).start(), *spec.block(j).start() + 1);
                    let e = BasisLabel::e;
                    let v1 = vec![vec![(1.0, e(ii, jj)), (-1.0, e(kk, ll))], vec![(1.0, e(ii, ll)), (1.0, e(kk, jj))]];
                    let v2 = vec![vec![(1.0, e(ii, jj)), (1.0, e(kk, ll))], vec![(1.0, e(ii, ll)), (-1.0, e(kk, jj))]];
                    out.push(self.submodule(format!("V1_{{{i},{j}}}"), SubmoduleKind::VSplit, Some((i, j)), v1)?);
                    out.push(self.submodule(format!("V2_{{{i},{j}}}"), SubmoduleKind::VSplit, Some((i, j)), v2)?);
                } else {
                    out.push(self.submodule(format!("m_{{{i},{j}}}"), SubmoduleKind::MIj, Some((i, j)), self.cross_block(i, j))?);
                }
            }
        }
        Ok(out)
    }

    pub fn spec(&self) -> &SpaceSpec {
        &self.spec
    }

    pub fn algebra(&self) -> &Arc<Algebra> {
        &self.algebra
    }

    pub fn dim_h(&self) -> usize {
        self.h_idx.len()
    }

    pub fn dim_m(&self) -> usize {
        self.m_idx.len()
    }

    pub fn h_basis(&self) -> &[Element] {
        &self.h_basis
    }

    pub fn m_basis(&self) -> &[Element] {
        &self.m_basis
    }

    /// Algebra indices of the basis vectors spanning `h`.
    pub fn h_indices(&self) -> &[usize] {
        &self.h_idx
    }

    /// Algebra indices of the basis vectors spanning `m`, in `m`-coordinate order.
    pub fn m_indices(&self) -> &[usize] {
        &self.m_idx
    }

    pub fn m_labels(&self) -> Vec<BasisLabel> {
        self.m_idx.iter().map(|&k| self.algebra.basis()[k]).collect()
    }

    pub fn coarse_catalog(&self) -> &[Submodule] {
        &self.coarse
    }

    pub fn fine_catalog(&self) -> &[Submodule] {
        &self.fine
    }

    /// Looks an id up in the fine catalog, then the coarse one.
    pub fn find(&self, id: &str) -> Option<&Submodule> {
        self.fine.iter().chain(&self.coarse).find(|s| s.id == id)
    }

    pub fn find_or_err(&self, id: &str) -> Result<&Submodule> {
        self.find(id).ok_or_else(|| Error::Domain(format!("no submodule {id:?} in {}", self.spec)))
    }

    /// `m`-coordinates → orthonormal `g`-coordinates.
    pub fn embed_m(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.algebra.dim());
        for (p, &k) in self.m_idx.iter().enumerate() {
            g[k] = v[p];
        }
        g
    }

    /// Orthonormal `g`-coordinates → `m`-coordinates (drops the `h` part).
    pub fn restrict_m(&self, g: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.m_idx.len(), self.m_idx.iter().map(|&k| g[k]))
    }

    pub fn h_part(&self, g: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.h_idx.len(), self.h_idx.iter().map(|&k| g[k]))
    }

    pub fn element_from_m(&self, v: &DVector<f64>) -> Element {
        self.algebra.element_from_ortho(&self.embed_m(v))
    }

    /// Orthonormal `m`-coordinates of an element of `m`.
    pub fn m_coords(&self, x: &Element) -> Result<DVector<f64>> {
        if **x.algebra() != *self.algebra {
            return Err(Error::AlgebraMismatch { left: x.algebra().name(), right: self.algebra.name() });
        }
        let g = x.ortho();
        let h = self.h_part(&g).norm();
        if h > 1e-10 * g.norm().max(1.0) {
            return Err(Error::Domain(format!("element has h-component of norm {h:.3e}")));
        }
        Ok(self.restrict_m(&g))
    }

    /// Orthonormal unit vectors of `h` in `g`-coordinates.
    pub fn h_frame(&self) -> Vec<DVector<f64>> {
        let dim = self.algebra.dim();
        self.h_idx
            .iter()
            .map(|&k| {
                let mut v = DVector::zeros(dim);
                v[k] = 1.0;
                v
            })
            .collect()
    }

    /// `ad(a)` restricted to `m`, for `a` with `[a, m] ⊆ m`.
    pub fn ad_m(&self, a: &DVector<f64>) -> DMatrix<f64> {
        let ad = self.algebra.ad_ortho(a);
        ad.select_rows(&self.m_idx).select_columns(&self.m_idx)
    }

    /// Orthonormal frame (`g`-coordinates) of `n`, possibly with no columns.
    pub fn n_frame(&self) -> DMatrix<f64> {
        self.coarse
            .iter()
            .find(|s| s.kind == SubmoduleKind::NBlock)
            .map(|s| s.frame_g.clone())
            .unwrap_or_else(|| DMatrix::zeros(self.algebra.dim(), 0))
    }

    /// Basis of `{Y ∈ g : [Y, h] ⊆ h}`, from the kernel of
    /// `Y ↦ (proj_m [Y, a_k])_k` over the `h` basis.
    pub fn normalizer(&self) -> Vec<Element> {
        let dim = self.algebra.dim();
        let frame = self.h_frame();
        let mut stacked = DMatrix::zeros(frame.len() * self.dim_m(), dim);
        for (k, a) in frame.iter().enumerate() {
            // [Y, a] = -ad(a) Y; the sign does not change the kernel.
            let block = self.algebra.ad_ortho(a).select_rows(&self.m_idx);
            stacked.view_mut((k * self.dim_m(), 0), (self.dim_m(), dim)).copy_from(&block);
        }
        let ns = linalg::nullspace(&stacked, RANK_RTOL);
        ns.column_iter().map(|c| self.algebra.element_from_ortho(&c.into_owned())).collect()
    }

    /// Dimension of the subspace of `m` on which `h` acts trivially.
    pub fn isotropy_fixed_dim(&self) -> usize {
        let dm = self.dim_m();
        let frame = self.h_frame();
        if frame.is_empty() {
            return dm;
        }
        let mut stacked = DMatrix::zeros(frame.len() * dm, dm);
        for (k, a) in frame.iter().enumerate() {
            stacked.view_mut((k * dm, 0), (dm, dm)).copy_from(&self.ad_m(a));
        }
        linalg::nullspace(&stacked, RANK_RTOL).ncols()
    }

    /// Number of one-dimensional trivial summands listed by the fine catalog
    /// (each `so(4)` ideal counts as three lines).
    pub fn trivial_line_count(&self) -> usize {
        self.fine
            .iter()
            .filter(|s| matches!(s.kind, SubmoduleKind::TrivialLine | SubmoduleKind::So4Ideal))
            .map(Submodule::dim)
            .sum()
    }

    /// Distance of `a` from `h ⊕ n` (in B-norm).
    pub fn distance_from_normalizer(&self, a: &Element) -> f64 {
        let m = self.embed_m(&self.restrict_m(&a.ortho()));
        let nf = self.n_frame();
        let inside = &nf * (nf.transpose() * &m);
        (m - inside).norm()
    }

    /// Matrix of `X ↦ [a, X]` on `S` in the orthonormal frame of `S`.
    pub fn action_matrix(&self, a: &Element, s: &Submodule) -> Result<DMatrix<f64>> {
        let off = self.distance_from_normalizer(a);
        if off > 1e-10 * a.norm().max(1.0) {
            return Err(Error::Domain(format!("element is not in h ⊕ n (distance {off:.3e})")));
        }
        self.action_matrix_unchecked(&a.ortho(), s)
    }

    pub(crate) fn action_matrix_unchecked(&self, a: &DVector<f64>, s: &Submodule) -> Result<DMatrix<f64>> {
        let image = self.algebra.ad_ortho(a) * &s.frame_g;
        let inner = s.frame_g.transpose() * &image;
        let residual = (&image - &s.frame_g * &inner).amax();
        if residual > INVARIANCE_TOL * a.norm().max(1.0) {
            return Err(Error::InvarianceViolation { id: s.id.clone(), residual });
        }
        Ok(inner)
    }

    pub fn summary(&self) -> DecompositionSummary {
        let entry = |s: &Submodule| CatalogEntry { id: s.id.clone(), kind: s.kind, dim: s.dim() };
        DecompositionSummary {
            spec: self.spec.to_string(),
            family: self.spec.family,
            n: self.spec.n,
            parts: self.spec.parts.clone(),
            n0: self.spec.n0,
            dim_g: self.algebra.dim(),
            dim_h: self.dim_h(),
            dim_m: self.dim_m(),
            coarse_catalog: self.coarse.iter().map(entry).collect(),
            fine_catalog: self.fine.iter().map(entry).collect(),
        }
    }
}

/// Convenience wrapper for [`Decomposition::normalizer`].
pub fn normalizer(spec: &SpaceSpec) -> Result<Vec<Element>> {
    Ok(decompose(spec)?.normalizer())
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CatalogEntry {
    pub id: String,
    pub kind: SubmoduleKind,
    pub dim: usize,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DecompositionSummary {
    pub spec: String,
    pub family: Family,
    pub n: usize,
    pub parts: Vec<usize>,
    pub n0: usize,
    pub dim_g: usize,
    pub dim_h: usize,
    pub dim_m: usize,
    pub coarse_catalog: Vec<CatalogEntry>,
    pub fine_catalog: Vec<CatalogEntry>,
}

/// Columns of all frames in a catalog, side by side.
pub fn stacked_frames(catalog: &[Submodule]) -> DMatrix<f64> {
    let cols: Vec<DVector<f64>> = catalog.iter().flat_map(|s| s.frame_g.column_iter().map(|c| c.into_owned())).collect();
    if cols.is_empty() {
        DMatrix::zeros(0, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}
