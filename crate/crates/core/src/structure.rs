//! Representation-theoretic checks on the submodule catalogs and the
//! propagation of eigenvalue equalities forced on any geodesic orbit metric.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lie::Element;
use crate::linalg::{self, RANK_RTOL};
use crate::space::{Decomposition, Submodule};

/// Relative threshold above which a bracket projection counts as nonzero.
pub const PROJECTION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Under {
    H,
    Normalizer,
}

fn generators(dec: &Decomposition, under: Under) -> Vec<DVector<f64>> {
    let mut gens = dec.h_frame();
    if under == Under::Normalizer {
        gens.extend(dec.n_frame().column_iter().map(|c| c.into_owned()));
    }
    gens
}

/// Basis of intertwiners `φ: S1 → S2` (as `d2 × d1` matrices in the frames).
fn intertwiners(dec: &Decomposition, s1: &Submodule, s2: &Submodule, under: Under) -> Result<Vec<DMatrix<f64>>> {
    let (d1, d2) = (s1.dim(), s2.dim());
    let gens = generators(dec, under);
    let mut stacked = DMatrix::zeros(gens.len() * d1 * d2, d1 * d2);
    let i1 = DMatrix::<f64>::identity(d1, d1);
    let i2 = DMatrix::<f64>::identity(d2, d2);
    for (k, a) in gens.iter().enumerate() {
        let r1 = dec.action_matrix_unchecked(a, s1)?;
        let r2 = dec.action_matrix_unchecked(a, s2)?;
        // vec(R2 φ − φ R1) = (I ⊗ R2 − R1ᵀ ⊗ I) vec(φ), column-major vec.
        let block = i1.kronecker(&r2) - r1.transpose().kronecker(&i2);
        stacked.view_mut((k * d1 * d2, 0), (d1 * d2, d1 * d2)).copy_from(&block);
    }
    let ns = if gens.is_empty() { DMatrix::identity(d1 * d2, d1 * d2) } else { linalg::nullspace(&stacked, RANK_RTOL) };
    Ok(ns.column_iter().map(|c| DMatrix::from_column_slice(d2, d1, c.as_slice())).collect())
}

/// Dimension of the space of equivariant maps `S1 → S2`. Both modules must be
/// invariant under the chosen subalgebra.
pub fn hom_dimension(dec: &Decomposition, s1: &Submodule, s2: &Submodule, under: Under) -> Result<usize> {
    Ok(intertwiners(dec, s1, s2, under)?.len())
}

/// Irreducibility over the reals: `S` is reducible iff its commutant holds a
/// symmetric element that is not a multiple of the identity (its eigenspaces
/// are then invariant).
pub fn is_irreducible(dec: &Decomposition, s: &Submodule, under: Under) -> Result<bool> {
    let d = s.dim();
    for c in intertwiners(dec, s, s, under)? {
        let sym = (&c + c.transpose()) * 0.5;
        let scalar = sym.trace() / d as f64;
        if (sym - DMatrix::identity(d, d) * scalar).norm() > 1e-8 * c.norm() {
            return Ok(false);
        }
    }
    Ok(true)
}

fn membership_residual(dec: &Decomposition, s: &Submodule, x: &Element) -> Result<f64> {
    let v = dec.m_coords(x)?;
    let f = s.frame_m();
    Ok((&v - f * (f.transpose() * &v)).norm())
}

/// Some `a ∈ h` with `[a, X] = 0` and `[a, Y] ≠ 0`, or `None` if every element
/// of `h` killing `X` also kills `Y`.
pub fn inequivalence_witness(
    dec: &Decomposition,
    s1: &Submodule,
    s2: &Submodule,
    x: &Element,
    y: &Element,
) -> Result<Option<Element>> {
    if x.is_zero(0.0) || y.is_zero(0.0) {
        return Err(Error::Precondition("X and Y must be nonzero".into()));
    }
    for (s, v, name) in [(s1, x, "X"), (s2, y, "Y")] {
        let r = membership_residual(dec, s, v)?;
        if r > 1e-10 * v.norm() {
            return Err(Error::Precondition(format!("{name} is not in {} (residual {r:.3e})", s.id)));
        }
    }
    let alg = dec.algebra();
    let hs = dec.h_frame();
    if hs.is_empty() {
        return Ok(None);
    }
    let (xo, yo) = (x.ortho(), y.ortho());
    let ad_on = |v: &DVector<f64>| DMatrix::from_columns(&hs.iter().map(|h| alg.bracket_ortho(h, v)).collect::<Vec<_>>());
    let ann = linalg::nullspace(&ad_on(&xo), RANK_RTOL);
    if ann.ncols() == 0 {
        return Ok(None);
    }
    let t = ad_on(&yo) * &ann;
    let (_, sv, v) = linalg::full_svd(&t);
    let top = sv.iamax();
    let sigma = sv[top];
    let ynorm = y.norm();
    if sigma <= 1e-3 * ynorm {
        return Ok(None);
    }
    let coeffs_h = &ann * v.column(top);
    let mut a = DVector::zeros(alg.dim());
    for (k, h) in hs.iter().enumerate() {
        a += h * coeffs_h[k];
    }
    let ax = alg.bracket_ortho(&a, &xo).norm();
    let ay = alg.bracket_ortho(&a, &yo).norm();
    if ax < 1e-10 && ay > 1e-3 * a.norm() * ynorm {
        Ok(Some(alg.element_from_ortho(&a)))
    } else {
        Ok(None)
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    /// Orthogonal complement of `S1 ⊕ S2` in `m`.
    Complement,
    Module(&'a Submodule),
}

/// Largest projection, together with the frame indices attaining it.
fn projection_max(dec: &Decomposition, s1: &Submodule, s2: &Submodule, target: Target) -> (f64, usize, usize) {
    let alg = dec.algebra();
    let remove = match target {
        Target::Complement => {
            let both = DMatrix::from_columns(
                &s1.frame_m().column_iter().chain(s2.frame_m().column_iter()).map(|c| c.into_owned()).collect::<Vec<_>>(),
            );
            Some(linalg::orthonormalize(&both, 1e-10))
        }
        Target::Module(_) => None,
    };
    let mut best = (0.0, 0, 0);
    for (i, x) in s1.frame_g().column_iter().enumerate() {
        for (j, y) in s2.frame_g().column_iter().enumerate() {
            let r = dec.restrict_m(&alg.bracket_ortho(&x.into_owned(), &y.into_owned()));
            let p = match (&remove, target) {
                (Some(q), _) => (&r - q * (q.transpose() * &r)).norm(),
                (None, Target::Module(t)) => (t.frame_m().transpose() * &r).norm(),
                _ => unreachable!(),
            };
            if p > best.0 {
                best = (p, i, j);
            }
        }
    }
    best
}

/// Largest B-norm of the projection of `[x, y]` onto the target over the
/// orthonormal frames of `S1` and `S2`.
pub fn bracket_projection(dec: &Decomposition, s1: &Submodule, s2: &Submodule, target: Target) -> Result<f64> {
    if s1.id == s2.id {
        return Err(Error::Precondition(format!("S1 and S2 are both {}", s1.id)));
    }
    Ok(projection_max(dec, s1, s2, target).0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeRule {
    Pair,
    Triple,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergeRecord {
    pub merged: Vec<String>,
    pub rule: MergeRule,
    /// Frame vectors `x ∈ S1`, `y ∈ S2` whose bracket certifies the merge.
    pub witness: Vec<String>,
}

#[derive(Debug, Clone)]
struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns whether the sets were distinct.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        self.parent[hi] = lo;
        true
    }
}

/// Partition of the fine catalog into modules forced to share an eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenvalueClasses {
    /// Classes in fine-catalog order, members in catalog order.
    pub classes: Vec<Vec<String>>,
    pub merges: Vec<MergeRecord>,
}

impl EigenvalueClasses {
    pub fn class_of(&self, id: &str) -> Option<usize> {
        self.classes.iter().position(|c| c.iter().any(|x| x == id))
    }

    pub fn same_class(&self, a: &str, b: &str) -> bool {
        matches!((self.class_of(a), self.class_of(b)), (Some(x), Some(y)) if x == y)
    }

    /// Rebuilds the partition of `ids` from the merge log alone.
    pub fn replay(&self, ids: &[String]) -> Vec<Vec<String>> {
        let mut uf = UnionFind::new(ids.len());
        let pos = |s: &String| ids.iter().position(|x| x == s).expect("id in catalog");
        for m in &self.merges {
            let first = pos(&m.merged[0]);
            for other in &m.merged[1..] {
                uf.union(first, pos(other));
            }
        }
        collect_classes(&mut uf, ids)
    }
}

fn collect_classes(uf: &mut UnionFind, ids: &[String]) -> Vec<Vec<String>> {
    let mut roots: Vec<usize> = Vec::new();
    let mut classes: Vec<Vec<String>> = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        let r = uf.find(i);
        match roots.iter().position(|&x| x == r) {
            Some(p) => classes[p].push(id.clone()),
            None => {
                roots.push(r);
                classes.push(vec![id.clone()]);
            }
        }
    }
    classes
}

/// Eigenvalue classes over the fine catalog.
pub fn derive_constraints(dec: &Decomposition) -> Result<EigenvalueClasses> {
    let modules: Vec<&Submodule> = dec.fine_catalog().iter().collect();
    derive_constraints_over(dec, &modules)
}

/// Same as [`derive_constraints`] with the modules scanned in the given
/// order. The partition is reported in fine-catalog order regardless.
pub fn derive_constraints_over(dec: &Decomposition, modules: &[&Submodule]) -> Result<EigenvalueClasses> {
    let catalog: Vec<String> = dec.fine_catalog().iter().map(|s| s.id.clone()).collect();
    let mut seen: Vec<&str> = modules.iter().map(|s| s.id.as_str()).collect();
    seen.sort_unstable();
    let mut sorted = catalog.clone();
    sorted.sort_unstable();
    if seen != sorted.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::Coverage("modules must be a permutation of the fine catalog".into()));
    }
    let idx = |s: &Submodule| catalog.iter().position(|x| *x == s.id).expect("checked above");
    let label = |s: &Submodule, k: usize| format!("{}:{}", s.id, s.basis_labels[k]);

    let mut uf = UnionFind::new(catalog.len());
    let mut merges = Vec::new();
    loop {
        let mut changed = false;
        for (p, s1) in modules.iter().enumerate() {
            for s2 in &modules[p + 1..] {
                let (v, i, j) = projection_max(dec, s1, s2, Target::Complement);
                if v > PROJECTION_TOL && uf.union(idx(s1), idx(s2)) {
                    changed = true;
                    merges.push(MergeRecord {
                        merged: vec![s1.id.clone(), s2.id.clone()],
                        rule: MergeRule::Pair,
                        witness: vec![label(s1, i), label(s2, j)],
                    });
                }
                for s3 in modules.iter().filter(|s| s.id != s1.id && s.id != s2.id) {
                    let (a, b, c) = (idx(s1), idx(s2), idx(s3));
                    if uf.find(a) == uf.find(b) && uf.find(b) == uf.find(c) {
                        continue;
                    }
                    let (v, i, j) = projection_max(dec, s1, s2, Target::Module(s3));
                    if v > PROJECTION_TOL {
                        let m1 = uf.union(a, b);
                        let m2 = uf.union(a, c);
                        if m1 || m2 {
                            changed = true;
                            merges.push(MergeRecord {
                                merged: vec![s1.id.clone(), s2.id.clone(), s3.id.clone()],
                                rule: MergeRule::Triple,
                                witness: vec![label(s1, i), label(s2, j)],
                            });
                        }
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok(EigenvalueClasses { classes: collect_classes(&mut uf, &catalog), merges })
}
