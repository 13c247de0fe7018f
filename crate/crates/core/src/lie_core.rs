//! Root systems, Chevalley bases and the compact real form of `sl(n+1, C)`.
//!
//! Everything lives in the fundamental representation: Lie algebra elements
//! are explicit `(n+1) x (n+1)` complex matrices and a basis is a list of such
//! matrices together with a precomputed left inverse for taking coordinates.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;

/// Absolute tolerance for algebraic identities in double precision.
pub const ALGEBRAIC_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Series {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
}

impl FromStr for Series {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Series::A),
            "B" | "b" => Ok(Series::B),
            "C" | "c" => Ok(Series::C),
            "D" | "d" => Ok(Series::D),
            "E" | "e" => Ok(Series::E),
            "F" | "f" => Ok(Series::F),
            "G" | "g" => Ok(Series::G),
            other => Err(Error::UnsupportedAlgebra {
                series: other.to_string(),
                rank: 0,
            }),
        }
    }
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Positive root `e_i - e_j` of `A_n`, stored with 1-based indices `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Root {
    pub i: usize,
    pub j: usize,
}

impl Root {
    pub fn new(i: usize, j: usize) -> Self {
        Root { i, j }
    }

    pub fn is_simple(&self) -> bool {
        self.j == self.i + 1
    }

    /// Coefficients of this root in the simple-root basis `alpha_k = e_k - e_{k+1}`.
    pub fn simple_expansion(&self, rank: usize) -> Vec<u32> {
        (1..=rank).map(|k| u32::from(k >= self.i && k < self.j)).collect()
    }
}

impl fmt::Display for Root {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.i, self.j)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootSystem {
    pub series: Series,
    pub rank: usize,
    pub positive_roots: Vec<Root>,
    pub simple_roots: Vec<Root>,
}

impl RootSystem {
    /// Size of the defining matrices, `n + 1` for `A_n`.
    pub fn matrix_size(&self) -> usize {
        self.rank + 1
    }

    pub fn contains(&self, root: &Root) -> bool {
        self.positive_roots.contains(root)
    }

    pub fn root_index(&self, root: &Root) -> Option<usize> {
        self.positive_roots.iter().position(|r| r == root)
    }
}

pub fn build_root_system(series: Series, rank: usize) -> Result<RootSystem> {
    if series != Series::A || rank == 0 {
        return Err(Error::UnsupportedAlgebra {
            series: series.to_string(),
            rank,
        });
    }
    let size = rank + 1;
    let positive_roots: Vec<Root> = (1..=size)
        .flat_map(|i| (i + 1..=size).map(move |j| Root::new(i, j)))
        .collect();
    let simple_roots = positive_roots.iter().copied().filter(Root::is_simple).collect();
    Ok(RootSystem {
        series,
        rank,
        positive_roots,
        simple_roots,
    })
}

/// Elementary matrix with a single unit entry at 1-based `(i, j)`.
pub fn elementary(size: usize, i: usize, j: usize) -> CMat {
    let mut m = CMat::zeros(size, size);
    m[(i - 1, j - 1)] = ONE;
    m
}

pub fn commutator(x: &CMat, y: &CMat) -> CMat {
    x * y - y * x
}

/// The scalar product `-1/2 Re tr(XY)`.
pub fn trace_form(x: &CMat, y: &CMat) -> Result<f64> {
    if !x.is_square() || x.shape() != y.shape() {
        return Err(Error::Shape(format!(
            "trace_form on {:?} and {:?}",
            x.shape(),
            y.shape()
        )));
    }
    let n = x.nrows();
    let mut tr = ZERO;
    for i in 0..n {
        for k in 0..n {
            tr += x[(i, k)] * y[(k, i)];
        }
    }
    Ok(-0.5 * tr.re)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisTag {
    Chevalley,
    Compact,
    Custom(String),
}

impl fmt::Display for BasisTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisTag::Chevalley => f.write_str("chevalley"),
            BasisTag::Compact => f.write_str("compact"),
            BasisTag::Custom(s) => f.write_str(s),
        }
    }
}

/// Structure constants `[e_a, e_b] = sum_c C^c_{ab} e_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureConstants {
    dim: usize,
    data: Vec<Complex64>,
}

impl StructureConstants {
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, c: usize, a: usize, b: usize) -> Complex64 {
        self.data[(c * self.dim + a) * self.dim + b]
    }
}

/// A basis of a matrix Lie algebra, with coordinates taken through the
/// left inverse of the flattened basis matrix.
#[derive(Debug, Clone)]
pub struct MatrixBasis {
    tag: BasisTag,
    size: usize,
    elements: Vec<CMat>,
    dual: CMat,
    structure: StructureConstants,
}

impl MatrixBasis {
    pub fn new(tag: BasisTag, elements: Vec<CMat>) -> Result<Self> {
        let size = elements
            .first()
            .map(|m| m.nrows())
            .ok_or_else(|| Error::Shape("empty basis".into()))?;
        if elements.iter().any(|m| m.shape() != (size, size)) {
            return Err(Error::Shape("basis matrices must share a square shape".into()));
        }
        let d = elements.len();
        let flat = CMat::from_fn(size * size, d, |k, a| elements[a][(k / size, k % size)]);
        let adj = flat.adjoint();
        let gram = &adj * &flat;
        let inv = gram
            .try_inverse()
            .ok_or_else(|| Error::Shape("basis matrices are linearly dependent".into()))?;
        let dual = inv * adj;

        let mut basis = MatrixBasis {
            tag,
            size,
            elements,
            dual,
            structure: StructureConstants {
                dim: d,
                data: Vec::new(),
            },
        };
        let mut data = vec![ZERO; d * d * d];
        for a in 0..d {
            for b in 0..d {
                let coords = basis.coords(&commutator(&basis.elements[a], &basis.elements[b]));
                for c in 0..d {
                    data[(c * d + a) * d + b] = coords[c];
                }
            }
        }
        basis.structure.data = data;
        Ok(basis)
    }

    pub fn tag(&self) -> &BasisTag {
        &self.tag
    }

    pub fn dim(&self) -> usize {
        self.elements.len()
    }

    pub fn matrix_size(&self) -> usize {
        self.size
    }

    pub fn elements(&self) -> &[CMat] {
        &self.elements
    }

    pub fn element(&self, a: usize) -> &CMat {
        &self.elements[a]
    }

    pub fn structure_constants(&self) -> &StructureConstants {
        &self.structure
    }

    /// Coordinates of `x` in this basis (least-squares if `x` is outside the span).
    pub fn coords(&self, x: &CMat) -> DVector<Complex64> {
        let n = self.size;
        let flat = DVector::from_fn(n * n, |k, _| x[(k / n, k % n)]);
        &self.dual * flat
    }

    pub fn combine(&self, coeffs: &[Complex64]) -> CMat {
        let mut out = CMat::zeros(self.size, self.size);
        for (c, e) in coeffs.iter().zip(&self.elements) {
            out += e * *c;
        }
        out
    }

    /// Matrix of `Ad_g` in this basis: column `b` holds the coordinates of `g e_b g^{-1}`.
    pub fn adjoint_matrix(&self, g: &GroupElement) -> CMat {
        let gm = g.matrix();
        let ginv = g.inverse();
        let gi = ginv.matrix();
        let d = self.dim();
        let mut out = CMat::zeros(d, d);
        for (b, e) in self.elements.iter().enumerate() {
            let image = gm * e * gi;
            out.set_column(b, &self.coords(&image));
        }
        out
    }

    /// Change-of-basis matrix whose column `a` holds the coordinates of this
    /// basis' `e_a` in `other`.
    pub fn transition_to(&self, other: &MatrixBasis) -> CMat {
        let d = self.dim();
        let mut out = CMat::zeros(other.dim(), d);
        for (a, e) in self.elements.iter().enumerate() {
            out.set_column(a, &other.coords(e));
        }
        out
    }

    /// JSON dump: tag plus each basis matrix as rows of `[re, im]` pairs.
    pub fn to_json(&self) -> serde_json::Value {
        let matrices: Vec<Vec<Vec<[f64; 2]>>> = self
            .elements
            .iter()
            .map(|m| {
                (0..m.nrows())
                    .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                    .collect()
            })
            .collect();
        serde_json::json!({
            "tag": self.tag.to_string(),
            "matrix_size": self.size,
            "matrices": matrices,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ChevalleyTriple {
    pub root: Root,
    pub e: CMat,
    pub f: CMat,
    pub h: CMat,
}

/// Orthonormal basis of the compact form `su(n+1)` under `-1/2 tr`.
#[derive(Debug, Clone)]
pub struct CompactBasis {
    /// The root subset whose `(V, W)` pairs lead the ordering.
    pub parabolic: Vec<Root>,
    /// Root order of the `(V_a, W_a)` pairs: parabolic roots first.
    pub pair_order: Vec<Root>,
    pub basis: MatrixBasis,
    pub gram: DMatrix<f64>,
}

impl CompactBasis {
    /// Half the number of leading orbit directions.
    pub fn m(&self) -> usize {
        self.parabolic.len()
    }

    pub fn pair_index(&self, root: &Root) -> Option<usize> {
        self.pair_order.iter().position(|r| r == root)
    }

    /// Index of `V_root`; `W_root` sits right after it.
    pub fn v_index(&self, root: &Root) -> Option<usize> {
        self.pair_index(root).map(|k| 2 * k)
    }

    pub fn cartan_start(&self) -> usize {
        2 * self.pair_order.len()
    }
}

#[derive(Debug, Clone)]
pub struct LieBasis {
    pub root_system: RootSystem,
    pub triples: Vec<ChevalleyTriple>,
    pub chevalley: MatrixBasis,
    pub compact: Option<CompactBasis>,
}

impl LieBasis {
    pub fn dimension_complex(&self) -> usize {
        self.chevalley.dim()
    }

    pub fn matrix_size(&self) -> usize {
        self.root_system.matrix_size()
    }

    pub fn compact(&self) -> Result<&CompactBasis> {
        self.compact.as_ref().ok_or(Error::CompactNotPopulated)
    }

    pub fn triple(&self, root: &Root) -> Option<&ChevalleyTriple> {
        self.triples.iter().find(|t| t.root == *root)
    }

    /// Checks the compact-form invariants and returns the worst residual of each.
    pub fn validate(&self) -> Result<BasisValidation> {
        let compact = self.compact()?;
        let elems = compact.basis.elements();
        let mut anti_hermitian = 0.0f64;
        let mut traceless = 0.0f64;
        for m in elems {
            anti_hermitian = anti_hermitian.max((m.adjoint() + m).norm());
            traceless = traceless.max(m.trace().norm());
        }
        let d = elems.len();
        let mut orthonormality = 0.0f64;
        for a in 0..d {
            for b in 0..d {
                let target = if a == b { 1.0 } else { 0.0 };
                orthonormality = orthonormality.max((compact.gram[(a, b)] - target).abs());
            }
        }
        let mut closure = 0.0f64;
        for a in 0..d {
            for b in 0..d {
                let br = commutator(&elems[a], &elems[b]);
                let coords = compact.basis.coords(&br);
                let imag = coords.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
                let real: Vec<Complex64> = coords.iter().map(|c| Complex64::new(c.re, 0.0)).collect();
                let recon = (compact.basis.combine(&real) - &br).norm();
                closure = closure.max(imag).max(recon);
            }
        }
        Ok(BasisValidation {
            compact_dim: d,
            anti_hermitian,
            traceless,
            orthonormality,
            closure,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BasisValidation {
    pub compact_dim: usize,
    pub anti_hermitian: f64,
    pub traceless: f64,
    pub orthonormality: f64,
    pub closure: f64,
}

impl BasisValidation {
    pub fn passes(&self, tol: f64) -> bool {
        self.anti_hermitian <= tol && self.traceless <= tol && self.orthonormality <= tol && self.closure <= tol
    }
}

/// Chevalley generators `E_a = E_ij`, `E_{-a} = E_ji`, `H_a = E_ii - E_jj`.
///
/// The Chevalley basis lists all `E_a`, then all `E_{-a}` (both in positive
/// root order), then `H` for the simple roots.
pub fn chevalley_basis(rs: &RootSystem) -> Result<LieBasis> {
    let n = rs.matrix_size();
    let triples: Vec<ChevalleyTriple> = rs
        .positive_roots
        .iter()
        .map(|&root| ChevalleyTriple {
            root,
            e: elementary(n, root.i, root.j),
            f: elementary(n, root.j, root.i),
            h: elementary(n, root.i, root.i) - elementary(n, root.j, root.j),
        })
        .collect();
    let mut elements: Vec<CMat> = triples.iter().map(|t| t.e.clone()).collect();
    elements.extend(triples.iter().map(|t| t.f.clone()));
    for s in &rs.simple_roots {
        let t = triples.iter().find(|t| t.root == *s).expect("simple root is positive");
        elements.push(t.h.clone());
    }
    let chevalley = MatrixBasis::new(BasisTag::Chevalley, elements)?;
    Ok(LieBasis {
        root_system: rs.clone(),
        triples,
        chevalley,
        compact: None,
    })
}

/// The Chevalley antiinvolution `X -> -X^dagger`, whose fixed points form the compact real form.
pub fn chevalley_antiinvolution(x: &CMat) -> CMat {
    -x.adjoint()
}

/// Populates the orthonormal compact basis with the `dp` pairs leading.
pub fn compact_basis(basis: &LieBasis, dp: &[Root]) -> Result<LieBasis> {
    let rs = &basis.root_system;
    for (k, root) in dp.iter().enumerate() {
        if !rs.contains(root) {
            return Err(Error::InvalidParabolic(format!(
                "{root} is not a positive root of A{}",
                rs.rank
            )));
        }
        if dp[..k].contains(root) {
            return Err(Error::InvalidParabolic(format!("{root} listed twice")));
        }
    }
    let mut parabolic: Vec<Root> = dp.to_vec();
    parabolic.sort_by_key(|r| rs.root_index(r));
    let mut pair_order = parabolic.clone();
    pair_order.extend(rs.positive_roots.iter().filter(|r| !parabolic.contains(r)));

    let mut elements = Vec::with_capacity(basis.dimension_complex());
    for root in &pair_order {
        let t = basis.triple(root).expect("root has a triple");
        elements.push(&t.e - &t.f);
        elements.push((&t.e + &t.f) * I);
    }

    // Gram-Schmidt on iH over the simple roots.
    let mut cartan: Vec<CMat> = Vec::with_capacity(rs.rank);
    for s in &rs.simple_roots {
        let t = basis.triple(s).expect("simple root has a triple");
        let mut v = &t.h * I;
        for u in &cartan {
            let proj = trace_form(u, &v)?;
            v -= u * Complex64::new(proj, 0.0);
        }
        let norm = trace_form(&v, &v)?.sqrt();
        cartan.push(v / Complex64::new(norm, 0.0));
    }
    elements.extend(cartan);

    let d = elements.len();
    let mut gram = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            gram[(a, b)] = trace_form(&elements[a], &elements[b])?;
        }
    }
    let compact = MatrixBasis::new(BasisTag::Compact, elements)?;
    Ok(LieBasis {
        compact: Some(CompactBasis {
            parabolic,
            pair_order,
            basis: compact,
            gram,
        }),
        ..basis.clone()
    })
}

/// An element of `SU(n+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement {
    matrix: CMat,
}

impl GroupElement {
    pub fn new(matrix: CMat) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Shape(format!("group element of shape {:?}", matrix.shape())));
        }
        let n = matrix.nrows();
        let unitarity = (matrix.adjoint() * &matrix - CMat::identity(n, n)).norm();
        let det = (matrix.determinant() - ONE).norm();
        if unitarity > ALGEBRAIC_TOL * n as f64 || det > ALGEBRAIC_TOL * n as f64 {
            return Err(Error::Shape(format!(
                "matrix is not special unitary (|U*U - I| = {unitarity:e}, |det - 1| = {det:e})"
            )));
        }
        Ok(GroupElement { matrix })
    }

    pub fn identity(size: usize) -> Self {
        GroupElement {
            matrix: CMat::identity(size, size),
        }
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn inverse(&self) -> Self {
        GroupElement {
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn compose(&self, other: &GroupElement) -> Self {
        GroupElement {
            matrix: &self.matrix * &other.matrix,
        }
    }

    /// `g X g^{-1}`.
    pub fn conjugate(&self, x: &CMat) -> CMat {
        &self.matrix * x * self.matrix.adjoint()
    }

    pub fn unitarity_residual(&self) -> f64 {
        let n = self.size();
        (self.matrix.adjoint() * &self.matrix - CMat::identity(n, n)).norm()
    }

    pub fn det_residual(&self) -> f64 {
        (self.matrix.determinant() - ONE).norm()
    }
}

/// Antidiagonal representative of the longest Weyl element with signs
/// `(-1)^k` on row `k`, which makes the determinant exactly 1.
pub fn longest_weyl_representative(rs: &RootSystem) -> GroupElement {
    let n = rs.matrix_size();
    let mut m = CMat::zeros(n, n);
    for k in 0..n {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        m[(k, n - 1 - k)] = Complex64::new(sign, 0.0);
    }
    GroupElement { matrix: m }
}

/// `exp(t V_a)` for `V_a = E_ij - E_ji`: a rotation in the `(i, j)` plane.
pub fn root_rotation(size: usize, root: &Root, t: f64) -> GroupElement {
    let (i, j) = (root.i - 1, root.j - 1);
    let mut m = CMat::identity(size, size);
    let (s, c) = t.sin_cos();
    m[(i, i)] = Complex64::new(c, 0.0);
    m[(j, j)] = Complex64::new(c, 0.0);
    m[(i, j)] = Complex64::new(s, 0.0);
    m[(j, i)] = Complex64::new(-s, 0.0);
    GroupElement { matrix: m }
}

/// Haar-distributed element of `SU(size)` drawn from `rng`.
pub fn random_group_element_from<R: Rng + ?Sized>(size: usize, rng: &mut R) -> GroupElement {
    let z = CMat::from_fn(size, size, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) / std::f64::consts::SQRT_2
    });
    let qr = z.qr();
    let (mut q, r) = qr.unpack();
    for k in 0..size {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        let mut col = q.column_mut(k);
        col *= phase;
    }
    let det = q.determinant();
    let correction = Complex64::from_polar(1.0, -det.arg() / size as f64);
    q *= correction;
    GroupElement { matrix: q }
}

/// Deterministic Haar sample for a given seed.
pub fn random_group_element(size: usize, seed: u64) -> GroupElement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_group_element_from(size, &mut rng)
}

/// `count` Haar samples from a single seeded stream.
pub fn haar_samples(size: usize, count: usize, seed: u64) -> Vec<GroupElement> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_group_element_from(size, &mut rng)).collect()
}

/// Real coordinates of `x` in the compact basis.
pub fn compact_coords(compact: &CompactBasis, x: &CMat) -> DVector<f64> {
    compact.basis.coords(x).map(|c| c.re)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn su(rank: usize, dp: &[Root]) -> LieBasis {
        let rs = build_root_system(Series::A, rank).unwrap();
        compact_basis(&chevalley_basis(&rs).unwrap(), dp).unwrap()
    }

    #[test]
    fn a1_and_a2_roots() {
        let a1 = build_root_system(Series::A, 1).unwrap();
        assert_eq!(a1.positive_roots, vec![Root::new(1, 2)]);
        let a2 = build_root_system(Series::A, 2).unwrap();
        assert_eq!(a2.positive_roots.len(), 3);
        assert_eq!(a2.simple_roots, vec![Root::new(1, 2), Root::new(2, 3)]);
        for r in [Root::new(1, 2), Root::new(2, 3), Root::new(1, 3)] {
            assert!(a2.contains(&r));
        }
    }

    #[test]
    fn a3_root_count_by_enumeration() {
        // Oracle: enumerate e_i - e_j over all ordered pairs and keep the positive ones.
        let size = 4;
        let mut count = 0;
        for i in 0..size {
            for j in 0..size {
                if i != j {
                    let mut v = vec![0i32; size];
                    v[i] += 1;
                    v[j] -= 1;
                    let first = v.iter().find(|x| **x != 0).unwrap();
                    if *first > 0 {
                        count += 1;
                    }
                }
            }
        }
        let rs = build_root_system(Series::A, 3).unwrap();
        assert_eq!(count, 6);
        assert_eq!(rs.positive_roots.len(), count);
        for r in &rs.positive_roots {
            let exp = r.simple_expansion(3);
            assert!(exp.iter().sum::<u32>() >= 1);
        }
    }

    #[test]
    fn unsupported_series() {
        assert!(matches!(
            build_root_system(Series::B, 2),
            Err(Error::UnsupportedAlgebra { .. })
        ));
        assert!(build_root_system(Series::A, 0).is_err());
        assert!("Q".parse::<Series>().is_err());
    }

    #[test]
    fn sl2_relations() {
        let b = su(1, &[]);
        let t = &b.triples[0];
        let h = commutator(&t.e, &t.f);
        assert!((h - &t.h).norm() < ALGEBRAIC_TOL);
        assert_eq!(t.h[(0, 0)], ONE);
        assert_eq!(t.h[(1, 1)], -ONE);
        // sigma(E) = -F
        assert!((chevalley_antiinvolution(&t.e) + &t.f).norm() < ALGEBRAIC_TOL);
        assert!((chevalley_antiinvolution(&t.h) + &t.h).norm() < ALGEBRAIC_TOL);
    }

    #[test]
    fn a2_structure_constant_e12_e23() {
        let b = su(2, &[]);
        let e12 = elementary(3, 1, 2);
        let e23 = elementary(3, 2, 3);
        // Oracle: explicit product
        let mut prod = CMat::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    prod[(i, j)] += e12[(i, k)] * e23[(k, j)] - e23[(i, k)] * e12[(k, j)];
                }
            }
        }
        assert!((prod - elementary(3, 1, 3)).norm() < ALGEBRAIC_TOL);
        let ch = &b.chevalley;
        let a = b.root_system.root_index(&Root::new(1, 2)).unwrap();
        let c = b.root_system.root_index(&Root::new(2, 3)).unwrap();
        let target = b.root_system.root_index(&Root::new(1, 3)).unwrap();
        let k = ch.structure_constants().get(target, a, c);
        assert!((k - ONE).norm() < ALGEBRAIC_TOL);
    }

    #[test]
    fn su2_compact_generators() {
        let b = su(1, &[Root::new(1, 2)]);
        let c = b.compact().unwrap();
        let v = c.basis.element(0);
        let w = c.basis.element(1);
        let expected_v = CMat::from_row_slice(2, 2, &[ZERO, ONE, -ONE, ZERO]);
        let expected_w = CMat::from_row_slice(2, 2, &[ZERO, I, I, ZERO]);
        assert!((v - expected_v).norm() < ALGEBRAIC_TOL);
        assert!((w - expected_w).norm() < ALGEBRAIC_TOL);
        assert!((trace_form(v, v).unwrap() - 1.0).abs() < ALGEBRAIC_TOL);
        assert!((trace_form(w, w).unwrap() - 1.0).abs() < ALGEBRAIC_TOL);
        assert!(trace_form(v, w).unwrap().abs() < ALGEBRAIC_TOL);
        let ih = c.basis.element(2);
        assert!(trace_form(ih, v).unwrap().abs() < ALGEBRAIC_TOL);
        assert!(trace_form(&CMat::zeros(2, 2), v).unwrap() == 0.0);
    }

    #[test]
    fn parabolic_pairs_lead() {
        let b = su(2, &[Root::new(1, 3)]);
        let c = b.compact().unwrap();
        let t = b.triple(&Root::new(1, 3)).unwrap();
        assert!((c.basis.element(0) - (&t.e - &t.f)).norm() < ALGEBRAIC_TOL);
        assert!((c.basis.element(1) - (&t.e + &t.f) * I).norm() < ALGEBRAIC_TOL);
        assert_eq!(c.m(), 1);
    }

    #[test]
    fn invalid_parabolic() {
        let rs = build_root_system(Series::A, 2).unwrap();
        let b = chevalley_basis(&rs).unwrap();
        assert!(matches!(
            compact_basis(&b, &[Root::new(1, 4)]),
            Err(Error::InvalidParabolic(_))
        ));
        assert!(matches!(
            compact_basis(&b, &[Root::new(1, 2), Root::new(1, 2)]),
            Err(Error::InvalidParabolic(_))
        ));
        assert!(matches!(b.compact(), Err(Error::CompactNotPopulated)));
    }

    #[test]
    fn compact_invariants_hold_for_ranks_1_to_4() {
        for rank in 1..=4 {
            let b = su(rank, &[Root::new(1, 2)]);
            let v = b.validate().unwrap();
            assert_eq!(v.compact_dim, (rank + 1) * (rank + 1) - 1);
            assert!(v.passes(ALGEBRAIC_TOL), "rank {rank}: {v:?}");
        }
    }

    #[test]
    fn trace_form_shape_mismatch() {
        assert!(matches!(
            trace_form(&CMat::zeros(2, 2), &CMat::zeros(3, 3)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn longest_element_a1() {
        let rs = build_root_system(Series::A, 1).unwrap();
        let w = longest_weyl_representative(&rs);
        let expected = CMat::from_row_slice(2, 2, &[ZERO, ONE, -ONE, ZERO]);
        assert_eq!(w.matrix(), &expected);
        let img = w.conjugate(&elementary(2, 1, 2));
        // proportional to E21
        assert!(img[(0, 1)].norm() < ALGEBRAIC_TOL && img[(1, 0)].norm() > 0.5);
        for rank in 1..=4 {
            let rs = build_root_system(Series::A, rank).unwrap();
            let w = longest_weyl_representative(&rs);
            assert!(w.det_residual() < ALGEBRAIC_TOL);
            assert!(w.unitarity_residual() < ALGEBRAIC_TOL);
        }
    }

    #[test]
    fn haar_samples_are_special_unitary_and_deterministic() {
        for seed in 0..20 {
            let u = random_group_element(3, seed);
            assert!(u.unitarity_residual() < ALGEBRAIC_TOL);
            assert!(u.det_residual() < ALGEBRAIC_TOL);
        }
        assert_eq!(random_group_element(2, 42), random_group_element(2, 42));
        assert_ne!(random_group_element(2, 42), random_group_element(2, 43));
    }

    #[test]
    fn haar_monte_carlo_u11() {
        // For Haar SU(2), |U_11|^2 is uniform on [0, 1].
        let samples = haar_samples(2, 1000, 5);
        let mean: f64 = samples.iter().map(|u| u.matrix()[(0, 0)].norm_sqr()).sum::<f64>() / 1000.0;
        assert!((mean - 0.5).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn group_element_rejects_non_unitary() {
        let m = CMat::from_row_slice(2, 2, &[ONE, ONE, ZERO, ONE]);
        assert!(GroupElement::new(m).is_err());
        assert!(GroupElement::new(CMat::identity(3, 3)).is_ok());
    }

    #[test]
    fn basis_json_dump_shape() {
        let b = su(1, &[Root::new(1, 2)]);
        let json = b.compact().unwrap().basis.to_json();
        assert_eq!(json["matrices"].as_array().unwrap().len(), 3);
        assert_eq!(json["matrices"][1][0][1], serde_json::json!([0.0, 1.0]));
    }
}
