//! Classical r-matrices over `su(n+1)` and their algebraic Schouten square.
//!
//! A [`Tensor2`] stores `t = sum_{a<b} t^{ab} e_a ^ e_b` through the full
//! antisymmetric array `t^{ab}`; with `e_a ^ e_b = e_a (x) e_b - e_b (x) e_a`
//! that array is also the coefficient array of `t` as an element of `g (x) g`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lie_core::{BasisTag, CMat, GroupElement, LieBasis, MatrixBasis, Root};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor2 {
    pub tag: BasisTag,
    pub coeffs: CMat,
}

impl Tensor2 {
    pub fn zeros(tag: BasisTag, dim: usize) -> Self {
        Tensor2 {
            tag,
            coeffs: CMat::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.nrows()
    }

    /// Adds `c e_a ^ e_b`.
    pub fn add_wedge(&mut self, a: usize, b: usize, c: Complex64) {
        self.coeffs[(a, b)] += c;
        self.coeffs[(b, a)] -= c;
    }

    pub fn scaled(&self, s: f64) -> Self {
        Tensor2 {
            tag: self.tag.clone(),
            coeffs: &self.coeffs * Complex64::new(s, 0.0),
        }
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.norm()
    }

    pub fn antisymmetry_residual(&self) -> f64 {
        (&self.coeffs + self.coeffs.transpose()).norm()
    }

    /// Real part of the coefficient array (for tensors over the compact basis).
    pub fn real_matrix(&self) -> DMatrix<f64> {
        self.coeffs.map(|c| c.re)
    }

    pub fn from_real(tag: BasisTag, m: &DMatrix<f64>) -> Self {
        Tensor2 {
            tag,
            coeffs: m.map(|x| Complex64::new(x, 0.0)),
        }
    }

    /// Rewrites the tensor over `to`; `from` must be the basis it is declared over.
    pub fn transport(&self, from: &MatrixBasis, to: &MatrixBasis) -> Result<Tensor2> {
        check_basis(&self.tag, self.dim(), from)?;
        let m = from.transition_to(to);
        Ok(Tensor2 {
            tag: to.tag().clone(),
            coeffs: &m * &self.coeffs * m.transpose(),
        })
    }

    pub fn try_add(&self, other: &Tensor2) -> Result<Tensor2> {
        if self.tag != other.tag || self.dim() != other.dim() {
            return Err(Error::Shape(format!(
                "cannot add tensors over {} ({}) and {} ({})",
                self.tag,
                self.dim(),
                other.tag,
                other.dim()
            )));
        }
        Ok(Tensor2 {
            tag: self.tag.clone(),
            coeffs: &self.coeffs + &other.coeffs,
        })
    }

    pub fn try_sub(&self, other: &Tensor2) -> Result<Tensor2> {
        self.try_add(&other.scaled(-1.0))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(TensorDump::from_tensor2(self)).expect("tensor dump serializes")
    }
}

/// Fully antisymmetric rank-3 tensor stored as a dense `d^3` array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    pub tag: BasisTag,
    dim: usize,
    data: Vec<Complex64>,
}

impl Tensor3 {
    pub fn zeros(tag: BasisTag, dim: usize) -> Self {
        Tensor3 {
            tag,
            dim,
            data: vec![ZERO; dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn idx(&self, a: usize, b: usize, c: usize) -> usize {
        (a * self.dim + b) * self.dim + c
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> Complex64 {
        self.data[self.idx(a, b, c)]
    }

    /// Adds `c e_a ^ e_b ^ e_c` (all six signed permutations).
    pub fn add_wedge(&mut self, a: usize, b: usize, c: usize, v: Complex64) {
        for (p, s) in [
            ((a, b, c), 1.0),
            ((b, c, a), 1.0),
            ((c, a, b), 1.0),
            ((b, a, c), -1.0),
            ((a, c, b), -1.0),
            ((c, b, a), -1.0),
        ] {
            let k = self.idx(p.0, p.1, p.2);
            self.data[k] += v * s;
        }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Tensor3 {
            tag: self.tag.clone(),
            dim: self.dim,
            data: self.data.iter().map(|c| c * s).collect(),
        }
    }

    pub fn distance(&self, other: &Tensor3) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Projection onto the totally antisymmetric part.
    pub fn antisymmetrized(&self) -> Tensor3 {
        let d = self.dim;
        let mut out = Tensor3::zeros(self.tag.clone(), d);
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    let v = self.get(a, b, c) + self.get(b, c, a) + self.get(c, a, b)
                        - self.get(b, a, c)
                        - self.get(a, c, b)
                        - self.get(c, b, a);
                    let k = out.idx(a, b, c);
                    out.data[k] = v / 6.0;
                }
            }
        }
        out
    }

    pub fn antisymmetry_residual(&self) -> f64 {
        self.distance(&self.antisymmetrized())
    }

    /// Applies `m (x) m (x) m`.
    pub fn transform(&self, m: &CMat, tag: BasisTag) -> Tensor3 {
        let d = self.dim;
        let e = m.nrows();
        let mut first = vec![ZERO; e * d * d];
        for x in 0..e {
            for a in 0..d {
                let mxa = m[(x, a)];
                if mxa == ZERO {
                    continue;
                }
                for b in 0..d {
                    for c in 0..d {
                        first[(x * d + b) * d + c] += mxa * self.get(a, b, c);
                    }
                }
            }
        }
        let mut second = vec![ZERO; e * e * d];
        for x in 0..e {
            for y in 0..e {
                for b in 0..d {
                    let myb = m[(y, b)];
                    if myb == ZERO {
                        continue;
                    }
                    for c in 0..d {
                        second[(x * e + y) * d + c] += myb * first[(x * d + b) * d + c];
                    }
                }
            }
        }
        let mut out = Tensor3::zeros(tag, e);
        for x in 0..e {
            for y in 0..e {
                for z in 0..e {
                    let mut acc = ZERO;
                    for c in 0..d {
                        acc += m[(z, c)] * second[(x * e + y) * d + c];
                    }
                    let k = out.idx(x, y, z);
                    out.data[k] = acc;
                }
            }
        }
        out
    }

    pub fn transport(&self, from: &MatrixBasis, to: &MatrixBasis) -> Result<Tensor3> {
        check_basis(&self.tag, self.dim, from)?;
        Ok(self.transform(&from.transition_to(to), to.tag().clone()))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let d = self.dim;
        let coefficients: Vec<Vec<Vec<[f64; 2]>>> = (0..d)
            .map(|a| {
                (0..d)
                    .map(|b| {
                        (0..d)
                            .map(|c| {
                                let v = self.get(a, b, c);
                                [v.re, v.im]
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        serde_json::json!({
            "basis": self.tag.to_string(),
            "dim": d,
            "coefficients": coefficients,
        })
    }
}

#[derive(Serialize)]
struct TensorDump {
    basis: String,
    dim: usize,
    coefficients: Vec<Vec<[f64; 2]>>,
}

impl TensorDump {
    fn from_tensor2(t: &Tensor2) -> Self {
        let d = t.dim();
        TensorDump {
            basis: t.tag.to_string(),
            dim: d,
            coefficients: (0..d)
                .map(|a| (0..d).map(|b| [t.coeffs[(a, b)].re, t.coeffs[(a, b)].im]).collect())
                .collect(),
        }
    }
}

fn check_basis(tag: &BasisTag, dim: usize, basis: &MatrixBasis) -> Result<()> {
    if tag != basis.tag() || dim != basis.dim() {
        return Err(Error::Shape(format!(
            "tensor over {tag} (dim {dim}) used with basis {} (dim {})",
            basis.tag(),
            basis.dim()
        )));
    }
    Ok(())
}

/// `r = (i/2) sum_{a in Delta+} E_a ^ E_{-a}` over the Chevalley basis.
pub fn drinfeld_jimbo_r(basis: &LieBasis) -> Tensor2 {
    let p = basis.root_system.positive_roots.len();
    let mut r = Tensor2::zeros(BasisTag::Chevalley, basis.dimension_complex());
    for k in 0..p {
        r.add_wedge(k, p + k, Complex64::new(0.0, 0.5));
    }
    r
}

/// `r_o = 1/4 sum_{a in Delta+} V_a ^ W_a` over the compact basis.
pub fn compact_r(basis: &LieBasis) -> Result<Tensor2> {
    let compact = basis.compact()?;
    let mut r = Tensor2::zeros(BasisTag::Compact, compact.basis.dim());
    for k in 0..compact.pair_order.len() {
        r.add_wedge(2 * k, 2 * k + 1, Complex64::new(0.25, 0.0));
    }
    Ok(r)
}

/// `r_p = 1/4 sum_{a in dp} V_a ^ W_a`; `dp` must lie in the leading block
/// of the compact ordering.
pub fn parabolic_r(basis: &LieBasis, dp: &[Root]) -> Result<Tensor2> {
    let compact = basis.compact()?;
    let mut r = Tensor2::zeros(BasisTag::Compact, compact.basis.dim());
    for root in dp {
        if !compact.parabolic.contains(root) {
            return Err(Error::InvalidParabolic(format!(
                "{root} is not among the leading compact pairs {:?}",
                compact.parabolic
            )));
        }
        let v = compact.v_index(root).expect("parabolic root is paired");
        r.add_wedge(v, v + 1, Complex64::new(0.25, 0.0));
    }
    Ok(r)
}

/// The algebraic Schouten square `[[r, r]] = [r12, r13] + [r12, r23] + [r13, r23]`
/// contracted against the structure constants of `basis`, then antisymmetrized.
pub fn schouten_square(r: &Tensor2, basis: &MatrixBasis) -> Result<Tensor3> {
    check_basis(&r.tag, r.dim(), basis)?;
    let d = r.dim();
    let c = basis.structure_constants();
    let t = &r.coeffs;

    let mut out = Tensor3::zeros(r.tag.clone(), d);
    // ct[x, a, z] = sum_c C^x_{ac} T^{cz}
    let mut ct = vec![ZERO; d * d * d];
    for x in 0..d {
        for a in 0..d {
            for cc in 0..d {
                let k = c.get(x, a, cc);
                if k == ZERO {
                    continue;
                }
                for z in 0..d {
                    ct[(x * d + a) * d + z] += k * t[(cc, z)];
                }
            }
        }
    }
    for x in 0..d {
        for y in 0..d {
            for z in 0..d {
                let mut acc = ZERO;
                // [r12, r13]: sum_{a,c} C^x_{ac} T^{ay} T^{cz}
                for a in 0..d {
                    acc += t[(a, y)] * ct[(x * d + a) * d + z];
                }
                // [r12, r23]: sum_{b,c} T^{xb} C^y_{bc} T^{cz}
                for b in 0..d {
                    let txb = t[(x, b)];
                    if txb != ZERO {
                        acc += txb * ct[(y * d + b) * d + z];
                    }
                }
                // [r13, r23]: sum_{b,e} T^{xb} T^{ye} C^z_{be}
                for b in 0..d {
                    let txb = t[(x, b)];
                    if txb == ZERO {
                        continue;
                    }
                    for e in 0..d {
                        let tye = t[(y, e)];
                        if tye != ZERO {
                            acc += txb * tye * c.get(z, b, e);
                        }
                    }
                }
                let k = out.idx(x, y, z);
                out.data[k] = acc;
            }
        }
    }
    Ok(out.antisymmetrized())
}

/// `Ad_g (x) Ad_g` applied to `t` in `basis`.
pub fn ad_tensor2(g: &GroupElement, t: &Tensor2, basis: &MatrixBasis) -> Result<Tensor2> {
    check_basis(&t.tag, t.dim(), basis)?;
    let a = basis.adjoint_matrix(g);
    Ok(Tensor2 {
        tag: t.tag.clone(),
        coeffs: &a * &t.coeffs * a.transpose(),
    })
}

pub fn ad_tensor3(g: &GroupElement, t: &Tensor3, basis: &MatrixBasis) -> Result<Tensor3> {
    check_basis(&t.tag, t.dim(), basis)?;
    Ok(t.transform(&basis.adjoint_matrix(g), t.tag.clone()))
}

/// Largest `|| Ad_g^{(x)3} t - t ||_F` over `samples`.
pub fn check_ad_invariance(t: &Tensor3, basis: &MatrixBasis, samples: &[GroupElement]) -> Result<f64> {
    let mut worst = 0.0f64;
    for g in samples {
        let moved = ad_tensor3(g, t, basis)?;
        worst = worst.max(moved.distance(t));
    }
    Ok(worst)
}
