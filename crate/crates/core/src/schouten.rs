//! Multivector calculus on coordinate charts.
//!
//! Fields are callables from chart points to coefficient arrays. A bivector
//! `pi` is stored as the antisymmetric matrix `pi^{ij}` with
//! `{f, g} = pi^{ij} d_i f d_j g`. Derivatives come from an optional closed-form
//! Jacobian, falling back to central differences with step `h * max(1, |x_k|)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Sign in `[[X, pi]] = SCHOUTEN_SIGN * (X^k d_k pi^{ij} - pi^{kj} d_k X^i - pi^{ik} d_k X^j)`.
///
/// Anchored so that `pi = p d_p ^ d_q`, `X = q d_q` satisfies `pi + L_X pi = 0`
/// with `L_X pi = [[X, pi]]`. Every other bracket in this module inherits it.
pub const SCHOUTEN_SIGN: f64 = 1.0;

/// Default finite-difference step.
pub const DEFAULT_STEP: f64 = 1e-4;

/// `|c|` below this makes a planar bivector degenerate.
pub const DEGENERACY_CUTOFF: f64 = 1e-10;

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;
type MatrixFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
type MatrixListFn = Arc<dyn Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync>;
pub type PlanarGrad = Arc<dyn Fn(&[f64]) -> [f64; 2] + Send + Sync>;

/// Open coordinate box; infinite bounds are allowed.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    All,
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl Domain {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::All => x.iter().all(|v| v.is_finite()),
            Domain::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| *v > *l && *v < *h),
        }
    }

    fn check(&self, x: &[f64], reason: &str) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain {
                point: x.to_vec(),
                reason: reason.to_string(),
            })
        }
    }
}

fn step(x: f64, h: f64) -> f64 {
    h * x.abs().max(1.0)
}

/// Central difference of a vector-space valued map along coordinate `k`.
fn central<T, F>(domain: &Domain, x: &[f64], k: usize, h: f64, f: F) -> Result<T>
where
    F: Fn(&[f64]) -> T,
    T: std::ops::Sub<Output = T> + std::ops::Div<f64, Output = T>,
{
    let hk = step(x[k], h);
    let mut plus = x.to_vec();
    let mut minus = x.to_vec();
    plus[k] += hk;
    minus[k] -= hk;
    domain.check(&plus, "finite-difference stencil")?;
    domain.check(&minus, "finite-difference stencil")?;
    Ok((f(&plus) - f(&minus)) / (2.0 * hk))
}

#[derive(Clone)]
pub struct ChartFunction {
    pub domain: Domain,
    f: ScalarFn,
}

impl ChartFunction {
    pub fn new(domain: Domain, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        ChartFunction { domain, f: Arc::new(f) }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    pub fn gradient(&self, x: &[f64], h: f64) -> Result<DVector<f64>> {
        self.domain.check(x, "function evaluation")?;
        let g: Result<Vec<f64>> = (0..x.len())
            .map(|k| central(&self.domain, x, k, h, |p| (self.f)(p)))
            .collect();
        Ok(DVector::from_vec(g?))
    }
}

impl fmt::Debug for ChartFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChartFunction").field("domain", &self.domain).finish()
    }
}

#[derive(Clone)]
pub struct ChartVector {
    pub label: String,
    pub dim: usize,
    pub domain: Domain,
    coeff: VectorFn,
    /// `J[(i, k)] = d_k X^i`.
    jacobian: Option<MatrixFn>,
}

impl ChartVector {
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        domain: Domain,
        coeff: impl Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        ChartVector {
            label: label.into(),
            dim,
            domain,
            coeff: Arc::new(coeff),
            jacobian: None,
        }
    }

    pub fn with_jacobian(mut self, jac: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    pub fn zero(dim: usize, domain: Domain) -> Self {
        ChartVector::new("0", dim, domain, move |_| DVector::zeros(dim))
            .with_jacobian(move |_| DMatrix::zeros(dim, dim))
    }

    pub fn has_closed_form(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn value(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.domain.check(x, &self.label)?;
        Ok((self.coeff)(x))
    }

    pub fn jacobian(&self, x: &[f64], h: f64) -> Result<DMatrix<f64>> {
        self.domain.check(x, &self.label)?;
        if let Some(j) = &self.jacobian {
            return Ok(j(x));
        }
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for k in 0..self.dim {
            let col = central(&self.domain, x, k, h, |p| (self.coeff)(p))?;
            out.set_column(k, &col);
        }
        Ok(out)
    }

    /// `X(f)` at `x`.
    pub fn apply(&self, f: &ChartFunction, x: &[f64], h: f64) -> Result<f64> {
        Ok(self.value(x)?.dot(&f.gradient(x, h)?))
    }

    pub fn scaled(&self, s: f64) -> ChartVector {
        let inner = self.clone();
        let jac = self.jacobian.clone();
        let mut out = ChartVector::new(format!("{s}*{}", self.label), self.dim, self.domain.clone(), move |x| {
            (inner.coeff)(x) * s
        });
        if let Some(j) = jac {
            out.jacobian = Some(Arc::new(move |x| j(x) * s));
        }
        out
    }
}

impl fmt::Debug for ChartVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChartVector")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("closed_form", &self.jacobian.is_some())
            .finish()
    }
}

#[derive(Clone)]
pub struct ChartBivector {
    pub label: String,
    pub dim: usize,
    pub domain: Domain,
    coeff: MatrixFn,
    /// `J[k] = d_k pi`.
    jacobian: Option<MatrixListFn>,
}

impl ChartBivector {
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        domain: Domain,
        coeff: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        ChartBivector {
            label: label.into(),
            dim,
            domain,
            coeff: Arc::new(coeff),
            jacobian: None,
        }
    }

    pub fn with_jacobian(mut self, jac: impl Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    /// `c(x, y) d_x ^ d_y` on a 2D chart, with optional closed-form gradient of `c`.
    pub fn planar(
        label: impl Into<String>,
        domain: Domain,
        c: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: Option<PlanarGrad>,
    ) -> Self {
        let out = ChartBivector::new(label, 2, domain, move |x| planar_matrix(c(x)));
        match grad {
            Some(g) => out.with_jacobian(move |x| {
                let d = g(x);
                vec![planar_matrix(d[0]), planar_matrix(d[1])]
            }),
            None => out,
        }
    }

    pub fn has_closed_form(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn value(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.domain.check(x, &self.label)?;
        Ok((self.coeff)(x))
    }

    /// `d_k pi` at `x`.
    pub fn derivatives(&self, x: &[f64], h: f64) -> Result<Vec<DMatrix<f64>>> {
        self.domain.check(x, &self.label)?;
        if let Some(j) = &self.jacobian {
            return Ok(j(x));
        }
        (0..self.dim)
            .map(|k| central(&self.domain, x, k, h, |p| (self.coeff)(p)))
            .collect()
    }

    /// `{f, g}` at `x`.
    pub fn bracket(&self, f: &ChartFunction, g: &ChartFunction, x: &[f64], h: f64) -> Result<f64> {
        let p = self.value(x)?;
        Ok(f.gradient(x, h)?.dot(&(p * g.gradient(x, h)?)))
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &ChartBivector, b: f64) -> Result<ChartBivector> {
        if self.dim != other.dim {
            return Err(Error::Shape(format!(
                "bivectors on charts of dimension {} and {}",
                self.dim, other.dim
            )));
        }
        let (s, o) = (self.clone(), other.clone());
        let mut out = ChartBivector::new(
            format!("{a}*{} + {b}*{}", self.label, other.label),
            self.dim,
            self.domain.clone(),
            move |x| (s.coeff)(x) * a + (o.coeff)(x) * b,
        );
        if let (Some(js), Some(jo)) = (self.jacobian.clone(), other.jacobian.clone()) {
            out.jacobian = Some(Arc::new(move |x| {
                js(x).into_iter().zip(jo(x)).map(|(p, q)| p * a + q * b).collect()
            }));
        }
        Ok(out)
    }
}

impl fmt::Debug for ChartBivector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChartBivector")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("closed_form", &self.jacobian.is_some())
            .finish()
    }
}

#[derive(Clone)]
pub struct ChartForm2 {
    pub label: String,
    pub dim: usize,
    pub domain: Domain,
    coeff: MatrixFn,
}

impl ChartForm2 {
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        domain: Domain,
        coeff: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        ChartForm2 {
            label: label.into(),
            dim,
            domain,
            coeff: Arc::new(coeff),
        }
    }

    pub fn zero(dim: usize, domain: Domain) -> Self {
        ChartForm2::new("0", dim, domain, move |_| DMatrix::zeros(dim, dim))
    }

    pub fn value(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.domain.check(x, &self.label)?;
        Ok((self.coeff)(x))
    }

    /// Largest component of `d omega` at `x` (identically zero in 2D).
    pub fn closedness_residual(&self, x: &[f64], h: f64) -> Result<f64> {
        self.domain.check(x, &self.label)?;
        let d = self.dim;
        if d < 3 {
            return Ok(0.0);
        }
        let derivs: Vec<DMatrix<f64>> = (0..d)
            .map(|k| central(&self.domain, x, k, h, |p| (self.coeff)(p)))
            .collect::<Result<_>>()?;
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i + 1..d {
                for k in j + 1..d {
                    let v = derivs[i][(j, k)] + derivs[j][(k, i)] + derivs[k][(i, j)];
                    worst = worst.max(v.abs());
                }
            }
        }
        Ok(worst)
    }
}

impl fmt::Debug for ChartForm2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChartForm2")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .finish()
    }
}

pub fn planar_matrix(c: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, c, -c, 0.0])
}

/// Multivector fields of degree at most two.
#[derive(Debug, Clone, Copy)]
pub enum Field<'a> {
    Function(&'a ChartFunction),
    Vector(&'a ChartVector),
    Bivector(&'a ChartBivector),
}

impl Field<'_> {
    pub fn degree(&self) -> usize {
        match self {
            Field::Function(_) => 0,
            Field::Vector(_) => 1,
            Field::Bivector(_) => 2,
        }
    }
}

/// Pointwise value of a multivector field.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldValue {
    Scalar(f64),
    Vector(DVector<f64>),
    Bivector(DMatrix<f64>),
    /// Dense `d^3` array, index `(i * d + j) * d + k`.
    Trivector {
        dim: usize,
        data: Vec<f64>,
    },
}

impl FieldValue {
    pub fn norm(&self) -> f64 {
        match self {
            FieldValue::Scalar(s) => s.abs(),
            FieldValue::Vector(v) => v.norm(),
            FieldValue::Bivector(m) => m.norm(),
            FieldValue::Trivector { data, .. } => data.iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }

    pub fn negated(&self) -> FieldValue {
        match self {
            FieldValue::Scalar(s) => FieldValue::Scalar(-s),
            FieldValue::Vector(v) => FieldValue::Vector(-v),
            FieldValue::Bivector(m) => FieldValue::Bivector(-m),
            FieldValue::Trivector { dim, data } => FieldValue::Trivector {
                dim: *dim,
                data: data.iter().map(|v| -v).collect(),
            },
        }
    }

    /// Norm of `self - other`; `None` when the degrees differ.
    pub fn distance(&self, other: &FieldValue) -> Option<f64> {
        match (self, other) {
            (FieldValue::Scalar(a), FieldValue::Scalar(b)) => Some((a - b).abs()),
            (FieldValue::Vector(a), FieldValue::Vector(b)) => Some((a - b).norm()),
            (FieldValue::Bivector(a), FieldValue::Bivector(b)) => Some((a - b).norm()),
            (FieldValue::Trivector { data: a, .. }, FieldValue::Trivector { data: b, .. }) => {
                Some(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
            }
            _ => None,
        }
    }
}

/// `c(f)` with `c(f) g = {f, g}`: component `i` is `sum_j pi^{ji} d_j f`.
pub fn hamiltonian_vector(pi: &ChartBivector, f: &ChartFunction, x: &[f64], h: f64) -> Result<DVector<f64>> {
    let p = pi.value(x)?;
    Ok(p.transpose() * f.gradient(x, h)?)
}

/// `c(f)` as a vector field (derivatives by finite differences).
pub fn hamiltonian_field(pi: &ChartBivector, f: &ChartFunction, h: f64) -> ChartVector {
    let (pi, f) = (pi.clone(), f.clone());
    let domain = pi.domain.clone();
    ChartVector::new(format!("c_{}", pi.label), pi.dim, domain, move |x| {
        hamiltonian_vector(&pi, &f, x, h).unwrap_or_else(|_| DVector::from_element(x.len(), f64::NAN))
    })
}

/// Lie bracket of vector fields, `[X, Y]^i = X^k d_k Y^i - Y^k d_k X^i`.
pub fn lie_bracket(a: &ChartVector, b: &ChartVector, x: &[f64], h: f64) -> Result<DVector<f64>> {
    let (xa, xb) = (a.value(x)?, b.value(x)?);
    let (ja, jb) = (a.jacobian(x, h)?, b.jacobian(x, h)?);
    Ok(jb * xa - ja * xb)
}

/// `L_X pi = [[X, pi]]`.
pub fn lie_derivative_bivector(v: &ChartVector, pi: &ChartBivector, x: &[f64], h: f64) -> Result<DMatrix<f64>> {
    check_dims(v.dim, pi.dim)?;
    let xv = v.value(x)?;
    let jv = v.jacobian(x, h)?;
    let p = pi.value(x)?;
    let dp = pi.derivatives(x, h)?;
    let d = pi.dim;
    let mut transport = DMatrix::zeros(d, d);
    for (k, dpk) in dp.iter().enumerate() {
        transport += dpk * xv[k];
    }
    // -pi^{kj} d_k X^i - pi^{ik} d_k X^j
    let out = transport - &jv * &p - &p * jv.transpose();
    Ok(out * SCHOUTEN_SIGN)
}

/// `[[pi, pi]]^{ijk} = 2 * sum_cyc pi^{il} d_l pi^{jk}`; vanishes iff the Jacobi identity holds.
pub fn schouten_bivector_square(pi: &ChartBivector, x: &[f64], h: f64) -> Result<FieldValue> {
    schouten_bivectors(pi, pi, x, h)
}

/// Symmetric Schouten bracket of two bivectors:
/// `[[a, b]]^{ijk} = sum_cyc (a^{il} d_l b^{jk} + b^{il} d_l a^{jk})`.
pub fn schouten_bivectors(a: &ChartBivector, b: &ChartBivector, x: &[f64], h: f64) -> Result<FieldValue> {
    check_dims(a.dim, b.dim)?;
    let d = a.dim;
    let (pa, pb) = (a.value(x)?, b.value(x)?);
    let (da, db) = (a.derivatives(x, h)?, b.derivatives(x, h)?);
    let term = |p: &DMatrix<f64>, dq: &[DMatrix<f64>], i: usize, j: usize, k: usize| -> f64 {
        (0..d).map(|l| p[(i, l)] * dq[l][(j, k)]).sum()
    };
    let mut data = vec![0.0; d * d * d];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let mut v = 0.0;
                for (p, q, r) in [(i, j, k), (j, k, i), (k, i, j)] {
                    v += term(&pa, &db, p, q, r) + term(&pb, &da, p, q, r);
                }
                data[(i * d + j) * d + k] = SCHOUTEN_SIGN * v;
            }
        }
    }
    Ok(FieldValue::Trivector { dim: d, data })
}

/// Norm of `[[pi, pi]]` at `x`.
pub fn jacobiator(pi: &ChartBivector, x: &[f64], h: f64) -> Result<f64> {
    Ok(schouten_bivector_square(pi, x, h)?.norm())
}

/// Schouten-Nijenhuis bracket of fields of degree at most two, evaluated at `x`.
///
/// Graded antisymmetry `[[A, B]] = -(-1)^{(a-1)(b-1)} [[B, A]]` fixes every
/// ordering from `[[X, f]] = X(f)`, `[[X, Y]] = [X, Y]`, `[[X, pi]] = L_X pi`
/// and `[[pi, f]] = c(f)`.
pub fn schouten_bracket(a: Field<'_>, b: Field<'_>, x: &[f64], h: f64) -> Result<FieldValue> {
    use Field::*;
    match (a, b) {
        (Function(_), Function(_)) => Ok(FieldValue::Scalar(0.0)),
        (Vector(v), Function(f)) => Ok(FieldValue::Scalar(SCHOUTEN_SIGN * v.apply(f, x, h)?)),
        (Function(f), Vector(v)) => Ok(FieldValue::Scalar(-SCHOUTEN_SIGN * v.apply(f, x, h)?)),
        (Vector(u), Vector(v)) => Ok(FieldValue::Vector(lie_bracket(u, v, x, h)? * SCHOUTEN_SIGN)),
        (Bivector(p), Function(f)) | (Function(f), Bivector(p)) => {
            Ok(FieldValue::Vector(hamiltonian_vector(p, f, x, h)? * SCHOUTEN_SIGN))
        }
        (Vector(v), Bivector(p)) => Ok(FieldValue::Bivector(lie_derivative_bivector(v, p, x, h)?)),
        (Bivector(p), Vector(v)) => Ok(FieldValue::Bivector(-lie_derivative_bivector(v, p, x, h)?)),
        (Bivector(p), Bivector(q)) => schouten_bivectors(p, q, x, h),
    }
}

/// Poisson differential `delta = [[pi, .]]`: `delta f = c(f)`, `delta X = [[pi, X]]`.
pub fn poisson_differential(pi: &ChartBivector, a: Field<'_>, x: &[f64], h: f64) -> Result<FieldValue> {
    match a {
        Field::Bivector(_) => Err(Error::Shape(
            "poisson_differential is implemented for degree <= 1".into(),
        )),
        other => schouten_bracket(Field::Bivector(pi), other, x, h),
    }
}

/// `delta(delta f)` at `x`; zero for a Poisson bivector.
pub fn poisson_differential_squared(pi: &ChartBivector, f: &ChartFunction, x: &[f64], h: f64) -> Result<DMatrix<f64>> {
    let cf = hamiltonian_field(pi, f, h);
    // stencil of the outer derivative must also keep the inner stencil in range
    match poisson_differential(pi, Field::Vector(&cf), x, h)? {
        FieldValue::Bivector(m) => {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain {
                    point: x.to_vec(),
                    reason: "nested stencil left the chart".into(),
                });
            }
            Ok(m)
        }
        _ => unreachable!("delta of a vector field is a bivector"),
    }
}

/// Hamiltonian operator on 2-forms: `P(omega)^{ij} = pi^{ik} omega_{kl} pi^{jl}`.
pub fn p_map(pi: &ChartBivector, omega: &ChartForm2, x: &[f64]) -> Result<DMatrix<f64>> {
    check_dims(pi.dim, omega.dim)?;
    let p = pi.value(x)?;
    let w = omega.value(x)?;
    Ok(&p * w * p.transpose())
}

/// The 2-form `omega` with `P(omega) = pi` on a planar chart: coefficient `1/c`.
pub fn p_inverse(pi: &ChartBivector, x: &[f64]) -> Result<DMatrix<f64>> {
    if pi.dim != 2 {
        return Err(Error::Shape(format!(
            "p_inverse supports planar charts only, got dimension {}",
            pi.dim
        )));
    }
    let c = pi.value(x)?[(0, 1)];
    if c.abs() < DEGENERACY_CUTOFF {
        return Err(Error::DegeneratePoint {
            point: x.to_vec(),
            coefficient: c.abs(),
        });
    }
    Ok(planar_matrix(1.0 / c))
}

/// `p_inverse` packaged as a chart 2-form (errors surface as NaN coefficients).
pub fn p_inverse_form(pi: &ChartBivector) -> ChartForm2 {
    let pi = pi.clone();
    ChartForm2::new(format!("P^-1({})", pi.label), 2, pi.domain.clone(), move |x| {
        p_inverse(&pi, x).unwrap_or_else(|_| planar_matrix(f64::NAN))
    })
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("chart dimensions {a} and {b} differ")));
    }
    Ok(())
}
