//! Vaisman's prequantization condition `pi + L_X pi = P(omega)` on charts, the
//! two positive examples, and the Stokes obstruction on `CP^1`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lie_core::{haar_samples, BasisTag, CMat, MatrixBasis};
use crate::pencil::{fmt_f64, r_bracket_matrix, weyl_flip_residual, CoalgebraPoint, PencilContext};
use crate::quadrature::integrate;
use crate::rmatrix::Tensor2;
use crate::schouten::{
    hamiltonian_vector, lie_derivative_bivector, p_map, planar_matrix, poisson_differential_squared, ChartBivector,
    ChartForm2, ChartFunction, ChartVector, Domain, DEFAULT_STEP, DEGENERACY_CUTOFF,
};

/// Points closer than this to the degeneracy locus are excluded from residual sampling.
pub const EXCISION_RADIUS: f64 = 0.05;

/// Start of the analytic tail in the radial variable `u = |z|^2`.
pub const TAIL_START: f64 = 1e6;

/// Grid points with `xi - xi0` at most this are used in the singularity fit.
pub const FIT_WINDOW: f64 = 0.5;

/// `R^2` the logarithmic model must exceed for the no-go verdict.
pub const LOG_FIT_R2: f64 = 0.999;

/// Offsets `xi - xi0` of the default fit grid.
pub const FIT_OFFSETS: [f64; 5] = [0.5, 0.2, 0.05, 0.01, 0.001];

/// Coefficient of `E ^ F` in the `sl(2, R)` r-matrix that reproduces the cone bracket.
pub const CONE_R_SCALE: f64 = -0.25;

type LocusDistance = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A candidate solution `(pi, X, omega)` of the prequantization condition.
#[derive(Clone)]
pub struct VaismanInstance {
    pub label: String,
    pub pi: ChartBivector,
    pub x: ChartVector,
    pub omega: ChartForm2,
    pub excision: f64,
    locus_distance: LocusDistance,
}

impl std::fmt::Debug for VaismanInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VaismanInstance")
            .field("label", &self.label)
            .field("pi", &self.pi)
            .field("x", &self.x)
            .field("excision", &self.excision)
            .finish()
    }
}

impl VaismanInstance {
    /// Validates closedness of `omega` at `samples`.
    pub fn new(
        label: impl Into<String>,
        pi: ChartBivector,
        x: ChartVector,
        omega: ChartForm2,
        excision: f64,
        locus_distance: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        samples: &[Vec<f64>],
    ) -> Result<Self> {
        if pi.dim != x.dim || pi.dim != omega.dim {
            return Err(Error::Shape(format!(
                "pi, X, omega on charts of dimension {}, {}, {}",
                pi.dim, x.dim, omega.dim
            )));
        }
        for p in samples {
            let res = omega.closedness_residual(p, DEFAULT_STEP)?;
            if res > 1e-8 {
                return Err(Error::OutOfRange {
                    what: format!("closedness residual of {} at {p:?}", omega.label),
                    value: res,
                    range: "[0, 1e-8]".into(),
                });
            }
        }
        Ok(VaismanInstance {
            label: label.into(),
            pi,
            x,
            omega,
            excision,
            locus_distance: Arc::new(locus_distance),
        })
    }

    pub fn locus_distance(&self, p: &[f64]) -> f64 {
        (self.locus_distance)(p)
    }

    /// `pi + L_X pi - P(omega)` at `p`.
    pub fn defect(&self, p: &[f64], h: f64) -> Result<DMatrix<f64>> {
        if self.locus_distance(p) < self.excision {
            return Err(Error::Domain {
                point: p.to_vec(),
                reason: format!("within excision radius {} of the degeneracy locus", self.excision),
            });
        }
        let pi = self.pi.value(p)?;
        let lx = lie_derivative_bivector(&self.x, &self.pi, p, h)?;
        Ok(pi + lx - p_map(&self.pi, &self.omega, p)?)
    }
}

/// `max_p || pi + L_X pi - P(omega) ||` over `points`.
pub fn vaisman_residual(inst: &VaismanInstance, points: &[Vec<f64>]) -> Result<f64> {
    let norms: Result<Vec<f64>> = points
        .par_iter()
        .map(|p| inst.defect(p, DEFAULT_STEP).map(|m| m.norm()))
        .collect();
    Ok(norms?.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }

    pub fn exact(name: impl Into<String>, value: f64, expected: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance: 0.0,
            pass: value == expected,
        }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Check {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            tolerance: 0.0,
            pass: ok,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certification {
    pub name: String,
    pub checks: Vec<Check>,
    pub metadata: BTreeMap<String, String>,
}

impl Certification {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn grid(lo: [f64; 2], hi: [f64; 2], n: [usize; 2]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(n[0] * n[1]);
    for i in 0..n[0] {
        for j in 0..n[1] {
            let a = lo[0] + (hi[0] - lo[0]) * i as f64 / (n[0] - 1) as f64;
            let b = lo[1] + (hi[1] - lo[1]) * j as f64 / (n[1] - 1) as f64;
            out.push(vec![a, b]);
        }
    }
    out
}

/// `{f, g}_new = {f, h1}{g, h2} - {f, h2}{g, h1}` for a constant planar `pi0`:
/// the matrix `u v^T - v u^T` with `u = pi0 dh1`, `v = pi0 dh2`.
pub fn recipe_matrix(pi0: &DMatrix<f64>, dh1: &DVector<f64>, dh2: &DVector<f64>) -> DMatrix<f64> {
    let u = pi0.transpose() * dh1;
    let v = pi0.transpose() * dh2;
    &u * v.transpose() - &v * u.transpose()
}

/// Example 1 bivector on `(p, q)` from `h1 = p`, `h2 = pq` over the canonical bracket.
pub fn example1_bivector() -> ChartBivector {
    ChartBivector::new("p d_p ^ d_q", 2, Domain::All, |x| {
        let canonical = planar_matrix(1.0);
        let dh1 = DVector::from_vec(vec![1.0, 0.0]);
        let dh2 = DVector::from_vec(vec![x[1], x[0]]);
        recipe_matrix(&canonical, &dh1, &dh2)
    })
    .with_jacobian(|_| vec![planar_matrix(1.0), planar_matrix(0.0)])
}

/// `X = q d_q`.
pub fn example1_vector() -> ChartVector {
    ChartVector::new("q d_q", 2, Domain::All, |x| DVector::from_vec(vec![0.0, x[1]]))
        .with_jacobian(|_| DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]))
}

pub fn example1_instance() -> VaismanInstance {
    VaismanInstance::new(
        "example1",
        example1_bivector(),
        example1_vector(),
        ChartForm2::zero(2, Domain::All),
        EXCISION_RADIUS,
        |x| x[0].abs(),
        &[],
    )
    .expect("zero form is closed")
}

/// Coordinate functions `x_k` on an unrestricted chart.
pub fn coordinate(k: usize) -> ChartFunction {
    ChartFunction::new(Domain::All, move |x| x[k])
}

pub fn example1() -> Certification {
    example1_with(PrequantumConvention::default(), 1.0)
}

/// Example 1 with a chosen prequantum operator convention and `hbar`.
pub fn example1_with(conv: PrequantumConvention, hbar: f64) -> Certification {
    let pi = example1_bivector();
    let inst = example1_instance();
    let mut checks = Vec::new();

    checks.push(Check::exact(
        "bracket_pq_at_(2,3)",
        pi.value(&[2.0, 3.0]).unwrap()[(0, 1)],
        2.0,
    ));
    let on_locus = pi.value(&[0.0, 1.7]).unwrap()[(0, 1)].abs() < DEGENERACY_CUTOFF;
    let off_locus = pi.value(&[2.0, 3.0]).unwrap()[(0, 1)].abs() >= DEGENERACY_CUTOFF;
    checks.push(Check::flag("degenerate_at_p=0", on_locus && off_locus));

    let points = grid([0.1, -3.0], [3.0, 3.0], [10, 5]);
    let residual = vaisman_residual(&inst, &points).unwrap_or(f64::INFINITY);
    checks.push(Check::at_most("vaisman_residual", residual, 1e-8));

    let fns = random_test_functions(20, 2, 11);
    let sample = grid([0.5, -2.0], [2.5, 2.0], [3, 3]);
    let d2 = delta_squared_residual(&pi, &fns, &sample).unwrap_or(f64::INFINITY);
    checks.push(Check::at_most("delta_squared", d2, 1e-6));

    let comm = prequantum_commutator_check(
        &pi,
        &example1_vector(),
        &coordinate(0),
        &coordinate(1),
        hbar,
        &grid([0.5, -1.0], [2.0, 1.0], [2, 2]),
        conv,
        3,
    )
    .unwrap_or(f64::INFINITY);
    checks.push(Check::at_most("prequantum_commutator_(p,q)", comm, 1e-6));

    let mut metadata = BTreeMap::new();
    metadata.insert("bivector".into(), "{f,g} = {f,p}{g,pq} - {f,pq}{g,p}".into());
    metadata.insert("x".into(), "q d_q".into());
    metadata.insert("omega".into(), "0".into());
    metadata.insert("domain".into(), "[0.1, 3] x [-3, 3]".into());
    metadata.insert("excision_radius".into(), fmt_f64(EXCISION_RADIUS));
    metadata.insert("prequantum_convention".into(), conv.to_string());
    metadata.insert("hbar".into(), fmt_f64(hbar));
    Certification {
        name: "example1".into(),
        checks,
        metadata,
    }
}

fn cone_domain() -> Domain {
    Domain::Box {
        lo: vec![0.0, f64::NEG_INFINITY],
        hi: vec![f64::INFINITY, f64::INFINITY],
    }
}

/// `-(r/2) sin(phi) d_r ^ d_phi` on the nilpotent cone.
pub fn example2_bivector() -> ChartBivector {
    ChartBivector::planar(
        "-(r/2) sin(phi) d_r ^ d_phi",
        cone_domain(),
        |x| -0.5 * x[0] * x[1].sin(),
        Some(Arc::new(|x: &[f64]| [-0.5 * x[1].sin(), -0.5 * x[0] * x[1].cos()])),
    )
}

/// `s r ln(r) d_r`; the closed-form Jacobian is attached only when `exact`.
pub fn example2_vector(sign: f64, exact: bool) -> ChartVector {
    let v = ChartVector::new(format!("{sign} r ln r d_r"), 2, cone_domain(), move |x| {
        DVector::from_vec(vec![sign * x[0] * x[0].ln(), 0.0])
    });
    if exact {
        v.with_jacobian(move |x| DMatrix::from_row_slice(2, 2, &[sign * (x[0].ln() + 1.0), 0.0, 0.0, 0.0]))
    } else {
        v
    }
}

fn phi_locus_distance(x: &[f64]) -> f64 {
    let r = x[1].rem_euclid(PI);
    r.min(PI - r)
}

pub fn example2_instance(sign: f64, exact: bool) -> VaismanInstance {
    VaismanInstance::new(
        format!("example2[{sign}]"),
        example2_bivector(),
        example2_vector(sign, exact),
        ChartForm2::zero(2, cone_domain()),
        EXCISION_RADIUS,
        phi_locus_distance,
        &[],
    )
    .expect("zero form is closed")
}

/// Sign `s` of `X = s r ln(r) d_r` selected by the finite-difference residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignResolution {
    pub sign: f64,
    pub residual_plus: f64,
    pub residual_minus: f64,
}

pub fn resolve_example2_sign(points: &[Vec<f64>]) -> Result<SignResolution> {
    let plus = vaisman_residual(&example2_instance(1.0, false), points)?;
    let minus = vaisman_residual(&example2_instance(-1.0, false), points)?;
    Ok(SignResolution {
        sign: if plus <= minus { 1.0 } else { -1.0 },
        residual_plus: plus,
        residual_minus: minus,
    })
}

/// Basis `[[0,1],[1,0]], diag(1,-1), [[0,1],[-1,0]]` of `sl(2, R)`; the point
/// `[[x2, x1 + x3], [x1 - x3, -x2]]` has coordinates `(x1, x2, x3)`.
pub fn sl2r_basis() -> MatrixBasis {
    let m = |a: f64, b: f64, c: f64, d: f64| CMat::from_row_slice(2, 2, &[a, b, c, d].map(|v| Complex64::new(v, 0.0)));
    MatrixBasis::new(
        BasisTag::Custom("sl2r".into()),
        vec![m(0.0, 1.0, 1.0, 0.0), m(1.0, 0.0, 0.0, -1.0), m(0.0, 1.0, -1.0, 0.0)],
    )
    .expect("sl(2, R) basis is independent")
}

/// `CONE_R_SCALE * E ^ F` over `sl2r_basis`.
pub fn sl2r_r() -> Tensor2 {
    // E = (B1 + B3)/2, F = (B1 - B3)/2
    let e = DVector::from_vec(vec![0.5, 0.0, 0.5]);
    let f = DVector::from_vec(vec![0.5, 0.0, -0.5]);
    let wedge = &e * f.transpose() - &f * e.transpose();
    Tensor2::from_real(BasisTag::Custom("sl2r".into()), &(wedge * CONE_R_SCALE))
}

/// Brackets `{x_i, x_j}` of the ambient r-bracket on `sl(2, R)*`.
pub fn sl2r_ambient_bracket(basis: &MatrixBasis, r: &Tensor2, x: &[f64; 3]) -> Result<DMatrix<f64>> {
    let xi = CoalgebraPoint::from_coords(basis, x)?;
    let pf = r_bracket_matrix(&xi, r, basis)?;
    let d = basis.dim();
    let gram = DMatrix::from_fn(d, d, |a, b| {
        crate::lie_core::trace_form(basis.element(a), basis.element(b)).expect("same shape")
    });
    let ginv = gram
        .try_inverse()
        .ok_or_else(|| Error::Shape("degenerate trace form on sl(2, R)".into()))?;
    Ok(&ginv * pf * ginv.transpose())
}

/// Point of the upper nappe `x1^2 + x2^2 = x3^2` at spherical radius `r`, polar angle `pi/4`.
pub fn cone_point(r: f64, phi: f64) -> [f64; 3] {
    let s = r / 2f64.sqrt();
    [s * phi.cos(), s * phi.sin(), s]
}

/// `{r, phi}` induced from the ambient bracket at `cone_point(r, phi)`.
pub fn cone_bracket_from_ambient(basis: &MatrixBasis, r: &Tensor2, rr: f64, phi: f64) -> Result<f64> {
    let x = cone_point(rr, phi);
    let p = sl2r_ambient_bracket(basis, r, &x)?;
    let norm = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    let dr = DVector::from_vec(vec![x[0] / norm, x[1] / norm, x[2] / norm]);
    let rho2 = x[0] * x[0] + x[1] * x[1];
    let dphi = DVector::from_vec(vec![-x[1] / rho2, x[0] / rho2, 0.0]);
    Ok((dr.transpose() * p * dphi)[(0, 0)])
}

pub fn example2() -> Certification {
    let pi = example2_bivector();
    let mut checks = Vec::new();
    let mut metadata = BTreeMap::new();

    checks.push(Check::at_most(
        "bracket_at_(1,pi/2)",
        (pi.value(&[1.0, FRAC_PI_2]).unwrap()[(0, 1)] + 0.5).abs(),
        1e-15,
    ));
    let basis = sl2r_basis();
    let r = sl2r_r();
    let degenerate = [0.0, PI].iter().all(|phi| {
        let chart = pi.value(&[1.3, *phi]).unwrap()[(0, 1)].abs() < DEGENERACY_CUTOFF;
        let ambient = cone_bracket_from_ambient(&basis, &r, 1.3, *phi)
            .map(|c| c.abs() < DEGENERACY_CUTOFF)
            .unwrap_or(false);
        chart && ambient
    });
    checks.push(Check::flag("degenerate_at_sin(phi)=0", degenerate));

    let annulus = grid([0.2, 0.1], [3.0, PI - 0.1], [8, 8]);
    let ambient_err = annulus
        .iter()
        .map(|p| {
            let chart = pi.value(p).unwrap()[(0, 1)];
            cone_bracket_from_ambient(&basis, &r, p[0], p[1])
                .map(|a| (a - chart).abs())
                .unwrap_or(f64::INFINITY)
        })
        .fold(0.0, f64::max);
    checks.push(Check::at_most("ambient_r_bracket_cross_check", ambient_err, 1e-8));

    let resolution = resolve_example2_sign(&grid([0.5, 0.5], [2.5, 2.5], [3, 3]));
    let sign = match &resolution {
        Ok(res) => {
            checks.push(Check::flag(
                "sign_resolved",
                res.residual_plus.min(res.residual_minus) < 1e-6,
            ));
            metadata.insert("fd_residual_plus".into(), fmt_f64(res.residual_plus));
            metadata.insert("fd_residual_minus".into(), fmt_f64(res.residual_minus));
            res.sign
        }
        Err(_) => {
            checks.push(Check::flag("sign_resolved", false));
            1.0
        }
    };
    let residual = vaisman_residual(&example2_instance(sign, true), &annulus).unwrap_or(f64::INFINITY);
    checks.push(Check::at_most("vaisman_residual", residual, 1e-8));

    let fns = random_test_functions(20, 2, 12);
    let sample = grid([0.5, 0.5], [2.5, 2.5], [3, 3]);
    let d2 = delta_squared_residual(&pi, &fns, &sample).unwrap_or(f64::INFINITY);
    checks.push(Check::at_most("delta_squared", d2, 1e-6));

    metadata.insert("resolved_sign".into(), format!("{sign:+}"));
    metadata.insert("printed_sign".into(), "-1".into());
    metadata.insert("x".into(), format!("{sign:+} r ln(r) d_r"));
    metadata.insert("omega".into(), "0".into());
    metadata.insert("ambient_r".into(), format!("{CONE_R_SCALE} E ^ F on sl(2,R)"));
    metadata.insert("domain".into(), "r in [0.2, 3], phi in [0.1, pi - 0.1]".into());
    metadata.insert("excision_radius".into(), fmt_f64(EXCISION_RADIUS));
    Certification {
        name: "example2".into(),
        checks,
        metadata,
    }
}

/// Smooth random functions `a + b.x + x^T C x + d sin(w.x + e)`.
pub fn random_test_functions(count: usize, dim: usize, seed: u64) -> Vec<ChartFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let b: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let c: Vec<f64> = (0..dim * dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let d: f64 = rng.gen_range(-1.0..1.0);
            let w: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let e: f64 = rng.gen_range(0.0..PI);
            ChartFunction::new(Domain::All, move |x| {
                let mut v = a;
                let mut phase = e;
                for i in 0..dim {
                    v += b[i] * x[i];
                    phase += w[i] * x[i];
                    for j in 0..dim {
                        v += c[i * dim + j] * x[i] * x[j];
                    }
                }
                v + d * phase.sin()
            })
        })
        .collect()
}

/// `max || delta(delta f) ||` over functions and points.
pub fn delta_squared_residual(pi: &ChartBivector, fs: &[ChartFunction], points: &[Vec<f64>]) -> Result<f64> {
    let mut worst = 0.0f64;
    for f in fs {
        for p in points {
            worst = worst.max(poisson_differential_squared(pi, f, p, DEFAULT_STEP)?.norm());
        }
    }
    Ok(worst)
}

/// Placement of `X(F)` in the prequantum operator, `k = hbar / (2 pi i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum PrequantumConvention {
    /// `F + k c(F) + X(F)`
    OuterPlus,
    /// `F + k c(F) - X(F)`
    #[default]
    OuterMinus,
    /// `F + k (c(F) + X(F))`
    InnerPlus,
}

impl std::fmt::Display for PrequantumConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PrequantumConvention::OuterPlus => "F + k c(F) + X(F)",
            PrequantumConvention::OuterMinus => "F + k c(F) - X(F)",
            PrequantumConvention::InnerPlus => "F + k (c(F) + X(F))",
        })
    }
}

impl std::str::FromStr for PrequantumConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "outer_plus" => Ok(PrequantumConvention::OuterPlus),
            "outer_minus" => Ok(PrequantumConvention::OuterMinus),
            "inner_plus" => Ok(PrequantumConvention::InnerPlus),
            other => Err(Error::Shape(format!(
                "unknown prequantum convention '{other}' (outer_plus, outer_minus, inner_plus)"
            ))),
        }
    }
}

type Section = Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>;

fn section_gradient(s: &Section, x: &[f64], h: f64) -> Vec<Complex64> {
    (0..x.len())
        .map(|k| {
            let hk = h * x[k].abs().max(1.0);
            let mut plus = x.to_vec();
            let mut minus = x.to_vec();
            plus[k] += hk;
            minus[k] -= hk;
            (s(&plus) - s(&minus)) / (2.0 * hk)
        })
        .collect()
}

#[derive(Clone)]
struct Prequantizer {
    pi: ChartBivector,
    x: ChartVector,
    k: Complex64,
    convention: PrequantumConvention,
    h: f64,
}

impl Prequantizer {
    fn apply(&self, f: &ChartFunction, s: Section) -> Section {
        let this = self.clone();
        let f = f.clone();
        Arc::new(move |p: &[f64]| {
            let nan = Complex64::new(f64::NAN, f64::NAN);
            let Ok(cf) = hamiltonian_vector(&this.pi, &f, p, this.h) else {
                return nan;
            };
            let Ok(xf) = this.x.apply(&f, p, this.h) else {
                return nan;
            };
            let grad = section_gradient(&s, p, this.h);
            let cfs: Complex64 = cf.iter().zip(&grad).map(|(a, g)| g * *a).sum();
            let sv = s(p);
            let fv = f.eval(p);
            match this.convention {
                PrequantumConvention::OuterPlus => sv * fv + this.k * cfs + sv * xf,
                PrequantumConvention::OuterMinus => sv * fv + this.k * cfs - sv * xf,
                PrequantumConvention::InnerPlus => sv * fv + this.k * (cfs + sv * xf),
            }
        })
    }
}

fn random_sections(count: usize, dim: usize, seed: u64) -> Vec<Section> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = || Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    (0..count)
        .map(|_| {
            let a = c();
            let b: Vec<Complex64> = (0..dim).map(|_| c()).collect();
            let d = c();
            let w: Vec<f64> = (0..dim).map(|_| c().re * 2.0).collect();
            Arc::new(move |x: &[f64]| {
                let mut v = a;
                let mut phase = 0.0;
                for i in 0..dim {
                    v += b[i] * x[i];
                    phase += w[i] * x[i];
                }
                v + d * Complex64::new(0.0, phase).exp()
            }) as Section
        })
        .collect()
}

/// `max | (1/k) [f1^, f2^] s - {f1, f2}^ s |` over 10 random sections and `points`.
#[allow(clippy::too_many_arguments)]
pub fn prequantum_commutator_check(
    pi: &ChartBivector,
    x: &ChartVector,
    f1: &ChartFunction,
    f2: &ChartFunction,
    hbar: f64,
    points: &[Vec<f64>],
    convention: PrequantumConvention,
    seed: u64,
) -> Result<f64> {
    if !(hbar.is_finite() && hbar > 0.0) {
        return Err(Error::OutOfRange {
            what: "hbar".into(),
            value: hbar,
            range: "(0, inf)".into(),
        });
    }
    let q = Prequantizer {
        pi: pi.clone(),
        x: x.clone(),
        k: Complex64::new(0.0, -hbar / (2.0 * PI)),
        convention,
        h: DEFAULT_STEP,
    };
    let bracket = {
        let (pi, f1, f2) = (pi.clone(), f1.clone(), f2.clone());
        ChartFunction::new(pi.domain.clone(), move |p| {
            pi.bracket(&f1, &f2, p, DEFAULT_STEP).unwrap_or(f64::NAN)
        })
    };
    let mut worst = 0.0f64;
    for s in random_sections(10, pi.dim, seed) {
        let a = q.apply(f1, q.apply(f2, s.clone()));
        let b = q.apply(f2, q.apply(f1, s.clone()));
        let target = q.apply(&bracket, s);
        for p in points {
            pi.domain.contains(p).then_some(()).ok_or_else(|| Error::Domain {
                point: p.clone(),
                reason: "prequantum check point".into(),
            })?;
            let v = (a(p) - b(p)) / q.k - target(p);
            if !v.norm().is_finite() {
                return Err(Error::Domain {
                    point: p.clone(),
                    reason: "finite-difference stencil left the chart".into(),
                });
            }
            worst = worst.max(v.norm());
        }
    }
    Ok(worst)
}

/// `xi0 = sqrt(-lambda / (lambda + 2))`, the radius of the degeneracy circle on `CP^1`.
pub fn cp1_xi0(lambda: f64) -> Result<f64> {
    if !(lambda > -2.0 && lambda < 0.0) {
        return Err(Error::OutOfRange {
            what: "lambda".into(),
            value: lambda,
            range: "(-2, 0)".into(),
        });
    }
    Ok((-lambda / (lambda + 2.0)).sqrt())
}

/// `-2 pi ln[(lambda + (lambda+2) xi^2) / ((lambda+2)(1 + xi^2))]`.
pub fn obstruction_closed_form(lambda: f64, xi: f64) -> f64 {
    let xi2 = xi * xi;
    -2.0 * PI * ((lambda + (lambda + 2.0) * xi2) / ((lambda + 2.0) * (1.0 + xi2))).ln()
}

/// `int_U^inf du / ((1 + u)(a + b u))` from the large-`u` expansion.
fn tail_series(a: f64, b: f64, u: f64) -> f64 {
    let c = a / b;
    let mut partial = 0.0;
    let mut cpow = 1.0;
    let mut total = 0.0;
    for n in 0..200 {
        partial += cpow;
        cpow *= c;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let term = sign * partial * u.powi(-n - 1) / ((n + 1) as f64 * b);
        total += term;
        if term.abs() <= 1e-18 * total.abs() {
            break;
        }
    }
    total
}

/// `4 pi int_{xi^2}^inf du / ((1 + u)(lambda + (lambda + 2) u))`: the integral of
/// `P^-1(pi_lambda)` over `|z| >= xi`.
pub fn obstruction_quadrature(lambda: f64, xi: f64) -> f64 {
    let (a, b) = (lambda, lambda + 2.0);
    let u0 = xi * xi;
    let tail_from = u0.max(TAIL_START);
    let mut total = tail_series(a, b, tail_from);
    if u0 < TAIL_START {
        let r = integrate(|u| 1.0 / ((1.0 + u) * (a + b * u)), u0, TAIL_START, 1e-15, 1e-13, 4000);
        total += r.value;
    }
    4.0 * PI * total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SingularityKind {
    Logarithmic,
    Polar,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularityFit {
    pub points: usize,
    pub log_a: f64,
    pub log_b: f64,
    pub log_r2: f64,
    pub polar_a: f64,
    pub polar_b: f64,
    pub polar_r2: f64,
    pub kind: SingularityKind,
}

/// Least squares `y = a t + b`; returns `(a, b, R^2)`.
fn linear_fit(t: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let stt: f64 = t.iter().map(|v| (v - tm) * (v - tm)).sum();
    let sty: f64 = t.iter().zip(y).map(|(a, b)| (a - tm) * (b - ym)).sum();
    let a = sty / stt;
    let b = ym - a * tm;
    let ss_res: f64 = t.iter().zip(y).map(|(x, v)| (v - a * x - b).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|v| (v - ym).powi(2)).sum();
    (a, b, 1.0 - ss_res / ss_tot)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObstructionResult {
    pub lambda: f64,
    pub xi0: f64,
    pub xi_grid: Vec<f64>,
    pub lhs_quadrature: Vec<f64>,
    pub lhs_closed_form: Vec<f64>,
    pub abs_err: Vec<f64>,
    pub max_rel_err: f64,
    pub fit: Option<SingularityFit>,
    /// `None` when fewer than three grid points fall in the fit window.
    pub quantizable: Option<bool>,
}

impl ObstructionResult {
    /// CSV with columns `xi,lhs_quadrature,lhs_closed_form,abs_err`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["xi", "lhs_quadrature", "lhs_closed_form", "abs_err"])
            .expect("in-memory write");
        for i in 0..self.xi_grid.len() {
            w.write_record([
                fmt_f64(self.xi_grid[i]),
                fmt_f64(self.lhs_quadrature[i]),
                fmt_f64(self.lhs_closed_form[i]),
                fmt_f64(self.abs_err[i]),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }
}

/// `xi0 + FIT_OFFSETS`, strictly decreasing toward `xi0`.
pub fn default_fit_grid(lambda: f64) -> Result<Vec<f64>> {
    let xi0 = cp1_xi0(lambda)?;
    Ok(FIT_OFFSETS.iter().map(|d| xi0 + d).collect())
}

/// Sweep from `xi = 10` down to the fit window followed by the fit grid.
pub fn default_obstruction_grid(lambda: f64) -> Result<Vec<f64>> {
    let xi0 = cp1_xi0(lambda)?;
    let top = 10f64.max(xi0 + 2.0 * FIT_WINDOW);
    let bottom = xi0 + FIT_WINDOW;
    let n = 20;
    let mut grid: Vec<f64> = (0..n).map(|k| top - (top - bottom) * k as f64 / n as f64).collect();
    grid.extend(default_fit_grid(lambda)?);
    Ok(grid)
}

pub fn cp1_obstruction(lambda: f64, xi_grid: &[f64]) -> Result<ObstructionResult> {
    let xi0 = cp1_xi0(lambda)?;
    if xi_grid.is_empty() {
        return Err(Error::OutOfRange {
            what: "xi grid length".into(),
            value: 0.0,
            range: "[1, inf)".into(),
        });
    }
    for (k, xi) in xi_grid.iter().enumerate() {
        if !xi.is_finite() || *xi <= xi0 {
            return Err(Error::Domain {
                point: vec![*xi],
                reason: format!("xi must exceed xi0 = {xi0}"),
            });
        }
        if k > 0 && *xi >= xi_grid[k - 1] {
            return Err(Error::Domain {
                point: vec![*xi],
                reason: "xi grid must be strictly decreasing".into(),
            });
        }
    }
    let quad: Vec<f64> = xi_grid
        .par_iter()
        .map(|xi| obstruction_quadrature(lambda, *xi))
        .collect();
    let closed: Vec<f64> = xi_grid.iter().map(|xi| obstruction_closed_form(lambda, *xi)).collect();
    let abs_err: Vec<f64> = quad.iter().zip(&closed).map(|(a, b)| (a - b).abs()).collect();
    let max_rel_err = abs_err
        .iter()
        .zip(&closed)
        .map(|(e, c)| if *c == 0.0 { *e } else { e / c.abs() })
        .fold(0.0, f64::max);

    let window: Vec<(f64, f64)> = xi_grid
        .iter()
        .zip(&quad)
        .filter(|(xi, _)| **xi - xi0 <= FIT_WINDOW)
        .map(|(xi, y)| (*xi, *y))
        .collect();
    let fit = (window.len() >= 3).then(|| {
        let y: Vec<f64> = window.iter().map(|w| w.1).collect();
        let tl: Vec<f64> = window.iter().map(|w| (w.0 - xi0).ln()).collect();
        let tp: Vec<f64> = window
            .iter()
            .map(|w| 1.0 / (lambda + (lambda + 2.0) * w.0 * w.0))
            .collect();
        let (log_a, log_b, log_r2) = linear_fit(&tl, &y);
        let (polar_a, polar_b, polar_r2) = linear_fit(&tp, &y);
        let kind = if log_r2 > LOG_FIT_R2 && log_r2 >= polar_r2 {
            SingularityKind::Logarithmic
        } else {
            SingularityKind::Polar
        };
        SingularityFit {
            points: window.len(),
            log_a,
            log_b,
            log_r2,
            polar_a,
            polar_b,
            polar_r2,
            kind,
        }
    });
    let quantizable = fit.as_ref().map(|f| f.kind != SingularityKind::Logarithmic);
    Ok(ObstructionResult {
        lambda,
        xi0,
        xi_grid: xi_grid.to_vec(),
        lhs_quadrature: quad,
        lhs_closed_form: closed,
        abs_err,
        max_rel_err,
        fit,
        quantizable,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VerdictMethod {
    StokesFit,
    WeylFlip,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantizationVerdict {
    pub lambda: f64,
    pub partner: f64,
    pub quantizable: bool,
    pub method: VerdictMethod,
    /// Largest Weyl-flip residual over the samples used for an endpoint verdict.
    pub weyl_flip_residual: Option<f64>,
}

/// Prequantizability of `pi_lambda` on `CP^1` for `lambda` in `[-2, 0]`.
///
/// Interior values use the Stokes fit on the default grid; the endpoints, where
/// the excised disk collapses to a point or the whole sphere, are transported
/// from each other through the Weyl flip and inherit the `lambda = 0` reduction.
pub fn quantization_verdict(lambda: f64) -> Result<QuantizationVerdict> {
    if lambda == 0.0 || lambda == -2.0 {
        let ctx = PencilContext::cp1();
        let residual = haar_samples(2, 8, 0)
            .iter()
            .map(|g| weyl_flip_residual(&ctx, g, lambda))
            .fold(0.0, f64::max);
        return Ok(QuantizationVerdict {
            lambda,
            partner: -(lambda + 2.0),
            quantizable: false,
            method: VerdictMethod::WeylFlip,
            weyl_flip_residual: Some(residual),
        });
    }
    let res = cp1_obstruction(lambda, &default_fit_grid(lambda)?)?;
    Ok(QuantizationVerdict {
        lambda,
        partner: -(lambda + 2.0),
        quantizable: res.quantizable.expect("default grid lies in the fit window"),
        method: VerdictMethod::StokesFit,
        weyl_flip_residual: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pencil::cp1_degenerate_radius_sq;

    #[test]
    fn example1_certifies() {
        let cert = example1();
        assert!(cert.pass(), "{:#?}", cert.checks);
        assert_eq!(cert.check("bracket_pq_at_(2,3)").unwrap().value, 2.0);
    }

    #[test]
    fn recipe_matches_closed_form() {
        let pi = example1_bivector();
        for p in grid([-2.0, -2.0], [2.0, 2.0], [4, 4]) {
            assert_eq!(pi.value(&p).unwrap()[(0, 1)], p[0]);
        }
        // quadratic in pi0, so the orientation of the canonical bracket is irrelevant
        let flipped = recipe_matrix(
            &planar_matrix(-1.0),
            &DVector::from_vec(vec![1.0, 0.0]),
            &DVector::from_vec(vec![3.0, 2.0]),
        );
        assert_eq!(flipped[(0, 1)], 2.0);
    }

    #[test]
    fn residual_without_solution_is_norm_of_pi() {
        let inst = VaismanInstance::new(
            "bare",
            example1_bivector(),
            ChartVector::zero(2, Domain::All),
            ChartForm2::zero(2, Domain::All),
            EXCISION_RADIUS,
            |x| x[0].abs(),
            &[],
        )
        .unwrap();
        let r = vaisman_residual(&inst, &[vec![2.0, 1.0]]).unwrap();
        assert!((r - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(
            vaisman_residual(&inst, &[vec![0.01, 1.0]]),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn example2_certifies_with_positive_sign() {
        let cert = example2();
        assert!(cert.pass(), "{:#?}", cert.checks);
        assert_eq!(cert.metadata["resolved_sign"], "+1");
        let res = resolve_example2_sign(&[vec![1.5, 1.0], vec![0.7, 2.0]]).unwrap();
        assert_eq!(res.sign, 1.0);
        assert!(res.residual_minus > 0.1);
    }

    #[test]
    fn ambient_bracket_closed_form() {
        let basis = sl2r_basis();
        let r = sl2r_r();
        let c = cone_bracket_from_ambient(&basis, &r, 1.0, FRAC_PI_2).unwrap();
        assert!((c + 0.5).abs() < 1e-14);
    }

    #[test]
    fn prequantum_conventions() {
        let pi = example1_bivector();
        let x = example1_vector();
        let pts = vec![vec![1.2, 0.4], vec![2.0, -1.0]];
        let (p, q) = (coordinate(0), coordinate(1));
        let minus =
            prequantum_commutator_check(&pi, &x, &p, &q, 1.0, &pts, PrequantumConvention::OuterMinus, 5).unwrap();
        let plus = prequantum_commutator_check(&pi, &x, &p, &q, 1.0, &pts, PrequantumConvention::OuterPlus, 5).unwrap();
        assert!(minus <= 1e-6, "{minus}");
        assert!(plus > 1.0);
        let same = prequantum_commutator_check(&pi, &x, &p, &p, 1.0, &pts, PrequantumConvention::OuterPlus, 5).unwrap();
        assert_eq!(same, 0.0);
        let plus2 =
            prequantum_commutator_check(&pi, &x, &p, &q, 2.0, &pts, PrequantumConvention::OuterPlus, 5).unwrap();
        assert!((plus2 - plus).abs() <= 1e-6 * plus);
        assert!(prequantum_commutator_check(&pi, &x, &p, &q, 0.0, &pts, PrequantumConvention::OuterMinus, 5).is_err());
    }

    #[test]
    fn obstruction_spot_value_and_tail() {
        let res = cp1_obstruction(-1.0, &[2.0]).unwrap();
        let expected = -2.0 * PI * (3.0f64 / 5.0).ln();
        assert!((res.lhs_closed_form[0] - expected).abs() < 1e-14);
        assert!((res.lhs_quadrature[0] - expected).abs() < 1e-6 * expected);
        assert!(res.fit.is_none() && res.quantizable.is_none());
        let far = obstruction_quadrature(-1.0, 1e4);
        assert!(far.abs() < 1e-6 && (far - obstruction_closed_form(-1.0, 1e4)).abs() < 1e-12);
    }

    #[test]
    fn obstruction_matches_closed_form_on_sweep() {
        for lambda in [-0.5, -1.0, -1.5] {
            let xi0 = cp1_xi0(lambda).unwrap();
            let grid: Vec<f64> = (0..40).map(|k| 10.0 - (10.0 - xi0 - 0.05) * k as f64 / 39.0).collect();
            let res = cp1_obstruction(lambda, &grid).unwrap();
            assert!(res.max_rel_err <= 1e-6, "{lambda}: {}", res.max_rel_err);
            assert!(res.lhs_closed_form.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn no_go_fit_and_flip_symmetry() {
        let res = cp1_obstruction(-1.0, &[1.5, 1.2, 1.05, 1.01, 1.001]).unwrap();
        let fit = res.fit.unwrap();
        assert!(fit.log_r2 > 0.999 && fit.log_r2 > fit.polar_r2);
        assert_eq!(res.quantizable, Some(false));
        for (a, b) in [(-0.5, -1.5), (0.0, -2.0)] {
            let va = quantization_verdict(a).unwrap();
            let vb = quantization_verdict(b).unwrap();
            assert_eq!(va.quantizable, vb.quantizable);
            assert!(!va.quantizable);
        }
        let end = quantization_verdict(0.0).unwrap();
        assert_eq!(end.method, VerdictMethod::WeylFlip);
        assert!(end.weyl_flip_residual.unwrap() <= 1e-10);
    }

    #[test]
    fn default_grid_covers_sweep_and_fit() {
        for lambda in [-0.5, -1.0, -1.5] {
            let g = default_obstruction_grid(lambda).unwrap();
            assert!(g.windows(2).all(|w| w[1] < w[0]));
            let res = cp1_obstruction(lambda, &g).unwrap();
            assert_eq!(res.fit.as_ref().unwrap().points, FIT_OFFSETS.len());
            assert_eq!(res.quantizable, Some(false));
        }
    }

    #[test]
    fn obstruction_preconditions() {
        assert!(matches!(cp1_obstruction(0.5, &[2.0]), Err(Error::OutOfRange { .. })));
        assert!(matches!(cp1_obstruction(-2.0, &[2.0]), Err(Error::OutOfRange { .. })));
        assert!(matches!(cp1_obstruction(-1.0, &[1.0]), Err(Error::Domain { .. })));
        assert!(matches!(cp1_obstruction(-1.0, &[1.2, 1.5]), Err(Error::Domain { .. })));
        assert!(matches!(cp1_obstruction(-1.0, &[]), Err(Error::OutOfRange { .. })));
        assert!(quantization_verdict(0.5).is_err());
    }

    #[test]
    fn degeneracy_circle_matches_pencil_chart() {
        for lambda in [-0.5, -1.0, -1.5] {
            let xi0 = cp1_xi0(lambda).unwrap();
            assert!((xi0 * xi0 - cp1_degenerate_radius_sq(lambda).unwrap()).abs() < 1e-15);
            assert!(crate::pencil::cp1_coefficient(lambda, xi0, 0.0).abs() < 1e-15);
        }
    }

    #[test]
    fn csv_layout() {
        let res = cp1_obstruction(-1.0, &[3.0, 2.0]).unwrap();
        let csv = res.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "xi,lhs_quadrature,lhs_closed_form,abs_err");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("3.0000000000000000e0,"));
    }
}
