//! The Poisson pencil `pi_lambda = pi_SD + lambda pi_KKS` on a coadjoint orbit `K / K_p`.
//!
//! At a group element `g` the left-trivialized pencil is the tensor
//! `r_lambda(g) = r_o - Ad_{g^-1} r_o + lambda r_p` over the compact basis. The
//! orbit directions are the `2m` leading basis vectors (the `V_a, W_a` pairs for
//! `a` in the parabolic set), so degeneracy is read off the leading `2m x 2m`
//! block of its coefficient matrix.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lie_core::{
    build_root_system, chevalley_basis, compact_basis, haar_samples, longest_weyl_representative, root_rotation,
    trace_form, CMat, GroupElement, LieBasis, MatrixBasis, Root, Series,
};
use crate::rmatrix::{compact_r, parabolic_r, Tensor2};
use crate::schouten::{ChartBivector, Domain, DEGENERACY_CUTOFF};

/// Relative singular-value threshold for the leading-minor rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Grid size of the one-parameter sweep through `K_a`.
pub const SWEEP_POINTS: usize = 64;

/// Point `xi` of `k*`, identified with a traceless matrix through the trace form.
///
/// For the compact form `xi` is anti-hermitian; a real traceless matrix is
/// also accepted for split real forms such as `sl(2, R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoalgebraPoint {
    xi: CMat,
}

impl CoalgebraPoint {
    pub fn new(xi: CMat) -> Result<Self> {
        if !xi.is_square() {
            return Err(Error::Shape(format!("coalgebra point of shape {:?}", xi.shape())));
        }
        let scale = xi.norm().max(1.0);
        let traceless = xi.trace().norm() <= 1e-12 * scale;
        let anti_hermitian = (xi.adjoint() + &xi).norm() <= 1e-12 * scale;
        let real = xi.iter().all(|c| c.im.abs() <= 1e-12 * scale);
        if !traceless || !(anti_hermitian || real) {
            return Err(Error::Shape(
                "coalgebra point must be traceless and anti-hermitian (or real)".into(),
            ));
        }
        Ok(CoalgebraPoint { xi })
    }

    pub fn from_coords(basis: &MatrixBasis, coords: &[f64]) -> Result<Self> {
        let c: Vec<Complex64> = coords.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        CoalgebraPoint::new(basis.combine(&c))
    }

    pub fn matrix(&self) -> &CMat {
        &self.xi
    }
}

/// `P_ab = <xi, [e_a, e_b]>` with the pairing `-1/2 Re tr`.
pub fn kks_matrix(xi: &CoalgebraPoint, basis: &MatrixBasis) -> DMatrix<f64> {
    let d = basis.dim();
    let mut out = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in a + 1..d {
            let br = crate::lie_core::commutator(basis.element(a), basis.element(b));
            let v = trace_form(xi.matrix(), &br).expect("shapes agree");
            out[(a, b)] = v;
            out[(b, a)] = -v;
        }
    }
    out
}

/// `P^r_ab = sum_{s,t} r^{st} <xi, [e_s, e_a]> <xi, [e_t, e_b]>`.
pub fn r_bracket_matrix(xi: &CoalgebraPoint, r: &Tensor2, basis: &MatrixBasis) -> Result<DMatrix<f64>> {
    if r.tag != *basis.tag() || r.dim() != basis.dim() {
        return Err(Error::Shape(format!(
            "r over {} used with basis {}",
            r.tag,
            basis.tag()
        )));
    }
    if r.coeffs.iter().any(|c| c.im.abs() > 1e-12) {
        return Err(Error::Shape(format!("r must be real over basis {}", basis.tag())));
    }
    let k = kks_matrix(xi, basis);
    Ok(k.transpose() * r.real_matrix() * k)
}

/// `(g, lambda)` at which the pencil is evaluated.
#[derive(Debug, Clone)]
pub struct PencilPoint {
    pub g: GroupElement,
    pub lambda: f64,
}

/// Everything needed to evaluate the pencil on one orbit.
#[derive(Debug, Clone)]
pub struct PencilContext {
    pub label: String,
    pub basis: LieBasis,
    pub r_o: Tensor2,
    pub r_p: Tensor2,
    ro_mat: DMatrix<f64>,
    rp_mat: DMatrix<f64>,
}

impl PencilContext {
    pub fn new(label: impl Into<String>, rank: usize, parabolic: &[Root]) -> Result<Self> {
        let rs = build_root_system(Series::A, rank)?;
        let basis = compact_basis(&chevalley_basis(&rs)?, parabolic)?;
        let r_o = compact_r(&basis)?;
        let r_p = parabolic_r(&basis, parabolic)?;
        Ok(PencilContext {
            label: label.into(),
            ro_mat: r_o.real_matrix(),
            rp_mat: r_p.real_matrix(),
            basis,
            r_o,
            r_p,
        })
    }

    /// `CP^1 = SU(2)/U(1)`.
    pub fn cp1() -> Self {
        PencilContext::new("cp1", 1, &[Root::new(1, 2)]).expect("cp1 preset is valid")
    }

    /// `CP^2 = SU(3)/S(U(1) x U(2))`: the roots containing the first simple root.
    pub fn cp2() -> Self {
        PencilContext::new("cp2", 2, &[Root::new(1, 2), Root::new(1, 3)]).expect("cp2 preset is valid")
    }

    pub fn compact(&self) -> &MatrixBasis {
        &self.basis.compact.as_ref().expect("context has a compact basis").basis
    }

    pub fn m(&self) -> usize {
        self.r_p_roots().len()
    }

    pub fn r_p_roots(&self) -> &[Root] {
        &self.basis.compact.as_ref().expect("compact").parabolic
    }

    pub fn matrix_size(&self) -> usize {
        self.basis.matrix_size()
    }

    pub fn is_su2(&self) -> bool {
        self.basis.root_system.rank == 1 && self.m() == 1
    }

    /// Real matrix of `Ad_g` in the compact basis.
    pub fn ad_real(&self, g: &GroupElement) -> DMatrix<f64> {
        self.compact().adjoint_matrix(g).map(|c| c.re)
    }

    /// Coefficient matrix of `r_o - Ad_{g^-1} r_o + lambda r_p`.
    pub fn pencil_matrix(&self, g: &GroupElement, lambda: f64) -> DMatrix<f64> {
        let a = self.ad_real(g);
        &self.ro_mat - a.transpose() * &self.ro_mat * &a + &self.rp_mat * lambda
    }

    pub fn pencil_tensor(&self, p: &PencilPoint) -> Tensor2 {
        Tensor2::from_real(self.r_o.tag.clone(), &self.pencil_matrix(&p.g, p.lambda))
    }

    pub fn spectral_bound(&self, g: &GroupElement) -> f64 {
        spectral_bound_matrices(&self.ad_real(g), &self.ro_mat, &self.rp_mat)
    }

    /// Root whose `SU(2)` subgroup is swept: the first simple root of the parabolic set.
    pub fn sweep_root(&self) -> Root {
        let roots = self.r_p_roots();
        roots
            .iter()
            .copied()
            .find(Root::is_simple)
            .or_else(|| roots.first().copied())
            .unwrap_or(Root::new(1, 2))
    }

    pub fn sweep_element(&self, t: f64) -> GroupElement {
        root_rotation(self.matrix_size(), &self.sweep_root(), t)
    }

    /// Pfaffian of the leading `2m x 2m` block at `(g, lambda)`.
    pub fn leading_pfaffian(&self, g: &GroupElement, lambda: f64) -> f64 {
        let m = self.m();
        pfaffian(&self.pencil_matrix(g, lambda).view((0, 0), (2 * m, 2 * m)).into_owned())
    }

    /// Rank of the leading block at `(g, lambda)`.
    pub fn rank_at(&self, g: &GroupElement, lambda: f64, tol: f64) -> usize {
        leading_rank_of(&self.pencil_matrix(g, lambda), self.m(), tol)
    }

    /// Sign changes of the leading Pfaffian along `t -> exp(t V_a)`, `t` in `[0, pi/2]`,
    /// refined by bisection.
    pub fn sweep_roots(&self, lambda: f64) -> Vec<f64> {
        let ts: Vec<f64> = (0..=SWEEP_POINTS)
            .map(|k| FRAC_PI_2 * k as f64 / SWEEP_POINTS as f64)
            .collect();
        let f = |t: f64| self.leading_pfaffian(&self.sweep_element(t), lambda);
        let vals: Vec<f64> = ts.iter().map(|t| f(*t)).collect();
        let mut roots = Vec::new();
        for k in 0..SWEEP_POINTS {
            let (mut a, mut b) = (ts[k], ts[k + 1]);
            let (mut fa, fb) = (vals[k], vals[k + 1]);
            if fa == 0.0 {
                roots.push(a);
                continue;
            }
            if fa * fb >= 0.0 {
                continue;
            }
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                let fm = f(mid);
                if fm == 0.0 {
                    a = mid;
                    b = mid;
                    break;
                }
                if fa * fm < 0.0 {
                    b = mid;
                } else {
                    a = mid;
                    fa = fm;
                }
            }
            // endpoint with the smaller |Pf|
            roots.push(if f(a).abs() <= f(b).abs() { a } else { b });
        }
        if vals[SWEEP_POINTS] == 0.0 {
            roots.push(ts[SWEEP_POINTS]);
        }
        roots
    }

    /// Coadjoint image of the base point `iH` (last compact basis vector), as
    /// compact coordinates. Used for the `SU(2)` coset chart.
    pub fn orbit_point(&self, g: &GroupElement) -> DVector<f64> {
        let compact = self.compact();
        let base = compact.element(compact.dim() - 1);
        compact.coords(&g.conjugate(base)).map(|c| c.re)
    }

    /// Stereographic coordinate of `g` on `CP^1` (None at the antipode of the base point).
    pub fn coset_z(&self, g: &GroupElement) -> Option<Complex64> {
        let n = self.orbit_point(g);
        let d = n.len();
        let denom = 1.0 + n[d - 1];
        if denom.abs() < 1e-300 {
            return None;
        }
        Some(Complex64::new(n[0], n[1]) / denom)
    }

    /// `|z|^2 = (1 - n_H) / (1 + n_H)` for the `SU(2)` coset chart.
    pub fn coset_radius_sq(&self, g: &GroupElement) -> f64 {
        let n = self.orbit_point(g);
        let nh = n[n.len() - 1];
        (1.0 - nh) / (1.0 + nh)
    }
}

/// `sigma_max(16 A^T R_o A R_p)`.
pub fn spectral_bound_matrices(ad: &DMatrix<f64>, ro: &DMatrix<f64>, rp: &DMatrix<f64>) -> f64 {
    let m = (ad.transpose() * ro * ad * rp) * 16.0;
    m.singular_values().max()
}

/// `|| 16 Ad_g^T R_o Ad_g R_p ||` for tensors over the compact basis.
pub fn spectral_bound(g: &GroupElement, r_o: &Tensor2, r_p: &Tensor2, compact: &MatrixBasis) -> f64 {
    let ad = compact.adjoint_matrix(g).map(|c| c.re);
    spectral_bound_matrices(&ad, &r_o.real_matrix(), &r_p.real_matrix())
}

/// Numerical rank of the leading `2m x 2m` block: singular values above
/// `tol` times the largest singular value of the whole coefficient matrix.
pub fn leading_minor_rank(t: &Tensor2, m: usize, tol: f64) -> Result<usize> {
    if 2 * m > t.dim() {
        return Err(Error::Shape(format!(
            "leading 2m = {} block exceeds tensor dimension {}",
            2 * m,
            t.dim()
        )));
    }
    if tol <= 0.0 {
        return Err(Error::OutOfRange {
            what: "rank tolerance".into(),
            value: tol,
            range: "(0, inf)".into(),
        });
    }
    Ok(leading_rank_of(&t.real_matrix(), m, tol))
}

fn leading_rank_of(full: &DMatrix<f64>, m: usize, tol: f64) -> usize {
    if m == 0 {
        return 0;
    }
    let scale = full.clone().singular_values().max();
    if scale == 0.0 {
        return 0;
    }
    let block = full.view((0, 0), (2 * m, 2 * m)).into_owned();
    block.singular_values().iter().filter(|s| **s > tol * scale).count()
}

/// Pfaffian of a real antisymmetric matrix by pivoted skew elimination.
pub fn pfaffian(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    if n % 2 == 1 {
        return 0.0;
    }
    let mut a = a.clone();
    let mut pf = 1.0;
    let mut k = 0;
    while k + 1 < n {
        let (mut p, mut best) = (k + 1, a[(k, k + 1)].abs());
        for j in k + 2..n {
            if a[(k, j)].abs() > best {
                best = a[(k, j)].abs();
                p = j;
            }
        }
        if p != k + 1 {
            a.swap_rows(k + 1, p);
            a.swap_columns(k + 1, p);
            pf = -pf;
        }
        let pivot = a[(k, k + 1)];
        if pivot == 0.0 {
            return 0.0;
        }
        pf *= pivot;
        for i in k + 2..n {
            let tau = a[(k, i)] / pivot;
            if tau != 0.0 {
                for j in 0..n {
                    let v = a[(k + 1, j)];
                    a[(i, j)] -= tau * v;
                }
                for j in 0..n {
                    let v = a[(j, k + 1)];
                    a[(j, i)] -= tau * v;
                }
            }
        }
        k += 2;
    }
    pf
}

/// Point at which a scan found a rank drop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub source: String,
    pub rank: usize,
    /// Sweep parameter for points on the `K_a` sweep.
    pub sweep_t: Option<f64>,
    /// `|z|^2` in the stereographic chart when the orbit is `CP^1`.
    pub radius_sq: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PencilRow {
    pub lambda: f64,
    pub min_rank: usize,
    pub degenerate: bool,
    pub max_bound: f64,
    pub samples: usize,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PencilReport {
    pub orbit: String,
    pub rank: usize,
    pub m: usize,
    pub lambda_grid: Vec<f64>,
    pub rows: Vec<PencilRow>,
    pub sample_count: usize,
    pub seed: u64,
    pub rank_tol: f64,
    pub bound_min: f64,
    pub bound_max: f64,
    pub bound_at_identity: f64,
}

impl PencilReport {
    /// CSV with columns `lambda,min_rank,degenerate,max_bound,samples,seed`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["lambda", "min_rank", "degenerate", "max_bound", "samples", "seed"])
            .expect("in-memory write");
        for row in &self.rows {
            w.write_record([
                fmt_f64(row.lambda),
                row.min_rank.to_string(),
                row.degenerate.to_string(),
                fmt_f64(row.max_bound),
                row.samples.to_string(),
                self.seed.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    pub fn row(&self, lambda: f64) -> Option<&PencilRow> {
        self.rows.iter().find(|r| r.lambda == lambda)
    }
}

/// Locale-free float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

struct ScanPoint {
    source: String,
    g: GroupElement,
    sweep_t: Option<f64>,
}

/// Scans the leading-minor rank over Haar samples, the identity, the longest
/// Weyl element and the `K_a` sweep (with bisection-refined Pfaffian zeros).
pub fn degeneracy_scan(
    ctx: &PencilContext,
    lambda_grid: &[f64],
    sample_count: usize,
    seed: u64,
    tol: f64,
) -> Result<PencilReport> {
    if lambda_grid.is_empty() {
        return Err(Error::OutOfRange {
            what: "lambda grid length".into(),
            value: 0.0,
            range: "[1, inf)".into(),
        });
    }
    if sample_count == 0 {
        return Err(Error::OutOfRange {
            what: "sample count".into(),
            value: 0.0,
            range: "[1, inf)".into(),
        });
    }
    if let Some(bad) = lambda_grid.iter().find(|l| !l.is_finite()) {
        return Err(Error::OutOfRange {
            what: "lambda".into(),
            value: *bad,
            range: "finite".into(),
        });
    }
    let n = ctx.matrix_size();
    let mut fixed = vec![
        ScanPoint {
            source: "identity".into(),
            g: GroupElement::identity(n),
            sweep_t: None,
        },
        ScanPoint {
            source: "longest_weyl".into(),
            g: longest_weyl_representative(&ctx.basis.root_system),
            sweep_t: None,
        },
    ];
    for (k, g) in haar_samples(n, sample_count, seed).into_iter().enumerate() {
        fixed.push(ScanPoint {
            source: format!("haar[{k}]"),
            g,
            sweep_t: None,
        });
    }
    for k in 0..=SWEEP_POINTS {
        let t = FRAC_PI_2 * k as f64 / SWEEP_POINTS as f64;
        fixed.push(ScanPoint {
            source: format!("sweep[{k}]"),
            g: ctx.sweep_element(t),
            sweep_t: Some(t),
        });
    }

    let bounds: Vec<f64> = fixed.par_iter().map(|p| ctx.spectral_bound(&p.g)).collect();
    let bound_min = bounds.iter().copied().fold(f64::INFINITY, f64::min);
    let bound_max = bounds.iter().copied().fold(0.0, f64::max);
    let bound_at_identity = bounds[0];

    let rows: Vec<PencilRow> = lambda_grid
        .par_iter()
        .map(|&lambda| {
            let mut points: Vec<&ScanPoint> = fixed.iter().collect();
            let refined: Vec<ScanPoint> = ctx
                .sweep_roots(lambda)
                .into_iter()
                .map(|t| ScanPoint {
                    source: "sweep_root".into(),
                    g: ctx.sweep_element(t),
                    sweep_t: Some(t),
                })
                .collect();
            points.extend(refined.iter());
            let ranks: Vec<usize> = points.iter().map(|p| ctx.rank_at(&p.g, lambda, tol)).collect();
            let min_rank = ranks.iter().copied().min().unwrap_or(0);
            let degenerate = min_rank < 2 * ctx.m();
            // prefer a refined root as witness, then any other point with the minimal rank
            let witness = degenerate.then(|| {
                let pick = points
                    .iter()
                    .zip(&ranks)
                    .filter(|(_, r)| **r == min_rank)
                    .min_by_key(|(p, _)| if p.source == "sweep_root" { 0 } else { 1 })
                    .map(|(p, _)| *p)
                    .expect("some point attains the minimum");
                Witness {
                    source: pick.source.clone(),
                    rank: min_rank,
                    sweep_t: pick.sweep_t,
                    radius_sq: ctx.is_su2().then(|| ctx.coset_radius_sq(&pick.g)),
                }
            });
            PencilRow {
                lambda,
                min_rank,
                degenerate,
                max_bound: bound_max,
                samples: points.len(),
                witness,
            }
        })
        .collect();

    Ok(PencilReport {
        orbit: ctx.label.clone(),
        rank: ctx.basis.root_system.rank,
        m: ctx.m(),
        lambda_grid: lambda_grid.to_vec(),
        rows,
        sample_count,
        seed,
        rank_tol: tol,
        bound_min,
        bound_max,
        bound_at_identity,
    })
}

/// Norm of `l_w* pi_lambda(g) + pi_{-(lambda+2)}(g)` along the orbit directions:
/// the leading block of `r_lambda(w^-1 g) + r_{-(lambda+2)}(g)`.
pub fn weyl_flip_residual(ctx: &PencilContext, g: &GroupElement, lambda: f64) -> f64 {
    let w = longest_weyl_representative(&ctx.basis.root_system);
    let moved = w.inverse().compose(g);
    let sum = ctx.pencil_matrix(&moved, lambda) + ctx.pencil_matrix(g, -(lambda + 2.0));
    let m = ctx.m();
    sum.view((0, 0), (2 * m, 2 * m)).norm()
}

/// Coefficient `c` of `pi_lambda = c d_x ^ d_y` on `CP^1`, `z = x + iy`:
/// `c = (1 + |z|^2)(lambda + (lambda + 2)|z|^2) / 4`.
pub fn cp1_coefficient(lambda: f64, x: f64, y: f64) -> f64 {
    let rho = x * x + y * y;
    0.25 * (1.0 + rho) * (lambda + (lambda + 2.0) * rho)
}

/// The pencil on the stereographic chart of `CP^1`.
pub fn cp1_chart_bivector(lambda: f64) -> ChartBivector {
    ChartBivector::planar(
        format!("pi_lambda[{lambda}] on CP1"),
        Domain::All,
        move |p| cp1_coefficient(lambda, p[0], p[1]),
        Some(Arc::new(move |p: &[f64]| {
            let rho = p[0] * p[0] + p[1] * p[1];
            let k = 0.5 * ((lambda + (lambda + 2.0) * rho) + (1.0 + rho) * (lambda + 2.0));
            [k * p[0], k * p[1]]
        })),
    )
}

/// `pi_SD` on the `CP^1` chart (the `lambda = 0` member).
pub fn cp1_sd_chart() -> ChartBivector {
    cp1_chart_bivector(0.0)
}

/// `pi_KKS` on the `CP^1` chart: `(1 + |z|^2)^2 / 4`.
pub fn cp1_kks_chart() -> ChartBivector {
    ChartBivector::planar(
        "pi_KKS on CP1",
        Domain::All,
        |p| {
            let rho = p[0] * p[0] + p[1] * p[1];
            0.25 * (1.0 + rho) * (1.0 + rho)
        },
        Some(Arc::new(|p: &[f64]| {
            let rho = p[0] * p[0] + p[1] * p[1];
            [(1.0 + rho) * p[0], (1.0 + rho) * p[1]]
        })),
    )
}

/// Squared radius of the degeneracy circle `|z|^2 = -lambda / (lambda + 2)`, if any.
pub fn cp1_degenerate_radius_sq(lambda: f64) -> Option<f64> {
    let rho = -lambda / (lambda + 2.0);
    (rho.is_finite() && rho >= 0.0).then_some(rho)
}

/// Linear (KKS) bracket on `k*` in orthonormal compact coordinates.
pub fn ambient_kks_bivector(ctx: &PencilContext) -> ChartBivector {
    let basis = ctx.compact().clone();
    let d = basis.dim();
    ChartBivector::new(format!("KKS on {}*", ctx.label), d, Domain::All, move |y| {
        let xi = CoalgebraPoint::from_coords(&basis, y).expect("compact coordinates");
        kks_matrix(&xi, &basis)
    })
}

/// Quadratic r-bracket `(rho (x) rho) r_o` on `k*` in compact coordinates.
pub fn ambient_r_bivector(ctx: &PencilContext) -> ChartBivector {
    let basis = ctx.compact().clone();
    let r = ctx.r_o.clone();
    let d = basis.dim();
    ChartBivector::new(format!("r-bracket on {}*", ctx.label), d, Domain::All, move |y| {
        let xi = CoalgebraPoint::from_coords(&basis, y).expect("compact coordinates");
        r_bracket_matrix(&xi, &r, &basis).expect("r_o is real over the compact basis")
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictSample {
    pub source: String,
    pub radius_sq: f64,
    pub group_degenerate: bool,
    pub chart_degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossCheck {
    pub lambda: f64,
    pub samples: Vec<VerdictSample>,
    pub mismatches: usize,
}

impl CrossCheck {
    pub fn agree(&self) -> bool {
        self.mismatches == 0
    }
}

/// Sweep points straddling each degeneracy root, plus the roots themselves.
pub fn straddling_points(ctx: &PencilContext, lambda: f64) -> Vec<(String, GroupElement)> {
    let mut out = vec![("identity".to_string(), GroupElement::identity(ctx.matrix_size()))];
    for t in ctx.sweep_roots(lambda) {
        out.push((format!("root t={t:.6}"), ctx.sweep_element(t)));
        for d in [1e-2, 1e-4] {
            out.push((format!("root-{d:e}"), ctx.sweep_element(t - d)));
            out.push((format!("root+{d:e}"), ctx.sweep_element(t + d)));
        }
    }
    out
}

/// Compares the group-side rank verdict with the chart-side coefficient verdict
/// at corresponding points of `CP^1`.
pub fn cross_check_group_vs_chart(
    ctx: &PencilContext,
    lambda: f64,
    points: &[(String, GroupElement)],
    tol: f64,
) -> Result<CrossCheck> {
    if !ctx.is_su2() {
        return Err(Error::Shape("cross-check is defined on CP1 only".into()));
    }
    let chart = cp1_chart_bivector(lambda);
    let samples: Vec<VerdictSample> = points
        .iter()
        .map(|(source, g)| {
            let group_degenerate = ctx.rank_at(g, lambda, tol) < 2;
            let chart_degenerate = match ctx.coset_z(g) {
                Some(z) => chart
                    .value(&[z.re, z.im])
                    .map(|m| m[(0, 1)].abs() < DEGENERACY_CUTOFF)
                    .unwrap_or(false),
                // the point at infinity: (lambda + 2)|z|^4 dominates
                None => (lambda + 2.0).abs() < DEGENERACY_CUTOFF,
            };
            VerdictSample {
                source: source.clone(),
                radius_sq: ctx.coset_radius_sq(g),
                group_degenerate,
                chart_degenerate,
            }
        })
        .collect();
    let mismatches = samples
        .iter()
        .filter(|s| s.group_degenerate != s.chart_degenerate)
        .count();
    Ok(CrossCheck {
        lambda,
        samples,
        mismatches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie_core::random_group_element;
    use crate::schouten::{jacobiator, DEFAULT_STEP};

    fn brute_pfaffian(a: &DMatrix<f64>) -> f64 {
        // expansion along the first row
        let n = a.nrows();
        if n == 0 {
            return 1.0;
        }
        let mut total = 0.0;
        for j in 1..n {
            let keep: Vec<usize> = (1..n).filter(|k| *k != j).collect();
            let sub = DMatrix::from_fn(n - 2, n - 2, |r, c| a[(keep[r], keep[c])]);
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            total += sign * a[(0, j)] * brute_pfaffian(&sub);
        }
        total
    }

    #[test]
    fn pfaffian_matches_expansion() {
        let mut seed = 1u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for n in [2usize, 4, 6] {
            let mut a = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in i + 1..n {
                    let v = next();
                    a[(i, j)] = v;
                    a[(j, i)] = -v;
                }
            }
            let pf = pfaffian(&a);
            assert!((pf - brute_pfaffian(&a)).abs() < 1e-12);
            assert!((pf * pf - a.determinant()).abs() < 1e-12);
        }
    }

    #[test]
    fn kks_zero_and_su2_pattern() {
        let ctx = PencilContext::cp1();
        let basis = ctx.compact();
        let zero = CoalgebraPoint::from_coords(basis, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(kks_matrix(&zero, basis).norm(), 0.0);
        let ih = CoalgebraPoint::from_coords(basis, &[0.0, 0.0, 1.0]).unwrap();
        let p = kks_matrix(&ih, basis);
        // [V, W] = 2 iH: only the (V, W) slot is nonzero
        assert!((p[(0, 1)].abs() - 2.0).abs() < 1e-12);
        assert!(p[(0, 2)].abs() < 1e-12 && p[(1, 2)].abs() < 1e-12);
    }

    #[test]
    fn brackets_scale_linearly_and_quadratically() {
        let ctx = PencilContext::cp2();
        let basis = ctx.compact();
        let y: Vec<f64> = (0..8).map(|k| (k as f64 * 0.37).sin()).collect();
        let y2: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
        let xi = CoalgebraPoint::from_coords(basis, &y).unwrap();
        let xi2 = CoalgebraPoint::from_coords(basis, &y2).unwrap();
        let k1 = kks_matrix(&xi, basis);
        let k2 = kks_matrix(&xi2, basis);
        assert!((k2 - &k1 * 2.0).norm() < 1e-12);
        assert!((&k1 + k1.transpose()).norm() == 0.0);
        let r1 = r_bracket_matrix(&xi, &ctx.r_o, basis).unwrap();
        let r2 = r_bracket_matrix(&xi2, &ctx.r_o, basis).unwrap();
        assert!((r2 - &r1 * 4.0).norm() < 1e-12);
        assert!((&r1 + r1.transpose()).norm() < 1e-14);
        let zero = Tensor2::zeros(ctx.r_o.tag.clone(), 8);
        assert_eq!(r_bracket_matrix(&xi, &zero, basis).unwrap().norm(), 0.0);
    }

    #[test]
    fn pencil_tensor_special_points() {
        let ctx = PencilContext::cp2();
        let e = GroupElement::identity(3);
        let zero = ctx.pencil_tensor(&PencilPoint {
            g: e.clone(),
            lambda: 0.0,
        });
        assert!(zero.norm() < 1e-15);
        let one = ctx.pencil_tensor(&PencilPoint { g: e, lambda: 1.0 });
        assert!((one.coeffs - &ctx.r_p.coeffs).norm() < 1e-15);
        let w = longest_weyl_representative(&ctx.basis.root_system);
        let lam = 0.3;
        let at_w = ctx.pencil_matrix(&w, lam);
        let expected = &ctx.ro_mat * 2.0 + &ctx.rp_mat * lam;
        assert!((at_w - expected).norm() < 1e-12);
    }

    #[test]
    fn leading_rank_edge_cases() {
        let ctx = PencilContext::cp2();
        let rp = &ctx.r_p;
        assert_eq!(leading_minor_rank(rp, 2, DEFAULT_RANK_TOL).unwrap(), 4);
        let zero = Tensor2::zeros(rp.tag.clone(), 8);
        assert_eq!(leading_minor_rank(&zero, 2, DEFAULT_RANK_TOL).unwrap(), 0);
        assert!(matches!(
            leading_minor_rank(rp, 5, DEFAULT_RANK_TOL),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn spectral_bound_at_identity_and_scaling() {
        for ctx in [PencilContext::cp1(), PencilContext::cp2()] {
            let e = GroupElement::identity(ctx.matrix_size());
            assert!((ctx.spectral_bound(&e) - 1.0).abs() < 1e-14);
            let g = random_group_element(ctx.matrix_size(), 4);
            let b = ctx.spectral_bound(&g);
            assert!(b <= 1.0 + 1e-10);
            let doubled = spectral_bound(&g, &ctx.r_o.scaled(2.0), &ctx.r_p, ctx.compact());
            assert!((doubled - 2.0 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn sweep_root_on_cp1_lands_on_unit_circle() {
        let ctx = PencilContext::cp1();
        let roots = ctx.sweep_roots(-1.0);
        assert_eq!(roots.len(), 1);
        let g = ctx.sweep_element(roots[0]);
        assert!((ctx.coset_radius_sq(&g) - 1.0).abs() < 1e-9);
        assert_eq!(ctx.rank_at(&g, -1.0, DEFAULT_RANK_TOL), 0);
        assert!(ctx.sweep_roots(0.5).is_empty());
        assert!(ctx.sweep_roots(-3.0).is_empty());
    }

    #[test]
    fn scan_small_grid() {
        let ctx = PencilContext::cp1();
        let report = degeneracy_scan(&ctx, &[-3.0, -1.0, 0.5], 20, 1, DEFAULT_RANK_TOL).unwrap();
        let flags: Vec<bool> = report.rows.iter().map(|r| r.degenerate).collect();
        assert_eq!(flags, vec![false, true, false]);
        assert_eq!(report.row(0.5).unwrap().min_rank, 2);
        assert!(degeneracy_scan(&ctx, &[], 5, 1, DEFAULT_RANK_TOL).is_err());
        assert!(degeneracy_scan(&ctx, &[1.0], 0, 1, DEFAULT_RANK_TOL).is_err());
        let csv = report.to_csv();
        assert!(csv.starts_with("lambda,min_rank,degenerate,max_bound,samples,seed\n"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn weyl_flip_special_pairs() {
        for ctx in [PencilContext::cp1(), PencilContext::cp2()] {
            let g = random_group_element(ctx.matrix_size(), 17);
            assert!(weyl_flip_residual(&ctx, &g, -1.0) <= 1e-10);
            assert!(weyl_flip_residual(&ctx, &g, 0.0) <= 1e-10);
            assert!(weyl_flip_residual(&ctx, &g, -2.0) <= 1e-10);
            assert!(weyl_flip_residual(&ctx, &g, 0.7) <= 1e-10);
        }
    }

    #[test]
    fn cp1_chart_values() {
        assert_eq!(cp1_coefficient(-1.0, 1.0, 0.0), 0.0);
        assert_eq!(cp1_coefficient(-1.0, 0.6, 0.8), 0.0);
        assert_eq!(cp1_coefficient(0.0, 0.0, 0.0), 0.0);
        assert_eq!(cp1_coefficient(1.0, 0.0, 0.0), 0.25);
        assert_eq!(cp1_degenerate_radius_sq(-1.0), Some(1.0));
        assert_eq!(cp1_degenerate_radius_sq(0.5), None);
        let pencil = cp1_sd_chart().combine(1.0, &cp1_kks_chart(), -0.5).unwrap();
        let direct = cp1_chart_bivector(-0.5);
        for pt in [[0.3, 0.1], [1.2, -0.4]] {
            assert!((pencil.value(&pt).unwrap() - direct.value(&pt).unwrap()).norm() < 1e-15);
        }
    }

    #[test]
    fn cross_check_verdicts_agree() {
        let ctx = PencilContext::cp1();
        for lambda in [-1.0, 1.0, 0.0, -0.5] {
            let mut pts = straddling_points(&ctx, lambda);
            for k in 0..10 {
                pts.push((format!("haar{k}"), random_group_element(2, 100 + k)));
            }
            let check = cross_check_group_vs_chart(&ctx, lambda, &pts, DEFAULT_RANK_TOL).unwrap();
            assert!(check.agree(), "{lambda}: {:?}", check.samples);
        }
        let check = cross_check_group_vs_chart(&ctx, 0.0, &[("e".into(), GroupElement::identity(2))], DEFAULT_RANK_TOL)
            .unwrap();
        assert!(check.samples[0].group_degenerate && check.samples[0].chart_degenerate);
        assert!(cross_check_group_vs_chart(&PencilContext::cp2(), 0.0, &[], DEFAULT_RANK_TOL).is_err());
    }

    #[test]
    fn ambient_su2_pencil_is_poisson() {
        let ctx = PencilContext::cp1();
        let kks = ambient_kks_bivector(&ctx);
        let r = ambient_r_bivector(&ctx);
        for lambda in [-1.0, 0.0, 1.0] {
            let pencil = r.combine(1.0, &kks, lambda).unwrap();
            for pt in [[0.3, -0.4, 0.8], [1.1, 0.2, -0.5]] {
                assert!(jacobiator(&pencil, &pt, DEFAULT_STEP).unwrap() <= 1e-8);
            }
        }
    }
}
