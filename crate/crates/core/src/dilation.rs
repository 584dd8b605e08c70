//! Stinespring dilations of c.p. bimodule maps `θ: A → 𝔹(H)`, built from Gram
//! matrices on `A ⊗ H` and then on `A ⊗ Ĥ`.
//!
//! Conventions: `A` carries a central left action of `𝔄` and right action of
//! `𝔅`; `H` is a `𝔅`-`𝔄` Hilbert space with `ξ·α = R_α ξ` and `β·ξ = L_β ξ`.
//! `θ` is a bimodule map when `θ(α·a·β) = θ(a) R_α L_β`.
//!
//! A quotient by a Gram null space is stored as a factor `F` with `G = F* F`;
//! column `X` of `F` is the class of basis vector `X`.

use rand::Rng;
use serde::Serialize;

use crate::actions::{BimoduleHilbert, BimoduleStructure};
use crate::algebra::{AlgebraElement, MultiMatrixAlgebra};
use crate::cpcalc::BlockLinearMap;
use crate::error::{Error, Result};
use crate::linalg::{self, c, kron, max_abs, op_norm, CMat, CVec, HermitianEigen, ZERO};

/// Relative eigenvalue threshold for Gram quotients.
pub const GRAM_THRESHOLD: f64 = 1e-10;
const INPUT_TOL: f64 = 1e-10;
const ACTION_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct Dilation {
    pub source: MultiMatrixAlgebra,
    pub h_dim: usize,
    pub k_dim: usize,
    /// `π(e_i)` for the matrix-unit basis of the source.
    pub pi: Vec<CMat>,
    /// `K_dim × H_dim`.
    pub v: CMat,
    /// `None` when `K` is zero-dimensional.
    pub k_actions: Option<BimoduleHilbert>,
    pub h_hat_dim: usize,
    /// Intermediate representation on `Ĥ` and `W: H → Ĥ`.
    pub pi_hat: Vec<CMat>,
    pub w: CMat,
    /// Largest `G₁`-seminorm of `(a·β)⊗ξ − a⊗(β·ξ)` and `(α·a)⊗ξ − a⊗(ξ·α)` over basis data.
    pub balancing_residual: f64,
}

impl Dilation {
    pub fn pi(&self, a: &AlgebraElement) -> CMat {
        combine(&self.pi, &a.coords(), self.k_dim)
    }

    pub fn pi_hat(&self, a: &AlgebraElement) -> CMat {
        combine(&self.pi_hat, &a.coords(), self.h_hat_dim)
    }

    /// Columns `π(e_i) V ξ_m` spanning `π(A) V H`.
    fn spanning_vectors(&self) -> CMat {
        let h = self.h_dim;
        let mut s = CMat::zeros(self.k_dim, self.pi.len() * h);
        for (i, p) in self.pi.iter().enumerate() {
            s.view_mut((0, i * h), (self.k_dim, h))
                .copy_from(&(p * &self.v));
        }
        s
    }

    /// `(rank of π(A) V H, K_dim)`.
    pub fn span_rank(&self) -> (usize, usize) {
        (
            linalg::orthonormal_span(&self.spanning_vectors(), GRAM_THRESHOLD).ncols(),
            self.k_dim,
        )
    }

    pub fn is_minimal(&self) -> bool {
        let (r, k) = self.span_rank();
        r == k
    }
}

fn combine(images: &[CMat], coords: &CVec, dim: usize) -> CMat {
    let mut out = CMat::zeros(dim, dim);
    for (m, z) in images.iter().zip(coords.iter()) {
        if *z != ZERO {
            out += m * *z;
        }
    }
    out
}

/// Matrix of `x ↦ c x` (or `x ↦ x c`) in matrix-unit coordinates.
fn mult_matrix(a: &MultiMatrixAlgebra, el: &AlgebraElement, left: bool) -> CMat {
    let basis = a.basis();
    let mut m = CMat::zeros(a.dim(), a.dim());
    for (j, e) in basis.iter().enumerate() {
        let y = if left { el * e } else { e * el };
        m.set_column(j, &y.coords());
    }
    m
}

/// `(F, F⁺)` with `G = F* F`, `F` of full row rank and `F⁺ F` the range projection.
fn gram_factor(g: &CMat) -> (CMat, CMat) {
    let e = HermitianEigen::new(g);
    let thr = GRAM_THRESHOLD * e.max().max(f64::MIN_POSITIVE);
    let (vals, vecs) = e.range(thr);
    let mut f = vecs.adjoint();
    let mut fp = vecs;
    for (k, lam) in vals.iter().enumerate() {
        let s = lam.sqrt();
        f.row_mut(k).scale_mut(s);
        fp.column_mut(k).scale_mut(1.0 / s);
    }
    (f, fp)
}

fn unit_embedding(a: &MultiMatrixAlgebra, d: usize) -> CMat {
    let u = a.unit().coords();
    kron(
        &CMat::from_fn(u.len(), 1, |i, _| u[i]),
        &CMat::identity(d, d),
    )
}

/// Bimodule residual of `θ: A → 𝔹(H)`.
pub fn hilbert_bimodule_residual(
    theta: &BlockLinearMap,
    bim: &BimoduleStructure,
    h: &BimoduleHilbert,
) -> Result<f64> {
    bim.target().check_same(theta.source())?;
    let hd = h.dim();
    if theta.target().blocks() != [hd] {
        return Err(Error::ShapeMismatch(format!(
            "target {} is not B(C^{hd})",
            theta.target()
        )));
    }
    if bim.left.source() != h.right_algebra() || bim.right.source() != h.left_algebra() {
        return Err(Error::SourceMismatch);
    }
    let basis = theta.source().basis();
    let images: Vec<CMat> = basis
        .iter()
        .map(|e| theta.eval(e).block(0).clone())
        .collect();
    let mut worst: f64 = 0.0;
    for alpha in bim.left.source().basis() {
        let r = h.pi_right_op(&alpha);
        let ra = bim.left.rho(&alpha);
        for (e, t) in basis.iter().zip(&images) {
            let lhs = theta.eval(&(&ra * e)).block(0).clone();
            worst = worst
                .max(max_abs(&(&lhs - t * &r)))
                .max(max_abs(&(&lhs - &r * t)));
        }
    }
    for beta in bim.right.source().basis() {
        let l = h.pi_left(&beta);
        let rb = bim.right.rho(&beta);
        for (e, t) in basis.iter().zip(&images) {
            let lhs = theta.eval(&(e * &rb)).block(0).clone();
            worst = worst
                .max(max_abs(&(&lhs - t * &l)))
                .max(max_abs(&(&lhs - &l * t)));
        }
    }
    Ok(worst)
}

/// Module Stinespring dilation `θ(a) = V* π(a) V`.
///
/// Stage 1 is the classical construction on `A ⊗ H` with
/// `⟨a⊗ξ, b⊗η⟩ = ⟨ξ, θ(a*b)η⟩`; the `𝔅`-balancing relations fall in its null
/// space. Stage 2 repeats it for `π̂` on `A ⊗ Ĥ` with
/// `⟨b⊗η, b'⊗η'⟩ = ⟨η, π̂(b*b')η'⟩`, which carries the `𝔅`-`𝔄` actions
/// `β·[b⊗η] = [(b·β)⊗η]` and `[b⊗η]·α = [b⊗(η·α)]`.
pub fn stinespring_module(
    theta: &BlockLinearMap,
    bim: &BimoduleStructure,
    h: &BimoduleHilbert,
) -> Result<Dilation> {
    let res = hilbert_bimodule_residual(theta, bim, h)?;
    let scale = theta.superop().iter().map(|z| z.norm()).fold(1.0, f64::max);
    if res > INPUT_TOL * scale {
        return Err(Error::NotBimoduleMap(res));
    }
    let min = theta.choi_min_eigenvalue();
    if !theta.is_hermitian_preserving(INPUT_TOL * scale) || min < -INPUT_TOL * scale {
        return Err(Error::NotCP(min));
    }
    let a = theta.source();
    let basis = a.basis();
    let (da, hd) = (a.dim(), h.dim());

    let mut g1 = CMat::zeros(da * hd, da * hd);
    for (i, ei) in basis.iter().enumerate() {
        for (j, ej) in basis.iter().enumerate() {
            let t = theta.eval(&(ei.adjoint() * ej));
            g1.view_mut((i * hd, j * hd), (hd, hd))
                .copy_from(t.block(0));
        }
    }
    let (f1, f1p) = gram_factor(&g1);
    let r = f1.nrows();
    let lifted = |t: &CMat, f: &CMat, fp: &CMat| -> CMat { f * t * fp };
    let pi_hat: Vec<CMat> = basis
        .iter()
        .map(|e| {
            lifted(
                &kron(&mult_matrix(a, e, true), &CMat::identity(hd, hd)),
                &f1,
                &f1p,
            )
        })
        .collect();
    let w = &f1 * unit_embedding(a, hd);

    // ‖F₁ z‖ avoids the square root of a cancelling quadratic form
    let seminorm = |z: &CMat| (&f1 * z).norm();
    let mut balancing: f64 = 0.0;
    let mut check = |left_a: &CMat, right_h: &CMat| {
        for j in 0..da {
            for m in 0..hd {
                let mut z = CMat::zeros(da * hd, 1);
                for jj in 0..da {
                    z[(jj * hd + m, 0)] += left_a[(jj, j)];
                }
                for n in 0..hd {
                    z[(j * hd + n, 0)] -= right_h[(n, m)];
                }
                balancing = balancing.max(seminorm(&z));
            }
        }
    };
    for beta in bim.right.source().basis() {
        check(
            &mult_matrix(a, &bim.right.rho(&beta), false),
            &h.pi_left(&beta),
        );
    }
    for alpha in bim.left.source().basis() {
        check(
            &mult_matrix(a, &bim.left.rho(&alpha), true),
            &h.pi_right_op(&alpha),
        );
    }

    let mut g2 = CMat::zeros(da * r, da * r);
    for (q, eq) in basis.iter().enumerate() {
        for (p, ep) in basis.iter().enumerate() {
            let prod = eq.adjoint() * ep;
            let m = combine(&pi_hat, &prod.coords(), r);
            g2.view_mut((q * r, p * r), (r, r)).copy_from(&m);
        }
    }
    let (f2, f2p) = gram_factor(&g2);
    let k = f2.nrows();
    let pi: Vec<CMat> = basis
        .iter()
        .map(|e| {
            lifted(
                &kron(&mult_matrix(a, e, true), &CMat::identity(r, r)),
                &f2,
                &f2p,
            )
        })
        .collect();
    let v2 = &f2 * unit_embedding(a, r);
    let v = &v2 * &w;

    let k_actions = if k == 0 {
        None
    } else {
        let left: Vec<CMat> = h
            .left_algebra()
            .basis()
            .iter()
            .map(|beta| {
                lifted(
                    &kron(
                        &mult_matrix(a, &bim.right.rho(beta), false),
                        &CMat::identity(r, r),
                    ),
                    &f2,
                    &f2p,
                )
            })
            .collect();
        let right: Vec<CMat> = h
            .right_algebra()
            .basis()
            .iter()
            .map(|alpha| {
                let hat = lifted(
                    &kron(&CMat::identity(da, da), &h.pi_right_op(alpha)),
                    &f1,
                    &f1p,
                );
                lifted(&kron(&CMat::identity(da, da), &hat), &f2, &f2p)
            })
            .collect();
        Some(BimoduleHilbert::with_tolerance(
            k,
            h.left_algebra(),
            h.right_algebra(),
            left,
            right,
            ACTION_TOL,
        )?)
    };
    Ok(Dilation {
        source: a.clone(),
        h_dim: hd,
        k_dim: k,
        pi,
        v,
        k_actions,
        h_hat_dim: r,
        pi_hat,
        w,
        balancing_residual: balancing,
    })
}

/// Compresses `K` to `span π(A) V H`.
pub fn minimize_dilation(d: &Dilation) -> Result<Dilation> {
    let q = linalg::orthonormal_span(&d.spanning_vectors(), GRAM_THRESHOLD);
    let k = q.ncols();
    let compress = |m: &CMat| q.adjoint() * m * &q;
    let k_actions = match (&d.k_actions, k) {
        (Some(act), k) if k > 0 => {
            let left = act
                .left_algebra()
                .basis()
                .iter()
                .map(|b| compress(&act.pi_left(b)))
                .collect();
            let right = act
                .right_algebra()
                .basis()
                .iter()
                .map(|a| compress(&act.pi_right_op(a)))
                .collect();
            Some(BimoduleHilbert::with_tolerance(
                k,
                act.left_algebra(),
                act.right_algebra(),
                left,
                right,
                ACTION_TOL,
            )?)
        }
        _ => None,
    };
    Ok(Dilation {
        k_dim: k,
        pi: d.pi.iter().map(compress).collect(),
        v: q.adjoint() * &d.v,
        k_actions,
        ..d.clone()
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DilationReport {
    pub k_dim: usize,
    pub h_hat_dim: usize,
    pub span_rank: usize,
    /// `max ‖π(ab) − π(a)π(b)‖` and `‖π(a*) − π(a)*‖` over the basis.
    pub hom_residual: f64,
    /// `max ‖V*π(a)V − θ(a)‖`.
    pub reconstruction_residual: f64,
    /// The same for `π̂` and `W`.
    pub stage1_reconstruction_residual: f64,
    pub pi_bimodule_residual: f64,
    pub v_bimodule_residual: f64,
    /// `‖V*V − I‖`; zero for unital `θ`.
    pub isometry_defect: f64,
    pub balancing_residual: f64,
    pub passed: bool,
}

pub fn verify_dilation(
    d: &Dilation,
    theta: &BlockLinearMap,
    bim: &BimoduleStructure,
    h: &BimoduleHilbert,
    tol: f64,
) -> Result<DilationReport> {
    d.source.check_same(theta.source())?;
    let basis = d.source.basis();
    let mut hom: f64 = 0.0;
    for (i, a) in basis.iter().enumerate() {
        hom = hom.max(max_abs(&(d.pi(&a.adjoint()) - d.pi[i].adjoint())));
        for (j, b) in basis.iter().enumerate() {
            hom = hom.max(max_abs(&(d.pi(&(a * b)) - &d.pi[i] * &d.pi[j])));
        }
    }
    let mut recon: f64 = 0.0;
    let mut recon1: f64 = 0.0;
    for (i, a) in basis.iter().enumerate() {
        let t = theta.eval(a).block(0).clone();
        recon = recon.max(max_abs(&(d.v.adjoint() * &d.pi[i] * &d.v - &t)));
        recon1 = recon1.max(max_abs(&(d.w.adjoint() * &d.pi_hat[i] * &d.w - &t)));
    }
    let (mut pi_bim, mut v_bim): (f64, f64) = (0.0, 0.0);
    if let Some(act) = &d.k_actions {
        for alpha in bim.left.source().basis() {
            let rk = act.pi_right_op(&alpha);
            let ra = bim.left.rho(&alpha);
            for (i, a) in basis.iter().enumerate() {
                pi_bim = pi_bim.max(max_abs(&(d.pi(&(&ra * a)) - &d.pi[i] * &rk)));
            }
            v_bim = v_bim.max(max_abs(&(&d.v * h.pi_right_op(&alpha) - &rk * &d.v)));
        }
        for beta in bim.right.source().basis() {
            let lk = act.pi_left(&beta);
            let rb = bim.right.rho(&beta);
            for (i, a) in basis.iter().enumerate() {
                pi_bim = pi_bim.max(max_abs(&(d.pi(&(a * &rb)) - &d.pi[i] * &lk)));
            }
            v_bim = v_bim.max(max_abs(&(&d.v * h.pi_left(&beta) - &lk * &d.v)));
        }
    }
    let isometry_defect = op_norm(&(d.v.adjoint() * &d.v - CMat::identity(d.h_dim, d.h_dim)));
    let (span_rank, _) = d.span_rank();
    let passed = hom <= tol && recon <= tol && pi_bim <= tol && v_bim <= tol;
    Ok(DilationReport {
        k_dim: d.k_dim,
        h_hat_dim: d.h_hat_dim,
        span_rank,
        hom_residual: hom,
        reconstruction_residual: recon,
        stage1_reconstruction_residual: recon1,
        pi_bimodule_residual: pi_bim,
        v_bimodule_residual: v_bim,
        isometry_defect,
        balancing_residual: d.balancing_residual,
        passed,
    })
}

#[derive(Clone, Debug)]
pub struct CommutantLift {
    pub rho: CMat,
    /// `max ‖[ρ(x), π(a)]‖`.
    pub commutator_residual: f64,
    /// `max ‖θ(a)x − V*π(a)ρ(x)V‖`.
    pub identity_residual: f64,
}

/// `ρ(x)` on `K` with `ρ(x) π(a) V ξ = π(a) V x ξ`, for `x` commuting with `θ(A)`.
pub fn commutant_lift(d: &Dilation, theta: &BlockLinearMap, x: &CMat) -> Result<CommutantLift> {
    let (rank, dim) = d.span_rank();
    if rank < dim {
        return Err(Error::NotMinimal { rank, dim });
    }
    if x.shape() != (d.h_dim, d.h_dim) {
        return Err(Error::ShapeMismatch(format!(
            "x is {:?}, expected {1}x{1}",
            x.shape(),
            d.h_dim
        )));
    }
    let basis = d.source.basis();
    let images: Vec<CMat> = basis
        .iter()
        .map(|a| theta.eval(a).block(0).clone())
        .collect();
    let scale = max_abs(x).max(1.0) * images.iter().map(max_abs).fold(1.0, f64::max);
    let comm = images
        .iter()
        .map(|t| max_abs(&linalg::commutator(t, x)))
        .fold(0.0, f64::max);
    if comm > 1e-10 * scale {
        return Err(Error::NotInCommutant(comm));
    }
    let s = d.spanning_vectors();
    let hd = d.h_dim;
    let mut t = CMat::zeros(d.k_dim, s.ncols());
    for (i, p) in d.pi.iter().enumerate() {
        t.view_mut((0, i * hd), (d.k_dim, hd))
            .copy_from(&(p * &d.v * x));
    }
    let rho = linalg::solve_right(&s, &t, 1e-12);
    let ls = max_abs(&(&rho * &s - &t));
    if ls > 1e-8 * scale {
        return Err(Error::IllDefined(ls));
    }
    let commutator_residual =
        d.pi.iter()
            .map(|p| max_abs(&linalg::commutator(&rho, p)))
            .fold(0.0, f64::max);
    let identity_residual =
        d.pi.iter()
            .zip(&images)
            .map(|(p, th)| max_abs(&(th * x - d.v.adjoint() * p * &rho * &d.v)))
            .fold(0.0, f64::max);
    Ok(CommutantLift {
        rho,
        commutator_residual,
        identity_residual,
    })
}

/// Orthonormal basis of the commutant of `θ(A)` inside `M_h`.
pub fn range_commutant(theta: &BlockLinearMap) -> Result<Vec<CMat>> {
    let hd = match theta.target().blocks() {
        [h] => *h,
        _ => {
            return Err(Error::ShapeMismatch(format!(
                "expected a full matrix target, got {}",
                theta.target()
            )))
        }
    };
    let ih = CMat::identity(hd, hd);
    let basis = theta.source().basis();
    let mut m = CMat::zeros(basis.len() * hd * hd, hd * hd);
    for (k, e) in basis.iter().enumerate() {
        let t = theta.eval(e).block(0).clone();
        m.view_mut((k * hd * hd, 0), (hd * hd, hd * hd))
            .copy_from(&(kron(&ih, &t) - kron(&t.transpose(), &ih)));
    }
    let scale = theta.superop().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let ns = linalg::null_space_at_scale(&m, 1e-10, scale);
    Ok((0..ns.ncols())
        .map(|j| CMat::from_fn(hd, hd, |i, col| ns[(col * hd + i, j)]))
        .collect())
}

/// Orthonormal basis of `{V : ρ_A(α) V = V R_α, ρ'_A(β) V = V L_β}` in `ℂ^{N_A × h}`.
pub fn intertwiner_basis(bim: &BimoduleStructure, h: &BimoduleHilbert) -> Result<Vec<CMat>> {
    if bim.left.source() != h.right_algebra() || bim.right.source() != h.left_algebra() {
        return Err(Error::SourceMismatch);
    }
    let a = bim.target();
    let (n, hd) = (a.ambient_dim(), h.dim());
    let ih = CMat::identity(hd, hd);
    let inn = CMat::identity(n, n);
    // vec is column-major: vec(D V − V R) = (I ⊗ D − Rᵀ ⊗ I) vec V
    let mut rows: Vec<CMat> = Vec::new();
    for alpha in bim.left.source().basis() {
        let dmat = bim.left.rho(&alpha).to_ambient();
        rows.push(kron(&ih, &dmat) - kron(&h.pi_right_op(&alpha).transpose(), &inn));
    }
    for beta in bim.right.source().basis() {
        let dmat = bim.right.rho(&beta).to_ambient();
        rows.push(kron(&ih, &dmat) - kron(&h.pi_left(&beta).transpose(), &inn));
    }
    let mut m = CMat::zeros(rows.len() * n * hd, n * hd);
    for (k, r) in rows.iter().enumerate() {
        m.view_mut((k * n * hd, 0), (n * hd, n * hd)).copy_from(r);
    }
    let ns = linalg::null_space_at_scale(&m, 1e-12, 1.0);
    Ok((0..ns.ncols())
        .map(|j| CMat::from_fn(n, hd, |i, col| ns[(col * n + i, j)]))
        .collect())
}

/// Random c.p. bimodule map `a ↦ Σ V_k* a V_k` into `𝔹(H)`; `unital` rescales by `θ(1)^{-½}`.
pub fn random_cp_bimodule_map<R: Rng + ?Sized>(
    bim: &BimoduleStructure,
    h: &BimoduleHilbert,
    rank: usize,
    unital: bool,
    rng: &mut R,
) -> Result<BlockLinearMap> {
    let basis = intertwiner_basis(bim, h)?;
    if basis.is_empty() {
        return Err(Error::EmptyIntertwinerSpace);
    }
    let a = bim.target();
    let mut kraus: Vec<CMat> = (0..rank)
        .map(|_| {
            let g = linalg::random_gaussian(rng, basis.len(), 1);
            basis
                .iter()
                .enumerate()
                .fold(CMat::zeros(a.ambient_dim(), h.dim()), |acc, (i, b)| {
                    acc + b * g[(i, 0)]
                })
        })
        .collect();
    if unital {
        let s: CMat = kraus
            .iter()
            .map(|v| v.adjoint() * v)
            .fold(CMat::zeros(h.dim(), h.dim()), |acc, m| acc + m);
        let e = HermitianEigen::new(&s);
        if e.min() <= 1e-8 * e.max() {
            return Err(Error::NotUCP(format!(
                "θ(1) is singular (min eigenvalue {:.3e})",
                e.min()
            )));
        }
        let w = e.map(|x| 1.0 / x.sqrt());
        for v in &mut kraus {
            *v = &*v * &w;
        }
    }
    let target = MultiMatrixAlgebra::full(h.dim())?;
    BlockLinearMap::from_kraus(a, &target, &kraus)
}

/// The dilation `(K ⊕ ℂ, π ⊕ 0, V ⊕ 0)`, which is never minimal.
pub fn pad_dilation(d: &Dilation) -> Result<Dilation> {
    let k = d.k_dim + 1;
    let grow = |m: &CMat| {
        let mut out = CMat::zeros(k, k);
        out.view_mut((0, 0), (d.k_dim, d.k_dim)).copy_from(m);
        out
    };
    let mut v = CMat::zeros(k, d.h_dim);
    v.view_mut((0, 0), (d.k_dim, d.h_dim)).copy_from(&d.v);
    let k_actions = match &d.k_actions {
        Some(act) => {
            let mut left: Vec<CMat> = act
                .left_algebra()
                .basis()
                .iter()
                .map(|b| grow(&act.pi_left(b)))
                .collect();
            let mut right: Vec<CMat> = act
                .right_algebra()
                .basis()
                .iter()
                .map(|a| grow(&act.pi_right_op(a)))
                .collect();
            // the extra line carries the first character of each side
            left[0][(d.k_dim, d.k_dim)] = c(1.0);
            right[0][(d.k_dim, d.k_dim)] = c(1.0);
            Some(BimoduleHilbert::with_tolerance(
                k,
                act.left_algebra(),
                act.right_algebra(),
                left,
                right,
                ACTION_TOL,
            )?)
        }
        None => None,
    };
    Ok(Dilation {
        k_dim: k,
        pi: d.pi.iter().map(grow).collect(),
        v,
        k_actions,
        ..d.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::CentralAction;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_setup(
        n: usize,
        hd: usize,
    ) -> (MultiMatrixAlgebra, BimoduleStructure, BimoduleHilbert) {
        let a = MultiMatrixAlgebra::full(n).unwrap();
        let bim =
            BimoduleStructure::new(CentralAction::trivial(&a), CentralAction::trivial(&a)).unwrap();
        let one = MultiMatrixAlgebra::abelian(1).unwrap();
        let id = vec![CMat::identity(hd, hd)];
        let h = BimoduleHilbert::new(hd, &one, &one, id.clone(), id).unwrap();
        (a, bim, h)
    }

    #[test]
    fn normalized_trace() {
        let (a, bim, h) = scalar_setup(2, 2);
        let m2 = MultiMatrixAlgebra::full(2).unwrap();
        let theta =
            BlockLinearMap::from_fn(&a, &m2, |x| Ok(m2.unit().scale(x.trace() * c(0.5)))).unwrap();
        let d = stinespring_module(&theta, &bim, &h).unwrap();
        assert!(d.k_dim <= 8);
        let rep = verify_dilation(&d, &theta, &bim, &h, 1e-9).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(rep.isometry_defect < 1e-10 && d.is_minimal());

        let x = m2.matrix_unit(0, 0, 0).block(0).clone();
        let lift = commutant_lift(&d, &theta, &x).unwrap();
        assert!(lift.identity_residual <= 1e-8 && lift.commutator_residual <= 1e-8);
        let one = commutant_lift(&d, &theta, &CMat::identity(2, 2)).unwrap();
        assert!(max_abs(&(one.rho - CMat::identity(d.k_dim, d.k_dim))) < 1e-9);
    }

    #[test]
    fn representation_dilates_to_itself() {
        let (a, bim, h) = scalar_setup(2, 2);
        let theta = BlockLinearMap::identity(&a);
        let d = stinespring_module(&theta, &bim, &h).unwrap();
        assert_eq!((d.h_hat_dim, d.k_dim), (2, 2));
        let rep = verify_dilation(&d, &theta, &bim, &h, 1e-10).unwrap();
        assert!(rep.passed && rep.isometry_defect < 1e-10);
    }

    #[test]
    fn corner_compression_and_zero_map() {
        let (a, bim, h) = scalar_setup(2, 2);
        let q = a.matrix_unit(0, 0, 0);
        let theta = BlockLinearMap::from_fn(&a, &a, |x| Ok(&q * x * &q)).unwrap();
        let d = stinespring_module(&theta, &bim, &h).unwrap();
        let rep = verify_dilation(&d, &theta, &bim, &h, 1e-9).unwrap();
        assert!(rep.passed, "{rep:?}");

        let zero = BlockLinearMap::zero(&a, &a);
        let d = stinespring_module(&zero, &bim, &h).unwrap();
        assert_eq!(d.k_dim, 0);
        assert!(verify_dilation(&d, &zero, &bim, &h, 1e-12).unwrap().passed);
    }

    #[test]
    fn padding_is_removed() {
        let (a, bim, h) = scalar_setup(2, 2);
        let theta = BlockLinearMap::identity(&a);
        let d = stinespring_module(&theta, &bim, &h).unwrap();
        let padded = pad_dilation(&d).unwrap();
        assert!(!padded.is_minimal());
        assert!(matches!(
            commutant_lift(&padded, &theta, &CMat::identity(2, 2)),
            Err(Error::NotMinimal { .. })
        ));
        let m = minimize_dilation(&padded).unwrap();
        assert_eq!(m.k_dim, d.k_dim);
        assert!(verify_dilation(&m, &theta, &bim, &h, 1e-10).unwrap().passed);
    }

    #[test]
    fn random_bimodule_dilations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = MultiMatrixAlgebra::new(&[2, 1]).unwrap();
        let fa = MultiMatrixAlgebra::abelian(2).unwrap();
        let fb = MultiMatrixAlgebra::abelian(1).unwrap();
        let left = CentralAction::from_characters(&fa, &a, vec![Some(0), Some(1)]).unwrap();
        let right = CentralAction::trivial(&a);
        let bim = BimoduleStructure::new(left, right).unwrap();
        let mut done = 0;
        while done < 5 {
            let h = BimoduleHilbert::random(&fb, &fa, 4, &mut rng).unwrap();
            let theta = match random_cp_bimodule_map(&bim, &h, 2, true, &mut rng) {
                Ok(t) => t,
                Err(_) => continue,
            };
            let d = stinespring_module(&theta, &bim, &h).unwrap();
            let rep = verify_dilation(&d, &theta, &bim, &h, 1e-8).unwrap();
            assert!(rep.passed && rep.isometry_defect < 1e-10, "{rep:?}");
            assert!(rep.balancing_residual < 1e-9);
            done += 1;
        }
    }
}
