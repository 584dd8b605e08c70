//! Linear maps between multi-matrix algebras and their Choi calculus.
//!
//! A map is stored as its matrix on matrix-unit coordinates. The Choi matrix
//! of the ambient extension `θ ∘ E_source` is block diagonal over pairs of
//! (source block, target block), so only those sector blocks are kept.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::actions::{CentralAction, IndexLabels};
use crate::algebra::{AlgebraElement, MultiMatrixAlgebra};
use crate::error::{Error, Result};
use crate::feasibility::{dykstra_solve, FeasibilityProblem, ProblemBuilder, SolverOptions};
use crate::linalg::{self, c, max_abs, psd_sqrt, CMat, HermitianEigen, C64, ONE, ZERO};

#[derive(Clone, Debug)]
pub struct BlockLinearMap {
    source: MultiMatrixAlgebra,
    target: MultiMatrixAlgebra,
    superop: CMat,
    /// Sector `(s, t)` at index `s * target.num_blocks() + t`.
    sectors: Vec<CMat>,
}

impl PartialEq for BlockLinearMap {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source && self.target == other.target && self.superop == other.superop
    }
}

fn build_sectors(source: &MultiMatrixAlgebra, target: &MultiMatrixAlgebra, s: &CMat) -> Vec<CMat> {
    let so = source.coord_offsets();
    let to = target.coord_offsets();
    let mut out = Vec::with_capacity(source.num_blocks() * target.num_blocks());
    for (sb, &ds) in source.blocks().iter().enumerate() {
        for (tb, &dt) in target.blocks().iter().enumerate() {
            let m = ds * dt;
            let mut sec = CMat::zeros(m, m);
            for i in 0..ds {
                for j in 0..ds {
                    let col = so[sb] + i * ds + j;
                    for p in 0..dt {
                        for q in 0..dt {
                            sec[(i * dt + p, j * dt + q)] = s[(to[tb] + p * dt + q, col)];
                        }
                    }
                }
            }
            out.push(sec);
        }
    }
    out
}

impl BlockLinearMap {
    pub fn new(
        source: &MultiMatrixAlgebra,
        target: &MultiMatrixAlgebra,
        superop: CMat,
    ) -> Result<Self> {
        if superop.shape() != (target.dim(), source.dim()) {
            return Err(Error::ShapeMismatch(format!(
                "superop {:?} for {source} -> {target} needs {}x{}",
                superop.shape(),
                target.dim(),
                source.dim()
            )));
        }
        let sectors = build_sectors(source, target, &superop);
        Ok(Self {
            source: source.clone(),
            target: target.clone(),
            superop,
            sectors,
        })
    }

    pub fn zero(source: &MultiMatrixAlgebra, target: &MultiMatrixAlgebra) -> Self {
        Self::new(source, target, CMat::zeros(target.dim(), source.dim())).unwrap()
    }

    pub fn identity(a: &MultiMatrixAlgebra) -> Self {
        Self::new(a, a, CMat::identity(a.dim(), a.dim())).unwrap()
    }

    /// Blockwise transpose.
    pub fn transpose(a: &MultiMatrixAlgebra) -> Self {
        let n = a.dim();
        let mut s = CMat::zeros(n, n);
        for idx in 0..n {
            let (k, i, j) = a.coord_position(idx);
            let d = a.blocks()[k];
            s[(a.coord_offsets()[k] + j * d + i, idx)] = ONE;
        }
        Self::new(a, a, s).unwrap()
    }

    /// The map agreeing with `f` on the matrix-unit basis.
    pub fn from_fn(
        source: &MultiMatrixAlgebra,
        target: &MultiMatrixAlgebra,
        f: impl Fn(&AlgebraElement) -> Result<AlgebraElement>,
    ) -> Result<Self> {
        let mut s = CMat::zeros(target.dim(), source.dim());
        for (idx, e) in source.basis().iter().enumerate() {
            let y = f(e)?;
            target.check_same(y.algebra())?;
            s.set_column(idx, &y.coords());
        }
        Self::new(source, target, s)
    }

    /// `x ↦ E_target(Σ v* x v)` for ambient Kraus operators `v` of shape `N_source × N_target`.
    pub fn from_kraus(
        source: &MultiMatrixAlgebra,
        target: &MultiMatrixAlgebra,
        kraus: &[CMat],
    ) -> Result<Self> {
        let (ns, nt) = (source.ambient_dim(), target.ambient_dim());
        for v in kraus {
            if v.shape() != (ns, nt) {
                return Err(Error::ShapeMismatch(format!(
                    "Kraus operator {:?}, expected {ns}x{nt}",
                    v.shape()
                )));
            }
        }
        let mut s = CMat::zeros(target.dim(), source.dim());
        let tao = target.ambient_offsets();
        let tco = target.coord_offsets();
        for col in 0..source.dim() {
            let (ai, aj) = source.coord_to_ambient(col);
            for (t, &dt) in target.blocks().iter().enumerate() {
                for p in 0..dt {
                    for q in 0..dt {
                        let z: C64 = kraus
                            .iter()
                            .map(|v| v[(ai, tao[t] + p)].conj() * v[(aj, tao[t] + q)])
                            .sum();
                        s[(tco[t] + p * dt + q, col)] = z;
                    }
                }
            }
        }
        Self::new(source, target, s)
    }

    /// Inverse of [`BlockLinearMap::choi`]; entries outside the sectors are ignored.
    pub fn from_choi(
        choi: &CMat,
        source: &MultiMatrixAlgebra,
        target: &MultiMatrixAlgebra,
    ) -> Result<Self> {
        let (ns, nt) = (source.ambient_dim(), target.ambient_dim());
        if choi.shape() != (ns * nt, ns * nt) {
            let n = ns * nt;
            return Err(Error::SizeMismatch(format!(
                "Choi matrix {:?}, expected {n}x{n}",
                choi.shape()
            )));
        }
        let sao = source.ambient_offsets();
        let tao = target.ambient_offsets();
        let mut sectors = Vec::new();
        for (sb, &ds) in source.blocks().iter().enumerate() {
            for (tb, &dt) in target.blocks().iter().enumerate() {
                sectors.push(CMat::from_fn(ds * dt, ds * dt, |r, col| {
                    let (i, p) = (r / dt, r % dt);
                    let (j, q) = (col / dt, col % dt);
                    choi[(
                        (sao[sb] + i) * nt + tao[tb] + p,
                        (sao[sb] + j) * nt + tao[tb] + q,
                    )]
                }));
            }
        }
        Self::from_sectors(source, target, sectors)
    }

    /// Builds the map from its Choi sector blocks (ordered as [`BlockLinearMap::sector`]).
    pub fn from_sectors(
        source: &MultiMatrixAlgebra,
        target: &MultiMatrixAlgebra,
        sectors: Vec<CMat>,
    ) -> Result<Self> {
        let nb = target.num_blocks();
        if sectors.len() != source.num_blocks() * nb {
            return Err(Error::SizeMismatch(format!(
                "{} Choi sectors",
                sectors.len()
            )));
        }
        let so = source.coord_offsets();
        let to = target.coord_offsets();
        let mut s = CMat::zeros(target.dim(), source.dim());
        for (sb, &ds) in source.blocks().iter().enumerate() {
            for (tb, &dt) in target.blocks().iter().enumerate() {
                let sec = &sectors[sb * nb + tb];
                if sec.shape() != (ds * dt, ds * dt) {
                    return Err(Error::SizeMismatch(format!(
                        "Choi sector ({sb},{tb}) has shape {:?}",
                        sec.shape()
                    )));
                }
                for i in 0..ds {
                    for j in 0..ds {
                        for p in 0..dt {
                            for q in 0..dt {
                                s[(to[tb] + p * dt + q, so[sb] + i * ds + j)] =
                                    sec[(i * dt + p, j * dt + q)];
                            }
                        }
                    }
                }
            }
        }
        Ok(Self {
            source: source.clone(),
            target: target.clone(),
            superop: s,
            sectors,
        })
    }

    pub fn source(&self) -> &MultiMatrixAlgebra {
        &self.source
    }

    pub fn target(&self) -> &MultiMatrixAlgebra {
        &self.target
    }

    pub fn superop(&self) -> &CMat {
        &self.superop
    }

    /// Choi block on source block `s` and target block `t`, indexed `(i, p)` ↦ `i * d_t + p`.
    pub fn sector(&self, s: usize, t: usize) -> &CMat {
        &self.sectors[s * self.target.num_blocks() + t]
    }

    pub fn sectors(&self) -> &[CMat] {
        &self.sectors
    }

    /// Ambient Choi matrix `C[(I,P),(J,Q)] = θ(E_IJ)_PQ` with row `I * N_target + P`.
    pub fn choi(&self) -> CMat {
        let (ns, nt) = (self.source.ambient_dim(), self.target.ambient_dim());
        let sao = self.source.ambient_offsets();
        let tao = self.target.ambient_offsets();
        let mut out = CMat::zeros(ns * nt, ns * nt);
        for (sb, &ds) in self.source.blocks().iter().enumerate() {
            for (tb, &dt) in self.target.blocks().iter().enumerate() {
                let sec = self.sector(sb, tb);
                for r in 0..ds * dt {
                    for col in 0..ds * dt {
                        let (i, p) = (r / dt, r % dt);
                        let (j, q) = (col / dt, col % dt);
                        out[(
                            (sao[sb] + i) * nt + tao[tb] + p,
                            (sao[sb] + j) * nt + tao[tb] + q,
                        )] = sec[(r, col)];
                    }
                }
            }
        }
        out
    }

    pub fn apply(&self, a: &AlgebraElement) -> Result<AlgebraElement> {
        self.source.check_same(a.algebra())?;
        Ok(AlgebraElement::from_coords(
            &self.target,
            &(&self.superop * a.coords()),
        ))
    }

    /// [`BlockLinearMap::apply`] for inputs known to lie in the source.
    pub fn eval(&self, a: &AlgebraElement) -> AlgebraElement {
        self.apply(a).expect("input outside the source algebra")
    }

    pub fn unit_image(&self) -> AlgebraElement {
        self.eval(&self.source.unit())
    }

    pub fn hermitian_defect(&self) -> f64 {
        self.sectors
            .iter()
            .map(linalg::hermitian_defect)
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian_preserving(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    /// Smallest eigenvalue of the Hermitian part of the Choi matrix.
    pub fn choi_min_eigenvalue(&self) -> f64 {
        self.sectors
            .iter()
            .map(|s| HermitianEigen::new(s).min())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_cp(&self, tol: f64) -> bool {
        self.is_hermitian_preserving(tol) && self.choi_min_eigenvalue() >= -tol
    }

    pub fn unital_defect(&self) -> f64 {
        (self.unit_image() - self.target.unit()).max_abs()
    }

    pub fn is_unital(&self, tol: f64) -> bool {
        self.unital_defect() <= tol
    }

    pub fn scale(&self, z: C64) -> Self {
        Self::new(&self.source, &self.target, &self.superop * z).unwrap()
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Self::new(&self.source, &self.target, &self.superop + &other.superop)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Self::new(&self.source, &self.target, &self.superop - &other.superop)
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.source != other.source || self.target != other.target {
            return Err(Error::ShapeMismatch(format!(
                "{} -> {} vs {} -> {}",
                self.source, self.target, other.source, other.target
            )));
        }
        Ok(())
    }

    /// Largest entry of the difference of the coordinate matrices.
    pub fn distance(&self, other: &Self) -> f64 {
        if self.check_same_shape(other).is_err() {
            return f64::INFINITY;
        }
        max_abs(&(&self.superop - &other.superop))
    }

    /// Adjoint for the trace inner products.
    pub fn hs_adjoint(&self) -> Self {
        Self::new(&self.target, &self.source, self.superop.adjoint()).unwrap()
    }

    /// `θ ⊗ id_n` between `M_n(source)` and `M_n(target)`.
    pub fn amplify(&self, n: usize) -> Self {
        let (sa, ta) = (self.source.amplify(n), self.target.amplify(n));
        let mut s = CMat::zeros(ta.dim(), sa.dim());
        let so = self.source.coord_offsets();
        let (sao, tao) = (sa.coord_offsets(), ta.coord_offsets());
        for (k, &dk) in self.source.blocks().iter().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    for p in 0..dk {
                        for q in 0..dk {
                            let src = so[k] + p * dk + q;
                            let col = sao[k] + (i * dk + p) * (n * dk) + (j * dk + q);
                            for (t, &dt) in self.target.blocks().iter().enumerate() {
                                let to = self.target.coord_offsets()[t];
                                for a in 0..dt {
                                    for b in 0..dt {
                                        let z = self.superop[(to + a * dt + b, src)];
                                        if z != ZERO {
                                            s[(
                                                tao[t] + (i * dt + a) * (n * dt) + (j * dt + b),
                                                col,
                                            )] = z;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Self::new(&sa, &ta, s).unwrap()
    }

    /// Largest Choi entry that breaks the module pattern given by the labels.
    pub fn label_residual(&self, source: &IndexLabels, target: &IndexLabels) -> f64 {
        let sao = self.source.ambient_offsets();
        let tao = self.target.ambient_offsets();
        let mut worst: f64 = 0.0;
        for (sb, &ds) in self.source.blocks().iter().enumerate() {
            for (tb, &dt) in self.target.blocks().iter().enumerate() {
                let sec = self.sector(sb, tb);
                for r in 0..ds * dt {
                    let (i, p) = (sao[sb] + r / dt, tao[tb] + r % dt);
                    for col in 0..ds * dt {
                        let (j, q) = (sao[sb] + col / dt, tao[tb] + col % dt);
                        if source.left[i] != target.left[p] || source.right[j] != target.right[q] {
                            worst = worst.max(sec[(r, col)].norm());
                        }
                    }
                }
            }
        }
        worst
    }
}

/// `ψ ∘ φ`.
pub fn compose(psi: &BlockLinearMap, phi: &BlockLinearMap) -> Result<BlockLinearMap> {
    if phi.target != psi.source {
        return Err(Error::ShapeMismatch(format!(
            "cannot compose {} -> {} after {} -> {}",
            psi.source, psi.target, phi.source, phi.target
        )));
    }
    BlockLinearMap::new(&phi.source, &psi.target, &psi.superop * &phi.superop)
}

pub fn amplify_map(theta: &BlockLinearMap, n: usize) -> BlockLinearMap {
    theta.amplify(n)
}

#[derive(Clone, Debug, Serialize)]
pub struct MapClass {
    pub hermitian_preserving: bool,
    /// Positivity checked on `positive_trials` sampled positive inputs only.
    pub positive: bool,
    pub positive_trials: usize,
    pub cp: bool,
    pub unital: bool,
    pub contractive: bool,
    pub module: Option<bool>,
    pub min_choi_eigenvalue: f64,
    pub unit_image_norm: f64,
    pub module_residual: Option<f64>,
}

impl MapClass {
    pub fn ucp(&self) -> bool {
        self.cp && self.unital
    }

    pub fn ccp(&self) -> bool {
        self.cp && self.contractive
    }
}

const POSITIVE_TRIALS: usize = 64;

/// Sampled positivity: rank-one and full-rank positive inputs.
pub fn sampled_positive(theta: &BlockLinearMap, trials: usize, tol: f64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let src = theta.source();
    (0..trials).all(|t| {
        let x = if t % 2 == 0 {
            src.random_positive(&mut rng)
        } else {
            let k = rng.random_range(0..src.num_blocks());
            let d = src.blocks()[k];
            let v = linalg::random_gaussian(&mut rng, d, 1);
            let mut x = src.zero();
            *x.block_mut(k) = &v * v.adjoint();
            x
        };
        let y = theta.eval(&x);
        let scale = x.op_norm().max(1.0);
        y.hermitian_defect() <= tol * scale && y.min_eigenvalue() >= -tol * scale
    })
}

pub fn classify(
    theta: &BlockLinearMap,
    actions: Option<(&CentralAction, &CentralAction)>,
    tol: f64,
) -> MapClass {
    let hermitian_preserving = theta.is_hermitian_preserving(tol);
    let min_choi_eigenvalue = theta.choi_min_eigenvalue();
    let cp = hermitian_preserving && min_choi_eigenvalue >= -tol;
    let positive = cp || (hermitian_preserving && sampled_positive(theta, POSITIVE_TRIALS, tol));
    let unit = theta.unit_image();
    let unital = (&unit - theta.target().unit()).max_abs() <= tol;
    let contractive = if cp {
        (theta.target().unit() - &unit).is_positive(tol)
    } else {
        cb_norm(theta, 1e-4)
            .map(|v| v <= 1.0 + tol.max(1e-4))
            .unwrap_or(false)
    };
    let module_residual = actions.and_then(|(a, b)| module_residual(theta, a, b).ok());
    MapClass {
        hermitian_preserving,
        positive,
        positive_trials: POSITIVE_TRIALS,
        cp,
        unital,
        contractive,
        module: module_residual.map(|r| r <= tol),
        min_choi_eigenvalue,
        unit_image_norm: unit.op_norm(),
        module_residual,
    }
}

/// `max ‖θ(ρ_A(α) a) − ρ_B(α) θ(a)‖` over basis elements.
pub fn module_residual(
    theta: &BlockLinearMap,
    act_a: &CentralAction,
    act_b: &CentralAction,
) -> Result<f64> {
    if act_a.source() != act_b.source() {
        return Err(Error::SourceMismatch);
    }
    act_a.target().check_same(theta.source())?;
    act_b.target().check_same(theta.target())?;
    let images: Vec<AlgebraElement> = theta
        .source()
        .basis()
        .iter()
        .map(|a| theta.eval(a))
        .collect();
    let mut worst: f64 = 0.0;
    for alpha in act_a.source().basis() {
        let ra = act_a.rho(&alpha);
        let rb = act_b.rho(&alpha);
        for (a, ta) in theta.source().basis().iter().zip(&images) {
            let lhs = theta.eval(&(&ra * a));
            worst = worst.max((lhs - &rb * ta).max_abs());
        }
    }
    Ok(worst)
}

/// Basis of `{a : θ(a*a) = θ(a)*θ(a), θ(aa*) = θ(a)θ(a)*}` for a u.c.p. map.
pub fn multiplicative_domain(theta: &BlockLinearMap, tol: f64) -> Result<Vec<AlgebraElement>> {
    if !theta.is_cp(tol) {
        return Err(Error::NotUCP(format!(
            "min Choi eigenvalue {:.3e}",
            theta.choi_min_eigenvalue()
        )));
    }
    if !theta.is_unital(tol) {
        return Err(Error::NotUCP(format!(
            "unit defect {:.3e}",
            theta.unital_defect()
        )));
    }
    let src = theta.source();
    let n = src.dim();
    let s = theta.superop();
    let gram = s.adjoint() * s;
    let tr_row: Vec<C64> = (0..theta.target().dim())
        .map(|idx| {
            let (_, i, j) = theta.target().coord_position(idx);
            if i == j {
                ONE
            } else {
                ZERO
            }
        })
        .collect();
    let trace_of = |col: usize| -> C64 { (0..tr_row.len()).map(|r| tr_row[r] * s[(r, col)]).sum() };
    let co = src.coord_offsets();
    let mut form = CMat::zeros(n, n);
    for x in 0..n {
        let (k, a, b) = src.coord_position(x);
        let d = src.blocks()[k];
        for y in 0..n {
            let (l, cc, dd) = src.coord_position(y);
            let mut z = -gram[(x, y)] - gram[(x, y)];
            if k == l && a == cc {
                z += trace_of(co[k] + b * d + dd);
            }
            // transpose of the form for tr D(a*): entry (y, x) of N
            if k == l && b == dd {
                z += trace_of(co[k] + cc * d + a);
            }
            form[(x, y)] = z;
        }
    }
    // The second term above adds N[y, x] with N[i, j] = tr θ(e_i e_j*) − ⟨θ(e_j), θ(e_i)⟩,
    // whose Gram part is gram[x, y], already subtracted.
    let e = HermitianEigen::new(&form);
    let top = e.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let thr = (1e-10 * top).max(1e-12);
    let ker = e.kernel(thr);
    Ok((0..ker.ncols())
        .map(|j| AlgebraElement::from_coords(src, &ker.column(j).into_owned()))
        .collect())
}

/// Hilbert–Schmidt projection onto the unital *-subalgebra spanned by `sub_basis`.
pub fn conditional_expectation(
    a: &MultiMatrixAlgebra,
    sub_basis: &[AlgebraElement],
) -> Result<BlockLinearMap> {
    if sub_basis.is_empty() {
        return Err(Error::NotSubalgebra("empty basis".into()));
    }
    for b in sub_basis {
        a.check_same(b.algebra())?;
    }
    let mut v = CMat::zeros(a.dim(), sub_basis.len());
    for (j, b) in sub_basis.iter().enumerate() {
        v.set_column(j, &b.coords());
    }
    let q = linalg::orthonormal_span(&v, 1e-10);
    let proj = &q * q.adjoint();
    let outside = |x: &AlgebraElement| -> f64 {
        let cx = x.coords();
        let r = &cx - &proj * &cx;
        r.iter().fold(0.0f64, |m, z| m.max(z.norm())) / x.max_abs().max(1.0)
    };
    const TOL: f64 = 1e-8;
    let r = outside(&a.unit());
    if r > TOL {
        return Err(Error::NotSubalgebra(format!(
            "unit outside span (residual {r:.3e})"
        )));
    }
    let elems: Vec<AlgebraElement> = (0..q.ncols())
        .map(|j| AlgebraElement::from_coords(a, &q.column(j).into_owned()))
        .collect();
    for x in &elems {
        let r = outside(&x.adjoint());
        if r > TOL {
            return Err(Error::NotSubalgebra(format!(
                "not closed under adjoint (residual {r:.3e})"
            )));
        }
        for y in &elems {
            let r = outside(&(x * y));
            if r > TOL {
                return Err(Error::NotSubalgebra(format!(
                    "not closed under products (residual {r:.3e})"
                )));
            }
        }
    }
    BlockLinearMap::new(a, a, proj)
}

/// CP map with Kraus operators sampled in the intertwiner space of the labels.
pub fn random_cp_labeled_map<R: Rng + ?Sized>(
    source: &MultiMatrixAlgebra,
    target: &MultiMatrixAlgebra,
    src_labels: &IndexLabels,
    tgt_labels: &IndexLabels,
    rank: usize,
    rng: &mut R,
) -> Result<BlockLinearMap> {
    let (ns, nt) = (source.ambient_dim(), target.ambient_dim());
    let allowed = |i: usize, p: usize| {
        src_labels.left[i] == tgt_labels.left[p] && src_labels.right[i] == tgt_labels.right[p]
    };
    if rank > 0 && !(0..ns).any(|i| (0..nt).any(|p| allowed(i, p))) {
        return Err(Error::EmptyIntertwinerSpace);
    }
    let kraus: Vec<CMat> = (0..rank)
        .map(|_| {
            let mut v = linalg::random_gaussian(rng, ns, nt);
            for i in 0..ns {
                for p in 0..nt {
                    if !allowed(i, p) {
                        v[(i, p)] = ZERO;
                    }
                }
            }
            v
        })
        .collect();
    BlockLinearMap::from_kraus(source, target, &kraus)
}

/// Random CP module map between the targets of two actions of the same algebra.
pub fn random_cp_module_map(
    act_a: &CentralAction,
    act_b: &CentralAction,
    rank: usize,
    seed: u64,
) -> Result<BlockLinearMap> {
    if act_a.source() != act_b.source() {
        return Err(Error::SourceMismatch);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_cp_labeled_map(
        act_a.target(),
        act_b.target(),
        &IndexLabels::from_action(act_a),
        &IndexLabels::from_action(act_b),
        rank,
        &mut rng,
    )
}

struct CbSector {
    l: usize,
    dl: usize,
    dk: usize,
    j: CMat,
}

/// Choi blocks of the adjoint map, `J[(p,i),(q,j)] = conj C[(i,p),(j,q)]`.
fn cb_sectors(theta: &BlockLinearMap) -> Vec<CbSector> {
    let scale = theta.sectors().iter().map(max_abs).fold(0.0, f64::max);
    let mut out = Vec::new();
    for (k, &dk) in theta.source().blocks().iter().enumerate() {
        for (l, &dl) in theta.target().blocks().iter().enumerate() {
            let c = theta.sector(k, l);
            if max_abs(c) <= 1e-15 * scale {
                continue;
            }
            let j = CMat::from_fn(dl * dk, dl * dk, |r, col| {
                let (p, i) = (r / dk, r % dk);
                let (q, jj) = (col / dk, col % dk);
                c[(i * dl + p, jj * dl + q)].conj()
            });
            out.push(CbSector { l, dl, dk, j });
        }
    }
    out
}

fn trace_out(y: &CMat, dl: usize, dk: usize) -> CMat {
    CMat::from_fn(dl, dl, |p, q| {
        (0..dk).map(|i| y[(p * dk + i, q * dk + i)]).sum()
    })
}

/// Feasible value `√(‖ΣTr Y₀‖ ‖ΣTr Y₁‖)` after shifting each sector block into the cone.
fn cb_certificate(sectors: &[CbSector], nl: usize, blocks: &[CMat]) -> f64 {
    let mut t0: Vec<Option<CMat>> = vec![None; nl];
    let mut t1: Vec<Option<CMat>> = vec![None; nl];
    for (s, z) in sectors.iter().zip(blocks) {
        let m = s.dl * s.dk;
        let mu = (-HermitianEigen::new(z).min()).max(0.0);
        let shift = linalg::identity(s.dl) * c(mu * s.dk as f64);
        let a = trace_out(&z.view((0, 0), (m, m)).into_owned(), s.dl, s.dk) + &shift;
        let b = trace_out(&z.view((m, m), (m, m)).into_owned(), s.dl, s.dk) + &shift;
        t0[s.l] = Some(t0[s.l].take().map_or(a.clone(), |x| x + &a));
        t1[s.l] = Some(t1[s.l].take().map_or(b.clone(), |x| x + &b));
    }
    let top = |v: &[Option<CMat>]| {
        v.iter()
            .flatten()
            .map(|m| HermitianEigen::new(m).max())
            .fold(0.0, f64::max)
    };
    (top(&t0) * top(&t1)).max(0.0).sqrt()
}

fn cb_problem(
    sectors: &[CbSector],
    target: &MultiMatrixAlgebra,
    t: f64,
    opts: SolverOptions,
) -> FeasibilityProblem {
    let mut b = ProblemBuilder::new();
    let zs: Vec<usize> = sectors
        .iter()
        .map(|s| b.add_block(2 * s.dl * s.dk, true))
        .collect();
    for (s, &z) in sectors.iter().zip(&zs) {
        let m = s.dl * s.dk;
        for a in 0..m {
            for bb in 0..m {
                b.pin_entry(z, a, m + bb, -s.j[(a, bb)]);
            }
        }
    }
    for (l, &dl) in target.blocks().iter().enumerate() {
        let members: Vec<(usize, &CbSector)> = sectors
            .iter()
            .zip(&zs)
            .filter(|(s, _)| s.l == l)
            .map(|(s, &z)| (z, s))
            .collect();
        if members.is_empty() {
            continue;
        }
        for side in 0..2 {
            let slack = b.add_block(dl, true);
            for p in 0..dl {
                for q in p..dl {
                    let mut terms = vec![(slack, p, q, ONE)];
                    for &(z, s) in &members {
                        let off = side * s.dl * s.dk;
                        for i in 0..s.dk {
                            terms.push((z, off + p * s.dk + i, off + q * s.dk + i, ONE));
                        }
                    }
                    b.add_complex(&terms, if p == q { c(t) } else { ZERO });
                }
            }
        }
    }
    b.build(opts)
}

/// Analytic feasible point with `Y₀ = |J*|`, `Y₁ = |J|` and its value.
fn cb_analytic_start(sectors: &[CbSector], target: &MultiMatrixAlgebra) -> (Vec<CMat>, f64) {
    let zs: Vec<CMat> = sectors
        .iter()
        .map(|s| {
            let m = s.dl * s.dk;
            let mut z = CMat::zeros(2 * m, 2 * m);
            z.view_mut((0, 0), (m, m))
                .copy_from(&psd_sqrt(&(&s.j * s.j.adjoint())));
            z.view_mut((m, m), (m, m))
                .copy_from(&psd_sqrt(&(s.j.adjoint() * &s.j)));
            z.view_mut((0, m), (m, m)).copy_from(&(-&s.j));
            z.view_mut((m, 0), (m, m)).copy_from(&(-s.j.adjoint()));
            z
        })
        .collect();
    let value = cb_certificate(sectors, target.num_blocks(), &zs);
    (zs, value)
}

/// Start point for the problem at `t` built from sector blocks, with slacks `tI − ΣTr Y`.
fn cb_full_start(
    sectors: &[CbSector],
    target: &MultiMatrixAlgebra,
    zs: &[CMat],
    t: f64,
) -> Vec<CMat> {
    let mut out: Vec<CMat> = zs.to_vec();
    for (l, &dl) in target.blocks().iter().enumerate() {
        let members: Vec<(&CbSector, &CMat)> =
            sectors.iter().zip(zs).filter(|(s, _)| s.l == l).collect();
        if members.is_empty() {
            continue;
        }
        for side in 0..2 {
            let mut acc = linalg::identity(dl) * c(t);
            for (s, z) in &members {
                let m = s.dl * s.dk;
                acc -= trace_out(
                    &z.view((side * m, side * m), (m, m)).into_owned(),
                    s.dl,
                    s.dk,
                );
            }
            out.push(acc);
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct CbNormReport {
    /// Certified upper bound.
    pub value: f64,
    pub lower: f64,
    pub solves: usize,
}

/// Completely bounded norm within `tol`, using the default solver options.
pub fn cb_norm(theta: &BlockLinearMap, tol: f64) -> Result<f64> {
    cb_norm_with(theta, tol, SolverOptions::from_env()).map(|r| r.value)
}

pub fn cb_norm_with(theta: &BlockLinearMap, tol: f64, opts: SolverOptions) -> Result<CbNormReport> {
    let sectors = cb_sectors(theta);
    if sectors.is_empty() {
        return Ok(CbNormReport {
            value: 0.0,
            lower: 0.0,
            solves: 0,
        });
    }
    let target = theta.target();
    let mut lo = theta.unit_image().op_norm();
    for e in theta.source().basis() {
        lo = lo.max(theta.eval(&e).op_norm());
    }
    let (start, mut hi) = cb_analytic_start(&sectors, target);
    if hi - lo > tol {
        lo = lo.max(cb_norm_lower_bound(theta, 4, 0x0cb));
    }
    let mut warm = cb_full_start(&sectors, target, &start, hi);
    let nz = sectors.len();
    let mut inner = opts.with_tol(
        opts.tol
            .min(tol / (4.0 * theta.source().ambient_dim() as f64)),
    );
    let mut solves = 0;
    while hi - lo > tol {
        if solves >= 60 {
            return Err(Error::Stalled {
                iters: solves,
                gap: hi - lo,
            });
        }
        // The first solve sits at the ascent value; its certificate usually closes the bracket.
        let t = if solves == 0 { lo } else { 0.5 * (lo + hi) };
        solves += 1;
        let rep = dykstra_solve(&cb_problem(&sectors, target, t, inner), Some(&warm))?;
        let cert = cb_certificate(&sectors, target.num_blocks(), &rep.point[..nz]);
        hi = hi.min(cert);
        if rep.is_feasible() {
            warm = rep.point;
            if cert > t {
                inner.tol *= 0.1;
            }
        } else {
            lo = lo.max(t);
        }
    }
    Ok(CbNormReport {
        value: hi.max(lo),
        lower: lo,
        solves,
    })
}

/// A certified upper bound on `cb_norm(θ)` that is at most `t`, or `None` when the norm exceeds `t`.
///
/// Tries the analytic point and one solve at `t` before falling back to bisection.
pub fn cb_norm_at_most(theta: &BlockLinearMap, t: f64, opts: SolverOptions) -> Result<Option<f64>> {
    let sectors = cb_sectors(theta);
    if sectors.is_empty() {
        return Ok((t >= 0.0).then_some(0.0));
    }
    let target = theta.target();
    let (start, hi) = cb_analytic_start(&sectors, target);
    if hi <= t {
        return Ok(Some(hi));
    }
    let warm = cb_full_start(&sectors, target, &start, hi);
    let rep = dykstra_solve(&cb_problem(&sectors, target, t, opts), Some(&warm))?;
    let cert = cb_certificate(&sectors, target.num_blocks(), &rep.point[..sectors.len()]);
    if cert <= t {
        return Ok(Some(cert));
    }
    if cb_norm_lower_bound(theta, 4, 0x0cb) > t {
        return Ok(None);
    }
    let v = cb_norm_with(theta, 1e-4, opts)?.value;
    Ok((v <= t).then_some(v))
}

/// Largest singular value of `y` over its blocks, with the block and singular vectors.
fn top_singular(y: &AlgebraElement) -> (usize, f64, CMat, CMat) {
    let mut best = (0, -1.0, CMat::zeros(0, 0), CMat::zeros(0, 0));
    for (k, b) in y.blocks().iter().enumerate() {
        let e = HermitianEigen::new(&(b.adjoint() * b));
        let sig = e.max().max(0.0).sqrt();
        if sig > best.1 {
            let v = e.vectors.columns(0, 1).into_owned();
            let u = if sig > 0.0 {
                b * &v * c(1.0 / sig)
            } else {
                CMat::zeros(b.nrows(), 1)
            };
            best = (k, sig, u, v);
        }
    }
    best
}

/// Lower bound on the cb-norm: alternating ascent of `‖θ_n(x)‖` over
/// contractions `x`, with `n` the ambient size of the target.
pub fn cb_norm_lower_bound(theta: &BlockLinearMap, restarts: usize, seed: u64) -> f64 {
    let n = theta.target().ambient_dim();
    let amp = theta.amplify(n);
    let adj = amp.hs_adjoint();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for _ in 0..restarts {
        let mut x = amp.source().random_unitary(&mut rng);
        let mut prev = -1.0;
        for _ in 0..300 {
            let (k, sig, u, v) = top_singular(&amp.eval(&x));
            best = best.max(sig);
            if sig <= 0.0 || sig - prev <= 1e-13 * sig.max(1.0) {
                break;
            }
            prev = sig;
            let mut w = amp.target().zero();
            *w.block_mut(k) = &u * v.adjoint();
            x = adj.eval(&w).map_blocks(linalg::polar_part);
        }
    }
    best
}

/// Operator norm of `θ` over `samples` random unit-norm inputs (a lower bound).
pub fn sampled_norm<R: Rng + ?Sized>(theta: &BlockLinearMap, samples: usize, rng: &mut R) -> f64 {
    let mut best: f64 = 0.0;
    for _ in 0..samples {
        let x = theta.source().random_element(rng);
        let n = x.op_norm();
        if n > 0.0 {
            best = best.max(theta.eval(&x).op_norm() / n);
        }
    }
    best
}
