//! Feasibility of an affine subspace intersected with a product of PSD cones.
//!
//! Variables are Hermitian blocks stored in real coordinates: the diagonal,
//! followed by `√2·Re` and `√2·Im` of each strict upper-triangular entry in
//! row-major order. With this scaling the Euclidean norm of the coordinate
//! vector equals the Hilbert–Schmidt norm of the block, so projections in
//! coordinates are Hilbert–Schmidt projections.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{CMat, HermitianEigen, C64};

/// Default stopping tolerance on both residuals.
pub const DEFAULT_TOL: f64 = 1e-7;
/// Default iteration budget.
pub const DEFAULT_MAX_ITERS: usize = 50_000;

/// Tolerance and budget shared by every solver-backed operation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

impl SolverOptions {
    /// Defaults, with the iteration budget taken from `MODCP_MAX_ITERS` when set.
    pub fn from_env() -> Self {
        let mut o = Self::default();
        if let Some(n) = std::env::var("MODCP_MAX_ITERS")
            .ok()
            .and_then(|s| s.trim().parse().ok())
        {
            o.max_iters = n;
        }
        o
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// `Σ coeff · x[coord] = rhs` over the real coordinates of all blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraint {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Clone, Debug)]
pub struct FeasibilityProblem {
    pub block_dims: Vec<usize>,
    pub psd: Vec<bool>,
    pub constraints: Vec<LinearConstraint>,
    pub tol: f64,
    pub max_iters: usize,
}

/// Number of real coordinates of a `d × d` Hermitian block.
pub fn real_dim(d: usize) -> usize {
    d * d
}

/// Position of the `(i, j)` pair (`i < j`) among strict upper entries.
fn pair_index(d: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < d);
    i * (2 * d - i - 1) / 2 + (j - i - 1)
}

pub fn hermitian_to_real(m: &CMat) -> Vec<f64> {
    let d = m.nrows();
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i] = m[(i, i)].re;
    }
    for i in 0..d {
        for j in i + 1..d {
            let z = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            let k = d + 2 * pair_index(d, i, j);
            v[k] = SQRT_2 * z.re;
            v[k + 1] = SQRT_2 * z.im;
        }
    }
    v
}

pub fn real_to_hermitian(v: &[f64], d: usize) -> CMat {
    let mut m = CMat::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = C64::new(v[i], 0.0);
    }
    for i in 0..d {
        for j in i + 1..d {
            let k = d + 2 * pair_index(d, i, j);
            let z = C64::new(v[k], v[k + 1]) / SQRT_2;
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

/// Incremental construction of a [`FeasibilityProblem`].
#[derive(Clone, Debug, Default)]
pub struct ProblemBuilder {
    dims: Vec<usize>,
    psd: Vec<bool>,
    offsets: Vec<usize>,
    total: usize,
    constraints: Vec<LinearConstraint>,
}

impl ProblemBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a `d × d` Hermitian block and returns its index.
    pub fn add_block(&mut self, d: usize, psd: bool) -> usize {
        self.dims.push(d);
        self.psd.push(psd);
        self.offsets.push(self.total);
        self.total += real_dim(d);
        self.dims.len() - 1
    }

    pub fn block_dim(&self, b: usize) -> usize {
        self.dims[b]
    }

    /// Real and imaginary parts of entry `(i, j)` of block `b` as real functionals.
    pub fn entry(&self, b: usize, i: usize, j: usize) -> (Vec<(usize, f64)>, Vec<(usize, f64)>) {
        let d = self.dims[b];
        let o = self.offsets[b];
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => (vec![(o + i, 1.0)], vec![]),
            std::cmp::Ordering::Less => {
                let k = o + d + 2 * pair_index(d, i, j);
                (vec![(k, 1.0 / SQRT_2)], vec![(k + 1, 1.0 / SQRT_2)])
            }
            std::cmp::Ordering::Greater => {
                let k = o + d + 2 * pair_index(d, j, i);
                (vec![(k, 1.0 / SQRT_2)], vec![(k + 1, -1.0 / SQRT_2)])
            }
        }
    }

    pub fn add_real(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        self.constraints.push(LinearConstraint { terms, rhs });
    }

    /// `Σ coeff · X_b[i, j] = rhs` as two real constraints.
    pub fn add_complex(&mut self, terms: &[(usize, usize, usize, C64)], rhs: C64) {
        let mut re = Vec::new();
        let mut im = Vec::new();
        for &(b, i, j, c) in terms {
            let (xr, xi) = self.entry(b, i, j);
            for &(k, w) in &xr {
                re.push((k, c.re * w));
                im.push((k, c.im * w));
            }
            for &(k, w) in &xi {
                re.push((k, -c.im * w));
                im.push((k, c.re * w));
            }
        }
        self.add_real(re, rhs.re);
        self.add_real(im, rhs.im);
    }

    /// Pins entry `(i, j)` of block `b`.
    pub fn pin_entry(&mut self, b: usize, i: usize, j: usize, value: C64) {
        self.add_complex(&[(b, i, j, C64::new(1.0, 0.0))], value);
    }

    pub fn build(self, opts: SolverOptions) -> FeasibilityProblem {
        FeasibilityProblem {
            block_dims: self.dims,
            psd: self.psd,
            constraints: self.constraints,
            tol: opts.tol,
            max_iters: opts.max_iters,
        }
    }
}

impl FeasibilityProblem {
    pub fn num_coords(&self) -> usize {
        self.block_dims.iter().map(|&d| real_dim(d)).sum()
    }

    fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.block_dims
            .iter()
            .map(|&d| {
                let o = acc;
                acc += real_dim(d);
                o
            })
            .collect()
    }

    pub fn blocks_to_vec(&self, blocks: &[CMat]) -> Result<Vec<f64>> {
        if blocks.len() != self.block_dims.len() {
            return Err(Error::SizeMismatch(format!(
                "{} start blocks for {} variables",
                blocks.len(),
                self.block_dims.len()
            )));
        }
        let mut v = Vec::with_capacity(self.num_coords());
        for (b, &d) in blocks.iter().zip(&self.block_dims) {
            if b.shape() != (d, d) {
                return Err(Error::SizeMismatch(format!(
                    "start block {:?}, expected {d}x{d}",
                    b.shape()
                )));
            }
            v.extend(hermitian_to_real(b));
        }
        Ok(v)
    }

    pub fn vec_to_blocks(&self, v: &[f64]) -> Vec<CMat> {
        self.offsets()
            .iter()
            .zip(&self.block_dims)
            .map(|(&o, &d)| real_to_hermitian(&v[o..o + real_dim(d)], d))
            .collect()
    }

    /// Largest absolute constraint violation at `x`.
    pub fn affine_residual(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| (c.terms.iter().map(|&(k, w)| w * x[k]).sum::<f64>() - c.rhs).abs())
            .fold(0.0, f64::max)
    }
}

/// Nearest PSD matrix in Hilbert–Schmidt norm.
pub fn project_psd(x: &CMat) -> CMat {
    HermitianEigen::new(x).map(|l| l.max(0.0))
}

/// One connected group of coupled constraints, stored as the orthogonal
/// projector data `x ← x − Q Qᵀ (x − x0)` on its coordinates.
#[derive(Clone, Debug)]
struct Component {
    coords: Vec<usize>,
    q: DMatrix<f64>,
    x0: DVector<f64>,
}

/// Precomputed projection onto `{x : A x = b}`.
#[derive(Clone, Debug)]
pub struct AffineProjector {
    pins: Vec<(usize, f64)>,
    components: Vec<Component>,
}

const CONSISTENCY_TOL: f64 = 1e-8;

impl AffineProjector {
    pub fn new(constraints: &[LinearConstraint], n: usize) -> Result<Self> {
        // Terms at roundoff level relative to the whole system are dropped.
        let scale = constraints
            .iter()
            .flat_map(|c| c.terms.iter().map(|t| t.1.abs()))
            .fold(0.0, f64::max);
        let negligible = 1e-13 * scale;
        let mut rows: Vec<(BTreeMap<usize, f64>, f64)> = constraints
            .iter()
            .map(|c| {
                let mut m = BTreeMap::new();
                for &(k, w) in &c.terms {
                    assert!(k < n, "constraint coordinate {k} out of range");
                    *m.entry(k).or_insert(0.0) += w;
                }
                m.retain(|_, w| w.abs() > negligible);
                (m, c.rhs)
            })
            .collect();

        // Resolve single-term rows into pins until nothing changes.
        let mut pins: HashMap<usize, f64> = HashMap::new();
        loop {
            let mut changed = false;
            let mut kept = Vec::with_capacity(rows.len());
            for (mut terms, mut rhs) in rows {
                let fixed: Vec<usize> = terms
                    .keys()
                    .filter(|k| pins.contains_key(k))
                    .copied()
                    .collect();
                for k in fixed {
                    rhs -= terms.remove(&k).unwrap() * pins[&k];
                }
                match terms.len() {
                    0 => {
                        if rhs.abs() > CONSISTENCY_TOL {
                            return Err(Error::InconsistentConstraints(rhs.abs()));
                        }
                    }
                    1 => {
                        let (&k, &w) = terms.iter().next().unwrap();
                        let v = rhs / w;
                        if let Some(&old) = pins.get(&k) {
                            if (old - v).abs() > CONSISTENCY_TOL {
                                return Err(Error::InconsistentConstraints((old - v).abs()));
                            }
                        } else {
                            pins.insert(k, v);
                        }
                        changed = true;
                    }
                    _ => kept.push((terms, rhs)),
                }
            }
            rows = kept;
            if !changed {
                break;
            }
        }

        // Union-find over coordinates shared between rows.
        let mut parent: HashMap<usize, usize> = HashMap::new();
        fn find(p: &mut HashMap<usize, usize>, x: usize) -> usize {
            let mut r = x;
            while let Some(&q) = p.get(&r) {
                if q == r {
                    break;
                }
                r = q;
            }
            let mut c = x;
            while c != r {
                let next = p[&c];
                p.insert(c, r);
                c = next;
            }
            r
        }
        for (terms, _) in &rows {
            let keys: Vec<usize> = terms.keys().copied().collect();
            for &k in &keys {
                parent.entry(k).or_insert(k);
            }
            for w in keys.windows(2) {
                let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
                if a != b {
                    parent.insert(a, b);
                }
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, (terms, _)) in rows.iter().enumerate() {
            let root = find(&mut parent, *terms.keys().next().unwrap());
            groups.entry(root).or_default().push(i);
        }

        let mut components = Vec::with_capacity(groups.len());
        for row_ids in groups.values() {
            let mut coords: Vec<usize> = row_ids
                .iter()
                .flat_map(|&r| rows[r].0.keys().copied())
                .collect();
            coords.sort_unstable();
            coords.dedup();
            let local: HashMap<usize, usize> =
                coords.iter().enumerate().map(|(i, &k)| (k, i)).collect();
            let mut a = DMatrix::<f64>::zeros(row_ids.len(), coords.len());
            let mut b = DVector::<f64>::zeros(row_ids.len());
            for (r, &rid) in row_ids.iter().enumerate() {
                for (&k, &w) in &rows[rid].0 {
                    a[(r, local[&k])] = w;
                }
                b[r] = rows[rid].1;
            }
            components.push(Self::factor(coords, &a, &b)?);
        }
        let mut pins: Vec<(usize, f64)> = pins.into_iter().collect();
        pins.sort_by_key(|p| p.0);
        Ok(Self { pins, components })
    }

    fn factor(coords: Vec<usize>, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Component> {
        // Orthonormal row-space basis from whichever Gram matrix is smaller.
        let (m, n) = a.shape();
        let small = if n <= m {
            a.transpose() * a
        } else {
            a * a.transpose()
        };
        let eig = nalgebra::SymmetricEigen::new(small);
        let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let thr = 1e-12 * top.max(f64::MIN_POSITIVE);
        let keep: Vec<usize> = (0..eig.eigenvalues.len())
            .filter(|&i| eig.eigenvalues[i] > thr)
            .collect();
        let mut q = DMatrix::<f64>::zeros(n, keep.len());
        for (j, &i) in keep.iter().enumerate() {
            if n <= m {
                q.set_column(j, &eig.eigenvectors.column(i));
            } else {
                let col = a.transpose() * eig.eigenvectors.column(i) / eig.eigenvalues[i].sqrt();
                q.set_column(j, &col);
            }
        }
        // x0 = Q (A Q)⁺ b, solved in the small row-space basis.
        let aq = a * &q;
        let gram = aq.transpose() * &aq;
        let rhs = aq.transpose() * b;
        let coef = gram
            .clone()
            .cholesky()
            .map(|c| c.solve(&rhs))
            .unwrap_or_else(|| {
                gram.pseudo_inverse(1e-14)
                    .map(|p| p * &rhs)
                    .unwrap_or(rhs.clone())
            });
        let x0 = &q * coef;
        let resid = (a * &x0 - b).amax();
        if resid > CONSISTENCY_TOL * b.amax().max(1.0) {
            return Err(Error::InconsistentConstraints(resid));
        }
        Ok(Component { coords, q, x0 })
    }

    pub fn project(&self, x: &mut [f64]) {
        for &(k, v) in &self.pins {
            x[k] = v;
        }
        for c in &self.components {
            let d = DVector::from_iterator(
                c.coords.len(),
                c.coords.iter().zip(c.x0.iter()).map(|(&k, &z)| x[k] - z),
            );
            let corr = &c.q * (c.q.transpose() * d);
            for (i, &k) in c.coords.iter().enumerate() {
                x[k] -= corr[i];
            }
        }
    }
}

/// Projects a block point onto the affine set of `p`.
pub fn project_affine(p: &FeasibilityProblem, blocks: &[CMat]) -> Result<Vec<CMat>> {
    let proj = AffineProjector::new(&p.constraints, p.num_coords())?;
    let mut x = p.blocks_to_vec(blocks)?;
    proj.project(&mut x);
    Ok(p.vec_to_blocks(&x))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Feasible,
    Stalled,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    #[serde(skip)]
    pub point: Vec<CMat>,
    pub affine_residual: f64,
    /// Most negative eigenvalue over the PSD blocks (0 when all are PSD).
    pub psd_residual: f64,
    pub iters: usize,
    /// Distance between the last affine and PSD iterates.
    pub gap: f64,
}

impl SolveReport {
    pub fn is_feasible(&self) -> bool {
        self.status == SolveStatus::Feasible
    }
}

/// Dykstra alternating projections between the affine set and the PSD cones.
///
/// The affine projection needs no correction term, so only the PSD step keeps
/// one. Feasibility is certified on the affine iterate `y`: every PSD block of
/// `y` is within `‖y − x‖_F` of the cone, which bounds its negative spectrum.
pub fn dykstra_solve(p: &FeasibilityProblem, start: Option<&[CMat]>) -> Result<SolveReport> {
    let n = p.num_coords();
    let proj = AffineProjector::new(&p.constraints, n)?;
    let offsets = p.offsets();
    let mut x = match start {
        Some(s) => p.blocks_to_vec(s)?,
        None => vec![0.0; n],
    };
    let mut q = vec![0.0; n];
    let mut y = x.clone();
    let mut iters = 0;
    let mut gap = f64::INFINITY;
    let mut status = SolveStatus::Stalled;
    let mut window_gap = f64::INFINITY;
    const WINDOW: usize = 1000;

    while iters < p.max_iters {
        iters += 1;
        y.copy_from_slice(&x);
        proj.project(&mut y);
        let mut block_gap: f64 = 0.0;
        let mut total_gap = 0.0;
        let mut step = 0.0;
        for (b, (&o, &d)) in offsets.iter().zip(&p.block_dims).enumerate() {
            let r = o..o + real_dim(d);
            if !p.psd[b] {
                x[r.clone()].copy_from_slice(&y[r]);
                continue;
            }
            let z: Vec<f64> = y[r.clone()]
                .iter()
                .zip(&q[r.clone()])
                .map(|(a, b)| a + b)
                .collect();
            let xp = hermitian_to_real(&project_psd(&real_to_hermitian(&z, d)));
            let mut g = 0.0;
            for (k, i) in r.enumerate() {
                step += (xp[k] - x[i]).powi(2);
                g += (y[i] - xp[k]).powi(2);
                q[i] = z[k] - xp[k];
                x[i] = xp[k];
            }
            block_gap = block_gap.max(g.sqrt());
            total_gap += g;
        }
        gap = total_gap.sqrt();
        if block_gap <= p.tol {
            status = SolveStatus::Feasible;
            break;
        }
        if step.sqrt() < 1e-14 {
            break;
        }
        if iters % WINDOW == 0 {
            if iters >= 5 * WINDOW && gap > 0.99 * window_gap && gap > 10.0 * p.tol {
                break;
            }
            window_gap = gap;
        }
    }

    let point = p.vec_to_blocks(&y);
    let psd_residual = point
        .iter()
        .zip(&p.psd)
        .filter(|(_, &is)| is)
        .map(|(m, _)| HermitianEigen::new(m).min())
        .fold(0.0, f64::min);
    let affine_residual = p.affine_residual(&y);
    if status == SolveStatus::Feasible && (psd_residual < -p.tol || affine_residual > p.tol) {
        status = SolveStatus::Stalled;
    }
    Ok(SolveReport {
        status,
        point,
        affine_residual,
        psd_residual,
        iters,
        gap,
    })
}

/// Smallest `t` in `[lo, hi]` (within `tol`) at which the family is feasible.
///
/// Each feasible solve is followed by `refine`, which may turn the solved point
/// into a smaller certified value; pass `|t, _| t` when no certificate exists.
pub fn bisection_min<F, R>(
    mut make_problem: F,
    mut refine: R,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<(f64, Option<SolveReport>)>
where
    F: FnMut(f64) -> FeasibilityProblem,
    R: FnMut(f64, &SolveReport) -> f64,
{
    let (mut lo, mut hi) = (lo, hi);
    let top = dykstra_solve(&make_problem(hi), None)?;
    if !top.is_feasible() {
        return Err(Error::UpperBoundInfeasible);
    }
    hi = refine(hi, &top).min(hi);
    let mut best = top;
    let mut warm = best.point.clone();
    let mut guard = 0;
    while hi - lo > tol && guard < 200 {
        guard += 1;
        let mid = 0.5 * (lo + hi);
        let rep = dykstra_solve(&make_problem(mid), Some(&warm))?;
        if rep.is_feasible() {
            hi = refine(mid, &rep).min(mid);
            warm = rep.point.clone();
            best = rep;
        } else {
            lo = mid;
        }
    }
    Ok((hi, Some(best)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, max_abs, random_hermitian};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_by_two(off: f64) -> FeasibilityProblem {
        let mut b = ProblemBuilder::new();
        let x = b.add_block(2, true);
        b.add_complex(&[(x, 0, 0, c(1.0)), (x, 1, 1, c(1.0))], c(1.0));
        b.pin_entry(x, 0, 1, c(off));
        b.build(SolverOptions::default())
    }

    #[test]
    fn coordinates_round_trip_and_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_hermitian(&mut rng, 5);
        let v = hermitian_to_real(&h);
        assert!(max_abs(&(real_to_hermitian(&v, 5) - &h)) < 1e-14);
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - crate::linalg::hs_norm(&h)).abs() < 1e-12);
    }

    #[test]
    fn psd_projection_examples() {
        let d = CMat::from_diagonal(&DVector::from_vec(vec![c(1.0), c(-1.0)]));
        let p = project_psd(&d);
        assert!(
            max_abs(&(p - CMat::from_diagonal(&DVector::from_vec(vec![c(1.0), c(0.0)])))) < 1e-14
        );
        assert!(max_abs(&project_psd(&(-CMat::identity(3, 3)))) < 1e-14);
        let i = CMat::identity(2, 2);
        assert!(max_abs(&(project_psd(&i) - &i)) < 1e-14);
    }

    #[test]
    fn affine_projection_of_trace() {
        let mut b = ProblemBuilder::new();
        let x = b.add_block(2, false);
        b.add_complex(&[(x, 0, 0, c(1.0)), (x, 1, 1, c(1.0))], c(1.0));
        let p = b.build(SolverOptions::default());
        let out = project_affine(&p, &[CMat::zeros(2, 2)]).unwrap();
        assert!(max_abs(&(&out[0] - CMat::identity(2, 2) * c(0.5))) < 1e-14);
    }

    #[test]
    fn inconsistent_trace_constraints() {
        let mut b = ProblemBuilder::new();
        let x = b.add_block(2, false);
        b.add_complex(&[(x, 0, 0, c(1.0)), (x, 1, 1, c(1.0))], c(0.0));
        b.add_complex(&[(x, 0, 0, c(1.0)), (x, 1, 1, c(1.0))], c(1.0));
        let p = b.build(SolverOptions::default());
        assert!(matches!(
            project_affine(&p, &[CMat::zeros(2, 2)]),
            Err(Error::InconsistentConstraints(_))
        ));
    }

    #[test]
    fn closed_form_two_by_two_instances() {
        let ok = dykstra_solve(&two_by_two(0.4), None).unwrap();
        assert!(ok.is_feasible());
        assert!(ok.affine_residual <= 1e-7 && ok.psd_residual >= -1e-7);
        let bad = dykstra_solve(&two_by_two(0.6), None).unwrap();
        assert_eq!(bad.status, SolveStatus::Stalled);
        assert!(bad.gap > 1e-6);
    }

    #[test]
    fn unconstrained_cone_projects_start() {
        let mut b = ProblemBuilder::new();
        b.add_block(2, true);
        let p = b.build(SolverOptions::default());
        let start = vec![CMat::from_diagonal(&DVector::from_vec(vec![
            c(2.0),
            c(-1.0),
        ]))];
        let rep = dykstra_solve(&p, Some(&start)).unwrap();
        assert!(rep.is_feasible());
    }

    #[test]
    fn bisection_on_diagonal_bound() {
        // X = diag(1, 2) and X ⪯ t·I through a PSD slack S = tI − X.
        let make = |t: f64| {
            let mut b = ProblemBuilder::new();
            let s = b.add_block(2, true);
            b.pin_entry(s, 0, 0, c(t - 1.0));
            b.pin_entry(s, 1, 1, c(t - 2.0));
            b.pin_entry(s, 0, 1, c(0.0));
            b.build(SolverOptions::default())
        };
        let (t, _) = bisection_min(make, |t, _| t, 0.0, 10.0, 1e-6).unwrap();
        assert!((t - 2.0).abs() < 1e-6);
    }
}
