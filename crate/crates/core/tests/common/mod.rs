//! Reference computations that avoid the library's own Choi and eigen routines.
#![allow(dead_code)]

use modcp::algebra::{AlgebraElement, MultiMatrixAlgebra};
use modcp::cpcalc::BlockLinearMap;
use modcp::linalg::{c, random_unitary, CMat, C64};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Spectrum of a Hermitian matrix via the real embedding `[[Re, −Im], [Im, Re]]`.
///
/// Every eigenvalue appears twice in the embedding; one copy of each is returned, ascending.
pub fn spectrum(h: &CMat) -> Vec<f64> {
    let n = h.nrows();
    let real = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = h[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let sym = (&real + real.transpose()) * 0.5;
    let mut vals: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals.into_iter().step_by(2).collect()
}

pub fn min_eig(h: &CMat) -> f64 {
    spectrum(h)[0]
}

/// Eigenvalues of `[[a, b], [b̄, d]]`, ascending.
pub fn eig2(a: f64, b: C64, d: f64) -> [f64; 2] {
    let mid = 0.5 * (a + d);
    let r = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    [mid - r, mid + r]
}

/// `Σ E_ij ⊗ θ(e_ij)` over the matrix units of every source block, in ambient coordinates.
pub fn naive_choi(theta: &BlockLinearMap) -> CMat {
    let (src, tgt) = (theta.source(), theta.target());
    let (ns, nt) = (src.ambient_dim(), tgt.ambient_dim());
    let offsets = src.ambient_offsets();
    let mut out = CMat::zeros(ns * nt, ns * nt);
    for (k, &d) in src.blocks().iter().enumerate() {
        for i in 0..d {
            for j in 0..d {
                let img = theta.eval(&src.matrix_unit(k, i, j)).to_ambient();
                let (r, s) = (offsets[k] + i, offsets[k] + j);
                out.view_mut((r * nt, s * nt), (nt, nt)).copy_from(&img);
            }
        }
    }
    out
}

pub fn naive_min_choi(theta: &BlockLinearMap) -> f64 {
    min_eig(&naive_choi(theta))
}

/// Map `x ↦ Σ v* x v` with each `v` of shape `N_src × N_tgt`.
pub fn kraus_map(
    src: &MultiMatrixAlgebra,
    tgt: &MultiMatrixAlgebra,
    kraus: &[CMat],
) -> BlockLinearMap {
    BlockLinearMap::from_fn(src, tgt, |x| {
        let m = x.to_ambient();
        let y = kraus.iter().fold(
            CMat::zeros(tgt.ambient_dim(), tgt.ambient_dim()),
            |acc, v| acc + v.adjoint() * &m * v,
        );
        Ok(AlgebraElement::from_ambient(tgt, &y))
    })
    .unwrap()
}

/// `(θ ⊗ id_n)` applied to an ambient `n·N_src` square matrix, block by block.
fn amplified_apply(theta: &BlockLinearMap, x: &CMat, n: usize) -> CMat {
    let (ns, nt) = (theta.source().ambient_dim(), theta.target().ambient_dim());
    let mut out = CMat::zeros(n * nt, n * nt);
    for i in 0..n {
        for j in 0..n {
            let blk = x.view((i * ns, j * ns), (ns, ns)).into_owned();
            let y = theta
                .eval(&AlgebraElement::from_ambient(theta.source(), &blk))
                .to_ambient();
            out.view_mut((i * nt, j * nt), (nt, nt)).copy_from(&y);
        }
    }
    out
}

fn largest_singular_pair(y: &CMat) -> (f64, CMat, CMat) {
    let g = y.adjoint() * y;
    let e = g.clone().symmetric_eigen();
    let k = e.eigenvalues.imax();
    let sig = e.eigenvalues[k].max(0.0).sqrt();
    let v: CMat = e.eigenvectors.columns(k, 1).into_owned();
    let u = if sig > 0.0 {
        y * &v / c(sig)
    } else {
        v.clone()
    };
    (sig, u, v)
}

fn unitary_factor(m: &CMat) -> CMat {
    let svd = m.clone().svd(true, true);
    svd.u.unwrap() * svd.v_t.unwrap()
}

/// Lower bound on the cb-norm by projected ascent of `‖(θ ⊗ id_n)(x)‖` over unitaries `x`,
/// with `n` the source ambient size. Unitaries are extreme points of the unit ball, so the
/// supremum over them is the norm of the amplification.
pub fn ascent_lower_bound(theta: &BlockLinearMap, restarts: usize, seed: u64) -> f64 {
    let n = theta.source().ambient_dim();
    let adj = theta.hs_adjoint();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for _ in 0..restarts {
        let mut x = random_unitary(&mut rng, n * n);
        for _ in 0..200 {
            let (sig, u, v) = largest_singular_pair(&amplified_apply(theta, &x, n));
            best = best.max(sig);
            if sig == 0.0 {
                break;
            }
            // gradient of Re⟨u, Θ(x) v⟩ is Θ†(u v*)
            x = unitary_factor(&amplified_apply(&adj, &(&u * v.adjoint()), n));
        }
    }
    best
}

/// Ambient matrix with a single block `m` placed at block `k` of `a`.
pub fn ambient_block(a: &MultiMatrixAlgebra, k: usize, m: &CMat) -> AlgebraElement {
    let blocks = a
        .blocks()
        .iter()
        .enumerate()
        .map(|(i, &d)| if i == k { m.clone() } else { CMat::zeros(d, d) })
        .collect();
    AlgebraElement::from_blocks(a, blocks).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
