mod common;

use common::*;
use modcp::actions::{
    is_module_map, matricial_bound_check, random_central_action, BimoduleStructure, CentralAction,
};
use modcp::algebra::MultiMatrixAlgebra;
use modcp::constructions::{
    assemble_2x2, cp1_backward, cp1_lift, cp2_backward, cp2_forward, extend_to_unitization,
    random_cp_2x2, unitize, verify_2x2, ExtensionMode,
};
use modcp::cpcalc::{
    cb_norm, classify, compose, conditional_expectation, module_residual, random_cp_module_map,
    sampled_norm, BlockLinearMap,
};
use modcp::extension::{arveson_extend, random_arveson_instance, ExtensionKind};
use modcp::feasibility::{dykstra_solve, project_psd, ProblemBuilder, SolverOptions};
use modcp::linalg::{
    c, hs_inner, hs_norm, max_abs, psd_sqrt, random_gaussian, random_hermitian, CMat,
};
use proptest::prelude::*;
use rand::Rng;

fn algebra(seed: u64, max_ambient: usize) -> MultiMatrixAlgebra {
    MultiMatrixAlgebra::random(max_ambient, &mut rng(seed)).unwrap()
}

/// Acting algebra, base algebra and a unital central action.
fn action(seed: u64, max_ambient: usize) -> CentralAction {
    let mut r = rng(seed);
    let fa = MultiMatrixAlgebra::abelian(r.random_range(1..=2)).unwrap();
    let a = MultiMatrixAlgebra::random(max_ambient, &mut r).unwrap();
    random_central_action(&fa, &a, true, &mut r).unwrap()
}

/// Second action of the same acting algebra whose characters are copied from `act`.
fn companion(act: &CentralAction, seed: u64) -> CentralAction {
    let mut r = rng(seed);
    let chars: Vec<Option<usize>> = (0..r.random_range(1..=2))
        .map(|_| act.characters()[r.random_range(0..act.characters().len())])
        .collect();
    let blocks: Vec<usize> = chars.iter().map(|_| r.random_range(1..=2)).collect();
    let b = MultiMatrixAlgebra::new(&blocks).unwrap();
    CentralAction::from_characters(act.source(), &b, chars).unwrap()
}

fn ccp_module_map(act_a: &CentralAction, act_b: &CentralAction, seed: u64) -> BlockLinearMap {
    let theta = random_cp_module_map(act_a, act_b, 2, seed).unwrap();
    let n = theta.unit_image().op_norm();
    if n > 0.0 {
        theta.scale(c(0.9 / n))
    } else {
        theta
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn c_star_identity_and_submultiplicativity(seed in any::<u64>()) {
        let a = algebra(seed, 6);
        let mut r = rng(seed ^ 1);
        let (x, y) = (a.random_element(&mut r), a.random_element(&mut r));
        let nx = x.op_norm();
        prop_assert!(((&x.adjoint() * &x).op_norm() - nx * nx).abs() <= 1e-12 * nx * nx);
        prop_assert!((&x * &y).op_norm() <= nx * y.op_norm() + 1e-12);
    }

    #[test]
    fn positive_elements_have_square_roots(seed in any::<u64>()) {
        let a = algebra(seed, 6);
        let p = a.random_positive(&mut rng(seed));
        prop_assert!(p.is_positive(1e-10));
        let s = p.sqrt();
        prop_assert!((&s.adjoint() * &s - &p).max_abs() <= 1e-10 * p.op_norm().max(1.0));
    }

    #[test]
    fn center_commutes_and_amplification_is_multiplicative(seed in any::<u64>()) {
        let a = algebra(seed, 6);
        let mut r = rng(seed ^ 2);
        let x = a.random_element(&mut r);
        for z in a.center_basis() {
            prop_assert!((&z * &x - &x * &z).max_abs() <= 1e-12);
        }
        let n = r.random_range(1..=2);
        let big = a.amplify(n);
        let (u, v) = (big.random_element(&mut r), big.random_element(&mut r));
        let (mu, mv) = (u.to_ambient(), v.to_ambient());
        prop_assert!(max_abs(&((&u * &v).to_ambient() - &mu * &mv)) <= 1e-12 * (1.0 + max_abs(&mu) * max_abs(&mv)));
        prop_assert!(max_abs(&(u.adjoint().to_ambient() - mu.adjoint())) == 0.0);
    }

    #[test]
    fn validated_actions_are_compatible(seed in any::<u64>()) {
        let act = action(seed, 12);
        prop_assert!(act.compatibility_residuals().max() <= 1e-12);
        let mut r = rng(seed ^ 3);
        let a = act.target();
        let (x, y) = (a.random_element(&mut r), a.random_element(&mut r));
        let alpha = act.source().random_element(&mut r);
        let lhs = &act.act(&alpha, &x).unwrap() * &y;
        prop_assert!((lhs - act.act(&alpha, &(&x * &y)).unwrap()).max_abs() <= 1e-12 * (1.0 + x.max_abs() * y.max_abs()));
    }

    #[test]
    fn module_maps_compose(seed in any::<u64>()) {
        let act_a = action(seed, 4);
        let act_b = companion(&act_a, seed ^ 4);
        let act_c = companion(&act_b, seed ^ 5);
        let (f, g) = match (random_cp_module_map(&act_a, &act_b, 2, seed), random_cp_module_map(&act_b, &act_c, 2, seed ^ 6)) {
            (Ok(f), Ok(g)) => (f, g),
            _ => return Ok(()),
        };
        prop_assert!(is_module_map(&compose(&g, &f).unwrap(), &act_a, &act_c, 1e-9).unwrap());
    }

    #[test]
    fn choi_psd_agrees_with_classification(seed in any::<u64>(), cp in any::<bool>()) {
        let a = algebra(seed, 4);
        let b = algebra(seed ^ 7, 4);
        let mut r = rng(seed ^ 8);
        let theta = if cp {
            let ks: Vec<CMat> = (0..2).map(|_| random_gaussian(&mut r, a.ambient_dim(), b.ambient_dim())).collect();
            kraus_map(&a, &b, &ks)
        } else {
            let n = a.ambient_dim() * b.ambient_dim();
            let mut h = random_hermitian(&mut r, n);
            let shift = min_eig(&h) - 0.5;
            for i in 0..n {
                h[(i, i)] -= c(shift);
            }
            // flip the sign of one direction so the Choi matrix is indefinite
            let v = random_gaussian(&mut r, n, 1);
            let v = &v / c(hs_norm(&v));
            h -= &v * v.adjoint() * c(2.0 * (max_eig_of(&h) + 1.0));
            match BlockLinearMap::from_choi(&h, &a, &b) {
                Ok(t) => t,
                Err(_) => return Ok(()),
            }
        };
        let class = classify(&theta, None, 1e-9);
        prop_assert_eq!(class.cp, naive_min_choi(&theta) >= -1e-9);
        if cp {
            prop_assert!(class.cp);
        }
    }

    #[test]
    fn hs_adjoint_pairs_inner_products(seed in any::<u64>()) {
        let a = algebra(seed, 5);
        let b = algebra(seed ^ 9, 5);
        let mut r = rng(seed ^ 10);
        let theta = BlockLinearMap::new(&a, &b, random_gaussian(&mut r, b.dim(), a.dim())).unwrap();
        let adj = theta.hs_adjoint();
        let (x, y) = (a.random_element(&mut r), b.random_element(&mut r));
        let lhs = hs_inner(&theta.eval(&x).to_ambient(), &y.to_ambient());
        let rhs = hs_inner(&x.to_ambient(), &adj.eval(&y).to_ambient());
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm()));
    }

    #[test]
    fn project_psd_is_idempotent_and_nonexpansive(seed in any::<u64>(), n in 1usize..6) {
        let mut r = rng(seed);
        let (x, y) = (random_hermitian(&mut r, n), random_hermitian(&mut r, n));
        let (px, py) = (project_psd(&x), project_psd(&y));
        prop_assert!(max_abs(&(project_psd(&px) - &px)) <= 1e-12);
        prop_assert!(hs_norm(&(&px - &py)) <= hs_norm(&(&x - &y)) + 1e-12);
    }
}

fn max_eig_of(h: &CMat) -> f64 {
    *spectrum(h).last().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn conditional_expectations_are_idempotent_bimodule_maps(seed in any::<u64>()) {
        let a = algebra(seed, 5);
        let mut r = rng(seed ^ 11);
        // the diagonal of each block together with the center
        let mut sub: Vec<_> = a.center_basis();
        for (k, &d) in a.blocks().iter().enumerate() {
            for i in 0..d {
                sub.push(a.matrix_unit(k, i, i));
            }
        }
        let e = conditional_expectation(&a, &sub).unwrap();
        prop_assert!(compose(&e, &e).unwrap().distance(&e) <= 1e-12);
        prop_assert!(naive_min_choi(&e) >= -1e-10);
        let b1 = e.eval(&a.random_element(&mut r));
        let b2 = e.eval(&a.random_element(&mut r));
        let x = a.random_element(&mut r);
        let lhs = e.eval(&(&(&b1 * &x) * &b2));
        prop_assert!((lhs - &(&b1 * &e.eval(&x)) * &b2).max_abs() <= 1e-10);
    }

    #[test]
    fn strictly_feasible_problems_are_solved(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut b = ProblemBuilder::new();
        let dims: Vec<usize> = (0..r.random_range(1..=2)).map(|_| r.random_range(1..=3)).collect();
        let mut x0 = Vec::new();
        for &d in &dims {
            let blk = b.add_block(d, true);
            let g = random_gaussian(&mut r, d, d);
            let p = &g * g.adjoint() + CMat::identity(d, d) * c(0.5);
            for i in 0..d {
                b.add_complex(&[(blk, i, i, c(1.0))], p[(i, i)]);
            }
            x0.push(p);
        }
        let rep = dykstra_solve(&b.build(SolverOptions { max_iters: 50_000, ..SolverOptions::default() }), None).unwrap();
        prop_assert!(rep.is_feasible(), "{rep:?}");
        let again = {
            let mut b = ProblemBuilder::new();
            for (&d, p) in dims.iter().zip(&x0) {
                let blk = b.add_block(d, true);
                for i in 0..d {
                    b.add_complex(&[(blk, i, i, c(1.0))], p[(i, i)]);
                }
            }
            dykstra_solve(&b.build(SolverOptions { max_iters: 50_000, ..SolverOptions::default() }), None).unwrap()
        };
        prop_assert_eq!(rep.iters, again.iters);
        prop_assert_eq!(rep.gap, again.gap);
    }

    #[test]
    fn unitization_extension_is_unital_cp_module(seed in any::<u64>()) {
        let act_a = action(seed, 4);
        let act_b = companion(&act_a, seed ^ 12);
        let theta = ccp_module_map(&act_a, &act_b, seed ^ 13);
        let t = extend_to_unitization(&theta, &act_a, &act_b, ExtensionMode::UnitalTarget).unwrap();
        let u = unitize(&act_a).unwrap();
        prop_assert!(t.unital_defect() <= 1e-12);
        prop_assert!(naive_min_choi(&t) >= -1e-9);
        prop_assert!(module_residual(&t, u.action_tilde(), &act_b).unwrap() <= 1e-9);
        for e in theta.source().basis() {
            prop_assert!((t.eval(&u.iota_a(&e).unwrap()) - theta.eval(&e)).max_abs() <= 1e-12);
        }
    }

    #[test]
    fn cp_correspondences_round_trip_and_preserve_cp(seed in any::<u64>(), n in 1usize..3) {
        let act = action(seed, 3);
        let fa = act.source().clone();
        let a = act.target().clone();
        let mut r = rng(seed ^ 14);
        let mn = MultiMatrixAlgebra::full(n).unwrap();
        let ks: Vec<CMat> = (0..2).map(|_| random_gaussian(&mut r, n, a.ambient_dim())).collect();
        let theta = kraus_map(&mn, &a, &ks);
        let sigma = cp1_lift(&theta, &act).unwrap();
        prop_assert!(cp1_backward(&sigma, &fa, n).unwrap().distance(&theta) <= 1e-12);
        prop_assert!(naive_min_choi(&sigma) >= -1e-9);

        let act_t = CentralAction::on_itself(&fa).unwrap().amplify(n);
        if let Ok(phi) = random_cp_module_map(&act, &act_t, 2, seed ^ 15) {
            let hat = cp2_forward(&phi, &fa, n).unwrap();
            prop_assert!(cp2_backward(&hat, &a, n).unwrap().distance(&phi) <= 1e-12);
            prop_assert!(naive_min_choi(&hat) >= -1e-9);
        }
    }

}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn stinespring_assemblies_pass_two_by_two(seed in any::<u64>()) {
        let act = action(seed, 2);
        let a = act.target().clone();
        let bim = BimoduleStructure::new(act.clone(), act.clone()).unwrap();
        let mut r = rng(seed ^ 16);
        let parts = match random_cp_2x2(&bim, &bim, 2, &mut r) {
            Ok(p) => p,
            Err(_) => return Ok(()),
        };
        let big = assemble_2x2([&parts[0], &parts[1], &parts[2], &parts[3]]).unwrap();
        prop_assert!(big.source().ambient_dim() == 2 * a.ambient_dim());
        let rep = verify_2x2(&big, Some((&bim, &bim)), 1e-8, 5, seed).unwrap();
        prop_assert!(rep.all_passed(), "{rep:?}");
    }

    #[test]
    fn cb_norm_bounds(seed in any::<u64>()) {
        let a = algebra(seed, 2);
        let mut r = rng(seed ^ 17);
        let f = BlockLinearMap::new(&a, &a, random_gaussian(&mut r, a.dim(), a.dim())).unwrap();
        let g = BlockLinearMap::new(&a, &a, random_gaussian(&mut r, a.dim(), a.dim())).unwrap();
        let (cf, cg) = (cb_norm(&f, 1e-4).unwrap(), cb_norm(&g, 1e-4).unwrap());
        prop_assert!(cb_norm(&compose(&g, &f).unwrap(), 1e-4).unwrap() <= cf * cg + 1e-6 + 2e-4 * cf * cg);
        prop_assert!(cf >= sampled_norm(&f, 100, &mut r) - 1e-9);
        prop_assert!(cf >= ascent_lower_bound(&f, 2, seed) - 1e-9);
    }

    #[test]
    fn matricial_bound_holds_at_cb_norm(seed in any::<u64>()) {
        let act_a = action(seed, 3);
        let act_b = companion(&act_a, seed ^ 18);
        let bim_a = BimoduleStructure::new(act_a.clone(), act_a.clone()).unwrap();
        let bim_b = BimoduleStructure::new(act_b.clone(), act_b.clone()).unwrap();
        let (f, g) = match (random_cp_module_map(&act_a, &act_b, 2, seed), random_cp_module_map(&act_a, &act_b, 1, seed ^ 19)) {
            (Ok(f), Ok(g)) => (f, g),
            _ => return Ok(()),
        };
        let theta = f.try_sub(&g).unwrap();
        let k = cb_norm(&theta, 1e-4).unwrap();
        let rep = matricial_bound_check(&theta, &bim_a, &bim_b, k, 10, 2, seed, 1e-7).unwrap();
        prop_assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn restrictions_extend(seed in any::<u64>()) {
        let inst = random_arveson_instance(&mut rng(seed)).unwrap();
        let ext = arveson_extend(&inst.psi, ExtensionKind::Ccp, SolverOptions::default()).unwrap();
        prop_assert!(ext.agreement_residual <= 1e-7);
        prop_assert!(ext.module_residual <= 1e-7);
        prop_assert!(naive_min_choi(&ext.map) >= -1e-7);
    }
}

#[test]
fn square_root_helper_matches_library() {
    let mut r = rng(20);
    let g = random_gaussian(&mut r, 3, 3);
    let p = &g * g.adjoint();
    let s = psd_sqrt(&p);
    assert!(max_abs(&(&s * &s - &p)) < 1e-10);
    assert!(min_eig(&s) >= -1e-12);
}
