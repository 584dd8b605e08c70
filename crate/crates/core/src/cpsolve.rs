//! CP maps with a module pattern and prescribed linear data, posed as a PSD
//! feasibility problem on the Choi sectors.
//!
//! Only Choi entries allowed by the index labels are variables, so every
//! point of the problem is a module map; positivity of the blocks is complete
//! positivity.

use crate::actions::IndexLabels;
use crate::algebra::{AlgebraElement, MultiMatrixAlgebra};
use crate::cpcalc::BlockLinearMap;
use crate::error::Result;
use crate::feasibility::{dykstra_solve, ProblemBuilder, SolveReport, SolverOptions};
use crate::linalg::{CMat, C64, ONE, ZERO};

struct SectorVar {
    s: usize,
    t: usize,
    block: usize,
    /// `(i, p)` of each variable index.
    members: Vec<(usize, usize)>,
    /// Variable indices grouped by target row `p`.
    by_target: Vec<Vec<(usize, usize)>>,
}

pub struct CpMapProblem {
    source: MultiMatrixAlgebra,
    target: MultiMatrixAlgebra,
    builder: ProblemBuilder,
    vars: Vec<SectorVar>,
    extra_blocks: usize,
}

impl CpMapProblem {
    pub fn new(
        source: &MultiMatrixAlgebra,
        target: &MultiMatrixAlgebra,
        src_labels: &IndexLabels,
        tgt_labels: &IndexLabels,
    ) -> Self {
        let sao = source.ambient_offsets();
        let tao = target.ambient_offsets();
        let mut builder = ProblemBuilder::new();
        let mut vars = Vec::new();
        for (s, &ds) in source.blocks().iter().enumerate() {
            for (t, &dt) in target.blocks().iter().enumerate() {
                let mut members = Vec::new();
                let mut by_target = vec![Vec::new(); dt];
                for i in 0..ds {
                    for p in 0..dt {
                        let (ii, pp) = (sao[s] + i, tao[t] + p);
                        if src_labels.left[ii] == tgt_labels.left[pp]
                            && src_labels.right[ii] == tgt_labels.right[pp]
                        {
                            by_target[p].push((members.len(), i));
                            members.push((i, p));
                        }
                    }
                }
                if !members.is_empty() {
                    let block = builder.add_block(members.len(), true);
                    vars.push(SectorVar {
                        s,
                        t,
                        block,
                        members,
                        by_target,
                    });
                }
            }
        }
        Self {
            source: source.clone(),
            target: target.clone(),
            builder,
            vars,
            extra_blocks: 0,
        }
    }

    pub fn source(&self) -> &MultiMatrixAlgebra {
        &self.source
    }

    pub fn target(&self) -> &MultiMatrixAlgebra {
        &self.target
    }

    /// `φ(x)` at entry `(p, q)` of target block `t` as a linear functional.
    pub fn image_terms(
        &self,
        x: &AlgebraElement,
        t: usize,
        p: usize,
        q: usize,
    ) -> Vec<(usize, usize, usize, C64)> {
        let mut out = Vec::new();
        for v in self.vars.iter().filter(|v| v.t == t) {
            let xs = x.block(v.s);
            for &(a, i) in &v.by_target[p] {
                for &(b, j) in &v.by_target[q] {
                    let z = xs[(i, j)];
                    if z != ZERO {
                        out.push((v.block, a, b, z));
                    }
                }
            }
        }
        out
    }

    /// Requires `w φ(x) w = y`, with `w` Hermitian in the target (identity when `None`).
    pub fn constrain_image(
        &mut self,
        x: &AlgebraElement,
        w: Option<&AlgebraElement>,
        y: &AlgebraElement,
    ) {
        for (t, &dt) in self.target.blocks().iter().enumerate() {
            let raw: Vec<Vec<Vec<(usize, usize, usize, C64)>>> = (0..dt)
                .map(|p| (0..dt).map(|q| self.image_terms(x, t, p, q)).collect())
                .collect();
            for p in 0..dt {
                for q in 0..dt {
                    let terms = match w {
                        None => raw[p][q].clone(),
                        Some(w) => {
                            let wt: &CMat = w.block(t);
                            let mut acc = Vec::new();
                            for pp in 0..dt {
                                for qq in 0..dt {
                                    let coef = wt[(p, pp)] * wt[(qq, q)];
                                    if coef != ZERO {
                                        acc.extend(
                                            raw[pp][qq]
                                                .iter()
                                                .map(|&(b, i, j, z)| (b, i, j, z * coef)),
                                        );
                                    }
                                }
                            }
                            acc
                        }
                    };
                    self.builder.add_complex(&terms, y.block(t)[(p, q)]);
                }
            }
        }
    }

    /// Requires `φ(1) ≤ 1` through PSD slack blocks.
    pub fn constrain_contractive(&mut self) {
        let unit = self.source.unit();
        for (t, &dt) in self.target.blocks().iter().enumerate() {
            let slack = self.builder.add_block(dt, true);
            self.extra_blocks += 1;
            for p in 0..dt {
                for q in p..dt {
                    let mut terms = self.image_terms(&unit, t, p, q);
                    terms.push((slack, p, q, ONE));
                    self.builder
                        .add_complex(&terms, if p == q { ONE } else { ZERO });
                }
            }
        }
    }

    /// Choi sector blocks of a map, restricted to the variables.
    fn blocks_of(&self, map: &BlockLinearMap) -> Vec<CMat> {
        self.vars
            .iter()
            .map(|v| {
                let sec = map.sector(v.s, v.t);
                let dt = self.target.blocks()[v.t];
                let n = v.members.len();
                CMat::from_fn(n, n, |a, b| {
                    let (i, p) = v.members[a];
                    let (j, q) = v.members[b];
                    sec[(i * dt + p, j * dt + q)]
                })
            })
            .collect()
    }

    pub fn map_from_blocks(&self, blocks: &[CMat]) -> BlockLinearMap {
        let nb = self.target.num_blocks();
        let mut sectors: Vec<CMat> = Vec::with_capacity(self.source.num_blocks() * nb);
        for &ds in self.source.blocks() {
            for &dt in self.target.blocks() {
                sectors.push(CMat::zeros(ds * dt, ds * dt));
            }
        }
        for (v, x) in self.vars.iter().zip(blocks) {
            let dt = self.target.blocks()[v.t];
            let sec = &mut sectors[v.s * nb + v.t];
            for (a, &(i, p)) in v.members.iter().enumerate() {
                for (b, &(j, q)) in v.members.iter().enumerate() {
                    sec[(i * dt + p, j * dt + q)] = x[(a, b)];
                }
            }
        }
        BlockLinearMap::from_sectors(&self.source, &self.target, sectors)
            .expect("sector shapes are consistent")
    }

    /// Runs the solver; `start` seeds the Choi variables.
    pub fn solve(
        mut self,
        opts: SolverOptions,
        start: Option<&BlockLinearMap>,
    ) -> Result<(BlockLinearMap, SolveReport)> {
        let nvar = self.vars.len();
        let start_blocks = start.map(|m| {
            let mut b = self.blocks_of(m);
            b.extend(
                (nvar..nvar + self.extra_blocks)
                    .map(|k| CMat::zeros(self.builder.block_dim(k), self.builder.block_dim(k))),
            );
            b
        });
        let problem = std::mem::take(&mut self.builder).build(opts);
        let rep = dykstra_solve(&problem, start_blocks.as_deref())?;
        let map = self.map_from_blocks(&rep.point[..nvar]);
        Ok((map, rep))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn unital_cp_map_with_fixed_diagonal_images() {
        // ucp φ on M₂ with φ(e11) = e11 and φ(e22) = e22: the dephasing channel is the projection of 0.
        let a = MultiMatrixAlgebra::full(2).unwrap();
        let lab = IndexLabels::unconstrained(2);
        let mut p = CpMapProblem::new(&a, &a, &lab, &lab);
        p.constrain_image(&a.matrix_unit(0, 0, 0), None, &a.matrix_unit(0, 0, 0));
        p.constrain_image(&a.matrix_unit(0, 1, 1), None, &a.matrix_unit(0, 1, 1));
        let (map, rep) = p.solve(SolverOptions::default(), None).unwrap();
        assert!(rep.is_feasible());
        assert!(map.is_cp(1e-7) && map.is_unital(1e-7));
        assert!(map.eval(&a.matrix_unit(0, 0, 1)).max_abs() < 1e-6);
    }

    #[test]
    fn contractive_slack_bounds_unit_image() {
        let a = MultiMatrixAlgebra::full(2).unwrap();
        let lab = IndexLabels::unconstrained(2);
        let mut p = CpMapProblem::new(&a, &a, &lab, &lab);
        p.constrain_contractive();
        p.constrain_image(
            &a.matrix_unit(0, 0, 0),
            None,
            &(a.matrix_unit(0, 0, 0) * c(0.5)),
        );
        let (map, rep) = p.solve(SolverOptions::default(), None).unwrap();
        assert!(rep.is_feasible());
        assert!((a.unit() - map.unit_image()).min_eigenvalue() > -1e-6);
    }
}
