//! Sparse square linear systems and an exact solver that works component by
//! component over the strongly connected components of the dependency graph.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("singular system (no pivot for variable {variable})")]
    Singular { variable: usize },
    #[error("system has {rows} rows but {rhs} right-hand sides")]
    Shape { rows: usize, rhs: usize },
}

/// `A x = b` with `A` stored row-wise as sorted `(column, coefficient)`
/// pairs without explicit zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem<S> {
    pub rows: Vec<Vec<(usize, S)>>,
    pub rhs: Vec<S>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolveStats {
    pub components: usize,
    /// Components that needed elimination (size > 1 or a self-dependency).
    pub cyclic_components: usize,
    pub largest_component: usize,
    /// Row operations performed during elimination.
    pub row_operations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution<S> {
    pub values: Vec<S>,
    pub stats: SolveStats,
}

impl<S: Scalar> LinearSystem<S> {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `b - A x` per row.
    pub fn residuals(&self, x: &[S]) -> Vec<S> {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(row, b)| {
                row.iter()
                    .fold(b.clone(), |acc, (j, a)| acc - a.clone() * x[*j].clone())
            })
            .collect()
    }

    /// Solves by strongly connected components in dependency order: singleton
    /// components by substitution, larger ones by sparse Gaussian elimination.
    pub fn solve(&self) -> Result<Solution<S>, SolveError> {
        let n = self.rows.len();
        if self.rhs.len() != n {
            return Err(SolveError::Shape { rows: n, rhs: self.rhs.len() });
        }
        let deps: Vec<Vec<usize>> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().map(|e| e.0).filter(|&j| j != i).collect())
            .collect();
        let components = strongly_connected_components(&deps);

        let mut stats = SolveStats { components: components.len(), ..Default::default() };
        let mut values: Vec<Option<S>> = vec![None; n];
        for comp in &components {
            stats.largest_component = stats.largest_component.max(comp.len());
            if comp.len() == 1 {
                let i = comp[0];
                let mut diag = S::zero();
                let mut acc = self.rhs[i].clone();
                for (j, a) in &self.rows[i] {
                    if *j == i {
                        diag = a.clone();
                    } else {
                        let xj = values[*j].clone().expect("dependencies solved first");
                        acc = acc - a.clone() * xj;
                    }
                }
                if diag.is_zero() {
                    return Err(SolveError::Singular { variable: i });
                }
                if diag != S::one() {
                    stats.cyclic_components += 1;
                }
                values[i] = Some(acc / diag);
            } else {
                stats.cyclic_components += 1;
                let local = self.solve_component(comp, &values, &mut stats)?;
                for (k, &i) in comp.iter().enumerate() {
                    values[i] = Some(local[k].clone());
                }
            }
        }
        Ok(Solution {
            values: values.into_iter().map(|v| v.expect("every variable solved")).collect(),
            stats,
        })
    }

    fn solve_component(
        &self,
        comp: &[usize],
        solved: &[Option<S>],
        stats: &mut SolveStats,
    ) -> Result<Vec<S>, SolveError> {
        let m = comp.len();
        let local: BTreeMap<usize, usize> = comp.iter().enumerate().map(|(k, &i)| (i, k)).collect();
        let mut rows: Vec<BTreeMap<usize, S>> = Vec::with_capacity(m);
        let mut rhs: Vec<S> = Vec::with_capacity(m);
        let mut col_rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); m];
        for (k, &i) in comp.iter().enumerate() {
            let mut row = BTreeMap::new();
            let mut b = self.rhs[i].clone();
            for (j, a) in &self.rows[i] {
                match local.get(j) {
                    Some(&lj) => {
                        row.insert(lj, a.clone());
                        col_rows[lj].insert(k);
                    }
                    None => {
                        let xj = solved[*j].clone().expect("dependencies solved first");
                        b = b - a.clone() * xj;
                    }
                }
            }
            rows.push(row);
            rhs.push(b);
        }

        // Forward elimination; pivot_row[col] is the row chosen for col.
        let mut pivot_row = vec![usize::MAX; m];
        let mut used = vec![false; m];
        for col in 0..m {
            let pivot = col_rows[col]
                .iter()
                .copied()
                .filter(|&r| !used[r])
                .min_by_key(|&r| (rows[r][&col].pivot_cost(), r))
                .ok_or(SolveError::Singular { variable: comp[col] })?;
            used[pivot] = true;
            pivot_row[col] = pivot;
            let pivot_entries: Vec<(usize, S)> =
                rows[pivot].iter().map(|(c, v)| (*c, v.clone())).collect();
            let pivot_value = rows[pivot][&col].clone();
            let pivot_rhs = rhs[pivot].clone();
            let targets: Vec<usize> =
                col_rows[col].iter().copied().filter(|&r| !used[r]).collect();
            for r in targets {
                let factor = rows[r][&col].clone() / pivot_value.clone();
                stats.row_operations += 1;
                for (c, v) in &pivot_entries {
                    let updated = match rows[r].get(c) {
                        Some(existing) => existing.clone() - factor.clone() * v.clone(),
                        None => S::zero() - factor.clone() * v.clone(),
                    };
                    if updated.is_zero() || *c == col {
                        rows[r].remove(c);
                        col_rows[*c].remove(&r);
                    } else {
                        rows[r].insert(*c, updated);
                        col_rows[*c].insert(r);
                    }
                }
                rhs[r] = rhs[r].clone() - factor * pivot_rhs.clone();
            }
        }

        // Back substitution in reverse column order.
        let mut x: Vec<Option<S>> = vec![None; m];
        for col in (0..m).rev() {
            let r = pivot_row[col];
            let mut acc = rhs[r].clone();
            for (c, v) in &rows[r] {
                if *c != col {
                    let xc = x[*c].clone().expect("later columns solved");
                    acc = acc - v.clone() * xc;
                }
            }
            x[col] = Some(acc / rows[r][&col].clone());
        }
        Ok(x.into_iter().map(|v| v.expect("solved")).collect())
    }
}

/// Tarjan's algorithm without recursion. Components come out in reverse
/// topological order: every component only depends on earlier ones.
pub fn strongly_connected_components(succ: &[Vec<usize>]) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let n = succ.len();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut counter = 0;
    // (node, next successor position)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root, 0));
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if *pos < succ[v].len() {
                let w = succ[v][*pos];
                *pos += 1;
                if index[w] == UNVISITED {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("component on stack");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    out.push(comp);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{ratio, Rational};
    use num_traits::Zero;
    use proptest::prelude::*;

    fn system(rows: Vec<Vec<(usize, Rational)>>, rhs: Vec<Rational>) -> LinearSystem<Rational> {
        LinearSystem { rows, rhs }
    }

    #[test]
    fn scc_order_is_reverse_topological() {
        // 0 -> 1 -> 2 -> 1, 2 -> 3
        let succ = vec![vec![1], vec![2], vec![1, 3], vec![]];
        let comps = strongly_connected_components(&succ);
        assert_eq!(comps, vec![vec![3], vec![1, 2], vec![0]]);
    }

    #[test]
    fn acyclic_system_needs_no_elimination() {
        // x0 = 1 + x1/2 + x2/2, x1 = 2, x2 = 4
        let sys = system(
            vec![
                vec![(0, ratio(1, 1)), (1, ratio(-1, 2)), (2, ratio(-1, 2))],
                vec![(1, ratio(1, 1))],
                vec![(2, ratio(1, 1))],
            ],
            vec![ratio(1, 1), ratio(2, 1), ratio(4, 1)],
        );
        let sol = sys.solve().unwrap();
        assert_eq!(sol.values, vec![ratio(4, 1), ratio(2, 1), ratio(4, 1)]);
        assert_eq!(sol.stats.cyclic_components, 0);
        assert_eq!(sol.stats.row_operations, 0);
    }

    #[test]
    fn single_terminal_variable() {
        let sys = system(vec![vec![(0, ratio(1, 1))]], vec![ratio(7, 1)]);
        assert_eq!(sys.solve().unwrap().values, vec![ratio(7, 1)]);
    }

    #[test]
    fn self_loop_and_cycle() {
        // x0 = 4 + x0/5 + 4/5 x1 ; x1 = 3  -> x0 = (4 + 12/5) * 5/4 = 8
        let sys = system(
            vec![vec![(0, ratio(4, 5)), (1, ratio(-4, 5))], vec![(1, ratio(1, 1))]],
            vec![ratio(4, 1), ratio(3, 1)],
        );
        assert_eq!(sys.solve().unwrap().values[0], ratio(8, 1));

        // two-cycle: x0 = 1 + x1/2, x1 = 1 + x0/2 -> x0 = x1 = 2
        let sys = system(
            vec![
                vec![(0, ratio(1, 1)), (1, ratio(-1, 2))],
                vec![(0, ratio(-1, 2)), (1, ratio(1, 1))],
            ],
            vec![ratio(1, 1), ratio(1, 1)],
        );
        let sol = sys.solve().unwrap();
        assert_eq!(sol.values, vec![ratio(2, 1), ratio(2, 1)]);
        assert_eq!(sol.stats.largest_component, 2);
    }

    #[test]
    fn singular_systems_are_reported() {
        // x0 = x1, x1 = x0 (a closed recurrent class)
        let sys = system(
            vec![
                vec![(0, ratio(1, 1)), (1, ratio(-1, 1))],
                vec![(0, ratio(-1, 1)), (1, ratio(1, 1))],
            ],
            vec![ratio(1, 1), ratio(1, 1)],
        );
        assert!(matches!(sys.solve(), Err(SolveError::Singular { .. })));
        let sys = system(vec![vec![]], vec![ratio(1, 1)]);
        assert!(matches!(sys.solve(), Err(SolveError::Singular { variable: 0 })));
    }

    #[test]
    fn float_instance_solves_same_system() {
        let sys: LinearSystem<f64> = LinearSystem {
            rows: vec![vec![(0, 0.8), (1, -0.8)], vec![(1, 1.0)]],
            rhs: vec![4.0, 3.0],
        };
        let sol = sys.solve().unwrap();
        assert!((sol.values[0] - 8.0).abs() < 1e-12);
    }

    fn dense_oracle(a: &[Vec<Rational>], b: &[Rational]) -> Option<Vec<Rational>> {
        // Gauss-Jordan on a dense copy, first non-zero pivot.
        let n = a.len();
        let mut m: Vec<Vec<Rational>> = a
            .iter()
            .zip(b)
            .map(|(row, bi)| {
                let mut r = row.clone();
                r.push(bi.clone());
                r
            })
            .collect();
        for col in 0..n {
            let p = (col..n).find(|&r| !m[r][col].is_zero())?;
            m.swap(col, p);
            let pv = m[col][col].clone();
            for c in col..=n {
                m[col][c] = &m[col][c] / &pv;
            }
            for r in 0..n {
                if r != col && !m[r][col].is_zero() {
                    let f = m[r][col].clone();
                    for c in col..=n {
                        let delta = &f * &m[col][c];
                        m[r][c] = &m[r][c] - delta;
                    }
                }
            }
        }
        Some(m.into_iter().map(|r| r[n].clone()).collect())
    }

    proptest! {
        #[test]
        fn matches_dense_elimination(
            entries in proptest::collection::vec((0usize..6, 0usize..6, -4i64..5), 0..20),
            diag in proptest::collection::vec(1i64..6, 6),
            rhs in proptest::collection::vec(-5i64..6, 6),
        ) {
            let n = 6;
            let mut dense = vec![vec![Rational::zero(); n]; n];
            for (i, d) in diag.iter().enumerate() {
                dense[i][i] = ratio(*d * 10, 1);
            }
            for (i, j, v) in entries {
                dense[i][j] = &dense[i][j] + ratio(v, 1);
            }
            let b: Vec<Rational> = rhs.iter().map(|&v| ratio(v, 1)).collect();
            let rows = dense
                .iter()
                .map(|r| r.iter().enumerate().filter(|(_, v)| !v.is_zero()).map(|(j, v)| (j, v.clone())).collect())
                .collect();
            let sys = LinearSystem { rows, rhs: b.clone() };
            match dense_oracle(&dense, &b) {
                Some(expected) => {
                    let sol = sys.solve().unwrap();
                    prop_assert!(sys.residuals(&sol.values).iter().all(|r| r.is_zero()));
                    prop_assert_eq!(sol.values, expected);
                }
                None => prop_assert!(sys.solve().is_err()),
            }
        }
    }
}
