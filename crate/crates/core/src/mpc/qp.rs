//! Box-constrained convex QP: `min ½ xᵀHx + qᵀx  s.t.  l ≤ x ≤ u`.
//!
//! Solved with a primal active-set method. Decoupled groups of variables are
//! detected up front and solved independently, and warm starts let the
//! working set carry over between consecutive solves.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

#[derive(Debug, Clone, PartialEq)]
pub struct BoxQp {
    pub h: DMatrix<f64>,
    pub q: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    /// Constant added to the reported objective.
    pub constant: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Optimal,
    MaxIterations,
    /// No further decrease was possible before reaching the tolerance.
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-6,
            max_iter: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub status: SolverStatus,
    /// Largest iteration count over the independent blocks.
    pub iterations: usize,
    /// Infinity norm of the projected gradient at `x`.
    pub residual: f64,
}

impl BoxQp {
    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x)) + self.q.dot(x) + self.constant
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.h * x + &self.q
    }

    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            x.len(),
            x.iter()
                .enumerate()
                .map(|(i, v)| v.clamp(self.lower[i], self.upper[i])),
        )
    }

    /// Projected gradient; zero exactly at a KKT point.
    pub fn projected_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let g = self.gradient(x);
        projected(&g, x, &self.lower, &self.upper)
    }

    /// Groups of variables coupled through nonzero entries of `H`.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let n = self.dim();
        let mut parent: Vec<usize> = (0..n).collect();
        fn root(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let hij = self.h[(i, j)];
                if hij != 0.0 && hij.abs() > 1e-12 * (self.h[(i, i)] * self.h[(j, j)]).abs().sqrt() {
                    let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut slot = vec![usize::MAX; n];
        for i in 0..n {
            let r = root(&mut parent, i);
            if slot[r] == usize::MAX {
                slot[r] = groups.len();
                groups.push(Vec::new());
            }
            groups[slot[r]].push(i);
        }
        groups
    }
}

fn projected(g: &DVector<f64>, x: &DVector<f64>, l: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| {
        if (x[i] <= l[i] && g[i] > 0.0) || (x[i] >= u[i] && g[i] < 0.0) {
            0.0
        } else {
            g[i]
        }
    })
}

/// Cholesky factors of free-variable blocks from earlier solves. A cached
/// factor is reused whenever the new block is a positive multiple of it,
/// which covers consecutive MPC problems whose Hessian only rescales.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    entries: Vec<CachedFactor>,
}

#[derive(Debug, Clone)]
struct CachedFactor {
    vars: Vec<usize>,
    matrix: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

const CACHE_SIZE: usize = 16;

impl Workspace {
    fn factor(&mut self, vars: &[usize], h: &DMatrix<f64>) -> Option<(Cholesky<f64, Dyn>, f64)> {
        let m = vars.len();
        let hff = DMatrix::from_fn(m, m, |a, b| h[(vars[a], vars[b])]);
        if let Some(pos) = self.entries.iter().position(|e| e.vars == vars) {
            let e = &self.entries[pos];
            let scale = hff[(0, 0)] / e.matrix[(0, 0)];
            let matches = scale.is_finite()
                && scale > 0.0
                && hff
                    .iter()
                    .zip(e.matrix.iter())
                    .all(|(a, b)| (a - scale * b).abs() <= 1e-12 * a.abs().max(scale * b.abs()));
            if matches {
                let hit = self.entries.remove(pos);
                let chol = hit.chol.clone();
                self.entries.push(hit);
                return Some((chol, scale));
            }
            self.entries.remove(pos);
        }
        let chol = hff.clone().cholesky()?;
        if self.entries.len() >= CACHE_SIZE {
            self.entries.remove(0);
        }
        self.entries.push(CachedFactor {
            vars: vars.to_vec(),
            matrix: hff,
            chol: chol.clone(),
        });
        Some((chol, 1.0))
    }
}

/// Solves `qp` starting from `start` (projected onto the box first).
pub fn solve(qp: &BoxQp, start: Option<&DVector<f64>>, opts: &SolverOptions) -> QpSolution {
    solve_with(qp, start, opts, &mut Workspace::default())
}

/// Like [`solve`], reusing factorizations held in `ws`.
pub fn solve_with(qp: &BoxQp, start: Option<&DVector<f64>>, opts: &SolverOptions, ws: &mut Workspace) -> QpSolution {
    let n = qp.dim();
    let mut x = match start {
        Some(s) if s.len() == n => qp.project(s),
        _ => qp.project(&DVector::zeros(n)),
    };
    let tol = opts.tol * qp.q.amax().max(1.0);
    let mut status = SolverStatus::Optimal;
    let mut iterations = 0;
    for block in qp.blocks() {
        let (st, it) = solve_block(qp, &block, &mut x, tol, opts.max_iter, ws);
        iterations = iterations.max(it);
        if st != SolverStatus::Optimal && status == SolverStatus::Optimal {
            status = st;
        }
    }
    QpSolution {
        objective: qp.objective(&x),
        residual: qp.projected_gradient(&x).amax(),
        x,
        status,
        iterations,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bound {
    Free,
    Lower,
    Upper,
}

/// Gradient restricted to `vars`; other variables enter through `H x`.
fn block_gradient(qp: &BoxQp, vars: &[usize], x: &DVector<f64>) -> Vec<f64> {
    vars.iter()
        .map(|&i| {
            let mut g = qp.q[i];
            for &j in vars {
                g += qp.h[(i, j)] * x[j];
            }
            g
        })
        .collect()
}

/// Primal active-set iterations on one decoupled block. Each iteration either
/// takes a Newton step on the free variables, stopping at the first bound it
/// hits, or releases the bound with the most negative multiplier.
fn solve_block(
    qp: &BoxQp,
    vars: &[usize],
    x: &mut DVector<f64>,
    tol: f64,
    max_iter: usize,
    ws: &mut Workspace,
) -> (SolverStatus, usize) {
    let (l, u) = (&qp.lower, &qp.upper);
    let mut state: Vec<Bound> = vars
        .iter()
        .map(|&i| {
            if x[i] <= l[i] {
                Bound::Lower
            } else if x[i] >= u[i] {
                Bound::Upper
            } else {
                Bound::Free
            }
        })
        .collect();
    for iter in 0..max_iter {
        let g = block_gradient(qp, vars, x);
        let free: Vec<usize> = (0..vars.len()).filter(|&k| state[k] == Bound::Free).collect();
        let free_grad = free.iter().map(|&k| g[k].abs()).fold(0.0, f64::max);

        if free_grad > tol {
            let globals: Vec<usize> = free.iter().map(|&k| vars[k]).collect();
            let Some((chol, scale)) = ws.factor(&globals, &qp.h) else {
                return (SolverStatus::Stalled, iter);
            };
            let rhs = DVector::from_fn(free.len(), |a, _| g[free[a]] / scale);
            let step = chol.solve(&rhs);
            let mut alpha = 1.0;
            let mut blocking = None;
            for (a, &k) in free.iter().enumerate() {
                let i = vars[k];
                let d = -step[a];
                let room = if d < 0.0 {
                    (l[i] - x[i]) / d
                } else if d > 0.0 {
                    (u[i] - x[i]) / d
                } else {
                    f64::INFINITY
                };
                if room < alpha {
                    alpha = room.max(0.0);
                    blocking = Some((k, if d < 0.0 { Bound::Lower } else { Bound::Upper }));
                }
            }
            for (a, &k) in free.iter().enumerate() {
                let i = vars[k];
                x[i] = (x[i] - alpha * step[a]).clamp(l[i], u[i]);
            }
            if let Some((k, side)) = blocking {
                let i = vars[k];
                x[i] = if side == Bound::Lower { l[i] } else { u[i] };
                state[k] = side;
            }
            continue;
        }

        // Free variables are stationary; check the multipliers of the bounds.
        let mut worst = (tol, None);
        for (k, s) in state.iter().enumerate() {
            let violation = match s {
                Bound::Lower => -g[k],
                Bound::Upper => g[k],
                Bound::Free => continue,
            };
            if violation > worst.0 {
                worst = (violation, Some(k));
            }
        }
        match worst.1 {
            Some(k) => state[k] = Bound::Free,
            None => return (SolverStatus::Optimal, iter),
        }
    }
    let g = block_gradient(qp, vars, x);
    let done = vars.iter().enumerate().all(|(k, &i)| {
        let gi = g[k];
        !((x[i] > l[i] || gi > 0.0) && (x[i] < u[i] || gi < 0.0)) || gi.abs() <= tol
    });
    let status = if done {
        SolverStatus::Optimal
    } else {
        SolverStatus::MaxIterations
    };
    (status, max_iter)
}
