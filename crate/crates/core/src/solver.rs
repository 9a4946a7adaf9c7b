//! Gauss–Seidel solver for fixpoint systems `x = A·x + b` with `A`
//! substochastic, processed block-wise in reverse topological order of the
//! dependency graph's SCCs.

use crate::scc::tarjan::strongly_connected_components;

/// Sparse system over local indices `0..n`; row `i` lists `a_ij` for the
/// variables `x_i` depends on.
#[derive(Debug, Clone, Default)]
pub(crate) struct SparseSystem {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    rhs: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Never lower a value below its starting point. Sound when the start
    /// vector is a lower bound of the solution.
    pub monotone: bool,
    /// Scale `tol` by the largest magnitude in the iterate.
    pub relative: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct Solved {
    pub values: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

impl SparseSystem {
    pub fn with_capacity(n: usize, nnz: usize) -> Self {
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        SparseSystem {
            offsets,
            cols: Vec::with_capacity(nnz),
            vals: Vec::with_capacity(nnz),
            rhs: Vec::with_capacity(n),
        }
    }

    /// Appends the next row. Columns must refer to rows `< n` once complete.
    pub fn push_row<I: IntoIterator<Item = (usize, f64)>>(&mut self, entries: I, rhs: f64) {
        for (j, a) in entries {
            self.cols.push(j);
            self.vals.push(a);
        }
        self.offsets.push(self.cols.len());
        self.rhs.push(rhs);
    }

    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.offsets[i], self.offsets[i + 1]);
        (&self.cols[lo..hi], &self.vals[lo..hi])
    }

    #[inline]
    fn update(&self, i: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        let mut acc = self.rhs[i];
        let mut diag = 0.0;
        for (&j, &a) in cols.iter().zip(vals) {
            if j == i {
                diag += a;
            } else {
                acc += a * x[j];
            }
        }
        let denom = 1.0 - diag;
        if denom > 0.0 {
            acc / denom
        } else {
            // x_i = x_i + b_i: a closed loop; only consistent with b_i = 0.
            x[i]
        }
    }

    /// Solves the system; on non-convergence returns the best iterate with
    /// its residual in the error.
    pub fn solve(&self, start: Option<Vec<f64>>, opts: SolveOptions) -> Result<Solved, Solved> {
        let n = self.len();
        let mut x = start.unwrap_or_else(|| vec![0.0; n]);
        debug_assert_eq!(x.len(), n);
        let comps = strongly_connected_components(n, |i| self.row(i).0.iter().copied());

        let mut residual: f64 = 0.0;
        let mut iterations = if n == 0 { 0 } else { 1 };
        let mut failed = false;
        for comp in &comps {
            let cyclic = comp.len() > 1;
            if !cyclic {
                // Self-loops are folded into the update, so one step is exact.
                let i = comp[0];
                let v = self.update(i, &x);
                x[i] = if opts.monotone { v.max(x[i]) } else { v };
                continue;
            }
            let mut sweeps = 0;
            loop {
                let mut change: f64 = 0.0;
                let mut scale: f64 = 0.0;
                for &i in comp {
                    let mut v = self.update(i, &x);
                    if opts.monotone {
                        v = v.max(x[i]);
                    }
                    change = change.max((v - x[i]).abs());
                    scale = scale.max(v.abs());
                    x[i] = v;
                }
                sweeps += 1;
                let bound = if opts.relative { opts.tol * scale.max(1.0) } else { opts.tol };
                if change <= bound {
                    residual = residual.max(change);
                    break;
                }
                if sweeps >= opts.max_iter {
                    residual = residual.max(change);
                    failed = true;
                    break;
                }
            }
            iterations = iterations.max(sweeps);
            if failed {
                break;
            }
        }
        let solved = Solved {
            values: x,
            residual,
            iterations,
        };
        if failed {
            Err(solved)
        } else {
            Ok(solved)
        }
    }
}

/// Columns solved together by [`SparseSystem::solve_columns`].
pub(crate) const COLUMN_CHUNK: usize = 16;

impl SparseSystem {
    /// Solves `x = A·x + B` for `k` right-hand sides, `COLUMN_CHUNK` columns
    /// per pass. `rhs[i]` lists the nonzero `(column, b_ic)` of row `i`; the
    /// scalar rhs pushed with each row is ignored. `emit` receives the first
    /// column of each chunk, its width and the chunk's values row-major.
    pub fn solve_columns<F>(&self, k: usize, rhs: &[Vec<(usize, f64)>], opts: SolveOptions, mut emit: F) -> Result<(), Solved>
    where
        F: FnMut(usize, usize, &[f64]),
    {
        let n = self.len();
        debug_assert_eq!(rhs.len(), n);
        let comps: Vec<Vec<usize>> = strongly_connected_components(n, |i| self.row(i).0.iter().copied())
            .into_iter()
            .map(|mut comp| {
                comp.sort_unstable_by(|a, b| b.cmp(a));
                comp
            })
            .collect();
        let mut x = vec![0.0; n * COLUMN_CHUNK];
        let mut start = 0;
        while start < k {
            let w = COLUMN_CHUNK.min(k - start);
            x.iter_mut().for_each(|v| *v = 0.0);
            for comp in &comps {
                let cyclic = comp.len() > 1;
                let mut sweeps = 0;
                loop {
                    let mut change: f64 = 0.0;
                    let mut scale: f64 = 0.0;
                    for &i in comp {
                        let mut acc = [0.0; COLUMN_CHUNK];
                        for &(c, b) in &rhs[i] {
                            if (start..start + w).contains(&c) {
                                acc[c - start] += b;
                            }
                        }
                        let (cols, vals) = self.row(i);
                        let mut diag = 0.0;
                        for (&j, &a) in cols.iter().zip(vals) {
                            if j == i {
                                diag += a;
                                continue;
                            }
                            let xj = &x[j * COLUMN_CHUNK..(j + 1) * COLUMN_CHUNK];
                            for c in 0..COLUMN_CHUNK {
                                acc[c] += a * xj[c];
                            }
                        }
                        let denom = 1.0 - diag;
                        let xi = &mut x[i * COLUMN_CHUNK..(i + 1) * COLUMN_CHUNK];
                        for c in 0..w {
                            let mut v = if denom > 0.0 { acc[c] / denom } else { xi[c] };
                            if opts.monotone {
                                v = v.max(xi[c]);
                            }
                            change = change.max((v - xi[c]).abs());
                            scale = scale.max(v.abs());
                            xi[c] = v;
                        }
                    }
                    sweeps += 1;
                    let bound = if opts.relative { opts.tol * scale.max(1.0) } else { opts.tol };
                    if !cyclic || change <= bound {
                        break;
                    }
                    if sweeps >= opts.max_iter {
                        let values = (0..n).map(|i| x[i * COLUMN_CHUNK]).collect();
                        return Err(Solved {
                            values,
                            residual: change,
                            iterations: sweeps,
                        });
                    }
                }
            }
            emit(start, w, &x);
            start += w;
        }
        Ok(())
    }
}
