//! Basis factorization for the revised simplex.
//!
//! Slack and artificial columns are signed unit vectors. They are eliminated
//! symbolically, leaving a dense "kernel" block (structural columns against
//! the rows no unit column covers) that is factored with partial-pivoting LU.
//! Pivots between refactorizations are applied as product-form eta updates.

/// Dense LU with partial pivoting, row-major storage.
#[derive(Debug, Clone, Default)]
pub(crate) struct DenseLu {
    n: usize,
    /// Combined L (unit diagonal, strictly lower) and U factors.
    lu: Vec<f64>,
    /// `perm[k]` is the original row placed at position k.
    perm: Vec<usize>,
}

impl DenseLu {
    /// Returns `None` when a pivot falls below `tol`.
    pub(crate) fn factor(n: usize, mut a: Vec<f64>, tol: f64) -> Option<DenseLu> {
        debug_assert_eq!(a.len(), n * n);
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut best = k;
            let mut best_val = a[k * n + k].abs();
            for r in (k + 1)..n {
                let v = a[r * n + k].abs();
                if v > best_val {
                    best = r;
                    best_val = v;
                }
            }
            if best_val <= tol {
                return None;
            }
            if best != k {
                for c in 0..n {
                    a.swap(k * n + c, best * n + c);
                }
                perm.swap(k, best);
            }
            let pivot = a[k * n + k];
            let (upper, lower) = a.split_at_mut((k + 1) * n);
            let pivot_row = &upper[k * n..(k + 1) * n];
            for r in 0..(n - k - 1) {
                let row = &mut lower[r * n..(r + 1) * n];
                let f = row[k] / pivot;
                if f != 0.0 {
                    row[k] = f;
                    for c in (k + 1)..n {
                        row[c] -= f * pivot_row[c];
                    }
                }
            }
        }
        Some(DenseLu { n, lu: a, perm })
    }

    /// Solves `A x = b` in place.
    pub(crate) fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&y[..i]).map(|(l, v)| l * v).sum();
            y[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n..(i + 1) * n];
            let s: f64 = row[i + 1..].iter().zip(&y[i + 1..]).map(|(u, v)| u * v).sum();
            y[i] = (y[i] - s) / row[i];
        }
        b.copy_from_slice(&y);
    }

    /// Solves `A^T x = b` in place.
    pub(crate) fn solve_transpose(&self, b: &mut [f64]) {
        let n = self.n;
        // A = P^T L U  =>  A^T = U^T L^T P
        let mut z = b.to_vec();
        for i in 0..n {
            let zi = z[i] / self.lu[i * n + i];
            z[i] = zi;
            if zi != 0.0 {
                let row = &self.lu[i * n..(i + 1) * n];
                for c in (i + 1)..n {
                    z[c] -= row[c] * zi;
                }
            }
        }
        for i in (0..n).rev() {
            let zi = z[i];
            if zi != 0.0 {
                let row = &self.lu[i * n..i * n + i];
                for (c, l) in row.iter().enumerate() {
                    z[c] -= l * zi;
                }
            }
        }
        for (k, &p) in self.perm.iter().enumerate() {
            b[p] = z[k];
        }
    }
}

/// Column description handed to the factorization.
#[derive(Debug, Clone, Copy)]
pub(crate) enum BasisColumn<'a> {
    Unit { row: usize, sign: f64 },
    Sparse(&'a [(usize, f64)]),
}

#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    /// Off-pivot entries of the entering column in basis coordinates.
    entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct BasisFactor {
    m: usize,
    /// (basis position, row, sign) of every unit column in the basis.
    units: Vec<(usize, usize, f64)>,
    /// Basis position covering each row through a unit column.
    row_unit: Vec<Option<usize>>,
    kernel_pos: Vec<usize>,
    kernel_rows: Vec<usize>,
    kernel_cols: Vec<Vec<(usize, f64)>>,
    lu: DenseLu,
    etas: Vec<Eta>,
}

impl BasisFactor {
    /// Factors the basis whose position `k` holds `columns[k]`.
    pub(crate) fn new(m: usize, columns: &[BasisColumn<'_>], pivot_tol: f64) -> Option<BasisFactor> {
        debug_assert_eq!(columns.len(), m);
        let mut units = Vec::new();
        let mut row_unit = vec![None; m];
        let mut kernel_pos = Vec::new();
        let mut kernel_cols = Vec::new();
        for (pos, col) in columns.iter().enumerate() {
            match *col {
                BasisColumn::Unit { row, sign } => {
                    if row_unit[row].is_some() {
                        return None;
                    }
                    row_unit[row] = Some(pos);
                    units.push((pos, row, sign));
                }
                BasisColumn::Sparse(entries) => {
                    kernel_pos.push(pos);
                    kernel_cols.push(entries.to_vec());
                }
            }
        }
        let kernel_rows: Vec<usize> = (0..m).filter(|&r| row_unit[r].is_none()).collect();
        let k = kernel_rows.len();
        if k != kernel_pos.len() {
            return None;
        }
        let mut row_to_kernel = vec![usize::MAX; m];
        for (t, &r) in kernel_rows.iter().enumerate() {
            row_to_kernel[r] = t;
        }
        let mut dense = vec![0.0; k * k];
        for (s, col) in kernel_cols.iter().enumerate() {
            for &(r, v) in col {
                let t = row_to_kernel[r];
                if t != usize::MAX {
                    dense[t * k + s] += v;
                }
            }
        }
        let lu = DenseLu::factor(k, dense, pivot_tol)?;
        Some(BasisFactor {
            m,
            units,
            row_unit,
            kernel_pos,
            kernel_rows,
            kernel_cols,
            lu,
            etas: Vec::new(),
        })
    }

    pub(crate) fn num_etas(&self) -> usize {
        self.etas.len()
    }

    #[cfg(test)]
    pub(crate) fn kernel_size(&self) -> usize {
        self.kernel_pos.len()
    }

    /// Solves `B z = a`; `a` is indexed by row, the result by basis position.
    pub(crate) fn ftran(&self, a: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.m];
        let mut zk: Vec<f64> = self.kernel_rows.iter().map(|&r| a[r]).collect();
        self.lu.solve(&mut zk);
        let mut acc = vec![0.0; self.m];
        for (t, col) in self.kernel_cols.iter().enumerate() {
            let v = zk[t];
            z[self.kernel_pos[t]] = v;
            if v != 0.0 {
                for &(r, coef) in col {
                    if self.row_unit[r].is_some() {
                        acc[r] += coef * v;
                    }
                }
            }
        }
        for &(pos, row, sign) in &self.units {
            z[pos] = sign * (a[row] - acc[row]);
        }
        for eta in &self.etas {
            let zr = z[eta.pos] / eta.pivot;
            z[eta.pos] = zr;
            if zr != 0.0 {
                for &(i, v) in &eta.entries {
                    z[i] -= v * zr;
                }
            }
        }
        z
    }

    /// Solves `B^T y = c`; `c` is indexed by basis position, the result by row.
    pub(crate) fn btran(&self, c: &[f64]) -> Vec<f64> {
        let mut u = c.to_vec();
        for eta in self.etas.iter().rev() {
            let s: f64 = eta.entries.iter().map(|&(i, v)| v * u[i]).sum();
            u[eta.pos] = (u[eta.pos] - s) / eta.pivot;
        }
        let mut y = vec![0.0; self.m];
        for &(pos, row, sign) in &self.units {
            y[row] = sign * u[pos];
        }
        let mut rhs: Vec<f64> = Vec::with_capacity(self.kernel_pos.len());
        for (t, col) in self.kernel_cols.iter().enumerate() {
            let mut s = u[self.kernel_pos[t]];
            for &(r, coef) in col {
                if self.row_unit[r].is_some() {
                    s -= coef * y[r];
                }
            }
            rhs.push(s);
        }
        self.lu.solve_transpose(&mut rhs);
        for (t, &r) in self.kernel_rows.iter().enumerate() {
            y[r] = rhs[t];
        }
        y
    }

    /// Records the pivot that replaces basis position `pos` with a column
    /// whose FTRAN image is `alpha`.
    pub(crate) fn push_eta(&mut self, pos: usize, alpha: &[f64]) {
        let entries = alpha
            .iter()
            .enumerate()
            .filter(|&(i, v)| i != pos && v.abs() > 1e-14)
            .map(|(i, &v)| (i, v))
            .collect();
        self.etas.push(Eta {
            pos,
            pivot: alpha[pos],
            entries,
        });
    }
}
