//! Small dense Hermitian solver for the least-squares subproblems of the
//! greedy solvers. Normal equations are regularized with a tiny ridge so that
//! clustered instant sets cannot make the factorization fail.

use num_complex::Complex64;

pub const RIDGE: f64 = 1e-12;

/// Lower-triangular Cholesky factor of a Hermitian positive-definite matrix
/// that can grow one row/column at a time.
#[derive(Debug, Clone, Default)]
pub struct GrowingCholesky {
    /// Row-major rows of `L`; row `i` has `i + 1` entries.
    rows: Vec<Vec<Complex64>>,
}

impl GrowingCholesky {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Appends a new row/column. `col[i]` is `G[i][new]` for the existing
    /// indices and `diag` is `G[new][new]`.
    pub fn push(&mut self, col: &[Complex64], diag: f64) {
        let d = self.rows.len();
        debug_assert_eq!(col.len(), d);
        // Solve L w = col, then new row is [w^H, sqrt(diag - |w|^2)].
        let mut w = Vec::with_capacity(d + 1);
        for i in 0..d {
            let row = &self.rows[i];
            let mut acc = col[i];
            for j in 0..i {
                acc -= row[j] * w[j];
            }
            w.push(acc / row[i].re);
        }
        let mut pivot = diag + RIDGE - w.iter().map(|v: &Complex64| v.norm_sqr()).sum::<f64>();
        if !(pivot > RIDGE) {
            pivot = RIDGE;
        }
        let mut row: Vec<Complex64> = w.into_iter().map(|v| v.conj()).collect();
        row.push(Complex64::new(pivot.sqrt(), 0.0));
        self.rows.push(row);
    }

    /// Solves `(L L^H) c = b`.
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let d = self.rows.len();
        debug_assert_eq!(b.len(), d);
        let mut z = vec![Complex64::new(0.0, 0.0); d];
        for i in 0..d {
            let row = &self.rows[i];
            let mut acc = b[i];
            for j in 0..i {
                acc -= row[j] * z[j];
            }
            z[i] = acc / row[i].re;
        }
        let mut c = vec![Complex64::new(0.0, 0.0); d];
        for i in (0..d).rev() {
            let mut acc = z[i];
            for (row, cj) in self.rows.iter().zip(&c).skip(i + 1) {
                acc -= row[i].conj() * cj;
            }
            c[i] = acc / self.rows[i][i].re;
        }
        c
    }
}

/// Solves the Hermitian system `(G + ridge I) c = b` where `gram(i, j)`
/// yields `G[i][j]`.
pub fn solve_hermitian(dim: usize, gram: impl Fn(usize, usize) -> Complex64, b: &[Complex64]) -> Vec<Complex64> {
    let mut chol = GrowingCholesky::new();
    let mut col = Vec::with_capacity(dim);
    for j in 0..dim {
        col.clear();
        col.extend((0..j).map(|i| gram(i, j)));
        chol.push(&col, gram(j, j).re);
    }
    chol.solve(b)
}
