//! Small dense linear algebra: Cholesky, LU, cyclic-Jacobi symmetric
//! eigensolver, and the Lyapunov-equation initializer.
//!
//! Everything here is written for the modest dimensions of this toolkit
//! (PSD blocks up to ~200, Lyapunov systems up to n = 20); no attempt is
//! made at large-scale performance.

use crate::parse::PolySystem;
use crate::poly::Monomial;
use crate::scalar::{real, Scalar};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T: Scalar> {
    pub rows: usize,
    pub cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, T::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] += v;
    }

    pub fn matmul(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out.add_to(i, j, a * other.get(k, j));
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows)
            .map(|i| {
                let mut s = T::zero();
                for j in 0..self.cols {
                    s += self.get(i, j) * x[j];
                }
                s
            })
            .collect()
    }

    pub fn transpose(&self) -> Mat<T> {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |a, v| a.max(v.abs()))
    }

    /// Inverse of a lower-triangular matrix by forward substitution.
    pub fn lower_inverse(&self) -> Mat<T> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut inv = Mat::zeros(n, n);
        for col in 0..n {
            let mut b = vec![T::zero(); n];
            b[col] = T::one();
            for i in 0..n {
                let mut s = b[i];
                for k in 0..i {
                    s -= self.get(i, k) * inv.get(k, col);
                }
                inv.set(i, col, s / self.get(i, i));
            }
        }
        inv
    }
}

/// Symmetric matrix in packed lower-triangle storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T: Scalar> {
    dim: usize,
    data: Vec<T>,
}

#[inline]
fn packed_idx(i: usize, j: usize) -> usize {
    debug_assert!(i >= j);
    i * (i + 1) / 2 + j
}

impl<T: Scalar> SymMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        SymMatrix { dim, data: vec![T::zero(); dim * (dim + 1) / 2] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, T::one());
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..=i {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        if i >= j {
            self.data[packed_idx(i, j)]
        } else {
            self.data[packed_idx(j, i)]
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        if i >= j {
            self.data[packed_idx(i, j)] = v;
        } else {
            self.data[packed_idx(j, i)] = v;
        }
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: T) {
        if i >= j {
            self.data[packed_idx(i, j)] += v;
        } else {
            self.data[packed_idx(j, i)] += v;
        }
    }

    pub fn to_mat(&self) -> Mat<T> {
        let mut m = Mat::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.set(i, j, self.get(i, j));
            }
        }
        m
    }

    /// Symmetrizes a square matrix: `(M + M^T) / 2`.
    pub fn from_mat_symmetrized(m: &Mat<T>) -> Self {
        assert_eq!(m.rows, m.cols);
        let half = real::<T>(0.5);
        Self::from_fn(m.rows, |i, j| (m.get(i, j) + m.get(j, i)) * half)
    }

    pub fn scale_mut(&mut self, c: T) {
        for v in &mut self.data {
            *v *= c;
        }
    }

    pub fn add_scaled_mut(&mut self, other: &SymMatrix<T>, c: T) {
        assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b * c;
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |a, v| a.max(v.abs()))
    }

    /// Trace inner product counting both triangles:
    /// `<A, B> = sum_ij A_ij B_ij`.
    pub fn inner(&self, other: &SymMatrix<T>) -> T {
        assert_eq!(self.dim, other.dim);
        let two = real::<T>(2.0);
        let mut s = T::zero();
        for i in 0..self.dim {
            for j in 0..=i {
                let prod = self.data[packed_idx(i, j)] * other.data[packed_idx(i, j)];
                s += if i == j { prod } else { two * prod };
            }
        }
        s
    }
}

/// Cholesky factorization `M = L L^T`; `None` means not positive definite.
pub fn cholesky<T: Scalar>(m: &SymMatrix<T>) -> Option<Mat<T>> {
    let n = m.dim();
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut d = m.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if !(d > T::zero()) || !d.is_finite() {
            return None;
        }
        let dj = d.sqrt();
        l.set(j, j, dj);
        for i in (j + 1)..n {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / dj);
        }
    }
    Some(l)
}

/// Solves `L L^T x = b` given the Cholesky factor.
pub fn chol_solve<T: Scalar>(l: &Mat<T>, b: &[T]) -> Vec<T> {
    let n = l.rows;
    assert_eq!(b.len(), n);
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l.get(k, i) * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    x
}

/// LU factorization with partial pivoting; `None` if singular to working
/// precision.
pub fn lu_factor<T: Scalar>(mut a: Mat<T>) -> Option<(Mat<T>, Vec<usize>)> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let mut piv: Vec<usize> = (0..n).collect();
    let tiny = real::<T>(1e-300);
    for k in 0..n {
        let mut best = k;
        let mut best_val = a.get(k, k).abs();
        for i in (k + 1)..n {
            let v = a.get(i, k).abs();
            if v > best_val {
                best = i;
                best_val = v;
            }
        }
        if !(best_val > tiny) || !best_val.is_finite() {
            return None;
        }
        if best != k {
            for j in 0..n {
                let tmp = a.get(k, j);
                a.set(k, j, a.get(best, j));
                a.set(best, j, tmp);
            }
            piv.swap(k, best);
        }
        let pivot = a.get(k, k);
        for i in (k + 1)..n {
            let factor = a.get(i, k) / pivot;
            a.set(i, k, factor);
            if factor != T::zero() {
                for j in (k + 1)..n {
                    let v = a.get(i, j) - factor * a.get(k, j);
                    a.set(i, j, v);
                }
            }
        }
    }
    Some((a, piv))
}

/// Solves `A x = b` from an LU factorization.
pub fn lu_solve_factored<T: Scalar>(lu: &Mat<T>, piv: &[usize], b: &[T]) -> Vec<T> {
    let n = lu.rows;
    let mut x: Vec<T> = piv.iter().map(|&p| b[p]).collect();
    for i in 1..n {
        let mut s = x[i];
        for k in 0..i {
            s -= lu.get(i, k) * x[k];
        }
        x[i] = s;
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= lu.get(i, k) * x[k];
        }
        x[i] = s / lu.get(i, i);
    }
    x
}

/// One-shot dense solve; `None` if singular.
pub fn lu_solve<T: Scalar>(a: Mat<T>, b: &[T]) -> Option<Vec<T>> {
    let (lu, piv) = lu_factor(a)?;
    Some(lu_solve_factored(&lu, &piv, b))
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix: `A = V D V^T`.
///
/// Returns the eigenvalues (unsorted, matching columns of `V`). Iterates
/// until the off-diagonal Frobenius norm falls below `tol` relative to the
/// matrix norm.
pub fn jacobi_eigen<T: Scalar>(a: &SymMatrix<T>, tol: T, max_sweeps: usize) -> (Vec<T>, Mat<T>) {
    let n = a.dim();
    let mut m = a.to_mat();
    let mut v = Mat::identity(n);
    if n <= 1 {
        return ((0..n).map(|i| m.get(i, i)).collect(), v);
    }
    let norm = {
        let mut s = T::zero();
        for i in 0..n {
            for j in 0..n {
                s += m.get(i, j) * m.get(i, j);
            }
        }
        s.sqrt() + real::<T>(1e-300)
    };
    let threshold = tol * norm;
    for _ in 0..max_sweeps {
        let mut off = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off += m.get(i, j) * m.get(i, j) * real::<T>(2.0);
            }
        }
        if off.sqrt() <= threshold {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq.abs() <= threshold * real::<T>(1e-3) {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (real::<T>(2.0) * apq);
                let t = {
                    let sign = if theta >= T::zero() { T::one() } else { -T::one() };
                    sign / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                // Rotate rows/cols p and q of M.
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    ((0..n).map(|i| m.get(i, i)).collect(), v)
}

/// Smallest eigenvalue via the Jacobi eigensolver.
pub fn min_eig<T: Scalar>(a: &SymMatrix<T>) -> T {
    let (evals, _) = jacobi_eigen(a, real::<T>(1e-12), 50);
    evals
        .into_iter()
        .fold(T::infinity(), |acc, v| acc.min(v))
}

/// Congruence `M^T U M` for symmetric `U`.
pub fn congr_tum<T: Scalar>(m: &Mat<T>, u: &SymMatrix<T>) -> SymMatrix<T> {
    let b = u.to_mat().matmul(m); // U M
    let n = m.cols;
    let mut out = SymMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = T::zero();
            for k in 0..m.rows {
                s += m.get(k, i) * b.get(k, j);
            }
            out.set(i, j, s);
        }
    }
    out
}

/// Congruence `M U M^T` for symmetric `U`.
pub fn congr_mut<T: Scalar>(m: &Mat<T>, u: &SymMatrix<T>) -> SymMatrix<T> {
    let b = m.matmul(&u.to_mat()); // M U
    let n = m.rows;
    let mut out = SymMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = T::zero();
            for k in 0..m.cols {
                s += b.get(i, k) * m.get(j, k);
            }
            out.set(i, j, s);
        }
    }
    out
}

/// Solves `A^T P + P A = -I` by Kronecker vectorization and dense LU.
///
/// Returns `None` when the Kronecker system is singular, the residual is
/// above 1e-8, or `P` fails the Cholesky positive-definiteness test — all of
/// which mean the origin is not certifiably exponentially stable.
pub fn solve_lyapunov<T: Scalar>(a: &Mat<T>) -> Option<SymMatrix<T>> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    assert!(n >= 1, "empty system");
    let nn = n * n;
    // Column-stacked vec(P): index i + j*n. vec(A^T P) = (I (x) A^T) vec(P),
    // vec(P A) = (A^T (x) I) vec(P).
    let mut k = Mat::zeros(nn, nn);
    for i in 0..n {
        for j in 0..n {
            let row = i + j * n;
            for l in 0..n {
                // (A^T P)_ij = sum_l A[l][i] P[l][j]
                k.add_to(row, l + j * n, a.get(l, i));
                // (P A)_ij = sum_l P[i][l] A[l][j]
                k.add_to(row, i + l * n, a.get(l, j));
            }
        }
    }
    let mut rhs = vec![T::zero(); nn];
    for i in 0..n {
        rhs[i + i * n] = -T::one();
    }
    let sol = lu_solve(k, &rhs)?;
    let mut p_mat = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            p_mat.set(i, j, sol[i + j * n]);
        }
    }
    let p = SymMatrix::from_mat_symmetrized(&p_mat);
    // Residual check: |A^T P + P A + I|_inf <= 1e-8.
    let pd = p.to_mat();
    let at = a.transpose();
    let res = at.matmul(&pd);
    let pa = pd.matmul(a);
    let mut worst = T::zero();
    for i in 0..n {
        for j in 0..n {
            let mut v = res.get(i, j) + pa.get(i, j);
            if i == j {
                v += T::one();
            }
            worst = worst.max(v.abs());
        }
    }
    if worst > real::<T>(1e-8) {
        return None;
    }
    cholesky(&p)?;
    Some(p)
}

/// Jacobian of the vector field at the origin (degree-1 coefficients).
pub fn linearize<T: Scalar>(sys: &PolySystem<T>) -> Mat<T> {
    let n = sys.nvars();
    let mut a = Mat::zeros(n, n);
    for (i, fi) in sys.f.iter().enumerate() {
        for j in 0..n {
            a.set(i, j, fi.coeff(&Monomial::var(n, j)));
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_system;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cholesky_identity_and_hand_case() {
        let id = SymMatrix::<f64>::identity(3);
        let l = cholesky(&id).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((l.get(i, j) - expect).abs() < 1e-14);
            }
        }
        // [[4,2],[2,2]] -> [[2,0],[1,1]]
        let m = SymMatrix::<f64>::from_fn(2, |i, j| [[4.0, 2.0], [2.0, 2.0]][i][j]);
        let l = cholesky(&m).unwrap();
        assert!((l.get(0, 0) - 2.0).abs() < 1e-14);
        assert!((l.get(1, 0) - 1.0).abs() < 1e-14);
        assert!((l.get(1, 1) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        // Eigenvalues 3 and -1.
        let m = SymMatrix::<f64>::from_fn(2, |i, j| if i == j { 1.0 } else { 2.0 });
        assert!(cholesky(&m).is_none());
    }

    #[test]
    fn cholesky_recovers_random_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.gen_range(1..6);
            let mut l = Mat::<f64>::zeros(n, n);
            for i in 0..n {
                for j in 0..i {
                    l.set(i, j, rng.gen_range(-1.0..1.0));
                }
                l.set(i, i, rng.gen_range(0.2..2.0));
            }
            let m = SymMatrix::<f64>::from_fn(n, |i, j| {
                let mut s = 0.0;
                for k in 0..n {
                    s += l.get(i, k) * l.get(j, k);
                }
                s
            });
            let lr = cholesky(&m).unwrap();
            for i in 0..n {
                for j in 0..=i {
                    assert!((lr.get(i, j) - l.get(i, j)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn jacobi_eigen_diagonalizes() {
        let m = SymMatrix::<f64>::from_fn(2, |i, j| if i == j { 1.0 } else { 2.0 });
        let (mut evals, _) = jacobi_eigen(&m, 1e-12, 50);
        evals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((evals[0] + 1.0).abs() < 1e-10);
        assert!((evals[1] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn lyapunov_diagonal_case() {
        let a = Mat::<f64>::from_rows(vec![vec![-1.0, 0.0], vec![0.0, -2.0]]);
        let p = solve_lyapunov(&a).unwrap();
        assert!((p.get(0, 0) - 0.5).abs() < 1e-12);
        assert!((p.get(1, 1) - 0.25).abs() < 1e-12);
        assert!(p.get(0, 1).abs() < 1e-12);
    }

    #[test]
    fn lyapunov_rejects_rotation() {
        let a = Mat::<f64>::from_rows(vec![vec![0.0, 1.0], vec![-1.0, 0.0]]);
        assert!(solve_lyapunov(&a).is_none());
    }

    #[test]
    fn lyapunov_accepts_example_linearization() {
        let src = "vars: x1 x2\n\
                   dot x1 = -0.42*x1 - 1.05*x2 - 2.3*x1^2 - 0.5*x1*x2 - x1^3\n\
                   dot x2 = 1.98*x1 + x1*x2\n";
        let sys = parse_system::<f64>(src).unwrap();
        let a = linearize(&sys);
        assert_eq!(a.get(0, 0), -0.42);
        assert_eq!(a.get(0, 1), -1.05);
        assert_eq!(a.get(1, 0), 1.98);
        assert_eq!(a.get(1, 1), 0.0);
        let p = solve_lyapunov(&a).expect("Example-1 linearization is Hurwitz");
        assert!(cholesky(&p).is_some());
    }

    #[test]
    fn linearize_skew_case() {
        let sys = parse_system::<f64>("vars: x1 x2\ndot x1 = x2\ndot x2 = -x1\n").unwrap();
        let a = linearize(&sys);
        assert_eq!(a.get(0, 1), 1.0);
        assert_eq!(a.get(1, 0), -1.0);
    }

    #[test]
    fn lyapunov_random_stable_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let n = rng.gen_range(2..6);
            // Random orthogonal similarity of a diagonal of negatives, built
            // from Givens rotations.
            let mut d = Mat::<f64>::zeros(n, n);
            for i in 0..n {
                d.set(i, i, -rng.gen_range(0.3..3.0));
            }
            let mut q = Mat::<f64>::identity(n);
            for _ in 0..(3 * n) {
                let i = rng.gen_range(0..n);
                let mut j = rng.gen_range(0..n);
                if i == j {
                    j = (j + 1) % n;
                }
                let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let (s, c) = theta.sin_cos();
                let mut g = Mat::<f64>::identity(n);
                g.set(i, i, c);
                g.set(j, j, c);
                g.set(i, j, -s);
                g.set(j, i, s);
                q = q.matmul(&g);
            }
            let a = q.transpose().matmul(&d).matmul(&q);
            let p = solve_lyapunov(&a).expect("stable matrix must admit P");
            assert!(cholesky(&p).is_some());
        }
    }
}
