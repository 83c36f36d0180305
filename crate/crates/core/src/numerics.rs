//! Dense linear algebra used by the whitening and feature pipelines.
//!
//! Everything here is deliberately small: a row-major `f64` [`Matrix`], an
//! HWC-ordered `f32` [`Tensor3`] for images, sample covariance, a symmetric
//! eigensolver and 2-D cross-channel correlation.

use crate::error::{Error, Result};

/// Dimension above which [`sym_eigen`] switches from cyclic Jacobi to
/// Householder tridiagonalisation followed by implicit QL.
pub const JACOBI_MAX_DIM: usize = 400;

/// Sweep cap for the cyclic Jacobi solver.
pub const JACOBI_MAX_SWEEPS: usize = 100;

const QL_MAX_ITER: usize = 60;

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("matrix entries must be finite".into()));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Shape("ragged rows".into()));
            }
            data.extend_from_slice(r);
        }
        Matrix::from_vec(rows.len(), cols, data)
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Matrix::zeros(n, n);
        for (i, v) in values.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::Shape(format!(
                "vector of length {} against {} columns",
                v.len(),
                self.cols
            )));
        }
        Ok((0..self.rows).map(|r| dot(self.row(r), v)).collect())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|m[i][j] - m[j][i]|`; `f64::INFINITY` for non-square input.
    pub fn asymmetry(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Shape("matrix dimensions differ".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Image-like tensor stored height-major, then width, with channels
/// interleaved: index of `(y, x, c)` is `(y * width + x) * channels + c`.
///
/// This is also the flattened patch layout shared by patch sampling, the
/// whitening kernels and the SNN receptive fields (see [`PATCH_LAYOUT`]).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

/// Flattened patch layout: row-major over height then width, channels
/// interleaved per pixel. Offset of `(y, x, c)` in a `p_h x p_w x C` patch is
/// `(y * p_w + x) * C + c`.
pub const PATCH_LAYOUT: &str = "hwc";

impl Tensor3 {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Tensor3 {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Self {
        Tensor3 {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if height * width * channels != data.len() {
            return Err(Error::Shape(format!(
                "{height}x{width}x{channels} tensor needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("tensor entries must be finite".into()));
        }
        Ok(Tensor3 {
            height,
            width,
            channels,
            data,
        })
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn offset(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[self.offset(y, x, c)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f32) {
        let o = self.offset(y, x, c);
        self.data[o] = v;
    }

    /// Copies the `p_h x p_w` window whose top-left corner is `(y, x)` into
    /// `out` using the shared patch layout.
    pub fn window_into(&self, y: usize, x: usize, p_h: usize, p_w: usize, out: &mut Vec<f32>) {
        out.clear();
        let row_len = p_w * self.channels;
        for dy in 0..p_h {
            let start = self.offset(y + dy, x, 0);
            out.extend_from_slice(&self.data[start..start + row_len]);
        }
    }

    pub fn window(&self, y: usize, x: usize, p_h: usize, p_w: usize) -> Tensor3 {
        let mut out = Vec::with_capacity(p_h * p_w * self.channels);
        self.window_into(y, x, p_h, p_w, &mut out);
        Tensor3 {
            height: p_h,
            width: p_w,
            channels: self.channels,
            data: out,
        }
    }

    /// Extracts a single channel as a `H x W x 1` tensor.
    pub fn channel(&self, c: usize) -> Tensor3 {
        let data = self.data.iter().skip(c).step_by(self.channels).copied().collect();
        Tensor3 {
            height: self.height,
            width: self.width,
            channels: 1,
            data,
        }
    }

    /// Stacks single-channel tensors of equal size into one tensor.
    pub fn stack_channels(planes: &[Tensor3]) -> Result<Tensor3> {
        let first = planes
            .first()
            .ok_or_else(|| Error::Shape("no channels to stack".into()))?;
        let (h, w) = (first.height, first.width);
        let total: usize = planes.iter().map(|p| p.channels).sum();
        if planes.iter().any(|p| p.height != h || p.width != w) {
            return Err(Error::Shape("channel planes differ in size".into()));
        }
        let mut out = Tensor3::zeros(h, w, total);
        for y in 0..h {
            for x in 0..w {
                let mut c_out = 0;
                for p in planes {
                    for c in 0..p.channels {
                        out.set(y, x, c_out, p.get(y, x, c));
                        c_out += 1;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v)).collect()
    }
}

/// Symmetric eigendecomposition: eigenvalues descending, eigenvectors as the
/// matching columns of `eigenvectors`.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl EigenResult {
    /// `V diag(λ) Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let s: f64 = (0..n)
                    .map(|k| v.get(i, k) * self.eigenvalues[k] * v.get(j, k))
                    .sum();
                out.set(i, j, s);
                out.set(j, i, s);
            }
        }
        out
    }
}

/// Sample mean and unbiased covariance of the rows of `samples`.
///
/// Accumulation is sequential over rows, so results are bit-reproducible.
/// The returned covariance is exactly symmetric.
pub fn covariance(samples: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let (n, d) = (samples.rows(), samples.cols());
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "covariance needs at least 2 samples, got {n}"
        )));
    }
    let mut mean = vec![0.0; d];
    for r in 0..n {
        for (m, v) in mean.iter_mut().zip(samples.row(r)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    let mut cov = Matrix::zeros(d, d);
    let mut centered = vec![0.0; d];
    for r in 0..n {
        for ((c, v), m) in centered.iter_mut().zip(samples.row(r)).zip(&mean) {
            *c = v - m;
        }
        accumulate_upper(&mut cov, &centered);
    }
    finish_covariance(&mut cov, n);
    Ok((mean, cov))
}

#[inline]
pub(crate) fn accumulate_upper(cov: &mut Matrix, centered: &[f64]) {
    let d = centered.len();
    for i in 0..d {
        let xi = centered[i];
        if xi == 0.0 {
            continue;
        }
        let row = &mut cov.data[i * d + i..(i + 1) * d];
        for (acc, xj) in row.iter_mut().zip(&centered[i..]) {
            *acc += xi * xj;
        }
    }
}

pub(crate) fn finish_covariance(cov: &mut Matrix, n: usize) {
    let d = cov.rows;
    let scale = 1.0 / (n as f64 - 1.0);
    for i in 0..d {
        for j in i..d {
            let v = cov.data[i * d + j] * scale;
            cov.data[i * d + j] = v;
            cov.data[j * d + i] = v;
        }
    }
}

/// Symmetric eigendecomposition.
///
/// Uses cyclic Jacobi up to [`JACOBI_MAX_DIM`] and Householder + implicit QL
/// beyond it. Both routes sort eigenvalues descending (stable on ties) and fix
/// each eigenvector's sign so its largest-magnitude entry is positive.
pub fn sym_eigen(m: &Matrix) -> Result<EigenResult> {
    if m.rows() <= JACOBI_MAX_DIM {
        sym_eigen_jacobi(m)
    } else {
        sym_eigen_tridiagonal(m)
    }
}

fn check_symmetric(m: &Matrix) -> Result<()> {
    if m.rows() != m.cols() {
        return Err(Error::Contract(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let tol = 1e-10 * m.max_abs().max(1.0);
    let asym = m.asymmetry();
    if asym > tol {
        return Err(Error::Contract(format!(
            "matrix is not symmetric (max |a_ij - a_ji| = {asym:e})"
        )));
    }
    Ok(())
}

/// Cyclic Jacobi rotations, row-by-row sweep order.
pub fn sym_eigen_jacobi(m: &Matrix) -> Result<EigenResult> {
    check_symmetric(m)?;
    let n = m.rows();
    let mut a = m.data.clone();
    // symmetrise from the upper triangle so rounding noise cannot bias sweeps
    for i in 0..n {
        for j in i + 1..n {
            a[j * n + i] = a[i * n + j];
        }
    }
    // rows of `vt` are eigenvectors
    let mut vt = Matrix::identity(n).data;

    let total: f64 = a.iter().map(|v| v * v).sum();
    let tiny = f64::EPSILON * f64::EPSILON * total.max(f64::MIN_POSITIVE);

    let mut converged = n < 2;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        if off <= tiny {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                if apq.abs() <= f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    let new_kp = c * akp - s * akq;
                    let new_kq = s * akp + c * akq;
                    a[k * n + p] = new_kp;
                    a[p * n + k] = new_kp;
                    a[k * n + q] = new_kq;
                    a[q * n + k] = new_kq;
                }
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                let (head, tail) = vt.split_at_mut(q * n);
                let row_p = &mut head[p * n..(p + 1) * n];
                let row_q = &mut tail[..n];
                for (vp, vq) in row_p.iter_mut().zip(row_q.iter_mut()) {
                    let (x, y) = (*vp, *vq);
                    *vp = c * x - s * y;
                    *vq = s * x + c * y;
                }
            }
        }
    }
    if !converged {
        return Err(Error::Convergence {
            sweeps: JACOBI_MAX_SWEEPS,
        });
    }
    let values: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    let vectors: Vec<&[f64]> = (0..n).map(|i| &vt[i * n..(i + 1) * n]).collect();
    Ok(finalize(values, &vectors))
}

/// Householder tridiagonalisation followed by implicit-shift QL.
///
/// Port of the EISPACK `tred2`/`tql2` pair with the eigenvector matrix kept
/// column-major so every inner loop runs over contiguous memory.
pub fn sym_eigen_tridiagonal(m: &Matrix) -> Result<EigenResult> {
    check_symmetric(m)?;
    let n = m.rows();
    if n == 0 {
        return Ok(EigenResult {
            eigenvalues: vec![],
            eigenvectors: Matrix::zeros(0, 0),
        });
    }
    // column-major: v[c * n + r] holds V[r][c]; lower triangle of the input
    let mut v = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..=r {
            let val = m.get(c, r);
            v[c * n + r] = val;
            v[r * n + c] = val;
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(n, &mut v, &mut d, &mut e);
    tql2(n, &mut v, &mut d, &mut e)?;
    let vectors: Vec<&[f64]> = (0..n).map(|c| &v[c * n..(c + 1) * n]).collect();
    Ok(finalize(d, &vectors))
}

#[allow(clippy::many_single_char_names)]
fn tred2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let idx = |r: usize, c: usize| c * n + r;
    for j in 0..n {
        d[j] = v[idx(n - 1, j)];
    }
    for i in (1..n).rev() {
        let scale: f64 = d[..i].iter().map(|x| x.abs()).sum();
        let mut h = 0.0;
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[idx(i - 1, j)];
                v[idx(i, j)] = 0.0;
                v[idx(j, i)] = 0.0;
            }
        } else {
            for dk in d[..i].iter_mut() {
                *dk /= scale;
                h += *dk * *dk;
            }
            let f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e[..i].iter_mut() {
                *ej = 0.0;
            }
            for j in 0..i {
                let f = d[j];
                v[idx(j, i)] = f;
                let mut g = e[j] + v[idx(j, j)] * f;
                let col = &v[j * n..j * n + n];
                for k in j + 1..i {
                    g += col[k] * d[k];
                    e[k] += col[k] * f;
                }
                e[j] = g;
            }
            let mut f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                let col = &mut v[j * n..j * n + n];
                for k in j..i {
                    col[k] -= f * e[k] + g * d[k];
                }
                d[j] = col[i - 1];
                col[i] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n - 1 {
        v[idx(n - 1, i)] = v[idx(i, i)];
        v[idx(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[idx(k, i + 1)] / h;
            }
            for j in 0..=i {
                let (left, right) = v.split_at_mut((i + 1) * n);
                let col_next = &right[..n];
                let col_j = &mut left[j * n..j * n + n];
                let g: f64 = (0..=i).map(|k| col_next[k] * col_j[k]).sum();
                for k in 0..=i {
                    col_j[k] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[idx(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[idx(n - 1, j)];
        v[idx(n - 1, j)] = 0.0;
    }
    v[idx(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

#[allow(clippy::many_single_char_names)]
fn tql2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > QL_MAX_ITER {
                    return Err(Error::Convergence { sweeps: iter });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d[l + 2..n].iter_mut() {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (left, right) = v.split_at_mut((i + 1) * n);
                    let col_i = &mut left[i * n..i * n + n];
                    let col_next = &mut right[..n];
                    for (vi, vn) in col_i.iter_mut().zip(col_next.iter_mut()) {
                        let hk = *vn;
                        *vn = s * *vi + c * hk;
                        *vi = c * *vi - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Sorts eigenpairs descending (stable by original index) and applies the
/// sign convention. `vectors[k]` is the eigenvector for `values[k]`.
fn finalize(values: Vec<f64>, vectors: &[&[f64]]) -> EigenResult {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    let mut eigenvectors = Matrix::zeros(n, n);
    let mut eigenvalues = Vec::with_capacity(n);
    for (col, &k) in order.iter().enumerate() {
        eigenvalues.push(values[k]);
        let vec = vectors[k];
        let mut pivot = 0;
        for (i, x) in vec.iter().enumerate() {
            if x.abs() > vec[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if vec[pivot] < 0.0 { -1.0 } else { 1.0 };
        for (row, x) in vec.iter().enumerate() {
            eigenvectors.set(row, col, sign * x);
        }
    }
    EigenResult {
        eigenvalues,
        eigenvectors,
    }
}

/// Sliding-window cross-correlation (no kernel flip) summed over channels.
///
/// Output is single-channel with size `(H + 2p - kh) / stride + 1` by
/// `(W + 2p - kw) / stride + 1`; out-of-image taps read zero.
pub fn correlate2d(image: &Tensor3, kernel: &Tensor3, stride: usize, padding: usize) -> Result<Tensor3> {
    let (h, w, c) = image.dims();
    let (kh, kw, kc) = kernel.dims();
    if kc != c {
        return Err(Error::Shape(format!(
            "kernel has {kc} channels, image has {c}"
        )));
    }
    if stride == 0 {
        return Err(Error::Shape("stride must be positive".into()));
    }
    if kh > h + 2 * padding || kw > w + 2 * padding || kh == 0 || kw == 0 {
        return Err(Error::Shape(format!(
            "{kh}x{kw} kernel does not fit a {h}x{w} image with padding {padding}"
        )));
    }
    let out_h = (h + 2 * padding - kh) / stride + 1;
    let out_w = (w + 2 * padding - kw) / stride + 1;
    let mut out = Tensor3::zeros(out_h, out_w, 1);
    let kdata = kernel.data();
    for oy in 0..out_h {
        for ox in 0..out_w {
            let top = (oy * stride) as isize - padding as isize;
            let left = (ox * stride) as isize - padding as isize;
            let mut acc = 0.0f64;
            for ky in 0..kh {
                let y = top + ky as isize;
                if y < 0 || y >= h as isize {
                    continue;
                }
                let x0 = left.max(0);
                let x1 = (left + kw as isize).min(w as isize);
                if x0 >= x1 {
                    continue;
                }
                let img_start = image.offset(y as usize, x0 as usize, 0);
                let img_end = image.offset(y as usize, (x1 - 1) as usize, 0) + c;
                let k_start = (ky * kw + (x0 - left) as usize) * c;
                let seg = &image.data()[img_start..img_end];
                let kseg = &kdata[k_start..k_start + seg.len()];
                acc += seg
                    .iter()
                    .zip(kseg)
                    .map(|(&a, &b)| f64::from(a) * f64::from(b))
                    .sum::<f64>();
            }
            out.set(oy, ox, 0, acc as f32);
        }
    }
    Ok(out)
}
