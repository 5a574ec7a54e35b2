//! Spectral and discrepancy bounds for the noisy parity family.
//!
//! The signed measure matrix `M` is indexed by pairs `(S, x)` and `(T, y)`
//! of `n`-bit strings. Index digit `i` in base 4 is `2 S_i + x_i`, so `M` is
//! the `n`-fold Kronecker power of a scaled 4x4 block.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::rng::rng_from_seed;

#[derive(Clone, Debug, PartialEq)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RealMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(invalid("ragged rows"));
        }
        Ok(RealMatrix { rows: r, cols: c, data: rows.concat() })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &RealMatrix) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DomainMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn mul_vec_transposed(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        RealMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn kron(&self, other: &RealMatrix) -> Self {
        let (r, c) = (self.rows * other.rows, self.cols * other.cols);
        Self::from_fn(r, c, |i, j| {
            self.get(i / other.rows, j / other.cols) * other.get(i % other.rows, j % other.cols)
        })
    }

    pub fn max_abs_diff(&self, other: &RealMatrix) -> Result<f64> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::DomainMismatch("shapes differ".into()));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }
}

fn check_a(a: f64) -> Result<()> {
    if !(a > 0.0 && a < 1.0) {
        return Err(invalid(format!("a = {a} outside (0, 1)")));
    }
    Ok(())
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 0.5) {
        return Err(invalid(format!("p = {p} outside (0, 1/2)")));
    }
    Ok(())
}

/// The 4x4 block with entries `a^([s != t] + [x != y]) (-1)^(t (x xor y))`.
pub fn build_n(a: f64) -> Result<RealMatrix> {
    check_a(a)?;
    let a2 = a * a;
    RealMatrix::from_rows(&[
        vec![1.0, a, a, -a2],
        vec![a, 1.0, -a2, a],
        vec![a, a2, 1.0, -a],
        vec![a2, a, -a, 1.0],
    ])
}

pub const POWER_TOLERANCE: f64 = 1e-12;
const POWER_MAX_ITERS: usize = 1_000_000;

/// Largest singular value of a square matrix, by power iteration on
/// `A^T A` with Rayleigh quotients.
pub fn spectral_norm(m: &RealMatrix) -> Result<f64> {
    if m.rows != m.cols {
        return Err(Error::NonSquare { rows: m.rows, cols: m.cols });
    }
    let n = m.rows;
    if n == 0 {
        return Ok(0.0);
    }
    let mut v = vec![1.0; n];
    v[0] += 0.5;
    normalize(&mut v);
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let mut w = m.mul_vec_transposed(&m.mul_vec(&v));
        let next: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        if normalize(&mut w) == 0.0 {
            return Ok(0.0);
        }
        v = w;
        if (next - lambda).abs() <= POWER_TOLERANCE * next.abs() {
            return Ok(next.max(0.0).sqrt());
        }
        lambda = next;
    }
    Ok(lambda.max(0.0).sqrt())
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// The two distinct eigenvalues `(lambda_1, lambda_2)` of `N^T N`.
pub fn lambda_closed_form(a: f64) -> Result<(f64, f64)> {
    check_a(a)?;
    let a2 = a * a;
    let a4 = a2 * a2;
    let base = 2.0 * a2 + a4 + 1.0;
    let cross = 2.0 * a * (2.0 * (a4 + 1.0)).sqrt();
    Ok((base + cross, base - cross))
}

/// Closed-form eigenvectors of `N^T N`; the first two belong to
/// `lambda_1`, the last two to `lambda_2`.
pub fn gram_eigenpairs(a: f64) -> Result<[([f64; 4], f64); 4]> {
    let (l1, l2) = lambda_closed_form(a)?;
    let a2 = a * a;
    let r = (2.0 * (a2 * a2 + 1.0)).sqrt();
    let d = 1.0 - a2;
    let s = (a2 + 1.0) / d;
    Ok([
        ([r / d, s, 1.0, 0.0], l1),
        ([s, r / d, 0.0, 1.0], l1),
        ([-r / d, s, 1.0, 0.0], l2),
        ([s, -r / d, 0.0, 1.0], l2),
    ])
}

/// Polynomial upper bound on `||N(a)||`.
pub fn spectral_bound_rhs(a: f64) -> f64 {
    let s2 = std::f64::consts::SQRT_2;
    1.0 + s2 * a + a * a + a.powi(4) / 2.0 + a.powi(5) / s2
}

pub const MAX_MATRIX_BITS: u32 = 5;

/// Row or column index of the pair `(S, x)`.
pub fn pair_index(set: u64, input: u64, n: u32) -> usize {
    (0..n).fold(0usize, |acc, i| {
        acc | (((set >> i & 1) * 2 + (input >> i & 1)) as usize) << (2 * i)
    })
}

/// Inverse of [`pair_index`].
pub fn pair_of_index(index: usize, n: u32) -> (u64, u64) {
    let (mut s, mut x) = (0u64, 0u64);
    for i in 0..n {
        let digit = (index >> (2 * i)) & 3;
        s |= ((digit >> 1) as u64) << i;
        x |= ((digit & 1) as u64) << i;
    }
    (s, x)
}

/// Signed measure matrix: entry `((S,x),(T,y))` is the probability of the
/// pair under the noisy set distribution times the noisy hypercube, signed
/// by `(-1)^F`. Built entry by entry.
pub fn build_m(n: u32, p: f64) -> Result<RealMatrix> {
    check_p(p)?;
    if n == 0 || n > MAX_MATRIX_BITS {
        return Err(Error::TooLarge(format!("n = {n}; need 1..={MAX_MATRIX_BITS}")));
    }
    let size = 1usize << (2 * n);
    let half = 0.5f64.powi(n as i32);
    let noisy = |d: u32| half * p.powi(d as i32) * (1.0 - p).powi((n - d) as i32);
    Ok(RealMatrix::from_fn(size, size, |i, j| {
        let (s, x) = pair_of_index(i, n);
        let (t, y) = pair_of_index(j, n);
        let weight = noisy((s ^ t).count_ones()) * noisy((x ^ y).count_ones());
        if (t & (x ^ y)).count_ones() % 2 == 1 {
            -weight
        } else {
            weight
        }
    }))
}

/// `t`-fold Kronecker power.
pub fn tensor_power(m: &RealMatrix, t: u32) -> Result<RealMatrix> {
    if t == 0 {
        return Ok(RealMatrix::from_fn(1, 1, |_, _| 1.0));
    }
    let size = (m.rows as u64).checked_pow(t).unwrap_or(u64::MAX);
    if size > 1 << 12 {
        return Err(Error::TooLarge(format!("tensor power with {size} rows")));
    }
    let mut out = m.clone();
    for _ in 1..t {
        out = out.kron(m);
    }
    Ok(out)
}

/// `M` written as a scaled Kronecker power of the 4x4 block.
pub fn build_m_tensor(n: u32, p: f64) -> Result<RealMatrix> {
    check_p(p)?;
    let nn = build_n(p / (1.0 - p))?;
    let scale = 0.25f64.powi(n as i32) * (1.0 - p).powi(2 * n as i32);
    Ok(tensor_power(&nn, n)?.scale(scale))
}

/// `max over row sets A, column sets B of |sum_{A x B} M|`, exact by
/// enumerating row sets (at most 20 rows).
pub fn rectangle_discrepancy_exact(m: &RealMatrix) -> Result<f64> {
    if m.rows > 20 {
        return Err(Error::TooLarge(format!("{} rows", m.rows)));
    }
    let mut best = 0.0f64;
    let mut col_sums = vec![0.0; m.cols];
    // Gray-code walk over row subsets.
    for k in 1u64..(1 << m.rows) {
        let flip = k.trailing_zeros() as usize;
        let gray = k ^ (k >> 1);
        let sign = if gray >> flip & 1 == 1 { 1.0 } else { -1.0 };
        for (c, a) in col_sums.iter_mut().zip(m.row(flip)) {
            *c += sign * a;
        }
        best = best.max(best_columns(&col_sums));
    }
    Ok(best)
}

fn best_columns(col_sums: &[f64]) -> f64 {
    let pos: f64 = col_sums.iter().filter(|c| **c > 0.0).sum();
    let neg: f64 = col_sums.iter().filter(|c| **c < 0.0).sum();
    pos.max(-neg)
}

/// Exact discrepancy of the `n = 1` signed measure matrix.
pub fn discrepancy_exact(n: u32, p: f64) -> Result<f64> {
    if n != 1 {
        return Err(invalid("exact discrepancy is only computed for n = 1"));
    }
    rectangle_discrepancy_exact(&build_m(1, p)?)
}

/// Local-search lower estimate of the rectangle discrepancy: alternate best
/// responses between row and column sets from random starts.
pub fn rectangle_discrepancy_search(m: &RealMatrix, restarts: usize, seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let mut best = 0.0f64;
    let mut order: Vec<usize> = (0..m.rows).collect();
    for _ in 0..restarts.max(1) {
        let mut rows: Vec<bool> = (0..m.rows).map(|_| rng.gen()).collect();
        for sign in [1.0, -1.0] {
            let mut value = 0.0f64;
            loop {
                let mut col_sums = vec![0.0; m.cols];
                for (i, _) in rows.iter().enumerate().filter(|(_, r)| **r) {
                    for (c, a) in col_sums.iter_mut().zip(m.row(i)) {
                        *c += a;
                    }
                }
                let cols: Vec<bool> = col_sums.iter().map(|c| sign * c > 0.0).collect();
                order.shuffle(&mut rng);
                let row_sums: Vec<f64> = (0..m.rows)
                    .map(|i| m.row(i).iter().zip(&cols).filter(|(_, c)| **c).map(|(a, _)| a).sum())
                    .collect();
                rows = row_sums.iter().map(|r| sign * r > 0.0).collect();
                let next: f64 = row_sums.iter().filter(|r| sign * **r > 0.0).map(|r| sign * r).sum();
                if next <= value + 1e-18 {
                    break;
                }
                value = next;
            }
            best = best.max(value);
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscrepancyInterval {
    pub lower: f64,
    pub upper: f64,
    pub exact: bool,
}

/// Bracket for the discrepancy: exact for `n = 1`, otherwise a search-based
/// lower estimate and the spectral upper bound.
pub fn discrepancy_interval(n: u32, p: f64, restarts: usize, seed: u64) -> Result<DiscrepancyInterval> {
    let upper = disc_spectral_bound(n, p)?;
    if n == 1 {
        let d = discrepancy_exact(1, p)?;
        return Ok(DiscrepancyInterval { lower: d, upper, exact: true });
    }
    let m = build_m(n, p)?;
    let lower = rectangle_discrepancy_search(&m, restarts, seed);
    Ok(DiscrepancyInterval { lower, upper, exact: false })
}

/// `(1-p)^(2n) ||N||^n`, an upper bound on the discrepancy.
pub fn disc_spectral_bound(n: u32, p: f64) -> Result<f64> {
    check_p(p)?;
    let norm = spectral_norm(&build_n(p / (1.0 - p))?)?;
    Ok((1.0 - p).powi(2 * n as i32) * norm.powi(n as i32))
}

/// Distributional lower bound `log2(2 eps / disc)`, clamped at zero.
pub fn cc_lower_bound(disc: f64, eps: f64) -> Result<f64> {
    if !(disc > 0.0) || !(0.0..=0.5).contains(&eps) {
        return Err(invalid(format!("disc = {disc}, eps = {eps}")));
    }
    if eps == 0.0 {
        return Ok(0.0);
    }
    Ok((2.0 * eps / disc).log2().max(0.0))
}

/// Exponent rate `log2(1 / bound) / (n p)` of the spectral bound.
pub fn gamma_rate(n: u32, p: f64) -> Result<f64> {
    let bound = disc_spectral_bound(n, p)?;
    Ok(-bound.log2() / (n as f64 * p))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub p: f64,
    pub n: u32,
    pub spectral_bound: f64,
    pub disc_exact: Option<f64>,
    pub cc_lb_bits: f64,
}

pub fn lowerbound_sweep(p_grid: &[f64], n_grid: &[u32], eps: f64, exec: Execution) -> Result<Vec<SweepRow>> {
    let cells: Vec<(f64, u32)> = p_grid.iter().flat_map(|&p| n_grid.iter().map(move |&n| (p, n))).collect();
    exec.map(cells.len(), |i| {
        let (p, n) = cells[i];
        let spectral_bound = disc_spectral_bound(n, p)?;
        let disc_exact = if n == 1 { Some(discrepancy_exact(1, p)?) } else { None };
        Ok(SweepRow { p, n, spectral_bound, disc_exact, cc_lb_bits: cc_lower_bound(spectral_bound, eps)? })
    })
    .into_iter()
    .collect()
}
