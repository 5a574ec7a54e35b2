//! Exact one-way communication complexity on small domains, by enumerating
//! every partition of `X` and giving each part its majority decider.

use crate::dist::JointDistribution;
use crate::error::{invalid, Error, Result};
use crate::model::{ceil_log2, distance_mu, BitTable, BoolFunction, OneWayProtocol};

pub const MAX_X_BITS: u32 = 3;
pub const MAX_Y_BITS: u32 = 4;

/// Tolerance when comparing errors against a target.
pub const ERROR_SLACK: f64 = 1e-12;

struct Weights {
    xs: usize,
    ys: usize,
    /// `w[b][x * ys + y] = mu(x, y) [f(x, y) = b]`
    w: [Vec<f64>; 2],
}

fn weights(f: &BoolFunction, mu: &JointDistribution) -> Result<Weights> {
    let d = f.domain();
    if d != mu.domain() {
        return Err(Error::DomainMismatch("function and distribution domains differ".into()));
    }
    if d.x_bits > MAX_X_BITS || d.y_bits > MAX_Y_BITS {
        return Err(Error::TooLarge(format!(
            "oracle needs |X| <= {} and |Y| <= {}",
            1 << MAX_X_BITS,
            1 << MAX_Y_BITS
        )));
    }
    let (xs, ys) = (d.x_size() as usize, d.y_size() as usize);
    let mut w = [vec![0.0; xs * ys], vec![0.0; xs * ys]];
    for x in 0..xs {
        for y in 0..ys {
            let b = f.eval(x as u64, y as u64) as usize;
            w[b][x * ys + y] = mu.mass(x as u64, y as u64);
        }
    }
    Ok(Weights { xs, ys, w })
}

impl Weights {
    /// Error of majority deciders for a partition given as block labels.
    fn partition_error(&self, labels: &[u32], blocks: usize) -> f64 {
        let mut acc = vec![[0.0f64; 2]; blocks * self.ys];
        for x in 0..self.xs {
            let base = labels[x] as usize * self.ys;
            for y in 0..self.ys {
                acc[base + y][0] += self.w[0][x * self.ys + y];
                acc[base + y][1] += self.w[1][x * self.ys + y];
            }
        }
        acc.iter().map(|[a, b]| a.min(*b)).sum()
    }

    fn majority(&self, labels: &[u32], blocks: usize) -> Vec<BitTable> {
        (0..blocks)
            .map(|blk| {
                BitTable::from_fn(self.ys, |y| {
                    let (mut w0, mut w1) = (0.0, 0.0);
                    for x in (0..self.xs).filter(|&x| labels[x] as usize == blk) {
                        w0 += self.w[0][x * self.ys + y];
                        w1 += self.w[1][x * self.ys + y];
                    }
                    w1 > w0
                })
            })
            .collect()
    }
}

/// Calls `visit(labels, blocks)` for every set partition of `0..n` into at
/// most `max_blocks` blocks, as restricted growth strings.
fn for_each_partition(n: usize, max_blocks: usize, mut visit: impl FnMut(&[u32], usize)) {
    fn rec(i: usize, used: usize, labels: &mut Vec<u32>, max_blocks: usize, visit: &mut dyn FnMut(&[u32], usize)) {
        if i == labels.len() {
            visit(labels, used);
            return;
        }
        let limit = (used + 1).min(max_blocks);
        for b in 0..limit {
            labels[i] = b as u32;
            rec(i + 1, used.max(b + 1), labels, max_blocks, visit);
        }
    }
    if n == 0 || max_blocks == 0 {
        return;
    }
    let mut labels = vec![0u32; n];
    rec(0, 0, &mut labels, max_blocks, &mut visit);
}

/// Smallest error achievable with at most `2^c` messages, for each cost
/// `c = 0..=ceil(log2 |X|)`.
pub fn best_error_by_cost(f: &BoolFunction, mu: &JointDistribution) -> Result<Vec<f64>> {
    let w = weights(f, mu)?;
    let max_cost = ceil_log2(w.xs as u64);
    Ok((0..=max_cost)
        .map(|c| {
            let mut best = f64::INFINITY;
            for_each_partition(w.xs, 1 << c, |labels, blocks| {
                best = best.min(w.partition_error(labels, blocks));
            });
            best
        })
        .collect())
}

/// Optimal protocol with at most `2^cost` messages.
pub fn best_protocol(f: &BoolFunction, mu: &JointDistribution, cost: u32) -> Result<(OneWayProtocol, f64)> {
    let w = weights(f, mu)?;
    let max_blocks = 1usize << cost.min(MAX_X_BITS);
    let mut best: Option<(Vec<u32>, usize, f64)> = None;
    for_each_partition(w.xs, max_blocks, |labels, blocks| {
        let e = w.partition_error(labels, blocks);
        if best.as_ref().is_none_or(|b| e < b.2) {
            best = Some((labels.to_vec(), blocks, e));
        }
    });
    let (labels, blocks, e) = best.ok_or_else(|| invalid("empty input space"))?;
    let deciders = w.majority(&labels, blocks);
    Ok((OneWayProtocol::new(f.domain(), labels, deciders)?, e))
}

/// Majority deciders for a fixed partition, with their error.
pub fn majority_protocol(
    f: &BoolFunction,
    mu: &JointDistribution,
    partition: &[u32],
) -> Result<(OneWayProtocol, f64)> {
    let w = weights(f, mu)?;
    if partition.len() != w.xs {
        return Err(Error::DomainMismatch("partition length".into()));
    }
    let blocks = partition.iter().max().map_or(0, |m| *m as usize + 1);
    let e = w.partition_error(partition, blocks);
    Ok((OneWayProtocol::new(f.domain(), partition.to_vec(), w.majority(partition, blocks))?, e))
}

/// Minimal number of bits for error at most `eps` under `mu`.
pub fn exact_one_way_cc(f: &BoolFunction, mu: &JointDistribution, eps: f64) -> Result<u32> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(invalid(format!("eps = {eps} outside [0, 1]")));
    }
    let errors = best_error_by_cost(f, mu)?;
    errors
        .iter()
        .position(|&e| e <= eps + ERROR_SLACK)
        .map(|c| c as u32)
        .ok_or_else(|| Error::Infeasible("no partition reaches the target error".into()))
}

/// Whether `mu(f != g) <= delta` and `g` has a `k`-bit protocol with error
/// at most `eps`.
pub fn certify_membership_owf(
    f: &BoolFunction,
    g: &BoolFunction,
    mu: &JointDistribution,
    k: u32,
    eps: f64,
    delta: f64,
) -> Result<bool> {
    if distance_mu(f, g, mu)? > delta + ERROR_SLACK {
        return Ok(false);
    }
    let errors = best_error_by_cost(g, mu)?;
    let c = (k as usize).min(errors.len() - 1);
    Ok(errors[c] <= eps + ERROR_SLACK)
}
