//! Agreement distillation: perturbed random functions, Hamming balls,
//! min-entropy audits and Chernoff tails.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::binary_entropy;
use crate::error::{invalid, Error, Result};
use crate::model::BitTable;

/// Largest `|Y|` for which strategies are audited exhaustively.
pub const MAX_AUDIT_SIZE: usize = 20;

/// Draws `(f, g)` with `f` uniform on `{0,1}^size_y` and `g` a copy of `f`
/// with each entry flipped independently with probability `rho`.
pub fn sample_d_rho<R: Rng + ?Sized>(size_y: usize, rho: f64, rng: &mut R) -> Result<(BitTable, BitTable)> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(invalid(format!("rho = {rho} outside [0, 1]")));
    }
    let f = BitTable::from_fn(size_y, |_| rng.gen::<bool>());
    let mut g = f.clone();
    for i in 0..size_y {
        if rng.gen::<f64>() < rho {
            g.flip(i);
        }
    }
    Ok((f, g))
}

pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Number of strings within Hamming distance `radius` of a fixed string.
pub fn hamming_ball_size(size_y: u64, radius: u64) -> Result<u128> {
    if size_y > 120 {
        return Err(Error::TooLarge(format!("|Y| = {size_y}")));
    }
    Ok((0..=radius.min(size_y)).map(|i| binomial(size_y, i)).sum())
}

/// `-log2 max_i p_i`.
pub fn min_entropy(dist: &[f64]) -> Result<f64> {
    crate::dist::check_probability_vector(dist)?;
    let m = dist.iter().cloned().fold(0.0, f64::max);
    Ok(-m.log2())
}

/// A map from Bob's noisy view `f'` to an output string, on `|Y| <= 20`
/// entries packed into a `u64`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    Identity,
    Constant { value: u64 },
    /// Nearest codeword, lowest index on ties.
    NearestCodeword { codewords: Vec<u64> },
    /// Explicit output for every input.
    Table { outputs: Vec<u64> },
}

impl Strategy {
    pub fn apply(&self, input: u64) -> Result<u64> {
        match self {
            Strategy::Identity => Ok(input),
            Strategy::Constant { value } => Ok(*value),
            Strategy::NearestCodeword { codewords } => codewords
                .iter()
                .min_by_key(|&&c| (c ^ input).count_ones())
                .copied()
                .ok_or_else(|| invalid("empty code")),
            Strategy::Table { outputs } => outputs
                .get(input as usize)
                .copied()
                .ok_or_else(|| invalid(format!("no output for input {input}"))),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Greedy covering code: every string of length `size_y` ends up within
/// `radius` of some codeword.
pub fn greedy_covering_code(size_y: usize, radius: usize) -> Result<Vec<u64>> {
    if size_y > 16 {
        return Err(Error::TooLarge(format!("covering code for |Y| = {size_y}")));
    }
    let total = 1usize << size_y;
    let mut covered = vec![false; total];
    let mut code = Vec::new();
    for w in 0..total {
        if covered[w] {
            continue;
        }
        code.push(w as u64);
        for (v, c) in covered.iter_mut().enumerate() {
            if (v ^ w).count_ones() as usize <= radius {
                *c = true;
            }
        }
    }
    Ok(code)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditReport {
    pub size_y: usize,
    pub radius: usize,
    /// `H_inf` of the output when the input is uniform.
    pub min_entropy: f64,
    /// `(1 - h(delta2)) |Y|`.
    pub bound: f64,
    pub distinct_outputs: usize,
}

impl AuditReport {
    pub fn holds(&self) -> bool {
        self.min_entropy >= self.bound - 1e-9
    }
}

/// Exact output distribution of `strategy` over uniform inputs, after
/// checking that every output lies within `floor(delta2 |Y|)` of its input.
pub fn agreement_entropy_audit(strategy: &Strategy, size_y: usize, delta2: f64) -> Result<AuditReport> {
    if size_y == 0 || size_y > MAX_AUDIT_SIZE {
        return Err(Error::TooLarge(format!("|Y| = {size_y}; need 1..={MAX_AUDIT_SIZE}")));
    }
    if !(0.0..=0.5).contains(&delta2) {
        return Err(invalid(format!("delta2 = {delta2} outside [0, 1/2]")));
    }
    let radius = (delta2 * size_y as f64 + 1e-9).floor() as usize;
    let total = 1u64 << size_y;
    let mut counts = std::collections::HashMap::new();
    for input in 0..total {
        let output = strategy.apply(input)?;
        if output >= total {
            return Err(invalid(format!("output {output:#b} has more than {size_y} bits")));
        }
        let distance = (input ^ output).count_ones() as usize;
        if distance > radius {
            return Err(Error::DistanceViolation { input, output, distance, bound: radius });
        }
        *counts.entry(output).or_insert(0u64) += 1;
    }
    let max = counts.values().copied().max().unwrap_or(1);
    Ok(AuditReport {
        size_y,
        radius,
        min_entropy: size_y as f64 - (max as f64).log2(),
        bound: (1.0 - binary_entropy(delta2)) * size_y as f64,
        distinct_outputs: counts.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Tail {
    /// `Pr[X <= (1 - delta) mean]`.
    Lower { delta: f64 },
    /// `Pr[X >= (1 + delta) mean]`.
    Upper { delta: f64 },
    /// `Pr[X - mean >= a]` for a sum of `n` variables in `[0, 1]`.
    Additive { a: f64 },
}

pub fn chernoff_bound(n: u64, mean: f64, tail: Tail) -> Result<f64> {
    if !(mean >= 0.0) || mean > n as f64 {
        return Err(invalid(format!("mean {mean} outside [0, {n}]")));
    }
    match tail {
        Tail::Lower { delta } => {
            if !(0.0..1.0).contains(&delta) {
                return Err(invalid(format!("delta = {delta} outside [0, 1)")));
            }
            Ok((-delta * delta * mean / 2.0).exp())
        }
        Tail::Upper { delta } => {
            if !(0.0..=1.0).contains(&delta) {
                return Err(invalid(format!("delta = {delta} outside [0, 1]")));
            }
            Ok((-delta * delta * mean / 3.0).exp())
        }
        Tail::Additive { a } => {
            if a < 0.0 || n == 0 {
                return Err(invalid(format!("a = {a}, n = {n}")));
            }
            Ok((-2.0 * a * a / n as f64).exp())
        }
    }
}

/// Empirical frequency of the tail event for `Binomial(n, prob)`.
pub fn empirical_tail<R: Rng + ?Sized>(n: u64, prob: f64, tail: Tail, samples: u64, rng: &mut R) -> f64 {
    let mean = n as f64 * prob;
    let mut hits = 0u64;
    for _ in 0..samples {
        let x = (0..n).filter(|_| rng.gen::<f64>() < prob).count() as f64;
        let hit = match tail {
            Tail::Lower { delta } => x <= (1.0 - delta) * mean,
            Tail::Upper { delta } => x >= (1.0 + delta) * mean,
            Tail::Additive { a } => x - mean >= a,
        };
        hits += hit as u64;
    }
    hits as f64 / samples as f64
}

/// Reported thresholds for agreement with noise `delta`: error must stay
/// below `delta / 6` and success probability above `exp(-delta |Y| / 6)`.
pub fn agreement_thresholds(delta: f64, size_y: usize) -> (f64, f64) {
    (delta / 6.0, (-delta * size_y as f64 / 6.0).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_example() {
        assert_eq!(hamming_ball_size(12, 3).unwrap(), 299);
        assert!(299.0 <= 2f64.powf(binary_entropy(0.25) * 12.0));
    }

    #[test]
    fn min_entropy_example() {
        assert!((min_entropy(&[0.5, 0.25, 0.25]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn chernoff_example() {
        let b = chernoff_bound(100, 50.0, Tail::Additive { a: 20.0 }).unwrap();
        assert!((b - (-8f64).exp()).abs() < 1e-15);
        assert!(chernoff_bound(100, 50.0, Tail::Lower { delta: 1.5 }).is_err());
    }

    #[test]
    fn identity_and_covering_code_pass() {
        let id = agreement_entropy_audit(&Strategy::Identity, 10, 0.2).unwrap();
        assert_eq!(id.min_entropy, 10.0);
        let code = greedy_covering_code(10, 2).unwrap();
        let r = agreement_entropy_audit(&Strategy::NearestCodeword { codewords: code }, 10, 0.2).unwrap();
        assert!(r.holds());
        assert!(r.min_entropy >= 10.0 - 56f64.log2() - 1e-12);
    }

    #[test]
    fn constant_strategy_names_violator() {
        match agreement_entropy_audit(&Strategy::Constant { value: 0 }, 6, 0.2) {
            Err(Error::DistanceViolation { input, distance, bound, .. }) => {
                assert_eq!(bound, 1);
                assert_eq!(distance, input.count_ones() as usize);
                assert!(distance > 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn strategy_json() {
        let s = Strategy::NearestCodeword { codewords: vec![0, 1023] };
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(Strategy::from_json(&text).unwrap(), s);
    }
}
