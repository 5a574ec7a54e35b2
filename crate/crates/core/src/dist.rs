//! Joint distributions over `X x Y`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{Domain, MAX_TABLE_BITS};

/// Largest per-side length for which a noisy hypercube may be materialized.
pub const MAX_MATERIALIZE_BITS: u32 = 7;

#[derive(Clone, Debug, PartialEq)]
pub enum JointDistribution {
    /// Row-major table, entry `x * |Y| + y`.
    Dense { domain: Domain, table: Vec<f64> },
    /// Uniform `x`, and `y` equal to `x` with each bit flipped independently
    /// with probability `p`. `p = 1/2` is the uniform product distribution.
    NoisyHypercube { n: u32, p: f64, by_distance: Vec<f64> },
}

fn sum_tolerance(len: usize) -> f64 {
    (len as f64 * 4e-16).max(1e-12)
}

pub fn check_probability_vector(v: &[f64]) -> Result<()> {
    if let Some(i) = v.iter().position(|w| !w.is_finite() || *w < 0.0) {
        return Err(invalid(format!("entry {i} is negative or not finite")));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > sum_tolerance(v.len()) {
        return Err(invalid(format!("probabilities sum to {s}")));
    }
    Ok(())
}

impl JointDistribution {
    pub fn dense(domain: Domain, table: Vec<f64>) -> Result<Self> {
        domain.check_table_size()?;
        if table.len() as u64 != domain.x_size() * domain.y_size() {
            return Err(Error::DomainMismatch(format!(
                "table of length {} for domain {}x{}",
                table.len(),
                domain.x_bits,
                domain.y_bits
            )));
        }
        check_probability_vector(&table)?;
        Ok(JointDistribution::Dense { domain, table })
    }

    /// Dense distribution from rows indexed by `x`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let xs = rows.len();
        let ys = rows.first().map_or(0, Vec::len);
        if !xs.is_power_of_two() || !ys.is_power_of_two() || rows.iter().any(|r| r.len() != ys) {
            return Err(invalid("rows must form a 2^a x 2^b table"));
        }
        let domain = Domain::new(xs.trailing_zeros(), ys.trailing_zeros())?;
        Self::dense(domain, rows.concat())
    }

    pub fn noisy_hypercube(n: u32, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(format!("flip probability {p} outside [0, 1]")));
        }
        Domain::square(n)?;
        let base = 0.5f64.powi(n as i32);
        let by_distance = (0..=n)
            .map(|d| base * p.powi(d as i32) * (1.0 - p).powi((n - d) as i32))
            .collect();
        Ok(JointDistribution::NoisyHypercube { n, p, by_distance })
    }

    pub fn uniform_product(n: u32) -> Result<Self> {
        Self::noisy_hypercube(n, 0.5)
    }

    pub fn domain(&self) -> Domain {
        match self {
            JointDistribution::Dense { domain, .. } => *domain,
            JointDistribution::NoisyHypercube { n, .. } => Domain { x_bits: *n, y_bits: *n },
        }
    }

    /// `(n, p)` when this is a noisy hypercube.
    pub fn noise(&self) -> Option<(u32, f64)> {
        match self {
            JointDistribution::NoisyHypercube { n, p, .. } => Some((*n, *p)),
            JointDistribution::Dense { .. } => None,
        }
    }

    #[inline]
    pub fn mass(&self, x: u64, y: u64) -> f64 {
        match self {
            JointDistribution::Dense { domain, table } => table[domain.index(x, y)],
            JointDistribution::NoisyHypercube { by_distance, .. } => {
                by_distance[(x ^ y).count_ones() as usize]
            }
        }
    }

    pub fn marginal_x(&self) -> Result<Vec<f64>> {
        let d = self.domain();
        match self {
            JointDistribution::Dense { table, .. } => Ok(table
                .chunks(d.y_size() as usize)
                .map(|row| row.iter().sum())
                .collect()),
            JointDistribution::NoisyHypercube { n, .. } => {
                d.check_table_size()?;
                Ok(vec![0.5f64.powi(*n as i32); d.x_size() as usize])
            }
        }
    }

    pub fn marginal_y(&self) -> Result<Vec<f64>> {
        let d = self.domain();
        match self {
            JointDistribution::Dense { table, .. } => {
                let ys = d.y_size() as usize;
                let mut out = vec![0.0; ys];
                for row in table.chunks(ys) {
                    for (o, w) in out.iter_mut().zip(row) {
                        *o += w;
                    }
                }
                Ok(out)
            }
            JointDistribution::NoisyHypercube { n, .. } => {
                d.check_table_size()?;
                Ok(vec![0.5f64.powi(*n as i32); d.y_size() as usize])
            }
        }
    }

    /// Mass of the row `x`.
    pub fn row_mass(&self, x: u64) -> f64 {
        match self {
            JointDistribution::Dense { domain, table } => {
                let ys = domain.y_size() as usize;
                let start = x as usize * ys;
                table[start..start + ys].iter().sum()
            }
            JointDistribution::NoisyHypercube { n, .. } => 0.5f64.powi(*n as i32),
        }
    }

    pub fn conditional_y_given_x(&self, x: u64) -> Result<Conditional> {
        let d = self.domain();
        if x >= d.x_size() {
            return Err(invalid(format!("x = {x} outside X")));
        }
        match self {
            JointDistribution::Dense { domain, table } => {
                let ys = domain.y_size() as usize;
                let row = &table[x as usize * ys..(x as usize + 1) * ys];
                let total: f64 = row.iter().sum();
                if total <= 0.0 {
                    return Err(Error::UndefinedConditional(x));
                }
                Ok(Conditional::Dense(row.iter().map(|w| w / total).collect()))
            }
            JointDistribution::NoisyHypercube { n, p, .. } => {
                Ok(Conditional::BitFlips { x, n: *n, p: *p })
            }
        }
    }

    /// Draws `(x, y)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (u64, u64) {
        match self {
            JointDistribution::Dense { domain, table } => {
                let i = sample_index(table, rng);
                ((i as u64) >> domain.y_bits, (i as u64) & (domain.y_size() - 1))
            }
            JointDistribution::NoisyHypercube { n, p, .. } => {
                let x = random_bits(*n, rng);
                (x, sample_noisy_copy(x, *n, *p, rng))
            }
        }
    }

    /// Dense copy; noisy hypercubes only up to 7 bits per side.
    pub fn materialize(&self) -> Result<JointDistribution> {
        match self {
            JointDistribution::Dense { .. } => Ok(self.clone()),
            JointDistribution::NoisyHypercube { n, .. } => {
                if *n > MAX_MATERIALIZE_BITS {
                    return Err(Error::TooLarge(format!(
                        "materializing a {n}-bit noisy hypercube"
                    )));
                }
                let d = self.domain();
                let table = (0..d.x_size() * d.y_size())
                    .map(|i| self.mass(i >> n, i & (d.y_size() - 1)))
                    .collect();
                Ok(JointDistribution::Dense { domain: d, table })
            }
        }
    }

    /// True when `mu(x, y) = mu_X(x) mu_Y(y)` everywhere, up to `tol`.
    pub fn is_product(&self, tol: f64) -> Result<bool> {
        if let Some((_, p)) = self.noise() {
            return Ok(p == 0.5);
        }
        let mx = self.marginal_x()?;
        let my = self.marginal_y()?;
        let d = self.domain();
        for x in 0..d.x_size() {
            for y in 0..d.y_size() {
                if (self.mass(x, y) - mx[x as usize] * my[y as usize]).abs() > tol {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    pub fn to_doc(&self) -> DistributionDoc {
        match self {
            JointDistribution::Dense { domain, table } => DistributionDoc::Dense {
                x_bits: domain.x_bits,
                y_bits: domain.y_bits,
                table: table.clone(),
            },
            JointDistribution::NoisyHypercube { n, p, .. } => {
                DistributionDoc::NoisyHypercube { n: *n, p: *p }
            }
        }
    }

    pub fn from_doc(doc: DistributionDoc) -> Result<Self> {
        match doc {
            DistributionDoc::Dense { x_bits, y_bits, table } => {
                Self::dense(Domain::new(x_bits, y_bits)?, table)
            }
            DistributionDoc::NoisyHypercube { n, p } => Self::noisy_hypercube(n, p),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_doc())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_doc(serde_json::from_str(s)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionDoc {
    Dense { x_bits: u32, y_bits: u32, table: Vec<f64> },
    NoisyHypercube { n: u32, p: f64 },
}

/// Distribution of `y` given a fixed `x`.
#[derive(Clone, Debug, PartialEq)]
pub enum Conditional {
    Dense(Vec<f64>),
    BitFlips { x: u64, n: u32, p: f64 },
}

impl Conditional {
    #[inline]
    pub fn mass(&self, y: u64) -> f64 {
        match self {
            Conditional::Dense(v) => v[y as usize],
            Conditional::BitFlips { x, n, p } => {
                let d = (x ^ y).count_ones() as i32;
                p.powi(d) * (1.0 - p).powi(*n as i32 - d)
            }
        }
    }

    pub fn to_vec(&self) -> Result<Vec<f64>> {
        match self {
            Conditional::Dense(v) => Ok(v.clone()),
            Conditional::BitFlips { n, .. } => {
                if *n > MAX_TABLE_BITS {
                    return Err(Error::TooLarge(format!("conditional over {n} bits")));
                }
                Ok((0..1u64 << n).map(|y| self.mass(y)).collect())
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            Conditional::Dense(v) => sample_index(v, rng) as u64,
            Conditional::BitFlips { x, n, p } => sample_noisy_copy(*x, *n, *p, rng),
        }
    }
}

/// Inverse-CDF draw from a probability vector.
pub fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

pub fn random_bits<R: Rng + ?Sized>(n: u32, rng: &mut R) -> u64 {
    if n == 0 {
        0
    } else {
        rng.gen::<u64>() >> (64 - n)
    }
}

/// Copy of `x` with each of its `n` bits flipped independently with probability `p`.
pub fn sample_noisy_copy<R: Rng + ?Sized>(x: u64, n: u32, p: f64, rng: &mut R) -> u64 {
    if p == 0.5 {
        return random_bits(n, rng);
    }
    let mut y = x;
    for i in 0..n {
        if rng.gen::<f64>() < p {
            y ^= 1 << i;
        }
    }
    y
}

/// Binary entropy in bits.
pub fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
    }
}

/// `KL(p || q)` in bits.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DomainMismatch(format!("lengths {} and {}", p.len(), q.len())));
    }
    let mut total = 0.0;
    for (i, (&a, &b)) in p.iter().zip(q).enumerate() {
        if a > 0.0 {
            if b <= 0.0 {
                return Err(Error::SupportViolation(i));
            }
            total += a * (a / b).log2();
        }
    }
    Ok(total)
}

/// `I(X; Y)` in bits.
pub fn mutual_information(mu: &JointDistribution) -> Result<f64> {
    match mu {
        JointDistribution::NoisyHypercube { n, p, .. } => Ok(*n as f64 * (1.0 - binary_entropy(*p))),
        JointDistribution::Dense { domain, table } => {
            let mx = mu.marginal_x()?;
            let my = mu.marginal_y()?;
            let mut total = 0.0;
            for x in 0..domain.x_size() {
                for y in 0..domain.y_size() {
                    let w = table[domain.index(x, y)];
                    if w > 0.0 {
                        total += w * (w / (mx[x as usize] * my[y as usize])).log2();
                    }
                }
            }
            Ok(total.max(0.0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn dense_marginal() {
        let mu = JointDistribution::from_rows(&[vec![0.5, 0.0], vec![0.25, 0.25]]).unwrap();
        assert_eq!(mu.marginal_x().unwrap(), vec![0.5, 0.5]);
        assert_eq!(mu.marginal_y().unwrap(), vec![0.75, 0.25]);
    }

    #[test]
    fn conditional_normalizes_row() {
        let mu = JointDistribution::from_rows(&[vec![0.2, 0.6], vec![0.1, 0.1]]).unwrap();
        let c = mu.conditional_y_given_x(0).unwrap().to_vec().unwrap();
        assert!((c[0] - 0.25).abs() < 1e-15 && (c[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn zero_row_is_undefined() {
        let mu = JointDistribution::from_rows(&[vec![0.5, 0.5], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(mu.conditional_y_given_x(1), Err(Error::UndefinedConditional(1))));
    }

    #[test]
    fn kl_known_value() {
        let d = kl_divergence(&[0.75, 0.25], &[0.5, 0.5]).unwrap();
        assert!((d - 0.188_721_875_540_867).abs() < 1e-12);
        assert!(matches!(kl_divergence(&[0.5, 0.5], &[1.0, 0.0]), Err(Error::SupportViolation(1))));
    }

    #[test]
    fn noisy_mi_closed_form_matches_dense() {
        let mu = JointDistribution::noisy_hypercube(3, 0.2).unwrap();
        let dense = mu.materialize().unwrap();
        let a = mutual_information(&mu).unwrap();
        let b = mutual_information(&dense).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!((a - 3.0 * (1.0 - binary_entropy(0.2))).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(JointDistribution::from_rows(&[vec![0.5, 0.6], vec![0.0, 0.0]]).is_err());
        assert!(JointDistribution::from_rows(&[vec![-0.5, 1.5], vec![0.0, 0.0]]).is_err());
        assert!(JointDistribution::noisy_hypercube(3, 1.5).is_err());
        assert!(matches!(
            JointDistribution::noisy_hypercube(8, 0.1).unwrap().materialize(),
            Err(Error::TooLarge(_))
        ));
    }

    #[test]
    fn empirical_flip_rate() {
        let mut rng = rng_from_seed(11);
        let mut flips = 0u64;
        let draws = 100_000u64;
        for _ in 0..draws {
            flips += sample_noisy_copy(0, 1, 0.3, &mut rng);
        }
        let rate = flips as f64 / draws as f64;
        assert!((rate - 0.3).abs() <= 0.01, "rate {rate}");
    }

    #[test]
    fn json_roundtrip() {
        let mu = JointDistribution::noisy_hypercube(8, 0.1).unwrap();
        let s = mu.to_json().unwrap();
        assert!(s.contains("\"kind\":\"noisy_hypercube\""));
        assert_eq!(JointDistribution::from_json(&s).unwrap(), mu);
        let d = JointDistribution::from_rows(&[vec![0.5, 0.0], vec![0.25, 0.25]]).unwrap();
        assert_eq!(JointDistribution::from_json(&d.to_json().unwrap()).unwrap(), d);
    }
}
