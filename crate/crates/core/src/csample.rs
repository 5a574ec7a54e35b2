//! Correlated sampling with shared randomness.
//!
//! Both parties read the same public stream of points `(u_i, alpha_i)` with
//! `u_i` drawn from a proposal and `alpha_i` uniform in `[0, 1)`. Alice
//! keeps the first point under her density, which makes her output exactly
//! distributed by it. Bob only knows his own density and narrows his
//! candidate set using hash bits of Alice's index.

use crate::dist::{check_probability_vector, mutual_information, JointDistribution};
use crate::error::{invalid, Error, Result};
use crate::rng::{bounded, derive_seed, mix64, unit_f64};

/// Maximum number of stream points either party may examine in one call.
pub const CANDIDATE_CAP: u64 = 10_000_000;
/// Default constant in the one-way payload budget.
pub const DEFAULT_C1: f64 = 4.0;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const P61: u64 = (1 << 61) - 1;

const LABEL_POINT_U: u64 = 1;
const LABEL_POINT_ALPHA: u64 = 2;
const LABEL_HASH: u64 = 3;
const LABEL_GLOBAL: u64 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SharedRandomness {
    seed: u64,
}

impl SharedRandomness {
    pub fn new(seed: u64) -> Self {
        SharedRandomness { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn key(&self, label: u64) -> u64 {
        derive_seed(self.seed, label)
    }

    fn pair_hash(&self, label: u64, index: u64) -> PairHash {
        let k = self.key(label).wrapping_add(index.wrapping_mul(GOLDEN));
        let w = |j: u64| mix64(k ^ mix64(j));
        PairHash {
            a: (w(1) as u128) << 64 | w(2) as u128,
            b: (w(3) as u128) << 64 | w(4) as u128,
        }
    }
}

/// `i`-th output of a SplitMix64 stream keyed by `key`.
#[inline]
fn counter_word(key: u64, i: u64) -> u64 {
    mix64(key.wrapping_add(i.wrapping_mul(GOLDEN)))
}

/// Multiply-add-shift hash from 64-bit keys to 64-bit words; pairwise
/// independent over the choice of `(a, b)`.
#[derive(Clone, Copy, Debug)]
struct PairHash {
    a: u128,
    b: u128,
}

impl PairHash {
    #[inline]
    fn word(&self, x: u64) -> u64 {
        (self.a.wrapping_mul(x as u128).wrapping_add(self.b) >> 64) as u64
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TranscriptStats {
    pub bits_alice: u64,
    pub bits_bob: u64,
    pub rounds: u32,
    /// Bob terminated with an output.
    pub success: bool,
}

/// Check bits per round for target error `eps`.
pub fn check_bits(eps: f64) -> Result<u32> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("eps = {eps} outside (0, 1)")));
    }
    Ok((1.0 / eps).log2().ceil() as u32 + 2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub alice: usize,
    pub bob: Option<usize>,
    pub stats: TranscriptStats,
}

impl Sample {
    pub fn agreed(&self) -> bool {
        self.bob == Some(self.alice)
    }
}

/// Interactive correlated sampling of `a ~ p` (Alice) and `b` (Bob, who
/// knows `q`).
///
/// Round `t` carries `ceil(log2(1/eps)) + 2` fresh hash bits of Alice's
/// index and one reply bit from Bob. Bob's round-`t` set is the first `K_t`
/// indices, in stream order, with `alpha_i < min(1, 2^t q(u_i))`, where
/// `K_0 = 1` and `K_t = ceil(ln(4/eps)) 4^t`. He stops when exactly one
/// index in the set matches every hash bit so far.
pub fn correlated_sample(p: &[f64], q: &[f64], eps: f64, shared: &SharedRandomness) -> Result<Sample> {
    if p.len() != q.len() || p.is_empty() {
        return Err(Error::DomainMismatch(format!("universes of size {} and {}", p.len(), q.len())));
    }
    check_probability_vector(p)?;
    check_probability_vector(q)?;
    if !p.iter().zip(q).any(|(a, b)| *a > 0.0 && *b > 0.0) {
        return Err(Error::EmptyOverlap);
    }
    let s = check_bits(eps)?;
    let n = p.len() as u64;
    let ku = shared.key(LABEL_POINT_U);
    let ka = shared.key(LABEL_POINT_ALPHA);
    let point = |i: u64| {
        (bounded(counter_word(ku, i), n) as usize, unit_f64(counter_word(ka, i)))
    };

    let mut alice = None;
    for i in 1..=CANDIDATE_CAP {
        let (u, alpha) = point(i);
        if alpha < p[u] {
            alice = Some((i, u));
            break;
        }
    }
    let (alice_index, alice_u) = alice.ok_or(Error::CandidateCap(CANDIDATE_CAP))?;

    let q_min = q.iter().cloned().filter(|w| *w > 0.0).fold(1.0, f64::min);
    let saturation = (1.0 / q_min).log2().ceil().max(0.0) as u32;
    let spread = (4.0 / eps).ln().ceil().max(1.0) as u64;
    let reach = ((n as f64 * spread as f64).log2() / 2.0).ceil() as u32;
    let max_round = saturation + reach + 2;

    let mut hashes: Vec<PairHash> = Vec::new();
    let mut alice_words: Vec<u64> = Vec::new();
    let mut stats = TranscriptStats::default();
    let mut bob = None;
    for t in 0..=max_round {
        let nbits = (s * (t + 1)) as usize;
        while hashes.len() * 64 < nbits {
            let h = shared.pair_hash(LABEL_HASH, hashes.len() as u64);
            alice_words.push(h.word(alice_index));
            hashes.push(h);
        }
        stats.rounds += 1;
        stats.bits_alice += s as u64;
        stats.bits_bob += 1;
        let set_size = if t == 0 {
            1
        } else {
            spread.saturating_mul(1u64 << (2 * t).min(62)).min(2 * n * spread)
        };
        let scale = 2.0f64.powi(t as i32);
        let mut members = 0u64;
        let mut matches = 0;
        let mut found = None;
        let mut i = 0u64;
        while members < set_size && i < CANDIDATE_CAP {
            i += 1;
            let (u, alpha) = point(i);
            if alpha >= (scale * q[u]).min(1.0) {
                continue;
            }
            members += 1;
            if prefix_matches(&hashes, &alice_words, i, nbits) {
                matches += 1;
                found = Some(u);
                if matches > 1 {
                    break;
                }
            }
        }
        if matches == 1 {
            bob = found;
            break;
        }
        if i >= CANDIDATE_CAP {
            break;
        }
    }
    stats.success = bob.is_some();
    Ok(Sample { alice: alice_u, bob, stats })
}

fn prefix_matches(hashes: &[PairHash], target: &[u64], i: u64, nbits: usize) -> bool {
    let full = nbits / 64;
    for j in 0..full {
        if hashes[j].word(i) != target[j] {
            return false;
        }
    }
    let rest = nbits % 64;
    if rest > 0 {
        let mask = (1u64 << rest) - 1;
        if (hashes[full].word(i) ^ target[full]) & mask != 0 {
            return false;
        }
    }
    true
}

/// A product of independent blocks sharing one public proposal per block.
///
/// Alice accepts a proposal `u` in block `b` with probability
/// `alice_accept(b mod period, u)`, so her output in the block is exactly
/// distributed by her density. Bob's level-`r` candidates are the points
/// with `alpha < min(1, 2^r bob_weight)`.
trait BlockModel: Sync {
    fn blocks(&self) -> usize;
    fn period(&self) -> usize;
    /// Proposal and uniform acceptance coin of stream point `c`.
    fn draw(&self, ku: u64, ka: u64, c: u64) -> (u32, f64);
    fn alice_accept(&self, column: usize, u: u32) -> f64;
    fn bob_weight(&self) -> f64;
}

/// `m` samples of an `n`-bit noisy hypercube, one block per bit.
struct NoisyBits {
    n: usize,
    m: usize,
    /// Acceptance of proposals 0 and 1 for each bit position of `x`.
    accept: Vec<[f64; 2]>,
    bob: f64,
}

impl NoisyBits {
    fn new(x: u64, n: u32, p: f64, m: usize) -> Self {
        let k = 2.0 * p.max(1.0 - p);
        let same = 2.0 * (1.0 - p) / k;
        let diff = 2.0 * p / k;
        let accept = (0..n)
            .map(|i| if x >> i & 1 == 1 { [diff, same] } else { [same, diff] })
            .collect();
        NoisyBits { n: n as usize, m, accept, bob: 1.0 / k }
    }
}

impl BlockModel for NoisyBits {
    fn blocks(&self) -> usize {
        self.m * self.n
    }

    fn period(&self) -> usize {
        self.n
    }

    #[inline]
    fn draw(&self, ku: u64, _ka: u64, c: u64) -> (u32, f64) {
        let w = counter_word(ku, c);
        ((w >> 63) as u32, unit_f64(w << 1))
    }

    #[inline]
    fn alice_accept(&self, column: usize, u: u32) -> f64 {
        self.accept[column][u as usize]
    }

    fn bob_weight(&self) -> f64 {
        self.bob
    }
}

/// `m` samples from a dense conditional, one block per sample, with Bob's
/// marginal as the proposal.
struct DenseSamples<'a> {
    cond: Vec<f64>,
    marginal: &'a [f64],
    cdf: &'a [f64],
    last: usize,
    envelope: f64,
    m: usize,
}

impl BlockModel for DenseSamples<'_> {
    fn blocks(&self) -> usize {
        self.m
    }

    fn period(&self) -> usize {
        1
    }

    #[inline]
    fn draw(&self, ku: u64, ka: u64, c: u64) -> (u32, f64) {
        let r = unit_f64(counter_word(ku, c));
        let u = self.cdf.partition_point(|v| *v <= r).min(self.last) as u32;
        (u, unit_f64(counter_word(ka, c)))
    }

    #[inline]
    fn alice_accept(&self, _column: usize, u: u32) -> f64 {
        let r = self.marginal[u as usize];
        if r > 0.0 {
            self.cond[u as usize] / (self.envelope * r)
        } else {
            0.0
        }
    }

    fn bob_weight(&self) -> f64 {
        1.0 / self.envelope
    }
}

/// Cumulative per-block hash width after round `r`.
#[inline]
fn block_width(r: u32) -> u32 {
    if r == 0 {
        0
    } else {
        1u32 << (r - 1).min(6)
    }
}

#[derive(Clone, Debug, PartialEq)]
struct BlockedRun {
    alice: Vec<u32>,
    bob: Vec<u32>,
    stats: TranscriptStats,
}

#[inline]
fn stream_counter(block: usize, index: u32) -> u64 {
    (block as u64) << 32 | index as u64
}

/// Blocked protocol. Round 0 sends `s` bits of a tuple hash of Alice's
/// indices; round `r >= 1` sends more per-block hash bits (cumulative width
/// 1, 2, 4, ..., 64) plus one more tuple-hash bit. Bob raises his level by
/// one per round, takes the first consistent candidate in each block, and
/// stops when his tuple passes the tuple-hash check. With `budget`, Alice
/// sends at most that many bits and Bob never replies.
fn run_blocked<M: BlockModel>(model: &M, eps: f64, shared: &SharedRandomness, budget: Option<u64>) -> Result<BlockedRun> {
    let s = check_bits(eps)?;
    let blocks = model.blocks();
    let period = model.period().max(1);
    let bob_weight = model.bob_weight();
    let saturation = (1.0 / bob_weight).log2().ceil().max(0.0) as u32;
    let max_round = saturation.max(7) + 1;
    if s + max_round > 60 {
        return Err(invalid(format!("eps = {eps} is too small for the tuple hash")));
    }
    if blocks as u64 >= 1 << 31 {
        return Err(Error::TooLarge(format!("{blocks} blocks")));
    }
    let ku = shared.key(LABEL_POINT_U);
    let ka = shared.key(LABEL_POINT_ALPHA);
    let kg = shared.key(LABEL_GLOBAL);
    let hash = shared.pair_hash(LABEL_HASH, 0);

    let coeff = |b: usize| counter_word(kg, b as u64) % P61;
    let offset = counter_word(kg, u64::MAX) % P61;
    let tuple_hash = |sum: u128| ((sum % P61 as u128) as u64 + offset) % P61;

    let mut alice_u = vec![0u32; blocks];
    let mut alice_h = vec![0u64; blocks];
    let mut alice_sum: u128 = 0;
    let mut scanned = 0u64;
    let mut column = 0usize;
    for (b, (au, ah)) in alice_u.iter_mut().zip(alice_h.iter_mut()).enumerate() {
        let mut i = 1u32;
        loop {
            let c = stream_counter(b, i);
            let (u, alpha) = model.draw(ku, ka, c);
            scanned += 1;
            if alpha < model.alice_accept(column, u) {
                alice_sum += coeff(b) as u128 * i as u128;
                *au = u;
                *ah = hash.word(c);
                break;
            }
            if scanned >= CANDIDATE_CAP {
                return Err(Error::CandidateCap(CANDIDATE_CAP));
            }
            i += 1;
        }
        column += 1;
        if column == period {
            column = 0;
        }
    }
    let alice_g = tuple_hash(alice_sum);

    let mut bob_z = vec![0u32; blocks];
    let mut bob_u = vec![0u32; blocks];
    let mut bob_h = vec![0u64; blocks];
    let mut bob_sum: u128 = 0;
    let mut stats = TranscriptStats::default();
    let mut bob_scanned = 0u64;
    'rounds: for r in 0..=max_round {
        let round_bits = if r == 0 {
            s as u64
        } else {
            blocks as u64 * (block_width(r) - block_width(r - 1)) as u64 + 1
        };
        if let Some(limit) = budget {
            if stats.bits_alice + round_bits > limit {
                stats.bits_alice = limit;
                break;
            }
        }
        stats.bits_alice += round_bits;
        stats.rounds += 1;
        if budget.is_none() {
            stats.bits_bob += 1;
        }
        let width = block_width(r);
        let mask = if width >= 64 { u64::MAX } else { (1u64 << width) - 1 };
        let threshold = (2.0f64.powi(r as i32) * bob_weight).min(1.0);
        // Once the previous level was saturated the candidate set no longer
        // grows, so the first consistent candidate can only move forward.
        let resume = r > saturation;
        let full = threshold >= 1.0;
        for (b, ah) in alice_h.iter().enumerate() {
            let target = ah & mask;
            if resume && bob_h[b] & mask == target {
                continue;
            }
            let mut i = if resume { bob_z[b] + 1 } else { 1 };
            loop {
                let c = stream_counter(b, i);
                let (u, alpha) = model.draw(ku, ka, c);
                bob_scanned += 1;
                if full || alpha < threshold {
                    let h = hash.word(c);
                    if h & mask == target {
                        let a = coeff(b) as u128;
                        bob_sum = bob_sum - a * bob_z[b] as u128 + a * i as u128;
                        bob_z[b] = i;
                        bob_u[b] = u;
                        bob_h[b] = h;
                        break;
                    }
                }
                if bob_scanned >= CANDIDATE_CAP {
                    break 'rounds;
                }
                i += 1;
            }
        }
        let check = s + r;
        if (tuple_hash(bob_sum) ^ alice_g) & ((1u64 << check) - 1) == 0 {
            stats.success = true;
            break;
        }
    }
    if budget.is_some() {
        // The schedule above is concatenated into one message.
        stats.rounds = 1;
    }
    Ok(BlockedRun { alice: alice_u, bob: bob_u, stats })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OneWayOutcome {
    pub alice: Vec<u64>,
    pub bob: Vec<u64>,
    pub stats: TranscriptStats,
    /// Payload budget in bits.
    pub budget_bits: u64,
}

impl OneWayOutcome {
    pub fn agreed(&self) -> bool {
        self.alice == self.bob
    }
}

#[derive(Clone, Debug)]
enum Proposal {
    Bits { n: u32, p: f64 },
    Dense { marginal: Vec<f64>, cdf: Vec<f64>, last: usize, envelope: f64 },
}

/// Samples `m` pairs from `mu(. | x)` for Alice and `m` correlated draws
/// from `mu_Y` for Bob, using one message from Alice of at most
/// `C1 (m I(X;Y) / eps + log2(1/eps) / eps)` bits.
#[derive(Clone, Debug)]
pub struct OneWaySampler {
    mu: JointDistribution,
    proposal: Proposal,
    information: f64,
    c1: f64,
}

impl OneWaySampler {
    pub fn new(mu: &JointDistribution) -> Result<Self> {
        let proposal = match mu.noise() {
            Some((n, p)) => Proposal::Bits { n, p },
            None => {
                let marginal = mu.marginal_y()?;
                let d = mu.domain();
                let mut envelope = 1.0f64;
                for x in 0..d.x_size() {
                    let row = mu.row_mass(x);
                    if row <= 0.0 {
                        continue;
                    }
                    for y in 0..d.y_size() {
                        let r = marginal[y as usize];
                        if r > 0.0 {
                            envelope = envelope.max(mu.mass(x, y) / row / r);
                        }
                    }
                }
                let mut acc = 0.0;
                let cdf: Vec<f64> = marginal.iter().map(|w| { acc += w; acc }).collect();
                let last = marginal.iter().rposition(|w| *w > 0.0).unwrap_or(0);
                Proposal::Dense { marginal, cdf, last, envelope }
            }
        };
        Ok(OneWaySampler { mu: mu.clone(), proposal, information: mutual_information(mu)?, c1: DEFAULT_C1 })
    }

    pub fn with_c1(mut self, c1: f64) -> Result<Self> {
        if !(c1 > 0.0) {
            return Err(invalid(format!("C1 = {c1} must be positive")));
        }
        self.c1 = c1;
        Ok(self)
    }

    pub fn mutual_information(&self) -> f64 {
        self.information
    }

    pub fn budget_bits(&self, m: usize, eps: f64) -> Result<u64> {
        check_bits(eps)?;
        let ell = self.c1 * (m as f64 * self.information / eps + (1.0 / eps).log2() / eps);
        Ok(ell.ceil() as u64)
    }

    /// One-way run: at most `budget_bits` from Alice, nothing from Bob.
    pub fn sample(&self, x: u64, m: usize, eps: f64, shared: &SharedRandomness) -> Result<OneWayOutcome> {
        let budget = self.budget_bits(m, eps)?;
        self.run(x, m, eps, shared, Some(budget), budget)
    }

    /// The same protocol with Bob replying each round and no budget.
    pub fn sample_interactive(&self, x: u64, m: usize, eps: f64, shared: &SharedRandomness) -> Result<OneWayOutcome> {
        let budget = self.budget_bits(m, eps)?;
        self.run(x, m, eps, shared, None, budget)
    }

    fn run(
        &self,
        x: u64,
        m: usize,
        eps: f64,
        shared: &SharedRandomness,
        limit: Option<u64>,
        budget_bits: u64,
    ) -> Result<OneWayOutcome> {
        let d = self.mu.domain();
        if x >= d.x_size() {
            return Err(invalid(format!("x = {x} outside X")));
        }
        if m == 0 {
            return Ok(OneWayOutcome {
                alice: vec![],
                bob: vec![],
                stats: TranscriptStats { success: true, rounds: limit.is_some() as u32, ..Default::default() },
                budget_bits,
            });
        }
        match &self.proposal {
            Proposal::Bits { n, p } => {
                let model = NoisyBits::new(x, *n, *p, m);
                let run = run_blocked(&model, eps, shared, limit)?;
                let assemble = |bits: &[u32]| -> Vec<u64> {
                    bits.chunks(*n as usize)
                        .map(|c| c.iter().enumerate().fold(0u64, |acc, (i, b)| acc | (*b as u64) << i))
                        .collect()
                };
                let (alice, bob) = if *n == 0 {
                    (vec![0; m], vec![0; m])
                } else {
                    (assemble(&run.alice), assemble(&run.bob))
                };
                Ok(OneWayOutcome { alice, bob, stats: run.stats, budget_bits })
            }
            Proposal::Dense { marginal, cdf, last, envelope } => {
                let cond = self.mu.conditional_y_given_x(x)?.to_vec()?;
                let model = DenseSamples { cond, marginal, cdf, last: *last, envelope: *envelope, m };
                let run = run_blocked(&model, eps, shared, limit)?;
                Ok(OneWayOutcome {
                    alice: run.alice.iter().map(|&u| u as u64).collect(),
                    bob: run.bob.iter().map(|&u| u as u64).collect(),
                    stats: run.stats,
                    budget_bits,
                })
            }
        }
    }
}

/// Convenience wrapper around [`OneWaySampler::sample`].
pub fn one_way_correlated_sample(
    mu: &JointDistribution,
    x: u64,
    m: usize,
    eps: f64,
    shared: &SharedRandomness,
) -> Result<OneWayOutcome> {
    OneWaySampler::new(mu)?.sample(x, m, eps, shared)
}

/// `q` uniform on `universe` points and `p` uniform on the first
/// `universe / 2^d`, so that `KL(p || q) = d` bits.
pub fn sharpened_pair(universe: usize, d: u32) -> Result<(Vec<f64>, Vec<f64>)> {
    if !universe.is_power_of_two() || (universe >> d) == 0 {
        return Err(invalid(format!("universe {universe} cannot be sharpened by {d} bits")));
    }
    let support = universe >> d;
    let q = vec![1.0 / universe as f64; universe];
    let p = (0..universe).map(|u| if u < support { 1.0 / support as f64 } else { 0.0 }).collect();
    Ok((p, q))
}

/// `D + 2 log2(1/eps) + sqrt(D) + 1`, the shape of the expected cost.
pub fn cost_shape(divergence: f64, eps: f64) -> f64 {
    divergence + 2.0 * (1.0 / eps).log2() + divergence.sqrt() + 1.0
}
