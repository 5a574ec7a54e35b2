//! One-way protocols when Alice holds `f` and Bob holds a nearby `g`.
//!
//! Alice and Bob share `m` correlated samples from `mu(. | x)`. Alice sends
//! `f_x` on her samples; Bob picks the decider of `g`'s protocol that
//! disagrees least with those bits and applies it to `y`.

use rand::Rng;

use crate::csample::{OneWayOutcome, OneWaySampler, SharedRandomness};
use crate::dist::JointDistribution;
use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::model::{distance_mu, protocol_error, BitTable, BoolFunction, Domain, OneWayProtocol};
use crate::rng::{derive_seed, stream_rng};
use crate::stats::wilson_interval;

/// Tolerance when certifying distances and errors.
pub const CERTIFY_SLACK: f64 = 1e-12;

const SHARED_STREAM: u64 = 0x5348_4152_4544;

/// Smallest `m` with `2^k exp(-theta^2 m / 75) <= 2 theta / 5`.
pub fn choose_m(k: u32, theta: f64) -> Result<usize> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(invalid(format!("theta = {theta} outside (0, 1)")));
    }
    if k > 60 {
        return Err(invalid(format!("k = {k} is too large")));
    }
    let ok = |m: f64| k as f64 * std::f64::consts::LN_2 - theta * theta * m / 75.0 <= (2.0 * theta / 5.0).ln();
    let guess = (75.0 / (theta * theta) * (k as f64 * std::f64::consts::LN_2 + (2.5 / theta).ln())).ceil();
    let mut m = guess.max(0.0);
    while m > 0.0 && ok(m - 1.0) {
        m -= 1.0;
    }
    while !ok(m) {
        m += 1.0;
    }
    Ok(m as usize)
}

/// Error target passed to correlated sampling.
pub fn sampling_eps(theta: f64) -> f64 {
    (theta / 10.0).powi(2)
}

#[derive(Clone, Debug)]
pub struct UncertainInstance {
    mu: JointDistribution,
    protocol: OneWayProtocol,
    g: BoolFunction,
    f: BoolFunction,
    k: u32,
    eps: f64,
    delta: f64,
    sampler: OneWaySampler,
}

impl UncertainInstance {
    /// Checks that `protocol` uses at most `2^k` messages, computes `g` with
    /// error at most `eps`, and that `mu(f != g) <= delta`.
    pub fn new(
        mu: JointDistribution,
        protocol: OneWayProtocol,
        g: BoolFunction,
        f: BoolFunction,
        k: u32,
        eps: f64,
        delta: f64,
    ) -> Result<Self> {
        if !protocol.fits_budget(k) {
            return Err(Error::Infeasible(format!(
                "{} messages exceed the {k}-bit budget",
                protocol.message_count()
            )));
        }
        let perr = protocol_error(&protocol, &g, &mu)?;
        if perr > eps + CERTIFY_SLACK {
            return Err(Error::Infeasible(format!("protocol error {perr} exceeds eps = {eps}")));
        }
        let dist = distance_mu(&f, &g, &mu)?;
        if dist > delta + CERTIFY_SLACK {
            return Err(Error::Infeasible(format!("distance {dist} exceeds delta = {delta}")));
        }
        let g = g.tabulate()?;
        let f = f.tabulate()?;
        let sampler = OneWaySampler::new(&mu)?;
        Ok(UncertainInstance { mu, protocol, g, f, k, eps, delta, sampler })
    }

    pub fn mu(&self) -> &JointDistribution {
        &self.mu
    }

    pub fn protocol(&self) -> &OneWayProtocol {
        &self.protocol
    }

    pub fn f(&self) -> &BoolFunction {
        &self.f
    }

    pub fn g(&self) -> &BoolFunction {
        &self.g
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn sampler(&self) -> &OneWaySampler {
        &self.sampler
    }

    pub fn domain(&self) -> Domain {
        self.mu.domain()
    }

    /// Exact conditional quantities for a fixed `x`.
    pub fn conditional_profile(&self, x: u64) -> Result<ConditionalProfile> {
        let cond = self.mu.conditional_y_given_x(x)?;
        let ys = self.domain().y_size();
        let own = self.protocol.message(x);
        let mut delta_x = 0.0;
        let mut eps_x = 0.0;
        let mut gamma = vec![0.0; self.protocol.message_count()];
        for y in 0..ys {
            let w = cond.mass(y);
            if w == 0.0 {
                continue;
            }
            let fv = self.f.eval(x, y);
            let gv = self.g.eval(x, y);
            if fv != gv {
                delta_x += w;
            }
            if gv != self.protocol.decide(own, y) {
                eps_x += w;
            }
            for (i, gi) in gamma.iter_mut().enumerate() {
                if self.protocol.decide(i, y) != fv {
                    *gi += w;
                }
            }
        }
        Ok(ConditionalProfile { own_message: own, delta_x, eps_x, gamma })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalProfile {
    pub own_message: usize,
    /// `Pr[f_x != g_x]` under `mu(. | x)`.
    pub delta_x: f64,
    /// `Pr[g_x != B_{pi(x)}]` under `mu(. | x)`.
    pub eps_x: f64,
    /// `Pr[f_x != B_i]` under `mu(. | x)`, for every message `i`.
    pub gamma: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub output: bool,
    /// Correlated-sampling payload plus the `m` answer bits.
    pub bits: u64,
    pub payload_bits: u64,
    pub m: usize,
    /// Empirical disagreement of each decider with Alice's bits.
    pub errors: Vec<f64>,
    pub i_min: usize,
    pub sampling_ok: bool,
}

/// One run of the protocol on input `(x, y)`.
pub fn run_algorithm1(
    inst: &UncertainInstance,
    x: u64,
    y: u64,
    theta: f64,
    shared: &SharedRandomness,
) -> Result<RunResult> {
    let d = inst.domain();
    if x >= d.x_size() || y >= d.y_size() {
        return Err(invalid(format!("input ({x}, {y}) outside the domain")));
    }
    let m = choose_m(inst.k, theta)?;
    let samples = inst.sampler.sample(x, m, sampling_eps(theta), shared)?;
    Ok(bob_step(inst, x, y, &samples))
}

/// Alice's answers on her samples and Bob's decision on his.
fn bob_step(inst: &UncertainInstance, x: u64, y: u64, samples: &OneWayOutcome) -> RunResult {
    let m = samples.alice.len();
    let sampling_ok = samples.stats.success && samples.agreed();
    let mut counts = vec![[0u32; 2]; inst.domain().y_size() as usize];
    let mut touched = Vec::new();
    for (a, b) in samples.alice.iter().zip(&samples.bob) {
        let bit = inst.f.eval(x, *a) as usize;
        let c = &mut counts[*b as usize];
        if c[0] == 0 && c[1] == 0 {
            touched.push(*b);
        }
        c[bit] += 1;
    }
    let errors: Vec<f64> = (0..inst.protocol.message_count())
        .map(|i| {
            let wrong: u64 = touched
                .iter()
                .map(|&yb| counts[yb as usize][!inst.protocol.decide(i, yb) as usize] as u64)
                .sum();
            wrong as f64 / m.max(1) as f64
        })
        .collect();
    let mut i_min = 0;
    for (i, e) in errors.iter().enumerate() {
        if *e < errors[i_min] {
            i_min = i;
        }
    }
    RunResult {
        output: inst.protocol.decide(i_min, y),
        bits: samples.stats.bits_alice + m as u64,
        payload_bits: samples.stats.bits_alice,
        m,
        errors,
        i_min,
        sampling_ok,
    }
}

/// Random instance: a uniform partition of `X` into `2^k` parts with random
/// deciders, corrupted on the lightest points up to mass `eps` to give `g`,
/// and `f` equal to `g` except on a random set of mass at most `delta`.
pub fn generate_instance<R: Rng + ?Sized>(
    mu: &JointDistribution,
    k: u32,
    eps: f64,
    delta: f64,
    rng: &mut R,
) -> Result<UncertainInstance> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::Infeasible(format!("delta = {delta} must lie in [0, 1)")));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::Infeasible(format!("eps = {eps} must lie in [0, 1)")));
    }
    if k > 20 {
        return Err(Error::TooLarge(format!("k = {k}")));
    }
    let d = mu.domain();
    d.check_table_size()?;
    let parts = 1usize << k;
    let partition: Vec<u32> = (0..d.x_size()).map(|_| rng.gen_range(0..parts) as u32).collect();
    let deciders: Vec<BitTable> = (0..parts)
        .map(|_| BitTable::from_fn(d.y_size() as usize, |_| rng.gen::<bool>()))
        .collect();
    let protocol = OneWayProtocol::new(d, partition, deciders)?;
    let mut table = match BoolFunction::Protocol(protocol.clone()).tabulate()? {
        BoolFunction::Table { table, .. } => table,
        _ => unreachable!("tabulate returns a table"),
    };
    let size = (d.x_size() * d.y_size()) as usize;
    let mass = |i: usize| mu.mass(i as u64 >> d.y_bits, i as u64 & (d.y_size() - 1));

    if eps > 0.0 {
        let mut order: Vec<(f64, usize)> = (0..size).map(|i| (mass(i), i)).filter(|(w, _)| *w > 0.0).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut used = 0.0;
        for (w, i) in order {
            if used + w > eps {
                break;
            }
            used += w;
            table.flip(i);
        }
    }
    let g = BoolFunction::table(d, table.clone())?;

    if delta > 0.0 {
        // Weighted random order: ascending -ln(U) / w.
        let mut order: Vec<(f64, usize, f64)> = (0..size)
            .filter_map(|i| {
                let w = mass(i);
                (w > 0.0).then(|| {
                    let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
                    (-u.ln() / w, i, w)
                })
            })
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut used = 0.0;
        for (_, i, w) in order {
            if used + w <= delta {
                used += w;
                table.flip(i);
            }
        }
    }
    let f = BoolFunction::table(d, table)?;
    UncertainInstance::new(mu.clone(), protocol, g, f, k, eps, delta)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TrialRecord {
    pub trial: u64,
    pub x: u64,
    pub y: u64,
    pub output: bool,
    pub truth: bool,
    pub correct: bool,
    pub bits: u64,
    pub sampling_ok: bool,
}

/// Runs `trials` independent trials; trial `t` uses streams derived from
/// `(seed, t)` only.
pub fn run_trials(
    inst: &UncertainInstance,
    theta: f64,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<Vec<TrialRecord>> {
    Ok(run_trials_shared(&[inst], theta, trials, seed, exec)?.pop().unwrap_or_default())
}

/// [`run_trials`] for several instances over the same distribution and
/// budget `k`. Trial `t` draws the same input and correlated samples for
/// every instance, so each instance sees exactly the trials it would see
/// alone, and the sampling work is shared.
pub fn run_trials_shared(
    instances: &[&UncertainInstance],
    theta: f64,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<Vec<Vec<TrialRecord>>> {
    if trials == 0 {
        return Err(Error::NoTrials);
    }
    let Some(first) = instances.first() else {
        return Ok(Vec::new());
    };
    if instances.iter().any(|i| i.k != first.k || i.mu != first.mu) {
        return Err(invalid("shared trials need one distribution and one budget k"));
    }
    let m = choose_m(first.k, theta)?;
    let eps_cs = sampling_eps(theta);
    let shared_master = derive_seed(seed, SHARED_STREAM);
    let per_trial = exec.map(trials as usize, |t| -> Result<Vec<TrialRecord>> {
        let t = t as u64;
        let mut rng = stream_rng(seed, t);
        let (x, y) = first.mu.sample(&mut rng);
        let shared = SharedRandomness::new(derive_seed(shared_master, t));
        let samples = first.sampler.sample(x, m, eps_cs, &shared)?;
        Ok(instances
            .iter()
            .map(|inst| {
                let run = bob_step(inst, x, y, &samples);
                let truth = inst.g.eval(x, y);
                TrialRecord {
                    trial: t,
                    x,
                    y,
                    output: run.output,
                    truth,
                    correct: run.output == truth,
                    bits: run.bits,
                    sampling_ok: run.sampling_ok,
                }
            })
            .collect())
    });
    let mut out = vec![Vec::with_capacity(trials as usize); instances.len()];
    for records in per_trial {
        for (dst, r) in out.iter_mut().zip(records?) {
            dst.push(r);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorEstimate {
    pub error: f64,
    pub mean_bits: f64,
    /// Half-width of the 95% Wilson interval for the error.
    pub half_width: f64,
    pub trials: u64,
    pub sampling_failures: u64,
}

pub fn summarize(records: &[TrialRecord]) -> Result<ErrorEstimate> {
    if records.is_empty() {
        return Err(Error::NoTrials);
    }
    let n = records.len() as u64;
    let wrong = records.iter().filter(|r| !r.correct).count() as u64;
    let bits: u64 = records.iter().map(|r| r.bits).sum();
    Ok(ErrorEstimate {
        error: wrong as f64 / n as f64,
        mean_bits: bits as f64 / n as f64,
        half_width: wilson_interval(wrong, n).1,
        trials: n,
        sampling_failures: records.iter().filter(|r| !r.sampling_ok).count() as u64,
    })
}

/// Error estimates for several instances sharing trials; see
/// [`run_trials_shared`].
pub fn estimate_shared(
    instances: &[&UncertainInstance],
    theta: f64,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<Vec<ErrorEstimate>> {
    run_trials_shared(instances, theta, trials, seed, exec)?
        .iter()
        .map(|r| summarize(r))
        .collect()
}

pub fn estimate_uncertain_error(
    inst: &UncertainInstance,
    theta: f64,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<ErrorEstimate> {
    summarize(&run_trials(inst, theta, trials, seed, exec)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn choose_m_examples() {
        assert_eq!(choose_m(0, 0.5).unwrap(), 483);
        assert_eq!(choose_m(4, 0.2).unwrap(), 9935);
        assert_eq!(choose_m(2, 0.3).unwrap(), 2923);
        assert!(choose_m(0, 0.0).is_err());
    }

    #[test]
    fn choose_m_is_minimal() {
        for k in 0..6 {
            for theta in [0.1, 0.2, 0.35, 0.5, 0.9] {
                let m = choose_m(k, theta).unwrap() as f64;
                let lhs = |m: f64| 2f64.powi(k as i32) * (-theta * theta * m / 75.0).exp();
                assert!(lhs(m) <= 2.0 * theta / 5.0 * (1.0 + 1e-12));
                assert!(lhs(m - 1.0) > 2.0 * theta / 5.0 * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn generated_distance_in_range() {
        let mu = JointDistribution::uniform_product(8).unwrap();
        let inst = generate_instance(&mu, 3, 0.0, 0.1, &mut rng_from_seed(1)).unwrap();
        let d = distance_mu(inst.f(), inst.g(), &mu).unwrap();
        assert!((0.09..=0.1).contains(&d), "{d}");
        assert_eq!(inst.protocol().message_count(), 8);
    }

    #[test]
    fn eps_corruption_is_certified() {
        let mu = JointDistribution::noisy_hypercube(4, 0.2).unwrap();
        let inst = generate_instance(&mu, 1, 0.05, 0.0, &mut rng_from_seed(2)).unwrap();
        let e = protocol_error(inst.protocol(), inst.g(), &mu).unwrap();
        assert!(e <= 0.05 && e > 0.04, "{e}");
    }

    #[test]
    fn invalid_delta() {
        let mu = JointDistribution::uniform_product(3).unwrap();
        assert!(matches!(
            generate_instance(&mu, 1, 0.0, 1.0, &mut rng_from_seed(0)),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn zero_trials() {
        let mu = JointDistribution::uniform_product(3).unwrap();
        let inst = generate_instance(&mu, 1, 0.0, 0.0, &mut rng_from_seed(0)).unwrap();
        assert!(matches!(
            estimate_uncertain_error(&inst, 0.3, 0, 1, Execution::Sequential),
            Err(Error::NoTrials)
        ));
    }

    #[test]
    fn exact_instance_runs_correctly() {
        let mu = JointDistribution::uniform_product(4).unwrap();
        let inst = generate_instance(&mu, 1, 0.0, 0.0, &mut rng_from_seed(3)).unwrap();
        let est = estimate_uncertain_error(&inst, 0.4, 200, 7, Execution::Sequential).unwrap();
        assert!(est.error <= 0.4);
        let m = choose_m(1, 0.4).unwrap() as f64;
        // Product distributions pay only the check bits on top of m.
        assert!(est.mean_bits <= m + 20.0);
    }

    #[test]
    fn shared_trials_match_individual_runs() {
        let mu = JointDistribution::noisy_hypercube(4, 0.2).unwrap();
        let a = generate_instance(&mu, 1, 0.0, 0.0, &mut rng_from_seed(4)).unwrap();
        let b = generate_instance(&mu, 1, 0.0, 0.1, &mut rng_from_seed(5)).unwrap();
        let both = run_trials_shared(&[&a, &b], 0.4, 30, 9, Execution::Sequential).unwrap();
        assert_eq!(both[0], run_trials(&a, 0.4, 30, 9, Execution::Sequential).unwrap());
        assert_eq!(both[1], run_trials(&b, 0.4, 30, 9, Execution::Sequential).unwrap());
    }
}
