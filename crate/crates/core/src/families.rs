//! Parity functions and the noisy family of parity pairs.

use rand::Rng;

use crate::dist::{random_bits, sample_noisy_copy};
use crate::error::{invalid, Error, Result};
use crate::model::{BitString, BitTable, Domain, OneWayProtocol};

#[inline]
pub fn parity_bit(mask: u64, v: u64) -> bool {
    (mask & v).count_ones() & 1 == 1
}

/// `f_S(x, y) = <S, x xor y> mod 2`.
pub fn eval_parity(s: &BitString, x: &BitString, y: &BitString) -> Result<bool> {
    let z = x.xor(y)?;
    Ok(parity_bit(s.and(&z)?.value(), u64::MAX))
}

/// Two-message protocol computing `f_S` with zero error: Alice sends the
/// parity of `x` on `S`, Bob xors it with the parity of `y` on `S`.
pub fn parity_protocol(s: &BitString) -> Result<OneWayProtocol> {
    let n = s.len();
    let domain = Domain::square(n)?;
    domain.check_table_size()?;
    let mask = s.value();
    let size = domain.x_size() as usize;
    let partition = (0..size as u64).map(|x| parity_bit(mask, x) as u32).collect();
    let d0 = BitTable::from_fn(size, |y| parity_bit(mask, y as u64));
    let d1 = BitTable::from_fn(size, |y| !parity_bit(mask, y as u64));
    OneWayProtocol::new(domain, partition, vec![d0, d1])
}

fn check_flip(p: f64, name: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("{name} = {p} outside [0, 1]")));
    }
    Ok(())
}

/// `Pr[f_S != f_T]` under the `p`-noisy hypercube: `(1 - (1-2p)^|S xor T|) / 2`.
pub fn parity_distance_exact(s: &BitString, t: &BitString, p: f64) -> Result<f64> {
    check_flip(p, "p")?;
    let d = s.xor(t)?.weight();
    Ok((1.0 - (1.0 - 2.0 * p).powi(d as i32)) / 2.0)
}

/// Upper bound `p q n` on the distance between members of a family pair.
pub fn parity_distance_bound(p: f64, q: f64, n: u32) -> f64 {
    p * q * n as f64
}

/// True when `(f_S, f_T)` belongs to the family with noise `q`, i.e.
/// `|S xor T| <= q n`.
pub fn in_family(s: &BitString, t: &BitString, q: f64) -> Result<bool> {
    Ok(s.xor(t)?.weight() as f64 <= q * s.len() as f64 + 1e-9)
}

/// Draws `(S, T)` with `S` uniform and `T` a `q/2`-noisy copy of `S`.
pub fn sample_dq<R: Rng + ?Sized>(n: u32, q: f64, rng: &mut R) -> Result<(BitString, BitString)> {
    check_flip(q, "q")?;
    if n > 63 {
        return Err(Error::TooLarge(format!("{n}-bit sets")));
    }
    let s = random_bits(n, rng);
    let t = sample_noisy_copy(s, n, q / 2.0, rng);
    Ok((BitString::new(s, n)?, BitString::new(t, n)?))
}

/// [`sample_dq`] for sets of any size, packed into bit tables.
pub fn sample_dq_wide<R: Rng + ?Sized>(n: usize, q: f64, rng: &mut R) -> Result<(BitTable, BitTable)> {
    check_flip(q, "q")?;
    let s = BitTable::from_fn(n, |_| rng.gen::<bool>());
    let mut t = s.clone();
    for i in 0..n {
        if rng.gen::<f64>() < q / 2.0 {
            t.flip(i);
        }
    }
    Ok((s, t))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NuSample {
    pub s: BitString,
    pub x: BitString,
    pub t: BitString,
    pub y: BitString,
}

/// Draws `((S, x), (T, y))` from the product of the set distribution and the
/// `p`-noisy hypercube.
pub fn sample_nu<R: Rng + ?Sized>(n: u32, p: f64, q: f64, rng: &mut R) -> Result<NuSample> {
    check_flip(p, "p")?;
    let (s, t) = sample_dq(n, q, rng)?;
    let x = random_bits(n, rng);
    let y = sample_noisy_copy(x, n, p, rng);
    Ok(NuSample { s, x: BitString::new(x, n)?, t, y: BitString::new(y, n)? })
}

/// Bob's target `F((S, x), (T, y)) = f_T(x, y)`.
pub fn eval_f(_s: &BitString, x: &BitString, t: &BitString, y: &BitString) -> Result<bool> {
    eval_parity(t, x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::JointDistribution;
    use crate::model::{distance_mu, protocol_error, BoolFunction};
    use crate::rng::rng_from_seed;

    fn bs(s: &str) -> BitString {
        BitString::parse(s).unwrap()
    }

    #[test]
    fn parity_example() {
        // S = {1,3}
        let s = BitString::from_positions(3, &[1, 3]).unwrap();
        assert!(eval_parity(&s, &bs("101"), &bs("011")).unwrap());
    }

    #[test]
    fn f_example() {
        let t = BitString::from_positions(2, &[2]).unwrap();
        assert!(!eval_f(&bs("00"), &bs("01"), &t, &bs("00")).unwrap());
    }

    #[test]
    fn protocol_is_exact() {
        let s = bs("1011");
        let p = parity_protocol(&s).unwrap();
        assert_eq!(p.message_count(), 2);
        let mu = JointDistribution::noisy_hypercube(4, 0.3).unwrap();
        let f = BoolFunction::parity(4, s.value()).unwrap();
        assert_eq!(protocol_error(&p, &f, &mu).unwrap(), 0.0);
    }

    #[test]
    fn distance_example() {
        let d = parity_distance_exact(&bs("0011"), &bs("0000"), 0.25).unwrap();
        assert!((d - 0.375).abs() < 1e-15);
    }

    #[test]
    fn closed_form_matches_enumeration() {
        let mu = JointDistribution::noisy_hypercube(3, 0.2).unwrap();
        for s in 0..8 {
            for t in 0..8 {
                let exact =
                    parity_distance_exact(&BitString::new(s, 3).unwrap(), &BitString::new(t, 3).unwrap(), 0.2)
                        .unwrap();
                let f = BoolFunction::parity(3, s).unwrap();
                let g = BoolFunction::parity(3, t).unwrap();
                assert!((exact - distance_mu(&f, &g, &mu).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dq_symmetric_difference_rate() {
        let mut rng = rng_from_seed(5);
        let n = 10_000;
        let (s, t) = sample_dq_wide(n, 0.2, &mut rng).unwrap();
        let rate = s.hamming(&t) as f64 / n as f64;
        assert!((rate - 0.1).abs() <= 0.01, "rate {rate}");
    }
}
