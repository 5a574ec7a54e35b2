//! Bit strings, Boolean functions on `X x Y`, and one-way protocols.
//!
//! Inputs are integers: bit `i` (1-based) of an `n`-bit string is bit `i - 1`
//! of the integer. Strings are displayed as binary numerals, so `"10"` has
//! bit 1 equal to 0 and bit 2 equal to 1.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dist::JointDistribution;
use crate::error::{invalid, Error, Result};

/// Largest per-side length for which explicit tables are allowed.
pub const MAX_TABLE_BITS: u32 = 14;
/// Largest per-side length of any input.
pub const MAX_BITS: u32 = 63;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BitString {
    value: u64,
    len: u32,
}

impl BitString {
    pub fn new(value: u64, len: u32) -> Result<Self> {
        if len > MAX_BITS {
            return Err(Error::TooLarge(format!("bit string of length {len}")));
        }
        if len < 64 && value >> len != 0 {
            return Err(invalid(format!("value {value:#b} does not fit in {len} bits")));
        }
        Ok(BitString { value, len })
    }

    pub fn zeros(len: u32) -> Result<Self> {
        Self::new(0, len)
    }

    /// Builds a string from 1-based positions of its set bits.
    pub fn from_positions(len: u32, positions: &[u32]) -> Result<Self> {
        let mut value = 0u64;
        for &i in positions {
            if i == 0 || i > len {
                return Err(invalid(format!("position {i} outside 1..={len}")));
            }
            value |= 1 << (i - 1);
        }
        Self::new(value, len)
    }

    /// Parses a binary numeral such as `"0b101"` or `"101"`; the length is
    /// the number of digits.
    pub fn parse(s: &str) -> Result<Self> {
        let digits = s.strip_prefix("0b").unwrap_or(s);
        if digits.is_empty() || !digits.chars().all(|c| c == '0' || c == '1') {
            return Err(Error::Parse(format!("not a bit string: {s:?}")));
        }
        let len = digits.len() as u32;
        if len > MAX_BITS {
            return Err(Error::TooLarge(format!("bit string of length {len}")));
        }
        let value = u64::from_str_radix(digits, 2).map_err(|e| Error::Parse(e.to_string()))?;
        Self::new(value, len)
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn len(&self) -> u32 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Bit `i`, 1-based.
    pub fn get(&self, i: u32) -> Result<bool> {
        if i == 0 || i > self.len {
            return Err(invalid(format!("position {i} outside 1..={}", self.len)));
        }
        Ok(self.value >> (i - 1) & 1 == 1)
    }

    pub fn xor(&self, other: &BitString) -> Result<BitString> {
        if self.len != other.len {
            return Err(Error::DomainMismatch(format!(
                "lengths {} and {}",
                self.len, other.len
            )));
        }
        Ok(BitString { value: self.value ^ other.value, len: self.len })
    }

    pub fn and(&self, other: &BitString) -> Result<BitString> {
        if self.len != other.len {
            return Err(Error::DomainMismatch(format!(
                "lengths {} and {}",
                self.len, other.len
            )));
        }
        Ok(BitString { value: self.value & other.value, len: self.len })
    }

    pub fn weight(&self) -> u32 {
        self.value.count_ones()
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len == 0 {
            return Ok(());
        }
        write!(f, "{:0width$b}", self.value, width = self.len as usize)
    }
}

/// Packed bit vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitTable {
    len: usize,
    words: Vec<u64>,
}

impl BitTable {
    pub fn new(len: usize) -> Self {
        BitTable { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut t = Self::new(len);
        for i in 0..len {
            if f(i) {
                t.words[i >> 6] |= 1 << (i & 63);
            }
        }
        t
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i >> 6] >> (i & 63) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        debug_assert!(i < self.len);
        if v {
            self.words[i >> 6] |= 1 << (i & 63);
        } else {
            self.words[i >> 6] &= !(1 << (i & 63));
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.words[i >> 6] ^= 1 << (i & 63);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Number of positions where the two tables differ.
    pub fn hamming(&self, other: &BitTable) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    pub fn to_hex(&self) -> String {
        self.words.iter().map(|w| format!("{w:016x}")).collect()
    }

    pub fn from_hex(len: usize, hex: &str) -> Result<Self> {
        let nwords = len.div_ceil(64);
        if hex.len() != nwords * 16 {
            return Err(Error::Parse(format!(
                "expected {} hex digits for {len} bits, got {}",
                nwords * 16,
                hex.len()
            )));
        }
        let mut words = Vec::with_capacity(nwords);
        for chunk in hex.as_bytes().chunks(16) {
            let s = std::str::from_utf8(chunk).map_err(|e| Error::Parse(e.to_string()))?;
            words.push(u64::from_str_radix(s, 16).map_err(|e| Error::Parse(e.to_string()))?);
        }
        if !len.is_multiple_of(64) && words[nwords - 1] >> (len % 64) != 0 {
            return Err(Error::Parse("bits set beyond table length".into()));
        }
        Ok(BitTable { len, words })
    }
}

/// Input sizes of a function `X x Y -> {0,1}` with `X = {0,1}^x_bits`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    pub x_bits: u32,
    pub y_bits: u32,
}

impl Domain {
    pub fn new(x_bits: u32, y_bits: u32) -> Result<Self> {
        if x_bits > MAX_BITS || y_bits > MAX_BITS {
            return Err(Error::TooLarge(format!("domain {x_bits}x{y_bits} bits")));
        }
        Ok(Domain { x_bits, y_bits })
    }

    pub fn square(n: u32) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn x_size(&self) -> u64 {
        1 << self.x_bits
    }

    pub fn y_size(&self) -> u64 {
        1 << self.y_bits
    }

    pub fn check_table_size(&self) -> Result<()> {
        if self.x_bits > MAX_TABLE_BITS || self.y_bits > MAX_TABLE_BITS {
            return Err(Error::TooLarge(format!(
                "tables need at most {MAX_TABLE_BITS} bits per side, got {}x{}",
                self.x_bits, self.y_bits
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn index(&self, x: u64, y: u64) -> usize {
        ((x << self.y_bits) | y) as usize
    }
}

/// A one-way protocol in canonical form: Alice sends the index `pi(x)` of
/// her part, Bob answers with decider `B_i(y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OneWayProtocol {
    domain: Domain,
    parts: usize,
    partition: Vec<u32>,
    deciders: Vec<BitTable>,
}

impl OneWayProtocol {
    pub fn new(domain: Domain, partition: Vec<u32>, deciders: Vec<BitTable>) -> Result<Self> {
        domain.check_table_size()?;
        if partition.len() as u64 != domain.x_size() {
            return Err(Error::DomainMismatch(format!(
                "partition has {} entries for |X| = {}",
                partition.len(),
                domain.x_size()
            )));
        }
        if deciders.is_empty() {
            return Err(invalid("a protocol needs at least one decider"));
        }
        if let Some(&bad) = partition.iter().find(|&&i| i as usize >= deciders.len()) {
            return Err(invalid(format!("message {bad} has no decider")));
        }
        if let Some(d) = deciders.iter().find(|d| d.len() as u64 != domain.y_size()) {
            return Err(Error::DomainMismatch(format!(
                "decider of length {} for |Y| = {}",
                d.len(),
                domain.y_size()
            )));
        }
        Ok(OneWayProtocol { domain, parts: deciders.len(), partition, deciders })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Number of messages `L`.
    pub fn message_count(&self) -> usize {
        self.parts
    }

    /// `ceil(log2 L)`.
    pub fn cost_bits(&self) -> u32 {
        ceil_log2(self.parts as u64)
    }

    pub fn fits_budget(&self, k: u32) -> bool {
        k >= 64 || self.parts as u64 <= 1u64 << k
    }

    #[inline]
    pub fn message(&self, x: u64) -> usize {
        self.partition[x as usize] as usize
    }

    #[inline]
    pub fn decide(&self, message: usize, y: u64) -> bool {
        self.deciders[message].get(y as usize)
    }

    #[inline]
    pub fn evaluate(&self, x: u64, y: u64) -> bool {
        self.decide(self.message(x), y)
    }

    pub fn partition(&self) -> &[u32] {
        &self.partition
    }

    pub fn deciders(&self) -> &[BitTable] {
        &self.deciders
    }
}

pub fn ceil_log2(v: u64) -> u32 {
    if v <= 1 {
        0
    } else {
        64 - (v - 1).leading_zeros()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BoolFunction {
    /// Row-major table, entry `x * |Y| + y`.
    Table { domain: Domain, table: BitTable },
    /// `<mask, x xor y> mod 2` on `n`-bit inputs.
    Parity { n: u32, mask: u64 },
    Constant { domain: Domain, value: bool },
    Protocol(OneWayProtocol),
}

impl BoolFunction {
    pub fn table(domain: Domain, table: BitTable) -> Result<Self> {
        domain.check_table_size()?;
        if table.len() as u64 != domain.x_size() * domain.y_size() {
            return Err(Error::DomainMismatch(format!(
                "table of length {} for domain {}x{}",
                table.len(),
                domain.x_bits,
                domain.y_bits
            )));
        }
        Ok(BoolFunction::Table { domain, table })
    }

    pub fn from_fn(domain: Domain, f: impl Fn(u64, u64) -> bool) -> Result<Self> {
        domain.check_table_size()?;
        let ys = domain.y_size();
        let table = BitTable::from_fn((domain.x_size() * ys) as usize, |i| {
            f(i as u64 >> domain.y_bits, i as u64 & (ys - 1))
        });
        Ok(BoolFunction::Table { domain, table })
    }

    pub fn parity(n: u32, mask: u64) -> Result<Self> {
        BitString::new(mask, n)?;
        Ok(BoolFunction::Parity { n, mask })
    }

    pub fn constant(domain: Domain, value: bool) -> Self {
        BoolFunction::Constant { domain, value }
    }

    pub fn domain(&self) -> Domain {
        match self {
            BoolFunction::Table { domain, .. } | BoolFunction::Constant { domain, .. } => *domain,
            BoolFunction::Parity { n, .. } => Domain { x_bits: *n, y_bits: *n },
            BoolFunction::Protocol(p) => p.domain(),
        }
    }

    /// Evaluates on integer-encoded inputs; the caller keeps them in range.
    #[inline]
    pub fn eval(&self, x: u64, y: u64) -> bool {
        match self {
            BoolFunction::Table { domain, table } => table.get(domain.index(x, y)),
            BoolFunction::Parity { mask, .. } => (mask & (x ^ y)).count_ones() & 1 == 1,
            BoolFunction::Constant { value, .. } => *value,
            BoolFunction::Protocol(p) => p.evaluate(x, y),
        }
    }

    /// Checked evaluation.
    pub fn eval_bits(&self, x: &BitString, y: &BitString) -> Result<bool> {
        let d = self.domain();
        if x.len() != d.x_bits || y.len() != d.y_bits {
            return Err(Error::DomainMismatch(format!(
                "inputs of length {}x{} for domain {}x{}",
                x.len(),
                y.len(),
                d.x_bits,
                d.y_bits
            )));
        }
        Ok(self.eval(x.value(), y.value()))
    }

    /// Explicit table of the same function.
    pub fn tabulate(&self) -> Result<BoolFunction> {
        if let BoolFunction::Table { .. } = self {
            return Ok(self.clone());
        }
        Self::from_fn(self.domain(), |x, y| self.eval(x, y))
    }

    /// The one-argument function `y -> f(x, y)`.
    pub fn restrict(&self, x: &BitString) -> Result<BitTable> {
        let d = self.domain();
        if x.len() != d.x_bits {
            return Err(Error::DomainMismatch(format!(
                "x of length {} for domain {}x{}",
                x.len(),
                d.x_bits,
                d.y_bits
            )));
        }
        if d.y_bits > MAX_TABLE_BITS {
            return Err(Error::TooLarge(format!("restriction to {} bits", d.y_bits)));
        }
        let xv = x.value();
        Ok(BitTable::from_fn(d.y_size() as usize, |y| self.eval(xv, y as u64)))
    }

    pub fn to_doc(&self) -> FunctionDoc {
        match self {
            BoolFunction::Table { domain, table } => FunctionDoc {
                n: domain.x_bits,
                kind: "table".into(),
                payload: json!({ "y_bits": domain.y_bits, "hex": table.to_hex() }),
            },
            BoolFunction::Parity { n, mask } => FunctionDoc {
                n: *n,
                kind: "parity".into(),
                payload: json!({ "mask": mask }),
            },
            BoolFunction::Constant { domain, value } => FunctionDoc {
                n: domain.x_bits,
                kind: "constant".into(),
                payload: json!({ "y_bits": domain.y_bits, "value": value }),
            },
            BoolFunction::Protocol(p) => FunctionDoc {
                n: p.domain.x_bits,
                kind: "protocol".into(),
                payload: json!({
                    "y_bits": p.domain.y_bits,
                    "partition": p.partition,
                    "deciders": p.deciders.iter().map(BitTable::to_hex).collect::<Vec<_>>(),
                }),
            },
        }
    }

    pub fn from_doc(doc: &FunctionDoc) -> Result<Self> {
        #[derive(Deserialize)]
        struct TablePayload {
            y_bits: u32,
            hex: String,
        }
        #[derive(Deserialize)]
        struct ParityPayload {
            mask: u64,
        }
        #[derive(Deserialize)]
        struct ConstantPayload {
            y_bits: u32,
            value: bool,
        }
        #[derive(Deserialize)]
        struct ProtocolPayload {
            y_bits: u32,
            partition: Vec<u32>,
            deciders: Vec<String>,
        }
        let payload = doc.payload.clone();
        match doc.kind.as_str() {
            "table" => {
                let t: TablePayload = serde_json::from_value(payload)?;
                let domain = Domain::new(doc.n, t.y_bits)?;
                domain.check_table_size()?;
                let len = (domain.x_size() * domain.y_size()) as usize;
                Self::table(domain, BitTable::from_hex(len, &t.hex)?)
            }
            "parity" => {
                let t: ParityPayload = serde_json::from_value(payload)?;
                Self::parity(doc.n, t.mask)
            }
            "constant" => {
                let t: ConstantPayload = serde_json::from_value(payload)?;
                Ok(Self::constant(Domain::new(doc.n, t.y_bits)?, t.value))
            }
            "protocol" => {
                let t: ProtocolPayload = serde_json::from_value(payload)?;
                let domain = Domain::new(doc.n, t.y_bits)?;
                domain.check_table_size()?;
                let deciders = t
                    .deciders
                    .iter()
                    .map(|h| BitTable::from_hex(domain.y_size() as usize, h))
                    .collect::<Result<Vec<_>>>()?;
                Ok(BoolFunction::Protocol(OneWayProtocol::new(domain, t.partition, deciders)?))
            }
            other => Err(Error::Parse(format!("unknown function kind {other:?}"))),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_doc())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_doc(&serde_json::from_str(s)?)
    }
}

/// Serialized form `{n, kind, payload}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionDoc {
    pub n: u32,
    pub kind: String,
    pub payload: serde_json::Value,
}

fn check_enumerable(domain: Domain) -> Result<()> {
    if domain.x_bits + domain.y_bits > 2 * MAX_TABLE_BITS {
        return Err(Error::TooLarge(format!(
            "exact enumeration over {}x{} bits",
            domain.x_bits, domain.y_bits
        )));
    }
    Ok(())
}

/// Probability under `mu` that `f` and `g` disagree.
pub fn distance_mu(f: &BoolFunction, g: &BoolFunction, mu: &JointDistribution) -> Result<f64> {
    let d = f.domain();
    if d != g.domain() || d != mu.domain() {
        return Err(Error::DomainMismatch(format!(
            "functions on {}x{} and {}x{}, distribution on {}x{}",
            d.x_bits,
            d.y_bits,
            g.domain().x_bits,
            g.domain().y_bits,
            mu.domain().x_bits,
            mu.domain().y_bits
        )));
    }
    check_enumerable(d)?;
    let mut total = 0.0;
    for x in 0..d.x_size() {
        for y in 0..d.y_size() {
            if f.eval(x, y) != g.eval(x, y) {
                total += mu.mass(x, y);
            }
        }
    }
    Ok(total)
}

/// Error of protocol `p` with respect to `g` under `mu`.
pub fn protocol_error(p: &OneWayProtocol, g: &BoolFunction, mu: &JointDistribution) -> Result<f64> {
    distance_mu(&BoolFunction::Protocol(p.clone()), g, mu)
}
