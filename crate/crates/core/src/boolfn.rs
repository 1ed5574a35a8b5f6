//! Truth-table Boolean functions, affine forms, nonlinearity and parity
//! (Fourier) expansions.
//!
//! Input convention: an assignment `x = (x₁, …, xₙ)` is stored at table
//! index `Σ xᵢ·2^(i−1)`, so `x₁` is the least-significant bit. Bit strings
//! such as `"010"` list `x₁` first.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::One;

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};

/// Largest arity for which a truth table may be materialized.
pub const MAX_TABLE_ARITY: usize = 24;

/// Default cap for brute-force nonlinearity and parity expansion.
pub const DEFAULT_BRUTE_FORCE_ARITY: usize = 16;

/// `LOW_PARITY[m]` has bit `i` set iff `popcount(i & m)` is odd, for `i < 64`.
const LOW_PARITY: [u64; 64] = {
    let mut table = [0u64; 64];
    let mut m: usize = 0;
    while m < 64 {
        let mut word = 0u64;
        let mut i: usize = 0;
        while i < 64 {
            if (i & m).count_ones() % 2 == 1 {
                word |= 1 << i;
            }
            i += 1;
        }
        table[m] = word;
        m += 1;
    }
    table
};

/// A Boolean function `{0,1}ⁿ → {0,1}` stored as a bit-packed truth table.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BooleanFunction {
    arity: usize,
    words: Vec<u64>,
}

fn word_count(arity: usize) -> usize {
    if arity <= 6 {
        1
    } else {
        1 << (arity - 6)
    }
}

/// Mask of the valid bits in the (single) word of a table with arity < 6.
fn tail_mask(arity: usize) -> u64 {
    if arity >= 6 {
        !0
    } else {
        (1u64 << (1 << arity)) - 1
    }
}

fn check_table_arity(arity: usize) -> Result<()> {
    if arity > MAX_TABLE_ARITY {
        return Err(Error::ArityLimit {
            arity,
            limit: MAX_TABLE_ARITY,
        });
    }
    Ok(())
}

impl BooleanFunction {
    /// Tabulates `f` over all `2ⁿ` input indices.
    pub fn from_fn(arity: usize, f: impl Fn(u64) -> bool) -> Result<Self> {
        check_table_arity(arity)?;
        let mut words = vec![0u64; word_count(arity)];
        for index in 0..(1u64 << arity) {
            if f(index) {
                words[(index >> 6) as usize] |= 1 << (index & 63);
            }
        }
        Ok(Self { arity, words })
    }

    pub fn from_bits(arity: usize, bits: &[bool]) -> Result<Self> {
        check_table_arity(arity)?;
        if bits.len() != 1usize << arity {
            return Err(Error::InvalidParameter(format!(
                "truth table of arity {arity} needs {} entries, got {}",
                1usize << arity,
                bits.len()
            )));
        }
        Self::from_fn(arity, |i| bits[i as usize])
    }

    pub fn constant(arity: usize, value: bool) -> Result<Self> {
        Self::from_fn(arity, |_| value)
    }

    pub fn affine(form: &AffineForm) -> Result<Self> {
        Self::from_fn(form.arity, |i| form.eval_index(i))
    }

    pub fn and() -> Self {
        Self::from_fn(2, |i| i == 3).expect("small arity")
    }

    pub fn nand() -> Self {
        Self::from_fn(2, |i| i != 3).expect("small arity")
    }

    pub fn xor() -> Self {
        Self::parity(2).expect("small arity")
    }

    pub fn parity(arity: usize) -> Result<Self> {
        Self::from_fn(arity, |i| i.count_ones() % 2 == 1)
    }

    /// k-input majority; `k` must be odd.
    pub fn majority(k: usize) -> Result<Self> {
        if k.is_multiple_of(2) {
            return Err(Error::EvenMajority(k));
        }
        Self::from_fn(k, |i| i.count_ones() as usize > k / 2)
    }

    /// The 3-input XNAND gate, `XNAND(b₀, b₁, b₂)` with `b₀ = x₁`.
    ///
    /// Rows (b₀b₁b₂ → out): 000→1, 001→1, 010→0, 011→1, 100→1, 101→0,
    /// 110→0, 111→0.
    pub fn xnand() -> Self {
        const ROWS: [(u8, u8, u8, bool); 8] = [
            (0, 0, 0, true),
            (0, 0, 1, true),
            (0, 1, 0, false),
            (0, 1, 1, true),
            (1, 0, 0, true),
            (1, 0, 1, false),
            (1, 1, 0, false),
            (1, 1, 1, false),
        ];
        Self::from_fn(3, |i| {
            let (b0, b1, b2) = ((i & 1) as u8, ((i >> 1) & 1) as u8, ((i >> 2) & 1) as u8);
            ROWS.iter()
                .find(|r| (r.0, r.1, r.2) == (b0, b1, b2))
                .map(|r| r.3)
                .unwrap()
        })
        .expect("small arity")
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Number of table entries, `2ⁿ`.
    pub fn len(&self) -> usize {
        1 << self.arity
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn eval_index(&self, index: u64) -> bool {
        debug_assert!(index < (1u64 << self.arity));
        (self.words[(index >> 6) as usize] >> (index & 63)) & 1 == 1
    }

    pub fn evaluate(&self, x: &[bool]) -> Result<bool> {
        if x.len() != self.arity {
            return Err(Error::ArityMismatch {
                expected: self.arity,
                actual: x.len(),
            });
        }
        Ok(self.eval_index(index_of(x)))
    }

    /// Evaluates at a bit string such as `"010"` (x₁ first).
    pub fn evaluate_str(&self, bits: &str) -> Result<bool> {
        self.evaluate(&parse_bits(bits)?)
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len() as u64).map(|i| self.eval_index(i))
    }

    pub fn weight(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }

    /// Serializes to the `n=<arity>` + hex truth-table text format.
    ///
    /// The hex string is the table read as a binary number whose bit `i`
    /// is the entry at index `i`, most-significant nibble first.
    pub fn to_text(&self) -> String {
        let nibbles = (self.len() / 4).max(1);
        let mut hex = String::with_capacity(nibbles);
        for n in (0..nibbles).rev() {
            let word = self.words[n / 16];
            let nibble = (word >> ((n % 16) * 4)) & 0xf;
            hex.push(char::from_digit(nibble as u32, 16).unwrap());
        }
        format!("n={}\n{}\n", self.arity, hex)
    }

    /// Parses the truth-table text format. Blank lines and `#` comments
    /// are ignored.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap().trim()))
            .filter(|(_, l)| !l.is_empty());

        let (hline, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "missing `n=<arity>` header"))?;
        let arity: usize = header
            .strip_prefix("n=")
            .ok_or_else(|| Error::parse(hline, "expected `n=<arity>` header"))?
            .trim()
            .parse()
            .map_err(|_| Error::parse(hline, "arity is not a non-negative integer"))?;
        if arity > MAX_TABLE_ARITY {
            return Err(Error::parse(
                hline,
                format!("arity {arity} exceeds the limit of {MAX_TABLE_ARITY}"),
            ));
        }

        let (tline, hex) = lines
            .next()
            .ok_or_else(|| Error::parse(hline + 1, "missing hex truth table"))?;
        let hex = hex.strip_prefix("0x").unwrap_or(hex);
        if hex.is_empty() {
            return Err(Error::parse(tline, "empty hex truth table"));
        }
        if let Some((extra, _)) = lines.next() {
            return Err(Error::parse(extra, "unexpected content after truth table"));
        }

        let len = 1usize << arity;
        let mut words = vec![0u64; word_count(arity)];
        for (pos, c) in hex.chars().rev().enumerate() {
            let nibble =
                c.to_digit(16)
                    .ok_or_else(|| Error::parse(tline, format!("invalid hex digit `{c}`")))? as u64;
            if nibble == 0 {
                continue;
            }
            let bit = pos * 4;
            if bit + (64 - nibble.leading_zeros() as usize) > len {
                return Err(Error::parse(
                    tline,
                    format!("truth table has entries beyond the {len} inputs of arity {arity}"),
                ));
            }
            words[bit / 64] |= nibble << (bit % 64);
        }
        Ok(Self { arity, words })
    }
}

impl fmt::Debug for BooleanFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = self.to_text();
        let mut parts = text.lines();
        write!(
            f,
            "BooleanFunction({}, 0x{})",
            parts.next().unwrap(),
            parts.next().unwrap()
        )
    }
}

/// Converts a bit slice (x₁ first) to a table index.
pub fn index_of(x: &[bool]) -> u64 {
    x.iter().enumerate().fold(0, |acc, (i, &b)| acc | ((b as u64) << i))
}

/// Parses a string of `0`/`1` characters, x₁ first.
pub fn parse_bits(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(Error::InvalidParameter(format!("`{other}` is not a bit in `{s}`"))),
        })
        .collect()
}

/// Renders a table index as a bit string of the given arity, x₁ first.
pub fn format_bits(index: u64, arity: usize) -> String {
    (0..arity)
        .map(|i| if (index >> i) & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Named gates recognised by [`make_named`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NamedFunction {
    And,
    Nand,
    Xor,
    Const(bool),
    Maj,
    Xnand,
}

impl FromStr for NamedFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "and" => Self::And,
            "nand" => Self::Nand,
            "xor" => Self::Xor,
            "const0" | "zero" => Self::Const(false),
            "const1" | "one" => Self::Const(true),
            "maj" | "majority" => Self::Maj,
            "xnand" => Self::Xnand,
            _ => return Err(Error::UnknownFunction(s.to_string())),
        })
    }
}

/// Builds a named function.
///
/// `k` is the input count: required for `Maj` (odd), optional for `And`,
/// `Nand` and `Xor` (default 2) and `Const` (default 0). `Xnand` is
/// always 3-input.
pub fn make_named(name: NamedFunction, k: Option<usize>) -> Result<BooleanFunction> {
    match name {
        NamedFunction::And => {
            let k = k.unwrap_or(2);
            BooleanFunction::from_fn(k, |i| i.count_ones() as usize == k)
        }
        NamedFunction::Nand => {
            let k = k.unwrap_or(2);
            BooleanFunction::from_fn(k, |i| i.count_ones() as usize != k)
        }
        NamedFunction::Xor => BooleanFunction::parity(k.unwrap_or(2)),
        NamedFunction::Const(v) => BooleanFunction::constant(k.unwrap_or(0), v),
        NamedFunction::Maj => {
            let k = k.ok_or_else(|| Error::InvalidParameter("majority needs an input count k".into()))?;
            BooleanFunction::majority(k)
        }
        NamedFunction::Xnand => match k {
            None | Some(3) => Ok(BooleanFunction::xnand()),
            Some(other) => Err(Error::ArityMismatch {
                expected: 3,
                actual: other,
            }),
        },
    }
}

/// `x ↦ (⊕_{i∈mask} xᵢ) ⊕ constant`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AffineForm {
    pub arity: usize,
    pub mask: u64,
    pub constant: bool,
}

impl AffineForm {
    pub fn new(arity: usize, mask: u64, constant: bool) -> Result<Self> {
        if arity < 64 && mask >> arity != 0 {
            return Err(Error::InvalidParameter(format!(
                "mask {mask:#b} references inputs beyond arity {arity}"
            )));
        }
        Ok(Self { arity, mask, constant })
    }

    pub fn eval_index(&self, index: u64) -> bool {
        ((index & self.mask).count_ones() % 2 == 1) ^ self.constant
    }

    /// All `2^(n+1)` affine forms of the given arity.
    pub fn all(arity: usize) -> impl Iterator<Item = AffineForm> {
        (0..(1u64 << arity)).flat_map(move |mask| {
            [false, true]
                .into_iter()
                .map(move |constant| AffineForm { arity, mask, constant })
        })
    }

    pub fn is_linear(&self) -> bool {
        !self.constant
    }
}

impl fmt::Display for AffineForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms: Vec<String> = (0..self.arity)
            .filter(|i| (self.mask >> i) & 1 == 1)
            .map(|i| format!("x{}", i + 1))
            .collect();
        if self.constant || terms.is_empty() {
            terms.push(if self.constant { "1" } else { "0" }.into());
        }
        write!(f, "{}", terms.join(" + "))
    }
}

/// Table word `w` of the linear function with the given mask.
fn linear_word(arity: usize, mask: u64, w: usize) -> u64 {
    let high = ((w as u64) << 6) & mask;
    let word = LOW_PARITY[(mask & 63) as usize] ^ if high.count_ones() % 2 == 1 { !0 } else { 0 };
    word & tail_mask(arity)
}

fn linear_distance(f: &BooleanFunction, mask: u64) -> u64 {
    f.words()
        .iter()
        .enumerate()
        .map(|(w, &fw)| (fw ^ linear_word(f.arity, mask, w)).count_ones() as u64)
        .sum()
}

/// Number of inputs on which `f` and `l` disagree.
pub fn affine_distance(f: &BooleanFunction, l: &AffineForm) -> Result<u64> {
    if f.arity != l.arity {
        return Err(Error::ArityMismatch {
            expected: f.arity,
            actual: l.arity,
        });
    }
    let d = linear_distance(f, l.mask);
    Ok(if l.constant { f.len() as u64 - d } else { d })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NonlinearityOptions {
    pub max_arity: usize,
    /// Minimize over linear forms only (no constant 1).
    pub strictly_linear: bool,
}

impl Default for NonlinearityOptions {
    fn default() -> Self {
        Self {
            max_arity: DEFAULT_BRUTE_FORCE_ARITY,
            strictly_linear: false,
        }
    }
}

/// Result of the brute-force minimization: the distance and the first
/// closest form in `(mask, constant)` order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Nonlinearity {
    pub distance: u64,
    pub closest: AffineForm,
}

/// ν(f): distance from `f` to the nearest affine function.
pub fn nonlinearity(f: &BooleanFunction) -> Result<u64> {
    nonlinearity_with(f, NonlinearityOptions::default()).map(|n| n.distance)
}

pub fn nonlinearity_with(f: &BooleanFunction, opts: NonlinearityOptions) -> Result<Nonlinearity> {
    if f.arity > opts.max_arity {
        return Err(Error::ArityLimit {
            arity: f.arity,
            limit: opts.max_arity,
        });
    }
    let len = f.len() as u64;
    let mut best = Nonlinearity {
        distance: u64::MAX,
        closest: AffineForm {
            arity: f.arity,
            mask: 0,
            constant: false,
        },
    };
    for mask in 0..(1u64 << f.arity) {
        let d = linear_distance(f, mask);
        let candidates: &[(u64, bool)] = if opts.strictly_linear {
            &[(d, false)]
        } else {
            &[(d, false), (len - d, true)]
        };
        for &(distance, constant) in candidates {
            if distance < best.distance {
                best = Nonlinearity {
                    distance,
                    closest: AffineForm {
                        arity: f.arity,
                        mask,
                        constant,
                    },
                };
            }
        }
    }
    Ok(best)
}

/// Central binomial `C(2m, m)`.
pub(crate) fn central_binomial(m: u64) -> BigUint {
    let mut c = BigUint::one();
    for i in 0..m {
        // C(2(i+1), i+1) = C(2i, i) · 2(2i+1) / (i+1)
        c = c * BigUint::from(2 * (2 * i + 1)) / BigUint::from(i + 1);
    }
    c
}

/// ν(k-MAJ) = 2^(k−1) − C(k−1, (k−1)/2) for odd `k`.
pub fn kmaj_nonlinearity(k: usize) -> Result<BigUint> {
    if k.is_multiple_of(2) {
        return Err(Error::EvenMajority(k));
    }
    let power = BigUint::one() << (k - 1);
    Ok(power - central_binomial(((k - 1) / 2) as u64))
}

/// Coefficients f̂_T of `f(x) = Σ_T f̂_T·(−1)^(⊕_{i∈T} xᵢ)`, indexed by the
/// subset mask `T`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParityExpansion {
    arity: usize,
    coefficients: Vec<Dyadic>,
}

impl ParityExpansion {
    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn coefficient(&self, subset: u64) -> Dyadic {
        self.coefficients[subset as usize]
    }

    /// Nonzero coefficients in increasing subset-mask order.
    pub fn nonzero(&self) -> impl Iterator<Item = (u64, Dyadic)> + '_ {
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(t, &c)| (t as u64, c))
    }

    /// Evaluates the expansion at an input index; exact.
    pub fn reconstruct(&self, index: u64) -> Dyadic {
        self.coefficients.iter().enumerate().fold(Dyadic::ZERO, |acc, (t, &c)| {
            if (index & t as u64).count_ones() % 2 == 1 {
                acc - c
            } else {
                acc + c
            }
        })
    }
}

/// Computes the parity expansion with an in-place integer Walsh–Hadamard
/// butterfly, then scales by `2^(−n)`.
pub fn parity_expansion(f: &BooleanFunction) -> Result<ParityExpansion> {
    if f.arity > DEFAULT_BRUTE_FORCE_ARITY {
        return Err(Error::ArityLimit {
            arity: f.arity,
            limit: DEFAULT_BRUTE_FORCE_ARITY,
        });
    }
    let mut spectrum: Vec<i64> = f.bits().map(i64::from).collect();
    let mut half = 1;
    while half < spectrum.len() {
        for block in spectrum.chunks_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (s, d) = (*a + *b, *a - *b);
                *a = s;
                *b = d;
            }
        }
        half *= 2;
    }
    let coefficients = spectrum.into_iter().map(|w| Dyadic::new(w, f.arity as u32)).collect();
    Ok(ParityExpansion {
        arity: f.arity,
        coefficients,
    })
}
