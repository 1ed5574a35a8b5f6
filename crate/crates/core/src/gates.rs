//! Noisy gates built from correlation resources, the majority threshold
//! β_k, and the error recursion of a noisy majority gate.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::boolfn::{central_binomial, kmaj_nonlinearity, AffineForm, BooleanFunction};
use crate::error::{Error, Result};
use crate::export::{big_ratio_f64, ratio, sig9};
use crate::ghzc;
use crate::mbqc::{programs, L2Program, StrategyReport};

/// Error tables whose spread is at most this count as ε-noisy.
pub const CLASSIFICATION_TOLERANCE: f64 = 1e-12;

/// Default search bound for [`min_k_for_violation`].
pub const DEFAULT_MAX_K: usize = 100_001;

/// Largest k accepted by the floating-point recursion.
pub const RECURSION_K_CAP: usize = 1001;

/// A gate with a per-input error probability, optionally backed by the
/// program that realizes it.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisyGate {
    target: BooleanFunction,
    error: Vec<f64>,
    program: Option<L2Program>,
}

impl NoisyGate {
    pub fn new(target: BooleanFunction, error: Vec<f64>) -> Result<Self> {
        if error.len() != target.len() {
            return Err(Error::ArityMismatch {
                expected: target.len(),
                actual: error.len(),
            });
        }
        if let Some(e) = error.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(Error::InvalidParameter(format!("error probability {e} outside [0, 1]")));
        }
        Ok(Self {
            target,
            error,
            program: None,
        })
    }

    pub fn perfect(target: BooleanFunction) -> Self {
        Self::uniform(target, 0.0).expect("zero error is valid")
    }

    pub fn uniform(target: BooleanFunction, epsilon: f64) -> Result<Self> {
        let len = target.len();
        Self::new(target, vec![epsilon; len])
    }

    /// Gate realized by running `program` against `target`.
    pub fn from_program(program: L2Program, target: BooleanFunction) -> Result<Self> {
        let report = program.run_exact(&target)?;
        let error = report.success.iter().map(|s| (1.0 - s).clamp(0.0, 1.0)).collect();
        let mut gate = Self::new(target, error)?;
        gate.program = Some(program);
        Ok(gate)
    }

    pub fn arity(&self) -> usize {
        self.target.arity()
    }

    pub fn target(&self) -> &BooleanFunction {
        &self.target
    }

    pub fn error_table(&self) -> &[f64] {
        &self.error
    }

    pub fn error(&self, x: u64) -> f64 {
        self.error[x as usize]
    }

    pub fn program(&self) -> Option<&L2Program> {
        self.program.as_ref()
    }

    /// The common error when the table is input-independent.
    pub fn epsilon(&self) -> Option<f64> {
        let (lo, hi) = self
            .error
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| {
                (lo.min(e), hi.max(e))
            });
        (hi - lo <= CLASSIFICATION_TOLERANCE).then(|| self.error.iter().sum::<f64>() / self.error.len() as f64)
    }

    pub fn report(&self) -> StrategyReport {
        StrategyReport::from_success(self.arity(), self.error.iter().map(|e| 1.0 - e).collect())
    }

    /// New gate `g(y) = self(pre(y)) ⊕ post(y)` using perfect XORs.
    ///
    /// Fails unless this composition computes `target`.
    pub fn compose_affine(&self, target: BooleanFunction, pre: &[AffineForm], post: &AffineForm) -> Result<Self> {
        if pre.len() != self.arity() {
            return Err(Error::ArityMismatch {
                expected: self.arity(),
                actual: pre.len(),
            });
        }
        let n = target.arity();
        let inner = |y: u64| -> u64 {
            pre.iter()
                .enumerate()
                .fold(0, |acc, (i, f)| acc | ((f.eval_index(y) as u64) << i))
        };
        for y in 0..1u64 << n {
            if self.target.eval_index(inner(y)) ^ post.eval_index(y) != target.eval_index(y) {
                return Err(Error::InvalidParameter(format!(
                    "affine composition does not compute the target on input {y}"
                )));
            }
        }
        let error = (0..1u64 << n).map(|y| self.error(inner(y))).collect();
        let program = self.program.as_ref().map(|p| p.substitute(n, pre, post)).transpose()?;
        Ok(Self { target, error, program })
    }

    fn require_target(&self, expected: &BooleanFunction, name: &str) -> Result<()> {
        if &self.target != expected {
            return Err(Error::WrongTarget {
                expected: name.into(),
                found: self.target.to_text().trim().replace('\n', " "),
            });
        }
        Ok(())
    }
}

/// AND from the CHSH box, evaluated exactly.
pub fn chsh_and_gate() -> NoisyGate {
    NoisyGate::from_program(programs::chsh_and(), BooleanFunction::and()).expect("two-input program")
}

/// AND from the uniform mixture of its four affine approximations.
pub fn noncontextual_and_gate() -> NoisyGate {
    NoisyGate::from_program(programs::noncontextual_and(), BooleanFunction::and()).expect("two-input program")
}

fn form(mask: u64, constant: bool) -> AffineForm {
    AffineForm::new(3, mask, constant).expect("three-input form")
}

/// 3-MAJ(a,b,c) = AND(a⊕b, a⊕c) ⊕ a.
pub fn maj3_from_and(and_gate: &NoisyGate) -> Result<NoisyGate> {
    and_gate.require_target(&BooleanFunction::and(), "and")?;
    and_gate.compose_affine(
        BooleanFunction::majority(3)?,
        &[form(0b011, false), form(0b101, false)],
        &form(0b001, false),
    )
}

/// XNAND(a,b₁,b₂) = AND(a⊕b₁, a⊕b₁⊕b₂) ⊕ a ⊕ 1.
pub fn xnand_from_and(and_gate: &NoisyGate) -> Result<NoisyGate> {
    and_gate.require_target(&BooleanFunction::and(), "and")?;
    and_gate.compose_affine(
        BooleanFunction::xnand(),
        &[form(0b011, false), form(0b111, false)],
        &form(0b001, true),
    )
}

/// k-MAJ compiled to a GHZ program and run on the noisy GHZ box.
pub fn kmaj_from_noisy_ghz(k: usize, epsilon: f64) -> Result<NoisyGate> {
    let maj = BooleanFunction::majority(k)?;
    let program = ghzc::compile(&maj)?;
    NoisyGate::from_program(ghzc::run_as_l2program(&program, epsilon)?, maj)
}

fn check_odd(k: usize) -> Result<()> {
    if k.is_multiple_of(2) {
        return Err(Error::EvenMajority(k));
    }
    if k < 3 {
        return Err(Error::InvalidParameter(format!("k must be at least 3, got {k}")));
    }
    Ok(())
}

fn big(n: impl Into<BigInt>) -> BigRational {
    BigRational::from_integer(n.into())
}

fn pow2(e: usize) -> BigRational {
    big(BigInt::one() << e)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Threshold {
    pub k: usize,
    pub beta: BigRational,
}

/// β_k = 1/2 − 2^(k−2) / (k·C(k−1, (k−1)/2)).
pub fn beta(k: usize) -> Result<Threshold> {
    check_odd(k)?;
    let c = central_binomial(((k - 1) / 2) as u64);
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let beta = half - pow2(k - 2) / big(BigInt::from(c) * BigInt::from(k));
    Ok(Threshold { k, beta })
}

/// ν(k-MAJ)/2^k as an exact rational.
pub fn kmaj_affine_error(k: usize) -> Result<BigRational> {
    Ok(big(BigInt::from(kmaj_nonlinearity(k)?)) / pow2(k))
}

/// ν(k-MAJ)/2^k − β_k.
pub fn gap(k: usize) -> Result<BigRational> {
    Ok(kmaj_affine_error(k)? - beta(k)?.beta)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub k: usize,
    pub gap: BigRational,
    pub beta: BigRational,
    /// ε = ν(k-MAJ)/2^k − Δ, clamped at 0.
    pub epsilon: BigRational,
    /// Set when ν/2^k − Δ ≤ 0, so any ε → 0⁺ works.
    pub trivial: bool,
}

/// Smallest odd k ≤ `max_k` with gap(k) < Δ, plus the witness ε.
///
/// A float scan of `1/(2kr) − r/2` with `r = C(k−1,(k−1)/2)/2^(k−1)` finds
/// the crossing; exact arithmetic decides every k near it.
pub fn min_k_for_violation(delta: &BigRational, max_k: usize) -> Result<Violation> {
    if !delta.is_positive() {
        return Err(Error::InvalidParameter(format!(
            "violation must be positive, got {delta}"
        )));
    }
    let delta_f = big_ratio_f64(delta);
    let mut r = 0.5; // k = 3: C(2,1)/4
    let mut k = 3;
    while k <= max_k {
        let gap_f = 1.0 / (2.0 * k as f64 * r) - r / 2.0;
        if gap_f < delta_f * (1.0 + 1e-9) {
            let g = gap(k)?;
            if &g < delta {
                let nu = kmaj_affine_error(k)?;
                let beta = beta(k)?.beta;
                let raw = nu - delta;
                let trivial = !raw.is_positive();
                let epsilon = if trivial { BigRational::zero() } else { raw };
                debug_assert!(epsilon < beta);
                return Ok(Violation {
                    k,
                    gap: g,
                    beta,
                    epsilon,
                    trivial,
                });
            }
        }
        // r_{k+2} = r_k · (k)(k+1) / (4·((k+1)/2)²)
        let m = (k + 1) as f64 / 2.0;
        r *= (k as f64) * (k + 1) as f64 / (4.0 * m * m);
        k += 2;
    }
    Err(Error::CapExceeded {
        what: "majority size",
        size: max_k,
        cap: max_k,
    })
}

/// `k,beta,nu_over_2k,gap` rows with exact and float columns for odd
/// `k ∈ [3, kmax]`.
pub fn threshold_rows(kmax: usize) -> Result<Vec<ThresholdRow>> {
    check_odd(kmax)?;
    (3..=kmax)
        .step_by(2)
        .map(|k| {
            let beta = beta(k)?.beta;
            let nu = kmaj_affine_error(k)?;
            let gap = &nu - &beta;
            Ok(ThresholdRow { k, beta, nu, gap })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThresholdRow {
    pub k: usize,
    pub beta: BigRational,
    pub nu: BigRational,
    pub gap: BigRational,
}

pub fn threshold_csv(rows: &[ThresholdRow]) -> String {
    let mut out = String::from("k,beta,nu_over_2k,gap,beta_float,nu_over_2k_float,gap_float,gap_decreasing\n");
    for (i, r) in rows.iter().enumerate() {
        // The first row has no predecessor and is flagged true.
        let decreasing = i == 0 || r.gap < rows[i - 1].gap;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.k,
            ratio(&r.beta),
            ratio(&r.nu),
            ratio(&r.gap),
            sig9(big_ratio_f64(&r.beta)),
            sig9(big_ratio_f64(&r.nu)),
            sig9(big_ratio_f64(&r.gap)),
            decreasing,
        ));
    }
    out
}

fn check_recursion_args(k: usize, epsilon: f64) -> Result<()> {
    if k.is_multiple_of(2) {
        return Err(Error::EvenMajority(k));
    }
    if k > RECURSION_K_CAP {
        return Err(Error::ArityLimit {
            arity: k,
            limit: RECURSION_K_CAP,
        });
    }
    if !(0.0..=0.5).contains(&epsilon) {
        return Err(Error::NoiseOutOfRange(epsilon));
    }
    Ok(())
}

/// P(majority of k i.i.d. bits, each flipped with probability p, is wrong).
fn majority_wrong(k: usize, p: f64) -> f64 {
    let q = 1.0 - p;
    // C(k,j) built up term by term; stays finite for k ≤ RECURSION_K_CAP
    let mut c = 1.0f64;
    let mut sum = 0.0;
    for j in 0..=k {
        if j > k / 2 {
            sum += c * p.powi(j as i32) * q.powi((k - j) as i32);
        }
        c = c * (k - j) as f64 / (j + 1) as f64;
    }
    sum
}

/// p′ = ε + (1−2ε)·Σ_{j>k/2} C(k,j) p^j (1−p)^(k−j).
pub fn maj_error_recursion(k: usize, epsilon: f64, p: f64) -> Result<f64> {
    check_recursion_args(k, epsilon)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("error probability {p} outside [0, 1]")));
    }
    Ok(epsilon + (1.0 - 2.0 * epsilon) * majority_wrong(k, p))
}

/// dp′/dp = (1−2ε)·k·C(k−1,m)·p^m(1−p)^m with m = (k−1)/2.
pub fn maj_error_derivative(k: usize, epsilon: f64, p: f64) -> Result<f64> {
    check_recursion_args(k, epsilon)?;
    let m = (k - 1) / 2;
    let c = (0..m).fold(1.0f64, |c, i| c * (2 * i + 1) as f64 * 2.0 / (i + 1) as f64);
    Ok((1.0 - 2.0 * epsilon) * k as f64 * c * (p * (1.0 - p)).powi(m as i32))
}

/// Exact dp′/dp at p = 1/2 for rational ε; equals 1 exactly at ε = β_k.
pub fn derivative_at_half(k: usize, epsilon: &BigRational) -> Result<BigRational> {
    check_odd(k)?;
    let c = BigInt::from(central_binomial(((k - 1) / 2) as u64));
    let one_minus = BigRational::one() - epsilon * big(2);
    Ok(one_minus * big(c * BigInt::from(k)) / pow2(k - 1))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FixedPoint {
    pub p: f64,
    pub derivative: f64,
    pub attracting: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecursionAnalysis {
    pub k: usize,
    pub epsilon: f64,
    /// Fixed points in [0, 1/2], increasing; 1/2 is always last.
    pub fixed_points: Vec<FixedPoint>,
    /// Smallest attracting fixed point below 1/2.
    pub eta: Option<f64>,
}

const SCAN_STEPS: usize = 20_000;
const BISECTION_TOLERANCE: f64 = 1e-12;

/// Fixed points of the recursion on [0, 1/2] by grid scan and bisection.
pub fn fixed_point(k: usize, epsilon: f64) -> Result<RecursionAnalysis> {
    check_recursion_args(k, epsilon)?;
    let g = |p: f64| epsilon + (1.0 - 2.0 * epsilon) * majority_wrong(k, p) - p;
    let upper = 0.5 - 1e-7;
    let h = upper / SCAN_STEPS as f64;
    let mut roots = Vec::new();
    let mut prev = (0.0, g(0.0));
    if prev.1 == 0.0 {
        roots.push(0.0);
    }
    for i in 1..=SCAN_STEPS {
        let p = i as f64 * h;
        let v = g(p);
        if v == 0.0 {
            roots.push(p);
        } else if prev.1 != 0.0 && (prev.1 < 0.0) != (v < 0.0) {
            let (mut lo, mut hi, lo_neg) = (prev.0, p, prev.1 < 0.0);
            while hi - lo > BISECTION_TOLERANCE {
                let mid = 0.5 * (lo + hi);
                if (g(mid) < 0.0) == lo_neg {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev = (p, v);
    }
    roots.push(0.5);
    let fixed_points = roots
        .into_iter()
        .map(|p| {
            let derivative = maj_error_derivative(k, epsilon, p)?;
            Ok(FixedPoint {
                p,
                derivative,
                attracting: derivative.abs() < 1.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let eta = fixed_points.iter().find(|f| f.attracting && f.p < 0.5).map(|f| f.p);
    Ok(RecursionAnalysis {
        k,
        epsilon,
        fixed_points,
        eta,
    })
}

/// Iterates the recursion from `p0` until successive values differ by at
/// most `tolerance` or `max_steps` is reached; returns the trajectory.
pub fn iterate_recursion(k: usize, epsilon: f64, p0: f64, tolerance: f64, max_steps: usize) -> Result<Vec<f64>> {
    let mut traj = vec![p0];
    let mut p = p0;
    for _ in 0..max_steps {
        let next = maj_error_recursion(k, epsilon, p)?;
        traj.push(next);
        if (next - p).abs() <= tolerance {
            break;
        }
        p = next;
    }
    Ok(traj)
}

/// Exact rational comparison `ε < β_k` for a float ε.
pub fn below_threshold(k: usize, epsilon: f64) -> Result<bool> {
    let e =
        BigRational::from_float(epsilon).ok_or_else(|| Error::InvalidParameter(format!("non-finite ε {epsilon}")))?;
    Ok(e < beta(k)?.beta)
}

/// Parses "0.09", "3/20" or "1e-3" into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad rational `{s}`")))?;
        let d: BigInt = d
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad rational `{s}`")))?;
        if d.is_zero() {
            return Err(Error::InvalidParameter(format!("zero denominator in `{s}`")));
        }
        return Ok(BigRational::new(n, d));
    }
    let (mantissa, exp) = match s.split_once(['e', 'E']) {
        Some((m, e)) => (
            m,
            e.parse::<i32>()
                .map_err(|_| Error::InvalidParameter(format!("bad exponent in `{s}`")))?,
        ),
        None => (s, 0),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits = format!("{int}{frac}");
    let n: BigInt = digits
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("bad decimal `{s}`")))?;
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10u8);
    Ok(if scale >= 0 {
        big(n * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(n, num_traits::pow(ten, (-scale) as usize))
    })
}

/// Float value of an exact rational, for callers outside this module.
pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}
