//! Seeded wire-level sampling of a multiplexed circuit.
//!
//! Trials are bit-sliced: one `u64` holds a wire's value in 64 trials.
//! Block `j` of 64 trials for input `x` draws from the ChaCha8 stream
//! `(x << 32) | j` of the master seed, so results do not depend on how
//! blocks are spread over workers.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{InputRow, ReliableCircuit, SimulationReport, Stage};
use crate::error::{Error, Result};
use crate::gates::NoisyGate;

const LANES: u64 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MonteCarloOptions {
    pub trials: u64,
    pub seed: u64,
    /// Worker threads; 1 runs on the calling thread.
    pub workers: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub errors: u64,
    pub trials: u64,
    pub rate: f64,
    /// Normal-approximation 95% half-width.
    pub half_width: f64,
    /// Fraction of wrong wires in the output bundle, over all trials.
    pub wire_rate: f64,
}

impl Estimate {
    pub fn from_counts(errors: u64, trials: u64, wrong_wires: u64, width: usize) -> Self {
        let rate = errors as f64 / trials as f64;
        Self {
            errors,
            trials,
            rate,
            half_width: 1.96 * (rate * (1.0 - rate) / trials as f64).sqrt(),
            wire_rate: wrong_wires as f64 / (trials as f64 * width as f64),
        }
    }
}

/// Error probabilities as 32-bit fixed point, grouped by value.
#[derive(Clone, Debug)]
struct NoiseTable {
    /// `(threshold, patterns with that error)`; zero thresholds dropped.
    groups: Vec<(u64, Vec<u64>)>,
    uniform: Option<u64>,
}

fn fixed_point(p: f64) -> u64 {
    (p.clamp(0.0, 1.0) * 4_294_967_296.0).round() as u64
}

impl NoiseTable {
    fn new(gate: &NoisyGate) -> Self {
        let mut groups: Vec<(u64, Vec<u64>)> = Vec::new();
        for (pattern, &e) in gate.error_table().iter().enumerate() {
            let t = fixed_point(e);
            match groups.iter_mut().find(|g| g.0 == t) {
                Some(g) => g.1.push(pattern as u64),
                None => groups.push((t, vec![pattern as u64])),
            }
        }
        let uniform = (groups.len() == 1).then(|| groups[0].0);
        groups.retain(|g| g.0 != 0);
        Self { groups, uniform }
    }

    /// Flip mask for a gate whose inputs (bit-sliced) are `inputs`.
    fn flips(&self, inputs: &[u64], rng: &mut ChaCha8Rng) -> u64 {
        if let Some(t) = self.uniform {
            return bernoulli_mask(t, rng);
        }
        let mut flips = 0;
        for (t, patterns) in &self.groups {
            let matched = patterns.iter().fold(0u64, |acc, &pat| acc | minterm(inputs, pat));
            if matched != 0 {
                flips |= matched & bernoulli_mask(*t, rng);
            }
        }
        flips
    }
}

fn minterm(inputs: &[u64], pattern: u64) -> u64 {
    inputs
        .iter()
        .enumerate()
        .fold(!0u64, |acc, (i, &w)| acc & if (pattern >> i) & 1 == 1 { w } else { !w })
}

/// 64 independent bits, each 1 with probability `threshold / 2³²`.
///
/// Bit is 1 iff a uniform 32-bit U satisfies U < threshold, decided from
/// the least significant set bit of the threshold upward.
fn bernoulli_mask(threshold: u64, rng: &mut ChaCha8Rng) -> u64 {
    if threshold == 0 {
        return 0;
    }
    if threshold >= 1 << 32 {
        return !0;
    }
    let mut m = 0u64;
    for i in threshold.trailing_zeros()..32 {
        let r = rng.next_u64();
        m = if (threshold >> i) & 1 == 1 { r | m } else { r & m };
    }
    m
}

/// Bit-sliced majority of `inputs` (odd count).
fn majority(inputs: &[u64]) -> u64 {
    if inputs.len() == 3 {
        let (a, b, c) = (inputs[0], inputs[1], inputs[2]);
        return (a & b) | (a & c) | (b & c);
    }
    // vertical counter, then compare with (k+1)/2
    let bits = usize::BITS - inputs.len().leading_zeros();
    let mut counter = vec![0u64; bits as usize];
    for &w in inputs {
        let mut carry = w;
        for c in counter.iter_mut() {
            let next = *c & carry;
            *c ^= carry;
            carry = next;
            if carry == 0 {
                break;
            }
        }
    }
    at_least(&counter, inputs.len().div_ceil(2) as u64)
}

/// Lanes whose counter value is ≥ `threshold`.
fn at_least(counter: &[u64], threshold: u64) -> u64 {
    // greater-or-equal via MSB-first comparison
    let mut gt = 0u64;
    let mut eq = !0u64;
    for (i, &c) in counter.iter().enumerate().rev() {
        let t = if (threshold >> i) & 1 == 1 { !0u64 } else { 0 };
        gt |= eq & c & !t;
        eq &= !(c ^ t);
    }
    if threshold >> counter.len() != 0 {
        return 0;
    }
    gt | eq
}

fn eval_table(gate: &NoisyGate, inputs: &[u64]) -> u64 {
    (0..gate.target().len() as u64)
        .filter(|&p| gate.target().eval_index(p))
        .fold(0, |acc, p| acc | minterm(inputs, p))
}

struct Sampler<'a> {
    circuit: &'a ReliableCircuit,
    kmaj: NoiseTable,
    xnand: NoiseTable,
}

impl Sampler<'_> {
    /// Counts of wrong readouts and wrong output wires over `lanes` trials.
    fn run_block(&self, x: u64, rng: &mut ChaCha8Rng, wires: &mut Vec<u64>, lanes: u64) -> (u64, u64) {
        let c = self.circuit;
        let w = c.width;
        wires.clear();
        wires.resize(c.stages.len() * w, 0);
        let mut scratch = vec![0u64; c.k.max(3)];
        for (s, stage) in c.stages.iter().enumerate() {
            let (done, rest) = wires.split_at_mut(s * w);
            let out = &mut rest[..w];
            match stage {
                Stage::Input { input } => {
                    out.fill(if (x >> input) & 1 == 1 { !0 } else { 0 });
                }
                Stage::Restore { source, wiring } => {
                    let src = &done[source * w..(source + 1) * w];
                    for (j, o) in out.iter_mut().enumerate() {
                        for (t, perm) in wiring.iter().enumerate() {
                            scratch[t] = src[perm[j] as usize];
                        }
                        let ins = &scratch[..wiring.len()];
                        *o = majority(ins) ^ self.kmaj.flips(ins, rng);
                    }
                }
                Stage::Compute { a, b, sigma1 } => {
                    let (sa, sb) = (&done[a * w..(a + 1) * w], &done[b * w..(b + 1) * w]);
                    for (i, o) in out.iter_mut().enumerate() {
                        scratch[0] = sa[i];
                        scratch[1] = sb[sigma1[i] as usize];
                        scratch[2] = sb[c.sigma2(sigma1, i) as usize];
                        let ins = &scratch[..3];
                        *o = eval_table(&c.gates.xnand, ins) ^ self.xnand.flips(ins, rng);
                    }
                }
            }
        }
        let expected = if c.formula.evaluate(x) { !0u64 } else { 0 };
        let out = &wires[c.output * w..(c.output + 1) * w];
        let mask = if lanes == LANES { !0 } else { (1u64 << lanes) - 1 };
        let wrong_wires = out.iter().map(|&v| ((v ^ expected) & mask).count_ones() as u64).sum();
        let mut wrong = 0u64;
        for lane in 0..lanes {
            let bad = out.iter().filter(|&&v| ((v ^ expected) >> lane) & 1 == 1).count();
            // ties count as errors
            if 2 * bad >= w {
                wrong |= 1 << lane;
            }
        }
        ((wrong & mask).count_ones() as u64, wrong_wires)
    }
}

/// Empirical readout error for input `x`.
pub fn simulate_monte_carlo(circuit: &ReliableCircuit, x: u64, options: MonteCarloOptions) -> Result<Estimate> {
    Ok(sample_inputs(circuit, &[x], options)?.remove(0))
}

fn sample_inputs(circuit: &ReliableCircuit, inputs: &[u64], options: MonteCarloOptions) -> Result<Vec<Estimate>> {
    if options.trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is required".into()));
    }
    if options.workers == 0 {
        return Err(Error::InvalidParameter("at least one worker is required".into()));
    }
    let sampler = Sampler {
        circuit,
        kmaj: NoiseTable::new(&circuit.gates.kmaj),
        xnand: NoiseTable::new(&circuit.gates.xnand),
    };
    let blocks = options.trials.div_ceil(LANES);
    let add = |a: (u64, u64), b: (u64, u64)| (a.0 + b.0, a.1 + b.1);
    let count = |x: u64| -> (u64, u64) {
        let block = |wires: &mut Vec<u64>, j: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
            rng.set_stream((x << 32) | j);
            let lanes = (options.trials - j * LANES).min(LANES);
            sampler.run_block(x, &mut rng, wires, lanes)
        };
        if options.workers == 1 {
            let mut wires = Vec::new();
            (0..blocks).map(|j| block(&mut wires, j)).fold((0, 0), add)
        } else {
            (0..blocks)
                .into_par_iter()
                .map_init(Vec::new, block)
                .reduce(|| (0, 0), add)
        }
    };
    let counts: Vec<(u64, u64)> = if options.workers == 1 {
        inputs.iter().map(|&x| count(x)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.workers)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("cannot start workers: {e}")))?;
        pool.install(|| inputs.iter().map(|&x| count(x)).collect())
    };
    Ok(counts
        .into_iter()
        .map(|(e, w)| Estimate::from_counts(e, options.trials, w, circuit.width))
        .collect())
}

impl ReliableCircuit {
    /// Analytic and Monte Carlo results for every input assignment.
    pub fn full_report(&self, options: MonteCarloOptions) -> Result<SimulationReport> {
        let analytic = self.analytic_report();
        let inputs: Vec<u64> = analytic.rows.iter().map(|r| r.input).collect();
        let estimates = sample_inputs(self, &inputs, options)?;
        let rows: Vec<InputRow> = analytic
            .rows
            .into_iter()
            .zip(estimates)
            .map(|(mut r, e)| {
                r.empirical = Some(e);
                r
            })
            .collect();
        Ok(SimulationReport::new(
            analytic.arity,
            analytic.width,
            rows,
            analytic.warnings,
        ))
    }
}
