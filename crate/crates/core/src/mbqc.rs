//! Computation with correlation boxes under mod-2 linear classical control.
//!
//! An [`L2Program`] is a sequence of boxes. Every box input and the final
//! output are [`ParityMap`]s: XORs of selected program inputs, selected
//! outputs of earlier boxes and a constant. No other classical operation
//! is representable.

use std::collections::HashMap;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::boolfn::{format_bits, nonlinearity, AffineForm, BooleanFunction};
use crate::corrbox::{BipartiteBox, CorrelationBox, NoncontextualBox};
use crate::error::{Error, Result};
use crate::export::{ratio, sig9};

/// Cap on the number of live branches during exact execution.
pub const BRANCH_CAP: usize = 1 << 20;

/// Arity cap for the exhaustive non-contextual search.
pub const NONCONTEXTUAL_SEARCH_ARITY: usize = 4;

/// Violations at or below this are reported as inconclusive.
pub const CERTIFICATE_TOLERANCE: f64 = 1e-12;

/// `(⊕_{i ∈ inputs} xᵢ) ⊕ (⊕_{g ∈ outputs} o_g) ⊕ constant`.
///
/// `inputs` is a bit mask over program inputs (x₁ = bit 0); `outputs`
/// lists global output indices, numbered box by box and party by party.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParityMap {
    #[serde(default)]
    pub inputs: u64,
    #[serde(default)]
    pub outputs: Vec<usize>,
    #[serde(default)]
    pub constant: bool,
}

impl ParityMap {
    pub fn input(i: usize) -> Self {
        Self {
            inputs: 1 << i,
            ..Default::default()
        }
    }

    pub fn inputs(mask: u64) -> Self {
        Self {
            inputs: mask,
            ..Default::default()
        }
    }

    pub fn outputs(outputs: impl IntoIterator<Item = usize>) -> Self {
        Self {
            outputs: outputs.into_iter().collect(),
            ..Default::default()
        }
    }

    pub fn constant(value: bool) -> Self {
        Self {
            constant: value,
            ..Default::default()
        }
    }

    pub fn with_constant(mut self, value: bool) -> Self {
        self.constant = value;
        self
    }

    pub fn with_inputs(mut self, mask: u64) -> Self {
        self.inputs = mask;
        self
    }

    fn eval(&self, x: u64, observed: &[u64]) -> bool {
        let mut bit = ((x & self.inputs).count_ones() % 2 == 1) ^ self.constant;
        for &g in &self.outputs {
            bit ^= (observed[g / 64] >> (g % 64)) & 1 == 1;
        }
        bit
    }

    fn normalize(&mut self) {
        // repeated outputs cancel pairwise
        self.outputs.sort_unstable();
        let mut kept: Vec<usize> = Vec::with_capacity(self.outputs.len());
        for g in self.outputs.drain(..) {
            if kept.last() == Some(&g) {
                kept.pop();
            } else {
                kept.push(g);
            }
        }
        self.outputs = kept;
    }
}

/// A box together with the parity map feeding each of its parties.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSlot {
    pub resource: CorrelationBox,
    pub inputs: Vec<ParityMap>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct RawProgram {
    arity: usize,
    slots: Vec<BoxSlot>,
    output: ParityMap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProgram", into = "RawProgram")]
pub struct L2Program {
    arity: usize,
    slots: Vec<BoxSlot>,
    output: ParityMap,
    /// Global index of each slot's first output.
    offsets: Vec<usize>,
    total_outputs: usize,
}

impl TryFrom<RawProgram> for L2Program {
    type Error = Error;
    fn try_from(raw: RawProgram) -> Result<Self> {
        L2Program::new(raw.arity, raw.slots, raw.output)
    }
}

impl From<L2Program> for RawProgram {
    fn from(p: L2Program) -> Self {
        RawProgram {
            arity: p.arity,
            slots: p.slots,
            output: p.output,
        }
    }
}

/// Where a classical bit is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BitSite {
    PartyInput { slot: usize, party: usize },
    Output,
}

/// One computed classical bit and the affine form that produces it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuditEntry {
    pub site: BitSite,
    pub form: ParityMap,
    /// Outputs available when the bit is computed.
    pub available_outputs: usize,
}

impl AuditEntry {
    pub fn is_causal(&self) -> bool {
        self.form.outputs.iter().all(|&g| g < self.available_outputs)
    }
}

impl L2Program {
    pub fn new(arity: usize, slots: Vec<BoxSlot>, mut output: ParityMap) -> Result<Self> {
        if arity > 63 {
            return Err(Error::ArityLimit { arity, limit: 63 });
        }
        let check_inputs = |m: &ParityMap, what: &str| {
            if arity < 64 && m.inputs >> arity != 0 {
                return Err(Error::InvalidProgram(format!(
                    "{what} references inputs beyond arity {arity}"
                )));
            }
            Ok(())
        };
        let mut offsets = Vec::with_capacity(slots.len());
        let mut total = 0;
        let mut slots = slots;
        for (s, slot) in slots.iter_mut().enumerate() {
            if slot.inputs.len() != slot.resource.parties() {
                return Err(Error::InvalidProgram(format!(
                    "box {s} has {} parties but {} input maps",
                    slot.resource.parties(),
                    slot.inputs.len()
                )));
            }
            for (p, map) in slot.inputs.iter_mut().enumerate() {
                map.normalize();
                check_inputs(map, &format!("input map of box {s} party {p}"))?;
                if let Some(&g) = map.outputs.iter().find(|&&g| g >= total) {
                    return Err(Error::InvalidProgram(format!(
                        "box {s} party {p} reads output {g}, which is not produced by an earlier box"
                    )));
                }
            }
            offsets.push(total);
            total += slot.resource.parties();
        }
        output.normalize();
        check_inputs(&output, "output map")?;
        if let Some(&g) = output.outputs.iter().find(|&&g| g >= total) {
            return Err(Error::InvalidProgram(format!(
                "output map reads nonexistent output {g}"
            )));
        }
        Ok(Self {
            arity,
            slots,
            output,
            offsets,
            total_outputs: total,
        })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn slots(&self) -> &[BoxSlot] {
        &self.slots
    }

    pub fn output_map(&self) -> &ParityMap {
        &self.output
    }

    pub fn total_outputs(&self) -> usize {
        self.total_outputs
    }

    /// Lists every classical bit the control computer computes, with its
    /// affine form and the outputs available at that point.
    pub fn audit(&self) -> Vec<AuditEntry> {
        let mut entries = Vec::new();
        for (s, slot) in self.slots.iter().enumerate() {
            for (p, form) in slot.inputs.iter().enumerate() {
                entries.push(AuditEntry {
                    site: BitSite::PartyInput { slot: s, party: p },
                    form: form.clone(),
                    available_outputs: self.offsets[s],
                });
            }
        }
        entries.push(AuditEntry {
            site: BitSite::Output,
            form: self.output.clone(),
            available_outputs: self.total_outputs,
        });
        entries
    }

    /// Last slot whose input maps read each output.
    fn last_reads(&self) -> Vec<Option<usize>> {
        let mut last = vec![None; self.total_outputs];
        for (s, slot) in self.slots.iter().enumerate() {
            for map in &slot.inputs {
                for &g in &map.outputs {
                    last[g] = Some(s);
                }
            }
        }
        last
    }

    /// Exact `[P(z=0), P(z=1)]` for input index `x`.
    ///
    /// Branches are kept only over outputs that later boxes still read; a
    /// box whose outputs feed only the final parity contributes through
    /// its subset-parity probability.
    pub fn output_distribution(&self, x: u64) -> Result<[f64; 2]> {
        let words = self.total_outputs.div_ceil(64).max(1);
        let last = self.last_reads();
        let in_output: Vec<bool> = {
            let mut v = vec![false; self.total_outputs];
            for &g in &self.output.outputs {
                v[g] = true;
            }
            v
        };

        let mut branches: HashMap<Vec<u64>, [f64; 2]> = HashMap::new();
        branches.insert(vec![0; words], [1.0, 0.0]);

        for (s, slot) in self.slots.iter().enumerate() {
            let base = self.offsets[s];
            let parties = slot.resource.parties();
            let selected: Vec<bool> = (0..parties).map(|j| in_output[base + j]).collect();
            let select_mask: u64 = selected
                .iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .fold(0, |acc, (j, _)| acc | (1u64 << j.min(63)));
            let kept: Vec<usize> = (0..parties)
                .filter(|&j| last[base + j].is_some_and(|l| l > s))
                .collect();
            let expiring: Vec<usize> = (0..base).filter(|&g| last[g] == Some(s)).collect();

            let mut next: HashMap<Vec<u64>, [f64; 2]> = HashMap::with_capacity(branches.len());
            for (key, pz) in &branches {
                let inputs: Vec<bool> = slot.inputs.iter().map(|m| m.eval(x, key)).collect();
                let mut cleared = key.clone();
                for &g in &expiring {
                    cleared[g / 64] &= !(1 << (g % 64));
                }
                if kept.is_empty() {
                    let q = slot.resource.subset_parity_probability(&inputs, &selected)?;
                    let e = next.entry(cleared).or_insert([0.0; 2]);
                    e[0] += pz[0] * (1.0 - q) + pz[1] * q;
                    e[1] += pz[0] * q + pz[1] * (1.0 - q);
                } else {
                    let dist = slot.resource.distribution(&inputs)?;
                    for (o, &p) in dist.probabilities().iter().enumerate() {
                        if p == 0.0 {
                            continue;
                        }
                        let mut k = cleared.clone();
                        for &j in &kept {
                            if (o >> j) & 1 == 1 {
                                let g = base + j;
                                k[g / 64] |= 1 << (g % 64);
                            }
                        }
                        let flip = (o as u64 & select_mask).count_ones() % 2 == 1;
                        let e = next.entry(k).or_insert([0.0; 2]);
                        let (z0, z1) = if flip { (pz[1], pz[0]) } else { (pz[0], pz[1]) };
                        e[0] += p * z0;
                        e[1] += p * z1;
                    }
                }
                if next.len() > BRANCH_CAP {
                    return Err(Error::CapExceeded {
                        what: "branch enumeration",
                        size: next.len(),
                        cap: BRANCH_CAP,
                    });
                }
            }
            branches = next;
        }

        let flip = ((x & self.output.inputs).count_ones() % 2 == 1) ^ self.output.constant;
        let [z0, z1] = branches
            .values()
            .fold([0.0, 0.0], |acc, pz| [acc[0] + pz[0], acc[1] + pz[1]]);
        Ok(if flip { [z1, z0] } else { [z0, z1] })
    }

    /// Rewrites the program over new inputs `y`: old input `xᵢ` becomes
    /// `forms[i](y)` and `post(y)` is XORed into the output. The result is
    /// still mod-2 linear.
    pub fn substitute(&self, arity: usize, forms: &[AffineForm], post: &AffineForm) -> Result<L2Program> {
        if forms.len() != self.arity {
            return Err(Error::ArityMismatch {
                expected: self.arity,
                actual: forms.len(),
            });
        }
        if let Some(bad) = forms.iter().chain([post]).find(|f| f.arity != arity) {
            return Err(Error::ArityMismatch {
                expected: arity,
                actual: bad.arity,
            });
        }
        let rewrite = |m: &ParityMap| {
            let mut out = ParityMap {
                inputs: 0,
                outputs: m.outputs.clone(),
                constant: m.constant,
            };
            for (i, f) in forms.iter().enumerate() {
                if (m.inputs >> i) & 1 == 1 {
                    out.inputs ^= f.mask;
                    out.constant ^= f.constant;
                }
            }
            out
        };
        let slots = self
            .slots
            .iter()
            .map(|s| BoxSlot {
                resource: s.resource.clone(),
                inputs: s.inputs.iter().map(rewrite).collect(),
            })
            .collect();
        let mut output = rewrite(&self.output);
        output.inputs ^= post.mask;
        output.constant ^= post.constant;
        L2Program::new(arity, slots, output)
    }

    /// Exact per-input success against `target`.
    pub fn run_exact(&self, target: &BooleanFunction) -> Result<StrategyReport> {
        if target.arity() != self.arity {
            return Err(Error::ArityMismatch {
                expected: self.arity,
                actual: target.arity(),
            });
        }
        let success = (0..1u64 << self.arity)
            .map(|x| {
                let pz = self.output_distribution(x)?;
                Ok(pz[target.eval_index(x) as usize])
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(StrategyReport::from_success(self.arity, success))
    }
}

/// Runs a convex mixture of programs; success is the weighted mean.
pub fn run_mixture(components: &[(f64, &L2Program)], target: &BooleanFunction) -> Result<StrategyReport> {
    if components.is_empty() {
        return Err(Error::InvalidMixture("no components".into()));
    }
    let total: f64 = components.iter().map(|(w, _)| w).sum();
    if components.iter().any(|(w, _)| *w < 0.0) || (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidMixture(format!("weights sum to {total}")));
    }
    let mut success = vec![0.0; 1 << target.arity()];
    for (w, program) in components {
        let r = program.run_exact(target)?;
        for (acc, s) in success.iter_mut().zip(&r.success) {
            *acc += w * s;
        }
    }
    Ok(StrategyReport::from_success(target.arity(), success))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrategyReport {
    pub arity: usize,
    /// Success probability per input index.
    pub success: Vec<f64>,
    pub average_error: f64,
    pub worst_error: f64,
}

impl StrategyReport {
    pub fn from_success(arity: usize, success: Vec<f64>) -> Self {
        let errors = success.iter().map(|s| 1.0 - s);
        let average_error = errors.clone().sum::<f64>() / success.len() as f64;
        let worst_error = errors.fold(0.0, f64::max);
        Self {
            arity,
            success,
            average_error,
            worst_error,
        }
    }

    pub fn error(&self, x: u64) -> f64 {
        1.0 - self.success[x as usize]
    }

    /// `input,success` rows, inputs written as bit strings (x₁ first).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("input,success\n");
        for (x, s) in self.success.iter().enumerate() {
            out.push_str(&format!("{},{}\n", format_bits(x as u64, self.arity), sig9(*s)));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Contextual,
    Inconclusive,
}

/// Signed violation of `ē ≥ ν(f)/2ⁿ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub bound: Rational64,
    pub average_error: f64,
    pub violation: f64,
    pub verdict: Verdict,
}

impl Certificate {
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "bound": ratio(&self.bound),
            "average_error": sig9(self.average_error),
            "violation": sig9(self.violation),
            "verdict": self.verdict,
        })
    }
}

/// `ν(f)/2ⁿ` as an exact rational.
pub fn noncontextual_bound(target: &BooleanFunction) -> Result<Rational64> {
    let nu = nonlinearity(target)?;
    Ok(Rational64::new(nu as i64, 1i64 << target.arity()))
}

/// Δ = ν(f)/2ⁿ − ē. A positive Δ means no non-contextual resource can
/// reproduce the report.
pub fn contextuality_certificate(report: &StrategyReport, target: &BooleanFunction) -> Result<Certificate> {
    if report.arity != target.arity() {
        return Err(Error::ArityMismatch {
            expected: target.arity(),
            actual: report.arity,
        });
    }
    let bound = noncontextual_bound(target)?;
    let violation = *bound.numer() as f64 / *bound.denom() as f64 - report.average_error;
    Ok(Certificate {
        bound,
        average_error: report.average_error,
        violation,
        verdict: if violation > CERTIFICATE_TOLERANCE {
            Verdict::Contextual
        } else {
            Verdict::Inconclusive
        },
    })
}

/// Best deterministic non-contextual strategy found by exhaustive search.
#[derive(Clone, Debug, PartialEq)]
pub struct NoncontextualOptimum {
    pub error: Rational64,
    /// Function computed by the first optimal strategy.
    pub realized: BooleanFunction,
    pub strategies_searched: u64,
}

/// Exhaustive search over two-party deterministic local strategies.
///
/// Party 1's input is any affine form of `x`; party 2's input is any affine
/// form of `x`, optionally XORed with party 1's output; each party answers
/// with one of the four affine responses of its input bit; the output is
/// any XOR of a subset of the two outputs with an affine form of `x`.
/// Mixtures cannot do better than the best pure strategy, so the minimum
/// here is the non-contextual optimum for this scenario.
pub fn best_noncontextual_error(target: &BooleanFunction) -> Result<NoncontextualOptimum> {
    let n = target.arity();
    if n > NONCONTEXTUAL_SEARCH_ARITY {
        return Err(Error::ArityLimit {
            arity: n,
            limit: NONCONTEXTUAL_SEARCH_ARITY,
        });
    }
    let len = 1u32 << n;
    let full: u32 = if len == 32 { !0 } else { (1u32 << len) - 1 };
    let f: u32 = (0..len)
        .filter(|&x| target.eval_index(x as u64))
        .fold(0, |a, x| a | (1 << x));

    // truth tables (over x) of every affine form, constant-0 form first
    let affine: Vec<u32> = (0..1u32 << n)
        .flat_map(|mask| {
            let t = (0..len)
                .filter(|&x| (x & mask).count_ones() % 2 == 1)
                .fold(0u32, |a, x| a | (1 << x));
            [t, t ^ full]
        })
        .collect();
    let respond = |input: u32, r: u8| -> u32 {
        let slope = if r & 2 != 0 { input } else { 0 };
        slope ^ if r & 1 != 0 { full } else { 0 }
    };

    let mut best = (u32::MAX, 0u32);
    let mut searched = 0u64;
    for &in1 in &affine {
        for r1 in 0..4u8 {
            let o1 = respond(in1, r1);
            for &base2 in &affine {
                for adapt in [false, true] {
                    let in2 = base2 ^ if adapt { o1 } else { 0 };
                    for r2 in 0..4u8 {
                        let o2 = respond(in2, r2);
                        for use1 in [false, true] {
                            for use2 in [false, true] {
                                let outs = (if use1 { o1 } else { 0 }) ^ (if use2 { o2 } else { 0 });
                                for &post in &affine {
                                    let z = outs ^ post;
                                    let errors = (z ^ f).count_ones();
                                    searched += 1;
                                    if errors < best.0 {
                                        best = (errors, z);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let realized = BooleanFunction::from_fn(n, |x| (best.1 >> x) & 1 == 1)?;
    Ok(NoncontextualOptimum {
        error: Rational64::new(best.0 as i64, len as i64),
        realized,
        strategies_searched: searched,
    })
}

/// Ready-made programs.
pub mod programs {
    use super::*;

    /// Two inputs into the CHSH AND box; the output is the parity of the
    /// two box outputs.
    pub fn chsh_and() -> L2Program {
        two_party(CorrelationBox::Bipartite(BipartiteBox::chsh_and()))
    }

    /// Same wiring as [`chsh_and`] over the uniform mixture of the four
    /// affine approximations of AND.
    pub fn noncontextual_and() -> L2Program {
        two_party(CorrelationBox::Noncontextual(NoncontextualBox::quarter_and()))
    }

    fn two_party(resource: CorrelationBox) -> L2Program {
        L2Program::new(
            2,
            vec![BoxSlot {
                resource,
                inputs: vec![ParityMap::input(0), ParityMap::input(1)],
            }],
            ParityMap::outputs([0, 1]),
        )
        .expect("well-formed program")
    }

    /// No boxes; outputs a constant.
    pub fn constant(arity: usize, value: bool) -> L2Program {
        L2Program::new(arity, vec![], ParityMap::constant(value)).expect("well-formed program")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrbox::{GhzBox, LocalResponse};
    use proptest::prelude::*;

    const SIN2_PI_8: f64 = 0.146_446_609_406_726_24;

    #[test]
    fn chsh_and_report() {
        let r = programs::chsh_and().run_exact(&BooleanFunction::and()).unwrap();
        for s in &r.success {
            assert!((s - (1.0 - SIN2_PI_8)).abs() < 1e-12);
        }
        assert!((r.average_error - SIN2_PI_8).abs() < 1e-12);
    }

    #[test]
    fn boxless_constant_program() {
        let r = programs::constant(2, false).run_exact(&BooleanFunction::and()).unwrap();
        assert_eq!(r.average_error, 0.25);
        assert_eq!(r.worst_error, 1.0);
    }

    #[test]
    fn arity_mismatch() {
        assert!(matches!(
            programs::chsh_and().run_exact(&BooleanFunction::majority(3).unwrap()),
            Err(Error::ArityMismatch { .. })
        ));
    }

    #[test]
    fn certificates() {
        let and = BooleanFunction::and();
        let chsh = programs::chsh_and().run_exact(&and).unwrap();
        let c = contextuality_certificate(&chsh, &and).unwrap();
        assert!((c.violation - (0.25 - SIN2_PI_8)).abs() < 1e-12);
        assert_eq!(c.verdict, Verdict::Contextual);

        let nc = programs::noncontextual_and().run_exact(&and).unwrap();
        let c = contextuality_certificate(&nc, &and).unwrap();
        assert_eq!(c.violation, 0.0);
        assert_eq!(c.verdict, Verdict::Inconclusive);

        let perfect = StrategyReport::from_success(2, vec![1.0; 4]);
        let c = contextuality_certificate(&perfect, &BooleanFunction::nand()).unwrap();
        assert_eq!(c.violation, 0.25);
    }

    #[test]
    fn noncontextual_search_examples() {
        let and = best_noncontextual_error(&BooleanFunction::and()).unwrap();
        assert_eq!(and.error, Rational64::new(1, 4));
        let maj = best_noncontextual_error(&BooleanFunction::majority(3).unwrap()).unwrap();
        assert_eq!(maj.error, Rational64::new(1, 4));
        for l in AffineForm::all(3) {
            let f = BooleanFunction::affine(&l).unwrap();
            assert_eq!(best_noncontextual_error(&f).unwrap().error, Rational64::new(0, 1));
        }
        assert!(best_noncontextual_error(&BooleanFunction::parity(5).unwrap()).is_err());
    }

    #[test]
    fn noncontextual_search_never_beats_bound_and_is_tight_up_to_arity_3() {
        for n in 0..=3usize {
            for table in 0u64..(1 << (1 << n)) {
                let f = BooleanFunction::from_fn(n, |x| (table >> x) & 1 == 1).unwrap();
                let best = best_noncontextual_error(&f).unwrap();
                let bound = noncontextual_bound(&f).unwrap();
                assert!(best.error >= bound, "{f:?}");
                assert_eq!(best.error, bound, "{f:?}");
                assert!(nonlinearity(&best.realized).unwrap() == 0);
            }
        }
    }

    #[test]
    fn invalid_programs_are_rejected() {
        let slot = |inputs| BoxSlot {
            resource: CorrelationBox::Bipartite(BipartiteBox::chsh_and()),
            inputs,
        };
        // reads its own output
        let err = L2Program::new(
            2,
            vec![slot(vec![ParityMap::outputs([1]), ParityMap::input(1)])],
            ParityMap::default(),
        );
        assert!(matches!(err, Err(Error::InvalidProgram(_))));
        // wrong party count
        let err = L2Program::new(2, vec![slot(vec![ParityMap::input(0)])], ParityMap::default());
        assert!(err.is_err());
        // input beyond arity
        let err = L2Program::new(1, vec![], ParityMap::input(3));
        assert!(err.is_err());
        // nonexistent output
        let err = L2Program::new(1, vec![], ParityMap::outputs([0]));
        assert!(err.is_err());
    }

    #[test]
    fn audit_covers_every_bit_and_is_causal() {
        let p = adaptive_chain();
        let audit = p.audit();
        assert_eq!(audit.len(), 5);
        assert!(audit.iter().all(AuditEntry::is_causal));
        assert_eq!(audit.last().unwrap().site, BitSite::Output);
    }

    /// Two CHSH boxes where the second box's first party reads an output
    /// of the first box.
    fn adaptive_chain() -> L2Program {
        let chsh = CorrelationBox::Bipartite(BipartiteBox::chsh_and());
        L2Program::new(
            2,
            vec![
                BoxSlot {
                    resource: chsh.clone(),
                    inputs: vec![ParityMap::input(0), ParityMap::input(1)],
                },
                BoxSlot {
                    resource: chsh,
                    inputs: vec![ParityMap::outputs([0]).with_inputs(0b01), ParityMap::input(1)],
                },
            ],
            ParityMap::outputs([1, 2, 3]),
        )
        .unwrap()
    }

    /// Brute-force reference: enumerate every joint outcome of all boxes.
    fn brute_force(p: &L2Program, x: u64) -> [f64; 2] {
        fn go(p: &L2Program, x: u64, s: usize, observed: &mut Vec<u64>, prob: f64, acc: &mut [f64; 2]) {
            if s == p.slots().len() {
                let z = p.output_map().eval(x, observed);
                acc[z as usize] += prob;
                return;
            }
            let slot = &p.slots()[s];
            let inputs: Vec<bool> = slot.inputs.iter().map(|m| m.eval(x, observed)).collect();
            let dist = slot.resource.distribution(&inputs).unwrap();
            let base = p.offsets[s];
            for (o, &q) in dist.probabilities().iter().enumerate() {
                let saved = observed.clone();
                for j in 0..slot.resource.parties() {
                    if (o >> j) & 1 == 1 {
                        observed[(base + j) / 64] |= 1 << ((base + j) % 64);
                    }
                }
                go(p, x, s + 1, observed, prob * q, acc);
                *observed = saved;
            }
        }
        let mut acc = [0.0; 2];
        go(
            p,
            x,
            0,
            &mut vec![0; p.total_outputs().div_ceil(64).max(1)],
            1.0,
            &mut acc,
        );
        acc
    }

    #[test]
    fn adaptive_execution_matches_brute_force() {
        let p = adaptive_chain();
        for x in 0..4 {
            let fast = p.output_distribution(x).unwrap();
            let slow = brute_force(&p, x);
            assert!((fast[0] - slow[0]).abs() < 1e-12 && (fast[1] - slow[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_export() {
        let r = programs::chsh_and().run_exact(&BooleanFunction::and()).unwrap();
        let csv = r.to_csv();
        assert!(csv.starts_with("input,success\n00,0.853553391\n"));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn program_serde_round_trip() {
        let p = adaptive_chain();
        let json = serde_json::to_string(&p).unwrap();
        let back: L2Program = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
        let bad = json.replace("\"outputs\":[0]", "\"outputs\":[3]");
        assert!(serde_json::from_str::<L2Program>(&bad).is_err());
    }

    /// Box kind plus per-party (input mask, angle, output-dependence flag).
    type SlotSpec = (u8, Vec<(u64, f64, bool)>);

    fn arb_slot() -> impl Strategy<Value = SlotSpec> {
        (
            0u8..3,
            proptest::collection::vec((0u64..4, -4.0f64..4.0, any::<bool>()), 3),
        )
    }

    fn build_random(spec: &[SlotSpec], output_outputs: u64, noise: f64) -> L2Program {
        let mut slots = Vec::new();
        let mut total = 0usize;
        for (kind, params) in spec {
            let (resource, parties) = match kind {
                0 => (
                    CorrelationBox::Bipartite(BipartiteBox::new(
                        (params[0].1, params[1].1),
                        (params[2].1, params[0].1 * 0.5),
                    )),
                    2,
                ),
                1 => (
                    CorrelationBox::Ghz(
                        GhzBox::with_fixed_angles(&params.iter().map(|p| p.1).collect::<Vec<_>>(), noise).unwrap(),
                    ),
                    3,
                ),
                _ => {
                    let r = |b: bool| LocalResponse { slope: b, offset: !b };
                    (
                        CorrelationBox::Noncontextual(
                            NoncontextualBox::new(
                                2,
                                vec![
                                    (0.3, vec![r(params[0].2), r(params[1].2)]),
                                    (0.7, vec![r(params[2].2), r(true)]),
                                ],
                            )
                            .unwrap(),
                        ),
                        2,
                    )
                }
            };
            let inputs = (0..parties)
                .map(|j| {
                    let (mask, _, adapt) = params[j];
                    let mut m = ParityMap::inputs(mask);
                    if adapt && total > 0 {
                        m.outputs.push((mask as usize) % total);
                    }
                    m
                })
                .collect();
            slots.push(BoxSlot { resource, inputs });
            total += parties;
        }
        let outs = (0..total).filter(|g| (output_outputs >> (g % 64)) & 1 == 1);
        L2Program::new(2, slots, ParityMap::outputs(outs).with_inputs(1)).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn exact_execution_matches_brute_force(
            spec in proptest::collection::vec(arb_slot(), 1..=3),
            out_mask in any::<u64>(),
            noise in 0.0f64..0.5,
        ) {
            let p = build_random(&spec, out_mask, noise);
            for x in 0..4 {
                let fast = p.output_distribution(x).unwrap();
                let slow = brute_force(&p, x);
                prop_assert!((fast[0] - slow[0]).abs() < 1e-12);
                prop_assert!((fast[0] + fast[1] - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn mixture_error_is_weighted_mean(
            a in proptest::collection::vec(arb_slot(), 1..=2),
            b in proptest::collection::vec(arb_slot(), 1..=2),
            w in 0.0f64..=1.0,
        ) {
            let (pa, pb) = (build_random(&a, 0b1011, 0.1), build_random(&b, 0b0110, 0.2));
            let f = BooleanFunction::and();
            let ra = pa.run_exact(&f).unwrap();
            let rb = pb.run_exact(&f).unwrap();
            let rm = run_mixture(&[(w, &pa), (1.0 - w, &pb)], &f).unwrap();
            prop_assert!((rm.average_error - (w * ra.average_error + (1.0 - w) * rb.average_error)).abs() < 1e-12);
            prop_assert!(rm.average_error >= ra.average_error.min(rb.average_error) - 1e-12);
        }
    }
}
