//! Multiplexed evaluation of NAND formulas with noisy gates.
//!
//! Each logical bit is a bundle of `W` wires. A compute stage feeds wire
//! `i` of the output through XNAND(aᵢ, b_{σ₁(i)}, b_{σ₂(i)}), which is
//! NAND(a, b) when both b copies agree. A restore stage replaces every wire
//! by a noisy k-MAJ of `k` wires chosen by independent permutations. The
//! result is read as the majority of the output bundle; a tie counts as an
//! error.

pub mod formula;
mod montecarlo;

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use formula::{FormulaDag, Operand};
pub use montecarlo::{simulate_monte_carlo, Estimate, MonteCarloOptions};

use crate::boolfn::{format_bits, BooleanFunction};
use crate::error::{Error, Result};
use crate::export::sig9;
use crate::gates::{below_threshold, maj_error_recursion, NoisyGate};

/// Compute stages warn when their operand errors differ by more.
pub const EQUAL_ERROR_TOLERANCE: f64 = 0.05;

/// Largest restore arity evaluated by pattern enumeration.
pub const RESTORE_ENUMERATION_CAP: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct CircuitGates {
    pub xnand: NoisyGate,
    pub kmaj: NoisyGate,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stage {
    /// Copies input `input` onto every wire.
    Input { input: usize },
    /// Wire j is k-MAJ of `source[perm[0][j]]`, …, `source[perm[k−1][j]]`.
    Restore { source: usize, wiring: Vec<Vec<u32>> },
    /// Wire i is XNAND(a[i], b[σ₁(i)], b[σ₂(i)]) with σ₂(i) = σ₁((i + W/2) mod W).
    Compute { a: usize, b: usize, sigma1: Vec<u32> },
}

/// Stage `i` writes bundle `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReliableCircuit {
    formula: FormulaDag,
    width: usize,
    k: usize,
    rounds: usize,
    seed: u64,
    gates: CircuitGates,
    stages: Vec<Stage>,
    output: usize,
    warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BuildParams {
    pub width: usize,
    pub k: usize,
    pub rounds: usize,
    pub seed: u64,
}

fn permutation(rng: &mut ChaCha8Rng, width: usize) -> Vec<u32> {
    let mut p: Vec<u32> = (0..width as u32).collect();
    p.shuffle(rng);
    p
}

/// Builds the multiplexed circuit.
///
/// Every raw input and every compute stage is followed by `rounds` restore
/// stages. An operand read by several consumers is copied once per
/// consumer by an extra restore stage.
pub fn build(formula: &FormulaDag, params: BuildParams, gates: CircuitGates) -> Result<ReliableCircuit> {
    let BuildParams { width, k, rounds, seed } = params;
    if width == 0 {
        return Err(Error::InvalidParameter("bundle width must be positive".into()));
    }
    if gates.xnand.target() != &BooleanFunction::xnand() {
        return Err(Error::WrongTarget {
            expected: "xnand".into(),
            found: gates.xnand.target().to_text().trim().replace('\n', " "),
        });
    }
    let needs_restore = rounds > 0 || formula.nodes().iter().flatten().any(|&o| formula.consumers(o) > 1);
    if needs_restore {
        if k != gates.kmaj.arity() || gates.kmaj.target() != &BooleanFunction::majority(k)? {
            return Err(Error::WrongTarget {
                expected: format!("{k}-maj"),
                found: gates.kmaj.target().to_text().trim().replace('\n', " "),
            });
        }
        if width < k {
            return Err(Error::InvalidParameter(format!(
                "bundle width {width} is smaller than the restore arity {k}"
            )));
        }
    }

    let mut warnings = Vec::new();
    if needs_restore {
        match gates.kmaj.epsilon() {
            Some(e) if below_threshold(k, e)? => {}
            Some(e) => warnings.push(format!("restore gate error {} is not below beta_{k}", sig9(e))),
            None => warnings.push("restore gate error depends on its input".into()),
        }
    }
    match gates.xnand.epsilon() {
        Some(m) if m < 0.5 => {}
        Some(m) => warnings.push(format!("compute gate error {} is not below 1/2", sig9(m))),
        None => {
            if gates.xnand.error_table().iter().any(|&e| e >= 0.5) {
                warnings.push("compute gate error reaches 1/2 on some input".into());
            }
        }
    }

    let mut plan = Planner {
        formula,
        width,
        k,
        rounds,
        rng: ChaCha8Rng::seed_from_u64(seed),
        stages: Vec::new(),
        copies: HashMap::new(),
        warnings,
    };
    for i in 0..formula.arity() {
        plan.stages.push(Stage::Input { input: i });
        plan.settle(Operand::Input(i));
    }
    for (n, [a, b]) in formula.nodes().iter().enumerate() {
        let (ba, bb) = (plan.take(*a), plan.take(*b));
        let sigma1 = permutation(&mut plan.rng, width);
        plan.stages.push(Stage::Compute { a: ba, b: bb, sigma1 });
        plan.settle(Operand::Node(n));
    }
    let output = plan.take(formula.output());
    let Planner { stages, warnings, .. } = plan;

    Ok(ReliableCircuit {
        formula: formula.clone(),
        width,
        k,
        rounds,
        seed,
        gates,
        stages,
        output,
        warnings,
    })
}

struct Planner<'a> {
    formula: &'a FormulaDag,
    width: usize,
    k: usize,
    rounds: usize,
    rng: ChaCha8Rng,
    stages: Vec<Stage>,
    /// Bundles holding each operand, one per pending consumer.
    copies: HashMap<Operand, Vec<usize>>,
    warnings: Vec<String>,
}

impl Planner<'_> {
    fn restore(&mut self, mut source: usize, times: usize) -> usize {
        for _ in 0..times {
            let wiring = (0..self.k).map(|_| permutation(&mut self.rng, self.width)).collect();
            self.stages.push(Stage::Restore { source, wiring });
            source = self.stages.len() - 1;
        }
        source
    }

    /// Restores the bundle just written for `operand` and makes one copy
    /// per consumer when it has several.
    fn settle(&mut self, operand: Operand) {
        let base = self.restore(self.stages.len() - 1, self.rounds);
        let uses = self.formula.consumers(operand);
        let list = if uses > 1 {
            self.warnings.push(format!(
                "operand {} feeds {uses} gates; copies come from one restore each and are only approximately independent",
                describe(self.formula, operand)
            ));
            (0..uses).map(|_| self.restore(base, 1)).collect()
        } else {
            vec![base]
        };
        self.copies.insert(operand, list);
    }

    fn take(&mut self, operand: Operand) -> usize {
        self.copies
            .get_mut(&operand)
            .and_then(|v| if v.len() > 1 { v.pop() } else { v.last().copied() })
            .expect("operand bundle exists")
    }
}

fn describe(formula: &FormulaDag, o: Operand) -> String {
    match o {
        Operand::Input(i) => formula.input_names()[i].clone(),
        Operand::Node(n) => format!("node {n}"),
    }
}

impl ReliableCircuit {
    pub fn formula(&self) -> &FormulaDag {
        &self.formula
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn gates(&self) -> &CircuitGates {
        &self.gates
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn output_bundle(&self) -> usize {
        self.output
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Second b-operand wire of a compute stage.
    pub(crate) fn sigma2(&self, sigma1: &[u32], i: usize) -> u32 {
        sigma1[(i + self.width / 2) % self.width]
    }

    /// Logical value carried by every bundle for input `x`.
    pub fn bundle_values(&self, x: u64) -> Vec<bool> {
        let mut values: Vec<bool> = Vec::with_capacity(self.stages.len());
        for s in &self.stages {
            let v = match s {
                Stage::Input { input } => (x >> input) & 1 == 1,
                Stage::Restore { source, .. } => values[*source],
                Stage::Compute { a, b, .. } => !(values[*a] && values[*b]),
            };
            values.push(v);
        }
        values
    }

    /// Per-wire error after each stage, assuming i.i.d. errors within a
    /// bundle.
    pub fn analytic_trajectory(&self, x: u64) -> Vec<f64> {
        let values = self.bundle_values(x);
        let mut p: Vec<f64> = Vec::with_capacity(self.stages.len());
        for s in &self.stages {
            let next = match s {
                Stage::Input { .. } => 0.0,
                Stage::Restore { source, .. } => restore_error(&self.gates.kmaj, values[*source], p[*source]),
                Stage::Compute { a, b, .. } => {
                    compute_error(&self.gates.xnand, values[*a], values[*b], p[*a], p[*b], self.width == 1)
                }
            };
            p.push(next);
        }
        p
    }

    pub fn simulate_analytic(&self, x: u64) -> AnalyticRun {
        let trajectory = self.analytic_trajectory(x);
        let mut warnings = Vec::new();
        for (i, s) in self.stages.iter().enumerate() {
            if let Stage::Compute { a, b, .. } = s {
                let gap = (trajectory[*a] - trajectory[*b]).abs();
                if gap > EQUAL_ERROR_TOLERANCE {
                    warnings.push(format!(
                        "stage {i}: operand errors {} and {} differ by more than {EQUAL_ERROR_TOLERANCE}",
                        sig9(trajectory[*a]),
                        sig9(trajectory[*b])
                    ));
                }
            }
        }
        let wire_error = trajectory[self.output];
        AnalyticRun {
            input: x,
            expected: self.formula.evaluate(x),
            wire_error,
            logical_error: majority_readout_error(self.width, wire_error),
            trajectory,
            warnings,
        }
    }

    /// Analytic run for every input assignment.
    pub fn analytic_report(&self) -> SimulationReport {
        let runs: Vec<AnalyticRun> = (0..1u64 << self.formula.arity())
            .map(|x| self.simulate_analytic(x))
            .collect();
        let mut warnings = self.warnings.clone();
        for r in &runs {
            for w in &r.warnings {
                warnings.push(format!("input {}: {w}", format_bits(r.input, self.formula.arity())));
            }
        }
        let rows = runs
            .iter()
            .map(|r| InputRow {
                input: r.input,
                expected: r.expected,
                wire_error: r.wire_error,
                analytic: r.logical_error,
                empirical: None,
            })
            .collect();
        SimulationReport::new(self.formula.arity(), self.width, rows, warnings)
    }
}

/// Wire error after a restore stage whose input wires carry `value` with
/// i.i.d. error `p`.
fn restore_error(gate: &NoisyGate, value: bool, p: f64) -> f64 {
    let k = gate.arity();
    if let Some(eps) = gate.epsilon() {
        if let Ok(next) = maj_error_recursion(k, eps, p) {
            return next;
        }
    }
    // input-dependent table: enumerate error patterns
    assert!(k <= RESTORE_ENUMERATION_CAP, "restore arity {k} too large to enumerate");
    let full = if value { (1u64 << k) - 1 } else { 0 };
    let mut out = 0.0;
    for e in 0..1u64 << k {
        let flips = e.count_ones() as i32;
        let prob = p.powi(flips) * (1.0 - p).powi(k as i32 - flips);
        let input = full ^ e;
        let majority_wrong = flips as usize > k / 2;
        let g = gate.error(input);
        out += prob * if majority_wrong { 1.0 - g } else { g };
    }
    out
}

/// Wire error after a compute stage: enumerates the error patterns of
/// (a, b₁, b₂) against NAND(a, b). With `shared_b` both b inputs are the
/// same wire.
fn compute_error(gate: &NoisyGate, a: bool, b: bool, pa: f64, pb: f64, shared_b: bool) -> f64 {
    let want = !(a && b);
    let xnand = BooleanFunction::xnand();
    let mut out = 0.0;
    for pattern in 0..8u64 {
        let (ea, e1, e2) = (pattern & 1 == 1, pattern & 2 == 2, pattern & 4 == 4);
        if shared_b && e1 != e2 {
            continue;
        }
        let pr_a = if ea { pa } else { 1.0 - pa };
        let pr_b = if shared_b {
            if e1 {
                pb
            } else {
                1.0 - pb
            }
        } else {
            (if e1 { pb } else { 1.0 - pb }) * (if e2 { pb } else { 1.0 - pb })
        };
        let input = ((a ^ ea) as u64) | (((b ^ e1) as u64) << 1) | (((b ^ e2) as u64) << 2);
        let wrong = xnand.eval_index(input) != want;
        let g = gate.error(input);
        out += pr_a * pr_b * if wrong { 1.0 - g } else { g };
    }
    out
}

/// P(majority of `width` i.i.d. wires with error `p` is wrong), ties
/// counted as wrong.
pub fn majority_readout_error(width: usize, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    // log-space binomial pmf
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let mut log_c = 0.0f64;
    let mut sum = 0.0;
    for j in 0..=width {
        if 2 * j >= width {
            sum += (log_c + j as f64 * lp + (width - j) as f64 * lq).exp();
        }
        log_c += ((width - j) as f64).ln() - ((j + 1) as f64).ln();
    }
    sum.min(1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalyticRun {
    pub input: u64,
    pub expected: bool,
    pub trajectory: Vec<f64>,
    pub wire_error: f64,
    pub logical_error: f64,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InputRow {
    pub input: u64,
    pub expected: bool,
    /// Analytic per-wire error of the output bundle.
    pub wire_error: f64,
    /// Analytic error of the majority readout.
    pub analytic: f64,
    pub empirical: Option<Estimate>,
}

impl InputRow {
    /// |empirical − analytic| ≤ max(3σ, 0.01), σ from the analytic value.
    pub fn agrees(&self) -> Option<bool> {
        self.empirical.as_ref().map(|e| {
            let sigma = (self.analytic * (1.0 - self.analytic) / e.trials as f64).sqrt();
            (e.rate - self.analytic).abs() <= (3.0 * sigma).max(0.01)
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationReport {
    pub arity: usize,
    pub width: usize,
    pub rows: Vec<InputRow>,
    /// Worst-input analytic error δ.
    pub delta: f64,
    /// Worst-input upper confidence bound, when sampled.
    pub delta_upper: Option<f64>,
    pub warnings: Vec<String>,
}

impl SimulationReport {
    pub fn new(arity: usize, width: usize, rows: Vec<InputRow>, warnings: Vec<String>) -> Self {
        let delta = rows.iter().map(|r| r.analytic).fold(0.0, f64::max);
        let delta_upper = rows
            .iter()
            .map(|r| r.empirical.as_ref().map(|e| e.rate + e.half_width))
            .collect::<Option<Vec<f64>>>()
            .filter(|v| !v.is_empty())
            .map(|v| v.into_iter().fold(0.0, f64::max));
        Self {
            arity,
            width,
            rows,
            delta,
            delta_upper,
            warnings,
        }
    }

    pub fn all_agree(&self) -> Option<bool> {
        self.rows
            .iter()
            .map(InputRow::agrees)
            .collect::<Option<Vec<bool>>>()
            .map(|v| v.iter().all(|&b| b))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("input,expected,wire_error,analytic_error,empirical_error,ci_half_width,agrees\n");
        for r in &self.rows {
            let (emp, hw) = r
                .empirical
                .as_ref()
                .map_or((String::new(), String::new()), |e| (sig9(e.rate), sig9(e.half_width)));
            let agrees = r.agrees().map_or(String::new(), |a| a.to_string());
            out.push_str(&format!(
                "{},{},{},{},{emp},{hw},{agrees}\n",
                format_bits(r.input, self.arity),
                r.expected as u8,
                sig9(r.wire_error),
                sig9(r.analytic),
            ));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CertificationMode {
    Analytic,
    Empirical,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certification {
    pub reliable: bool,
    pub mode: CertificationMode,
    pub delta: f64,
    pub bound: f64,
}

/// Reliable iff δ ≤ 1/2 − margin.
pub fn certify_delta(delta: f64, margin: f64) -> Result<bool> {
    if !(margin > 0.0 && margin < 0.5) {
        return Err(Error::InvalidParameter(format!("margin {margin} outside (0, 1/2)")));
    }
    Ok(delta <= 0.5 - margin)
}

/// Uses the Monte Carlo upper confidence bound when the report has one,
/// else the analytic δ.
pub fn certify(report: &SimulationReport, margin: f64) -> Result<Certification> {
    let (mode, delta) = match report.delta_upper {
        Some(u) => (CertificationMode::Empirical, u),
        None => (CertificationMode::Analytic, report.delta),
    };
    Ok(Certification {
        reliable: certify_delta(delta, margin)?,
        mode,
        delta,
        bound: 0.5 - margin,
    })
}

pub fn certify_analytic(report: &SimulationReport, margin: f64) -> Result<Certification> {
    Ok(Certification {
        reliable: certify_delta(report.delta, margin)?,
        mode: CertificationMode::Analytic,
        delta: report.delta,
        bound: 0.5 - margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{chsh_and_gate, maj3_from_and, noncontextual_and_gate, xnand_from_and};

    const SIN2_PI_8: f64 = 0.146_446_609_406_726_24;

    pub(crate) fn chsh_gates() -> CircuitGates {
        let and = chsh_and_gate();
        CircuitGates {
            xnand: xnand_from_and(&and).unwrap(),
            kmaj: maj3_from_and(&and).unwrap(),
        }
    }

    pub(crate) fn perfect_gates(k: usize) -> CircuitGates {
        CircuitGates {
            xnand: NoisyGate::perfect(BooleanFunction::xnand()),
            kmaj: NoisyGate::perfect(BooleanFunction::majority(k).unwrap()),
        }
    }

    fn params(width: usize, rounds: usize) -> BuildParams {
        BuildParams {
            width,
            k: 3,
            rounds,
            seed: 7,
        }
    }

    #[test]
    fn single_nand_one_wire() {
        let f = FormulaDag::parse("(nand a b)").unwrap();
        let c = build(&f, params(1, 0), perfect_gates(3)).unwrap();
        let r = c.analytic_report();
        assert_eq!(r.delta, 0.0);
        for row in &r.rows {
            assert_eq!(row.expected, f.evaluate(row.input));
        }
        let noisy = CircuitGates {
            xnand: xnand_from_and(&chsh_and_gate()).unwrap(),
            kmaj: NoisyGate::perfect(BooleanFunction::majority(3).unwrap()),
        };
        let c = build(&f, params(1, 0), noisy).unwrap();
        for row in c.analytic_report().rows {
            assert!((row.wire_error - SIN2_PI_8).abs() < 1e-12);
        }
    }

    #[test]
    fn perfect_gates_give_zero_error_everywhere() {
        let f = FormulaDag::balanced_tree(2).unwrap();
        let c = build(&f, params(9, 2), perfect_gates(3)).unwrap();
        for x in 0..16 {
            let run = c.simulate_analytic(x);
            assert!(run.trajectory.iter().all(|&p| p == 0.0));
            assert_eq!(run.expected, f.evaluate(x));
        }
    }

    #[test]
    fn chsh_gates_build_without_warnings() {
        let f = FormulaDag::balanced_tree(2).unwrap();
        let c = build(&f, params(81, 2), chsh_gates()).unwrap();
        assert!(c.warnings().is_empty(), "{:?}", c.warnings());
        // 4 inputs and 3 computes, each followed by 2 restores
        assert_eq!(c.stages().len(), 4 * 3 + 3 * 3);
    }

    #[test]
    fn degraded_restore_warns() {
        let f = FormulaDag::balanced_tree(2).unwrap();
        let mut gates = chsh_gates();
        gates.kmaj = NoisyGate::uniform(BooleanFunction::majority(3).unwrap(), 0.2).unwrap();
        let c = build(&f, params(81, 2), gates).unwrap();
        assert!(c.warnings().iter().any(|w| w.contains("beta_3")));
    }

    #[test]
    fn build_errors() {
        let f = FormulaDag::balanced_tree(1).unwrap();
        assert!(build(&f, params(2, 1), perfect_gates(3)).is_err());
        assert!(build(&f, params(0, 0), perfect_gates(3)).is_err());
        let wrong = CircuitGates {
            xnand: NoisyGate::perfect(BooleanFunction::and()),
            kmaj: NoisyGate::perfect(BooleanFunction::majority(3).unwrap()),
        };
        assert!(matches!(build(&f, params(3, 1), wrong), Err(Error::WrongTarget { .. })));
        assert!(build(&f, BuildParams { k: 5, ..params(9, 1) }, perfect_gates(3)).is_err());
    }

    #[test]
    fn reused_operands_get_copies() {
        let f = FormulaDag::parse("(nand (nand a b) (nand a b))").unwrap();
        let c = build(&f, params(9, 1), perfect_gates(3)).unwrap();
        assert!(c.warnings().iter().any(|w| w.contains("node 0")));
        let restores = c.stages().iter().filter(|s| matches!(s, Stage::Restore { .. })).count();
        // 2 inputs + 2 nodes with one round each, plus 2 copies of node 0
        assert_eq!(restores, 4 + 2);
        for x in 0..4 {
            assert_eq!(c.bundle_values(x)[c.output_bundle()], f.evaluate(x));
        }
    }

    #[test]
    fn wiring_is_seeded() {
        let f = FormulaDag::balanced_tree(2).unwrap();
        let a = build(&f, params(27, 1), perfect_gates(3)).unwrap();
        let b = build(&f, params(27, 1), perfect_gates(3)).unwrap();
        assert_eq!(a.stages(), b.stages());
        let c = build(
            &f,
            BuildParams {
                seed: 8,
                ..params(27, 1)
            },
            perfect_gates(3),
        )
        .unwrap();
        assert_ne!(a.stages(), c.stages());
        for s in a.stages() {
            if let Stage::Compute { sigma1, .. } = s {
                for i in 0..27 {
                    assert_ne!(sigma1[i], a.sigma2(sigma1, i));
                }
            }
        }
    }

    #[test]
    fn restore_stage_example() {
        let and = chsh_and_gate();
        let maj = maj3_from_and(&and).unwrap();
        let p = restore_error(&maj, true, 0.4);
        assert!((p - 0.395_349).abs() < 1e-6);
        // enumeration agrees with the recursion
        let skewed = NoisyGate::new(
            BooleanFunction::majority(3).unwrap(),
            maj.error_table().iter().map(|e| e + 1e-9).collect(),
        )
        .unwrap();
        let mut table = skewed.error_table().to_vec();
        table[5] += 1e-6;
        let skewed = NoisyGate::new(skewed.target().clone(), table).unwrap();
        assert!(skewed.epsilon().is_none());
        assert!((restore_error(&skewed, false, 0.3) - restore_error(&maj, false, 0.3)).abs() < 1e-5);
    }

    #[test]
    fn compute_stage_with_clean_inputs_has_gate_error() {
        let g = xnand_from_and(&noncontextual_and_gate()).unwrap();
        for (a, b) in [(false, false), (false, true), (true, false), (true, true)] {
            assert!((compute_error(&g, a, b, 0.0, 0.0, false) - 0.25).abs() < 1e-12);
        }
    }

    /// Reference: enumerate all 8 wire-value triples directly.
    fn compute_oracle(mu: f64, a: bool, b: bool, pa: f64, pb: f64) -> f64 {
        let mut out = 0.0;
        for va in [false, true] {
            for v1 in [false, true] {
                for v2 in [false, true] {
                    let pr = (if va == a { 1.0 - pa } else { pa })
                        * (if v1 == b { 1.0 - pb } else { pb })
                        * (if v2 == b { 1.0 - pb } else { pb });
                    let table = [true, true, false, false, true, false, true, false];
                    let ideal = table[(va as usize) | (v1 as usize) << 1 | (v2 as usize) << 2];
                    let p_wrong = if ideal != !(a && b) { 1.0 - mu } else { mu };
                    out += pr * p_wrong;
                }
            }
        }
        out
    }

    #[test]
    fn compute_stage_matches_oracle() {
        let g = NoisyGate::uniform(BooleanFunction::xnand(), 0.1).unwrap();
        for (a, b) in [(false, false), (false, true), (true, false), (true, true)] {
            for (pa, pb) in [(0.0, 0.0), (0.2, 0.3), (0.45, 0.05)] {
                let got = compute_error(&g, a, b, pa, pb, false);
                assert!((got - compute_oracle(0.1, a, b, pa, pb)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn majority_readout() {
        assert_eq!(majority_readout_error(1, 0.3), 0.3);
        assert!((majority_readout_error(3, 0.1) - (3.0 * 0.01 * 0.9 + 0.001)).abs() < 1e-12);
        // tie at width 2 counts as wrong: 1 − 0.9²
        assert!((majority_readout_error(2, 0.1) - 0.19).abs() < 1e-12);
        assert_eq!(majority_readout_error(81, 0.0), 0.0);
    }

    #[test]
    fn certification_examples() {
        assert!(certify_delta(0.0, 0.2).unwrap());
        assert!(certify_delta(0.31, 0.15).unwrap());
        assert!(!certify_delta(0.49, 0.1).unwrap());
        assert!(certify_delta(0.1, 0.5).is_err());
        assert!(certify_delta(0.1, 0.0).is_err());
    }

    #[test]
    fn restoration_monotone_in_circuit_stage() {
        let maj = maj3_from_and(&chsh_and_gate()).unwrap();
        let eta = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
        let mut p = eta + 1e-6;
        while p < 0.5 - 1e-6 {
            assert!(restore_error(&maj, true, p) < p);
            p += 1e-3;
        }
        let bad = NoisyGate::uniform(BooleanFunction::majority(3).unwrap(), 0.2).unwrap();
        let mut p = 0.0;
        let mut found = false;
        while p < 0.5 {
            found |= restore_error(&bad, true, p) >= p;
            p += 1e-3;
        }
        assert!(found);
    }

    fn tree_delta(depth: u32, rounds: usize, gates: CircuitGates) -> f64 {
        let f = FormulaDag::balanced_tree(depth).unwrap();
        let params = BuildParams {
            width: 81,
            k: 3,
            rounds,
            seed: 1,
        };
        build(&f, params, gates).unwrap().analytic_report().delta
    }

    #[test]
    fn three_level_tree_regression() {
        let d = tree_delta(3, 2, chsh_gates());
        assert!((d - 0.459_056_613_998_246_9).abs() < 1e-9, "{d}");
        // Two rounds leave the output near 1/2; enough rounds certify.
        assert!(!certify_delta(d, 0.05).unwrap());
        for r in [8, 10, 15, 20, 30] {
            let d = tree_delta(3, r, chsh_gates());
            assert!(certify_delta(d, 0.05).unwrap(), "r={r}: {d}");
        }
    }

    #[test]
    fn noncontextual_compute_stage_certifies() {
        let mut gates = chsh_gates();
        gates.xnand = xnand_from_and(&noncontextual_and_gate()).unwrap();
        assert!(gates.xnand.error_table().iter().all(|&e| (e - 0.25).abs() < 1e-12));
        let shallow = tree_delta(2, 2, gates.clone());
        assert!(certify_delta(shallow, 0.05).unwrap(), "{shallow}");
        let deep = tree_delta(3, 30, gates);
        assert!(certify_delta(deep, 0.05).unwrap(), "{deep}");
    }
}
