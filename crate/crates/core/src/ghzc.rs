//! Compiles Boolean functions to deterministic, non-adaptive GHZ
//! measurement programs and verifies them.
//!
//! Qubit `T` receives `s_T(x) = ⊕_{i∈T} xᵢ` and measures in the XY plane at
//! angle `Δ_T` when `s_T(x) = 1`, else at 0. The result is the parity of all
//! outcomes XOR `c`. With `Δ_T = −2π·f̂_T` and `c = f(0)` the angles sum to
//! `π·(f(x) ⊕ c)` modulo 2π, so the GHZ parity is `f(x) ⊕ c` with certainty.

use serde::{Deserialize, Serialize};

use crate::boolfn::{parity_expansion, BooleanFunction};
use crate::corrbox::oracle::{statevector_oracle, OracleResource, ORACLE_QUBIT_CAP};
use crate::corrbox::{Angle, CorrelationBox, GhzBox, Plane};
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::mbqc::{BoxSlot, L2Program, ParityMap};

pub const COMPILE_ARITY_CAP: usize = 10;

/// One GHZ qubit: its input subset and its angle increment in units of π.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GhzQubit {
    pub subset: u64,
    pub increment: Dyadic,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct RawGhzProgram {
    arity: usize,
    /// `(subset mask, numerator, denominator)`, angle = π·num/den
    qubits: Vec<(u64, i64, i64)>,
    constant: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGhzProgram", into = "RawGhzProgram")]
pub struct GhzProgram {
    arity: usize,
    qubits: Vec<GhzQubit>,
    constant: bool,
}

impl TryFrom<RawGhzProgram> for GhzProgram {
    type Error = Error;
    fn try_from(raw: RawGhzProgram) -> Result<Self> {
        let qubits = raw
            .qubits
            .into_iter()
            .map(|(subset, num, den)| {
                Ok(GhzQubit {
                    subset,
                    increment: Dyadic::from_fraction(num, den)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        GhzProgram::new(raw.arity, qubits, raw.constant)
    }
}

impl From<GhzProgram> for RawGhzProgram {
    fn from(p: GhzProgram) -> Self {
        RawGhzProgram {
            arity: p.arity,
            qubits: p
                .qubits
                .iter()
                .map(|q| (q.subset, q.increment.numerator(), q.increment.denominator()))
                .collect(),
            constant: p.constant,
        }
    }
}

impl GhzProgram {
    pub fn new(arity: usize, qubits: Vec<GhzQubit>, constant: bool) -> Result<Self> {
        if arity > COMPILE_ARITY_CAP {
            return Err(Error::ArityLimit {
                arity,
                limit: COMPILE_ARITY_CAP,
            });
        }
        for q in &qubits {
            if q.subset == 0 || q.subset >> arity != 0 {
                return Err(Error::InvalidProgram(format!(
                    "qubit subset {:#b} is empty or exceeds arity {arity}",
                    q.subset
                )));
            }
        }
        Ok(Self {
            arity,
            qubits,
            constant,
        })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn qubits(&self) -> &[GhzQubit] {
        &self.qubits
    }

    pub fn constant(&self) -> bool {
        self.constant
    }

    /// Total measured angle for input index `x`, in units of π.
    pub fn phase(&self, x: u64) -> Dyadic {
        self.qubits
            .iter()
            .filter(|q| (q.subset & x).count_ones() % 2 == 1)
            .fold(Dyadic::ZERO, |acc, q| acc + q.increment)
    }

    /// The GHZ box this program measures, angles kept exact.
    pub fn ghz_box(&self, noise: f64) -> Result<GhzBox> {
        let angles = self
            .qubits
            .iter()
            .map(|q| [Angle::zero(Plane::Xy), Angle::pi_multiple(q.increment, Plane::Xy)])
            .collect();
        GhzBox::new(angles, noise)
    }

    fn inputs_for(&self, x: u64) -> Vec<bool> {
        self.qubits
            .iter()
            .map(|q| (q.subset & x).count_ones() % 2 == 1)
            .collect()
    }

    /// Returns a copy with `delta` added to the increment of qubit `index`.
    pub fn perturbed(&self, index: usize, delta: Dyadic) -> Result<Self> {
        let mut p = self.clone();
        let q = p.qubits.get_mut(index).ok_or_else(|| {
            Error::InvalidParameter(format!("no qubit {index} in a {}-qubit program", self.qubits.len()))
        })?;
        q.increment += delta;
        Ok(p)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CompileOptions {
    /// Keep zero-increment qubits so the program has exactly `2ⁿ − 1`.
    pub pad: bool,
}

pub fn compile(f: &BooleanFunction) -> Result<GhzProgram> {
    compile_with(f, CompileOptions::default())
}

pub fn compile_with(f: &BooleanFunction, options: CompileOptions) -> Result<GhzProgram> {
    let n = f.arity();
    if n > COMPILE_ARITY_CAP {
        return Err(Error::ArityLimit {
            arity: n,
            limit: COMPILE_ARITY_CAP,
        });
    }
    let expansion = parity_expansion(f)?;
    let qubits = (1..1u64 << n)
        .map(|t| GhzQubit {
            subset: t,
            increment: expansion.coefficient(t) * -2,
        })
        .filter(|q| options.pad || !q.increment.is_zero())
        .collect();
    GhzProgram::new(n, qubits, f.eval_index(0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub deterministic: bool,
    /// Exact phase congruence per input.
    pub congruent: Vec<bool>,
    /// Closed-form success per input.
    pub success: Vec<f64>,
    /// State-vector success per input, when the program is small enough.
    pub oracle_success: Option<Vec<f64>>,
}

impl VerifyReport {
    pub fn failing_inputs(&self) -> Vec<u64> {
        (0..self.success.len() as u64)
            .filter(|&x| !self.congruent[x as usize] || self.success[x as usize] < 1.0 - 1e-12)
            .collect()
    }
}

pub fn verify(program: &GhzProgram, f: &BooleanFunction) -> Result<VerifyReport> {
    if program.arity() != f.arity() {
        return Err(Error::ArityMismatch {
            expected: f.arity(),
            actual: program.arity(),
        });
    }
    let len = 1u64 << f.arity();
    let congruent = (0..len)
        .map(|x| {
            let want = if f.eval_index(x) ^ program.constant {
                Dyadic::ONE
            } else {
                Dyadic::ZERO
            };
            program.phase(x).rem_two() == want
        })
        .collect::<Vec<_>>();

    let ghz = program.ghz_box(0.0)?;
    let success_of = |x: u64, parity_one: f64| {
        // z = parity ⊕ c
        let z_one = if program.constant { 1.0 - parity_one } else { parity_one };
        if f.eval_index(x) {
            z_one
        } else {
            1.0 - z_one
        }
    };
    let success = (0..len)
        .map(|x| {
            let inputs = program.inputs_for(x);
            let p = if inputs.is_empty() {
                0.0
            } else {
                ghz.parity_probability(&inputs)?
            };
            Ok(success_of(x, p))
        })
        .collect::<Result<Vec<f64>>>()?;

    let qubits = program.qubits().len();
    let oracle_success = if qubits <= ORACLE_QUBIT_CAP {
        let full = (1u64 << qubits) - 1;
        Some(
            (0..len)
                .map(|x| {
                    let inputs = program.inputs_for(x);
                    let p = if inputs.is_empty() {
                        0.0
                    } else {
                        statevector_oracle(OracleResource::Ghz(&ghz), &inputs)?.parity_probability(full)
                    };
                    // rounding in the state vector can leave p a few ulps outside [0, 1]
                    Ok(success_of(x, p.clamp(0.0, 1.0)))
                })
                .collect::<Result<Vec<f64>>>()?,
        )
    } else {
        None
    };

    let deterministic = congruent.iter().all(|&c| c) && success.iter().all(|&s| s >= 1.0 - 1e-12);
    Ok(VerifyReport {
        deterministic,
        congruent,
        success,
        oracle_success,
    })
}

/// Wraps the program as one noisy GHZ box under mod-2 linear control.
///
/// A program without qubits gets one idle qubit measured at angle 0 so
/// that the noise still reaches the output.
pub fn run_as_l2program(program: &GhzProgram, noise: f64) -> Result<L2Program> {
    let mut ghz = program.ghz_box(noise)?;
    let mut inputs: Vec<ParityMap> = program.qubits().iter().map(|q| ParityMap::inputs(q.subset)).collect();
    if inputs.is_empty() {
        ghz = GhzBox::new(vec![[Angle::zero(Plane::Xy); 2]], noise)?;
        inputs.push(ParityMap::default());
    }
    let parties = inputs.len();
    L2Program::new(
        program.arity(),
        vec![BoxSlot {
            resource: CorrelationBox::Ghz(ghz),
            inputs,
        }],
        ParityMap::outputs(0..parties).with_constant(program.constant()),
    )
}
