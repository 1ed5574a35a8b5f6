//! Dense state-vector simulation used to cross-check the closed forms.
//!
//! States are prepared gate by gate (Hadamard plus CNOT fan-out), each
//! qubit is rotated so that its measurement direction becomes Z, and
//! outcome probabilities are read off the squared amplitudes.

use num_complex::Complex64;

use super::{BipartiteBox, GhzBox, OutcomeDistribution, Plane};
use crate::error::{Error, Result};

/// Qubit cap for dense simulation.
pub const ORACLE_QUBIT_CAP: usize = 16;

type Matrix2 = [[Complex64; 2]; 2];

#[derive(Clone, Debug)]
pub struct StateVector {
    qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn zero(qubits: usize) -> Result<Self> {
        if qubits > ORACLE_QUBIT_CAP {
            return Err(Error::CapExceeded {
                what: "state-vector qubit count",
                size: qubits,
                cap: ORACLE_QUBIT_CAP,
            });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { qubits, amps })
    }

    /// `(|0…0⟩ + |1…1⟩)/√2`; for two qubits this is the Bell state.
    pub fn ghz(qubits: usize) -> Result<Self> {
        let mut s = Self::zero(qubits)?;
        if qubits > 0 {
            s.apply(0, &hadamard());
            for t in 1..qubits {
                s.cnot(0, t);
            }
        }
        Ok(s)
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn apply(&mut self, qubit: usize, u: &Matrix2) {
        let bit = 1 << qubit;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let (a0, a1) = (self.amps[i], self.amps[i | bit]);
                self.amps[i] = u[0][0] * a0 + u[0][1] * a1;
                self.amps[i | bit] = u[1][0] * a0 + u[1][1] * a1;
            }
        }
    }

    pub fn cnot(&mut self, control: usize, target: usize) {
        let (c, t) = (1 << control, 1 << target);
        for i in 0..self.amps.len() {
            if i & c != 0 && i & t == 0 {
                self.amps.swap(i, i | t);
            }
        }
    }

    /// Measures every qubit along its own direction and returns the joint
    /// outcome distribution. Consumes the state.
    pub fn measure(mut self, directions: &[(Plane, f64)]) -> Result<OutcomeDistribution> {
        if directions.len() != self.qubits {
            return Err(Error::ArityMismatch {
                expected: self.qubits,
                actual: directions.len(),
            });
        }
        for (q, &(plane, angle)) in directions.iter().enumerate() {
            self.apply(q, &basis_change(plane, angle));
        }
        let probs = self.amps.iter().map(|a| a.norm_sqr()).collect();
        Ok(OutcomeDistribution::from_probabilities(self.qubits, probs))
    }
}

fn hadamard() -> Matrix2 {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [[h, h], [h, -h]]
}

/// Unitary whose rows are the conjugated eigenvectors (+1 first) of the
/// measured observable.
fn basis_change(plane: Plane, angle: f64) -> Matrix2 {
    match plane {
        Plane::Xz => {
            let (s, c) = (angle / 2.0).sin_cos();
            let r = |v: f64| Complex64::new(v, 0.0);
            // |+θ⟩ = (cos θ/2, sin θ/2), |−θ⟩ = (−sin θ/2, cos θ/2)
            [[r(c), r(s)], [r(-s), r(c)]]
        }
        Plane::Xy => {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let phase = Complex64::from_polar(h, -angle);
            let one = Complex64::new(h, 0.0);
            // |±φ⟩ = (1, ±e^{iφ})/√2
            [[one, phase], [one, -phase]]
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum OracleResource<'a> {
    Bipartite(&'a BipartiteBox),
    /// Must be noiseless; the mixture is not simulated.
    Ghz(&'a GhzBox),
}

/// Outcome distribution from dense simulation of the pure resource state.
pub fn statevector_oracle(resource: OracleResource<'_>, inputs: &[bool]) -> Result<OutcomeDistribution> {
    match resource {
        OracleResource::Bipartite(b) => {
            if inputs.len() != 2 {
                return Err(Error::ArityMismatch {
                    expected: 2,
                    actual: inputs.len(),
                });
            }
            let dirs: Vec<(Plane, f64)> = (0..2)
                .map(|p| (Plane::Xz, b.angles[p][inputs[p] as usize].as_radians()))
                .collect();
            StateVector::ghz(2)?.measure(&dirs)
        }
        OracleResource::Ghz(g) => {
            if g.noise() != 0.0 {
                return Err(Error::InvalidParameter(
                    "the state-vector oracle only simulates the pure GHZ state".into(),
                ));
            }
            if inputs.len() != g.parties() {
                return Err(Error::ArityMismatch {
                    expected: g.parties(),
                    actual: inputs.len(),
                });
            }
            let state = StateVector::ghz(g.parties())?;
            let dirs: Vec<(Plane, f64)> = g
                .angles()
                .iter()
                .zip(inputs)
                .map(|(pair, &b)| (Plane::Xy, pair[b as usize].as_radians()))
                .collect();
            state.measure(&dirs)
        }
    }
}
