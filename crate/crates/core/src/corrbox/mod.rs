//! Outcome distributions of the correlation resources: Bell-pair boxes
//! measured in the XZ plane, N-party GHZ boxes measured in the XY plane
//! (optionally mixed with white noise), and mixtures of deterministic
//! local responses.
//!
//! Outcome strings are indexed like truth tables: party `j`'s output is
//! bit `j` of the index. Output 0 stands for eigenvalue +1.

pub mod oracle;

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};

/// Normalization tolerance for emitted distributions.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Party-count cap for explicit enumeration of a joint distribution.
pub const FULL_DISTRIBUTION_CAP: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    /// Direction `cos θ·Z + sin θ·X`.
    Xz,
    /// Direction `cos φ·X + sin φ·Y`.
    Xy,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleValue {
    Radians(f64),
    /// Exact multiple of π, `[numerator, denominator]`.
    PiMultiple(Dyadic),
}

/// A measurement direction within a fixed plane, normalized to `[0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Angle {
    pub value: AngleValue,
    pub plane: Plane,
}

impl Angle {
    pub fn radians(value: f64, plane: Plane) -> Self {
        let mut v = value.rem_euclid(TAU);
        if v >= TAU {
            v = 0.0;
        }
        Self {
            value: AngleValue::Radians(v),
            plane,
        }
    }

    /// `multiple · π`, kept exact.
    pub fn pi_multiple(multiple: Dyadic, plane: Plane) -> Self {
        Self {
            value: AngleValue::PiMultiple(multiple.rem_two()),
            plane,
        }
    }

    pub fn zero(plane: Plane) -> Self {
        Self::pi_multiple(Dyadic::ZERO, plane)
    }

    pub fn as_radians(&self) -> f64 {
        match self.value {
            AngleValue::Radians(v) => v,
            AngleValue::PiMultiple(d) => d.to_f64() * PI,
        }
    }

    pub fn as_pi_multiple(&self) -> Option<Dyadic> {
        match self.value {
            AngleValue::PiMultiple(d) => Some(d),
            AngleValue::Radians(_) => None,
        }
    }
}

/// `cos(π·d)`, exact at multiples of π/2.
fn cos_pi_multiple(d: Dyadic) -> f64 {
    let d = d.rem_two();
    if d == Dyadic::ZERO {
        1.0
    } else if d == Dyadic::ONE {
        -1.0
    } else if d == Dyadic::new(1, 1) || d == Dyadic::new(3, 1) {
        0.0
    } else {
        (PI * d.to_f64()).cos()
    }
}

/// Cosine of a sum of angles; summed exactly when every term is an exact
/// multiple of π.
pub fn cos_of_sum<'a>(angles: impl IntoIterator<Item = &'a Angle>) -> f64 {
    let mut exact = Some(Dyadic::ZERO);
    let mut float = 0.0;
    for a in angles {
        float += a.as_radians();
        exact = match (exact, a.as_pi_multiple()) {
            (Some(acc), Some(d)) => Some((acc + d).rem_two()),
            _ => None,
        };
    }
    match exact {
        Some(d) => cos_pi_multiple(d),
        None => float.cos(),
    }
}

/// Joint distribution over the outputs of `parties` parties.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeDistribution {
    parties: usize,
    probs: Vec<f64>,
}

impl OutcomeDistribution {
    pub(crate) fn from_probabilities(parties: usize, probs: Vec<f64>) -> Self {
        debug_assert_eq!(probs.len(), 1 << parties);
        Self { parties, probs }
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    /// Probability of the outcome string with the given index.
    pub fn probability(&self, outcome: u64) -> f64 {
        self.probs[outcome as usize]
    }

    pub fn probability_of(&self, outcome: &[bool]) -> f64 {
        self.probability(crate::boolfn::index_of(outcome))
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.total() - 1.0).abs() <= NORMALIZATION_TOLERANCE
            && self.probs.iter().all(|&p| p >= -NORMALIZATION_TOLERANCE)
    }

    /// P(⊕_{j ∈ subset} o_j = 1), with `subset` a mask over parties.
    pub fn parity_probability(&self, subset: u64) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|(o, _)| (*o as u64 & subset).count_ones() % 2 == 1)
            .map(|(_, p)| p)
            .sum()
    }

    /// Marginal on the listed parties, in the listed order.
    pub fn marginal(&self, keep: &[usize]) -> OutcomeDistribution {
        let mut probs = vec![0.0; 1 << keep.len()];
        for (o, &p) in self.probs.iter().enumerate() {
            let idx = keep
                .iter()
                .enumerate()
                .fold(0usize, |acc, (i, &party)| acc | (((o >> party) & 1) << i));
            probs[idx] += p;
        }
        OutcomeDistribution {
            parties: keep.len(),
            probs,
        }
    }
}

fn check_inputs(expected: usize, inputs: &[bool]) -> Result<()> {
    if inputs.len() != expected {
        return Err(Error::ArityMismatch {
            expected,
            actual: inputs.len(),
        });
    }
    Ok(())
}

/// Two parties sharing `(|00⟩ + |11⟩)/√2`, each measuring one of two XZ-plane
/// directions selected by its input bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BipartiteBox {
    /// `angles[party][input]`
    pub angles: [[Angle; 2]; 2],
}

impl BipartiteBox {
    pub fn new(first: (f64, f64), second: (f64, f64)) -> Self {
        let a = |v| Angle::radians(v, Plane::Xz);
        Self {
            angles: [[a(first.0), a(first.1)], [a(second.0), a(second.1)]],
        }
    }

    /// The CHSH-based AND box: party 0 measures Z / X, party 1 measures
    /// (Z+X)/√2 / (Z−X)/√2.
    ///
    /// The second direction for party 1 is the (X−Z)/√2 axis with its
    /// outcome labels swapped; with that labeling every input pair yields
    /// `o₀ ⊕ o₁ = AND(b₀, b₁)` with probability cos²(π/8).
    pub fn chsh_and() -> Self {
        let a = |num, log| Angle::pi_multiple(Dyadic::new(num, log), Plane::Xz);
        Self {
            angles: [[a(0, 0), a(1, 1)], [a(1, 2), a(-1, 2)]],
        }
    }

    /// `cos(α − β)`, the correlator `⟨A⊗B⟩` for the selected directions.
    pub fn correlator(&self, inputs: (bool, bool)) -> f64 {
        let alpha = self.angles[0][inputs.0 as usize];
        let beta = self.angles[1][inputs.1 as usize];
        match (alpha.as_pi_multiple(), beta.as_pi_multiple()) {
            (Some(a), Some(b)) => cos_pi_multiple(a - b),
            _ => (alpha.as_radians() - beta.as_radians()).cos(),
        }
    }

    /// `P(o₀, o₁) = (1 + (−1)^(o₀⊕o₁)·cos(α−β)) / 4`.
    pub fn distribution(&self, inputs: (bool, bool)) -> OutcomeDistribution {
        let c = self.correlator(inputs);
        let same = (1.0 + c) / 4.0;
        let diff = (1.0 - c) / 4.0;
        OutcomeDistribution::from_probabilities(2, vec![same, diff, diff, same])
    }

    pub fn parity_probability(&self, inputs: (bool, bool)) -> f64 {
        (1.0 - self.correlator(inputs)) / 2.0
    }
}

/// N parties sharing the GHZ state mixed with white noise,
/// `ρ = (1−2ε)|GHZ⟩⟨GHZ| + 2ε·𝟙/2^N`; each measures an XY-plane direction
/// selected by its input bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GhzBox {
    /// `angles[party][input]`
    angles: Vec<[Angle; 2]>,
    noise: f64,
}

fn check_noise(noise: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&noise) {
        return Err(Error::NoiseOutOfRange(noise));
    }
    Ok(())
}

impl GhzBox {
    pub fn new(angles: Vec<[Angle; 2]>, noise: f64) -> Result<Self> {
        check_noise(noise)?;
        if angles.iter().flatten().any(|a| a.plane != Plane::Xy) {
            return Err(Error::InvalidParameter("GHZ boxes measure in the XY plane".into()));
        }
        Ok(Self { angles, noise })
    }

    /// Box whose parties use the same angle for both inputs.
    pub fn with_fixed_angles(radians: &[f64], noise: f64) -> Result<Self> {
        let angles = radians
            .iter()
            .map(|&r| {
                let a = Angle::radians(r, Plane::Xy);
                [a, a]
            })
            .collect();
        Self::new(angles, noise)
    }

    pub fn parties(&self) -> usize {
        self.angles.len()
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn angles(&self) -> &[[Angle; 2]] {
        &self.angles
    }

    pub fn with_noise(&self, noise: f64) -> Result<Self> {
        check_noise(noise)?;
        Ok(Self {
            angles: self.angles.clone(),
            noise,
        })
    }

    fn selected<'a>(&'a self, inputs: &'a [bool]) -> impl Iterator<Item = &'a Angle> + 'a {
        self.angles.iter().zip(inputs).map(|(pair, &b)| &pair[b as usize])
    }

    /// `(1−2ε)·cos Σφ`, the expectation of the product of all outcomes.
    pub fn full_correlator(&self, inputs: &[bool]) -> Result<f64> {
        check_inputs(self.parties(), inputs)?;
        Ok((1.0 - 2.0 * self.noise) * cos_of_sum(self.selected(inputs)))
    }

    /// P(⊕_j o_j = 1) = (1−2ε)·(1 − cos Σφ)/2 + ε.
    pub fn parity_probability(&self, inputs: &[bool]) -> Result<f64> {
        check_inputs(self.parties(), inputs)?;
        let pure = (1.0 - cos_of_sum(self.selected(inputs))) / 2.0;
        Ok((1.0 - 2.0 * self.noise) * pure + self.noise)
    }

    /// `P(o) = 2^(−N)·(1 + (1−2ε)·(−1)^(⊕o)·cos Σφ)`.
    pub fn distribution(&self, inputs: &[bool]) -> Result<OutcomeDistribution> {
        let n = self.parties();
        if n > FULL_DISTRIBUTION_CAP {
            return Err(Error::CapExceeded {
                what: "GHZ party count",
                size: n,
                cap: FULL_DISTRIBUTION_CAP,
            });
        }
        let corr = self.full_correlator(inputs)?;
        let scale = (n as f64).exp2().recip();
        let probs = (0..1u64 << n)
            .map(|o| {
                let sign = if o.count_ones() % 2 == 1 { -1.0 } else { 1.0 };
                scale * (1.0 + sign * corr)
            })
            .collect();
        Ok(OutcomeDistribution::from_probabilities(n, probs))
    }
}

/// A party's deterministic output `slope·b ⊕ offset` for input bit `b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LocalResponse {
    pub slope: bool,
    pub offset: bool,
}

impl LocalResponse {
    pub const ALL: [LocalResponse; 4] = [
        LocalResponse {
            slope: false,
            offset: false,
        },
        LocalResponse {
            slope: false,
            offset: true,
        },
        LocalResponse {
            slope: true,
            offset: false,
        },
        LocalResponse {
            slope: true,
            offset: true,
        },
    ];

    pub fn respond(&self, input: bool) -> bool {
        (self.slope & input) ^ self.offset
    }
}

/// Convex mixture of deterministic local response tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoncontextualBox {
    parties: usize,
    mixture: Vec<(f64, Vec<LocalResponse>)>,
}

impl NoncontextualBox {
    pub fn new(parties: usize, mixture: Vec<(f64, Vec<LocalResponse>)>) -> Result<Self> {
        if mixture.is_empty() {
            return Err(Error::InvalidMixture("no components".into()));
        }
        for (i, (w, responses)) in mixture.iter().enumerate() {
            if !(w.is_finite() && *w >= 0.0) {
                return Err(Error::InvalidMixture(format!("component {i} has weight {w}")));
            }
            if responses.len() != parties {
                return Err(Error::InvalidMixture(format!(
                    "component {i} covers {} parties, expected {parties}",
                    responses.len()
                )));
            }
        }
        let total: f64 = mixture.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidMixture(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { parties, mixture })
    }

    pub fn deterministic(responses: Vec<LocalResponse>) -> Result<Self> {
        Self::new(responses.len(), vec![(1.0, responses)])
    }

    /// Uniform mixture over the four affine approximations
    /// `0`, `a`, `b`, `a⊕b⊕1` of `AND(a, b)`, each split into local
    /// responses so that the output parity reproduces it.
    pub fn quarter_and() -> Self {
        let r = |slope, offset| LocalResponse { slope, offset };
        let mixture = vec![
            (0.25, vec![r(false, false), r(false, false)]),
            (0.25, vec![r(true, false), r(false, false)]),
            (0.25, vec![r(false, false), r(true, false)]),
            (0.25, vec![r(true, true), r(true, false)]),
        ];
        Self::new(2, mixture).expect("well-formed mixture")
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn mixture(&self) -> &[(f64, Vec<LocalResponse>)] {
        &self.mixture
    }

    fn outcome(responses: &[LocalResponse], inputs: &[bool]) -> u64 {
        responses
            .iter()
            .zip(inputs)
            .enumerate()
            .fold(0, |acc, (j, (r, &b))| acc | ((r.respond(b) as u64) << j))
    }

    pub fn distribution(&self, inputs: &[bool]) -> Result<OutcomeDistribution> {
        check_inputs(self.parties, inputs)?;
        if self.parties > FULL_DISTRIBUTION_CAP {
            return Err(Error::CapExceeded {
                what: "non-contextual party count",
                size: self.parties,
                cap: FULL_DISTRIBUTION_CAP,
            });
        }
        let mut probs = vec![0.0; 1 << self.parties];
        for (w, responses) in &self.mixture {
            probs[Self::outcome(responses, inputs) as usize] += w;
        }
        Ok(OutcomeDistribution::from_probabilities(self.parties, probs))
    }

    /// P(⊕_{j ∈ subset} o_j = 1) with `subset` given as a per-party flag.
    pub fn subset_parity_probability(&self, inputs: &[bool], subset: &[bool]) -> Result<f64> {
        check_inputs(self.parties, inputs)?;
        Ok(self
            .mixture
            .iter()
            .filter(|(_, responses)| {
                responses
                    .iter()
                    .zip(inputs)
                    .zip(subset)
                    .filter(|((r, &b), &sel)| sel && r.respond(b))
                    .count()
                    % 2
                    == 1
            })
            .map(|(w, _)| w)
            .sum())
    }
}

/// Any of the resources a program may draw on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationBox {
    Bipartite(BipartiteBox),
    Ghz(GhzBox),
    Noncontextual(NoncontextualBox),
}

impl CorrelationBox {
    pub fn parties(&self) -> usize {
        match self {
            Self::Bipartite(_) => 2,
            Self::Ghz(b) => b.parties(),
            Self::Noncontextual(b) => b.parties(),
        }
    }

    pub fn distribution(&self, inputs: &[bool]) -> Result<OutcomeDistribution> {
        match self {
            Self::Bipartite(b) => {
                check_inputs(2, inputs)?;
                Ok(b.distribution((inputs[0], inputs[1])))
            }
            Self::Ghz(b) => b.distribution(inputs),
            Self::Noncontextual(b) => b.distribution(inputs),
        }
    }

    /// Parity of a subset of the outputs. For the quantum boxes every
    /// proper, nonempty subset has a uniform parity, so only the full set
    /// needs the closed form.
    pub fn subset_parity_probability(&self, inputs: &[bool], subset: &[bool]) -> Result<f64> {
        check_inputs(self.parties(), inputs)?;
        if subset.len() != self.parties() {
            return Err(Error::ArityMismatch {
                expected: self.parties(),
                actual: subset.len(),
            });
        }
        let selected = subset.iter().filter(|&&s| s).count();
        match self {
            Self::Noncontextual(b) => b.subset_parity_probability(inputs, subset),
            _ if selected == 0 => Ok(0.0),
            _ if selected < self.parties() => Ok(0.5),
            Self::Bipartite(b) => Ok(b.parity_probability((inputs[0], inputs[1]))),
            Self::Ghz(b) => b.parity_probability(inputs),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrbox::oracle::{statevector_oracle, OracleResource};
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    const COS2_PI_8: f64 = 0.853_553_390_593_273_8;

    fn inputs2() -> [(bool, bool); 4] {
        [(false, false), (false, true), (true, false), (true, true)]
    }

    #[test]
    fn equal_angles_are_perfectly_correlated() {
        let b = BipartiteBox::new((0.3, 0.0), (0.3, 0.0));
        assert!((b.distribution((false, false)).parity_probability(0b11)).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_directions_are_uniform() {
        let b = BipartiteBox::new((FRAC_PI_2, 0.0), (0.0, 0.0));
        let d = b.distribution((false, false));
        for o in 0..4 {
            assert!((d.probability(o) - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn chsh_and_succeeds_with_cos2_pi_8_on_every_input() {
        let b = BipartiteBox::chsh_and();
        for (b0, b1) in inputs2() {
            let p_one = b.parity_probability((b0, b1));
            let success = if b0 & b1 { p_one } else { 1.0 - p_one };
            assert!((success - COS2_PI_8).abs() < 1e-12, "{b0} {b1}: {success}");
        }
    }

    #[test]
    fn ghz_parity_examples() {
        let zero = GhzBox::with_fixed_angles(&[0.0, 0.0, 0.0], 0.0).unwrap();
        assert_eq!(zero.parity_probability(&[false; 3]).unwrap(), 0.0);

        let pi = |n| {
            let a = Angle::pi_multiple(Dyadic::ONE, Plane::Xy);
            let z = Angle::zero(Plane::Xy);
            GhzBox::new(vec![[a, a], [z, z]], n).unwrap()
        };
        assert!((pi(0.1).parity_probability(&[false, false]).unwrap() - 0.9).abs() < 1e-15);
        assert_eq!(pi(0.0).parity_probability(&[true, true]).unwrap(), 1.0);
        assert_eq!(pi(0.5).parity_probability(&[true, true]).unwrap(), 0.5);
    }

    #[test]
    fn noise_out_of_range_is_rejected() {
        assert_eq!(
            GhzBox::with_fixed_angles(&[0.0], 0.6).unwrap_err(),
            Error::NoiseOutOfRange(0.6)
        );
        assert!(GhzBox::with_fixed_angles(&[0.0], -0.1).is_err());
    }

    #[test]
    fn ghz_full_distribution_examples() {
        let one = GhzBox::with_fixed_angles(&[0.0], 0.0).unwrap();
        let d = one.distribution(&[false]).unwrap();
        assert_eq!((d.probability(0), d.probability(1)), (1.0, 0.0));

        let three = GhzBox::with_fixed_angles(&[FRAC_PI_2; 3], 0.0).unwrap();
        let d = three.distribution(&[false; 3]).unwrap();
        for o in 0..8 {
            assert!((d.probability(o) - 0.125).abs() < 1e-15);
        }
        let oracle = statevector_oracle(OracleResource::Ghz(&three), &[false; 3]).unwrap();
        for o in 0..8 {
            assert!((oracle.probability(o) - 0.125).abs() < 1e-12);
        }

        let big = GhzBox::with_fixed_angles(&[0.0; 21], 0.0).unwrap();
        assert!(matches!(big.distribution(&[false; 21]), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn oracle_examples() {
        let b = BipartiteBox::chsh_and();
        let closed = b.distribution((true, true));
        let oracle = statevector_oracle(OracleResource::Bipartite(&b), &[true, true]).unwrap();
        for o in 0..4 {
            assert!((closed.probability(o) - oracle.probability(o)).abs() < 1e-12);
        }

        let g = GhzBox::with_fixed_angles(&[FRAC_PI_2, FRAC_PI_2, -FRAC_PI_2], 0.0).unwrap();
        let oracle = statevector_oracle(OracleResource::Ghz(&g), &[false; 3]).unwrap();
        let closed = g.parity_probability(&[false; 3]).unwrap();
        assert!((oracle.parity_probability(0b111) - closed).abs() < 1e-12);

        let g2 = GhzBox::with_fixed_angles(&[0.0, 0.0], 0.0).unwrap();
        let d = statevector_oracle(OracleResource::Ghz(&g2), &[false, false]).unwrap();
        assert!((d.probability(0b00) - 0.5).abs() < 1e-12);
        assert!((d.probability(0b11) - 0.5).abs() < 1e-12);

        let noisy = g2.with_noise(0.1).unwrap();
        assert!(statevector_oracle(OracleResource::Ghz(&noisy), &[false, false]).is_err());
    }

    #[test]
    fn noncontextual_examples() {
        let q = NoncontextualBox::quarter_and();
        for (a, b) in inputs2() {
            let p_one = q.distribution(&[a, b]).unwrap().parity_probability(0b11);
            let error = if a & b { 1.0 - p_one } else { p_one };
            assert_eq!(error, 0.25);
        }

        let r = LocalResponse {
            slope: true,
            offset: true,
        };
        let det = NoncontextualBox::deterministic(vec![r, r]).unwrap();
        let d = det.distribution(&[true, false]).unwrap();
        assert_eq!(d.probability(0b10), 1.0);

        let n = |o| LocalResponse { slope: true, offset: o };
        let coin = NoncontextualBox::new(3, vec![(0.5, vec![n(false); 3]), (0.5, vec![n(true); 3])]).unwrap();
        assert_eq!(
            coin.distribution(&[true, false, true])
                .unwrap()
                .parity_probability(0b111),
            0.5
        );
    }

    #[test]
    fn malformed_mixtures_are_rejected() {
        let r = LocalResponse {
            slope: false,
            offset: false,
        };
        assert!(NoncontextualBox::new(1, vec![]).is_err());
        assert!(NoncontextualBox::new(1, vec![(0.7, vec![r])]).is_err());
        assert!(NoncontextualBox::new(1, vec![(1.5, vec![r]), (-0.5, vec![r])]).is_err());
        assert!(NoncontextualBox::new(2, vec![(1.0, vec![r])]).is_err());
    }

    #[test]
    fn subset_parity_matches_full_distribution() {
        let g = GhzBox::with_fixed_angles(&[0.4, 1.1, 2.0], 0.05).unwrap();
        let boxed = CorrelationBox::Ghz(g.clone());
        let inputs = [true, false, true];
        let full = g.distribution(&inputs).unwrap();
        for mask in 0u64..8 {
            let subset: Vec<bool> = (0..3).map(|j| (mask >> j) & 1 == 1).collect();
            let p = boxed.subset_parity_probability(&inputs, &subset).unwrap();
            assert!((p - full.parity_probability(mask)).abs() < 1e-12);
        }
    }

    #[test]
    fn tsirelson_bound_on_angle_grid() {
        // Success depends only on the differences α_a − β_b, so fix α₀ = 0.
        let steps = 128usize;
        let cos: Vec<f64> = (0..steps).map(|s| (s as f64 * PI / 64.0).cos()).collect();
        let diff = |a: usize, b: usize| cos[(a + steps - b) % steps];
        let mut best = 0.0f64;
        for a1 in 0..steps {
            for b0 in 0..steps {
                for b1 in 0..steps {
                    let alpha = [0, a1];
                    let beta = [b0, b1];
                    let mut worst = 1.0f64;
                    for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                        let c = diff(alpha[i], beta[j]);
                        let success = if i & j == 1 { (1.0 - c) / 2.0 } else { (1.0 + c) / 2.0 };
                        worst = worst.min(success);
                    }
                    best = best.max(worst);
                }
            }
        }
        assert!(best <= COS2_PI_8 + 1e-9, "{best}");
        assert!(best >= COS2_PI_8 - 1e-9, "grid contains the optimum: {best}");
    }

    fn arb_angle() -> impl Strategy<Value = f64> {
        -7.0f64..7.0
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn closed_forms_match_oracle(
            n in 1usize..=4,
            angles in proptest::collection::vec((arb_angle(), arb_angle()), 4),
            inputs in proptest::collection::vec(any::<bool>(), 4),
            bell in (arb_angle(), arb_angle(), arb_angle(), arb_angle()),
        ) {
            let pairs: Vec<[Angle; 2]> = angles[..n]
                .iter()
                .map(|&(a, b)| [Angle::radians(a, Plane::Xy), Angle::radians(b, Plane::Xy)])
                .collect();
            let g = GhzBox::new(pairs, 0.0).unwrap();
            let closed = g.distribution(&inputs[..n]).unwrap();
            let oracle = statevector_oracle(OracleResource::Ghz(&g), &inputs[..n]).unwrap();
            prop_assert!(closed.is_normalized() && oracle.is_normalized());
            for o in 0..1u64 << n {
                prop_assert!((closed.probability(o) - oracle.probability(o)).abs() < 1e-10);
            }

            let b = BipartiteBox::new((bell.0, bell.1), (bell.2, bell.3));
            let ins = (inputs[0], inputs[1]);
            let closed = b.distribution(ins);
            let oracle = statevector_oracle(OracleResource::Bipartite(&b), &[ins.0, ins.1]).unwrap();
            for o in 0..4 {
                prop_assert!((closed.probability(o) - oracle.probability(o)).abs() < 1e-10);
            }
        }

        #[test]
        fn no_signalling(
            n in 2usize..=5,
            angles in proptest::collection::vec((arb_angle(), arb_angle()), 5),
            inputs in proptest::collection::vec(any::<bool>(), 5),
            flip in 0usize..5,
            noise in 0.0f64..=0.5,
        ) {
            let flip = flip % n;
            let pairs: Vec<[Angle; 2]> = angles[..n]
                .iter()
                .map(|&(a, b)| [Angle::radians(a, Plane::Xy), Angle::radians(b, Plane::Xy)])
                .collect();
            let g = GhzBox::new(pairs, noise).unwrap();
            let mut other = inputs[..n].to_vec();
            other[flip] = !other[flip];
            let rest: Vec<usize> = (0..n).filter(|&j| j != flip).collect();
            let m1 = g.distribution(&inputs[..n]).unwrap().marginal(&rest);
            let m2 = g.distribution(&other).unwrap().marginal(&rest);
            for o in 0..1u64 << rest.len() {
                prop_assert!((m1.probability(o) - m2.probability(o)).abs() < 1e-12);
            }
            // single-party marginals are uniform
            let single = g.distribution(&inputs[..n]).unwrap().marginal(&[0]);
            prop_assert!((single.probability(0) - 0.5).abs() < 1e-12);

            let b = BipartiteBox::new((angles[0].0, angles[0].1), (angles[1].0, angles[1].1));
            let (i0, i1) = (inputs[0], inputs[1]);
            let a = b.distribution((i0, i1)).marginal(&[0]);
            let c = b.distribution((i0, !i1)).marginal(&[0]);
            prop_assert!((a.probability(0) - c.probability(0)).abs() < 1e-12);

            let q = NoncontextualBox::quarter_and();
            let a = q.distribution(&[i0, i1]).unwrap().marginal(&[0]);
            let c = q.distribution(&[i0, !i1]).unwrap().marginal(&[0]);
            prop_assert!((a.probability(0) - c.probability(0)).abs() < 1e-12);
        }

        #[test]
        fn parity_is_affine_in_noise(angle in arb_angle(), noise in 0.0f64..=0.5) {
            let g = GhzBox::with_fixed_angles(&[angle, 0.3], 0.0).unwrap();
            let pure = g.parity_probability(&[false, false]).unwrap();
            let noisy = g.with_noise(noise).unwrap().parity_probability(&[false, false]).unwrap();
            let expected = (1.0 - 2.0 * noise) * pure + 2.0 * noise * 0.5;
            prop_assert!((noisy - expected).abs() < 1e-12);
        }
    }
}
