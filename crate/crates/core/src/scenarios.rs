//! Named example assemblages.
//!
//! * `pentagon`: one input, five outcomes `σ_a = |φ_a⟩⟨φ_a|/5` with Bloch
//!   vectors `(cos 2πa/5, sin 2πa/5, 0)`.
//! * `xtetra`: `|Φ⁺⟩` measured in the Pauli-X basis (input 0, padded with two
//!   zero outcomes) and with the tetrahedral POVM `{|φ_a⟩⟨φ_a|/2}` (input 1).
//! * `mub3`: the maximally entangled qutrit measured in the computational and
//!   Fourier bases, mixed with the white-noise assemblage `I/9`.
//! * `povm-counterexample`: `σ_{0|0} = |0⟩⟨0|/2`, `σ_{1|0} = |1⟩⟨1|/2`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use thiserror::Error;

use crate::assemblage::Assemblage;
use crate::numerics::{CVector, HermitianOperator, DEFAULT_EPSILON};

pub const DEFAULT_MUB_NOISE: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("unknown scenario {0:?} (expected pentagon, xtetra, mub3 or povm-counterexample)")]
    UnknownName(String),
    #[error("noise is only meaningful for mub3")]
    NoiseNotAllowed,
    #[error("noise must lie in [0, 1], got {0}")]
    NoiseOutOfRange(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    Pentagon,
    Xtetra,
    Mub3,
    PovmCounterexample,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Pentagon,
        Scenario::Xtetra,
        Scenario::Mub3,
        Scenario::PovmCounterexample,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Pentagon => "pentagon",
            Scenario::Xtetra => "xtetra",
            Scenario::Mub3 => "mub3",
            Scenario::PovmCounterexample => "povm-counterexample",
        }
    }

    /// Builds the scenario. `noise` is accepted only for `mub3`, where it
    /// defaults to [`DEFAULT_MUB_NOISE`].
    pub fn build(self, noise: Option<f64>) -> Result<Assemblage, ScenarioError> {
        if noise.is_some() && self != Scenario::Mub3 {
            return Err(ScenarioError::NoiseNotAllowed);
        }
        Ok(match self {
            Scenario::Pentagon => pentagon(),
            Scenario::Xtetra => xtetra(),
            Scenario::Mub3 => mub3(noise.unwrap_or(DEFAULT_MUB_NOISE))?,
            Scenario::PovmCounterexample => povm_counterexample(),
        })
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| ScenarioError::UnknownName(s.to_string()))
    }
}

pub fn pentagon_bloch(a: usize) -> [f64; 3] {
    let angle = 2.0 * PI * a as f64 / 5.0;
    [angle.cos(), angle.sin(), 0.0]
}

pub fn pentagon() -> Assemblage {
    let blocks = (0..5)
        .map(|a| &HermitianOperator::from_bloch(pentagon_bloch(a)) * 0.2)
        .collect();
    Assemblage::new(vec![blocks]).expect("pentagon shape")
}

pub fn tetrahedron_bloch() -> [[f64; 3]; 4] {
    let third = 1.0 / 3.0;
    [
        [0.0, 0.0, 1.0],
        [(8.0f64 / 9.0).sqrt(), 0.0, -third],
        [-(2.0f64 / 9.0).sqrt(), (2.0f64 / 3.0).sqrt(), -third],
        [-(2.0f64 / 9.0).sqrt(), -(2.0f64 / 3.0).sqrt(), -third],
    ]
}

/// `|Φ⁺⟩⟨Φ⁺|` with `|Φ⁺⟩ = (|00⟩ + |11⟩)/√2`.
pub fn phi_plus() -> HermitianOperator {
    maximally_entangled(2)
}

/// `|Φ_d⟩⟨Φ_d|` with `|Φ_d⟩ = Σ_i |ii⟩/√d`.
pub fn maximally_entangled(d: usize) -> HermitianOperator {
    let mut v = CVector::zeros(d * d);
    let amp = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
    for i in 0..d {
        v[i * d + i] = amp;
    }
    HermitianOperator::projector(&v)
}

/// The two measurements of `xtetra`, indexed `[input][outcome]`.
pub fn xtetra_measurements() -> Vec<Vec<HermitianOperator>> {
    let zero = HermitianOperator::zeros(2);
    let x_basis = vec![
        HermitianOperator::from_bloch([1.0, 0.0, 0.0]),
        HermitianOperator::from_bloch([-1.0, 0.0, 0.0]),
        zero.clone(),
        zero,
    ];
    let tetra = tetrahedron_bloch()
        .iter()
        .map(|&r| &HermitianOperator::from_bloch(r) * 0.5)
        .collect();
    vec![x_basis, tetra]
}

pub fn xtetra() -> Assemblage {
    Assemblage::from_state_and_measurements(&phi_plus(), 2, &xtetra_measurements(), DEFAULT_EPSILON)
        .expect("xtetra measurements are valid")
}

/// Computational (input 0) and Fourier (input 1) projective measurements on a qutrit.
pub fn mub3_measurements() -> Vec<Vec<HermitianOperator>> {
    let computational = (0..3)
        .map(|n| {
            let mut diag = [0.0; 3];
            diag[n] = 1.0;
            HermitianOperator::from_real_diagonal(&diag)
        })
        .collect();
    let fourier = (0..3)
        .map(|k| {
            let v = CVector::from_fn(3, |j, _| {
                Complex64::from_polar(1.0 / 3f64.sqrt(), 2.0 * PI * (j * k) as f64 / 3.0)
            });
            HermitianOperator::projector(&v)
        })
        .collect();
    vec![computational, fourier]
}

/// `(1 - noise) σ^MUB + noise σ^WN`, where every white-noise block is `I/9`.
pub fn mub3(noise: f64) -> Result<Assemblage, ScenarioError> {
    if !(0.0..=1.0).contains(&noise) {
        return Err(ScenarioError::NoiseOutOfRange(noise));
    }
    let mub = Assemblage::from_state_and_measurements(
        &maximally_entangled(3),
        3,
        &mub3_measurements(),
        DEFAULT_EPSILON,
    )
    .expect("MUB measurements are valid");
    let white = Assemblage::new(vec![
        vec![&HermitianOperator::identity(3) * (1.0 / 9.0); 3];
        2
    ])
    .expect("white-noise shape");
    Ok(Assemblage::weighted_sum([(1.0 - noise, &mub), (noise, &white)]).expect("two terms"))
}

pub fn povm_counterexample() -> Assemblage {
    Assemblage::new(vec![vec![
        HermitianOperator::from_real_diagonal(&[0.5, 0.0]),
        HermitianOperator::from_real_diagonal(&[0.0, 0.5]),
    ]])
    .expect("counterexample shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_scenarios_validate() {
        for sc in Scenario::ALL {
            let sigma = sc.build(None).unwrap();
            assert!(sigma.validate(DEFAULT_EPSILON).passed(), "{sc}");
        }
    }

    #[test]
    fn pentagon_marginal_is_maximally_mixed() {
        let m = pentagon().marginal();
        assert!(m.frobenius_distance(&HermitianOperator::from_real_diagonal(&[0.5, 0.5])) < 1e-14);
    }

    #[test]
    fn xtetra_blocks() {
        let sigma = xtetra();
        assert_eq!((sigma.n_outcomes(), sigma.n_inputs()), (4, 2));
        for n in 0..4 {
            assert!((sigma.block(n, 1).trace() - 0.25).abs() < 1e-14);
        }
        let plus_half = &HermitianOperator::from_bloch([1.0, 0.0, 0.0]) * 0.5;
        assert!(sigma.block(0, 0).frobenius_distance(&plus_half) < 1e-14);
        assert_eq!(sigma.block(2, 0).frobenius_norm(), 0.0);
    }

    #[test]
    fn mub3_marginal_is_maximally_mixed() {
        let m = mub3(0.2).unwrap().marginal();
        assert!(m.frobenius_distance(&(&HermitianOperator::identity(3) * (1.0 / 3.0))) < 1e-14);
    }

    #[test]
    fn names_round_trip() {
        for sc in Scenario::ALL {
            assert_eq!(sc.name().parse::<Scenario>().unwrap(), sc);
        }
        assert!("hexagon".parse::<Scenario>().is_err());
    }

    #[test]
    fn noise_rules() {
        assert_eq!(
            Scenario::Pentagon.build(Some(0.1)).unwrap_err(),
            ScenarioError::NoiseNotAllowed
        );
        assert!(matches!(mub3(1.5), Err(ScenarioError::NoiseOutOfRange(_))));
    }
}
