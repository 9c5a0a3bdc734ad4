//! Storage and readout of the spin-wave qubit at node A.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constants::PhysicalConstants;
use crate::error::{QuantumError, Result};
use crate::quantum::{apply_channel, port_map, FockPair, Outcome};
use crate::source::{AtomPhotonState, JointSpace};
use crate::{Complex, DensityMatrix, KrausChannel, Observable};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FreezingGeometry {
    /// Angle between write and write-out beams, radians.
    pub theta: f64,
    /// Wavelength, m.
    pub lambda: f64,
    /// Raman transfer pair applied.
    pub frozen: bool,
}

impl Default for FreezingGeometry {
    fn default() -> Self {
        Self {
            theta: 3.5_f64.to_radians(),
            lambda: 795e-9,
            frozen: true,
        }
    }
}

impl FreezingGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta >= 0.0 && self.theta < PI / 2.0) || !(self.lambda > 0.0) {
            return Err(QuantumError::InvalidParameter(format!(
                "geometry out of range: theta {} lambda {}",
                self.theta, self.lambda
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Wavevectors {
    /// Spin-wave wavevector magnitude after the write, rad/m.
    pub initial: f64,
    /// Magnitude after the Raman transfer, rad/m.
    pub altered: f64,
    /// The one governing motional dephasing for the given geometry.
    pub active: f64,
}

/// Small-angle magnitudes `2πθ/λ` and `2πθ²/λ`.
pub fn spinwave_wavevectors(g: &FreezingGeometry) -> Wavevectors {
    let initial = 2.0 * PI * g.theta / g.lambda;
    let altered = initial * g.theta;
    Wavevectors {
        initial,
        altered,
        active: if g.frozen { altered } else { initial },
    }
}

/// Distribution of the mains phase at the start of a trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MainsPhases {
    /// Free-running: uniform over a cycle.
    Uniform,
    /// Synchronized: equally likely values, one per attempt slot.
    Discrete(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoherenceParams {
    /// Cloud temperature, K.
    pub temperature: f64,
    /// Atomic mass, kg.
    pub mass: f64,
    /// Amplitude damping time, s.
    pub t1: f64,
    /// Gaussian dephasing time of the intrinsic (non-mains) noise, s.
    pub t2_star: f64,
    /// Bias field, G.
    pub bias_field: f64,
    /// Mains field amplitude, G.
    pub mains_amplitude: f64,
    pub mains_freq: f64,
    pub mains_synced: bool,
    /// Mains phase at the opening of each run window when synchronized, radians.
    pub mains_phase: f64,
    /// Per-mode 1/e motional lifetimes `[⇓, ⇑]`, overriding the geometric value.
    pub mode_lifetimes: Option<[f64; 2]>,
    #[serde(skip)]
    pub constants: PhysicalConstants,
}

impl Default for CoherenceParams {
    fn default() -> Self {
        let constants = PhysicalConstants::default();
        Self {
            temperature: 35e-6,
            mass: constants.m_rb87,
            t1: 1.2e-3,
            t2_star: 856.7e-6,
            bias_field: 0.1,
            mains_amplitude: 0.35e-3,
            mains_freq: 50.0,
            mains_synced: true,
            mains_phase: 0.0,
            mode_lifetimes: None,
            constants,
        }
    }
}

impl CoherenceParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(QuantumError::InvalidParameter(m));
        if !(self.temperature >= 0.0) {
            return bad(format!("non-physical temperature {}", self.temperature));
        }
        for (name, v) in [
            ("mass", self.mass),
            ("t1", self.t1),
            ("t2_star", self.t2_star),
            ("mains_freq", self.mains_freq),
        ] {
            if !(v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.mains_amplitude >= 0.0) {
            return bad(format!("mains_amplitude must be non-negative, got {}", self.mains_amplitude));
        }
        if let Some(taus) = self.mode_lifetimes {
            if taus.iter().any(|t| !(*t > 0.0)) {
                return bad("mode lifetimes must be positive".into());
            }
        }
        Ok(())
    }

    /// Phase accumulated on ⇑ relative to ⇓ from the mains field over `[age, age + t]`
    /// when the field phase at age zero is `phase0`.
    pub fn mains_noise_phase(&self, age: f64, t: f64, phase0: f64) -> f64 {
        let w = 2.0 * PI * self.mains_freq;
        let k = self.constants.larmor_rate() * self.mains_amplitude / w;
        k * ((w * age + phase0).cos() - (w * (age + t) + phase0).cos())
    }

    /// Mains field at time `t` for a given phase.
    pub fn mains_field(&self, t: f64, phase0: f64) -> f64 {
        self.mains_amplitude * (2.0 * PI * self.mains_freq * t + phase0).sin()
    }
}

/// `1/(k·v̄)` with `v̄ = sqrt(k_B T/m)`; infinite for `k = 0` or `T = 0`.
pub fn motional_lifetime(k_mag: f64, c: &CoherenceParams) -> Result<f64> {
    if !(c.temperature >= 0.0) {
        return Err(QuantumError::InvalidParameter(format!(
            "non-physical temperature {}",
            c.temperature
        )));
    }
    if !(k_mag >= 0.0) {
        return Err(QuantumError::InvalidParameter(format!("negative wavevector {k_mag}")));
    }
    let v = (c.constants.k_b * c.temperature / c.mass).sqrt();
    if k_mag == 0.0 || v == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / (k_mag * v))
}

/// Per-mode motional lifetimes `[⇓, ⇑]`.
pub fn mode_lifetimes(c: &CoherenceParams, g: &FreezingGeometry) -> Result<[f64; 2]> {
    match c.mode_lifetimes {
        Some(t) => Ok(t),
        None => {
            let tau = motional_lifetime(spinwave_wavevectors(g).active, c)?;
            Ok([tau, tau])
        }
    }
}

/// Gaussian retrieval factor `exp(−(t/τ)²)`.
pub fn motional_factor(t: f64, tau: f64) -> f64 {
    if tau.is_infinite() {
        1.0
    } else {
        (-(t / tau).powi(2)).exp()
    }
}

/// Stored qubit: the joint atom–photon state plus the bookkeeping needed to
/// continue its evolution.
#[derive(Clone, Debug)]
pub struct AtomQubitA {
    pub state: DensityMatrix,
    pub space: JointSpace,
    pub stored_at: f64,
    /// Time already spent in storage, s.
    pub age: f64,
    /// Motional retrieval factor per spin-wave mode `[⇓, ⇑]`.
    pub retrieval: [f64; 2],
    /// Mains phase at the start of storage, drawn on first use.
    pub mains_phase: Option<f64>,
}

impl AtomQubitA {
    pub fn new(s: AtomPhotonState, stored_at: f64) -> Self {
        Self {
            state: s.state,
            space: s.space,
            stored_at,
            age: 0.0,
            retrieval: [1.0, 1.0],
            mains_phase: None,
        }
    }

    pub fn retrieval_weight(&self) -> f64 {
        0.5 * (self.retrieval[0] + self.retrieval[1])
    }
}

/// Deterministic storage map on the spin-wave modes over `[age, age + t]`:
/// Zeeman rotation, amplitude damping, and Gaussian dephasing.
pub fn storage_channel(fock: &FockPair, age: f64, t: f64, c: &CoherenceParams) -> Result<KrausChannel> {
    let rot = c.constants.larmor_rate() * c.bias_field * t;
    let rotation = KrausChannel::unitary(fock.phase([0.0, rot]))?;
    let damping = fock.transfer(1, 1.0 - (-t / c.t1).exp());
    let s = ((age + t).powi(2) - age.powi(2)) / c.t2_star.powi(2);
    let dephasing = fock.phase_noise(1, |k| Complex::new((-((k * k) as f64) * s).exp(), 0.0));
    rotation.then(&damping)?.then(&dephasing)
}

/// Mains dephasing over `[age, age + t]` averaged over the trial-start phase distribution.
pub fn mains_channel(fock: &FockPair, age: f64, t: f64, c: &CoherenceParams, phases: &MainsPhases) -> KrausChannel {
    let nodes: Vec<f64> = match phases {
        MainsPhases::Discrete(v) => v.clone(),
        MainsPhases::Uniform => {
            // Trapezoid rule is spectrally accurate for periodic integrands once the
            // node count exceeds the largest phase excursion.
            let w = 2.0 * PI * c.mains_freq;
            let span = 2.0 * c.constants.larmor_rate() * c.mains_amplitude / w;
            let n = 64 + (2.0 * fock.cutoff() as f64 * span).ceil() as usize;
            (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect()
        }
    };
    let shifts: Vec<f64> = nodes.iter().map(|&p| c.mains_noise_phase(age, t, p)).collect();
    let inv = 1.0 / shifts.len() as f64;
    fock.phase_noise(1, |k| shifts.iter().map(|&s| Complex::from_polar(inv, -(k as f64) * s)).sum())
}

/// Store for a further `t` seconds. Sub-maps, in order: Zeeman rotation, motional
/// retrieval decay, amplitude damping, Gaussian dephasing, mains phase noise.
pub fn decohere<R: Rng + ?Sized>(
    q: &AtomQubitA,
    t: f64,
    c: &CoherenceParams,
    g: &FreezingGeometry,
    rng: &mut R,
) -> Result<AtomQubitA> {
    if !(t >= 0.0) {
        return Err(QuantumError::InvalidParameter(format!("negative storage time {t}")));
    }
    c.validate()?;
    let mut out = q.clone();
    if t == 0.0 {
        return Ok(out);
    }
    let taus = mode_lifetimes(c, g)?;
    for (m, tau) in taus.iter().enumerate() {
        out.retrieval[m] *= motional_factor(q.age + t, *tau) / motional_factor(q.age, *tau);
    }
    let fock = &q.space.fock;
    let ch = storage_channel(fock, q.age, t, c)?;
    out.state = apply_channel(&out.state, &q.space.on_atom(&ch))?;
    if c.mains_amplitude > 0.0 {
        let phase0 = *out.mains_phase.get_or_insert_with(|| {
            if c.mains_synced {
                c.mains_phase
            } else {
                rng.random::<f64>() * 2.0 * PI
            }
        });
        let shift = c.mains_noise_phase(q.age, t, phase0);
        let u = KrausChannel::unitary(fock.phase([0.0, shift]))?;
        out.state = apply_channel(&out.state, &q.space.on_atom(&u))?;
    }
    out.age = q.age + t;
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Readout {
    NoClick,
    Click(Outcome),
}

/// Click probabilities `[none, + only, − only, both]` of the two readout detectors.
pub fn readout_probabilities(q: &AtomQubitA, basis: &Observable, eta_read: f64) -> Result<[f64; 4]> {
    if !(0.0..=1.0).contains(&eta_read) {
        return Err(QuantumError::InvalidParameter(format!("eta_read {eta_read} outside [0, 1]")));
    }
    let fock = &q.space.fock;
    let eff = [eta_read * q.retrieval[0], eta_read * q.retrieval[1]];
    let lossy = apply_channel(&q.state, &q.space.on_atom(&fock.loss(eff)))?;
    let u = fock.passive(port_map(basis)?).kron(&crate::Matrix::identity(fock.dim()));
    let rotated = u.sandwich(lossy.matrix());
    let mut probs = [0.0; 4];
    for i in 0..q.space.dim() {
        let (atom, _) = q.space.split(i);
        let slot = (atom[0] > 0) as usize + 2 * (atom[1] > 0) as usize;
        probs[slot] += rotated[(i, i)].re;
    }
    Ok(probs)
}

/// Retrieve the spin waves and detect them in `basis`. A double click is
/// resolved to a random outcome.
pub fn readout_a<R: Rng + ?Sized>(q: &AtomQubitA, basis: &Observable, eta_read: f64, rng: &mut R) -> Result<Readout> {
    let probs = readout_probabilities(q, basis, eta_read)?;
    let u = rng.random::<f64>();
    let (none, plus, minus) = (probs[0], probs[1], probs[2]);
    Ok(if u < none {
        Readout::NoClick
    } else if u < none + plus {
        Readout::Click(Outcome::Plus)
    } else if u < none + plus + minus {
        Readout::Click(Outcome::Minus)
    } else if rng.random::<bool>() {
        Readout::Click(Outcome::Plus)
    } else {
        Readout::Click(Outcome::Minus)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{expectation, Tensor};
    use crate::source::{atom_photon_state, SourceParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quiet() -> CoherenceParams {
        CoherenceParams {
            mains_amplitude: 0.0,
            ..Default::default()
        }
    }

    fn stored(chi: f64) -> AtomQubitA {
        let p = SourceParams {
            chi,
            ..Default::default()
        };
        AtomQubitA::new(atom_photon_state(&p, 0.0).unwrap(), 0.0)
    }

    fn block(q: &AtomQubitA) -> DensityMatrix {
        AtomPhotonState {
            state: q.state.clone(),
            space: q.space.clone(),
        }
        .qubit_block()
        .unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn wavevector_examples() {
        let w = spinwave_wavevectors(&FreezingGeometry::default());
        // 2π·0.061087/795e-9 and that times θ
        assert!(rel(w.initial, 4.827_89e5) < 1e-4);
        assert!(rel(w.altered, 2.949_19e4) < 1e-4);
        assert!((w.initial / w.altered - 16.37).abs() < 0.01);
        assert_eq!(w.active, w.altered);
        let flat = spinwave_wavevectors(&FreezingGeometry {
            theta: 0.0,
            ..Default::default()
        });
        assert_eq!((flat.initial, flat.altered), (0.0, 0.0));
    }

    #[test]
    fn lifetime_examples() {
        let c = CoherenceParams::default();
        let frozen = motional_lifetime(spinwave_wavevectors(&FreezingGeometry::default()).active, &c).unwrap();
        assert!(rel(frozen, 586e-6) < 0.02, "{frozen}");
        let g = FreezingGeometry {
            frozen: false,
            ..Default::default()
        };
        let unfrozen = motional_lifetime(spinwave_wavevectors(&g).active, &c).unwrap();
        // v̄ = sqrt(1.380649e-23 × 35e-6 / 1.443161e-25) = 0.057866 m/s
        assert!(rel(unfrozen, 1.0 / (4.827_89e5 * 0.057_866)) < 1e-3);
        assert!(unfrozen > 30e-6 && unfrozen < 45e-6);
        let cold = CoherenceParams {
            temperature: 0.0,
            ..Default::default()
        };
        assert!(motional_lifetime(1e4, &cold).unwrap().is_infinite());
        let hot = CoherenceParams {
            temperature: -1.0,
            ..Default::default()
        };
        assert!(motional_lifetime(1e4, &hot).is_err());
    }

    #[test]
    fn zero_time_is_identity() {
        let q = stored(0.054);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = decohere(&q, 0.0, &CoherenceParams::default(), &FreezingGeometry::default(), &mut rng).unwrap();
        assert_eq!(out.state, q.state);
        assert_eq!(out.retrieval, q.retrieval);
    }

    #[test]
    fn coherence_shrinks_by_e_at_t2() {
        let c = CoherenceParams {
            t1: f64::INFINITY,
            bias_field: 0.0,
            ..quiet()
        };
        let q = stored(1e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = decohere(&q, c.t2_star, &c, &FreezingGeometry::default(), &mut rng).unwrap();
        let before = block(&q).matrix()[(0, 3)].norm();
        let after = block(&out).matrix()[(0, 3)].norm();
        assert!((after / before - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn motional_factor_at_latency() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = decohere(&stored(0.054), 103e-6, &quiet(), &FreezingGeometry::default(), &mut rng).unwrap();
        let tau = mode_lifetimes(&quiet(), &FreezingGeometry::default()).unwrap()[0];
        assert!((out.retrieval_weight() - (-(103e-6 / tau).powi(2)).exp()).abs() < 1e-12);
        assert!((out.retrieval_weight() - 0.97).abs() < 0.005);
    }

    #[test]
    fn deterministic_maps_compose() {
        let c = quiet();
        let g = FreezingGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = stored(0.054);
        let two = decohere(&decohere(&q, 40e-6, &c, &g, &mut rng).unwrap(), 75e-6, &c, &g, &mut rng).unwrap();
        let one = decohere(&q, 115e-6, &c, &g, &mut rng).unwrap();
        assert!(two.state.matrix().max_abs_diff(one.state.matrix()) < 1e-9);
        assert!((two.retrieval_weight() - one.retrieval_weight()).abs() < 1e-12);
    }

    #[test]
    fn synced_mains_is_reproducible_and_composes() {
        let c = CoherenceParams {
            mains_amplitude: 1.61e-3,
            mains_phase: 0.7,
            ..Default::default()
        };
        let g = FreezingGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = stored(0.054);
        let two = decohere(&decohere(&q, 30e-6, &c, &g, &mut rng).unwrap(), 50e-6, &c, &g, &mut rng).unwrap();
        let one = decohere(&q, 80e-6, &c, &g, &mut rng).unwrap();
        assert!(two.state.matrix().max_abs_diff(one.state.matrix()) < 1e-9);
    }

    #[test]
    fn xx_follows_cosine_under_a_monotone_envelope() {
        let c = quiet();
        let g = FreezingGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xx = Observable::pauli_x().tensor(&Observable::pauli_x());
        let q = stored(1e-6);
        let mut last_env = f64::INFINITY;
        for i in 0..40 {
            let t = i as f64 * 23e-6;
            let out = decohere(&q, t, &c, &g, &mut rng).unwrap();
            let phi = c.constants.larmor_rate() * c.bias_field * t;
            let env = (-t / (2.0 * c.t1)).exp() * (-(t / c.t2_star).powi(2)).exp();
            let v = expectation(&block(&out), &xx).unwrap();
            assert!((v - phi.cos() * env).abs() < 1e-9, "t={t} {v}");
            assert!(env <= last_env);
            last_env = env;
        }
    }

    #[test]
    fn averaged_mains_matches_phase_average() {
        // Uniform phase: coherence factor for one excitation is J0(2K|sin(ωt/2)|).
        let c = CoherenceParams {
            mains_amplitude: 1.61e-3,
            mains_synced: false,
            ..Default::default()
        };
        let fock = FockPair::new(2);
        let t = 120e-6;
        let ch = mains_channel(&fock, 0.0, t, &c, &MainsPhases::Uniform);
        let w = 2.0 * PI * c.mains_freq;
        let z = 2.0 * c.constants.larmor_rate() * c.mains_amplitude / w * (w * t / 2.0).sin().abs();
        // Series for J0.
        let mut j0 = 0.0;
        let mut term = 1.0;
        for m in 0..40 {
            if m > 0 {
                term *= -(z * z / 4.0) / (m as f64 * m as f64);
            }
            j0 += term;
        }
        let one = fock.index(1, 0).unwrap();
        let other = fock.index(0, 1).unwrap();
        let mut rho = crate::Matrix::zeros(6);
        for (r, cidx) in [(one, one), (one, other), (other, one), (other, other)] {
            rho[(r, cidx)] = Complex::new(0.5, 0.0);
        }
        let out = ch.apply_matrix(&rho);
        assert!((out[(one, other)].re / 0.5 - j0).abs() < 1e-9);
    }

    #[test]
    fn readout_click_rates() {
        let q = stored(1e-6);
        let space = q.space.clone();
        let heralded = AtomQubitA {
            state: q.state.post_select(|i| space.split(i).0 != [0, 0]).unwrap(),
            ..q
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = Observable::pauli_z();
        assert!((0..1000).all(|_| readout_a(&heralded, &z, 1.0, &mut rng).unwrap() != Readout::NoClick));
        let n = 100_000;
        let clicks = (0..n)
            .filter(|_| readout_a(&heralded, &z, 0.15, &mut rng).unwrap() != Readout::NoClick)
            .count();
        let sigma = (0.15 * 0.85 / n as f64).sqrt();
        assert!((clicks as f64 / n as f64 - 0.15).abs() < 3.0 * sigma);
    }

    #[test]
    fn per_mode_lifetimes_set_mode_retrieval() {
        let c = CoherenceParams {
            mode_lifetimes: Some([416e-6, 517e-6]),
            ..quiet()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = decohere(&stored(0.054), 300e-6, &c, &FreezingGeometry::default(), &mut rng).unwrap();
        assert!((out.retrieval[0] - motional_factor(300e-6, 416e-6)).abs() < 1e-12);
        assert!((out.retrieval[1] - motional_factor(300e-6, 517e-6)).abs() < 1e-12);
    }

    #[test]
    fn outcome_distribution_ignores_retrieval_loss() {
        let q = stored(1e-6);
        let space = q.space.clone();
        let heralded = AtomQubitA {
            state: q.state.post_select(|i| space.split(i).0 != [0, 0]).unwrap(),
            ..q
        };
        let x = Observable::pauli_x();
        let ratio = |r: f64| {
            let p = readout_probabilities(
                &AtomQubitA {
                    retrieval: [r, r],
                    ..heralded.clone()
                },
                &x,
                0.5,
            )
            .unwrap();
            p[1] / (p[1] + p[2])
        };
        assert!((ratio(1.0) - ratio(0.3)).abs() < 1e-12);
    }
}
