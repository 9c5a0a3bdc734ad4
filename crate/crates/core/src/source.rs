//! Write process at node A: time-bin photon entangled with a two-spin-wave qubit.

use serde::{Deserialize, Serialize};

use crate::constants::PhysicalConstants;
use crate::error::{QuantumError, Result};
use crate::quantum::FockPair;
use crate::{Complex, DensityMatrix, KrausChannel};

/// Atom pair (⇓, ⇑) ⊗ photon pair (E/L or U/D), both truncated at the same cutoff.
///
/// Joint index is `atom * photon_dim + photon`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointSpace {
    pub fock: FockPair,
}

impl JointSpace {
    pub fn new(cutoff: usize) -> Self {
        Self {
            fock: FockPair::new(cutoff),
        }
    }

    pub fn mode_dim(&self) -> usize {
        self.fock.dim()
    }

    pub fn dim(&self) -> usize {
        self.mode_dim() * self.mode_dim()
    }

    pub fn index(&self, atom: [usize; 2], photon: [usize; 2]) -> Option<usize> {
        let a = self.fock.index(atom[0], atom[1])?;
        let p = self.fock.index(photon[0], photon[1])?;
        Some(a * self.mode_dim() + p)
    }

    /// Occupations `(atom, photon)` of a joint index.
    pub fn split(&self, index: usize) -> ([usize; 2], [usize; 2]) {
        let d = self.mode_dim();
        (self.fock.occupation(index / d), self.fock.occupation(index % d))
    }

    pub fn labels(&self, photon_names: [&str; 2]) -> Vec<String> {
        let atom = self.fock.labels(["⇓", "⇑"]);
        let photon = self.fock.labels(photon_names);
        atom.iter()
            .flat_map(|a| photon.iter().map(move |p| format!("{a}⊗{p}")))
            .collect()
    }

    pub fn on_atom(&self, ch: &KrausChannel) -> KrausChannel {
        ch.embed_left(self.mode_dim())
    }

    pub fn on_photon(&self, ch: &KrausChannel) -> KrausChannel {
        ch.embed_right(self.mode_dim())
    }

    /// Indices with exactly one atomic and one photonic excitation, ordered
    /// `⇓E, ⇓L, ⇑E, ⇑L`.
    pub fn qubit_indices(&self) -> [usize; 4] {
        let ix = |a: [usize; 2], p: [usize; 2]| self.index(a, p).expect("cutoff ≥ 1");
        [ix([1, 0], [1, 0]), ix([1, 0], [0, 1]), ix([0, 1], [1, 0]), ix([0, 1], [0, 1])]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceParams {
    /// Excitation probability per write attempt, split evenly over the two bins.
    pub chi: f64,
    /// Phase at creation, radians.
    pub phi0: f64,
    /// Bias field, gauss.
    pub bias_field: f64,
    pub fock_cutoff: usize,
    /// Scale on every amplitude with two or more excitations, per extra excitation.
    /// 1 is the thermal ladder; 0 removes multi-excitation events.
    pub double_excitation_scale: f64,
    /// Relative imbalance of the two write pulses, in (−1, 1).
    pub asymmetry: f64,
    /// Probability per window of an uncorrelated noise photon in the write-out mode.
    pub write_noise: f64,
    #[serde(skip)]
    pub constants: PhysicalConstants,
}

impl Default for SourceParams {
    fn default() -> Self {
        Self {
            chi: 0.054,
            phi0: 0.0,
            bias_field: 0.1,
            fock_cutoff: 2,
            double_excitation_scale: 1.0,
            asymmetry: 0.0,
            write_noise: 0.0,
            constants: PhysicalConstants::default(),
        }
    }
}

impl SourceParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(QuantumError::InvalidParameter(m.to_string()));
        if !(self.chi > 0.0 && self.chi < 0.2) || self.chi * (1.0 + self.chi) >= 1.0 {
            return bad("chi must lie in (0, 0.2)");
        }
        if self.fock_cutoff < 2 {
            return bad("fock_cutoff must be at least 2");
        }
        if !(self.double_excitation_scale >= 0.0) {
            return bad("double_excitation_scale must be non-negative");
        }
        if !(self.asymmetry.abs() < 1.0) {
            return bad("asymmetry must lie in (-1, 1)");
        }
        if !(0.0..=1.0).contains(&self.write_noise) {
            return bad("write_noise must lie in [0, 1]");
        }
        if !self.bias_field.is_finite() || !self.phi0.is_finite() {
            return bad("bias_field and phi0 must be finite");
        }
        let total: f64 = sector_weights(self).iter().map(|s| s.1).sum();
        if total > 1.0 + 1e-12 {
            return bad("double_excitation_scale too large: branch weights exceed 1");
        }
        Ok(())
    }

    /// Per-bin single-excitation probability `(χ/2)(1 ± asymmetry)`.
    fn bin_probabilities(&self) -> [f64; 2] {
        let half = 0.5 * self.chi;
        [half * (1.0 + self.asymmetry), half * (1.0 - self.asymmetry)]
    }
}

/// `µ_B·B·t/ħ + φ₀`, unwrapped.
pub fn evolution_phase(bias_field: f64, t: f64, phi0: f64, constants: &PhysicalConstants) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(QuantumError::InvalidParameter(format!("negative time {t}")));
    }
    Ok(constants.larmor_rate() * bias_field * t + phi0)
}

/// Weights of each retained `(n_E, n_L)` occupation.
fn sector_weights(p: &SourceParams) -> Vec<([usize; 2], f64)> {
    let [xe, xl] = p.bin_probabilities();
    let vac = (1.0 - xe) * (1.0 - xl);
    let fock = FockPair::new(p.fock_cutoff);
    (0..fock.dim())
        .map(|i| {
            let [ne, nl] = fock.occupation(i);
            let n = ne + nl;
            let mut w = vac * xe.powi(ne as i32) * xl.powi(nl as i32);
            if n >= 2 {
                w *= p.double_excitation_scale.powi(2 * (n as i32 - 1));
            }
            ([ne, nl], w)
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct AtomPhotonState {
    pub state: DensityMatrix,
    pub space: JointSpace,
}

impl AtomPhotonState {
    pub fn weight(&self) -> f64 {
        self.state.weight()
    }

    /// The one-atom, one-photon block as a normalized two-qubit state
    /// (`⇓`, `E` ↔ |0⟩), or `None` when that block is empty.
    pub fn qubit_block(&self) -> Option<DensityMatrix> {
        let idx = self.space.qubit_indices();
        let m = crate::Matrix::from_fn(4, |r, c| self.state.matrix()[(idx[r], idx[c])]);
        if m.trace().re <= 0.0 {
            return None;
        }
        let labels = self.space.labels(photon_names(&self.state));
        let labels = idx.iter().map(|&i| labels[i].clone()).collect();
        DensityMatrix::new_unchecked(m, labels).ok()
    }
}

fn photon_names(state: &DensityMatrix) -> [&'static str; 2] {
    if state.labels().iter().any(|l| l.ends_with('U') || l.ends_with('D')) {
        ["U", "D"]
    } else {
        ["E", "L"]
    }
}

/// Coherent write state at time `t` after creation:
/// `Σ sqrt(w(n_E, n_L)) e^{−i n_L φ(t)} |n_E, n_L⟩_atom |n_E, n_L⟩_photon`.
pub fn atom_photon_state(p: &SourceParams, t: f64) -> Result<AtomPhotonState> {
    p.validate()?;
    let phi = evolution_phase(p.bias_field, t, p.phi0, &p.constants)?;
    let space = JointSpace::new(p.fock_cutoff);
    let mut psi = vec![Complex::new(0.0, 0.0); space.dim()];
    for (occ, w) in sector_weights(p) {
        let i = space.index(occ, occ).expect("occupation within cutoff");
        psi[i] = Complex::from_polar(w.sqrt(), -(occ[1] as f64) * phi);
    }
    let state = DensityMatrix::from_pure(&psi, space.labels(["E", "L"]))?;
    Ok(AtomPhotonState { state, space })
}

/// Pure components of the write state grouped by total excitation number:
/// `(probability, normalized joint vector)`. Channels downstream are all
/// phase covariant, so the state may be sampled sector by sector.
pub fn excitation_sectors(p: &SourceParams, t: f64) -> Result<Vec<(f64, Vec<Complex>)>> {
    p.validate()?;
    let phi = evolution_phase(p.bias_field, t, p.phi0, &p.constants)?;
    let space = JointSpace::new(p.fock_cutoff);
    let mut out = Vec::new();
    for n in 0..=p.fock_cutoff {
        let mut psi = vec![Complex::new(0.0, 0.0); space.dim()];
        let mut total = 0.0;
        for (occ, w) in sector_weights(p) {
            if occ[0] + occ[1] != n || w == 0.0 {
                continue;
            }
            let i = space.index(occ, occ).expect("occupation within cutoff");
            psi[i] = Complex::from_polar(w.sqrt(), -(occ[1] as f64) * phi);
            total += w;
        }
        if total > 0.0 {
            let norm = total.sqrt();
            psi.iter_mut().for_each(|z| *z /= norm);
            out.push((total, psi));
        }
    }
    Ok(out)
}

/// Probability that the write produces at least one photon.
pub fn emission_probability(p: &SourceParams) -> f64 {
    sector_weights(p)
        .iter()
        .filter(|(occ, _)| occ[0] + occ[1] > 0)
        .map(|s| s.1)
        .sum()
}

/// Heralding rate per trial with the photon collected at `coupling`.
pub fn writeout_rate(p: &SourceParams, coupling: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&coupling) {
        return Err(QuantumError::InvalidParameter(format!("coupling {coupling} outside [0, 1]")));
    }
    Ok(p.chi * coupling)
}
