//! EIT memory at node B: time bins become spatial modes U/D and are stored.

use serde::{Deserialize, Serialize};

use crate::error::{QuantumError, Result};
use crate::quantum::{apply_channel, FockPair};
use crate::source::AtomPhotonState;
use crate::{Complex, KrausChannel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EITParams {
    /// Storage efficiency (map-in and map-out) of mode U.
    pub eta_up: f64,
    /// Storage efficiency of mode D.
    pub eta_down: f64,
    /// Exponent share of each efficiency attributed to map-in: `η_in = η^f`.
    pub eta_map_in_fraction: f64,
    /// Mean readout chain efficiency of node B, map-out included.
    pub readout_eta_b: f64,
    /// Gaussian dephasing time per mode during storage, s; infinite disables it.
    pub dephasing_time: f64,
}

impl Default for EITParams {
    fn default() -> Self {
        Self {
            eta_up: 0.22,
            eta_down: 0.25,
            eta_map_in_fraction: 0.5,
            readout_eta_b: 0.13,
            dephasing_time: f64::INFINITY,
        }
    }
}

impl EITParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eta_up", self.eta_up),
            ("eta_down", self.eta_down),
            ("eta_map_in_fraction", self.eta_map_in_fraction),
            ("readout_eta_b", self.readout_eta_b),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(QuantumError::InvalidParameter(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if !(self.dephasing_time > 0.0) {
            return Err(QuantumError::InvalidParameter("dephasing_time must be positive".into()));
        }
        Ok(())
    }

    fn modes(&self) -> [f64; 2] {
        [self.eta_up, self.eta_down]
    }

    pub fn map_in(&self) -> [f64; 2] {
        self.modes().map(|e| e.powf(self.eta_map_in_fraction))
    }

    pub fn map_out(&self) -> [f64; 2] {
        self.modes().map(|e| e.powf(1.0 - self.eta_map_in_fraction))
    }

    /// Per-mode readout chain: `readout_eta_b` scaled by the relative map-out
    /// efficiency of each mode, so its mode average is `readout_eta_b`.
    pub fn readout_chain(&self) -> [f64; 2] {
        let out = self.map_out();
        let mean = 0.5 * (out[0] + out[1]);
        if mean == 0.0 {
            return [0.0, 0.0];
        }
        out.map(|o| (self.readout_eta_b * o / mean).min(1.0))
    }
}

/// Relabel the photonic modes E→U, L→D. The map is the identity on amplitudes.
pub fn timebin_to_spatial(s: &AtomPhotonState) -> Result<AtomPhotonState> {
    let state = s.state.clone().with_labels(s.space.labels(["U", "D"]))?;
    Ok(AtomPhotonState {
        state,
        space: s.space.clone(),
    })
}

/// Per-mode storage dephasing over `delay`, a no-op when disabled.
pub fn storage_dephasing(fock: &FockPair, p: &EITParams, delay: f64) -> KrausChannel {
    let s = if p.dephasing_time.is_finite() {
        (delay / p.dephasing_time).powi(2)
    } else {
        0.0
    };
    fock.phase_noise(1, |k| Complex::new((-((k * k) as f64) * s).exp(), 0.0))
}

/// Map in, hold for `delay`, map out. The lost part of the state ends up in the
/// photonic vacuum; `weight` is untouched because the maps are trace preserving.
pub fn store_and_readout(s: &AtomPhotonState, p: &EITParams, delay: f64) -> Result<AtomPhotonState> {
    p.validate()?;
    if !(delay >= 0.0) {
        return Err(QuantumError::InvalidParameter(format!("negative storage delay {delay}")));
    }
    let fock = &s.space.fock;
    let ch = fock
        .loss(p.map_in())
        .then(&storage_dephasing(fock, p, delay))?
        .then(&fock.loss(p.map_out()))?;
    Ok(AtomPhotonState {
        state: apply_channel(&s.state, &s.space.on_photon(&ch))?,
        space: s.space.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{expectation, sample_branch, Tensor};
    use crate::source::{atom_photon_state, JointSpace, SourceParams};
    use crate::{DensityMatrix, Matrix, Observable};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn photon_only(psi: &[(usize, Complex)]) -> AtomPhotonState {
        let space = JointSpace::new(2);
        let mut v = vec![Complex::new(0.0, 0.0); space.dim()];
        for &(p, z) in psi {
            v[p] = z;
        }
        AtomPhotonState {
            state: DensityMatrix::from_pure(&v, space.labels(["E", "L"])).unwrap(),
            space,
        }
    }

    /// Photon-side qubit block `(U, D)` of a state with vacuum atoms.
    fn photon_block(s: &AtomPhotonState) -> DensityMatrix {
        let f = &s.space.fock;
        let idx = [f.index(1, 0).unwrap(), f.index(0, 1).unwrap()];
        let m = Matrix::from_fn(2, |r, c| s.state.matrix()[(idx[r], idx[c])]);
        DensityMatrix::new_unchecked(m, vec!["U".into(), "D".into()]).unwrap()
    }

    #[test]
    fn relabeling_examples() {
        let f = FockPair::new(2);
        let e = photon_only(&[(f.index(1, 0).unwrap(), Complex::new(1.0, 0.0))]);
        let u = timebin_to_spatial(&e).unwrap();
        assert_eq!(u.state.labels()[f.index(1, 0).unwrap()], "vac⊗U");
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = photon_only(&[(1, Complex::new(h, 0.0)), (2, Complex::new(h, 0.0))]);
        let out = timebin_to_spatial(&plus).unwrap();
        assert!((expectation(&photon_block(&out), &Observable::pauli_x()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn relabeling_preserves_joint_correlators() {
        let s = atom_photon_state(&SourceParams::default(), 2e-6).unwrap();
        let b = timebin_to_spatial(&s).unwrap();
        let (qa, qb) = (s.qubit_block().unwrap(), b.qubit_block().unwrap());
        assert!((qa.purity() - qb.purity()).abs() < 1e-15);
        for o in [Observable::pauli_x(), Observable::pauli_y(), Observable::pauli_z()] {
            let oo = o.tensor(&o);
            assert_eq!(expectation(&qa, &oo).unwrap(), expectation(&qb, &oo).unwrap());
        }
    }

    #[test]
    fn unit_efficiency_is_identity() {
        let s = timebin_to_spatial(&atom_photon_state(&SourceParams::default(), 0.0).unwrap()).unwrap();
        let p = EITParams {
            eta_up: 1.0,
            eta_down: 1.0,
            ..Default::default()
        };
        let out = store_and_readout(&s, &p, 5e-6).unwrap();
        assert!(out.state.matrix().max_abs_diff(s.state.matrix()) < 1e-14);
    }

    #[test]
    fn up_mode_survival_frequency() {
        let f = FockPair::new(2);
        let p = EITParams::default();
        let ch = f.loss(p.map_in()).then(&f.loss(p.map_out())).unwrap();
        let up = DensityMatrix::basis(6, f.index(1, 0).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 100_000;
        let kept = (0..n)
            .filter(|_| sample_branch(&up, &ch, &mut rng).unwrap().1.population(0) < 0.5)
            .count();
        let sigma = (0.22 * 0.78 / n as f64).sqrt();
        assert!((kept as f64 / n as f64 - 0.22).abs() < 3.0 * sigma);
    }

    #[test]
    fn unequal_efficiencies_bias_z() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = timebin_to_spatial(&photon_only(&[(1, Complex::new(h, 0.0)), (2, Complex::new(h, 0.0))])).unwrap();
        let out = store_and_readout(&plus, &EITParams::default(), 0.0).unwrap();
        let z = expectation(&photon_block(&out), &Observable::pauli_z()).unwrap();
        // P(U | click) − P(D | click) with P ∝ η.
        let oracle = (0.22 - 0.25) / (0.22 + 0.25);
        assert!((z - oracle).abs() < 1e-12);
        assert!((z.abs() - 0.064).abs() < 0.001);
    }

    #[test]
    fn equal_efficiency_post_selection_recovers_input() {
        let s = timebin_to_spatial(&atom_photon_state(&SourceParams::default(), 1e-6).unwrap()).unwrap();
        let p = EITParams {
            eta_up: 0.3,
            eta_down: 0.3,
            ..Default::default()
        };
        let out = store_and_readout(&s, &p, 0.0).unwrap();
        let (a, b) = (s.qubit_block().unwrap(), out.qubit_block().unwrap());
        assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-12);
    }

    #[test]
    fn readout_chain_averages_to_published_value() {
        let r = EITParams::default().readout_chain();
        assert!((0.5 * (r[0] + r[1]) - 0.13).abs() < 1e-12);
        assert!(r[0] < r[1]);
    }
}
