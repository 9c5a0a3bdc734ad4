//! Photon path from node A to node B: down-conversion, fiber, up-conversion.

use serde::{Deserialize, Serialize};

use crate::error::{QuantumError, Result};
use crate::quantum::{apply_channel, FockPair};
use crate::source::AtomPhotonState;
use crate::KrausChannel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    pub eta_dfg: f64,
    pub fiber_loss_db: f64,
    pub eta_sfg: f64,
    /// One-way delay, seconds.
    pub latency: f64,
    /// Noise photons per detection window, referred to the node-B input.
    pub background_rate: f64,
    pub fiber_length_km: f64,
    /// Attenuation of unconverted 795 nm light, dB/km, for the direct-fiber comparison.
    pub direct_loss_db_per_km: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            eta_dfg: 0.46,
            fiber_loss_db: 7.1,
            eta_sfg: 0.45,
            latency: 103e-6,
            background_rate: 0.0,
            fiber_length_km: 20.5,
            direct_loss_db_per_km: 3.4,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eta_dfg", self.eta_dfg),
            ("eta_sfg", self.eta_sfg),
            ("background_rate", self.background_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(QuantumError::InvalidParameter(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if !(self.fiber_loss_db >= 0.0) || !(self.direct_loss_db_per_km >= 0.0) {
            return Err(QuantumError::InvalidParameter("losses must be non-negative".into()));
        }
        if !(self.latency >= 0.0) || !self.latency.is_finite() {
            return Err(QuantumError::InvalidParameter(
                "latency must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

fn db_to_transmission(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

/// `η_DFG · 10^(−loss/10) · η_SFG`.
pub fn channel_efficiency(p: &ChannelParams) -> f64 {
    p.eta_dfg * db_to_transmission(p.fiber_loss_db) * p.eta_sfg
}

/// Transmission of the same fiber span without frequency conversion.
pub fn direct_transmission(p: &ChannelParams) -> f64 {
    db_to_transmission(p.direct_loss_db_per_km * p.fiber_length_km)
}

pub fn latency(p: &ChannelParams) -> f64 {
    p.latency
}

/// Photonic-mode channel: loss at [`channel_efficiency`] followed by background injection.
pub fn channel_map(fock: &FockPair, p: &ChannelParams) -> Result<KrausChannel> {
    let eta = channel_efficiency(p);
    fock.loss([eta, eta]).then(&fock.inject(p.background_rate))
}

/// Apply the channel to the photonic half of a joint atom–photon state.
pub fn transmit(s: &AtomPhotonState, p: &ChannelParams) -> Result<AtomPhotonState> {
    p.validate()?;
    let ch = s.space.on_photon(&channel_map(&s.space.fock, p)?);
    Ok(AtomPhotonState {
        state: apply_channel(&s.state, &ch)?,
        space: s.space.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::sample_branch;
    use crate::source::{atom_photon_state, JointSpace, SourceParams};
    use crate::DensityMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn efficiency_examples() {
        let unit = ChannelParams {
            eta_dfg: 1.0,
            eta_sfg: 1.0,
            fiber_loss_db: 0.0,
            ..Default::default()
        };
        assert_eq!(channel_efficiency(&unit), 1.0);
        let fiber = ChannelParams {
            eta_dfg: 1.0,
            eta_sfg: 1.0,
            ..Default::default()
        };
        assert!((channel_efficiency(&fiber) - 0.195).abs() < 5e-4);
        let d = channel_efficiency(&ChannelParams::default());
        assert!((d - 0.46 * 0.194_984 * 0.45).abs() < 1e-6);
        assert!((d - 0.04).abs() < 0.001);
    }

    #[test]
    fn latency_matches_fiber_group_delay() {
        let p = ChannelParams::default();
        assert_eq!(latency(&p), 103e-6);
        let group = 20.5e3 / (299_792_458.0 / 1.47);
        assert!(((group - latency(&p)) / latency(&p)).abs() < 0.05);
        let zero = ChannelParams {
            latency: 0.0,
            ..Default::default()
        };
        assert!(zero.validate().is_ok());
    }

    #[test]
    fn direct_795_is_order_1e_minus_7() {
        let t = direct_transmission(&ChannelParams::default());
        assert!(t > 1e-8 && t < 1e-6, "{t}");
    }

    #[test]
    fn vacuum_unchanged_without_background() {
        let space = JointSpace::new(2);
        let s = AtomPhotonState {
            state: DensityMatrix::basis(space.dim(), 0),
            space,
        };
        let out = transmit(&s, &ChannelParams::default()).unwrap();
        assert!(out.state.matrix().max_abs_diff(s.state.matrix()) < 1e-15);
    }

    #[test]
    fn single_photon_survival_frequency() {
        let p = ChannelParams::default();
        let fock = FockPair::new(2);
        let ch = channel_map(&fock, &p).unwrap();
        let one = DensityMatrix::basis(fock.dim(), fock.index(1, 0).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let kept = (0..n)
            .filter(|_| {
                let (_, s) = sample_branch(&one, &ch, &mut rng).unwrap();
                s.population(0) < 0.5
            })
            .count();
        let eta = channel_efficiency(&p);
        let sigma = (eta * (1.0 - eta) / n as f64).sqrt();
        assert!((kept as f64 / n as f64 - eta).abs() < 3.0 * sigma);
    }

    #[test]
    fn sequential_losses_compose() {
        let fock = FockPair::new(2);
        let s = atom_photon_state(&SourceParams::default(), 1e-6).unwrap();
        let p = ChannelParams::default();
        let steps = [p.eta_dfg, db_to_transmission(p.fiber_loss_db), p.eta_sfg];
        let mut seq = s.state.clone();
        for eta in steps {
            seq = apply_channel(&seq, &s.space.on_photon(&fock.loss([eta, eta]))).unwrap();
        }
        let once = transmit(&s, &p).unwrap();
        assert!(seq.matrix().max_abs_diff(once.state.matrix()) < 1e-9);
    }

    #[test]
    fn background_free_channel_never_adds_photons() {
        let s = atom_photon_state(&SourceParams::default(), 0.0).unwrap();
        let out = transmit(&s, &ChannelParams::default()).unwrap();
        let photons = |d: &DensityMatrix| -> f64 {
            (0..d.dim())
                .map(|i| {
                    let (_, ph) = s.space.split(i);
                    (ph[0] + ph[1]) as f64 * d.population(i)
                })
                .sum()
        };
        assert!(photons(&out.state) <= photons(&s.state) + 1e-15);
    }
}
