//! End-to-end link model for one measurement configuration.
//!
//! The joint atom ⊗ photon state is carried through every stage of the chain.
//! The same Kraus stages drive two evaluators: an exact density-matrix pass
//! that yields click-pattern probabilities, and a pure-state trajectory
//! sampler that yields one trial at a time.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::records::{to_grid_ns, Click, ClickRecord, Detector, Window};
use super::settings::{project_basis, BasisSetting, SignConvention};
use crate::error::{QuantumError, Result};
use crate::link::{channel_efficiency, ChannelParams};
use crate::memory_a::{mains_channel, mode_lifetimes, motional_factor, CoherenceParams, FreezingGeometry, MainsPhases};
use crate::memory_b::{storage_dephasing, EITParams};
use crate::quantum::{port_map, Outcome, SparseOp};
use crate::source::{atom_photon_state, excitation_sectors, JointSpace, SourceParams};
use crate::{Complex, KrausChannel, Matrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorParams {
    pub eta_det: f64,
    /// Probability of a dark click per detector per window.
    pub dark_rate: f64,
    /// Window width, s.
    pub window: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            eta_det: 1.0,
            dark_rate: 1e-5,
            window: 50e-9,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta_det) || !(0.0..=1.0).contains(&self.dark_rate) || !(self.window > 0.0) {
            return Err(QuantumError::InvalidParameter(format!(
                "detector parameters out of range: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Every parameter of the A→B chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkParams {
    pub source: SourceParams,
    /// Collection of the write-out photon into fiber, cavity enhancement included.
    pub coupling: f64,
    pub channel: ChannelParams,
    pub coherence: CoherenceParams,
    pub geometry: FreezingGeometry,
    pub eit: EITParams,
    /// Node-A readout efficiency, detector included.
    pub readout_eta_a: f64,
    /// Hold time in the node-B memory before readout, s.
    pub analysis_delay: f64,
    /// Write-out photon detectors at the first two checkpoints.
    pub detector_w: DetectorParams,
    /// Node-A readout detectors; efficiency is part of `readout_eta_a`.
    pub detector_a: DetectorParams,
    /// Node-B readout detectors; efficiency is part of the node-B readout chain.
    pub detector_b: DetectorParams,
    pub convention: SignConvention,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self {
            source: SourceParams::default(),
            coupling: 0.30,
            channel: ChannelParams::default(),
            coherence: CoherenceParams::default(),
            geometry: FreezingGeometry::default(),
            eit: EITParams::default(),
            readout_eta_a: 0.15,
            analysis_delay: 2e-6,
            detector_w: DetectorParams {
                eta_det: 0.6,
                ..Default::default()
            },
            detector_a: DetectorParams::default(),
            detector_b: DetectorParams::default(),
            convention: SignConvention::default(),
        }
    }
}

impl LinkParams {
    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.channel.validate()?;
        self.coherence.validate()?;
        self.geometry.validate()?;
        self.eit.validate()?;
        self.detector_w.validate()?;
        self.detector_a.validate()?;
        self.detector_b.validate()?;
        self.convention.validate()?;
        for (name, v) in [("coupling", self.coupling), ("readout_eta_a", self.readout_eta_a)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(QuantumError::InvalidParameter(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if !(self.analysis_delay >= 0.0) {
            return Err(QuantumError::InvalidParameter("analysis_delay must be non-negative".into()));
        }
        Ok(())
    }
}

/// Where the write-out photon is detected.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Station {
    /// At node A, before the conversion stages.
    Local,
    /// At node B, after up-conversion.
    Transfer,
    /// After storage in and readout from the node-B memory.
    Remote,
}

impl Station {
    pub const ALL: [Station; 3] = [Station::Local, Station::Transfer, Station::Remote];

    pub fn numeral(self) -> &'static str {
        match self {
            Station::Local => "I",
            Station::Transfer => "II",
            Station::Remote => "III",
        }
    }
}

/// One measurement configuration of the link.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub station: Station,
    /// Node-A storage time before readout, s.
    pub readout_delay: f64,
    pub setting: BasisSetting,
    /// Trial-start mains phase distribution used by the analytic pass.
    pub mains: MainsPhases,
}

/// Per-trial inputs supplied by the scheduler.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialContext {
    pub trial_id: u64,
    /// Trial start on the campaign clock, s.
    pub start_time: f64,
    /// Mains phase at trial start; drawn from the trial stream when `None`.
    pub mains_phase: Option<f64>,
}

/// Raw result of one trial. Bits follow [`Detector::bit`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialResult {
    pub photon_clicks: u8,
    pub dark_clicks: u8,
    pub noise_clicks: u8,
    pub outcome_a: Option<Outcome>,
    pub outcome_w: Option<Outcome>,
}

impl TrialResult {
    pub fn observed(&self) -> u8 {
        self.photon_clicks | self.dark_clicks
    }

    pub fn noise_w(&self) -> bool {
        self.noise_clicks & (Detector::WPlus.bit() | Detector::WMinus.bit()) != 0
    }
}

/// Exact observed-pattern probabilities of one configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct PatternProbabilities {
    /// Indexed by the observed 4-bit pattern in the signal window.
    pub signal: [f64; 16],
    /// Indexed by the observed pattern in the noise window (only W bits can fire).
    pub noise: [f64; 16],
}

const A_BITS: u8 = 0b0011;
const W_BITS: u8 = 0b1100;

fn resolve(bits: u8, plus: u8, minus: u8) -> [f64; 2] {
    match (bits & plus != 0, bits & minus != 0) {
        (true, false) => [1.0, 0.0],
        (false, true) => [0.0, 1.0],
        (true, true) => [0.5, 0.5],
        (false, false) => [0.0, 0.0],
    }
}

impl PatternProbabilities {
    pub fn p_a(&self) -> f64 {
        (0..16).filter(|b| b & A_BITS != 0).map(|b| self.signal[b as usize]).sum()
    }

    pub fn p_w(&self) -> f64 {
        (0..16).filter(|b| b & W_BITS != 0).map(|b| self.signal[b as usize]).sum()
    }

    pub fn p_aw(&self) -> f64 {
        (0..16u8)
            .filter(|b| b & A_BITS != 0 && b & W_BITS != 0)
            .map(|b| self.signal[b as usize])
            .sum()
    }

    pub fn p_noise_w(&self) -> f64 {
        (0..16).filter(|b| b & W_BITS != 0).map(|b| self.noise[b as usize]).sum()
    }

    /// Joint probability of resolved outcomes `[a][w]` (0 = `+1`), double clicks split evenly.
    pub fn outcomes(&self) -> [[f64; 2]; 2] {
        let mut out = [[0.0; 2]; 2];
        for b in 0..16u8 {
            let a = resolve(b, Detector::APlus.bit(), Detector::AMinus.bit());
            let w = resolve(b, Detector::WPlus.bit(), Detector::WMinus.bit());
            for i in 0..2 {
                for j in 0..2 {
                    out[i][j] += self.signal[b as usize] * a[i] * w[j];
                }
            }
        }
        out
    }

    /// Post-selected correlator `⟨O_A O_W⟩`.
    pub fn correlator(&self) -> f64 {
        let o = self.outcomes();
        let total = o[0][0] + o[0][1] + o[1][0] + o[1][1];
        (o[0][0] + o[1][1] - o[0][1] - o[1][0]) / total
    }

    pub fn g2(&self) -> f64 {
        self.p_aw() / (self.p_a() * self.p_w())
    }

    pub fn snr(&self) -> f64 {
        self.p_w() / self.p_noise_w()
    }
}

#[derive(Clone, Debug)]
enum PhaseSource {
    Gaussian(Normal<f64>),
    /// Mains phase over `[age, age + t]` of node-A storage.
    Mains {
        age: f64,
        t: f64,
    },
}

#[derive(Clone, Debug)]
enum Trajectory {
    Kraus,
    AtomPhase(PhaseSource),
}

#[derive(Clone, Debug)]
struct Stage {
    ops: Vec<SparseOp<f64>>,
    trajectory: Trajectory,
    /// Cumulative branch probabilities from the joint vacuum; `None` stays in vacuum.
    from_vacuum: Vec<(f64, Option<Vec<Complex>>)>,
}

impl Stage {
    fn new(ch: &KrausChannel, trajectory: Trajectory) -> Self {
        let ops: Vec<SparseOp<f64>> = ch.operators().iter().map(SparseOp::from_dense).collect();
        let dim = ch.dim();
        let mut vac = vec![Complex::new(0.0, 0.0); dim];
        vac[0] = Complex::new(1.0, 0.0);
        let mut out = vec![Complex::new(0.0, 0.0); dim];
        let mut from_vacuum = Vec::new();
        let mut acc = 0.0;
        let mut stay = 0.0;
        if matches!(trajectory, Trajectory::Kraus) {
            for op in &ops {
                op.apply_into(&vac, &mut out);
                let p: f64 = out.iter().map(|z| z.norm_sqr()).sum();
                if p <= 0.0 {
                    continue;
                }
                if out.iter().skip(1).all(|z| z.norm_sqr() == 0.0) {
                    stay += p;
                    continue;
                }
                acc += p;
                let norm = p.sqrt();
                from_vacuum.push((acc, Some(out.iter().map(|z| z / norm).collect())));
            }
        }
        if !from_vacuum.is_empty() {
            // Stay-in-vacuum first, then the excursions.
            for b in from_vacuum.iter_mut() {
                b.0 += stay;
            }
            from_vacuum.insert(0, (stay, None));
        }
        Self {
            ops,
            trajectory,
            from_vacuum,
        }
    }
}

/// Compiled model of one [`Measurement`].
#[derive(Clone, Debug)]
pub struct LinkModel {
    space: JointSpace,
    initial: Matrix,
    /// Cumulative sector probabilities with their normalized vectors.
    sectors: Vec<(f64, Vec<Complex>)>,
    stages: Vec<Stage>,
    detect: SparseOp<f64>,
    /// True click bits per joint index after the basis rotation.
    pattern: Vec<u8>,
    /// ⇑ occupation per joint index.
    up: Vec<f64>,
    dark: [f64; 4],
    coherence: CoherenceParams,
    has_mains: bool,
    setting: BasisSetting,
    window_w: (f64, f64),
    window_noise: (f64, f64),
    window_a: (f64, f64),
}

impl LinkModel {
    pub fn new(p: &LinkParams, m: &Measurement) -> Result<Self> {
        p.validate()?;
        if !(m.readout_delay >= 0.0) {
            return Err(QuantumError::InvalidParameter("readout delay must be non-negative".into()));
        }
        let space = JointSpace::new(p.source.fock_cutoff);
        let fock = space.fock.clone();
        let photon = |ch: KrausChannel| space.on_photon(&ch);
        let atom = |ch: KrausChannel| space.on_atom(&ch);
        let mut stages = Vec::new();
        let mut kraus = |ch: KrausChannel| stages.push(Stage::new(&ch, Trajectory::Kraus));

        // Photon path.
        kraus(photon(fock.inject(p.source.write_noise)));
        kraus(photon(fock.loss([p.coupling; 2])));
        if m.station != Station::Local {
            let eta = channel_efficiency(&p.channel);
            kraus(photon(fock.loss([eta; 2])));
            kraus(photon(fock.inject(p.channel.background_rate)));
        }
        if m.station == Station::Remote {
            kraus(photon(fock.loss(p.eit.map_in())));
            if p.eit.dephasing_time.is_finite() {
                kraus(photon(storage_dephasing(&fock, &p.eit, p.analysis_delay)));
            }
            let chain = p.eit.readout_chain().map(|e| e * p.detector_b.eta_det);
            kraus(photon(fock.loss(chain)));
        } else {
            kraus(photon(fock.loss([p.detector_w.eta_det; 2])));
        }

        // Node-A storage and readout.
        let c = &p.coherence;
        let t = m.readout_delay;
        let rot = c.constants.larmor_rate() * c.bias_field * t;
        kraus(atom(KrausChannel::unitary(fock.phase([0.0, rot]))?));
        kraus(atom(fock.transfer(1, 1.0 - (-t / c.t1).exp())));
        let s = (t / c.t2_star).powi(2);
        if s > 0.0 {
            let ch = atom(fock.phase_noise(1, |k| Complex::new((-((k * k) as f64) * s).exp(), 0.0)));
            let normal = Normal::new(0.0, (2.0 * s).sqrt()).map_err(|e| QuantumError::InvalidParameter(e.to_string()))?;
            stages.push(Stage::new(&ch, Trajectory::AtomPhase(PhaseSource::Gaussian(normal))));
        }
        let has_mains = c.mains_amplitude > 0.0 && t > 0.0;
        if has_mains {
            let ch = atom(mains_channel(&fock, 0.0, t, c, &m.mains));
            stages.push(Stage::new(&ch, Trajectory::AtomPhase(PhaseSource::Mains { age: 0.0, t })));
        }
        let taus = mode_lifetimes(c, &p.geometry)?;
        let eff = [0, 1].map(|k| p.readout_eta_a * p.detector_a.eta_det * motional_factor(t, taus[k]));
        stages.push(Stage::new(&atom(fock.loss(eff)), Trajectory::Kraus));

        // Basis rotation and click patterns.
        let (obs_a, obs_w) = project_basis(&m.setting, &p.convention)?;
        let u = fock.passive(port_map(&obs_a)?).kron(&fock.passive(port_map(&obs_w)?));
        let pattern = (0..space.dim())
            .map(|i| {
                let (a, w) = space.split(i);
                let mut bits = 0u8;
                for (occ, det) in [
                    (a[0], Detector::APlus),
                    (a[1], Detector::AMinus),
                    (w[0], Detector::WPlus),
                    (w[1], Detector::WMinus),
                ] {
                    if occ > 0 {
                        bits |= det.bit();
                    }
                }
                bits
            })
            .collect();
        let up = (0..space.dim()).map(|i| space.split(i).0[1] as f64).collect();

        let photon_det = if m.station == Station::Remote {
            &p.detector_b
        } else {
            &p.detector_w
        };
        let w_open = match m.station {
            Station::Local => 0.0,
            Station::Transfer => p.channel.latency,
            Station::Remote => p.channel.latency + p.analysis_delay,
        };
        let window_w = (w_open, photon_det.window);
        let window_noise = (w_open + 10.0 * photon_det.window, photon_det.window);
        let window_a = (t, p.detector_a.window);

        let initial = atom_photon_state(&p.source, 0.0)?.state.matrix().clone();
        // The truncated ladder is renormalized, as in the analytic pass.
        let raw = excitation_sectors(&p.source, 0.0)?;
        let total: f64 = raw.iter().map(|s| s.0).sum();
        let mut acc = 0.0;
        let sectors = raw
            .into_iter()
            .map(|(w, v)| {
                acc += w / total;
                (acc, v)
            })
            .collect();

        Ok(Self {
            space,
            initial,
            sectors,
            stages,
            detect: SparseOp::from_dense(&u),
            pattern,
            up,
            dark: [
                p.detector_a.dark_rate,
                p.detector_a.dark_rate,
                photon_det.dark_rate,
                photon_det.dark_rate,
            ],
            coherence: c.clone(),
            has_mains,
            setting: m.setting.clone(),
            window_w,
            window_noise,
            window_a,
        })
    }

    pub fn setting(&self) -> &BasisSetting {
        &self.setting
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    fn evolve(&self, mut rho: Matrix) -> Matrix {
        for stage in &self.stages {
            let mut acc = Matrix::zeros(rho.dim());
            for op in &stage.ops {
                op.sandwich_into(&rho, &mut acc);
            }
            rho = acc;
        }
        rho
    }

    /// State just before the basis rotation, starting from the normalized write state.
    pub fn final_state(&self) -> Matrix {
        let tr = self.initial.trace().re;
        self.evolve(self.initial.scale_real(1.0 / tr))
    }

    fn observed(&self, rho: &Matrix) -> [f64; 16] {
        let mut rotated = Matrix::zeros(rho.dim());
        self.detect.sandwich_into(rho, &mut rotated);
        let mut truth = [0.0; 16];
        for (i, bits) in self.pattern.iter().enumerate() {
            truth[*bits as usize] += rotated[(i, i)].re;
        }
        let mut obs = [0.0; 16];
        for (t, pt) in truth.iter().enumerate() {
            if *pt == 0.0 {
                continue;
            }
            for (o, po) in obs.iter_mut().enumerate() {
                if o & t != t {
                    continue;
                }
                let mut p = *pt;
                for (j, d) in self.dark.iter().enumerate() {
                    let bit = 1 << j;
                    if t & bit != 0 {
                        continue;
                    }
                    p *= if o & bit != 0 { *d } else { 1.0 - d };
                }
                *po += p;
            }
        }
        obs
    }

    /// Exact pattern probabilities for the signal and noise windows.
    pub fn analytic(&self) -> PatternProbabilities {
        let signal = self.observed(&self.final_state());
        let mut vac = Matrix::zeros(self.dim());
        vac[(0, 0)] = Complex::new(1.0, 0.0);
        let mut noise = self.observed(&self.evolve(vac));
        // Node-A detectors take no part in the noise window.
        let mut folded = [0.0; 16];
        for (b, p) in noise.iter().enumerate() {
            folded[b & W_BITS as usize] += p;
        }
        noise = folded;
        PatternProbabilities { signal, noise }
    }

    fn step<R: Rng + ?Sized>(&self, stage: &Stage, psi: &mut Vec<Complex>, scratch: &mut Vec<Complex>, mains: f64, rng: &mut R) {
        match &stage.trajectory {
            Trajectory::AtomPhase(src) => {
                let theta = match src {
                    PhaseSource::Gaussian(n) => n.sample(rng),
                    PhaseSource::Mains { age, t } => self.coherence.mains_noise_phase(*age, *t, mains),
                };
                for (z, n) in psi.iter_mut().zip(&self.up) {
                    if *n > 0.0 {
                        *z *= Complex::from_polar(1.0, -n * theta);
                    }
                }
            }
            Trajectory::Kraus => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut best = (0, -1.0);
                for (k, op) in stage.ops.iter().enumerate() {
                    op.apply_into(psi, scratch);
                    let p: f64 = scratch.iter().map(|z| z.norm_sqr()).sum();
                    if p > best.1 {
                        best = (k, p);
                    }
                    acc += p;
                    if u < acc && p > 0.0 {
                        let norm = p.sqrt();
                        scratch.iter_mut().for_each(|z| *z /= norm);
                        std::mem::swap(psi, scratch);
                        return;
                    }
                }
                // Rounding left u beyond the accumulated total: take the likeliest branch.
                stage.ops[best.0].apply_into(psi, scratch);
                let norm = best.1.sqrt();
                scratch.iter_mut().for_each(|z| *z /= norm);
                std::mem::swap(psi, scratch);
            }
        }
    }

    /// Propagate a trajectory and return its true click bits.
    fn propagate<R: Rng + ?Sized>(&self, start: Option<Vec<Complex>>, mains: f64, rng: &mut R) -> u8 {
        let mut state = start;
        let mut scratch = vec![Complex::new(0.0, 0.0); self.dim()];
        for stage in &self.stages {
            match state.as_mut() {
                None => {
                    if stage.from_vacuum.is_empty() {
                        continue;
                    }
                    let u: f64 = rng.random();
                    if let Some((_, v)) = stage.from_vacuum.iter().find(|b| u < b.0) {
                        state = v.clone();
                    }
                }
                Some(psi) => self.step(stage, psi, &mut scratch, mains, rng),
            }
        }
        let Some(psi) = state else {
            return 0;
        };
        self.detect.apply_into(&psi, &mut scratch);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, z) in scratch.iter().enumerate() {
            let p = z.norm_sqr();
            if p == 0.0 {
                continue;
            }
            acc += p;
            last = i;
            if u < acc {
                return self.pattern[i];
            }
        }
        self.pattern[last]
    }

    fn darks<R: Rng + ?Sized>(&self, mask: u8, rng: &mut R) -> u8 {
        let mut bits = 0;
        for (j, d) in self.dark.iter().enumerate() {
            if mask & (1 << j) != 0 && rng.random::<f64>() < *d {
                bits |= 1 << j;
            }
        }
        bits
    }

    /// Sample one trial.
    pub fn run_trial<R: Rng + ?Sized>(&self, ctx: &TrialContext, rng: &mut R) -> TrialResult {
        let mains = if self.has_mains {
            ctx.mains_phase.unwrap_or_else(|| rng.random::<f64>() * 2.0 * PI)
        } else {
            0.0
        };
        let u: f64 = rng.random();
        let sector = self
            .sectors
            .iter()
            .find(|s| u < s.0)
            .unwrap_or_else(|| self.sectors.last().expect("at least the vacuum sector"));
        let start = if sector.1[0].norm_sqr() == 1.0 {
            None
        } else {
            Some(sector.1.clone())
        };
        let photon_clicks = self.propagate(start, mains, rng);
        let dark_clicks = self.darks(0b1111 & !photon_clicks, rng) & !photon_clicks;
        let noise_photons = self.propagate(None, mains, rng) & W_BITS;
        let noise_clicks = noise_photons | self.darks(W_BITS & !noise_photons, rng);
        let observed = photon_clicks | dark_clicks;
        let pick =
            |bits: u8, plus: Detector, minus: Detector, rng: &mut R| match (bits & plus.bit() != 0, bits & minus.bit() != 0) {
                (true, false) => Some(Outcome::Plus),
                (false, true) => Some(Outcome::Minus),
                (true, true) => Some(if rng.random::<bool>() { Outcome::Plus } else { Outcome::Minus }),
                (false, false) => None,
            };
        let outcome_a = pick(observed, Detector::APlus, Detector::AMinus, rng);
        let outcome_w = pick(observed, Detector::WPlus, Detector::WMinus, rng);
        TrialResult {
            photon_clicks,
            dark_clicks,
            noise_clicks,
            outcome_a,
            outcome_w,
        }
    }

    /// Sample one trial and return its full click record.
    pub fn simulate_trial<R: Rng + ?Sized>(&self, ctx: &TrialContext, rng: &mut R) -> ClickRecord {
        let r = self.run_trial(ctx, rng);
        let mut clicks = Vec::new();
        let mut stamp = |det: Detector, window: Window, (open, width): (f64, f64), photon: bool, rng: &mut R| {
            let offset = if photon { 0.5 * width } else { rng.random::<f64>() * width };
            clicks.push(Click {
                detector: det,
                window,
                timestamp_ns: to_grid_ns(ctx.start_time + open + offset),
            });
        };
        for det in Detector::ALL {
            let bit = det.bit();
            let win = if bit & A_BITS != 0 { self.window_a } else { self.window_w };
            if r.observed() & bit != 0 {
                stamp(det, Window::Signal, win, r.photon_clicks & bit != 0, rng);
            }
            if r.noise_clicks & bit != 0 {
                stamp(det, Window::Noise, self.window_noise, false, rng);
            }
        }
        ClickRecord {
            trial_id: ctx.trial_id,
            setting: self.setting.clone(),
            clicks,
            outcome_a: r.outcome_a,
            outcome_w: r.outcome_w,
            post_selected: r.outcome_a.is_some() && r.outcome_w.is_some(),
        }
    }

    /// Detection windows `(open, width)` relative to trial start: photon, noise, node A.
    pub fn windows(&self) -> [(f64, f64); 3] {
        [self.window_w, self.window_noise, self.window_a]
    }
}

/// Smallest node-A readout delay at or after `min_delay` that maximizes the
/// analytic `⟨XX⟩` at the given station, searched over one Larmor period.
pub fn bell_delay(p: &LinkParams, station: Station, min_delay: f64, mains: &MainsPhases) -> Result<f64> {
    let c = &p.coherence;
    let omega = c.constants.larmor_rate() * c.bias_field;
    if omega == 0.0 {
        return Ok(min_delay);
    }
    let period = 2.0 * PI / omega;
    let xx = |t: f64| -> Result<f64> {
        let m = Measurement {
            station,
            readout_delay: t,
            setting: BasisSetting::new(super::settings::NodeBasis::X, super::settings::NodeBasis::X),
            mains: mains.clone(),
        };
        Ok(LinkModel::new(p, &m)?.analytic().correlator())
    };
    let n = 64;
    let mut best = (min_delay, f64::NEG_INFINITY);
    for i in 0..n {
        let t = min_delay + period * i as f64 / n as f64;
        let v = xx(t)?;
        if v > best.1 + 1e-12 {
            best = (t, v);
        }
    }
    // Golden-section refinement around the grid maximum.
    let h = period / n as f64;
    let (mut lo, mut hi) = ((best.0 - h).max(min_delay), best.0 + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut f1, mut f2) = (xx(x1)?, xx(x2)?);
    for _ in 0..40 {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = xx(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = xx(x2)?;
        }
    }
    Ok(0.5 * (lo + hi))
}
