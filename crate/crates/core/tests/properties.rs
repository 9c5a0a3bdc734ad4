use std::f64::consts::PI;

use memlink_core::detection::{
    accumulate, BasisSetting, CountsTable, LinkModel, LinkParams, Measurement, NodeBasis, SettingCounts, Station, TrialContext,
};
use memlink_core::estimators::{chsh, correlator_counts, fidelity, EstimateWithError};
use memlink_core::link::{channel_efficiency, transmit, ChannelParams};
use memlink_core::memory_a::{decohere, AtomQubitA, CoherenceParams, FreezingGeometry, MainsPhases};
use memlink_core::memory_b::{store_and_readout, timebin_to_spatial, EITParams};
use memlink_core::quantum::{apply_channel, expectation, sample_measurement, FockPair, Outcome, Tensor};
use memlink_core::source::{atom_photon_state, emission_probability, evolution_phase, SourceParams};
use memlink_core::{Complex, DensityMatrix, KrausChannel, Matrix, Observable};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

/// Random qubit state from a Bloch vector inside the ball.
fn qubit(x: f64, y: f64, z: f64) -> DensityMatrix {
    let n = (x * x + y * y + z * z).sqrt().max(1.0);
    let (x, y, z) = (x / n, y / n, z / n);
    let m = Matrix::from_fn(2, |r, c| match (r, c) {
        (0, 0) => Complex::new(0.5 * (1.0 + z), 0.0),
        (1, 1) => Complex::new(0.5 * (1.0 - z), 0.0),
        (0, 1) => Complex::new(0.5 * x, -0.5 * y),
        _ => Complex::new(0.5 * x, 0.5 * y),
    });
    DensityMatrix::new(m, vec!["0".into(), "1".into()]).unwrap()
}

fn damping(g: f64) -> KrausChannel {
    let k0 = Matrix::from_real_rows(&[1.0, 0.0, 0.0, (1.0 - g).sqrt()]);
    let k1 = Matrix::from_real_rows(&[0.0, g.sqrt(), 0.0, 0.0]);
    KrausChannel::new(vec![k0, k1], true).unwrap()
}

fn dephasing(p: f64) -> KrausChannel {
    let k0 = Matrix::identity(2).scale_real((1.0 - p).sqrt());
    let k1 = Observable::pauli_z().matrix().scale_real(p.sqrt());
    KrausChannel::new(vec![k0, k1], true).unwrap()
}

fn assert_valid(d: &DensityMatrix) {
    d.validate().unwrap();
    assert!(d.matrix().hermiticity_residual() < 1e-10);
    assert!(d.matrix().min_hermitian_eigenvalue() > -1e-10);
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn channel_composition(x in -1.0..1.0f64, y in -1.0..1.0f64, z in -1.0..1.0f64, g in 0.0..1.0f64, p in 0.0..1.0f64) {
        let rho = qubit(x, y, z);
        let (a, b) = (damping(g), dephasing(p));
        let seq = apply_channel(&apply_channel(&rho, &a).unwrap(), &b).unwrap();
        let once = apply_channel(&rho, &a.then(&b).unwrap()).unwrap();
        prop_assert!(seq.matrix().max_abs_diff(once.matrix()) < 1e-9);
    }

    #[test]
    fn sampled_outcomes_track_expectation(x in -1.0..1.0f64, y in -1.0..1.0f64, z in -1.0..1.0f64, which in 0usize..3, seed in any::<u64>()) {
        let rho = qubit(x, y, z);
        let obs = [Observable::pauli_x(), Observable::pauli_y(), Observable::pauli_z()][which].clone();
        let exact = expectation(&rho, &obs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 4000;
        let mean = (0..n)
            .map(|_| sample_measurement(&rho, &obs, &mut rng).unwrap().sign() as f64)
            .sum::<f64>() / n as f64;
        prop_assert!((mean - exact).abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn every_stage_yields_valid_states(
        chi in 0.001..0.2f64,
        t in 0.0..300e-6f64,
        h in 0.0..1.0f64,
        loss in 0.0..30.0f64,
        bg in 0.0..0.05f64,
        eta in 0.01..1.0f64,
    ) {
        let src = SourceParams { chi, double_excitation_scale: h, ..Default::default() };
        let s = atom_photon_state(&src, 0.0).unwrap();
        assert_valid(&s.state);
        let ch = ChannelParams { fiber_loss_db: loss, background_rate: bg, ..Default::default() };
        let sent = transmit(&s, &ch).unwrap();
        assert_valid(&sent.state);
        let eit = EITParams { eta_up: eta, ..Default::default() };
        let stored = store_and_readout(&timebin_to_spatial(&sent).unwrap(), &eit, 2e-6).unwrap();
        assert_valid(&stored.state);
        let c = CoherenceParams { mains_amplitude: 1.61e-3, mains_synced: false, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = decohere(&AtomQubitA::new(s, 0.0), t, &c, &FreezingGeometry::default(), &mut rng).unwrap();
        assert_valid(&q.state);
        let r = q.retrieval_weight();
        prop_assert!((0.0..=1.0).contains(&r));
    }

    #[test]
    fn xx_follows_evolution_phase(t in 0.0..50e-6f64, phi0 in -PI..PI) {
        let src = SourceParams { phi0, ..Default::default() };
        let block = atom_photon_state(&src, t).unwrap().qubit_block().unwrap();
        let xx = expectation(&block, &Observable::pauli_x().tensor(&Observable::pauli_x())).unwrap();
        let phi = evolution_phase(src.bias_field, t, phi0, &src.constants).unwrap();
        prop_assert!((xx - phi.cos()).abs() < 1e-9);
    }

    #[test]
    fn branch_weight_and_emission(chi in 0.001..0.2f64, d in 0.0001..0.01f64, h in 0.0..1.0f64) {
        let a = SourceParams { chi, double_excitation_scale: h, ..Default::default() };
        let b = SourceParams { chi: chi + d, ..a.clone() };
        prop_assert!(atom_photon_state(&a, 0.0).unwrap().weight() <= 1.0 + 1e-12);
        prop_assert!(emission_probability(&b) > emission_probability(&a));
    }

    #[test]
    fn no_double_excitations_means_unit_fidelity(chi in 0.001..0.2f64, t in 0.0..10e-6f64) {
        let src = SourceParams { chi, double_excitation_scale: 0.0, ..Default::default() };
        let block = atom_photon_state(&src, t).unwrap().qubit_block().unwrap();
        let phi = evolution_phase(src.bias_field, t, src.phi0, &src.constants).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let z = Complex::new(0.0, 0.0);
        let target = [Complex::new(h, 0.0), z, z, Complex::from_polar(h, -phi)];
        prop_assert!((block.fidelity_with_pure(&target).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn losses_compose(e1 in 0.0..1.0f64, e2 in 0.0..1.0f64, e3 in 0.0..1.0f64) {
        let s = atom_photon_state(&SourceParams::default(), 1e-6).unwrap();
        let f = FockPair::new(2);
        let mut seq = s.state.clone();
        for e in [e1, e2, e3] {
            seq = apply_channel(&seq, &s.space.on_photon(&f.loss([e, e]))).unwrap();
        }
        let p = e1 * e2 * e3;
        let once = apply_channel(&s.state, &s.space.on_photon(&f.loss([p, p]))).unwrap();
        prop_assert!(seq.matrix().max_abs_diff(once.matrix()) < 1e-9);
    }

    #[test]
    fn background_free_channel_adds_no_photons(loss in 0.0..20.0f64, dfg in 0.0..1.0f64) {
        let s = atom_photon_state(&SourceParams::default(), 0.0).unwrap();
        let out = transmit(&s, &ChannelParams { fiber_loss_db: loss, eta_dfg: dfg, ..Default::default() }).unwrap();
        let photons = |d: &DensityMatrix| (0..d.dim()).map(|i| {
            let (_, ph) = s.space.split(i);
            (ph[0] + ph[1]) as f64 * d.population(i)
        }).sum::<f64>();
        prop_assert!(photons(&out.state) <= photons(&s.state) + 1e-12);
        let eta = channel_efficiency(&ChannelParams { fiber_loss_db: loss, eta_dfg: dfg, ..Default::default() });
        prop_assert!((photons(&out.state) - eta * photons(&s.state)).abs() < 1e-12);
    }

    #[test]
    fn storage_composes_in_time(t1 in 0.0..200e-6f64, t2 in 0.0..200e-6f64) {
        let c = CoherenceParams { mains_amplitude: 0.35e-3, mains_synced: true, ..Default::default() };
        let g = FreezingGeometry::default();
        let q = AtomQubitA::new(atom_photon_state(&SourceParams::default(), 0.0).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let two = decohere(&decohere(&q, t1, &c, &g, &mut rng).unwrap(), t2, &c, &g, &mut rng).unwrap();
        let one = decohere(&q, t1 + t2, &c, &g, &mut rng).unwrap();
        prop_assert!(two.state.matrix().max_abs_diff(one.state.matrix()) < 1e-9);
        prop_assert!((two.retrieval_weight() - one.retrieval_weight()).abs() < 1e-12);
    }

    #[test]
    fn relabeling_keeps_correlators(t in 0.0..20e-6f64, chi in 0.001..0.2f64) {
        let s = atom_photon_state(&SourceParams { chi, ..Default::default() }, t).unwrap();
        let b = timebin_to_spatial(&s).unwrap();
        let (qa, qb) = (s.qubit_block().unwrap(), b.qubit_block().unwrap());
        prop_assert!((qa.purity() - qb.purity()).abs() < 1e-14);
        for o in [Observable::pauli_x(), Observable::pauli_y(), Observable::pauli_z()] {
            let oo = o.tensor(&o);
            prop_assert!((expectation(&qa, &oo).unwrap() - expectation(&qb, &oo).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn equal_efficiency_storage_is_invisible_after_post_selection(eta in 0.01..1.0f64, t in 0.0..5e-6f64) {
        let s = timebin_to_spatial(&atom_photon_state(&SourceParams::default(), t).unwrap()).unwrap();
        let out = store_and_readout(&s, &EITParams { eta_up: eta, eta_down: eta, ..Default::default() }, 0.0).unwrap();
        let (a, b) = (s.qubit_block().unwrap(), out.qubit_block().unwrap());
        prop_assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-12);
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn xx_envelope_is_monotone(t in 0.0..800e-6f64, dt in 1e-6..200e-6f64) {
        // Readouts one Larmor period apart share the rotation phase. Synced mains
        // adds a deterministic phase of its own, so it stays off here.
        let mut p = LinkParams::default();
        p.coherence.mains_amplitude = 0.0;
        let period = 2.0 * PI / (p.coherence.constants.larmor_rate() * p.coherence.bias_field);
        let xx = |t: f64| {
            let m = Measurement {
                station: Station::Local,
                readout_delay: t,
                setting: BasisSetting::new(NodeBasis::X, NodeBasis::X),
                mains: MainsPhases::Discrete(vec![0.0]),
            };
            LinkModel::new(&p, &m).unwrap().analytic().correlator()
        };
        let k = (dt / period).ceil();
        let (early, late) = (xx(t), xx(t + k * period));
        prop_assert!(late.abs() <= early.abs() + 1e-12);
    }

    #[test]
    fn readout_efficiency_leaves_outcomes_unchanged(eta in 0.01..1.0f64, t in 0.0..100e-6f64, basis in 0usize..3) {
        let b = [NodeBasis::X, NodeBasis::Y, NodeBasis::Z][basis];
        let corr = |e: f64| {
            let mut p = LinkParams { readout_eta_a: e, ..Default::default() };
            // Single excitations: with pairs, loss reshapes the double-click share.
            p.source.double_excitation_scale = 0.0;
            p.detector_a.dark_rate = 0.0;
            p.detector_w.dark_rate = 0.0;
            let m = Measurement { station: Station::Local, readout_delay: t, setting: BasisSetting::new(b, b), mains: MainsPhases::Discrete(vec![0.3]) };
            LinkModel::new(&p, &m).unwrap().analytic().outcomes()
        };
        let (x, y) = (corr(eta), corr(1.0));
        let nx: f64 = x.iter().flatten().sum();
        let ny: f64 = y.iter().flatten().sum();
        for i in 0..2 {
            for j in 0..2 {
                prop_assert!((x[i][j] / nx - y[i][j] / ny).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn correlator_within_physical_band(pp in 0u64..500, pm in 0u64..500, mp in 0u64..500, mm in 0u64..500) {
        prop_assume!(pp + pm + mp + mm > 0);
        let c = SettingCounts { outcomes: [[pp, pm], [mp, mm]], ..Default::default() };
        let e = correlator_counts("XX", &c).unwrap();
        prop_assert!(e.value >= -1.0 - 3.0 * e.sigma && e.value <= 1.0 + 3.0 * e.sigma);
    }

    #[test]
    fn global_relabeling_invariance(n in proptest::collection::vec((1u64..300, 1u64..300, 1u64..300, 1u64..300), 4)) {
        let make = |flip: bool| -> Vec<EstimateWithError> {
            n.iter().map(|&(pp, pm, mp, mm)| {
                let o = if flip { [[mm, mp], [pm, pp]] } else { [[pp, pm], [mp, mm]] };
                correlator_counts("c", &SettingCounts { outcomes: o, ..Default::default() }).unwrap()
            }).collect()
        };
        let (a, b) = (make(false), make(true));
        prop_assert_eq!(chsh(a[0], a[1], a[2], a[3]), chsh(b[0], b[1], b[2], b[3]));
        prop_assert_eq!(fidelity(a[0], a[1], a[2]), fidelity(b[0], b[1], b[2]));
    }

    #[test]
    fn accumulate_is_order_independent(seed in any::<u64>(), split in 1usize..199) {
        let p = LinkParams::default();
        let settings = BasisSetting::fidelity();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut records = Vec::new();
        for (k, s) in settings.iter().enumerate() {
            let m = Measurement { station: Station::Local, readout_delay: 0.0, setting: s.clone(), mains: MainsPhases::Discrete(vec![0.0]) };
            let model = LinkModel::new(&p, &m).unwrap();
            for id in 0..200u64 {
                let ctx = TrialContext { trial_id: k as u64 * 1000 + id, start_time: 0.0, mains_phase: Some(0.0) };
                records.push(model.simulate_trial(&ctx, &mut rng));
            }
        }
        let whole = accumulate(&records).unwrap();
        let mut shuffled = records.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut rng);
        let (a, b) = shuffled.split_at(split * 3);
        let mut left = accumulate(b).unwrap();
        left.merge(&accumulate(a).unwrap()).unwrap();
        let mut right = CountsTable::new();
        right.merge(&accumulate(a).unwrap()).unwrap();
        right.merge(&accumulate(b).unwrap()).unwrap();
        prop_assert_eq!(&whole, &left);
        prop_assert_eq!(&whole, &right);
    }
}

/// Resampled correlator errors shrink as `1/sqrt(n)`.
#[test]
fn sigma_scales_inverse_root_n() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rho = qubit(0.6, 0.0, 0.0);
    let obs = Observable::pauli_x();
    let sigma = |n: usize, rng: &mut ChaCha8Rng| {
        let mut c = SettingCounts::default();
        for _ in 0..n {
            let o = sample_measurement(&rho, &obs, rng).unwrap();
            c.add_trial(Some(o), Some(Outcome::Plus), false);
        }
        correlator_counts("XX", &c).unwrap().sigma
    };
    let ratio = sigma(1000, &mut rng) / sigma(16000, &mut rng);
    assert!((ratio - 4.0).abs() < 0.2, "{ratio}");
}
