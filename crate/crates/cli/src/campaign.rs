//! Sharded Monte Carlo runs with an analytic companion for every setting.

use memlink_core::detection::{BasisSetting, LinkModel, LinkParams, Measurement, PatternProbabilities, SettingCounts, Station};
use memlink_core::estimators::{correlator_counts, format_sig};
use memlink_core::QuantumError;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::timeline::Schedule;

/// Trials per shard. Each shard owns one ChaCha stream, so the merged counts
/// do not depend on the number of worker threads.
pub const BATCH: u64 = 1 << 14;

/// Identifies a run inside a scenario: sweep point and setting index.
pub fn stream_id(point: usize, setting: usize) -> u64 {
    ((point as u64) << 40) | ((setting as u64) << 32)
}

#[derive(Clone, Debug)]
pub struct SettingRun {
    pub label: String,
    pub station: Station,
    pub readout_delay: f64,
    pub counts: SettingCounts,
    pub expected: PatternProbabilities,
}

/// One Monte Carlo-versus-analytic comparison.
#[derive(Clone, Debug)]
pub struct Agreement {
    pub run: String,
    pub quantity: &'static str,
    pub simulated: f64,
    pub analytic: f64,
    pub sigma: f64,
}

impl Agreement {
    pub fn z(&self) -> f64 {
        if self.sigma > 0.0 {
            (self.simulated - self.analytic) / self.sigma
        } else if self.simulated == self.analytic {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

fn binomial(run: &str, quantity: &'static str, k: u64, n: u64, p: f64) -> Agreement {
    let nf = n as f64;
    // A floor of one count keeps rare events from claiming zero variance.
    let var = (p * (1.0 - p) / nf).max(1.0 / (nf * nf));
    Agreement {
        run: run.to_string(),
        quantity,
        simulated: k as f64 / nf,
        analytic: p,
        sigma: var.sqrt(),
    }
}

impl SettingRun {
    pub fn agreements(&self) -> Vec<Agreement> {
        let c = &self.counts;
        let e = &self.expected;
        let run = format!(
            "{}:{}@{}us",
            self.station.numeral(),
            self.label,
            format_sig(self.readout_delay * 1e6, 6)
        );
        let mut out = vec![
            binomial(&run, "p_a", c.singles_a, c.trials, e.p_a()),
            binomial(&run, "p_w", c.singles_w, c.trials, e.p_w()),
            binomial(&run, "p_aw", c.coincidences, c.trials, e.p_aw()),
            binomial(&run, "p_noise_w", c.noise_w, c.trials, e.p_noise_w()),
        ];
        if let Ok(corr) = correlator_counts(&self.label, c) {
            let analytic = e.correlator();
            // Error from the model's own spread so a lucky all-agree sample is not exact.
            let sigma = ((1.0 - analytic * analytic).max(0.0) / corr.n_samples as f64)
                .sqrt()
                .max(corr.sigma);
            out.push(Agreement {
                run,
                quantity: "correlator",
                simulated: corr.value,
                analytic,
                sigma,
            });
        }
        out
    }
}

pub struct Campaign<'a> {
    pub params: &'a LinkParams,
    pub schedule: &'a Schedule,
    pub seed: u64,
}

impl Campaign<'_> {
    pub fn measurement(&self, station: Station, readout_delay: f64, setting: &BasisSetting) -> Measurement {
        Measurement {
            station,
            readout_delay,
            setting: setting.clone(),
            mains: self.schedule.mains_phases(),
        }
    }

    /// `trials` trials of one setting on stream `stream`.
    pub fn run(
        &self,
        station: Station,
        readout_delay: f64,
        setting: &BasisSetting,
        trials: u64,
        stream: u64,
    ) -> Result<SettingRun, QuantumError> {
        let m = self.measurement(station, readout_delay, setting);
        let model = LinkModel::new(self.params, &m)?;
        let batches = trials.div_ceil(BATCH);
        let counts = (0..batches)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(stream | b);
                let mut c = SettingCounts::for_setting(setting);
                for id in b * BATCH..((b + 1) * BATCH).min(trials) {
                    let r = model.run_trial(&self.schedule.context(id), &mut rng);
                    c.add_trial(r.outcome_a, r.outcome_w, r.noise_w());
                }
                c
            })
            .reduce(
                || SettingCounts::for_setting(setting),
                |mut a, b| {
                    a.merge(&setting.label, &b).expect("shards share a setting");
                    a
                },
            );
        Ok(SettingRun {
            label: setting.label.clone(),
            station,
            readout_delay,
            counts,
            expected: model.analytic(),
        })
    }
}
