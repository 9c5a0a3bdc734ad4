use memlink::config::CampaignConfig;
use memlink::scenarios::{run_scenario, Scenario};

/// Across ten master seeds every figure of merit scatters around its exact
/// expectation within its own reported σ, and the seed average shows no bias.
#[test]
fn figures_of_merit_do_not_depend_on_the_seed() {
    let keys: &[(Scenario, &[&str])] = &[
        (
            Scenario::Checkpoints,
            &["g2_I", "g2_II", "g2_III", "fidelity_I", "fidelity_II", "fidelity_III"],
        ),
        (Scenario::Bell, &["chsh", "fidelity"]),
    ];
    let seeds = 1..=10u64;
    for (scenario, names) in keys {
        let mut pulls = vec![Vec::new(); names.len()];
        for seed in seeds.clone() {
            let mut cfg = CampaignConfig::shipped();
            cfg.seed = seed;
            cfg.bell_trials = 2_000_000;
            let r = run_scenario(*scenario, &cfg).unwrap();
            for (i, name) in names.iter().enumerate() {
                let x = r.estimate(name).unwrap();
                let exact = r.value(&format!("{name}_analytic")).unwrap();
                let z = (x.value - exact) / x.sigma;
                assert!(
                    z.abs() <= 3.0,
                    "{scenario} seed {seed}: {name} = {} ± {} vs {exact}",
                    x.value,
                    x.sigma
                );
                pulls[i].push(z);
            }
        }
        for (name, z) in names.iter().zip(&pulls) {
            let mean = z.iter().sum::<f64>() / z.len() as f64;
            assert!(
                mean.abs() * (z.len() as f64).sqrt() <= 3.0,
                "{scenario} {name}: mean pull {mean:.2} over {z:?}"
            );
            // 99.9% range of a χ² with ten degrees of freedom, per degree.
            let rms = (z.iter().map(|v| v * v).sum::<f64>() / z.len() as f64).sqrt();
            assert!(
                (0.36..=1.72).contains(&rms),
                "{scenario} {name}: pull spread {rms:.2} over {z:?}"
            );
        }
    }
}
