//! Weighted Levenberg-Marquardt curve fits with seeded multi-start.
//!
//! Times and values are rescaled to order one before fitting; parameters are
//! mapped back to physical units afterwards.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sweep::SweepPoint;
use super::Result;
use crate::error::EstimateError;

const STARTS: usize = 5;
const TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 2000;
const START_SEED: u64 = 0x5eed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitModel {
    /// `a · exp(−(t/τ)²)`
    GaussianDecay,
    /// `a · exp(−t/τ)`
    ExponentialDecay,
    /// `a · cos(2πft + φ) · exp(−(t/τ)²)`
    DampedCosine,
    /// `a · sin(2πft + φ) + c`
    Sinusoid,
}

impl FitModel {
    pub fn name(self) -> &'static str {
        match self {
            FitModel::GaussianDecay => "gaussian-decay",
            FitModel::ExponentialDecay => "exponential-decay",
            FitModel::DampedCosine => "damped-cosine",
            FitModel::Sinusoid => "sinusoid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            FitModel::GaussianDecay,
            FitModel::ExponentialDecay,
            FitModel::DampedCosine,
            FitModel::Sinusoid,
        ]
        .into_iter()
        .find(|m| m.name() == s)
    }

    /// Model value at scaled time `u` for scaled parameters.
    fn eval(self, p: &[f64], u: f64) -> f64 {
        match self {
            FitModel::GaussianDecay => p[0] * (-p[1] * u * u).exp(),
            FitModel::ExponentialDecay => p[0] * (-p[1] * u).exp(),
            FitModel::DampedCosine => p[0] * (2.0 * PI * p[1] * u + p[2]).cos() * (-p[3] * u * u).exp(),
            FitModel::Sinusoid => p[0] * (2.0 * PI * p[1] * u + p[2]).sin() + p[3],
        }
    }
}

impl fmt::Display for FitModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitParam {
    pub name: String,
    pub value: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    pub params: Vec<FitParam>,
    /// Time for the decay factor to reach `1/e`, s; infinite when no decay is resolved.
    pub one_over_e_time: f64,
    pub one_over_e_sigma: f64,
    /// `sqrt(Σ ((y − f)/σ)²)`.
    pub residual_norm: f64,
    pub iterations: usize,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<&FitParam> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn value(&self, name: &str) -> f64 {
        self.param(name).map_or(f64::NAN, |p| p.value)
    }

    /// Model prediction at time `t` (s).
    pub fn predict(&self, t: f64) -> f64 {
        let v = |n: &str| self.value(n);
        match self.model {
            FitModel::GaussianDecay => v("amplitude") * (-v("decay_rate") * t * t).exp(),
            FitModel::ExponentialDecay => v("amplitude") * (-v("decay_rate") * t).exp(),
            FitModel::DampedCosine => {
                v("amplitude") * (2.0 * PI * v("frequency") * t + v("phase")).cos() * (-v("decay_rate") * t * t).exp()
            }
            FitModel::Sinusoid => v("amplitude") * (2.0 * PI * v("frequency") * t + v("phase")).sin() + v("offset"),
        }
    }
}

/// Data rescaled so that `|u| ≤ 1` and `|y| ≤ 1`.
struct Scaled {
    u: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
    t_scale: f64,
    y_scale: f64,
    /// Whether the input carried error bars; otherwise the residual sets the scale.
    weighted: bool,
}

fn scale(points: &[SweepPoint]) -> Scaled {
    let t_scale = points.iter().map(|p| p.t.abs()).fold(0.0, f64::max);
    let t_scale = if t_scale > 0.0 { t_scale } else { 1.0 };
    let y_scale = points.iter().map(|p| p.value.abs()).fold(0.0, f64::max);
    let y_scale = if y_scale > 0.0 { y_scale } else { 1.0 };
    let min_sigma = points
        .iter()
        .map(|p| p.sigma)
        .filter(|s| *s > 0.0)
        .fold(f64::INFINITY, f64::min);
    let weighted = min_sigma.is_finite();
    Scaled {
        u: points.iter().map(|p| p.t / t_scale).collect(),
        y: points.iter().map(|p| p.value / y_scale).collect(),
        w: points
            .iter()
            .map(|p| {
                if !weighted {
                    1.0
                } else {
                    y_scale / if p.sigma > 0.0 { p.sigma } else { min_sigma }
                }
            })
            .collect(),
        t_scale,
        y_scale,
        weighted,
    }
}

fn residuals(model: FitModel, d: &Scaled, p: &[f64]) -> Vec<f64> {
    d.u.iter()
        .zip(&d.y)
        .zip(&d.w)
        .map(|((u, y), w)| w * (y - model.eval(p, *u)))
        .collect()
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Jacobian columns `∂r/∂p_j` by central differences.
fn jacobian(f: &dyn Fn(&[f64]) -> Vec<f64>, p: &[f64]) -> Vec<Vec<f64>> {
    let mut q = p.to_vec();
    (0..p.len())
        .map(|j| {
            let h = 1e-7 * p[j].abs().max(1e-3);
            q[j] = p[j] + h;
            let up = f(&q);
            q[j] = p[j] - h;
            let down = f(&q);
            q[j] = p[j];
            up.iter().zip(&down).map(|(a, b)| (a - b) / (2.0 * h)).collect()
        })
        .collect()
}

/// Solve `a·x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[piv][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn normal_matrix(jac: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = jac.len();
    (0..n)
        .map(|i| (0..n).map(|k| jac[i].iter().zip(&jac[k]).map(|(a, b)| a * b).sum()).collect())
        .collect()
}

/// Result of [`least_squares`].
#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub params: Vec<f64>,
    /// Sum of squared residuals.
    pub cost: f64,
    pub iterations: usize,
}

/// Minimize `Σ r_i(p)²` by Levenberg-Marquardt from `start`.
pub fn least_squares(f: &dyn Fn(&[f64]) -> Vec<f64>, start: Vec<f64>) -> Result<Minimum> {
    let mut p = start;
    let mut r = f(&p);
    let mut c = sum_sq(&r);
    let mut lambda = 1e-3;
    let mut last_change = f64::INFINITY;
    for it in 1..=MAX_ITERATIONS {
        if c < 1e-30 {
            return Ok(Minimum {
                params: p,
                cost: c,
                iterations: it,
            });
        }
        let jac = jacobian(f, &p);
        let a = normal_matrix(&jac);
        let g: Vec<f64> = jac
            .iter()
            .map(|col| -col.iter().zip(&r).map(|(j, x)| j * x).sum::<f64>())
            .collect();
        loop {
            let mut damped = a.clone();
            for (i, row) in damped.iter_mut().enumerate() {
                row[i] += lambda * a[i][i].max(1e-12);
            }
            let trial = solve(damped, g.clone()).map(|step| p.iter().zip(&step).map(|(x, s)| x + s).collect::<Vec<_>>());
            let next = trial
                .map(|q| {
                    let rq = f(&q);
                    (sum_sq(&rq), rq, q)
                })
                .filter(|(cq, _, _)| cq.is_finite());
            match next {
                Some((cq, rq, q)) if cq <= c => {
                    last_change = (c - cq) / c.max(1e-300);
                    p = q;
                    r = rq;
                    c = cq;
                    lambda = (lambda / 3.0).max(1e-12);
                    if last_change < TOLERANCE {
                        return Ok(Minimum {
                            params: p,
                            cost: c,
                            iterations: it,
                        });
                    }
                    break;
                }
                _ => {
                    lambda *= 4.0;
                    if lambda > 1e16 {
                        // No downhill step left at machine precision: a stationary point.
                        return Ok(Minimum {
                            params: p,
                            cost: c,
                            iterations: it,
                        });
                    }
                }
            }
        }
    }
    Err(EstimateError::NoConvergence {
        iterations: MAX_ITERATIONS,
        last_change,
        cost: c,
    })
}

/// Per-parameter standard deviations from the inverse normal matrix. Parameters
/// the data do not constrain get an infinite sigma.
fn sigmas(model: FitModel, d: &Scaled, m: &Minimum) -> Vec<f64> {
    let a = normal_matrix(&jacobian(&|p: &[f64]| residuals(model, d, p), &m.params));
    let n = a.len();
    let peak = (0..n).map(|i| a[i][i]).fold(0.0, f64::max);
    let live: Vec<usize> = (0..n).filter(|&i| a[i][i] > 1e-14 * peak && a[i][i] > 0.0).collect();
    let sub: Vec<Vec<f64>> = live.iter().map(|&i| live.iter().map(|&k| a[i][k]).collect()).collect();
    let dof = d.u.len().saturating_sub(n).max(1) as f64;
    let var_scale = if d.weighted { 1.0 } else { m.cost / dof };
    let mut out = vec![f64::INFINITY; n];
    for (col, &i) in live.iter().enumerate() {
        let mut e = vec![0.0; live.len()];
        e[col] = 1.0;
        if let Some(x) = solve(sub.clone(), e) {
            if x[col] >= 0.0 {
                out[i] = (x[col] * var_scale).sqrt();
            }
        }
    }
    out
}

fn best_of(model: FitModel, d: &Scaled, starts: Vec<Vec<f64>>) -> Result<Minimum> {
    let mut best: Option<Minimum> = None;
    let mut failure = None;
    for s in starts {
        match least_squares(&|p: &[f64]| residuals(model, d, p), s) {
            Ok(m) => {
                if best.as_ref().is_none_or(|b| m.cost < b.cost) {
                    best = Some(m);
                }
            }
            Err(e) => failure = Some(e),
        }
    }
    best.ok_or_else(|| failure.expect("at least one start"))
}

/// Seed plus jittered copies from a fixed stream.
fn starts(seed: Vec<f64>, jitter: &[f64]) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut out = vec![seed.clone()];
    for _ in 1..STARTS {
        out.push(
            seed.iter()
                .zip(jitter)
                .map(|(x, j)| x + j * (2.0 * rng.random::<f64>() - 1.0))
                .collect(),
        );
    }
    out
}

fn wrap_phase(phi: f64) -> f64 {
    let r = phi.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Strongest frequency of `y − mean` on a fine grid, with its phase (cosine convention).
fn periodogram(u: &[f64], y: &[f64], w: &[f64]) -> (f64, f64) {
    let (lo, hi) = u
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
    let span = (hi - lo).max(1e-12);
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let nyquist = 0.5 * (u.len() as f64 - 1.0) / span;
    let df = 1.0 / (16.0 * span);
    let mut best = (0.0, 0.0, f64::NEG_INFINITY);
    let mut f = df;
    while f <= nyquist {
        let (mut re, mut im) = (0.0, 0.0);
        for ((x, v), wt) in u.iter().zip(y).zip(w) {
            let a = 2.0 * PI * f * x;
            re += wt * wt * (v - mean) * a.cos();
            im += wt * wt * (v - mean) * a.sin();
        }
        let power = re * re + im * im;
        if power > best.2 {
            best = (f, im.atan2(re), power);
        }
        f += df;
    }
    // v ≈ A cos(2πfu − θ) with θ = atan2(im, re).
    (best.0, -best.1)
}

fn decay_time(rate: f64, rate_sigma: f64, gaussian: bool) -> (f64, f64) {
    if !(rate > 0.0) {
        return (f64::INFINITY, f64::INFINITY);
    }
    if gaussian {
        let tau = rate.powf(-0.5);
        (tau, 0.5 * tau / rate * rate_sigma)
    } else {
        (1.0 / rate, rate_sigma / (rate * rate))
    }
}

fn param(name: &str, value: f64, sigma: f64) -> FitParam {
    FitParam {
        name: name.to_string(),
        value,
        sigma,
    }
}

/// Decays below this fraction over the whole span count as unresolved.
const UNRESOLVED_DECAY: f64 = 1e-9;

/// Fit a pure decay (Gaussian or exponential) and report its 1/e time.
pub fn fit_decay(points: &[SweepPoint], model: FitModel) -> Result<FitResult> {
    let gaussian = match model {
        FitModel::GaussianDecay => true,
        FitModel::ExponentialDecay => false,
        other => return Err(EstimateError::NotADecayModel(other.name().into())),
    };
    if points.len() < 4 {
        return Err(EstimateError::TooFewPoints {
            needed: 4,
            got: points.len(),
        });
    }
    let d = scale(points);
    // Log-linear seed from the two ends.
    let (first, last) = (0, d.u.len() - 1);
    let a0 = if d.y[first] != 0.0 { d.y[first] } else { 1.0 };
    let ratio = d.y[last] / a0;
    let x = |u: f64| if gaussian { u * u } else { u };
    let dx = x(d.u[last]) - x(d.u[first]);
    let r0 = if ratio > 0.0 && ratio < 1.0 && dx > 0.0 {
        -ratio.ln() / dx
    } else {
        1.0
    };
    let m = best_of(model, &d, starts(vec![a0, r0], &[0.1 * a0.abs(), 0.5 * r0]))?;
    let s = sigmas(model, &d, &m);
    let k = if gaussian { 2 } else { 1 };
    let rate = m.params[1] / d.t_scale.powi(k);
    let rate_sigma = s[1] / d.t_scale.powi(k);
    let (tau, tau_sigma) = if m.params[1] <= UNRESOLVED_DECAY {
        (f64::INFINITY, f64::INFINITY)
    } else {
        decay_time(rate, rate_sigma, gaussian)
    };
    Ok(FitResult {
        model,
        params: vec![
            param("amplitude", m.params[0] * d.y_scale, s[0] * d.y_scale),
            param("decay_rate", rate, rate_sigma),
        ],
        one_over_e_time: tau,
        one_over_e_sigma: tau_sigma,
        residual_norm: m.cost.sqrt(),
        iterations: m.iterations,
    })
}

/// Damped-cosine fit: frequency, phase and Gaussian envelope time.
pub fn fit_oscillation(points: &[SweepPoint]) -> Result<FitResult> {
    if points.len() < 8 {
        return Err(EstimateError::TooFewPoints {
            needed: 8,
            got: points.len(),
        });
    }
    let d = scale(points);
    let (f0, phi0) = periodogram(&d.u, &d.y, &d.w);
    let (lo, hi) =
        d.u.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
    if f0 * (hi - lo) < 1.0 {
        return Err(EstimateError::UnderSampled(format!(
            "{} points span {:.3} periods; need at least one",
            points.len(),
            f0 * (hi - lo)
        )));
    }
    let a0 = d.y.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let seed = vec![a0, f0, phi0, 0.1];
    let m = best_of(FitModel::DampedCosine, &d, starts(seed, &[0.1 * a0, 0.02 * f0, 0.3, 0.1]))?;
    let s = sigmas(FitModel::DampedCosine, &d, &m);
    let (mut amp, mut phase) = (m.params[0], m.params[2]);
    if amp < 0.0 {
        amp = -amp;
        phase += PI;
    }
    let ts = d.t_scale;
    let rate = m.params[3] / (ts * ts);
    let rate_sigma = s[3] / (ts * ts);
    let (tau, tau_sigma) = if m.params[3] <= UNRESOLVED_DECAY {
        (f64::INFINITY, f64::INFINITY)
    } else {
        decay_time(rate, rate_sigma, true)
    };
    Ok(FitResult {
        model: FitModel::DampedCosine,
        params: vec![
            param("amplitude", amp * d.y_scale, s[0] * d.y_scale),
            param("frequency", m.params[1] / ts, s[1] / ts),
            param("phase", wrap_phase(phase), s[2]),
            param("decay_rate", rate, rate_sigma),
        ],
        one_over_e_time: tau,
        one_over_e_sigma: tau_sigma,
        residual_norm: m.cost.sqrt(),
        iterations: m.iterations,
    })
}

/// Sinusoid with offset, for field traces.
pub fn fit_mains(points: &[SweepPoint]) -> Result<FitResult> {
    if points.len() < 4 {
        return Err(EstimateError::TooFewPoints {
            needed: 4,
            got: points.len(),
        });
    }
    let d = scale(points);
    let (f0, phi_cos) = periodogram(&d.u, &d.y, &d.w);
    let mean = d.y.iter().sum::<f64>() / d.y.len() as f64;
    let a0 = d.y.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    // cos(x + φ) = sin(x + φ + π/2).
    let seed = vec![a0, f0, phi_cos + 0.5 * PI, mean];
    let m = best_of(FitModel::Sinusoid, &d, starts(seed, &[0.1 * a0, 0.02 * f0, 0.3, 0.1 * a0]))?;
    let s = sigmas(FitModel::Sinusoid, &d, &m);
    let (mut amp, mut phase) = (m.params[0], m.params[2]);
    if amp < 0.0 {
        amp = -amp;
        phase += PI;
    }
    let ts = d.t_scale;
    // An unresolved amplitude leaves frequency and phase unconstrained; its own
    // error comes from the residual scatter per point.
    let amp_sigma = if s[0].is_finite() {
        s[0]
    } else {
        (m.cost / d.u.len().max(1) as f64).sqrt()
    };
    Ok(FitResult {
        model: FitModel::Sinusoid,
        params: vec![
            param("amplitude", amp * d.y_scale, amp_sigma * d.y_scale),
            param("frequency", m.params[1] / ts, s[1] / ts),
            param("phase", wrap_phase(phase), s[2]),
            param("offset", m.params[3] * d.y_scale, s[3] * d.y_scale),
        ],
        one_over_e_time: f64::INFINITY,
        one_over_e_sigma: f64::INFINITY,
        residual_norm: m.cost.sqrt(),
        iterations: m.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn grid(n: usize, span: f64, f: impl Fn(f64) -> f64) -> Vec<SweepPoint> {
        (0..n)
            .map(|i| {
                let t = span * i as f64 / (n - 1) as f64;
                SweepPoint {
                    t,
                    value: f(t),
                    sigma: 0.0,
                    n: 0,
                }
            })
            .collect()
    }

    #[test]
    fn gaussian_decay_recovers_generator() {
        let pts = grid(20, 1.2e-3, |t| (-(t / 500e-6f64).powi(2)).exp());
        let r = fit_decay(&pts, FitModel::GaussianDecay).unwrap();
        assert!((r.one_over_e_time / 500e-6 - 1.0).abs() < 1e-3, "{}", r.one_over_e_time);
        let rate = r.value("decay_rate");
        assert!((r.one_over_e_time - rate.powf(-0.5)).abs() / r.one_over_e_time < 1e-6);
    }

    #[test]
    fn exponential_decay_recovers_generator() {
        let pts = grid(12, 3e-3, |t| 0.9 * (-t / 1.2e-3f64).exp());
        let r = fit_decay(&pts, FitModel::ExponentialDecay).unwrap();
        assert!((r.one_over_e_time / 1.2e-3 - 1.0).abs() < 1e-4);
        assert!((r.value("amplitude") - 0.9).abs() < 1e-6);
        assert!((r.one_over_e_time * r.value("decay_rate") - 1.0).abs() < 1e-6);
    }

    #[test]
    fn constant_data_has_unbounded_lifetime() {
        let pts = grid(10, 1e-3, |_| 0.7);
        for model in [FitModel::GaussianDecay, FitModel::ExponentialDecay] {
            let r = fit_decay(&pts, model).unwrap();
            assert!(r.one_over_e_time.is_infinite(), "{model}: {}", r.one_over_e_time);
        }
    }

    #[test]
    fn decay_rejects_bad_input() {
        let pts = grid(3, 1e-3, |t| (-t).exp());
        assert!(matches!(
            fit_decay(&pts, FitModel::GaussianDecay),
            Err(EstimateError::TooFewPoints { .. })
        ));
        let pts = grid(6, 1e-3, |t| (-t).exp());
        assert!(fit_decay(&pts, FitModel::Sinusoid).is_err());
    }

    #[test]
    fn damped_cosine_recovers_frequency_and_envelope() {
        let (f, tau) = (140e3, 60e-6);
        let pts = grid(120, 50e-6, |t| (2.0 * PI * f * t).cos() * (-(t / tau).powi(2)).exp());
        let r = fit_oscillation(&pts).unwrap();
        assert!((r.value("frequency") / f - 1.0).abs() < 0.01);
        assert!((r.one_over_e_time / tau - 1.0).abs() < 0.01);
        assert!(r.value("phase").abs() < 1e-3);
    }

    #[test]
    fn damped_cosine_with_noise_and_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let noise = Normal::new(0.0, 0.02).unwrap();
        let (f, tau, phi) = (1.4e6, 8e-6, 1.1);
        let pts: Vec<_> = grid(80, 10e-6, |t| {
            0.9 * (2.0 * PI * f * t + phi).cos() * (-(t / tau).powi(2)).exp()
        })
        .into_iter()
        .map(|mut p| {
            p.value += noise.sample(&mut rng);
            p.sigma = 0.02;
            p
        })
        .collect();
        let r = fit_oscillation(&pts).unwrap();
        let fp = r.param("frequency").unwrap();
        assert!((fp.value - f).abs() < 4.0 * fp.sigma && fp.sigma / f < 0.01);
        assert!((r.value("phase") - phi).abs() < 0.1);
        assert!((r.one_over_e_time / tau - 1.0).abs() < 0.1);
    }

    #[test]
    fn under_sampled_oscillation_rejected() {
        let pts = grid(7, 1e-6, |t| t.cos());
        assert!(matches!(fit_oscillation(&pts), Err(EstimateError::TooFewPoints { .. })));
        let pts = grid(10, 2e-6, |t| (2.0 * PI * 1e5 * t).cos());
        assert!(matches!(fit_oscillation(&pts), Err(EstimateError::UnderSampled(_))));
    }

    #[test]
    fn mains_amplitude_recovery() {
        for amp in [1.61e-3, 0.35e-3] {
            let pts = grid(200, 0.06, |t| amp * (2.0 * PI * 50.0 * t + 0.4).sin() + 2e-4);
            let r = fit_mains(&pts).unwrap();
            assert!((r.value("amplitude") / amp - 1.0).abs() < 0.02, "{}", r.value("amplitude"));
            assert!((r.value("frequency") - 50.0).abs() < 0.01);
            assert!((r.value("offset") - 2e-4).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_amplitude_trace() {
        let mut pts = grid(100, 0.06, |_| 0.0);
        pts.iter_mut().for_each(|p| p.sigma = 1e-5);
        let r = fit_mains(&pts).unwrap();
        let a = r.param("amplitude").unwrap();
        assert!(a.value.abs() <= 3.0 * a.sigma.max(1e-12), "{a:?}");
    }
}
