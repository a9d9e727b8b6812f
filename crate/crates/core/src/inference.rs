//! Bayesian confidence in a safety verdict.
//!
//! With a uniform prior on the error probability `θ`, a sampling method whose
//! chance of drawing a negative trace is `θ^α` leads, after `n` positive and
//! `m` negative samples, to a posterior proportional to
//! `θ^(αm) (1 - θ^α)^n`. Confidence is the posterior mass below a tolerance
//! `δ`. Everything is computed by adaptive quadrature so that fractional `α`
//! needs no special functions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{ModeId, TransitionId};
use crate::ode::Integrator;
use crate::quadrature::{integrate, integrate_vec, Tolerance};
use crate::sampler::{grid_windows, SampleError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SampleTally {
    /// Positive (safe) samples.
    pub n: u64,
    /// Negative samples.
    pub m: u64,
}

impl SampleTally {
    pub fn new(n: u64, m: u64) -> SampleTally {
        SampleTally { n, m }
    }
}

/// Exponent `α` of the effectiveness function `θ ↦ θ^α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Effectiveness(f64);

impl Effectiveness {
    pub const PLAIN: Effectiveness = Effectiveness(1.0);

    pub fn new(alpha: f64) -> Result<Effectiveness, InferenceError> {
        if alpha > 0.0 && alpha <= 1.0 {
            Ok(Effectiveness(alpha))
        } else {
            Err(InferenceError::BadAlpha(alpha))
        }
    }

    pub fn alpha(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferenceError {
    #[error("effectiveness exponent must lie in (0, 1], got {0}")]
    BadAlpha(f64),
    #[error("tolerance must lie in (0, 1), got {0}")]
    BadDelta(f64),
    #[error("target confidence must lie in (0, 1), got {0}")]
    BadTarget(f64),
    #[error("the exact oracle supports at most 2 state variables, model has {0}")]
    Scope(usize),
    #[error(transparent)]
    Sample(#[from] SampleError),
}

/// Unnormalised posterior, scaled so its maximum is 1.
#[derive(Debug, Clone, Copy)]
struct Kernel {
    am: f64,
    n: f64,
    alpha: f64,
    log_max: f64,
    mode: f64,
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

impl Kernel {
    fn new(tally: SampleTally, alpha: f64) -> Kernel {
        let (m, n) = (tally.m as f64, tally.n as f64);
        let (mode, log_max) = if m == 0.0 {
            (0.0, 0.0)
        } else if n == 0.0 {
            (1.0, 0.0)
        } else {
            let s = m + n;
            ((m / s).powf(1.0 / alpha), xlogy(m, m / s) + xlogy(n, n / s))
        };
        Kernel { am: alpha * m, n, alpha, log_max, mode }
    }

    fn eval(&self, theta: f64) -> f64 {
        let lead = if self.am == 0.0 { 0.0 } else { self.am * theta.ln() };
        let tail = if self.n == 0.0 { 0.0 } else { self.n * (-theta.powf(self.alpha)).ln_1p() };
        (lead + tail - self.log_max).exp()
    }

    fn integral(&self, a: f64, b: f64) -> f64 {
        let mut breaks = vec![a];
        if self.mode > a && self.mode < b {
            breaks.push(self.mode);
        }
        breaks.push(b);
        let tol = Tolerance { abs: 1e-300, rel: 1e-13, max_intervals: 4000 };
        integrate(|t| self.eval(t), &breaks, tol).value[0]
    }
}

fn check_delta(delta: f64) -> Result<(), InferenceError> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(InferenceError::BadDelta(delta))
    }
}

/// Posterior probability that the error probability is below `delta`.
pub fn confidence(tally: SampleTally, delta: f64, eff: Effectiveness) -> Result<f64, InferenceError> {
    check_delta(delta)?;
    let k = Kernel::new(tally, eff.alpha());
    let below = k.integral(0.0, delta);
    let above = k.integral(delta, 1.0);
    Ok((below / (below + above)).clamp(0.0, 1.0))
}

/// Normalised posterior density of the error probability.
#[derive(Debug, Clone, Copy)]
pub struct PosteriorDensity {
    kernel: Kernel,
    norm: f64,
}

impl PosteriorDensity {
    pub fn new(tally: SampleTally, eff: Effectiveness) -> PosteriorDensity {
        let kernel = Kernel::new(tally, eff.alpha());
        let norm = kernel.integral(0.0, 1.0);
        PosteriorDensity { kernel, norm }
    }

    pub fn pdf(&self, theta: f64) -> f64 {
        if !(0.0..=1.0).contains(&theta) {
            return 0.0;
        }
        self.kernel.eval(theta) / self.norm
    }

    /// Location of the density's maximum.
    pub fn mode(&self) -> f64 {
        self.kernel.mode
    }
}

/// Smallest number of consecutive positive samples after which confidence
/// reaches `target`.
pub fn required_samples(delta: f64, target: f64, eff: Effectiveness) -> Result<u64, InferenceError> {
    check_delta(delta)?;
    if !(target > 0.0 && target < 1.0) {
        return Err(InferenceError::BadTarget(target));
    }
    let c = |n: u64| confidence(SampleTally::new(n, 0), delta, eff);
    if c(0)? >= target {
        return Ok(0);
    }
    let mut lo = 0u64;
    let mut hi = 1u64;
    while c(hi)? < target {
        lo = hi;
        hi *= 2;
    }
    // c(lo) < target <= c(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if c(mid)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceVerdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceReport {
    pub tally: SampleTally,
    pub delta: f64,
    pub alpha: f64,
    pub confidence: f64,
    pub target: f64,
    pub verdict: ConfidenceVerdict,
}

pub fn confidence_report(
    tally: SampleTally,
    delta: f64,
    eff: Effectiveness,
    target: f64,
) -> Result<ConfidenceReport, InferenceError> {
    let c = confidence(tally, delta, eff)?;
    let verdict = if tally.m > 0 {
        ConfidenceVerdict::Fail
    } else if c >= target {
        ConfidenceVerdict::Pass
    } else {
        ConfidenceVerdict::Inconclusive
    };
    Ok(ConfidenceReport { tally, delta, alpha: eff.alpha(), confidence: c, target, verdict })
}

/// Exact one-step transition distribution from a mode under a uniform start
/// over `initial_box`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionDistribution {
    pub transitions: Vec<(TransitionId, f64)>,
    /// Probability that no guard window is open, so the mode is kept.
    pub stay: f64,
}

/// Reference value for the random-step distribution out of `q`: window
/// measures come from dense grid scans with bisected crossings, and the
/// average over the start box uses nested adaptive quadrature.
pub fn exact_transition_probability(
    integ: &Integrator<'_>,
    q: ModeId,
    initial_box: &[(f64, f64)],
    step_index: usize,
) -> Result<TransitionDistribution, InferenceError> {
    let h = integ.automaton();
    if h.dim() > 2 {
        return Err(InferenceError::Scope(h.dim()));
    }
    let outgoing = h.outgoing(q).expect("mode is declared");
    let k = outgoing.len();
    let start = step_index as f64;
    // Per start valuation: (p_1, ..., p_k, stay).
    let point = |v: &[f64]| -> Result<Vec<f64>, InferenceError> {
        let traj = integ.trajectory(q, v, start).map_err(SampleError::from)?;
        let mut measures = Vec::with_capacity(k);
        for &id in &outgoing {
            measures.push(grid_windows(&traj, &h.transition(id).guard)?.measure);
        }
        let total: f64 = measures.iter().sum();
        let mut out: Vec<f64> = if total > 0.0 { measures.iter().map(|m| m / total).collect() } else { vec![0.0; k] };
        out.push(if total > 0.0 { 0.0 } else { 1.0 });
        Ok(out)
    };
    let free: Vec<usize> = (0..initial_box.len()).filter(|&i| initial_box[i].0 < initial_box[i].1).collect();
    let base: Vec<f64> = initial_box.iter().map(|b| b.0).collect();
    let tol = Tolerance { abs: 1e-5, rel: 0.0, max_intervals: 400 };
    let avg = match free.as_slice() {
        [] => point(&base)?,
        [i] => {
            let (l, u) = initial_box[*i];
            let est = integrate_vec(
                |x| {
                    let mut v = base.clone();
                    v[*i] = x;
                    point(&v)
                },
                &[l, u],
                k + 1,
                tol,
            )?;
            est.value.iter().map(|s| s / (u - l)).collect()
        }
        [i, j] => {
            let (li, ui) = initial_box[*i];
            let (lj, uj) = initial_box[*j];
            let est = integrate_vec(
                |x| {
                    let inner = integrate_vec(
                        |y| {
                            let mut v = base.clone();
                            v[*i] = x;
                            v[*j] = y;
                            point(&v)
                        },
                        &[lj, uj],
                        k + 1,
                        tol,
                    )?;
                    Ok::<_, InferenceError>(inner.value)
                },
                &[li, ui],
                k + 1,
                tol,
            )?;
            let area = (ui - li) * (uj - lj);
            est.value.iter().map(|s| s / area).collect()
        }
        _ => unreachable!("at most two variables"),
    };
    Ok(TransitionDistribution {
        transitions: outgoing.iter().copied().zip(avg.iter().copied()).collect(),
        stay: avg[k],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::AutomatonBuilder;
    use crate::ode::IntegratorConfig;
    use proptest::prelude::*;

    fn eff(a: f64) -> Effectiveness {
        Effectiveness::new(a).unwrap()
    }

    #[test]
    fn uninformed_posterior() {
        let d = PosteriorDensity::new(SampleTally::new(0, 0), eff(0.3));
        for &t in &[0.0, 0.2, 0.9] {
            assert!((d.pdf(t) - 1.0).abs() < 1e-12);
        }
        for &delta in &[0.05, 0.5, 0.95] {
            for &a in &[1.0, 0.4] {
                assert!((confidence(SampleTally::new(0, 0), delta, eff(a)).unwrap() - delta).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn beta_two_three_peak() {
        let d = PosteriorDensity::new(SampleTally::new(2, 1), eff(1.0));
        let argmax = (1..10_000)
            .map(|i| i as f64 / 10_000.0)
            .max_by(|a, b| d.pdf(*a).total_cmp(&d.pdf(*b)))
            .unwrap();
        assert!((argmax - 1.0 / 3.0).abs() < 1e-4);
        // Beta(2,3) density is 12 θ (1-θ)^2.
        assert!((d.pdf(0.25) - 12.0 * 0.25 * 0.75f64.powi(2)).abs() < 1e-9);
    }

    #[test]
    fn closed_form_examples() {
        let c = confidence(SampleTally::new(1, 0), 0.5, eff(1.0)).unwrap();
        assert!((c - 0.75).abs() < 1e-12);
        let c = confidence(SampleTally::new(1, 0), 0.25, eff(0.5)).unwrap();
        assert!((c - 0.5).abs() < 1e-12);
    }

    #[test]
    fn required_sample_counts() {
        assert_eq!(required_samples(0.1, 0.99, eff(1.0)).unwrap(), 43);
        assert_eq!(required_samples(0.5, 0.5, eff(1.0)).unwrap(), 0);
        let plain = required_samples(0.1, 0.999, eff(1.0)).unwrap();
        let weak = required_samples(0.1, 0.999, eff(0.5)).unwrap();
        assert!(weak < plain, "{weak} vs {plain}");
        // Closed form for α = 1: 1 - 0.9^(n+1) >= 0.999.
        let closed = ((0.001f64).ln() / 0.9f64.ln() - 1.0).ceil() as u64;
        assert_eq!(plain, closed);
    }

    #[test]
    fn confidence_is_a_distribution_function() {
        for &(n, m) in &[(0u64, 0u64), (1, 0), (5, 2), (10, 10), (0, 5), (200, 3)] {
            for &a in &[1.0, 0.75, 0.5, 0.25] {
                let mut prev = 0.0;
                for i in 1..100 {
                    let c = confidence(SampleTally::new(n, m), i as f64 / 100.0, eff(a)).unwrap();
                    assert!(c + 1e-9 >= prev, "n={n} m={m} a={a}");
                    prev = c;
                }
                let lo = confidence(SampleTally::new(n, m), 1e-30, eff(a)).unwrap();
                let hi = confidence(SampleTally::new(n, m), 1.0 - 1e-12, eff(a)).unwrap();
                assert!(lo < 1e-9, "lo {lo}");
                assert!(hi > 1.0 - 1e-9, "hi {hi}");
            }
        }
    }

    #[test]
    fn consecutive_successes_drive_confidence_up() {
        let need = required_samples(0.1, 0.999, eff(1.0)).unwrap();
        for n in need..need + 200 {
            assert!(confidence(SampleTally::new(n, 0), 0.1, eff(1.0)).unwrap() >= 0.999);
        }
        let mut prev = 0.0;
        for k in 1..=50u64 {
            let c = confidence(SampleTally::new(10 * k, k), 0.1, eff(1.0)).unwrap();
            if k > 5 {
                assert!(c >= prev, "k={k}");
            }
            prev = c;
        }
        // Posterior mean 1/11 sits just under the tolerance, so the climb
        // toward one is slow.
        let early = confidence(SampleTally::new(60, 6), 0.1, eff(1.0)).unwrap();
        assert!(prev > early);
    }

    #[test]
    fn effectiveness_ordering_on_grid() {
        let counts = [0u64, 1, 2, 5, 10];
        let deltas = [0.05, 0.1, 0.3, 0.5, 0.9];
        let alphas = [1.0, 0.75, 0.5, 0.25];
        for &n in &counts {
            for &m in &counts {
                for &d in &deltas {
                    for (i, &a) in alphas.iter().enumerate() {
                        for &b in &alphas[i + 1..] {
                            let ca = confidence(SampleTally::new(n, m), d, eff(a)).unwrap();
                            let cb = confidence(SampleTally::new(n, m), d, eff(b)).unwrap();
                            assert!(ca <= cb + 1e-9, "n={n} m={m} d={d} a={a} b={b}: {ca} > {cb}");
                        }
                    }
                }
            }
        }
    }

    /// Reweighting a nonnegative density by a decreasing factor moves mass
    /// toward zero.
    #[test]
    fn decreasing_reweighting_lemma() {
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..200 {
            let coeffs: Vec<f64> = (0..4).map(|_| next()).collect();
            let (a, b) = {
                let x = next().max(0.05);
                let y = next().max(0.05);
                if x > y { (x, y) } else { (y, x + 1e-3) }
            };
            let (a, b) = if a > b { (a, b) } else { (b, a) };
            let f = |t: f64| coeffs.iter().enumerate().map(|(k, c)| c * t.powi(k as i32)).sum::<f64>();
            let g = |t: f64| if t == 0.0 { 1.0 } else { (1.0 - t.powf(b)) / (1.0 - t.powf(a)).max(1e-300) };
            let delta = next().clamp(0.01, 0.99);
            let tol = Tolerance::abs(1e-12);
            let fg0 = integrate(|t| f(t) * g(t), &[0.0, delta], tol).value[0];
            let fg1 = fg0 + integrate(|t| f(t) * g(t), &[delta, 1.0], tol).value[0];
            let f0 = integrate(f, &[0.0, delta], tol).value[0];
            let f1 = f0 + integrate(f, &[delta, 1.0], tol).value[0];
            assert!(fg0 / fg1 >= f0 / f1 - 1e-9, "a={a} b={b} delta={delta}");
        }
    }

    #[test]
    fn verdicts() {
        let r = confidence_report(SampleTally::new(43, 0), 0.1, eff(1.0), 0.99).unwrap();
        assert_eq!(r.verdict, ConfidenceVerdict::Pass);
        let r = confidence_report(SampleTally::new(42, 0), 0.1, eff(1.0), 0.99).unwrap();
        assert_eq!(r.verdict, ConfidenceVerdict::Inconclusive);
        let r = confidence_report(SampleTally::new(1000, 1), 0.1, eff(1.0), 0.99).unwrap();
        assert_eq!(r.verdict, ConfidenceVerdict::Fail);
        assert!(Effectiveness::new(0.0).is_err());
        assert!(Effectiveness::new(1.5).is_err());
    }

    #[test]
    fn oracle_on_analytic_windows() {
        let h = AutomatonBuilder::new("windows", &["x"])
            .mode("q", &["1"])
            .mode("a", &["0"])
            .mode("b", &["0"])
            .mode("c", &["0"])
            .transition("q", "x > 0.1 && x < 0.4", "a")
            .transition("q", "x > 0.5 && x < 0.6", "b")
            .transition("q", "x > 50", "c")
            .initial("q", &[(0.0, 0.0)])
            .build()
            .unwrap();
        let integ = Integrator::new(&h, IntegratorConfig::default()).unwrap();
        let d = exact_transition_probability(&integ, ModeId(0), &h.initial_box, 0).unwrap();
        assert!((d.transitions[0].1 - 0.75).abs() < 1e-9);
        assert!((d.transitions[1].1 - 0.25).abs() < 1e-9);
        assert_eq!(d.transitions[2].1, 0.0);
        assert_eq!(d.stay, 0.0);

        let always = AutomatonBuilder::new("always", &["x"])
            .mode("q", &["1"])
            .mode("p", &["0"])
            .transition("q", "x > -1", "p")
            .initial("q", &[(0.0, 1.0)])
            .build()
            .unwrap();
        let integ = Integrator::new(&always, IntegratorConfig::default()).unwrap();
        let d = exact_transition_probability(&integ, ModeId(0), &always.initial_box, 0).unwrap();
        assert!((d.transitions[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_averages_over_a_box() {
        // x' = 1 from x0 ∈ [0, 1]: guard x > 1.5 opens for t > 1.5 - x0,
        // which happens only when x0 > 0.5. With a single transition the
        // per-start probability is 1 there and 0 elsewhere.
        let h = AutomatonBuilder::new("box", &["x"])
            .mode("q", &["1"])
            .mode("p", &["0"])
            .transition("q", "x > 1.5", "p")
            .initial("q", &[(0.0, 1.0)])
            .build()
            .unwrap();
        let integ = Integrator::new(&h, IntegratorConfig::default()).unwrap();
        let d = exact_transition_probability(&integ, ModeId(0), &h.initial_box, 0).unwrap();
        assert!((d.transitions[0].1 - 0.5).abs() < 1e-4, "{d:?}");
        assert!((d.stay - 0.5).abs() < 1e-4);
    }

    #[test]
    fn oracle_scope() {
        let h = AutomatonBuilder::new("three", &["x", "y", "z"])
            .mode("q", &["0", "0", "0"])
            .initial("q", &[(0.0, 0.0); 3])
            .build()
            .unwrap();
        let integ = Integrator::new(&h, IntegratorConfig::default()).unwrap();
        assert!(matches!(
            exact_transition_probability(&integ, ModeId(0), &h.initial_box, 0),
            Err(InferenceError::Scope(3))
        ));
    }

    proptest! {
        #[test]
        fn closed_form_plain_method(n in 0u64..=20, d in 1usize..=19) {
            let delta = d as f64 * 0.05;
            let c = confidence(SampleTally::new(n, 0), delta, eff(1.0)).unwrap();
            let exact = 1.0 - (1.0 - delta).powi(n as i32 + 1);
            prop_assert!((c - exact).abs() <= 1e-9);
        }

        #[test]
        fn density_integrates_to_one(n in 0u64..40, m in 0u64..40, a in 0.1f64..=1.0) {
            let d = PosteriorDensity::new(SampleTally::new(n, m), eff(a));
            let mut breaks = vec![0.0];
            if d.mode() > 0.0 && d.mode() < 1.0 {
                breaks.push(d.mode());
            }
            breaks.push(1.0);
            let total = integrate(|t| d.pdf(t), &breaks, Tolerance { abs: 1e-300, rel: 1e-13, max_intervals: 4000 });
            prop_assert!((total.value[0] - 1.0).abs() <= 1e-9);
        }
    }
}
