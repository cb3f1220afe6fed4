//! Oracle suites: closed forms against quadrature and finite differences,
//! and Monte Carlo checks of the estimator identities.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::distributions::{
    AngularGaussian, ClipInterval, ClippedGaussian, DiagGaussian, UnitVector, WrappedAngle,
};
use crate::envs::{Platform2D, ToyParamEnv};
use crate::error::{invalid, Result};
use crate::estimators::{
    compare_estimator_means, finite_diff_check, measure_variance, CoupledPolicy, VarianceOptions,
    VarianceReport,
};
use crate::nn::{Activation, Mlp, MlpSpec};
use crate::policy::{
    ClippedPolicy, DirectionalPolicy, FixedMean, GaussianHead, ParamAction, ParamFamily, ParamValue,
    ParametrizedPolicy,
};
use crate::quadrature::integrate_adaptive;
use crate::scalar::Real;
use crate::special::{m_function, m_function_quadrature};
use crate::EstimatorKind;

/// Which side of the threshold passes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::AtMost(v) => write!(f, "<= {v:e}"),
            Bound::AtLeast(v) => write!(f, ">= {v:e}"),
        }
    }
}

/// One row of a suite's pass/fail table.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub value: f64,
    pub bound: Bound,
}

impl Check {
    fn at_most(suite: &'static str, name: impl Into<String>, value: f64, tol: f64) -> Self {
        Self {
            suite,
            name: name.into(),
            value,
            bound: Bound::AtMost(tol),
        }
    }

    fn at_least(suite: &'static str, name: impl Into<String>, value: f64, tol: f64) -> Self {
        Self {
            suite,
            name: name.into(),
            value,
            bound: Bound::AtLeast(tol),
        }
    }

    pub fn passed(&self) -> bool {
        match self.bound {
            Bound::AtMost(t) => self.value <= t,
            Bound::AtLeast(t) => self.value >= t,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<6} {:<13} {:<44} {:>12.4e} {:<10}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.value,
            self.bound.to_string()
        )
    }
}

pub const ORACLE_SUITES: [&str; 5] = ["mfun", "grads", "normalization", "polar", "capg"];
pub const MONTE_CARLO_SUITES: [&str; 2] = ["unbiased", "variance"];

/// Runs a suite by name.
pub fn run_suite(name: &str, seed: u64) -> Result<Vec<Check>> {
    match name {
        "mfun" => mfun(),
        "grads" => grads(seed),
        "normalization" => normalization(seed),
        "polar" => polar(seed),
        "capg" => capg(seed),
        "unbiased" => unbiasedness(1_000_000, seed),
        "variance" => variance(seed),
        other => Err(invalid("suite", format!("unknown `{other}`"))),
    }
}

fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn uniform_vec<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| uniform(rng, lo, hi)).collect()
}

fn random_unit<R: Rng>(rng: &mut R, d: usize) -> UnitVector<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| f64::sample_standard_normal(rng)).collect();
        if let Some(u) = UnitVector::normalize(&v) {
            return u;
        }
    }
}

/// Integral over `[a, b]` as a sum of `pieces` adaptive integrals, so narrow
/// peaks are not missed by the first rule.
fn integrate_pieces<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, pieces: usize, tol: f64) -> Result<f64> {
    let w = (b - a) / pieces as f64;
    let mut total = 0.0;
    for i in 0..pieces {
        let lo = a + w * i as f64;
        let hi = if i + 1 == pieces { b } else { lo + w };
        total += integrate_adaptive(&f, lo, hi, tol, 2000)?;
    }
    Ok(total)
}

/// One grid point of the M-function comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfunRow {
    pub d: usize,
    pub alpha: f64,
    pub recursion: f64,
    pub quadrature: f64,
    pub rel_err: f64,
}

/// Tolerance on the recurrence against quadrature.
pub const MFUN_TOLERANCE: f64 = 1e-8;

/// Recurrence and quadrature on `d = 0..=10`, `alpha = -5..=5` step 0.5.
pub fn mfun_table() -> Result<Vec<MfunRow>> {
    let mut rows = Vec::with_capacity(11 * 21);
    for d in 0..=10 {
        for i in 0..=20 {
            let alpha = -5.0 + 0.5 * i as f64;
            let recursion = m_function(d, alpha)?;
            let quadrature = m_function_quadrature(d, alpha, 1e-13)?;
            rows.push(MfunRow {
                d,
                alpha,
                recursion,
                quadrature,
                rel_err: ((recursion - quadrature) / quadrature).abs(),
            });
        }
    }
    Ok(rows)
}

/// Worst relative error of [`mfun_table`] per order `d`.
pub fn mfun() -> Result<Vec<Check>> {
    let rows = mfun_table()?;
    Ok((0..=10)
        .map(|d| {
            let worst = rows.iter().filter(|r| r.d == d).map(|r| r.rel_err).fold(0.0, f64::max);
            Check::at_most("mfun", format!("M_{d} rel err vs quadrature"), worst, MFUN_TOLERANCE)
        })
        .collect())
}

/// Total mass of the angular (circle), clipped and Gaussian laws.
pub fn normalization(seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = std::f64::consts::TAU;

    let mut worst = 0.0f64;
    for _ in 0..50 {
        let ag = AngularGaussian::new(DiagGaussian::new(uniform_vec(&mut rng, 2, -2.0, 2.0), uniform(&mut rng, 0.1, 2.0))?)?;
        let mass = integrate_pieces(
            |t| ag.log_density(&UnitVector::from_angle(t)).map(f64::exp).unwrap_or(f64::NAN),
            0.0,
            tau,
            64,
            1e-12,
        )?;
        worst = worst.max((mass - 1.0).abs());
    }
    let mut out = vec![Check::at_most("normalization", "angular Gaussian on S^1, 50 configs", worst, 1e-6)];

    let mut worst = 0.0f64;
    for _ in 0..50 {
        let m = uniform(&mut rng, -3.0, 3.0);
        let s = uniform(&mut rng, 0.05, 3.0);
        let lo = uniform(&mut rng, -2.0, 1.0);
        let hi = lo + uniform(&mut rng, 0.1, 3.0);
        let cg = ClippedGaussian::new(DiagGaussian::new(vec![m], s)?, ClipInterval::new(lo, hi)?)?;
        let interior = integrate_pieces(
            |b| if b <= lo || b >= hi { 0.0 } else { cg.log_density(b).map(f64::exp).unwrap_or(f64::NAN) },
            lo,
            hi,
            64,
            1e-13,
        )?;
        let mass = cg.log_density(lo)?.exp() + interior + cg.log_density(hi)?.exp();
        worst = worst.max((mass - 1.0).abs());
    }
    out.push(Check::at_most("normalization", "clipped Gaussian mass, 50 configs", worst, 1e-10));

    let mut worst = 0.0f64;
    for _ in 0..50 {
        let m = uniform(&mut rng, -3.0, 3.0);
        let s = uniform(&mut rng, 0.05, 3.0);
        let g = DiagGaussian::new(vec![m], s)?;
        let n = 20_000;
        let (a, b) = (m - 12.0 * s, m + 12.0 * s);
        let h = (b - a) / n as f64;
        let mut mass = 0.0;
        for i in 0..=n {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            mass += w * g.log_density(&[a + h * i as f64])?.exp();
        }
        worst = worst.max((mass * h - 1.0).abs());
    }
    out.push(Check::at_most("normalization", "Gaussian d=1 grid, 50 configs", worst, 1e-6));
    Ok(out)
}

const FD_STEP: f64 = 1e-5;

/// Analytic scores against central differences of the log-density.
pub fn grads(seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let mut worst = 0.0f64;
    for _ in 0..100 {
        let d = rng.random_range(1..=4);
        let g = DiagGaussian::new(uniform_vec(&mut rng, d, -2.0, 2.0), uniform(&mut rng, 0.2, 2.0))?;
        let a = g.sample(&mut rng);
        let score = g.score(&a)?.to_flat();
        let f = |th: &[f64]| DiagGaussian::from_flat(th).and_then(|g| g.log_density(&a)).unwrap_or(f64::NAN);
        worst = worst.max(finite_diff_check(f, &score, &g.to_flat(), FD_STEP)?);
    }
    out.push(Check::at_most("grads", "Gaussian score, 100 configs", worst, 1e-5));

    let mut worst = 0.0f64;
    for i in 0..100 {
        let d = 2 + i % 3;
        // every tenth config sits at alpha = 0
        let (g, x) = if i % 10 == 0 {
            let m = uniform_vec(&mut rng, d, -1.0, 1.0);
            let mut x = vec![0.0; d];
            x[0] = -m[1];
            x[1] = m[0];
            let x = UnitVector::normalize(&x).unwrap_or_else(|| random_unit(&mut rng, d));
            (DiagGaussian::new(m, uniform(&mut rng, 0.2, 2.0))?, x)
        } else {
            let g = DiagGaussian::new(uniform_vec(&mut rng, d, -2.0, 2.0), uniform(&mut rng, 0.2, 2.0))?;
            (g, random_unit(&mut rng, d))
        };
        let ag = AngularGaussian::new(g.clone())?;
        let score = ag.score(&x)?.to_flat();
        let f = |th: &[f64]| {
            DiagGaussian::from_flat(th)
                .and_then(AngularGaussian::new)
                .and_then(|a| a.log_density(&x))
                .unwrap_or(f64::NAN)
        };
        worst = worst.max(finite_diff_check(f, &score, &g.to_flat(), FD_STEP)?);
    }
    out.push(Check::at_most("grads", "angular score, 100 configs", worst, 1e-5));

    let mut boundary = 0.0f64;
    let mut interior = 0.0f64;
    for i in 0..100 {
        let (m, s, lo, hi) = if i == 0 {
            // lower edge at z = -3
            (0.0, 1.0, -3.0, 1.0)
        } else {
            let lo = uniform(&mut rng, -2.0, 0.0);
            (uniform(&mut rng, -2.0, 2.0), uniform(&mut rng, 0.2, 2.0), lo, lo + uniform(&mut rng, 0.5, 3.0))
        };
        let iv = ClipInterval::new(lo, hi)?;
        let cg = ClippedGaussian::new(DiagGaussian::new(vec![m], s)?, iv)?;
        let theta = [m, s];
        let check_at = |b: f64| -> Result<f64> {
            let score = cg.score(b)?.to_flat();
            let f = |th: &[f64]| {
                DiagGaussian::from_flat(th)
                    .and_then(|g| ClippedGaussian::new(g, iv))
                    .and_then(|c| c.log_density(b))
                    .unwrap_or(f64::NAN)
            };
            finite_diff_check(f, &score, &theta, FD_STEP)
        };
        let edge = if i == 0 || rng.random::<bool>() { lo } else { hi };
        boundary = boundary.max(check_at(edge)?);
        interior = interior.max(check_at(uniform(&mut rng, lo, hi).clamp(lo + 1e-9, hi - 1e-9))?);
    }
    out.push(Check::at_most("grads", "clipped boundary score, 100 configs", boundary, 1e-5));
    out.push(Check::at_most("grads", "clipped interior score, 100 configs", interior, 1e-5));

    let mut worst = 0.0f64;
    for _ in 0..100 {
        let w = WrappedAngle::new(uniform(&mut rng, -4.0, 4.0), uniform(&mut rng, 0.1, 2.0))?;
        let (angle, _) = w.sample(&mut rng);
        let score = w.score(angle)?.to_flat();
        let f = |th: &[f64]| WrappedAngle::new(th[0], th[1]).and_then(|w| w.log_density(angle)).unwrap_or(f64::NAN);
        worst = worst.max(finite_diff_check(f, &score, &w.base().to_flat(), FD_STEP)?);
    }
    out.push(Check::at_most("grads", "wrapped-angle score, 100 configs", worst, 1e-5));

    let mut worst = 0.0f64;
    for i in 0..50u64 {
        let act = [Activation::Tanh, Activation::Selu, Activation::Identity][(i % 3) as usize];
        let mut widths = vec![rng.random_range(1..=4)];
        for _ in 0..rng.random_range(1..=2) {
            widths.push(rng.random_range(1..=6));
        }
        widths.push(rng.random_range(1..=3));
        let net = Mlp::<f64>::new(MlpSpec::new(widths.clone(), act, seed.wrapping_add(i))?);
        let x = uniform_vec(&mut rng, widths[0], -1.5, 1.5);
        let up = uniform_vec(&mut rng, *widths.last().unwrap_or(&1), -1.0, 1.0);
        let grad = net.backward(&x, &up)?;
        let spec = net.spec().clone();
        let f = |th: &[f64]| {
            Mlp::from_params(spec.clone(), th.to_vec())
                .and_then(|n| n.forward(&x))
                .map(|y| y.iter().zip(&up).map(|(a, b)| a * b).sum())
                .unwrap_or(f64::NAN)
        };
        worst = worst.max(finite_diff_check(f, &grad, net.params(), FD_STEP)?);
    }
    out.push(Check::at_most("grads", "MLP backward, 50 configs", worst, 1e-5));
    Ok(out)
}

/// Radial-conditional score against finite differences of
/// `log f(r b) + (d-1) log r - log int rho^{d-1} f(rho b) drho`, with the
/// normalizer by quadrature.
pub fn polar(seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let d = 2 + i % 2;
        let g = DiagGaussian::new(uniform_vec(&mut rng, d, -2.0, 2.0), uniform(&mut rng, 0.2, 1.5))?;
        let ag = AngularGaussian::new(g.clone())?;
        let (a, b) = ag.sample_with_raw(&mut rng);
        let r = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let analytic = ag.radial_score(&a)?.to_flat();
        let bs = b.as_slice().to_vec();
        let log_cond = |th: &[f64]| -> f64 {
            let inner = || -> Result<f64> {
                let g = DiagGaussian::from_flat(th)?;
                let at = |rho: f64| -> Result<f64> {
                    let x: Vec<f64> = bs.iter().map(|v| v * rho).collect();
                    g.log_density(&x)
                };
                let centre = bs.iter().zip(g.mean()).map(|(x, m)| x * m).sum::<f64>();
                let s = g.sigma();
                let lo = (centre - 15.0 * s).max(0.0);
                let hi = centre.max(0.0) + 15.0 * s;
                let z = integrate_pieces(
                    |rho| if rho <= 0.0 { 0.0 } else { rho.powi(d as i32 - 1) * at(rho).map(f64::exp).unwrap_or(f64::NAN) },
                    lo,
                    hi,
                    8,
                    1e-13,
                )?;
                Ok(at(r)? + (d as f64 - 1.0) * r.ln() - z.ln())
            };
            inner().unwrap_or(f64::NAN)
        };
        worst = worst.max(finite_diff_check(log_cond, &analytic, &g.to_flat(), 1e-4)?);
    }
    Ok(vec![Check::at_most("polar", "radial score vs FD of conditional, 100 configs", worst, 1e-5)])
}

/// Gap sign (`gap / stderr >= min_z`) and the conditional-Fisher identity.
fn gap_checks(suite: &'static str, label: &str, rep: &VarianceReport, min_z: f64, out: &mut Vec<Check>) {
    let se = rep.mc_stderr_gap;
    out.push(Check::at_least(suite, format!("{label}: gap / stderr"), rep.gap / se, min_z));
    out.push(Check::at_most(
        suite,
        format!("{label}: |gap - E[q^2 |psi - psi~|^2]| / stderr"),
        (rep.gap - rep.conditional_fisher).abs() / se,
        4.0,
    ));
}

/// Clipped-reward bandit: variance gap of the unclipped versus clipped
/// score, and its agreement with the conditional Fisher term.
pub fn capg(seed: u64) -> Result<Vec<Check>> {
    let iv = ClipInterval::new(-1.0, 1.0)?;
    let q = |_: &[f64], b: &f64| -> Result<f64> { Ok(1.0 - (b - 0.3) * (b - 0.3)) };
    let mut out = Vec::new();
    for (i, &(m, s)) in [(0.0, 1.0), (0.8, 0.5), (1.2, 0.3), (-0.5, 2.0)].iter().enumerate() {
        let policy = ClippedPolicy::new(GaussianHead::new(FixedMean(vec![m]), s, true)?, iv)?;
        let rep = measure_variance(
            &policy,
            &[vec![]],
            q,
            VarianceOptions {
                n_per_state: 20_000,
                bootstrap_resamples: 1000,
                seed: seed.wrapping_add(i as u64),
            },
        )?;
        gap_checks("capg", &format!("m={m} sigma={s}"), &rep, -3.0, &mut out);
    }
    Ok(out)
}

/// Shaped advantage of moving from the platform start along `b`.
pub fn start_advantage(b: &[f64]) -> f64 {
    let s = Platform2D::<f64>::START;
    let next = [s[0] + 0.1 * b[0], s[1] + 0.1 * b[1]];
    Platform2D::<f64>::potential(&s) - Platform2D::<f64>::potential(&next) - 0.05
}

fn toy_policy() -> Result<ParametrizedPolicy<f64>> {
    ParametrizedPolicy::new(
        vec![0.3, -0.2],
        vec![
            ParamFamily::Direction(DiagGaussian::new(vec![0.6, 0.2], 0.4)?),
            ParamFamily::Clipped(ClippedGaussian::new(DiagGaussian::new(vec![0.7], 0.6)?, ClipInterval::new(-1.0, 1.0)?)?),
        ],
    )
}

fn toy_q(s: &[f64], a: &ParamAction<f64>) -> Result<f64> {
    let env = ToyParamEnv::<f64>::new();
    let r = env.transition(s, a, 0)?;
    Ok(10.0 * r.reward + if matches!(a.omega, ParamValue::Scalar(_)) { 0.5 } else { 0.0 })
}

/// Mean agreement of standard and marginal estimators at fixed parameters.
pub fn unbiasedness(n: usize, seed: u64) -> Result<Vec<Check>> {
    let suite = "unbiased";
    let mut out = Vec::new();
    let z = |c: crate::estimators::MeanComparison| c.max_z_pooled;

    let net = Mlp::new(MlpSpec::tanh(2, 8, 1, 2, seed)?);
    let ang2 = DirectionalPolicy::new(GaussianHead::new(net, 0.3, true)?, EstimatorKind::Angular)?;
    let states = vec![vec![-1.0, -1.0]];
    let q2 = |_: &[f64], b: &UnitVector<f64>| Ok(start_advantage(b.as_slice()));
    out.push(Check::at_most(
        suite,
        "angular d=2 (network mean), max |z|",
        z(compare_estimator_means(&ang2, &states, q2, n, seed)?),
        4.0,
    ));

    let ang3 = DirectionalPolicy::new(
        GaussianHead::new(FixedMean(vec![0.5, -0.3, 0.2]), 0.4, true)?,
        EstimatorKind::Angular,
    )?;
    let q3 = |_: &[f64], b: &UnitVector<f64>| {
        let x = b.as_slice();
        Ok((x[0] - 0.5 * x[2]).exp())
    };
    out.push(Check::at_most(
        suite,
        "angular d=3, max |z|",
        z(compare_estimator_means(&ang3, &[vec![]], q3, n, seed.wrapping_add(1))?),
        4.0,
    ));

    let clipped = ClippedPolicy::new(GaussianHead::new(FixedMean(vec![0.6]), 0.8, true)?, ClipInterval::new(-1.0, 1.0)?)?;
    let qc = |_: &[f64], b: &f64| Ok(1.0 - (b - 0.3) * (b - 0.3));
    out.push(Check::at_most(
        suite,
        "clipped d=1, max |z|",
        z(compare_estimator_means(&clipped, &[vec![]], qc, n, seed.wrapping_add(2))?),
        4.0,
    ));

    let toy = toy_policy()?;
    let start = ToyParamEnv::<f64>::START.to_vec();
    out.push(Check::at_most(
        suite,
        "parametrized toy, max |z|",
        z(compare_estimator_means(&toy, &[start], toy_q, n, seed.wrapping_add(3))?),
        4.0,
    ));
    Ok(out)
}

fn report<P: CoupledPolicy<f64>, Q: Fn(&[f64], &P::Action) -> Result<f64>>(
    policy: &P,
    states: &[Vec<f64>],
    q: Q,
    n: usize,
    seed: u64,
) -> Result<VarianceReport> {
    measure_variance(
        policy,
        states,
        q,
        VarianceOptions {
            n_per_state: n,
            bootstrap_resamples: 1000,
            seed,
        },
    )
}

/// Variance ordering and the gap identity on angular and parametrized
/// policies.
pub fn variance(seed: u64) -> Result<Vec<Check>> {
    let suite = "variance";
    let mut out = Vec::new();
    let dir = |m: Vec<f64>, s: f64| -> Result<DirectionalPolicy<f64, FixedMean<f64>>> {
        DirectionalPolicy::new(GaussianHead::new(FixedMean(m), s, true)?, EstimatorKind::Angular)
    };
    let shaped = |_: &[f64], b: &UnitVector<f64>| Ok(start_advantage(b.as_slice()));
    let one = |_: &[f64], _: &UnitVector<f64>| Ok(1.0);

    let key = report(&dir(vec![1.0, 0.0], 0.1)?, &[vec![]], shaped, 20_000, seed)?;
    gap_checks(suite, "d=2 m=(1,0) sigma=0.1 shaped q", &key, 3.0, &mut out);

    let configs: [(Vec<f64>, f64, bool); 4] = [
        (vec![1.0, 0.0], 0.1, false),
        (vec![0.3, 0.2], 0.5, true),
        (vec![0.5, -0.2, 0.1], 0.3, true),
        (vec![0.0, 0.0, 0.0, 0.1], 1.0, false),
    ];
    for (i, (m, s, use_shaped)) in configs.into_iter().enumerate() {
        let label = format!("d={} m={m:?} sigma={s} q={}", m.len(), if use_shaped { "x" } else { "1" });
        let policy = dir(m, s)?;
        let rep = if use_shaped {
            let w = |_: &[f64], b: &UnitVector<f64>| Ok((1.5 * b.as_slice()[0] - b.as_slice()[1]).exp());
            report(&policy, &[vec![]], w, 10_000, seed.wrapping_add(1 + i as u64))?
        } else {
            report(&policy, &[vec![]], one, 10_000, seed.wrapping_add(1 + i as u64))?
        };
        gap_checks(suite, &label, &rep, -3.0, &mut out);
    }

    let net = Mlp::new(MlpSpec::tanh(2, 16, 2, 2, seed)?);
    let policy = DirectionalPolicy::new(GaussianHead::new(net, 0.1, false)?, EstimatorKind::Angular)?;
    let states: Vec<Vec<f64>> = (0..8).map(|i| vec![-1.0 + 0.2 * i as f64, -1.0 + 0.1 * i as f64]).collect();
    let rep = report(&policy, &states, shaped, 1000, seed.wrapping_add(10))?;
    gap_checks(suite, "network mean, 8 states", &rep, -3.0, &mut out);

    let toy = toy_policy()?;
    let rep = report(&toy, &[ToyParamEnv::<f64>::START.to_vec()], toy_q, 20_000, seed.wrapping_add(11))?;
    gap_checks(suite, "parametrized toy", &rep, -3.0, &mut out);
    Ok(out)
}
