//! Monte Carlo comparison of the IRLS and two-step ML estimators.
//!
//! Replication `i` draws from its own ChaCha stream keyed by `(seed, i)`, so a
//! report depends only on the configuration, never on the thread schedule.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian::inverse_cdf;
use crate::mle::{fit_two_step_polychoric, fit_two_step_polyserial};
use crate::polychoric::fit_polychoric;
use crate::polyserial::fit_polyserial;
use crate::tabulate::{crosstab, grouped_summary, ContingencyTable, Thresholds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Estimator {
    Irls,
    Ml,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Estimator::Irls => "irls",
            Estimator::Ml => "ml",
        })
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "irls" => Ok(Estimator::Irls),
            "ml" => Ok(Estimator::Ml),
            other => Err(Error::InvalidConfig(format!("unknown estimator `{other}`"))),
        }
    }
}

/// One simulation cell. `r = None` simulates the polyserial case, with the
/// second variable left continuous.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub rho: f64,
    pub n: usize,
    pub s: usize,
    pub r: Option<usize>,
    pub reps: usize,
    pub seed: u64,
    pub estimators: Vec<Estimator>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.rho.abs() <= 1.0) {
            return bad(format!("rho must lie in [-1, 1], got {}", self.rho));
        }
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if self.n < 4 {
            return bad(format!("N must be at least 4, got {}", self.n));
        }
        for (name, k) in [("s", Some(self.s)), ("r", self.r)] {
            if let Some(k) = k {
                if !(2..=9).contains(&k) {
                    return bad(format!("{name} must be between 2 and 9, got {k}"));
                }
            }
        }
        if self.estimators.is_empty() {
            return bad("no estimators requested".into());
        }
        Ok(())
    }

    pub fn is_polyserial(&self) -> bool {
        self.r.is_none()
    }
}

/// Summary statistics of one estimator over the successful replications.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub mean: Option<f64>,
    /// Mean bias `MEAN - ρ`.
    pub mb: Option<f64>,
    /// Mean relative bias `(MEAN - ρ)/ρ`; undefined at ρ = 0.
    pub mrb: Option<f64>,
    pub rmse: Option<f64>,
    /// Standard deviation of the estimates with denominator equal to the number of estimates.
    pub sd: Option<f64>,
    /// Mean of the reported standard errors.
    pub msd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorReport {
    pub estimator: Estimator,
    pub metrics: Metrics,
    pub successes: usize,
    /// Replications whose fit returned an error; excluded from the metrics.
    pub failures: usize,
    /// Successful fits that hit the iteration cap; included in the metrics.
    pub nonconverged: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub config: SimConfig,
    pub estimators: Vec<EstimatorReport>,
    /// Sum over replications of the time spent inside each estimator.
    pub timing: Vec<(Estimator, Duration)>,
}

impl SimReport {
    pub fn get(&self, e: Estimator) -> Option<&EstimatorReport> {
        self.estimators.iter().find(|r| r.estimator == e)
    }
}

/// Sequential wall-clock totals of each estimator over identical inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub reps: usize,
    pub irls: Duration,
    pub ml: Duration,
}

impl BenchmarkReport {
    /// How many times slower ML is than IRLS.
    pub fn ratio(&self) -> f64 {
        self.ml.as_secs_f64() / self.irls.as_secs_f64()
    }
}

/// Random stream of replication `index`.
pub fn replication_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    inverse_cdf(rng.sample::<f64, _>(Open01))
}

/// `N` draws of `(Z₁, ρZ₁ + √(1-ρ²)ε)`.
pub fn sample_bivariate<R: Rng>(rho: f64, n: usize, rng: &mut R) -> Result<Vec<(f64, f64)>> {
    if !(rho.abs() <= 1.0) {
        return Err(Error::CorrelationDomain(rho));
    }
    let sd = (1.0 - rho * rho).sqrt();
    Ok((0..n)
        .map(|_| {
            let z1 = standard_normal(rng);
            let e = standard_normal(rng);
            (z1, rho * z1 + sd * e)
        })
        .collect())
}

/// Equally spaced cuts `t_k = -3 + 6k/s` over `[-3, 3]`.
pub fn bollen_thresholds(s: usize) -> Result<Thresholds> {
    if !(2..=9).contains(&s) {
        return Err(Error::InvalidConfig(format!(
            "category count must be between 2 and 9, got {s}"
        )));
    }
    Thresholds::new((1..s).map(|k| -3.0 + 6.0 * k as f64 / s as f64).collect())
}

/// Category codes `1..=s`, right-closed: `a_{i-1} < z ≤ a_i` maps to `i`.
pub fn discretize(z: &[f64], th: &Thresholds) -> Vec<i64> {
    z.iter().map(|&v| th.classify(v) as i64 + 1).collect()
}

/// Data of one replication.
#[derive(Debug, Clone)]
pub enum Replicate {
    Table(ContingencyTable),
    Mixed {
        x: Vec<i64>,
        y: Vec<f64>,
    },
    /// Too few observed categories to estimate anything.
    Degenerate(Error),
}

pub fn generate(cfg: &SimConfig, index: u64) -> Result<Replicate> {
    let mut rng = replication_rng(cfg.seed, index);
    let pairs = sample_bivariate(cfg.rho, cfg.n, &mut rng)?;
    let (z1, z2): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let x = discretize(&z1, &bollen_thresholds(cfg.s)?);
    Ok(match cfg.r {
        Some(r) => match crosstab(&x, &discretize(&z2, &bollen_thresholds(r)?)) {
            Ok(t) => Replicate::Table(t),
            Err(e) => Replicate::Degenerate(e),
        },
        None => Replicate::Mixed { x, y: z2 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Estimate {
    rho: f64,
    se: Option<f64>,
    converged: bool,
}

fn estimate(e: Estimator, data: &Replicate) -> Result<Estimate> {
    match (e, data) {
        (_, Replicate::Degenerate(err)) => Err(err.clone()),
        (Estimator::Irls, Replicate::Table(t)) => {
            let fit = fit_polychoric(t)?;
            Ok(Estimate {
                rho: fit.rho,
                se: Some(fit.se),
                converged: fit.converged,
            })
        }
        (Estimator::Irls, Replicate::Mixed { x, y }) => {
            let fit = fit_polyserial(&grouped_summary(x, y)?)?;
            Ok(Estimate {
                rho: fit.rho,
                se: Some(fit.se),
                converged: fit.converged,
            })
        }
        (Estimator::Ml, Replicate::Table(t)) => {
            let fit = fit_two_step_polychoric(t)?;
            Ok(Estimate {
                rho: fit.rho,
                se: None,
                converged: fit.converged,
            })
        }
        (Estimator::Ml, Replicate::Mixed { x, y }) => {
            let fit = fit_two_step_polyserial(x, y)?;
            Ok(Estimate {
                rho: fit.rho,
                se: None,
                converged: fit.converged,
            })
        }
    }
}

/// Metrics of a set of estimates against the true `rho`.
pub fn summarize(estimates: &[f64], ses: &[f64], rho: f64) -> Metrics {
    let k = estimates.len();
    if k == 0 {
        return Metrics {
            mean: None,
            mb: None,
            mrb: None,
            rmse: None,
            sd: None,
            msd: None,
        };
    }
    let kf = k as f64;
    let mean = estimates.iter().sum::<f64>() / kf;
    let mse = estimates.iter().map(|e| (e - rho).powi(2)).sum::<f64>() / kf;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / kf;
    Metrics {
        mean: Some(mean),
        mb: Some(mean - rho),
        mrb: (rho != 0.0).then(|| (mean - rho) / rho),
        rmse: Some(mse.sqrt()),
        sd: (k >= 2).then(|| var.sqrt()),
        msd: (!ses.is_empty()).then(|| ses.iter().sum::<f64>() / ses.len() as f64),
    }
}

pub fn run_simulation(cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let outcomes: Vec<Vec<(Result<Estimate>, Duration)>> = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|i| {
            let data = generate(cfg, i)?;
            Ok(cfg
                .estimators
                .iter()
                .map(|&e| {
                    let start = Instant::now();
                    let out = estimate(e, &data);
                    (out, start.elapsed())
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut reports = Vec::with_capacity(cfg.estimators.len());
    let mut timing = Vec::with_capacity(cfg.estimators.len());
    for (k, &e) in cfg.estimators.iter().enumerate() {
        let (mut rhos, mut ses) = (Vec::new(), Vec::new());
        let (mut failures, mut nonconverged) = (0, 0);
        let mut total = Duration::ZERO;
        for rep in &outcomes {
            let (out, elapsed) = &rep[k];
            total += *elapsed;
            match out {
                Ok(est) => {
                    rhos.push(est.rho);
                    ses.extend(est.se);
                    nonconverged += usize::from(!est.converged);
                }
                Err(_) => failures += 1,
            }
        }
        reports.push(EstimatorReport {
            estimator: e,
            metrics: summarize(&rhos, &ses, cfg.rho),
            successes: rhos.len(),
            failures,
            nonconverged,
        });
        timing.push((e, total));
    }
    Ok(SimReport {
        config: cfg.clone(),
        estimators: reports,
        timing,
    })
}

/// Times both estimators sequentially on the same replications.
pub fn benchmark(cfg: &SimConfig) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let data: Vec<Replicate> = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|i| generate(cfg, i))
        .collect::<Result<_>>()?;
    let time = |e: Estimator| {
        let start = Instant::now();
        for d in &data {
            let _ = std::hint::black_box(estimate(e, d));
        }
        start.elapsed()
    };
    let irls = time(Estimator::Irls);
    let ml = time(Estimator::Ml);
    Ok(BenchmarkReport {
        reps: cfg.reps,
        irls,
        ml,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::cdf;
    use crate::tabulate::pearson;

    fn cfg(rho: f64, n: usize, s: usize, r: Option<usize>, reps: usize) -> SimConfig {
        SimConfig {
            rho,
            n,
            s,
            r,
            reps,
            seed: 7,
            estimators: vec![Estimator::Irls, Estimator::Ml],
        }
    }

    #[test]
    fn sample_bivariate_examples() {
        let mut rng = replication_rng(1, 0);
        let pairs = sample_bivariate(1.0, 100, &mut rng).unwrap();
        assert!(pairs.iter().all(|(a, b)| a == b));

        let pairs = sample_bivariate(0.0, 1_000_000, &mut replication_rng(2, 0)).unwrap();
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        assert!(pearson(&x, &y).unwrap().abs() < 0.005);

        let a = sample_bivariate(0.3, 50, &mut replication_rng(3, 9)).unwrap();
        let b = sample_bivariate(0.3, 50, &mut replication_rng(3, 9)).unwrap();
        assert_eq!(a, b);
        let c = sample_bivariate(0.3, 50, &mut replication_rng(3, 10)).unwrap();
        assert_ne!(a, c);
        assert!(sample_bivariate(1.5, 1, &mut rng).is_err());
    }

    #[test]
    fn bollen_threshold_examples() {
        assert_eq!(bollen_thresholds(2).unwrap().cuts(), &[0.0]);
        assert_eq!(bollen_thresholds(3).unwrap().cuts(), &[-1.0, 1.0]);
        let five = bollen_thresholds(5).unwrap();
        for (got, want) in five.cuts().iter().zip([-1.8, -0.6, 0.6, 1.8]) {
            assert!((got - want).abs() < 1e-15);
        }
        for s in 2..=9 {
            let c = bollen_thresholds(s).unwrap();
            for k in 0..c.cuts().len() {
                assert!((c.cuts()[k] + c.cuts()[c.cuts().len() - 1 - k]).abs() < 1e-15);
            }
        }
        assert!(bollen_thresholds(1).is_err() && bollen_thresholds(10).is_err());
    }

    #[test]
    fn discretize_examples() {
        let th = Thresholds::new(vec![0.0]).unwrap();
        assert_eq!(discretize(&[0.0, 0.0001, -3.0], &th), vec![1, 2, 1]);

        let th = bollen_thresholds(5).unwrap();
        let n = 1_000_000;
        let z: Vec<f64> = sample_bivariate(0.0, n, &mut replication_rng(5, 0))
            .unwrap()
            .into_iter()
            .map(|p| p.0)
            .collect();
        let codes = discretize(&z, &th);
        for i in 0..5 {
            let share = codes.iter().filter(|&&c| c == i as i64 + 1).count() as f64 / n as f64;
            let want = cdf(th.upper(i)) - cdf(th.lower(i));
            assert!((share - want).abs() < 0.003);
        }
    }

    #[test]
    fn config_validation() {
        assert!(cfg(0.4, 500, 2, Some(2), 0).validate().is_err());
        assert!(cfg(0.4, 3, 2, Some(2), 10).validate().is_err());
        assert!(cfg(0.4, 500, 10, Some(2), 10).validate().is_err());
        assert!(cfg(0.4, 500, 2, Some(1), 10).validate().is_err());
        assert!(cfg(1.2, 500, 2, Some(2), 10).validate().is_err());
        let mut c = cfg(0.4, 500, 2, None, 10);
        assert!(c.validate().is_ok());
        c.estimators.clear();
        assert!(c.validate().is_err());
        assert_eq!("ML".parse::<Estimator>().unwrap(), Estimator::Ml);
        assert!("bayes".parse::<Estimator>().is_err());
    }

    #[test]
    fn metrics_identities() {
        let est = [0.31, 0.45, 0.38, 0.52, 0.29, 0.41];
        let m = summarize(&est, &[0.05; 6], 0.4);
        let (rmse, sd, mb) = (m.rmse.unwrap(), m.sd.unwrap(), m.mb.unwrap());
        assert!((rmse * rmse - (sd * sd + mb * mb)).abs() < 1e-12);
        assert!((m.mrb.unwrap() - mb / 0.4).abs() < 1e-15);
        assert!((m.msd.unwrap() - 0.05).abs() < 1e-15);

        let zero = summarize(&est, &[], 0.0);
        assert_eq!(zero.mrb, None);
        assert_eq!(zero.mb, zero.mean);
        assert_eq!(zero.msd, None);

        let one = summarize(&[0.3], &[0.1], 0.4);
        assert_eq!(one.sd, None);
        assert!(one.rmse.is_some());
        assert_eq!(summarize(&[], &[], 0.4).mean, None);
    }

    #[test]
    fn simulation_is_deterministic_across_thread_counts() {
        let c = cfg(0.5, 120, 3, Some(4), 24);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_simulation(&c).unwrap())
        };
        let (a, b) = (run(1), run(4));
        assert_eq!(a.estimators, b.estimators);
        assert_eq!(a.config, b.config);
    }

    #[test]
    fn zero_rho_is_unbiased() {
        for r in [Some(2), Some(4), None] {
            let report = run_simulation(&cfg(0.0, 200, 3, r, 200)).unwrap();
            for e in &report.estimators {
                let m = &e.metrics;
                assert!(m.mrb.is_none());
                assert!(
                    m.mb.unwrap().abs() <= 3.0 * m.sd.unwrap() / (e.successes as f64).sqrt(),
                    "{r:?} {e:?}"
                );
            }
        }
    }

    #[test]
    fn failures_are_counted() {
        // N = 4 with s = 9 leaves most replications with a single observed category on some axis
        let c = SimConfig {
            estimators: vec![Estimator::Irls],
            ..cfg(0.3, 4, 9, Some(9), 50)
        };
        let report = run_simulation(&c).unwrap();
        let irls = report.get(Estimator::Irls).unwrap();
        assert_eq!(irls.successes + irls.failures, 50);
        assert!(irls.failures > 0);
    }

    #[test]
    fn single_replication_has_no_sd() {
        let report = run_simulation(&SimConfig {
            reps: 1,
            ..cfg(0.4, 100, 2, Some(2), 1)
        })
        .unwrap();
        assert!(report
            .estimators
            .iter()
            .all(|e| e.metrics.sd.is_none() && e.metrics.mean.is_some()));
    }

    #[test]
    fn benchmark_uses_identical_inputs() {
        let report = benchmark(&cfg(0.4, 200, 3, Some(3), 10)).unwrap();
        assert_eq!(report.reps, 10);
        assert!(report.irls > Duration::ZERO && report.ml > Duration::ZERO);
        let a = generate(&cfg(0.4, 200, 3, Some(3), 10), 3).unwrap();
        let b = generate(&cfg(0.4, 200, 3, Some(3), 10), 3).unwrap();
        match (a, b) {
            (Replicate::Table(x), Replicate::Table(y)) => assert_eq!(x, y),
            _ => panic!("expected tables"),
        }
    }
}
