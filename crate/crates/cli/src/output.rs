//! Text, JSON and CSV rendering of command results.
//!
//! Tables round to a fixed number of decimals; JSON and CSV print every
//! float at full round-trip precision.

use std::fmt::Write as _;

use clap::ValueEnum;
use polyirls_core::{BenchmarkReport, EstimatorReport, PolychoricFit, SimReport};
use serde::Serialize;
use serde_json::{json, Value};

use crate::fit::FitSummary;
use crate::matrix::MatrixResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Table,
    Json,
    Csv,
}

const NA: &str = "NA";

fn fixed(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| NA.to_owned(), |x| format!("{x:.decimals$}"))
}

fn full(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("values serialize");
    s.push('\n');
    s
}

fn to_csv(header: &[String], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("write to memory");
    for row in rows {
        w.write_record(row).expect("write to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 input")
}

fn owned(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| (*s).to_owned()).collect()
}

pub fn render_fit(fit: &FitSummary, format: Format) -> String {
    match format {
        Format::Json => to_json(fit),
        Format::Csv => to_csv(
            &owned(&["method", "rho", "se", "iterations", "converged", "n"]),
            &[vec![
                fit.method.to_string(),
                fit.rho.to_string(),
                fit.se.to_string(),
                fit.iterations.to_string(),
                fit.converged.to_string(),
                fit.n.to_string(),
            ]],
        ),
        Format::Table => {
            let mut s = String::new();
            writeln!(s, "method      {}", fit.method).unwrap();
            writeln!(s, "rho         {:.6}", fit.rho).unwrap();
            writeln!(s, "se          {:.6}", fit.se).unwrap();
            writeln!(s, "iterations  {}", fit.iterations).unwrap();
            writeln!(s, "converged   {}", fit.converged).unwrap();
            writeln!(s, "n           {}", fit.n).unwrap();
            s
        }
    }
}

/// One row per iteration: the predictor means used in the regression, the
/// response means, and the resulting estimate.
pub fn render_trace(fit: &PolychoricFit, format: Format) -> String {
    let s = fit.trace.first().map_or(0, |t| t.e_x.len());
    let mut header = owned(&["iteration", "rho"]);
    header.extend((1..=s).map(|i| format!("e_x{i}")));
    header.extend((1..=s).map(|i| format!("e_y{i}")));
    match format {
        Format::Json => {
            let rows: Vec<Value> = fit
                .trace
                .iter()
                .map(|t| json!({ "iteration": t.iteration, "rho": t.rho, "e_x": t.e_x, "e_y": t.e_y }))
                .collect();
            to_json(&json!({
                "rho": fit.rho,
                "se": fit.se,
                "iterations": fit.iterations,
                "converged": fit.converged,
                "initial_rho": fit.initial_rho,
                "trace": rows,
            }))
        }
        Format::Csv => {
            let rows: Vec<Vec<String>> = fit
                .trace
                .iter()
                .map(|t| {
                    let mut row = vec![t.iteration.to_string(), t.rho.to_string()];
                    row.extend(t.e_x.iter().chain(&t.e_y).map(f64::to_string));
                    row
                })
                .collect();
            to_csv(&header, &rows)
        }
        Format::Table => {
            let mut out = String::new();
            for h in &header {
                write!(out, "{h:>12}").unwrap();
            }
            out.push('\n');
            for t in &fit.trace {
                write!(out, "{:>12}{:>12.8}", t.iteration, t.rho).unwrap();
                for v in t.e_x.iter().chain(&t.e_y) {
                    write!(out, "{v:>12.6}").unwrap();
                }
                out.push('\n');
            }
            writeln!(out, "converged {} after {} iterations", fit.converged, fit.iterations).unwrap();
            out
        }
    }
}

pub fn render_matrix(m: &MatrixResult, format: Format, timing: bool) -> String {
    let p = m.dim();
    match format {
        Format::Json => {
            let method: Vec<Vec<Option<String>>> = (0..p)
                .map(|i| (0..p).map(|j| m.fit(i, j).map(|f| f.method.to_string())).collect())
                .collect();
            let converged: Vec<Vec<Option<bool>>> = (0..p)
                .map(|i| (0..p).map(|j| m.fit(i, j).map(|f| f.converged)).collect())
                .collect();
            let absent: Vec<Value> = m
                .absent
                .iter()
                .map(|a| json!({ "row": m.names[a.row], "col": m.names[a.col], "reason": a.reason }))
                .collect();
            let mut doc = json!({
                "variables": m.names,
                "estimate": m.estimates(),
                "se": m.standard_errors(),
                "method": method,
                "converged": converged,
                "n": m.counts,
                "absent": absent,
            });
            if timing {
                let t: Vec<Value> = m
                    .pairs
                    .iter()
                    .zip(&m.timings)
                    .map(|(((i, j), _), d)| json!({ "row": m.names[*i], "col": m.names[*j], "seconds": d.as_secs_f64() }))
                    .collect();
                doc["timings"] = Value::Array(t);
            }
            to_json(&doc)
        }
        Format::Csv => {
            let mut header = owned(&[
                "row",
                "col",
                "method",
                "rho",
                "se",
                "n",
                "iterations",
                "converged",
                "reason",
            ]);
            if timing {
                header.push("seconds".into());
            }
            let rows: Vec<Vec<String>> = m
                .pairs
                .iter()
                .zip(&m.timings)
                .map(|(((i, j), fit), d)| {
                    let reason = m
                        .absent
                        .iter()
                        .find(|a| (a.row, a.col) == (*i, *j))
                        .map_or("", |a| a.reason.as_str());
                    let mut row = vec![m.names[*i].clone(), m.names[*j].clone()];
                    match fit {
                        Some(f) => row.extend([
                            f.method.to_string(),
                            f.rho.to_string(),
                            f.se.to_string(),
                            f.n.to_string(),
                            f.iterations.to_string(),
                            f.converged.to_string(),
                            String::new(),
                        ]),
                        None => {
                            row.extend(std::iter::repeat_n(String::new(), 3));
                            row.push(m.counts[*i][*j].to_string());
                            row.extend([String::new(), String::new(), reason.to_owned()]);
                        }
                    }
                    if timing {
                        row.push(d.as_secs_f64().to_string());
                    }
                    row
                })
                .collect();
            to_csv(&header, &rows)
        }
        Format::Table => {
            let width = m.names.iter().map(String::len).max().unwrap_or(0).max(8) + 2;
            let mut out = String::new();
            let grid = |out: &mut String, title: &str, g: &[Vec<Option<f64>>]| {
                writeln!(out, "{title}").unwrap();
                write!(out, "{:width$}", "").unwrap();
                for n in &m.names {
                    write!(out, "{n:>width$}").unwrap();
                }
                out.push('\n');
                for (name, row) in m.names.iter().zip(g) {
                    write!(out, "{name:<width$}").unwrap();
                    for v in row {
                        write!(out, "{:>width$}", fixed(*v, 4)).unwrap();
                    }
                    out.push('\n');
                }
            };
            grid(&mut out, "estimates", &m.estimates());
            out.push('\n');
            grid(&mut out, "standard errors", &m.standard_errors());
            out.push('\n');
            writeln!(out, "pairs").unwrap();
            for (((i, j), fit), d) in m.pairs.iter().zip(&m.timings) {
                write!(out, "  {} ~ {}: n={}", m.names[*i], m.names[*j], m.counts[*i][*j]).unwrap();
                match fit {
                    Some(f) => {
                        write!(out, " {} iterations={}", f.method, f.iterations).unwrap();
                        if !f.converged {
                            write!(out, " not converged").unwrap();
                        }
                    }
                    None => write!(out, " absent").unwrap(),
                }
                if timing {
                    write!(out, " {:.6}s", d.as_secs_f64()).unwrap();
                }
                out.push('\n');
            }
            if !m.absent.is_empty() {
                writeln!(out, "\nabsent").unwrap();
                for a in &m.absent {
                    writeln!(out, "  {} ~ {}: {}", m.names[a.row], m.names[a.col], a.reason).unwrap();
                }
            }
            out
        }
    }
}

const METRIC_NAMES: [&str; 6] = ["mean", "mb", "mrb", "rmse", "sd", "msd"];

fn metric_values(r: &EstimatorReport) -> [Option<f64>; 6] {
    let m = &r.metrics;
    [m.mean, m.mb, m.mrb, m.rmse, m.sd, m.msd]
}

/// Simulation report. Timing is wall-clock and only printed when asked for,
/// so the default output is reproducible byte for byte.
pub fn render_simulation(report: &SimReport, format: Format, timing: bool) -> String {
    let c = &report.config;
    let seconds = |r: &EstimatorReport| {
        report
            .timing
            .iter()
            .find(|(e, _)| *e == r.estimator)
            .map(|(_, d)| d.as_secs_f64())
    };
    match format {
        Format::Json => {
            let estimators: Vec<Value> = report
                .estimators
                .iter()
                .map(|r| {
                    let mut v = json!({ "estimator": r.estimator.to_string() });
                    for (name, x) in METRIC_NAMES.iter().zip(metric_values(r)) {
                        v[*name] = json!(x);
                    }
                    v["successes"] = json!(r.successes);
                    v["failures"] = json!(r.failures);
                    v["nonconverged"] = json!(r.nonconverged);
                    if timing {
                        v["seconds"] = json!(seconds(r));
                    }
                    v
                })
                .collect();
            to_json(&json!({
                "config": {
                    "rho": c.rho,
                    "n": c.n,
                    "s": c.s,
                    "r": c.r,
                    "reps": c.reps,
                    "seed": c.seed,
                    "estimators": c.estimators.iter().map(ToString::to_string).collect::<Vec<_>>(),
                },
                "estimators": estimators,
            }))
        }
        Format::Csv => {
            let mut header = owned(&["estimator", "rho", "n", "s", "r", "reps", "seed"]);
            header.extend(METRIC_NAMES.iter().map(|s| (*s).to_owned()));
            header.extend(owned(&["successes", "failures", "nonconverged"]));
            if timing {
                header.push("seconds".into());
            }
            let rows: Vec<Vec<String>> = report
                .estimators
                .iter()
                .map(|r| {
                    let mut row = vec![
                        r.estimator.to_string(),
                        c.rho.to_string(),
                        c.n.to_string(),
                        c.s.to_string(),
                        c.r.map_or_else(String::new, |r| r.to_string()),
                        c.reps.to_string(),
                        c.seed.to_string(),
                    ];
                    row.extend(metric_values(r).into_iter().map(full));
                    row.extend([
                        r.successes.to_string(),
                        r.failures.to_string(),
                        r.nonconverged.to_string(),
                    ]);
                    if timing {
                        row.push(full(seconds(r)));
                    }
                    row
                })
                .collect();
            to_csv(&header, &rows)
        }
        Format::Table => {
            let mut out = String::new();
            let kind = match c.r {
                Some(r) => format!("polychoric s={} r={r}", c.s),
                None => format!("polyserial s={}", c.s),
            };
            writeln!(out, "{kind} rho={} N={} reps={} seed={}", c.rho, c.n, c.reps, c.seed).unwrap();
            write!(out, "{:<10}", "estimator").unwrap();
            for name in METRIC_NAMES {
                write!(out, "{:>10}", name.to_uppercase()).unwrap();
            }
            write!(out, "{:>8}{:>8}{:>10}", "ok", "failed", "nonconv").unwrap();
            if timing {
                write!(out, "{:>12}", "seconds").unwrap();
            }
            out.push('\n');
            for r in &report.estimators {
                write!(out, "{:<10}", r.estimator).unwrap();
                for v in metric_values(r) {
                    write!(out, "{:>10}", fixed(v, 4)).unwrap();
                }
                write!(out, "{:>8}{:>8}{:>10}", r.successes, r.failures, r.nonconverged).unwrap();
                if timing {
                    write!(out, "{:>12}", fixed(seconds(r), 3)).unwrap();
                }
                out.push('\n');
            }
            out
        }
    }
}

pub fn render_benchmark(b: &BenchmarkReport, format: Format) -> String {
    let (irls, ml) = (b.irls.as_secs_f64(), b.ml.as_secs_f64());
    match format {
        Format::Json => to_json(&json!({
            "reps": b.reps,
            "irls_seconds": irls,
            "ml_seconds": ml,
            "ratio": b.ratio(),
        })),
        Format::Csv => to_csv(
            &owned(&["reps", "irls_seconds", "ml_seconds", "ratio"]),
            &[vec![
                b.reps.to_string(),
                irls.to_string(),
                ml.to_string(),
                b.ratio().to_string(),
            ]],
        ),
        Format::Table => format!(
            "reps        {}\nirls        {irls:.4}s\nml          {ml:.4}s\nratio       {:.1}x\n",
            b.reps,
            b.ratio()
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::Method;
    use polyirls_core::{Estimator, Metrics, SimConfig};
    use std::time::Duration;

    fn summary() -> FitSummary {
        FitSummary {
            method: Method::Tetrachoric,
            rho: 0.1 + 0.2,
            se: 0.031,
            iterations: 7,
            converged: true,
            n: 100,
        }
    }

    #[test]
    fn fit_json_field_order_and_precision() {
        let s = render_fit(&summary(), Format::Json);
        let keys: Vec<usize> = ["\"method\"", "\"rho\"", "\"se\"", "\"iterations\"", "\"converged\""]
            .iter()
            .map(|k| s.find(k).unwrap())
            .collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
        let v: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["rho"].as_f64().unwrap(), 0.1 + 0.2);
    }

    #[test]
    fn fit_csv_and_table() {
        let csv = render_fit(&summary(), Format::Csv);
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with("method,rho,se,iterations,converged,n\n"));
        assert!(render_fit(&summary(), Format::Table).contains("rho         0.300000"));
    }

    fn report(sd: Option<f64>) -> SimReport {
        SimReport {
            config: SimConfig {
                rho: 0.4,
                n: 500,
                s: 2,
                r: Some(2),
                reps: 1,
                seed: 1,
                estimators: vec![Estimator::Irls],
            },
            estimators: vec![EstimatorReport {
                estimator: Estimator::Irls,
                metrics: Metrics {
                    mean: Some(0.41),
                    mb: Some(0.01),
                    mrb: Some(0.025),
                    rmse: Some(0.01),
                    sd,
                    msd: Some(0.06),
                },
                successes: 1,
                failures: 0,
                nonconverged: 0,
            }],
            timing: vec![(Estimator::Irls, Duration::from_millis(3))],
        }
    }

    #[test]
    fn absent_metrics_are_marked() {
        let r = report(None);
        assert!(render_simulation(&r, Format::Table, false).contains(NA));
        let v: Value = serde_json::from_str(&render_simulation(&r, Format::Json, false)).unwrap();
        assert!(v["estimators"][0]["sd"].is_null());
        let csv = render_simulation(&r, Format::Csv, false);
        let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row[11], "");
    }

    #[test]
    fn timing_only_on_request() {
        let r = report(Some(0.02));
        for f in [Format::Table, Format::Json, Format::Csv] {
            assert!(!render_simulation(&r, f, false).contains("seconds"));
            assert!(render_simulation(&r, f, true).contains("seconds"));
        }
    }
}
