//! Experiment dispatch: each kind turns its parameters into output files.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use thermoproc::combinatorics::delta_bound;
use thermoproc::cooling::{
    coherent_asymptote, coherent_closed_form, coherent_rate, cool_coherent, cool_incoherent,
    incoherent_asymptote, incoherent_closed_form, incoherent_rate, measured_rate,
    mmtp_rate_single_branch, verify_round_ordering, IncoherentParams as ModelParams, Paradigm,
    ProcessClass,
};
use thermoproc::extraction::{epsilon_d_closed, epsilon_etp, epsilon_mtp, epsilon_tp, ExtractionSetup};
use thermoproc::memory::{closed_form_p_d, memory_beta_swap_ground};
use thermoproc::reachable::{etp_orbit_hull, figure_regions, qutrit_mmtp2_vertices, tp_region, write_regions};

use crate::config::{
    CoherentParams, Experiment, ExperimentConfig, Fig2Params, Fig3Params, IncoherentParams,
    SweepParams, ValidateParams,
};
use crate::error::{CliError, Context, Result};
use crate::output::{csv_file, fmt, json_file, write_run, OutputFile, RunManifest};
use crate::validation::{self, ValidationReport};

pub const THREADS_ENV: &str = "THERMOPROC_THREADS";

/// Worker pool sized by `THERMOPROC_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n = v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::config(THREADS_ENV, format!("must be a positive integer, got `{v}`")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| CliError::config(THREADS_ENV, e.to_string()))
}

/// Everything an experiment produced, before it is written.
#[derive(Debug)]
pub struct Outputs {
    pub files: Vec<OutputFile>,
    pub report: Option<ValidationReport>,
}

/// Computes the outputs of `config` without touching the file system.
pub fn build_outputs(config: &ExperimentConfig) -> Result<Outputs> {
    config.validate()?;
    let pool = thread_pool()?;
    let echo = format!("config: {}", config.echo());
    pool.install(|| match &config.experiment {
        Experiment::Fig2(p) => Ok(files(fig2(p, &echo)?)),
        Experiment::Fig3(p) => Ok(files(fig3(p, &echo)?)),
        Experiment::CoolingCoherent(p) => Ok(files(cooling_coherent(p, &echo)?)),
        Experiment::CoolingIncoherent(p) => Ok(files(cooling_incoherent(p, &echo)?)),
        Experiment::BetaSwapSweep(p) => Ok(files(beta_swap_sweep(p, &echo)?)),
        Experiment::Validate(p) => Ok(validate(p)),
    })
}

fn files(files: Vec<OutputFile>) -> Outputs {
    Outputs { files, report: None }
}

/// Runs `config`, writes its outputs and manifest into `out_dir` (the
/// config's own directory when `None`). A failed validation still writes its
/// report before returning [`CliError::ValidationFailed`].
pub fn run_experiment(config: &ExperimentConfig, out_dir: Option<&Path>) -> Result<RunManifest> {
    let started = Instant::now();
    let outputs = build_outputs(config)?;
    let dir = out_dir.unwrap_or(&config.output_dir);
    let manifest = write_run(dir, config, &outputs.files, started.elapsed().as_secs_f64())?;
    if let Some(report) = outputs.report {
        if !report.passed {
            return Err(CliError::ValidationFailed {
                failed: report.failed,
                total: report.total,
            });
        }
    }
    Ok(manifest)
}

fn fig2(p: &Fig2Params, echo: &str) -> Result<Vec<OutputFile>> {
    let base = ExtractionSetup::from_products(p.beta_e, 1.0).context(|| "fig2 setup".into())?;
    let rows = p
        .beta_w
        .values()
        .into_par_iter()
        .map(|w| -> Result<Vec<String>> {
            let s = base.with_w(w).context(|| format!("fig2 at W = {w}"))?;
            let mut row = vec![fmt(w), fmt(epsilon_tp(&s)), fmt(epsilon_etp(&s)), fmt(epsilon_mtp(&s))];
            for &d in &p.d {
                row.push(fmt(epsilon_d_closed(&s, d).context(|| format!("fig2 at W = {w}, d = {d}"))?));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut header = vec!["W".to_string(), "eps_tp".into(), "eps_etp".into(), "eps_mtp".into()];
    header.extend(p.d.iter().map(|d| format!("eps_d{d}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let comments = vec![
        echo.to_string(),
        "work-extraction error versus work-bit gap; energies in units of k_B T".into(),
        format!("W_0 = {}", fmt(base.w0())),
        "eps_d<d>: memory-assisted protocol with a d-dimensional memory (closed form)".into(),
    ];
    Ok(vec![csv_file("fig2.csv", &comments, &header, &rows)?])
}

fn fig3(p: &Fig3Params, echo: &str) -> Result<Vec<OutputFile>> {
    let what = || format!("fig3 at gamma = {}", p.gamma);
    let regions = figure_regions(p.gamma, p.depth).context(what)?;
    let mut bytes = Vec::new();
    write_regions(&mut bytes, &regions, &[echo.to_string(), format!("ETP region: beta-swap orbit hull, depth {}", p.depth)])
        .context(what)?;
    let regions_file = OutputFile {
        name: "fig3_regions.csv".into(),
        bytes,
    };

    let etp = etp_orbit_hull(p.gamma, p.depth).context(what)?;
    let tp = tp_region(p.gamma).context(what)?;
    let names = ["A1", "A2", "B1", "B2"];
    let rows: Vec<Vec<String>> = qutrit_mmtp2_vertices(p.gamma)
        .context(what)?
        .iter()
        .zip(names)
        .map(|(v, name)| {
            vec![
                name.to_string(),
                fmt(v.get(0)),
                fmt(v.get(1)),
                fmt(v.get(2)),
                fmt(etp.signed_distance(v)),
                fmt(tp.signed_distance(v)),
            ]
        })
        .collect();
    let comments = vec![
        echo.to_string(),
        "signed distances in the plot plane: positive outside the region, negative inside".into(),
    ];
    let header = ["point", "p_g", "p_e1", "p_e2", "etp_signed_distance", "tp_signed_distance"];
    Ok(vec![regions_file, csv_file("fig3_separation.csv", &comments, &header, &rows)?])
}

fn classes(ds: &[usize]) -> Vec<ProcessClass> {
    let mut out = vec![ProcessClass::Tp, ProcessClass::Mtp];
    out.extend(ds.iter().map(|&d| ProcessClass::Mmtp(d)));
    out
}

fn column_name(c: ProcessClass) -> String {
    match c {
        ProcessClass::Tp => "tp".into(),
        ProcessClass::Mtp => "mtp".into(),
        ProcessClass::Mmtp(d) => format!("mmtp{d}"),
    }
}

/// Per-round table: `n`, then for every class the simulated and closed-form
/// populations. Row `n = 0` is the starting Gibbs population.
fn rounds_table(
    classes: &[ProcessClass],
    start: f64,
    sims: &[Vec<f64>],
    closed: &[Vec<f64>],
) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["n".to_string()];
    for &c in classes {
        header.push(column_name(c));
        header.push(format!("{}_closed", column_name(c)));
    }
    let rounds = sims.first().map_or(0, Vec::len);
    let rows = (0..=rounds)
        .map(|n| {
            let mut row = vec![n.to_string()];
            for (s, c) in sims.iter().zip(closed) {
                if n == 0 {
                    row.extend([fmt(start), fmt(start)]);
                } else {
                    row.extend([fmt(s[n - 1]), fmt(c[n - 1])]);
                }
            }
            row
        })
        .collect();
    (header, rows)
}

fn cooling_coherent(p: &CoherentParams, echo: &str) -> Result<Vec<OutputFile>> {
    let classes = classes(&p.d);
    let results = classes
        .par_iter()
        .map(|&c| -> Result<(Vec<f64>, Vec<f64>, Vec<String>)> {
            let what = || format!("coherent cooling, {c}");
            let run = cool_coherent(c, p.rounds, p.gamma).context(what)?;
            let closed = (1..=p.rounds)
                .map(|n| coherent_closed_form(c, n, p.gamma))
                .collect::<thermoproc::Result<Vec<_>>>()
                .context(what)?;
            let summary = vec![
                c.to_string(),
                fmt(coherent_asymptote(c, p.gamma).context(what)?),
                fmt(coherent_rate(c, p.gamma).context(what)?),
                fmt(measured_rate(c, Paradigm::Coherent, p.gamma, None).context(what)?),
            ];
            Ok((run.populations, closed, summary))
        })
        .collect::<Result<Vec<_>>>()?;
    let sims: Vec<Vec<f64>> = results.iter().map(|r| r.0.clone()).collect();
    let closed: Vec<Vec<f64>> = results.iter().map(|r| r.1.clone()).collect();
    let (header, rows) = rounds_table(&classes, p.gamma, &sims, &closed);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let comments = vec![echo.to_string(), "ground population after each coherent round".into()];
    let summary: Vec<Vec<String>> = results.into_iter().map(|r| r.2).collect();
    Ok(vec![
        csv_file("cooling_coherent.csv", &comments, &header, &rows)?,
        csv_file(
            "cooling_coherent_summary.csv",
            &[echo.to_string()],
            &["class", "asymptote", "rate_closed", "rate_measured"],
            &summary,
        )?,
    ])
}

fn cooling_incoherent(p: &IncoherentParams, echo: &str) -> Result<Vec<OutputFile>> {
    let params = ModelParams::new(p.beta_e, p.beta_script_e, 1.0, p.beta_hot)
        .context(|| "incoherent cooling parameters".into())?;
    let classes = classes(&p.d);
    let p_star = incoherent_asymptote(&params);
    let results = classes
        .par_iter()
        .map(|&c| -> Result<(Vec<f64>, Vec<f64>, Vec<String>)> {
            let what = || format!("incoherent cooling, {c}");
            let run = cool_incoherent(c, p.rounds, &params).context(what)?;
            let closed = (1..=p.rounds)
                .map(|n| incoherent_closed_form(c, n, &params))
                .collect::<thermoproc::Result<Vec<_>>>()
                .context(what)?;
            let measured = measured_rate(c, Paradigm::Incoherent, params.gamma(), Some(&params)).context(what)?;
            let (single, single_dev) = match c {
                ProcessClass::Mmtp(d) => {
                    let s = mmtp_rate_single_branch(&params, d).context(what)?;
                    (fmt(s), fmt(s - measured))
                }
                _ => (String::new(), String::new()),
            };
            let summary = vec![
                c.to_string(),
                fmt(p_star),
                fmt(*run.populations.last().expect("at least one round")),
                fmt(incoherent_rate(c, &params).context(what)?),
                fmt(measured),
                single,
                single_dev,
                verify_round_ordering(&run).context(what)?.to_string(),
            ];
            Ok((run.populations, closed, summary))
        })
        .collect::<Result<Vec<_>>>()?;
    let sims: Vec<Vec<f64>> = results.iter().map(|r| r.0.clone()).collect();
    let closed: Vec<Vec<f64>> = results.iter().map(|r| r.1.clone()).collect();
    let (header, rows) = rounds_table(&classes, params.gamma(), &sims, &closed);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let comments = vec![
        echo.to_string(),
        "target-qubit ground population after each round with a hot auxiliary qubit".into(),
    ];
    let summary: Vec<Vec<String>> = results.into_iter().map(|r| r.2).collect();
    let summary_comments = vec![
        echo.to_string(),
        "rate_single_branch: rate formula keeping only the (1 - eta) branch; deviation is against the measured rate".into(),
    ];
    Ok(vec![
        csv_file("cooling_incoherent.csv", &comments, &header, &rows)?,
        csv_file(
            "cooling_incoherent_summary.csv",
            &summary_comments,
            &[
                "class",
                "p_star",
                "p_final",
                "rate_closed",
                "rate_measured",
                "rate_single_branch",
                "single_branch_deviation",
                "round_order_ok",
            ],
            &summary,
        )?,
    ])
}

fn beta_swap_sweep(p: &SweepParams, echo: &str) -> Result<Vec<OutputFile>> {
    let points: Vec<(f64, f64, usize)> = p
        .gamma
        .iter()
        .flat_map(|&g| p.p0.iter().flat_map(move |&p0| (1..=p.d_max).map(move |d| (g, p0, d))))
        .collect();
    let rows = points
        .into_par_iter()
        .map(|(g, p0, d)| -> Result<Vec<String>> {
            let what = || format!("beta-swap sweep at gamma = {g}, p0 = {p0}, d = {d}");
            let sim = memory_beta_swap_ground(d, p0, g).context(what)?;
            let closed = closed_form_p_d(d, p0, g).context(what)?;
            let target = 1.0 - p0 * (1.0 - g) / g;
            Ok(vec![
                fmt(g),
                fmt(p0),
                d.to_string(),
                fmt(sim),
                fmt(closed),
                fmt((sim - closed).abs()),
                fmt(target),
                fmt((sim - target).abs()),
                fmt((g - p0).abs() * delta_bound(d, g)),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let header = [
        "gamma",
        "p0",
        "d",
        "simulated",
        "closed_form",
        "deviation",
        "beta_swap",
        "gap",
        "gap_bound",
    ];
    let comments = vec![
        echo.to_string(),
        "ground population after the memory-assisted beta-swap simulation".into(),
    ];
    Ok(vec![csv_file("beta_swap_sweep.csv", &comments, &header, &rows)?])
}

fn validate(p: &ValidateParams) -> Outputs {
    let report = validation::run(p.only.as_deref(), p.tolerance);
    Outputs {
        files: vec![json_file("validation.json", &report)],
        report: Some(report),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Grid;

    fn small_fig2() -> ExperimentConfig {
        ExperimentConfig::new(
            Experiment::Fig2(Fig2Params {
                beta_e: std::f64::consts::LN_2,
                beta_w: Grid {
                    start: 0.1,
                    stop: 2.0,
                    points: 7,
                },
                d: vec![1, 3],
            }),
            "unused",
        )
    }

    #[test]
    fn fig2_columns_and_reference_row() {
        let mut c = small_fig2();
        if let Experiment::Fig2(p) = &mut c.experiment {
            p.beta_w = Grid {
                start: 4f64.ln(),
                stop: 4f64.ln(),
                points: 1,
            };
        }
        let out = build_outputs(&c).unwrap();
        let text = String::from_utf8(out.files[0].bytes.clone()).unwrap();
        let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(lines[0], "W,eps_tp,eps_etp,eps_mtp,eps_d1,eps_d3");
        let row: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
        assert!((row[1] - 0.25).abs() < 1e-12);
        assert!((row[2] - 0.375).abs() < 1e-12);
        assert!((row[3] - 8.0 / 15.0).abs() < 1e-12);
        assert!((row[4] - row[3]).abs() < 1e-12);
    }

    #[test]
    fn outputs_are_deterministic() {
        for c in [
            small_fig2(),
            ExperimentConfig::new(Experiment::Fig3(Fig3Params::default()), "unused"),
            ExperimentConfig::new(
                Experiment::CoolingCoherent(CoherentParams {
                    rounds: 5,
                    ..CoherentParams::default()
                }),
                "unused",
            ),
        ] {
            let a = build_outputs(&c).unwrap().files;
            let b = build_outputs(&c).unwrap().files;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn cooling_tables_have_round_zero() {
        let c = ExperimentConfig::new(
            Experiment::CoolingIncoherent(IncoherentParams {
                rounds: 3,
                d: vec![1],
                ..IncoherentParams::default()
            }),
            "unused",
        );
        let out = build_outputs(&c).unwrap();
        let text = String::from_utf8(out.files[0].bytes.clone()).unwrap();
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data[0], "n,tp,tp_closed,mtp,mtp_closed,mmtp1,mmtp1_closed");
        assert_eq!(data.len(), 5);
    }

    #[test]
    fn sweep_rows_cover_grid() {
        let c = ExperimentConfig::new(
            Experiment::BetaSwapSweep(SweepParams {
                gamma: vec![0.75],
                p0: vec![0.0, 0.5],
                d_max: 3,
            }),
            "unused",
        );
        let out = build_outputs(&c).unwrap();
        let text = String::from_utf8(out.files[0].bytes.clone()).unwrap();
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data.len(), 1 + 6);
        let d2: Vec<&str> = data[2].split(',').collect();
        assert_eq!(d2[2], "2");
        assert!((d2[3].parse::<f64>().unwrap() - 0.890625).abs() < 1e-12);
    }
}
