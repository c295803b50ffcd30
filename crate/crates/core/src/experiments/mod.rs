//! Config-driven experiment runs: one TOML file in, a directory of
//! `manifest.json`, `metrics.csv`, per-experiment tables and optional dumps
//! out. Runs are deterministic in `(config, seed)`.

pub mod catalogue;
pub mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bridge::tilted_bridge;
use crate::chain::doob_transform;
use crate::continuum::{sample_fs_fdd, sl_solve, FsDiffusionModel};
use crate::error::{Error, Result};
use crate::harness::report::{Check, ExperimentReport, Metric, Table};
use crate::harness::{
    bridge_fdd_samples, chain_fdd_samples, eigen_convergence_with, eta_good_census, fdd_compare,
    meeting_probability, stay_positive_scaling, tightness_probe, tv_window, FddComparison, MeetingEndpoints,
};
use crate::io::{self, PathRecord, SlSpectrumRecord, SpectrumRecord};
use crate::model::{solve_scale, PotentialFamily, WalkKernel};
use crate::rng::stream_rng;
use crate::spectral::TransferSpectrum;
use crate::stats::{total_variation, BinGrid};

pub use catalogue::{describe, entry, listing, tags, CatalogueEntry, CATALOGUE, HARNESS_OPERATIONS};
pub use config::RunConfig;

/// Environment variable overriding the directory relative outputs live in.
pub const OUTPUT_ROOT_VAR: &str = "AREATILT_OUTPUT_ROOT";

/// A finished run: the report plus any extra files requested by `dump`.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: ExperimentReport,
    pub dumps: Vec<(String, String)>,
}

/// Independent seed for sub-task `k` of a run.
fn sub_seed(seed: u64, k: u64) -> u64 {
    seed.wrapping_add(k.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

struct Recorder<'a> {
    entry: &'static CatalogueEntry,
    overrides: &'a BTreeMap<String, f64>,
    report: ExperimentReport,
}

impl<'a> Recorder<'a> {
    fn new(config: &'a RunConfig) -> Result<Self> {
        let entry = entry(&config.experiment)?;
        Ok(Self {
            entry,
            overrides: &config.tolerances,
            report: ExperimentReport::new(entry.tag, config.parameters(), Some(config.seed)),
        })
    }

    fn put(&mut self, name: &str, value: f64) {
        let declared = self
            .entry
            .metric(name)
            .unwrap_or_else(|| panic!("metric {name} is not declared for {}", self.entry.tag));
        let check = match (declared.check, self.overrides.get(name)) {
            (Check::Below(_), Some(&t)) => Check::Below(t),
            (Check::AtLeast(_), Some(&t)) => Check::AtLeast(t),
            (c, _) => c,
        };
        self.report.metric(name, value, check);
    }

    fn flag(&mut self, name: &str, holds: bool) {
        self.put(name, if holds { 1.0 } else { 0.0 });
    }

    fn table(&mut self, table: Table) {
        debug_assert!(self.entry.tables.contains(&table.name.as_str()));
        self.report.tables.push(table);
    }

    fn finish(self, dumps: Vec<(String, String)>) -> Result<RunOutcome> {
        self.report.validate(&self.entry.metric_names())?;
        Ok(RunOutcome {
            report: self.report,
            dumps,
        })
    }
}

fn spread(values: impl IntoIterator<Item = f64>) -> f64 {
    let (lo, hi) = values
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

fn sorted_decreasing(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn models(config: &RunConfig) -> Result<(WalkKernel, PotentialFamily)> {
    Ok((config.kernel.build()?, config.potential.build()?))
}

fn lambda_label(lambda: f64) -> String {
    format!("{lambda:e}")
}

/// Runs the configured experiment in memory.
pub fn run_experiment(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    match config.experiment.as_str() {
        "eigen-convergence" => run_eigen(config),
        "fdd" => run_fdd(config),
        "tightness" => run_tightness(config),
        "tv-window" => run_window(config),
        "stay-positive" => run_stay_positive(config),
        "meeting" => run_meeting(config),
        "eta-good" => run_eta_good(config),
        "bridge-sample" => run_bridge_sample(config),
        other => Err(Error::UnknownExperiment {
            tag: other.into(),
            valid: tags().join(", "),
        }),
    }
}

fn run_eigen(config: &RunConfig) -> Result<RunOutcome> {
    let p = config.eigen_convergence.as_ref().expect("validated");
    let (kernel, potential) = models(config)?;
    let mut rec = Recorder::new(config)?;
    let continuum = sl_solve(kernel.sigma2(), &potential, p.continuum.cutoff, p.continuum.grid, 1)?;
    let (study, spectra) = eigen_convergence_with(&kernel, &potential, &p.lambdas, &continuum, config.truncation)?;

    let mut e_table = Table::new("e_lambda", &["lambda", "H", "E", "e", "err_vs_continuum"]);
    let mut phi_table = Table::new("phi_lambda", &["lambda", "H", "M", "phi_error", "c_over_h"]);
    for r in &study.rows {
        e_table.push(vec![r.lambda, r.big_h, r.eigenvalue, r.e, r.err_vs_continuum]);
        phi_table.push(vec![r.lambda, r.big_h, r.truncation as f64, r.phi_error, r.c_over_h]);
    }
    let last = study.rows.last().expect("nonempty λ grid");
    rec.put("e0", study.e0);
    rec.put("e_rel_error", last.err_vs_continuum / study.e0);
    rec.flag("e_error_decreasing", study.e_error_decreasing());
    rec.put("phi_error", last.phi_error);
    rec.flag("phi_error_decreasing", study.phi_error_decreasing());
    rec.put("c_over_h_deviation", (last.c_over_h - 1.0).abs());
    rec.table(e_table);
    rec.table(phi_table);

    let mut dumps = Vec::new();
    if config.dump {
        for s in &spectra {
            let name = format!("spectrum_lambda_{}.txt", lambda_label(s.scale().lambda));
            dumps.push((name, io::spectrum_to_string(&SpectrumRecord::from(s))));
        }
        dumps.push(("sl_spectrum.txt".into(), io::sl_spectrum_to_string(&SlSpectrumRecord::from(&continuum))));
    }
    rec.finish(dumps)
}

fn worst_marginal(c: &FddComparison) -> f64 {
    c.marginals.iter().map(|m| m.ks).fold(0.0, f64::max)
}

fn worst_pair(c: &FddComparison) -> f64 {
    c.pairs.iter().map(|p| p.tv).fold(0.0, f64::max)
}

fn run_fdd(config: &RunConfig) -> Result<RunOutcome> {
    let p = config.fdd.as_ref().expect("validated");
    let (kernel, potential) = models(config)?;
    let mut rec = Recorder::new(config)?;
    let continuum = sl_solve(kernel.sigma2(), &potential, p.continuum.cutoff, p.continuum.grid, 2)?;
    let model = FsDiffusionModel::new(continuum)?;
    let grid = BinGrid {
        upper: p.upper,
        bins: p.bins,
    };
    let (fs, diagnostics) = sample_fs_fdd(&model, &p.times, p.dt, p.samples, sub_seed(config.seed, 0))?;
    let fs_cmp = fdd_compare(&fs, &p.times, &model, None, grid)?;

    let mut marginals = Table::new("fdd_marginals", &["lambda", "time", "ks", "w1"]);
    let mut pairs = Table::new("fdd_pairs", &["lambda", "first", "second", "tv"]);
    for m in &fs_cmp.marginals {
        marginals.push(vec![0.0, m.time, m.ks, m.w1]);
    }
    let mut comparisons = Vec::new();
    for (i, &lambda) in sorted_decreasing(&p.lambdas).iter().enumerate() {
        let seed = sub_seed(config.seed, i as u64 + 1);
        let spectrum = TransferSpectrum::compute(&kernel, &potential, lambda, config.truncation)?;
        let scale = *spectrum.scale();
        let sample = match p.bridge {
            Some(b) => {
                let n_half = (b.n_over_h2 * scale.time_scale()).ceil() as usize;
                let ensemble = tilted_bridge(&kernel, &potential, lambda, b.u, b.v, n_half, config.truncation, None)?;
                bridge_fdd_samples(&ensemble, &scale, &p.times, p.samples, seed)?
            }
            None => chain_fdd_samples(&doob_transform(&spectrum)?, &p.times, p.samples, seed)?,
        };
        let cmp = fdd_compare(&sample, &p.times, &model, Some(&fs), grid)?;
        for m in &cmp.marginals {
            marginals.push(vec![lambda, m.time, m.ks, m.w1]);
        }
        for q in &cmp.pairs {
            pairs.push(vec![lambda, q.first, q.second, q.tv]);
        }
        comparisons.push(cmp);
    }
    let coarsest = comparisons.first().expect("nonempty λ grid");
    let finest = comparisons.last().expect("nonempty λ grid");
    rec.put("marginal_ks_finest", worst_marginal(finest));
    rec.put("pair_tv_finest", worst_pair(finest));
    rec.put("fs_marginal_ks", worst_marginal(&fs_cmp));
    rec.flag("marginal_ks_improves", worst_marginal(finest) < worst_marginal(coarsest));
    rec.flag("pair_tv_improves", worst_pair(finest) < worst_pair(coarsest));
    rec.put("fs_escapes", diagnostics.escapes as f64);
    rec.table(marginals);
    rec.table(pairs);
    rec.finish(Vec::new())
}

fn run_tightness(config: &RunConfig) -> Result<RunOutcome> {
    let p = config.tightness.as_ref().expect("validated");
    let (kernel, potential) = models(config)?;
    let mut rec = Recorder::new(config)?;
    let mut table = Table::new("tightness", &["lambda", "epsilon", "delta", "estimate", "ratio"]);
    let mut all = Vec::new();
    for (i, &lambda) in sorted_decreasing(&p.lambdas).iter().enumerate() {
        let spectrum = TransferSpectrum::compute(&kernel, &potential, lambda, config.truncation)?;
        let chain = doob_transform(&spectrum)?;
        let rows = tightness_probe(&chain, &p.epsilons, &p.deltas, p.samples, sub_seed(config.seed, i as u64))?;
        for r in &rows {
            table.push(vec![r.lambda, r.epsilon, r.delta, r.estimate, r.ratio]);
        }
        all.extend(rows);
    }
    let [eps_ref, delta_ref] = p.reference;
    let reference = all.iter().filter(|r| r.epsilon == eps_ref && r.delta == delta_ref).map(|r| r.ratio);
    rec.put("ratio_spread", spread(reference));

    let mut monotone = true;
    for &lambda in &p.lambdas {
        for &eps in &p.epsilons {
            let mut cell: Vec<_> = all.iter().filter(|r| r.lambda == lambda && r.epsilon == eps).collect();
            cell.sort_by(|a, b| a.delta.total_cmp(&b.delta));
            monotone &= cell.windows(2).all(|w| w[0].estimate <= w[1].estimate);
        }
    }
    rec.flag("monotone_in_delta", monotone);
    rec.put("max_ratio", all.iter().map(|r| r.ratio).fold(0.0, f64::max));
    let eps_max = p.epsilons.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let delta_max = p.deltas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let large = all
        .iter()
        .filter(|r| r.epsilon == eps_max && r.delta == delta_max)
        .map(|r| r.estimate)
        .fold(0.0, f64::max);
    rec.put("large_epsilon_estimate", large);
    rec.table(table);
    rec.finish(Vec::new())
}

fn run_window(config: &RunConfig) -> Result<RunOutcome> {
    let p = config.tv_window.as_ref().expect("validated");
    let (kernel, potential) = models(config)?;
    let mut rec = Recorder::new(config)?;
    let spectrum = TransferSpectrum::compute(&kernel, &potential, p.lambda, config.truncation)?;
    let h2 = spectrum.scale().time_scale();
    let ns: Vec<usize> = p.n_over_h2.iter().map(|m| (m * h2).ceil() as usize).collect();
    let endpoints: Vec<(usize, usize)> = p.endpoints.iter().map(|e| (e[0], e[1])).collect();
    let study = tv_window(&spectrum, p.horizon, &ns, &endpoints, p.upper, (p.bins[0], p.bins[1]))?;

    let mut table = Table::new("tv_window", &["N", "N_over_H2", "u", "v", "tv_exact", "tv_fine", "tv_coarse"]);
    for r in &study.rows {
        table.push(vec![
            r.n_half as f64,
            r.n_over_h2,
            r.u as f64,
            r.v as f64,
            r.tv_exact,
            r.tv_fine,
            r.tv_coarse,
        ]);
    }
    let n_min = *ns.iter().min().expect("nonempty");
    let n_max = *ns.iter().max().expect("nonempty");
    let tv_at = |n: usize, e: (usize, usize)| {
        study
            .rows
            .iter()
            .find(|r| r.n_half == n && (r.u, r.v) == e)
            .map_or(f64::NAN, |r| r.tv_exact)
    };
    let decreasing = endpoints.iter().all(|&e| tv_at(n_max, e) < tv_at(n_min, e));
    rec.flag("tv_decreasing", decreasing);
    rec.put("endpoint_uniformity", study.endpoint_uniformity.unwrap_or(f64::NAN));
    rec.flag("coarse_contracts", study.rows.iter().all(|r| r.tv_coarse <= r.tv_fine + 0.01));
    rec.put(
        "tv_largest_n",
        endpoints.iter().map(|&e| tv_at(n_max, e)).fold(0.0, f64::max),
    );
    rec.put("decay_rate", study.decay_rate.unwrap_or(f64::NAN));
    rec.table(table);
    rec.finish(Vec::new())
}

fn run_stay_positive(config: &RunConfig) -> Result<RunOutcome> {
    let p = config.stay_positive.as_ref().expect("validated");
    let kernel = config.kernel.build()?;
    let mut rec = Recorder::new(config)?;
    let rows = stay_positive_scaling(&kernel, &p.ns, p.x, p.y, &p.m_fractions, p.eta)?;
    let mut table = Table::new("stay_positive", &["n", "m", "x", "y", "probability", "ratio", "uncapped", "cap_effect"]);
    for r in &rows {
        table.push(vec![
            r.n as f64,
            r.m as f64,
            r.x as f64,
            r.y as f64,
            r.probability,
            r.ratio,
            r.uncapped,
            r.cap_effect,
        ]);
    }
    let per_fraction = (0..p.m_fractions.len())
        .map(|j| spread(rows.iter().skip(j).step_by(p.m_fractions.len()).map(|r| r.ratio)))
        .fold(0.0, f64::max);
    rec.put("ratio_spread", per_fraction);
    rec.put("band_spread", spread(rows.iter().map(|r| r.ratio)));
    rec.put("cap_effect_max", rows.iter().map(|r| r.cap_effect).fold(0.0, f64::max));
    rec.table(table);
    rec.finish(Vec::new())
}

fn run_meeting(config: &RunConfig) -> Result<RunOutcome> {
    let p = config.meeting.as_ref().expect("validated");
    let kernel = config.kernel.build()?;
    let mut rec = Recorder::new(config)?;
    let [x, y, z, w] = p.endpoints;
    let rows = meeting_probability(&kernel, &p.ns, MeetingEndpoints { x, y, z, w }, p.eta, p.samples, config.seed)?;
    let mut table = Table::new(
        "meeting",
        &[
            "n",
            "x",
            "y",
            "z",
            "w",
            "samples",
            "meeting",
            "meeting_stderr",
            "mean_count_exact",
            "mean_count",
            "second_moment",
            "pz_floor",
        ],
    );
    let mut consistent = true;
    for r in &rows {
        let mut row: Vec<f64> = vec![r.n as f64];
        row.extend(r.endpoints.iter().map(|&e| e as f64));
        row.extend([
            r.samples as f64,
            r.meeting,
            r.meeting_stderr,
            r.mean_count_exact,
            r.mean_count,
            r.second_moment,
            r.pz_floor,
        ]);
        table.push(row);
        let var = (r.second_moment - r.mean_count * r.mean_count).max(0.0);
        let se = (var / r.samples as f64).sqrt();
        consistent &= (r.mean_count - r.mean_count_exact).abs() <= 3.0 * se + 1e-12;
    }
    rec.put("mean_count_spread", spread(rows.iter().map(|r| r.mean_over_sqrt_n())));
    rec.put("second_moment_spread", spread(rows.iter().map(|r| r.second_over_n())));
    rec.flag("pz_floor_holds", rows.iter().all(|r| r.meeting >= r.pz_floor));
    rec.flag("mean_count_consistent", consistent);
    rec.put("mean_count_min", rows.iter().map(|r| r.mean_over_sqrt_n()).fold(f64::INFINITY, f64::min));
    rec.put("meeting_min", rows.iter().map(|r| r.meeting).fold(f64::INFINITY, f64::min));
    rec.table(table);
    rec.finish(Vec::new())
}

fn run_eta_good(config: &RunConfig) -> Result<RunOutcome> {
    let p = config.eta_good.as_ref().expect("validated");
    let (kernel, potential) = models(config)?;
    let mut rec = Recorder::new(config)?;
    let scale = solve_scale(&potential, p.lambda)?;
    let n_half = (p.n_over_h2 * scale.time_scale()).ceil() as usize;
    let lattice = |f: f64| ((f * scale.big_h).round() as usize).max(1);
    let build = |e: [f64; 2]| {
        tilted_bridge(&kernel, &potential, p.lambda, lattice(e[0]), lattice(e[1]), n_half, config.truncation, None)
    };
    let first = build(p.first)?;
    let second = build(p.second)?;

    let mut table = Table::new(
        "eta_good",
        &[
            "replica",
            "intervals",
            "good",
            "middle_good",
            "middle_slots",
            "potentially_good",
            "far_first",
            "far_second",
        ],
    );
    let mut middle = Vec::new();
    let mut good = Vec::new();
    let mut dumps = Vec::new();
    for r in 0..p.replicas {
        let a = first.sample(&mut stream_rng(config.seed, 2 * r as u64))?;
        let b = second.sample(&mut stream_rng(config.seed, 2 * r as u64 + 1))?;
        let c = eta_good_census(&a, &b, p.eta, scale.big_h)?;
        table.push(vec![
            r as f64,
            c.intervals as f64,
            c.good_count as f64,
            c.middle_good as f64,
            c.middle_slots() as f64,
            c.potentially_good as f64,
            c.far_from_wall[0] as f64,
            c.far_from_wall[1] as f64,
        ]);
        middle.push(c.middle_fraction());
        good.push(c.good_count as f64 / c.intervals as f64);
        if config.dump {
            for (k, path) in [a, b].into_iter().enumerate() {
                let record = PathRecord {
                    lambda: p.lambda,
                    big_h: scale.big_h,
                    seed: config.seed,
                    path,
                };
                dumps.push((format!("path_{r}_{k}.txt"), io::path_to_string(&record)));
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    rec.put("middle_fraction_min", middle.iter().copied().fold(f64::INFINITY, f64::min));
    rec.put("middle_fraction_mean", mean(&middle));
    rec.put("good_fraction_mean", mean(&good));
    rec.table(table);
    rec.finish(dumps)
}

fn run_bridge_sample(config: &RunConfig) -> Result<RunOutcome> {
    let p = config.bridge_sample.as_ref().expect("validated");
    let (kernel, potential) = models(config)?;
    let mut rec = Recorder::new(config)?;
    let scale = solve_scale(&potential, p.lambda)?;
    let ensemble = tilted_bridge(&kernel, &potential, p.lambda, p.u, p.v, p.n_half, config.truncation, None)?;
    let paths = ensemble.sample_many(p.samples, config.seed)?;
    let exact = ensemble.marginals()?.swap_remove(p.n_half);
    let mut empirical = vec![0.0; exact.len()];
    for path in &paths {
        let x = path.at(0).expect("time 0 is inside the window") as usize;
        empirical[x - 1] += 1.0 / p.samples as f64;
    }
    let mut table = Table::new("bridge_marginal", &["x", "exact", "empirical"]);
    for (i, (a, b)) in exact.iter().zip(&empirical).enumerate() {
        table.push(vec![(i + 1) as f64, *a, *b]);
    }
    rec.put("log_z", ensemble.log_z());
    rec.put("marginal_tv_mid", total_variation(&exact, &empirical));
    rec.table(table);
    let dumps = if config.dump {
        paths
            .into_iter()
            .enumerate()
            .map(|(i, path)| {
                let record = PathRecord {
                    lambda: p.lambda,
                    big_h: scale.big_h,
                    seed: config.seed,
                    path,
                };
                (format!("path_{i}.txt"), io::path_to_string(&record))
            })
            .collect()
    } else {
        Vec::new()
    };
    rec.finish(dumps)
}

#[derive(Serialize)]
struct Manifest<'a> {
    experiment: &'a str,
    version: &'a str,
    seed: u64,
    passed: bool,
    parameters: &'a serde_json::Value,
    metrics: &'a [Metric],
    files: Vec<String>,
}

/// The directory outputs are written under: `$AREATILT_OUTPUT_ROOT` or `.`.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR).map_or_else(|| PathBuf::from("."), PathBuf::from)
}

/// Resolves the run directory: the configured `output` (relative paths are
/// taken under `root`) or `root/<experiment>`.
pub fn output_dir(config: &RunConfig, root: &Path) -> PathBuf {
    match &config.output {
        Some(p) if p.is_absolute() => p.clone(),
        Some(p) => root.join(p),
        None => root.join(&config.experiment),
    }
}

/// Writes tables, `metrics.csv`, dumps and finally `manifest.json`.
pub fn write_outputs(config: &RunConfig, outcome: &RunOutcome, root: &Path) -> Result<PathBuf> {
    let dir = output_dir(config, root);
    std::fs::create_dir_all(&dir)?;
    let report = &outcome.report;
    let mut files = Vec::new();
    let mut emit = |name: String, contents: &str| -> Result<()> {
        io::write_atomic(&dir.join(&name), contents)?;
        files.push(name);
        Ok(())
    };
    emit("metrics.csv".into(), &report.metrics_csv())?;
    for t in &report.tables {
        emit(format!("{}.csv", t.name), &t.to_csv())?;
    }
    for (name, contents) in &outcome.dumps {
        emit(name.clone(), contents)?;
    }
    let manifest = Manifest {
        experiment: &report.tag,
        version: &report.version,
        seed: config.seed,
        passed: report.passed(),
        parameters: &report.parameters,
        metrics: &report.metrics,
        files,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    io::write_atomic(&dir.join("manifest.json"), &(json + "\n"))?;
    Ok(dir)
}
