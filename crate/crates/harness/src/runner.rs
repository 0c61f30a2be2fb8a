//! Pipelines behind the subcommands: synthesize → sweep → average →
//! compare or recover, with every artifact written through one [`Writer`].

use std::fmt::Write as _;
use std::path::Path;

use navier_core::estimator::{
    compare, recover_phi, recover_phi_lcurve, restrict_to, sweep, theorem1_ensemble, trend_bands,
    u1_diagnostic, verify_theorem1, AveragedData, Experiment, FieldMode, Part, PointComparison,
};
use navier_core::randfield::{covariance_profile, structure_fit, SourceModel, Synthesizer};
use navier_core::specfun::{hankel1, hankel1_asym, HankelOrder};
use navier_core::stats::median;
use navier_core::{Bump, SourceGrid};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, StageExt};
use crate::expectations::Expectations;
use crate::gridio::{comparison_csv, fields_csv, GridFile, Writer};
use crate::manifest::{ensemble_seeds, source_seed, RunManifest};

/// Result of a subcommand.
#[derive(Debug)]
pub struct Outcome {
    pub manifest: RunManifest,
    /// `Some` when the command has an acceptance check.
    pub passed: Option<bool>,
    pub summary: String,
}

impl Outcome {
    /// `Err(Acceptance)` if `assert` is set and the check failed.
    pub fn into_result(self, assert: bool) -> Result<Self, HarnessError> {
        if assert && self.passed == Some(false) {
            return Err(HarnessError::Acceptance(self.summary));
        }
        Ok(self)
    }
}

/// Writes `manifest.json` listing every file the writer produced.
fn finish(
    mut manifest: RunManifest,
    w: Writer,
    passed: Option<bool>,
    summary: String,
) -> Result<Outcome, HarnessError> {
    manifest.finish(w.written());
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    let path = w.dir().join("manifest.json");
    std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
    Ok(Outcome {
        manifest,
        passed,
        summary,
    })
}

#[derive(Debug, Serialize)]
struct PointRow {
    index: usize,
    x1: f64,
    x2: f64,
    lhs_avg: f64,
    rhs_riesz: f64,
    rel_err: f64,
}

fn point_rows(exp: &Experiment, rows: &[PointComparison]) -> Vec<PointRow> {
    rows.iter()
        .map(|r| {
            let x = exp.points.points()[r.index];
            PointRow {
                index: r.index,
                x1: x[0],
                x2: x[1],
                lhs_avg: r.lhs,
                rhs_riesz: r.rhs,
                rel_err: r.rel_err,
            }
        })
        .collect()
}

fn write_inputs(w: &mut Writer, exp: &Experiment) -> Result<(), HarnessError> {
    w.put(
        "phi.grid",
        &GridFile::new(&exp.grid, vec![exp.model.phi().to_vec()]).to_bytes(),
    )?;
    let m = &exp.perturbation;
    w.put(
        "perturbation.grid",
        &GridFile::new(&exp.grid, vec![m.m11.clone(), m.m12.clone(), m.m22.clone()]).to_bytes(),
    )
}

#[derive(Debug, Serialize)]
struct SimulateReport<'a> {
    config_hash: &'a str,
    seed: u64,
    mode: &'static str,
    q: f64,
    nodes: usize,
    grid_n: usize,
    a: f64,
    median_rel_err: f64,
    points: Vec<PointRow>,
}

/// One realization across the frequency grid in the configured mode.
pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, HarnessError> {
    let mut manifest = RunManifest::begin("simulate", Some(cfg));
    let seed = source_seed(cfg.run.seed);
    manifest.seeds.push(seed);
    let exp = cfg.experiment(seed)?;
    let mut w = Writer::new(out)?;
    write_inputs(&mut w, &exp)?;
    manifest.stage("synthesize", &["phi.grid", "perturbation.grid"]);
    let mode = FieldMode::from(cfg.run.mode);
    let sw = sweep(&exp, &exp.freq, &[seed], mode).stage("sweep")?;
    let totals: Vec<Vec<_>> = sw.fields[0]
        .iter()
        .map(|row| row.iter().map(|p| p.u).collect())
        .collect();
    w.put(
        "fields.csv",
        fields_csv(&exp.freq.nodes(), &exp.points, &totals).as_bytes(),
    )?;
    manifest.stage("sweep", &["fields.csv"]);
    let lhs = sw.averaged(0, Part::Total, exp.m()).stage("average")?;
    let rhs = exp.riesz().stage("forward map")?;
    let rows = compare(&lhs, &rhs).stage("compare")?;
    let med = median(&rows.iter().map(|r| r.rel_err).collect::<Vec<_>>());
    let report = SimulateReport {
        config_hash: &manifest.config_hash,
        seed,
        mode: mode.name(),
        q: exp.freq.q(),
        nodes: exp.freq.len(),
        grid_n: exp.grid.n(),
        a: rhs.a,
        median_rel_err: med,
        points: point_rows(&exp, &rows),
    };
    w.put_json("simulate.json", &report)?;
    w.put("comparison.csv", comparison_csv(&rows).as_bytes())?;
    manifest.stage("compare", &["simulate.json", "comparison.csv"]);
    let summary = format!(
        "simulated {} frequencies, median relative error {med:.4}",
        exp.freq.len()
    );
    finish(manifest, w, None, summary)
}

#[derive(Debug, Serialize)]
struct EnsembleSummary {
    seeds: Vec<u64>,
    qs: Vec<f64>,
    median_rel_err: Vec<f64>,
    median_u1_ratio: Vec<f64>,
    rel_err: Vec<Vec<f64>>,
    u1_ratio: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize)]
struct Theorem1Json<'a> {
    config_hash: &'a str,
    seed: u64,
    mode: &'static str,
    q: f64,
    a: f64,
    tolerance: f64,
    median_rel_err: f64,
    q_trend: Vec<(f64, f64)>,
    points: Vec<PointRow>,
    u1_ratio: Vec<f64>,
    ensemble: Option<EnsembleSummary>,
    passed: bool,
}

/// Single-realization comparison at `Q`, `Q/2`, `Q/4`, plus the seed ensemble when configured.
pub fn verify_theorem1_cmd(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, HarnessError> {
    let expect = Expectations::frozen();
    let mut manifest = RunManifest::begin("verify-theorem1", Some(cfg));
    let seed = source_seed(cfg.run.seed);
    manifest.seeds.push(seed);
    let exp = cfg.experiment(seed)?;
    let mut w = Writer::new(out)?;
    write_inputs(&mut w, &exp)?;
    let mode = FieldMode::from(cfg.run.mode);
    let rep = verify_theorem1(&exp, mode).stage("verify")?;
    let mut passed = rep.median_rel_err <= expect.theorem1.tolerance;
    let mut summary = format!(
        "median relative error {:.4} at Q = {} (tolerance {})",
        rep.median_rel_err, rep.q, expect.theorem1.tolerance
    );
    let ensemble = if cfg.run.ensemble > 0 {
        let seeds = ensemble_seeds(cfg.run.seed, cfg.run.ensemble);
        manifest.seeds.extend(&seeds);
        let qs = trend_bands(exp.freq.q());
        let e = theorem1_ensemble(&exp, &seeds, &qs, mode).stage("ensemble")?;
        let med: Vec<f64> = (0..qs.len()).map(|b| e.median_rel_err(b)).collect();
        let last = med.len() - 1;
        let trend_ok = med[0] < med[last];
        passed &= trend_ok;
        let _ = write!(
            summary,
            "; ensemble median {:.4} at Q = {} vs {:.4} at Q = {}",
            med[0], qs[0], med[last], qs[last]
        );
        Some(EnsembleSummary {
            seeds,
            median_u1_ratio: (0..qs.len()).map(|b| e.median_u1_ratio(b)).collect(),
            qs,
            median_rel_err: med,
            rel_err: e.rel_err,
            u1_ratio: e.u1_ratio,
        })
    } else {
        None
    };
    let json = Theorem1Json {
        config_hash: &manifest.config_hash,
        seed,
        mode: mode.name(),
        q: rep.q,
        a: rep.a,
        tolerance: expect.theorem1.tolerance,
        median_rel_err: rep.median_rel_err,
        q_trend: rep.q_trend.clone(),
        points: point_rows(&exp, &rep.points),
        u1_ratio: rep.u1_ratio.clone(),
        ensemble,
        passed,
    };
    w.put_json("theorem1.json", &json)?;
    w.put("theorem1.csv", comparison_csv(&rep.points).as_bytes())?;
    manifest.stage(
        "verify",
        &[
            "phi.grid",
            "perturbation.grid",
            "theorem1.json",
            "theorem1.csv",
        ],
    );
    finish(manifest, w, Some(passed), summary)
}

#[derive(Debug, Serialize)]
struct U1Json<'a> {
    config_hash: &'a str,
    seed: u64,
    qs: Vec<f64>,
    median: Vec<f64>,
    per_point: Vec<Vec<f64>>,
    ensemble_median: Option<Vec<f64>>,
    threshold: f64,
    passed: bool,
}

/// `u1`/`u0` averaged-intensity ratios at `Q/4`, `Q/2`, `Q`.
pub fn u1_diagnostic_cmd(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, HarnessError> {
    let expect = Expectations::frozen();
    let mut manifest = RunManifest::begin("u1-diagnostic", Some(cfg));
    let seed = source_seed(cfg.run.seed);
    manifest.seeds.push(seed);
    let exp = cfg.experiment(seed)?;
    let mut w = Writer::new(out)?;
    let mut qs = trend_bands(exp.freq.q());
    qs.reverse();
    let rep = u1_diagnostic(&exp, &qs).stage("u1 diagnostic")?;
    let ensemble_median = if cfg.run.ensemble > 0 {
        let seeds = ensemble_seeds(cfg.run.seed, cfg.run.ensemble);
        manifest.seeds.extend(&seeds);
        let e = theorem1_ensemble(&exp, &seeds, &qs, FieldMode::BornOnly).stage("u1 ensemble")?;
        Some(
            (0..qs.len())
                .map(|b| e.median_u1_ratio(b))
                .collect::<Vec<_>>(),
        )
    } else {
        None
    };
    let trend = ensemble_median.as_ref().unwrap_or(&rep.median);
    let last = *rep.median.last().expect("bands");
    let decreasing = trend.windows(2).all(|p| p[1] < p[0]);
    let passed = last < expect.u1_ratio_max && decreasing;
    let summary = format!(
        "u1 ratio {last:.3e} at Q = {}; trend {trend:?}",
        qs[qs.len() - 1]
    );
    let json = U1Json {
        config_hash: &manifest.config_hash,
        seed,
        qs: qs.clone(),
        median: rep.median.clone(),
        per_point: rep.per_point.clone(),
        ensemble_median,
        threshold: expect.u1_ratio_max,
        passed,
    };
    w.put_json("u1.json", &json)?;
    let mut csv = String::from("q,point_index,ratio\n");
    for (q, row) in qs.iter().zip(&rep.per_point) {
        for (p, r) in row.iter().enumerate() {
            let _ = writeln!(csv, "{q:e},{p},{r:e}");
        }
    }
    w.put("u1.csv", csv.as_bytes())?;
    manifest.stage("u1 diagnostic", &["u1.json", "u1.csv"]);
    finish(manifest, w, Some(passed), summary)
}

#[derive(Debug, Serialize)]
struct RecoverJson<'a> {
    config_hash: &'a str,
    seed: u64,
    recovery_n: usize,
    reg: f64,
    residual: f64,
    rel_error: Option<f64>,
    threshold: f64,
    lcurve: Vec<(f64, f64, f64)>,
    passed: bool,
}

/// Averaged data at `Q` from one realization, inverted on the recovery grid.
pub fn recover_cmd(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, HarnessError> {
    let expect = Expectations::frozen();
    let mut manifest = RunManifest::begin("recover", Some(cfg));
    let seed = source_seed(cfg.run.seed);
    manifest.seeds.push(seed);
    let exp = cfg.experiment(seed)?;
    let coarse =
        SourceGrid::centered(cfg.run.recovery_n, cfg.grid.side).map_err(HarnessError::config)?;
    let truth = restrict_to(exp.model.phi(), &exp.grid, &coarse).map_err(|e| {
        HarnessError::Config(format!(
            "recovery grid {} must divide the source grid {}: {e}",
            coarse.n(),
            exp.grid.n()
        ))
    })?;
    let mut w = Writer::new(out)?;
    let sw = sweep(&exp, &exp.freq, &[seed], FieldMode::from(cfg.run.mode)).stage("sweep")?;
    let data: AveragedData = sw.averaged(0, Part::Total, exp.m()).stage("average")?;
    manifest.stage("sweep", &[]);
    let (rec, lcurve) = match cfg.run.reg {
        Some(reg) => (
            recover_phi(&data, &coarse, &exp.points, &exp.medium, reg, Some(&truth))
                .stage("recover")?,
            Vec::new(),
        ),
        None => recover_phi_lcurve(&data, &coarse, &exp.points, &exp.medium, Some(&truth))
            .stage("recover")?,
    };
    let err = rec.rel_error.expect("truth supplied");
    let passed = err < expect.recovery_rel_err_max;
    w.put(
        "phi_hat.grid",
        &GridFile::new(&coarse, vec![rec.phi_hat.clone()]).to_bytes(),
    )?;
    w.put(
        "phi_truth.grid",
        &GridFile::new(&coarse, vec![truth]).to_bytes(),
    )?;
    let mut csv = String::from("reg,misfit,seminorm\n");
    for p in &lcurve {
        let _ = writeln!(csv, "{:e},{:e},{:e}", p.reg, p.misfit, p.seminorm);
    }
    w.put("lcurve.csv", csv.as_bytes())?;
    let json = RecoverJson {
        config_hash: &manifest.config_hash,
        seed,
        recovery_n: coarse.n(),
        reg: rec.reg,
        residual: rec.residual,
        rel_error: rec.rel_error,
        threshold: expect.recovery_rel_err_max,
        lcurve: lcurve
            .iter()
            .map(|p| (p.reg, p.misfit, p.seminorm))
            .collect(),
        passed,
    };
    w.put_json("recover.json", &json)?;
    manifest.stage(
        "recover",
        &[
            "phi_hat.grid",
            "phi_truth.grid",
            "lcurve.csv",
            "recover.json",
        ],
    );
    let summary = format!("relative L2 error {err:.4} (reg {:.3e})", rec.reg);
    finish(manifest, w, Some(passed), summary)
}

/// `n,t,re,im,re_asym,im_asym,terms` for `H_n^{(1)}(t)` and its truncated expansion.
pub fn specfun_table(n: u32, t: f64, terms: usize) -> Result<String, HarnessError> {
    let order = HankelOrder::new(n).map_err(HarnessError::config)?;
    let h = hankel1(order, t).stage("hankel")?;
    let a = hankel1_asym(order, terms, t).stage("hankel asymptotic")?;
    Ok(format!(
        "n,t,re,im,re_asym,im_asym,terms\n{n},{t},{:.17e},{:.17e},{:.17e},{:.17e},{terms}\n",
        h.re, h.im, a.re, a.im
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct CovarianceReport {
    pub m: f64,
    pub samples: usize,
    pub grid_n: usize,
    pub seed: u64,
    /// `(distance, normalised covariance, stderr)`
    pub profile: Vec<(f64, f64, f64)>,
    /// Fitted `α` in `A r^α + B` (or the log coefficient at `m = 2`).
    pub fitted: f64,
    pub fitted_stderr: f64,
    pub expected: Option<f64>,
    pub passed: Option<bool>,
}

/// Empirical covariance profile at the centre of a bump `φ` on a 128² grid.
pub fn covariance_check(
    m: f64,
    samples: usize,
    seed: u64,
) -> Result<CovarianceReport, HarnessError> {
    let expect = Expectations::frozen();
    let g = SourceGrid::centered(128, 1.0).map_err(HarnessError::config)?;
    let b = Bump::new([0.0, 0.0], [0.176, 0.176], 1.0).map_err(HarnessError::config)?;
    let model = SourceModel::new(m, g.sample(|p| b.eval(p)), &g, source_seed(seed))
        .map_err(HarnessError::config)?;
    let synth = Synthesizer::new(&model, &g).stage("synthesize")?;
    let c = [50, 54, 58, 62];
    let bases: Vec<(usize, usize)> = c
        .iter()
        .flat_map(|&i| c.iter().map(move |&j| (i, j)))
        .collect();
    let offsets: Vec<usize> = (2..=16).collect();
    let profile = covariance_profile(&synth, samples, &bases, &offsets).stage("covariance")?;
    let pts: Vec<(f64, f64)> = profile.iter().map(|p| (p.0, p.1)).collect();
    let fit = structure_fit(&pts, m).stage("fit")?;
    let expected = (m > 2.0).then_some(m - 2.0);
    let passed = expected.map(|e| (fit.value - e).abs() <= expect.covariance_exponent_tol);
    Ok(CovarianceReport {
        m,
        samples,
        grid_n: g.n(),
        seed: model.seed(),
        profile,
        fitted: fit.value,
        fitted_stderr: fit.stderr,
        expected,
        passed,
    })
}

/// [`covariance_check`] with its report written to `out` (default `out`).
pub fn covariance_check_cmd(
    m: f64,
    samples: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<Outcome, HarnessError> {
    navier_core::randfield::check_order(m).map_err(HarnessError::config)?;
    let mut manifest = RunManifest::begin("covariance-check", None);
    let rep = covariance_check(m, samples, seed)?;
    manifest.seeds.push(rep.seed);
    let mut w = Writer::new(out.unwrap_or(Path::new("out")))?;
    w.put_json("covariance.json", &rep)?;
    let mut csv = String::from("distance,covariance,stderr\n");
    for (r, v, e) in &rep.profile {
        let _ = writeln!(csv, "{r:e},{v:e},{e:e}");
    }
    w.put("covariance.csv", csv.as_bytes())?;
    manifest.stage("covariance", &["covariance.json", "covariance.csv"]);
    let summary = match rep.expected {
        Some(e) => format!(
            "fitted exponent {:.4} ± {:.4}, expected {e:.2}",
            rep.fitted, rep.fitted_stderr
        ),
        None => format!(
            "fitted log coefficient {:.4} ± {:.4}",
            rep.fitted, rep.fitted_stderr
        ),
    };
    finish(manifest, w, rep.passed, summary)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;
    use std::fs;

    use super::*;
    use crate::config::Mode;
    use crate::gridio::sha256_hex;

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::standard();
        cfg.frequency.q = 6.0;
        cfg.frequency.nodes = 8;
        cfg.grid.n = Some(32);
        cfg.run.ensemble = 0;
        cfg.run.recovery_n = 8;
        cfg
    }

    fn digests(dir: &Path) -> BTreeMap<String, String> {
        fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.file_name().unwrap() != "manifest.json")
            .map(|p| {
                let name = p.file_name().unwrap().to_string_lossy().into_owned();
                (name, sha256_hex(&fs::read(&p).unwrap()))
            })
            .collect()
    }

    #[test]
    fn reruns_are_byte_identical() {
        let cfg = small();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        simulate(&cfg, a.path()).unwrap();
        simulate(&cfg, b.path()).unwrap();
        let da = digests(a.path());
        assert_eq!(da, digests(b.path()));
        assert!(da.contains_key("fields.csv") && da.contains_key("comparison.csv"));
    }

    #[test]
    fn outputs_do_not_depend_on_thread_count() {
        let cfg = small();
        let run = |threads: usize| {
            let dir = tempfile::tempdir().unwrap();
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| simulate(&cfg, dir.path())).unwrap();
            digests(dir.path())
        };
        assert_eq!(run(1), run(2));
    }

    #[test]
    fn manifest_lists_every_output() {
        let mut cfg = small();
        cfg.run.reg = Some(1e-6);
        let dir = tempfile::tempdir().unwrap();
        let out = recover_cmd(&cfg, dir.path()).unwrap();
        let on_disk = digests(dir.path());
        let listed: BTreeMap<String, String> = out
            .manifest
            .outputs
            .iter()
            .map(|o| (o.file.clone(), o.sha256.clone()))
            .collect();
        assert_eq!(listed, on_disk);
        let text = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        let back: RunManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(back.config_hash, crate::manifest::config_hash(&cfg));
        assert_eq!(back.seeds, vec![source_seed(cfg.run.seed)]);
    }

    #[test]
    fn u0_only_runs_without_a_perturbation_file() {
        let mut cfg = small();
        cfg.run.mode = Mode::U0Only;
        cfg.perturbation = crate::config::PerturbationSpec::File {
            path: "/nonexistent/m.grid".into(),
        };
        let dir = tempfile::tempdir().unwrap();
        let out = verify_theorem1_cmd(&cfg, dir.path()).unwrap();
        assert!(out.passed.is_some());
        assert!(dir.path().join("theorem1.json").exists());
    }

    #[test]
    fn specfun_row() {
        let csv = specfun_table(0, 1.0, 0).unwrap();
        let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        // H_0^(1)(1) = J_0(1) + i Y_0(1)
        assert!((row[2].parse::<f64>().unwrap() - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((row[3].parse::<f64>().unwrap() - 0.088_256_964_215_676_96).abs() < 1e-14);
        assert!(specfun_table(7, 1.0, 0).is_err());
    }

    #[test]
    fn acceptance_failure_maps_to_exit_code_four() {
        let o = Outcome {
            manifest: RunManifest::begin("x", None),
            passed: Some(false),
            summary: "bad".into(),
        };
        assert_eq!(o.into_result(true).unwrap_err().exit_code(), 4);
    }
}
