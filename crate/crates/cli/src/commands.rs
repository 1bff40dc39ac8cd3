//! Subcommand implementations. Every artifact carries a metadata block
//! with the tool version and a hash of the exact configuration it came
//! from, and identical (config, seed) inputs produce identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use momentlyap::analytic::{
    self, convergence_bounds, critical_value, diagram_to_csv, iteration_l2, scalar_lp_approx,
    scalar_moment_exact, stability_diagram,
};
use momentlyap::dynamics::{estimate_moments, exact_l2, fit_lyapunov, log_state_histogram};
use momentlyap::ensemble::{scatter_study, EnsembleSpec, Metric};
use momentlyap::matrix::MatrixSpec;
use momentlyap::noise::{epsilon_squared, NoiseModel};
use momentlyap::report::{stability_report, ReportParams};
use momentlyap::spectral::spectral_summary;
use momentlyap::structure::classify;
use serde_json::json;

use crate::args::Args;
use crate::config::ExperimentConfig;
use crate::CliError;

pub const USAGE: &str = "usage: momentlyap <subcommand> [flags]

subcommands:
  simulate  --config PATH [--seed N] [--out DIR]   moment series CSV
  lyapunov  --config PATH [--seed N] [--out DIR]   fitted exponents JSON
  iterate   --config PATH [--out DIR]              iteration-method JSON
  critical  --config PATH [--seed N] [--out DIR]   critical-value JSON
  phase     --n N --noise UH|T --grid K [--out DIR]  stability diagram CSV
  bounds    --config PATH [--seed N] [--out DIR]   convergence bounds JSON
  classify  --matrix PATH.csv [--out DIR]          classification JSON
  ensemble  --spec PATH.json --seed N [--metrics M] [--out DIR]  scatter CSV
  scalar    --a A --b2 B2 [--p P] [--t-max T] [--dist D] [--out DIR]
  report    --config PATH [--seed N] [--out DIR]   full stability report
  histogram --config PATH [--t T] [--seed N] [--out DIR]  log-state samples

common flags: --threads N (must not affect results)";

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

struct Meta {
    config_hash: String,
    seed: Option<u64>,
}

impl Meta {
    fn new(config_bytes: &[u8], seed: Option<u64>) -> Self {
        Self { config_hash: format!("{:016x}", fnv1a(config_bytes)), seed }
    }

    fn csv_header(&self) -> String {
        let mut s = format!(
            "# tool: momentlyap {}\n# config_hash: {}\n",
            env!("CARGO_PKG_VERSION"),
            self.config_hash
        );
        if let Some(seed) = self.seed {
            s.push_str(&format!("# seed: {seed}\n"));
        }
        s
    }

    fn json_value(&self) -> serde_json::Value {
        let mut v = json!({
            "tool": format!("momentlyap {}", env!("CARGO_PKG_VERSION")),
            "config_hash": self.config_hash,
        });
        if let Some(seed) = self.seed {
            v["seed"] = json!(seed);
        }
        v
    }
}

fn out_dir(args: &Args, cfg_dir: Option<&str>) -> Result<PathBuf, CliError> {
    let dir = args
        .get("out")
        .map(str::to_string)
        .or_else(|| cfg_dir.map(str::to_string))
        .unwrap_or_else(|| ".".into());
    let path = PathBuf::from(dir);
    fs::create_dir_all(&path).map_err(CliError::Io)?;
    Ok(path)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(CliError::Io)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn load_config(args: &Args) -> Result<(ExperimentConfig, Vec<u8>, u64), CliError> {
    let path = args.require("config").map_err(CliError::Usage)?;
    let bytes = fs::read(path).map_err(CliError::Io)?;
    let text = String::from_utf8_lossy(&bytes);
    let mut cfg = ExperimentConfig::parse(&text).map_err(CliError::Config)?;
    let seed = match args.get_parsed::<u64>("seed").map_err(CliError::Usage)? {
        Some(s) => {
            cfg.run.seed = s;
            s
        }
        None => cfg.run.seed,
    };
    Ok((cfg, bytes.to_vec(), seed))
}

fn json_output(meta: &Meta, payload: serde_json::Value) -> String {
    let doc = json!({ "meta": meta.json_value(), "data": payload });
    let mut s = serde_json::to_string_pretty(&doc).expect("serializable payload");
    s.push('\n');
    s
}

pub fn simulate(args: &Args) -> Result<(), CliError> {
    args.known_flags(&["config", "seed", "out", "threads"]).map_err(CliError::Usage)?;
    let (cfg, bytes, seed) = load_config(args)?;
    let dir = out_dir(args, cfg.output.directory.as_deref())?;
    let meta = Meta::new(&bytes, Some(seed));
    let series = estimate_moments(&cfg.system, &cfg.run.p_list, cfg.run.t_max, cfg.run.runs, seed)
        .map_err(CliError::Numerical)?;
    let csv = format!("{}{}", meta.csv_header(), series.to_csv());
    write_file(&dir.join("series.csv"), &csv)
}

pub fn lyapunov(args: &Args) -> Result<(), CliError> {
    args.known_flags(&["config", "seed", "out", "threads"]).map_err(CliError::Usage)?;
    let (cfg, bytes, seed) = load_config(args)?;
    let dir = out_dir(args, cfg.output.directory.as_deref())?;
    let meta = Meta::new(&bytes, Some(seed));
    let series = estimate_moments(&cfg.system, &cfg.run.p_list, cfg.run.t_max, cfg.run.runs, seed)
        .map_err(CliError::Numerical)?;
    let mut fits = Vec::new();
    for &p in &cfg.run.p_list {
        let fit = fit_lyapunov(&series, p, cfg.run.fit_window).map_err(CliError::Numerical)?;
        fits.push(fit);
    }
    let payload = json!({ "fits": fits, "runs": cfg.run.runs, "t_max": cfg.run.t_max });
    write_file(&dir.join("lyapunov.json"), &json_output(&meta, payload))?;
    if cfg.wants_format("csv") {
        let csv = format!("{}{}", meta.csv_header(), series.to_csv());
        write_file(&dir.join("series.csv"), &csv)?;
    }
    Ok(())
}

pub fn iterate(args: &Args) -> Result<(), CliError> {
    args.known_flags(&["config", "out", "threads", "seed"]).map_err(CliError::Usage)?;
    let (cfg, bytes, _) = load_config(args)?;
    let dir = out_dir(args, cfg.output.directory.as_deref())?;
    let meta = Meta::new(&bytes, None);
    let r_max = cfg.analysis.r.max(1);
    let summary =
        spectral_summary(&cfg.system.a, r_max).map_err(CliError::Numerical)?;
    let stats =
        epsilon_squared(&cfg.system.noise, &summary, &cfg.system.a).map_err(CliError::Numerical)?;
    let mut per_order = Vec::new();
    for r in 1..=r_max {
        match iteration_l2(&summary, &stats, &cfg.system.noise, r) {
            Ok(est) => per_order.push(json!({ "r": r, "l2": est.value })),
            Err(e) => {
                per_order.push(json!({ "r": r, "error": e.to_string() }));
                break;
            }
        }
    }
    let exact = exact_l2(&cfg.system).ok();
    let payload = json!({
        "lambda": summary.lambda,
        "alpha": summary.alpha,
        "eps2": stats.eps2,
        "iteration": per_order,
        "l2_exact": exact,
    });
    write_file(&dir.join("iteration.json"), &json_output(&meta, payload))
}

pub fn critical(args: &Args) -> Result<(), CliError> {
    args.known_flags(&["config", "seed", "out", "threads"]).map_err(CliError::Usage)?;
    let (cfg, bytes, seed) = load_config(args)?;
    let dir = out_dir(args, cfg.output.directory.as_deref())?;
    let meta = Meta::new(&bytes, Some(seed));
    let summary = spectral_summary(&cfg.system.a, cfg.analysis.r.max(1))
        .map_err(CliError::Numerical)?;
    let stats =
        epsilon_squared(&cfg.system.noise, &summary, &cfg.system.a).map_err(CliError::Numerical)?;
    let report = critical_value(&cfg.system.a, &summary, &stats, &cfg.system.noise, seed)
        .map_err(CliError::Numerical)?;
    let payload = serde_json::to_value(&report).expect("serializable report");
    write_file(&dir.join("critical.json"), &json_output(&meta, payload))
}

pub fn phase(args: &Args) -> Result<(), CliError> {
    args.known_flags(&["config", "n", "noise", "grid", "out", "threads"])
        .map_err(CliError::Usage)?;
    let (n, model, grid, meta) = if args.get("config").is_some() {
        let (cfg, bytes, _) = load_config(args)?;
        let grid = cfg.analysis.lambda_grid.clone().ok_or_else(|| {
            CliError::Config("phase via --config needs analysis.lambda_grid".into())
        })?;
        (cfg.system.a.dim(), cfg.system.noise, grid, Meta::new(&bytes, None))
    } else {
        let n: usize = args
            .get_parsed("n")
            .map_err(CliError::Usage)?
            .ok_or_else(|| CliError::Usage("phase needs --n".into()))?;
        let kind = args.require("noise").map_err(CliError::Usage)?;
        let model = match kind {
            "UH" => NoiseModel::uh(0.0),
            "T" => NoiseModel::t(0.0),
            other => {
                return Err(CliError::Usage(format!(
                    "phase supports UH and T noise, got {other:?}"
                )))
            }
        };
        let points: usize = args
            .get_parsed("grid")
            .map_err(CliError::Usage)?
            .ok_or_else(|| CliError::Usage("phase needs --grid".into()))?;
        if points == 0 {
            return Err(CliError::Usage("grid must have at least one point".into()));
        }
        let grid: Vec<f64> =
            (1..=points).map(|i| i as f64 / (points + 1) as f64).collect();
        let id = format!("phase-n{n}-{kind}-grid{points}");
        (n, model, grid, Meta::new(id.as_bytes(), None))
    };
    let dir = out_dir(args, None)?;
    let rows = stability_diagram(n, &model, &grid).map_err(CliError::Numerical)?;
    let csv = format!("{}{}", meta.csv_header(), diagram_to_csv(&rows));
    write_file(&dir.join("phase.csv"), &csv)
}

pub fn bounds(args: &Args) -> Result<(), CliError> {
    args.known_flags(&["config", "seed", "out", "threads"]).map_err(CliError::Usage)?;
    let (cfg, bytes, seed) = load_config(args)?;
    let dir = out_dir(args, cfg.output.directory.as_deref())?;
    let meta = Meta::new(&bytes, Some(seed));
    let report =
        convergence_bounds(&cfg.system.a, &cfg.system.noise, seed).map_err(CliError::Numerical)?;
    let payload = serde_json::to_value(&report).expect("serializable bounds");
    write_file(&dir.join("bounds.json"), &json_output(&meta, payload))
}

pub fn classify_cmd(args: &Args) -> Result<(), CliError> {
    args.known_flags(&["matrix", "out", "threads"]).map_err(CliError::Usage)?;
    let path = args.require("matrix").map_err(CliError::Usage)?;
    let bytes = fs::read(path).map_err(CliError::Io)?;
    let matrix =
        MatrixSpec::from_csv(&String::from_utf8_lossy(&bytes)).map_err(|e| CliError::Config(e.to_string()))?;
    let verdict = classify(&matrix).map_err(CliError::Numerical)?;
    let meta = Meta::new(&bytes, None);
    let text = json_output(&meta, serde_json::to_value(&verdict).expect("serializable verdict"));
    print!("{text}");
    if args.get("out").is_some() {
        let dir = out_dir(args, None)?;
        write_file(&dir.join("classification.json"), &text)?;
    }
    Ok(())
}

pub fn ensemble_cmd(args: &Args) -> Result<(), CliError> {
    args.known_flags(&["spec", "seed", "metrics", "out", "threads"])
        .map_err(CliError::Usage)?;
    let path = args.require("spec").map_err(CliError::Usage)?;
    let bytes = fs::read(path).map_err(CliError::Io)?;
    let spec: EnsembleSpec = serde_json::from_str(&String::from_utf8_lossy(&bytes))
        .map_err(|e| CliError::Config(format!("ensemble spec: {e}")))?;
    let seed: u64 = args
        .get_parsed("seed")
        .map_err(CliError::Usage)?
        .ok_or_else(|| CliError::Usage("ensemble needs --seed".into()))?;
    let metrics = match args.get("metrics") {
        None => vec![Metric::Gap, Metric::Kappa, Metric::Henrici, Metric::SigmaA],
        Some(list) => list
            .split(',')
            .map(|tok| match tok.trim() {
                "gap" => Ok(Metric::Gap),
                "kappa" => Ok(Metric::Kappa),
                "henrici" => Ok(Metric::Henrici),
                "sigma_a" => Ok(Metric::SigmaA),
                other => Err(CliError::Usage(format!("unknown metric {other:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()?,
    };
    let dir = out_dir(args, None)?;
    let meta = Meta::new(&bytes, Some(seed));
    let table = scatter_study(&spec, &metrics, seed).map_err(CliError::Numerical)?;
    let csv = format!("{}{}", meta.csv_header(), table.to_csv());
    write_file(&dir.join("scatter.csv"), &csv)
}

pub fn scalar(args: &Args) -> Result<(), CliError> {
    args.known_flags(&["a", "b2", "p", "t-max", "dist", "x0", "out", "threads"])
        .map_err(CliError::Usage)?;
    let a: f64 = args
        .get_parsed("a")
        .map_err(CliError::Usage)?
        .ok_or_else(|| CliError::Usage("scalar needs --a".into()))?;
    let b2: f64 = args
        .get_parsed("b2")
        .map_err(CliError::Usage)?
        .ok_or_else(|| CliError::Usage("scalar needs --b2".into()))?;
    let p_max: u32 = args.get_parsed("p").map_err(CliError::Usage)?.unwrap_or(4);
    let t_max: usize = args.get_parsed("t-max").map_err(CliError::Usage)?.unwrap_or(30);
    let x0: f64 = args.get_parsed("x0").map_err(CliError::Usage)?.unwrap_or(1.0);
    let dist = args.get("dist").unwrap_or("normal");
    let ratios = match dist {
        "normal" => analytic::normal_moment_ratios(a, b2, p_max),
        "uniform" => analytic::uniform_moment_ratios(a, b2, p_max),
        other => return Err(CliError::Usage(format!("unknown dist {other:?}"))),
    };
    let dir = out_dir(args, None)?;
    let id = format!("scalar-a{a}-b2{b2}-p{p_max}-t{t_max}-{dist}-x0{x0}");
    let meta = Meta::new(id.as_bytes(), None);

    let mut csv = format!("{}t,p,moment\n", meta.csv_header());
    for t in 0..=t_max {
        for p in 1..=p_max {
            let v = scalar_moment_exact(a, &ratios, p, t, x0).map_err(CliError::Numerical)?;
            csv.push_str(&format!("{t},{p},{v}\n"));
        }
    }
    write_file(&dir.join("scalar_moments.csv"), &csv)?;

    let mut approx = Vec::new();
    for p in 1..=p_max {
        let est = scalar_lp_approx(a, b2, p).map_err(CliError::Numerical)?;
        approx.push(est);
    }
    let payload = json!({
        "l2_exact": (a * a + b2).ln(),
        "lp_approx": approx,
    });
    write_file(&dir.join("scalar.json"), &json_output(&meta, payload))
}

pub fn report(args: &Args) -> Result<(), CliError> {
    args.known_flags(&["config", "seed", "out", "threads"]).map_err(CliError::Usage)?;
    let (cfg, bytes, seed) = load_config(args)?;
    let dir = out_dir(args, cfg.output.directory.as_deref())?;
    let meta = Meta::new(&bytes, Some(seed));
    let params = ReportParams {
        t_max: cfg.run.t_max,
        runs: cfg.run.runs,
        seed,
        fit_window: cfg.run.fit_window,
        iteration_order: cfg.analysis.r,
    };
    let (mut rep, series) = stability_report(&cfg.system, &params).map_err(CliError::Numerical)?;
    if !cfg.wants_method("mc") {
        rep.l2_mc = None;
    }
    if !cfg.wants_method("exact") {
        rep.l2_exact = None;
    }
    if !cfg.wants_method("perturbation") {
        rep.l2_perturbation = None;
    }
    if !cfg.wants_method("iteration") {
        rep.l2_iteration = None;
    }
    if !cfg.wants_method("large_noise") {
        rep.l2_large_noise = None;
    }
    if !cfg.wants_method("critical") {
        rep.critical = None;
    }
    if cfg.wants_format("json") {
        let payload = serde_json::to_value(&rep).expect("serializable report");
        write_file(&dir.join("report.json"), &json_output(&meta, payload))?;
    }
    if cfg.wants_format("csv") {
        let csv = format!("{}{}", meta.csv_header(), series.to_csv());
        write_file(&dir.join("series.csv"), &csv)?;
    }
    Ok(())
}

pub fn histogram(args: &Args) -> Result<(), CliError> {
    args.known_flags(&["config", "t", "seed", "out", "threads"]).map_err(CliError::Usage)?;
    let (cfg, bytes, seed) = load_config(args)?;
    let t: usize = args
        .get_parsed("t")
        .map_err(CliError::Usage)?
        .unwrap_or(cfg.run.t_max);
    let dir = out_dir(args, cfg.output.directory.as_deref())?;
    let meta = Meta::new(&bytes, Some(seed));
    let hist =
        log_state_histogram(&cfg.system, t, cfg.run.runs, seed).map_err(CliError::Numerical)?;
    let mut csv = format!("{}sample\n", meta.csv_header());
    for s in &hist.samples {
        csv.push_str(&format!("{s}\n"));
    }
    write_file(&dir.join("histogram.csv"), &csv)?;
    let payload = json!({
        "t": hist.t,
        "runs": hist.runs,
        "excluded_sign_flips": hist.excluded,
        "fit": { "mean": hist.mean, "sd": hist.sd },
    });
    write_file(&dir.join("histogram.json"), &json_output(&meta, payload))
}
