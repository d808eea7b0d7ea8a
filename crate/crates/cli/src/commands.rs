use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use ectctl::connectome::{load_edge_values, load_raw, prepare, qc_outliers, QcConfig, RawConnectome};
use ectctl::control::{controllability_profile, ControllabilityProfile};
use ectctl::dynamics::{
    compute_psi, ect_experiment_with_trace, stability_sweep, EctProtocol, PsiConfig, SignalTrace,
};
use ectctl::mlbench::{default_space, load_specs, read_feature_csv, run_benchmark, FeatureSet, Target};
use ectctl::replicate::{replicate, ReplicateConfig};
use ectctl::stats::{ancova, mediate, CohortTable, Column, Direction, MediationConfig};
use ectctl::synth::generate_cohort;

use crate::config::{
    AncovaArgs, Command, ControllabilityArgs, MediateArgs, MlbenchArgs, PsiArgs, QcArgs, ReplicateArgs,
    RunConfig, SimulateArgs, SynthArgs,
};
use crate::CliError;

const DEFAULT_SIMULATION_STEPS: usize = 4096;

fn analysis<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Analysis(e.to_string())
}

fn config<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Config(e.to_string())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(analysis)?;
    text.push('\n');
    std::fs::write(path, text).map_err(analysis)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path).map_err(analysis)?)))
}

fn column(name: &str) -> Result<Column, CliError> {
    name.parse().map_err(config)
}

fn columns(names: &Option<Vec<String>>) -> Result<Vec<Column>, CliError> {
    match names {
        None => Ok(Column::default_covariates()),
        Some(v) if v.len() == 1 && (v[0].is_empty() || v[0] == "none") => Ok(Vec::new()),
        Some(v) => v.iter().map(|s| column(s)).collect(),
    }
}

fn direction(cfg: &RunConfig) -> Result<Direction, CliError> {
    cfg.common
        .direction
        .as_deref()
        .map_or(Ok(Direction::Positive), |d| d.parse().map_err(config))
}

fn psi_config(cfg: &RunConfig, windows: Option<usize>) -> Result<PsiConfig, CliError> {
    let d = PsiConfig::default();
    let c = PsiConfig {
        window_seconds: cfg.common.psi_window.unwrap_or(d.window_seconds),
        guard_seconds: cfg.common.psi_guard.unwrap_or(d.guard_seconds),
        sampling_rate: cfg.common.fs.unwrap_or(d.sampling_rate),
        window_count: windows.unwrap_or(d.window_count),
    };
    c.validate().map_err(config)?;
    Ok(c)
}

fn threshold(cfg: &RunConfig) -> Result<u32, CliError> {
    match cfg.common.threshold {
        Some(0) => Err(CliError::Config("--threshold must be at least 1".into())),
        Some(t) => Ok(t),
        None => Ok(ectctl::connectome::DEFAULT_MIN_STREAMLINES),
    }
}

fn single_input(cfg: &RunConfig) -> Result<&Path, CliError> {
    match cfg.common.input.as_slice() {
        [one] => Ok(one),
        [] => Err(CliError::Config("--input is required".into())),
        _ => Err(CliError::Config("expected exactly one --input".into())),
    }
}

pub fn output_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg
        .common
        .output
        .clone()
        .ok_or_else(|| CliError::Config("--output is required".into()))?;
    std::fs::create_dir_all(&dir).map_err(analysis)?;
    Ok(dir)
}

/// Streamline matrices named by the inputs. A directory contributes its
/// `*_streamlines.csv` files (also under `matrices/`), or every `*.csv`
/// file if there are none.
fn matrix_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    if inputs.is_empty() {
        return Err(CliError::Config("--input is required".into()));
    }
    let mut out = Vec::new();
    for input in inputs {
        if !input.is_dir() {
            out.push(input.clone());
            continue;
        }
        let list = |dir: &Path| -> Result<Vec<PathBuf>, CliError> {
            let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
                .map_err(analysis)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "csv"))
                .collect();
            v.sort();
            Ok(v)
        };
        let mut files = list(input)?;
        let sub = input.join("matrices");
        if sub.is_dir() {
            files.extend(list(&sub)?);
        }
        let streamlines: Vec<PathBuf> = files
            .iter()
            .filter(|p| p.to_string_lossy().ends_with("_streamlines.csv"))
            .cloned()
            .collect();
        out.extend(if streamlines.is_empty() { files } else { streamlines });
    }
    if out.is_empty() {
        return Err(CliError::Analysis("no matrix files found".into()));
    }
    Ok(out)
}

fn subject_name(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    stem.strip_suffix("_streamlines").map(str::to_string).unwrap_or(stem)
}

fn load_subject(path: &Path) -> Result<RawConnectome, CliError> {
    let raw = load_raw(path).map_err(analysis)?;
    let name = path.to_string_lossy();
    if let Some(prefix) = name.strip_suffix("_streamlines.csv") {
        let fa = PathBuf::from(format!("{prefix}_fa.csv"));
        if fa.exists() {
            return raw.with_fa(load_edge_values(&fa).map_err(analysis)?).map_err(analysis);
        }
    }
    Ok(raw)
}

fn qc(cfg: &RunConfig, args: &QcArgs, out: &Path) -> Result<(), CliError> {
    let files = matrix_files(&cfg.common.input)?;
    let cohort: Vec<RawConnectome> = files.iter().map(|f| load_subject(f)).collect::<Result<_, _>>()?;
    let mut qcfg = if cohort.iter().all(|r| r.fa().is_some()) {
        QcConfig::default()
    } else {
        QcConfig::without_fa()
    };
    qcfg.min_streamlines = threshold(cfg)?;
    if let Some(k) = args.fence {
        if !(k >= 0.0) {
            return Err(CliError::Config("--fence must be nonnegative".into()));
        }
        qcfg.fence_multiplier = k;
    }
    let report = qc_outliers(&cohort, &qcfg).map_err(analysis)?;
    let names: Vec<String> = files.iter().map(|f| subject_name(f)).collect();
    let mut w = csv_writer(&out.join("qc.csv"))?;
    let mut header = vec!["subject".to_string()];
    header.extend(report.fences.iter().map(|f| json!(f.metric).as_str().unwrap_or_default().to_string()));
    header.push("flagged".into());
    w.write_record(&header).map_err(analysis)?;
    for s in &report.subjects {
        let mut row = vec![names[s.index].clone()];
        row.extend(s.values.iter().map(f64::to_string));
        row.push(s.flagged.to_string());
        w.write_record(&row).map_err(analysis)?;
    }
    w.flush().map_err(analysis)?;
    let flagged: Vec<&String> = report.flagged_indices().iter().map(|&i| &names[i]).collect();
    write_json(
        &out.join("qc.json"),
        &json!({ "subjects": names, "flagged": flagged, "config": qcfg, "report": report }),
    )
}

fn controllability(cfg: &RunConfig, args: &ControllabilityArgs, out: &Path) -> Result<(), CliError> {
    let files = matrix_files(&cfg.common.input)?;
    let t = threshold(cfg)?;
    let profiles: Vec<ControllabilityProfile> = files
        .iter()
        .map(|f| {
            let raw = load_raw(f).map_err(analysis)?;
            controllability_profile(&prepare(&raw, t).map_err(analysis)?).map_err(analysis)
        })
        .collect::<Result<_, _>>()?;
    let n = profiles.first().map_or(0, |p| p.n());
    if args.nodal && profiles.iter().any(|p| p.n() != n) {
        return Err(CliError::Analysis("nodal output needs equally sized matrices".into()));
    }
    let mut w = csv_writer(&out.join("controllability.csv"))?;
    w.write_record(ControllabilityProfile::csv_header(n, args.nodal)).map_err(analysis)?;
    for (f, p) in files.iter().zip(&profiles) {
        w.write_record(p.csv_row(&subject_name(f), args.nodal)).map_err(analysis)?;
    }
    w.flush().map_err(analysis)?;
    let rows: Vec<_> = files
        .iter()
        .zip(&profiles)
        .map(|(f, p)| json!({ "subject": subject_name(f), "mc_mean": p.mc_mean, "ac_mean": p.ac_mean, "edge_count": p.edge_count }))
        .collect();
    write_json(&out.join("controllability.json"), &rows)
}

fn simulate(cfg: &RunConfig, args: &SimulateArgs, out: &Path) -> Result<(), CliError> {
    let raw = load_raw(single_input(cfg)?).map_err(analysis)?;
    let m = prepare(&raw, threshold(cfg)?).map_err(analysis)?;
    let psi_cfg = psi_config(cfg, None)?;
    let d = EctProtocol::default();
    let protocol = EctProtocol {
        stimulus_steps: args.stimulus_steps.unwrap_or(d.stimulus_steps),
        control_nodes: args.control_nodes.clone(),
        background_power: args.background_power.unwrap_or(d.background_power),
        ..d
    };
    let amplitude = args.amplitude.unwrap_or(1.0);
    let steps = args.steps.unwrap_or(DEFAULT_SIMULATION_STEPS);
    if let Some(points) = args.sweep {
        if points < 2 {
            return Err(CliError::Config("--sweep needs at least 2 points".into()));
        }
        let fractions: Vec<f64> = (0..points)
            .map(|i| 0.1 + 0.8 * i as f64 / (points - 1) as f64)
            .collect();
        let sweep = stability_sweep(&m, &fractions, amplitude, &protocol, &psi_cfg, steps).map_err(analysis)?;
        let mut w = csv_writer(&out.join("sweep.csv"))?;
        for p in &sweep {
            w.serialize(p).map_err(analysis)?;
        }
        w.flush().map_err(analysis)?;
        return write_json(&out.join("sweep.json"), &sweep);
    }
    let (outcome, trace) =
        ect_experiment_with_trace(&m, amplitude, &protocol, &psi_cfg, steps).map_err(analysis)?;
    trace
        .write_csv(BufWriter::new(File::create(out.join("trace.csv")).map_err(analysis)?))
        .map_err(analysis)?;
    write_json(
        &out.join("simulation.json"),
        &json!({ "amplitude": amplitude, "steps": steps, "protocol": protocol, "outcome": outcome }),
    )
}

fn psi(cfg: &RunConfig, args: &PsiArgs, out: &Path) -> Result<(), CliError> {
    let psi_cfg = psi_config(cfg, args.windows)?;
    let endpoint = args
        .endpoint
        .ok_or_else(|| CliError::Config("--endpoint is required".into()))?;
    let col = args.column.as_deref().unwrap_or("output");
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(single_input(cfg)?)
        .map_err(analysis)?;
    let idx = rdr
        .headers()
        .map_err(analysis)?
        .iter()
        .position(|h| h == col)
        .ok_or_else(|| CliError::Analysis(format!("trace has no column {col:?}")))?;
    let samples: Vec<f64> = rdr
        .records()
        .map(|r| {
            let r = r.map_err(analysis)?;
            r.get(idx)
                .unwrap_or_default()
                .parse::<f64>()
                .map_err(|e| CliError::Analysis(format!("bad sample: {e}")))
        })
        .collect::<Result<_, _>>()?;
    let trace = if args.amplitude {
        SignalTrace::from_amplitude(samples, psi_cfg.sampling_rate)
    } else {
        SignalTrace::from_power(samples, psi_cfg.sampling_rate)
    }
    .with_seizure_end(endpoint);
    let result = compute_psi(&trace, &psi_cfg).map_err(analysis)?;
    write_json(
        &out.join("psi.json"),
        &json!({ "psi_percent": result.percent(), "config": psi_cfg, "result": result }),
    )
}

fn cohort(cfg: &RunConfig) -> Result<CohortTable, CliError> {
    CohortTable::read_csv(single_input(cfg)?).map_err(analysis)
}

fn ancova_cmd(cfg: &RunConfig, args: &AncovaArgs, out: &Path) -> Result<(), CliError> {
    let dep = column(args.dependent.as_deref().unwrap_or("psi"))?;
    let indep = column(
        args.independent
            .as_deref()
            .ok_or_else(|| CliError::Config("--independent is required".into()))?,
    )?;
    let covs = columns(&cfg.common.covariates)?;
    let dir = direction(cfg)?;
    let result = ancova(&cohort(cfg)?, dep, indep, &covs, dir).map_err(analysis)?;
    write_json(
        &out.join("ancova.json"),
        &json!({ "dependent": dep, "independent": indep, "covariates": covs, "result": result }),
    )
}

fn mediation_config(cfg: &RunConfig) -> MediationConfig {
    let d = MediationConfig::default();
    MediationConfig {
        n_boot: cfg.common.n_boot.unwrap_or(d.n_boot),
        n_perm: cfg.common.n_perm.unwrap_or(d.n_perm),
        seed: cfg.common.seed.unwrap_or(d.seed),
        alpha: d.alpha,
    }
}

fn mediate_cmd(cfg: &RunConfig, args: &MediateArgs, out: &Path) -> Result<(), CliError> {
    let x = column(args.x.as_deref().unwrap_or("mc_mean"))?;
    let m = column(args.m.as_deref().unwrap_or("psi"))?;
    let y = column(args.y.as_deref().unwrap_or("response"))?;
    let covs = columns(&cfg.common.covariates)?;
    let mcfg = mediation_config(cfg);
    let result = mediate(&cohort(cfg)?, x, m, y, &covs, &mcfg).map_err(analysis)?;
    write_json(
        &out.join("mediation.json"),
        &json!({ "x": x, "m": m, "y": y, "covariates": covs, "config": mcfg, "result": result }),
    )
}

fn mlbench(cfg: &RunConfig, args: &MlbenchArgs, out: &Path) -> Result<(), CliError> {
    let table = cohort(cfg)?;
    let target_col = column(args.target.as_deref().unwrap_or("response"))?;
    let singles: Vec<Column> = match &args.single {
        None => vec![Column::McMean, Column::AcMean],
        Some(v) => v.iter().map(|s| column(s)).collect::<Result<_, _>>()?,
    };
    let mut wanted = vec![target_col];
    wanted.extend(&singles);
    let mut ids = Vec::new();
    let mut cols = vec![Vec::new(); wanted.len()];
    for r in &table.records {
        if let Some(vals) = wanted.iter().map(|&c| r.get(c)).collect::<Option<Vec<f64>>>() {
            ids.push(r.subject_id.clone());
            for (dst, v) in cols.iter_mut().zip(vals) {
                dst.push(v);
            }
        }
    }
    let target = Target {
        subject_ids: ids.clone(),
        values: cols[0].clone(),
    };
    let modalities: Vec<FeatureSet> = args
        .features
        .iter()
        .map(|spec| {
            let (name, path) = spec
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--features expects name=path, got {spec:?}")))?;
            let file = File::open(path).map_err(analysis)?;
            let fs = read_feature_csv(name, file).map_err(analysis)?;
            // restrict to the subjects that have a target, in target order
            let rows: Vec<usize> = ids
                .iter()
                .map(|id| {
                    fs.subject_ids
                        .iter()
                        .position(|s| s == id)
                        .ok_or_else(|| CliError::Analysis(format!("{name}: no row for subject {id}")))
                })
                .collect::<Result<_, _>>()?;
            Ok(FeatureSet {
                name: fs.name.clone(),
                subject_ids: ids.clone(),
                matrix: fs.matrix.select_rows(rows.iter()),
            })
        })
        .collect::<Result<_, CliError>>()?;
    let seed = cfg.common.seed.unwrap_or(0);
    let specs = match &args.spec {
        Some(p) => load_specs(p).map_err(config)?,
        None => default_space(seed),
    };
    let single: Vec<(String, Vec<f64>)> = singles
        .iter()
        .zip(&cols[1..])
        .map(|(c, v)| (c.to_string(), v.clone()))
        .collect();
    let table = run_benchmark(&specs, &modalities, &target, &single).map_err(analysis)?;
    table
        .write_rows_csv(BufWriter::new(File::create(out.join("benchmark.csv")).map_err(analysis)?))
        .map_err(analysis)?;
    write_json(
        &out.join("benchmark.json"),
        &json!({ "pipelines": specs, "table": table }),
    )
}

fn synth(cfg: &RunConfig, args: &SynthArgs, out: &Path) -> Result<(), CliError> {
    let mut spec = args.cohort.clone().unwrap_or_default();
    if let Some(n) = args.n_subjects {
        spec.n_subjects = n;
    }
    if let Some(n) = args.n_nodes {
        spec.n_nodes = n;
    }
    if let Some(s) = cfg.common.seed {
        spec.seed = s;
    }
    if cfg.common.threshold.is_some() {
        spec.min_streamlines = threshold(cfg)?;
    }
    spec.validate().map_err(config)?;
    let cohort = generate_cohort(&spec).map_err(analysis)?;
    cohort.write_dir(out).map_err(analysis)?;
    Ok(())
}

fn replicate_cmd(cfg: &RunConfig, args: &ReplicateArgs, out: &Path) -> Result<(), CliError> {
    let rcfg = ReplicateConfig {
        covariates: columns(&cfg.common.covariates)?,
        mediation: mediation_config(cfg),
        alpha: args.alpha.unwrap_or(0.05),
    };
    if !(rcfg.alpha > 0.0 && rcfg.alpha < 1.0) {
        return Err(CliError::Config("--alpha must lie in (0, 1)".into()));
    }
    let report = replicate(&cohort(cfg)?, &rcfg).map_err(analysis)?;
    write_json(
        &out.join("report.json"),
        &json!({ "all_significant": report.all_significant(), "report": report }),
    )
}

/// Runs the subcommand, writing its artifacts and `manifest.json` into the
/// output directory.
pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let out = output_dir(cfg)?;
    let manifest = json!({
        "tool": "ectctl",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": cfg.command.name(),
        "seed": cfg.common.seed,
        "config": cfg.to_value()?,
    });
    match &cfg.command {
        Command::Qc(a) => qc(cfg, a, &out),
        Command::Controllability(a) => controllability(cfg, a, &out),
        Command::Simulate(a) => simulate(cfg, a, &out),
        Command::Psi(a) => psi(cfg, a, &out),
        Command::Ancova(a) => ancova_cmd(cfg, a, &out),
        Command::Mediate(a) => mediate_cmd(cfg, a, &out),
        Command::Mlbench(a) => mlbench(cfg, a, &out),
        Command::Synth(a) => synth(cfg, a, &out),
        Command::Replicate(a) => replicate_cmd(cfg, a, &out),
    }?;
    write_json(&out.join("manifest.json"), &manifest)
}
