use clap::{Args, Parser, Subcommand, ValueEnum};
use ghostsim::arrayfile::{write_csv, ArrayFile, ArrayHeader, AxisScale};
use ghostsim::artifacts::{compare_files, estimate_array, oracle_array, reconstruction_array, x_coords, CompareOptions};
use ghostsim::config::{Config, EstimatorKind, Geometry};
use ghostsim::experiment::{ExecutionMode, Experiment, IdlerPath, ProbeKind, RunOutput};
use ghostsim::gain::correlation_scan;
use ghostsim::lattice::{Plane, PlaneKind, C64};
use ghostsim::oracle::{fit_gaussian, Integration, OracleCurve, TemporalMode};
use ghostsim::plot::{write_line_plot, Series};
use ghostsim::wigner::{sample_vacuum, ShotSeed};
use ghostsim::{Error, Result};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Ghost imaging with homodyne detection of parametric down-conversion:
/// stochastic simulation and analytic reference curves.
#[derive(Parser, Debug)]
#[command(name = "ghostsim", version)]
struct Cli {
    /// TOML configuration file (defaults to the reference configuration).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set grid.nx=256`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Number of shots.
    #[arg(long, global = true)]
    shots: Option<usize>,
    /// Master random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the shot loop.
    #[arg(long, env = "GHOSTSIM_THREADS", global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "ghostsim-out")]
    out: PathBuf,
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the stochastic experiment and write estimates, oracle curves and a report.
    Run(RunArgs),
    /// Write the analytic correlation curve for a geometry.
    Oracle(OracleArgs),
    /// Compare an estimate file with a reference file.
    Compare(CompareArgs),
    /// Dump the gain functions and derived scales.
    Gain,
    /// Recover the near field from a far-field quadrature pair.
    Reconstruct(ReconstructArgs),
}

#[derive(Args, Debug, Clone)]
struct PlanArgs {
    /// Detection geometry: pf, pf-scan, pT, p2f, bucket-near, bucket-far.
    #[arg(long)]
    geometry: Option<String>,
    /// Estimator (defaults to the configuration, or bucket for bucket geometries).
    #[arg(long, value_enum)]
    estimator: Option<EstimatorArg>,
    /// Write an SVG overlay plot.
    #[arg(long)]
    plot: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    plan: PlanArgs,
    /// Run the shots on the calling thread only.
    #[arg(long)]
    sequential: bool,
    /// Skip the analytic reference curve.
    #[arg(long)]
    no_oracle: bool,
    #[command(flatten)]
    oracle: OracleOpts,
    /// Comparison region `lo:hi` in plane units of the estimate.
    #[arg(long, value_parser = parse_region)]
    region: Option<(f64, f64)>,
    /// Tolerance on the peak-normalised relative L2 error reported as pass/fail.
    #[arg(long, default_value_t = 0.1)]
    tolerance: f64,
    /// Also dump the crystal output of this shot.
    #[arg(long, value_name = "SHOT")]
    dump_shot: Option<u64>,
}

#[derive(Args, Debug, Clone)]
struct OracleOpts {
    /// Temporal factor of the reference curve.
    #[arg(long, value_enum)]
    temporal: Option<TemporalArg>,
    /// Lattice sums or refined continuum integrals.
    #[arg(long, value_enum)]
    integration: Option<IntegrationArg>,
    /// Replace the gain by its plateau approximation.
    #[arg(long)]
    plateau: bool,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[command(flatten)]
    plan: PlanArgs,
    #[command(flatten)]
    oracle: OracleOpts,
}

#[derive(Args, Debug)]
struct CompareArgs {
    estimate: PathBuf,
    reference: PathBuf,
    #[arg(long, value_parser = parse_region)]
    region: Option<(f64, f64)>,
    #[arg(long, default_value_t = 0.1)]
    tolerance: f64,
    /// Compare files from different configurations.
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct ReconstructArgs {
    /// Far-field file with `real` and `imag` components.
    input: PathBuf,
    /// Accept a file whose far-field scale differs from the configuration's lens.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Fixed,
    Scan,
    Bucket,
    Convolution,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TemporalArg {
    Cw,
    Pulsed,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum IntegrationArg {
    Lattice,
    Continuum,
}

fn parse_region(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or("expected lo:hi")?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if a > b {
        return Err("region lower bound exceeds upper bound".into());
    }
    Ok((a, b))
}

fn parse_geometry(s: &str) -> Result<(Geometry, Option<EstimatorKind>)> {
    Ok(match s {
        "pf" | "pointlike-far" => (Geometry::PointlikeFar, None),
        "pf-scan" => (Geometry::PointlikeFar, Some(EstimatorKind::Scan)),
        "pT" | "pt" | "pointlike-near" => (Geometry::PointlikeNear, None),
        "p2f" | "pointlike-near-2f" => (Geometry::PointlikeNear2f, None),
        "bucket-near" => (Geometry::BucketNear, Some(EstimatorKind::Bucket)),
        "bucket-far" => (Geometry::BucketFar, Some(EstimatorKind::Bucket)),
        other => return Err(Error::Config(format!("unknown geometry {other:?}"))),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("ghostsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<ExitCode> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Run(a) => run(cli, cfg, a),
        Command::Oracle(a) => oracle_cmd(cli, cfg, a),
        Command::Compare(a) => compare_cmd(a),
        Command::Gain => gain_cmd(cli, cfg),
        Command::Reconstruct(a) => reconstruct_cmd(cli, cfg, a),
    }
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut cfg = Config::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(n) = cli.shots {
        cfg.run.shots = n;
    }
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        cfg.run.threads = Some(t);
    }
    Ok(cfg)
}

fn apply_plan(cfg: &mut Config, plan: &PlanArgs) -> Result<()> {
    if let Some(g) = &plan.geometry {
        let (geometry, implied) = parse_geometry(g)?;
        cfg.experiment.geometry = geometry;
        if let Some(e) = implied {
            cfg.experiment.estimator = e;
        } else if cfg.experiment.estimator == EstimatorKind::Bucket {
            cfg.experiment.estimator = EstimatorKind::Fixed;
        }
    }
    if let Some(e) = plan.estimator {
        cfg.experiment.estimator = match e {
            EstimatorArg::Fixed => EstimatorKind::Fixed,
            EstimatorArg::Scan => EstimatorKind::Scan,
            EstimatorArg::Bucket => EstimatorKind::Bucket,
            EstimatorArg::Convolution => EstimatorKind::Convolution,
        };
    }
    Ok(())
}

fn create_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::Numeric(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Middle row of a file as a CSV cut with one column per component.
fn write_cut(f: &ArrayFile, path: &Path) -> Result<()> {
    let (nx, ny) = (f.header.nx(), f.header.ny());
    let row = ny / 2;
    let cols: Vec<(String, Vec<f64>)> = f
        .header
        .components
        .iter()
        .map(|c| {
            let v = f.component(c).expect("declared component");
            (c.clone(), v[row * nx..(row + 1) * nx].to_vec())
        })
        .collect();
    let refs: Vec<(&str, &[f64])> = cols.iter().map(|(n, v)| (n.as_str(), v.as_slice())).collect();
    write_csv(path, "x", &x_coords(f), &refs)
}

fn oracle_choice(opts: &OracleOpts, estimator: EstimatorKind, default: (TemporalMode, Integration)) -> (TemporalMode, Integration, bool) {
    let temporal = match opts.temporal {
        Some(TemporalArg::Cw) => TemporalMode::Cw,
        Some(TemporalArg::Pulsed) => TemporalMode::Pulsed,
        None => default.0,
    };
    let mut integration = match opts.integration {
        Some(IntegrationArg::Lattice) => Integration::Lattice,
        Some(IntegrationArg::Continuum) => Integration::Continuum,
        None => default.1,
    };
    if estimator == EstimatorKind::Convolution {
        integration = Integration::Lattice;
    }
    (temporal, integration, opts.plateau)
}

/// Gaussian fitted to the mean idler near-field intensity, used to account
/// for the finite pump in the bucket far-field reference.
fn idler_weight(out: Option<&RunOutput>) -> Option<ghostsim::oracle::GaussianWeight> {
    let r = out?.result("idler-intensity")?;
    let x: Vec<f64> = (0..r.nx).map(|i| r.plane.coord(i, r.nx, 0)).collect();
    let y = &r.components[0].mean[(r.ny / 2) * r.nx..(r.ny / 2 + 1) * r.nx];
    match fit_gaussian(&x, y) {
        Ok(w) => Some(w),
        Err(e) => {
            log::warn!("no Gaussian weight for the bucket reference: {e}");
            None
        }
    }
}

fn build_oracle(
    exp: &Experiment,
    choice: (TemporalMode, Integration, bool),
    weight: Option<ghostsim::oracle::GaussianWeight>,
) -> Result<OracleCurve> {
    let probe = exp.correlation("main").expect("main probe");
    let mut curve = exp.oracle_for(probe, choice.0, choice.1, choice.2)?;
    if let Some(w) = weight {
        curve = curve.weighted(|x| w.eval(x));
    }
    if !curve.meta.converged {
        log::warn!("reference integral did not reach its tolerance after {} refinements", curve.meta.refinements);
    }
    Ok(curve)
}

fn run(cli: &Cli, mut cfg: Config, a: &RunArgs) -> Result<ExitCode> {
    apply_plan(&mut cfg, &a.plan)?;
    let geometry = cfg.experiment.geometry;
    let estimator = cfg.experiment.estimator;
    let shots = cfg.run.shots;
    let mut exp = Experiment::from_config(cfg)?;
    let weighted = geometry == Geometry::BucketFar && !exp.cfg.pump.plane_wave;
    if weighted {
        exp.add_probe("idler-intensity", ProbeKind::IdlerIntensity(IdlerPath::Telescope));
    }
    let dir = &cli.out;
    create_out(dir)?;
    std::fs::write(dir.join("config.toml"), exp.cfg.to_toml())?;
    let mut files = vec!["config.toml".to_string()];

    if let Some(k) = a.dump_shot {
        let f = shot_snapshot(&exp, k)?;
        let name = format!("shot-{k}.gsa");
        f.write(&dir.join(&name))?;
        files.push(name);
    }

    let mode = if a.sequential { ExecutionMode::Sequential } else { ExecutionMode::Parallel };
    let output = if shots > 0 {
        let o = exp.run(shots, mode, exp.cfg.run.threads)?;
        log::info!("{shots} shots in {:.2?}", o.elapsed);
        Some(o)
    } else {
        None
    };

    let estimate = match &output {
        Some(o) => {
            let f = estimate_array(&exp, &o.results[0], geometry, estimator)?;
            f.write(&dir.join("estimate.gsa"))?;
            write_cut(&f, &dir.join("estimate.csv"))?;
            files.extend(["estimate.gsa".into(), "estimate.csv".into()]);
            Some(f)
        }
        None => None,
    };

    let choice = oracle_choice(&a.oracle, estimator, (TemporalMode::Pulsed, Integration::Lattice));
    let weight = if weighted { idler_weight(output.as_ref()) } else { None };
    let oracle = if a.no_oracle || exp.grid.ny > 1 {
        None
    } else {
        let c = build_oracle(&exp, choice, weight)?;
        let mut f = oracle_array(&exp, &c, estimator)?;
        if let Some(w) = weight {
            f.header.meta.insert("gaussian_weight".into(), json!({"center": w.center, "sigma": w.sigma}));
        }
        f.write(&dir.join("oracle.gsa"))?;
        write_cut(&f, &dir.join("oracle.csv"))?;
        files.extend(["oracle.gsa".into(), "oracle.csv".into()]);
        Some(f)
    };

    if estimator == EstimatorKind::Convolution {
        for (src, name) in [(estimate.as_ref(), "reconstruction"), (oracle.as_ref(), "oracle-reconstruction")] {
            if let Some(f) = src {
                let r = reconstruction_array(f, &exp.lens)?;
                r.write(&dir.join(format!("{name}.gsa")))?;
                write_cut(&r, &dir.join(format!("{name}.csv")))?;
                files.extend([format!("{name}.gsa"), format!("{name}.csv")]);
            }
        }
    }

    let mut report = json!({ "geometry": geometry.tag(), "estimator": format!("{estimator:?}").to_lowercase(), "shots": shots });
    if let (Some(e), Some(o)) = (&estimate, &oracle) {
        let opts = CompareOptions { region: a.region, tolerance: a.tolerance, force: false };
        let c = compare_files(e, o, &opts)?;
        report["comparison"] = serde_json::to_value(&c).map_err(|e| Error::Numeric(e.to_string()))?;
        if let Some(out) = &output {
            report["checkpoints"] = checkpoint_errors(&exp, out, o, &opts)?;
        }
    }
    write_json(&dir.join("report.json"), &report)?;
    files.push("report.json".into());

    if a.plan.plot {
        let f = estimate.as_ref().or(oracle.as_ref());
        if let Some(f) = f {
            plot_overlay(&dir.join("plot.svg"), f, estimate.as_ref().and(oracle.as_ref()))?;
            files.push("plot.svg".into());
        }
    }

    let manifest = json!({
        "program": "ghostsim",
        "version": env!("CARGO_PKG_VERSION"),
        "config_hash": exp.cfg.hash(),
        "seed": exp.cfg.run.seed,
        "shots": shots,
        "threads": exp.cfg.run.threads,
        "mode": if a.sequential { "sequential" } else { "parallel" },
        "parallel_feature": cfg!(feature = "parallel"),
        "elapsed_s": output.as_ref().map(|o| o.elapsed.as_secs_f64()),
        "scales": {
            "x_coh_m": exp.scales.x_coh,
            "tau_coh_s": exp.scales.tau_coh,
            "x_f_m": exp.scales.x_f,
            "q_center_over_q0": exp.scales.q_center_hat(),
            "psi_g": exp.scales.psi_g,
            "focal_shift_m": exp.scales.focal_shift,
        },
        "files": files,
    });
    write_json(&dir.join("manifest.json"), &manifest)?;
    if let Some(c) = report.get("comparison") {
        println!("relative L2 {:.4} over {} points", c["relative_l2"].as_f64().unwrap_or(f64::NAN), c["points"]);
    }
    println!("wrote {} files to {}", files.len() + 1, dir.display());
    Ok(ExitCode::SUCCESS)
}

fn checkpoint_errors(exp: &Experiment, out: &RunOutput, oracle: &ArrayFile, opts: &CompareOptions) -> Result<serde_json::Value> {
    let r = &out.results[0];
    let mut rows = Vec::new();
    for cp in &out.checkpoints {
        let mut h = ArrayHeader::for_plane("estimate", &["real", "imag"], &r.plane, r.nx, r.ny);
        h.config_hash = exp.cfg.hash();
        let m = &cp.results[0].components;
        let f = ArrayFile::new(h, &[&m[0].mean, &m[1].mean])?;
        let c = compare_files(&f, oracle, opts)?;
        rows.push(json!({"shots": cp.shots, "relative_l2": c.relative_l2}));
    }
    Ok(json!(rows))
}

fn plot_overlay(path: &Path, main: &ArrayFile, reference: Option<&ArrayFile>) -> Result<()> {
    let x = x_coords(main);
    let nx = main.header.nx();
    let row = main.header.ny() / 2;
    let pick = |f: &ArrayFile, c: &str| f.component(c).map(|v| v[row * nx..(row + 1) * nx].to_vec());
    let norm = |f: &ArrayFile| {
        let (re, im) = (pick(f, "real").unwrap_or_default(), pick(f, "imag").unwrap_or_default());
        ghostsim::metrics::peak_normalise_pair(&re, &im)
    };
    let (mr, mi) = norm(main);
    let points = reference.is_some();
    let mut series = vec![
        Series { label: "real", values: &mr, points },
        Series { label: "imag", values: &mi, points },
    ];
    let (rr, ri) = reference.map(norm).unwrap_or_default();
    if reference.is_some() {
        series.push(Series { label: "reference real", values: &rr, points: false });
        series.push(Series { label: "reference imag", values: &ri, points: false });
    }
    let title = format!("{} {} ({} shots)", main.header.geometry, main.header.estimator.as_deref().unwrap_or(""), main.header.shots);
    write_line_plot(path, &title, &format!("x ({} plane units)", main.header.plane), &x, &series)
}

fn shot_snapshot(exp: &Experiment, k: u64) -> Result<ArrayFile> {
    let g = exp.grid;
    let mut s = sample_vacuum(&g, ShotSeed { master: exp.cfg.run.seed, index: k });
    exp.crystal.propagate(&mut s.signal, &mut s.idler)?;
    let split = |v: &[C64]| -> (Vec<f64>, Vec<f64>) { (v.iter().map(|c| c.re).collect(), v.iter().map(|c| c.im).collect()) };
    let (sr, si) = split(&s.signal);
    let (ir, ii) = split(&s.idler);
    let plane = Plane { kind: PlaneKind::Far, step: [g.dqx(), g.dqy()], unit: exp.scales.x_f };
    let mut h = ArrayHeader::for_plane("shot", &["signal_re", "signal_im", "idler_re", "idler_im"], &plane, g.nx, g.ny * g.nt);
    h.shape = vec![4, g.nt * g.ny, g.nx];
    h.seed = exp.cfg.run.seed;
    h.shots = 1;
    h.config_hash = exp.cfg.hash();
    h.meta.insert("shot".into(), json!(k));
    h.meta.insert("layout".into(), json!("crystal output spectra in FFT bin order, rows are [t][y]"));
    ArrayFile::new(h, &[&sr, &si, &ir, &ii])
}

fn oracle_cmd(cli: &Cli, mut cfg: Config, a: &OracleArgs) -> Result<ExitCode> {
    apply_plan(&mut cfg, &a.plan)?;
    let estimator = cfg.experiment.estimator;
    let exp = Experiment::from_config(cfg)?;
    if exp.grid.ny > 1 {
        return Err(Error::Config("reference curves are one-dimensional; set grid.ny = 1".into()));
    }
    let choice = oracle_choice(&a.oracle, estimator, (TemporalMode::Cw, Integration::Continuum));
    let curve = build_oracle(&exp, choice, None)?;
    let f = oracle_array(&exp, &curve, estimator)?;
    create_out(&cli.out)?;
    f.write(&cli.out.join("oracle.gsa"))?;
    write_cut(&f, &cli.out.join("oracle.csv"))?;
    if a.plan.plot {
        plot_overlay(&cli.out.join("oracle.svg"), &f, None)?;
    }
    println!("wrote oracle for {} to {}", curve.geometry.tag(), cli.out.display());
    Ok(ExitCode::SUCCESS)
}

fn compare_cmd(a: &CompareArgs) -> Result<ExitCode> {
    let est = ArrayFile::read(&a.estimate)?;
    let reference = ArrayFile::read(&a.reference)?;
    let report = compare_files(&est, &reference, &CompareOptions { region: a.region, tolerance: a.tolerance, force: a.force })?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Numeric(e.to_string()))?;
    println!("{text}");
    Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

fn gain_cmd(cli: &Cli, cfg: Config) -> Result<ExitCode> {
    let exp = Experiment::new(cfg)?;
    let g = exp.grid;
    let m = &exp.model;
    let qs: Vec<f64> = (0..g.nx).map(|i| g.far_x(i)).collect();
    let omegas: Vec<f64> = (0..g.nt).map(|k| ghostsim::lattice::far_coord(k, g.nt) * g.domega()).collect();
    let n = g.nx * g.nt;
    let mut cols = vec![vec![0.0; n]; 6];
    for (it, &om) in omegas.iter().enumerate() {
        for (ix, &q) in qs.iter().enumerate() {
            let (u, v) = m.transfer(0, q, 0.0, om);
            let c = m.correlation(q, 0.0, om);
            let i = it * g.nx + ix;
            for (col, val) in cols.iter_mut().zip([u.norm_sqr(), v.norm_sqr(), c.re, c.im, c.norm(), c.arg()]) {
                col[i] = val;
            }
        }
    }
    let names = ["u_abs2", "v_abs2", "g_re", "g_im", "g_abs", "g_phase"];
    let plane = Plane { kind: PlaneKind::Far, step: [g.dqx(), g.domega()], unit: 1.0 };
    let mut h = ArrayHeader::for_plane("gain", &names, &plane, g.nx, g.nt);
    h.axes = vec![
        AxisScale { name: "q".into(), step: g.dqx(), unit_m: 1.0 / exp.scales.q0, origin: qs[0] },
        AxisScale { name: "omega".into(), step: g.domega(), unit_m: exp.scales.tau_coh, origin: omegas[0] },
    ];
    h.config_hash = exp.cfg.hash();
    h.meta.insert("axis_units".into(), json!("q in units of q0 (axis unit_m is 1/q0 in metres), omega in units of 1/tau_coh (unit_m holds tau_coh in seconds)"));
    let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
    let f = ArrayFile::new(h, &refs)?;
    create_out(&cli.out)?;
    f.write(&cli.out.join("gain.gsa"))?;
    let (gq, phase) = correlation_scan(m, &qs, exp.gain_center());
    let mag: Vec<f64> = gq.iter().map(|c| c.norm()).collect();
    let u2: Vec<f64> = qs.iter().map(|&q| m.transfer(0, q, 0.0, 0.0).0.norm_sqr()).collect();
    let v2: Vec<f64> = qs.iter().map(|&q| m.transfer(0, q, 0.0, 0.0).1.norm_sqr()).collect();
    write_csv(
        &cli.out.join("gain-scan.csv"),
        "q",
        &qs,
        &[("g_abs", &mag), ("g_phase_unwrapped", &phase), ("u_abs2", &u2), ("v_abs2", &v2)],
    )?;
    let e = exp.expansion;
    let scales = json!({
        "k_vacuum_per_m": exp.scales.k_vacuum,
        "q0_per_m": exp.scales.q0,
        "omega0_per_s": exp.scales.omega0,
        "x_coh_m": exp.scales.x_coh,
        "tau_coh_s": exp.scales.tau_coh,
        "q_center_over_q0": exp.scales.q_center_hat(),
        "psi_g": exp.scales.psi_g,
        "focal_shift_m": exp.scales.focal_shift,
        "x_f_m": exp.scales.x_f,
        "phase_expansion": {
            "constant": e.constant, "linear_q": e.linear_q, "quadratic_q": e.quadratic_q,
            "linear_omega": e.linear_omega, "quadratic_omega": e.quadratic_omega,
        },
        "config_hash": exp.cfg.hash(),
    });
    write_json(&cli.out.join("scales.json"), &scales)?;
    println!("x_coh = {:.3} um, x_f = {:.3} um, q_C/q0 = {:.4}", exp.scales.x_coh * 1e6, exp.scales.x_f * 1e6, exp.scales.q_center_hat());
    Ok(ExitCode::SUCCESS)
}

fn reconstruct_cmd(cli: &Cli, cfg: Config, a: &ReconstructArgs) -> Result<ExitCode> {
    let f = ArrayFile::read(&a.input)?;
    let scales = ghostsim::config::derive_scales(&cfg.crystal, cfg.optics.focal_length)?;
    // Only the lens enters, so check the far-field scale rather than the full hash.
    let file_xf = f.header.axes.first().map(|ax| ax.unit_m).unwrap_or(f64::NAN);
    if (file_xf / scales.x_f - 1.0).abs() > 1e-9 && !a.force {
        return Err(Error::Comparison(format!(
            "the file's far-field unit {file_xf:e} m does not match the configuration ({:e} m); pass --force to use it anyway",
            scales.x_f
        )));
    }
    let lens = ghostsim::optics::Lens { focal_length: cfg.optics.focal_length, k_vacuum: scales.k_vacuum };
    let r = reconstruction_array(&f, &lens)?;
    create_out(&cli.out)?;
    r.write(&cli.out.join("reconstruction.gsa"))?;
    write_cut(&r, &cli.out.join("reconstruction.csv"))?;
    println!("wrote reconstruction to {}", cli.out.display());
    Ok(ExitCode::SUCCESS)
}
