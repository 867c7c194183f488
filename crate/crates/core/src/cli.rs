//! Command-line front end. `run` parses arguments, dispatches and returns
//! the process exit code: 0 on success, 1 on a numerical failure, 2 on a
//! usage error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::feeder::{self, ieee, path_statistics, NetworkModel, Phase};
use crate::hosting_capacity::{self, HCConfig, HcMethod};
use crate::monte_carlo::{self, ActorSet, LogBase, ScenarioConfig};
use crate::power_flow::{self, SolveOptions};
use crate::st_pvsa::{CrossPq, PowerParams};
use crate::vsa::ActorWiring;

#[derive(Debug, Parser)]
#[command(name = "stpvsa", version, about = "Probabilistic voltage sensitivity and PV hosting capacity")]
pub struct Cli {
    /// Bundled feeder name (ieee37, ieee123) or path to a feeder file.
    #[arg(long, global = true, default_value = "ieee37")]
    pub feeder: String,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write results and a run manifest here instead of standard output.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the base-case load flow and print node voltages.
    Loadflow {
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
    },
    /// Compare the analytical voltage change distribution with load-flow
    /// sampling for randomly located actors.
    ValidateDist(DistArgs),
    /// Shared-path impedance statistics and analytical moments, no sampling.
    Stats(DistArgs),
    /// Hosting capacity by load-flow scenarios or by the analytical method.
    Hc(HcArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DistArgs {
    /// Number of load-flow samples.
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    #[arg(long, default_value = "709")]
    pub observation: String,
    #[arg(long, default_value = "a")]
    pub phase: char,
    #[arg(long, default_value_t = 9)]
    pub actors: usize,
    /// Real power variance per actor, kW^2.
    #[arg(long, default_value_t = 5.0)]
    pub sigma_p2: f64,
    /// Reactive power variance per actor, kvar^2.
    #[arg(long, default_value_t = 0.5)]
    pub sigma_q2: f64,
    #[arg(long, default_value_t = 0.2, allow_hyphen_values = true)]
    pub rho_p: f64,
    #[arg(long, default_value_t = 0.2, allow_hyphen_values = true)]
    pub rho_q: f64,
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    pub rho_pq: f64,
    /// Mean real power change per actor on the active phase, kW.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub mean_kw: f64,
    #[arg(long, default_value_t = 200)]
    pub bins: usize,
    /// Power-flow tolerance for the sampled solves.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct HcArgs {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 1000)]
    pub scenarios: usize,
    /// Lower and upper voltage limits, pu.
    #[arg(long, default_value = "0.95,1.05", value_parser = parse_limits)]
    pub limits: (f64, f64),
    /// Largest PV unit, kW (defaults to the size table maximum).
    #[arg(long)]
    pub max_pv_size: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Loadflow,
    Stpvsa,
}

fn parse_limits(s: &str) -> std::result::Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err("expected two comma-separated values, e.g. 0.95,1.05".into());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = parts[1].trim().parse().map_err(|e| format!("{e}"))?;
    if !(lo > 0.0 && lo < hi) {
        return Err("limits must satisfy 0 < min < max".into());
    }
    Ok((lo, hi))
}

/// Everything needed to reproduce a run.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub seed: u64,
    pub feeder: String,
    pub feeder_sha256: String,
    pub version: String,
    pub threads: Option<usize>,
    pub wall_clock_seconds: f64,
}

/// Files (or standard output chunks) produced by a command.
struct Output {
    /// Primary result in the requested format.
    primary: String,
    /// Extra plot-ready CSV files: (file name, content).
    extra: Vec<(String, String)>,
    config: Value,
}

fn load_network(spec: &str) -> Result<(NetworkModel, String)> {
    if let Some(text) = match spec {
        "ieee37" => Some(ieee::ieee37_text()?),
        "ieee123" => Some(ieee::ieee123_text()?),
        _ => None,
    } {
        return Ok((feeder::load_feeder(&text)?, text));
    }
    let text = fs::read_to_string(spec).map_err(|e| Error::InvalidArgument(format!("cannot read feeder {spec}: {e}")))?;
    Ok((feeder::load_feeder(&text)?, text))
}

fn sha256_hex(s: &str) -> String {
    Sha256::digest(s.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| Error::Numerical(format!("serialization failed: {e}")))
}

fn phase_arg(c: char) -> Result<Phase> {
    Phase::from_char(c).ok_or_else(|| Error::InvalidArgument(format!("unknown phase '{c}'")))
}

fn scenario(net: &NetworkModel, a: &DistArgs, seed: u64) -> Result<ScenarioConfig> {
    if a.n == 0 {
        return Err(Error::InvalidArgument("--n must be at least 1".into()));
    }
    let phase = phase_arg(a.phase)?;
    let mut mean_kw = [0.0; 3];
    mean_kw[phase.index()] = a.mean_kw;
    Ok(ScenarioConfig {
        observation: net.index_of(&a.observation)?,
        phase,
        actors: ActorSet::Random {
            count: a.actors,
            candidates: net.non_source_nodes(),
        },
        params: PowerParams::uniform(a.sigma_p2, a.sigma_q2, a.rho_p, a.rho_q, a.rho_pq).only_phase(phase),
        mean_kw,
        mean_kvar: [0.0; 3],
        cross_pq: CrossPq::default(),
        wiring: ActorWiring::PerPhase,
        samples: a.n,
        seed,
        bins: a.bins,
        tol: a.tol,
    })
}

fn cmd_loadflow(net: &NetworkModel, tol: f64, max_iter: usize, format: Format) -> Result<Output> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::InvalidArgument("--tol and --max-iter must be positive".into()));
    }
    let sol = power_flow::solve_with(net, None, &SolveOptions { tol, max_iter }, None)?;
    let primary = match format {
        Format::Csv => sol.to_csv(net),
        Format::Json => {
            let rows: Vec<Value> = (0..net.len())
                .flat_map(|k| {
                    let sol = &sol;
                    net.phases(k).iter().map(move |p| {
                        let v = sol.v[k][p.index()];
                        json!({
                            "node": net.node(k).id,
                            "phase": p.as_char().to_string(),
                            "magnitude_pu": v.norm(),
                            "angle_deg": v.arg().to_degrees(),
                        })
                    })
                })
                .collect();
            to_json(&json!({
                "iterations": sol.iterations,
                "residual_pu": sol.residual,
                "voltages": rows,
            }))?
        }
    };
    Ok(Output {
        primary,
        extra: vec![],
        config: json!({ "tol": tol, "max_iter": max_iter, "residual_pu": sol.residual }),
    })
}

fn cmd_validate(net: &NetworkModel, a: &DistArgs, seed: u64, format: Format) -> Result<Output> {
    let cfg = scenario(net, a, seed)?;
    let base = power_flow::solve(net, None)?;
    let (m, dist) = monte_carlo::analytical_distribution(net, &base, &cfg)?;
    let emp = monte_carlo::empirical_voltage_distribution(net, &base, &cfg)?;
    let js = monte_carlo::js_distance_to_density(&emp.delta_v_hist, |x| dist.pdf(x), LogBase::Two)?;
    let h = &emp.delta_v_hist;
    let mut csv = String::from("bin_lo,bin_hi,empirical_density,analytical_density\n");
    let edges = h.edges();
    for (k, d) in h.density().iter().enumerate() {
        let mid = 0.5 * (edges[k] + edges[k + 1]);
        csv.push_str(&format!("{:.9e},{:.9e},{:.9e},{:.9e}\n", edges[k], edges[k + 1], d, dist.pdf(mid)));
    }
    let summary = json!({
        "observation": a.observation,
        "phase": a.phase.to_string(),
        "samples": emp.delta_v.len(),
        "failures": emp.failures,
        "js_distance": js,
        "moments": m,
        "distribution": dist,
    });
    let primary = match format {
        Format::Json => to_json(&summary)?,
        Format::Csv => csv.clone(),
    };
    Ok(Output {
        primary,
        extra: vec![("validate_dist_histogram.csv".into(), csv)],
        config: serde_json::to_value(a).unwrap_or(Value::Null),
    })
}

fn cmd_stats(net: &NetworkModel, a: &DistArgs, seed: u64, format: Format) -> Result<Output> {
    let cfg = scenario(net, a, seed)?;
    let base = power_flow::solve(net, None)?;
    let cands = net.non_source_nodes();
    let z = path_statistics(net, cfg.observation, cfg.phase, &cands, cfg.wiring)?;
    let (m, dist) = monte_carlo::analytical_distribution(net, &base, &cfg)?;
    let primary = match format {
        Format::Json => to_json(&json!({ "impedance": z, "moments": m, "distribution": dist }))?,
        Format::Csv => {
            let mut s = String::from("quantity,value\n");
            for (k, v) in [
                ("mu_r", m.mu_r),
                ("mu_i", m.mu_i),
                ("var_r", m.var_r),
                ("var_i", m.var_i),
                ("c", m.c),
                ("mean_magnitude", dist.mean()),
            ] {
                s.push_str(&format!("{k},{v:.12e}\n"));
            }
            for (j, v) in z.mu_zr.iter().enumerate() {
                s.push_str(&format!("mu_zr_{j},{v:.12e}\n"));
            }
            for (j, v) in z.mu_zi.iter().enumerate() {
                s.push_str(&format!("mu_zi_{j},{v:.12e}\n"));
            }
            s
        }
    };
    Ok(Output {
        primary,
        extra: vec![],
        config: serde_json::to_value(a).unwrap_or(Value::Null),
    })
}

fn cmd_hc(net: &NetworkModel, a: &HcArgs, seed: u64, format: Format) -> Result<Output> {
    let cfg = HCConfig {
        v_min: a.limits.0,
        v_max: a.limits.1,
        max_pv_size_kw: a.max_pv_size,
        scenarios: a.scenarios,
        seed,
        ..HCConfig::default()
    };
    let method = match a.method {
        MethodArg::Loadflow => HcMethod::Loadflow,
        MethodArg::Stpvsa => HcMethod::Stpvsa,
    };
    let mut r = hosting_capacity::hosting_capacity(net, &cfg, method)?;
    let seconds = r.seconds;
    // Timing lives in the manifest so that result files are reproducible.
    r.seconds = 0.0;
    let trace = r.to_csv();
    let primary = match format {
        Format::Json => to_json(&r)?,
        Format::Csv => trace.clone(),
    };
    let mut config = serde_json::to_value(&cfg).unwrap_or(Value::Null);
    config["method"] = json!(method);
    config["compute_seconds"] = json!(seconds);
    Ok(Output {
        primary,
        extra: vec![("hc_trace.csv".into(), trace)],
        config,
    })
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonConvergence { .. } | Error::ZeroVoltage { .. } | Error::NotPsd { .. } | Error::Numerical(_) => 1,
        _ => 2,
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Loadflow { .. } => "loadflow",
        Command::ValidateDist(_) => "validate-dist",
        Command::Stats(_) => "stats",
        Command::Hc(_) => "hc",
    }
}

fn execute(cli: &Cli) -> Result<(Output, NetworkModel, String)> {
    let (net, text) = load_network(&cli.feeder)?;
    let out = match &cli.command {
        Command::Loadflow { tol, max_iter } => cmd_loadflow(&net, *tol, *max_iter, cli.format)?,
        Command::ValidateDist(a) => cmd_validate(&net, a, cli.seed, cli.format)?,
        Command::Stats(a) => cmd_stats(&net, a, cli.seed, cli.format)?,
        Command::Hc(a) => cmd_hc(&net, a, cli.seed, cli.format)?,
    };
    Ok((out, net, text))
}

fn write_outputs(dir: &Path, name: &str, format: Format, out: &Output, manifest: &RunManifest) -> Result<()> {
    fs::create_dir_all(dir)?;
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    fs::write(dir.join(format!("{}.{ext}", name.replace('-', "_"))), &out.primary)?;
    for (f, content) in &out.extra {
        fs::write(dir.join(f), content)?;
    }
    fs::write(dir.join("manifest.json"), to_json(manifest)?)?;
    Ok(())
}

/// Run the CLI on `args` (including the program name). Results go to
/// `stdout`, diagnostics and the manifest to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(stdout, "{text}")
            } else {
                write!(stderr, "{text}")
            };
            return code;
        }
    };
    let t0 = Instant::now();
    let go = || -> Result<(Output, NetworkModel, String)> {
        match cli.threads {
            Some(0) => Err(Error::InvalidArgument("--threads must be at least 1".into())),
            Some(t) => rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
                .install(|| execute(&cli)),
            None => execute(&cli),
        }
    };
    let (out, net, text) = match go() {
        Ok(v) => v,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return exit_code(&e);
        }
    };
    let name = command_name(&cli.command);
    let manifest = RunManifest {
        command: name.into(),
        config: json!({ "format": cli.format, "command": out.config }),
        seed: cli.seed,
        feeder: format!("{} ({})", cli.feeder, net.name()),
        feeder_sha256: sha256_hex(&text),
        version: env!("CARGO_PKG_VERSION").into(),
        threads: cli.threads,
        wall_clock_seconds: t0.elapsed().as_secs_f64(),
    };
    let res = match &cli.out_dir {
        Some(dir) => write_outputs(dir, name, cli.format, &out, &manifest),
        None => write!(stdout, "{}", out.primary)
            .map_err(Error::from)
            .and_then(|_| Ok(writeln!(stderr, "{}", serde_json::to_string(&manifest).unwrap_or_default())?)),
    };
    match res {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}
