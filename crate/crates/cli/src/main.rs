mod config;

use anyhow::{bail, Context, Result};
use channelfield::chains::{blocking_times, detect_chain, ChainRecord};
use channelfield::flow::{integrate_curve, ratio_stats, SmoothedField};
use channelfield::markov::{certify_c1, certify_c2, log_grid, p_exact, p_lower, q_tail_closed, r_bar_constants, rate_table_csv};
use channelfield::mixing::{base_grid, empirical_mixing, overlap_bound, sample_ensemble, sigma_indicator};
use channelfield::mollify::{v_at, MollifierSpec, SUPPORT};
use channelfield::pointfield::{mu_dinv_rect, sample_configuration, Configuration, FORMAT_VERSION};
use channelfield::rng::derive_seed;
use channelfield::stats::mean_se;
use channelfield::tessellation::TessellationView;
use channelfield::verify::{self, Budget};
use channelfield::{par, Point};
use clap::{Parser, Subcommand};
use config::{Overrides, RunConfig};
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::io::BufReader;
use std::path::Path;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "channelfield", version, about = "Random channel fields: sampling, flow, chains and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand, Clone, Copy, Debug)]
enum Command {
    /// Sample configurations; write the first and a count summary.
    Sample,
    /// Evaluate the smoothed field on a grid.
    Field,
    /// Integrate one curve of the smoothed field.
    Integrate,
    /// Detect successor chains.
    Chain,
    /// Run the acceptance criteria.
    Verify,
    /// Empirical covariance decay against the overlap bound.
    Mixing,
    /// Tabulate blocking rates, kernel tails and p-model values.
    Rates,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::Field => "field",
            Command::Integrate => "integrate",
            Command::Chain => "chain",
            Command::Verify => "verify",
            Command::Mixing => "mixing",
            Command::Rates => "rates",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match RunConfig::resolve(&cli.overrides).and_then(|cfg| dispatch(cli.command, &cfg)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command, cfg: &RunConfig) -> Result<bool> {
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating output directory {}", cfg.out.display()))?;
    let (payload, ok) = match command {
        Command::Sample => (cmd_sample(cfg)?, true),
        Command::Field => (cmd_field(cfg)?, true),
        Command::Integrate => (cmd_integrate(cfg)?, true),
        Command::Chain => (cmd_chain(cfg)?, true),
        Command::Verify => cmd_verify(cfg)?,
        Command::Mixing => (cmd_mixing(cfg)?, true),
        Command::Rates => (cmd_rates(cfg)?, true),
    };
    let report = json!({
        "format_version": FORMAT_VERSION,
        "command": command.name(),
        "seed": cfg.seed,
        "config_hash": cfg.hash(),
        "config": cfg.reported(),
        "result": payload,
    });
    write(&cfg.out.join(format!("{}_report.json", command.name())), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    Ok(ok)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// The configuration from `--input`, the empty field, or a fresh sample.
fn configuration(cfg: &RunConfig, seed: u64) -> Result<Configuration> {
    if let Some(path) = &cfg.input {
        let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        return Configuration::read_jsonl(BufReader::new(file)).with_context(|| format!("reading {}", path.display()));
    }
    if cfg.empty_field {
        return Ok(Configuration::from_points(cfg.rect()?, cfg.alpha, Vec::new())?);
    }
    Ok(sample_configuration(&cfg.rect()?, cfg.epsilon, &channelfield::pointfield::IntensityParams::new(cfg.alpha)?, seed)?)
}

fn cmd_sample(cfg: &RunConfig) -> Result<Value> {
    let rect = cfg.rect()?;
    let params = channelfield::pointfield::IntensityParams::new(cfg.alpha)?;
    let first = sample_configuration(&rect, cfg.epsilon, &params, cfg.seed)?;
    write(&cfg.out.join("configuration.jsonl"), &first.to_jsonl_string())?;
    let counts: Vec<f64> = std::iter::once(Ok(first.len() as f64))
        .chain(par::map_indices(cfg.replicas - 1, |k| {
            sample_configuration(&rect, cfg.epsilon, &params, derive_seed(cfg.seed, k as u64 + 1)).map(|c| c.len() as f64)
        }))
        .collect::<channelfield::Result<_>>()?;
    let mu = mu_dinv_rect(&rect, &params)?;
    let m = mean_se(&counts);
    let within = cfg.replicas > 1 && (m.mean - mu).abs() <= 3.0 * m.se;
    println!("{} points in the first replica; mean {:.4} ± {:.4} over {} replicas vs mu {mu:.4}", first.len(), m.mean, m.se, cfg.replicas);
    Ok(json!({
        "count": first.len(),
        "pad": first.pad,
        "mu_dinv": mu,
        "replicas": cfg.replicas,
        "mean_count": m.mean,
        "se": m.se,
        "within_3se": within,
    }))
}

fn cmd_field(cfg: &RunConfig) -> Result<Value> {
    let view = TessellationView::new(configuration(cfg, cfg.seed)?);
    let spec = MollifierSpec::new(cfg.quadrature_order)?;
    let w = view.window();
    let (x0, y0) = (w.x0 + SUPPORT, w.y0 + SUPPORT);
    let g = cfg.grid;
    let at = |lo: f64, hi: f64, k: usize| lo + (hi - lo) * k as f64 / (g - 1) as f64;
    let rows = par::map_indices(g * g, |k| {
        let p = [at(x0, w.x1, k / g), at(y0, w.y1, k % g)];
        let v = v_at(p, &view, &spec)?;
        Ok((p, v, sigma_indicator(&view, p)?))
    })
    .into_iter()
    .collect::<channelfield::Result<Vec<_>>>()?;
    let mut csv = String::from("x1,x2,v1,v2,horizontal\n");
    let mut worst: f64 = 0.0;
    for (p, v, h) in &rows {
        worst = worst.max((v[0] + v[1] - 1.0).abs());
        writeln!(csv, "{},{},{},{},{}", p[0], p[1], v[0], v[1], h)?;
    }
    write(&cfg.out.join("field.csv"), &csv)?;
    write(&cfg.out.join("tessellation.json"), &(serde_json::to_string(&view.dump_json())? + "\n"))?;
    println!("{} grid points, max |v1+v2-1| = {worst:e}", rows.len());
    Ok(json!({ "points": rows.len(), "domains": view.len(), "max_sum_error": worst }))
}

fn cmd_integrate(cfg: &RunConfig) -> Result<Value> {
    let view = TessellationView::new(configuration(cfg, cfg.seed)?);
    let w = view.window();
    let start = cfg.start_or([w.x0 + 1.0, w.y0 + 1.0]);
    if !(start[0] - SUPPORT >= w.x0 && start[1] - SUPPORT >= w.y0 && start[0] <= w.x1 && start[1] <= w.y1) {
        bail!(
            "start ({}, {}) needs {SUPPORT:.4} of padding below and left inside window {:?}; widen the window or move the start",
            start[0],
            start[1],
            w.to_array()
        );
    }
    let field = SmoothedField::new(&view, MollifierSpec::new(cfg.quadrature_order)?);
    let curve = integrate_curve(start, cfg.t_end, cfg.step, &field)?;
    let mut csv = Vec::new();
    curve.write_csv(&mut csv)?;
    write(&cfg.out.join("curve.csv"), &String::from_utf8(csv)?)?;
    let drift = curve
        .times
        .iter()
        .zip(&curve.positions)
        .map(|(t, p)| (p[0] + p[1] - start[0] - start[1] - t).abs())
        .fold(0.0, f64::max);
    let stats = ratio_stats(&curve, start);
    write(&cfg.out.join("ratio_stats.json"), &(serde_json::to_string_pretty(&stats)? + "\n"))?;
    if curve.truncated {
        eprintln!("curve left the window at t = {}", curve.end_time());
    }
    println!("{} steps to t = {}, end ({}, {}), conservation drift {drift:e}", curve.times.len() - 1, curve.end_time(), curve.end()[0], curve.end()[1]);
    Ok(json!({
        "start": start,
        "end": curve.end(),
        "end_time": curve.end_time(),
        "truncated": curve.truncated,
        "conservation_max_deviation": drift,
        "ratio_stats": stats,
    }))
}

fn cmd_chain(cfg: &RunConfig) -> Result<Value> {
    if cfg.input.is_some() && cfg.replicas > 1 {
        bail!("--replicas > 1 needs sampled configurations, not --input");
    }
    let y: Point = cfg.start_or([0.5, 0.5]);
    let run = |k: usize| -> Result<(ChainRecord, Value)> {
        let seed = if k == 0 { cfg.seed } else { derive_seed(cfg.seed, k as u64) };
        let view = TessellationView::new(configuration(cfg, seed)?);
        let rec = detect_chain(y, &view, cfg.n_max)?;
        let bts = (0..rec.levels.len()).filter(|&n| rec.levels[n].a).map(|n| blocking_times(&rec, n, &view)).collect::<channelfield::Result<Vec<_>>>()?;
        Ok((rec, serde_json::to_value(bts)?))
    };
    let results = par::map_indices(cfg.replicas, run).into_iter().collect::<Result<Vec<_>>>()?;
    let mut jsonl = String::new();
    let mut histogram = vec![0usize; cfg.n_max + 2];
    let mut truncated = 0;
    for (rec, bts) in &results {
        writeln!(jsonl, "{}", json!({ "chain": rec, "blocking_times": bts }))?;
        histogram[(rec.terminal_level + 1) as usize] += 1;
        truncated += usize::from(rec.truncated);
    }
    write(&cfg.out.join("chains.jsonl"), &jsonl)?;
    write(&cfg.out.join("chain.json"), &(results[0].0.to_json() + "\n"))?;
    println!("terminal level histogram (from -1): {histogram:?}; {truncated} truncated");
    Ok(json!({ "y": y, "replicas": cfg.replicas, "terminal_histogram_from_minus_one": histogram, "truncated": truncated }))
}

fn cmd_verify(cfg: &RunConfig) -> Result<(Value, bool)> {
    let base = if cfg.smoke { Budget::smoke() } else { Budget::full() };
    let budget = Budget { alpha: cfg.alpha, variant: cfg.variant(), ..base };
    let report = verify::run_with(&cfg.criteria, &budget, cfg.seed, |c| println!("{}", c.line()))?;
    let failing = report.failing();
    if !failing.is_empty() {
        let names: Vec<String> = failing.iter().map(|&id| format!("{id} ({})", verify::CRITERIA[id - 1])).collect();
        eprintln!("failing criteria: {}", names.join(", "));
    }
    Ok((serde_json::to_value(&report)?, report.passed))
}

fn cmd_mixing(cfg: &RunConfig) -> Result<Value> {
    let rect = cfg.rect()?;
    let lags: Vec<Point> = cfg.lags.iter().map(|&l| [l, 0.0]).collect();
    let bases = base_grid(&rect, &lags, 1.0, 5)?;
    let ensemble = sample_ensemble(&rect, cfg.epsilon, cfg.alpha, cfg.replicas, cfg.seed)?;
    let report = empirical_mixing(&ensemble, &lags, &bases, false)?;
    let shuffled = empirical_mixing(&ensemble, &lags, &bases, true)?;
    write(&cfg.out.join("mixing.csv"), &report.to_csv())?;
    let bounds: Vec<Option<f64>> = cfg.lags.iter().map(|&l| overlap_bound(0.5, l, cfg.alpha).ok()).collect();
    println!("{}", report.to_csv().trim_end());
    println!("decays: {}", report.decays());
    Ok(json!({ "report": report, "shuffled_null": shuffled, "decays": report.decays(), "overlap_bounds_n_half": bounds }))
}

fn cmd_rates(cfg: &RunConfig) -> Result<Value> {
    let zetas = log_grid(1.0, cfg.zeta_max, cfg.zeta_points);
    write(&cfg.out.join("rates.csv"), &rate_table_csv(cfg.alpha, &zetas)?)?;
    let c1 = certify_c1(cfg.alpha, &zetas)?;
    let c2 = certify_c2(cfg.alpha, &zetas)?;
    let (k1, k2) = r_bar_constants(cfg.alpha, &zetas);
    let variant = cfg.variant();
    let rows = par::map_indices(zetas.len(), |i| {
        let z = zetas[i];
        let lower = p_lower(z, c1, c2, cfg.mc_samples, derive_seed(cfg.seed, i as u64), cfg.alpha, variant)?;
        Ok((z, q_tail_closed(z, 2.0, cfg.alpha, variant), q_tail_closed(z, 10.0, cfg.alpha, variant), p_exact(z, cfg.alpha, variant)?, lower))
    })
    .into_iter()
    .collect::<channelfield::Result<Vec<_>>>()?;
    let mut csv = String::from("zeta,q_tail_2,q_tail_10,p_exact,p_lower\n");
    for (z, q2, q10, p, lo) in &rows {
        writeln!(csv, "{z},{q2},{q10},{p},{lo}")?;
    }
    write(&cfg.out.join("kernel.csv"), &csv)?;
    println!("c1 = {c1}, c2 = {c2}, r(z)/z^(alpha-1) in [{k1}, {k2}]");
    Ok(json!({ "zeta_points": zetas.len(), "variant": variant, "c1": c1, "c2": c2, "k1": k1, "k2": k2 }))
}
