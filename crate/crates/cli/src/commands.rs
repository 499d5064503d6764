use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;
use std::thread;

use serde::Serialize;
use tilegen::bench::{self, BenchOptions, BenchReport};
use tilegen::density::catalog;
use tilegen::gof::{self, GofReport, GofTest};
use tilegen::{build, Counters, DensityModel, Error, RefinementStats, Result, SamplerState, StopRule, TilingTable, UniformSource};

use crate::cdf::NamedCdf;
use crate::{BenchArgs, BuildArgs, Cli, Command, DensityArgs, GofArgs, GofKind, SampleArgs, SampleFormat, StatsArgs};

const SAMPLE_CHUNK: u64 = 1 << 16;

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Build(args) => cmd_build(cli, args),
        Command::Sample(args) => cmd_sample(cli, args),
        Command::Stats(args) => cmd_stats(cli, args),
        Command::Gof(args) => cmd_gof(cli, args),
        Command::Bench(args) => cmd_bench(cli, args),
    }
}

fn load_model(density: &str, mass_points: &[String]) -> Result<DensityModel> {
    let mut model = catalog::parse_density(density)?;
    for spec in mass_points {
        let (c, eps) = catalog::parse_mass_point(spec)?;
        model = model.declare_mass_point(c, eps)?;
    }
    Ok(model)
}

fn model_from(args: &DensityArgs) -> Result<DensityModel> {
    load_model(&args.density, &args.mass_points)
}

fn source(cli: &Cli) -> UniformSource {
    UniformSource::new(cli.rng, cli.seed)
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    let mut out = io::stdout().lock();
    writeln!(out, "{text}")?;
    Ok(())
}

fn stats_csv(history: &[RefinementStats]) -> String {
    let mut s = String::from(RefinementStats::CSV_HEADER);
    s.push('\n');
    for row in history {
        s.push_str(&row.csv_row());
        s.push('\n');
    }
    s
}

#[derive(Serialize)]
struct BuildReport<'a> {
    table: Option<String>,
    density: String,
    complete: bool,
    history: &'a [RefinementStats],
}

fn stop_rule(args: &BuildArgs) -> Result<StopRule> {
    let mut rule = match args.level {
        Some(level) => StopRule::to_level(level),
        None if args.target_r.is_none() && args.target_e.is_none() => StopRule::default(),
        None => StopRule { target_r: args.target_r, target_e: args.target_e, ..StopRule::default() },
    };
    if let Some(m) = args.max_level {
        rule.max_level = m;
    }
    if let Some(b) = args.memory_budget {
        rule.memory_budget = b;
    }
    if let Some(s) = args.samples_per_column {
        rule.samples_per_column = s;
    }
    Ok(rule)
}

fn emit_build(cli: &Cli, args: &BuildArgs, model: &DensityModel, history: &[RefinementStats], complete: bool) -> Result<()> {
    let csv = stats_csv(history);
    if let Some(path) = &args.stats {
        std::fs::write(path, &csv)?;
    }
    if cli.json {
        print_json(&BuildReport {
            table: complete.then(|| args.out.display().to_string()),
            density: model.describe(),
            complete,
            history,
        })
    } else {
        io::stdout().lock().write_all(csv.as_bytes())?;
        Ok(())
    }
}

fn cmd_build(cli: &Cli, args: &BuildArgs) -> Result<()> {
    let model = model_from(&args.density)?;
    let rule = stop_rule(args)?;
    match build(&model, rule) {
        Ok((table, history)) => {
            table.save(&args.out)?;
            emit_build(cli, args, &model, &history, true)
        }
        Err(Error::MemoryBudgetExceeded { budget, needed, level, best, history }) => {
            emit_build(cli, args, &model, &history, false)?;
            Err(Error::MemoryBudgetExceeded { budget, needed, level, best, history })
        }
        Err(e) => Err(e),
    }
}

/// Sampler states over one table, one per thread, on forked streams.
fn samplers(cli: &Cli, table: Arc<TilingTable>, model: Arc<DensityModel>) -> Result<Vec<SamplerState>> {
    let base = source(cli);
    (0..cli.threads as u64)
        .map(|i| SamplerState::new(table.clone(), model.clone(), base.fork_stream(i)))
        .collect()
}

/// Splits `n` into `k` nearly equal parts, larger parts first.
fn split(n: u64, k: usize) -> Vec<u64> {
    let k64 = k as u64;
    (0..k64).map(|i| n / k64 + u64::from(i < n % k64)).collect()
}

fn write_values(out: &mut dyn Write, values: &[f64], format: SampleFormat) -> io::Result<()> {
    match format {
        SampleFormat::Text => {
            for x in values {
                writeln!(out, "{x:?}")?;
            }
        }
        SampleFormat::F64le => {
            for x in values {
                out.write_all(&x.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SampleSummary {
    n: u64,
    threads: u32,
    rng: String,
    seed: u64,
    counters: Counters,
    rejection_fraction: f64,
    evaluation_fraction: f64,
}

fn cmd_sample(cli: &Cli, args: &SampleArgs) -> Result<()> {
    let table = Arc::new(TilingTable::load(&args.table)?);
    let model = Arc::new(model_from(&args.density)?);
    let mut states = samplers(cli, table, model)?;
    let mut out: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };

    if states.len() == 1 {
        let state = &mut states[0];
        let mut buf = Vec::with_capacity(SAMPLE_CHUNK as usize);
        let mut left = args.n;
        while left > 0 {
            let k = left.min(SAMPLE_CHUNK);
            buf.clear();
            state.fill(&mut buf, k as usize)?;
            write_values(&mut out, &buf, args.format)?;
            left -= k;
        }
    } else {
        // Thread i's variates follow thread i-1's, so output depends only on
        // seed, rng and thread count.
        let parts = split(args.n, states.len());
        let chunks: Vec<Result<Vec<f64>>> = thread::scope(|s| {
            let handles: Vec<_> = states
                .iter_mut()
                .zip(&parts)
                .map(|(state, &k)| s.spawn(move || state.draw_batch(k as usize)))
                .collect();
            handles.into_iter().map(|h| h.join().unwrap_or_else(|_| Err(Error::Internal("sampler thread panicked".into())))).collect()
        });
        for chunk in chunks {
            write_values(&mut out, &chunk?, args.format)?;
        }
    }
    out.flush()?;

    let counters = states.iter().fold(Counters::default(), |acc, s| acc.merge(&s.counters()));
    let summary = SampleSummary {
        n: args.n,
        threads: cli.threads,
        rng: cli.rng.to_string(),
        seed: cli.seed,
        counters,
        rejection_fraction: if counters.attempts > 0 { counters.rejection_fraction() } else { 0.0 },
        evaluation_fraction: if counters.attempts > 0 { counters.evaluation_fraction() } else { 0.0 },
    };
    let line = if cli.json {
        serde_json::to_string(&summary).map_err(|e| Error::Internal(e.to_string()))?
    } else {
        format!(
            "attempts={} accepts={} rejections={} density_evals={} rejection_fraction={:.6} evaluation_fraction={:.6}",
            counters.attempts,
            counters.accepts,
            counters.rejections,
            counters.density_evals,
            summary.rejection_fraction,
            summary.evaluation_fraction
        )
    };
    eprintln!("{line}");
    Ok(())
}

#[derive(Serialize)]
struct TableSummary {
    support: (f64, f64),
    level: u32,
    n_columns: usize,
    height: f64,
    total_integral: f64,
    n_tiles: usize,
    n_interior: usize,
    n_border: usize,
    rejection_rate: f64,
    evaluation_rate: f64,
    memory_bytes: u64,
    file_bytes: usize,
}

fn cmd_stats(cli: &Cli, args: &StatsArgs) -> Result<()> {
    let table = TilingTable::load(&args.table)?;
    let s = table.stats();
    let summary = TableSummary {
        support: table.support(),
        level: table.level(),
        n_columns: table.n_columns(),
        height: table.height(),
        total_integral: table.total_integral(),
        n_tiles: table.n_tiles(),
        n_interior: table.n_interior(),
        n_border: table.n_border(),
        rejection_rate: s.rejection_rate,
        evaluation_rate: s.evaluation_rate,
        memory_bytes: s.memory_bytes,
        file_bytes: table.serialized_len(),
    };
    if cli.json {
        return print_json(&summary);
    }
    let mut out = io::stdout().lock();
    writeln!(out, "support     [{}, {}]", summary.support.0, summary.support.1)?;
    writeln!(out, "level       {}", summary.level)?;
    writeln!(out, "columns     {}", summary.n_columns)?;
    writeln!(out, "height      {}", summary.height)?;
    writeln!(out, "integral    {}", summary.total_integral)?;
    writeln!(out, "tiles       {} ({} interior, {} border)", summary.n_tiles, summary.n_interior, summary.n_border)?;
    writeln!(out, "R           {:.6}", summary.rejection_rate)?;
    writeln!(out, "E           {:.6}", summary.evaluation_rate)?;
    writeln!(out, "memory      {} bytes ({} on disk)", summary.memory_bytes, summary.file_bytes)?;
    writeln!(out, "{}", RefinementStats::CSV_HEADER)?;
    writeln!(out, "{}", s.csv_row())?;
    Ok(())
}

/// Reads variates written by `sample`.
pub fn read_values(path: &Path, format: SampleFormat) -> Result<Vec<f64>> {
    let file = File::open(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let mut reader = BufReader::new(file);
    match format {
        SampleFormat::Text => {
            let mut values = Vec::new();
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                let t = line.trim();
                if t.is_empty() || t.starts_with('#') {
                    continue;
                }
                let x = t
                    .parse()
                    .map_err(|_| Error::Format(format!("{}: line {}: '{t}' is not a number", path.display(), i + 1)))?;
                values.push(x);
            }
            Ok(values)
        }
        SampleFormat::F64le => {
            let mut bytes = Vec::new();
            reader.read_to_end(&mut bytes)?;
            if bytes.len() % 8 != 0 {
                return Err(Error::Format(format!("{}: {} bytes is not a whole number of doubles", path.display(), bytes.len())));
            }
            Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect())
        }
    }
}

fn cmd_gof(cli: &Cli, args: &GofArgs) -> Result<()> {
    let test = match (args.test, &args.density, &args.cdf) {
        (Some(t), _, _) => t,
        (None, Some(_), _) => GofKind::ChiSquare,
        (None, None, Some(_)) => GofKind::Ks,
        (None, None, None) => return Err(Error::Parameter("gof needs --density or --cdf".into())),
    };
    let samples = read_values(&args.input, args.input_format)?;
    let report: GofReport = match test {
        GofKind::ChiSquare => {
            let density = args.density.as_deref().ok_or_else(|| Error::Parameter("chi-square needs --density".into()))?;
            let model = load_model(density, &args.mass_points)?;
            gof::chi_square(&samples, &model, args.bins)?
        }
        GofKind::Ks => {
            let spec = args.cdf.as_deref().ok_or_else(|| Error::Parameter("ks needs --cdf".into()))?;
            let cdf = NamedCdf::parse(spec)?;
            gof::kolmogorov_smirnov(&samples, |x| cdf.eval(x))?
        }
    };
    if cli.json {
        return print_json(&report);
    }
    let mut out = io::stdout().lock();
    let bins = report.n_bins.map(|b| format!(" bins={b}")).unwrap_or_default();
    writeln!(
        out,
        "test={} statistic={:.6} p_value={:.6e} n={}{bins}",
        match report.test {
            GofTest::ChiSquare => "chi_square",
            GofTest::KolmogorovSmirnov => "kolmogorov_smirnov",
        }, report.statistic, report.p_value, report.n_samples
    )?;
    Ok(())
}

#[derive(Serialize)]
struct BenchSummary {
    threads: u32,
    /// Sum over threads of the eval-subtracted rates.
    variates_per_second: f64,
    raw_variates_per_second: f64,
    setup_seconds: Option<f64>,
    setup_eval_seconds: Option<f64>,
    setup_net_seconds: Option<f64>,
    interleaved: bool,
    per_thread: Vec<BenchReport>,
}

fn cmd_bench(cli: &Cli, args: &BenchArgs) -> Result<()> {
    let table = Arc::new(TilingTable::load(&args.table)?);
    let model = model_from(&args.density)?;
    let setup = if args.setup {
        Some(bench::time_setup(&model, StopRule::to_level(table.level()))?.1)
    } else {
        None
    };
    let base = source(cli);
    let parts = split(args.n, cli.threads as usize);
    let reports: Vec<Result<BenchReport>> = thread::scope(|s| {
        let handles: Vec<_> = parts
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let (table, model, src) = (table.clone(), &model, base.fork_stream(i as u64));
                let options = BenchOptions { n, batch: args.batch, interleave_bytes: args.interleave.unwrap_or(0) as usize };
                s.spawn(move || bench::run(table, model, src, options))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|_| Err(Error::Internal("bench thread panicked".into())))).collect()
    });
    let per_thread = reports.into_iter().collect::<Result<Vec<_>>>()?;
    let summary = BenchSummary {
        threads: cli.threads,
        variates_per_second: per_thread.iter().map(|r| r.variates_per_second).sum(),
        raw_variates_per_second: per_thread.iter().map(|r| r.raw_variates_per_second).sum(),
        setup_seconds: setup.as_ref().map(|t| t.setup_seconds),
        setup_eval_seconds: setup.as_ref().map(|t| t.density_eval_seconds),
        setup_net_seconds: setup.as_ref().map(|t| t.setup_seconds - t.density_eval_seconds),
        interleaved: args.interleave.is_some_and(|b| b > 0),
        per_thread,
    };
    if cli.json {
        return print_json(&summary);
    }
    let mut out = io::stdout().lock();
    let evals: f64 = summary.per_thread.iter().map(|r| r.density_eval_seconds).sum();
    writeln!(out, "variates/s (eval time subtracted) {:.4e}", summary.variates_per_second)?;
    writeln!(out, "variates/s (raw)                  {:.4e}", summary.raw_variates_per_second)?;
    writeln!(out, "density eval seconds              {evals:.4}")?;
    writeln!(out, "interleaved                       {}", summary.interleaved)?;
    if let (Some(total), Some(eval)) = (summary.setup_seconds, summary.setup_eval_seconds) {
        writeln!(out, "setup seconds                     {total:.4} ({eval:.4} in density evals, {:.4} net)", total - eval)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_covers_n() {
        assert_eq!(split(10, 3), vec![4, 3, 3]);
        assert_eq!(split(0, 2), vec![0, 0]);
        assert_eq!(split(7, 1), vec![7]);
    }
}
