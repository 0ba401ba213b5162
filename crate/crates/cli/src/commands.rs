use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;
use shelfwise_core::simulate::sample_trajectory;
use shelfwise_core::{discover_ctmc, parse_log, EventLog, IngestionConfig, TimeUnit};
use shelfwise_service::api::{self, AnalyzeRequest, SimulateRequest, SweepRequest};
use shelfwise_service::{fingerprint_of, ApiError, ServeOptions, SessionState};

use crate::args::{InputArgs, ModelArgs, OptionalInputArgs, OutputArgs, OutputFormat, SimulationArgs, StrategyArgs};

fn load(input: &InputArgs, unit: TimeUnit) -> Result<EventLog> {
    let config = input.mapping.config(Some(&input.input), unit);
    let bytes = read_bytes(&input.input)?;
    parse(&input.input, &bytes, &config)
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

fn parse(path: &Path, bytes: &[u8], config: &IngestionConfig) -> Result<EventLog> {
    let report = parse_log(bytes, config).with_context(|| format!("cannot parse {}", path.display()))?;
    for issue in &report.skipped {
        eprintln!("warning: skipped line {}: {}", issue.line, issue.reason);
    }
    tracing::info!(events = report.log.len(), skipped = report.skip_count(), "log parsed");
    Ok(report.log)
}

/// Standard output or the `--out` file.
fn sink(output: &OutputArgs) -> Result<Box<dyn Write>> {
    Ok(match &output.out {
        Some(path) => {
            Box::new(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(output: &OutputArgs, value: &T) -> Result<()> {
    let mut out = sink(output)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn write_csv<R: Serialize>(output: &OutputArgs, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(sink(output)?);
    out.write_record(header)?;
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

fn distribution_rows(pi: Option<&Vec<f64>>) -> impl Iterator<Item = (usize, f64)> + '_ {
    pi.into_iter().flat_map(|pi| pi.iter().copied().enumerate())
}

pub fn products(input: &InputArgs, output: &OutputArgs) -> Result<()> {
    let log = load(input, TimeUnit::default())?;
    let products = log.list_products();
    match output.format.unwrap_or(OutputFormat::Csv) {
        OutputFormat::Json => write_json(output, &products),
        OutputFormat::Csv => write_csv(output, &["id", "count", "firstTs", "lastTs"], &products),
    }
}

pub fn discover(input: &InputArgs, model: &ModelArgs, output: &OutputArgs) -> Result<()> {
    let log = load(input, model.unit)?;
    let sub = api::sublog(&log, &model.product)?;
    let initial = model.initial.unwrap_or(model.capacity);
    let (chain, report) = discover_ctmc::<f64>(&sub, model.capacity, initial, model.unit).map_err(ApiError::from)?;
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    match output.format.unwrap_or(OutputFormat::Json) {
        OutputFormat::Json => write_json(output, &json!({ "report": report, "chain": chain })),
        OutputFormat::Csv => write_csv(
            output,
            &["quantity", "count", "mean", "rate", "skippedReason"],
            report.classes.iter().map(|c| (c.quantity, c.count, c.mean, c.rate, c.skipped)),
        ),
    }
}

fn sweep_request(model: &ModelArgs, strategy: &StrategyArgs) -> SweepRequest {
    SweepRequest {
        product: model.product.clone(),
        capacity: model.capacity,
        initial: model.initial,
        batch: strategy.batch,
        rates: strategy.rates.clone(),
        threshold: strategy.threshold,
        max_quantity: strategy.max_quantity,
        unit: model.unit,
    }
}

pub fn analyze(input: &InputArgs, model: &ModelArgs, strategy: &StrategyArgs, output: &OutputArgs) -> Result<()> {
    let [rate] = strategy.rates[..] else {
        bail!(ApiError::invalid("analyze takes exactly one --rate; use sweep for several"));
    };
    let log = load(input, model.unit)?;
    let sweep = sweep_request(model, strategy);
    let request = AnalyzeRequest {
        product: sweep.product,
        capacity: sweep.capacity,
        initial: sweep.initial,
        batch: sweep.batch,
        rate,
        threshold: sweep.threshold,
        max_quantity: sweep.max_quantity,
        unit: sweep.unit,
    };
    let result = api::analyze(&log, &request)?;
    match output.format.unwrap_or(OutputFormat::Json) {
        OutputFormat::Json => write_json(output, &result),
        OutputFormat::Csv => write_csv(output, &["state", "probability"], distribution_rows(result.pi.as_ref())),
    }
}

pub fn sweep(input: &InputArgs, model: &ModelArgs, strategy: &StrategyArgs, output: &OutputArgs) -> Result<()> {
    let log = load(input, model.unit)?;
    let results = api::sweep(&log, &sweep_request(model, strategy))?;
    match output.format.unwrap_or(OutputFormat::Json) {
        OutputFormat::Json => write_json(output, &results),
        OutputFormat::Csv => write_csv(
            output,
            &["rate", "state", "probability"],
            results.iter().flat_map(|r| distribution_rows(r.pi.as_ref()).map(move |(s, p)| (r.rate, s, p))),
        ),
    }
}

pub fn simulate(input: &InputArgs, model: &ModelArgs, sim: &SimulationArgs, output: &OutputArgs) -> Result<()> {
    let log = load(input, model.unit)?;
    let request = SimulateRequest {
        product: model.product.clone(),
        capacity: model.capacity,
        initial: model.initial,
        batch: sim.batch,
        rate: sim.rate,
        unit: model.unit,
        horizon: sim.horizon,
        seed: sim.seed,
        burn_in: sim.burn_in,
    };
    let format = output.format.unwrap_or(OutputFormat::Json);
    if sim.trajectory_out.is_some() || format == OutputFormat::Csv {
        let chain = api::simulation_chain(&log, &request)?;
        let trajectory = sample_trajectory(&chain, sim.horizon, sim.seed).map_err(ApiError::from)?;
        let write = |out: Box<dyn Write>| -> Result<()> {
            let mut out = out;
            trajectory.write_csv(&mut out)?;
            out.flush()?;
            Ok(())
        };
        if let Some(path) = &sim.trajectory_out {
            write(Box::new(BufWriter::new(
                File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
            )))?;
        }
        if format == OutputFormat::Csv {
            return write(sink(output)?);
        }
    }
    write_json(output, &api::simulate(&log, &request)?)
}

pub fn serve(input: &OptionalInputArgs, host: &str, port: u16, cors_origins: &[String]) -> Result<()> {
    let state = match &input.input {
        Some(path) => {
            let config = input.mapping.config(Some(path), TimeUnit::default());
            let bytes = read_bytes(path)?;
            let log = parse(path, &bytes, &config)?;
            SessionState::with_fingerprint(log, config, fingerprint_of(&bytes))
        }
        None => SessionState::empty(input.mapping.config(None, TimeUnit::default())),
    };
    let app = shelfwise_service::app(state, &ServeOptions { cors_origins: cors_origins.to_vec() })
        .map_err(ApiError::invalid)?;
    let runtime = tokio::runtime::Runtime::new().context("cannot start the async runtime")?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((host, port))
            .await
            .with_context(|| format!("cannot bind {host}:{port}"))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        shelfwise_service::serve(listener, app).await.context("server failed")
    })
}
