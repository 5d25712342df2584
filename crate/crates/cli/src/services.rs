use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use serde::Deserialize;
use smartbag_core::frame::encode_frame;
use smartbag_core::TrainedModel;
use smartbag_services::alerts::{
    run_alertsvc, trigger_alarm, AlertConfig, AlertService, AlertSettings, AlertSink, Cursors,
    FileSink, WebhookSink,
};
use smartbag_services::client::HttpStoreClient;
use smartbag_services::clock::{system_now_ms, Clock, ScaledClock, SystemClock};
use smartbag_services::gateway::{
    pump, run_gateway, stream_lines, FrameSource, Gateway, GatewayConfig, SimConfig, SimSource,
    Simulator, TcpSource, TraceSource,
};
use smartbag_services::store::{serve, Store};

use crate::{
    AlarmArgs, AlertsArgs, CliError, CliResult, GatewayArgs, ReplayArgs, SimulateArgs, StoreArgs,
};

const HTTP_TIMEOUT: Duration = Duration::from_secs(5);

/// Stop flag set by Ctrl-C / SIGTERM.
fn stop_flag() -> Result<Arc<AtomicBool>, CliError> {
    let stop = Arc::new(AtomicBool::new(false));
    let s = stop.clone();
    ctrlc::set_handler(move || s.store(true, Ordering::SeqCst))
        .context("installing signal handler")?;
    Ok(stop)
}

fn clock_for(speed: f64) -> Result<Arc<dyn Clock>, CliError> {
    if !(speed.is_finite() && speed > 0.0) {
        return Err(CliError::Usage(format!(
            "--speed must be positive, got {speed}"
        )));
    }
    if speed == 1.0 {
        Ok(Arc::new(SystemClock))
    } else {
        Ok(Arc::new(ScaledClock::new(speed)))
    }
}

pub fn simulate(args: SimulateArgs) -> CliResult {
    let mut config = SimConfig::new(&args.device);
    config.seed = args.seed;
    config.start_ts = args.start_ts;
    config.interval_ms = args.interval_ms;
    config.sos_seqs = args.sos_at.iter().copied().collect();
    config.block_len = args.block.max(1);
    if !args.schedule.is_empty() {
        if let Some(bad) = args
            .schedule
            .iter()
            .find(|&&c| c >= smartbag_core::dataset::DEFAULT_CLASSES.len())
        {
            return Err(CliError::Usage(format!(
                "schedule class {bad} out of range"
            )));
        }
        config.schedule = args.schedule.clone();
    }
    if !smartbag_services::paths::valid_device_id(&args.device) {
        return Err(CliError::Usage(format!(
            "invalid device id {:?}",
            args.device
        )));
    }
    let file =
        File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut out = BufWriter::new(file);
    for frame in Simulator::new(config).take(args.n as usize) {
        out.write_all(encode_frame(&frame)?.as_bytes())?;
    }
    out.flush()?;
    println!("wrote {} frames to {}", args.n, args.out.display());
    Ok(())
}

pub fn store(args: StoreArgs) -> CliResult {
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    let (store, report) =
        Store::open(&args.log, clock).with_context(|| format!("opening {}", args.log.display()))?;
    tracing::info!(
        records = report.records,
        discarded_bytes = report.discarded_bytes,
        "replayed {}",
        args.log.display()
    );
    if let Some(backup) = &report.backup {
        tracing::warn!(backup = %backup.display(), "log was corrupt; original kept as backup");
    }
    let stop = stop_flag()?;
    let handle = serve(Arc::new(store), args.listen, args.token)
        .with_context(|| format!("binding {}", args.listen))?;
    // Line read by scripts waiting for readiness.
    println!("listening on {}", handle.base_url());
    std::io::stdout().flush()?;
    while !stop.load(Ordering::SeqCst) {
        std::thread::sleep(Duration::from_millis(50));
    }
    handle.shutdown()?;
    tracing::info!("store stopped");
    Ok(())
}

/// Gateway settings readable from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GatewayFile {
    device: Option<String>,
    store_url: Option<String>,
    token: Option<String>,
    period_ms: Option<u64>,
    capacity: Option<usize>,
    events_log: Option<PathBuf>,
}

fn read_gateway_file(path: &Path) -> Result<GatewayFile, CliError> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn gateway(args: GatewayArgs) -> CliResult {
    let file = match &args.config {
        Some(p) => read_gateway_file(p)?,
        None => GatewayFile::default(),
    };
    let device = args.device.or(file.device).unwrap_or_else(|| "BAG1".into());
    let store_url = args
        .store
        .or(file.store_url)
        .unwrap_or_else(|| "http://127.0.0.1:8080".into());
    let token = args.token.or(file.token);
    let events_log = args.events_log.or(file.events_log);

    let mut config = GatewayConfig::new(device.clone());
    config.period_ms = args
        .period_ms
        .or(file.period_ms)
        .unwrap_or(GatewayConfig::DEFAULT_PERIOD_MS);
    config.capacity = args
        .capacity
        .or(file.capacity)
        .unwrap_or(GatewayConfig::DEFAULT_CAPACITY);
    config.validate().map_err(CliError::Usage)?;
    let clock = clock_for(args.speed)?;

    let mut source: Box<dyn FrameSource> = if let Some(path) = &args.trace {
        Box::new(
            TraceSource::open(path, Some(clock.clone()))
                .with_context(|| format!("opening {}", path.display()))?,
        )
    } else if let Some(addr) = args.listen {
        let src = TcpSource::bind(addr).with_context(|| format!("binding {addr}"))?;
        println!("frames on {}", src.local_addr()?);
        std::io::stdout().flush()?;
        Box::new(src)
    } else if args.simulate {
        let mut sim = SimConfig::new(&device);
        sim.seed = args.sim_seed;
        sim.start_ts = clock.now_ms();
        sim.random_sos = true;
        let interval = sim.interval_ms;
        Box::new(SimSource::new(
            Simulator::new(sim),
            clock.clone(),
            interval,
            None,
        ))
    } else {
        return Err(CliError::Usage(
            "one of --trace, --listen or --simulate is required".into(),
        ));
    };

    let client = HttpStoreClient::new(&store_url, token, HTTP_TIMEOUT);
    let mut gw = Gateway::new(config, client).map_err(CliError::Usage)?;
    if let Some(path) = &events_log {
        let sink: Arc<dyn AlertSink> =
            Arc::new(FileSink::open(path).with_context(|| format!("opening {}", path.display()))?);
        gw = gw.with_event_sinks(vec![sink]);
    }
    let stop = stop_flag()?;
    let intake = gw.intake();
    let source_done = Arc::new(AtomicBool::new(false));

    let pump_thread = {
        let (clock, stop, done) = (clock.clone(), stop.clone(), source_done.clone());
        std::thread::Builder::new()
            .name("frame-source".into())
            .spawn(move || {
                let lines = pump(source.as_mut(), &intake, clock.as_ref(), &stop);
                done.store(true, Ordering::SeqCst);
                lines
            })?
    };

    // Tick loop; with --exit-when-done it ends once the source is exhausted
    // and nothing is left to push.
    let run_stop = Arc::new(AtomicBool::new(false));
    let watcher = {
        let (stop, run_stop, done, intake) = (
            stop.clone(),
            run_stop.clone(),
            source_done.clone(),
            gw.intake(),
        );
        let exit_when_done = args.exit_when_done;
        std::thread::spawn(move || loop {
            let drained = exit_when_done && done.load(Ordering::SeqCst) && intake.pending() == 0;
            if stop.load(Ordering::SeqCst) || drained {
                run_stop.store(true, Ordering::SeqCst);
                return;
            }
            std::thread::sleep(Duration::from_millis(20));
        })
    };
    run_gateway(&mut gw, clock.as_ref(), &run_stop);
    stop.store(true, Ordering::SeqCst);
    let lines = pump_thread
        .join()
        .map_err(|_| anyhow::anyhow!("frame source thread panicked"))?;
    let _ = watcher.join();

    let push = gw.stats();
    let intake = gw.intake().stats();
    println!(
        "lines {lines}, accepted {}, malformed {}, foreign {}, dropped {}, pending {}",
        intake.accepted,
        intake.malformed,
        intake.foreign,
        intake.dropped,
        gw.intake().pending()
    );
    tracing::debug!(?push, "push stats");
    if gw.intake().pending() > 0 {
        return Err(CliError::Failed(anyhow::anyhow!(
            "{} records were not delivered to the store",
            gw.intake().pending()
        )));
    }
    Ok(())
}

pub fn alerts(args: AlertsArgs) -> CliResult {
    let mut config = match &args.config {
        Some(p) => AlertConfig::load(p).map_err(|e| match e {
            smartbag_services::alerts::ConfigError::Read { .. } => CliError::Failed(e.into()),
            other => CliError::Usage(other.to_string()),
        })?,
        None => AlertConfig::default(),
    };
    if let Some(v) = args.store {
        config.store_url = v;
    }
    if args.token.is_some() {
        config.token = args.token;
    }
    if let Some(v) = args.model {
        config.model_path = v;
    }
    if !args.devices.is_empty() {
        config.devices = args.devices;
    }
    if let Some(v) = args.log {
        config.notification_log = v;
    }
    if args.cursor.is_some() {
        config.cursor_path = args.cursor;
    }
    if args.webhook.is_some() {
        config.webhook_url = args.webhook;
    }
    if let Some(v) = args.poll_ms {
        config.poll_interval_ms = v;
    }
    config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let clock = clock_for(args.speed)?;

    let model = TrainedModel::load(&config.model_path)
        .with_context(|| format!("loading {}", config.model_path.display()))?;
    let mut sinks: Vec<Arc<dyn AlertSink>> = vec![Arc::new(
        FileSink::open(&config.notification_log)
            .with_context(|| format!("opening {}", config.notification_log.display()))?,
    )];
    if let Some(url) = &config.webhook_url {
        sinks.push(Arc::new(WebhookSink::new(url.clone())));
    }
    let settings = AlertSettings {
        devices: config.devices.clone(),
        rules: config.rules.clone(),
        batch_limit: config.batch_limit,
        alarm_ttl_ms: config.alarm_ttl_ms,
    };
    let client = HttpStoreClient::new(&config.store_url, config.token.clone(), HTTP_TIMEOUT);
    let mut svc = AlertService::new(
        client,
        model,
        settings,
        sinks,
        Cursors::load(config.cursor_path.clone()),
    );
    if args.once {
        let report = svc.poll_once(clock.now_ms())?;
        println!(
            "processed {}, malformed {}, events {}",
            report.processed,
            report.malformed,
            report.events.len()
        );
        return Ok(());
    }
    let stop = stop_flag()?;
    // Line read by scripts waiting for readiness.
    println!(
        "polling {} for {}",
        config.store_url,
        config.devices.join(",")
    );
    std::io::stdout().flush()?;
    run_alertsvc(&mut svc, clock.as_ref(), config.poll_interval_ms, &stop);
    let s = svc.stats();
    println!(
        "processed {}, malformed {}, events {}, delivery failures {}",
        s.processed, s.malformed, s.events, s.delivery_failures
    );
    Ok(())
}

pub fn replay(args: ReplayArgs) -> CliResult {
    let pacing = if args.speed == 0.0 {
        None
    } else {
        Some(clock_for(args.speed)?)
    };
    let file =
        File::open(&args.trace).with_context(|| format!("opening {}", args.trace.display()))?;
    let mut conn =
        TcpStream::connect(args.to).with_context(|| format!("connecting to {}", args.to))?;
    let stop = stop_flag()?;
    let sent = stream_lines(BufReader::new(file), &mut conn, pacing, &stop)?;
    println!("sent {sent} lines to {}", args.to);
    Ok(())
}

pub fn alarm(args: AlarmArgs) -> CliResult {
    let client = HttpStoreClient::new(&args.store, args.token, HTTP_TIMEOUT);
    let cmd = trigger_alarm(&client, &args.device, system_now_ms()).map_err(|e| match e {
        smartbag_services::alerts::AlarmError::InvalidDevice(_) => CliError::Usage(e.to_string()),
        other => CliError::Failed(other.into()),
    })?;
    println!("alarm requested for {} at {}", cmd.device, cmd.issued_ts);
    Ok(())
}
