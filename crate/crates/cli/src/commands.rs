use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ews_core::backtest::{market_portfolio, run_backtest_with, signals_on_dates, write_table, TableRow};
use ews_core::data::{log_returns, FeaturePanel, PriceSeries, ReturnSeries, Standardizer, CLOSE, LOG_RETURN};
use ews_core::eval::{onset_analysis, write_roc_csv, MetricsReport, OnsetReport, Roc};
use ews_core::neural::{Model, WindowDataset};
use ews_core::pipeline::{read_records, run_ews, split_index, write_records, WarningRecord};
use ews_core::regime::{estimate_swarch_with, hamilton_filter, SwarchParams};
use ews_core::seed::derive_seed;
use ews_core::synthetic::{synthetic_panel, STATE_COLUMN};
use ews_core::threshold::{label_crises, two_peak_cutoff, CrisisSeries};
use serde::Serialize;

use crate::config::CliConfig;
use crate::manifest::ManifestBuilder;
use crate::{BacktestArgs, CliError, EvaluateArgs, FitArgs, LabelArgs, PredictArgs, SimulateArgs, TrainArgs};

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn read_panel(path: &Path) -> Result<FeaturePanel, CliError> {
    if !path.exists() {
        return Err(CliError::Io(format!("{}: no such file", path.display())));
    }
    Ok(FeaturePanel::read_csv(path)?)
}

/// The panel minus any ground-truth column.
fn features_of(panel: &FeaturePanel) -> FeaturePanel {
    panel.without(&[STATE_COLUMN.to_string()])
}

fn returns_of(panel: &FeaturePanel) -> Result<ReturnSeries, CliError> {
    if let Some(r) = panel.column(LOG_RETURN) {
        return Ok(ReturnSeries::new(panel.dates().to_vec(), r.to_vec())?);
    }
    let close = panel
        .column(CLOSE)
        .ok_or_else(|| CliError::Usage(format!("panel needs a `{LOG_RETURN}` or `{CLOSE}` column")))?;
    Ok(log_returns(&PriceSeries::new(panel.dates().to_vec(), close.to_vec())?)?)
}

fn read_params(path: &Path) -> Result<SwarchParams, CliError> {
    Ok(SwarchParams::from_toml(&read_text(path)?)?)
}

pub fn simulate(cfg: &mut CliConfig, a: SimulateArgs) -> Result<(), CliError> {
    if let Some(t) = a.t {
        cfg.simulate.t = t;
    }
    let mut m = ManifestBuilder::new("simulate", cfg.ews.seed, cfg.to_toml());
    let s = synthetic_panel(&cfg.simulate.params, cfg.simulate.t + 1, cfg.ews.seed)?;
    s.with_states()?.write_csv(create(&a.out)?)?;
    m.artifact(&a.out);
    m.finish(&a.out)
}

pub fn fit(cfg: &mut CliConfig, a: FitArgs) -> Result<(), CliError> {
    if let Some(s) = a.starts {
        cfg.ews.estimate.starts = s;
    }
    let mut m = ManifestBuilder::new("fit", cfg.ews.seed, cfg.to_toml());
    m.input(&a.input)?;
    let returns = returns_of(&read_panel(&a.input)?)?;
    let mut ecfg = cfg.ews.estimate.clone();
    ecfg.seed = derive_seed(cfg.ews.seed, "fit");
    let fit = estimate_swarch_with(&returns, &ecfg)?;
    log::info!(
        "log-likelihood {:.4}, best start {}",
        fit.filter.log_likelihood,
        fit.diagnostics.best_start
    );
    write_text(&a.out, &fit.params.to_toml())?;
    m.artifact(&a.out);
    if let Some(p) = &a.probs {
        let mut w = create(p)?;
        writeln!(w, "date,prob_high").map_err(|e| CliError::Io(e.to_string()))?;
        for (d, v) in fit.filter.dates.iter().zip(&fit.filter.prob_high) {
            writeln!(w, "{d},{v}").map_err(|e| CliError::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| CliError::Io(e.to_string()))?;
        m.artifact(p);
    }
    m.finish(&a.out)
}

pub fn label(cfg: &mut CliConfig, a: LabelArgs) -> Result<(), CliError> {
    let mut m = ManifestBuilder::new("label", cfg.ews.seed, cfg.to_toml());
    m.input(&a.input)?;
    m.input(&a.params)?;
    let returns = returns_of(&read_panel(&a.input)?)?;
    let params = read_params(&a.params)?;
    let filter = hamilton_filter(&params, &returns)?;
    let choice = two_peak_cutoff(&filter.prob_high, &cfg.ews.threshold)?;
    if choice.fallback {
        log::warn!("histogram is not bimodal; using the fallback cutoff {}", choice.cutoff);
    }
    let crisis = label_crises(&filter.dates, &filter.prob_high, choice.cutoff)?;
    crisis.write_csv(create(&a.out)?)?;
    m.artifact(&a.out);
    if let Some(h) = &a.histogram {
        choice.histogram.write_csv(create(h)?)?;
        m.artifact(h);
    }
    m.finish(&a.out)
}

pub fn train(cfg: &mut CliConfig, a: TrainArgs) -> Result<(), CliError> {
    if let Some(p) = a.predictor {
        cfg.ews.predictor = p;
    }
    if let Some(e) = a.epochs {
        cfg.ews.train.epochs = e;
    }
    cfg.ews.validate()?;
    let mut m = ManifestBuilder::new("train", cfg.ews.seed, cfg.to_toml());
    for p in [&a.input, &a.params, &a.labels] {
        m.input(p)?;
    }
    let panel = read_panel(&a.input)?;
    let returns = returns_of(&panel)?;
    let features = features_of(&panel);
    let features = match &cfg.ews.features {
        Some(names) => features.select(names)?,
        None => features,
    };
    let filter = hamilton_filter(&read_params(&a.params)?, &returns)?;
    let crisis = CrisisSeries::read_csv(&a.labels)?;
    if crisis.dates != panel.dates() {
        return Err(CliError::Usage("label dates do not match the panel".into()));
    }
    let n_train = split_index(panel.n_rows(), cfg.ews.split, cfg.ews.window)?;
    let std = Standardizer::fit(features.columns(), 0..n_train);
    let rows: Vec<Vec<f64>> = (0..n_train)
        .map(|i| {
            let mut r = features.row(i);
            std.apply(&mut r);
            r.push(filter.prob_high[i]);
            r.push(f64::from(crisis.labels[i]));
            r
        })
        .collect();
    let data = WindowDataset::from_rows(&rows, &crisis.labels[..n_train], cfg.ews.window)?;
    let (model, report) = Model::train(cfg.ews.predictor, &data, &cfg.ews.train_config())?;

    let mut w = create(&a.out)?;
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
    writeln!(w, "features {}", features.names().join(",")).map_err(io)?;
    writeln!(w, "means {}", join(&std.means)).map_err(io)?;
    writeln!(w, "scales {}", join(&std.scales)).map_err(io)?;
    model.write_text(&mut w)?;
    w.flush().map_err(io)?;
    m.artifact(&a.out);
    if let Some(p) = &a.losses {
        let mut w = create(p)?;
        writeln!(w, "epoch,loss").map_err(io)?;
        for (i, l) in report.epoch_losses.iter().enumerate() {
            writeln!(w, "{},{l}", i + 1).map_err(io)?;
        }
        w.flush().map_err(io)?;
        m.artifact(p);
    }
    m.finish(&a.out)
}

pub fn predict(cfg: &mut CliConfig, a: PredictArgs) -> Result<(), CliError> {
    let e = &mut cfg.ews;
    if let Some(v) = a.window {
        e.window = v;
    }
    if let Some(v) = a.refit_stride {
        e.refit_stride = v;
    }
    if let Some(v) = a.predictor {
        e.predictor = v;
    }
    if let Some(v) = a.retrain {
        e.retrain = v;
    }
    if let Some(v) = a.split {
        e.split = v;
    }
    e.validate()?;
    let mut m = ManifestBuilder::new("predict", cfg.ews.seed, cfg.to_toml());
    m.input(&a.input)?;
    let panel = features_of(&read_panel(&a.input)?);
    let run = run_ews(&panel, &cfg.ews)?;
    log::info!("{} refits ({} failed), {} trainings", run.refits, run.failed_refits, run.trainings.len());
    write_records(&run.records, create(&a.out)?)?;
    m.artifact(&a.out);
    m.finish(&a.out)
}

#[derive(Serialize)]
struct EvaluateOutput {
    metrics: MetricsReport,
    onsets: OnsetReport,
}

pub fn evaluate(cfg: &mut CliConfig, a: EvaluateArgs) -> Result<(), CliError> {
    if let Some(h) = a.horizon {
        cfg.evaluate.horizon = h;
    }
    if a.all {
        cfg.evaluate.test_only = false;
    }
    let mut m = ManifestBuilder::new("evaluate", cfg.ews.seed, cfg.to_toml());
    m.input(&a.warnings)?;
    let records: Vec<WarningRecord> = read_records(&a.warnings)?
        .into_iter()
        .filter(|r| !r.suppressed && (r.in_test || !cfg.evaluate.test_only))
        .collect();
    let labels: Vec<u8> = match &a.truth {
        Some(path) => {
            m.input(path)?;
            let panel = read_panel(path)?;
            let state = panel
                .column(STATE_COLUMN)
                .ok_or_else(|| CliError::Usage(format!("{} has no `{STATE_COLUMN}` column", path.display())))?;
            records
                .iter()
                .map(|r| {
                    panel
                        .dates()
                        .binary_search(&r.target_date)
                        .map(|i| u8::from(state[i] >= 0.5))
                        .map_err(|_| CliError::Usage(format!("no truth for {}", r.target_date)))
                })
                .collect::<Result<_, _>>()?
        }
        None => records
            .iter()
            .map(|r| {
                r.true_label
                    .ok_or_else(|| CliError::Usage(format!("record for {} has no label", r.target_date)))
            })
            .collect::<Result<_, _>>()?,
    };
    let probs: Vec<f64> = records.iter().map(|r| r.predicted.unwrap_or(0.0)).collect();
    let signals: Vec<u8> = records.iter().map(|r| r.signal).collect();
    let metrics = MetricsReport::compute(&labels, &probs, &signals)?;
    let onsets = onset_analysis(&labels, &signals, cfg.evaluate.horizon)?;
    if let Some(p) = &a.roc {
        let roc = Roc {
            points: metrics.roc_points.clone(),
            auc: metrics.auc,
        };
        write_roc_csv(&roc, create(p)?)?;
        m.artifact(p);
    }
    let text = toml::to_string(&EvaluateOutput { metrics, onsets }).expect("report serializes");
    write_text(&a.out, &text)?;
    m.artifact(&a.out);
    m.finish(&a.out)
}

pub fn backtest(cfg: &mut CliConfig, a: BacktestArgs) -> Result<(), CliError> {
    if let Some(rf) = a.rf {
        cfg.backtest.rf = rf;
    }
    if let Some(c) = a.cost {
        cfg.backtest.cost = c;
    }
    let mut m = ManifestBuilder::new("backtest", cfg.ews.seed, cfg.to_toml());
    m.input(&a.input)?;
    m.input(&a.warnings)?;
    let panel = read_panel(&a.input)?;
    let close = panel
        .column(CLOSE)
        .ok_or_else(|| CliError::Usage(format!("panel needs a `{CLOSE}` column")))?;
    let records = read_records(&a.warnings)?;
    let start = if a.all {
        0
    } else {
        let first = records
            .iter()
            .find(|r| r.in_test)
            .ok_or_else(|| CliError::Usage("no test-range records".into()))?;
        panel
            .dates()
            .binary_search(&first.date)
            .map_err(|_| CliError::Usage("records do not match the panel dates".into()))?
    };
    let dates = panel.dates()[start..].to_vec();
    let prices = PriceSeries::new(dates.clone(), close[start..].to_vec())?;
    let signals = signals_on_dates(&dates, &records);
    let mut rows = vec![
        TableRow::new("market", &market_portfolio(&prices, cfg.backtest.rf)?),
        TableRow::new("ews", &run_backtest_with(&prices, &signals, &cfg.backtest)?),
    ];
    if a.oracle {
        let state = panel
            .column(STATE_COLUMN)
            .ok_or_else(|| CliError::Usage(format!("--oracle needs a `{STATE_COLUMN}` column")))?;
        // Knows tomorrow's regime, so the one-day position lag lines up exactly.
        let oracle: Vec<u8> = (start..close.len())
            .map(|i| state.get(i + 1).map_or(0, |&s| u8::from(s >= 0.5)))
            .collect();
        rows.push(TableRow::new("oracle", &run_backtest_with(&prices, &oracle, &cfg.backtest)?));
    }
    write_table(&rows, create(&a.out)?)?;
    m.artifact(&a.out);
    m.finish(&a.out)
}
