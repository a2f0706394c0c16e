use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use bldc_core::ann::{
    build_case, build_case_normalized, gradient_audit, predict_case, read_model, train,
    write_metrics_csv, write_model, CaseId, CaseOptions, EpochMetrics, Mlp, SavedModel,
    AUDIT_TOLERANCE, METRICS_COLUMNS,
};
use bldc_core::sim::{
    export_csv, format_sig9, simulate_with_summary, ColumnSource, ColumnTable, SimConfig,
};

use crate::svg::{line_chart, strip_chart, Series};
use crate::{CliError, FiguresArgs, PredictArgs, TrainArgs};

/// Span of the EMF, current, Hall and PWM charts, from the start of the run
/// where the electrical frequency is still well below the log rate.
pub const STRIP_WINDOW: f64 = 1.0;

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_with<F>(path: &Path, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let err = |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(err)?);
    body(&mut out).map_err(err)?;
    out.flush().map_err(err)
}

fn open_input(path: &Path, what: &'static str) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|_| CliError::MissingInput {
            what,
            path: path.to_path_buf(),
        })
}

fn read_table(path: &Path, what: &'static str) -> Result<ColumnTable, CliError> {
    Ok(ColumnTable::read_csv(open_input(path, what)?)?)
}

fn case_id(n: u32) -> Result<CaseId, CliError> {
    CaseId::from_number(n).map_err(|e| CliError::Usage(e.to_string()))
}

fn trace_path(trace: &Option<PathBuf>, out: &Path) -> PathBuf {
    trace.clone().unwrap_or_else(|| out.join("trace.csv"))
}

/// Runs the simulation into `out/trace.csv` and `out/summary.txt` and
/// returns the summary text.
pub fn cmd_simulate(
    config: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
) -> Result<String, CliError> {
    let mut cfg = match config {
        Some(path) => SimConfig::load(path)?,
        None => SimConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let (trace, s) = simulate_with_summary(&cfg)?;
    create_dir(out)?;
    let trace_file = out.join("trace.csv");
    let file = File::create(&trace_file).map_err(|source| CliError::Write {
        path: trace_file.clone(),
        source,
    })?;
    export_csv(&trace, BufWriter::new(file))?;

    let settle = s.settle_time.map_or("never".to_string(), format_sig9);
    let summary = format!(
        "rows {}\nseed {}\nreference_rpm {}\nsettle_time_s {settle}\nband {}\n\
         steady_state_error {}\nfinal_load_torque_nm {}\nwindow_s {}\nmean_speed_rad_s {}\n\
         mean_te_nm {}\nmean_load_plus_friction_nm {}\n",
        trace.records.len(),
        cfg.seed,
        format_sig9(s.reference_rpm),
        format_sig9(s.band),
        format_sig9(s.steady_state_error),
        format_sig9(s.final_load_torque),
        format_sig9(s.window),
        format_sig9(s.mean_speed_rad),
        format_sig9(s.mean_te),
        format_sig9(s.mean_load_torque + cfg.motor.viscous_friction * s.mean_speed_rad),
    );
    write_with(&out.join("summary.txt"), |w| {
        w.write_all(summary.as_bytes())
    })?;
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub report: String,
    pub history: Vec<EpochMetrics>,
    /// Validation MSE of predicting the training mean (normalized units).
    pub baseline_mse: f64,
    pub metrics_path: PathBuf,
    pub model_path: PathBuf,
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainOutcome, CliError> {
    let case = case_id(args.case)?;
    let table = read_table(&trace_path(&args.trace, &args.out), "trace")?;
    let opts = CaseOptions {
        seed: args.seed,
        softmax_output: args.softmax_output,
        ..CaseOptions::default()
    };
    let (data, specs) = build_case(case, &table, &opts)?;
    let mlp = Mlp::new(data.input_width(), &specs, args.seed)?;
    let mut cfg = case.train_config();
    cfg.epochs = args.epochs;
    cfg.seed = args.seed;
    if let Some(lr) = args.lr {
        cfg.learning_rate = lr;
    }
    let (net, history) = train(&mlp, &data, &cfg)?;

    create_dir(&args.out)?;
    let metrics_path = args.out.join(format!("case{}_metrics.csv", case.number()));
    write_with(&metrics_path, |w| write_metrics_csv(&history, w))?;
    let model_path = args.out.join(format!("case{}.model", case.number()));
    let saved = SavedModel {
        mlp: net,
        case: Some(case),
        input_norm: data.input_norm.clone(),
        target_norm: data.target_norm.clone(),
    };
    write_with(&model_path, |w| write_model(&saved, w))?;

    let widths: Vec<String> = std::iter::once(data.input_width())
        .chain(specs.iter().map(|s| s.width))
        .map(|w| w.to_string())
        .collect();
    let optimizer = cfg.optimizer.name();
    let baseline_mse = data.mean_baseline_mse();
    let mut report = format!(
        "{case}: {} -> {}\ntopology {} ({} hidden, {} output)\nrows {} train / {} validation\n\
         {} epochs, {optimizer} lr {} decay {} backoff {} batch {}\n",
        data.input_columns.join(","),
        data.target_columns.join(","),
        widths.join("-"),
        specs[0].activation,
        specs[specs.len() - 1].activation,
        data.split.train.len(),
        data.split.validation.len(),
        cfg.epochs,
        cfg.learning_rate,
        cfg.lr_decay,
        cfg.lr_backoff,
        cfg.batch_size,
    );
    if let Some(last) = history.last() {
        for (name, value) in METRICS_COLUMNS.iter().skip(1).zip([
            last.train_loss,
            last.val_loss,
            last.train_accuracy,
            last.val_accuracy,
            last.mse,
            last.mae,
        ]) {
            report.push_str(&format!("{name} {}\n", format_sig9(value)));
        }
    }
    report.push_str(&format!("baseline_mse {}\n", format_sig9(baseline_mse)));
    report.push_str(&format!(
        "wrote {}\nwrote {}\n",
        metrics_path.display(),
        model_path.display()
    ));
    Ok(TrainOutcome {
        report,
        history,
        baseline_mse,
        metrics_path,
        model_path,
    })
}

pub fn cmd_predict(args: &PredictArgs) -> Result<PathBuf, CliError> {
    let case = case_id(args.case)?;
    let model_path = args
        .model
        .clone()
        .unwrap_or_else(|| args.out.join(format!("case{}.model", case.number())));
    let saved = read_model(open_input(&model_path, "model")?)?;
    if let Some(stored) = saved.case {
        if stored != case {
            return Err(CliError::Usage(format!(
                "{} holds a {stored} model, not {case}",
                model_path.display()
            )));
        }
    }
    let table = read_table(&trace_path(&args.trace, &args.out), "trace")?;
    let opts = CaseOptions {
        seed: args.seed,
        ..CaseOptions::default()
    };
    let (data, _) = if saved.input_norm.is_empty() {
        build_case(case, &table, &opts)?
    } else {
        build_case_normalized(case, &table, &opts, &saved.input_norm, &saved.target_norm)?
    };
    let pred = predict_case(&saved.mlp, &data)?;
    let times = table.column("t");

    create_dir(&args.out)?;
    let path = args
        .out
        .join(format!("case{}_predictions.csv", case.number()));
    write_with(&path, |w| {
        let mut header = vec!["row".to_string(), "t".to_string(), "validation".to_string()];
        for c in &pred.columns {
            header.push(format!("{c}_actual"));
            header.push(format!("{c}_predicted"));
        }
        writeln!(w, "{}", header.join(","))?;
        for r in 0..pred.predicted.len() {
            let t = times.as_ref().map_or(r as f64, |t| t[r]);
            let mut fields = vec![
                r.to_string(),
                format_sig9(t),
                u8::from(pred.validation[r]).to_string(),
            ];
            for (a, p) in pred.actual[r].iter().zip(&pred.predicted[r]) {
                fields.push(format_sig9(*a));
                fields.push(format_sig9(*p));
            }
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    })?;
    Ok(path)
}

#[derive(Debug, Clone)]
pub struct GradcheckOutcome {
    pub report: String,
    pub passed: bool,
    pub max_rel_error: f64,
}

pub fn cmd_gradcheck(seed: u64, networks: usize) -> Result<GradcheckOutcome, CliError> {
    if networks == 0 {
        return Err(CliError::Usage("--networks must be at least 1".into()));
    }
    let audit = gradient_audit(seed, networks)?;
    let mut report = String::new();
    for c in &audit.combos {
        report.push_str(&format!(
            "{:<36} networks {} max_rel_error {:.3e}\n",
            c.label(),
            c.networks,
            c.max_rel_error
        ));
    }
    let passed = audit.passed();
    report.push_str(&format!(
        "max_rel_error {:.3e} tolerance {:e} {}\n",
        audit.max_rel_error,
        AUDIT_TOLERANCE,
        if passed { "PASS" } else { "FAIL" }
    ));
    Ok(GradcheckOutcome {
        report,
        passed,
        max_rel_error: audit.max_rel_error,
    })
}

fn column(table: &ColumnTable, name: &str, path: &Path) -> Result<Vec<f64>, CliError> {
    table
        .column(name)
        .ok_or_else(|| CliError::Usage(format!("{}: missing column `{name}`", path.display())))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or("chart".into(), |s| s.to_string_lossy().into_owned())
}

/// Writes the charts and returns their paths in write order.
pub fn cmd_figures(args: &FiguresArgs) -> Result<Vec<PathBuf>, CliError> {
    let default_trace = args.out.join("trace.csv");
    let trace = match &args.trace {
        Some(p) => Some(p.clone()),
        None if default_trace.exists() => Some(default_trace),
        None => None,
    };
    if trace.is_none() && args.metrics.is_empty() && args.predictions.is_empty() {
        return Err(CliError::Usage(
            "nothing to draw: give --trace, --metrics or --predictions".into(),
        ));
    }

    let mut charts: Vec<(String, String)> = vec![];
    if let Some(path) = &trace {
        let table = read_table(path, "trace")?;
        let col = |name: &str| column(&table, name, path);
        let t = col("t")?;
        let series = |names: &[&str]| -> Result<Vec<Series>, CliError> {
            names
                .iter()
                .map(|n| Ok(Series::new(*n, t.clone(), col(n)?)))
                .collect()
        };
        charts.push((
            "speed.svg".into(),
            line_chart(
                "Reference and actual speed",
                "time [s]",
                "speed [rpm]",
                &series(&["speed_ref", "speed_actual"])?,
            ),
        ));
        charts.push((
            "torque.svg".into(),
            line_chart(
                "Load and electromagnetic torque",
                "time [s]",
                "torque [N·m]",
                &series(&["load_torque", "te"])?,
            ),
        ));

        let n = t.iter().take_while(|&&v| v <= STRIP_WINDOW + 1e-9).count();
        let tw = t[..n].to_vec();
        let window = |names: &[&str]| -> Result<Vec<Series>, CliError> {
            names
                .iter()
                .map(|c| Ok(Series::new(*c, tw.clone(), col(c)?[..n].to_vec())))
                .collect()
        };
        let strips = |names: &[&str]| -> Result<Vec<(String, Vec<f64>)>, CliError> {
            names
                .iter()
                .map(|c| Ok((c.to_string(), col(c)?[..n].to_vec())))
                .collect()
        };
        charts.push((
            "back_emf.svg".into(),
            line_chart(
                "Phase back-EMF",
                "time [s]",
                "EMF [V]",
                &window(&["ea", "eb", "ec"])?,
            ),
        ));
        charts.push((
            "current.svg".into(),
            line_chart(
                "Phase current",
                "time [s]",
                "current [A]",
                &window(&["ia", "ib", "ic"])?,
            ),
        ));
        charts.push((
            "emf_norm.svg".into(),
            strip_chart(
                "Normalized EMF",
                "time [s]",
                &tw,
                &strips(&["emf_norm_a", "emf_norm_b", "emf_norm_c"])?,
            ),
        ));
        charts.push((
            "hall.svg".into(),
            strip_chart(
                "Hall signals",
                "time [s]",
                &tw,
                &strips(&["hall_a", "hall_b", "hall_c"])?,
            ),
        ));
        charts.push((
            "pwm.svg".into(),
            strip_chart(
                "Gate signals",
                "time [s]",
                &tw,
                &strips(&["pwm_a", "pwm_b", "pwm_c", "pwm_d", "pwm_e", "pwm_f"])?,
            ),
        ));
    }

    for path in &args.metrics {
        let table = read_table(path, "metrics")?;
        let name = stem(path);
        let epoch = column(&table, "epoch", path)?;
        let series = |cols: &[&str]| -> Result<Vec<Series>, CliError> {
            cols.iter()
                .map(|c| Ok(Series::new(*c, epoch.clone(), column(&table, c, path)?)))
                .collect()
        };
        charts.push((
            format!("{name}_loss.svg"),
            line_chart(
                &format!("{name}: loss"),
                "epoch",
                "loss",
                &series(&["train_loss", "val_loss"])?,
            ),
        ));
        charts.push((
            format!("{name}_accuracy.svg"),
            line_chart(
                &format!("{name}: accuracy"),
                "epoch",
                "accuracy",
                &series(&["train_accuracy", "val_accuracy"])?,
            ),
        ));
        charts.push((
            format!("{name}_error.svg"),
            line_chart(
                &format!("{name}: validation MSE and MAE"),
                "epoch",
                "error",
                &series(&["mse", "mae"])?,
            ),
        ));
    }

    for path in &args.predictions {
        let table = read_table(path, "predictions")?;
        let name = stem(path);
        let t = column(&table, "t", path)?;
        let mut series = vec![];
        for n in &table.names {
            if n.ends_with("_actual") || n.ends_with("_predicted") {
                series.push(Series::new(n.clone(), t.clone(), column(&table, n, path)?));
            }
        }
        if series.is_empty() {
            return Err(CliError::Usage(format!(
                "{}: no *_actual or *_predicted columns",
                path.display()
            )));
        }
        charts.push((
            format!("{name}.svg"),
            line_chart(
                &format!("{name}: actual and predicted"),
                "time [s]",
                "value",
                &series,
            ),
        ));
    }

    create_dir(&args.out)?;
    let mut written = vec![];
    for (file, svg) in charts {
        let path = args.out.join(file);
        write_with(&path, |w| w.write_all(svg.as_bytes()))?;
        written.push(path);
    }
    Ok(written)
}
