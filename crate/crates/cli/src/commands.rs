use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use emodel_core::dataio::{
    load_samples, load_subjective_records, profiles_to_toml, read_metric_stream, EmbeddedDatasets,
    ErrorPolicy,
};
use emodel_core::eval::EvalMode;
use emodel_core::fit::{bias_samples, fit_surface_with, select_termset_with, RmseDenominator};
use emodel_core::monitor::{score_window, WindowAggregator, WindowEstimate, WindowSpec};
use emodel_core::{
    evaluate_models, BiasPolynomial, CodecProfile, EvaluationReport, FitResult, GridSpec,
    ModelKind, NetworkCondition, QualityEstimate, TermSet, TestSet,
};
use serde::Serialize;

use crate::render::{f3, num, write_json, write_json_line, Table};
use crate::{
    read_file, CliError, CliResult, Context, Denominator, Format, GridArgs, RangeArg, EXIT_DATA,
    EXIT_OK,
};

const DEFAULT_WINDOW_RECORDS: usize = 10;

pub(crate) const TS2_NOTE: &str =
    "published TS2 simplified MAPE appears as 29.23 in the results table and 29.30 in the text; 29.23 is used";

#[derive(Serialize)]
struct PredictOutput<'a> {
    codec: &'a str,
    #[serde(flatten)]
    estimate: QualityEstimate,
}

pub fn predict(
    ctx: &Context,
    out: &mut dyn Write,
    loss: f64,
    delay: f64,
    model: ModelKind,
) -> CliResult<i32> {
    ctx.require_models(&[model])?;
    let cond = NetworkCondition::new(loss, delay)?;
    let e = ctx.estimator().estimate(model, &cond, ctx.extrapolate)?;
    match ctx.format {
        Format::Json => write_json(
            out,
            &PredictOutput {
                codec: &ctx.profile.name,
                estimate: e,
            },
        )?,
        Format::Csv => {
            let mut t = Table::new([
                "model",
                "codec",
                "loss_percent",
                "delay_ms",
                "r_value",
                "mos",
                "id",
                "ipl",
                "bias",
                "extrapolated",
            ]);
            t.row([
                model.to_string(),
                ctx.profile.name.clone(),
                num(ctx.format, loss),
                num(ctx.format, delay),
                num(ctx.format, e.r_value),
                num(ctx.format, e.mos),
                num(ctx.format, e.id),
                num(ctx.format, e.ipl),
                e.bias.map(|b| num(ctx.format, b)).unwrap_or_default(),
                e.extrapolated.to_string(),
            ]);
            t.write_csv(out)?;
        }
        Format::Table => {
            let pairs = [
                ("model", model.to_string()),
                ("codec", ctx.profile.name.clone()),
                ("loss_percent", f3(loss)),
                ("delay_ms", f3(delay)),
                ("R", f3(e.r_value)),
                ("MOS", f3(e.mos)),
                ("Id", f3(e.id)),
                ("Ipl", f3(e.ipl)),
                ("bias", e.bias.map(f3).unwrap_or_else(|| "-".into())),
                ("extrapolated", e.extrapolated.to_string()),
            ];
            for (k, v) in pairs {
                writeln!(out, "{k:<13}{v}")?;
            }
        }
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SweepPoint {
    loss_percent: f64,
    delay_ms: f64,
    extrapolated: bool,
    models: Vec<SweepModel>,
}

#[derive(Serialize)]
struct SweepModel {
    model: ModelKind,
    r_value: f64,
    mos: f64,
}

pub fn sweep(
    ctx: &Context,
    out: &mut dyn Write,
    loss: &RangeArg,
    delays: &[f64],
    models: &[ModelKind],
) -> CliResult<i32> {
    let losses = loss.values();
    if losses.is_empty() {
        return Err(CliError::usage(format!(
            "empty loss range {}:{}:{}",
            loss.start, loss.end, loss.step
        )));
    }
    if delays.is_empty() {
        return Err(CliError::usage("empty delay list"));
    }
    if models.is_empty() {
        return Err(CliError::usage("no models selected"));
    }
    ctx.require_models(models)?;
    let rows = emodel_core::sweep::sweep(&ctx.estimator(), &losses, delays, ctx.extrapolate)?;

    if ctx.format == Format::Json {
        let points: Vec<SweepPoint> = rows
            .iter()
            .map(|r| SweepPoint {
                loss_percent: r.condition.loss_percent,
                delay_ms: r.condition.delay_ms,
                extrapolated: r.extrapolated,
                models: models
                    .iter()
                    .map(|&m| SweepModel {
                        model: m,
                        r_value: r.get(m).r_value,
                        mos: r.get(m).mos,
                    })
                    .collect(),
            })
            .collect();
        write_json(out, &points)?;
        return Ok(EXIT_OK);
    }

    let mut header = vec!["delay_ms".to_string(), "loss_percent".to_string()];
    for m in models {
        header.push(format!("r_{m}"));
        header.push(format!("mos_{m}"));
    }
    header.push("extrapolated".into());
    let mut t = Table::new(header);
    for r in &rows {
        let mut cells = vec![
            num(ctx.format, r.condition.delay_ms),
            num(ctx.format, r.condition.loss_percent),
        ];
        for &m in models {
            cells.push(num(ctx.format, r.get(m).r_value));
            cells.push(num(ctx.format, r.get(m).mos));
        }
        cells.push(r.extrapolated.to_string());
        t.row(cells);
    }
    t.write(ctx.format, out)?;
    Ok(EXIT_OK)
}

fn denominator(d: Denominator) -> RmseDenominator {
    match d {
        Denominator::Dof => RmseDenominator::DegreesOfFreedom,
        Denominator::N => RmseDenominator::SampleCount,
    }
}

fn termset(name: &str) -> CliResult<TermSet> {
    TermSet::by_name(name).ok_or_else(|| {
        CliError::usage(format!(
            "unknown term set '{name}' (poly31, poly23, poly32, poly33)"
        ))
    })
}

pub(crate) fn grid_from(args: &GridArgs) -> CliResult<GridSpec> {
    let (loss, delay) = (args.grid_loss.values(), args.grid_delay.values());
    if loss.is_empty() || delay.is_empty() {
        return Err(CliError::usage("empty grid range"));
    }
    Ok(GridSpec::new(loss, delay)?)
}

/// Largest |refit − reference| over the grid points.
pub(crate) fn max_gap(fit: &FitResult, reference: &BiasPolynomial, grid: &GridSpec) -> f64 {
    grid.points()
        .iter()
        .map(|c| {
            (fit.eval(c.loss_percent, c.delay_ms) - reference.eval(c.loss_percent, c.delay_ms))
                .abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Serialize)]
struct TermCoefficient {
    loss_power: u32,
    delay_power: u32,
    coefficient: f64,
}

fn coefficient_rows(fit: &FitResult) -> Vec<TermCoefficient> {
    fit.termset
        .exponents()
        .iter()
        .zip(&fit.coefficients)
        .map(|(&(i, j), &c)| TermCoefficient {
            loss_power: i,
            delay_power: j,
            coefficient: c,
        })
        .collect()
}

fn term_label(i: u32, j: u32) -> String {
    let part = |v: &str, k: u32| match k {
        0 => String::new(),
        1 => v.to_string(),
        _ => format!("{v}^{k}"),
    };
    let s = [part("P", i), part("d", j)]
        .into_iter()
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>();
    if s.is_empty() {
        "1".into()
    } else {
        s.join("*")
    }
}

#[derive(Serialize)]
struct DeriveReport {
    codec: String,
    termset: String,
    rmse_denominator: RmseDenominator,
    grid: GridSpec,
    n_samples: usize,
    r_squared: f64,
    rmse: f64,
    max_abs_diff_vs_builtin: f64,
    coefficients: Vec<TermCoefficient>,
    #[serde(skip_serializing_if = "Option::is_none")]
    written: Option<String>,
}

pub fn derive_bias(
    ctx: &Context,
    out: &mut dyn Write,
    grid: &GridArgs,
    termset_name: &str,
    denom: Denominator,
    output: Option<&Path>,
    name: Option<&str>,
) -> CliResult<i32> {
    let terms = termset(termset_name)?;
    let grid = grid_from(grid)?;
    let samples = bias_samples(
        &emodel_core::SubjectiveSurface::THAI_G729,
        &ctx.profile,
        &grid,
    )?;
    let fit = fit_surface_with(&samples, &terms, denominator(denom))?;
    let gap = max_gap(&fit, &BiasPolynomial::THAI_G729, &grid);

    let mut written = None;
    if let Some(path) = output {
        let bias = fit.to_bias_polynomial()?;
        let profile = CodecProfile {
            name: name
                .map(str::to_string)
                .unwrap_or_else(|| format!("{}-derived", ctx.profile.name)),
            bias: Some(bias),
            ..ctx.profile.clone()
        };
        let text = profiles_to_toml([&profile])?;
        std::fs::write(path, text)
            .map_err(|e| CliError::data(format!("cannot write '{}': {e}", path.display())))?;
        written = Some(path.display().to_string());
    }

    let report = DeriveReport {
        codec: ctx.profile.name.clone(),
        termset: terms.name().to_string(),
        rmse_denominator: denominator(denom),
        grid,
        n_samples: fit.n_samples,
        r_squared: fit.r_squared,
        rmse: fit.rmse,
        max_abs_diff_vs_builtin: gap,
        coefficients: coefficient_rows(&fit),
        written,
    };
    match ctx.format {
        Format::Json => write_json(out, &report)?,
        Format::Csv => {
            let mut t = Table::new(["term", "loss_power", "delay_power", "coefficient"]);
            for c in &report.coefficients {
                t.row([
                    term_label(c.loss_power, c.delay_power),
                    c.loss_power.to_string(),
                    c.delay_power.to_string(),
                    format!("{:e}", c.coefficient),
                ]);
            }
            t.write_csv(out)?;
        }
        Format::Table => {
            writeln!(out, "termset      {}", report.termset)?;
            writeln!(out, "samples      {}", report.n_samples)?;
            writeln!(out, "r_squared    {:.4}", report.r_squared)?;
            writeln!(out, "rmse         {:.4}", report.rmse)?;
            writeln!(
                out,
                "max |diff| vs built-in bias over grid  {:.3}",
                report.max_abs_diff_vs_builtin
            )?;
            let mut t = Table::new(["term", "coefficient"]);
            for c in &report.coefficients {
                t.row([
                    term_label(c.loss_power, c.delay_power),
                    format!("{:.6e}", c.coefficient),
                ]);
            }
            t.write_text(out)?;
            if let Some(p) = &report.written {
                writeln!(out, "wrote profile fragment to {p}")?;
            }
        }
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct RankedFit<'a> {
    rank: usize,
    termset: &'a str,
    terms: usize,
    r_squared: f64,
    rmse: f64,
    ss_res: f64,
    coefficients: Vec<TermCoefficient>,
}

pub fn fit(
    ctx: &Context,
    out: &mut dyn Write,
    input: &Path,
    names: &[String],
    denom: Denominator,
) -> CliResult<i32> {
    let candidates = names
        .iter()
        .map(|n| termset(n))
        .collect::<CliResult<Vec<_>>>()?;
    if candidates.is_empty() {
        return Err(CliError::usage("no term sets given"));
    }
    let samples = load_samples(read_file(input)?)?;
    let fits = select_termset_with(&samples, &candidates, denominator(denom))?;

    let ranked: Vec<RankedFit> = fits
        .iter()
        .enumerate()
        .map(|(k, f)| RankedFit {
            rank: k + 1,
            termset: f.termset.name(),
            terms: f.termset.len(),
            r_squared: f.r_squared,
            rmse: f.rmse,
            ss_res: f.ss_res,
            coefficients: coefficient_rows(f),
        })
        .collect();
    match ctx.format {
        Format::Json => write_json(out, &ranked)?,
        fmt => {
            let mut t = Table::new(["rank", "termset", "terms", "r_squared", "rmse", "ss_res"]);
            for r in &ranked {
                let (r2, rmse, ss) = match fmt {
                    Format::Table => (
                        format!("{:.4}", r.r_squared),
                        format!("{:.4}", r.rmse),
                        format!("{:.4}", r.ss_res),
                    ),
                    _ => (
                        r.r_squared.to_string(),
                        r.rmse.to_string(),
                        r.ss_res.to_string(),
                    ),
                };
                t.row([
                    r.rank.to_string(),
                    r.termset.to_string(),
                    r.terms.to_string(),
                    r2,
                    rmse,
                    ss,
                ]);
            }
            t.write(fmt, out)?;
            if fmt == Format::Table {
                writeln!(out)?;
                writeln!(out, "selected {}", ranked[0].termset)?;
                let mut c = Table::new(["term", "coefficient"]);
                for tc in &ranked[0].coefficients {
                    c.row([
                        term_label(tc.loss_power, tc.delay_power),
                        format!("{:.6e}", tc.coefficient),
                    ]);
                }
                c.write_text(out)?;
            }
        }
    }
    Ok(EXIT_OK)
}

pub(crate) fn evaluation_table(report: &EvaluationReport, format: Format) -> Table {
    let bounds = report.cells.iter().any(|c| c.bounds.is_some());
    let mut header = vec!["test_set", "model", "records", "mape"];
    if bounds {
        header.extend(["mape_low", "mape_high"]);
    }
    header.push("band");
    let mut t = Table::new(header);
    for c in &report.cells {
        let mut row = vec![
            c.test_set.clone(),
            c.model.to_string(),
            c.records.to_string(),
            num(format, c.mape),
        ];
        if let Some((lo, hi)) = c.bounds {
            row.extend([num(format, lo), num(format, hi)]);
        }
        row.push(c.band.label().to_string());
        t.row(row);
    }
    for a in &report.averages {
        let mut row = vec![
            "average".to_string(),
            a.model.to_string(),
            String::new(),
            num(format, a.average_mape),
        ];
        if let Some((lo, hi)) = a.bounds {
            row.extend([num(format, lo), num(format, hi)]);
        }
        row.push(a.band.label().to_string());
        t.row(row);
    }
    t
}

pub fn evaluate(
    ctx: &Context,
    out: &mut dyn Write,
    embedded: bool,
    records: Option<&Path>,
    models: &[ModelKind],
    mode: EvalMode,
) -> CliResult<i32> {
    if models.is_empty() {
        return Err(CliError::usage("no models selected"));
    }
    ctx.require_models(models)?;
    let sets: Vec<TestSet> = match (embedded, records) {
        (true, _) => EmbeddedDatasets::get().test_sets(),
        (false, Some(path)) => {
            let recs = load_subjective_records(read_file(path)?)?;
            TestSet::group_records(recs)?
        }
        (false, None) => return Err(CliError::usage("pass --embedded or --records PATH")),
    };
    let mut report = evaluate_models(&sets, models, &ctx.estimator(), mode)?;
    if embedded && models.contains(&ModelKind::Simplified) {
        report.notes.push(TS2_NOTE.into());
    }
    match ctx.format {
        Format::Json => write_json(out, &report)?,
        fmt => {
            evaluation_table(&report, fmt).write(fmt, out)?;
            if fmt == Format::Table {
                writeln!(out)?;
                writeln!(out, "mode {}", report.mode)?;
                if let Some(r) = &report.error_reduction {
                    writeln!(
                        out,
                        "error reduction {} -> {}: {:.2} %",
                        r.baseline, r.improved, r.percent
                    )?;
                }
                for n in &report.notes {
                    writeln!(out, "note: {n}")?;
                }
            }
        }
    }
    Ok(EXIT_OK)
}

const MONITOR_COLUMNS: [&str; 10] = [
    "stream_id",
    "start",
    "end",
    "records",
    "mean_loss_percent",
    "mean_delay_ms",
    "mos_simplified",
    "mos_enhanced",
    "r_enhanced",
    "extrapolated",
];

fn monitor_cells(w: &WindowEstimate, format: Format) -> Vec<String> {
    vec![
        w.window.stream_id.clone().unwrap_or_else(|| "-".into()),
        w.window.start.to_rfc3339(),
        w.window.end.to_rfc3339(),
        w.window.records.to_string(),
        num(format, w.window.mean_loss_percent),
        num(format, w.window.mean_delay_ms),
        num(format, w.mos_simplified),
        num(format, w.mos_enhanced),
        num(format, w.r_enhanced),
        w.extrapolated.to_string(),
    ]
}

fn emit_window(out: &mut dyn Write, format: Format, w: &WindowEstimate) -> CliResult {
    match format {
        Format::Json => write_json_line(out, w)?,
        Format::Csv => writeln!(
            out,
            "{}",
            crate::render::csv_line(&monitor_cells(w, format))
        )?,
        Format::Table => writeln!(out, "{}", monitor_cells(w, format).join("  "))?,
    }
    // Each window goes out as soon as it closes.
    out.flush()?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn monitor(
    ctx: &Context,
    stdin: &mut dyn BufRead,
    out: &mut dyn Write,
    err: &mut dyn Write,
    input: Option<&Path>,
    window_records: Option<usize>,
    window_seconds: Option<f64>,
    abort_on_error: bool,
) -> CliResult<i32> {
    ctx.require_models(&[ModelKind::Enhanced])?;
    let spec = match (window_records, window_seconds) {
        (_, Some(s)) => WindowSpec::from_seconds(s).map_err(|e| CliError::usage(e.to_string()))?,
        (Some(n), None) => {
            let spec = WindowSpec::Records(n);
            spec.validate()
                .map_err(|e| CliError::usage(e.to_string()))?;
            spec
        }
        (None, None) => WindowSpec::Records(DEFAULT_WINDOW_RECORDS),
    };
    let mut file_reader;
    let source: &mut dyn BufRead = match input {
        Some(p) if p != Path::new("-") => {
            file_reader = BufReader::new(read_file(p)?);
            &mut file_reader
        }
        _ => stdin,
    };
    let policy = if abort_on_error {
        ErrorPolicy::Abort
    } else {
        ErrorPolicy::Continue
    };
    let estimator = ctx.estimator();
    let mut agg = WindowAggregator::new(spec)?;

    match ctx.format {
        Format::Csv => writeln!(out, "{}", MONITOR_COLUMNS.join(","))?,
        Format::Table => writeln!(out, "{}", MONITOR_COLUMNS.join("  "))?,
        Format::Json => {}
    }
    let mut bad_lines = 0usize;
    for item in read_metric_stream(source, policy) {
        match item {
            Ok(rec) => {
                if let Some(w) = agg.push(&rec) {
                    emit_window(out, ctx.format, &score_window(w, &estimator)?)?;
                }
            }
            Err(e) => {
                bad_lines += 1;
                writeln!(err, "{e}")?;
                if abort_on_error {
                    return Err(CliError {
                        code: EXIT_DATA,
                        message: format!("aborted at {e}"),
                    });
                }
            }
        }
    }
    for w in agg.finish() {
        emit_window(out, ctx.format, &score_window(w, &estimator)?)?;
    }
    if bad_lines > 0 {
        writeln!(err, "skipped {bad_lines} malformed line(s)")?;
    }
    Ok(EXIT_OK)
}
