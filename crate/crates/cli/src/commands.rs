use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::Path;

use loadsmith::analysis::{check_equilibrium_all, envelope_select, Tolerance};
use loadsmith::compare::{compare_envelopes, comparison_to_markdown, write_comparison_report};
use loadsmith::docserver::{Catalog, Server};
use loadsmith::evalkit::{
    generate_fixture_with, min_k_for, pass_lower_bound, replay_spec, FixtureSpec, JudgeRegistry,
    Runner, Scenario,
};
use loadsmith::export::{
    envelope_to_markdown, export_all_inp, read_envelope_json, write_envelope_json, ExportError,
    NodeMap,
};
use loadsmith::ingest::{
    detect_format, parse_delivery, parse_delivery_unvalidated, validate_delivery, write_delivery,
    DeliveryFormat, IngestError,
};
use loadsmith::transform::{
    apply_ultimate_factor, convert_units, rename_points, scale_component, verify_coordinate_system,
    CoordinateVerdict, RenameMap,
};
use loadsmith::{Component, LoadsDelivery, PointCoordinates, UnitSystem};
use serde_json::json;

use crate::config::{output_dir, Config};
use crate::error::{CliError, EXIT_EXCEEDANCE, EXIT_FAILURE, EXIT_INFRASTRUCTURE, EXIT_OK};
use crate::sidecar::Sidecar;
use crate::{Cli, Command, EvalCommand, FixtureArgs, Format, TransformArgs};

type Outcome = Result<i32, CliError>;

/// `println!` that tolerates a closed stdout (e.g. piped into `head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

pub fn run(cli: Cli) -> Outcome {
    let config = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Convert { input, to, out } => convert(&input, to, &out),
        Command::Validate { input } => validate(&input),
        Command::Transform(args) => transform(&args),
        Command::Equilibrium {
            input,
            coords,
            abs_tol,
            rel_tol,
        } => equilibrium(&input, coords.as_deref(), abs_tol, rel_tol, &config),
        Command::Envelope { input, out_dir } => envelope(&input, out_dir.as_deref()),
        Command::ExportAnsys {
            input,
            select,
            node_map,
            exclude,
            out_dir,
        } => export_ansys(
            &input,
            &select,
            node_map.as_deref(),
            &exclude,
            out_dir.as_deref(),
            &config,
        ),
        Command::Compare {
            new,
            old,
            out,
            widen_tol,
        } => compare(&new, &old, out.as_deref(), widen_tol, &config),
        Command::Eval(EvalCommand::Run {
            scenario,
            k,
            out_dir,
            parallel,
        }) => eval_run(&scenario, k, out_dir.as_deref(), parallel, &config),
        Command::Eval(EvalCommand::Passk { p, alpha, k }) => passk(p, alpha, k),
        Command::Docserve { catalog_dir } => docserve(&catalog_dir),
        Command::Fixture(args) => fixture(&args),
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::infra(format!("cannot read {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::infra(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, text)
        .map_err(|e| CliError::infra(format!("cannot write {}: {e}", path.display())))
}

fn finish(sidecar: Sidecar, code: i32) -> Outcome {
    sidecar
        .write(code)
        .map_err(|e| CliError::infra(format!("cannot write trace: {e}")))?;
    Ok(code)
}

fn ingest_failure(path: &Path, e: IngestError) -> CliError {
    let (code, details) = match &e {
        IngestError::Invalid(report) => ("INVALID_DELIVERY", serde_json::to_value(report).ok()),
        IngestError::Syntax { .. } | IngestError::EmptyInput => ("SYNTAX_ERROR", None),
        IngestError::Schema { .. } => ("SCHEMA_ERROR", None),
        IngestError::UnknownUnit { .. } => ("UNKNOWN_UNIT", None),
    };
    CliError::Failure {
        code,
        message: format!("{}: {e}", path.display()),
        details,
    }
}

fn load_delivery(path: &Path) -> Result<LoadsDelivery, CliError> {
    let raw = read_text(path)?;
    let fmt = detect_format(&raw).map_err(|e| ingest_failure(path, e))?;
    parse_delivery(&raw, fmt).map_err(|e| ingest_failure(path, e))
}

fn delivery_format(f: Format) -> DeliveryFormat {
    match f {
        Format::Json => DeliveryFormat::Json,
        Format::Yaml => DeliveryFormat::Yaml,
    }
}

fn convert(input: &Path, to: Format, out: &Path) -> Outcome {
    let d = load_delivery(input)?;
    write_text(out, &write_delivery(&d, delivery_format(to)))?;
    let mut sc = Sidecar::for_file(out);
    sc.input(input);
    sc.output(out);
    finish(sc, EXIT_OK)
}

fn validate(input: &Path) -> Outcome {
    let raw = read_text(input)?;
    let d = detect_format(&raw)
        .and_then(|fmt| parse_delivery_unvalidated(&raw, fmt))
        .map_err(|e| ingest_failure(input, e))?;
    let report = validate_delivery(&d);
    say!("{}", report.to_json().trim_end());
    Ok(if report.ok { EXIT_OK } else { EXIT_FAILURE })
}

fn parse_pair<'a>(token: &'a str, what: &str) -> Result<(&'a str, &'a str), CliError> {
    token
        .split_once('=')
        .map(|(a, b)| (a.trim(), b.trim()))
        .filter(|(a, b)| !a.is_empty() && !b.is_empty())
        .ok_or_else(|| CliError::usage(format!("{what} expects KEY=VALUE, got `{token}`")))
}

fn transform_failure(e: impl ToString) -> CliError {
    CliError::failure("TRANSFORM_FAILED", e)
}

fn transform(args: &TransformArgs) -> Outcome {
    let mut renames = RenameMap::new();
    for token in &args.rename {
        let (old, new) = parse_pair(token, "--rename")?;
        if renames.insert(old.to_string(), new.to_string()).is_some() {
            return Err(CliError::usage(format!("point `{old}` renamed twice")));
        }
    }
    let mut scales = Vec::new();
    for token in &args.scale {
        let (comp, factor) = parse_pair(token, "--scale")?;
        let comp: Component = comp
            .to_ascii_uppercase()
            .parse()
            .map_err(|_| CliError::usage(format!("unknown component `{comp}`")))?;
        let factor: f64 = factor
            .parse()
            .map_err(|_| CliError::usage(format!("scale factor `{factor}` is not a number")))?;
        scales.push((comp, factor));
    }
    let units = args
        .units
        .as_deref()
        .map(UnitSystem::parse_pair)
        .transpose()
        .map_err(CliError::usage)?;

    let mut d = load_delivery(&args.input)?;
    let mut steps = Vec::new();
    if let Some(expected) = &args.expect_cs {
        match verify_coordinate_system(&d, expected) {
            CoordinateVerdict::Match => {}
            CoordinateVerdict::Mismatch(found) => {
                return Err(CliError::failure(
                    "COORDINATE_SYSTEM_MISMATCH",
                    format!("delivery declares `{found}`, expected `{expected}`"),
                ));
            }
            CoordinateVerdict::Unlabeled => {
                return Err(CliError::failure(
                    "COORDINATE_SYSTEM_UNLABELED",
                    format!("delivery declares no coordinate system, expected `{expected}`"),
                ));
            }
        }
    }
    let mut rename_count = 0;
    if !renames.is_empty() {
        let (renamed, count) = rename_points(&d, &renames).map_err(transform_failure)?;
        d = renamed;
        rename_count = count;
        steps.push(json!({"step": "rename", "map": renames, "count": count}));
    }
    for (comp, factor) in scales {
        d = scale_component(&d, comp, factor).map_err(transform_failure)?;
        steps.push(json!({"step": "scale", "component": comp.label(), "factor": factor}));
    }
    if let Some(target) = units {
        let from = d.units();
        d = convert_units(&d, target).map_err(transform_failure)?;
        steps.push(json!({
            "step": "units",
            "from": [from.force.token(), from.moment.token()],
            "to": [target.force.token(), target.moment.token()],
        }));
    }
    if let Some(f) = args.ultimate_factor {
        d = apply_ultimate_factor(&d, f).map_err(transform_failure)?;
        steps.push(json!({"step": "ultimate_factor", "factor": f}));
    }

    let fmt = match args.format {
        Some(f) => delivery_format(f),
        None => match args.out.extension().and_then(|e| e.to_str()) {
            Some("yaml" | "yml") => DeliveryFormat::Yaml,
            _ => DeliveryFormat::Json,
        },
    };
    write_text(&args.out, &write_delivery(&d, fmt))?;
    say!("{}", json!({"rename_count": rename_count, "steps": steps}));
    let mut sc = Sidecar::for_file(&args.out);
    sc.input(&args.input);
    sc.output(&args.out);
    finish(sc, EXIT_OK)
}

fn equilibrium(
    input: &Path,
    coords_path: Option<&Path>,
    abs_tol: Option<f64>,
    rel_tol: Option<f64>,
    config: &Config,
) -> Outcome {
    let d = load_delivery(input)?;
    let default = Tolerance::default();
    let tol = Tolerance {
        abs: abs_tol
            .or(config.equilibrium.abs_tol)
            .unwrap_or(default.abs),
        rel: rel_tol
            .or(config.equilibrium.rel_tol)
            .unwrap_or(default.rel),
    };
    if !(tol.abs >= 0.0 && tol.rel >= 0.0 && tol.abs.is_finite() && tol.rel.is_finite()) {
        return Err(CliError::usage(
            "tolerances must be finite and non-negative",
        ));
    }
    let file_coords: Option<PointCoordinates> = match coords_path {
        Some(p) => Some(serde_json::from_str(&read_text(p)?).map_err(|e| {
            CliError::failure("INVALID_COORDINATES", format!("{}: {e}", p.display()))
        })?),
        None => None,
    };
    let coords = file_coords.as_ref().or(d.point_coordinates());
    let summary = check_equilibrium_all(&d, coords, tol)
        .map_err(|e| CliError::failure("EQUILIBRIUM_UNAVAILABLE", e))?;
    say!(
        "{}",
        serde_json::to_string(&summary).expect("summary serializes")
    );
    Ok(if summary.all_balanced {
        EXIT_OK
    } else {
        EXIT_FAILURE
    })
}

fn envelope(input: &Path, out_dir: Option<&Path>) -> Outcome {
    let d = load_delivery(input)?;
    let dir = output_dir(out_dir, "envelope");
    let selection = envelope_select(&d);
    let md = dir.join("envelope.md");
    let js = dir.join("envelope_extremes.json");
    write_text(&md, &envelope_to_markdown(&selection.extremes))?;
    write_text(&js, &write_envelope_json(&selection.extremes))?;
    let ids: Vec<String> = selection
        .selected_case_ids
        .iter()
        .map(u32::to_string)
        .collect();
    say!("{}", ids.join(","));
    let mut sc = Sidecar::for_dir(&dir, "envelope");
    sc.input(input);
    sc.output(&md);
    sc.output(&js);
    finish(sc, EXIT_OK)
}

fn export_failure(e: ExportError) -> CliError {
    match e {
        ExportError::Io { .. } => CliError::infra(e),
        ExportError::EmptySelection => CliError::failure("EMPTY_SELECTION", e),
        other => CliError::failure("EXPORT_FAILED", other),
    }
}

fn export_ansys(
    input: &Path,
    select: &[u32],
    node_map: Option<&Path>,
    exclude: &[String],
    out_dir: Option<&Path>,
    config: &Config,
) -> Outcome {
    let d = load_delivery(input)?;
    let nodes = match (node_map, &config.node_map) {
        (Some(p), _) => NodeMap::from_json(&read_text(p)?).map_err(export_failure)?,
        (None, Some(map)) => NodeMap::new(map.clone()).map_err(export_failure)?,
        (None, None) => {
            return Err(CliError::usage(
                "--node-map is required (or node_map in --config)",
            ))
        }
    };
    let points: BTreeSet<String> = d.point_names().into_iter().collect();
    if let Some(unknown) = exclude.iter().find(|p| !points.contains(*p)) {
        return Err(CliError::failure(
            "UNKNOWN_POINT",
            format!("excluded point `{unknown}` is not in the delivery"),
        ));
    }
    let exclude: BTreeSet<String> = exclude.iter().cloned().collect();
    let selected = if select.is_empty() {
        envelope_select(&d).selected_case_ids
    } else {
        select.to_vec()
    };
    let dir = output_dir(out_dir, "ansys");
    fs::create_dir_all(&dir)
        .map_err(|e| CliError::infra(format!("cannot create {}: {e}", dir.display())))?;
    let written = export_all_inp(&d, &selected, &nodes, &exclude, &dir).map_err(export_failure)?;
    let mut sc = Sidecar::for_dir(&dir, "export-ansys");
    sc.input(input);
    if let Some(p) = node_map {
        sc.input(p);
    }
    for p in &written {
        say!("{}", p.display());
        sc.output(p);
    }
    finish(sc, EXIT_OK)
}

fn compare(
    new: &Path,
    old: &Path,
    out: Option<&Path>,
    widen_tol: Option<f64>,
    config: &Config,
) -> Outcome {
    let read = |p: &Path| -> Result<_, CliError> {
        read_envelope_json(&read_text(p)?)
            .map_err(|e| CliError::failure("INVALID_EXTREMES", format!("{}: {e}", p.display())))
    };
    let (e_new, e_old) = (read(new)?, read(old)?);
    let tol = widen_tol.or(config.widen_tol).unwrap_or(0.0);
    let report = compare_envelopes(&e_new, &e_old, tol)
        .map_err(|e| CliError::failure("COMPARE_FAILED", e))?;
    let json_path = match out {
        Some(p) => p.to_path_buf(),
        None => output_dir(None, "comparison_report").join(report.suggested_file_name()),
    };
    let md_path = json_path.with_extension("md");
    write_text(&json_path, &write_comparison_report(&report))?;
    write_text(&md_path, &comparison_to_markdown(&report))?;
    say!(
        "{}",
        json!({
            "report": json_path.display().to_string(),
            "new_exceeds_old": report.new_exceeds_old,
            "exceeding_cells": report.exceeding_cells().count(),
        })
    );
    let code = if report.new_exceeds_old {
        EXIT_EXCEEDANCE
    } else {
        EXIT_OK
    };
    let mut sc = Sidecar::for_file(&json_path);
    sc.input(new);
    sc.input(old);
    sc.output(&json_path);
    sc.output(&md_path);
    finish(sc, code)
}

fn eval_run(
    scenario: &Path,
    k: Option<u32>,
    out_dir: Option<&Path>,
    parallel: bool,
    config: &Config,
) -> Outcome {
    let s = Scenario::load(scenario).map_err(|e| CliError::failure("INVALID_SCENARIO", e))?;
    let judges = match &config.judges {
        Some(v) => JudgeRegistry::from_config_json(&v.to_string()).map_err(CliError::usage)?,
        None => JudgeRegistry::default(),
    };
    let root = output_dir(out_dir, "eval_runs");
    let runner = Runner {
        parallel,
        ..Runner::new(&root, &judges)
    };
    let report = runner.run(&s, k).map_err(CliError::infra)?;
    say!(
        "{}",
        json!({
            "scenario_id": report.scenario_id,
            "k": report.k,
            "passes": report.passes,
            "failures": report.failures,
            "infrastructure_failures": report.infrastructure_failures,
            "pass_hat_k": report.pass_hat_k,
            "lower_bound": report.lower_bound,
            "report": root.join(&s.id).join("report.json").display().to_string(),
        })
    );
    Ok(if report.pass_hat_k {
        EXIT_OK
    } else if report.infrastructure_failures > 0 {
        EXIT_INFRASTRUCTURE
    } else {
        EXIT_FAILURE
    })
}

fn passk(p: Option<f64>, alpha: f64, k: Option<u32>) -> Outcome {
    match (p, k) {
        (Some(p), None) => {
            let k = min_k_for(p, alpha).map_err(CliError::usage)?;
            say!("{k}");
        }
        (None, Some(k)) => {
            let bound = pass_lower_bound(k, alpha).map_err(CliError::usage)?;
            say!("{bound}");
        }
        _ => return Err(CliError::usage("give exactly one of --p or --k")),
    }
    Ok(EXIT_OK)
}

fn docserve(dir: &Path) -> Outcome {
    let catalog = Catalog::load(dir).map_err(|e| CliError::failure("CATALOG_INVALID", e))?;
    let server = Server::new(catalog);
    let stdin = io::stdin();
    server
        .serve(stdin.lock(), io::stdout().lock())
        .map_err(|e| CliError::infra(format!("transport: {e}")))?;
    Ok(EXIT_OK)
}

fn fixture(args: &FixtureArgs) -> Outcome {
    let mut spec = if args.replay {
        replay_spec(args.seed)
    } else {
        let points: Vec<&str> = args.points.iter().map(String::as_str).collect();
        FixtureSpec {
            balanced: args.balanced,
            ..FixtureSpec::new(args.seed, args.cases, &points, args.critical)
        }
    };
    if let Some(m) = args.magnitude {
        spec.magnitude = m;
    }
    if let Some(v) = args.version {
        spec.version = v;
        if args.replay {
            spec.name = format!("Engine Mount Balanced Loads v{v}");
        }
    }
    let d = generate_fixture_with(&spec).map_err(|e| CliError::failure("FIXTURE_INFEASIBLE", e))?;
    write_text(&args.out, &write_delivery(&d, delivery_format(args.format)))?;
    let mut sc = Sidecar::for_file(&args.out);
    sc.output(&args.out);
    finish(sc, EXIT_OK)
}
