//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use loadsmith::analysis::{check_equilibrium_all, envelope_extremes, envelope_select, Tolerance};
use loadsmith::compare::compare_envelopes;
use loadsmith::evalkit::{
    generate_fixture_with, min_k_for, pass_lower_bound, replay_spec, FixtureSpec,
};
use loadsmith::ingest::read_delivery;
use loadsmith::transform::{apply_ultimate_factor, convert_units, rename_points};
use loadsmith::{
    Component, ComponentSet, EnvelopeExtremes, ExtremeCell, ForceUnit, LoadCase, LoadsDelivery,
    MomentUnit, UnitSystem,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const BIN: &str = env!("CARGO_BIN_EXE_loadsmith");

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn replay_dir() -> PathBuf {
    root().join("scenarios/case_replay")
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !bool::from($cond) {
            return Err(format!($($fmt)+));
        }
    };
}

fn loadsmith(args: &[&str], cwd: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(cwd)
        .env_remove("LOADSMITH_OUT_DIR")
        .output()
        .expect("spawn loadsmith")
}

fn run_ok(args: &[&str], cwd: &Path, expect: i32) -> Result<String, String> {
    let out = loadsmith(args, cwd);
    let code = out.status.code().unwrap_or(-1);
    ensure!(
        code == expect,
        "`loadsmith {}` exited {code}, expected {expect}: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    Ok(String::from_utf8_lossy(&out.stdout).trim().to_string())
}

fn within(actual: Duration, limit: Duration) -> Outcome {
    ensure!(actual < limit, "took {actual:?}, limit {limit:?}");
    Ok(format!("{} ms", actual.as_millis()))
}

/// Random delivery with up to 20 cases and 5 points, values in [-100, 100].
/// Every other delivery uses an integer grid so ties are common.
fn random_delivery(rng: &mut ChaCha8Rng, units: UnitSystem) -> LoadsDelivery {
    const POOL: [&str; 7] = [
        "bearing",
        "fwd",
        "aft",
        "lug_left",
        "lug_right",
        "nozzle",
        "plug",
    ];
    let n_cases = rng.random_range(1..=20usize);
    let n_points = rng.random_range(1..=5usize);
    let mut pool = POOL.to_vec();
    pool.shuffle(rng);
    let points = &pool[..n_points];
    let mut ids: Vec<u32> = (1..=200).collect();
    ids.shuffle(rng);
    let grid = rng.random_bool(0.5);
    let cases = ids[..n_cases]
        .iter()
        .map(|&id| {
            let loads = points
                .iter()
                .map(|p| {
                    let mut v = [0.0; 6];
                    for x in &mut v {
                        *x = if grid {
                            rng.random_range(-5i32..=5) as f64 * 20.0
                        } else {
                            rng.random_range(-100.0..=100.0)
                        };
                    }
                    (p.to_string(), ComponentSet::from_array(v).unwrap())
                })
                .collect();
            LoadCase::new(id, None, loads).unwrap()
        })
        .collect();
    LoadsDelivery::new("Random", 1, units, None, None, cases).unwrap()
}

fn random_units(rng: &mut ChaCha8Rng) -> UnitSystem {
    let f = [
        ForceUnit::Newton,
        ForceUnit::Kilonewton,
        ForceUnit::PoundForce,
        ForceUnit::KiloPoundForce,
    ];
    let m = [
        MomentUnit::NewtonMeter,
        MomentUnit::KilonewtonMeter,
        MomentUnit::PoundForceInch,
        MomentUnit::KiloPoundForceInch,
    ];
    UnitSystem::new(f[rng.random_range(0..4)], m[rng.random_range(0..4)])
}

/// Pass/fail of a single k-of-k bound, computed as `p^k <= alpha`.
fn oracle_min_k(p: f64, alpha: f64) -> u32 {
    (1..).find(|&k| p.powi(k as i32) <= alpha).unwrap()
}

fn c01_passk() -> Outcome {
    let start = Instant::now();
    for (p, frozen) in [(0.50, 5), (0.90, 29), (0.99, 299)] {
        let got = min_k_for(p, 0.05).map_err(|e| e.to_string())?;
        ensure!(
            got == frozen,
            "min_k_for({p}, 0.05) = {got}, expected {frozen}"
        );
        ensure!(
            oracle_min_k(p, 0.05) == frozen,
            "oracle disagrees for p = {p}"
        );
    }
    let b29 = pass_lower_bound(29, 0.05).map_err(|e| e.to_string())?;
    let b28 = pass_lower_bound(28, 0.05).map_err(|e| e.to_string())?;
    ensure!(b29 >= 0.90, "pass_lower_bound(29) = {b29}");
    ensure!(b28 < 0.90, "pass_lower_bound(28) = {b28}");
    within(start.elapsed(), Duration::from_secs(1))
}

/// Brute force: scan every case for every cell; ties keep the first case seen.
fn oracle_select(d: &LoadsDelivery) -> (Vec<u32>, BTreeMap<(String, Component), ExtremeCell>) {
    let mut cells = BTreeMap::new();
    for point in d.point_names() {
        for c in Component::ALL {
            let column: Vec<(u32, f64)> = d
                .cases()
                .iter()
                .map(|case| (case.id(), case.load(&point).unwrap().get(c)))
                .collect();
            let mut max = column[0];
            let mut min = column[0];
            for &(id, v) in &column[1..] {
                if v > max.1 {
                    max = (id, v);
                }
                if v < min.1 {
                    min = (id, v);
                }
            }
            cells.insert(
                (point.clone(), c),
                ExtremeCell {
                    max: max.1,
                    max_case: max.0,
                    min: min.1,
                    min_case: min.0,
                },
            );
        }
    }
    let mut ids = BTreeSet::new();
    for cell in cells.values() {
        ids.insert(cell.max_case);
        if cell.min < 0.0 {
            ids.insert(cell.min_case);
        }
    }
    (ids.into_iter().collect(), cells)
}

fn c02_envelope_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_502);
    for i in 0..500 {
        let d = random_delivery(&mut rng, UnitSystem::SI);
        let sel = envelope_select(&d);
        let (ids, cells) = oracle_select(&d);
        ensure!(
            sel.selected_case_ids == ids,
            "delivery {i}: ids {:?} vs oracle {ids:?}",
            sel.selected_case_ids
        );
        let got: BTreeMap<(String, Component), ExtremeCell> = sel
            .extremes
            .iter_cells()
            .map(|(p, c, cell)| ((p.to_string(), c), *cell))
            .collect();
        ensure!(
            got == cells,
            "delivery {i}: extreme cells differ from oracle"
        );
    }
    within(start.elapsed(), Duration::from_secs(10)).map(|t| format!("500 deliveries, {t}"))
}

const REPLAY_OUTPUTS: [&str; 11] = [
    "envelope/envelope.md",
    "envelope/envelope_extremes.json",
    "limit_loads/limit_load_2.inp",
    "limit_loads/limit_load_20.inp",
    "limit_loads/limit_load_34.inp",
    "limit_loads/limit_load_61.inp",
    "limit_loads/limit_load_92.inp",
    "limit_loads/limit_load_99.inp",
    "comparison_report/v1_vs_v2.json",
    "comparison_report/v1_vs_v2.md",
    "delivery_si.json",
];

fn files_except_traces(dir: &Path) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if !path.to_string_lossy().ends_with(".trace.ndjson") {
                out.insert(
                    path.strip_prefix(dir)
                        .unwrap()
                        .to_string_lossy()
                        .replace('\\', "/"),
                );
            }
        }
    }
    out
}

/// Runs the replay pipeline in `work` and returns the transform and compare stdout.
fn replay_pipeline(work: &Path) -> Result<(Value, Value), String> {
    let r = replay_dir();
    fs::create_dir_all(work.join("previous")).unwrap();
    fs::copy(
        r.join("previous/envelope_extremes.json"),
        work.join("previous/envelope_extremes.json"),
    )
    .unwrap();
    fs::copy(r.join("node_map.json"), work.join("node_map.json")).unwrap();
    run_ok(
        &[
            "fixture", "--seed", "2024", "--replay", "--format", "yaml", "--out", "v2.yaml",
        ],
        work,
        0,
    )?;
    run_ok(
        &[
            "convert",
            "v2.yaml",
            "--to",
            "json",
            "--out",
            "delivery.json",
        ],
        work,
        0,
    )?;
    let transform = run_ok(
        &[
            "transform",
            "delivery.json",
            "--rename",
            "lug_left=lug_port,lug_right=lug_starboard",
            "--scale",
            "FX=1.04",
            "--units",
            "N,N·m",
            "--out",
            "delivery_si.json",
        ],
        work,
        0,
    )?;
    let ids = run_ok(
        &["envelope", "delivery_si.json", "--out-dir", "envelope"],
        work,
        0,
    )?;
    ensure!(ids == "2,20,34,61,92,99", "envelope selected {ids}");
    run_ok(
        &[
            "export-ansys",
            "delivery_si.json",
            "--node-map",
            "node_map.json",
            "--exclude",
            "bearing",
            "--out-dir",
            "limit_loads",
        ],
        work,
        0,
    )?;
    let compare = run_ok(
        &[
            "compare",
            "envelope/envelope_extremes.json",
            "previous/envelope_extremes.json",
            "--out",
            "comparison_report/v1_vs_v2.json",
        ],
        work,
        3,
    )?;
    let parse = |s: &str| {
        serde_json::from_str::<Value>(s).map_err(|e| format!("stdout not JSON: {e}: {s}"))
    };
    Ok((parse(&transform)?, parse(&compare)?))
}

fn c03_case_replay() -> Outcome {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let mut first: Option<BTreeMap<String, Vec<u8>>> = None;
    for run in 0..10 {
        let work = tmp.path().join(format!("run_{run}"));
        let (_, compare) = replay_pipeline(&work)?;
        ensure!(
            compare["new_exceeds_old"] == Value::Bool(true),
            "run {run}: no exceedance against the v1 reference"
        );
        let files = files_except_traces(&work);
        let inp: Vec<&String> = files.iter().filter(|f| f.ends_with(".inp")).collect();
        ensure!(inp.len() == 6, "run {run}: {} .inp files", inp.len());
        for f in REPLAY_OUTPUTS {
            ensure!(files.contains(f), "run {run}: missing {f}");
        }
        let report: Value = serde_json::from_slice(
            &fs::read(work.join("comparison_report/v1_vs_v2.json")).unwrap(),
        )
        .map_err(|e| e.to_string())?;
        ensure!(
            report["new_exceeds_old"] == Value::Bool(true),
            "report disagrees with stdout"
        );
        let contents: BTreeMap<String, Vec<u8>> = files
            .iter()
            .map(|f| (f.clone(), fs::read(work.join(f)).unwrap()))
            .collect();
        match &first {
            None => {
                let checked_in = fs::read(replay_dir().join("v2.yaml")).unwrap();
                ensure!(
                    contents["v2.yaml"] == checked_in,
                    "checked-in v2.yaml differs from a fresh generation"
                );
                for (name, reference) in [
                    (
                        "envelope/envelope_extremes.json",
                        "references/envelope/envelope_extremes.json",
                    ),
                    (
                        "limit_loads/limit_load_2.inp",
                        "references/limit_loads/limit_load_2.inp",
                    ),
                ] {
                    ensure!(
                        contents[name] == fs::read(replay_dir().join(reference)).unwrap(),
                        "{name} differs from the frozen reference"
                    );
                }
                first = Some(contents);
            }
            Some(f) => ensure!(*f == contents, "run {run} output differs from run 0"),
        }
    }
    within(start.elapsed(), Duration::from_secs(30)).map(|t| format!("10 byte-identical runs, {t}"))
}

fn c04_rename_count() -> Outcome {
    let d = read_delivery(&fs::read_to_string(replay_dir().join("v2.yaml")).unwrap())
        .map_err(|e| e.to_string())?;
    ensure!(d.cases().len() == 100, "{} cases", d.cases().len());
    let map: BTreeMap<String, String> = [("lug_left", "lug_port"), ("lug_right", "lug_starboard")]
        .into_iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    let (_, n) = rename_points(&d, &map).map_err(|e| e.to_string())?;
    ensure!(n == 200, "library rename_count = {n}");
    let tmp = tempfile::tempdir().unwrap();
    let (transform, _) = replay_pipeline(tmp.path())?;
    ensure!(
        transform["rename_count"] == 200,
        "CLI rename_count = {}",
        transform["rename_count"]
    );
    Ok("200 renames".into())
}

fn delivery_of(values: &[[f64; 6]], units: UnitSystem) -> LoadsDelivery {
    let cases = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let loads = [("p".to_string(), ComponentSet::from_array(*v).unwrap())].into();
            LoadCase::new(i as u32 + 1, None, loads).unwrap()
        })
        .collect();
    LoadsDelivery::new("Units", 1, units, None, None, cases).unwrap()
}

fn c05_unit_round_trip() -> Outcome {
    let imperial = UnitSystem::new(ForceUnit::KiloPoundForce, MomentUnit::KiloPoundForceInch);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let values: Vec<[f64; 6]> = (0..1667)
        .map(|_| {
            let mut v = [0.0; 6];
            for x in &mut v {
                let sign = if rng.random_bool(0.5) { -1.0 } else { 1.0 };
                *x = sign * 10f64.powf(rng.random_range(-6.0..9.0));
            }
            v
        })
        .collect();
    let d = delivery_of(&values, UnitSystem::SI);
    let back = convert_units(
        &convert_units(&d, imperial).map_err(|e| e.to_string())?,
        UnitSystem::SI,
    )
    .map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (a, b) in d.cases().iter().zip(back.cases()) {
        for (x, y) in a
            .load("p")
            .unwrap()
            .as_array()
            .iter()
            .zip(b.load("p").unwrap().as_array())
        {
            worst = worst.max((x - y).abs() / x.abs());
        }
    }
    ensure!(worst <= 1e-12, "worst relative round-trip error {worst:e}");

    // Exact definitions: 1 lbm = 0.45359237 kg, g0 = 9.80665 m/s^2, 1 in = 0.0254 m.
    let klbf_n: f64 = 0.45359237 * 9.80665 * 1000.0;
    let klbf_in_nm = klbf_n * 0.0254;
    ensure!(
        (klbf_n - 4448.2216152605).abs() <= 1e-8,
        "definition product {klbf_n}"
    );
    ensure!(
        (klbf_in_nm - 112.98482903).abs() <= 1e-8,
        "definition product {klbf_in_nm}"
    );
    let one = convert_units(
        &delivery_of(&[[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]], imperial),
        UnitSystem::SI,
    )
    .map_err(|e| e.to_string())?;
    let cs = one.cases()[0].load("p").unwrap();
    ensure!(
        (cs.get(Component::Fx) - 4448.2216152605).abs() <= 1e-8,
        "1 klbf = {} N",
        cs.get(Component::Fx)
    );
    ensure!(
        (cs.get(Component::Mx) - 112.98482903).abs() <= 1e-8,
        "1 klbf·in = {} N·m",
        cs.get(Component::Mx)
    );
    Ok(format!("{} values, worst {worst:.1e}", values.len() * 6))
}

fn c06_selection_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for i in 0..100 {
        let units = random_units(&mut rng);
        let d = random_delivery(&mut rng, units);
        let ids = envelope_select(&d).selected_case_ids;
        let ult = apply_ultimate_factor(&d, 1.5).map_err(|e| e.to_string())?;
        ensure!(
            envelope_select(&ult).selected_case_ids == ids,
            "delivery {i}: changed under ultimate factor"
        );
        let target = random_units(&mut rng);
        let conv = convert_units(&d, target).map_err(|e| e.to_string())?;
        ensure!(
            envelope_select(&conv).selected_case_ids == ids,
            "delivery {i}: changed under convert_units"
        );
        let again = envelope_select(&d.restrict_to(&ids));
        ensure!(
            again.selected_case_ids == ids,
            "delivery {i}: selection not idempotent"
        );
        ensure!(
            again.extremes.cells == envelope_extremes(&d).cells,
            "delivery {i}: extremes of the selection differ"
        );
    }
    Ok("100 deliveries".into())
}

fn with_value(
    d: &LoadsDelivery,
    case_id: u32,
    point: &str,
    c: Component,
    factor: f64,
) -> LoadsDelivery {
    let cases = d
        .cases()
        .iter()
        .map(|case| {
            let mut loads = case.loads().clone();
            if case.id() == case_id {
                let cs = loads[point];
                loads.insert(
                    point.to_string(),
                    cs.try_map(|k, v| if k == c { v * factor } else { v })
                        .unwrap(),
                );
            }
            LoadCase::new(case.id(), case.label().map(str::to_string), loads).unwrap()
        })
        .collect();
    LoadsDelivery::new(
        d.name(),
        d.version(),
        d.units(),
        d.coordinate_system().map(str::to_string),
        d.point_coordinates().cloned(),
        cases,
    )
    .unwrap()
}

fn c07_equilibrium() -> Outcome {
    let tol = Tolerance {
        abs: 1e-9,
        rel: 1e-3,
    };
    let mut fixtures = vec![generate_fixture_with(&replay_spec(2024)).map_err(|e| e.to_string())?];
    for seed in 0..30 {
        let spec = FixtureSpec {
            balanced: true,
            ..FixtureSpec::new(seed, 20, &["a", "b", "c", "d"], 3)
        };
        fixtures.push(generate_fixture_with(&spec).map_err(|e| e.to_string())?);
    }
    let mut worst: f64 = 0.0;
    for (i, d) in fixtures.iter().enumerate() {
        let summary = check_equilibrium_all(d, None, tol).map_err(|e| e.to_string())?;
        ensure!(summary.all_balanced, "fixture {i} not balanced");

        let case = &d.cases()[i % d.cases().len()];
        let (point, c, _) = case
            .loads()
            .iter()
            .flat_map(|(p, cs)| {
                [Component::Fx, Component::Fy, Component::Fz]
                    .map(|c| (p.clone(), c, cs.get(c).abs()))
            })
            .max_by(|a, b| a.2.total_cmp(&b.2))
            .unwrap();
        let perturbed = with_value(d, case.id(), &point, c, 1.01);
        let before = check_equilibrium_all(&perturbed, None, tol).map_err(|e| e.to_string())?;
        let unbalanced: Vec<u32> = before
            .results
            .iter()
            .filter(|r| !r.balanced)
            .map(|r| r.case_id)
            .collect();
        ensure!(
            unbalanced == [case.id()],
            "fixture {i}: 1% perturbation of {point}/{c:?} in case {} left {unbalanced:?} unbalanced",
            case.id()
        );

        let scaled = apply_ultimate_factor(&perturbed, 1.5).map_err(|e| e.to_string())?;
        let after = check_equilibrium_all(&scaled, None, tol).map_err(|e| e.to_string())?;
        for (r0, r1) in before.results.iter().zip(&after.results) {
            if r0.case_id != case.id() {
                continue;
            }
            let expected = 1.5 * r0.force_residual.magnitude;
            let rel = (r1.force_residual.magnitude - expected).abs() / expected;
            worst = worst.max(rel);
            ensure!(
                rel <= 1e-12,
                "fixture {i}: residual scaled by {} (rel err {rel:e})",
                r1.force_residual.magnitude / r0.force_residual.magnitude
            );
        }
    }
    Ok(format!(
        "{} fixtures, worst linearity error {worst:.1e}",
        fixtures.len()
    ))
}

fn inflate(e: &EnvelopeExtremes, c: f64) -> EnvelopeExtremes {
    let mut out = e.clone();
    for row in out.cells.values_mut() {
        for cell in row.values_mut() {
            cell.max *= c;
            cell.min *= c;
        }
    }
    out
}

/// Moves every nonzero bound outward by `(c - 1) |bound|`.
fn widen(e: &EnvelopeExtremes, c: f64) -> EnvelopeExtremes {
    let mut out = e.clone();
    for row in out.cells.values_mut() {
        for cell in row.values_mut() {
            cell.max += (c - 1.0) * cell.max.abs();
            cell.min -= (c - 1.0) * cell.min.abs();
        }
    }
    out
}

fn exceeding(
    new: &EnvelopeExtremes,
    old: &EnvelopeExtremes,
) -> Result<BTreeSet<(String, Component, bool)>, String> {
    let r = compare_envelopes(new, old, 0.0).map_err(|e| e.to_string())?;
    let mut set = BTreeSet::new();
    for (p, row) in &r.cells {
        for (c, cell) in row {
            if cell.max_exceeds {
                set.insert((p.clone(), *c, true));
            }
            if cell.min_exceeds {
                set.insert((p.clone(), *c, false));
            }
        }
    }
    ensure!(
        r.new_exceeds_old == !set.is_empty(),
        "new_exceeds_old disagrees with the cell flags"
    );
    Ok(set)
}

fn c08_exceedance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..100 {
        let units = random_units(&mut rng);
        let e = envelope_extremes(&random_delivery(&mut rng, units));
        ensure!(
            exceeding(&e, &e)?.is_empty(),
            "envelope {i}: compare(E, E) exceeds"
        );
        let wide = inflate(&e, 1.1);
        let expected: BTreeSet<(String, Component, bool)> = e
            .iter_cells()
            .flat_map(|(p, c, cell)| {
                [
                    (cell.max > 0.0).then(|| (p.to_string(), c, true)),
                    (cell.min < 0.0).then(|| (p.to_string(), c, false)),
                ]
            })
            .flatten()
            .collect();
        ensure!(
            exceeding(&wide, &e)? == expected,
            "envelope {i}: inflation by 1.1 flags the wrong cells"
        );
        let wider = inflate(&wide, 1.1);
        ensure!(
            exceeding(&wider, &e)?.is_superset(&expected),
            "envelope {i}: further inflation lost exceedances"
        );
        let outward = widen(&e, 1.1);
        ensure!(
            exceeding(&e, &outward)?.is_empty(),
            "envelope {i}: narrower envelope flagged as exceedance"
        );
        let nonzero = e
            .iter_cells()
            .map(|(_, _, cell)| usize::from(cell.max != 0.0) + usize::from(cell.min != 0.0))
            .sum::<usize>();
        ensure!(
            exceeding(&outward, &e)?.len() == nonzero,
            "envelope {i}: outward widening missed a bound"
        );
    }
    Ok("100 envelopes".into())
}

fn c09_goldens() -> Outcome {
    let mut checked = 0;
    let mut cases: Vec<PathBuf> = fs::read_dir(golden_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.join("case.json").exists())
        .collect();
    cases.sort();
    ensure!(cases.len() == 3, "{} golden micro-cases", cases.len());
    for case in &cases {
        let name = case.file_name().unwrap().to_string_lossy().to_string();
        let meta: Value =
            serde_json::from_slice(&fs::read(case.join("case.json")).unwrap()).unwrap();
        let delivery = ["delivery.json", "delivery.yaml"]
            .iter()
            .map(|f| case.join(f))
            .find(|p| p.exists())
            .ok_or(format!("{name}: no delivery"))?;
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path();
        let ids = run_ok(
            &[
                "envelope",
                delivery.to_str().unwrap(),
                "--out-dir",
                out.to_str().unwrap(),
            ],
            out,
            0,
        )?;
        let exclude: Vec<&str> = meta["exclude"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_str().unwrap())
            .collect();
        let exclude = exclude.join(",");
        let mut args = vec![
            "export-ansys",
            delivery.to_str().unwrap(),
            "--select",
            &ids,
            "--node-map",
        ];
        let node_map = case.join("node_map.json");
        args.push(node_map.to_str().unwrap());
        if !exclude.is_empty() {
            args.extend(["--exclude", &exclude]);
        }
        args.extend(["--out-dir", out.to_str().unwrap()]);
        run_ok(&args, out, 0)?;
        let tol = meta["widen_tol"].as_f64().unwrap().to_string();
        let old = case.join("old_extremes.json");
        run_ok(
            &[
                "compare",
                "envelope_extremes.json",
                old.to_str().unwrap(),
                "--out",
                "comparison.json",
                "--widen-tol",
                &tol,
            ],
            out,
            meta["exit_code"].as_i64().unwrap() as i32,
        )?;
        let expected = files_except_traces(&case.join("expected"));
        ensure!(
            files_except_traces(out) == expected,
            "{name}: output file set differs from goldens"
        );
        for f in &expected {
            ensure!(
                fs::read(out.join(f)).unwrap() == fs::read(case.join("expected").join(f)).unwrap(),
                "{name}/{f} differs from golden"
            );
            checked += 1;
        }
    }
    Ok(format!(
        "{} micro-cases, {checked} files byte-exact",
        cases.len()
    ))
}

fn docserve(requests: &str) -> String {
    let mut child = Command::new(BIN)
        .args(["docserve", root().join("catalog").to_str().unwrap()])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn docserve");
    child
        .stdin
        .take()
        .unwrap()
        .write_all(requests.as_bytes())
        .unwrap();
    let out = child.wait_with_output().unwrap();
    String::from_utf8(out.stdout).unwrap()
}

fn c10_docserver() -> Outcome {
    let dir = golden_dir().join("docserver");
    let requests = fs::read_to_string(dir.join("requests.ndjson")).unwrap();
    let golden = fs::read_to_string(dir.join("responses.ndjson")).unwrap();
    ensure!(
        docserve(&requests) == golden,
        "responses differ from golden"
    );

    let renumbered: String = requests
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if serde_json::from_str::<Value>(l).is_ok() {
                l.replacen(
                    &format!("\"id\":{}", i + 1),
                    &format!("\"id\":\"req-{}\"", i + 1),
                    1,
                ) + "\n"
            } else {
                format!("{l}\n")
            }
        })
        .collect();
    let expected: String = golden
        .lines()
        .enumerate()
        .map(|(i, l)| {
            l.replacen(
                &format!("\"id\":{},", i + 1),
                &format!("\"id\":\"req-{}\",", i + 1),
                1,
            ) + "\n"
        })
        .collect();
    ensure!(
        docserve(&renumbered) == expected,
        "responses with string ids differ from golden modulo id"
    );
    Ok(format!("{} frames", golden.lines().count()))
}

fn eval_report(scenario: &str, out: &Path) -> Result<(i32, Value), String> {
    let run = Command::new(BIN)
        .args([
            "eval",
            "run",
            replay_dir().join(scenario).to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
        ])
        .env("LOADSMITH_BIN", BIN)
        .output()
        .expect("spawn eval");
    let summary: Value = serde_json::from_slice(&run.stdout)
        .map_err(|e| format!("{scenario}: {e}: {}", String::from_utf8_lossy(&run.stderr)))?;
    let report =
        fs::read(summary["report"].as_str().ok_or("no report path")?).map_err(|e| e.to_string())?;
    Ok((
        run.status.code().unwrap_or(-1),
        serde_json::from_slice(&report).map_err(|e| e.to_string())?,
    ))
}

fn c11_harness() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let (code, good) = eval_report("scenario.json", tmp.path())?;
    ensure!(code == 0, "eval run exited {code}");
    ensure!(
        good["k"] == 3 && good["passes"] == 3,
        "passes = {} of k = {}",
        good["passes"],
        good["k"]
    );
    ensure!(
        good["pass_hat_k"] == Value::Bool(true),
        "pass_hat_k = {}",
        good["pass_hat_k"]
    );

    let (code, bad) = eval_report("scenario_wrong_factor.json", tmp.path())?;
    ensure!(code == 2, "wrong-factor eval exited {code}");
    ensure!(
        bad["pass_hat_k"] == Value::Bool(false),
        "wrong factor still passes"
    );
    for run in bad["runs"].as_array().unwrap() {
        let status = |kind: &str| {
            run["checks"]
                .as_array()
                .unwrap()
                .iter()
                .find(|c| c["kind"] == kind)
                .map(|c| c["status"].as_str().unwrap_or("").to_string())
        };
        ensure!(
            status("numeric_file_compare").as_deref() == Some("fail"),
            "numeric check did not fail"
        );
        ensure!(
            status("judge").as_deref() == Some("fail"),
            "stub judge did not return FAIL"
        );
    }
    Ok(format!(
        "passes 3/3, lower bound {:.3}; wrong factor caught",
        good["lower_bound"].as_f64().unwrap_or(0.0)
    ))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("pass^k table", c01_passk),
        ("envelope oracle equivalence", c02_envelope_oracle),
        ("case-replay pipeline", c03_case_replay),
        ("rename accounting", c04_rename_count),
        ("unit round trip", c05_unit_round_trip),
        ("selection invariance", c06_selection_invariance),
        ("equilibrium", c07_equilibrium),
        ("exceedance properties", c08_exceedance),
        ("golden files", c09_goldens),
        ("docserver conformance", c10_docserver),
        ("harness end-to-end", c11_harness),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name:<30} PASS  {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} {name:<30} FAIL  {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
