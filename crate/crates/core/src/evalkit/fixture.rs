//! Seeded synthetic deliveries with a known set of critical load cases.
//!
//! Construction: ordinary cases draw every value from `[-M, M]`. Critical case
//! number `i` (in ascending id order) carries the sign `+` when `i` is even and
//! `-` when odd on every free cell, with magnitudes in `[2M, 2.5M)`, except for
//! one designated cell where its magnitude lies in `[3M, 3.5M)`. The designated
//! cell makes case `i` the unique extreme of that cell, and every extreme of
//! the delivery lands on a critical case, so the envelope selects exactly the
//! critical set.
//!
//! With force balancing, the last point closes Fx, Fy and Fz of every case
//! (rounded to the same 0.001 grid, so the residual is at rounding level).
//! Its critical magnitude is the sum of the free points, at least `2kM` for `k`
//! free points, which dominates the ordinary range `[-kM, kM]`.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::analysis::envelope_select;
use crate::model::{Component, ComponentSet, LoadCase, LoadsDelivery, UnitSystem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FixtureError {
    #[error("infeasible fixture: {0}")]
    Infeasible(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub seed: u64,
    pub n_cases: u32,
    pub points: Vec<String>,
    pub n_critical: u32,
    /// Explicit critical ids; sampled from the seed when `None`.
    pub critical_ids: Option<Vec<u32>>,
    /// Close the force sum of every case on the last point.
    pub balanced: bool,
    pub units: UnitSystem,
    /// Scale `M` of ordinary values.
    pub magnitude: f64,
    pub name: String,
    pub version: u32,
    pub coordinate_system: Option<String>,
}

impl FixtureSpec {
    pub fn new(seed: u64, n_cases: u32, points: &[&str], n_critical: u32) -> Self {
        FixtureSpec {
            seed,
            n_cases,
            points: points.iter().map(|p| p.to_string()).collect(),
            n_critical,
            critical_ids: None,
            balanced: false,
            units: UnitSystem::SI,
            magnitude: 100.0,
            name: "Synthetic Loads".to_string(),
            version: 1,
            coordinate_system: None,
        }
    }
}

/// Interface names of the engine-mount replay, with left/right lug naming.
pub const REPLAY_POINTS: [&str; 7] = [
    "bearing",
    "lpt",
    "lug_fairlead",
    "lug_left",
    "lug_right",
    "nozzle",
    "plug",
];

/// Critical case ids of the replay delivery.
pub const REPLAY_CRITICAL_IDS: [u32; 6] = [2, 20, 34, 61, 92, 99];

/// The 100-case, 7-interface imperial delivery used by the replay scenario.
pub fn replay_spec(seed: u64) -> FixtureSpec {
    FixtureSpec {
        critical_ids: Some(REPLAY_CRITICAL_IDS.to_vec()),
        balanced: true,
        units: UnitSystem::IMPERIAL_KIPS,
        magnitude: 40.0,
        name: "Engine Mount Balanced Loads v2".to_string(),
        version: 2,
        coordinate_system: Some("engine_cs".to_string()),
        ..FixtureSpec::new(seed, 100, &REPLAY_POINTS, 6)
    }
}

/// Shorthand for an unbalanced SI fixture.
pub fn generate_fixture(
    seed: u64,
    n_cases: u32,
    points: &[&str],
    n_critical: u32,
) -> Result<LoadsDelivery, FixtureError> {
    generate_fixture_with(&FixtureSpec::new(seed, n_cases, points, n_critical))
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

pub fn generate_fixture_with(spec: &FixtureSpec) -> Result<LoadsDelivery, FixtureError> {
    let infeasible = |msg: String| Err(FixtureError::Infeasible(msg));
    let n_points = spec.points.len();
    let unique: BTreeSet<&String> = spec.points.iter().collect();
    if n_points == 0 || unique.len() != n_points {
        return infeasible("points must be non-empty and distinct".into());
    }
    if spec.n_critical == 0 || spec.n_critical > spec.n_cases {
        return infeasible(format!(
            "need 1 <= n_critical ({}) <= n_cases ({})",
            spec.n_critical, spec.n_cases
        ));
    }
    if !(spec.magnitude.is_finite() && spec.magnitude > 0.0) {
        return infeasible("magnitude must be positive".into());
    }
    if spec.balanced && n_points < 2 {
        return infeasible("force balancing needs at least two points".into());
    }
    if spec.balanced && spec.n_critical == 1 && spec.n_cases > 1 {
        return infeasible(
            "a single critical case cannot own both force extremes of the closing point".into(),
        );
    }

    let closing = n_points - 1;
    let closed = |p: usize, c: Component| spec.balanced && c.is_force() && p == closing;
    let designatable: Vec<(usize, Component)> = (0..n_points)
        .flat_map(|p| Component::ALL.into_iter().map(move |c| (p, c)))
        .filter(|&(p, c)| !closed(p, c))
        .collect();
    if spec.n_critical as usize > 2 * designatable.len() {
        return infeasible(format!(
            "{} critical cases exceed the {} ownable extremes",
            spec.n_critical,
            2 * designatable.len()
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let critical: Vec<u32> = match &spec.critical_ids {
        Some(ids) => {
            let set: BTreeSet<u32> = ids.iter().copied().collect();
            if set.len() != spec.n_critical as usize
                || set.iter().any(|&id| id == 0 || id > spec.n_cases)
            {
                return infeasible(
                    "critical_ids must be n_critical distinct ids in 1..=n_cases".into(),
                );
            }
            set.into_iter().collect()
        }
        None => {
            let mut ids: Vec<u32> =
                sample(&mut rng, spec.n_cases as usize, spec.n_critical as usize)
                    .into_iter()
                    .map(|i| i as u32 + 1)
                    .collect();
            ids.sort_unstable();
            ids
        }
    };
    let rank: BTreeMap<u32, usize> = critical
        .iter()
        .enumerate()
        .map(|(i, id)| (*id, i))
        .collect();

    let m = spec.magnitude;
    // Without a negative critical case every ordinary min must stay positive.
    let ordinary_low = if spec.n_critical == 1 { 0.1 * m } else { -m };

    let mut cases = Vec::with_capacity(spec.n_cases as usize);
    for id in 1..=spec.n_cases {
        let mut values = vec![[0.0f64; 6]; n_points];
        match rank.get(&id) {
            None => {
                for row in values.iter_mut() {
                    for v in row.iter_mut() {
                        *v = round3(rng.random_range(ordinary_low..m));
                    }
                }
            }
            Some(&i) => {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                let (dp, dc) = designatable[i / 2];
                for (p, row) in values.iter_mut().enumerate() {
                    for c in Component::ALL {
                        let magnitude = if (p, c) == (dp, dc) {
                            rng.random_range(3.0 * m..3.5 * m)
                        } else {
                            rng.random_range(2.0 * m..2.5 * m)
                        };
                        row[c as usize] = sign * round3(magnitude);
                    }
                }
            }
        }
        if spec.balanced {
            for c in [Component::Fx, Component::Fy, Component::Fz] {
                let sum: f64 = values[..closing].iter().map(|row| row[c as usize]).sum();
                values[closing][c as usize] = round3(-sum);
            }
        }
        let loads = spec
            .points
            .iter()
            .zip(values)
            .map(|(p, v)| {
                (
                    p.clone(),
                    ComponentSet::from_array(v).expect("finite by construction"),
                )
            })
            .collect();
        cases.push(LoadCase::new(id, None, loads).expect("positive id, non-empty loads"));
    }

    let d = LoadsDelivery::new(
        spec.name.clone(),
        spec.version,
        spec.units,
        spec.coordinate_system.clone(),
        None,
        cases,
    )
    .map_err(|e| FixtureError::Infeasible(e.to_string()))?;

    let selected = envelope_select(&d).selected_case_ids;
    if selected != critical {
        return infeasible(format!(
            "construction selected {selected:?}, expected {critical:?}"
        ));
    }
    Ok(d)
}
