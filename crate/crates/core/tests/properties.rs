use std::collections::{BTreeMap, BTreeSet};

use loadsmith::analysis::{check_equilibrium_all, envelope_extremes, envelope_select, Tolerance};
use loadsmith::compare::compare_envelopes;
use loadsmith::evalkit::{min_k_for, pass_lower_bound};
use loadsmith::export::{write_ansys_inp, NodeMap};
use loadsmith::ingest::{parse_delivery, write_delivery_json, write_delivery_yaml, DeliveryFormat};
use loadsmith::transform::{apply_ultimate_factor, convert_units, rename_points, scale_component};
use loadsmith::{
    Component, ComponentSet, ExtremeCell, ForceUnit, LoadCase, LoadsDelivery, MomentUnit,
    PointCoordinates, UnitSystem,
};
use proptest::prelude::*;
use proptest::sample::subsequence;

const POOL: [&str; 8] = [
    "aft",
    "bearing",
    "fwd",
    "lug_left",
    "lug_right",
    "nozzle",
    "plug",
    "pylon",
];

fn units() -> impl Strategy<Value = UnitSystem> {
    let f = prop_oneof![
        Just(ForceUnit::Newton),
        Just(ForceUnit::Kilonewton),
        Just(ForceUnit::PoundForce),
        Just(ForceUnit::KiloPoundForce)
    ];
    let m = prop_oneof![
        Just(MomentUnit::NewtonMeter),
        Just(MomentUnit::KilonewtonMeter),
        Just(MomentUnit::PoundForceInch),
        Just(MomentUnit::KiloPoundForceInch)
    ];
    (f, m).prop_map(|(f, m)| UnitSystem::new(f, m))
}

/// Values on a 0.001 grid so that distinct values stay distinct under scaling.
fn grid_value() -> impl Strategy<Value = f64> {
    (-1_000_000i32..=1_000_000).prop_map(|v| v as f64 / 1000.0)
}

#[derive(Debug, Clone)]
struct Raw {
    points: Vec<&'static str>,
    ids: Vec<u32>,
    labels: Vec<Option<String>>,
    values: Vec<Vec<[f64; 6]>>,
    coords: Vec<[f64; 3]>,
}

fn raw(max_cases: usize, max_points: usize) -> impl Strategy<Value = Raw> {
    (subsequence(POOL.to_vec(), 1..=max_points), 1..=max_cases)
        .prop_flat_map(|(points, n)| {
            let np = points.len();
            (
                Just(points),
                prop::collection::btree_set(1u32..500, n).prop_shuffle_ids(),
                prop::collection::vec(prop::option::of("[a-z]{1,6}"), n),
                prop::collection::vec(
                    prop::collection::vec(prop::array::uniform6(grid_value()), np),
                    n,
                ),
                prop::collection::vec(prop::array::uniform3(-5.0f64..5.0), np),
            )
        })
        .prop_map(|(points, ids, labels, values, coords)| Raw {
            points,
            ids,
            labels,
            values,
            coords,
        })
}

trait ShuffleIds {
    fn prop_shuffle_ids(self) -> BoxedStrategy<Vec<u32>>;
}

impl<S: Strategy<Value = BTreeSet<u32>> + 'static> ShuffleIds for S {
    fn prop_shuffle_ids(self) -> BoxedStrategy<Vec<u32>> {
        self.prop_map(|s| s.into_iter().collect::<Vec<_>>())
            .prop_shuffle()
            .boxed()
    }
}

fn build(r: &Raw, units: UnitSystem, with_coords: bool, balanced: bool) -> LoadsDelivery {
    let cases = r
        .ids
        .iter()
        .zip(&r.labels)
        .zip(&r.values)
        .map(|((id, label), rows)| {
            let mut rows = rows.clone();
            if balanced && rows.len() > 1 {
                let last = rows.len() - 1;
                for c in 0..3 {
                    rows[last][c] = -rows[..last].iter().map(|row| row[c]).sum::<f64>();
                }
            }
            let loads = r
                .points
                .iter()
                .zip(rows)
                .map(|(p, v)| (p.to_string(), ComponentSet::from_array(v).unwrap()))
                .collect();
            LoadCase::new(*id, label.clone(), loads).unwrap()
        })
        .collect();
    let coords: Option<PointCoordinates> = with_coords.then(|| {
        r.points
            .iter()
            .map(|p| p.to_string())
            .zip(r.coords.clone())
            .collect()
    });
    LoadsDelivery::new("Prop delivery", 3, units, Some("cs".into()), coords, cases).unwrap()
}

fn delivery() -> impl Strategy<Value = LoadsDelivery> {
    (raw(20, 5), units(), any::<bool>()).prop_map(|(r, u, c)| build(&r, u, c, false))
}

fn values(d: &LoadsDelivery) -> Vec<(u32, String, [f64; 6])> {
    d.cases()
        .iter()
        .flat_map(|c| {
            c.loads()
                .iter()
                .map(move |(p, cs)| (c.id(), p.clone(), cs.as_array()))
        })
        .collect()
}

/// Brute-force selection over every (point, component, case) triple.
fn oracle_select(d: &LoadsDelivery) -> BTreeSet<u32> {
    let mut selected = BTreeSet::new();
    let points: BTreeSet<String> = d
        .cases()
        .iter()
        .flat_map(|c| c.loads().keys().cloned())
        .collect();
    for p in &points {
        for k in 0..6 {
            let column: Vec<(u32, f64)> = d
                .cases()
                .iter()
                .filter_map(|c| c.loads().get(p).map(|cs| (c.id(), cs.as_array()[k])))
                .collect();
            let max = column.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
            let min = column.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
            selected.insert(column.iter().find(|x| x.1 == max).unwrap().0);
            if min < 0.0 {
                selected.insert(column.iter().find(|x| x.1 == min).unwrap().0);
            }
        }
    }
    selected
}

fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn non_finite_components_rejected(i in 0usize..6, bad in prop_oneof![Just(f64::NAN), Just(f64::INFINITY), Just(f64::NEG_INFINITY)]) {
        let mut v = [1.0; 6];
        v[i] = bad;
        prop_assert!(ComponentSet::from_array(v).is_err());
    }

    #[test]
    fn point_names_order_independent(r in raw(4, 5), u in units()) {
        let d = build(&r, u, false, false);
        let mut reversed = r.clone();
        reversed.points.reverse();
        reversed.values.iter_mut().for_each(|rows| rows.reverse());
        reversed.coords.reverse();
        let e = build(&reversed, u, false, false);
        prop_assert_eq!(d.point_names(), e.point_names());
        prop_assert_eq!(d.point_names(), d.point_names());
        let mut sorted = d.point_names();
        sorted.sort();
        prop_assert_eq!(sorted, d.point_names());
    }

    #[test]
    fn json_and_yaml_renderings_agree(d in delivery()) {
        let json = write_delivery_json(&d);
        let yaml = write_delivery_yaml(&d);
        let from_json = parse_delivery(&json, DeliveryFormat::Json).unwrap();
        let from_yaml = parse_delivery(&yaml, DeliveryFormat::Yaml).unwrap();
        prop_assert_eq!(&from_json, &d);
        prop_assert_eq!(&from_yaml, &d);
        prop_assert_eq!(write_delivery_json(&from_json), json);
        prop_assert_eq!(write_delivery_yaml(&from_yaml), yaml);
    }

    #[test]
    fn rename_preserves_values(d in delivery(), shift in 0usize..8) {
        let names = d.point_names();
        let map: BTreeMap<String, String> = names
            .iter()
            .map(|p| (p.clone(), format!("{}_{}", p, shift)))
            .collect();
        let (renamed, touched) = rename_points(&d, &map).unwrap();
        prop_assert_eq!(touched, map.len() * d.cases().len());
        for (a, b) in d.cases().iter().zip(renamed.cases()) {
            let mut va: Vec<[u64; 6]> = a.loads().values().map(|cs| cs.as_array().map(f64::to_bits)).collect();
            let mut vb: Vec<[u64; 6]> = b.loads().values().map(|cs| cs.as_array().map(f64::to_bits)).collect();
            va.sort();
            vb.sort();
            prop_assert_eq!(va, vb);
        }
    }

    #[test]
    fn unit_round_trip(d in delivery(), target in units()) {
        let back = convert_units(&convert_units(&d, target).unwrap(), d.units()).unwrap();
        prop_assert_eq!(back.units(), d.units());
        for ((_, _, a), (_, _, b)) in values(&d).iter().zip(values(&back)) {
            for k in 0..6 {
                prop_assert!(rel_close(a[k], b[k], 1e-12), "{} vs {}", a[k], b[k]);
            }
        }
    }

    #[test]
    fn scale_composes(d in delivery(), a in 0.01f64..100.0, b in 0.01f64..100.0, ci in 0usize..6) {
        let c = Component::ALL[ci];
        let twice = scale_component(&scale_component(&d, c, a).unwrap(), c, b).unwrap();
        let once = scale_component(&d, c, a * b).unwrap();
        for ((_, _, x), (_, _, y)) in values(&twice).iter().zip(values(&once)) {
            for k in 0..6 {
                prop_assert!(rel_close(x[k], y[k], 1e-15), "{} vs {}", x[k], y[k]);
            }
        }
    }

    #[test]
    fn transforms_are_pure(d in delivery(), f in 0.5f64..3.0, target in units()) {
        let before = d.clone();
        let a1 = apply_ultimate_factor(&d, f).unwrap();
        let a2 = apply_ultimate_factor(&d, f).unwrap();
        let c1 = convert_units(&d, target).unwrap();
        let c2 = convert_units(&d, target).unwrap();
        let s1 = scale_component(&d, Component::Fx, f).unwrap();
        let s2 = scale_component(&d, Component::Fx, f).unwrap();
        prop_assert_eq!(&d, &before);
        prop_assert_eq!(a1, a2);
        prop_assert_eq!(c1, c2);
        prop_assert_eq!(s1, s2);
    }

    #[test]
    fn equilibrium_status_invariant(r in raw(10, 5), u in units(), balanced in any::<bool>(), f in 0.1f64..10.0, target in units()) {
        let d = build(&r, u, false, balanced);
        let tol = Tolerance::default();
        let status = |d: &LoadsDelivery| -> Vec<bool> {
            check_equilibrium_all(d, None, tol).unwrap().results.iter().map(|x| x.balanced).collect()
        };
        let base = status(&d);
        prop_assert_eq!(&status(&apply_ultimate_factor(&d, f).unwrap()), &base);
        prop_assert_eq!(&status(&convert_units(&d, target).unwrap()), &base);
        if balanced && r.points.len() > 1 {
            prop_assert!(base.iter().all(|b| *b));
        }
    }

    #[test]
    fn equilibrium_with_coordinates_invariant_between_si_systems(r in raw(10, 5), balanced in any::<bool>(), f in 0.1f64..10.0) {
        let d = build(&r, UnitSystem::SI, true, balanced);
        let coords = d.point_coordinates().cloned();
        let tol = Tolerance::default();
        let status = |d: &LoadsDelivery| -> Vec<bool> {
            check_equilibrium_all(d, coords.as_ref(), tol).unwrap().results.iter().map(|x| x.balanced).collect()
        };
        let kilo = UnitSystem::new(ForceUnit::Kilonewton, MomentUnit::KilonewtonMeter);
        let base = status(&d);
        prop_assert_eq!(&status(&convert_units(&d, kilo).unwrap()), &base);
        prop_assert_eq!(&status(&apply_ultimate_factor(&d, f).unwrap()), &base);
        prop_assert!(check_equilibrium_all(&convert_units(&d, UnitSystem::IMPERIAL_KIPS).unwrap(), coords.as_ref(), tol).is_err());
    }

    #[test]
    fn selection_sound_and_matches_oracle(d in delivery()) {
        let sel = envelope_select(&d);
        let ids: BTreeSet<u32> = d.case_ids().into_iter().collect();
        for id in &sel.selected_case_ids {
            prop_assert!(ids.contains(id));
            prop_assert!(sel.reasons.get(id).is_some_and(|r| !r.is_empty()));
        }
        let mut sorted = sel.selected_case_ids.clone();
        sorted.sort();
        prop_assert_eq!(&sorted, &sel.selected_case_ids);
        prop_assert_eq!(sel.selected_case_ids.iter().copied().collect::<BTreeSet<_>>(), oracle_select(&d));
    }

    #[test]
    fn selection_idempotent(d in delivery()) {
        let sel = envelope_select(&d).selected_case_ids;
        prop_assert_eq!(envelope_select(&d.restrict_to(&sel)).selected_case_ids, sel);
    }

    #[test]
    fn selection_scale_invariant(d in delivery(), f in 0.01f64..100.0, target in units()) {
        let sel = envelope_select(&d).selected_case_ids;
        prop_assert_eq!(&envelope_select(&apply_ultimate_factor(&d, f).unwrap()).selected_case_ids, &sel);
        prop_assert_eq!(&envelope_select(&convert_units(&d, target).unwrap()).selected_case_ids, &sel);
    }

    #[test]
    fn residual_scales_linearly(r in raw(10, 5), f in 0.01f64..100.0, exp in -4i32..8) {
        let d = build(&r, UnitSystem::SI, true, false);
        let coords = d.point_coordinates().cloned();
        let tol = Tolerance::default();
        let res = |d: &LoadsDelivery| check_equilibrium_all(d, coords.as_ref(), tol).unwrap().results;
        let base = res(&d);
        // Arbitrary factor: error measured against the magnitude of the summed terms.
        for (b, s) in base.iter().zip(res(&apply_ultimate_factor(&d, f).unwrap())) {
            for (rb, rs) in [(b.force_residual, s.force_residual), (b.moment_residual.unwrap(), s.moment_residual.unwrap())] {
                prop_assert!(rel_close(rs.reference, f * rb.reference, 1e-12));
                for k in 0..3 {
                    prop_assert!((rs.components[k] - f * rb.components[k]).abs() <= 1e-12 * f * rb.reference.max(f64::MIN_POSITIVE));
                }
            }
        }
        // Power-of-two factor: scaling is exact, so the residual scales exactly.
        let p = 2f64.powi(exp);
        for (b, s) in base.iter().zip(res(&apply_ultimate_factor(&d, p).unwrap())) {
            prop_assert_eq!(s.force_residual.magnitude, p * b.force_residual.magnitude);
            prop_assert_eq!(s.moment_residual.unwrap().magnitude, p * b.moment_residual.unwrap().magnitude);
        }
    }

    #[test]
    fn deck_complete_and_exclusion_respected(d in delivery(), mask in prop::collection::vec(any::<bool>(), 8)) {
        let points = d.point_names();
        let nodes = NodeMap::new(points.iter().enumerate().map(|(i, p)| (p.clone(), 1001 + i as u32)).collect()).unwrap();
        let exclude: BTreeSet<String> = points.iter().zip(&mask).filter(|(_, m)| **m).map(|(p, _)| p.clone()).collect();
        let kept = points.len() - exclude.len();
        for case in d.cases() {
            match write_ansys_inp(case, &nodes, &exclude) {
                Ok(deck) => {
                    prop_assert_eq!(deck.lines().count(), 6 * kept + 2);
                    prop_assert_eq!(&write_ansys_inp(case, &nodes, &exclude).unwrap(), &deck);
                    for p in &exclude {
                        let node = format!("F,{},", nodes.get(p).unwrap());
                        prop_assert!(!deck.contains(&node));
                    }
                    for p in points.iter().filter(|p| !exclude.contains(*p)) {
                        let node = format!("F,{},", nodes.get(p).unwrap());
                        prop_assert_eq!(deck.matches(&node).count(), 6);
                    }
                }
                Err(_) => prop_assert_eq!(kept, 0),
            }
        }
    }

    #[test]
    fn compare_reflexive(d in delivery(), tol in 0.0f64..10.0) {
        let e = envelope_extremes(&d);
        let r = compare_envelopes(&e, &e, tol).unwrap();
        prop_assert!(!r.new_exceeds_old);
    }

    #[test]
    fn compare_widening_only_adds_flags(old in delivery(), new_seed in delivery(), c in 1.0f64..3.0) {
        // Give `new` the same cell layout as `old` by re-deriving it from old's points.
        let e_old = envelope_extremes(&old);
        let mut e_new = e_old.clone();
        let seeds: Vec<f64> = values(&new_seed).iter().flat_map(|(_, _, v)| *v).collect();
        for (i, cell) in e_new.cells.values_mut().flat_map(|m| m.values_mut()).enumerate() {
            let a = seeds[i % seeds.len()];
            let b = seeds[(i + 1) % seeds.len()];
            *cell = ExtremeCell { max: a.max(b), max_case: 1, min: a.min(b), min_case: 2 };
        }
        let mut widened = e_new.clone();
        for cell in widened.cells.values_mut().flat_map(|m| m.values_mut()) {
            cell.max += (c - 1.0) * cell.max.abs();
            cell.min -= (c - 1.0) * cell.min.abs();
        }
        let before = compare_envelopes(&e_new, &e_old, 0.0).unwrap();
        let after = compare_envelopes(&widened, &e_old, 0.0).unwrap();
        for ((_, row_b), (_, row_a)) in before.cells.iter().zip(&after.cells) {
            for (cb, ca) in row_b.values().zip(row_a.values()) {
                prop_assert!(!cb.max_exceeds || ca.max_exceeds);
                prop_assert!(!cb.min_exceeds || ca.min_exceeds);
            }
        }
        prop_assert!(!before.new_exceeds_old || after.new_exceeds_old);
    }

    #[test]
    fn strict_widening_antisymmetric(a in delivery(), b_seed in delivery()) {
        let ea = envelope_extremes(&a);
        let seeds: Vec<f64> = values(&b_seed).iter().flat_map(|(_, _, v)| *v).collect();
        let mut eb = ea.clone();
        for (i, cell) in eb.cells.values_mut().flat_map(|m| m.values_mut()).enumerate() {
            let x = seeds[i % seeds.len()];
            let y = seeds[(i + 3) % seeds.len()];
            *cell = ExtremeCell { max: x.max(y), max_case: 1, min: x.min(y), min_case: 1 };
        }
        let ab = compare_envelopes(&ea, &eb, 0.0).unwrap();
        let ba = compare_envelopes(&eb, &ea, 0.0).unwrap();
        for ((_, r1), (_, r2)) in ab.cells.iter().zip(&ba.cells) {
            for (c1, c2) in r1.values().zip(r2.values()) {
                prop_assert!(!(c1.max_exceeds && c2.max_exceeds));
                prop_assert!(!(c1.min_exceeds && c2.min_exceeds));
            }
        }
    }

    #[test]
    fn lower_bound_monotone(k in 1u32..200, alpha in 0.001f64..0.5) {
        let here = pass_lower_bound(k, alpha).unwrap();
        prop_assert!(pass_lower_bound(k + 1, alpha).unwrap() > here);
        prop_assert!(pass_lower_bound(k, alpha * 1.5).unwrap() > here);
    }
}

#[test]
fn min_k_left_inverse_on_grid() {
    let grid = [0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99];
    for p in grid {
        let k = min_k_for(p, 0.05).unwrap();
        assert!(pass_lower_bound(k, 0.05).unwrap() >= p, "p={p} k={k}");
        if k > 1 {
            assert!(pass_lower_bound(k - 1, 0.05).unwrap() < p, "p={p} k={k}");
        }
    }
}
