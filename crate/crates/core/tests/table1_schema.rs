use rand::Rng;

use spp_core::data::{encode, Record, Role, Schema, Value};
use spp_core::seed;

fn load() -> Schema {
    Schema::load(concat!(env!("CARGO_MANIFEST_DIR"), "/testdata/table1_schema.json")).unwrap()
}

#[test]
fn group_boundaries() {
    let s = load();
    assert_eq!(s.len(), 46);
    let roles: Vec<Role> = s.attributes.iter().map(|a| a.role).collect();
    assert_eq!(roles[0], Role::Time);
    assert_eq!(roles[1], Role::Geography);
    assert!(roles[2..18].iter().all(|&r| r == Role::External));
    assert!(roles[18..32].iter().all(|&r| r == Role::Socio));
    assert!(roles[32..].iter().all(|&r| r == Role::Preference));
    assert_eq!(s.preference_indices().len(), 14);
    assert_eq!(s.conditional_indices().len(), 32);
    assert_eq!(s.time_index(), Some(0));
    assert!(!s.is_fitted());
}

#[test]
fn fits_and_encodes_random_records() {
    let mut s = load();
    let mut rng = seed::rng(4);
    let records: Vec<Record> = (0..500)
        .map(|i| Record {
            id: i,
            values: s
                .attributes
                .iter()
                .map(|a| match a.n_categories() {
                    Some(k) if !a.is_numerical() => Value::Cat(rng.random_range(0..k)),
                    _ => Value::Num(rng.random_range(0.0..100.0)),
                })
                .collect(),
        })
        .collect();
    let merged = s.fit(&records).unwrap();
    assert!(merged.is_empty(), "{merged:?}");
    assert!(s.is_fitted());
    let bins: usize = s
        .preference_indices()
        .iter()
        .map(|&j| s.attributes[j].n_categories().unwrap())
        .sum();
    // 2+2+4+5+5+5+4+22+27 categorical plus 5+5+6+5+5 bins
    assert_eq!(bins, 76 + 26);
    let data = encode(&records, &s).unwrap();
    assert_eq!(data.preference.ncols(), bins);
    assert_eq!(data.len(), 500);
}
