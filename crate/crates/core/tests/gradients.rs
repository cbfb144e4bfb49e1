mod common;

use std::collections::BTreeSet;

use common::{gradient_check, step_cases};
use wikisvd::Variant;

const CONFIGS_PER_CASE: u64 = 20;

#[test]
fn sgd_step_matches_finite_differences() {
    let mut failures = Vec::new();
    let mut runs = 0;
    for (variant, artificial) in step_cases() {
        for seed in 0..CONFIGS_PER_CASE {
            let c = gradient_check(1000 * seed + variant as u64, variant, artificial);
            runs += 1;
            if c.max_rel_error > 1e-4 {
                failures.push(format!("{variant} artificial={artificial} seed={seed}: {} ({})", c.max_rel_error, c.worst));
            }
        }
    }
    assert!(runs >= 100);
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn every_block_is_exercised() {
    let expect = |v: Variant, art: bool| -> BTreeSet<String> {
        let tag = if v == Variant::DualParams && art { "shadow" } else { "base" };
        let mut s: BTreeSet<String> = ["b_u", "b_i", "p", "q"].iter().map(|b| format!("{tag}.{b}")).collect();
        match v {
            Variant::ItemAssist => {
                s.insert("y_i".into());
            }
            Variant::UserItemAssist => {
                s.insert("y_ui".into());
            }
            Variant::SimLatent => {
                s.insert("y_j".into());
            }
            _ => {}
        }
        s
    };
    for (variant, artificial) in step_cases() {
        let seen: BTreeSet<String> = (0..CONFIGS_PER_CASE)
            .flat_map(|seed| gradient_check(1000 * seed + variant as u64, variant, artificial).blocks)
            .collect();
        assert_eq!(seen, expect(variant, artificial), "{variant} artificial={artificial}");
    }
}
