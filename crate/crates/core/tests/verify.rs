use bmas_core::bmas::{offline_search, PruneSettings};
use bmas_core::modem::Constellation;
use bmas_core::verify::{verify_atlas_text, verify_table, Outcome, VerifyOptions};

fn qam4_text() -> String {
    let c = Constellation::qam(2).unwrap();
    offline_search(&c, 2, 2, &PruneSettings::default())
        .unwrap()
        .to_atlas_string()
}

#[test]
fn fresh_atlas_passes_every_check() {
    let report = verify_atlas_text(&qam4_text(), &VerifyOptions::default());
    assert!(report.passed(), "{report}");
    assert_eq!(report.checks.len(), 5);
    assert!(report.checks.iter().all(|c| c.outcome == Outcome::Pass), "{report}");
}

#[test]
fn corrupted_byte_fails_the_checksum() {
    let text = qam4_text();
    let at = text.find("sfs ").unwrap() + 10;
    let mut bytes = text.into_bytes();
    bytes[at] = if bytes[at] == b'1' { b'2' } else { b'1' };
    let report = verify_atlas_text(&String::from_utf8(bytes).unwrap(), &VerifyOptions::default());
    assert!(!report.passed());
    assert_eq!(report.checks.len(), 1);
    assert_eq!(report.failures().next().unwrap().0, "checksum");
}

#[test]
fn tampered_score_names_the_state() {
    let c = Constellation::qam(2).unwrap();
    let mut t = offline_search(&c, 2, 2, &PruneSettings::default()).unwrap();
    let victim = 3;
    let list = t.entries[victim].list;
    t.lists[list][0].score.dmin *= 1.5;
    t.lists[list][0].score.residual *= 1.5;
    let report = verify_atlas_text(&t.to_atlas_string(), &VerifyOptions::default());
    assert!(!report.passed());
    let tag = format!("sfs #{} ", t.entries[victim].index);
    let failed: Vec<_> = report.failures().collect();
    assert!(failed.iter().any(|(name, msg)| *name == "optimality" && msg.starts_with(&tag)), "{report}");
    assert!(failed.iter().any(|(name, msg)| *name == "scores" && msg.starts_with(&tag)), "{report}");
}

#[test]
fn dropped_state_is_detected() {
    let c = Constellation::qam(2).unwrap();
    let mut t = offline_search(&c, 2, 2, &PruneSettings::default()).unwrap();
    t.entries.remove(0);
    let report = verify_table(&t, &VerifyOptions::default());
    assert!(report.failures().any(|(name, _)| name == "states"), "{report}");
}

#[test]
fn three_terminal_tables_verify() {
    let c = Constellation::qam(2).unwrap();
    for rows in [2, 3] {
        let t = offline_search(&c, 3, rows, &PruneSettings::default()).unwrap();
        let opts = VerifyOptions {
            decode_draws: 200,
            ..VerifyOptions::default()
        };
        let report = verify_table(&t, &opts);
        assert!(report.passed(), "rows {rows}: {report}");
    }
}

#[test]
fn large_tables_skip_brute_force() {
    let c = Constellation::qam(4).unwrap();
    let settings = PruneSettings {
        keep: Some(50),
        ..PruneSettings::default()
    };
    let t = offline_search(&c, 2, 4, &settings).unwrap();
    let opts = VerifyOptions {
        decode_draws: 50,
        ..VerifyOptions::default()
    };
    let report = verify_table(&t, &opts);
    assert!(report.passed(), "{report}");
    let opt = report.checks.iter().find(|c| c.name == "optimality").unwrap();
    assert!(matches!(opt.outcome, Outcome::Skipped(_)));
}
