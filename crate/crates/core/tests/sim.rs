use bmas_core::baselines::{backhaul_load, Scheme};
use bmas_core::bmas::{offline_search, PruneSettings};
use bmas_core::modem::Constellation;
use bmas_core::sim::run::check_tables;
use bmas_core::sim::{
    emit_results, estimate_outage, parse_results_csv, results_to_csv, run_trial, Manifest, SimConfig, TrialContext,
};

fn config(overrides: &[&str]) -> SimConfig {
    SimConfig::default().with_overrides(overrides).unwrap()
}

fn qam4_context(overrides: &[&str]) -> TrialContext {
    let cfg = config(overrides);
    let c = Constellation::qam(2).unwrap();
    let table = offline_search(&c, 2, 2, &PruneSettings::default()).unwrap();
    TrialContext::new(cfg, vec![table]).unwrap()
}

#[test]
fn noiseless_frames_never_fail() {
    let ctx = qam4_context(&["run.snr_db=[300]", "run.frames=1000"]);
    let res = estimate_outage(&ctx).unwrap();
    assert_eq!(res.len(), 4);
    for r in &res {
        assert_eq!(r.outages, 0, "{}", r.scheme);
        assert_eq!(r.frames, 1000);
        assert_eq!(r.degraded_count, 0);
    }
}

#[test]
fn noiseless_uncoded_and_three_terminal_frames() {
    let ctx = qam4_context(&["run.coding=false"]);
    for i in 0..200 {
        for s in [Scheme::Bmas, Scheme::CompIdeal, Scheme::CompQuant(2)] {
            assert!(!run_trial(&ctx, s, 300.0, i).unwrap().outage);
        }
    }
    let c = Constellation::qam(2).unwrap();
    for aps in [2usize, 3] {
        let cfg = config(&["scenario.mts=3", &format!("scenario.aps={aps}")]);
        let rows = 6 / aps;
        let table = offline_search(&c, 3, rows, &PruneSettings::default()).unwrap();
        let ctx = TrialContext::new(cfg, vec![table]).unwrap();
        for i in 0..100 {
            for s in [Scheme::Bmas, Scheme::CompIdeal, Scheme::CompQuant(4)] {
                assert!(!run_trial(&ctx, s, 300.0, i).unwrap().outage, "{s} aps={aps} trial {i}");
            }
        }
    }
}

#[test]
fn missing_table_forces_degraded_but_completes() {
    let cfg = config(&["scenario.schemes=[\"comp-ideal\"]"]);
    let ctx = TrialContext::new(cfg, Vec::new()).unwrap();
    let o = run_trial(&ctx, Scheme::Bmas, 300.0, 0).unwrap();
    assert!(o.degraded);
    assert!(!o.outage);
}

#[test]
fn bmas_requires_a_matching_table() {
    assert!(TrialContext::new(SimConfig::default(), Vec::new()).is_err());
    let c = Constellation::qam(2).unwrap();
    let wrong_rows = offline_search(&c, 2, 1, &PruneSettings::default()).unwrap();
    let err = TrialContext::new(SimConfig::default(), vec![wrong_rows]).unwrap_err();
    assert!(err.to_string().contains("rows"));
    let wrong_mts = offline_search(&c, 3, 2, &PruneSettings::default()).unwrap();
    let err = check_tables(&SimConfig::default(), &[wrong_mts]).unwrap_err();
    assert!(err.to_string().contains("atlas:") && err.to_string().contains("scenario:"));
}

#[test]
fn same_seed_same_outcomes_any_worker_count() {
    let base = ["run.snr_db=[4, 8]", "run.frames=150", "run.seed=7"];
    let one = qam4_context(&[&base[..], &["run.workers=1"]].concat());
    let four = qam4_context(&[&base[..], &["run.workers=4"]].concat());
    let a = estimate_outage(&one).unwrap();
    assert_eq!(a, estimate_outage(&four).unwrap());
    assert_eq!(a, estimate_outage(&one).unwrap());
    let other = qam4_context(&["run.snr_db=[4, 8]", "run.frames=150", "run.seed=8"]);
    assert_ne!(a, estimate_outage(&other).unwrap());
    for i in 0..20 {
        assert_eq!(
            run_trial(&one, Scheme::Bmas, 6.0, i).unwrap(),
            run_trial(&four, Scheme::Bmas, 6.0, i).unwrap()
        );
    }
}

#[test]
fn results_are_consistent() {
    let ctx = qam4_context(&["run.snr_db=[2, 6]", "run.frames=100"]);
    let res = estimate_outage(&ctx).unwrap();
    for r in &res {
        assert!((0.0..=1.0).contains(&r.p_out));
        assert!(r.ci_lo <= r.p_out && r.p_out <= r.ci_hi);
        assert_eq!(r.backhaul_bits, backhaul_load(r.scheme, &ctx.config.scenario()).total);
    }
}

#[test]
fn early_stopping_extends_and_stops() {
    // At 0 dB nearly every frame fails, so the interval tightens after one batch.
    let ctx = qam4_context(&[
        "run.snr_db=[0, 14]",
        "run.frames=100",
        "run.target_p=0.25",
        "scenario.schemes=[\"comp-ideal\"]",
    ]);
    let res = estimate_outage(&ctx).unwrap();
    assert_eq!(res[0].frames, 100);
    assert_eq!(res[1].frames, 400);
}

#[test]
fn emitted_files_round_trip_and_replay() {
    let ctx = qam4_context(&["run.snr_db=[3, 9]", "run.frames=60"]);
    let res = estimate_outage(&ctx).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (csv, manifest) = emit_results(&res, &ctx.config, &ctx.tables, dir.path()).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(parse_results_csv(&text).unwrap(), res);
    assert!(text.contains(",unlimited,"));

    let m: Manifest = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(m.seed, ctx.config.run.seed);
    assert_eq!(m.atlases.len(), 1);
    let replay = TrialContext::new(m.config, ctx.tables.clone()).unwrap();
    assert_eq!(results_to_csv(&estimate_outage(&replay).unwrap()), text);

    assert!(emit_results(&[], &ctx.config, &ctx.tables, dir.path()).is_err());
}

#[test]
fn empty_scheme_list_is_refused() {
    assert!(SimConfig::default().with_overrides(&["scenario.schemes=[]"]).is_err());
}
