use bmas_core::bmas::{
    allocate_rows, embed_pair, nearest_sfs, offline_search, online_select, CandidateTable, PruneSettings,
};
use bmas_core::gf2::{BinMatrix, DEFAULT_ENUM_BUDGET};
use bmas_core::modem::Constellation;
use bmas_core::phy::channel::complex_gaussian;
use bmas_core::Error;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn qam4_table() -> CandidateTable {
    let c = Constellation::qam(2).unwrap();
    offline_search(&c, 2, 2, &PruneSettings::default()).unwrap()
}

/// Separation of a map at channel `[1, v]`, by direct pairwise evaluation.
fn brute_dmin(c: &Constellation, v: Complex64, g: &BinMatrix) -> f64 {
    let one = cx(1.0, 0.0);
    let s: Vec<Complex64> = (0..16)
        .map(|p| one * c.point(p >> 2) + v * c.point(p & 3))
        .collect();
    let mut best = f64::INFINITY;
    for p in 0..16 {
        for q in (p + 1)..16 {
            if g.apply(p as u64) != g.apply(q as u64) {
                let d = (s[p] - s[q]).norm_sqr();
                if d.sqrt() <= 1e-9 {
                    return 0.0;
                }
                best = best.min(d);
            }
        }
    }
    best
}

#[test]
fn top_candidate_matches_exhaustive_optimum() {
    let c = Constellation::qam(2).unwrap();
    let table = qam4_table();
    assert_eq!(table.entries.len(), 12);
    for (i, e) in table.entries.iter().enumerate() {
        let best = (0u64..256)
            .map(|x| BinMatrix::from_integer(2, 4, x).unwrap())
            .filter(|g| g.rank() == 2)
            .map(|g| brute_dmin(&c, e.value, &g))
            .fold(0.0, f64::max);
        let top = &table.list_of(i)[0];
        assert_eq!(top.score.dmin, best, "state {}", e.value);
        assert_eq!(brute_dmin(&c, e.value, &top.matrix), best);
        assert!(best > 0.0);
    }
}

#[test]
fn lists_are_ranked_and_full_rank() {
    let table = qam4_table();
    for list in &table.lists {
        assert!(!list.is_empty() && list.len() <= table.settings.cap);
        for w in list.windows(2) {
            assert_ne!(
                bmas_core::bmas::offline::candidate_cmp(&w[0], &w[1]),
                std::cmp::Ordering::Greater
            );
        }
        assert!(list.iter().all(|c| c.matrix.rank() == table.rows));
    }
    assert_eq!(table.unresolved_sfs(), 0);
}

#[test]
fn xor_map_heads_the_unit_state() {
    let table = qam4_table();
    let i = table.entries.iter().position(|e| e.value == cx(1.0, 0.0)).unwrap();
    let xor = BinMatrix::from_rows(&[[1u8, 0, 1, 0], [0, 1, 0, 1]]).unwrap();
    let list = table.list_of(i);
    assert!(list.iter().any(|c| c.matrix == xor));
    // It is the only row space keeping all clashes together at v = 1.
    assert_eq!(list[0].matrix, xor);
    assert!(list[1..].iter().all(|c| !c.score.is_consistent()));
}

#[test]
fn nearest_state_examples() {
    let table = qam4_table();
    for (i, e) in table.entries.iter().enumerate() {
        assert_eq!(nearest_sfs(&table, e.value).unwrap(), (i, 0.0));
        // Conjugate ratio lands on the conjugate state.
        let (j, _) = nearest_sfs(&table, e.value.conj() * 1.01).unwrap();
        assert!((table.entries[j].value - e.value.conj()).norm() < 1e-9);
    }
    let (i, d) = nearest_sfs(&table, cx(1.05, 0.0)).unwrap();
    assert_eq!(table.entries[i].value, cx(1.0, 0.0));
    assert!((d - 0.05).abs() < 1e-12);
}

#[test]
fn stored_score_matches_rescoring_at_the_state() {
    use bmas_core::sfs::{superimpose, DistanceProfile};
    let c = Constellation::qam(2).unwrap();
    let table = qam4_table();
    for (i, e) in table.entries.iter().enumerate() {
        let profile = DistanceProfile::new(&superimpose(&c, &[cx(1.0, 0.0), e.value]).unwrap());
        for cand in table.list_of(i) {
            assert_eq!(profile.score(&cand.matrix).unwrap(), cand.score);
        }
    }
}

fn decode_identity(a: &bmas_core::bmas::Assignment, bits: usize) {
    for p in 0..(1u64 << bits) {
        assert_eq!(a.recover(a.encode(p)), p);
    }
}

#[test]
fn spec_channels_decode_every_message() {
    let table = qam4_table();
    let h = vec![vec![cx(1.0, 0.0), cx(0.3, 0.2)], vec![cx(1.0, 0.0), cx(0.0, 1.4)]];
    let a = online_select(std::slice::from_ref(&table), &h).unwrap();
    assert!(!a.degraded);
    assert!(a.global.try_invert().unwrap().is_some());
    decode_identity(&a, 4);
}

#[test]
fn both_aps_at_the_same_state_get_different_blocks() {
    let table = qam4_table();
    let h = vec![vec![cx(1.0, 0.0), cx(1.0, 0.0)], vec![cx(1.0, 0.0), cx(1.0, 0.0)]];
    let a = online_select(std::slice::from_ref(&table), &h).unwrap();
    let xor = BinMatrix::from_rows(&[[1u8, 0, 1, 0], [0, 1, 0, 1]]).unwrap();
    assert!(!a.degraded);
    assert_eq!(a.aps[0].matrix, xor);
    assert_ne!(a.aps[1].matrix, xor);
    assert_eq!(a.global.rank(), 4);
}

#[test]
fn random_channels_never_degrade() {
    let table = qam4_table();
    let tables = std::slice::from_ref(&table);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..10_000 {
        let h: Vec<Vec<Complex64>> = (0..2)
            .map(|_| (0..2).map(|_| complex_gaussian(&mut rng)).collect())
            .collect();
        let a = online_select(tables, &h).unwrap();
        assert!(!a.degraded);
        assert_eq!(a.global.rank(), 4);
        assert_eq!(online_select(tables, &h).unwrap(), a);
    }
}

#[test]
fn three_terminal_assignments_invert() {
    let c = Constellation::qam(2).unwrap();
    let settings = PruneSettings::default();
    let tables = [
        offline_search(&c, 3, 3, &settings).unwrap(),
        offline_search(&c, 3, 2, &settings).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for aps in [2usize, 3] {
        for _ in 0..500 {
            let h: Vec<Vec<Complex64>> = (0..aps)
                .map(|_| (0..3).map(|_| complex_gaussian(&mut rng)).collect())
                .collect();
            let a = online_select(&tables, &h).unwrap();
            assert!(!a.degraded && !a.pairing_fallback);
            decode_identity(&a, 6);
            for ap in &a.aps {
                let (x, y) = ap.pair;
                let other = 3 - x - y;
                for k in 0..2 {
                    for r in 0..ap.matrix.rows() {
                        assert_eq!(ap.matrix.get(r, other * 2 + k), 0);
                    }
                }
            }
        }
    }
}

#[test]
fn row_allocation() {
    let h2 = vec![vec![cx(1.0, 0.0); 3]; 2];
    assert_eq!(allocate_rows(6, &h2).unwrap(), vec![3, 3]);
    let h4 = vec![
        vec![cx(0.1, 0.0); 2],
        vec![cx(2.0, 0.0); 2],
        vec![cx(1.0, 0.0); 2],
        vec![cx(0.5, 0.0); 2],
    ];
    assert_eq!(allocate_rows(6, &h4).unwrap(), vec![1, 2, 2, 1]);
    assert!(allocate_rows(2, &h4).is_err());
}

#[test]
fn embedding_places_pair_columns() {
    let g = BinMatrix::from_rows(&[[1u8, 0, 0, 1]]).unwrap();
    let e = embed_pair(&g, (0, 2), 2, 3).unwrap();
    assert_eq!(e, BinMatrix::from_rows(&[[1u8, 0, 0, 0, 0, 1]]).unwrap());
}

#[test]
fn atlas_round_trip_and_tamper_detection() {
    let table = qam4_table();
    let text = table.to_atlas_string();
    assert_eq!(CandidateTable::from_atlas_str(&text).unwrap(), table);
    assert_eq!(qam4_table().to_atlas_string(), text);

    let mut bytes = text.clone().into_bytes();
    let pos = text.find("sfs ").unwrap() + 4;
    bytes[pos] = if bytes[pos] == b'1' { b'2' } else { b'1' };
    let corrupted = String::from_utf8(bytes).unwrap();
    assert!(matches!(CandidateTable::from_atlas_str(&corrupted), Err(Error::Checksum { .. })));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("qam4.atlas");
    table.write_atlas(&path).unwrap();
    assert_eq!(CandidateTable::read_atlas(&path).unwrap(), table);
}

#[test]
fn budget_and_argument_errors() {
    let c = Constellation::qam(4).unwrap();
    let tight = PruneSettings {
        budget: 16,
        ..PruneSettings::default()
    };
    assert!(matches!(
        offline_search(&c, 2, 4, &tight),
        Err(Error::BudgetExceeded { bits: 32, budget: 16 })
    ));
    assert_eq!(PruneSettings::default().budget, DEFAULT_ENUM_BUDGET);
    let q4 = Constellation::qam(2).unwrap();
    assert!(offline_search(&q4, 2, 5, &PruneSettings::default()).is_err());
    assert!(offline_search(&q4, 1, 2, &PruneSettings::default()).is_err());
    let keep0 = PruneSettings {
        keep: Some(0),
        ..PruneSettings::default()
    };
    assert!(offline_search(&q4, 2, 2, &keep0).is_err());
}

#[test]
fn sixteen_qam_pruned_table() {
    let c = Constellation::qam(4).unwrap();
    let settings = PruneSettings {
        keep: Some(50),
        ..PruneSettings::default()
    };
    let table = offline_search(&c, 2, 4, &settings).unwrap();
    assert_eq!(table.entries.len(), 50);
    // Every kept state is at least as active as every dropped one.
    let all: Vec<f64> = bmas_core::sfs::enumerate_sfs(&c)
        .iter()
        .map(|s| bmas_core::sfs::activity_exact(s.value, settings.delta))
        .collect();
    let min_kept = table.entries.iter().map(|e| e.activity).fold(f64::INFINITY, f64::min);
    let kept: Vec<usize> = table.entries.iter().map(|e| e.index).collect();
    for (i, a) in all.iter().enumerate() {
        if !kept.contains(&i) {
            assert!(*a <= min_kept);
        }
    }
    eprintln!(
        "16QAM keep 50: {} distinct matrices, {} unresolved states",
        table.distinct_matrices(),
        table.unresolved_sfs()
    );
}
