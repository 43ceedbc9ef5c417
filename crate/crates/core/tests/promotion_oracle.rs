mod common;

use coldstart_core::promotion::{
    compute_thresholds, evaluate_h, pessimistic_rank, realization_rng, run_experiment, select_users, sweep,
    target_similarities, write_sweep_csv, HitEvaluator, IcfEvaluator, InjectionView, Strategy, UcfEvaluator,
};
use coldstart_core::recsys::{item_similarity, score_user};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_strategy<R: Rng>(rng: &mut R) -> Strategy {
    match rng.gen_range(0..5) {
        0 => Strategy::MaxD,
        1 => Strategy::MinD,
        2 => Strategy::Pa,
        3 => Strategy::Ran,
        _ => Strategy::Exponent(rng.gen_range(-3.0..3.0)),
    }
}

#[test]
fn incremental_icf_matches_full_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..300 {
        let net = random_small_network(&mut rng, 12);
        let r = rng.gen_range(1..=net.user_count());
        let l = rng.gen_range(1..=3);
        let users = select_users(&net, random_strategy(&mut rng), r, &mut rng).unwrap();
        let sim = item_similarity(&net);
        let thr = compute_thresholds(&net, &sim, l).unwrap();
        let got = evaluate_h(&InjectionView::new(&net, &users).unwrap(), &thr);
        let expected = brute_force_icf_flags(&net, &users, l);
        assert_eq!(got.flags, expected, "case {case}");
        assert_eq!(got.hits, expected.iter().filter(|&&f| f).count());
    }
}

#[test]
fn ucf_matches_full_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..200 {
        let net = random_small_network(&mut rng, 10);
        let r = rng.gen_range(1..=net.user_count());
        let l = rng.gen_range(1..=3);
        let users = select_users(&net, random_strategy(&mut rng), r, &mut rng).unwrap();
        let eval = UcfEvaluator::new(&net, l).unwrap();
        let got = eval.evaluate(&InjectionView::new(&net, &users).unwrap());
        assert_eq!(got.flags, brute_force_ucf_flags(&net, &users, l), "case {case}");
    }
}

#[test]
fn hit_iff_pessimistic_rank_within_list() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let net = random_small_network(&mut rng, 12);
        let r = rng.gen_range(1..=net.user_count());
        let l = rng.gen_range(1..=4);
        let users = select_users(&net, Strategy::Ran, r, &mut rng).unwrap();
        let view = InjectionView::new(&net, &users).unwrap();
        let sim = item_similarity(&net);
        let thr = compute_thresholds(&net, &sim, l).unwrap();
        let out = evaluate_h(&view, &thr);
        let target = target_similarities(&view);
        for i in 0..net.user_count() as u32 {
            if view.is_linked(i) {
                assert!(!out.flags[i as usize]);
                continue;
            }
            let mut w = 0.0;
            for &g in net.items_of(i) {
                if let Some(&(_, s)) = target.iter().find(|&&(t, _)| t == g) {
                    w += s;
                }
            }
            let baseline = score_user(&net, &sim, i);
            let expect = w > 0.0 && pessimistic_rank(&baseline.scores, w) <= l;
            assert_eq!(out.flags[i as usize], expect);
        }
    }
}

#[test]
fn hits_are_bounded_and_monotone_in_list_length() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let net = random_small_network(&mut rng, 12);
        let n = net.user_count();
        let r = rng.gen_range(1..=n);
        let users = select_users(&net, random_strategy(&mut rng), r, &mut rng).unwrap();
        let view = InjectionView::new(&net, &users).unwrap();
        let sim = item_similarity(&net);
        let mut prev = 0;
        for l in 1..=6 {
            let h = evaluate_h(&view, &compute_thresholds(&net, &sim, l).unwrap()).hits;
            assert!(h <= n - r);
            assert!(h >= prev);
            prev = h;
        }
    }
}

#[test]
fn random_single_link_matches_enumeration() {
    let net = five_edge();
    let l = 6;
    let per_user: Vec<f64> = (0..net.user_count() as u32)
        .map(|u| brute_force_icf_flags(&net, &[u], l).iter().filter(|&&f| f).count() as f64)
        .collect();
    let exact = per_user.iter().sum::<f64>() / per_user.len() as f64;
    let var = per_user.iter().map(|h| (h - exact).powi(2)).sum::<f64>() / per_user.len() as f64;
    let sim = item_similarity(&net);
    let thr = compute_thresholds(&net, &sim, l).unwrap();
    let realizations = 10_000;
    let res = run_experiment(&net, &IcfEvaluator::new(&thr), Strategy::Ran, 1, realizations, 8).unwrap();
    let bound = 3.0 * (var / realizations as f64).sqrt();
    assert!((res.mean - exact).abs() <= bound.max(1e-12), "{} vs {exact}", res.mean);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = random_small_network(&mut rng, 12);
    let sim = item_similarity(&net);
    let thr = compute_thresholds(&net, &sim, 2).unwrap();
    let eval = IcfEvaluator::new(&thr);
    let strategies = [Strategy::MaxD, Strategy::MinD, Strategy::Pa, Strategy::Exponent(-1.5)];
    let csv_with = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let res = sweep(&net, &eval, &strategies, &[1, 2], 40, 17).unwrap();
            let mut out = Vec::new();
            write_sweep_csv(&res, &mut out).unwrap();
            out
        })
    };
    let serial = csv_with(1);
    assert_eq!(serial, csv_with(4));
    assert_eq!(serial, csv_with(3));
}

#[test]
fn realization_streams_are_independent_of_order() {
    let net = five_edge();
    let a: Vec<Vec<u32>> = (0..5)
        .map(|r| select_users(&net, Strategy::Ran, 2, &mut realization_rng(9, r)).unwrap())
        .collect();
    let b: Vec<Vec<u32>> = (0..5)
        .rev()
        .map(|r| select_users(&net, Strategy::Ran, 2, &mut realization_rng(9, r)).unwrap())
        .collect();
    let b: Vec<Vec<u32>> = b.into_iter().rev().collect();
    assert_eq!(a, b);
}
