use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;

const MB: f64 = 1e6;

fn table3() -> RateTable {
    RateTable::new(
        vec![2.0 * MB, 5.5 * MB, 11.0 * MB],
        vec![10.0, 30.0, 100.0],
        vec![3.0, 2.0, 1.0],
    )
    .unwrap()
}

fn fixture_m2() -> AllocationProblem {
    AllocationProblem::with_table(
        &table3(),
        vec![vec![0.2, 0.5, 0.9], vec![0.3, 0.6, 1.2]],
        1.0,
        vec![f64::INFINITY; 2],
    )
    .unwrap()
}

#[test]
fn build_problem_unit_case() {
    let t = RateTable::new(vec![1.0], vec![7.0], vec![1.0]).unwrap();
    let p = build_problem(&[1.0], &[0.0], &[f64::INFINITY], &t, 1.0, 100.0).unwrap();
    assert_eq!(p.power(0, 0), 7.0);
}

#[test]
fn build_problem_gain_scaling_and_arithmetic() {
    let t = table3();
    let caps = [f64::INFINITY; 2];
    let p = build_problem(&[1e-8, 2e-8], &[2e-10, 2e-10], &caps, &t, 1e-10, 1.0).unwrap();
    for (got, want) in p.power_matrix()[0].iter().zip([0.3, 0.9, 3.0]) {
        assert!(((got - want) / want).abs() < 1e-12, "{got} vs {want}");
    }
    for q in 0..3 {
        let half = p.power(0, q) / 2.0;
        assert!(((p.power(1, q) - half) / half).abs() < 1e-15);
    }
    assert_eq!(p.rate_matrix()[1], t.rates());
}

#[test]
fn zero_gain_channel_is_unusable_not_an_error() {
    let t = table3();
    let p = build_problem(
        &[0.0, 1e-8],
        &[0.0, 0.0],
        &[f64::INFINITY; 2],
        &t,
        1e-10,
        1.0,
    )
    .unwrap();
    assert!(p.power(0, 0).is_infinite());
    let set = prune_ip(&p);
    assert!(set.per_channel[0].is_empty());
    assert_eq!(solve_dp(&p).choices[0], None);
}

#[test]
fn prune_keeps_pareto_row_intact() {
    let set = prune_ip(&fixture_m2());
    assert_eq!(set.per_channel[0], vec![0, 1, 2]);
    // 1.2 W exceeds the 1 W budget
    assert_eq!(set.per_channel[1], vec![0, 1]);
}

#[test]
fn prune_removes_everything_over_budget() {
    let p = AllocationProblem::with_table(
        &table3(),
        vec![vec![2.0, 3.0, 4.0]],
        1.0,
        vec![f64::INFINITY],
    )
    .unwrap();
    assert!(prune_ip(&p).is_empty());
    let a = solve_dp(&p);
    assert_eq!(a, Allocation::none(1));
    assert_eq!(solve_bruteforce(&p).unwrap(), a);
}

#[test]
fn prune_respects_channel_cap() {
    let p = AllocationProblem::with_table(&table3(), vec![vec![0.2, 0.5, 0.9]], 1.0, vec![0.5])
        .unwrap();
    assert_eq!(prune_ip(&p).per_channel[0], vec![0, 1]);
}

/// Pairwise definition of item dominance, written independently of the
/// pruning code.
fn efficient_by_pairs(p: &AllocationProblem, m: usize) -> Vec<usize> {
    let n = p.n_rates(m);
    let feasible: Vec<usize> = (0..n)
        .filter(|&q| p.power(m, q) <= p.p_max() && p.power(m, q) <= p.caps()[m])
        .collect();
    let mut out = Vec::new();
    'outer: for &j in &feasible {
        for &i in &feasible {
            if i == j {
                continue;
            }
            let weakly = p.power(m, i) <= p.power(m, j) && p.rate(m, i) >= p.rate(m, j);
            let identical = p.power(m, i) == p.power(m, j) && p.rate(m, i) == p.rate(m, j);
            if weakly && (!identical || i < j) {
                continue 'outer;
            }
        }
        out.push(j);
    }
    out.sort_by(|&a, &b| p.power(m, a).total_cmp(&p.power(m, b)).then(a.cmp(&b)));
    out
}

#[test]
fn equal_rate_cheaper_item_dominates() {
    let p = AllocationProblem::new(
        vec![vec![5.0, 5.0, 9.0, 3.0]],
        vec![vec![0.4, 0.3, 0.8, 0.35]],
        1.0,
        vec![f64::INFINITY],
    )
    .unwrap();
    let set = prune_ip(&p);
    assert_eq!(set.per_channel[0], vec![1, 2]);
    assert_eq!(set.per_channel[0], efficient_by_pairs(&p, 0));
}

#[test]
fn identical_items_keep_one() {
    let p = AllocationProblem::new(
        vec![vec![4.0, 4.0]],
        vec![vec![0.5, 0.5]],
        1.0,
        vec![f64::INFINITY],
    )
    .unwrap();
    assert_eq!(prune_ip(&p).per_channel[0], vec![0]);
}

#[test]
fn two_channel_fixture_matches_enumeration() {
    let p = fixture_m2();
    let dp = solve_dp(&p);
    let bf = solve_bruteforce(&p).unwrap();
    assert_eq!(dp, bf);
    // 11 Mb/s on the first channel alone beats any 7.5 Mb/s split
    assert_eq!(dp.total_rate, 11.0 * MB);
    assert_eq!(dp.choices, vec![Some(2), None]);
    assert_eq!(dp.powers, vec![0.9, 0.0]);
    assert!(dp.satisfies(&p));
}

#[test]
fn single_channel_picks_best_feasible() {
    let p = AllocationProblem::with_table(
        &table3(),
        vec![vec![0.2, 0.5, 1.5]],
        1.0,
        vec![f64::INFINITY],
    )
    .unwrap();
    let a = solve_dp(&p);
    assert_eq!(a.choices, vec![Some(1)]);
    assert_eq!(a.total_rate, 5.5 * MB);
    assert_eq!(solve_bruteforce(&p).unwrap(), a);
}

#[test]
fn skips_channels_when_budget_is_spent() {
    // one cheap channel reaches the top rate; using any other channel as
    // well would break the budget
    let p = AllocationProblem::with_table(
        &table3(),
        vec![
            vec![0.8, 0.9, 1.5],
            vec![0.05, 0.1, 0.95],
            vec![0.7, 0.88, 2.0],
        ],
        1.0,
        vec![f64::INFINITY; 3],
    )
    .unwrap();
    let a = solve_dp(&p);
    assert_eq!(a, solve_bruteforce(&p).unwrap());
    assert_eq!(a.choices, vec![None, Some(2), None]);
    assert_eq!(a.powers[0], 0.0);
    assert_eq!(a.powers[2], 0.0);
}

#[test]
fn ties_prefer_less_power() {
    let p = AllocationProblem::new(
        vec![vec![4.0], vec![4.0]],
        vec![vec![0.6], vec![0.5]],
        0.7,
        vec![f64::INFINITY; 2],
    )
    .unwrap();
    let a = solve_dp(&p);
    assert_eq!(a.choices, vec![None, Some(0)]);
    assert_eq!(solve_bruteforce(&p).unwrap(), a);
}

#[test]
fn bruteforce_guard() {
    let rows = vec![vec![0.1; 9]; 8];
    let rates = vec![(1..=9).map(|r| r as f64).collect::<Vec<_>>(); 8];
    let p = AllocationProblem::new(rates, rows, 1.0, vec![f64::INFINITY; 8]).unwrap();
    assert!(matches!(solve_bruteforce(&p), Err(Error::TooLarge { .. })));
}

#[test]
fn stage_sets_are_mutually_non_dominated() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let p = random_general_problem(&mut rng, 6, 4);
        let out = solve_dp_with(
            &p,
            DpOptions {
                record_stages: true,
                ..DpOptions::default()
            },
        );
        assert_eq!(out.stages.len(), p.n_channels());
        for stage in &out.stages {
            for (i, x) in stage.iter().enumerate() {
                assert!(x.total_power <= p.p_max());
                for (j, y) in stage.iter().enumerate() {
                    if i != j {
                        assert!(
                            !(x.total_power <= y.total_power && x.total_rate >= y.total_rate),
                            "stage keeps a dominated state"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn dp_state_sums_match_choices() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let p = random_problem(&mut rng, 5, 4);
        let out = solve_dp_with(
            &p,
            DpOptions {
                record_stages: true,
                ..Default::default()
            },
        );
        for stage in &out.stages {
            for s in stage {
                let rebuilt = Allocation::from_choices(&p, &s.choices);
                assert_eq!(rebuilt.total_rate, s.total_rate);
                assert_eq!(rebuilt.total_power, s.total_power);
            }
        }
    }
}

#[test]
fn reinserting_pruned_items_never_helps() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..300 {
        let p = random_general_problem(&mut rng, 5, 4);
        let pruned = solve_dp(&p).total_rate;
        let unpruned = solve_dp_with(
            &p,
            DpOptions {
                ip_dominance: false,
                ..Default::default()
            },
        )
        .allocation
        .total_rate;
        assert_eq!(pruned, unpruned);
    }
}

#[test]
fn instance_text_round_trip() {
    let p = fixture_m2();
    let text = write_problem(&p);
    assert_eq!(parse_problem(&text).unwrap(), p);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let g = random_general_problem(&mut rng, 4, 3);
    assert_eq!(parse_problem(&write_problem(&g)).unwrap(), g);
}

#[test]
fn instance_parse_errors_have_positions() {
    assert!(matches!(parse_problem(""), Err(Error::Parse { .. })));
    let bad = "channels 1\nrates 1 2\np_max 1\npower 0.1 zz\n";
    match parse_problem(bad) {
        Err(Error::Parse { line, column, .. }) => {
            assert_eq!(line, 4);
            assert_eq!(column, 11);
        }
        other => panic!("unexpected {other:?}"),
    }
    let short = "channels 2\nrates 1\np_max 1\npower 0.1\n";
    assert!(matches!(parse_problem(short), Err(Error::Parse { .. })));
    let unknown = "channels 1\nbogus 3\n";
    assert!(matches!(
        parse_problem(unknown),
        Err(Error::Parse {
            line: 2,
            column: 1,
            ..
        })
    ));
    let cap = "channels 1\nrates 1\np_max 1\ncap 3 0.5\npower 0.1\n";
    assert!(matches!(
        parse_problem(cap),
        Err(Error::Parse {
            line: 4,
            column: 5,
            ..
        })
    ));
}

#[test]
fn instance_with_caps_and_comments() {
    let text = "# fixture\nchannels 2   # two\nrates 2e6 5.5e6 11e6\np_max 1.0\ncap 2 0.55\npower 0.2 0.5 0.9\npower 0.3 0.6 1.2\n";
    let p = parse_problem(text).unwrap();
    assert_eq!(p.caps(), &[f64::INFINITY, 0.55]);
    assert_eq!(prune_ip(&p).per_channel[1], vec![0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn dp_matches_exhaustive_search(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = if seed % 2 == 0 {
            random_problem(&mut rng, 6, 4)
        } else {
            random_general_problem(&mut rng, 6, 4)
        };
        let dp = solve_dp(&p);
        let bf = solve_bruteforce(&p).unwrap();
        prop_assert_eq!(dp.total_rate, bf.total_rate);
        prop_assert!(dp.satisfies(&p));
        prop_assert!(bf.satisfies(&p));
    }

    #[test]
    fn more_budget_never_hurts(seed in any::<u64>(), factor in 1.0f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_problem(&mut rng, 6, 4);
        let richer = p.with_budget(p.p_max() * factor).unwrap();
        prop_assert!(solve_dp(&richer).total_rate >= solve_dp(&p).total_rate);
    }

    #[test]
    fn more_interference_never_helps(
        gains in prop::collection::vec(1e-9f64..1e-7, 1..6),
        bump_channel in 0usize..6,
        bump in 0.0f64..5e-10,
        p_max in 0.01f64..0.5,
    ) {
        let t = table3();
        let m = gains.len();
        let base = vec![0.0; m];
        let mut more = base.clone();
        more[bump_channel % m] = bump;
        let caps = vec![f64::INFINITY; m];
        let a = build_problem(&gains, &base, &caps, &t, 1e-10, p_max).unwrap();
        let b = build_problem(&gains, &more, &caps, &t, 1e-10, p_max).unwrap();
        prop_assert!(solve_dp(&b).total_rate <= solve_dp(&a).total_rate);
    }

    #[test]
    fn instance_format_round_trips(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_problem(&mut rng, 6, 4);
        prop_assert_eq!(parse_problem(&write_problem(&p)).unwrap(), p);
    }
}
