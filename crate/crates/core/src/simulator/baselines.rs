use crate::allocator::{Allocation, AllocationProblem};

/// Highest-rate feasible item of channel `m` costing at most `budget`;
/// ties go to the cheaper item, then the lower index.
fn best_item(problem: &AllocationProblem, m: usize, budget: f64) -> Option<usize> {
    (0..problem.n_rates(m))
        .filter(|&q| problem.item_feasible(m, q) && problem.power(m, q) <= budget)
        .min_by(|&a, &b| {
            problem
                .rate(m, b)
                .total_cmp(&problem.rate(m, a))
                .then(problem.power(m, a).total_cmp(&problem.power(m, b)))
                .then(a.cmp(&b))
        })
}

/// One channel only: the (channel, rate) pair with the most rate the whole
/// budget can buy, cheapest first on ties, then the lowest channel.
pub fn baseline_single_channel(problem: &AllocationProblem) -> Allocation {
    let m_total = problem.n_channels();
    let best = (0..m_total)
        .filter_map(|m| best_item(problem, m, problem.p_max()).map(|q| (m, q)))
        .min_by(|&(ma, qa), &(mb, qb)| {
            problem
                .rate(mb, qb)
                .total_cmp(&problem.rate(ma, qa))
                .then(problem.power(ma, qa).total_cmp(&problem.power(mb, qb)))
                .then(ma.cmp(&mb))
        });
    let mut choices = vec![None; m_total];
    if let Some((m, q)) = best {
        choices[m] = Some(q);
    }
    Allocation::from_choices(problem, &choices)
}

/// A `radios`-radio node without joint allocation: it takes the channels
/// with the best gain (cheapest lowest-power item) and gives each an equal
/// share of the budget.
pub fn baseline_multi_radio_split(problem: &AllocationProblem, radios: usize) -> Allocation {
    let m_total = problem.n_channels();
    let mut order: Vec<usize> = (0..m_total).collect();
    let cheapest = |m: usize| {
        problem.power_matrix()[m]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    };
    order.sort_by(|&a, &b| cheapest(a).total_cmp(&cheapest(b)).then(a.cmp(&b)));
    let k = radios.max(1).min(m_total);
    let share = problem.p_max() / k as f64;
    let mut choices = vec![None; m_total];
    for &m in order.iter().take(k) {
        choices[m] = best_item(problem, m, share);
    }
    let mut alloc = Allocation::from_choices(problem, &choices);
    // k equal shares can round to a hair above the budget.
    while alloc.total_power > problem.p_max() {
        let worst = alloc
            .used_channels()
            .max_by(|&a, &b| alloc.powers[a].total_cmp(&alloc.powers[b]))
            .expect("positive power implies a used channel");
        choices[worst] = None;
        alloc = Allocation::from_choices(problem, &choices);
    }
    alloc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocator::{random_problem, solve_dp};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn problem(powers: Vec<Vec<f64>>, p_max: f64) -> AllocationProblem {
        let m = powers.len();
        let rates = vec![vec![2e6, 5.5e6, 11e6]; m];
        AllocationProblem::new(rates, powers, p_max, vec![f64::INFINITY; m]).unwrap()
    }

    #[test]
    fn single_channel_takes_the_best_pair() {
        let p = problem(vec![vec![0.01, 0.05, 0.2], vec![0.02, 0.04, 0.09]], 0.1);
        let a = baseline_single_channel(&p);
        assert_eq!(a.choices, vec![None, Some(2)]);
        assert_eq!(a.total_rate, 11e6);
    }

    #[test]
    fn split_uses_equal_shares() {
        let p = problem(
            vec![
                vec![0.01, 0.05, 0.2],
                vec![0.02, 0.04, 0.09],
                vec![0.001, 0.002, 0.04],
            ],
            0.1,
        );
        // best gains: channel 2, then 0; each gets 0.05 W
        let a = baseline_multi_radio_split(&p, 2);
        assert_eq!(a.choices, vec![Some(1), None, Some(2)]);
        assert!(a.satisfies(&p));
    }

    #[test]
    fn baselines_never_beat_dp_and_stay_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let p = random_problem(&mut rng, 6, 3);
            let best = solve_dp(&p).total_rate;
            let single = baseline_single_channel(&p);
            assert!(single.satisfies(&p));
            assert!(single.total_rate <= best);
            for k in 1..=4 {
                let split = baseline_multi_radio_split(&p, k);
                assert!(split.satisfies(&p));
                assert!(split.total_rate <= best);
            }
        }
    }

    #[test]
    fn single_channel_matches_dp_on_one_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let p = random_problem(&mut rng, 1, 4);
            assert_eq!(baseline_single_channel(&p), solve_dp(&p));
        }
    }
}
