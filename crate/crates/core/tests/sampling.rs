use rmab_learn::{five_state_example, RngStream};

/// Upper 0.001 quantile of χ² with 4 degrees of freedom.
const CHI2_4_999: f64 = 18.4668;

#[test]
fn next_state_frequencies_pass_chi_square_on_every_row() {
    let mdp = five_state_example();
    let draws = 100_000;
    let mut rng = RngStream::new(11);
    for action in 0..2 {
        for state in 0..5 {
            let mut counts = [0usize; 5];
            for _ in 0..draws {
                counts[mdp.draw_next_state(state, action, &mut rng)] += 1;
            }
            let row = mdp.row(action, state);
            let stat: f64 = counts
                .iter()
                .zip(row)
                .map(|(&o, &p)| {
                    let e = p * draws as f64;
                    (o as f64 - e).powi(2) / e
                })
                .sum();
            assert!(stat < CHI2_4_999, "row ({action}, {state}): χ² = {stat:.3}, counts {counts:?}");
        }
    }
}

#[test]
fn checked_sampling_agrees_with_the_raw_draw() {
    let mdp = five_state_example();
    let mut a = RngStream::new(3);
    let mut b = RngStream::new(3);
    for i in 0..1000 {
        let (s, act) = (i % 5, i % 2);
        let t = mdp.sample_next(s, act, &mut a).unwrap();
        assert_eq!(t.next_state, mdp.draw_next_state(s, act, &mut b));
        assert_eq!(t.reward, mdp.reward(s, act));
    }
    assert!(mdp.sample_next(5, 0, &mut a).is_err());
    assert!(mdp.sample_next(0, 2, &mut a).is_err());
}
