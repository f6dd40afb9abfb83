//! Simulator and LP results checked against independent closed forms,
//! numerical quadrature and random sampling.

use csit_dof::{
    build_polytope, fit_slope, max_weighted, simulate, BoundOptions, CsitSchedule, CsitState,
    SimConfig, SnrGrid,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Exponential integral `E1(z)` by its power series, `0 < z <= 1`.
fn exp_integral_e1(z: f64) -> f64 {
    assert!(z > 0.0 && z <= 1.0);
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..60 {
        term *= -z / k as f64;
        sum -= term / k as f64;
    }
    -EULER_GAMMA - z.ln() + sum
}

/// `E[log2(1 + a g)]` for `g ~ Exp(1)`, via `e^{1/a} E1(1/a)`.
fn ergodic_exp(a: f64) -> f64 {
    (1.0 / a).exp() * exp_integral_e1(1.0 / a) / std::f64::consts::LN_2
}

/// `E[log2(1 + a g)]` for `g ~ Gamma(shape, 1)` by quadrature on `x = e^u`.
fn ergodic_gamma(a: f64, shape: u32) -> f64 {
    let gamma_fn: f64 = (1..shape).map(|i| i as f64).product();
    let (lo, hi, n) = (-40.0f64, 5.0f64, 200_000);
    let h = (hi - lo) / n as f64;
    let f = |u: f64| {
        let x = u.exp();
        (1.0 + a * x).log2() * x.powi(shape as i32) * (-x).exp() / gamma_fn
    };
    // Simpson
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(lo + i as f64 * h);
    }
    s * h / 3.0
}

fn config(m: usize, db: &[f64], trials: usize, seed: u64) -> SimConfig {
    SimConfig {
        antennas: m,
        grid: SnrGrid::from_db(db).unwrap(),
        trials,
        seed,
        lambda_cap: 1.0,
        parallel: true,
    }
}

#[test]
fn oracles_agree_with_each_other() {
    for a in [10.0, 500.0, 1e4] {
        let series = ergodic_exp(a);
        let quad = ergodic_gamma(a, 1);
        assert!((series - quad).abs() < 1e-6, "a={a}: {series} vs {quad}");
    }
}

#[test]
fn square_zero_forcing_matches_exponential_gain() {
    // M = K: each ZF beam lies in a one-dimensional null space, so the
    // effective gain is Exp(1) and each stream gets P/K.
    for (m, k) in [(2, 2), (3, 3)] {
        let s = CsitSchedule::uniform(k, 3000, CsitState::P).unwrap();
        let r = simulate(&s, &config(m, &[20.0, 30.0], 10, 41)).unwrap();
        for p in &r.per_snr {
            let oracle = k as f64 * ergodic_exp(p.power / k as f64);
            assert!(
                (p.sum - oracle).abs() < 0.1,
                "({m},{k}) at {} dB: sim {} oracle {oracle}",
                p.snr_db,
                p.sum
            );
        }
    }
}

#[test]
fn cyclic_window_matches_two_by_two_zero_forcing() {
    // Every slot zero-forces two users with two antennas.
    let s = CsitSchedule::cyclic_window(2, 3, 3000).unwrap();
    let r = simulate(&s, &config(2, &[30.0, 40.0], 10, 3)).unwrap();
    for p in &r.per_snr {
        let oracle = 2.0 * ergodic_exp(p.power / 2.0);
        assert!(
            (p.sum - oracle).abs() < 0.15,
            "sim {} oracle {oracle}",
            p.sum
        );
    }
}

#[test]
fn fallback_matches_single_antenna_rate() {
    let s = CsitSchedule::uniform(3, 3000, CsitState::N).unwrap();
    let r = simulate(&s, &config(2, &[10.0, 30.0], 10, 5)).unwrap();
    for p in &r.per_snr {
        let oracle = ergodic_exp(p.power);
        assert!(
            (p.sum - oracle).abs() < 0.05,
            "sim {} oracle {oracle}",
            p.sum
        );
    }
}

#[test]
fn wide_array_zero_forcing_matches_gamma_gain() {
    // M = 4, K = 2: each beam lies in a 3-dimensional null space.
    let s = CsitSchedule::uniform(2, 3000, CsitState::P).unwrap();
    let r = simulate(&s, &config(4, &[20.0, 30.0], 10, 6)).unwrap();
    for p in &r.per_snr {
        let oracle = 2.0 * ergodic_gamma(p.power / 2.0, 3);
        assert!(
            (p.sum - oracle).abs() < 0.1,
            "sim {} oracle {oracle}",
            p.sum
        );
    }
}

#[test]
fn matched_filter_window_matches_gamma_gain() {
    // width-1 window with M = 2: single stream beamformed along h, gain Gamma(2, 1)
    let s = CsitSchedule::window(3, 1, 3000).unwrap();
    let r = simulate(&s, &config(2, &[10.0, 20.0], 10, 12)).unwrap();
    for p in &r.per_snr {
        let oracle = ergodic_gamma(p.power, 2);
        assert!(
            (p.sum - oracle).abs() < 0.05,
            "sim {} oracle {oracle}",
            p.sum
        );
    }
}

#[test]
fn oracle_slope_on_high_snr_grid() {
    // two-stream ZF sum rate computed in closed form, fitted on the default grid
    let pts: Vec<(f64, f64)> = [30.0f64, 40.0, 50.0, 60.0]
        .iter()
        .map(|db| {
            let p = 10f64.powf(db / 10.0);
            (p.log2(), 2.0 * ergodic_exp(p / 2.0))
        })
        .collect();
    let (slope, _) = fit_slope(&pts).unwrap();
    assert!((slope - 2.0).abs() < 0.01, "oracle slope {slope}");
}

#[test]
fn lee_heath_pattern_without_delayed_gain() {
    // D slots fall back to one stream; P slots carry two.
    let s = CsitSchedule::lee_heath_block(3, 3000).unwrap();
    let r = simulate(&s, &config(2, &[30.0, 40.0, 50.0, 60.0], 10, 17)).unwrap();
    let expected = 1.0 / 3.0 + 2.0 * 2.0 / 3.0;
    assert!(
        (r.dof_slope - expected).abs() < 0.05,
        "slope {}",
        r.dof_slope
    );
}

#[test]
fn lp_optimum_dominates_random_feasible_points() {
    let mut rng = StdRng::seed_from_u64(123);
    let mut uniform = move || rng.random::<f64>();
    for (m, k, lambda) in [
        (2, 3, 0.4),
        (3, 3, 0.9),
        (4, 2, 0.1),
        (1, 4, 0.5),
        (3, 4, 0.75),
    ] {
        for boxed in [true, false] {
            let poly = build_polytope(
                m,
                k,
                lambda,
                BoundOptions {
                    tightened: false,
                    boxed,
                },
            )
            .unwrap();
            let weights: Vec<f64> = (0..k).map(|_| uniform()).collect();
            let r = max_weighted(&poly, &weights).unwrap();
            assert!(poly.contains(&r.argmax_point, 1e-9));
            let value: f64 = weights
                .iter()
                .zip(&r.argmax_point)
                .map(|(w, d)| w * d)
                .sum();
            assert!((value - r.raw_max_sum).abs() < 1e-12);
            // every d_k is at most rhs / leading coefficient
            let reach = poly.inequalities[0].b / poly.inequalities[0].a[0];
            let mut feasible = 0;
            for _ in 0..20_000 {
                let d: Vec<f64> = (0..k).map(|_| uniform() * reach).collect();
                if poly.contains(&d, 0.0) {
                    feasible += 1;
                    let v: f64 = weights.iter().zip(&d).map(|(w, x)| w * x).sum();
                    assert!(v <= r.raw_max_sum + 1e-9, "random point beats LP optimum");
                }
            }
            assert!(feasible > 100, "too few feasible samples ({feasible})");
        }
    }
}
