use fk_core::measures::{evolve_ensemble, krylov_bogolyubov, z_functional, Ensemble, KbOptions, ZOptions};
use fk_core::par;
use fk_core::seed;
use fk_core::sliding::{attractor_residence, depinning_sweep, ClassifyOptions, ResidenceOptions, SweepOptions};
use fk_core::{ChainState, Dynamics, Forcing, Potential};
use rand::Rng;

fn ensemble(label: &str, members: usize) -> Ensemble {
    let mut rng = seed::stream(99, label);
    let states = (0..members)
        .map(|_| {
            let m = rng.gen_range(0..=1);
            seed::random_state(&mut rng, 12, m, 0.3)
        })
        .collect();
    Ensemble::uniform(states).unwrap()
}

/// Run `f` on the default backend and on the forced sequential path.
fn on_both<R, F: Fn() -> R>(f: F) -> (R, R) {
    let a = f();
    let b = {
        let _seq = par::sequential_scope();
        f()
    };
    (a, b)
}

#[test]
fn ensemble_kernels_match_bit_for_bit() {
    let d = Dynamics::new(Potential::standard(1.0), Forcing::ac_sine(0.05, 0.1));
    let (mu, nu) = (ensemble("a", 20), ensemble("b", 20));
    let (x, y) = on_both(|| evolve_ensemble(&mu, &d, 2.0, 1e-2).unwrap());
    assert_eq!(x, y);
    let opts = ZOptions { mc_threshold: 8, mc_pairs: 500, seed: 4 };
    let (x, y) = on_both(|| z_functional(&mu, &nu, &opts));
    assert_eq!(x, y);
    let (x, y) = on_both(|| krylov_bogolyubov(&mu, &d, 3, &KbOptions::default()).unwrap());
    assert_eq!(x, y);
}

#[test]
fn sweep_and_residence_match_bit_for_bit() {
    let pot = Potential::standard(1.0);
    let grid: Vec<f64> = (0..6).map(|i| 0.06 * i as f64).collect();
    let opts = SweepOptions {
        classify: ClassifyOptions { horizon: 50.0, max_horizon: 200.0, ..ClassifyOptions::default() },
        blocks: 3,
        orbit_nodes: 32,
    };
    let state = ChainState::linear(4, 0, 0.2);
    let (x, y) = on_both(|| depinning_sweep(&state, &pot, &grid, &opts).unwrap());
    assert_eq!(x, y);

    let d = Dynamics::new(pot, Forcing::dc(0.0));
    let mu = ensemble("r", 6);
    let refs = vec![ChainState::linear(12, 0, 0.0), ChainState::linear(12, 1, 0.0)];
    let ropts = ResidenceOptions { time_samples: 20, ..ResidenceOptions::default() };
    let (x, y) = on_both(|| attractor_residence(&mu, &refs, &d, 10.0, 0.05, &ropts).unwrap());
    assert_eq!(x.to_bits(), y.to_bits());
}
