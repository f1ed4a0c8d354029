//! Reproducibility beyond the acceptance checks: run-level replay equality
//! and the shared exploration prefix between strategies.

use arsim::sim::{run_experiment, Strategy, WorldConfig};

fn small_cfg(strategy: Strategy) -> WorldConfig {
    WorldConfig {
        n_robots: 4,
        n_iterations: 10,
        bounds: (25.0, 25.0),
        strategy,
        seed: 21,
        ..WorldConfig::default()
    }
}

#[test]
fn replaying_a_run_reproduces_it_exactly() {
    let a = run_experiment(small_cfg(Strategy::Active)).unwrap();
    let b = run_experiment(small_cfg(Strategy::Active)).unwrap();
    let ser = |r: &arsim::sim::RunResult| {
        (
            serde_json::to_string(&r.summary).unwrap(),
            serde_json::to_string(&r.ticks).unwrap(),
            serde_json::to_string(&r.events).unwrap(),
        )
    };
    assert_eq!(ser(&a), ser(&b));
    // Bit-exact node estimates too.
    for ((ia, pa), (ib, pb)) in a.graph.nodes().zip(b.graph.nodes()) {
        assert_eq!(ia, ib);
        assert_eq!(pa.position, pb.position);
        assert_eq!(pa.rotation.matrix(), pb.rotation.matrix());
    }
}

#[test]
fn strategies_share_the_exploration_prefix() {
    // Identical seeds walk identical exploration paths until the first
    // strategy-dependent branch (the first rendezvous or joint optimization).
    // Pick a seed whose first event is not immediate so there is a prefix.
    for seed in [21u64, 5, 9, 33, 57] {
        let mut cfg = small_cfg(Strategy::Active);
        cfg.seed = seed;
        let active = run_experiment(cfg).unwrap();
        let mut cfg = small_cfg(Strategy::Random);
        cfg.seed = seed;
        let random = run_experiment(cfg).unwrap();
        let first_event = active
            .events
            .iter()
            .map(|e| e.tick)
            .chain(random.events.iter().map(|e| e.tick))
            .min()
            .unwrap_or(u32::MAX);
        if first_event < 3 {
            continue;
        }
        let mut compared = 0;
        for (ra, rb) in active.ticks.iter().zip(&random.ticks) {
            if ra.tick >= first_event {
                break;
            }
            assert_eq!(ra.robot, rb.robot);
            assert_eq!(
                (ra.x, ra.y),
                (rb.x, rb.y),
                "true paths diverged before any event"
            );
            assert_eq!((ra.est_x, ra.est_y), (rb.est_x, rb.est_y));
            compared += 1;
        }
        assert!(compared > 0);
        return;
    }
    panic!("every candidate seed had an event before tick 3");
}

#[test]
fn different_seeds_differ() {
    let a = run_experiment(small_cfg(Strategy::Active)).unwrap();
    let mut cfg = small_cfg(Strategy::Active);
    cfg.seed = 22;
    let b = run_experiment(cfg).unwrap();
    assert_ne!(
        serde_json::to_string(&a.ticks).unwrap(),
        serde_json::to_string(&b.ticks).unwrap()
    );
}
