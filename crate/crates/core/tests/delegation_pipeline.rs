use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rgc_core::circuit::{allocate_wires, LogicalGate};
use rgc_core::delegation::{blind_delegate, product_state, shor_delegate, shor_direct, shor_postprocess, KappaMode};
use rgc_core::oracle::RandomOracle;
use rgc_core::seed::SeedTree;
use rgc_core::sim::fidelity;

#[test]
fn shor_fifteen_and_twenty_one() {
    for (m, a) in [(15u64, 7u64), (21, 2)] {
        let o = RandomOracle::hash_derived(b"shor");
        let run = shor_delegate(&o, b"shor", m, a, 16, KappaMode::Margin, &SeedTree::new(m)).unwrap();
        let (_, direct) = shor_direct(m, a).unwrap();
        assert!((fidelity(&run.output, &direct).unwrap() - 1.0).abs() < 1e-9);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let found = (0..10).find_map(|_| shor_postprocess(&run.setup, &run.output, &mut rng).unwrap().factor);
        let f = found.expect("no factor in 10 attempts");
        assert!(f > 1 && f < m && m % f == 0);
        assert!(run.cost.encoding_cnots <= (run.cost.kappa_bits * run.cost.n_exp) as u64);
    }
}

#[test]
fn blind_single_phase() {
    let c = allocate_wires(3, &[LogicalGate::toffoli(0, 1, 2), LogicalGate::phase(2, 3)]).unwrap();
    let psi = product_state("++-").unwrap();
    let o = RandomOracle::hash_derived(b"blind");
    let run = blind_delegate(&o, b"blind", 16, &c, &psi, 4, 3, &SeedTree::new(3)).unwrap();
    let want = c.simulate(&psi).unwrap();
    assert!((fidelity(&run.output, &want).unwrap() - 1.0).abs() < 1e-9);
}
