use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scarlab_core::eigen::{entanglement_entropy, entanglement_entropy_embedded, Bipartition};
use scarlab_core::evolve::{evolve, fidelity_series, EvolveOptions};
use scarlab_core::operators::build_hamiltonian;
use scarlab_core::{
    build_lattice, enumerate_basis, maximally_excited, Boundary, Complex, ConstrainedBasis, LatticeKind, LatticeSpec,
    Model, SiteGraph, State, Sublattice,
};

fn brute_force(graph: &SiteGraph) -> Vec<u64> {
    let n = graph.n_sites();
    (0u64..1 << n)
        .filter(|c| graph.edges().all(|(i, j)| (c >> i) & (c >> j) & 1 == 0))
        .collect()
}

fn random_state(dim: usize, seed: u64) -> State {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amps = (0..dim).map(|_| Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    let mut s = State::from_amplitudes(amps);
    s.normalize();
    s
}

fn random_model(graph: &SiteGraph, seed: u64, deform: bool) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let freq = (0..graph.n_sites()).map(|_| 0.5 + rng.random::<f64>()).collect();
    let mut m = Model { freq, deform: None };
    if deform {
        m = m.with_deformation(0.1 * rng.random::<f64>(), 0.1 * rng.random::<f64>());
    }
    m
}

fn square(lx: usize, ly: usize, boundary: Boundary) -> SiteGraph {
    build_lattice(LatticeSpec::new(LatticeKind::Square, lx, ly, boundary)).unwrap()
}

fn sorted(basis: &ConstrainedBasis) -> Vec<u64> {
    let mut v = basis.configs().to_vec();
    v.sort_unstable();
    v
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn basis_matches_brute_force(lx in 2usize..=4, ly in 2usize..=4, open in any::<bool>()) {
        let spec = LatticeSpec::new(LatticeKind::Square, lx, ly, if open { Boundary::Open } else { Boundary::Periodic });
        prop_assume!(spec.validate().is_ok());
        let graph = build_lattice(spec).unwrap();
        let basis = enumerate_basis(&graph).unwrap();
        prop_assert_eq!(sorted(&basis), brute_force(&graph));
        for k in 0..basis.dim() {
            prop_assert_eq!(basis.index_of(basis.config(k)), Some(k));
        }
    }

    #[test]
    fn hamiltonian_is_hermitian(seed in any::<u64>(), deform in any::<bool>(), open in any::<bool>()) {
        let graph = if open { square(3, 3, Boundary::Open) } else { square(4, 4, Boundary::Periodic) };
        let basis = enumerate_basis(&graph).unwrap();
        let h = build_hamiltonian(&graph, &basis, &random_model(&graph, seed, deform)).unwrap();
        prop_assert!(h.is_real());
        prop_assert!(h.hermiticity_defect() < 1e-14);
        prop_assert!(h.adjoint().max_abs_diff(&h) < 1e-14);
    }

    #[test]
    fn krylov_matches_dense(seed in any::<u64>(), t in 0.1f64..5.0) {
        let graph = square(3, 3, Boundary::Open);
        let basis = enumerate_basis(&graph).unwrap();
        let h = build_hamiltonian(&graph, &basis, &random_model(&graph, seed, true)).unwrap();
        let psi = random_state(basis.dim(), seed ^ 0x9e37);
        let times = [0.5 * t, t];
        let k = evolve(&h, &psi, &times, &EvolveOptions::krylov()).unwrap();
        let d = evolve(&h, &psi, &times, &EvolveOptions::dense()).unwrap();
        for (a, b) in k.iter().zip(&d) {
            let diff = a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            prop_assert!(diff < 1e-8, "{diff}");
            prop_assert!((a.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn entropy_matches_embedding(seed in any::<u64>(), cut_mask in 1u64..(1 << 9) - 1) {
        let graph = square(3, 3, Boundary::Open);
        let basis = enumerate_basis(&graph).unwrap();
        let psi = random_state(basis.dim(), seed);
        let left: Vec<usize> = (0..9).filter(|s| cut_mask >> s & 1 == 1).collect();
        let cut = Bipartition::new(9, &left).unwrap();
        let s = entanglement_entropy(&basis, &psi, &cut).unwrap();
        let e = entanglement_entropy_embedded(&basis, &psi, &cut).unwrap();
        prop_assert!((s - e).abs() < 1e-10, "{s} vs {e}");
        let r = entanglement_entropy(&basis, &psi, &cut.swapped()).unwrap();
        prop_assert!((s - r).abs() < 1e-10);
        prop_assert!(s >= -1e-12 && s <= (left.len().min(9 - left.len()) as f64) * 2f64.ln() + 1e-10);
    }
}

#[test]
fn other_lattices_match_brute_force() {
    for spec in [LatticeSpec::honeycomb(2), LatticeSpec::decorated(2), LatticeSpec::square(4, Boundary::Open)] {
        let graph = build_lattice(spec).unwrap();
        let basis = enumerate_basis(&graph).unwrap();
        assert_eq!(sorted(&basis), brute_force(&graph), "{spec:?}");
    }
    let ring = SiteGraph::ring(10).unwrap();
    // independent sets of a 10-cycle: Lucas number L_10
    assert_eq!(enumerate_basis(&ring).unwrap().dim(), 123);
}

#[test]
fn translations_commute_with_hamiltonian() {
    let graph = square(4, 4, Boundary::Periodic);
    let basis = enumerate_basis(&graph).unwrap();
    let h = build_hamiltonian(&graph, &basis, &Model::deformed(16, 0.0244, 0.0506)).unwrap();
    for (dx, dy) in [(1i64, 0i64), (0, 1), (1, 1)] {
        let site_map: Vec<usize> = (0..16)
            .map(|r| {
                let p = graph.position(r);
                graph.site_at(p.x as i64 + dx, p.y as i64 + dy, p.basis).unwrap()
            })
            .collect();
        let image = |c: u64| (0..16).filter(|&r| c >> r & 1 == 1).fold(0u64, |acc, r| acc | 1 << site_map[r]);
        let perm: Vec<usize> = basis
            .configs()
            .iter()
            .map(|&c| basis.index_of(scarlab_core::Configuration(image(c))).expect("translation preserves the constraint"))
            .collect();
        let mut defect: f64 = 0.0;
        for i in 0..basis.dim() {
            for (j, v) in h.row(i) {
                defect = defect.max((h.get(perm[i], perm[j]) - v).norm());
            }
        }
        assert!(defect < 1e-14, "shift ({dx},{dy}): {defect}");
    }
}

#[test]
fn single_precision_tracks_double() {
    let graph = square(3, 3, Boundary::Open);
    let basis = enumerate_basis(&graph).unwrap();
    let m64 = Model::deformed(9, 0.03, 0.05);
    let m32 = scarlab_core::operators::ModelSpec::<f32>::deformed(9, 0.03, 0.05);
    let h64 = build_hamiltonian(&graph, &basis, &m64).unwrap();
    let h32 = build_hamiltonian(&graph, &basis, &m32).unwrap();
    let c = maximally_excited(&graph, Sublattice::A);
    let p64 = State::from_config(&basis, c).unwrap();
    let p32 = scarlab_core::evolve::StateVector::<f32>::from_config(&basis, c).unwrap();
    for opts in [(EvolveOptions::krylov(), EvolveOptions::krylov()), (EvolveOptions::dense(), EvolveOptions::dense())] {
        let mut o32 = opts.1;
        o32.tol = 1e-5;
        let f64s = fidelity_series(&h64, &p64, 6.0, 0.05, &opts.0).unwrap();
        let f32s = fidelity_series(&h32, &p32, 6.0f32, 0.05, &o32).unwrap();
        let worst = f64s.values.iter().zip(&f32s.values).map(|(a, &b)| (a - b as f64).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-4, "{worst}");
    }
}
