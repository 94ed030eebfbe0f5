//! Acceptance suite: one PASS/FAIL line per criterion with the measured values.
//!
//! Criteria can be selected by number (`cargo test --test acceptance -- 2 6`).
//! Known blockers are reported as FAIL but do not fail the target; see the
//! decisions ledger for the analysis of each.

use std::f64::consts::FRAC_PI_2;
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scarlab_core::eigen::{entanglement_entropy, entanglement_entropy_embedded, Bipartition};
use scarlab_core::evolve::{evolve, fidelity_series, observable_series, time_grid, EvolveOptions};
use scarlab_core::fsa::{
    build_fsa_for, build_fsa_symmetric, casimir_dynamics, frequency_criteria, model_leakage, spin_operators,
    subspace_variance, variance_scan_1d, variance_scan_2d,
};
use scarlab_core::operators::{build_casimir, build_domain_wall, build_hamiltonian, split_pm};
use scarlab_core::optimize::{
    detect_first_revival, optimize_boundary, optimize_deformation, optimize_frequency, NelderMeadOptions,
    RevivalProblem,
};
use scarlab_core::tdvp::{find_omega_c, tts_state, TtsAmplitudes};
use scarlab_core::{
    build_lattice, enumerate_basis, maximally_excited, Boundary, Complex, ConstrainedBasis, LatticeKind, LatticeSpec,
    Model, Result, SiteGraph, State, Sublattice,
};

const KNOWN_BLOCKERS: &[usize] = &[1, 4];
const DT: f64 = 0.01;
const T_SEARCH: f64 = 12.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target.abs()
}

fn setup(spec: LatticeSpec) -> (SiteGraph, ConstrainedBasis) {
    let g = build_lattice(spec).expect("lattice");
    let b = enumerate_basis(&g).expect("basis");
    (g, b)
}

fn square4() -> &'static (SiteGraph, ConstrainedBasis) {
    static S: OnceLock<(SiteGraph, ConstrainedBasis)> = OnceLock::new();
    S.get_or_init(|| setup(LatticeSpec::square(4, Boundary::Periodic)))
}

/// Nelder-Mead deformation optimum on the 4x4 torus: `(a, b, F_T, reference F_T, evals)`.
fn square_optimum() -> Result<(f64, f64, f64, f64, usize)> {
    static S: OnceLock<(f64, f64, f64, f64, usize)> = OnceLock::new();
    if let Some(r) = S.get() {
        return Ok(*r);
    }
    let (g, b) = square4();
    let problem = RevivalProblem::new(g, b, &Model::uniform(16), T_SEARCH, DT, EvolveOptions::default())?;
    let r = optimize_deformation(&problem, &Model::uniform(16), &NelderMeadOptions::default())?;
    let out = (r.params[0], r.params[1], r.objective, problem.reference.fidelity, r.evals);
    Ok(*S.get_or_init(|| out))
}

fn criterion_1() -> Result<Outcome> {
    let (_, b) = square4();
    let (_, open) = setup(LatticeSpec::square(4, Boundary::Open));
    outcome(
        b.dim() == 1234,
        format!("4x4 periodic dim = {} (target 1234); 4x4 open dim = {}", b.dim(), open.dim()),
    )
}

fn criterion_2() -> Result<Outcome> {
    let (a, b, f, f0, evals) = square_optimum()?;
    let pass = within(a, 0.0244, 0.2) && within(b, 0.0506, 0.2) && f - f0 >= 0.1;
    outcome(pass, format!("(a, b) = ({a:.5}, {b:.5}), F_T = {f:.5} vs undeformed {f0:.5}, {evals} evaluations"))
}

fn criterion_3() -> Result<Outcome> {
    let (g, basis) = square4();
    let xs: Vec<f64> = (0..26).map(|k| 0.002 * k as f64).collect();
    let ys: Vec<f64> = (0..29).map(|k| 0.02 + 0.0025 * k as f64).collect();
    let leak = |a: f64, b: f64| model_leakage(g, basis, &Model::deformed(16, a, b));
    let scan = variance_scan_2d(&xs, &ys, leak)?;
    let (sa, sb) = scan.argmin;
    let (oa, ob, ..) = square_optimum()?;
    let at_opt = leak(oa, ob)?;
    let pass = within(sa, 0.0217, 0.2) && within(sb, 0.0556, 0.2) && at_opt <= 2.0 * scan.min;
    outcome(
        pass,
        format!(
            "leakage argmin ({sa:.5}, {sb:.5}), min {:.4}; at fidelity optimum ({oa:.5}, {ob:.5}) leakage {at_opt:.4} ({:.2}x)",
            scan.min,
            at_opt / scan.min
        ),
    )
}

fn criterion_4() -> Result<Outcome> {
    let (g, b) = setup(LatticeSpec::honeycomb(3));
    let problem = RevivalProblem::new(&g, &b, &Model::uniform(18), T_SEARCH, DT, EvolveOptions::default())?;
    let r = optimize_deformation(&problem, &Model::uniform(18), &NelderMeadOptions::default())?;
    let (a, bb) = (r.params[0], r.params[1]);
    let rev = problem.evaluate(&Model::deformed(18, a, bb))?;
    let ld = rev.log_infidelity_density(18);
    let pass = within(a, 0.03038, 0.1) && within(bb, 0.06345, 0.1) && ld <= 1e-4;
    outcome(
        pass,
        format!(
            "(a, b) = ({a:.5}, {bb:.5}) [{:+.1}%, {:+.1}%], -ln(F_T)/N = {ld:.3e}, F_T = {:.5}, {} evaluations",
            100.0 * (a / 0.03038 - 1.0),
            100.0 * (bb / 0.06345 - 1.0),
            rev.fidelity,
            r.evals
        ),
    )
}

fn criterion_5() -> Result<Outcome> {
    let (g, b) = setup(LatticeSpec::honeycomb(4));
    let h = build_hamiltonian(&g, &b, &Model::deformed(32, 0.03037, 0.06203))?;
    let psi = State::from_config(&b, maximally_excited(&g, Sublattice::A))?;
    let series = fidelity_series(&h, &psi, 6.0, 0.02, &EvolveOptions::krylov())?;
    let rev = detect_first_revival(&series)?;
    let ld = rev.log_infidelity_density(32);
    outcome(ld <= 1e-4, format!("dim {}, T = {:.4}, F_T = {:.5}, -ln(F_T)/N = {ld:.3e}", b.dim(), rev.period, rev.fidelity))
}

fn criterion_6() -> Result<Outcome> {
    let mut ws = Vec::new();
    for eps in [1e-4, 4e-4, 1e-3] {
        ws.push(find_omega_c(2, 3, eps, (0.7, 1.0), 1e-4)?.omega);
    }
    let spread = ws.iter().cloned().fold(f64::MIN, f64::max) - ws.iter().cloned().fold(f64::MAX, f64::min);
    let pass = ws.iter().all(|w| (w - 0.841).abs() <= 0.005) && spread < 5e-4;
    outcome(pass, format!("omega_c = {:.5} / {:.5} / {:.5} at eps 1e-4 / 4e-4 / 1e-3, spread {spread:.1e}", ws[0], ws[1], ws[2]))
}

fn criterion_7() -> Result<Outcome> {
    let (g, b) = setup(LatticeSpec::decorated(2));
    let n = g.n_sites() as f64;
    let (ws, _) = frequency_criteria(&g)?;
    let mut worst: f64 = 0.0;
    for omega in [0.7, 0.84, ws, 1.0] {
        let m = Model::two_frequency(&g, omega, 1.0);
        let (hp, hm) = split_pm(&g, &b, &m)?;
        let fsa = build_fsa_for(&g, &b, &hp, &hm)?;
        let ratio = fsa.prenorms_a()[1] / fsa.prenorms_b()[1];
        worst = worst.max((ratio - omega * (3.0 * n / 5.0).sqrt() / (2.0 * n / 5.0).sqrt()).abs());
    }
    let ws_err = (ws - (2.0f64 / 3.0).sqrt()).abs();
    outcome(
        worst <= 1e-10 && ws_err <= 2.0 * f64::EPSILON,
        format!("N = {n}: max prenorm ratio error {worst:.1e}; omega_s = {ws:.17} (error {ws_err:.1e})"),
    )
}

fn criterion_8() -> Result<Outcome> {
    let (g, b) = setup(LatticeSpec::decorated(2));
    let points: Vec<f64> = (0..31).map(|k| 0.7 + 0.01 * k as f64).collect();
    let scan = variance_scan_1d(&points, |w| model_leakage(&g, &b, &Model::two_frequency(&g, w, 1.0)))?;
    let problem =
        RevivalProblem::new(&g, &b, &Model::two_frequency(&g, 1.0, 1.0), 20.0, DT, EvolveOptions::default())?;
    let opt = optimize_frequency(&problem, &[], &NelderMeadOptions::default())?;
    let w = opt.result.params[0];
    let pass = (scan.argmin - 0.84).abs() <= 0.02 && (w - 0.80).abs() <= 0.03;
    outcome(
        pass,
        format!(
            "leakage argmin omega = {:.4}; fidelity optimum omega = {w:.4} (F_T {:.4} vs {:.4} at omega = 1)",
            scan.argmin, opt.result.objective, problem.reference.fidelity
        ),
    )
}

fn criterion_9() -> Result<Outcome> {
    let (g, b) = setup(LatticeSpec::square(4, Boundary::Open));
    let problem = RevivalProblem::new(&g, &b, &Model::uniform(16), T_SEARCH, DT, EvolveOptions::default())?;
    let r = optimize_boundary(&problem, false, &NelderMeadOptions::default())?;
    let (gc, ge) = (r.params[0], r.params[1]);
    let psi = State::from_config(&b, maximally_excited(&g, Sublattice::A))?;
    let dw = build_domain_wall(&g, &b);
    let amplitude = |m: &Model| -> Result<f64> {
        let h = build_hamiltonian(&g, &b, m)?;
        Ok(observable_series(&h, &psi, &dw, 20.0, 0.02, &EvolveOptions::default())?.peak_to_peak(10.0, 20.0))
    };
    let plain = amplitude(&Model::uniform(16))?;
    let corrected = amplitude(&Model::boundary_corrected(&g, gc, ge))?;
    let pass = (gc - 0.12).abs() <= 0.03 && ge.abs() <= 0.01 && corrected > plain;
    outcome(
        pass,
        format!(
            "g_C = {gc:.5}, g_E = {ge:.5}, F_T = {:.4} vs {:.4}; domain-wall peak-to-peak on [10, 20]: {corrected:.4} vs {plain:.4}",
            r.objective, problem.reference.fidelity
        ),
    )
}

fn criterion_10() -> Result<Outcome> {
    let n = 16;
    let s = spin_operators::<f64>(n);
    let top = State::basis_state(n + 1, 0);
    let fsa = build_fsa_symmetric(&s.hp, &s.hm, &top, &State::basis_state(n + 1, n), n)?;
    let (spin_leak, _) = subspace_variance(&s.h, &fsa)?;
    let (_, c) = build_casimir(&s.hp, &s.hm, n, std::f64::consts::TAU)?;
    let times = time_grid(20.0, 0.1)?;
    let spin_c = casimir_dynamics(&s.h, &c, &top, &times, &EvolveOptions::default())?;
    let spin_dev = spin_c.values.iter().fold(0.0f64, |m, v| m.max((v - 1.0).abs()));

    let (g, b) = square4();
    let psi = State::from_config(b, maximally_excited(g, Sublattice::A))?;
    let deviation = |m: &Model| -> Result<(f64, f64)> {
        let h = build_hamiltonian(g, b, m)?;
        let (hp, hm) = split_pm(g, b, m)?;
        let period = detect_first_revival(&fidelity_series(&h, &psi, T_SEARCH, DT, &EvolveOptions::default())?)?.period;
        let (_, cas) = build_casimir(&hp, &hm, n, period)?;
        let times = time_grid(3.0 * period, 0.02)?;
        let cs = casimir_dynamics(&h, &cas, &psi, &times, &EvolveOptions::default())?;
        Ok((cs.max_deviation_from_start(0.0, 3.0 * period), period))
    };
    let (plain, tp) = deviation(&Model::uniform(16))?;
    let (deformed, td) = deviation(&Model::deformed(16, 0.0244, 0.0506))?;
    let pass = spin_leak.abs() <= 1e-10 && spin_dev <= 1e-10 && deformed < plain;
    outcome(
        pass,
        format!(
            "spin-8: leakage {spin_leak:.1e}, max|C-1| {spin_dev:.1e}; 4x4 max|C(t)-C(0)| over 3T: deformed {deformed:.4} (T {td:.3}) vs undeformed {plain:.4} (T {tp:.3})"
        ),
    )
}

fn brute_force(graph: &SiteGraph) -> Vec<u64> {
    (0u64..1 << graph.n_sites()).filter(|c| graph.edges().all(|(i, j)| (c >> i) & (c >> j) & 1 == 0)).collect()
}

fn random_state(dim: usize, rng: &mut ChaCha8Rng) -> State {
    let amps = (0..dim).map(|_| Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    let mut s = State::from_amplitudes(amps);
    s.normalize();
    s
}

fn criterion_11() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    let mut specs = vec![LatticeSpec::honeycomb(2), LatticeSpec::honeycomb(3), LatticeSpec::decorated(2)];
    for lx in 2..=5 {
        for ly in 2..=4 {
            for boundary in [Boundary::Open, Boundary::Periodic] {
                specs.push(LatticeSpec::new(LatticeKind::Square, lx, ly, boundary));
            }
        }
    }
    let mut graphs = 0;
    let mut basis_ok = true;
    for spec in specs.into_iter().filter(|s| s.validate().is_ok() && s.n_sites() <= 20) {
        let (g, b) = setup(spec);
        let mut got = b.configs().to_vec();
        got.sort_unstable();
        basis_ok &= got == brute_force(&g);
        graphs += 1;
    }

    let (g, b) = square4();
    let mut krylov_err: f64 = 0.0;
    for _ in 0..4 {
        let m = Model::deformed(16, 0.05 * rng.random::<f64>(), 0.1 * rng.random::<f64>());
        let h = build_hamiltonian(g, b, &m)?;
        let psi = random_state(b.dim(), &mut rng);
        let times = [0.7, 3.1, 6.0];
        let k = evolve(&h, &psi, &times, &EvolveOptions::krylov())?;
        let d = evolve(&h, &psi, &times, &EvolveOptions::dense())?;
        for (x, y) in k.iter().zip(&d) {
            for (p, q) in x.amplitudes().iter().zip(y.amplitudes()) {
                krylov_err = krylov_err.max((p - q).norm());
            }
        }
    }

    let (og, ob) = setup(LatticeSpec::square(4, Boundary::Open));
    let mut entropy_err: f64 = 0.0;
    for cut in [Bipartition::half_x(&og), Bipartition::new(16, &[0, 5, 10, 15, 3])?] {
        for _ in 0..3 {
            let psi = random_state(ob.dim(), &mut rng);
            let s = entanglement_entropy(&ob, &psi, &cut)?;
            let e = entanglement_entropy_embedded(&ob, &psi, &cut)?;
            entropy_err = entropy_err.max((s - e).abs());
        }
    }

    let (dg, db) = setup(LatticeSpec::decorated(2));
    let delta = 1e-6;
    let ma = State::from_config(&db, maximally_excited(&dg, Sublattice::A))?;
    let mb = State::from_config(&db, maximally_excited(&dg, Sublattice::B))?;
    let fa = tts_state(&TtsAmplitudes::new(FRAC_PI_2 - delta, 0.0), &dg, &db)?.fidelity(&ma);
    let fb = tts_state(&TtsAmplitudes::new(0.0, FRAC_PI_2 - delta), &dg, &db)?.fidelity(&mb);
    let tts_err = (1.0 - fa).abs().max((1.0 - fb).abs());

    let pass = basis_ok && krylov_err <= 1e-8 && entropy_err <= 1e-10 && tts_err <= 1e-14;
    outcome(
        pass,
        format!(
            "basis = brute force on {graphs} graphs: {basis_ok}; Krylov vs dense {krylov_err:.1e} (dim {}); entropy vs embedding {entropy_err:.1e}; TTS pole fidelity error {tts_err:.1e}",
            b.dim()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(usize, fn() -> Result<Outcome>); 11] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut unexpected = Vec::new();
    for (n, run) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match run() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let secs = start.elapsed().as_secs_f64();
        let tag = match (pass, KNOWN_BLOCKERS.contains(&n)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known blocker)",
            (false, false) => {
                unexpected.push(n);
                "FAIL"
            }
        };
        println!("criterion {n}: {tag} [{secs:.1} s] {detail}");
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
