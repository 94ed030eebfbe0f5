//! Experiment runners. Each writes its artifacts through a [`Sink`] and returns a JSON report.

use serde_json::{json, Map, Value};

use scarlab_core::basis::enumerate_basis_capped;
use scarlab_core::eigen::{eigenstate_entropies, full_diagonalize_capped, overlap_profile, scar_band, Bipartition};
use scarlab_core::evolve::{fidelity_series, observables_series, time_grid, StateVector};
use scarlab_core::fsa::{
    build_fsa_for, casimir_dynamics, model_leakage, projected_spectrum, subspace_variance, variance_scan_1d,
    variance_scan_2d,
};
use scarlab_core::operators::{build_casimir, build_domain_wall, build_hamiltonian, split_pm};
use scarlab_core::optimize::{
    detect_first_revival, optimize_boundary, optimize_deformation, optimize_frequency, NelderMeadOptions,
    RevivalProblem,
};
use scarlab_core::tdvp::{
    find_omega_c, integrate, near_m_a, sublattice_observables, tdvp_observables, IntegrateOptions, DEFAULT_DELTA,
};
use scarlab_core::{
    build_lattice, maximally_excited, ConstrainedBasis, Model, Operator, SiteGraph, State, Sublattice, Tdvp,
};

use crate::config::{
    EvolveExp, Experiment, FsaExp, Initial, ModelConfig, Observable, OptimizeExp, Quantity, RunConfig, ScanExp,
    SpectrumExp, Target, TdvpExp, Variant,
};
use crate::output::{num, Sink};
use crate::CliError;

/// Default basis cap when neither the config nor the command line sets one.
pub const DEFAULT_DIM_CAP: usize = 5_000_000;

pub struct Context {
    pub cfg: RunConfig,
    pub graph: SiteGraph,
    basis: Option<ConstrainedBasis>,
}

impl Context {
    pub fn new(cfg: RunConfig) -> Result<Self, CliError> {
        let graph = build_lattice(cfg.lattice)?;
        Ok(Self { cfg, graph, basis: None })
    }

    fn basis(&mut self) -> Result<&ConstrainedBasis, CliError> {
        if self.basis.is_none() {
            let cap = self.cfg.numeric.dim_cap.unwrap_or(DEFAULT_DIM_CAP);
            self.basis = Some(enumerate_basis_capped(&self.graph, cap)?);
        }
        Ok(self.basis.as_ref().expect("basis set"))
    }

    fn variants(&self, list: &[Variant]) -> Vec<(String, ModelConfig)> {
        if list.is_empty() {
            vec![("model".into(), self.cfg.model.clone())]
        } else {
            list.iter().map(|v| (v.label.clone(), v.model.clone())).collect()
        }
    }
}

pub fn run(ctx: &mut Context, sink: &mut Sink) -> Result<Value, CliError> {
    match ctx.cfg.experiment.clone() {
        Experiment::Evolve(e) => run_evolve(ctx, sink, &e),
        Experiment::Spectrum(e) => run_spectrum(ctx, sink, &e),
        Experiment::Fsa(e) => run_fsa(ctx, sink, &e),
        Experiment::Tdvp(e) => run_tdvp(ctx, sink, &e),
        Experiment::Optimize(e) => run_optimize(ctx, sink, &e),
        Experiment::Scan(e) => run_scan(ctx, sink, &e),
    }
}

fn initial_state(graph: &SiteGraph, basis: &ConstrainedBasis, init: Initial) -> Result<State, CliError> {
    let sub = match init {
        Initial::Ma => Sublattice::A,
        Initial::Mb => Sublattice::B,
    };
    Ok(StateVector::from_config(basis, maximally_excited(graph, sub))?)
}

fn columns(times: &[f64], cols: &[Vec<f64>]) -> Vec<Vec<String>> {
    (0..times.len()).map(|k| std::iter::once(num(times[k])).chain(cols.iter().map(|c| num(c[k]))).collect()).collect()
}

fn run_evolve(ctx: &mut Context, sink: &mut Sink, e: &EvolveExp) -> Result<Value, CliError> {
    let variants = ctx.variants(&e.variants);
    let numeric = ctx.cfg.numeric.clone();
    let opts = numeric.evolve_options();
    ctx.basis()?;
    let (graph, basis) = (&ctx.graph, ctx.basis.as_ref().expect("basis set"));
    let n = graph.n_sites();
    let psi0 = initial_state(graph, basis, e.initial)?;
    let times = time_grid(numeric.t_max, numeric.dt)?;
    let mut ops: Vec<(Observable, Operator)> = Vec::new();
    for &o in &e.observables {
        match o {
            Observable::Fidelity => {}
            Observable::DomainWall => ops.push((o, build_domain_wall(graph, basis))),
            _ => {
                let [da, db, ya, yb] = sublattice_observables(graph, basis)?;
                let op = match o {
                    Observable::DensityA => da,
                    Observable::DensityB => db,
                    Observable::SigmaYA => ya,
                    _ => yb,
                };
                ops.push((o, op));
            }
        }
    }
    let mut header = vec!["t".to_string()];
    let mut cols = Vec::new();
    let mut report = Map::new();
    for (label, mc) in &variants {
        let h = build_hamiltonian(graph, basis, &mc.build(graph))?;
        let mut entry = Map::new();
        for &o in &e.observables {
            header.push(format!("{label}:{}", o.name()));
            if o == Observable::Fidelity {
                let f = fidelity_series(&h, &psi0, numeric.t_max, numeric.dt, &opts)?;
                match detect_first_revival(&f) {
                    Ok(r) => {
                        entry.insert(
                            "revival".into(),
                            json!({ "T": r.period, "F_T": r.fidelity, "log_infidelity_density": r.log_infidelity_density(n) }),
                        );
                    }
                    Err(err) => {
                        entry.insert("revival".into(), json!({ "error": err.to_string() }));
                    }
                }
                cols.push(f.values);
            } else {
                cols.push(Vec::new());
            }
        }
        let refs: Vec<&Operator> = ops.iter().map(|(_, op)| op).collect();
        if !refs.is_empty() {
            let series = observables_series(&h, &psi0, &refs, &times, &opts)?;
            let base = cols.len() - e.observables.len();
            let mut it = series.into_iter();
            for (k, &o) in e.observables.iter().enumerate() {
                if o == Observable::Fidelity {
                    continue;
                }
                let s = it.next().expect("one series per observable");
                let half = numeric.t_max / 2.0;
                entry.insert(
                    format!("{}_peak_to_peak_second_half", o.name()),
                    json!(s.peak_to_peak(half, numeric.t_max)),
                );
                cols[base + k] = s.values;
            }
        }
        report.insert(label.clone(), Value::Object(entry));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    sink.csv("evolve.csv", &header, &columns(&times, &cols))?;
    let report = json!({ "n_sites": n, "dim": basis.dim(), "variants": report });
    sink.json("evolve.json", &report)?;
    Ok(report)
}

fn run_spectrum(ctx: &mut Context, sink: &mut Sink, e: &SpectrumExp) -> Result<Value, CliError> {
    let dense_cap = ctx.cfg.numeric.dense_cap;
    let model = ctx.cfg.model.build(&ctx.graph);
    ctx.basis()?;
    let (graph, basis) = (&ctx.graph, ctx.basis.as_ref().expect("basis set"));
    let h = build_hamiltonian(graph, basis, &model)?;
    let spec = full_diagonalize_capped(&h, dense_cap)?;
    let psi = initial_state(graph, basis, Initial::Ma)?;
    let overlaps = overlap_profile(&spec, &psi)?;
    let entropies = if e.entropy {
        Some(eigenstate_entropies(basis, &spec, &Bipartition::half_x(graph))?)
    } else {
        None
    };
    let band = scar_band(&spec.energies, &overlaps, e.windows, e.floor)?;
    let rows: Vec<Vec<String>> = (0..spec.dim())
        .map(|k| {
            vec![
                k.to_string(),
                num(spec.energies[k]),
                num(overlaps[k]),
                entropies.as_ref().map_or(String::new(), |s| num(s[k])),
                (band.contains(&k) as u8).to_string(),
            ]
        })
        .collect();
    sink.csv("spectrum.csv", &["index", "energy", "overlap_ma", "entropy", "scar"], &rows)?;
    let band_entropy = entropies.as_ref().map(|s| band.iter().map(|&k| s[k]).sum::<f64>() / band.len().max(1) as f64);
    let report = json!({
        "dim": spec.dim(),
        "band": band,
        "band_energies": band.iter().map(|&k| spec.energies[k]).collect::<Vec<_>>(),
        "band_mean_entropy": band_entropy,
        "mean_entropy": entropies.as_ref().map(|s| s.iter().sum::<f64>() / s.len() as f64),
    });
    sink.json("spectrum.json", &report)?;
    Ok(report)
}

fn run_fsa(ctx: &mut Context, sink: &mut Sink, e: &FsaExp) -> Result<Value, CliError> {
    let variants = ctx.variants(&e.variants);
    let numeric = ctx.cfg.numeric.clone();
    let opts = numeric.evolve_options();
    ctx.basis()?;
    let (graph, basis) = (&ctx.graph, ctx.basis.as_ref().expect("basis set"));
    let n = graph.n_sites();
    let psi = initial_state(graph, basis, Initial::Ma)?;
    let mut report = Map::new();
    let mut mode_rows = Vec::new();
    for (label, mc) in &variants {
        let model = mc.build(graph);
        let h = build_hamiltonian(graph, basis, &model)?;
        let (hp, hm) = split_pm(graph, basis, &model)?;
        let fsa = build_fsa_for(graph, basis, &hp, &hm)?;
        let spectrum = if e.overlaps { Some(full_diagonalize_capped(&h, numeric.dense_cap)?) } else { None };
        let d = projected_spectrum(&h, &fsa, spectrum.as_ref())?;
        for (k, en) in d.mode_energies.iter().enumerate() {
            let ov = d.eigenmode_overlaps.as_ref().map_or(String::new(), |o| num(o[k]));
            mode_rows.push(vec![label.clone(), k.to_string(), num(*en), ov]);
        }
        let mut entry = json!({
            "fsa_dim": fsa.len(),
            "leakage": d.variance,
            "literal_variance": d.literal,
            "step_norms_a": fsa.step_norms_a(),
            "step_norms_b": fsa.step_norms_b(),
            "mode_energies": d.mode_energies,
            "eigenmode_overlaps": d.eigenmode_overlaps,
        });
        if let Some(c) = &e.casimir {
            let problem = RevivalProblem::new(graph, basis, &model, c.t_search, numeric.dt, opts)?;
            let period = problem.reference.period;
            let t_end = c.periods * period;
            let times = time_grid(t_end, numeric.dt)?;
            let (_, cas) = build_casimir(&hp, &hm, n, period)?;
            let cs = casimir_dynamics(&h, &cas, &psi, &times, &opts)?;
            let fid = fidelity_series(&h, &psi, t_end, numeric.dt, &opts)?;
            let reference: Vec<f64> =
                times.iter().map(|&t| (std::f64::consts::PI * t / period).cos().powi(2 * n as i32)).collect();
            sink.csv(
                &format!("casimir_{label}.csv"),
                &["t", "fidelity", "su2_reference", "casimir"],
                &columns(&times, &[fid.values, reference, cs.values.clone()]),
            )?;
            entry["casimir"] = json!({
                "T": period,
                "F_T": problem.reference.fidelity,
                "C0": cs.values[0],
                "max_deviation": cs.max_deviation_from_start(0.0, t_end),
            });
        }
        report.insert(label.clone(), entry);
    }
    sink.csv("fsa_modes.csv", &["variant", "mode", "energy", "max_overlap"], &mode_rows)?;
    let report = json!({ "n_sites": n, "dim": basis.dim(), "variants": report });
    sink.json("fsa.json", &report)?;
    Ok(report)
}

fn run_tdvp(ctx: &mut Context, sink: &mut Sink, e: &TdvpExp) -> Result<Value, CliError> {
    let numeric = ctx.cfg.numeric.clone();
    let c_a = match e.c_a {
        Some(c) => c,
        None => ctx.graph.uniform_connectivity(Sublattice::A)? as u32,
    };
    let c_b = match e.c_b {
        Some(c) => c,
        None => ctx.graph.uniform_connectivity(Sublattice::B)? as u32,
    };
    let base = Tdvp::new(c_a, c_b, 1.0, e.epsilon)?;
    let times = time_grid(numeric.t_max, numeric.dt)?;
    let iopts = IntegrateOptions::default();
    let mut report = Map::new();
    report.insert("c_a".into(), json!(c_a));
    report.insert("c_b".into(), json!(c_b));
    report.insert("epsilon".into(), json!(e.epsilon));
    if e.find_omega_c {
        let w = find_omega_c(c_a, c_b, e.epsilon, (e.bracket[0], e.bracket[1]), e.tol)?;
        report.insert("omega_c".into(), json!({ "omega": w.omega, "miss": w.miss, "bisections": w.bisections }));
    }
    let mut orbits = Vec::new();
    for &omega in &e.omegas {
        let p = base.with_omega(omega);
        let traj = integrate(&p, near_m_a(DEFAULT_DELTA), numeric.t_max, &iopts)?;
        let angles = traj.resample(&times)?;
        let (ta, tb): (Vec<f64>, Vec<f64>) = angles.into_iter().unzip();
        sink.csv(&format!("tdvp_omega_{omega:.4}.csv"), &["t", "theta_a", "theta_b"], &columns(&times, &[ta, tb]))?;
        let events: Vec<Value> = traj
            .events
            .iter()
            .map(|ev| json!({ "kind": format!("{:?}", ev.kind), "time": ev.time, "distance": ev.distance }))
            .collect();
        let mut entry = json!({ "omega": omega, "events": events });
        if e.compare_exact {
            ctx.basis()?;
            let (graph, basis) = (&ctx.graph, ctx.basis.as_ref().expect("basis set"));
            let model = ctx.cfg.model.with(crate::config::Param::OmegaA, omega).build(graph);
            let h = build_hamiltonian(graph, basis, &model)?;
            let psi = initial_state(graph, basis, Initial::Ma)?;
            let ops = sublattice_observables(graph, basis)?;
            let refs: Vec<&Operator> = ops.iter().collect();
            let exact = observables_series(&h, &psi, &refs, &times, &numeric.evolve_options())?;
            let tts = tdvp_observables(&traj, graph, basis, &times)?;
            let tdvp_cols = [tts.density_a, tts.density_b, tts.sigma_y_a, tts.sigma_y_b];
            let names = ["density_a", "density_b", "sigma_y_a", "sigma_y_b"];
            let mut header = vec!["t".to_string()];
            let mut cols = Vec::new();
            let mut diffs = Map::new();
            for ((name, tv), ex) in names.iter().zip(&tdvp_cols).zip(&exact) {
                header.push(format!("tdvp:{name}"));
                header.push(format!("exact:{name}"));
                cols.push(tv.values.clone());
                cols.push(ex.values.clone());
                let d = tv.values.iter().zip(&ex.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                diffs.insert((*name).into(), json!(d));
            }
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            sink.csv(&format!("tdvp_observables_{omega:.4}.csv"), &header, &columns(&times, &cols))?;
            entry["max_abs_difference"] = Value::Object(diffs);
        }
        orbits.push(entry);
    }
    report.insert("orbits".into(), Value::Array(orbits));
    let report = Value::Object(report);
    sink.json("tdvp.json", &report)?;
    Ok(report)
}

fn run_optimize(ctx: &mut Context, sink: &mut Sink, e: &OptimizeExp) -> Result<Value, CliError> {
    let numeric = ctx.cfg.numeric.clone();
    let base_cfg = ctx.cfg.model.clone();
    ctx.basis()?;
    let (graph, basis) = (&ctx.graph, ctx.basis.as_ref().expect("basis set"));
    let n = graph.n_sites();
    let base = base_cfg.build(graph);
    let problem = RevivalProblem::new(graph, basis, &base, e.t_search, numeric.dt, numeric.evolve_options())?;
    let nm = NelderMeadOptions { xtol: e.xtol, max_evals: e.max_evals };
    let (result, best_model, curve): (_, Model, _) = match e.target {
        Target::Deformation => {
            let r = optimize_deformation(&problem, &base, &nm)?;
            let m = base.clone().with_deformation(r.params[0], r.params[1]);
            (r, m, None)
        }
        Target::Boundary => {
            let r = optimize_boundary(&problem, e.freeze_edge, &nm)?;
            let m = Model::boundary_corrected(graph, r.params[0], r.params[1]);
            (r, m, None)
        }
        Target::Frequency => {
            let sweep = e.sweep.as_ref().map(|s| s.points()).unwrap_or_default();
            let f = optimize_frequency(&problem, &sweep, &nm)?;
            let m = Model::two_frequency(graph, f.result.params[0], 1.0);
            (f.result, m, Some(f.curve))
        }
    };
    let best = problem.evaluate(&best_model)?;
    let trace: Vec<Vec<String>> = result.trace.iter().enumerate().map(|(k, v)| vec![k.to_string(), num(*v)]).collect();
    sink.csv("optimize_trace.csv", &["iteration", "best_F_T"], &trace)?;
    if let Some(c) = &curve {
        let rows: Vec<Vec<String>> = c.iter().map(|(w, f)| vec![num(*w), num(*f)]).collect();
        sink.csv("frequency_curve.csv", &["omega_a", "F_T"], &rows)?;
    }
    let params: Map<String, Value> = result.names.iter().cloned().zip(result.params.iter().map(|v| json!(v))).collect();
    let report = json!({
        "target": format!("{:?}", e.target).to_lowercase(),
        "params": params,
        "F_T": result.objective,
        "T": best.period,
        "log_infidelity_density": best.log_infidelity_density(n),
        "evals": result.evals,
        "converged": result.converged,
        "reference": { "T": problem.reference.period, "F_T": problem.reference.fidelity },
        "n_sites": n,
        "dim": basis.dim(),
    });
    sink.json("optimize.json", &report)?;
    Ok(report)
}

fn run_scan(ctx: &mut Context, sink: &mut Sink, e: &ScanExp) -> Result<Value, CliError> {
    let numeric = ctx.cfg.numeric.clone();
    let base = ctx.cfg.model.clone();
    ctx.basis()?;
    let (graph, basis) = (&ctx.graph, ctx.basis.as_ref().expect("basis set"));
    let problem = match e.quantity {
        Quantity::Fidelity => Some(RevivalProblem::new(
            graph,
            basis,
            &base.build(graph),
            e.t_search,
            numeric.dt,
            numeric.evolve_options(),
        )?),
        _ => None,
    };
    // minimized value: leakage, literal variance, or -F(T)
    let value = |mc: ModelConfig| -> scarlab_core::Result<f64> {
        let model = mc.build(graph);
        match e.quantity {
            Quantity::Leakage => model_leakage(graph, basis, &model),
            Quantity::LiteralVariance => {
                let h = build_hamiltonian(graph, basis, &model)?;
                let (hp, hm) = split_pm(graph, basis, &model)?;
                Ok(subspace_variance(&h, &build_fsa_for(graph, basis, &hp, &hm)?)?.1)
            }
            Quantity::Fidelity => Ok(-problem.as_ref().expect("problem set").fidelity(&model)?),
        }
    };
    let sign = if e.quantity == Quantity::Fidelity { -1.0 } else { 1.0 };
    let qname = match e.quantity {
        Quantity::Leakage => "leakage",
        Quantity::LiteralVariance => "literal_variance",
        Quantity::Fidelity => "F_T",
    };
    let xs = e.x.range().points();
    let report = match &e.y {
        None => {
            let s = variance_scan_1d(&xs, |x| value(base.with(e.x.param, x)))?;
            let rows: Vec<Vec<String>> = s.points.iter().zip(&s.values).map(|(x, v)| vec![num(*x), num(sign * v)]).collect();
            sink.csv("scan.csv", &[e.x.param.name(), qname], &rows)?;
            json!({ "quantity": qname, "optimum": { e.x.param.name(): s.argmin }, "value": sign * s.min })
        }
        Some(y) => {
            let ys = y.range().points();
            let s = variance_scan_2d(&xs, &ys, |a, b| value(base.with(e.x.param, a).with(y.param, b)))?;
            let mut rows = Vec::new();
            for (i, x) in s.xs.iter().enumerate() {
                for (j, yv) in s.ys.iter().enumerate() {
                    rows.push(vec![num(*x), num(*yv), num(sign * s.values[i][j])]);
                }
            }
            sink.csv("scan.csv", &[e.x.param.name(), y.param.name(), qname], &rows)?;
            json!({
                "quantity": qname,
                "optimum": { e.x.param.name(): s.argmin.0, y.param.name(): s.argmin.1 },
                "value": sign * s.min,
            })
        }
    };
    sink.json("scan.json", &report)?;
    Ok(report)
}
