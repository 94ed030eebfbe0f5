//! Revival detection and Nelder-Mead maximization of the first-revival fidelity.

use crate::basis::{maximally_excited, ConstrainedBasis};
use crate::error::{Error, Result};
use crate::evolve::{fidelity_series, EvolveOptions, StateVector, TimeSeries};
use crate::lattice::{Boundary, LatticeKind, SiteGraph, Sublattice};
use crate::num::Real;
use crate::operators::{build_hamiltonian, ModelSpec};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// First revival of a fidelity series.
#[derive(Debug, Clone)]
pub struct RevivalReport<T> {
    /// Revival time `T`.
    pub period: T,
    /// Fidelity `F(T)`.
    pub fidelity: T,
    pub series: TimeSeries<T>,
}

impl<T: Real> RevivalReport<T> {
    /// `-(1/N) ln F(T)`.
    pub fn log_infidelity_density(&self, n_sites: usize) -> T {
        -self.fidelity.ln() / T::lit(n_sites as f64)
    }
}

/// First local maximum after the series drops below `threshold`, refined by a
/// three-point parabola. Maxima below the threshold are skipped while a later one
/// exceeds it; otherwise the largest local maximum is taken.
pub fn detect_first_revival_with<T: Real>(series: &TimeSeries<T>, threshold: T) -> Result<RevivalReport<T>> {
    let y = &series.values;
    let t = &series.times;
    if y.len() < 3 || t.len() != y.len() {
        return Err(Error::NoRevival(format!("series too short ({} points)", y.len())));
    }
    let cross = y
        .iter()
        .position(|&v| v < threshold)
        .ok_or_else(|| Error::NoRevival(format!("fidelity never drops below {threshold}")))?;
    let maxima: Vec<usize> =
        (cross.max(1)..y.len() - 1).filter(|&j| y[j] >= y[j - 1] && y[j] > y[j + 1]).collect();
    let j = match maxima.iter().find(|&&j| y[j] >= threshold) {
        Some(&j) => j,
        None => *maxima
            .iter()
            .max_by(|&&a, &&b| y[a].partial_cmp(&y[b]).unwrap_or(std::cmp::Ordering::Equal))
            .ok_or_else(|| Error::NoRevival("no local maximum after the decay".into()))?,
    };
    let (y0, y1, y2) = (y[j - 1], y[j], y[j + 1]);
    let curv = y0 - T::lit(2.0) * y1 + y2;
    let (offset, peak) = if curv < T::zero() {
        let d = (T::lit(0.5) * (y0 - y2) / curv).max(-T::one()).min(T::one());
        (d, y1 - T::lit(0.25) * (y0 - y2) * d)
    } else {
        (T::zero(), y1)
    };
    let dt = t[j + 1] - t[j];
    Ok(RevivalReport {
        period: t[j] + offset * dt,
        fidelity: peak.max(T::zero()).min(T::one()),
        series: series.clone(),
    })
}

pub fn detect_first_revival<T: Real>(series: &TimeSeries<T>) -> Result<RevivalReport<T>> {
    detect_first_revival_with(series, T::lit(DEFAULT_THRESHOLD))
}

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    /// Stop once every vertex lies within this distance of the best one.
    pub xtol: f64,
    pub max_evals: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { xtol: 1e-4, max_evals: 400 }
    }
}

/// Result of a maximization.
#[derive(Debug, Clone)]
pub struct OptResult<T> {
    pub names: Vec<String>,
    pub params: Vec<T>,
    /// Best objective value.
    pub objective: T,
    pub evals: usize,
    /// Best objective after each iteration.
    pub trace: Vec<T>,
    pub converged: bool,
}

impl<T: Real> OptResult<T> {
    pub fn param(&self, name: &str) -> Option<T> {
        self.names.iter().position(|n| n == name).map(|k| self.params[k])
    }

    fn named(mut self, names: &[&str]) -> Self {
        self.names = names.iter().map(|s| s.to_string()).collect();
        self
    }
}

/// Maximizes `objective` with the Nelder-Mead simplex method (reflection 1,
/// expansion 2, contraction 0.5, shrink 0.5), starting from `x0` and the
/// axis-aligned simplex of size `scale`.
pub fn nelder_mead<T: Real>(
    mut objective: impl FnMut(&[T]) -> Result<T>,
    x0: &[T],
    scale: &[T],
    opts: &NelderMeadOptions,
) -> Result<OptResult<T>> {
    let n = x0.len();
    if n == 0 || scale.len() != n {
        return Err(Error::LengthMismatch { expected: n.max(1), found: scale.len() });
    }
    let mut evals = 0usize;
    // minimizes the negated objective
    let mut f = |x: &[T], evals: &mut usize| -> Result<T> {
        *evals += 1;
        let v = objective(x)?;
        if !v.is_finite() {
            return Err(Error::InvalidParameter(format!("objective not finite at {:?}", x)));
        }
        Ok(-v)
    };
    let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let mut x = x0.to_vec();
        if k > 0 {
            x[k - 1] += scale[k - 1];
        }
        let v = f(&x, &mut evals)?;
        simplex.push((x, v));
    }
    let (alpha, gamma, rho, sigma) = (T::one(), T::lit(2.0), T::lit(0.5), T::lit(0.5));
    let xtol = T::lit(opts.xtol);
    let mut trace = Vec::new();
    let mut converged = false;
    let combine = |c: &[T], d: &[T], w: T| -> Vec<T> { c.iter().zip(d).map(|(&ci, &di)| ci + w * (di - ci)).collect() };
    loop {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        trace.push(-simplex[0].1);
        let best = simplex[0].0.clone();
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&best).map(|(&a, &b)| (a - b) * (a - b)).fold(T::zero(), |s, v| s + v).sqrt())
            .fold(T::zero(), |m, v| m.max(v));
        if diameter < xtol {
            converged = true;
            break;
        }
        if evals >= opts.max_evals {
            break;
        }
        let mut centroid = vec![T::zero(); n];
        for (x, _) in &simplex[..n] {
            for (c, &xi) in centroid.iter_mut().zip(x) {
                *c += xi;
            }
        }
        let inv = T::one() / T::lit(n as f64);
        centroid.iter_mut().for_each(|c| *c *= inv);
        let (worst, f_worst) = simplex[n].clone();
        let f_best = simplex[0].1;
        let f_second = simplex[n - 1].1;

        let xr = combine(&centroid, &worst, -alpha);
        let fr = f(&xr, &mut evals)?;
        if fr < f_best {
            let xe = combine(&centroid, &xr, gamma);
            let fe = f(&xe, &mut evals)?;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < f_second {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc, accept) = if fr < f_worst {
            let xc = combine(&centroid, &xr, rho);
            let fc = f(&xc, &mut evals)?;
            (xc, fc, fc <= fr)
        } else {
            let xc = combine(&centroid, &worst, rho);
            let fc = f(&xc, &mut evals)?;
            (xc, fc, fc < f_worst)
        };
        if accept {
            simplex[n] = (xc, fc);
            continue;
        }
        for k in 1..=n {
            let x = combine(&best, &simplex[k].0, sigma);
            let v = f(&x, &mut evals)?;
            simplex[k] = (x, v);
        }
    }
    let (params, value) = simplex.swap_remove(0);
    Ok(OptResult { names: (0..n).map(|k| format!("x{k}")).collect(), params, objective: -value, evals, trace, converged })
}

/// Fidelity-revival objective from `|M_A>` with a fixed evolution window.
pub struct RevivalProblem<'a, T: Real> {
    pub graph: &'a SiteGraph,
    pub basis: &'a ConstrainedBasis,
    pub psi0: StateVector<T>,
    /// Window length, 1.5 times the reference revival time.
    pub horizon: T,
    pub dt: T,
    pub opts: EvolveOptions<T>,
    /// Revival of the reference model.
    pub reference: RevivalReport<T>,
}

impl<'a, T: Real> RevivalProblem<'a, T> {
    /// Detects the revival of `reference` (searching up to `t_search`) and fixes the window.
    pub fn new(
        graph: &'a SiteGraph,
        basis: &'a ConstrainedBasis,
        reference: &ModelSpec<T>,
        t_search: T,
        dt: T,
        opts: EvolveOptions<T>,
    ) -> Result<Self> {
        let psi0 = StateVector::from_config(basis, maximally_excited(graph, Sublattice::A))?;
        let h = build_hamiltonian(graph, basis, reference)?;
        let series = fidelity_series(&h, &psi0, t_search, dt, &opts)?;
        let report = detect_first_revival(&series)?;
        let horizon = T::lit(1.5) * report.period;
        Ok(Self { graph, basis, psi0, horizon, dt, opts, reference: report })
    }

    pub fn evaluate(&self, model: &ModelSpec<T>) -> Result<RevivalReport<T>> {
        let h = build_hamiltonian(self.graph, self.basis, model)?;
        let series = fidelity_series(&h, &self.psi0, self.horizon, self.dt, &self.opts)?;
        detect_first_revival(&series)
    }

    /// `F(T)`, with a window lacking revival structure scored as 0.
    pub fn fidelity(&self, model: &ModelSpec<T>) -> Result<T> {
        match self.evaluate(model) {
            Ok(r) => Ok(r.fidelity),
            Err(Error::NoRevival(_)) => Ok(T::zero()),
            Err(e) => Err(e),
        }
    }
}

/// Optimizes the deformation `(a, b)` on top of `base`, starting from `(0, 0)`.
pub fn optimize_deformation<T: Real>(
    problem: &RevivalProblem<T>,
    base: &ModelSpec<T>,
    opts: &NelderMeadOptions,
) -> Result<OptResult<T>> {
    let s = T::lit(0.02);
    let r = nelder_mead(
        |x| problem.fidelity(&base.clone().with_deformation(x[0], x[1])),
        &[T::zero(), T::zero()],
        &[s, s],
        opts,
    )?;
    Ok(r.named(&["a", "b"]))
}

/// Optimizes the corner and edge frequency reductions `(g_C, g_E)` on an open
/// square lattice. With `freeze_edge`, only `g_C` is varied.
pub fn optimize_boundary<T: Real>(
    problem: &RevivalProblem<T>,
    freeze_edge: bool,
    opts: &NelderMeadOptions,
) -> Result<OptResult<T>> {
    let spec = problem.graph.spec();
    if spec.kind != LatticeKind::Square || spec.boundary != Boundary::Open {
        return Err(Error::WrongLattice { expected: "open square".into(), found: format!("{:?}", spec) });
    }
    let g = problem.graph;
    let s = T::lit(0.05);
    if freeze_edge {
        let r = nelder_mead(
            |x| problem.fidelity(&ModelSpec::boundary_corrected(g, x[0], T::zero())),
            &[T::zero()],
            &[s],
            opts,
        )?;
        let mut r = r.named(&["g_c"]);
        r.names.push("g_e".into());
        r.params.push(T::zero());
        return Ok(r);
    }
    let r = nelder_mead(
        |x| problem.fidelity(&ModelSpec::boundary_corrected(g, x[0], x[1])),
        &[T::zero(), T::zero()],
        &[s, s],
        opts,
    )?;
    Ok(r.named(&["g_c", "g_e"]))
}

/// Frequency sweep of `F(T)` and a 1D maximization over the sublattice-A frequency.
#[derive(Debug, Clone)]
pub struct FrequencyOptimum<T> {
    pub result: OptResult<T>,
    /// `(omega, F(T))` on the sweep grid.
    pub curve: Vec<(T, T)>,
}

/// Maximizes `F(T)` over `omega_A` (with `omega_B = 1`), starting from `omega = 1`.
pub fn optimize_frequency<T: Real>(
    problem: &RevivalProblem<T>,
    sweep: &[T],
    opts: &NelderMeadOptions,
) -> Result<FrequencyOptimum<T>> {
    let g = problem.graph;
    let fid = |w: T| problem.fidelity(&ModelSpec::two_frequency(g, w, T::one()));
    let curve = sweep.iter().map(|&w| Ok((w, fid(w)?))).collect::<Result<Vec<_>>>()?;
    let result = nelder_mead(|x| fid(x[0]), &[T::one()], &[T::lit(-0.05)], opts)?.named(&["omega"]);
    Ok(FrequencyOptimum { result, curve })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::enumerate_basis;
    use crate::evolve::time_grid;
    use crate::lattice::{build_lattice, LatticeSpec};
    use approx::assert_abs_diff_eq;

    fn cos2(t_max: f64, dt: f64) -> TimeSeries<f64> {
        let times = time_grid(t_max, dt).unwrap();
        let values = times.iter().map(|t: &f64| t.cos().powi(2)).collect();
        TimeSeries { times, values }
    }

    #[test]
    fn free_spin_revival() {
        let r = detect_first_revival(&cos2(5.0, 0.01)).unwrap();
        assert_abs_diff_eq!(r.period, std::f64::consts::PI, epsilon = 1e-6);
        assert_abs_diff_eq!(r.fidelity, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn refinement_consistent_under_halving() {
        let dt = 0.013;
        let a = detect_first_revival(&cos2(5.0, dt)).unwrap();
        let b = detect_first_revival(&cos2(5.0, dt / 2.0)).unwrap();
        assert!((a.period - b.period).abs() < dt * dt);
    }

    #[test]
    fn monotone_series_has_no_revival() {
        let times = time_grid(5.0, 0.1).unwrap();
        let values = times.iter().map(|t: &f64| (-t).exp()).collect();
        let s = TimeSeries { times, values };
        assert!(matches!(detect_first_revival(&s), Err(Error::NoRevival(_))));
        let flat = TimeSeries { times: vec![0.0, 1.0, 2.0], values: vec![1.0, 0.9, 0.8] };
        assert!(matches!(detect_first_revival(&flat), Err(Error::NoRevival(_))));
        let short = TimeSeries { times: vec![0.0, 1.0], values: vec![1.0, 0.1] };
        assert!(matches!(detect_first_revival(&short), Err(Error::NoRevival(_))));
    }

    #[test]
    fn skips_small_wiggles() {
        let times = time_grid(10.0, 0.01).unwrap();
        let values = times
            .iter()
            .map(|&t: &f64| {
                let wiggle = 0.02 * (8.0 * t).sin().powi(2) * (t > 1.0 && t < 2.5) as i32 as f64;
                (0.5 * t).cos().powi(2) * 0.9 + 0.1 * (t < 0.01) as i32 as f64 + wiggle
            })
            .collect();
        let r = detect_first_revival(&TimeSeries { times, values }).unwrap();
        assert_abs_diff_eq!(r.period, 2.0 * std::f64::consts::PI, epsilon = 1e-3);
    }

    #[test]
    fn quadratic_bowl() {
        let r = nelder_mead(
            |x: &[f64]| Ok(-(x[0] - 0.3).powi(2) - (x[1] - 0.7).powi(2)),
            &[0.0, 0.0],
            &[0.1, 0.1],
            &NelderMeadOptions::default(),
        )
        .unwrap();
        assert!(r.converged);
        assert!((r.params[0] - 0.3).abs() < 1e-3 && (r.params[1] - 0.7).abs() < 1e-3);
        assert!(r.trace.windows(2).all(|w| w[1] >= w[0]));
        assert!(r.objective >= r.trace[0]);
    }

    #[test]
    fn rosenbrock_and_eval_cap() {
        let rosen = |x: &[f64]| Ok(-((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)));
        let opts = NelderMeadOptions { xtol: 1e-8, max_evals: 5000 };
        let r = nelder_mead(rosen, &[-1.2, 1.0], &[0.1, 0.1], &opts).unwrap();
        assert!((r.params[0] - 1.0).abs() < 1e-4 && (r.params[1] - 1.0).abs() < 1e-4);
        let capped = nelder_mead(rosen, &[-1.2, 1.0], &[0.1, 0.1], &NelderMeadOptions { xtol: 1e-12, max_evals: 20 })
            .unwrap();
        assert!(!capped.converged);
        assert!(capped.evals >= 20 && capped.evals < 30);
    }

    #[test]
    fn objective_errors_propagate() {
        let r = nelder_mead(|_: &[f64]| Err(Error::EmptySpectrum), &[0.0], &[1.0], &NelderMeadOptions::default());
        assert_eq!(r.unwrap_err(), Error::EmptySpectrum);
        let r = nelder_mead(|_: &[f64]| Ok(f64::NAN), &[0.0], &[1.0], &NelderMeadOptions::default());
        assert!(r.is_err());
    }

    #[test]
    fn boundary_zero_recovers_uncorrected() {
        let g = build_lattice(LatticeSpec::square(3, Boundary::Open)).unwrap();
        let b = enumerate_basis(&g).unwrap();
        let p = RevivalProblem::<f64>::new(&g, &b, &ModelSpec::uniform(9), 12.0, 0.01, EvolveOptions::default()).unwrap();
        let f0 = p.evaluate(&ModelSpec::boundary_corrected(&g, 0.0, 0.0)).unwrap();
        assert_eq!(f0.fidelity, p.reference.fidelity);
        assert_eq!(f0.period, p.reference.period);
        let again = p.evaluate(&ModelSpec::uniform(9)).unwrap();
        assert_eq!(again.fidelity.to_bits(), f0.fidelity.to_bits());
    }

    #[test]
    fn boundary_requires_open_square() {
        let g = build_lattice(LatticeSpec::square(4, Boundary::Periodic)).unwrap();
        let b = enumerate_basis(&g).unwrap();
        let p = RevivalProblem::new(&g, &b, &ModelSpec::uniform(16), 12.0, 0.02, EvolveOptions::default()).unwrap();
        assert!(matches!(optimize_boundary(&p, false, &NelderMeadOptions::default()), Err(Error::WrongLattice { .. })));
    }

    #[test]
    fn deformation_improves_small_square() {
        let g = build_lattice(LatticeSpec::square(4, Boundary::Periodic)).unwrap();
        let b = enumerate_basis(&g).unwrap();
        let base = ModelSpec::uniform(16);
        let p = RevivalProblem::new(&g, &b, &base, 12.0, 0.01, EvolveOptions::default()).unwrap();
        let opts = NelderMeadOptions { xtol: 1e-3, max_evals: 60 };
        let r = optimize_deformation(&p, &base, &opts).unwrap();
        assert!(r.objective > p.reference.fidelity + 0.1);
        assert!(r.param("a").unwrap() > 0.0 && r.param("b").unwrap() > 0.0);
    }
}
