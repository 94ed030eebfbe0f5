//! Two-angle TDVP equations of motion on the tree-tensor (TTS) manifold of a
//! bipartite lattice with sublattice connectivities `c_A`, `c_B` and an
//! A-sublattice Rabi frequency `omega`.
//!
//! Special points: `M_A` at `(pi/2 + k pi, l pi)`, `M_B` at `(k pi, pi/2 + l pi)`
//! and the singular points at `(pi/2 + k pi, pi/2 + l pi)`.

use crate::basis::ConstrainedBasis;
use crate::error::{Error, Result};
use crate::evolve::{StateVector, TimeSeries};
use crate::lattice::{SiteGraph, Sublattice};
use crate::num::{Complex, Real};
use crate::operators::{build_local_observable, LocalKind, SparseOperator};

/// Default launch offset from `M_A`.
pub const DEFAULT_DELTA: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdvpParams<T> {
    pub c_a: u32,
    pub c_b: u32,
    pub omega: T,
    pub epsilon: T,
}

impl<T: Real> TdvpParams<T> {
    pub fn new(c_a: u32, c_b: u32, omega: T, epsilon: T) -> Result<Self> {
        let p = Self { c_a, c_b, omega, epsilon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.c_a < 1 || self.c_b < 1 {
            return Err(Error::InvalidParameter("connectivities must be at least 1".into()));
        }
        if !(self.omega > T::zero()) || !self.omega.is_finite() {
            return Err(Error::InvalidParameter(format!("omega must be positive, got {}", self.omega)));
        }
        if !(self.epsilon >= T::zero()) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        Ok(())
    }

    pub fn with_omega(self, omega: T) -> Self {
        Self { omega, ..self }
    }
}

/// Regularized tangent `tan x / (1 + eps tan^2 x)`.
pub fn reg_tan<T: Real>(x: T, eps: T) -> T {
    if eps == T::zero() {
        return x.tan();
    }
    let (s, c) = (x.sin(), x.cos());
    // same expression multiplied through by cos^2, finite at the poles
    s * c / (c * c + eps * s * s)
}

/// `(d theta_A / dt, d theta_B / dt)`.
pub fn eom_rhs<T: Real>(theta_a: T, theta_b: T, p: &TdvpParams<T>) -> Result<(T, T)> {
    let (ca, cb) = (p.c_a as i32, p.c_b as i32);
    let da = -p.omega * theta_b.cos().powi(ca - 1) - theta_a.cos().powi(cb) * theta_a.sin() * reg_tan(theta_b, p.epsilon);
    let db = -theta_a.cos().powi(cb - 1) - p.omega * theta_b.cos().powi(ca) * theta_b.sin() * reg_tan(theta_a, p.epsilon);
    if !da.is_finite() || !db.is_finite() {
        return Err(Error::Divergence { theta_a: theta_a.as_f64(), theta_b: theta_b.as_f64() });
    }
    Ok((da, db))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    NearMA,
    NearMB,
    Singular,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdvpEvent<T> {
    pub kind: EventKind,
    pub time: T,
    /// Closest approach (Euclidean, in angle space) to the nearest point of the family.
    pub distance: T,
}

#[derive(Debug, Clone)]
pub struct TdvpTrajectory<T> {
    pub times: Vec<T>,
    pub theta_a: Vec<T>,
    pub theta_b: Vec<T>,
    rates: Vec<(T, T)>,
    pub events: Vec<TdvpEvent<T>>,
}

impl<T: Real> TdvpTrajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Angles at `t` by cubic Hermite interpolation between accepted steps.
    pub fn at(&self, t: T) -> Option<(T, T)> {
        let n = self.times.len();
        if n == 0 {
            return None;
        }
        let forward = n < 2 || self.times[1] >= self.times[0];
        let key = |x: T| if forward { x } else { -x };
        let k = self.times.partition_point(|&s| key(s) < key(t));
        if k == 0 {
            return (t == self.times[0]).then(|| (self.theta_a[0], self.theta_b[0]));
        }
        if k == n {
            return None;
        }
        Some(self.hermite(k - 1, t))
    }

    fn hermite(&self, k: usize, t: T) -> (T, T) {
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let y0 = (self.theta_a[k], self.theta_b[k]);
        let y1 = (self.theta_a[k + 1], self.theta_b[k + 1]);
        let (f0, f1) = (self.rates[k], self.rates[k + 1]);
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let h00 = two * s * s * s - three * s * s + T::one();
        let h10 = s * s * s - two * s * s + s;
        let h01 = -two * s * s * s + three * s * s;
        let h11 = s * s * s - s * s;
        (
            h00 * y0.0 + h10 * h * f0.0 + h01 * y1.0 + h11 * h * f1.0,
            h00 * y0.1 + h10 * h * f0.1 + h01 * y1.1 + h11 * h * f1.1,
        )
    }

    /// Angles on an arbitrary set of times inside the integrated range.
    pub fn resample(&self, times: &[T]) -> Result<Vec<(T, T)>> {
        times
            .iter()
            .map(|&t| self.at(t).ok_or_else(|| Error::InvalidParameter(format!("time {t} outside trajectory"))))
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IntegrateOptions<T> {
    pub rtol: T,
    pub atol: T,
    /// Events are reported when the closest approach is below this distance.
    pub event_radius: T,
    pub max_steps: usize,
}

impl<T: Real> Default for IntegrateOptions<T> {
    fn default() -> Self {
        Self { rtol: T::lit(1e-9), atol: T::lit(1e-9), event_radius: T::lit(0.1), max_steps: 10_000_000 }
    }
}

fn wrap_offset<T: Real>(x: T, center: T) -> T {
    // distance from x to the nearest point center + k pi
    let pi = T::pi();
    let y = (x - center) / pi;
    (y - y.round()).abs() * pi
}

fn family_distance<T: Real>(kind: EventKind, a: T, b: T) -> T {
    let half = T::frac_pi_2();
    let (ca, cb) = match kind {
        EventKind::NearMA => (half, T::zero()),
        EventKind::NearMB => (T::zero(), half),
        EventKind::Singular => (half, half),
    };
    let (da, db) = (wrap_offset(a, ca), wrap_offset(b, cb));
    (da * da + db * db).sqrt()
}

const KINDS: [EventKind; 3] = [EventKind::NearMA, EventKind::NearMB, EventKind::Singular];

/// One Dormand-Prince 5(4) step; returns the new state, its rate and the
/// scaled error norm.
fn dopri_step<T: Real>(
    p: &TdvpParams<T>,
    y: (T, T),
    f0: (T, T),
    h: T,
    opts: &IntegrateOptions<T>,
) -> Result<((T, T), (T, T), T)> {
    let l = T::lit;
    let a: [&[f64]; 6] = [
        &[1.0 / 5.0],
        &[3.0 / 40.0, 9.0 / 40.0],
        &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
        &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
        &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
        &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    let e = [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];
    let mut k = [(T::zero(), T::zero()); 7];
    k[0] = f0;
    for (s, row) in a.iter().enumerate() {
        let mut ya = y.0;
        let mut yb = y.1;
        for (j, &c) in row.iter().enumerate() {
            ya += h * l(c) * k[j].0;
            yb += h * l(c) * k[j].1;
        }
        k[s + 1] = eom_rhs(ya, yb, p)?;
        if s == 5 {
            let (mut ea, mut eb) = (T::zero(), T::zero());
            for (j, &c) in e.iter().enumerate() {
                ea += h * l(c) * k[j].0;
                eb += h * l(c) * k[j].1;
            }
            let sa = opts.atol + opts.rtol * y.0.abs().max(ya.abs());
            let sb = opts.atol + opts.rtol * y.1.abs().max(yb.abs());
            let err = (((ea / sa).powi(2) + (eb / sb).powi(2)) * T::lit(0.5)).sqrt();
            return Ok(((ya, yb), k[6], err));
        }
    }
    unreachable!()
}

/// Adaptive integration from `initial` to `t_end` (either sign). `stop` is
/// consulted after every accepted step with the last two recorded points and
/// ends the integration early when it returns true.
fn integrate_until<T: Real>(
    p: &TdvpParams<T>,
    initial: (T, T),
    t_end: T,
    opts: &IntegrateOptions<T>,
    mut stop: impl FnMut(&TdvpTrajectory<T>) -> bool,
) -> Result<TdvpTrajectory<T>> {
    p.validate()?;
    let f0 = eom_rhs(initial.0, initial.1, p)?;
    let mut traj = TdvpTrajectory {
        times: vec![T::zero()],
        theta_a: vec![initial.0],
        theta_b: vec![initial.1],
        rates: vec![f0],
        events: Vec::new(),
    };
    if t_end == T::zero() {
        return Ok(traj);
    }
    let dir = t_end.signum();
    let mut h = dir * T::lit(1e-3).min(t_end.abs());
    let (mut t, mut y, mut f) = (T::zero(), initial, f0);
    let mut steps = 0usize;
    while dir * (t_end - t) > T::zero() {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::StepUnderflow { t: t.as_f64() });
        }
        if dir * (t + h - t_end) > T::zero() {
            h = t_end - t;
        }
        let (y1, f1, err) = dopri_step(p, y, f, h, opts)?;
        if err <= T::one() {
            t += h;
            y = y1;
            f = f1;
            traj.times.push(t);
            traj.theta_a.push(y.0);
            traj.theta_b.push(y.1);
            traj.rates.push(f);
            if stop(&traj) {
                break;
            }
        }
        let factor = if err == T::zero() {
            T::lit(5.0)
        } else {
            (T::lit(0.9) * err.powf(T::lit(-0.2))).min(T::lit(5.0)).max(T::lit(0.2))
        };
        h *= factor;
        if h.abs() < T::eps() * T::lit(16.0) * t.abs().max(T::one()) {
            return Err(Error::StepUnderflow { t: t.as_f64() });
        }
    }
    Ok(traj)
}

/// Golden-section minimization of `g` on `[lo, hi]`.
fn golden_min<T: Real>(lo: T, hi: T, g: impl Fn(T) -> T) -> (T, T) {
    let r = T::lit(0.618_033_988_749_894_9);
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut g1, mut g2) = (g(x1), g(x2));
    for _ in 0..80 {
        if g1 < g2 {
            b = x2;
            x2 = x1;
            g2 = g1;
            x1 = b - r * (b - a);
            g1 = g(x1);
        } else {
            a = x1;
            x1 = x2;
            g1 = g2;
            x2 = a + r * (b - a);
            g2 = g(x2);
        }
    }
    if g1 < g2 {
        (x1, g1)
    } else {
        (x2, g2)
    }
}

fn annotate_events<T: Real>(traj: &mut TdvpTrajectory<T>, radius: T) {
    let n = traj.len();
    let mut events = Vec::new();
    for kind in KINDS {
        let d: Vec<T> = (0..n).map(|k| family_distance(kind, traj.theta_a[k], traj.theta_b[k])).collect();
        for k in 0..n {
            let left = k == 0 || d[k] < d[k - 1];
            let right = k + 1 == n || d[k] <= d[k + 1];
            if !(left && right) || d[k] >= radius * T::lit(2.0) {
                continue;
            }
            let (lo, hi) = (k.saturating_sub(1), (k + 1).min(n - 1));
            let (time, distance) = if lo == hi {
                (traj.times[k], d[k])
            } else {
                let dist_at = |t: T| {
                    let seg = if (t - traj.times[k]) * (traj.times[hi] - traj.times[k]) > T::zero() { k } else { lo };
                    let seg = seg.min(n - 2);
                    let (a, b) = traj.hermite(seg, t);
                    family_distance(kind, a, b)
                };
                golden_min(traj.times[lo], traj.times[hi], dist_at)
            };
            if distance < radius {
                events.push(TdvpEvent { kind, time, distance });
            }
        }
    }
    events.sort_by(|x, y| x.time.abs().partial_cmp(&y.time.abs()).unwrap());
    traj.events = events;
}

/// Integrates the equations of motion on `[0, t_end]` (or `[t_end, 0]`).
pub fn integrate<T: Real>(
    p: &TdvpParams<T>,
    initial: (T, T),
    t_end: T,
    opts: &IntegrateOptions<T>,
) -> Result<TdvpTrajectory<T>> {
    let mut traj = integrate_until(p, initial, t_end, opts, |_| false)?;
    annotate_events(&mut traj, opts.event_radius);
    Ok(traj)
}

/// Launch point `delta` away from `M_A` towards the origin.
pub fn near_m_a<T: Real>(delta: T) -> (T, T) {
    (T::frac_pi_2() - delta, T::zero())
}

/// Signed miss of the orbit launched at `near_m_a(delta)`: the value of
/// `theta_A` (reduced to `(-pi/2, pi/2]`) when `theta_B` first crosses `-pi/2`
/// downwards. Zero means the orbit runs through `M_B = (0, -pi/2)`.
pub fn mb_section_miss<T: Real>(p: &TdvpParams<T>, delta: T, t_max: T) -> Result<Option<T>> {
    let target = -T::frac_pi_2();
    let opts = IntegrateOptions::default();
    let traj = integrate_until(p, near_m_a(delta), t_max, &opts, |tr| {
        let n = tr.len();
        n >= 2 && tr.theta_b[n - 2] > target && tr.theta_b[n - 1] <= target
    })?;
    let n = traj.len();
    if n < 2 || !(traj.theta_b[n - 2] > target && traj.theta_b[n - 1] <= target) {
        return Ok(None);
    }
    let (mut lo, mut hi) = (traj.times[n - 2], traj.times[n - 1]);
    for _ in 0..100 {
        let mid = (lo + hi) * T::lit(0.5);
        if traj.hermite(n - 2, mid).1 > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = traj.hermite(n - 2, (lo + hi) * T::lit(0.5)).0;
    let pi = T::pi();
    Ok(Some(a - (a / pi).round() * pi))
}

#[derive(Debug, Clone, Copy)]
pub struct OmegaC<T> {
    pub omega: T,
    /// `|miss|` at the returned frequency.
    pub miss: T,
    pub bisections: usize,
}

/// Bisects the M_B-section miss in `omega` over `bracket` to width `tol`.
pub fn find_omega_c<T: Real>(c_a: u32, c_b: u32, epsilon: T, bracket: (T, T), tol: T) -> Result<OmegaC<T>> {
    let delta = T::lit(DEFAULT_DELTA);
    let t_max = T::lit(40.0);
    let base = TdvpParams::new(c_a, c_b, bracket.0.max(T::eps()), epsilon)?;
    let miss = |w: T| -> Result<T> {
        mb_section_miss(&base.with_omega(w), delta, t_max)?.ok_or(Error::NoSignChange { lo: w.as_f64(), hi: w.as_f64() })
    };
    let (mut lo, mut hi) = bracket;
    let no_change = Error::NoSignChange { lo: lo.as_f64(), hi: hi.as_f64() };
    let (flo, fhi) = (miss(lo).map_err(|_| no_change.clone())?, miss(hi).map_err(|_| no_change.clone())?);
    if flo.signum() == fhi.signum() {
        return Err(no_change);
    }
    let mut bisections = 0;
    while hi - lo > tol {
        let mid = (lo + hi) * T::lit(0.5);
        let fm = miss(mid)?;
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        bisections += 1;
    }
    let omega = (lo + hi) * T::lit(0.5);
    Ok(OmegaC { omega, miss: miss(omega)?.abs(), bisections })
}

/// TTS weights. The excitation weights carry the angle of their own
/// sublattice, so that `(pi/2, 0)` is `M_A` and `(0, pi/2)` is `M_B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TtsAmplitudes<T> {
    pub theta_a: T,
    pub theta_b: T,
    pub phi_a: T,
    pub phi_b: T,
}

impl<T: Real> TtsAmplitudes<T> {
    pub fn new(theta_a: T, theta_b: T) -> Self {
        Self { theta_a, theta_b, phi_a: T::zero(), phi_b: T::zero() }
    }

    /// `(c_down, c_up)` for the given sublattice.
    pub fn weights(&self, sub: Sublattice) -> (Complex<T>, Complex<T>) {
        let (theta, phi) = match sub {
            Sublattice::A => (self.theta_a, self.phi_a),
            Sublattice::B => (self.theta_b, self.phi_b),
        };
        let up = Complex::new(T::zero(), T::one()) * crate::num::phase(phi) * theta.tan();
        (Complex::new(theta.cos(), T::zero()), up)
    }
}

/// Normalized TTS state on the constrained basis.
pub fn tts_state<T: Real>(amps: &TtsAmplitudes<T>, graph: &SiteGraph, basis: &ConstrainedBasis) -> Result<StateVector<T>> {
    for (theta, name) in [(amps.theta_a, "theta_A"), (amps.theta_b, "theta_B")] {
        if theta.cos().abs() <= T::eps() * T::lit(4.0) {
            return Err(Error::InvalidParameter(format!("{name} sits on a pole; offset it slightly")));
        }
    }
    let mask_a = graph.sublattice_mask(Sublattice::A);
    let mask_b = graph.sublattice_mask(Sublattice::B);
    let max_a = mask_a.count_ones() as i32;
    let max_b = mask_b.count_ones() as i32;
    // rescale each pair so the larger modulus is 1 (keeps powers in range)
    let scaled = |sub| {
        let (d, u) = amps.weights(sub);
        let m = d.norm_sqr().sqrt().max(u.norm_sqr().sqrt());
        (d / m, u / m)
    };
    let (da, ua) = scaled(Sublattice::A);
    let (db, ub) = scaled(Sublattice::B);
    let amp_vec: Vec<Complex<T>> = basis
        .configs()
        .iter()
        .map(|&c| {
            let na = (c & mask_a).count_ones() as i32;
            let nb = (c & mask_b).count_ones() as i32;
            da.powi(max_a - na) * ua.powi(na) * db.powi(max_b - nb) * ub.powi(nb)
        })
        .collect();
    let mut state = StateVector::from_amplitudes(amp_vec);
    if state.normalize() == T::zero() {
        return Err(Error::NotNormalized { norm: 0.0 });
    }
    Ok(state)
}

/// Per-sublattice averages of the excitation density and of `sigma^y`.
#[derive(Debug, Clone)]
pub struct TdvpObservables<T> {
    pub density_a: TimeSeries<T>,
    pub density_b: TimeSeries<T>,
    pub sigma_y_a: TimeSeries<T>,
    pub sigma_y_b: TimeSeries<T>,
}

/// Sublattice-averaged local observables as sparse operators:
/// `(density_A, density_B, sigma_y_A, sigma_y_B)`.
pub fn sublattice_observables<T: Real>(graph: &SiteGraph, basis: &ConstrainedBasis) -> Result<[SparseOperator<T>; 4]> {
    let mut out = Vec::with_capacity(4);
    for kind in [LocalKind::Density, LocalKind::SigmaY] {
        for sub in [Sublattice::A, Sublattice::B] {
            let sites: Vec<usize> = graph.sites_of(sub).collect();
            let w = T::lit(sites.len() as f64).recip();
            let mut acc = SparseOperator::zeros(basis.dim());
            for &r in &sites {
                acc = acc.combine(T::one(), &build_local_observable(graph, basis, r, kind)?, w);
            }
            out.push(acc.with_hermitian_flag(true));
        }
    }
    let [da, db, ya, yb]: [SparseOperator<T>; 4] = out.try_into().ok().expect("four observables");
    Ok([da, db, ya, yb])
}

/// Evaluates the TTS state along `traj` at `times` and measures the
/// sublattice observables on the finite lattice.
pub fn tdvp_observables<T: Real>(
    traj: &TdvpTrajectory<T>,
    graph: &SiteGraph,
    basis: &ConstrainedBasis,
    times: &[T],
) -> Result<TdvpObservables<T>> {
    let ops = sublattice_observables(graph, basis)?;
    let angles = traj.resample(times)?;
    let mut vals: [Vec<T>; 4] = Default::default();
    for &(a, b) in &angles {
        let psi = tts_state(&TtsAmplitudes::new(a, b), graph, basis)?;
        for (v, op) in vals.iter_mut().zip(&ops) {
            v.push(op.expectation(psi.amplitudes()).re);
        }
    }
    let series = |v: Vec<T>| TimeSeries { times: times.to_vec(), values: v };
    let [da, db, ya, yb] = vals;
    Ok(TdvpObservables { density_a: series(da), density_b: series(db), sigma_y_a: series(ya), sigma_y_b: series(yb) })
}
