//! Real-time evolution `psi(t) = exp(-iHt) psi(0)` and derived time series.
//!
//! Two propagators are available: a Lanczos (Krylov-subspace) stepper with
//! residual-controlled substeps, and a dense eigendecomposition path used for
//! small dimensions and as an oracle.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::basis::{Configuration, ConstrainedBasis};
use crate::error::{Error, Result};
use crate::num::{abs2, axpy, dot, norm, phase, scale, Complex, Real};
use crate::operators::SparseOperator;

/// Complex amplitudes over the ordinals of a constrained basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T> {
    amps: Vec<Complex<T>>,
}

impl<T: Real> StateVector<T> {
    pub fn from_amplitudes(amps: Vec<Complex<T>>) -> Self {
        Self { amps }
    }

    /// Product state `|c>`.
    pub fn from_config(basis: &ConstrainedBasis, c: Configuration) -> Result<Self> {
        let k = basis.index_of(c).ok_or(Error::IllegalConfiguration(c.bits()))?;
        let mut amps = vec![Complex::new(T::zero(), T::zero()); basis.dim()];
        amps[k] = Complex::new(T::one(), T::zero());
        Ok(Self { amps })
    }

    /// Unit vector `e_k` of dimension `dim`.
    pub fn basis_state(dim: usize, k: usize) -> Self {
        let mut s = Self::zeros(dim);
        s.amps[k] = Complex::new(T::one(), T::zero());
        s
    }

    pub fn zeros(dim: usize) -> Self {
        Self { amps: vec![Complex::new(T::zero(), T::zero()); dim] }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex<T>> {
        self.amps
    }

    pub fn norm(&self) -> T {
        norm(&self.amps)
    }

    /// Rescales to unit norm; a zero vector is left untouched.
    pub fn normalize(&mut self) -> T {
        let n = self.norm();
        if n > T::zero() {
            scale(n.recip(), &mut self.amps);
        }
        n
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &Self) -> Complex<T> {
        dot(&self.amps, &other.amps)
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &Self) -> T {
        abs2(self.overlap(other))
    }

    pub fn check_normalized(&self) -> Result<()> {
        let n = self.norm();
        let tol = T::lit(1e-8).max(T::eps().sqrt() * T::lit(4.0));
        if (n - T::one()).abs() > tol {
            return Err(Error::NotNormalized { norm: n.as_f64() });
        }
        Ok(())
    }
}

/// Values sampled on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<T> {
    pub times: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Real> TimeSeries<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest `|v - v(0)|` over samples with `t` in `[t0, t1]`.
    pub fn max_deviation_from_start(&self, t0: T, t1: T) -> T {
        let v0 = self.values.first().copied().unwrap_or(T::zero());
        self.times
            .iter()
            .zip(&self.values)
            .filter(|(&t, _)| t >= t0 && t <= t1)
            .fold(T::zero(), |m, (_, &v)| m.max((v - v0).abs()))
    }

    /// Peak-to-peak amplitude over samples with `t` in `[t0, t1]`.
    pub fn peak_to_peak(&self, t0: T, t1: T) -> T {
        let window: Vec<T> = self
            .times
            .iter()
            .zip(&self.values)
            .filter(|(&t, _)| t >= t0 && t <= t1)
            .map(|(_, &v)| v)
            .collect();
        match (window.iter().copied().reduce(|a, b| a.min(b)), window.iter().copied().reduce(|a, b| a.max(b))) {
            (Some(lo), Some(hi)) => hi - lo,
            _ => T::zero(),
        }
    }
}

/// Uniform grid `0, dt, 2dt, ..., t_max` (the endpoint is included when it lies on the grid).
pub fn time_grid<T: Real>(t_max: T, dt: T) -> Result<Vec<T>> {
    if !(dt > T::zero()) || !(t_max >= T::zero()) {
        return Err(Error::InvalidParameter("time grid needs dt > 0 and t_max >= 0".into()));
    }
    let steps = (t_max / dt + T::lit(1e-9)).floor().as_f64() as usize;
    Ok((0..=steps).map(|k| T::lit(k as f64) * dt).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Dense up to `dense_max_dim`, Krylov above.
    Auto,
    Krylov,
    Dense,
}

#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions<T> {
    pub method: Method,
    /// Maximal Krylov subspace dimension.
    pub krylov_dim: usize,
    /// Target error per Krylov substep.
    pub tol: T,
    pub dense_max_dim: usize,
}

impl<T: Real> Default for EvolveOptions<T> {
    fn default() -> Self {
        Self { method: Method::Auto, krylov_dim: 30, tol: T::lit(1e-10), dense_max_dim: 2048 }
    }
}

impl<T: Real> EvolveOptions<T> {
    pub fn krylov() -> Self {
        Self { method: Method::Krylov, ..Self::default() }
    }

    pub fn dense() -> Self {
        Self { method: Method::Dense, ..Self::default() }
    }

    fn use_dense(&self, dim: usize) -> bool {
        match self.method {
            Method::Dense => true,
            Method::Krylov => false,
            Method::Auto => dim <= self.dense_max_dim,
        }
    }
}

/// Lanczos propagator for a hermitian sparse operator.
pub struct KrylovPropagator<'a, T> {
    h: &'a SparseOperator<T>,
    max_dim: usize,
    tol: T,
    basis: Vec<Vec<Complex<T>>>,
    w: Vec<Complex<T>>,
    matvecs: usize,
}

impl<'a, T: Real> KrylovPropagator<'a, T> {
    pub fn new(h: &'a SparseOperator<T>, max_dim: usize, tol: T) -> Result<Self> {
        if !h.is_hermitian() {
            return Err(Error::NotHermitian);
        }
        let max_dim = max_dim.max(2).min(h.dim().max(1));
        Ok(Self {
            h,
            max_dim,
            tol,
            basis: Vec::with_capacity(max_dim + 1),
            w: vec![Complex::new(T::zero(), T::zero()); h.dim()],
            matvecs: 0,
        })
    }

    pub fn matvecs(&self) -> usize {
        self.matvecs
    }

    /// Advances `psi` by `dt` (any sign).
    pub fn step(&mut self, psi: &mut [Complex<T>], dt: T) -> Result<()> {
        let mut remaining = dt;
        let mut guard = 0usize;
        while remaining != T::zero() {
            let done = self.substep(psi, remaining)?;
            remaining -= done;
            guard += 1;
            if guard > 1_000_000 {
                return Err(Error::KrylovBreakdown { residual: f64::NAN });
            }
            if remaining.abs() <= dt.abs() * T::eps() * T::lit(8.0) {
                break;
            }
        }
        Ok(())
    }

    /// Takes one Krylov step of at most `tau`; returns the length actually taken.
    fn substep(&mut self, psi: &mut [Complex<T>], tau: T) -> Result<T> {
        let beta0 = norm(psi);
        if beta0 == T::zero() {
            return Ok(tau);
        }
        let zero = Complex::new(T::zero(), T::zero());
        self.basis.clear();
        let mut v0: Vec<Complex<T>> = psi.to_vec();
        scale(beta0.recip(), &mut v0);
        self.basis.push(v0);

        let mut alpha: Vec<T> = Vec::with_capacity(self.max_dim);
        let mut beta: Vec<T> = Vec::with_capacity(self.max_dim);
        loop {
            let j = alpha.len();
            self.h.apply(&self.basis[j], &mut self.w);
            self.matvecs += 1;
            let a = dot(&self.basis[j], &self.w).re;
            alpha.push(a);
            axpy(Complex::new(-a, T::zero()), &self.basis[j], &mut self.w);
            if j > 0 {
                axpy(Complex::new(-beta[j - 1], T::zero()), &self.basis[j - 1], &mut self.w);
            }
            // full reorthogonalization, two passes
            for _ in 0..2 {
                for v in &self.basis {
                    let c = dot(v, &self.w);
                    axpy(-c, v, &mut self.w);
                }
            }
            let b = norm(&self.w);
            let m = alpha.len();
            let spread = alpha.iter().chain(beta.iter()).fold(T::one(), |acc, x| acc.max(x.abs()));
            let invariant = b <= spread * T::eps() * T::lit(64.0);

            let (evals, evecs) = tridiagonal_eigen(&alpha, &beta);
            let estimate = |t: T| -> T {
                if invariant {
                    T::zero()
                } else {
                    beta0 * b * abs2(small_exp(&evals, &evecs, t)[m - 1]).sqrt()
                }
            };

            let converged = estimate(tau) <= self.tol;
            if converged || invariant || m == self.max_dim {
                let mut t = tau;
                let mut halvings = 0;
                while estimate(t) > self.tol {
                    t = t * T::lit(0.5);
                    halvings += 1;
                    if halvings > 60 {
                        return Err(Error::KrylovBreakdown { residual: estimate(t).as_f64() });
                    }
                }
                let c = small_exp(&evals, &evecs, t);
                for x in psi.iter_mut() {
                    *x = zero;
                }
                for (k, ck) in c.iter().enumerate() {
                    axpy(*ck * beta0, &self.basis[k], psi);
                }
                return Ok(t);
            }

            beta.push(b);
            let mut next = std::mem::replace(&mut self.w, vec![zero; self.h.dim()]);
            scale(b.recip(), &mut next);
            self.basis.push(next);
        }
    }
}

pub(crate) fn tridiagonal_eigen<T: Real>(alpha: &[T], beta: &[T]) -> (Vec<T>, DMatrix<T>) {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// `exp(-i t T) e_1` from the eigendecomposition of `T`.
fn small_exp<T: Real>(evals: &[T], evecs: &DMatrix<T>, t: T) -> Vec<Complex<T>> {
    let m = evals.len();
    let mut out = vec![Complex::new(T::zero(), T::zero()); m];
    for k in 0..m {
        let w = phase(evals[k] * t) * evecs[(0, k)];
        for (i, o) in out.iter_mut().enumerate() {
            *o += w * evecs[(i, k)];
        }
    }
    out
}

/// Eigendecomposition-based propagator for real symmetric operators.
pub struct DensePropagator<T> {
    energies: Vec<T>,
    vectors: DMatrix<T>,
}

impl<T: Real> DensePropagator<T> {
    pub fn new(h: &SparseOperator<T>) -> Result<Self> {
        if !h.is_hermitian() {
            return Err(Error::NotHermitian);
        }
        if !h.is_real() {
            return Err(Error::InvalidParameter("dense propagation needs a real symmetric operator".into()));
        }
        let eig = SymmetricEigen::new(h.to_dense_real());
        Ok(Self { energies: eig.eigenvalues.iter().copied().collect(), vectors: eig.eigenvectors })
    }

    pub fn energies(&self) -> &[T] {
        &self.energies
    }

    /// Eigenbasis coefficients `<E_k|psi>`.
    pub fn coefficients(&self, psi: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.energies.len();
        (0..n)
            .map(|k| {
                let col = self.vectors.column(k);
                psi.iter().zip(col.iter()).fold(Complex::new(T::zero(), T::zero()), |acc, (p, &v)| acc + *p * v)
            })
            .collect()
    }

    /// `exp(-iHt) psi` given the eigenbasis coefficients of `psi`.
    pub fn propagate_coefficients(&self, coeffs: &[Complex<T>], t: T) -> Vec<Complex<T>> {
        let n = self.energies.len();
        let rotated: Vec<Complex<T>> =
            coeffs.iter().zip(&self.energies).map(|(c, &e)| *c * phase(e * t)).collect();
        let mut out = vec![Complex::new(T::zero(), T::zero()); n];
        for (k, ck) in rotated.iter().enumerate() {
            let col = self.vectors.column(k);
            for (o, &v) in out.iter_mut().zip(col.iter()) {
                *o += *ck * v;
            }
        }
        out
    }

    pub fn propagate(&self, psi: &[Complex<T>], t: T) -> Vec<Complex<T>> {
        self.propagate_coefficients(&self.coefficients(psi), t)
    }
}

fn check_inputs<T: Real>(h: &SparseOperator<T>, psi0: &StateVector<T>) -> Result<()> {
    if !h.is_hermitian() {
        return Err(Error::NotHermitian);
    }
    if psi0.dim() != h.dim() {
        return Err(Error::LengthMismatch { expected: h.dim(), found: psi0.dim() });
    }
    psi0.check_normalized()
}

/// Evolves `psi0` through `times` (in order, any sign), calling `visit(k, t, psi(t))`.
pub fn evolve_visit<T: Real>(
    h: &SparseOperator<T>,
    psi0: &StateVector<T>,
    times: &[T],
    opts: &EvolveOptions<T>,
    mut visit: impl FnMut(usize, T, &[Complex<T>]),
) -> Result<()> {
    check_inputs(h, psi0)?;
    if opts.use_dense(h.dim()) && h.is_real() {
        let prop = DensePropagator::new(h)?;
        let coeffs = prop.coefficients(psi0.amplitudes());
        for (k, &t) in times.iter().enumerate() {
            visit(k, t, &prop.propagate_coefficients(&coeffs, t));
        }
        return Ok(());
    }
    let mut prop = KrylovPropagator::new(h, opts.krylov_dim, opts.tol)?;
    let mut psi = psi0.amplitudes().to_vec();
    let mut now = T::zero();
    for (k, &t) in times.iter().enumerate() {
        if t != now {
            prop.step(&mut psi, t - now)?;
            now = t;
        }
        visit(k, t, &psi);
    }
    Ok(())
}

/// States `exp(-iHt) psi0` at each of `times`.
pub fn evolve<T: Real>(
    h: &SparseOperator<T>,
    psi0: &StateVector<T>,
    times: &[T],
    opts: &EvolveOptions<T>,
) -> Result<Vec<StateVector<T>>> {
    let mut out = Vec::with_capacity(times.len());
    evolve_visit(h, psi0, times, opts, |_, _, psi| out.push(StateVector::from_amplitudes(psi.to_vec())))?;
    Ok(out)
}

/// Return probability `F(t) = |<psi0|psi(t)>|^2` on a uniform grid.
pub fn fidelity_series<T: Real>(
    h: &SparseOperator<T>,
    psi0: &StateVector<T>,
    t_max: T,
    dt: T,
    opts: &EvolveOptions<T>,
) -> Result<TimeSeries<T>> {
    let times = time_grid(t_max, dt)?;
    check_inputs(h, psi0)?;
    if opts.use_dense(h.dim()) && h.is_real() {
        // only the spectral weights of psi0 are needed
        let prop = DensePropagator::new(h)?;
        let weights: Vec<T> = prop.coefficients(psi0.amplitudes()).into_iter().map(abs2).collect();
        let values = times
            .iter()
            .map(|&t| {
                let amp = weights
                    .iter()
                    .zip(prop.energies())
                    .fold(Complex::new(T::zero(), T::zero()), |acc, (&w, &e)| acc + phase(e * t) * w);
                abs2(amp)
            })
            .collect();
        return Ok(TimeSeries { times, values });
    }
    let mut values = Vec::with_capacity(times.len());
    evolve_visit(h, psi0, &times, opts, |_, _, psi| values.push(abs2(dot(psi0.amplitudes(), psi))))?;
    Ok(TimeSeries { times, values })
}

/// `<psi(t)|O|psi(t)>` for several observables at once.
pub fn observables_series<T: Real>(
    h: &SparseOperator<T>,
    psi0: &StateVector<T>,
    observables: &[&SparseOperator<T>],
    times: &[T],
    opts: &EvolveOptions<T>,
) -> Result<Vec<TimeSeries<T>>> {
    for o in observables {
        if o.dim() != h.dim() {
            return Err(Error::LengthMismatch { expected: h.dim(), found: o.dim() });
        }
    }
    let mut values = vec![Vec::with_capacity(times.len()); observables.len()];
    let mut failure = None;
    evolve_visit(h, psi0, times, opts, |_, _, psi| {
        for (o, vals) in observables.iter().zip(values.iter_mut()) {
            let e = o.expectation(psi);
            let tol = T::lit(1e-8).max(T::eps().sqrt());
            if o.is_hermitian() && e.im.abs() > tol && failure.is_none() {
                failure = Some(e.im.as_f64());
            }
            vals.push(e.re);
        }
    })?;
    if let Some(im) = failure {
        return Err(Error::InvalidParameter(format!("hermitian expectation has imaginary part {im:e}")));
    }
    Ok(values.into_iter().map(|v| TimeSeries { times: times.to_vec(), values: v }).collect())
}

/// `<psi(t)|O|psi(t)>` on a uniform grid.
pub fn observable_series<T: Real>(
    h: &SparseOperator<T>,
    psi0: &StateVector<T>,
    observable: &SparseOperator<T>,
    t_max: T,
    dt: T,
    opts: &EvolveOptions<T>,
) -> Result<TimeSeries<T>> {
    let times = time_grid(t_max, dt)?;
    Ok(observables_series(h, psi0, &[observable], &times, opts)?.remove(0))
}
