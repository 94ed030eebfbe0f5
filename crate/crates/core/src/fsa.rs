//! Forward-scattering (FSA) subspaces, subspace variance and su(2) comparisons.
//!
//! The subspace is stitched from two chains: `(H+)^n |M_A>` for the first
//! `len_a` vectors, `(H-)^n |M_B>` for the last `len_b` vectors (stored in
//! reverse, so the final vector is `M_B`), and one middle vector
//! `H+|last A> + H-|last B>`, normalized. Chain vectors from different vacua
//! live at different Hamming distances from `M_A` and are exactly orthogonal.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::basis::{maximally_excited, ConstrainedBasis};
use crate::eigen::SpectrumResult;
use crate::error::{Error, Result};
use crate::evolve::{observables_series, EvolveOptions, StateVector, TimeSeries};
use crate::lattice::{LatticeKind, SiteGraph, Sublattice};
use crate::num::{abs2, dot, norm, scale, Complex, Real};
use crate::operators::{build_hamiltonian, split_pm, ModelSpec, SparseOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsaLabel {
    ASide,
    Middle,
    BSide,
}

/// Orthonormal stitched FSA basis `|0> = M_A, ..., |N> = M_B`.
#[derive(Debug, Clone)]
pub struct FsaBasis<T> {
    vectors: Vec<Vec<Complex<T>>>,
    labels: Vec<FsaLabel>,
    prenorms_a: Vec<T>,
    prenorms_b: Vec<T>,
}

impl<T: Real> FsaBasis<T> {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vector(&self, n: usize) -> &[Complex<T>] {
        &self.vectors[n]
    }

    pub fn state(&self, n: usize) -> StateVector<T> {
        StateVector::from_amplitudes(self.vectors[n].clone())
    }

    pub fn labels(&self) -> &[FsaLabel] {
        &self.labels
    }

    /// `||(H+)^n M_A||` for `n = 0..=len_a` (the last entry is the norm of the
    /// A-side contribution to the middle vector).
    pub fn prenorms_a(&self) -> &[T] {
        &self.prenorms_a
    }

    /// `||(H-)^n M_B||` for `n = 0..=len_b`.
    pub fn prenorms_b(&self) -> &[T] {
        &self.prenorms_b
    }

    /// Per-step norms `||H+|n-1>||` (normalized `|n-1>`) for `n = 1..=len_a`.
    pub fn step_norms_a(&self) -> Vec<T> {
        self.prenorms_a.windows(2).map(|w| w[1] / w[0]).collect()
    }

    /// Per-step norms `||H-|n-1>||` along the B chain.
    pub fn step_norms_b(&self) -> Vec<T> {
        self.prenorms_b.windows(2).map(|w| w[1] / w[0]).collect()
    }

    /// Gram matrix `<m|n>`.
    pub fn gram(&self) -> DMatrix<Complex<T>> {
        let k = self.len();
        DMatrix::from_fn(k, k, |i, j| dot(&self.vectors[i], &self.vectors[j]))
    }
}

/// Runs a chain of `len` steps from `vac`; returns the normalized vectors, the
/// cumulative prenorms and the unnormalized image of the last vector.
fn chain<T: Real>(
    op: &SparseOperator<T>,
    vac: &[Complex<T>],
    len: usize,
) -> Result<(Vec<Vec<Complex<T>>>, Vec<T>, Vec<Complex<T>>)> {
    let mut vecs = vec![vac.to_vec()];
    let mut pre = vec![T::one()];
    let mut next = op.apply_vec(vac);
    for step in 1..=len {
        let nrm = norm(&next);
        let prenorm = *pre.last().unwrap() * nrm;
        if !(nrm > T::eps().sqrt() * T::eps().sqrt()) {
            return Err(Error::VanishingPrenorm { step });
        }
        pre.push(prenorm);
        if step == len {
            break;
        }
        scale(nrm.recip(), &mut next);
        let following = op.apply_vec(&next);
        vecs.push(std::mem::replace(&mut next, following));
    }
    Ok((vecs, pre, next))
}

/// Stitched basis with `len_a` A-side and `len_b` B-side vectors plus the middle one.
pub fn build_fsa_stitched<T: Real>(
    hp: &SparseOperator<T>,
    hm: &SparseOperator<T>,
    m_a: &StateVector<T>,
    m_b: &StateVector<T>,
    len_a: usize,
    len_b: usize,
) -> Result<FsaBasis<T>> {
    if len_a == 0 || len_b == 0 {
        return Err(Error::InvalidParameter("both FSA chains need at least one vector".into()));
    }
    for op in [hp, hm] {
        if op.dim() != m_a.dim() || op.dim() != m_b.dim() {
            return Err(Error::LengthMismatch { expected: op.dim(), found: m_a.dim().max(m_b.dim()) });
        }
    }
    m_a.check_normalized()?;
    m_b.check_normalized()?;
    let (va, pa, ta) = chain(hp, m_a.amplitudes(), len_a)?;
    let (vb, pb, tb) = chain(hm, m_b.amplitudes(), len_b)?;
    let mut middle: Vec<Complex<T>> = ta.iter().zip(&tb).map(|(x, y)| *x + *y).collect();
    let nrm = norm(&middle);
    if !(nrm > T::eps().sqrt() * T::eps().sqrt()) {
        return Err(Error::VanishingPrenorm { step: len_a });
    }
    scale(nrm.recip(), &mut middle);

    let mut vectors = va;
    let mut labels = vec![FsaLabel::ASide; len_a];
    vectors.push(middle);
    labels.push(FsaLabel::Middle);
    vectors.extend(vb.into_iter().rev());
    labels.extend(std::iter::repeat_n(FsaLabel::BSide, len_b));
    Ok(FsaBasis { vectors, labels, prenorms_a: pa, prenorms_b: pb })
}

/// Equal-sublattice lattices: `N/2` vectors from each vacuum plus the middle one.
pub fn build_fsa_symmetric<T: Real>(
    hp: &SparseOperator<T>,
    hm: &SparseOperator<T>,
    m_a: &StateVector<T>,
    m_b: &StateVector<T>,
    n_sites: usize,
) -> Result<FsaBasis<T>> {
    if n_sites < 2 || n_sites % 2 != 0 {
        return Err(Error::InvalidParameter(format!("symmetric FSA needs an even site count, got {n_sites}")));
    }
    build_fsa_stitched(hp, hm, m_a, m_b, n_sites / 2, n_sites / 2)
}

/// Decorated honeycomb: `3N/5` A-side and `2N/5` B-side vectors plus the middle one.
pub fn build_fsa_decorated<T: Real>(
    hp: &SparseOperator<T>,
    hm: &SparseOperator<T>,
    m_a: &StateVector<T>,
    m_b: &StateVector<T>,
    n_sites: usize,
) -> Result<FsaBasis<T>> {
    if n_sites == 0 || n_sites % 5 != 0 {
        return Err(Error::InvalidParameter(format!("decorated FSA needs N divisible by 5, got {n_sites}")));
    }
    build_fsa_stitched(hp, hm, m_a, m_b, 3 * n_sites / 5, 2 * n_sites / 5)
}

/// Builds the FSA basis appropriate for the lattice of `graph`.
pub fn build_fsa_for<T: Real>(
    graph: &SiteGraph,
    basis: &ConstrainedBasis,
    hp: &SparseOperator<T>,
    hm: &SparseOperator<T>,
) -> Result<FsaBasis<T>> {
    let m_a = StateVector::from_config(basis, maximally_excited(graph, Sublattice::A))?;
    let m_b = StateVector::from_config(basis, maximally_excited(graph, Sublattice::B))?;
    let n_a = graph.sites_of(Sublattice::A).count();
    let n_b = graph.sites_of(Sublattice::B).count();
    if graph.kind() == LatticeKind::DecoratedHoneycomb {
        build_fsa_decorated(hp, hm, &m_a, &m_b, graph.n_sites())
    } else {
        build_fsa_stitched(hp, hm, &m_a, &m_b, n_a, n_b)
    }
}

fn projected<T: Real>(h: &SparseOperator<T>, fsa: &FsaBasis<T>) -> Result<(Vec<Vec<Complex<T>>>, DMatrix<Complex<T>>)> {
    if fsa.is_empty() || fsa.vectors[0].len() != h.dim() {
        return Err(Error::LengthMismatch { expected: h.dim(), found: fsa.vectors.first().map_or(0, |v| v.len()) });
    }
    let images: Vec<Vec<Complex<T>>> = fsa.vectors.iter().map(|v| h.apply_vec(v)).collect();
    let k = fsa.len();
    let ph = DMatrix::from_fn(k, k, |m, n| dot(&fsa.vectors[m], &images[n]));
    Ok((images, ph))
}

/// `(leakage, literal)`: `sum_n ||(1-Q) H|n>||^2` and `Tr(Q H^2) - (Tr Q H)^2`.
pub fn subspace_variance<T: Real>(h: &SparseOperator<T>, fsa: &FsaBasis<T>) -> Result<(T, T)> {
    let (images, ph) = projected(h, fsa)?;
    let total: T = images.iter().fold(T::zero(), |acc, v| acc + dot(v, v).re);
    let inside: T = ph.iter().fold(T::zero(), |acc, &z| acc + abs2(z));
    let trace: T = (0..fsa.len()).fold(T::zero(), |acc, n| acc + ph[(n, n)].re);
    let leakage = (total - inside).max(T::zero());
    Ok((leakage, total - trace * trace))
}

#[derive(Debug, Clone)]
pub struct SubspaceDiagnostics<T: Real> {
    pub variance: T,
    pub literal: T,
    /// `<m|H|n>` in the FSA basis.
    pub projected_h: DMatrix<Complex<T>>,
    /// Eigenvalues of the projected Hamiltonian, ascending.
    pub mode_energies: Vec<T>,
    /// Per mode, the largest `|<e|E>|^2` over the exact eigenstates (if a
    /// spectrum was supplied).
    pub eigenmode_overlaps: Option<Vec<T>>,
}

pub fn projected_spectrum<T: Real>(
    h: &SparseOperator<T>,
    fsa: &FsaBasis<T>,
    spectrum: Option<&SpectrumResult<T>>,
) -> Result<SubspaceDiagnostics<T>> {
    let (variance, literal) = subspace_variance(h, fsa)?;
    let (_, ph) = projected(h, fsa)?;
    let hermitian = (&ph + ph.adjoint()).scale(T::lit(0.5));
    let eig = nalgebra::SymmetricEigen::new(hermitian);
    let mut order: Vec<usize> = (0..fsa.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let mode_energies = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenmode_overlaps = match spectrum {
        None => None,
        Some(s) => {
            if s.dim() != h.dim() {
                return Err(Error::LengthMismatch { expected: h.dim(), found: s.dim() });
            }
            let zero = Complex::new(T::zero(), T::zero());
            let modes: Vec<Vec<Complex<T>>> = order
                .iter()
                .map(|&k| {
                    let mut v = vec![zero; h.dim()];
                    for (n, basis_vec) in fsa.vectors.iter().enumerate() {
                        let c = eig.eigenvectors[(n, k)];
                        for (o, &b) in v.iter_mut().zip(basis_vec) {
                            *o += c * b;
                        }
                    }
                    v
                })
                .collect();
            Some(
                modes
                    .par_iter()
                    .map(|mode| {
                        (0..s.dim()).fold(T::zero(), |best, j| {
                            let col = s.vectors.column(j);
                            let ov = mode.iter().zip(col.iter()).fold(zero, |acc, (m, &e)| acc + *m * e);
                            best.max(abs2(ov))
                        })
                    })
                    .collect(),
            )
        }
    };
    Ok(SubspaceDiagnostics { variance, literal, projected_h: ph, mode_energies, eigenmode_overlaps })
}

/// `(omega_s, omega_general)`: the A-sublattice frequency equating the first
/// FSA prenorms, `sqrt(|B| / |A|)`, and `sqrt(c_A / c_B)` from the sublattice
/// connectivities.
pub fn frequency_criteria(graph: &SiteGraph) -> Result<(f64, f64)> {
    let c_a = graph.uniform_connectivity(Sublattice::A)?;
    let c_b = graph.uniform_connectivity(Sublattice::B)?;
    let n_a = graph.sites_of(Sublattice::A).count();
    let n_b = graph.sites_of(Sublattice::B).count();
    Ok(((n_b as f64 / n_a as f64).sqrt(), (c_a as f64 / c_b as f64).sqrt()))
}

/// Leakage of the FSA subspace of the model `model` on `graph`.
pub fn model_leakage<T: Real>(graph: &SiteGraph, basis: &ConstrainedBasis, model: &ModelSpec<T>) -> Result<T> {
    let h = build_hamiltonian(graph, basis, model)?;
    let (hp, hm) = split_pm(graph, basis, model)?;
    let fsa = build_fsa_for(graph, basis, &hp, &hm)?;
    Ok(subspace_variance(&h, &fsa)?.0)
}

/// Vertex of the parabola through three equally spaced samples, as an offset
/// in units of the spacing from the middle sample (clamped to `[-1, 1]`).
pub fn parabolic_offset(y0: f64, y1: f64, y2: f64) -> f64 {
    let curv = y0 - 2.0 * y1 + y2;
    if curv > 0.0 {
        (0.5 * (y0 - y2) / curv).clamp(-1.0, 1.0)
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct Scan1d {
    pub points: Vec<f64>,
    pub values: Vec<f64>,
    /// Parabola-refined location of the minimum.
    pub argmin: f64,
    pub min: f64,
}

/// Evaluates `f` on `points` (equally spaced, ascending) in parallel.
pub fn variance_scan_1d(points: &[f64], f: impl Fn(f64) -> Result<f64> + Sync) -> Result<Scan1d> {
    if points.is_empty() {
        return Err(Error::InvalidParameter("empty scan grid".into()));
    }
    let values: Vec<f64> = points.par_iter().map(|&x| f(x)).collect::<Result<_>>()?;
    let k = argmin_index(&values);
    let mut argmin = points[k];
    if k > 0 && k + 1 < points.len() {
        argmin += parabolic_offset(values[k - 1], values[k], values[k + 1]) * (points[k + 1] - points[k]);
    }
    Ok(Scan1d { points: points.to_vec(), min: values[k], values, argmin })
}

#[derive(Debug, Clone)]
pub struct Scan2d {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `values[i][j] = f(xs[i], ys[j])`.
    pub values: Vec<Vec<f64>>,
    /// Axis-wise parabola-refined location of the minimum.
    pub argmin: (f64, f64),
    pub min: f64,
}

/// Evaluates `f` on the tensor grid `xs x ys` in parallel.
pub fn variance_scan_2d(xs: &[f64], ys: &[f64], f: impl Fn(f64, f64) -> Result<f64> + Sync) -> Result<Scan2d> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::InvalidParameter("empty scan grid".into()));
    }
    let flat: Vec<f64> = (0..xs.len() * ys.len())
        .into_par_iter()
        .map(|k| f(xs[k / ys.len()], ys[k % ys.len()]))
        .collect::<Result<_>>()?;
    let values: Vec<Vec<f64>> = flat.chunks(ys.len()).map(|c| c.to_vec()).collect();
    let k = argmin_index(&flat);
    let (i, j) = (k / ys.len(), k % ys.len());
    let mut ax = xs[i];
    let mut ay = ys[j];
    if i > 0 && i + 1 < xs.len() {
        ax += parabolic_offset(values[i - 1][j], values[i][j], values[i + 1][j]) * (xs[i + 1] - xs[i]);
    }
    if j > 0 && j + 1 < ys.len() {
        ay += parabolic_offset(values[i][j - 1], values[i][j], values[i][j + 1]) * (ys[j + 1] - ys[j]);
    }
    Ok(Scan2d { xs: xs.to_vec(), ys: ys.to_vec(), min: flat[k], values, argmin: (ax, ay) })
}

fn argmin_index(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(0, |best, (k, &v)| if v < values[best] || values[best].is_nan() { k } else { best })
}

/// Exact spin-`N/2` generators in the FSA convention: `hp = S-/2` moves away
/// from the highest weight (index 0), `hm = S+/2`, and `h = S^x = hp + hm`.
pub struct Su2Generators<T> {
    pub hp: SparseOperator<T>,
    pub hm: SparseOperator<T>,
    pub h: SparseOperator<T>,
}

pub fn spin_operators<T: Real>(n_sites: usize) -> Su2Generators<T> {
    let dim = n_sites + 1;
    let j = n_sites as f64 / 2.0;
    // index k has m = j - k; S-|m> = sqrt(j(j+1) - m(m-1)) |m-1>
    let mut down: Vec<Vec<(usize, T)>> = vec![Vec::new(); dim];
    for (k, row) in down.iter_mut().enumerate().skip(1) {
        let m = j - (k as f64 - 1.0);
        row.push((k - 1, T::lit(0.5 * (j * (j + 1.0) - m * (m - 1.0)).sqrt())));
    }
    let hp = SparseOperator::from_real_rows(dim, down, false);
    let hm = hp.adjoint();
    let h = hp.add(&hm).with_hermitian_flag(true);
    Su2Generators { hp, hm, h }
}

/// Return probability of the highest weight state under `S^x`: `cos(t/2)^(2N)`.
pub fn su2_reference_fidelity<T: Real>(n_sites: usize, times: &[T]) -> TimeSeries<T> {
    let values = times.iter().map(|&t| (t * T::lit(0.5)).cos().powi(2 * n_sites as i32)).collect();
    TimeSeries { times: times.to_vec(), values }
}

/// `<psi(t)|C|psi(t)>` along the evolution generated by `h`.
pub fn casimir_dynamics<T: Real>(
    h: &SparseOperator<T>,
    casimir: &SparseOperator<T>,
    psi0: &StateVector<T>,
    times: &[T],
    opts: &EvolveOptions<T>,
) -> Result<TimeSeries<T>> {
    Ok(observables_series(h, psi0, &[casimir], times, opts)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{enumerate_basis, Configuration};
    use crate::eigen::full_diagonalize;
    use crate::evolve::time_grid;
    use crate::lattice::{build_lattice, Boundary, LatticeSpec};
    use crate::operators::build_casimir;
    use approx::assert_abs_diff_eq;

    fn square4() -> (SiteGraph, ConstrainedBasis) {
        let g = build_lattice(LatticeSpec::square(4, Boundary::Periodic)).unwrap();
        let b = enumerate_basis(&g).unwrap();
        (g, b)
    }

    fn fsa_of(g: &SiteGraph, b: &ConstrainedBasis, m: &ModelSpec<f64>) -> (SparseOperator<f64>, FsaBasis<f64>) {
        let h = build_hamiltonian(g, b, m).unwrap();
        let (hp, hm) = split_pm(g, b, m).unwrap();
        (h, build_fsa_for(g, b, &hp, &hm).unwrap())
    }

    #[test]
    fn symmetric_basis_structure() {
        let (g, b) = square4();
        let (_, fsa) = fsa_of(&g, &b, &ModelSpec::uniform(16));
        assert_eq!(fsa.len(), 17);
        let ma = b.index_of(maximally_excited(&g, Sublattice::A)).unwrap();
        let mb = b.index_of(maximally_excited(&g, Sublattice::B)).unwrap();
        assert_abs_diff_eq!(fsa.vector(0)[ma].re, 1.0);
        assert_abs_diff_eq!(fsa.vector(16)[mb].re, 1.0);
        let gram = fsa.gram();
        for i in 0..17 {
            for j in 0..17 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(gram[(i, j)].re, target, epsilon = 1e-10);
                assert_abs_diff_eq!(gram[(i, j)].im, 0.0, epsilon = 1e-10);
            }
        }
        // |1> is the uniform superposition of the 8 single de-excitations of M_A
        let support: Vec<usize> = (0..b.dim()).filter(|&k| fsa.vector(1)[k].re.abs() > 1e-12).collect();
        assert_eq!(support.len(), 8);
        for &k in &support {
            assert_abs_diff_eq!(fsa.vector(1)[k].re, 1.0 / 8f64.sqrt(), epsilon = 1e-12);
            assert_eq!(b.config(k).hamming(Configuration(g.sublattice_mask(Sublattice::A))), 1);
        }
        assert_abs_diff_eq!(fsa.prenorms_a()[1], 8f64.sqrt(), epsilon = 1e-12);
        assert_eq!(fsa.labels()[8], FsaLabel::Middle);
    }

    #[test]
    fn projected_h_is_tridiagonal_away_from_stitch() {
        let (g, b) = square4();
        let (h, fsa) = fsa_of(&g, &b, &ModelSpec::uniform(16));
        let d = projected_spectrum(&h, &fsa, None).unwrap();
        for m in 0..17usize {
            for n in 0..17usize {
                if m.abs_diff(n) >= 2 {
                    assert!(d.projected_h[(m, n)].norm() < 1e-12);
                }
            }
        }
        assert!(d.variance > 0.0);
    }

    #[test]
    fn invariant_subspace_has_zero_leakage() {
        let s = spin_operators::<f64>(10);
        let ma = StateVector::basis_state(11, 0);
        let mb = StateVector::basis_state(11, 10);
        let fsa = build_fsa_symmetric(&s.hp, &s.hm, &ma, &mb, 10).unwrap();
        let (leak, _) = subspace_variance(&s.h, &fsa).unwrap();
        assert!(leak.abs() < 1e-10);
        let d = projected_spectrum(&s.h, &fsa, Some(&full_diagonalize(&s.h).unwrap())).unwrap();
        for o in d.eigenmode_overlaps.unwrap() {
            assert_abs_diff_eq!(o, 1.0, epsilon = 1e-10);
        }
        // spin-5 S^x spectrum: -5..5
        for (k, e) in d.mode_energies.iter().enumerate() {
            assert_abs_diff_eq!(*e, k as f64 - 5.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn su2_casimir_is_one() {
        let n = 8;
        let s = spin_operators::<f64>(n);
        let (_, c) = build_casimir(&s.hp, &s.hm, n, std::f64::consts::TAU).unwrap();
        assert!(c.max_abs_diff(&SparseOperator::identity(n + 1)) < 1e-12);
        let psi = StateVector::basis_state(n + 1, 0);
        let times = time_grid(10.0, 0.5).unwrap();
        let cs = casimir_dynamics(&s.h, &c, &psi, &times, &EvolveOptions::default()).unwrap();
        assert!(cs.values.iter().all(|&v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn su2_reference_matches_matrix_exponential() {
        for n in [2usize, 6] {
            let s = spin_operators::<f64>(n);
            let psi = StateVector::basis_state(n + 1, 0);
            let times = time_grid(7.0, 0.25).unwrap();
            let exact = crate::evolve::fidelity_series(&s.h, &psi, 7.0, 0.25, &EvolveOptions::dense()).unwrap();
            let closed = su2_reference_fidelity(n, &times);
            for (a, b) in exact.values.iter().zip(&closed.values) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
        let f = su2_reference_fidelity(2, &[0.0, std::f64::consts::PI, std::f64::consts::TAU]);
        assert_abs_diff_eq!(f.values[0], 1.0);
        assert_abs_diff_eq!(f.values[1], 0.0, epsilon = 1e-30);
        assert_abs_diff_eq!(f.values[2], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn decorated_chain_and_norm_matching() {
        let g = build_lattice(LatticeSpec::decorated(2)).unwrap();
        let b = enumerate_basis(&g).unwrap();
        let (ws, wg) = frequency_criteria(&g).unwrap();
        assert_abs_diff_eq!(ws, (2.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(wg, (2.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        for omega in [0.7, ws, 1.0] {
            let m = ModelSpec::two_frequency(&g, omega, 1.0);
            let (_, fsa) = fsa_of(&g, &b, &m);
            assert_eq!(fsa.len(), 21);
            let ratio = fsa.prenorms_a()[1] / fsa.prenorms_b()[1];
            assert_abs_diff_eq!(ratio, omega * 12f64.sqrt() / 8f64.sqrt(), epsilon = 1e-10);
        }
        let (_, fsa) = fsa_of(&g, &b, &ModelSpec::two_frequency(&g, ws, 1.0));
        let (sa, sb) = (fsa.step_norms_a(), fsa.step_norms_b());
        for n in 0..8 {
            let r = sa[n] / sb[n];
            assert!((r - 1.0).abs() < 0.15, "step {} ratio {r}", n + 1);
        }
    }

    #[test]
    fn frequency_criteria_symmetric_and_errors() {
        let g = build_lattice(LatticeSpec::honeycomb(3)).unwrap();
        assert_eq!(frequency_criteria(&g).unwrap(), (1.0, 1.0));
        let g = build_lattice(LatticeSpec::square(4, Boundary::Open)).unwrap();
        assert!(frequency_criteria(&g).is_err());
    }

    #[test]
    fn scans_and_refinement() {
        let s = variance_scan_1d(&[0.0, 0.1, 0.2, 0.3, 0.4], |x| Ok((x - 0.23) * (x - 0.23))).unwrap();
        assert_abs_diff_eq!(s.argmin, 0.23, epsilon = 1e-12);
        let flat = variance_scan_1d(&[0.0, 1.0, 2.0], |_| Ok(1.0)).unwrap();
        assert!(flat.values.iter().all(|&v| v == 1.0));
        let s2 = variance_scan_2d(&[0.0, 0.1, 0.2], &[0.0, 0.5, 1.0, 1.5], |x, y| {
            Ok((x - 0.12).powi(2) + 3.0 * (y - 0.7).powi(2))
        })
        .unwrap();
        assert_abs_diff_eq!(s2.argmin.0, 0.12, epsilon = 1e-12);
        assert_abs_diff_eq!(s2.argmin.1, 0.7, epsilon = 1e-12);
        assert_eq!(s2.values.len(), 3);
    }

    #[test]
    fn deformation_reduces_leakage() {
        let (g, b) = square4();
        let l0 = model_leakage(&g, &b, &ModelSpec::<f64>::uniform(16)).unwrap();
        let l1 = model_leakage(&g, &b, &ModelSpec::<f64>::deformed(16, 0.0217, 0.0556)).unwrap();
        assert!(l1 < 0.1 * l0, "{l0} {l1}");
    }

    #[test]
    fn vanishing_prenorm_is_reported() {
        let z = SparseOperator::<f64>::zeros(3);
        let v = StateVector::basis_state(3, 0);
        assert_eq!(build_fsa_stitched(&z, &z, &v, &v, 1, 1).unwrap_err(), Error::VanishingPrenorm { step: 1 });
    }
}
