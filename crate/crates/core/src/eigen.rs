//! Full diagonalization, eigenstate entanglement and scar-band extraction.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::basis::ConstrainedBasis;
use crate::error::{Error, Result};
use crate::evolve::{tridiagonal_eigen, StateVector};
use crate::lattice::SiteGraph;
use crate::num::{abs2, axpy, dot, norm, scale, Complex, Real};
use crate::operators::SparseOperator;

/// Default cap on the dimension accepted by [`full_diagonalize`].
pub const DEFAULT_DENSE_CAP: usize = 20_000;

/// Default number of energy windows used by [`scar_band`].
pub const DEFAULT_WINDOWS: usize = 20;

/// Default overlap floor below which a window yields no band member.
pub const DEFAULT_OVERLAP_FLOOR: f64 = 1e-8;

/// Complete spectrum of a real symmetric operator, energies ascending.
#[derive(Debug, Clone)]
pub struct SpectrumResult<T: Real> {
    pub energies: Vec<T>,
    /// Column `k` is the eigenvector of `energies[k]`.
    pub vectors: DMatrix<T>,
}

impl<T: Real> SpectrumResult<T> {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn eigenstate(&self, k: usize) -> StateVector<T> {
        StateVector::from_amplitudes(
            self.vectors.column(k).iter().map(|&v| Complex::new(v, T::zero())).collect(),
        )
    }
}

pub fn full_diagonalize<T: Real>(h: &SparseOperator<T>) -> Result<SpectrumResult<T>> {
    full_diagonalize_capped(h, DEFAULT_DENSE_CAP)
}

pub fn full_diagonalize_capped<T: Real>(h: &SparseOperator<T>, cap: usize) -> Result<SpectrumResult<T>> {
    if h.dim() > cap {
        return Err(Error::DenseCap { dim: h.dim(), cap });
    }
    if !h.is_hermitian() {
        return Err(Error::NotHermitian);
    }
    if !h.is_real() {
        return Err(Error::InvalidParameter("full diagonalization needs a real symmetric operator".into()));
    }
    let eig = SymmetricEigen::new(h.to_dense_real());
    let mut order: Vec<usize> = (0..h.dim()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let energies = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = eig.eigenvectors.select_columns(order.iter());
    Ok(SpectrumResult { energies, vectors })
}

/// Split of the sites into a left part (mask bits set) and its complement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bipartition {
    n_sites: usize,
    left: u64,
}

impl Bipartition {
    pub fn new(n_sites: usize, left_sites: &[usize]) -> Result<Self> {
        let mut left = 0u64;
        for &s in left_sites {
            if s >= n_sites {
                return Err(Error::InvalidSite { index: s, n_sites });
            }
            left |= 1 << s;
        }
        Ok(Self { n_sites, left })
    }

    /// Cut between cell columns: sites with `x < lx / 2` form the left part.
    pub fn half_x(graph: &SiteGraph) -> Self {
        let half = graph.spec().lx / 2;
        let left = (0..graph.n_sites()).filter(|&s| graph.position(s).x < half).fold(0u64, |m, s| m | 1 << s);
        Self { n_sites: graph.n_sites(), left }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn left_mask(&self) -> u64 {
        self.left
    }

    pub fn right_mask(&self) -> u64 {
        let all = if self.n_sites == 64 { u64::MAX } else { (1u64 << self.n_sites) - 1 };
        all & !self.left
    }

    pub fn left_sites(&self) -> Vec<usize> {
        (0..self.n_sites).filter(|&s| self.left >> s & 1 == 1).collect()
    }

    pub fn right_sites(&self) -> Vec<usize> {
        (0..self.n_sites).filter(|&s| self.left >> s & 1 == 0).collect()
    }

    /// Same cut seen from the other side.
    pub fn swapped(&self) -> Self {
        Self { n_sites: self.n_sites, left: self.right_mask() }
    }
}

fn entropy_from_matrix<T: Real>(m: DMatrix<Complex<T>>) -> T {
    let sv = m.singular_values();
    sv.iter().fold(T::zero(), |acc, &s| {
        let p = s * s;
        if p > T::eps() * T::eps() {
            acc - p * p.ln()
        } else {
            acc
        }
    })
}

/// Von Neumann entropy (nats) of the left part of `state`.
pub fn entanglement_entropy<T: Real>(
    basis: &ConstrainedBasis,
    state: &StateVector<T>,
    cut: &Bipartition,
) -> Result<T> {
    if state.dim() != basis.dim() {
        return Err(Error::LengthMismatch { expected: basis.dim(), found: state.dim() });
    }
    if cut.n_sites() != basis.n_sites() {
        return Err(Error::LengthMismatch { expected: basis.n_sites(), found: cut.n_sites() });
    }
    state.check_normalized()?;
    let (lm, rm) = (cut.left_mask(), cut.right_mask());
    let mut left_index: HashMap<u64, usize> = HashMap::new();
    let mut right_index: HashMap<u64, usize> = HashMap::new();
    for &c in basis.configs() {
        let n = left_index.len();
        left_index.entry(c & lm).or_insert(n);
        let n = right_index.len();
        right_index.entry(c & rm).or_insert(n);
    }
    let mut m = DMatrix::from_element(left_index.len(), right_index.len(), Complex::new(T::zero(), T::zero()));
    for (&c, &amp) in basis.configs().iter().zip(state.amplitudes()) {
        m[(left_index[&(c & lm)], right_index[&(c & rm)])] = amp;
    }
    Ok(entropy_from_matrix(m))
}

/// Same entropy computed by embedding the state into the full `2^N` product
/// space. Only practical for small `N`; used as a cross-check.
pub fn entanglement_entropy_embedded<T: Real>(
    basis: &ConstrainedBasis,
    state: &StateVector<T>,
    cut: &Bipartition,
) -> Result<T> {
    let n = basis.n_sites();
    if n > 24 {
        return Err(Error::TooManySites(n));
    }
    if state.dim() != basis.dim() {
        return Err(Error::LengthMismatch { expected: basis.dim(), found: state.dim() });
    }
    state.check_normalized()?;
    let left = cut.left_sites();
    let right = cut.right_sites();
    let mut m = DMatrix::from_element(1 << left.len(), 1 << right.len(), Complex::new(T::zero(), T::zero()));
    let pack = |c: u64, sites: &[usize]| sites.iter().enumerate().fold(0usize, |acc, (k, &s)| acc | ((c >> s & 1) as usize) << k);
    for (&c, &amp) in basis.configs().iter().zip(state.amplitudes()) {
        m[(pack(c, &left), pack(c, &right))] = amp;
    }
    Ok(entropy_from_matrix(m))
}

/// Entropy of every eigenstate, computed in parallel.
pub fn eigenstate_entropies<T: Real>(
    basis: &ConstrainedBasis,
    spectrum: &SpectrumResult<T>,
    cut: &Bipartition,
) -> Result<Vec<T>> {
    (0..spectrum.dim())
        .into_par_iter()
        .map(|k| entanglement_entropy(basis, &spectrum.eigenstate(k), cut))
        .collect()
}

/// `|<E_k|target>|^2` for every eigenstate.
pub fn overlap_profile<T: Real>(spectrum: &SpectrumResult<T>, target: &StateVector<T>) -> Result<Vec<T>> {
    if target.dim() != spectrum.dim() {
        return Err(Error::LengthMismatch { expected: spectrum.dim(), found: target.dim() });
    }
    Ok((0..spectrum.dim())
        .map(|k| {
            let col = spectrum.vectors.column(k);
            abs2(target.amplitudes().iter().zip(col.iter()).fold(Complex::new(T::zero(), T::zero()), |acc, (a, &v)| acc + *a * v))
        })
        .collect())
}

/// Index of the largest overlap in each of `windows` equal-width energy
/// windows; windows whose best overlap is below `floor` contribute nothing.
pub fn scar_band<T: Real>(energies: &[T], overlaps: &[T], windows: usize, floor: T) -> Result<Vec<usize>> {
    if energies.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    if overlaps.len() != energies.len() {
        return Err(Error::LengthMismatch { expected: energies.len(), found: overlaps.len() });
    }
    if windows == 0 {
        return Err(Error::InvalidParameter("at least one energy window is needed".into()));
    }
    let lo = energies.iter().copied().fold(energies[0], |a, b| a.min(b));
    let hi = energies.iter().copied().fold(energies[0], |a, b| a.max(b));
    let width = (hi - lo) / T::lit(windows as f64);
    let mut best: Vec<Option<usize>> = vec![None; windows];
    for (k, (&e, &o)) in energies.iter().zip(overlaps).enumerate() {
        let w = if width > T::zero() {
            ((e - lo) / width).floor().as_f64().max(0.0).min((windows - 1) as f64) as usize
        } else {
            0
        };
        if o >= floor && best[w].is_none_or(|b| overlaps[b] < o) {
            best[w] = Some(k);
        }
    }
    Ok(best.into_iter().flatten().collect())
}

/// Ritz energies and weights of the spectral measure of `psi0` after `steps`
/// Lanczos iterations. The weights sum to one; isolated eigenstates with a large
/// overlap (scar towers) converge first, which makes this usable when the
/// dimension is too large for [`full_diagonalize`].
pub fn lanczos_spectral_overlaps<T: Real>(
    h: &SparseOperator<T>,
    psi0: &StateVector<T>,
    steps: usize,
) -> Result<(Vec<T>, Vec<T>)> {
    if !h.is_hermitian() {
        return Err(Error::NotHermitian);
    }
    if psi0.dim() != h.dim() {
        return Err(Error::LengthMismatch { expected: h.dim(), found: psi0.dim() });
    }
    psi0.check_normalized()?;
    let steps = steps.max(1).min(h.dim());
    let zero = Complex::new(T::zero(), T::zero());
    let mut vs: Vec<Vec<Complex<T>>> = vec![psi0.amplitudes().to_vec()];
    let mut alpha = Vec::new();
    let mut beta: Vec<T> = Vec::new();
    let mut w = vec![zero; h.dim()];
    loop {
        let j = alpha.len();
        h.apply(&vs[j], &mut w);
        let a = dot(&vs[j], &w).re;
        alpha.push(a);
        for _ in 0..2 {
            for v in &vs {
                let c = dot(v, &w);
                axpy(-c, v, &mut w);
            }
        }
        let b = norm(&w);
        if alpha.len() == steps || b <= T::eps().sqrt() * T::eps().sqrt() * T::lit(64.0) {
            break;
        }
        beta.push(b);
        let mut next = std::mem::replace(&mut w, vec![zero; h.dim()]);
        scale(b.recip(), &mut next);
        vs.push(next);
    }
    let (evals, evecs) = tridiagonal_eigen(&alpha, &beta);
    let mut pairs: Vec<(T, T)> = evals.iter().enumerate().map(|(k, &e)| (e, evecs[(0, k)] * evecs[(0, k)])).collect();
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    Ok(pairs.into_iter().unzip())
}
