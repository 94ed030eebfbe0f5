//! Hamiltonians and observables on the constrained space.
//!
//! Every Hamiltonian here has the form `H = sum_r freq[r] * X_r (1 + v_r)`, where
//! `X_r` flips site `r` only if all its neighbors are in the ground state and
//! `v_r` is a diagonal sum of ground-state projector products on the
//! next-nearest neighbors of `r` (zero for the undeformed model).

mod sparse;

pub use sparse::{SparseOperator, Values};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::basis::{ConstrainedBasis, Configuration};
use crate::error::{Error, Result};
use crate::lattice::{neighbor_rotations, LatticeKind, NeighborGroups, SiteClass, SiteGraph, Sublattice};
use crate::num::{abs2, dot, Complex, Real};

/// Deformation strengths. On the square lattice `a` multiplies the straight
/// projectors (and `2a` the diagonal ones) and `b` the triples; on the
/// honeycomb lattice `a` multiplies the single next-nearest-neighbor
/// projectors and `b` the pair products.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deformation<T> {
    pub a: T,
    pub b: T,
}

/// Per-site Rabi frequencies plus an optional deformation.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec<T> {
    pub freq: Vec<T>,
    pub deform: Option<Deformation<T>>,
}

impl<T: Real> ModelSpec<T> {
    /// Plain PXP model, all frequencies 1.
    pub fn uniform(n_sites: usize) -> Self {
        Self { freq: vec![T::one(); n_sites], deform: None }
    }

    pub fn deformed(n_sites: usize, a: T, b: T) -> Self {
        Self { freq: vec![T::one(); n_sites], deform: Some(Deformation { a, b }) }
    }

    /// Frequency `omega_a` on sublattice A and `omega_b` on B.
    pub fn two_frequency(graph: &SiteGraph, omega_a: T, omega_b: T) -> Self {
        let freq = (0..graph.n_sites())
            .map(|r| match graph.sublattice(r) {
                Sublattice::A => omega_a,
                Sublattice::B => omega_b,
            })
            .collect();
        Self { freq, deform: None }
    }

    /// Frequencies `1 - g_corner` on corner sites and `1 - g_edge` on edge sites.
    pub fn boundary_corrected(graph: &SiteGraph, g_corner: T, g_edge: T) -> Self {
        let freq = (0..graph.n_sites())
            .map(|r| match graph.site_class(r) {
                SiteClass::Corner => T::one() - g_corner,
                SiteClass::Edge => T::one() - g_edge,
                SiteClass::Bulk => T::one(),
            })
            .collect();
        Self { freq, deform: None }
    }

    pub fn with_deformation(mut self, a: T, b: T) -> Self {
        self.deform = Some(Deformation { a, b });
        self
    }

    pub fn validate(&self, graph: &SiteGraph) -> Result<()> {
        if self.freq.len() != graph.n_sites() {
            return Err(Error::LengthMismatch { expected: graph.n_sites(), found: self.freq.len() });
        }
        if self.freq.iter().any(|f| !f.is_finite()) {
            return Err(Error::InvalidParameter("non-finite frequency".into()));
        }
        if let Some(d) = self.deform {
            if !d.a.is_finite() || !d.b.is_finite() {
                return Err(Error::InvalidParameter("non-finite deformation coefficient".into()));
            }
        }
        Ok(())
    }
}

/// Diagonal dressing `v_r(c) = sum_k coeff_k [c & mask_k == 0]` for one site.
#[derive(Debug, Clone, Default)]
struct Dressing<T> {
    terms: Vec<(T, u64)>,
}

impl<T: Real> Dressing<T> {
    #[inline]
    fn eval(&self, c: u64) -> T {
        self.terms.iter().fold(T::zero(), |acc, &(w, m)| if c & m == 0 { acc + w } else { acc })
    }
}

fn dressings<T: Real>(graph: &SiteGraph, deform: Deformation<T>) -> Result<Vec<Dressing<T>>> {
    let bit = |s: usize| 1u64 << s;
    let two = T::lit(2.0);
    (0..graph.n_sites())
        .map(|r| {
            let mut terms = Vec::new();
            match neighbor_rotations(graph, r)? {
                NeighborGroups::Square(g) => {
                    terms.extend(g.straight.iter().flatten().map(|&s| (deform.a, bit(s))));
                    terms.extend(g.diagonal.iter().flatten().map(|&s| (two * deform.a, bit(s))));
                    terms.extend(
                        g.triples.iter().flatten().map(|t| (deform.b, bit(t[0]) | bit(t[1]) | bit(t[2]))),
                    );
                }
                NeighborGroups::Honeycomb(g) => {
                    terms.extend(g.singles.iter().map(|&s| (deform.a, bit(s))));
                    terms.extend(g.pairs.iter().map(|p| (deform.b, bit(p[0]) | bit(p[1]))));
                }
            }
            terms.retain(|t| t.0 != T::zero());
            Ok(Dressing { terms })
        })
        .collect()
}

/// Which single-site flips an operator keeps, seen from the row configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FlipFilter {
    All,
    /// Row configuration is one step further from `M_A` than the column one.
    Raising,
    /// Row configuration is one step closer to `M_A`.
    Lowering,
}

struct FlipModel<T> {
    freq: Vec<T>,
    dress: Option<Vec<Dressing<T>>>,
    /// add 1 to the dressing (full Hamiltonian) or use `v_r` alone
    include_bare: bool,
}

fn build_flip_operator<T: Real>(
    graph: &SiteGraph,
    basis: &ConstrainedBasis,
    model: &FlipModel<T>,
    filter: FlipFilter,
) -> SparseOperator<T> {
    let n = graph.n_sites();
    let nmask = graph.neighbor_masks();
    let a_mask = graph.sublattice_mask(Sublattice::A);
    let rows: Vec<Vec<(usize, T)>> = (0..basis.dim())
        .into_par_iter()
        .map(|k| {
            let c = basis.config(k).bits();
            let mut row = Vec::with_capacity(n);
            for r in 0..n {
                let excited = c >> r & 1 == 1;
                if !excited && c & nmask[r] != 0 {
                    continue;
                }
                let in_a = a_mask >> r & 1 == 1;
                // flipping r moves the row config towards M_A iff (r in A and ground) or (r in B and excited)
                let towards_a = in_a != excited;
                let keep = match filter {
                    FlipFilter::All => true,
                    FlipFilter::Raising => towards_a,
                    FlipFilter::Lowering => !towards_a,
                };
                if !keep {
                    continue;
                }
                let v = model.dress.as_ref().map_or(T::zero(), |d| d[r].eval(c));
                let amp = model.freq[r] * if model.include_bare { T::one() + v } else { v };
                if amp != T::zero() {
                    let target = basis.index_of(Configuration(c ^ (1u64 << r))).expect("flip stays legal");
                    row.push((target, amp));
                }
            }
            row
        })
        .collect();
    SparseOperator::from_real_rows(basis.dim(), rows, filter == FlipFilter::All)
}

fn check_basis(graph: &SiteGraph, basis: &ConstrainedBasis) -> Result<()> {
    if graph.n_sites() != basis.n_sites() {
        return Err(Error::LengthMismatch { expected: graph.n_sites(), found: basis.n_sites() });
    }
    Ok(())
}

fn flip_model<T: Real>(graph: &SiteGraph, model: &ModelSpec<T>) -> Result<FlipModel<T>> {
    model.validate(graph)?;
    let dress = match model.deform {
        None => None,
        Some(d) => match graph.kind() {
            LatticeKind::DecoratedHoneycomb => {
                return Err(Error::WrongLattice {
                    expected: "square or honeycomb".into(),
                    found: graph.kind().to_string(),
                })
            }
            _ => Some(dressings(graph, d)?),
        },
    };
    Ok(FlipModel { freq: model.freq.clone(), dress, include_bare: true })
}

/// Full Hamiltonian `sum_r freq[r] X_r (1 + v_r)` for `model`.
pub fn build_hamiltonian<T: Real>(
    graph: &SiteGraph,
    basis: &ConstrainedBasis,
    model: &ModelSpec<T>,
) -> Result<SparseOperator<T>> {
    check_basis(graph, basis)?;
    Ok(build_flip_operator(graph, basis, &flip_model(graph, model)?, FlipFilter::All))
}

/// PXP Hamiltonian with per-site frequencies.
pub fn build_pxp<T: Real>(graph: &SiteGraph, basis: &ConstrainedBasis, freq: &[T]) -> Result<SparseOperator<T>> {
    build_hamiltonian(graph, basis, &ModelSpec { freq: freq.to_vec(), deform: None })
}

/// Square-lattice deformation `V = sum_r X_r (a P^l + 2a P^d + b P^3)` on its own.
/// Terms that reference sites missing under open boundaries are dropped.
pub fn build_deformation_square<T: Real>(
    graph: &SiteGraph,
    basis: &ConstrainedBasis,
    a: T,
    b: T,
) -> Result<SparseOperator<T>> {
    check_basis(graph, basis)?;
    if graph.kind() != LatticeKind::Square {
        return Err(Error::WrongLattice { expected: "square".into(), found: graph.kind().to_string() });
    }
    let model = FlipModel {
        freq: vec![T::one(); graph.n_sites()],
        dress: Some(dressings(graph, Deformation { a, b })?),
        include_bare: false,
    };
    Ok(build_flip_operator(graph, basis, &model, FlipFilter::All))
}

/// Honeycomb Hamiltonian `sum_r X_r (1 + a P^l + b P^2)`.
pub fn build_deformation_honeycomb<T: Real>(
    graph: &SiteGraph,
    basis: &ConstrainedBasis,
    a: T,
    b: T,
) -> Result<SparseOperator<T>> {
    if graph.kind() != LatticeKind::Honeycomb {
        return Err(Error::WrongLattice { expected: "honeycomb".into(), found: graph.kind().to_string() });
    }
    build_hamiltonian(graph, basis, &ModelSpec::deformed(graph.n_sites(), a, b))
}

/// Splits `H` into `H+` (moves away from `M_A` by one flip) and `H- = (H+)^dagger`.
pub fn split_pm<T: Real>(
    graph: &SiteGraph,
    basis: &ConstrainedBasis,
    model: &ModelSpec<T>,
) -> Result<(SparseOperator<T>, SparseOperator<T>)> {
    check_basis(graph, basis)?;
    if !graph.is_bipartite() {
        return Err(Error::NotBipartite);
    }
    let fm = flip_model(graph, model)?;
    let hp = build_flip_operator(graph, basis, &fm, FlipFilter::Raising);
    let hm = build_flip_operator(graph, basis, &fm, FlipFilter::Lowering);
    Ok((hp, hm))
}

/// Domain-wall density of a single configuration: `(1/N) sum_r P_r sum_<r'r> P_r'`.
pub fn domain_wall_density(graph: &SiteGraph, c: Configuration) -> f64 {
    let n = graph.n_sites();
    let mut count = 0usize;
    for r in 0..n {
        if !c.is_excited(r) {
            count += graph.neighbors(r).iter().filter(|&&s| !c.is_excited(s)).count();
        }
    }
    count as f64 / n as f64
}

/// Diagonal domain-wall density operator `G`.
pub fn build_domain_wall<T: Real>(graph: &SiteGraph, basis: &ConstrainedBasis) -> SparseOperator<T> {
    let nmask = graph.neighbor_masks();
    let n = graph.n_sites();
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let norm = T::lit(n as f64).recip();
    let diag = basis
        .configs()
        .iter()
        .map(|&c| {
            let ground = !c & all;
            let pairs: u32 = (0..n)
                .filter(|&r| ground >> r & 1 == 1)
                .map(|r| (ground & nmask[r]).count_ones())
                .sum();
            T::lit(pairs as f64) * norm
        })
        .collect();
    SparseOperator::from_diagonal(diag)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalKind {
    /// Excitation number `n_r`.
    Density,
    /// `sigma^y_r` dressed by the neighbor ground-state projectors.
    SigmaY,
}

impl std::str::FromStr for LocalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "density" | "n" => Ok(LocalKind::Density),
            "sigma_y" | "sy" | "y" => Ok(LocalKind::SigmaY),
            other => Err(Error::InvalidParameter(format!("unknown observable kind '{other}'"))),
        }
    }
}

pub fn build_local_observable<T: Real>(
    graph: &SiteGraph,
    basis: &ConstrainedBasis,
    site: usize,
    kind: LocalKind,
) -> Result<SparseOperator<T>> {
    check_basis(graph, basis)?;
    graph.check_site(site)?;
    match kind {
        LocalKind::Density => Ok(SparseOperator::from_diagonal(
            basis
                .configs()
                .iter()
                .map(|&c| if c >> site & 1 == 1 { T::one() } else { T::zero() })
                .collect(),
        )),
        LocalKind::SigmaY => {
            let nmask = graph.neighbor_masks()[site];
            let rows = basis
                .configs()
                .iter()
                .map(|&c| {
                    if c & nmask != 0 {
                        return Vec::new();
                    }
                    let target = basis.index_of(Configuration(c ^ (1u64 << site))).expect("legal flip");
                    // <up|sigma^y|down> = -i
                    let im = if c >> site & 1 == 1 { -T::one() } else { T::one() };
                    vec![(target, Complex::new(T::zero(), im))]
                })
                .collect();
            Ok(SparseOperator::from_complex_rows(basis.dim(), rows, true))
        }
    }
}

/// Checks `<y|A x> = <B y|x>` on a few seeded random vectors.
pub fn check_adjoint_pair<T: Real>(a: &SparseOperator<T>, b: &SparseOperator<T>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::LengthMismatch { expected: a.dim(), found: b.dim() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut random = |dim: usize| -> Vec<Complex<T>> {
        (0..dim)
            .map(|_| Complex::new(T::lit(rng.random::<f64>() - 0.5), T::lit(rng.random::<f64>() - 0.5)))
            .collect()
    };
    for _ in 0..3 {
        let x = random(a.dim());
        let y = random(a.dim());
        let ax = a.apply_vec(&x);
        let by = b.apply_vec(&y);
        let lhs = dot(&y, &ax);
        let rhs = dot(&by, &x);
        let scale = crate::num::norm(&ax) * crate::num::norm(&y) + crate::num::norm(&by) * crate::num::norm(&x);
        let mismatch = abs2(lhs - rhs).sqrt();
        if mismatch > T::lit(1e-3).min(T::eps().sqrt() * T::lit(10.0)) * (scale + T::one()) {
            return Err(Error::NotAdjoint { mismatch: mismatch.as_f64() });
        }
    }
    Ok(())
}

/// Generators rescaled so that a revival period `period` maps to `2 pi`, the
/// resulting `Hz = [H+, H-]` and the normalized Casimir
/// `C = (2 {H+, H-} + 4 Hz^2) / ((N/2)(N/2 + 1))`.
pub fn build_casimir<T: Real>(
    hp: &SparseOperator<T>,
    hm: &SparseOperator<T>,
    n_sites: usize,
    period: T,
) -> Result<(SparseOperator<T>, SparseOperator<T>)> {
    if !(period > T::zero()) {
        return Err(Error::InvalidParameter("revival period must be positive".into()));
    }
    check_adjoint_pair(hp, hm)?;
    let s = period / T::two_pi();
    let hp = hp.scaled(s);
    let hm = hm.scaled(s);
    let hz = hp.commutator(&hm).with_hermitian_flag(true);
    let j = T::lit(n_sites as f64) / T::lit(2.0);
    let norm = (j * (j + T::one())).recip();
    let casimir = hp
        .anticommutator(&hm)
        .combine(T::lit(2.0) * norm, &hz.matmul(&hz), T::lit(4.0) * norm)
        .with_hermitian_flag(true);
    Ok((hz, casimir))
}
