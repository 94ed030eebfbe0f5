//! Site graphs for the square, honeycomb and decorated honeycomb lattices.
//!
//! Sites are numbered row-major over unit cells, then by basis index inside the
//! cell. Every lattice built here is bipartite; the two sublattices are labelled
//! [`Sublattice::A`] and [`Sublattice::B`].

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LatticeKind {
    Square,
    Honeycomb,
    DecoratedHoneycomb,
}

impl LatticeKind {
    /// Sites per unit cell.
    pub fn basis_size(self) -> usize {
        match self {
            LatticeKind::Square => 1,
            LatticeKind::Honeycomb => 2,
            LatticeKind::DecoratedHoneycomb => 5,
        }
    }
}

impl fmt::Display for LatticeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LatticeKind::Square => "square",
            LatticeKind::Honeycomb => "honeycomb",
            LatticeKind::DecoratedHoneycomb => "decorated-honeycomb",
        })
    }
}

impl std::str::FromStr for LatticeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(LatticeKind::Square),
            "honeycomb" => Ok(LatticeKind::Honeycomb),
            "decorated-honeycomb" | "decorated" => Ok(LatticeKind::DecoratedHoneycomb),
            other => Err(Error::InvalidLattice(format!("unknown lattice kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Periodic,
    Open,
}

/// Lattice geometry: kind, extent in unit cells and boundary conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub kind: LatticeKind,
    pub lx: usize,
    pub ly: usize,
    pub boundary: Boundary,
}

impl LatticeSpec {
    pub fn new(kind: LatticeKind, lx: usize, ly: usize, boundary: Boundary) -> Self {
        Self { kind, lx, ly, boundary }
    }

    pub fn square(l: usize, boundary: Boundary) -> Self {
        Self::new(LatticeKind::Square, l, l, boundary)
    }

    pub fn honeycomb(l: usize) -> Self {
        Self::new(LatticeKind::Honeycomb, l, l, Boundary::Periodic)
    }

    pub fn decorated(l: usize) -> Self {
        Self::new(LatticeKind::DecoratedHoneycomb, l, l, Boundary::Periodic)
    }

    pub fn n_sites(&self) -> usize {
        self.lx * self.ly * self.kind.basis_size()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lx == 0 || self.ly == 0 {
            return Err(Error::InvalidLattice("extents must be at least 1".into()));
        }
        if self.boundary == Boundary::Periodic {
            let min = match self.kind {
                LatticeKind::Square => 3,
                _ => 2,
            };
            if self.lx < min || self.ly < min {
                return Err(Error::InvalidLattice(format!(
                    "periodic {} lattice needs extents >= {min}, got {}x{}",
                    self.kind, self.lx, self.ly
                )));
            }
            // an odd periodic square ring breaks the A/B checkerboard
            if self.kind == LatticeKind::Square && (self.lx % 2 == 1 || self.ly % 2 == 1) {
                return Err(Error::InvalidLattice(format!(
                    "periodic square lattice {}x{} is not bipartite",
                    self.lx, self.ly
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sublattice {
    A,
    B,
}

impl Sublattice {
    pub fn other(self) -> Self {
        match self {
            Sublattice::A => Sublattice::B,
            Sublattice::B => Sublattice::A,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Sublattice::A => 'A',
            Sublattice::B => 'B',
        }
    }
}

/// Boundary classification by missing neighbors relative to the bulk coordination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SiteClass {
    Corner,
    Edge,
    Bulk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SitePosition {
    pub x: usize,
    pub y: usize,
    pub basis: usize,
}

/// Immutable site graph.
#[derive(Debug, Clone)]
pub struct SiteGraph {
    spec: LatticeSpec,
    adjacency: Vec<Vec<usize>>,
    sublattice: Vec<Sublattice>,
    site_class: Vec<SiteClass>,
    positions: Vec<SitePosition>,
}

/// Builds the site graph for `spec`.
pub fn build_lattice(spec: LatticeSpec) -> Result<SiteGraph> {
    spec.validate()?;
    let basis = spec.kind.basis_size();
    let n = spec.n_sites();
    let mut positions = Vec::with_capacity(n);
    for y in 0..spec.ly {
        for x in 0..spec.lx {
            for b in 0..basis {
                positions.push(SitePosition { x, y, basis: b });
            }
        }
    }

    let mut adjacency = vec![Vec::new(); n];
    let mut sublattice = vec![Sublattice::A; n];
    let locate = |x: i64, y: i64, b: usize| locate(&spec, x, y, b);
    let mut link = |i: usize, j: usize| {
        if !adjacency[i].contains(&j) {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
    };

    match spec.kind {
        LatticeKind::Square => {
            for (i, p) in positions.iter().enumerate() {
                let (x, y) = (p.x as i64, p.y as i64);
                sublattice[i] = if (p.x + p.y) % 2 == 0 { Sublattice::A } else { Sublattice::B };
                for (dx, dy) in [(1, 0), (0, 1)] {
                    if let Some(j) = locate(x + dx, y + dy, 0) {
                        link(i, j);
                    }
                }
            }
        }
        LatticeKind::Honeycomb => {
            // A(x,y) bonds to B(x,y), B(x-1,y) and B(x,y-1)
            for (i, p) in positions.iter().enumerate() {
                let (x, y) = (p.x as i64, p.y as i64);
                if p.basis == 0 {
                    sublattice[i] = Sublattice::A;
                    for (dx, dy) in [(0, 0), (-1, 0), (0, -1)] {
                        if let Some(j) = locate(x + dx, y + dy, 1) {
                            link(i, j);
                        }
                    }
                } else {
                    sublattice[i] = Sublattice::B;
                }
            }
        }
        LatticeKind::DecoratedHoneycomb => {
            // basis 0/1: honeycomb vertices (sublattice B); 2,3,4: midpoints of the
            // bonds V0(x,y)-V1(x,y), V0(x,y)-V1(x-1,y), V0(x,y)-V1(x,y-1) (sublattice A)
            for (i, p) in positions.iter().enumerate() {
                let (x, y) = (p.x as i64, p.y as i64);
                if p.basis < 2 {
                    sublattice[i] = Sublattice::B;
                    continue;
                }
                sublattice[i] = Sublattice::A;
                let (dx, dy) = [(0, 0), (-1, 0), (0, -1)][p.basis - 2];
                if let Some(v0) = locate(x, y, 0) {
                    link(i, v0);
                }
                if let Some(v1) = locate(x + dx, y + dy, 1) {
                    link(i, v1);
                }
            }
        }
    }

    for adj in adjacency.iter_mut() {
        adj.sort_unstable();
    }

    let site_class = adjacency
        .iter()
        .zip(&sublattice)
        .map(|(adj, &s)| {
            let full = bulk_coordination(spec.kind, s);
            match full.saturating_sub(adj.len()) {
                0 => SiteClass::Bulk,
                1 => SiteClass::Edge,
                _ => SiteClass::Corner,
            }
        })
        .collect();

    Ok(SiteGraph { spec, adjacency, sublattice, site_class, positions })
}

fn bulk_coordination(kind: LatticeKind, sub: Sublattice) -> usize {
    match (kind, sub) {
        (LatticeKind::Square, _) => 4,
        (LatticeKind::Honeycomb, _) => 3,
        (LatticeKind::DecoratedHoneycomb, Sublattice::A) => 2,
        (LatticeKind::DecoratedHoneycomb, Sublattice::B) => 3,
    }
}

fn locate(spec: &LatticeSpec, x: i64, y: i64, basis: usize) -> Option<usize> {
    let (lx, ly) = (spec.lx as i64, spec.ly as i64);
    let (x, y) = match spec.boundary {
        Boundary::Periodic => (x.rem_euclid(lx), y.rem_euclid(ly)),
        Boundary::Open => {
            if !(0..lx).contains(&x) || !(0..ly).contains(&y) {
                return None;
            }
            (x, y)
        }
    };
    Some(((y * lx + x) as usize) * spec.kind.basis_size() + basis)
}

impl SiteGraph {
    /// Periodic 1D chain of `n` sites (even, at least 4), used as a reference fixture.
    #[doc(hidden)]
    pub fn ring(n: usize) -> Result<SiteGraph> {
        if n < 4 || n % 2 == 1 {
            return Err(Error::InvalidLattice(format!("ring needs an even length >= 4, got {n}")));
        }
        let adjacency = (0..n)
            .map(|i| {
                let mut adj = vec![(i + n - 1) % n, (i + 1) % n];
                adj.sort_unstable();
                adj
            })
            .collect();
        Ok(SiteGraph {
            spec: LatticeSpec::new(LatticeKind::Square, n, 1, Boundary::Periodic),
            adjacency,
            sublattice: (0..n).map(|i| if i % 2 == 0 { Sublattice::A } else { Sublattice::B }).collect(),
            site_class: vec![SiteClass::Bulk; n],
            positions: (0..n).map(|x| SitePosition { x, y: 0, basis: 0 }).collect(),
        })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn kind(&self) -> LatticeKind {
        self.spec.kind
    }

    pub fn n_sites(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, site: usize) -> &[usize] {
        &self.adjacency[site]
    }

    pub fn sublattice(&self, site: usize) -> Sublattice {
        self.sublattice[site]
    }

    pub fn site_class(&self, site: usize) -> SiteClass {
        self.site_class[site]
    }

    pub fn position(&self, site: usize) -> SitePosition {
        self.positions[site]
    }

    /// Site at cell `(x, y)` with basis index `basis`, wrapping under PBC.
    pub fn site_at(&self, x: i64, y: i64, basis: usize) -> Option<usize> {
        locate(&self.spec, x, y, basis)
    }

    pub fn check_site(&self, site: usize) -> Result<()> {
        if site < self.n_sites() {
            Ok(())
        } else {
            Err(Error::InvalidSite { index: site, n_sites: self.n_sites() })
        }
    }

    pub fn sites_of(&self, sub: Sublattice) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_sites()).filter(move |&r| self.sublattice[r] == sub)
    }

    /// Bitmask of the sites in `sub`.
    pub fn sublattice_mask(&self, sub: Sublattice) -> u64 {
        self.sites_of(sub).fold(0u64, |m, r| m | (1u64 << r))
    }

    /// Bitmask of the neighbors of every site (only valid for `n_sites <= 64`).
    pub fn neighbor_masks(&self) -> Vec<u64> {
        self.adjacency.iter().map(|adj| adj.iter().fold(0u64, |m, &s| m | (1u64 << s))).collect()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, adj)| adj.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    /// Two-colouring by breadth-first search, or `None` if the graph is not bipartite.
    /// Each connected component starts from its lowest site, coloured like the stored label.
    pub fn bfs_coloring(&self) -> Option<Vec<Sublattice>> {
        let n = self.n_sites();
        let mut color: Vec<Option<Sublattice>> = vec![None; n];
        let mut queue = VecDeque::new();
        for start in 0..n {
            if color[start].is_some() {
                continue;
            }
            color[start] = Some(self.sublattice[start]);
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                let cu = color[u].unwrap();
                for &v in &self.adjacency[u] {
                    match color[v] {
                        None => {
                            color[v] = Some(cu.other());
                            queue.push_back(v);
                        }
                        Some(cv) if cv == cu => return None,
                        Some(_) => {}
                    }
                }
            }
        }
        Some(color.into_iter().map(Option::unwrap).collect())
    }

    pub fn is_bipartite(&self) -> bool {
        self.edges().all(|(i, j)| self.sublattice[i] != self.sublattice[j])
    }

    /// Connectivity shared by every site of `sub`, if uniform.
    pub fn uniform_connectivity(&self, sub: Sublattice) -> Result<usize> {
        let mut degrees = self.sites_of(sub).map(|r| self.adjacency[r].len());
        let first = degrees.next().ok_or(Error::NonUniformConnectivity(sub.as_char()))?;
        if degrees.all(|d| d == first) {
            Ok(first)
        } else {
            Err(Error::NonUniformConnectivity(sub.as_char()))
        }
    }

    /// Serializable snapshot (sites, edges, labels) for debugging.
    pub fn dump(&self) -> GraphDump {
        GraphDump {
            spec: self.spec,
            n_sites: self.n_sites(),
            sites: (0..self.n_sites())
                .map(|r| SiteRecord {
                    index: r,
                    position: self.positions[r],
                    sublattice: self.sublattice[r],
                    class: self.site_class[r],
                })
                .collect(),
            edges: self.edges().collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SiteRecord {
    pub index: usize,
    pub position: SitePosition,
    pub sublattice: Sublattice,
    pub class: SiteClass,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphDump {
    pub spec: LatticeSpec,
    pub n_sites: usize,
    pub sites: Vec<SiteRecord>,
    pub edges: Vec<(usize, usize)>,
}

/// Projector targets used by the square-lattice deformation around one site,
/// one entry per 90 degree rotation. `None` marks a target missing under OBC.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SquareGroups {
    /// `(i, j+2)` and rotations.
    pub straight: [Option<usize>; 4],
    /// `(i+1, j+1)` and rotations.
    pub diagonal: [Option<usize>; 4],
    /// `(i-1, j+1), (i, j+2), (i+1, j+1)` and rotations.
    pub triples: [Option<[usize; 3]>; 4],
}

impl SquareGroups {
    pub fn incomplete(&self) -> bool {
        self.straight.iter().any(Option::is_none)
            || self.diagonal.iter().any(Option::is_none)
            || self.triples.iter().any(Option::is_none)
    }
}

/// Next-nearest-neighbor structure of a honeycomb site.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HoneycombGroups {
    /// Every next-nearest neighbor, once per connecting path.
    pub singles: Vec<usize>,
    /// For each nearest neighbor, its two other neighbors.
    pub pairs: Vec<[usize; 2]>,
    /// Set when OBC removed part of the structure.
    pub incomplete: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NeighborGroups {
    Square(SquareGroups),
    Honeycomb(HoneycombGroups),
}

fn rotate((dx, dy): (i64, i64), k: usize) -> (i64, i64) {
    (0..k).fold((dx, dy), |(x, y), _| (-y, x))
}

/// Next-nearest-neighbor groups around `site` needed by the lattice deformations.
pub fn neighbor_rotations(graph: &SiteGraph, site: usize) -> Result<NeighborGroups> {
    graph.check_site(site)?;
    match graph.kind() {
        LatticeKind::Square if graph.spec.ly == 1 => Err(Error::WrongLattice {
            expected: "two-dimensional square".into(),
            found: "chain".into(),
        }),
        LatticeKind::Square => {
            let p = graph.position(site);
            let (x, y) = (p.x as i64, p.y as i64);
            let at = |d: (i64, i64)| graph.site_at(x + d.0, y + d.1, 0);
            let mut groups = SquareGroups {
                straight: [None; 4],
                diagonal: [None; 4],
                triples: [None; 4],
            };
            for k in 0..4 {
                groups.straight[k] = at(rotate((0, 2), k));
                groups.diagonal[k] = at(rotate((1, 1), k));
                let t = [rotate((-1, 1), k), rotate((0, 2), k), rotate((1, 1), k)];
                groups.triples[k] = match (at(t[0]), at(t[1]), at(t[2])) {
                    (Some(a), Some(b), Some(c)) => Some([a, b, c]),
                    _ => None,
                };
            }
            Ok(NeighborGroups::Square(groups))
        }
        LatticeKind::Honeycomb => {
            let mut singles = Vec::with_capacity(6);
            let mut pairs = Vec::with_capacity(3);
            let mut incomplete = graph.neighbors(site).len() < 3;
            for &s in graph.neighbors(site) {
                let others: Vec<usize> =
                    graph.neighbors(s).iter().copied().filter(|&t| t != site).collect();
                singles.extend_from_slice(&others);
                if others.len() == 2 {
                    pairs.push([others[0], others[1]]);
                } else {
                    incomplete = true;
                }
            }
            Ok(NeighborGroups::Honeycomb(HoneycombGroups { singles, pairs, incomplete }))
        }
        kind => Err(Error::WrongLattice {
            expected: "square or honeycomb".into(),
            found: kind.to_string(),
        }),
    }
}
