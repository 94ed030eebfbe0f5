//! Blockade-constrained configuration space.
//!
//! A configuration is a 64-bit occupation mask (bit `r` set = site `r` excited).
//! Legal configurations are the independent sets of the site graph.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::lattice::{SiteGraph, Sublattice};

/// Default cap on the constrained dimension.
pub const DEFAULT_DIM_CAP: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration(pub u64);

impl Configuration {
    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn is_excited(self, site: usize) -> bool {
        self.0 >> site & 1 == 1
    }

    pub fn excitations(self) -> u32 {
        self.0.count_ones()
    }

    pub fn hamming(self, other: Configuration) -> u32 {
        (self.0 ^ other.0).count_ones()
    }

    /// No two adjacent sites excited.
    pub fn is_legal(self, graph: &SiteGraph) -> bool {
        graph.edges().all(|(i, j)| !(self.is_excited(i) && self.is_excited(j)))
    }
}

/// Ordered list of legal configurations with constant-time reverse lookup.
#[derive(Debug, Clone)]
pub struct ConstrainedBasis {
    n_sites: usize,
    configs: Vec<u64>,
    index: HashMap<u64, u32>,
}

impl ConstrainedBasis {
    pub fn dim(&self) -> usize {
        self.configs.len()
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn config(&self, k: usize) -> Configuration {
        Configuration(self.configs[k])
    }

    pub fn configs(&self) -> &[u64] {
        &self.configs
    }

    pub fn index_of(&self, c: Configuration) -> Option<usize> {
        self.index.get(&c.0).map(|&k| k as usize)
    }

    /// Hamming distance of every basis configuration from `reference`.
    pub fn hamming_from(&self, reference: Configuration) -> Vec<u32> {
        self.configs.iter().map(|&c| (c ^ reference.0).count_ones()).collect()
    }

    /// CSV dump `ordinal,bitmask` with the mask in hex.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ordinal,bitmask\n");
        for (k, c) in self.configs.iter().enumerate() {
            out.push_str(&format!("{k},{c:#x}\n"));
        }
        out
    }
}

/// Enumerates the legal configurations of `graph` in ascending mask order.
pub fn enumerate_basis(graph: &SiteGraph) -> Result<ConstrainedBasis> {
    enumerate_basis_capped(graph, DEFAULT_DIM_CAP)
}

pub fn enumerate_basis_capped(graph: &SiteGraph, cap: usize) -> Result<ConstrainedBasis> {
    let n = graph.n_sites();
    if n > 64 {
        return Err(Error::TooManySites(n));
    }
    let masks = graph.neighbor_masks();
    let mut configs = Vec::new();
    // Depth-first from the highest site down, "ground" branch first: the visit
    // order is then ascending in the mask value.
    let mut stack: Vec<(usize, u64, u64)> = vec![(n, 0, 0)];
    while let Some((remaining, bits, forbidden)) = stack.pop() {
        if remaining == 0 {
            if configs.len() == cap {
                return Err(Error::DimensionCap { cap });
            }
            configs.push(bits);
            continue;
        }
        let site = remaining - 1;
        if forbidden >> site & 1 == 0 {
            stack.push((site, bits | 1 << site, forbidden | masks[site]));
        }
        stack.push((site, bits, forbidden));
    }
    let index = configs.iter().enumerate().map(|(k, &c)| (c, k as u32)).collect();
    Ok(ConstrainedBasis { n_sites: n, configs, index })
}

/// All sites of `sub` excited, every other site ground.
pub fn maximally_excited(graph: &SiteGraph, sub: Sublattice) -> Configuration {
    Configuration(graph.sublattice_mask(sub))
}

pub fn hamming_from(basis: &ConstrainedBasis, reference: Configuration) -> Vec<u32> {
    basis.hamming_from(reference)
}
