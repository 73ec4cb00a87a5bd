//! Seeded synthetic data: protein-like families from order-1 Markov chains, and
//! labeled Gaussian clusters.

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, Normal};

use crate::rng::derive_seed;
use crate::sequences::SequenceRecord;

/// The 20 standard amino acids.
pub const AMINO_ACIDS: &[u8; 20] = b"ACDEFGHIKLMNPQRSTVWY";

/// Parameters for [`markov_families`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovFamilies {
    pub families: usize,
    pub per_family: usize,
    pub length: usize,
    /// Dirichlet concentration of each transition row; smaller values give more
    /// distinctive families.
    pub concentration: f64,
    pub seed: u64,
}

impl Default for MarkovFamilies {
    fn default() -> Self {
        MarkovFamilies {
            families: 5,
            per_family: 200,
            length: 100,
            concentration: 0.2,
            seed: 1,
        }
    }
}

/// An order-1 Markov chain over [`AMINO_ACIDS`].
#[derive(Debug, Clone)]
pub struct MarkovChain {
    start: WeightedIndex<f64>,
    rows: Vec<WeightedIndex<f64>>,
}

fn dirichlet<R: Rng + ?Sized>(n: usize, concentration: f64, rng: &mut R) -> Vec<f64> {
    let gamma = Gamma::new(concentration, 1.0).expect("positive concentration");
    let mut w: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
    // tiny concentrations can underflow every draw to zero
    if w.iter().all(|&v| v == 0.0) {
        w[rng.random_range(0..n)] = 1.0;
    }
    w
}

impl MarkovChain {
    pub fn random<R: Rng + ?Sized>(concentration: f64, rng: &mut R) -> Self {
        let n = AMINO_ACIDS.len();
        let start = WeightedIndex::new(dirichlet(n, concentration, rng)).unwrap();
        let rows = (0..n)
            .map(|_| WeightedIndex::new(dirichlet(n, concentration, rng)).unwrap())
            .collect();
        MarkovChain { start, rows }
    }

    pub fn sample<R: Rng + ?Sized>(&self, length: usize, rng: &mut R) -> String {
        let mut out = String::with_capacity(length);
        let mut state = self.start.sample(rng);
        for _ in 0..length {
            out.push(AMINO_ACIDS[state] as char);
            state = self.rows[state].sample(rng);
        }
        out
    }
}

/// Labeled sequences `famNN_IIII` with family `famNN`, one Markov chain per family.
pub fn markov_families(p: &MarkovFamilies) -> Vec<SequenceRecord> {
    let mut out = Vec::with_capacity(p.families * p.per_family);
    for f in 0..p.families {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(p.seed, &[f as u64]));
        let chain = MarkovChain::random(p.concentration, &mut rng);
        let family = format!("fam{f:02}");
        for i in 0..p.per_family {
            out.push(SequenceRecord {
                id: format!("{family}_{i:04}"),
                description: String::new(),
                residues: chain.sample(p.length, &mut rng),
                family: Some(family.clone()),
            });
        }
    }
    out
}

/// Labeled points around random centers.
#[derive(Debug, Clone, PartialEq)]
pub struct Clusters {
    pub ids: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
    pub labels: Vec<String>,
}

/// `k` clusters of `per` points in `dim` dimensions. Centers are drawn uniformly from
/// `[-spread, spread]^dim`; points scatter around them with standard deviation `sigma`.
pub fn gaussian_clusters(k: usize, per: usize, dim: usize, spread: f64, sigma: f64, seed: u64) -> Clusters {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).expect("finite sigma");
    let mut c = Clusters {
        ids: Vec::new(),
        vectors: Vec::new(),
        labels: Vec::new(),
    };
    for f in 0..k {
        let center: Vec<f64> = (0..dim).map(|_| rng.random_range(-spread..=spread)).collect();
        for i in 0..per {
            c.ids.push(format!("c{f:02}_{i:04}"));
            c.vectors
                .push(center.iter().map(|x| x + noise.sample(&mut rng)).collect());
            c.labels.push(format!("c{f:02}"));
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families_are_seeded_and_shaped() {
        let p = MarkovFamilies {
            families: 3,
            per_family: 4,
            length: 30,
            ..Default::default()
        };
        let a = markov_families(&p);
        assert_eq!(a.len(), 12);
        assert!(a
            .iter()
            .all(|r| r.len() == 30 && r.residues.bytes().all(|c| AMINO_ACIDS.contains(&c))));
        assert_eq!(a[5].family.as_deref(), Some("fam01"));
        assert_eq!(a, markov_families(&p));
        assert_ne!(a, markov_families(&MarkovFamilies { seed: 2, ..p }));
    }

    #[test]
    fn clusters_are_seeded() {
        let c = gaussian_clusters(2, 3, 4, 10.0, 0.1, 5);
        assert_eq!(c.vectors.len(), 6);
        assert_eq!(c.labels[3], "c01");
        assert_eq!(c, gaussian_clusters(2, 3, 4, 10.0, 0.1, 5));
    }
}
