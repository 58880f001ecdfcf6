use ndarray::{Array2, Array3};

use super::CountData;
use crate::error::{Error, Result};
use crate::rng::ChainRng;

/// Per-token cluster assignments with four marginal count caches.
///
/// `n_lsk[l, s, k]` holds the tokens of category `s` in instance `l` that
/// belong to cluster `k`; the other caches are its sums over `s`, over `l`,
/// and over both. Every mutation goes through [`LatentState::move_token`] or
/// [`LatentState::apply_token_move`] so the caches never drift from the
/// assignments.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    /// Category of each token, per instance.
    pub tokens: Vec<Vec<u32>>,
    /// Cluster of each token, per instance.
    pub assignments: Vec<Vec<u32>>,
    pub n_lsk: Array3<u32>,
    pub n_lk: Array2<u32>,
    pub n_sk: Array2<u32>,
    pub n_k: Vec<u64>,
}

impl LatentState {
    pub fn from_assignments(data: &CountData, k: usize, assignments: Vec<Vec<u32>>) -> Result<Self> {
        let l_n = data.n_instances();
        if assignments.len() != l_n {
            return Err(Error::DimensionMismatch(format!(
                "{} assignment vectors for {l_n} instances",
                assignments.len()
            )));
        }
        let tokens: Vec<Vec<u32>> = (0..l_n).map(|l| data.tokens(l)).collect();
        for (l, (t, a)) in tokens.iter().zip(&assignments).enumerate() {
            if t.len() != a.len() {
                return Err(Error::DimensionMismatch(format!(
                    "instance {l} has {} tokens but {} assignments",
                    t.len(),
                    a.len()
                )));
            }
            if let Some(&bad) = a.iter().find(|&&z| z as usize >= k) {
                return Err(Error::InvalidData(format!("cluster id {bad} out of range 0..{k}")));
            }
        }
        let mut state = Self {
            tokens,
            assignments,
            n_lsk: Array3::zeros((l_n, data.n_categories(), k)),
            n_lk: Array2::zeros((l_n, k)),
            n_sk: Array2::zeros((data.n_categories(), k)),
            n_k: vec![0; k],
        };
        state.rebuild_caches();
        Ok(state)
    }

    /// Uniform-random initial assignment.
    pub fn random(data: &CountData, k: usize, rng: &mut ChainRng) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("cluster count must be at least 1".into()));
        }
        let assignments = (0..data.n_instances())
            .map(|l| (0..data.instance_total(l)).map(|_| rng.index(k) as u32).collect())
            .collect();
        Self::from_assignments(data, k, assignments)
    }

    pub fn n_instances(&self) -> usize {
        self.n_lsk.dim().0
    }

    pub fn n_categories(&self) -> usize {
        self.n_lsk.dim().1
    }

    pub fn n_clusters(&self) -> usize {
        self.n_k.len()
    }

    fn rebuild_caches(&mut self) {
        let recount = self.recount();
        self.n_lsk = recount.n_lsk;
        self.n_lk = recount.n_lk;
        self.n_sk = recount.n_sk;
        self.n_k = recount.n_k;
    }

    /// Marginals recomputed from scratch out of the assignments.
    pub fn recount(&self) -> Recount {
        let (l_n, s_n, k_n) = self.n_lsk.dim();
        let mut out = Recount {
            n_lsk: Array3::zeros((l_n, s_n, k_n)),
            n_lk: Array2::zeros((l_n, k_n)),
            n_sk: Array2::zeros((s_n, k_n)),
            n_k: vec![0; k_n],
        };
        for (l, (toks, zs)) in self.tokens.iter().zip(&self.assignments).enumerate() {
            for (&s, &z) in toks.iter().zip(zs) {
                let (s, z) = (s as usize, z as usize);
                out.n_lsk[[l, s, z]] += 1;
                out.n_lk[[l, z]] += 1;
                out.n_sk[[s, z]] += 1;
                out.n_k[z] += 1;
            }
        }
        out
    }

    /// Exact equality of the caches with a fresh recount.
    pub fn caches_coherent(&self) -> bool {
        let r = self.recount();
        r.n_lsk == self.n_lsk && r.n_lk == self.n_lk && r.n_sk == self.n_sk && r.n_k == self.n_k
    }

    /// Conservation: clusters of `(l, s)` add up to the observed count.
    pub fn check_conservation(&self, data: &CountData) -> Result<()> {
        let (l_n, s_n, _) = self.n_lsk.dim();
        if data.counts.dim() != (l_n, s_n) {
            return Err(Error::DimensionMismatch("latent state does not match data".into()));
        }
        for l in 0..l_n {
            for s in 0..s_n {
                let held: u64 = self.n_lsk.slice(ndarray::s![l, s, ..]).iter().map(|&c| c as u64).sum();
                if held != data.counts[[l, s]] as u64 {
                    return Err(Error::ConstraintViolation(format!(
                        "instance {l}, category {s}: clusters hold {held}, data has {}",
                        data.counts[[l, s]]
                    )));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn remove(&mut self, l: usize, s: usize, k: usize) -> Result<()> {
        if self.n_lsk[[l, s, k]] == 0 {
            return Err(Error::CountUnderflow { l, s, k });
        }
        self.n_lsk[[l, s, k]] -= 1;
        self.n_lk[[l, k]] -= 1;
        self.n_sk[[s, k]] -= 1;
        self.n_k[k] -= 1;
        Ok(())
    }

    #[inline]
    pub(crate) fn add(&mut self, l: usize, s: usize, k: usize) {
        self.n_lsk[[l, s, k]] += 1;
        self.n_lk[[l, k]] += 1;
        self.n_sk[[s, k]] += 1;
        self.n_k[k] += 1;
    }

    /// Reassign token `i` of instance `l` to cluster `to`.
    pub fn move_token(&mut self, l: usize, i: usize, to: usize) -> Result<()> {
        let s = self.tokens[l][i] as usize;
        let from = self.assignments[l][i] as usize;
        if from == to {
            return Ok(());
        }
        self.remove(l, s, from)?;
        self.add(l, s, to);
        self.assignments[l][i] = to as u32;
        Ok(())
    }

    /// Move one token of category `s` in instance `l` from cluster `from_k`
    /// to `to_k`.
    pub fn apply_token_move(&mut self, l: usize, s: usize, from_k: usize, to_k: usize) -> Result<()> {
        let k_n = self.n_clusters();
        if l >= self.n_instances() || s >= self.n_categories() || from_k >= k_n || to_k >= k_n {
            return Err(Error::DimensionMismatch(format!(
                "token move ({l}, {s}, {from_k} -> {to_k}) out of range"
            )));
        }
        if self.n_lsk[[l, s, from_k]] == 0 {
            return Err(Error::CountUnderflow { l, s, k: from_k });
        }
        if from_k == to_k {
            return Ok(());
        }
        let i = self.tokens[l]
            .iter()
            .zip(&self.assignments[l])
            .position(|(&ts, &z)| ts as usize == s && z as usize == from_k)
            .ok_or(Error::CountUnderflow { l, s, k: from_k })?;
        self.move_token(l, i, to_k)
    }
}

/// Freshly recomputed marginals, compared against the live caches.
#[derive(Debug, Clone, PartialEq)]
pub struct Recount {
    pub n_lsk: Array3<u32>,
    pub n_lk: Array2<u32>,
    pub n_sk: Array2<u32>,
    pub n_k: Vec<u64>,
}
