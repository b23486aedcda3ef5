use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Directed influence structure among users.
///
/// An edge `v → u` means `v` influences `u`; `influencers(u)` is `F_u` and
/// `followers(v)` is the set of users excited by events of `v`. Edge weights
/// live in [`ModelParams::influence`](crate::ModelParams); the graph only
/// fixes which weights may be nonzero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserGraph {
    n_users: usize,
    influencers: Vec<Vec<usize>>,
    followers: Vec<Vec<usize>>,
}

impl UserGraph {
    /// Graph with `n_users` isolated nodes.
    pub fn new(n_users: usize) -> Self {
        Self {
            n_users,
            influencers: vec![Vec::new(); n_users],
            followers: vec![Vec::new(); n_users],
        }
    }

    /// Builds a graph from `(src, dst)` pairs. Duplicates are merged, self-loops kept.
    pub fn from_edges<I>(n_users: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut g = Self::new(n_users);
        for (src, dst) in edges {
            g.add_edge(src, dst)?;
        }
        Ok(g)
    }

    /// Support of a weight matrix indexed `[(v, u)]`.
    pub fn from_weights(weights: &DMatrix<f64>) -> Result<Self> {
        if weights.nrows() != weights.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "influence matrix is {}x{}",
                weights.nrows(),
                weights.ncols()
            )));
        }
        let n = weights.nrows();
        let mut g = Self::new(n);
        for v in 0..n {
            for u in 0..n {
                if weights[(v, u)] != 0.0 {
                    g.add_edge(v, u)?;
                }
            }
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, src: usize, dst: usize) -> Result<()> {
        for id in [src, dst] {
            if id >= self.n_users {
                return Err(Error::UserOutOfRange {
                    user: id,
                    n_users: self.n_users,
                });
            }
        }
        if let Err(pos) = self.followers[src].binary_search(&dst) {
            self.followers[src].insert(pos, dst);
        }
        if let Err(pos) = self.influencers[dst].binary_search(&src) {
            self.influencers[dst].insert(pos, src);
        }
        Ok(())
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    /// `F_u`: users whose events excite `u`, ascending.
    pub fn influencers(&self, u: usize) -> &[usize] {
        &self.influencers[u]
    }

    /// Users excited by events of `v`, ascending.
    pub fn followers(&self, v: usize) -> &[usize] {
        &self.followers[v]
    }

    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        src < self.n_users && self.followers[src].binary_search(&dst).is_ok()
    }

    pub fn n_edges(&self) -> usize {
        self.followers.iter().map(Vec::len).sum()
    }

    /// All `(src, dst)` edges in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.followers
            .iter()
            .enumerate()
            .flat_map(|(v, fs)| fs.iter().map(move |&u| (v, u)))
    }

    /// Dense 0/1 adjacency matrix indexed `[(src, dst)]`.
    pub fn adjacency(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n_users, self.n_users);
        for (v, u) in self.edges() {
            a[(v, u)] = 1.0;
        }
        a
    }
}
