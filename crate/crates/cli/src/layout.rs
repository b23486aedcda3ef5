//! Two-layer drawing coordinates: cascades on the lower layer placed by a
//! spring embedder over the interaction graph, users above them at the
//! mixture-weighted average of cascade positions.

use std::f64::consts::PI;

use mic_core::model::mixing_density;
use mic_core::rng::{stream_rng, uniform};
use mic_core::{EventLog, IntensityState, ModelParams, UserGraph};
use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const LAYOUT_SCHEMA: &str = "mic.layout/1";
const LAYOUT_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutOptions {
    /// Intra-layer edges are kept when their weight reaches this percentile of the nonzero weights.
    pub threshold_percentile: f64,
    /// Height of the user layer above the cascade layer.
    pub layer_offset: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for LayoutOptions {
    fn default() -> Self {
        Self {
            threshold_percentile: 95.0,
            layer_offset: 1.0,
            iterations: 500,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeNode {
    pub id: usize,
    pub position: [f64; 2],
    pub height: f64,
    /// Number of events on the cascade.
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserNode {
    pub id: usize,
    pub position: [f64; 2],
    pub height: f64,
    /// Number of events by the user.
    pub size: usize,
    /// Mixing density averaged over the user's own event times.
    pub mixture: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedEdge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossEdge {
    pub cascade: usize,
    /// User with the largest baseline on the cascade.
    pub user: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutDocument {
    pub schema: String,
    pub options: LayoutOptions,
    /// True when cascades were placed on a circle because no interaction edge survived.
    pub circular_fallback: bool,
    pub cascade_threshold: Option<f64>,
    pub user_threshold: Option<f64>,
    pub cascade_nodes: Vec<CascadeNode>,
    pub user_nodes: Vec<UserNode>,
    pub intra_cascade_edges: Vec<WeightedEdge>,
    pub intra_user_edges: Vec<WeightedEdge>,
    pub cross_edges: Vec<CrossEdge>,
}

/// Nearest-rank percentile of the positive entries.
fn percentile_threshold(weights: impl Iterator<Item = f64>, percentile: f64) -> Option<f64> {
    let mut xs: Vec<f64> = weights.filter(|w| *w > 0.0).collect();
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let rank = ((percentile / 100.0) * xs.len() as f64).ceil() as usize;
    Some(xs[rank.clamp(1, xs.len()) - 1])
}

fn circle(n: usize) -> Vec<[f64; 2]> {
    if n == 1 {
        return vec![[0.0, 0.0]];
    }
    (0..n)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / n as f64;
            [a.cos(), a.sin()]
        })
        .collect()
}

/// Fruchterman–Reingold with linear cooling on the unit square, rescaled into `[-1, 1]²`.
fn spring_layout(n: usize, edges: &[(usize, usize, f64)], iterations: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = stream_rng(seed, LAYOUT_STREAM);
    let mut pos: Vec<[f64; 2]> = (0..n).map(|_| [uniform(&mut rng), uniform(&mut rng)]).collect();
    let k = (1.0 / n as f64).sqrt();
    let max_w = edges.iter().map(|e| e.2).fold(0.0, f64::max);
    for it in 0..iterations {
        let temperature = 0.1 * (1.0 - it as f64 / iterations as f64);
        let mut disp = vec![[0.0f64; 2]; n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let d = [pos[i][0] - pos[j][0], pos[i][1] - pos[j][1]];
                let dist = d[0].hypot(d[1]).max(1e-9);
                let push = k * k / dist;
                disp[i][0] += d[0] / dist * push;
                disp[i][1] += d[1] / dist * push;
            }
        }
        for &(a, b, w) in edges {
            let d = [pos[a][0] - pos[b][0], pos[a][1] - pos[b][1]];
            let dist = d[0].hypot(d[1]).max(1e-9);
            let pull = dist * dist / k * (w / max_w);
            for (node, sign) in [(a, -1.0), (b, 1.0)] {
                disp[node][0] += sign * d[0] / dist * pull;
                disp[node][1] += sign * d[1] / dist * pull;
            }
        }
        for (p, d) in pos.iter_mut().zip(&disp) {
            let len = d[0].hypot(d[1]);
            if len > 0.0 {
                let step = len.min(temperature);
                p[0] += d[0] / len * step;
                p[1] += d[1] / len * step;
            }
        }
    }
    let cx = pos.iter().map(|p| p[0]).sum::<f64>() / n as f64;
    let cy = pos.iter().map(|p| p[1]).sum::<f64>() / n as f64;
    let r = pos
        .iter()
        .map(|p| (p[0] - cx).abs().max((p[1] - cy).abs()))
        .fold(0.0, f64::max)
        .max(1e-12);
    pos.iter().map(|p| [(p[0] - cx) / r, (p[1] - cy) / r]).collect()
}

/// `f̄_u`: mean of `f_u(·|t_i)` over the user's own events (strict past);
/// users without events get the density at the baseline.
fn mean_mixtures(params: &ModelParams, log: &EventLog) -> Result<Vec<Vec<f64>>> {
    let (nu, nc) = (params.n_users(), params.n_cascades());
    let graph = UserGraph::from_weights(&params.influence)?;
    let mut sums = vec![vec![0.0; nc]; nu];
    let mut counts = vec![0usize; nu];
    let mut state = IntensityState::new(nu, nc);
    for e in log.events() {
        state.advance(e.time, &params.kernel)?;
        let f = mixing_density(params, &state, e.user)?;
        for (s, p) in sums[e.user].iter_mut().zip(f) {
            *s += p;
        }
        counts[e.user] += 1;
        state.apply_event(e, params, &graph)?;
    }
    let empty = IntensityState::new(nu, nc);
    (0..nu)
        .map(|u| {
            if counts[u] == 0 {
                Ok(mixing_density(params, &empty, u)?)
            } else {
                Ok(sums[u].iter().map(|s| s / counts[u] as f64).collect())
            }
        })
        .collect()
}

pub fn layout(params: &ModelParams, log: &EventLog, options: &LayoutOptions) -> Result<LayoutDocument> {
    let (nu, nc) = (params.n_users(), params.n_cascades());
    log.check_ids(nu, nc)?;
    let sigma = &params.interaction;

    let off_diagonal = (0..nc).flat_map(|s| (0..nc).filter(move |&c| c != s).map(move |c| (s, c)));
    let cascade_threshold = percentile_threshold(off_diagonal.clone().map(|(s, c)| sigma[(s, c)]), options.threshold_percentile);
    let intra_cascade_edges: Vec<WeightedEdge> = match cascade_threshold {
        Some(t) => off_diagonal
            .filter(|&(s, c)| sigma[(s, c)] >= t)
            .map(|(src, dst)| WeightedEdge { src, dst, weight: sigma[(src, dst)] })
            .collect(),
        None => Vec::new(),
    };

    let circular_fallback = intra_cascade_edges.is_empty() || nc < 2;
    let cascade_pos = if circular_fallback {
        circle(nc)
    } else {
        let springs: Vec<(usize, usize, f64)> = intra_cascade_edges.iter().map(|e| (e.src, e.dst, e.weight)).collect();
        spring_layout(nc, &springs, options.iterations, options.seed)
    };

    let cascade_counts = log.cascade_counts(nc);
    let cascade_nodes = (0..nc)
        .map(|c| CascadeNode {
            id: c,
            position: cascade_pos[c],
            height: 0.0,
            size: cascade_counts[c],
        })
        .collect();

    let mixtures = mean_mixtures(params, log)?;
    let user_counts = log.user_counts(nu);
    let user_nodes = mixtures
        .into_iter()
        .enumerate()
        .map(|(u, mixture)| {
            let mut position = [0.0, 0.0];
            for (c, p) in mixture.iter().enumerate() {
                position[0] += p * cascade_pos[c][0];
                position[1] += p * cascade_pos[c][1];
            }
            UserNode {
                id: u,
                position,
                height: options.layer_offset,
                size: user_counts[u],
                mixture,
            }
        })
        .collect();

    let w = &params.influence;
    let user_threshold = percentile_threshold(w.iter().copied(), options.threshold_percentile);
    let mut intra_user_edges = Vec::new();
    if let Some(t) = user_threshold {
        for src in 0..nu {
            for dst in 0..nu {
                if w[(src, dst)] >= t {
                    intra_user_edges.push(WeightedEdge { src, dst, weight: w[(src, dst)] });
                }
            }
        }
    }

    let cross_edges = (0..nc)
        .map(|c| {
            let user = (0..nu)
                .max_by(|&a, &b| params.baseline[(a, c)].total_cmp(&params.baseline[(b, c)]).then(b.cmp(&a)))
                .unwrap_or(0);
            CrossEdge {
                cascade: c,
                user,
                weight: params.baseline[(user, c)],
            }
        })
        .collect();

    Ok(LayoutDocument {
        schema: LAYOUT_SCHEMA.to_string(),
        options: options.clone(),
        circular_fallback,
        cascade_threshold,
        user_threshold,
        cascade_nodes,
        user_nodes,
        intra_cascade_edges,
        intra_user_edges,
        cross_edges,
    })
}

impl LayoutDocument {
    /// Checks the document invariants: mixtures are distributions, ids exist, positions are finite.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let (nu, nc) = (self.user_nodes.len(), self.cascade_nodes.len());
        let finite = |p: &[f64; 2], h: f64| p.iter().all(|x| x.is_finite()) && h.is_finite();
        for (i, n) in self.cascade_nodes.iter().enumerate() {
            if n.id != i || !finite(&n.position, n.height) {
                return Err(format!("bad cascade node {i}"));
            }
        }
        for (i, n) in self.user_nodes.iter().enumerate() {
            if n.id != i || !finite(&n.position, n.height) {
                return Err(format!("bad user node {i}"));
            }
            let total: f64 = n.mixture.iter().sum();
            if n.mixture.len() != nc || (total - 1.0).abs() > 1e-9 || n.mixture.iter().any(|p| *p < 0.0) {
                return Err(format!("user {i} mixture is not a distribution"));
            }
        }
        if self.intra_cascade_edges.iter().any(|e| e.src >= nc || e.dst >= nc)
            || self.intra_user_edges.iter().any(|e| e.src >= nu || e.dst >= nu)
            || self.cross_edges.iter().any(|e| e.cascade >= nc || e.user >= nu)
        {
            return Err("edge references a missing node".to_string());
        }
        Ok(())
    }
}
