use serde::{Deserialize, Serialize};

use crate::clustering::{Clustering, Provenance};
use crate::error::{Error, Result};
use crate::exact::{rational_q, within, PowerRows, SquaredNorm};
use crate::graph::{Graph, Vertex};

/// How the distance threshold of power iteration is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum PowerThreshold {
    /// C·√k·√(p(1−q))·(ln N)⁷·(p−q)^{r−1}·n^{r−1}.
    Formula { c: f64 },
    /// Geometric midpoint of the largest ratio between consecutive sorted
    /// distances from vertex 0.
    Gap,
    /// A given value.
    Fixed { delta: f64 },
}

impl Default for PowerThreshold {
    fn default() -> Self {
        PowerThreshold::Gap
    }
}

/// Everything the threshold rules may need besides the distances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerParams {
    pub k: usize,
    pub r: usize,
    pub p: f64,
    pub q: f64,
}

/// Formula threshold with n = N/k and ln of the total vertex count.
pub fn formula_threshold(c: f64, vertex_count: usize, params: &PowerParams) -> f64 {
    let n = (vertex_count / params.k) as f64;
    let (p, q, r) = (params.p, params.q, params.r as i32);
    c * (params.k as f64).sqrt()
        * (p * (1.0 - q)).sqrt()
        * (vertex_count as f64).ln().powi(7)
        * (p - q).powi(r - 1)
        * n.powi(r - 1)
}

/// Largest-ratio split of a distance profile: returns the geometric mean of
/// the two consecutive sorted values with the largest ratio. A zero next to
/// a positive value counts as an infinite ratio.
pub fn gap_threshold(distances: &[f64]) -> Option<f64> {
    let mut d: Vec<f64> = distances.to_vec();
    d.sort_by(f64::total_cmp);
    let mut best: Option<(f64, usize)> = None;
    for i in 0..d.len().saturating_sub(1) {
        let (lo, hi) = (d[i], d[i + 1]);
        if hi <= lo {
            continue;
        }
        let ratio = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if best.map_or(true, |(b, _)| ratio > b) {
            best = Some((ratio, i));
        }
    }
    best.map(|(_, i)| (d[i] * d[i + 1]).sqrt())
}

/// Resolves a threshold rule given the distances from vertex 0 to all other
/// vertices.
pub fn resolve_threshold(
    mode: PowerThreshold,
    anchor_profile: &[f64],
    vertex_count: usize,
    params: &PowerParams,
) -> Result<f64> {
    match mode {
        PowerThreshold::Formula { c } => Ok(formula_threshold(c, vertex_count, params)),
        PowerThreshold::Fixed { delta } => Ok(delta),
        PowerThreshold::Gap => gap_threshold(anchor_profile).ok_or_else(|| {
            Error::recovery("threshold", "all distances from vertex 0 are equal")
        }),
    }
}

/// Result of a power-iteration run.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerOutcome {
    pub clustering: Clustering,
    pub delta: f64,
    /// Distance from vertex 0 to every vertex (0 for itself).
    pub anchor_profile: Vec<f64>,
    pub anchors: Vec<Vertex>,
}

/// Checks r and converts q to an exact rational.
pub(crate) fn prepare(params: &PowerParams) -> Result<num_rational::BigRational> {
    if params.r < 1 {
        return Err(Error::Contract("power iteration needs r >= 1".into()));
    }
    if params.k < 1 {
        return Err(Error::Param("k must be positive".into()));
    }
    rational_q(params.q)
}

/// Peeling on B = A − qJ with a single machine: the lowest remaining id
/// anchors a group holding every remaining u with ‖B_u^r − B_v^r‖ ≤ Δ.
/// Fails unless exactly k groups form.
pub fn power_iteration(graph: &Graph, params: &PowerParams, mode: PowerThreshold) -> Result<PowerOutcome> {
    let q = prepare(params)?;
    let n = graph.vertex_count();
    if n == 0 {
        return Err(Error::Param("empty graph".into()));
    }
    let rows = PowerRows::new(graph, &q, params.r);
    let dist = |x: Vertex, y: Vertex| -> SquaredNorm { rows.squared_distance(x, y) };
    let anchor_profile: Vec<f64> = (0..n as Vertex).map(|u| dist(0, u).distance()).collect();
    let others: Vec<f64> = anchor_profile[1..].to_vec();
    let delta = resolve_threshold(mode, &others, n, params)?;

    let mut labels = vec![usize::MAX; n];
    let mut anchors = Vec::new();
    let mut remaining: Vec<Vertex> = (0..n as Vertex).collect();
    while let Some(&v) = remaining.first() {
        let g = anchors.len();
        anchors.push(v);
        remaining.retain(|&u| {
            let d = if v == 0 { anchor_profile[u as usize] } else { dist(u, v).distance() };
            if u == v || within(d, delta) {
                labels[u as usize] = g;
                false
            } else {
                true
            }
        });
    }
    if anchors.len() != params.k {
        return Err(Error::recovery(
            "peeling",
            format!("{} groups instead of {} (delta = {delta:.6e})", anchors.len(), params.k),
        ));
    }
    Ok(PowerOutcome {
        clustering: Clustering::from_labels(
            &labels,
            Provenance {
                algorithm: "power".into(),
                params: format!("k={} r={} q={} delta={delta:.6e}", params.k, params.r, params.q),
                seed: 0,
            },
        ),
        delta,
        anchor_profile,
        anchors,
    })
}

/// Largest same-cluster and smallest cross-cluster distance from vertex 0.
pub fn anchor_separation(profile: &[f64], truth: &[usize]) -> (f64, f64) {
    let mut same = 0.0f64;
    let mut cross = f64::INFINITY;
    for (u, &d) in profile.iter().enumerate().skip(1) {
        if truth[u] == truth[0] {
            same = same.max(d);
        } else {
            cross = cross.min(d);
        }
    }
    (same, cross)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sbm::{generate_sbm, SbmParams};

    #[test]
    fn gap_picks_largest_ratio() {
        let t = gap_threshold(&[1.0, 1.2, 1.1, 10.0, 11.0]).unwrap();
        assert!((t - (1.2f64 * 10.0).sqrt()).abs() < 1e-12);
        assert_eq!(gap_threshold(&[3.0, 3.0]), None);
        assert_eq!(gap_threshold(&[0.0, 0.0, 4.0]), Some(0.0));
    }

    #[test]
    fn self_distance_is_zero() {
        let inst = generate_sbm(SbmParams::new(10, 2, 0.6, 0.1, 5)).unwrap();
        let g = inst.graph();
        let q = rational_q(0.1).unwrap();
        let rows = PowerRows::new(&g, &q, 3);
        for v in 0..20 {
            assert_eq!(rows.squared_distance(v, v).to_f64(), 0.0);
        }
    }

    #[test]
    fn recovers_three_clusters() {
        let inst = generate_sbm(SbmParams::new(60, 3, 0.6, 0.1, 2)).unwrap();
        let g = inst.graph();
        let params = PowerParams { k: 3, r: 3, p: 0.6, q: 0.1 };
        let out = power_iteration(&g, &params, PowerThreshold::Gap).unwrap();
        let truth = Clustering::from_labels(&inst.truth, out.clustering.provenance.clone());
        assert!(out.clustering.same_partition(&truth));
        let (same, cross) = anchor_separation(&out.anchor_profile, &inst.truth);
        assert!(same < cross);
    }

    #[test]
    fn formula_mode_is_huge_at_small_scale() {
        let params = PowerParams { k: 2, r: 3, p: 0.6, q: 0.1 };
        assert!(formula_threshold(1.0, 120, &params) > 1e6);
    }
}
