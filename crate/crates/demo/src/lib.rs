//! Browser bindings: cluster a small SBM graph, inspect the distance profile
//! the power iteration thresholds, and measure rounds against machine size.

use wasm_bindgen::prelude::*;

use sbm_mpc::eval::{run_cell, Algorithm, Cell, ExperimentConfig, SChoice};
use sbm_mpc::sbm::{generate_sbm, SbmParams};
use sbm_mpc::seq::{gap_threshold, power_iteration, DeltaRule, PowerParams, PowerThreshold};

/// Largest graph the page will build, to keep it responsive.
pub const MAX_VERTICES: usize = 600;

fn params(n: usize, k: usize, p: f64, q: f64, seed: u64) -> Result<SbmParams, String> {
    let params = SbmParams::new(n, k, p, q, seed);
    params.validate_model().map_err(|e| e.to_string())?;
    if params.vertex_count() > MAX_VERTICES {
        return Err(format!("at most {MAX_VERTICES} vertices in the demo"));
    }
    Ok(params)
}

fn config(algorithm: Algorithm, params: SbmParams, r: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::single(algorithm, params);
    c.r = vec![r];
    c.delta_rule = DeltaRule::Gap;
    c
}

/// One clustering run with the graph it ran on.
#[wasm_bindgen]
pub struct Clustered {
    vertex_count: usize,
    edges: Vec<u32>,
    truth: Vec<u32>,
    labels: Vec<u32>,
    recovered: bool,
    misclassified: i32,
    rounds: i32,
    peak_words: f64,
    failure: String,
}

#[wasm_bindgen]
impl Clustered {
    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }
    /// Edge endpoints, flattened as u0, v0, u1, v1, ...
    pub fn edges(&self) -> Vec<u32> {
        self.edges.clone()
    }
    pub fn truth(&self) -> Vec<u32> {
        self.truth.clone()
    }
    /// Found labels; empty when the run failed.
    pub fn labels(&self) -> Vec<u32> {
        self.labels.clone()
    }
    pub fn recovered(&self) -> bool {
        self.recovered
    }
    /// -1 when the run failed before labelling.
    pub fn misclassified(&self) -> i32 {
        self.misclassified
    }
    /// -1 for the single-machine algorithms.
    pub fn rounds(&self) -> i32 {
        self.rounds
    }
    pub fn peak_words(&self) -> f64 {
        self.peak_words
    }
    /// Stage that failed, or empty.
    pub fn failure(&self) -> String {
        self.failure.clone()
    }
}

pub fn cluster_graph(
    algorithm: &str,
    n: usize,
    k: usize,
    p: f64,
    q: f64,
    r: usize,
    seed: u64,
) -> Result<Clustered, String> {
    let algorithm = Algorithm::parse(algorithm).ok_or_else(|| format!("unknown algorithm {algorithm:?}"))?;
    let params = params(n, k, p, q, seed)?;
    let instance = generate_sbm(params).map_err(|e| e.to_string())?;
    let config = config(algorithm, params, r);
    let cell = config.cells(0)[0];
    let report = run_cell(&config, &cell);
    Ok(Clustered {
        vertex_count: instance.vertex_count(),
        edges: instance.edges.iter().flat_map(|&(u, v)| [u, v]).collect(),
        truth: instance.truth.iter().map(|&t| t as u32).collect(),
        labels: report
            .labels
            .unwrap_or_default()
            .into_iter()
            .map(|l| l as u32)
            .collect(),
        recovered: report.recovered,
        misclassified: report.misclassified.map_or(-1, |m| m as i32),
        rounds: report.rounds.map_or(-1, |r| r as i32),
        peak_words: report.peak_words.unwrap_or(0) as f64,
        failure: report.fail_stage.unwrap_or_default(),
    })
}

/// Generates an instance and clusters it. `algorithm` is one of commnbr,
/// power, mpc-commnbr, mpc-power, mpc-power-par.
#[wasm_bindgen]
pub fn cluster(algorithm: &str, n: usize, k: usize, p: f64, q: f64, r: usize, seed: u64) -> Result<Clustered, JsError> {
    cluster_graph(algorithm, n, k, p, q, r, seed).map_err(|e| JsError::new(&e))
}

/// Distances from vertex 0 under the power iteration, and the gap threshold.
#[wasm_bindgen]
pub struct Profile {
    distances: Vec<f64>,
    same_cluster: Vec<u8>,
    threshold: f64,
}

#[wasm_bindgen]
impl Profile {
    /// ‖B_0^r − B_u^r‖ for every u other than 0.
    pub fn distances(&self) -> Vec<f64> {
        self.distances.clone()
    }
    /// 1 where u shares vertex 0's planted cluster.
    pub fn same_cluster(&self) -> Vec<u8> {
        self.same_cluster.clone()
    }
    /// NaN when all distances are equal.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

pub fn distance_profile(n: usize, k: usize, p: f64, q: f64, r: usize, seed: u64) -> Result<Profile, String> {
    let params = params(n, k, p, q, seed)?;
    let instance = generate_sbm(params).map_err(|e| e.to_string())?;
    let power = PowerParams { k, r, p, q };
    // The first anchor's profile is all the page needs; a later peeling
    // failure does not matter here, so fall back to a fixed threshold that
    // stops after one group.
    let outcome = power_iteration(&instance.graph(), &power, PowerThreshold::Gap)
        .or_else(|_| power_iteration(&instance.graph(), &power, PowerThreshold::Fixed { delta: f64::MAX }))
        .map_err(|e| e.to_string())?;
    let distances: Vec<f64> = outcome.anchor_profile[1..].to_vec();
    Ok(Profile {
        threshold: gap_threshold(&distances).unwrap_or(f64::NAN),
        same_cluster: instance.truth[1..].iter().map(|&t| u8::from(t == instance.truth[0])).collect(),
        distances,
    })
}

#[wasm_bindgen]
pub fn profile(n: usize, k: usize, p: f64, q: f64, r: usize, seed: u64) -> Result<Profile, JsError> {
    distance_profile(n, k, p, q, r, seed).map_err(|e| JsError::new(&e))
}

pub fn rounds_for_s(algorithm: &str, n: usize, k: usize, p: f64, q: f64, seed: u64, s: &[u32]) -> Result<Vec<i32>, String> {
    let algorithm = Algorithm::parse(algorithm)
        .filter(|a| a.is_mpc())
        .ok_or_else(|| format!("{algorithm:?} is not an MPC algorithm"))?;
    let params = params(n, k, p, q, seed)?;
    let config = config(algorithm, params, 3);
    Ok(s.iter()
        .map(|&words| {
            let cell = Cell {
                s: Some(SChoice::Words(words as usize)),
                ..config.cells(0)[0]
            };
            run_cell(&config, &cell).rounds.map_or(-1, |r| r as i32)
        })
        .collect())
}

/// Ledger round counts of one instance for each machine size in `s`; -1
/// where the run could not start (s too small for the model).
#[wasm_bindgen]
pub fn rounds_vs_s(algorithm: &str, n: usize, k: usize, p: f64, q: f64, seed: u64, s: Vec<u32>) -> Result<Vec<i32>, JsError> {
    rounds_for_s(algorithm, n, k, p, q, seed, &s).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clusters_a_small_graph() {
        let c = cluster_graph("mpc-power", 30, 2, 0.7, 0.05, 3, 1).unwrap();
        assert_eq!(c.vertex_count(), 60);
        assert!(c.recovered(), "{}", c.failure());
        assert_eq!(c.labels().len(), 60);
        assert!(c.rounds() > 0);
        assert_eq!(c.edges().len() % 2, 0);
    }

    #[test]
    fn rejects_large_or_invalid_graphs() {
        assert!(cluster_graph("power", 1000, 2, 0.5, 0.1, 3, 0).is_err());
        assert!(cluster_graph("power", 10, 2, 0.1, 0.5, 3, 0).is_err());
        assert!(cluster_graph("spectral", 10, 2, 0.5, 0.1, 3, 0).is_err());
    }

    #[test]
    fn profile_separates_clusters() {
        let p = distance_profile(30, 2, 0.7, 0.05, 3, 1).unwrap();
        assert_eq!(p.distances().len(), 59);
        for (d, same) in p.distances().iter().zip(p.same_cluster()) {
            assert_eq!(*d < p.threshold(), same == 1);
        }
    }

    #[test]
    fn rounds_fall_with_s() {
        let rounds = rounds_for_s("mpc-commnbr", 40, 2, 0.7, 0.05, 0, &[16, 64, 256]).unwrap();
        assert!(rounds.iter().all(|&r| r > 0));
        assert!(rounds.windows(2).all(|w| w[0] >= w[1]), "{rounds:?}");
        assert!(rounds_for_s("power", 40, 2, 0.7, 0.05, 0, &[16]).is_err());
    }
}
