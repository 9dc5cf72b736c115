use serde::Serialize;

use crate::graph::Vertex;

/// Which algorithm produced a clustering and with what settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub algorithm: String,
    pub params: String,
    pub seed: u64,
}

/// A label for every vertex. Labels are canonical: they are numbered in
/// order of first appearance by vertex id, so two clusterings describe the
/// same partition exactly when their label vectors are equal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Clustering {
    labels: Vec<usize>,
    groups: usize,
    pub provenance: Provenance,
}

impl Clustering {
    pub fn from_labels(labels: &[usize], provenance: Provenance) -> Self {
        let mut map = std::collections::HashMap::new();
        let labels: Vec<usize> = labels
            .iter()
            .map(|&l| {
                let next = map.len();
                *map.entry(l).or_insert(next)
            })
            .collect();
        Clustering {
            groups: map.len(),
            labels,
            provenance,
        }
    }

    /// Vertices not covered by any group get a singleton label.
    pub fn from_groups(vertex_count: usize, groups: &[Vec<Vertex>], provenance: Provenance) -> Self {
        let mut raw = vec![usize::MAX; vertex_count];
        for (g, members) in groups.iter().enumerate() {
            for &v in members {
                raw[v as usize] = g;
            }
        }
        let mut next = groups.len();
        for l in raw.iter_mut().filter(|l| **l == usize::MAX) {
            *l = next;
            next += 1;
        }
        Clustering::from_labels(&raw, provenance)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, v: Vertex) -> usize {
        self.labels[v as usize]
    }

    pub fn group_count(&self) -> usize {
        self.groups
    }

    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    /// Members of each group, in label order.
    pub fn groups(&self) -> Vec<Vec<Vertex>> {
        let mut out = vec![Vec::new(); self.groups];
        for (v, &l) in self.labels.iter().enumerate() {
            out[l].push(v as Vertex);
        }
        out
    }

    /// Same partition, ignoring provenance.
    pub fn same_partition(&self, other: &Clustering) -> bool {
        self.labels == other.labels
    }
}
