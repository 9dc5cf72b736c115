use crate::error::{Error, Result};
use crate::graph::{Graph, Vertex};
use crate::mpc::{ceil_log, copy_sets, ClusterState, CopyLayout, RegionId};

/// Bit-packed neighborhoods of a vertex subset: member i owns the slab of
/// `stride` words starting at word `i·stride`, and bit v of every slab
/// refers to vertex v.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborLayout {
    members: Vec<Vertex>,
    vertex_count: usize,
    stride: usize,
    bits: Vec<u64>,
    region: RegionId,
}

/// Words per slab for N vertices.
pub fn slab_stride(vertex_count: usize) -> usize {
    vertex_count.div_ceil(64).max(1)
}

impl NeighborLayout {
    fn build(graph: &Graph, members: Vec<Vertex>, region: RegionId) -> Self {
        let vertex_count = graph.vertex_count();
        let stride = slab_stride(vertex_count);
        let mut bits = vec![0u64; members.len() * stride];
        for (i, &u) in members.iter().enumerate() {
            let slab = &mut bits[i * stride..(i + 1) * stride];
            for &v in graph.neighbors(u) {
                slab[v as usize / 64] |= 1 << (v % 64);
            }
        }
        NeighborLayout {
            members,
            vertex_count,
            stride,
            bits,
            region,
        }
    }

    pub fn members(&self) -> &[Vertex] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn region(&self) -> RegionId {
        self.region
    }

    /// Word offset of member i's slab.
    pub fn base(&self, i: usize) -> usize {
        i * self.stride
    }

    pub fn slab(&self, i: usize) -> &[u64] {
        &self.bits[self.base(i)..self.base(i) + self.stride]
    }

    /// Whether slot v of member i's slab is set, i.e. v ∈ N(members[i]).
    pub fn slot(&self, i: usize, v: Vertex) -> bool {
        self.slab(i)[v as usize / 64] >> (v % 64) & 1 == 1
    }

    pub fn release(self, cluster: &mut ClusterState) {
        cluster.free(self.region);
    }
}

fn reorganize(
    cluster: &mut ClusterState,
    graph: &Graph,
    edges: RegionId,
    members: Vec<Vertex>,
    context: &str,
) -> Result<NeighborLayout> {
    let words = members.len() * slab_stride(graph.vertex_count());
    let region = cluster.alloc(context, words).map_err(|e| match e {
        Error::Capacity {
            needed, available, ..
        } => Error::Capacity {
            context: context.to_string(),
            needed,
            available,
        },
        other => other,
    })?;
    let c = cluster.config().c_sort;
    cluster.charge_log("sort", c, 2 * graph.edge_count(), &[edges])?;
    cluster.charge("reorganize", 2, &[region])?;
    Ok(NeighborLayout::build(graph, members, region))
}

/// Slabs for every vertex: edge (i, j) sets slot j of slab i and slot i of
/// slab j. Needs N·⌈N/64⌉ words.
pub fn reorganize_nbr_dense(cluster: &mut ClusterState, graph: &Graph, edges: RegionId) -> Result<NeighborLayout> {
    let members = (0..graph.vertex_count() as Vertex).collect();
    reorganize(
        cluster,
        graph,
        edges,
        members,
        "dense neighbor layout (use reorganize_nbr on a sample)",
    )
}

/// Slabs for the given members, in the given order.
pub fn reorganize_nbr(
    cluster: &mut ClusterState,
    graph: &Graph,
    edges: RegionId,
    members: &[Vertex],
) -> Result<NeighborLayout> {
    reorganize(cluster, graph, edges, members.to_vec(), "neighbor layout")
}

/// `t` contiguous copies of every slab of a layout; copy j of member i
/// starts at word `(i·t + j)·stride` of the copy region.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborCopies {
    pub copies: CopyLayout,
    pub t: usize,
    pub stride: usize,
}

impl NeighborCopies {
    pub fn base(&self, member: usize, copy: usize) -> usize {
        self.copies.slab(member, copy).offset
    }

    pub fn region(&self) -> RegionId {
        self.copies.region
    }

    pub fn release(self, cluster: &mut ClusterState) {
        cluster.free(self.copies.region);
    }
}

pub fn copy_nbr(cluster: &mut ClusterState, layout: &NeighborLayout, t: usize) -> Result<NeighborCopies> {
    let words = vec![layout.stride; layout.len()];
    let mult = vec![t; layout.len()];
    let copies = copy_sets(cluster, &words, &mult)?;
    Ok(NeighborCopies {
        copies,
        t,
        stride: layout.stride,
    })
}

/// |N(a_i) ∩ N(b_j)| for every requested pair `(i, j)` of member indices.
/// Each pair is compared word by word where the aligned copies sit, then
/// the partial counts are summed up a tree over the slab's machines.
pub fn compare_grp(
    cluster: &mut ClusterState,
    a: &NeighborLayout,
    b: &NeighborLayout,
    pairs: &[(usize, usize)],
    traffic: &[RegionId],
) -> Result<Vec<u32>> {
    if a.stride != b.stride || a.vertex_count != b.vertex_count {
        return Err(Error::Contract(format!(
            "misaligned slabs: strides {} and {}",
            a.stride, b.stride
        )));
    }
    let rounds = 1 + ceil_log(cluster.s(), a.stride);
    cluster.charge("compare_grp", rounds, traffic)?;
    Ok(pairs
        .iter()
        .map(|&(i, j)| {
            a.slab(i)
                .iter()
                .zip(b.slab(j))
                .map(|(x, y)| (x & y).count_ones())
                .sum()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpc::MpcConfig;

    fn setup(graph: &Graph) -> (ClusterState, RegionId) {
        let mut c = ClusterState::new(64, 16, MpcConfig::default(), graph.vertex_count()).unwrap();
        let e = c.alloc("edges", 2 * graph.edge_count()).unwrap();
        (c, e)
    }

    #[test]
    fn triangle_slots() {
        let g = Graph::from_edges(3, &[(0, 1), (0, 2), (1, 2)]).unwrap();
        let (mut c, e) = setup(&g);
        let l = reorganize_nbr_dense(&mut c, &g, e).unwrap();
        let set: Vec<usize> = (0..3)
            .flat_map(|i| (0..3u32).map(move |j| (i, j)))
            .filter(|&(i, j)| l.slot(i, j))
            .map(|(i, j)| 3 * i + j as usize)
            .collect();
        assert_eq!(set, vec![1, 2, 3, 5, 6, 7]);
    }

    #[test]
    fn empty_and_single_edge() {
        let g = Graph::from_edges(5, &[]).unwrap();
        let (mut c, e) = setup(&g);
        let l = reorganize_nbr_dense(&mut c, &g, e).unwrap();
        assert!((0..5).all(|i| l.slab(i).iter().all(|&w| w == 0)));

        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let (mut c, e) = setup(&g);
        let l = reorganize_nbr_dense(&mut c, &g, e).unwrap();
        assert!(l.slot(0, 1) && l.slot(1, 0) && !l.slot(0, 0) && !l.slot(1, 1));
    }

    #[test]
    fn sampled_path_layout() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let (mut c, e) = setup(&g);
        let l = reorganize_nbr(&mut c, &g, e, &[0, 2]).unwrap();
        for i in 0..2 {
            assert_eq!((0..3).filter(|&v| l.slot(i, v)).collect::<Vec<_>>(), vec![1]);
        }
        let one = reorganize_nbr(&mut c, &g, e, &[1]).unwrap();
        assert!(one.slot(0, 0) && one.slot(0, 2) && !one.slot(0, 1));
    }

    #[test]
    fn dense_layout_over_budget() {
        let g = Graph::from_edges(200, &[(0, 1)]).unwrap();
        let mut c = ClusterState::new(4, 16, MpcConfig::default(), 200).unwrap();
        let e = c.alloc("edges", 2).unwrap();
        match reorganize_nbr_dense(&mut c, &g, e).unwrap_err() {
            Error::Capacity { context, .. } => assert!(context.contains("sample")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn copy_bases() {
        let g = Graph::from_edges(100, &[(0, 1)]).unwrap();
        let (mut c, e) = setup(&g);
        let l = reorganize_nbr(&mut c, &g, e, &[3, 9]).unwrap();
        let copies = copy_nbr(&mut c, &l, 3).unwrap();
        assert_eq!(copies.copies.slabs.len(), 6);
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(copies.base(i, j), (i * 3 + j) * 2);
            }
        }
        let mut small = ClusterState::new(2, 16, MpcConfig::default(), 100).unwrap();
        let e = small.alloc("edges", 2).unwrap();
        let l = reorganize_nbr(&mut small, &g, e, &[3, 9]).unwrap();
        assert!(matches!(copy_nbr(&mut small, &l, 10), Err(Error::Capacity { .. })));
    }

    #[test]
    fn intersection_counts() {
        let k4: Vec<(Vertex, Vertex)> = vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3), (4, 5)];
        let g = Graph::from_edges(7, &k4).unwrap();
        let (mut c, e) = setup(&g);
        let l = reorganize_nbr_dense(&mut c, &g, e).unwrap();
        let r = l.region();
        let counts = compare_grp(&mut c, &l, &l, &[(0, 0), (0, 1), (0, 4), (6, 6)], &[r]).unwrap();
        assert_eq!(counts, vec![3, 2, 0, 0]);

        let other = Graph::from_edges(70, &[]).unwrap();
        let wide = reorganize_nbr(&mut c, &other, e, &[0]).unwrap();
        assert!(matches!(
            compare_grp(&mut c, &l, &wide, &[(0, 0)], &[r]),
            Err(Error::Contract(_))
        ));
    }
}
