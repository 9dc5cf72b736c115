use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::exact::{split_q, SquaredNorm};
use crate::graph::Vertex;
use super::walks::WalkTable;

/// Largest supported r: 2^{2r} strings are enumerated.
pub const R_MAX: usize = 10;

/// Grouped coefficients of 1_xᵀ(A − qJ)^{2r}1_y.
///
/// Every string over {A, −qJ} other than A^{2r} collapses to
/// X·(A^{i₁}1)_x·(A^{i_t}1)_y, keyed by its leading and trailing A-runs.
/// Coefficients are kept multiplied by b^{2r} (q = a/b), which makes them
/// integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expansion {
    r: usize,
    scale: BigInt,
    scaled: Vec<Vec<BigInt>>,
    strings: Vec<Vec<usize>>,
}

impl Expansion {
    pub fn r(&self) -> usize {
        self.r
    }

    /// b^{2r}.
    pub fn scale(&self) -> &BigInt {
        &self.scale
    }

    /// X_{i₁,i_t} as an exact rational.
    pub fn coefficient(&self, i1: usize, it: usize) -> BigRational {
        BigRational::new(self.scaled[i1][it].clone(), self.scale.clone())
    }

    /// b^{2r}·X_{i₁,i_t}.
    pub fn scaled(&self, i1: usize, it: usize) -> &BigInt {
        &self.scaled[i1][it]
    }

    /// How many strings collapsed into X_{i₁,i_t}.
    pub fn string_count(&self, i1: usize, it: usize) -> usize {
        self.strings[i1][it]
    }

    /// Strings accounted for, including the pure-A one.
    pub fn total_strings(&self) -> usize {
        1 + self.strings.iter().flatten().sum::<usize>()
    }

    /// b^{2r}·Σ_{i₁} X_{i₁,i_t}·a[i₁][v] for every i_t: the anchor side of a
    /// batch of pair values against v.
    pub fn anchor_weights(&self, table: &WalkTable, v: Vertex) -> Vec<BigInt> {
        let width = 2 * self.r + 1;
        (0..width)
            .map(|it| {
                (0..width)
                    .filter(|&i1| !self.scaled[i1][it].is_zero())
                    .map(|i1| &self.scaled[i1][it] * BigInt::from(table.a(i1, v).clone()))
                    .sum()
            })
            .collect()
    }

    /// b^{2r}·1_vᵀ(A − qJ)^{2r}1_u given (A^{2r})_{v,u} and v's anchor weights.
    pub fn pair_value(&self, table: &WalkTable, weights: &[BigInt], u: Vertex, pure: &BigUint) -> BigInt {
        let mut acc = &self.scale * BigInt::from(pure.clone());
        for (it, w) in weights.iter().enumerate() {
            if !w.is_zero() {
                acc += w * BigInt::from(table.a(it, u).clone());
            }
        }
        acc
    }
}

/// Enumerates all 2^{2r} strings over {A, −qJ} and collapses each with
/// J^j = N^{j−1}J and J·A^i·J = C_i·J, N being the matrix dimension.
pub fn expansion_coefficients(r: usize, q: &BigRational, vertex_count: usize, totals: &[BigUint]) -> Result<Expansion> {
    if r > R_MAX {
        return Err(Error::Capability(format!("r = {r} exceeds the supported maximum {R_MAX}")));
    }
    if totals.len() < 2 * r + 1 {
        return Err(Error::Param(format!("need walk totals C_0..C_{}", 2 * r)));
    }
    let len = 2 * r;
    let (a, b) = split_q(q);
    let neg_a = -a;
    let n = BigInt::from(vertex_count);
    let pow = |base: &BigInt, e: usize| -> BigInt { num_traits::pow(base.clone(), e) };
    let neg_a_pow: Vec<BigInt> = (0..=len).map(|e| pow(&neg_a, e)).collect();
    let b_pow: Vec<BigInt> = (0..=len).map(|e| pow(&b, e)).collect();
    let n_pow: Vec<BigInt> = (0..=len).map(|e| pow(&n, e)).collect();
    let c: Vec<BigInt> = totals.iter().map(|t| BigInt::from(t.clone())).collect();

    let width = len + 1;
    let mut scaled = vec![vec![BigInt::zero(); width]; width];
    let mut strings = vec![vec![0usize; width]; width];
    for mask in 1u32..(1u32 << len) {
        // Bit i set means position i holds −qJ.
        let is_q = |i: usize| mask >> i & 1 == 1;
        let lead = (0..len).take_while(|&i| !is_q(i)).count();
        let trail = (0..len).rev().take_while(|&i| !is_q(i)).count();
        let q_count = mask.count_ones() as usize;
        let mut n_exp = 0;
        let mut coef = neg_a_pow[q_count].clone() * &b_pow[len - q_count];
        let mut i = lead;
        while i < len - trail {
            let j_run = (i..len).take_while(|&p| is_q(p)).count();
            n_exp += j_run - 1;
            i += j_run;
            if i < len - trail {
                let a_run = (i..len).take_while(|&p| !is_q(p)).count();
                coef *= &c[a_run];
                i += a_run;
            }
        }
        coef *= &n_pow[n_exp];
        scaled[lead][trail] += coef;
        strings[lead][trail] += 1;
    }
    Ok(Expansion {
        r,
        scale: b_pow[len].clone(),
        scaled,
        strings,
    })
}

/// ‖B_x^r − B_y^r‖² from the walk table and the two rows (A^{2r})_{x,·} and
/// (A^{2r})_{y,·}. The result has denominator b^{2r}.
pub fn compute_norm(
    expansion: &Expansion,
    table: &WalkTable,
    row_x: &[BigUint],
    row_y: &[BigUint],
    x: Vertex,
    y: Vertex,
) -> SquaredNorm {
    let wx = expansion.anchor_weights(table, x);
    let wy = expansion.anchor_weights(table, y);
    let sxx = expansion.pair_value(table, &wx, x, &row_x[x as usize]);
    let sxy = expansion.pair_value(table, &wx, y, &row_x[y as usize]);
    let syy = expansion.pair_value(table, &wy, y, &row_y[y as usize]);
    let num = sxx - BigInt::from(2) * sxy + syy;
    debug_assert!(!num.is_negative());
    SquaredNorm {
        num,
        den: expansion.scale.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algos::walks::arx_row;
    use crate::exact::{norm_oracle, rational_q};
    use crate::graph::Graph;

    fn q(num: i64, den: i64) -> BigRational {
        BigRational::new(num.into(), den.into())
    }

    #[test]
    fn r1_hand_expansion() {
        let totals: Vec<BigUint> = [5u32, 8, 20].iter().map(|&v| BigUint::from(v)).collect();
        let qv = q(1, 10);
        let e = expansion_coefficients(1, &qv, 5, &totals).unwrap();
        assert_eq!(e.coefficient(1, 0), -qv.clone());
        assert_eq!(e.coefficient(0, 1), -qv.clone());
        assert_eq!(e.coefficient(0, 0), &qv * &qv * BigRational::from_integer(5.into()));
        assert_eq!(e.coefficient(1, 1), BigRational::zero());
        assert_eq!(e.total_strings(), 4);
    }

    #[test]
    fn zero_q_leaves_pure_term() {
        let totals = vec![BigUint::from(3u8); 7];
        let e = expansion_coefficients(3, &rational_q(0.0).unwrap(), 3, &totals).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                assert!(e.scaled(i, j).is_zero());
            }
        }
        assert_eq!(e.total_strings(), 64);
    }

    #[test]
    fn string_counts_cover_everything() {
        let totals = vec![BigUint::from(1u8); 9];
        let e = expansion_coefficients(4, &q(1, 4), 2, &totals).unwrap();
        assert_eq!(e.total_strings(), 1 << 8);
    }

    #[test]
    fn r_beyond_limit() {
        let totals = vec![BigUint::from(1u8); 23];
        assert!(matches!(
            expansion_coefficients(11, &q(1, 4), 2, &totals),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn norms_match_oracle_on_a_small_graph() {
        let g = Graph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5)]).unwrap();
        for r in 1..=3 {
            let t = WalkTable::compute(&g, r);
            for qv in [q(0, 1), q(1, 10), q(1, 4)] {
                let e = expansion_coefficients(r, &qv, 6, t.totals()).unwrap();
                let rows: Vec<_> = (0..6).map(|x| arx_row(&g, x, 2 * r)).collect();
                for x in 0..6u32 {
                    for y in 0..6u32 {
                        let got = compute_norm(&e, &t, &rows[x as usize], &rows[y as usize], x, y);
                        assert_eq!(got.to_rational(), norm_oracle(&g, &qv, x, y, r), "r={r} x={x} y={y}");
                    }
                }
            }
        }
    }

    #[test]
    fn self_distance_is_zero() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let t = WalkTable::compute(&g, 2);
        let e = expansion_coefficients(2, &q(1, 10), 3, t.totals()).unwrap();
        let row = arx_row(&g, 1, 4);
        assert!(compute_norm(&e, &t, &row, &row, 1, 1).num.is_zero());
    }
}
