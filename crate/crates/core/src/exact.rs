//! Exact arithmetic shared by the power-iteration paths.
//!
//! With q = a/b, the integer matrix M = bA − aJ equals b·B, so squared
//! distances between rows of B^r are integers divided by b^{2r}.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{CheckedAdd, CheckedMul, CheckedSub, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// The exact rational written by the shortest decimal form of `q`, so
/// 0.1 becomes 1/10.
pub fn rational_q(q: f64) -> Result<BigRational> {
    if !q.is_finite() || q < 0.0 {
        return Err(Error::Param(format!("q must be a finite non-negative number, got {q}")));
    }
    let text = format!("{q}");
    let (int, frac) = text.split_once('.').unwrap_or((&text, ""));
    let digits: BigInt = format!("{int}{frac}")
        .parse()
        .map_err(|_| Error::Param(format!("cannot read {q} as a decimal")))?;
    let den = num_traits::pow(BigInt::from(10), frac.len());
    Ok(BigRational::new(digits, den))
}

/// Numerator and denominator of a non-negative rational q.
pub(crate) fn split_q(q: &BigRational) -> (BigInt, BigInt) {
    (q.numer().clone(), q.denom().clone())
}

/// A squared distance `num / den` with den = b^{2r}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SquaredNorm {
    pub num: BigInt,
    pub den: BigInt,
}

impl SquaredNorm {
    pub fn to_rational(&self) -> BigRational {
        BigRational::new(self.num.clone(), self.den.clone())
    }

    /// Correctly rounded value of the rational.
    pub fn to_f64(&self) -> f64 {
        // Rounding does not depend on reduction, so skip the gcd.
        BigRational::new_raw(self.num.clone(), self.den.clone())
            .to_f64()
            .unwrap_or(f64::INFINITY)
    }

    /// Distance (square root), as used for threshold decisions.
    pub fn distance(&self) -> f64 {
        self.to_f64().max(0.0).sqrt()
    }
}

/// Whether a distance is within the threshold, with a relative guard band
/// of 1e-9.
pub fn within(distance: f64, delta: f64) -> bool {
    distance <= delta * (1.0 + 1e-9)
}

trait Exact: Clone + Zero + CheckedAdd + CheckedSub + CheckedMul {
    fn from_big(v: &BigInt) -> Option<Self>;
    fn to_big(&self) -> BigInt;
}

impl Exact for i128 {
    fn from_big(v: &BigInt) -> Option<Self> {
        v.to_i128()
    }
    fn to_big(&self) -> BigInt {
        BigInt::from(*self)
    }
}

impl Exact for BigInt {
    fn from_big(v: &BigInt) -> Option<Self> {
        Some(v.clone())
    }
    fn to_big(&self) -> BigInt {
        self.clone()
    }
}

/// Rows of (bA − aJ)^r for every vertex, stored exactly.
#[derive(Debug, Clone)]
pub struct PowerRows {
    rows: Rows,
    n: usize,
    den: BigInt,
}

#[derive(Debug, Clone)]
enum Rows {
    Small(Vec<i128>),
    Big(Vec<BigInt>),
}

fn power_rows<T: Exact>(graph: &Graph, a: &BigInt, b: &BigInt, r: usize) -> Option<Vec<T>> {
    let n = graph.vertex_count();
    let a = T::from_big(a)?;
    let b = T::from_big(b)?;
    let one = T::from_big(&BigInt::one())?;
    let mut x = vec![T::zero(); n * n];
    for i in 0..n {
        x[i * n + i] = one.clone();
    }
    for _ in 0..r {
        let mut colsum = vec![T::zero(); n];
        for row in x.chunks(n) {
            for (c, v) in colsum.iter_mut().zip(row) {
                *c = c.checked_add(v)?;
            }
        }
        let mut next = vec![T::zero(); n * n];
        for u in 0..n {
            let out = &mut next[u * n..(u + 1) * n];
            for &w in graph.neighbors(u as u32) {
                for (o, v) in out.iter_mut().zip(&x[w as usize * n..(w as usize + 1) * n]) {
                    *o = o.checked_add(v)?;
                }
            }
            for (o, c) in out.iter_mut().zip(&colsum) {
                *o = o.checked_mul(&b)?.checked_sub(&c.checked_mul(&a)?)?;
            }
        }
        x = next;
    }
    Some(x)
}

fn squared_diff<T: Exact>(x: &[T], y: &[T]) -> Option<T> {
    let mut acc = T::zero();
    for (p, q) in x.iter().zip(y) {
        let d = p.checked_sub(q)?;
        acc = acc.checked_add(&d.checked_mul(&d)?)?;
    }
    Some(acc)
}

impl PowerRows {
    pub fn new(graph: &Graph, q: &BigRational, r: usize) -> Self {
        let (a, b) = split_q(q);
        let n = graph.vertex_count();
        let den = num_traits::pow(b.clone(), 2 * r);
        let rows = match power_rows::<i128>(graph, &a, &b, r) {
            Some(small) if Self::squares_fit(&small, n) => Rows::Small(small),
            _ => Rows::Big(power_rows::<BigInt>(graph, &a, &b, r).expect("big integers do not overflow")),
        };
        PowerRows { rows, n, den }
    }

    fn squares_fit(rows: &[i128], n: usize) -> bool {
        let max = rows.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0);
        // (2·max)²·n must stay below 2^127.
        let bits = 128 - max.leading_zeros() as usize + 1;
        2 * bits + (usize::BITS - n.leading_zeros()) as usize <= 126
    }

    /// Exact ‖B_x^r − B_y^r‖².
    pub fn squared_distance(&self, x: u32, y: u32) -> SquaredNorm {
        let (x, y, n) = (x as usize, y as usize, self.n);
        let num = match &self.rows {
            Rows::Small(v) => squared_diff(&v[x * n..(x + 1) * n], &v[y * n..(y + 1) * n])
                .expect("range checked at construction")
                .to_big(),
            Rows::Big(v) => squared_diff(&v[x * n..(x + 1) * n], &v[y * n..(y + 1) * n]).unwrap(),
        };
        SquaredNorm {
            num,
            den: self.den.clone(),
        }
    }

    pub fn uses_big_integers(&self) -> bool {
        matches!(self.rows, Rows::Big(_))
    }
}

/// Independent dense route to ‖B_x^r − B_y^r‖²: the row vector
/// (1_x − 1_y)ᵀ is multiplied r times by the dense integer matrix bA − aJ.
pub fn norm_oracle(graph: &Graph, q: &BigRational, x: u32, y: u32, r: usize) -> BigRational {
    let n = graph.vertex_count();
    let (a, b) = split_q(q);
    let m: Vec<BigInt> = (0..n * n)
        .map(|i| {
            let adj = graph.has_edge((i / n) as u32, (i % n) as u32);
            if adj { &b - &a } else { -a.clone() }
        })
        .collect();
    let mut v = vec![BigInt::zero(); n];
    v[x as usize] += 1;
    v[y as usize] -= 1;
    for _ in 0..r {
        v = (0..n)
            .map(|col| (0..n).map(|row| &v[row] * &m[row * n + col]).sum())
            .collect();
    }
    let num: BigInt = v.iter().map(|e| e * e).sum();
    BigRational::new(num, num_traits::pow(b, 2 * r))
}

/// Dense integer power A^e of the adjacency matrix, row-major.
pub fn dense_adjacency_power(graph: &Graph, e: usize) -> Vec<BigUint> {
    let n = graph.vertex_count();
    let adj: Vec<BigUint> = (0..n * n)
        .map(|i| BigUint::from(u8::from(graph.has_edge((i / n) as u32, (i % n) as u32))))
        .collect();
    let mut acc: Vec<BigUint> = (0..n * n).map(|i| BigUint::from(u8::from(i / n == i % n))).collect();
    for _ in 0..e {
        let mut next = vec![BigUint::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                let v = &acc[i * n + j];
                if v.is_zero() {
                    continue;
                }
                for l in 0..n {
                    if !adj[j * n + l].is_zero() {
                        next[i * n + l] += v;
                    }
                }
            }
        }
        acc = next;
    }
    acc
}

/// True when `x` is non-negative, for assertions on squared norms.
pub fn is_non_negative(x: &BigRational) -> bool {
    !x.is_negative()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_rationals() {
        assert_eq!(rational_q(0.1).unwrap(), BigRational::new(1.into(), 10.into()));
        assert_eq!(rational_q(0.25).unwrap(), BigRational::new(1.into(), 4.into()));
        assert_eq!(rational_q(0.0).unwrap(), BigRational::zero());
        assert!(rational_q(-0.5).is_err());
    }

    #[test]
    fn single_edge_oracle() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let q = BigRational::zero();
        assert_eq!(norm_oracle(&g, &q, 0, 1, 1), BigRational::from_integer(2.into()));
        assert_eq!(norm_oracle(&g, &q, 0, 0, 1), BigRational::zero());
        let rows = PowerRows::new(&g, &q, 1);
        assert_eq!(rows.squared_distance(0, 1).to_rational(), BigRational::from_integer(2.into()));
    }

    #[test]
    fn rows_match_oracle() {
        let g = Graph::from_edges(6, &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (2, 3)]).unwrap();
        let q = rational_q(0.1).unwrap();
        for r in 1..=3 {
            let rows = PowerRows::new(&g, &q, r);
            for x in 0..6 {
                for y in 0..6 {
                    let o = norm_oracle(&g, &q, x, y, r);
                    assert_eq!(rows.squared_distance(x, y).to_rational(), o);
                    assert_eq!(o, norm_oracle(&g, &q, y, x, r));
                }
            }
        }
    }

    #[test]
    fn triangle_square() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let a2 = dense_adjacency_power(&g, 2);
        assert_eq!(a2[0], BigUint::from(2u8));
        assert_eq!(a2[1], BigUint::from(1u8));
    }
}
