//! Integer frequency lattices and exact membership.
//!
//! The lattice generated by a finite set of integer vectors is stored through
//! its row-style Hermite normal form: an echelon basis with positive pivots
//! and every entry above a pivot reduced into `[0, pivot)`. The HNF is unique
//! for a given lattice, so two generator sets span the same lattice exactly
//! when their bases agree. All arithmetic is overflow-checked.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyLattice {
    dim: usize,
    generators: Vec<Vec<i64>>,
    basis: Vec<Vec<i64>>,
    pivots: Vec<usize>,
}

impl FrequencyLattice {
    pub fn from_generators(dim: usize, generators: Vec<Vec<i64>>) -> Result<Self> {
        for g in &generators {
            if g.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: g.len(),
                });
            }
        }
        let (basis, pivots) = hermite_normal_form(&generators, dim)?;
        Ok(FrequencyLattice {
            dim,
            generators,
            basis,
            pivots,
        })
    }

    /// The zero lattice `{0}`.
    pub fn trivial(dim: usize) -> Self {
        FrequencyLattice {
            dim,
            generators: Vec::new(),
            basis: Vec::new(),
            pivots: Vec::new(),
        }
    }

    /// Lattice spanned by the coordinate vectors `e_i` for the listed axes.
    pub fn axes(dim: usize, axes: &[usize]) -> Result<Self> {
        let gens = axes
            .iter()
            .map(|&i| {
                if i >= dim {
                    return Err(Error::invalid(format!("axis {i} out of range for dimension {dim}")));
                }
                let mut e = vec![0; dim];
                e[i] = 1;
                Ok(e)
            })
            .collect::<Result<Vec<_>>>()?;
        FrequencyLattice::from_generators(dim, gens)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn generators(&self) -> &[Vec<i64>] {
        &self.generators
    }

    pub fn hnf_basis(&self) -> &[Vec<i64>] {
        &self.basis
    }

    /// Largest absolute entry over the generators (0 for the trivial lattice).
    pub fn max_generator_entry(&self) -> i64 {
        self.generators
            .iter()
            .chain(&self.basis)
            .flatten()
            .map(|v| v.abs())
            .max()
            .unwrap_or(0)
    }

    /// Whether `u` is an integer combination of the generators. By the
    /// subgroup property this also decides whether the whole line
    /// `{m·u : m ∈ Z}` lies in the lattice.
    pub fn member(&self, u: &[i64]) -> Result<bool> {
        if u.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: u.len(),
            });
        }
        let mut r: Vec<i128> = u.iter().map(|&v| v as i128).collect();
        let mut col = 0;
        for (row, &p) in self.basis.iter().zip(&self.pivots) {
            if r[col..p].iter().any(|&v| v != 0) {
                return Ok(false);
            }
            let pivot = row[p] as i128;
            if r[p] % pivot != 0 {
                return Ok(false);
            }
            let q = r[p] / pivot;
            for (rk, &bk) in r.iter_mut().zip(row) {
                *rk = rk
                    .checked_sub(q.checked_mul(bk as i128).ok_or(Error::Overflow)?)
                    .ok_or(Error::Overflow)?;
            }
            col = p + 1;
        }
        Ok(r.iter().all(|&v| v == 0))
    }

    /// Same lattice as `other` (identical HNF bases).
    pub fn same_span(&self, other: &FrequencyLattice) -> bool {
        self.dim == other.dim && self.basis == other.basis
    }
}

/// `⟨K_1 ∪ … ∪ K_J⟩_Z` for finite support sets `K_j ⊂ Z^dim`.
pub fn lattice_from_supports(dim: usize, supports: &[Vec<Vec<i64>>]) -> Result<FrequencyLattice> {
    if supports.iter().all(|s| s.is_empty()) {
        return Err(Error::invalid("need at least one nonempty support set"));
    }
    let gens = supports.iter().flatten().cloned().collect();
    FrequencyLattice::from_generators(dim, gens)
}

fn hermite_normal_form(generators: &[Vec<i64>], dim: usize) -> Result<(Vec<Vec<i64>>, Vec<usize>)> {
    let mut rows: Vec<Vec<i128>> = generators
        .iter()
        .filter(|g| g.iter().any(|&v| v != 0))
        .map(|g| g.iter().map(|&v| v as i128).collect())
        .collect();
    let mut pivots = Vec::new();
    let mut top = 0;
    for col in 0..dim {
        if top == rows.len() {
            break;
        }
        // Euclid on the column until a single nonzero entry remains
        loop {
            let smallest = (top..rows.len())
                .filter(|&i| rows[i][col] != 0)
                .min_by_key(|&i| rows[i][col].unsigned_abs());
            let Some(i) = smallest else { break };
            rows.swap(top, i);
            let mut done = true;
            for k in top + 1..rows.len() {
                if rows[k][col] != 0 {
                    let q = rows[k][col].div_euclid(rows[top][col]);
                    row_sub(&mut rows, k, top, q)?;
                    if rows[k][col] != 0 {
                        done = false;
                    }
                }
            }
            if done {
                break;
            }
        }
        if rows[top][col] == 0 {
            continue;
        }
        if rows[top][col] < 0 {
            rows[top].iter_mut().for_each(|v| *v = -*v);
        }
        let p = rows[top][col];
        for k in 0..top {
            let q = rows[k][col].div_euclid(p);
            if q != 0 {
                row_sub(&mut rows, k, top, q)?;
            }
        }
        pivots.push(col);
        top += 1;
    }
    rows.truncate(top);
    let basis = rows
        .into_iter()
        .map(|r| {
            r.into_iter()
                .map(|v| i64::try_from(v).map_err(|_| Error::Overflow))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((basis, pivots))
}

/// `rows[k] -= q * rows[src]`
fn row_sub(rows: &mut [Vec<i128>], k: usize, src: usize, q: i128) -> Result<()> {
    let src_row = rows[src].clone();
    for (v, s) in rows[k].iter_mut().zip(src_row) {
        let t = q.checked_mul(s).ok_or(Error::Overflow)?;
        *v = v.checked_sub(t).ok_or(Error::Overflow)?;
        if v.unsigned_abs() > i64::MAX as u128 {
            return Err(Error::Overflow);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_axis_in_three_dimensions() {
        let l = lattice_from_supports(3, &[vec![vec![1, 0, 0]]]).unwrap();
        assert_eq!(l.rank(), 1);
        assert!(l.member(&[5, 0, 0]).unwrap());
        assert!(l.member(&[-3, 0, 0]).unwrap());
        assert!(!l.member(&[1, 2, 0]).unwrap());
        assert!(!l.member(&[0, 0, 1]).unwrap());
    }

    #[test]
    fn coordinate_plane() {
        let l = lattice_from_supports(3, &[vec![vec![1, 0, 0], vec![0, 1, 0]]]).unwrap();
        assert_eq!(l.rank(), 2);
        assert!(l.member(&[4, -7, 0]).unwrap());
        assert!(!l.member(&[4, -7, 1]).unwrap());
    }

    #[test]
    fn even_sublattice() {
        let l = lattice_from_supports(2, &[vec![vec![2, 0], vec![0, 2]]]).unwrap();
        assert!(!l.member(&[1, 1]).unwrap());
        assert!(l.member(&[2, 4]).unwrap());
    }

    #[test]
    fn zero_always_member() {
        assert!(FrequencyLattice::trivial(4).member(&[0, 0, 0, 0]).unwrap());
        let l = FrequencyLattice::axes(2, &[0]).unwrap();
        assert!(l.member(&[0, 0]).unwrap());
    }

    #[test]
    fn hnf_is_canonical() {
        let a = FrequencyLattice::from_generators(2, vec![vec![2, 1], vec![0, 3]]).unwrap();
        let b = FrequencyLattice::from_generators(2, vec![vec![2, 4], vec![2, -2], vec![4, 5]]).unwrap();
        assert_eq!(a.hnf_basis(), &[vec![2, 1], vec![0, 3]]);
        assert!(a.same_span(&b));
        // gcd collapse: (4,6) and (6,9) span (2,3)
        let c = FrequencyLattice::from_generators(2, vec![vec![4, 6], vec![6, 9]]).unwrap();
        assert_eq!(c.hnf_basis(), &[vec![2, 3]]);
    }

    #[test]
    fn dimension_checks() {
        assert!(FrequencyLattice::from_generators(2, vec![vec![1, 0, 0]]).is_err());
        let l = FrequencyLattice::axes(3, &[0]).unwrap();
        assert!(l.member(&[1, 0]).is_err());
        assert!(FrequencyLattice::axes(2, &[2]).is_err());
        assert!(lattice_from_supports(2, &[vec![]]).is_err());
    }
}
