//! Incremental row echelon form over a finite field.

use crate::gf::{FieldSpec, Fq};

/// Augmented system in reduced row echelon form, grown one row at a time.
#[derive(Clone, Debug)]
pub struct Echelon {
    ncols: usize,
    /// Rows of length `ncols + 1` (last entry is the right-hand side), pivot normalized to 1.
    rows: Vec<Vec<Fq>>,
    pivots: Vec<usize>,
    inconsistent: bool,
}

impl Echelon {
    pub fn new(ncols: usize) -> Self {
        Echelon {
            ncols,
            rows: Vec::new(),
            pivots: Vec::new(),
            inconsistent: false,
        }
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn is_consistent(&self) -> bool {
        !self.inconsistent
    }

    /// Adds `sum row[i] x_i = rhs`; returns true when the solution set shrank.
    pub fn add_row(&mut self, f: &FieldSpec, mut row: Vec<Fq>, rhs: Fq) -> bool {
        if self.inconsistent {
            return false;
        }
        debug_assert_eq!(row.len(), self.ncols);
        row.push(rhs);
        for (r, &pc) in self.rows.iter().zip(&self.pivots) {
            let c = row[pc];
            if !c.is_zero() {
                for k in 0..=self.ncols {
                    if !r[k].is_zero() {
                        row[k] = f.sub(row[k], f.mul(c, r[k]));
                    }
                }
            }
        }
        let Some(pc) = (0..self.ncols).find(|&k| !row[k].is_zero()) else {
            if !row[self.ncols].is_zero() {
                self.inconsistent = true;
                return true;
            }
            return false;
        };
        let inv = f.inv(row[pc]).expect("nonzero pivot");
        for x in row.iter_mut() {
            *x = f.mul(*x, inv);
        }
        for r in self.rows.iter_mut() {
            let c = r[pc];
            if !c.is_zero() {
                for k in 0..=self.ncols {
                    if !row[k].is_zero() {
                        r[k] = f.sub(r[k], f.mul(c, row[k]));
                    }
                }
            }
        }
        self.rows.push(row);
        self.pivots.push(pc);
        true
    }

    /// Values of the columns that every solution agrees on.
    pub fn determined(&self) -> Vec<Option<Fq>> {
        let mut out = vec![None; self.ncols];
        let free = self.free_columns();
        for (r, &pc) in self.rows.iter().zip(&self.pivots) {
            if free.iter().all(|&fc| r[fc].is_zero()) {
                out[pc] = Some(r[self.ncols]);
            }
        }
        out
    }

    /// Free columns that the value of pivot column `col` depends on.
    pub fn dependencies(&self, col: usize) -> Vec<usize> {
        let Some(idx) = self.pivots.iter().position(|&pc| pc == col) else {
            return vec![col];
        };
        let r = &self.rows[idx];
        self.free_columns().into_iter().filter(|&fc| !r[fc].is_zero()).collect()
    }

    /// The solution with every free variable set to zero.
    pub fn particular(&self) -> Vec<Fq> {
        let mut x = vec![Fq::ZERO; self.ncols];
        for (r, &pc) in self.rows.iter().zip(&self.pivots) {
            x[pc] = r[self.ncols];
        }
        x
    }

    /// Free columns, in increasing order.
    pub fn free_columns(&self) -> Vec<usize> {
        let mut is_pivot = vec![false; self.ncols];
        for &pc in &self.pivots {
            is_pivot[pc] = true;
        }
        (0..self.ncols).filter(|&k| !is_pivot[k]).collect()
    }

    /// A basis of the homogeneous solution space, one vector per free column.
    pub fn kernel(&self, f: &FieldSpec) -> Vec<Vec<Fq>> {
        self.free_columns()
            .into_iter()
            .map(|fc| {
                let mut v = vec![Fq::ZERO; self.ncols];
                v[fc] = Fq::ONE;
                for (r, &pc) in self.rows.iter().zip(&self.pivots) {
                    v[pc] = f.neg(r[fc]);
                }
                v
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let f = FieldSpec::get(5, 1).unwrap();
        let mut e = Echelon::new(3);
        e.add_row(&f, vec![Fq(1), Fq(1), Fq(0)], Fq(2));
        e.add_row(&f, vec![Fq(0), Fq(1), Fq(1)], Fq(3));
        assert!(!e.add_row(&f, vec![Fq(1), Fq(2), Fq(1)], Fq(0)));
        assert_eq!(e.rank(), 2);
        let x = e.particular();
        assert_eq!(f.add(x[0], x[1]), Fq(2));
        for k in e.kernel(&f) {
            assert_eq!(f.add(k[0], k[1]), Fq(0));
            assert_eq!(f.add(k[1], k[2]), Fq(0));
        }
        e.add_row(&f, vec![Fq(1), Fq(2), Fq(1)], Fq(1));
        assert!(!e.is_consistent());
    }
}
