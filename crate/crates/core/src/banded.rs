//! Banded matrices with LU factorization (partial pivoting).
//!
//! Storage is the compact band layout: row i holds the matrix entries of
//! columns i-kl .. i+ku. The factorization follows the classical band
//! decomposition with row pivoting, which needs an extra multiplier table.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    /// n rows of width kl+ku+1; entry (i, j) lives at data[i*w + (j - i + kl)].
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandedMatrix {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        }
    }

    pub fn identity(n: usize, kl: usize, ku: usize, scale: f64) -> Self {
        let mut m = Self::zeros(n, kl, ku);
        for i in 0..n {
            m.set(i, i, scale);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> Option<usize> {
        let d = j as isize - i as isize;
        if d < -(self.kl as isize) || d > self.ku as isize {
            None
        } else {
            Some(i * self.width() + (d + self.kl as isize) as usize)
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.offset(i, j).map(|o| self.data[o]).unwrap_or(0.0)
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let o = self
            .offset(i, j)
            .unwrap_or_else(|| panic!("entry ({i},{j}) outside band ({},{})", self.kl, self.ku));
        self.data[o] = v;
    }

    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        let o = self
            .offset(i, j)
            .unwrap_or_else(|| panic!("entry ({i},{j}) outside band ({},{})", self.kl, self.ku));
        self.data[o] += v;
    }

    pub fn scale(&mut self, alpha: f64) {
        for v in &mut self.data {
            *v *= alpha;
        }
    }

    pub fn add_identity(&mut self, alpha: f64) {
        for i in 0..self.n {
            self.add_at(i, i, alpha);
        }
    }

    /// self + alpha * other, bands widened as needed.
    pub fn linear_comb(&self, alpha: f64, other: &BandedMatrix) -> BandedMatrix {
        assert_eq!(self.n, other.n);
        let kl = self.kl.max(other.kl);
        let ku = self.ku.max(other.ku);
        let mut out = BandedMatrix::zeros(self.n, kl, ku);
        for i in 0..self.n {
            let lo = i.saturating_sub(kl);
            let hi = (i + ku).min(self.n - 1);
            for j in lo..=hi {
                let v = self.get(i, j) + alpha * other.get(i, j);
                if v != 0.0 {
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        let w = self.width();
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let mut acc = 0.0;
            let row = &self.data[i * w..(i + 1) * w];
            for j in lo..=hi {
                acc += row[(j as isize - i as isize + self.kl as isize) as usize] * x[j];
            }
            y[i] = acc;
        }
    }

    pub fn transpose(&self) -> BandedMatrix {
        let mut out = BandedMatrix::zeros(self.n, self.ku, self.kl);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            for j in lo..=hi {
                let v = self.get(i, j);
                if v != 0.0 {
                    out.set(j, i, v);
                }
            }
        }
        out
    }
}

/// LU factors of a banded matrix, band decomposition with partial pivoting.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    width: usize,
    upper: Vec<f64>,
    lower: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn factor(m: &BandedMatrix) -> Result<BandedLu> {
        let n = m.n;
        let kl = m.kl;
        let mm = m.width();
        let mut a = m.data.clone();
        let mut al = vec![0.0; n * kl];
        let mut pivots = vec![0usize; n];

        // relative pivot floor per row of the original matrix
        let row_scale: Vec<f64> = (0..n)
            .map(|i| {
                let r = &m.data[i * mm..(i + 1) * mm];
                r.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
            })
            .collect();

        // left-shift the first kl rows of the compact storage
        let mut l = kl;
        for i in 0..kl {
            for j in (kl - i)..mm {
                a[i * mm + j - l] = a[i * mm + j];
            }
            l -= 1;
            for j in (mm - l - 1)..mm {
                a[i * mm + j] = 0.0;
            }
        }

        l = kl;
        for k in 0..n {
            let mut piv = a[k * mm];
            let mut ip = k;
            if l < n {
                l += 1;
            }
            for j in (k + 1)..l {
                if a[j * mm].abs() > piv.abs() {
                    piv = a[j * mm];
                    ip = j;
                }
            }
            pivots[k] = ip;
            let floor = 1e-14 * row_scale[k.min(ip)].max(row_scale[k]);
            if piv.abs() <= floor {
                return Err(Error::numeric(format!(
                    "banded LU breakdown at column {k}: pivot {piv:.3e} below 1e-14 of row max {:.3e}",
                    row_scale[k]
                )));
            }
            if ip != k {
                for j in 0..mm {
                    a.swap(k * mm + j, ip * mm + j);
                }
            }
            for i in (k + 1)..l {
                let dum = a[i * mm] / a[k * mm];
                al[k * kl + (i - k - 1)] = dum;
                for j in 1..mm {
                    a[i * mm + j - 1] = a[i * mm + j] - dum * a[k * mm + j];
                }
                a[i * mm + mm - 1] = 0.0;
            }
        }

        Ok(BandedLu {
            n,
            kl,
            width: mm,
            upper: a,
            lower: al,
            pivots,
        })
    }

    pub fn solve_into(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        let n = self.n;
        let mm = self.width;
        let mut l = self.kl;
        for k in 0..n {
            let ip = self.pivots[k];
            if ip != k {
                b.swap(k, ip);
            }
            if l < n {
                l += 1;
            }
            for i in (k + 1)..l {
                b[i] -= self.lower[k * self.kl + (i - k - 1)] * b[k];
            }
        }
        let mut l = 1;
        for i in (0..n).rev() {
            let mut acc = b[i];
            for k in 1..l {
                acc -= self.upper[i * mm + k] * b[i + k];
            }
            b[i] = acc / self.upper[i * mm];
            if l < mm {
                l += 1;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_into(&mut x);
        x
    }
}

/// Convenience wrapper matching the operation contract: solve A x = rhs.
pub fn solve_banded(a: &BandedMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let lu = BandedLu::factor(a)?;
    Ok(lu.solve(rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_solve() {
        let a = BandedMatrix::identity(5, 1, 1, 1.0);
        let mut rhs = vec![0.0; 5];
        rhs[2] = 1.0;
        let x = solve_banded(&a, &rhs).unwrap();
        for (i, v) in x.iter().enumerate() {
            let expect = if i == 2 { 1.0 } else { 0.0 };
            assert!((v - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn tridiagonal_example() {
        // tridiag(-1, 2, -1) size 3, rhs (1,1,1) -> (1.5, 2, 1.5)
        let mut a = BandedMatrix::zeros(3, 1, 1);
        for i in 0..3 {
            a.set(i, i, 2.0);
            if i > 0 {
                a.set(i, i - 1, -1.0);
            }
            if i < 2 {
                a.set(i, i + 1, -1.0);
            }
        }
        let x = solve_banded(&a, &[1.0, 1.0, 1.0]).unwrap();
        assert!((x[0] - 1.5).abs() < 1e-14);
        assert!((x[1] - 2.0).abs() < 1e-14);
        assert!((x[2] - 1.5).abs() < 1e-14);
    }

    #[test]
    fn zero_row_is_singular() {
        let mut a = BandedMatrix::zeros(4, 1, 1);
        for i in 0..4 {
            if i != 2 {
                a.set(i, i, 1.0);
            }
        }
        assert!(matches!(solve_banded(&a, &[1.0; 4]), Err(Error::Numeric(_))));
    }

    #[test]
    fn random_round_trip() {
        // diagonally dominant pentadiagonal systems: solve then multiply back
        let n = 40;
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut rand = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for _ in 0..20 {
            let mut a = BandedMatrix::zeros(n, 2, 2);
            for i in 0..n {
                let lo = i.saturating_sub(2);
                let hi = (i + 2).min(n - 1);
                let mut rowsum = 0.0;
                for j in lo..=hi {
                    if j != i {
                        let v = rand();
                        a.set(i, j, v);
                        rowsum += v.abs();
                    }
                }
                a.set(i, i, rowsum + 1.0 + rand().abs());
            }
            let x_true: Vec<f64> = (0..n).map(|_| rand()).collect();
            let rhs = a.matvec(&x_true);
            let x = solve_banded(&a, &rhs).unwrap();
            let resid = a.matvec(&x);
            let num: f64 = resid
                .iter()
                .zip(&rhs)
                .map(|(r, b)| (r - b).abs())
                .fold(0.0, f64::max);
            let den: f64 = rhs.iter().map(|b| b.abs()).fold(0.0, f64::max);
            assert!(num <= 1e-10 * den.max(1e-300), "residual {num} vs {den}");
        }
    }

    #[test]
    fn transpose_consistency() {
        let mut a = BandedMatrix::zeros(6, 2, 1);
        let mut v = 1.0;
        for i in 0..6usize {
            let lo = i.saturating_sub(2);
            let hi = (i + 1).min(5);
            for j in lo..=hi {
                a.set(i, j, v);
                v += 0.37;
            }
        }
        let at = a.transpose();
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(a.get(i, j), at.get(j, i));
            }
        }
    }
}
