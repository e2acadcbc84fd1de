//! Dense symmetric positive-definite solves for the ridge fits.

use crate::error::{Error, Result};

/// Pivots below `PIVOT_TOL * max(diag)` are treated as singular.
pub const PIVOT_TOL: f64 = 1e-12;

/// Lower Cholesky factor of a row-major `dim x dim` SPD matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    dim: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    pub fn factor(a: &[f64], dim: usize) -> Result<Cholesky> {
        debug_assert_eq!(a.len(), dim * dim);
        let scale = (0..dim).map(|i| a[i * dim + i]).fold(0.0_f64, f64::max);
        let mut l = vec![0.0; dim * dim];
        for j in 0..dim {
            let mut d = a[j * dim + j];
            for k in 0..j {
                d -= l[j * dim + k] * l[j * dim + k];
            }
            if !(d > PIVOT_TOL * scale) || scale <= 0.0 {
                return Err(Error::DegenerateFit(format!("Gram matrix is singular at pivot {j}")));
            }
            let djj = d.sqrt();
            l[j * dim + j] = djj;
            for i in j + 1..dim {
                let mut s = a[i * dim + j];
                for k in 0..j {
                    s -= l[i * dim + k] * l[j * dim + k];
                }
                l[i * dim + j] = s / djj;
            }
        }
        Ok(Cholesky { dim, lower: l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let l = &self.lower;
        let mut z = b.to_vec();
        for i in 0..n {
            let mut s = z[i];
            for k in 0..i {
                s -= l[i * n + k] * z[k];
            }
            z[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in i + 1..n {
                s -= l[k * n + i] * z[k];
            }
            z[i] = s / l[i * n + i];
        }
        z
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        // [[4,2],[2,3]] x = [2,1] -> x = [0.5, 0]
        let c = Cholesky::factor(&[4.0, 2.0, 2.0, 3.0], 2).unwrap();
        let x = c.solve(&[2.0, 1.0]);
        assert!((x[0] - 0.5).abs() < 1e-15 && x[1].abs() < 1e-15);
    }

    #[test]
    fn singular_is_detected() {
        assert!(matches!(Cholesky::factor(&[1.0, 1.0, 1.0, 1.0], 2), Err(Error::DegenerateFit(_))));
        assert!(matches!(Cholesky::factor(&[0.0], 1), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn empty_system() {
        let c = Cholesky::factor(&[], 0).unwrap();
        assert!(c.solve(&[]).is_empty());
    }
}
