use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Solves `a x = b` for a dense row-major `n x n` matrix by Gaussian elimination
/// with partial pivoting.
pub fn solve_linear<T: Scalar>(a: &[T], b: &[T], n: usize) -> Result<Vec<T>> {
    if a.len() != n * n || b.len() != n {
        return Err(Error::rejected("linear system shape mismatch"));
    }
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i * n + col].abs().partial_cmp(&m[j * n + col].abs()).unwrap_or(std::cmp::Ordering::Equal))
            .expect("non-empty range");
        if m[pivot * n + col].abs() <= T::epsilon() {
            return Err(Error::rejected("singular linear system"));
        }
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
            }
            x.swap(col, pivot);
        }
        let diag = m[col * n + col];
        for row in col + 1..n {
            let f = m[row * n + col] / diag;
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                let v = m[col * n + k];
                m[row * n + k] -= f * v;
            }
            let xc = x[col];
            x[row] -= f * xc;
        }
    }
    for col in (0..n).rev() {
        let mut acc = x[col];
        for k in col + 1..n {
            acc -= m[col * n + k] * x[k];
        }
        x[col] = acc / m[col * n + col];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        let x = solve_linear(&[2.0f64, 1.0, 1.0, 3.0], &[3.0, 5.0], 2).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-15 && (x[1] - 1.4).abs() < 1e-15);
    }

    #[test]
    fn needs_pivoting() {
        let x = solve_linear(&[0.0, 1.0, 1.0, 0.0], &[2.0, 7.0], 2).unwrap();
        assert_eq!(x, vec![7.0, 2.0]);
    }

    #[test]
    fn singular_rejected() {
        assert!(solve_linear(&[1.0, 2.0, 2.0, 4.0], &[1.0, 1.0], 2).is_err());
    }
}
