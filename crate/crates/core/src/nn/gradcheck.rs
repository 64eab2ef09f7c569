use rand::seq::index::sample;
use rand::Rng;

use super::mlp::{Gradients, MlpParams};
use crate::scalar::Scalar;

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Relative error as used throughout the gradient checks.
pub fn relative_error<T: Scalar>(analytic: T, numeric: T) -> T {
    (analytic - numeric).abs() / numeric.abs().max(T::lit(1e-8))
}

/// Relative error with the denominator floored at the level where a central difference
/// with step `h` can resolve 1e-4 relative accuracy: `1e4 * eps * max(|up|, |down|) / h`.
/// Below that level the check amounts to agreement within the rounding error of `cd`.
pub fn fd_relative_error<T: Scalar>(analytic: T, cd: T, up: T, down: T, h: T) -> T {
    let resolvable = T::lit(1e4) * T::epsilon() * up.abs().max(down.abs()) / h;
    (analytic - cd).abs() / cd.abs().max(resolvable).max(T::lit(1e-8))
}

/// Compares `analytic` against central differences of `loss` on sampled coordinates.
///
/// When `samples` is at least the parameter count every coordinate is checked.
/// Returns the maximum [`fd_relative_error`].
pub fn grad_check<T, F, R>(params: &MlpParams<T>, analytic: &Gradients<T>, mut loss: F, samples: usize, h: T, rng: &mut R) -> T
where
    T: Scalar,
    F: FnMut(&MlpParams<T>) -> T,
    R: Rng + ?Sized,
{
    let n = params.num_params();
    let coords: Vec<usize> = if samples >= n { (0..n).collect() } else { sample(rng, n, samples).into_vec() };
    let mut probe = params.clone();
    let mut worst = T::zero();
    for idx in coords {
        let orig = probe.param(idx);
        *probe.param_mut(idx) = orig + h;
        let up = loss(&probe);
        *probe.param_mut(idx) = orig - h;
        let down = loss(&probe);
        *probe.param_mut(idx) = orig;
        let cd = (up - down) / (h + h);
        worst = worst.max(fd_relative_error(analytic.flat(idx), cd, up, down, h));
    }
    worst
}

/// Outcome of [`grad_check_smooth`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport<T> {
    pub max_relative_error: T,
    pub checked: usize,
    /// Coordinates whose `+-h` probe flipped a ReLU, where central differences are not a valid oracle.
    pub skipped_kinks: usize,
}

/// Like [`grad_check`], but skips coordinates where `pattern` (the ReLU sign pattern over
/// every input the loss evaluates) differs between the base point and either probe.
pub fn grad_check_smooth<T, F, P, R>(
    params: &MlpParams<T>,
    analytic: &Gradients<T>,
    mut loss: F,
    mut pattern: P,
    samples: usize,
    h: T,
    rng: &mut R,
) -> GradCheckReport<T>
where
    T: Scalar,
    F: FnMut(&MlpParams<T>) -> T,
    P: FnMut(&MlpParams<T>) -> Vec<bool>,
    R: Rng + ?Sized,
{
    let n = params.num_params();
    let coords: Vec<usize> = if samples >= n { (0..n).collect() } else { sample(rng, n, samples).into_vec() };
    let base = pattern(params);
    let mut probe = params.clone();
    let mut report = GradCheckReport { max_relative_error: T::zero(), checked: 0, skipped_kinks: 0 };
    for idx in coords {
        let orig = probe.param(idx);
        *probe.param_mut(idx) = orig + h;
        let up = loss(&probe);
        let up_same = pattern(&probe) == base;
        *probe.param_mut(idx) = orig - h;
        let down = loss(&probe);
        let down_same = pattern(&probe) == base;
        *probe.param_mut(idx) = orig;
        if !(up_same && down_same) {
            report.skipped_kinks += 1;
            continue;
        }
        let cd = (up - down) / (h + h);
        report.checked += 1;
        report.max_relative_error = report.max_relative_error.max(fd_relative_error(analytic.flat(idx), cd, up, down, h));
    }
    report
}

/// Central-difference gradient of `f` with respect to a plain vector.
pub fn numeric_gradient<T: Scalar>(x: &[T], h: T, mut f: impl FnMut(&[T]) -> T) -> Vec<T> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (h + h)
        })
        .collect()
}
