//! Training losses: MSE, binary cross-entropy, and patch-based DSSIM.

use crate::error::{Error, Result};
use crate::morph2d::ImageGrid;
use crate::scalar::Real;

/// Clamp floor for BCE probabilities.
const BCE_EPS: f64 = 1e-7;

fn check_same_len<T>(pred: &[T], target: &[T]) -> Result<()> {
    if pred.len() != target.len() {
        return Err(Error::dim(format!(
            "prediction has length {}, target {}",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::dim("loss over empty vectors"));
    }
    Ok(())
}

/// Mean squared error over components.
pub fn loss_mse<T: Real>(pred: &[T], target: &[T]) -> Result<T> {
    check_same_len(pred, target)?;
    let n = T::of_usize(pred.len());
    let sum: T = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| (p - t) * (p - t))
        .sum();
    Ok(sum / n)
}

/// `d mse / d pred = 2 (p - t) / n`.
pub fn grad_mse<T: Real>(pred: &[T], target: &[T]) -> Result<Vec<T>> {
    check_same_len(pred, target)?;
    let n = T::of_usize(pred.len());
    let two = T::of(2.0);
    Ok(pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| two * (p - t) / n)
        .collect())
}

/// Binary cross-entropy, mean over components; predictions are clamped to
/// `[1e-7, 1 - 1e-7]` so the logs stay finite.
pub fn loss_bce<T: Real>(pred: &[T], target: &[T]) -> Result<T> {
    check_same_len(pred, target)?;
    let eps = T::of(BCE_EPS);
    let one = T::one();
    for (i, &t) in target.iter().enumerate() {
        if t < T::zero() || t > one {
            return Err(Error::invalid(format!("bce target {i} = {t} outside [0,1]")));
        }
    }
    let n = T::of_usize(pred.len());
    let sum: T = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let p = p.max(eps).min(one - eps);
            -(t * p.ln() + (one - t) * (one - p).ln())
        })
        .sum();
    Ok(sum / n)
}

/// `d bce / d pred = (p - t) / (p (1 - p)) / n`, evaluated at the clamped `p`.
pub fn grad_bce<T: Real>(pred: &[T], target: &[T]) -> Result<Vec<T>> {
    check_same_len(pred, target)?;
    let eps = T::of(BCE_EPS);
    let one = T::one();
    let n = T::of_usize(pred.len());
    Ok(pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let p = p.max(eps).min(one - eps);
            (p - t) / (p * (one - p)) / n
        })
        .collect())
}

/// Per-patch statistics needed by SSIM and its gradient.
struct PatchStats<T> {
    mu_a: T,
    mu_b: T,
    var_a: T,
    var_b: T,
    cov: T,
}

/// SSIM constants for dynamic range L = 1: C1 = (0.01 L)^2, C2 = (0.03 L)^2.
fn ssim_constants<T: Real>() -> (T, T) {
    (T::of(0.01 * 0.01), T::of(0.03 * 0.03))
}

fn patch_stats<T: Real>(
    a: &ImageGrid<T>,
    b: &ImageGrid<T>,
    c: usize,
    i0: usize,
    j0: usize,
    patch: usize,
) -> PatchStats<T> {
    let n = T::of_usize(patch * patch);
    let mut sum_a = T::zero();
    let mut sum_b = T::zero();
    for i in i0..i0 + patch {
        for j in j0..j0 + patch {
            sum_a += a.get(c, i, j);
            sum_b += b.get(c, i, j);
        }
    }
    let mu_a = sum_a / n;
    let mu_b = sum_b / n;
    // deviation products keep var and cov on the same code path, so
    // identical images give SSIM == 1 bitwise
    let mut var_a = T::zero();
    let mut var_b = T::zero();
    let mut cov = T::zero();
    for i in i0..i0 + patch {
        for j in j0..j0 + patch {
            let da = a.get(c, i, j) - mu_a;
            let db = b.get(c, i, j) - mu_b;
            var_a += da * da;
            var_b += db * db;
            cov += da * db;
        }
    }
    PatchStats {
        mu_a,
        mu_b,
        var_a: var_a / n,
        var_b: var_b / n,
        cov: cov / n,
    }
}

fn ssim_from_stats<T: Real>(s: &PatchStats<T>) -> T {
    let (c1, c2) = ssim_constants::<T>();
    let two = T::of(2.0);
    let n = (two * s.mu_a * s.mu_b + c1) * (two * s.cov + c2);
    let d = (s.mu_a * s.mu_a + s.mu_b * s.mu_b + c1) * (s.var_a + s.var_b + c2);
    n / d
}

fn patch_origins(extent: usize, patch: usize, stride: usize) -> impl Iterator<Item = usize> {
    (0..).map(move |k| k * stride).take_while(move |&o| o + patch <= extent)
}

fn check_dssim_args<T: Real>(
    a: &ImageGrid<T>,
    b: &ImageGrid<T>,
    patch: usize,
    stride: usize,
) -> Result<()> {
    if a.height() != b.height() || a.width() != b.width() || a.channels() != b.channels() {
        return Err(Error::dim("dssim images must have identical shapes"));
    }
    if patch == 0 || stride == 0 {
        return Err(Error::invalid("dssim patch and stride must be >= 1"));
    }
    if patch > a.height() || patch > a.width() {
        return Err(Error::dim(format!(
            "{patch}x{patch} patch does not fit {}x{} image",
            a.height(),
            a.width()
        )));
    }
    Ok(())
}

/// Structural dissimilarity: mean over patches of `(1 - SSIM(P, P~)) / 2`,
/// with the standard constants at dynamic range 1.
pub fn loss_dssim<T: Real>(
    a: &ImageGrid<T>,
    b: &ImageGrid<T>,
    patch: usize,
    stride: usize,
) -> Result<T> {
    check_dssim_args(a, b, patch, stride)?;
    let mut sum = T::zero();
    let mut count = 0usize;
    let half = T::of(0.5);
    for c in 0..a.channels() {
        for i0 in patch_origins(a.height(), patch, stride) {
            for j0 in patch_origins(a.width(), patch, stride) {
                let stats = patch_stats(a, b, c, i0, j0, patch);
                sum += (T::one() - ssim_from_stats(&stats)) * half;
                count += 1;
            }
        }
    }
    Ok(sum / T::of_usize(count))
}

/// Gradient of [`loss_dssim`] with respect to the second image, accumulating
/// contributions of overlapping patches.
pub fn grad_dssim<T: Real>(
    a: &ImageGrid<T>,
    b: &ImageGrid<T>,
    patch: usize,
    stride: usize,
) -> Result<ImageGrid<T>> {
    check_dssim_args(a, b, patch, stride)?;
    let (c1, c2) = ssim_constants::<T>();
    let two = T::of(2.0);
    let n_px = T::of_usize(patch * patch);
    let mut grad = ImageGrid::zeros(b.height(), b.width(), b.channels());
    let mut count = 0usize;
    for c in 0..a.channels() {
        for i0 in patch_origins(a.height(), patch, stride) {
            for j0 in patch_origins(a.width(), patch, stride) {
                count += 1;
                let s = patch_stats(a, b, c, i0, j0, patch);
                let a1 = two * s.mu_a * s.mu_b + c1;
                let a2 = two * s.cov + c2;
                let b1 = s.mu_a * s.mu_a + s.mu_b * s.mu_b + c1;
                let b2 = s.var_a + s.var_b + c2;
                let num = a1 * a2;
                let den = b1 * b2;
                for i in i0..i0 + patch {
                    for j in j0..j0 + patch {
                        let da = a.get(c, i, j) - s.mu_a;
                        let db = b.get(c, i, j) - s.mu_b;
                        // d mu_b = 1/n, d cov = da/n, d var_b = 2 db/n
                        let dnum = (two * s.mu_a / n_px) * a2 + a1 * (two * da / n_px);
                        let dden = (two * s.mu_b / n_px) * b2 + b1 * (two * db / n_px);
                        let dssim = (dnum * den - num * dden) / (den * den);
                        let cur = grad.get(c, i, j);
                        grad.set(c, i, j, cur - dssim * T::of(0.5));
                    }
                }
            }
        }
    }
    let scale = T::one() / T::of_usize(count);
    for v in grad.data_mut() {
        *v *= scale;
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_values() {
        assert_eq!(loss_mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(loss_mse(&[0.0], &[2.0]).unwrap(), 4.0);
        assert!(loss_mse(&[0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn bce_values() {
        let got = loss_bce(&[0.5], &[1.0]).unwrap();
        assert!((got - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(loss_bce(&[0.5], &[1.5]).is_err());
        // zero iff pred == target up to the clamp epsilon
        assert!(loss_bce(&[1.0], &[1.0]).unwrap() < 2e-7);
        assert!(loss_bce(&[0.3], &[0.9]).unwrap() > 0.0);
    }

    #[test]
    fn loss_grads_match_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let step = 1e-6;
        for _ in 0..20 {
            let n = 1 + rng.random_range(0..5usize);
            let pred: Vec<f64> = (0..n).map(|_| 0.05 + 0.9 * rng.random::<f64>()).collect();
            let target: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let gm = grad_mse(&pred, &target).unwrap();
            let gb = grad_bce(&pred, &target).unwrap();
            for k in 0..n {
                let mut plus = pred.clone();
                plus[k] += step;
                let mut minus = pred.clone();
                minus[k] -= step;
                let fd = (loss_mse(&plus, &target).unwrap() - loss_mse(&minus, &target).unwrap())
                    / (2.0 * step);
                assert!((fd - gm[k]).abs() < 1e-6);
                let fd = (loss_bce(&plus, &target).unwrap() - loss_bce(&minus, &target).unwrap())
                    / (2.0 * step);
                assert!((fd - gb[k]).abs() < 1e-5 * fd.abs().max(1.0));
            }
        }
    }

    #[test]
    fn dssim_identical_images_is_exactly_zero() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(37);
        let data: Vec<f64> = (0..64).map(|_| rng.random::<f64>()).collect();
        let a = ImageGrid::new(8, 8, 1, data.clone()).unwrap();
        let b = ImageGrid::new(8, 8, 1, data).unwrap();
        assert_eq!(loss_dssim(&a, &b, 4, 2).unwrap(), 0.0);
    }

    #[test]
    fn dssim_constant_images_differ() {
        let a = ImageGrid::new(4, 4, 1, vec![0.2; 16]).unwrap();
        let b = ImageGrid::new(4, 4, 1, vec![0.8; 16]).unwrap();
        let v = loss_dssim(&a, &b, 4, 4).unwrap();
        assert!(v > 0.0 && v <= 1.0);
    }

    /// Independent straightforward SSIM: textbook two-pass formulas, no shared
    /// accumulator tricks with the implementation.
    fn reference_ssim_mean(a: &ImageGrid<f64>, b: &ImageGrid<f64>, patch: usize, stride: usize) -> f64 {
        let c1 = 0.01f64.powi(2);
        let c2 = 0.03f64.powi(2);
        let mut total = 0.0;
        let mut m = 0usize;
        let mut i0 = 0;
        while i0 + patch <= a.height() {
            let mut j0 = 0;
            while j0 + patch <= a.width() {
                let n = (patch * patch) as f64;
                let mut pa = Vec::new();
                let mut pb = Vec::new();
                for i in i0..i0 + patch {
                    for j in j0..j0 + patch {
                        pa.push(a.get(0, i, j));
                        pb.push(b.get(0, i, j));
                    }
                }
                let mu_a: f64 = pa.iter().sum::<f64>() / n;
                let mu_b: f64 = pb.iter().sum::<f64>() / n;
                let va: f64 = pa.iter().map(|p| (p - mu_a).powi(2)).sum::<f64>() / n;
                let vb: f64 = pb.iter().map(|p| (p - mu_b).powi(2)).sum::<f64>() / n;
                let cov: f64 =
                    pa.iter().zip(&pb).map(|(p, q)| (p - mu_a) * (q - mu_b)).sum::<f64>() / n;
                total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
                    / ((mu_a * mu_a + mu_b * mu_b + c1) * (va + vb + c2));
                m += 1;
                j0 += stride;
            }
            i0 += stride;
        }
        total / m as f64
    }

    #[test]
    fn dssim_matches_reference_ssim() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        let a = ImageGrid::new(8, 8, 1, (0..64).map(|_| rng.random::<f64>()).collect()).unwrap();
        let b = ImageGrid::new(8, 8, 1, (0..64).map(|_| rng.random::<f64>()).collect()).unwrap();
        for (patch, stride) in [(4, 2), (8, 8), (3, 3)] {
            let want = (1.0 - reference_ssim_mean(&a, &b, patch, stride)) / 2.0;
            let got = loss_dssim(&a, &b, patch, stride).unwrap();
            assert!((got - want).abs() < 1e-6, "patch {patch} stride {stride}");
        }
    }

    #[test]
    fn dssim_grad_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(43);
        let a = ImageGrid::new(6, 6, 1, (0..36).map(|_| rng.random::<f64>()).collect()).unwrap();
        let b_data: Vec<f64> = (0..36).map(|_| rng.random::<f64>()).collect();
        let b = ImageGrid::new(6, 6, 1, b_data.clone()).unwrap();
        let grad = grad_dssim(&a, &b, 3, 2).unwrap();
        let step = 1e-6;
        for p in 0..36 {
            let mut plus = b_data.clone();
            plus[p] += step;
            let mut minus = b_data.clone();
            minus[p] -= step;
            let bp = ImageGrid::new(6, 6, 1, plus).unwrap();
            let bm = ImageGrid::new(6, 6, 1, minus).unwrap();
            let fd = (loss_dssim(&a, &bp, 3, 2).unwrap() - loss_dssim(&a, &bm, 3, 2).unwrap())
                / (2.0 * step);
            assert!(
                (fd - grad.data()[p]).abs() <= 1e-6 * fd.abs().max(1.0),
                "pixel {p}: {} vs {fd}",
                grad.data()[p]
            );
        }
    }
}
