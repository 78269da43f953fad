//! Constructive universal approximation on a compact box.
//!
//! Two building blocks, both exact up to float rounding:
//!
//! - [`hyperplane_layer`]: `d` dilation neurons whose structuring elements
//!   are `0` at their own coordinate and `-3C` elsewhere. For any `x` with
//!   `|x_l| <= C` the competing branches sit below `-2C`, so neuron `l`
//!   outputs exactly `x_l`; an affine combination of these neurons therefore
//!   realises any hyperplane `w.x + b` on the box.
//! - [`build_two_layer`]: for a signed sum of hinge functions
//!   `sum_i alpha_i max_j (w_ij.x + b_ij)`, emits
//!   `Dilation(d) -> Linear(k, bias) -> Dilation(m) -> Linear(1)`.
//!   The first two layers reproduce every constituent plane; the second
//!   dilation layer selects each hinge's max through block structuring
//!   elements (`0` on its own block of planes, `-3B` on the rest, with `B`
//!   at least the sup of the hinge magnitudes); the last layer applies the
//!   signs. Output equals the hinge sum everywhere on the box.
//!
//! `B` has no closed form, so it is estimated by dense evaluation (corners
//! included) and inflated; any overestimate keeps the selection inequalities
//! strict, so inflation is safe.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::network::{DilationErosionLayer, Layer, LinearLayer, Mode, Network};
use crate::parallel;
use crate::scalar::Real;
use crate::tropical::Vector;

/// Axis-aligned box with per-axis bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactBox<T> {
    lo: Vec<T>,
    hi: Vec<T>,
}

impl<T: Real> CompactBox<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::dim("box needs matching non-empty bound vectors"));
        }
        for (i, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite()) {
                return Err(Error::nonfinite(format!("box axis {i} has non-finite bound")));
            }
            if l > h {
                return Err(Error::invalid(format!("box axis {i}: lo {l} > hi {h}")));
            }
        }
        Ok(CompactBox { lo, hi })
    }

    /// The cube `[-c, c]^d`.
    pub fn cube(dim: usize, c: T) -> Result<Self> {
        CompactBox::new(vec![-c; dim], vec![c; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[T] {
        &self.lo
    }

    pub fn hi(&self) -> &[T] {
        &self.hi
    }

    /// `C = max_axes max(|lo|, |hi|)`: the bound the constructions certify over.
    pub fn bound_c(&self) -> T {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| l.abs().max(h.abs()))
            .fold(T::zero(), T::max)
    }

    /// Zero-volume on some axis; constructions still work, callers may warn.
    pub fn is_degenerate(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(&l, &h)| l == h)
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&v, (&l, &h))| v >= l && v <= h)
    }

    /// Point at parameter `t in [0,1]^d` (componentwise lerp).
    fn at(&self, t: &[f64]) -> Vec<T> {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(t)
            .map(|((&l, &h), &u)| l + (h - l) * T::of(u))
            .collect()
    }
}

/// One signed hinge: `alpha * max_j (w_j . x + b_j)` with `alpha` in `{+1,-1}`
/// and at least one plane (`k+1` planes give a `k`-order hinge).
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralHinge<T> {
    alpha: i8,
    planes: Vec<(Vector<T>, T)>,
}

impl<T: Real> GeneralHinge<T> {
    pub fn new(alpha: i8, planes: Vec<(Vector<T>, T)>) -> Result<Self> {
        if alpha != 1 && alpha != -1 {
            return Err(Error::invalid(format!("hinge sign must be +-1, got {alpha}")));
        }
        let first = planes
            .first()
            .ok_or_else(|| Error::invalid("hinge needs at least one plane"))?;
        let dim = first.0.len();
        for (i, (w, b)) in planes.iter().enumerate() {
            if w.len() != dim {
                return Err(Error::dim(format!("plane {i} has dim {}, expected {dim}", w.len())));
            }
            if !b.is_finite() {
                return Err(Error::nonfinite(format!("plane {i} offset is {b}")));
            }
        }
        Ok(GeneralHinge { alpha, planes })
    }

    pub fn alpha(&self) -> i8 {
        self.alpha
    }

    pub fn planes(&self) -> &[(Vector<T>, T)] {
        &self.planes
    }

    pub fn dim(&self) -> usize {
        self.planes[0].0.len()
    }

    /// Order `k`: the hinge joins `k+1` hyperplanes.
    pub fn order(&self) -> usize {
        self.planes.len() - 1
    }

    fn alpha_t(&self) -> T {
        if self.alpha >= 0 {
            T::one()
        } else {
            -T::one()
        }
    }

    /// `alpha * max_j (w_j . x + b_j)`.
    pub fn eval(&self, x: &[T]) -> T {
        self.alpha_t() * self.max_plane(x)
    }

    fn max_plane(&self, x: &[T]) -> T {
        self.planes
            .iter()
            .map(|(w, b)| dot(w.as_slice(), x) + *b)
            .fold(T::neg_infinity(), T::max)
    }
}

fn dot<T: Real>(w: &[T], x: &[T]) -> T {
    w.iter().zip(x).map(|(&a, &b)| a * b).sum()
}

/// Direct evaluation of the signed hinge sum; the oracle the emitted
/// networks are certified against.
pub fn hinge_sum_eval<T: Real>(hinges: &[GeneralHinge<T>], x: &[T]) -> T {
    hinges.iter().map(|h| h.eval(x)).sum()
}

/// The coordinate-extraction layer: `d` hard dilation neurons with
/// `s_l = -3C 1 + 3C e_l`,
/// so neuron `l` returns exactly `x_l` for any `x` in the box.
pub fn hyperplane_layer<T: Real>(c_bound: T, dim: usize) -> Result<DilationErosionLayer<T>> {
    if !(c_bound.is_finite() && c_bound > T::zero()) {
        return Err(Error::invalid(format!("box bound C must be > 0, got {c_bound}")));
    }
    if dim == 0 {
        return Err(Error::dim("dimension must be >= 1"));
    }
    let fill = -T::of(3.0) * c_bound;
    let mut s = Matrix::zeros(dim, dim);
    for l in 0..dim {
        for j in 0..dim {
            s.set(l, j, if l == j { T::zero() } else { fill });
        }
    }
    DilationErosionLayer::new(s, Matrix::zeros(0, dim), false, Mode::Hard)
}

/// A constructed network plus the bounds and block layout it was built with.
#[derive(Debug, Clone)]
pub struct ConstructedNet<T> {
    pub network: Network<T>,
    /// Planes per hinge (`k_i + 1`), in emission order.
    pub block_sizes: Vec<usize>,
    pub c_bound: T,
    pub b_bound: T,
}

/// Estimate `B = max_i sup_box |h_i|` by dense evaluation and inflate by 1.25.
///
/// For `d <= 3` a 101-per-axis grid (corners included) is used; higher
/// dimensions fall back to Halton samples. The floor of 1.0 keeps the
/// selection gap open for near-zero hinge sums.
fn estimate_b_bound<T: Real>(hinges: &[GeneralHinge<T>], bx: &CompactBox<T>) -> T {
    let d = bx.dim();
    let mut sup = T::zero();
    let mut visit = |x: &[T]| {
        for h in hinges {
            sup = sup.max(h.max_plane(x).abs());
        }
    };
    if d <= 3 {
        let res = 101usize;
        let mut idx = vec![0usize; d];
        'grid: loop {
            let t: Vec<f64> = idx.iter().map(|&i| i as f64 / (res - 1) as f64).collect();
            let x = bx.at(&t);
            visit(&x);
            // odometer increment
            let mut axis = 0;
            loop {
                if axis == d {
                    break 'grid;
                }
                idx[axis] += 1;
                if idx[axis] < res {
                    break;
                }
                idx[axis] = 0;
                axis += 1;
            }
        }
    } else {
        for i in 0..4096u64 {
            let t: Vec<f64> = (0..d)
                .map(|axis| halton(i + 1, PRIMES[axis % PRIMES.len()]))
                .collect();
            let x = bx.at(&t);
            visit(&x);
        }
    }
    (sup * T::of(1.25)).max(T::one())
}

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Van der Corput radical inverse; the basis of the Halton sequence.
pub(crate) fn halton(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Emit the four-layer Morph-Net that equals `sum_i alpha_i h_i(x)` for every
/// `x` in the box.
pub fn build_two_layer<T: Real>(
    hinges: &[GeneralHinge<T>],
    bx: &CompactBox<T>,
) -> Result<ConstructedNet<T>> {
    if hinges.is_empty() {
        return Err(Error::invalid("hinge list must be nonempty"));
    }
    let d = bx.dim();
    for (i, h) in hinges.iter().enumerate() {
        if h.dim() != d {
            return Err(Error::dim(format!(
                "hinge {i} has dim {}, box has {d}",
                h.dim()
            )));
        }
    }

    // any C' >= C works; a zero-volume box at the origin still needs C > 0
    let c_bound = bx.bound_c().max(T::one());
    let first_de = hyperplane_layer(c_bound, d)?;

    let block_sizes: Vec<usize> = hinges.iter().map(|h| h.planes.len()).collect();
    let k_total: usize = block_sizes.iter().sum();
    let mut w = Matrix::zeros(k_total, d);
    let mut b = vec![T::zero(); k_total];
    let mut row = 0;
    for h in hinges {
        for (pw, pb) in &h.planes {
            for j in 0..d {
                w.set(row, j, pw[j]);
            }
            b[row] = *pb;
            row += 1;
        }
    }
    let first_lin = LinearLayer::new(w, Some(b))?;

    let b_bound = estimate_b_bound(hinges, bx);
    let fill = -T::of(3.0) * b_bound;
    let m = hinges.len();
    let mut t = Matrix::zeros(m, k_total);
    let mut offset = 0;
    for (l, &size) in block_sizes.iter().enumerate() {
        for col in 0..k_total {
            let inside = col >= offset && col < offset + size;
            t.set(l, col, if inside { T::zero() } else { fill });
        }
        offset += size;
    }
    let second_de = DilationErosionLayer::new(t, Matrix::zeros(0, k_total), false, Mode::Hard)?;

    let alphas: Vec<T> = hinges.iter().map(|h| h.alpha_t()).collect();
    let second_lin = LinearLayer::new(Matrix::new(1, m, alphas)?, Some(vec![T::zero()]))?;

    let network = Network::new(
        d,
        vec![
            Layer::DilationErosion(first_de),
            Layer::Linear(first_lin),
            Layer::DilationErosion(second_de),
            Layer::Linear(second_lin),
        ],
    )?;
    Ok(ConstructedNet {
        network,
        block_sizes,
        c_bound,
        b_bound,
    })
}

/// Certification report for one network against its target hinge sum.
#[derive(Debug, Clone)]
pub struct CertifyReport<T> {
    pub max_abs_err: T,
    pub argmax_point: Vec<T>,
    pub samples: usize,
    pub tol: T,
    pub passed: bool,
}

/// Evaluate `|net(x) - sum_i alpha_i h_i(x)|` over a deterministic
/// low-discrepancy (Halton) sample of the box; `seed` offsets the sequence.
pub fn certify<T: Real>(
    net: &Network<T>,
    hinges: &[GeneralHinge<T>],
    bx: &CompactBox<T>,
    samples: usize,
    tol: T,
    seed: u64,
) -> Result<CertifyReport<T>> {
    if samples == 0 {
        return Err(Error::invalid("certification needs a sample budget >= 1"));
    }
    if net.input_dim() != bx.dim() || net.output_dim() != 1 {
        return Err(Error::dim(format!(
            "certify expects a {}-in 1-out network, got {}-in {}-out",
            bx.dim(),
            net.input_dim(),
            net.output_dim()
        )));
    }
    let d = bx.dim();
    let errs = parallel::map_indexed(samples, |i| {
        let idx = seed + i as u64 + 1;
        let t: Vec<f64> = (0..d)
            .map(|axis| halton(idx, PRIMES[axis % PRIMES.len()]))
            .collect();
        let x = bx.at(&t);
        let got = net.forward(&x)?[0];
        let want = hinge_sum_eval(hinges, &x);
        Ok::<_, Error>(((got - want).abs(), x))
    });
    let mut max_abs_err = T::zero();
    let mut argmax_point = bx.at(&vec![0.0; d]);
    for item in errs {
        let (err, x) = item?;
        if err > max_abs_err {
            max_abs_err = err;
            argmax_point = x;
        }
    }
    Ok(CertifyReport {
        max_abs_err,
        argmax_point,
        samples,
        tol,
        passed: max_abs_err <= tol,
    })
}

/// True when, at `x`, each second-layer neuron's argmax falls inside its own
/// plane block — the selection property the construction relies on.
pub fn selector_in_block<T: Real>(built: &ConstructedNet<T>, x: &[T]) -> Result<bool> {
    let layers = built.network.layers();
    let (first_de, first_lin, second_de) = match (&layers[0], &layers[1], &layers[2]) {
        (Layer::DilationErosion(a), Layer::Linear(b), Layer::DilationErosion(c)) => (a, b, c),
        _ => return Err(Error::Unsupported("not a constructed two-layer net".into())),
    };
    let y = first_lin.forward(&first_de.forward(x)?)?;
    let mut start = 0;
    for (l, &size) in built.block_sizes.iter().enumerate() {
        let s = second_de.s_plus().row(l);
        let mut best = (0usize, T::neg_infinity());
        for (k, (&yv, &sv)) in y.iter().zip(s).enumerate() {
            let v = yv + sv;
            if v > best.1 {
                best = (k, v);
            }
        }
        if best.0 < start || best.0 >= start + size {
            return Ok(false);
        }
        start += size;
    }
    Ok(true)
}

/// Hinge-list JSON: `[{"alpha": 1, "planes": [{"w": [...], "b": 0.5}, ...]}, ...]`.
pub mod hinge_json {
    use super::*;
    use serde::de::DeserializeOwned;
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize)]
    struct PlaneJson<T> {
        w: Vec<T>,
        b: T,
    }

    #[derive(Serialize, Deserialize)]
    struct HingeJson<T> {
        alpha: i8,
        planes: Vec<PlaneJson<T>>,
    }

    pub fn to_string<T: Real + Serialize>(hinges: &[GeneralHinge<T>]) -> Result<String> {
        let doc: Vec<HingeJson<T>> = hinges
            .iter()
            .map(|h| HingeJson {
                alpha: h.alpha(),
                planes: h
                    .planes()
                    .iter()
                    .map(|(w, b)| PlaneJson { w: w.as_slice().to_vec(), b: *b })
                    .collect(),
            })
            .collect();
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_str<T: Real + DeserializeOwned>(text: &str) -> Result<Vec<GeneralHinge<T>>> {
        let doc: Vec<HingeJson<T>> = serde_json::from_str(text)?;
        doc.into_iter()
            .map(|h| {
                let planes = h
                    .planes
                    .into_iter()
                    .map(|p| Ok((Vector::new(p.w)?, p.b)))
                    .collect::<Result<Vec<_>>>()?;
                GeneralHinge::new(h.alpha, planes)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(data: &[f64]) -> Vector<f64> {
        Vector::new(data.to_vec()).unwrap()
    }

    #[test]
    fn hyperplane_layer_structuring_elements() {
        let layer = hyperplane_layer(5.0, 2).unwrap();
        assert_eq!(layer.s_plus().row(0), &[0.0, -15.0]);
        assert_eq!(layer.s_plus().row(1), &[-15.0, 0.0]);
        assert!(hyperplane_layer::<f64>(0.0, 2).is_err());
        assert!(hyperplane_layer::<f64>(-1.0, 2).is_err());
    }

    #[test]
    fn hyperplane_layer_recovers_coordinates() {
        let layer = hyperplane_layer(5.0, 2).unwrap();
        assert_eq!(layer.forward(&[3.0, -4.0]).unwrap(), vec![3.0, -4.0]);
        // the box corner: the selection inequality stays strict (C > -2C + C)
        assert_eq!(layer.forward(&[5.0, 5.0]).unwrap(), vec![5.0, 5.0]);
        assert_eq!(layer.forward(&[-5.0, -5.0]).unwrap(), vec![-5.0, -5.0]);
    }

    #[test]
    fn single_hinge_max_x_plus_y() {
        let hinge = GeneralHinge::new(
            1,
            vec![(v(&[1.0, 1.0]), 0.0), (v(&[0.0, 0.0]), 0.0)],
        )
        .unwrap();
        let bx = CompactBox::cube(2, 5.0).unwrap();
        let built = build_two_layer(std::slice::from_ref(&hinge), &bx).unwrap();
        // dense grid comparison
        for i in 0..=100 {
            for j in 0..=100 {
                let x = [-5.0 + 0.1 * i as f64, -5.0 + 0.1 * j as f64];
                let got = built.network.forward(&x).unwrap()[0];
                let want = (x[0] + x[1]).max(0.0);
                assert!((got - want).abs() <= 1e-9, "at {x:?}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn zero_order_hinge_is_affine_map() {
        let hinge = GeneralHinge::new(1, vec![(v(&[2.0, -0.5]), 0.75)]).unwrap();
        let bx = CompactBox::cube(2, 3.0).unwrap();
        let built = build_two_layer(&[hinge], &bx).unwrap();
        for i in 0..=30 {
            for j in 0..=30 {
                let x = [-3.0 + 0.2 * i as f64, -3.0 + 0.2 * j as f64];
                let got = built.network.forward(&x).unwrap()[0];
                let want = 2.0 * x[0] - 0.5 * x[1] + 0.75;
                assert!((got - want).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn signed_difference_of_two_hinges() {
        let h1 = GeneralHinge::new(
            1,
            vec![(v(&[1.0, 0.0]), 0.0), (v(&[0.0, 1.0]), 0.5)],
        )
        .unwrap();
        let h2 = GeneralHinge::new(
            -1,
            vec![(v(&[-1.0, 1.0]), 0.25), (v(&[0.5, 0.5]), -1.0)],
        )
        .unwrap();
        let hinges = vec![h1, h2];
        let bx = CompactBox::cube(2, 4.0).unwrap();
        let built = build_two_layer(&hinges, &bx).unwrap();
        let report = certify(&built.network, &hinges, &bx, 5000, 1e-9, 0).unwrap();
        assert!(report.passed, "max err {}", report.max_abs_err);
    }

    #[test]
    fn certify_flags_perturbed_target() {
        let hinge =
            GeneralHinge::new(1, vec![(v(&[1.0, 1.0]), 0.0), (v(&[0.0, 0.0]), 0.0)]).unwrap();
        let bx = CompactBox::cube(2, 5.0).unwrap();
        let built = build_two_layer(&[hinge], &bx).unwrap();
        // shift the target by a constant 0.1: worst error must be about 0.1
        let shifted = GeneralHinge::new(
            1,
            vec![(v(&[1.0, 1.0]), 0.1), (v(&[0.0, 0.0]), 0.1)],
        )
        .unwrap();
        let report = certify(&built.network, &[shifted], &bx, 2000, 1e-9, 0).unwrap();
        assert!(!report.passed);
        assert!((report.max_abs_err - 0.1).abs() < 1e-9);
    }

    #[test]
    fn empty_budget_and_empty_hinges_rejected() {
        let hinge = GeneralHinge::new(1, vec![(v(&[1.0]), 0.0)]).unwrap();
        let bx = CompactBox::cube(1, 1.0).unwrap();
        let built = build_two_layer(std::slice::from_ref(&hinge), &bx).unwrap();
        assert!(certify(&built.network, &[hinge], &bx, 0, 1e-9, 0).is_err());
        assert!(build_two_layer::<f64>(&[], &bx).is_err());
    }

    #[test]
    fn selector_stays_in_block() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(71);
        let bx = CompactBox::cube(2, 5.0).unwrap();
        let hinges: Vec<GeneralHinge<f64>> = (0..3)
            .map(|_| {
                let planes = (0..1 + rng.random_range(0..3usize))
                    .map(|_| {
                        (
                            v(&[rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 4.0 - 2.0]),
                            rng.random::<f64>() * 4.0 - 2.0,
                        )
                    })
                    .collect();
                GeneralHinge::new(if rng.random::<bool>() { 1 } else { -1 }, planes).unwrap()
            })
            .collect();
        let built = build_two_layer(&hinges, &bx).unwrap();
        for i in 0..500 {
            let t = [halton(i + 1, 2), halton(i + 1, 3)];
            let x = [-5.0 + 10.0 * t[0], -5.0 + 10.0 * t[1]];
            assert!(selector_in_block(&built, &x).unwrap());
        }
    }

    #[test]
    fn hinge_json_round_trip() {
        let hinges = vec![
            GeneralHinge::new(1, vec![(v(&[1.0, 1.0]), 0.0), (v(&[0.0, 0.0]), 0.0)]).unwrap(),
            GeneralHinge::new(-1, vec![(v(&[0.5, -2.0]), 1.5)]).unwrap(),
        ];
        let text = hinge_json::to_string(&hinges).unwrap();
        let back: Vec<GeneralHinge<f64>> = hinge_json::from_str(&text).unwrap();
        assert_eq!(hinges, back);
        assert!(hinge_json::from_str::<f64>("[{\"alpha\": 2, \"planes\": []}]").is_err());
    }

    #[test]
    fn degenerate_box_is_flagged_but_buildable() {
        let bx = CompactBox::new(vec![0.0, -1.0], vec![0.0, 1.0]).unwrap();
        assert!(bx.is_degenerate());
        let hinge = GeneralHinge::new(1, vec![(v(&[1.0, 1.0]), 0.0)]).unwrap();
        let built = build_two_layer(std::slice::from_ref(&hinge), &bx).unwrap();
        let report = certify(&built.network, &[hinge], &bx, 1000, 1e-9, 0).unwrap();
        assert!(report.passed);
    }
}
