//! Exact rewriting of a hard morphological block as a signed sum of hinge
//! functions, hyperplane-count formulas, and empirical region enumeration.
//!
//! A block with `n` dilation and `m` erosion neurons feeding one linear
//! output computes
//!
//! ```text
//! M(x) = sum_i w_i+ max_k (x_k + s_ik+) + sum_j w_j- min_k (x_k - s_jk-)
//! ```
//!
//! Each summand is one signed `d`-order hinge term
//! `alpha * max_k (slope * x_k + rho_k)` with
//!
//! - `theta = |w|`, `rho_k = |w| s_k` for both neuron kinds,
//! - dilation: `alpha = sign(w)`, slope `+theta`,
//! - erosion: `alpha = -sign(w)`, slope `-theta`.
//!
//! The stored `theta` is always nonnegative; the sign of the slope is the
//! neuron kind's, and `alpha * theta` recovers the signed slope of the case
//! analysis. Rewriting only reassociates float products, so the sum matches
//! the block everywhere to 1e-12.
//!
//! Because every `max` selects one (possibly augmented) coordinate, a block
//! with `l` neurons on `d` inputs is affine on each cell of a signature
//! partition with at most `(d+1)^l` cells (`d^l` without bias); the counting
//! formulas and the sampling-based region enumerator live here too.

use crate::constructor::CompactBox;
use crate::error::{Error, Result};
use crate::network::{DilationErosionLayer, LinearLayer};
use crate::parallel;
use crate::scalar::Real;
use crate::tropical::{argmax_value, argmin_value, MorphKind, Vector};

/// One signed `d`-order hinge term of a block decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct HingeTerm<T> {
    alpha: i8,
    theta: T,
    rho: Vec<T>,
    kind: MorphKind,
}

impl<T: Real> HingeTerm<T> {
    pub fn new(alpha: i8, theta: T, rho: Vec<T>, kind: MorphKind) -> Result<Self> {
        if alpha != 1 && alpha != -1 {
            return Err(Error::invalid(format!("alpha must be +-1, got {alpha}")));
        }
        if !(theta.is_finite() && theta >= T::zero()) {
            return Err(Error::invalid(format!("theta must be finite and >= 0, got {theta}")));
        }
        if rho.is_empty() || rho.iter().any(|v| !v.is_finite()) {
            return Err(Error::nonfinite("rho must be non-empty and finite"));
        }
        Ok(HingeTerm { alpha, theta, rho, kind })
    }

    pub fn alpha(&self) -> i8 {
        self.alpha
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    pub fn rho(&self) -> &[T] {
        &self.rho
    }

    pub fn kind(&self) -> MorphKind {
        self.kind
    }

    fn alpha_t(&self) -> T {
        if self.alpha >= 0 {
            T::one()
        } else {
            -T::one()
        }
    }

    /// The slope with the neuron kind's sign: `+theta` for dilation terms,
    /// `-theta` for erosion terms.
    pub fn signed_slope(&self) -> T {
        match self.kind {
            MorphKind::Dilation => self.theta,
            MorphKind::Erosion => -self.theta,
        }
    }

    /// `alpha * max_k (signed_slope * x_k + rho_k)` over the (augmented) input.
    pub fn eval(&self, x_aug: &[T]) -> T {
        let slope = self.signed_slope();
        let m = x_aug
            .iter()
            .zip(&self.rho)
            .map(|(&x, &r)| slope * x + r)
            .fold(T::neg_infinity(), T::max);
        self.alpha_t() * m
    }
}

/// The full decomposition of a single-output hard block.
#[derive(Debug, Clone, PartialEq)]
pub struct HingeDecomposition<T> {
    terms: Vec<HingeTerm<T>>,
    input_dim: usize,
    with_bias: bool,
}

impl<T: Real> HingeDecomposition<T> {
    pub fn new(terms: Vec<HingeTerm<T>>, input_dim: usize, with_bias: bool) -> Result<Self> {
        let cols = input_dim + usize::from(with_bias);
        for (i, term) in terms.iter().enumerate() {
            if term.rho.len() != cols {
                return Err(Error::dim(format!(
                    "term {i} has {} offsets, expected {cols}",
                    term.rho.len()
                )));
            }
        }
        Ok(HingeDecomposition { terms, input_dim, with_bias })
    }

    pub fn terms(&self) -> &[HingeTerm<T>] {
        &self.terms
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn with_bias(&self) -> bool {
        self.with_bias
    }
}

/// Rewrite `(dilation-erosion layer, 1-output linear)` as hinge terms, one
/// per neuron, dilation terms first.
///
/// Requires hard mode (the identity is about the hard max; harden soft blocks
/// first, accepting the `ln(d)/beta` forward gap) and an unbiased linear
/// layer (the classic block combines neuron outputs without an offset).
pub fn decompose<T: Real>(
    de: &DilationErosionLayer<T>,
    lin: &LinearLayer<T>,
) -> Result<HingeDecomposition<T>> {
    if !de.mode().is_hard() {
        return Err(Error::Unsupported(
            "decomposition is defined for hard mode; switch the layer mode first".into(),
        ));
    }
    if lin.out_dim() != 1 {
        return Err(Error::Unsupported(format!(
            "decomposition needs a single linear output, got {}",
            lin.out_dim()
        )));
    }
    if lin.bias().is_some() {
        return Err(Error::Unsupported(
            "decomposition covers the bias-free combination layer".into(),
        ));
    }
    if lin.in_dim() != de.out_dim() {
        return Err(Error::dim(format!(
            "linear layer expects {} inputs, block outputs {}",
            lin.in_dim(),
            de.out_dim()
        )));
    }

    let weights = lin.weights();
    let mut terms = Vec::with_capacity(de.out_dim());
    let term_of = |weight: T, s: &[T], kind: MorphKind| -> Result<HingeTerm<T>> {
        if weight == T::zero() {
            // keep the neuron-term bijection: a zero term, normalized sign
            return HingeTerm::new(1, T::zero(), vec![T::zero(); s.len()], kind);
        }
        let theta = weight.abs();
        let rho: Vec<T> = s.iter().map(|&v| v * theta).collect();
        let alpha = match kind {
            MorphKind::Dilation => {
                if weight > T::zero() {
                    1
                } else {
                    -1
                }
            }
            MorphKind::Erosion => {
                if weight > T::zero() {
                    -1
                } else {
                    1
                }
            }
        };
        HingeTerm::new(alpha, theta, rho, kind)
    };
    for i in 0..de.n_dilation() {
        terms.push(term_of(weights.get(0, i), de.s_plus().row(i), MorphKind::Dilation)?);
    }
    for j in 0..de.n_erosion() {
        terms.push(term_of(
            weights.get(0, de.n_dilation() + j),
            de.s_minus().row(j),
            MorphKind::Erosion,
        )?);
    }
    HingeDecomposition::new(terms, de.in_dim(), de.with_bias())
}

/// Evaluate the signed hinge sum at `x` (the bias coordinate, when present,
/// is appended automatically).
pub fn eval_hinge_sum<T: Real>(dec: &HingeDecomposition<T>, x: &Vector<T>) -> Result<T> {
    if x.len() != dec.input_dim {
        return Err(Error::dim(format!(
            "input has dim {}, decomposition expects {}",
            x.len(),
            dec.input_dim
        )));
    }
    let x_aug: Vec<T> = if dec.with_bias {
        x.iter().copied().chain(std::iter::once(T::zero())).collect()
    } else {
        x.as_slice().to_vec()
    };
    Ok(dec.terms.iter().map(|t| t.eval(&x_aug)).sum())
}

/// Hyperplane counts of a block with `l` neurons on `d` inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HyperplaneBounds {
    /// `(d+1)^l - 1` with bias, `d^l - 1` without.
    pub total: u64,
    /// `d! C(l,d) (d+1)^(l-d)` with bias, `d! C(l,d) d^(l-d)` without;
    /// zero when `l < d`.
    pub non_axis_parallel: u64,
}

/// Exact integer hyperplane counts; errors when a count leaves u64.
///
/// The `-1` removes the all-bias selection; by convention it is subtracted
/// in the no-bias count as well.
pub fn hyperplane_bounds(d: usize, l: usize, bias: bool) -> Result<HyperplaneBounds> {
    if d == 0 || l == 0 {
        return Err(Error::invalid("need d >= 1 and l >= 1"));
    }
    let base = if bias { d as u128 + 1 } else { d as u128 };
    let total = checked_pow(base, l)?
        .checked_sub(1)
        .expect("pow >= 1");
    let non_axis_parallel = if l < d {
        0u128
    } else {
        let fact = (1..=d as u128).try_fold(1u128, |acc, k| acc.checked_mul(k)).ok_or_else(overflow)?;
        let choose = binomial(l as u128, d as u128)?;
        let rest = checked_pow(base, l - d)?;
        fact.checked_mul(choose)
            .and_then(|v| v.checked_mul(rest))
            .ok_or_else(overflow)?
    };
    Ok(HyperplaneBounds {
        total: fit_u64(total)?,
        non_axis_parallel: fit_u64(non_axis_parallel)?,
    })
}

fn overflow() -> Error {
    Error::Overflow("hyperplane count".into())
}

fn checked_pow(base: u128, exp: usize) -> Result<u128> {
    let mut acc = 1u128;
    for _ in 0..exp {
        acc = acc.checked_mul(base).ok_or_else(overflow)?;
    }
    Ok(acc)
}

fn binomial(n: u128, k: u128) -> Result<u128> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc = 1u128;
    for i in 1..=k {
        acc = acc.checked_mul(n - k + i).ok_or_else(overflow)? / i;
    }
    Ok(acc)
}

fn fit_u64(v: u128) -> Result<u64> {
    u64::try_from(v).map_err(|_| overflow())
}

/// The active-branch signature of a block at one point: the selected
/// (augmented) coordinate per neuron, dilation neurons first.
pub type Signature = Vec<usize>;

/// Affine restriction of the block on one signature cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionAffine<T> {
    pub gradient: Vec<T>,
    pub intercept: T,
}

/// Result of sampling-based region enumeration on a 2D box.
///
/// Signatures that share an affine piece (zero weights collapse many) merge
/// into one region, so degenerate blocks report a single region.
#[derive(Debug, Clone)]
pub struct RegionEnumeration<T> {
    /// Distinct signatures with their affine pieces, in first-seen order.
    pub signatures: Vec<(Signature, RegionAffine<T>)>,
    /// Distinct affine pieces (the regions), in first-seen order.
    pub pieces: Vec<RegionAffine<T>>,
    /// Row-major signature index per grid cell (resolution x resolution).
    pub cell_signatures: Vec<u32>,
    /// Block value at each cell centre.
    pub cell_values: Vec<T>,
    pub resolution: usize,
    /// Cell-centre coordinates per axis.
    pub xs: Vec<T>,
    pub ys: Vec<T>,
}

impl<T: Real> RegionEnumeration<T> {
    /// Number of distinct affine pieces realized on the box.
    pub fn region_count(&self) -> usize {
        self.pieces.len()
    }

    pub fn signature_count(&self) -> usize {
        self.signatures.len()
    }

    /// Decision-map CSV: `x1,x2,signature_id,value` per grid cell.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x1,x2,signature_id,value")?;
        for (i, &x1) in self.xs.iter().enumerate() {
            for (j, &x2) in self.ys.iter().enumerate() {
                let idx = i * self.resolution + j;
                writeln!(
                    out,
                    "{x1},{x2},{},{}",
                    self.cell_signatures[idx], self.cell_values[idx]
                )?;
            }
        }
        Ok(())
    }
}

fn signature_at<T: Real>(de: &DilationErosionLayer<T>, x_aug: &[T]) -> Signature {
    let mut sig = Vec::with_capacity(de.out_dim());
    for i in 0..de.n_dilation() {
        let s = de.s_plus().row(i);
        sig.push(argmax_value(x_aug.iter().zip(s).map(|(&a, &b)| a + b)).0);
    }
    for j in 0..de.n_erosion() {
        let s = de.s_minus().row(j);
        sig.push(argmin_value(x_aug.iter().zip(s).map(|(&a, &b)| a - b)).0);
    }
    sig
}

/// Affine piece of the block under a fixed signature.
fn affine_for<T: Real>(
    de: &DilationErosionLayer<T>,
    lin: &LinearLayer<T>,
    sig: &Signature,
) -> RegionAffine<T> {
    let d = de.in_dim();
    let mut gradient = vec![T::zero(); d];
    let mut intercept = T::zero();
    for (neuron, &k) in sig.iter().enumerate() {
        let w = lin.weights().get(0, neuron);
        if neuron < de.n_dilation() {
            let s = de.s_plus().row(neuron);
            // w * (x_k + s_k); the augmented coordinate contributes s_k only
            if k < d {
                gradient[k] += w;
            }
            intercept += w * s[k];
        } else {
            let s = de.s_minus().row(neuron - de.n_dilation());
            if k < d {
                gradient[k] += w;
            }
            intercept -= w * s[k];
        }
    }
    if let Some(b) = lin.bias() {
        intercept += b[0];
    }
    RegionAffine { gradient, intercept }
}

/// Evaluate the active signature at every grid-cell centre of a 2D box and
/// collect the distinct affine pieces. Ties in any max/min resolve to the
/// lowest index, so degenerate blocks report one region.
pub fn enumerate_regions<T: Real>(
    de: &DilationErosionLayer<T>,
    lin: &LinearLayer<T>,
    bx: &CompactBox<T>,
    resolution: usize,
) -> Result<RegionEnumeration<T>> {
    if de.in_dim() != 2 || bx.dim() != 2 {
        return Err(Error::Unsupported(
            "grid region enumeration is implemented for 2D inputs".into(),
        ));
    }
    if !de.mode().is_hard() {
        return Err(Error::Unsupported("region enumeration needs hard mode".into()));
    }
    if lin.out_dim() != 1 || lin.in_dim() != de.out_dim() {
        return Err(Error::dim("block must feed one linear output"));
    }
    if resolution < 1 {
        return Err(Error::invalid("resolution must be >= 1"));
    }

    let centre = |lo: T, hi: T, i: usize| -> T {
        lo + (hi - lo) * (T::of_usize(i) + T::of(0.5)) / T::of_usize(resolution)
    };
    let xs: Vec<T> = (0..resolution).map(|i| centre(bx.lo()[0], bx.hi()[0], i)).collect();
    let ys: Vec<T> = (0..resolution).map(|j| centre(bx.lo()[1], bx.hi()[1], j)).collect();

    // signatures per row, in parallel; merge keeps first-seen order
    let rows = parallel::map_indexed(resolution, |i| {
        let mut sigs = Vec::with_capacity(resolution);
        let mut values = Vec::with_capacity(resolution);
        for &y in &ys {
            let mut aug = vec![xs[i], y];
            if de.with_bias() {
                aug.push(T::zero());
            }
            let sig = signature_at(de, &aug);
            let z = de.forward(&[xs[i], y]).expect("dims validated");
            let out = lin.forward(&z).expect("dims validated");
            sigs.push(sig);
            values.push(out[0]);
        }
        (sigs, values)
    });

    let mut signatures: Vec<(Signature, RegionAffine<T>)> = Vec::new();
    let mut pieces: Vec<RegionAffine<T>> = Vec::new();
    let mut cell_signatures = Vec::with_capacity(resolution * resolution);
    let mut cell_values = Vec::with_capacity(resolution * resolution);
    for (sigs, values) in rows {
        for (sig, value) in sigs.into_iter().zip(values) {
            let id = match signatures.iter().position(|(s, _)| *s == sig) {
                Some(id) => id,
                None => {
                    let affine = affine_for(de, lin, &sig);
                    if !pieces.contains(&affine) {
                        pieces.push(affine.clone());
                    }
                    signatures.push((sig, affine));
                    signatures.len() - 1
                }
            };
            cell_signatures.push(id as u32);
            cell_values.push(value);
        }
    }
    Ok(RegionEnumeration {
        signatures,
        pieces,
        cell_signatures,
        cell_values,
        resolution,
        xs,
        ys,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::network::{forward_block, Mode};

    fn v(data: &[f64]) -> Vector<f64> {
        Vector::new(data.to_vec()).unwrap()
    }

    fn block(
        s_plus: (usize, Vec<f64>),
        s_minus: (usize, Vec<f64>),
        cols: usize,
        bias: bool,
        weights: Vec<f64>,
    ) -> (DilationErosionLayer<f64>, LinearLayer<f64>) {
        let de = DilationErosionLayer::new(
            Matrix::new(s_plus.0, cols, s_plus.1).unwrap(),
            Matrix::new(s_minus.0, cols, s_minus.1).unwrap(),
            bias,
            Mode::Hard,
        )
        .unwrap();
        let n = de.out_dim();
        let lin = LinearLayer::new(Matrix::new(1, n, weights).unwrap(), None).unwrap();
        (de, lin)
    }

    #[test]
    fn single_dilation_flat_se_unit_weight() {
        let (de, lin) = block((1, vec![0.0, 0.0]), (0, vec![]), 2, false, vec![1.0]);
        let dec = decompose(&de, &lin).unwrap();
        assert_eq!(dec.terms().len(), 1);
        let t = &dec.terms()[0];
        assert_eq!(t.alpha(), 1);
        assert_eq!(t.theta(), 1.0);
        assert_eq!(t.rho(), &[0.0, 0.0]);
        // the term is max_k x_k
        assert_eq!(eval_hinge_sum(&dec, &v(&[3.0, -1.0])).unwrap(), 3.0);
    }

    #[test]
    fn erosion_case_table() {
        // one erosion neuron, s = (1, -1), w = 2: the case analysis gives
        // alpha = -1, |theta| = 2, rho = (2, -2), slope carries the minus
        let (de, lin) = block((0, vec![]), (1, vec![1.0, -1.0]), 2, false, vec![2.0]);
        let dec = decompose(&de, &lin).unwrap();
        let t = &dec.terms()[0];
        assert_eq!(t.alpha(), -1);
        assert_eq!(t.theta(), 2.0);
        assert_eq!(t.rho(), &[2.0, -2.0]);
        assert_eq!(t.signed_slope(), -2.0);
        assert_eq!(t.alpha() as f64 * t.theta(), -2.0); // recovers the signed slope

        // numeric equality against the block on a few points
        for x in [
            v(&[0.0, 0.0]),
            v(&[1.0, 0.0]),
            v(&[-2.0, 3.0]),
            v(&[0.7, -4.2]),
        ] {
            let want = forward_block(&de, &lin, &x).unwrap()[0];
            let got = eval_hinge_sum(&dec, &x).unwrap();
            assert!((got - want).abs() <= 1e-12, "at {x:?}");
        }
    }

    #[test]
    fn zero_weight_keeps_term_count() {
        let (de, lin) = block(
            (1, vec![0.5, -0.5]),
            (1, vec![1.0, 1.0]),
            2,
            false,
            vec![0.0, 0.0],
        );
        let dec = decompose(&de, &lin).unwrap();
        assert_eq!(dec.terms().len(), 2);
        for t in dec.terms() {
            assert_eq!(t.alpha(), 1);
            assert_eq!(t.theta(), 0.0);
            assert!(t.rho().iter().all(|&r| r == 0.0));
        }
        assert_eq!(eval_hinge_sum(&dec, &v(&[1.0, 2.0])).unwrap(), 0.0);
    }

    #[test]
    fn empty_decomposition_evaluates_to_zero() {
        let dec = HingeDecomposition::<f64>::new(vec![], 2, false).unwrap();
        assert_eq!(eval_hinge_sum(&dec, &v(&[1.0, 2.0])).unwrap(), 0.0);
    }

    #[test]
    fn random_blocks_match_forward_everywhere() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(53);
        for _ in 0..25 {
            let d = 3;
            let n = 2;
            let m = 2;
            let bias = rng.random::<bool>();
            let cols = d + usize::from(bias);
            let mut draw = |k: usize| -> Vec<f64> {
                (0..k).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect()
            };
            let (de, lin) = {
                let de = DilationErosionLayer::new(
                    Matrix::new(n, cols, draw(n * cols)).unwrap(),
                    Matrix::new(m, cols, draw(m * cols)).unwrap(),
                    bias,
                    Mode::Hard,
                )
                .unwrap();
                let lin = LinearLayer::new(Matrix::new(1, n + m, draw(n + m)).unwrap(), None).unwrap();
                (de, lin)
            };
            let dec = decompose(&de, &lin).unwrap();
            for t in dec.terms() {
                assert!(t.theta() >= 0.0);
            }
            for _ in 0..400 {
                let x = v(&[
                    rng.random::<f64>() * 10.0 - 5.0,
                    rng.random::<f64>() * 10.0 - 5.0,
                    rng.random::<f64>() * 10.0 - 5.0,
                ]);
                let want = forward_block(&de, &lin, &x).unwrap()[0];
                let got = eval_hinge_sum(&dec, &x).unwrap();
                assert!((got - want).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn decompose_rejects_soft_multi_output_and_bias() {
        let de_soft = DilationErosionLayer::new(
            Matrix::new(1, 2, vec![0.0, 0.0]).unwrap(),
            Matrix::zeros(0, 2),
            false,
            Mode::soft(10.0).unwrap(),
        )
        .unwrap();
        let lin1 = LinearLayer::new(Matrix::new(1, 1, vec![1.0]).unwrap(), None).unwrap();
        assert!(decompose(&de_soft, &lin1).is_err());

        let (de, _) = block((1, vec![0.0, 0.0]), (0, vec![]), 2, false, vec![1.0]);
        let lin2 = LinearLayer::new(Matrix::new(2, 1, vec![1.0, -1.0]).unwrap(), None).unwrap();
        assert!(decompose(&de, &lin2).is_err());
        let lin_b = LinearLayer::new(Matrix::new(1, 1, vec![1.0]).unwrap(), Some(vec![0.5])).unwrap();
        assert!(decompose(&de, &lin_b).is_err());
    }

    #[test]
    fn count_formulas_match_paper_values() {
        let b = hyperplane_bounds(2, 2, true).unwrap();
        assert_eq!(b.total, 8);
        assert_eq!(b.non_axis_parallel, 2);
        let b = hyperplane_bounds(2, 2, false).unwrap();
        assert_eq!(b.total, 3);
        // l < d: no fully-mixed selection exists
        assert_eq!(hyperplane_bounds(3, 2, true).unwrap().non_axis_parallel, 0);
        // growth check: d=3, l=4, bias: total 4^4 - 1
        assert_eq!(hyperplane_bounds(3, 4, true).unwrap().total, 255);
        assert_eq!(
            hyperplane_bounds(3, 4, true).unwrap().non_axis_parallel,
            6 * 4 * 4
        );
        assert!(hyperplane_bounds(60, 40, true).is_err());
    }

    #[test]
    fn two_regions_for_single_flat_dilation_neuron() {
        let (de, lin) = block((1, vec![0.0, 0.0]), (0, vec![]), 2, false, vec![1.0]);
        let bx = CompactBox::cube(2, 1.0).unwrap();
        let regions = enumerate_regions(&de, &lin, &bx, 64).unwrap();
        assert_eq!(regions.region_count(), 2);
        // the two pieces are x1 and x2
        let grads: Vec<Vec<f64>> = regions.pieces.iter().map(|a| a.gradient.clone()).collect();
        assert!(grads.contains(&vec![1.0, 0.0]));
        assert!(grads.contains(&vec![0.0, 1.0]));
    }

    #[test]
    fn degenerate_all_zero_block_reports_one_region() {
        let (de, lin) = block(
            (1, vec![0.0, 0.0, 0.0]),
            (1, vec![0.0, 0.0, 0.0]),
            3,
            true,
            vec![0.0, 0.0],
        );
        let bx = CompactBox::cube(2, 1.0).unwrap();
        let regions = enumerate_regions(&de, &lin, &bx, 32).unwrap();
        // signatures vary with argmax(x1, x2, 0), but zero weights collapse
        // every piece to the zero map: one region
        assert_eq!(regions.region_count(), 1);
        assert!(regions.signature_count() >= 1);
        assert!(regions.cell_values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn region_count_never_exceeds_signature_bound() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(59);
        let bx = CompactBox::cube(2, 4.0).unwrap();
        for l in 1..=3usize {
            for _ in 0..10 {
                let n = rng.random_range(0..=l);
                let m = l - n;
                if n + m == 0 {
                    continue;
                }
                let cols = 3; // d = 2 with bias
                let mut draw = |k: usize| -> Vec<f64> {
                    (0..k).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
                };
                let de = DilationErosionLayer::new(
                    Matrix::new(n, cols, draw(n * cols)).unwrap(),
                    Matrix::new(m, cols, draw(m * cols)).unwrap(),
                    true,
                    Mode::Hard,
                )
                .unwrap();
                let lin =
                    LinearLayer::new(Matrix::new(1, l, draw(l)).unwrap(), None).unwrap();
                let bounds = hyperplane_bounds(2, l, true).unwrap();
                let regions = enumerate_regions(&de, &lin, &bx, 96).unwrap();
                assert!(
                    regions.region_count() as u64 <= bounds.total + 1,
                    "l={l}: {} regions vs bound {}",
                    regions.region_count(),
                    bounds.total + 1
                );
                assert!(regions.signature_count() as u64 <= bounds.total + 1);
            }
        }
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let (de, lin) = block((1, vec![0.0, 0.0]), (0, vec![]), 2, false, vec![1.0]);
        let bx = CompactBox::cube(2, 1.0).unwrap();
        let regions = enumerate_regions(&de, &lin, &bx, 4).unwrap();
        let mut buf = Vec::new();
        regions.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x1,x2,signature_id,value");
        assert_eq!(lines.len(), 1 + 16);
    }
}
