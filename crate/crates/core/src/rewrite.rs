//! Architecture-level simplification and inequivalence witnesses.
//!
//! Composing two pure dilation layers is again a dilation layer whose
//! structuring matrix is the max-plus product of the two: each output keeps
//! the longest input-to-output path. [`simplify`] fuses every maximal run of
//! consecutive pure-dilation (or pure-erosion) hard layers into one layer
//! and never rewrites anything else — mixed dilation-erosion blocks, linear
//! layers, and soft-mode runs are provably or numerically not collapsible.
//!
//! The converse direction is demonstrated, not assumed:
//! [`inequivalence_witness`] rasterizes a sublevel set `{f <= e}` of the
//! richer architecture and searches for a triple
//! `f(x1,y1) <= e, f(x2,y2) <= e, f(x1,y2) > e`, which no single
//! dilation-neuron function can produce (its sublevel sets are lower-left
//! products of half-lines).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::network::{DilationErosionLayer, Layer, Mode, Network};
use crate::parallel;
use crate::scalar::Real;
use crate::tropical::{maxplus_matmul, TropicalMatrix};

/// Architecture tag string: `D1E1->D1->L` style, `S` for sigmoid.
pub fn arch_tag<T: Real>(net: &Network<T>) -> String {
    net.layers()
        .iter()
        .map(|layer| match layer {
            Layer::DilationErosion(de) => match (de.n_dilation(), de.n_erosion()) {
                (n, 0) => format!("D{n}"),
                (0, m) => format!("E{m}"),
                (n, m) => format!("D{n}E{m}"),
            },
            Layer::Linear(_) => "L".to_string(),
            Layer::Sigmoid => "S".to_string(),
        })
        .collect::<Vec<_>>()
        .join("->")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RunKind {
    Dilation,
    Erosion,
}

/// Pure-dilation or pure-erosion layer, with its mode.
fn run_kind_of<T: Real>(layer: &Layer<T>) -> Option<(RunKind, bool)> {
    match layer {
        Layer::DilationErosion(de) if de.n_erosion() == 0 => {
            Some((RunKind::Dilation, de.mode().is_hard()))
        }
        Layer::DilationErosion(de) if de.n_dilation() == 0 => {
            Some((RunKind::Erosion, de.mode().is_hard()))
        }
        _ => None,
    }
}

/// Collapse one run of same-kind layers into a single layer.
///
/// Works in the homogeneous form `x -> U (x) x (+) c`: `U` accumulates the
/// max-plus products of the structuring matrices and `c` the bias column
/// (`-inf` while no layer has contributed a bias). The same algebra covers
/// erosion runs because `E_S(x) = -D_S(-x)` turns an erosion chain into the
/// dilation chain of the same parameter stack.
fn collapse_run<T: Real>(
    layers: &[&DilationErosionLayer<T>],
    kind: RunKind,
) -> Result<DilationErosionLayer<T>> {
    let first = layers.first().expect("runs are non-empty");
    let d_in = first.in_dim();
    let pick = |de: &DilationErosionLayer<T>| -> Matrix<T> {
        match kind {
            RunKind::Dilation => de.s_plus().clone(),
            RunKind::Erosion => de.s_minus().clone(),
        }
    };

    let split = |s: &Matrix<T>, with_bias: bool| -> (TropicalMatrix<T>, Vec<T>) {
        let cols = s.cols() - usize::from(with_bias);
        let mut u = TropicalMatrix::neg_inf(s.rows(), cols);
        let mut c = vec![T::neg_infinity(); s.rows()];
        for (i, ci) in c.iter_mut().enumerate() {
            for j in 0..cols {
                u.set(i, j, s.get(i, j)).expect("finite layer entries");
            }
            if with_bias {
                *ci = s.get(i, cols);
            }
        }
        (u, c)
    };

    let (mut u, mut c) = split(&pick(first), first.with_bias());
    for de in &layers[1..] {
        let (step_u, step_c) = split(&pick(de), de.with_bias());
        let next_u = maxplus_matmul(&step_u, &u)?;
        let mut next_c = vec![T::neg_infinity(); step_u.rows()];
        for (k, next) in next_c.iter_mut().enumerate() {
            let mut best = step_c[k]; // the layer's own bias, if any
            for (j, &cj) in c.iter().enumerate() {
                let sj = step_u.get(k, j);
                if cj > T::neg_infinity() && sj > T::neg_infinity() {
                    best = best.max(sj + cj);
                }
            }
            *next = best;
        }
        u = next_u;
        c = next_c;
    }

    let with_bias = c.iter().any(|&v| v > T::neg_infinity());
    let rows = u.rows();
    let cols = d_in + usize::from(with_bias);
    let mut s = Matrix::zeros(rows, cols);
    for (i, &ci) in c.iter().enumerate().take(rows) {
        for j in 0..d_in {
            let v = u.get(i, j);
            debug_assert!(v.is_finite(), "collapsed structuring entries stay finite");
            s.set(i, j, v);
        }
        if with_bias {
            s.set(i, d_in, ci);
        }
    }
    match kind {
        RunKind::Dilation => {
            DilationErosionLayer::new(s, Matrix::zeros(0, cols), with_bias, Mode::Hard)
        }
        RunKind::Erosion => {
            DilationErosionLayer::new(Matrix::zeros(0, cols), s, with_bias, Mode::Hard)
        }
    }
}

/// Maximal runs of consecutive same-kind pure layers, as index ranges.
fn find_runs<T: Real>(net: &Network<T>) -> Vec<(usize, usize, RunKind, bool)> {
    let layers = net.layers();
    let mut runs = Vec::new();
    let mut i = 0;
    while i < layers.len() {
        if let Some((kind, hard)) = run_kind_of(&layers[i]) {
            let mut j = i;
            let mut all_hard = hard;
            while j + 1 < layers.len() {
                match run_kind_of(&layers[j + 1]) {
                    Some((k, h)) if k == kind => {
                        all_hard &= h;
                        j += 1;
                    }
                    _ => break,
                }
            }
            runs.push((i, j, kind, all_hard));
            i = j + 1;
        } else {
            i += 1;
        }
    }
    runs
}

fn rebuild_with_collapsed<T: Real>(
    net: &Network<T>,
    targets: &[(usize, usize, RunKind)],
) -> Result<Network<T>> {
    let layers = net.layers();
    let mut out: Vec<Layer<T>> = Vec::with_capacity(layers.len());
    let mut i = 0;
    while i < layers.len() {
        if let Some(&(start, end, kind)) = targets.iter().find(|&&(s, _, _)| s == i) {
            let run: Vec<&DilationErosionLayer<T>> = (start..=end)
                .map(|k| match &layers[k] {
                    Layer::DilationErosion(de) => de,
                    _ => unreachable!("runs contain only dilation-erosion layers"),
                })
                .collect();
            out.push(Layer::DilationErosion(collapse_run(&run, kind)?));
            i = end + 1;
        } else {
            out.push(layers[i].clone());
            i += 1;
        }
    }
    net.with_layers(out)
}

/// Collapse every maximal run of consecutive pure-dilation layers.
///
/// Single layers pass through (identity rewrite). A run that mixes in a
/// soft-mode layer is refused: log-sum-exp does not compose exactly.
pub fn collapse_dilation_chain<T: Real>(net: &Network<T>) -> Result<Network<T>> {
    collapse_chains_of(net, RunKind::Dilation)
}

/// Dual of [`collapse_dilation_chain`] for pure-erosion runs.
pub fn collapse_erosion_chain<T: Real>(net: &Network<T>) -> Result<Network<T>> {
    collapse_chains_of(net, RunKind::Erosion)
}

fn collapse_chains_of<T: Real>(net: &Network<T>, want: RunKind) -> Result<Network<T>> {
    let mut targets = Vec::new();
    for (start, end, kind, all_hard) in find_runs(net) {
        if kind != want || end == start {
            continue;
        }
        if !all_hard {
            return Err(Error::Unsupported(format!(
                "layers [{start}..{end}] contain soft-mode members; collapse is exact only for hard max"
            )));
        }
        targets.push((start, end, kind));
    }
    rebuild_with_collapsed(net, &targets)
}

/// Result of [`simplify`]: the rewritten network and a line-oriented log.
#[derive(Debug, Clone)]
pub struct SimplifyOutcome<T> {
    pub network: Network<T>,
    /// `FUSE dilation layers [i..j] -> 1` per fusion (indices into the input
    /// network), `SKIP ...` for soft runs left alone.
    pub log: Vec<String>,
}

/// Fuse all collapsible runs (both kinds) in one pass; soft runs are skipped
/// with a logged reason. One pass reaches the fixed point: after fusing, no
/// two same-kind pure layers remain adjacent.
pub fn simplify<T: Real>(net: &Network<T>) -> Result<SimplifyOutcome<T>> {
    let mut log = Vec::new();
    let mut targets = Vec::new();
    for (start, end, kind, all_hard) in find_runs(net) {
        if end == start {
            continue;
        }
        let name = match kind {
            RunKind::Dilation => "dilation",
            RunKind::Erosion => "erosion",
        };
        if !all_hard {
            log.push(format!(
                "SKIP {name} layers [{start}..{end}]: soft mode does not collapse exactly"
            ));
            continue;
        }
        log.push(format!("FUSE {name} layers [{start}..{end}] -> 1"));
        targets.push((start, end, kind));
    }
    let network = rebuild_with_collapsed(net, &targets)?;
    Ok(SimplifyOutcome { network, log })
}

/// The architecture pairs with supported witness searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchPair {
    /// `D1E1 -> D1` vs `D1E0`.
    D1e1D1VsD1,
    /// `D1E1 -> D1 -> L` vs `D1E0 -> L`.
    D1e1D1LinVsD1Lin,
    /// `D2E0 -> D0E2 -> D1` vs `D2E0 -> D1`.
    D2E0D0e2D1VsD2e0D1,
}

/// Parameters of the `D1E1 -> D1` function
/// `f(x,y) = max(max(x+a, y+b) + a1, min(x+c, y+d) + b1)`,
/// optionally scaled by `alpha` for the `-> L` variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct D1e1Params {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub a1: f64,
    pub b1: f64,
    pub alpha: f64,
}

impl D1e1Params {
    /// The counterexample instance: satisfies `a1 + a < b1 + c` and
    /// `a1 + b < b1 + d` strictly.
    pub fn counterexample() -> Self {
        D1e1Params { a: 0.0, b: 0.0, c: 1.0, d: 1.0, a1: 0.0, b1: 2.0, alpha: 1.0 }
    }

    /// Reversed inequalities: the function collapses to a single dilation
    /// neuron and every sublevel set is a product.
    pub fn product_shaped() -> Self {
        D1e1Params { a: 0.0, b: 0.0, c: 1.0, d: 1.0, a1: 2.0, b1: 0.0, alpha: 1.0 }
    }

    pub fn separating_strictly(&self) -> bool {
        self.a1 + self.a < self.b1 + self.c && self.a1 + self.b < self.b1 + self.d
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let f1 = (x + self.a).max(y + self.b);
        let g1 = (x + self.c).min(y + self.d);
        self.alpha * (f1 + self.a1).max(g1 + self.b1)
    }
}

/// Witness search query.
#[derive(Debug, Clone)]
pub struct WitnessQuery {
    pub pair: ArchPair,
    /// Random restarts for the searched pair; the closed-form pairs ignore it.
    pub trials: usize,
    /// Symmetric box `[lo, hi]^2` to rasterize over.
    pub lo: f64,
    pub hi: f64,
    /// Grid resolution (cells per axis); both must be >= 2.
    pub grid: (usize, usize),
    /// Explicit parameters for the `D1E1 -> D1` pairs; `None` uses the
    /// counterexample instance.
    pub params: Option<D1e1Params>,
    /// Explicit sublevel threshold; `None` sweeps value quantiles.
    pub level: Option<f64>,
    pub seed: u64,
}

impl WitnessQuery {
    pub fn new(pair: ArchPair) -> Self {
        WitnessQuery {
            pair,
            trials: 64,
            lo: -4.0,
            hi: 4.0,
            grid: (256, 256),
            params: None,
            level: None,
            seed: 0,
        }
    }
}

/// A sound witness: two in-set points whose "corner" point escapes the set,
/// which no product-shaped sublevel set allows.
#[derive(Debug, Clone)]
pub struct Witness {
    pub params: Vec<(String, f64)>,
    pub level: f64,
    /// `(x1, y1)` with `f <= level`.
    pub in_cell_a: (f64, f64),
    /// `(x2, y2)` with `f <= level`.
    pub in_cell_b: (f64, f64),
    /// `(x1, y2)` with `f > level`.
    pub out_cell: (f64, f64),
}

/// Search for a sublevel set of architecture A that no instance of
/// architecture B can realize. Returns `None` when every examined level is
/// product-shaped (as the equivalence direction predicts for the reversed
/// inequalities).
pub fn inequivalence_witness(query: &WitnessQuery) -> Result<Option<Witness>> {
    let (nx, ny) = query.grid;
    if nx < 2 || ny < 2 {
        return Err(Error::invalid("witness grid must be at least 2x2"));
    }
    if query.lo >= query.hi || !(query.lo.is_finite() && query.hi.is_finite()) {
        return Err(Error::invalid("witness box needs finite lo < hi"));
    }
    match query.pair {
        ArchPair::D1e1D1VsD1 => {
            let p = query.params.unwrap_or_else(D1e1Params::counterexample);
            witness_for_f(query, |x, y| D1e1Params { alpha: 1.0, ..p }.eval(x, y), d1e1_param_list(&p))
        }
        ArchPair::D1e1D1LinVsD1Lin => {
            // a nontrivial positive output weight by default
            let p = query
                .params
                .unwrap_or(D1e1Params { alpha: 2.0, ..D1e1Params::counterexample() });
            if p.alpha <= 0.0 {
                return Err(Error::invalid("the linear pair needs alpha > 0"));
            }
            witness_for_f(query, move |x, y| p.eval(x, y), d1e1_param_list(&p))
        }
        ArchPair::D2E0D0e2D1VsD2e0D1 => {
            let mut rng = ChaCha8Rng::seed_from_u64(query.seed);
            for _ in 0..query.trials.max(1) {
                let draw = |rng: &mut ChaCha8Rng| rng.random::<f64>() * 4.0 - 2.0;
                let p: Vec<f64> = (0..10).map(|_| draw(&mut rng)).collect();
                let names: Vec<(String, f64)> = p
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| (format!("p{i}"), v))
                    .collect();
                let f = move |x: f64, y: f64| {
                    let fa = (x + p[0]).max(y + p[1]);
                    let fb = (x + p[2]).max(y + p[3]);
                    let gr = (fa - p[4]).min(fb - p[5]);
                    let gs = (fa - p[6]).min(fb - p[7]);
                    (gr + p[8]).max(gs + p[9])
                };
                if let Some(w) = witness_for_f(query, f, names)? {
                    return Ok(Some(w));
                }
            }
            Ok(None)
        }
    }
}

fn d1e1_param_list(p: &D1e1Params) -> Vec<(String, f64)> {
    vec![
        ("a".into(), p.a),
        ("b".into(), p.b),
        ("c".into(), p.c),
        ("d".into(), p.d),
        ("a1".into(), p.a1),
        ("b1".into(), p.b1),
        ("alpha".into(), p.alpha),
    ]
}

/// Rasterize `f` on the grid and look for a non-product triple at the given
/// level (or a sweep of value quantiles).
fn witness_for_f<F>(
    query: &WitnessQuery,
    f: F,
    params: Vec<(String, f64)>,
) -> Result<Option<Witness>>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let (nx, ny) = query.grid;
    let coord = |i: usize, n: usize| query.lo + (query.hi - query.lo) * (i as f64 + 0.5) / n as f64;
    let rows = parallel::map_indexed(nx, |i| {
        let x = coord(i, nx);
        (0..ny).map(|j| f(x, coord(j, ny))).collect::<Vec<f64>>()
    });

    let levels: Vec<f64> = match query.level {
        Some(e) => vec![e],
        None => {
            let mut all: Vec<f64> = rows.iter().flatten().copied().collect();
            all.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
            [0.1, 0.25, 0.4, 0.5, 0.6, 0.75, 0.9]
                .iter()
                .map(|q| all[((all.len() - 1) as f64 * q) as usize])
                .collect()
        }
    };

    for &level in &levels {
        // column i is "occupied" if any cell in it is in the sublevel set
        let mut col_rep: Vec<Option<usize>> = vec![None; nx];
        let mut row_rep: Vec<Option<usize>> = vec![None; ny];
        for i in 0..nx {
            for j in 0..ny {
                if rows[i][j] <= level {
                    col_rep[i].get_or_insert(j);
                    row_rep[j].get_or_insert(i);
                }
            }
        }
        for i in 0..nx {
            let Some(j_in) = col_rep[i] else { continue };
            for j in 0..ny {
                if rows[i][j] > level {
                    if let Some(i_in) = row_rep[j] {
                        return Ok(Some(Witness {
                            params,
                            level,
                            in_cell_a: (coord(i, nx), coord(j_in, ny)),
                            in_cell_b: (coord(i_in, nx), coord(j, ny)),
                            out_cell: (coord(i, nx), coord(j, ny)),
                        }));
                    }
                }
            }
        }
    }
    Ok(None)
}
