//! In-memory datasets, toy generators, and the CSV interchange format.
//!
//! CSV layout is `x1,...,xd,y` with plain decimal reals and no quoting.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tropical::Vector;

/// Rows of (features, label vector); every row has the same feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    dim: usize,
    label_dim: usize,
    rows: Vec<(Vector<T>, Vector<T>)>,
}

impl<T: Real> Dataset<T> {
    pub fn new(rows: Vec<(Vector<T>, Vector<T>)>) -> Result<Self> {
        let first = rows.first().ok_or_else(|| Error::invalid("dataset must be nonempty"))?;
        let dim = first.0.len();
        let label_dim = first.1.len();
        for (i, (x, y)) in rows.iter().enumerate() {
            if x.len() != dim || y.len() != label_dim {
                return Err(Error::dim(format!(
                    "row {i} has shape ({}, {}), expected ({dim}, {label_dim})",
                    x.len(),
                    y.len()
                )));
            }
        }
        Ok(Dataset { dim, label_dim, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label_dim(&self) -> usize {
        self.label_dim
    }

    pub fn rows(&self) -> &[(Vector<T>, Vector<T>)] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> (&Vector<T>, &Vector<T>) {
        let (x, y) = &self.rows[i];
        (x, y)
    }

    /// Write as `x1,...,xd,y1(,y2...)` CSV. Single-label datasets use the
    /// plain `y` header column.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header: Vec<String> = (1..=self.dim).map(|i| format!("x{i}")).collect();
        if self.label_dim == 1 {
            header.push("y".into());
        } else {
            header.extend((1..=self.label_dim).map(|i| format!("y{i}")));
        }
        writeln!(out, "{}", header.join(","))?;
        for (x, y) in &self.rows {
            let mut fields: Vec<String> = x.iter().map(|v| format!("{v}")).collect();
            fields.extend(y.iter().map(|v| format!("{v}")));
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Parse the CSV format written by [`Dataset::write_csv`]. The header
    /// decides the feature/label split: columns named `x*` are features.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty CSV".into()))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        let dim = cols.iter().take_while(|c| c.starts_with('x')).count();
        if dim == 0 || dim == cols.len() {
            return Err(Error::Parse(format!(
                "header must list x1..xd then label columns, got '{header}'"
            )));
        }
        let label_dim = cols.len() - dim;
        let mut rows = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != dim + label_dim {
                return Err(Error::Parse(format!(
                    "line {}: expected {} fields, found {}",
                    lineno + 2,
                    dim + label_dim,
                    fields.len()
                )));
            }
            let parse = |s: &str| -> Result<T> {
                s.trim()
                    .parse::<f64>()
                    .map(T::of)
                    .map_err(|_| Error::Parse(format!("line {}: bad number '{s}'", lineno + 2)))
            };
            let x: Vec<T> = fields[..dim].iter().map(|s| parse(s)).collect::<Result<_>>()?;
            let y: Vec<T> = fields[dim..].iter().map(|s| parse(s)).collect::<Result<_>>()?;
            rows.push((Vector::new(x)?, Vector::new(y)?));
        }
        Dataset::new(rows)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Dataset::read_csv(std::io::BufReader::new(file))
    }
}

/// Samples along two origin-centred circles, one per class: label 0 on the
/// inner radius, label 1 on the outer, with Gaussian radial noise.
pub fn gen_two_circles<T: Real>(
    n_per_class: usize,
    r_inner: f64,
    r_outer: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<Dataset<T>> {
    if !(r_inner > 0.0 && r_outer > 0.0 && r_inner < r_outer) {
        return Err(Error::invalid(format!(
            "need 0 < r_inner < r_outer, got {r_inner} and {r_outer}"
        )));
    }
    if n_per_class == 0 {
        return Err(Error::invalid("n_per_class must be >= 1"));
    }
    if noise_sd < 0.0 {
        return Err(Error::invalid("noise_sd must be >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(2 * n_per_class);
    for (label, radius) in [(0.0, r_inner), (1.0, r_outer)] {
        for _ in 0..n_per_class {
            let angle = rng.random::<f64>() * std::f64::consts::TAU;
            let r = radius + noise_sd * standard_normal(&mut rng);
            let x = Vector::new(vec![T::of(r * angle.cos()), T::of(r * angle.sin())])?;
            let y = Vector::new(vec![T::of(label)])?;
            rows.push((x, y));
        }
    }
    Dataset::new(rows)
}

/// Regular grid over `[lo, hi]^2` labelled with the hinge `max(x + y, 0)`.
pub fn gen_hinge_grid<T: Real>(lo: f64, hi: f64, resolution: usize) -> Result<Dataset<T>> {
    if resolution < 2 {
        return Err(Error::invalid("grid resolution must be >= 2"));
    }
    if lo >= hi || !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::invalid(format!("need lo < hi, got {lo} and {hi}")));
    }
    let step = (hi - lo) / (resolution - 1) as f64;
    let mut rows = Vec::with_capacity(resolution * resolution);
    for i in 0..resolution {
        for j in 0..resolution {
            let x = lo + step * i as f64;
            let y = lo + step * j as f64;
            let target = (x + y).max(0.0);
            rows.push((
                Vector::new(vec![T::of(x), T::of(y)])?,
                Vector::new(vec![T::of(target)])?,
            ));
        }
    }
    Dataset::new(rows)
}

/// Box-Muller draw; two uniforms per normal keeps the stream deterministic.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
