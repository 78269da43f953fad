//! Model serialization: one JSON document per network.
//!
//! ```json
//! {
//!   "input_dim": 2,
//!   "layers": [
//!     {"kind": "dilation_erosion", "n_dilation": 1, "n_erosion": 1,
//!      "with_bias": true, "mode": {"soft": 10.0},
//!      "s_plus": [...], "s_minus": [...]},
//!     {"kind": "linear", "w": [...], "b": [...]},
//!     {"kind": "sigmoid"}
//!   ]
//! }
//! ```
//!
//! Matrices are row-major flat arrays; `mode` is `"hard"` or `{"soft": beta}`.
//! Layer input dimensions are recovered by chaining from `input_dim`, so the
//! document stays minimal. Round trips are bit-exact: serde_json emits the
//! shortest digit string that parses back to the same float.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

use super::{DilationErosionLayer, Layer, LinearLayer, Mode, Network};

#[derive(Serialize, Deserialize)]
struct ModelJson<T> {
    input_dim: usize,
    layers: Vec<LayerJson<T>>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LayerJson<T> {
    DilationErosion {
        n_dilation: usize,
        n_erosion: usize,
        with_bias: bool,
        mode: ModeJson<T>,
        s_plus: Vec<T>,
        s_minus: Vec<T>,
    },
    Linear {
        w: Vec<T>,
        #[serde(default = "Option::default", skip_serializing_if = "Option::is_none")]
        b: Option<Vec<T>>,
    },
    Sigmoid,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ModeJson<T> {
    Hard,
    Soft(T),
}

impl<T: Real + Serialize + DeserializeOwned> Network<T> {
    pub fn to_json_string(&self) -> Result<String> {
        let layers = self
            .layers()
            .iter()
            .map(|layer| match layer {
                Layer::DilationErosion(de) => LayerJson::DilationErosion {
                    n_dilation: de.n_dilation(),
                    n_erosion: de.n_erosion(),
                    with_bias: de.with_bias(),
                    mode: match de.mode() {
                        Mode::Hard => ModeJson::Hard,
                        Mode::Soft(h) => ModeJson::Soft(h.beta()),
                    },
                    s_plus: de.s_plus().data().to_vec(),
                    s_minus: de.s_minus().data().to_vec(),
                },
                Layer::Linear(lin) => LayerJson::Linear {
                    w: lin.weights().data().to_vec(),
                    b: lin.bias().map(|b| b.to_vec()),
                },
                Layer::Sigmoid => LayerJson::Sigmoid,
            })
            .collect();
        let doc = ModelJson { input_dim: self.input_dim(), layers };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: ModelJson<T> = serde_json::from_str(text)?;
        let mut dim = doc.input_dim;
        if dim == 0 {
            return Err(Error::dim("input_dim must be >= 1"));
        }
        let mut layers = Vec::with_capacity(doc.layers.len());
        for (idx, layer) in doc.layers.into_iter().enumerate() {
            let layer = match layer {
                LayerJson::DilationErosion {
                    n_dilation,
                    n_erosion,
                    with_bias,
                    mode,
                    s_plus,
                    s_minus,
                } => {
                    let cols = dim + usize::from(with_bias);
                    let expect = |name: &str, rows: usize, len: usize| -> Result<()> {
                        if len != rows * cols {
                            return Err(Error::dim(format!(
                                "layer {idx}: {name} has {len} entries, expected {rows}x{cols}"
                            )));
                        }
                        Ok(())
                    };
                    expect("s_plus", n_dilation, s_plus.len())?;
                    expect("s_minus", n_erosion, s_minus.len())?;
                    let mode = match mode {
                        ModeJson::Hard => Mode::Hard,
                        ModeJson::Soft(beta) => Mode::soft(beta)?,
                    };
                    let de = DilationErosionLayer::new(
                        Matrix::new(n_dilation, cols, s_plus)?,
                        Matrix::new(n_erosion, cols, s_minus)?,
                        with_bias,
                        mode,
                    )?;
                    dim = de.out_dim();
                    Layer::DilationErosion(de)
                }
                LayerJson::Linear { w, b } => {
                    if w.is_empty() || w.len() % dim != 0 {
                        return Err(Error::dim(format!(
                            "layer {idx}: weight array of {} entries is not a multiple of input dim {dim}",
                            w.len()
                        )));
                    }
                    let rows = w.len() / dim;
                    let lin = LinearLayer::new(Matrix::new(rows, dim, w)?, b)?;
                    dim = lin.out_dim();
                    Layer::Linear(lin)
                }
                LayerJson::Sigmoid => Layer::Sigmoid,
            };
            layers.push(layer);
        }
        Network::new(doc.input_dim, layers)
    }
}

pub fn save_json<T: Real + Serialize + DeserializeOwned>(
    net: &Network<T>,
    path: &Path,
) -> Result<()> {
    std::fs::write(path, net.to_json_string()?)?;
    Ok(())
}

pub fn load_json<T: Real + Serialize + DeserializeOwned>(path: &Path) -> Result<Network<T>> {
    let text = std::fs::read_to_string(path)?;
    Network::from_json_str(&text)
}
