//! Architecture mini-language.
//!
//! Comma-separated layer tokens, mirroring the `D/E/L` tag notation:
//!
//! ```text
//! de:<n>[+bias][@beta|@hard]   n neurons, ceil(n/2) dilation + floor(n/2) erosion
//! d:<n>[+bias][@beta|@hard]    n dilation neurons
//! e:<n>[+bias][@beta|@hard]    n erosion neurons
//! linear:<k>[+bias]            k-output linear combination
//! sigmoid
//! ```
//!
//! Morphological layers default to soft mode with beta 10; `@hard` selects
//! the hard max, `@<number>` another beta. Parameters start at zero and are
//! drawn by the training initializer.

use morphnet::matrix::Matrix;
use morphnet::network::{DilationErosionLayer, Layer, LinearLayer, Mode, Network};
use morphnet::{Error, Result};

const DEFAULT_BETA: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Morph { n_dilation: usize, n_erosion: usize, bias: bool, mode_tag: ModeTag },
    Linear { outputs: usize, bias: bool },
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ModeTag {
    Hard,
    Soft(f64),
}

fn parse_token(token: &str) -> Result<Token> {
    let token = token.trim();
    if token == "sigmoid" {
        return Ok(Token::Sigmoid);
    }
    let (kind, rest) = token
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("layer '{token}' needs kind:<count>")))?;

    let mut rest = rest;
    let mut mode_tag = ModeTag::Soft(DEFAULT_BETA);
    if let Some((head, beta)) = rest.split_once('@') {
        mode_tag = if beta == "hard" {
            ModeTag::Hard
        } else {
            let beta: f64 = beta
                .parse()
                .map_err(|_| Error::Parse(format!("bad beta '{beta}' in '{token}'")))?;
            ModeTag::Soft(beta)
        };
        rest = head;
    }
    let bias = rest.ends_with("+bias");
    let count_str = rest.strip_suffix("+bias").unwrap_or(rest);
    let count: usize = count_str
        .parse()
        .map_err(|_| Error::Parse(format!("bad count '{count_str}' in '{token}'")))?;
    if count == 0 {
        return Err(Error::Parse(format!("layer '{token}' needs count >= 1")));
    }

    match kind {
        "de" => Ok(Token::Morph {
            n_dilation: count.div_ceil(2),
            n_erosion: count / 2,
            bias,
            mode_tag,
        }),
        "d" => Ok(Token::Morph { n_dilation: count, n_erosion: 0, bias, mode_tag }),
        "e" => Ok(Token::Morph { n_dilation: 0, n_erosion: count, bias, mode_tag }),
        "linear" => Ok(Token::Linear { outputs: count, bias }),
        other => Err(Error::Parse(format!("unknown layer kind '{other}'"))),
    }
}

/// Build a zero-parameter network of the given architecture.
pub fn build_network(input_dim: usize, arch: &str) -> Result<Network<f64>> {
    let tokens: Vec<Token> = arch
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(parse_token)
        .collect::<Result<_>>()?;
    if tokens.is_empty() {
        return Err(Error::Parse("architecture string is empty".into()));
    }
    let mut layers = Vec::with_capacity(tokens.len());
    let mut dim = input_dim;
    for token in tokens {
        match token {
            Token::Morph { n_dilation, n_erosion, bias, mode_tag } => {
                let mode = match mode_tag {
                    ModeTag::Hard => Mode::Hard,
                    ModeTag::Soft(beta) => Mode::soft(beta)?,
                };
                let de = DilationErosionLayer::zeros(n_dilation, n_erosion, dim, bias, mode)?;
                dim = de.out_dim();
                layers.push(Layer::DilationErosion(de));
            }
            Token::Linear { outputs, bias } => {
                let lin = LinearLayer::new(
                    Matrix::zeros(outputs, dim),
                    bias.then(|| vec![0.0; outputs]),
                )?;
                dim = outputs;
                layers.push(Layer::Linear(lin));
            }
            Token::Sigmoid => layers.push(Layer::Sigmoid),
        }
    }
    Network::new(input_dim, layers)
}
