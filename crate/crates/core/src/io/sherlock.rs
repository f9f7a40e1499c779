//! Sherlock network files.
//!
//! A whitespace-separated stream of numbers: input count, output count,
//! hidden-layer count, the hidden-layer sizes, then for every layer and
//! every neuron its input weights followed by its bias. Hidden layers use
//! ReLU; the output layer is affine unless the file carries a
//! `# relu-output` comment line. Anything else after `#` is ignored.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{Layer, Network};

pub const RELU_OUTPUT_DIRECTIVE: &str = "# relu-output";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParseOptions {
    /// Reject numbers after the last bias.
    pub strict: bool,
    /// Overrides the `# relu-output` directive when set.
    pub relu_output: Option<bool>,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            strict: true,
            relu_output: None,
        }
    }
}

pub fn parse(text: &str) -> Result<Network> {
    parse_with(text, ParseOptions::default())
}

pub fn parse_with(text: &str, opts: ParseOptions) -> Result<Network> {
    let mut directive = false;
    let mut tokens = Vec::new();
    for line in text.lines() {
        let (body, comment) = match line.find('#') {
            Some(k) => (&line[..k], Some(&line[k..])),
            None => (line, None),
        };
        if comment.is_some_and(|c| c.trim() == RELU_OUTPUT_DIRECTIVE) {
            directive = true;
        }
        tokens.extend(body.split_whitespace());
    }
    if tokens.is_empty() {
        return Err(Error::EmptyFile);
    }
    let mut it = tokens.into_iter().enumerate();
    let mut number = || -> Result<f64> {
        let (k, tok) = it
            .next()
            .ok_or_else(|| Error::MalformedFile("unexpected end of file".into()))?;
        tok.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::MalformedFile(format!("token {}: '{tok}' is not a number", k + 1)))
    };
    let mut count = |what: &str| -> Result<usize> {
        let v = number()?;
        if v < 0.0 || v.fract() != 0.0 {
            return Err(Error::MalformedFile(format!("{what} must be a non-negative integer, got {v}")));
        }
        Ok(v as usize)
    };
    let inputs = count("input count")?;
    let outputs = count("output count")?;
    let hidden = count("hidden layer count")?;
    let mut sizes = (0..hidden)
        .map(|k| count(&format!("size of hidden layer {}", k + 1)))
        .collect::<Result<Vec<_>>>()?;
    sizes.push(outputs);
    if inputs == 0 || sizes.contains(&0) {
        return Err(Error::MalformedFile("layers must be non-empty".into()));
    }
    let relu_output = opts.relu_output.unwrap_or(directive);

    let mut layers = Vec::with_capacity(sizes.len());
    let mut width = inputs;
    for (l, &n) in sizes.iter().enumerate() {
        let mut weights = Vec::with_capacity(n);
        let mut bias = Vec::with_capacity(n);
        for _ in 0..n {
            weights.push((0..width).map(|_| number()).collect::<Result<Vec<_>>>()?);
            bias.push(number()?);
        }
        layers.push(Layer {
            weights,
            bias,
            relu: l + 1 < sizes.len() || relu_output,
        });
        width = n;
    }
    if opts.strict {
        if let Some((k, tok)) = it.next() {
            return Err(Error::MalformedFile(format!("token {}: trailing '{tok}'", k + 1)));
        }
    }
    Network::new(inputs, layers)
}

pub fn read(path: impl AsRef<Path>) -> Result<Network> {
    parse(&std::fs::read_to_string(path)?)
}

pub fn read_with(path: impl AsRef<Path>, opts: ParseOptions) -> Result<Network> {
    parse_with(&std::fs::read_to_string(path)?, opts)
}

/// One number per line, in the order [`parse`] reads them.
pub fn to_string(net: &Network) -> Result<String> {
    let layers = net.layers();
    let (hidden, last) = layers.split_at(layers.len() - 1);
    if hidden.iter().any(|l| !l.relu) {
        return Err(Error::InvalidDomain("hidden layers must use ReLU".into()));
    }
    let mut out = String::new();
    if last[0].relu {
        out.push_str(RELU_OUTPUT_DIRECTIVE);
        out.push('\n');
    }
    let mut put = |v: f64| {
        let _ = writeln!(out, "{v}");
    };
    put(net.inputs() as f64);
    put(net.outputs() as f64);
    put(hidden.len() as f64);
    for l in hidden {
        put(l.outputs() as f64);
    }
    for l in layers {
        for (row, b) in l.weights.iter().zip(&l.bias) {
            row.iter().for_each(|&w| put(w));
            put(*b);
        }
    }
    Ok(out)
}

pub fn write(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_string(net)?)?;
    Ok(())
}
