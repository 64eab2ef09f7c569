//! Text snapshot format for network parameters.
//!
//! ```text
//! h2o-mlp v1
//! layers 3 64 64 1
//! activations relu identity
//! w0 <fan_in*fan_out values, row-major>
//! b0 <fan_out values>
//! ...
//! ```
//!
//! Values are written with enough significant digits to round-trip bit-exactly.

use std::fs;
use std::path::Path;

use super::mlp::{HiddenActivation, MlpParams, OutputActivation};
use crate::error::{Error, Result};
use crate::scalar::{format_exact, Scalar};

const MAGIC: &str = "h2o-mlp v1";

fn join<T: Scalar>(xs: &[T]) -> String {
    xs.iter().map(|&x| format_exact(x)).collect::<Vec<_>>().join(" ")
}

pub fn to_text<T: Scalar>(p: &MlpParams<T>) -> String {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str("layers");
    for n in p.layer_sizes() {
        out.push_str(&format!(" {n}"));
    }
    out.push('\n');
    let hidden = match p.hidden_activation() {
        HiddenActivation::Relu => "relu",
    };
    out.push_str(&format!("activations {hidden} {}\n", p.output_activation().name()));
    for k in 0..p.num_layers() {
        out.push_str(&format!("w{k} {}\n", join(p.weights(k))));
        out.push_str(&format!("b{k} {}\n", join(p.biases(k))));
    }
    out
}

fn parse_values<T: Scalar>(line: &str, tag: &str, expected: usize) -> Result<Vec<T>> {
    let mut it = line.split_whitespace();
    if it.next() != Some(tag) {
        return Err(Error::Parse(format!("expected `{tag}` line")));
    }
    let vals = it
        .map(|s| s.parse::<T>().map_err(|_| Error::Parse(format!("bad number `{s}` in {tag}"))))
        .collect::<Result<Vec<T>>>()?;
    if vals.len() != expected {
        return Err(Error::Parse(format!("{tag}: expected {expected} values, found {}", vals.len())));
    }
    Ok(vals)
}

pub fn from_text<T: Scalar>(text: &str) -> Result<MlpParams<T>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(MAGIC) {
        return Err(Error::Parse("missing snapshot header".into()));
    }
    let layers_line = lines.next().ok_or_else(|| Error::Parse("missing layers line".into()))?;
    let mut it = layers_line.split_whitespace();
    if it.next() != Some("layers") {
        return Err(Error::Parse("expected `layers` line".into()));
    }
    let sizes = it
        .map(|s| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad layer size `{s}`"))))
        .collect::<Result<Vec<_>>>()?;
    let act_line = lines.next().ok_or_else(|| Error::Parse("missing activations line".into()))?;
    let acts: Vec<&str> = act_line.split_whitespace().collect();
    if acts.len() != 3 || acts[0] != "activations" || acts[1] != "relu" {
        return Err(Error::Parse("bad activations line".into()));
    }
    let output = OutputActivation::from_name(acts[2]).ok_or_else(|| Error::Parse(format!("unknown activation {}", acts[2])))?;
    if sizes.len() < 2 {
        return Err(Error::Parse("need at least two layer sizes".into()));
    }
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for k in 0..sizes.len() - 1 {
        let wl = lines.next().ok_or_else(|| Error::Parse(format!("missing w{k}")))?;
        weights.push(parse_values(wl, &format!("w{k}"), sizes[k] * sizes[k + 1])?);
        let bl = lines.next().ok_or_else(|| Error::Parse(format!("missing b{k}")))?;
        biases.push(parse_values(bl, &format!("b{k}"), sizes[k + 1])?);
    }
    MlpParams::from_parts(sizes, weights, biases, HiddenActivation::Relu, output)
}

pub fn save<T: Scalar>(p: &MlpParams<T>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_text(p))?;
    Ok(())
}

pub fn load<T: Scalar>(path: impl AsRef<Path>) -> Result<MlpParams<T>> {
    from_text(&fs::read_to_string(path)?)
}
