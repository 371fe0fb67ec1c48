//! Network files and canonical serialization.
//!
//! A network file is a JSON document
//! `{"layers": [{"weights": [[...], ...], "bias": [...]}, ...]}` with weights
//! stored row-major (`N_ℓ` rows of `N_{ℓ-1}` entries). The canonical form
//! written by [`to_canonical_json`] prints every number with 17 significant
//! digits, so loading it back reproduces the network bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::ser::SerializeSeq;
use serde::{Deserialize, Serializer};

use crate::error::{Error, Result};
use crate::net::{Layer, NetworkSpec};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    layers: Vec<LayerFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

fn layer_error(index: usize, e: Error) -> Error {
    match e {
        Error::Shape(m) => Error::Shape(format!("layer {index}: {m}")),
        Error::Validation(m) => Error::Validation(format!("layer {index}: {m}")),
        other => other,
    }
}

/// Parse and validate a network document.
pub fn parse_network(text: &str) -> Result<NetworkSpec> {
    let file: NetworkFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let layers = file
        .layers
        .into_iter()
        .enumerate()
        .map(|(i, l)| Layer::from_rows(l.weights, l.bias).map_err(|e| layer_error(i + 1, e)))
        .collect::<Result<Vec<_>>>()?;
    NetworkSpec::new(layers)
}

pub fn load_network(path: impl AsRef<Path>) -> Result<NetworkSpec> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_network(&text)
}

pub fn save_network(net: &NetworkSpec, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_canonical_json(net))?;
    Ok(())
}

/// A float with 17 significant digits in exponent notation.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_row(out: &mut String, values: impl IntoIterator<Item = f64>) {
    out.push('[');
    for (i, v) in values.into_iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&format_float(v));
    }
    out.push(']');
}

/// Canonical text of a network file. `parse_network` followed by this is
/// idempotent.
pub fn to_canonical_json(net: &NetworkSpec) -> String {
    let mut out = String::from("{\n  \"layers\": [\n");
    for (li, layer) in net.layers().iter().enumerate() {
        out.push_str("    {\n      \"weights\": [\n");
        let rows = layer.weights().nrows();
        for (ri, row) in layer.weights().rows().into_iter().enumerate() {
            out.push_str("        ");
            write_row(&mut out, row.iter().copied());
            out.push_str(if ri + 1 < rows { ",\n" } else { "\n" });
        }
        out.push_str("      ],\n      \"bias\": ");
        write_row(&mut out, layer.bias().iter().copied());
        let _ = write!(
            out,
            "\n    }}{}\n",
            if li + 1 < net.depth() { "," } else { "" }
        );
    }
    out.push_str("  ]\n}\n");
    out
}

pub(crate) fn serialize_matrix<S: Serializer>(
    m: &Array2<f64>,
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    let mut seq = serializer.serialize_seq(Some(m.nrows()))?;
    for row in m.rows() {
        seq.serialize_element(&row.to_vec())?;
    }
    seq.end()
}

pub(crate) fn serialize_vector<S: Serializer>(
    v: &Array1<f64>,
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    serializer.collect_seq(v.iter())
}
