//! Reader and writer for the NNet text format used by the ACAS Xu networks.
//!
//! Layout after any leading `//` comment lines:
//!
//! ```text
//! numLayers,inputSize,outputSize,maxLayerSize,
//! size0,size1,...,sizeL,
//! 0,                       (legacy flag, ignored)
//! min0,...                 (input minimums)
//! max0,...                 (input maximums)
//! mean0,...,meanOut        (means, inputs then output)
//! range0,...,rangeOut      (ranges, inputs then output)
//! w,w,w,...                (one row per neuron, per layer)
//! b,                       (one bias per line, per layer)
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::{Network, Normalization};
use crate::error::{Error, Result};

struct Lines<'a> {
    name: &'a str,
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Lines<'a> {
    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            source_name: self.name.to_string(),
            line,
            message: message.into(),
        }
    }

    /// Next line's numeric tokens. Blank lines are skipped unless `allow_empty`.
    fn row(&mut self, what: &str, allow_empty: bool) -> Result<(usize, Vec<f64>)> {
        loop {
            let Some((idx, text)) = self.inner.next() else {
                return Err(self.err(0, format!("unexpected end of file, expected {what}")));
            };
            let line = idx + 1;
            let text = text.trim();
            if text.is_empty() && !allow_empty {
                continue;
            }
            let values = text
                .split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| self.err(line, format!("non-numeric token {t:?} in {what}")))
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok((line, values));
        }
    }

    fn row_of(&mut self, what: &str, len: usize) -> Result<Vec<f64>> {
        let (line, values) = self.row(what, len == 0)?;
        if values.len() != len {
            return Err(self.err(
                line,
                format!("{what}: expected {len} values, found {}", values.len()),
            ));
        }
        Ok(values)
    }
}

fn as_count(lines: &Lines<'_>, line: usize, v: f64, what: &str) -> Result<usize> {
    if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
        return Err(lines.err(line, format!("{what} must be a non-negative integer, got {v}")));
    }
    Ok(v as usize)
}

/// Parse NNet text. `name` is used in error messages.
pub fn parse_nnet(text: &str, name: &str) -> Result<Network> {
    let mut lines = Lines {
        name,
        inner: text.lines().enumerate().peekable(),
    };
    while let Some((_, l)) = lines.inner.peek() {
        let t = l.trim();
        if t.starts_with("//") || t.is_empty() {
            lines.inner.next();
        } else {
            break;
        }
    }

    let (line, header) = lines.row("header", false)?;
    if header.len() < 4 {
        return Err(lines.err(line, format!("malformed header: expected 4 values, found {}", header.len())));
    }
    let num_layers = as_count(&lines, line, header[0], "numLayers")?;
    let input_size = as_count(&lines, line, header[1], "inputSize")?;
    let output_size = as_count(&lines, line, header[2], "outputSize")?;
    if num_layers == 0 {
        return Err(lines.err(line, "malformed header: numLayers is zero"));
    }

    let (line, raw_sizes) = lines.row("layer sizes", false)?;
    if raw_sizes.len() != num_layers + 1 {
        return Err(lines.err(
            line,
            format!("malformed header: expected {} layer sizes, found {}", num_layers + 1, raw_sizes.len()),
        ));
    }
    let sizes = raw_sizes
        .iter()
        .map(|&v| as_count(&lines, line, v, "layer size"))
        .collect::<Result<Vec<_>>>()?;
    if sizes[0] != input_size || sizes[num_layers] != output_size {
        return Err(lines.err(line, "malformed header: layer sizes disagree with input/output sizes"));
    }

    lines.row("legacy flag", false)?;
    let input_min = lines.row_of("input minimums", input_size)?;
    let input_max = lines.row_of("input maximums", input_size)?;
    let means = lines.row_of("means", input_size + 1)?;
    let ranges = lines.row_of("ranges", input_size + 1)?;

    let mut params = Vec::with_capacity(num_layers);
    for li in 0..num_layers {
        let (rows, cols) = (sizes[li + 1], sizes[li]);
        let weights = (0..rows)
            .map(|r| lines.row_of(&format!("layer {} weight row {r}", li + 1), cols))
            .collect::<Result<Vec<_>>>()?;
        let biases = (0..rows)
            .map(|r| lines.row_of(&format!("layer {} bias {r}", li + 1), 1).map(|v| v[0]))
            .collect::<Result<Vec<_>>>()?;
        params.push((weights, biases));
    }

    let mut net = Network::from_parameters(input_size, params)?;
    net.normalization = Some(Normalization {
        input_min,
        input_max,
        means,
        ranges,
    });
    Ok(net)
}

pub fn load_nnet(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_nnet(&text, &path.display().to_string())
}

fn push_row(out: &mut String, values: impl IntoIterator<Item = f64>) {
    for v in values {
        let _ = write!(out, "{v:?},");
    }
    out.push('\n');
}

/// Render a network as NNet text. Networks without normalization metadata get
/// an unbounded identity normalization (mean 0, range 1).
pub fn write_nnet(network: &Network) -> String {
    let n_in = network.input_dim;
    let sizes: Vec<usize> = std::iter::once(n_in).chain(network.layers.iter().map(|l| l.len())).collect();
    let mut out = String::new();
    out.push_str("// written by nncegar\n");
    let _ = writeln!(
        out,
        "{},{},{},{},",
        network.layers.len(),
        n_in,
        network.output_dim(),
        sizes.iter().max().copied().unwrap_or(0)
    );
    push_row(&mut out, sizes.iter().map(|&s| s as f64));
    out.push_str("0,\n");
    match &network.normalization {
        Some(norm) => {
            push_row(&mut out, norm.input_min.iter().copied());
            push_row(&mut out, norm.input_max.iter().copied());
            push_row(&mut out, norm.means.iter().copied());
            push_row(&mut out, norm.ranges.iter().copied());
        }
        None => {
            push_row(&mut out, std::iter::repeat_n(f64::MIN, n_in));
            push_row(&mut out, std::iter::repeat_n(f64::MAX, n_in));
            push_row(&mut out, std::iter::repeat_n(0.0, n_in + 1));
            push_row(&mut out, std::iter::repeat_n(1.0, n_in + 1));
        }
    }
    for layer in &network.layers {
        for row in &layer.weights {
            push_row(&mut out, row.iter().copied());
        }
        for &b in &layer.biases {
            push_row(&mut out, [b]);
        }
    }
    out
}

pub fn save_nnet(network: &Network, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_nnet(network))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "// tiny\n// two comment lines\n2,1,1,1,\n1,1,1,\n0,\n-1,\n1,\n0,0,\n1,1,\n2.5,\n-0.5,\n3,\n1,\n";

    #[test]
    fn minimal_fixture() {
        let net = parse_nnet(MINIMAL, "tiny").unwrap();
        assert_eq!(net.input_dim, 1);
        assert_eq!(net.hidden_count(), 1);
        assert_eq!(net.layers[0].weights, vec![vec![2.5]]);
        assert_eq!(net.layers[0].biases, vec![-0.5]);
        assert_eq!(net.evaluate(&[1.0]).unwrap(), vec![7.0]);
    }

    #[test]
    fn round_trip_preserves_values() {
        let net = parse_nnet(MINIMAL, "tiny").unwrap();
        let again = parse_nnet(&write_nnet(&net), "again").unwrap();
        assert!(net.bitwise_eq(&again));
        assert_eq!(net.normalization, again.normalization);
    }

    #[test]
    fn awkward_floats_round_trip() {
        let net = Network::from_parameters(
            2,
            vec![
                (vec![vec![0.1 + 0.2, -1e-300], vec![1e300, f64::EPSILON]], vec![-0.0, 1.0 / 3.0]),
                (vec![vec![std::f64::consts::PI, -2.0]], vec![1e-7]),
            ],
        )
        .unwrap();
        let again = parse_nnet(&write_nnet(&net), "x").unwrap();
        assert!(net.bitwise_eq(&again));
    }

    #[test]
    fn empty_layer_round_trips() {
        let net = Network::from_parameters(
            2,
            vec![(vec![], vec![]), (vec![vec![]], vec![4.0])],
        )
        .unwrap();
        let again = parse_nnet(&write_nnet(&net), "x").unwrap();
        assert!(net.bitwise_eq(&again));
        assert_eq!(again.evaluate(&[1.0, 2.0]).unwrap(), vec![4.0]);
    }

    fn line_of(err: Error) -> usize {
        match err {
            Error::Parse { line, .. } => line,
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn malformed_header_reports_line() {
        let text = MINIMAL.replace("2,1,1,1,", "2,1,");
        assert_eq!(line_of(parse_nnet(&text, "x").unwrap_err()), 3);
    }

    #[test]
    fn row_length_mismatch_reports_line() {
        let text = MINIMAL.replace("2.5,\n", "2.5,1.0,\n");
        assert_eq!(line_of(parse_nnet(&text, "x").unwrap_err()), 10);
    }

    #[test]
    fn non_numeric_token_reports_line() {
        let text = MINIMAL.replace("3,\n", "abc,\n");
        assert_eq!(line_of(parse_nnet(&text, "x").unwrap_err()), 12);
    }

    #[test]
    fn truncated_file_is_an_error() {
        let text: String = MINIMAL.lines().take(10).collect::<Vec<_>>().join("\n");
        assert!(matches!(parse_nnet(&text, "x"), Err(Error::Parse { .. })));
    }
}
