//! Binary container for feature dumps, so external extraction jobs (which do
//! run the big models) can hand representations to this lab.
//!
//! Layout, byte-exact:
//!
//! ```text
//! magic   4 bytes  b"PDMP"
//! version u32 LE   currently 1
//! hlen    u32 LE   byte length of the JSON header
//! header  hlen bytes, UTF-8 JSON:
//!         { "layer_ids": [i64], "boundary_index": u, "labels": [u32],
//!           "token_counts": [[u32; n_examples]; n_layers],
//!           "dims": [u32; n_layers], "end_to_end_accuracy": f64|null }
//! data    f32 LE, layer-major then example-major: for each layer, for each
//!         example, token_counts[l][e] * dims[l] floats, row-major
//! ```

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::FeatureDump;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"PDMP";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct DumpHeader {
    layer_ids: Vec<i64>,
    boundary_index: usize,
    labels: Vec<u32>,
    token_counts: Vec<Vec<u32>>,
    dims: Vec<u32>,
    end_to_end_accuracy: Option<f64>,
}

pub fn encode(dump: &FeatureDump) -> Result<Vec<u8>> {
    dump.validate()?;
    let header = DumpHeader {
        layer_ids: dump.layer_ids.clone(),
        boundary_index: dump.boundary_index,
        labels: dump.labels.clone(),
        token_counts: dump
            .features
            .iter()
            .map(|per| per.iter().map(|m| m.nrows() as u32).collect())
            .collect(),
        dims: dump.features.iter().map(|per| per[0].ncols() as u32).collect(),
        end_to_end_accuracy: dump.end_to_end_accuracy,
    };
    let header_json = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_json);
    for per_example in &dump.features {
        for tokens in per_example {
            for v in tokens.iter() {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<FeatureDump> {
    if bytes.len() < 12 || &bytes[0..4] != MAGIC {
        return Err(Error::Format("not a feature dump (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Format(format!("unsupported dump version {version}")));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if bytes.len() < 12 + hlen {
        return Err(Error::Format("truncated dump header".into()));
    }
    let header: DumpHeader = serde_json::from_slice(&bytes[12..12 + hlen])
        .map_err(|e| Error::Format(format!("bad dump header: {e}")))?;

    let mut pos = 12 + hlen;
    let mut features = Vec::with_capacity(header.layer_ids.len());
    for (l, counts) in header.token_counts.iter().enumerate() {
        let dim = *header
            .dims
            .get(l)
            .ok_or_else(|| Error::Format("dims shorter than layer list".into()))?
            as usize;
        let mut per_example = Vec::with_capacity(counts.len());
        for count in counts {
            let n_floats = *count as usize * dim;
            let n_bytes = n_floats * 4;
            if bytes.len() < pos + n_bytes {
                return Err(Error::Format("truncated dump data".into()));
            }
            let mut values = Vec::with_capacity(n_floats);
            for chunk in bytes[pos..pos + n_bytes].chunks_exact(4) {
                values.push(f64::from(f32::from_le_bytes(chunk.try_into().unwrap())));
            }
            pos += n_bytes;
            per_example.push(
                Array2::from_shape_vec((*count as usize, dim), values)
                    .map_err(|e| Error::Format(e.to_string()))?,
            );
        }
        features.push(per_example);
    }
    if pos != bytes.len() {
        return Err(Error::Format("trailing bytes after dump data".into()));
    }
    let dump = FeatureDump {
        layer_ids: header.layer_ids,
        boundary_index: header.boundary_index,
        labels: header.labels,
        features,
        end_to_end_accuracy: header.end_to_end_accuracy,
    };
    dump.validate()?;
    Ok(dump)
}

pub fn write_dump(path: &Path, dump: &FeatureDump) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(dump)?)?;
    Ok(())
}

pub fn read_dump(path: &Path) -> Result<FeatureDump> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::{synth_dump, SynthDumpSpec};

    #[test]
    fn round_trip_preserves_f32_quantized_features() {
        let mut dump = synth_dump(&SynthDumpSpec::new(12, vec![0, 2, 4], 2, 0.5, 3)).unwrap();
        dump.end_to_end_accuracy = Some(0.42);
        let bytes = encode(&dump).unwrap();
        let back = decode(&bytes).unwrap();
        assert_eq!(back.layer_ids, dump.layer_ids);
        assert_eq!(back.labels, dump.labels);
        assert_eq!(back.end_to_end_accuracy, Some(0.42));
        // values survive exactly once f32-quantized
        let twice = decode(&encode(&back).unwrap()).unwrap();
        assert_eq!(twice.features[1][3], back.features[1][3]);
    }

    #[test]
    fn corrupt_inputs_are_format_errors() {
        assert!(decode(b"nope").is_err());
        let dump = synth_dump(&SynthDumpSpec::new(6, vec![0], 0, 0.5, 4)).unwrap();
        let mut bytes = encode(&dump).unwrap();
        bytes.truncate(bytes.len() - 3);
        assert!(decode(&bytes).is_err());
    }
}
