//! Flat binary model checkpoints: magic string and version, a table of
//! (name, shape, offset) entries, then one contiguous little-endian f32 data
//! section. Weights trained at higher precision are stored rounded to f32.

use std::io::{Read, Write};
use std::path::Path;

use super::{DecoderModel, DecoderError, Scalar};

const MAGIC: &[u8; 4] = b"BGDC";
const VERSION: u32 = 1;

/// Entry shapes in canonical file order. Conv weights are [filters, kernel,
/// in_channels]; `norm` holds the input normalization (min, max).
fn layer_table<S: Scalar>(model: &DecoderModel<S>) -> Vec<(&'static str, Vec<u32>, Vec<f32>)> {
    let as_f32 = |v: &[S]| v.iter().map(|x| x.to_f64() as f32).collect::<Vec<f32>>();
    vec![
        ("conv1.weight", vec![128, 7, 4], as_f32(&model.conv1_w)),
        ("conv1.bias", vec![128], as_f32(&model.conv1_b)),
        ("conv2.weight", vec![256, 7, 128], as_f32(&model.conv2_w)),
        ("conv2.bias", vec![256], as_f32(&model.conv2_b)),
        ("dense.weight", vec![3, 256], as_f32(&model.dense_w)),
        ("dense.bias", vec![3], as_f32(&model.dense_b)),
        (
            "norm",
            vec![2],
            vec![model.norm_min as f32, model.norm_max as f32],
        ),
    ]
}

pub fn save_checkpoint<S: Scalar>(path: &Path, model: &DecoderModel<S>) -> Result<(), DecoderError> {
    let table = layer_table(model);
    let mut header = Vec::new();
    header.extend_from_slice(MAGIC);
    header.extend_from_slice(&VERSION.to_le_bytes());
    header.extend_from_slice(&(table.len() as u32).to_le_bytes());
    let mut data: Vec<u8> = Vec::new();
    for (name, shape, values) in &table {
        header.extend_from_slice(&(name.len() as u32).to_le_bytes());
        header.extend_from_slice(name.as_bytes());
        header.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &d in shape {
            header.extend_from_slice(&d.to_le_bytes());
        }
        header.extend_from_slice(&(data.len() as u64).to_le_bytes());
        for v in values {
            data.extend_from_slice(&v.to_le_bytes());
        }
    }
    header.extend_from_slice(&(data.len() as u64).to_le_bytes());
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&header)?;
    f.write_all(&data)?;
    Ok(())
}

pub fn load_checkpoint<S: Scalar>(path: &Path) -> Result<DecoderModel<S>, DecoderError> {
    let bad = |reason: &str| DecoderError::BadCheckpoint {
        path: path.display().to_string(),
        reason: reason.to_string(),
    };
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8], DecoderError> {
        if pos + n > bytes.len() {
            return Err(bad("truncated file"));
        }
        let s = &bytes[pos..pos + n];
        pos += n;
        Ok(s)
    };
    let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());
    let u64_at = |b: &[u8]| u64::from_le_bytes(b.try_into().unwrap());

    if take(4)? != MAGIC {
        return Err(bad("bad magic"));
    }
    if u32_at(take(4)?) != VERSION {
        return Err(bad("unsupported version"));
    }
    let n_entries = u32_at(take(4)?) as usize;
    let mut entries = Vec::with_capacity(n_entries);
    for _ in 0..n_entries {
        let name_len = u32_at(take(4)?) as usize;
        let name = String::from_utf8(take(name_len)?.to_vec()).map_err(|_| bad("bad name"))?;
        let ndim = u32_at(take(4)?) as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(u32_at(take(4)?) as usize);
        }
        let offset = u64_at(take(8)?) as usize;
        entries.push((name, shape, offset));
    }
    let data_len = u64_at(take(8)?) as usize;
    let data = take(data_len)?.to_vec();

    let read_values = |entries: &[(String, Vec<usize>, usize)],
                       name: &str,
                       want_shape: &[usize]|
     -> Result<Vec<S>, DecoderError> {
        let (_, shape, offset) = entries
            .iter()
            .find(|(n, _, _)| n == name)
            .ok_or_else(|| bad(&format!("missing entry {name}")))?;
        if shape != want_shape {
            return Err(bad(&format!("entry {name} has shape {shape:?}")));
        }
        let count: usize = shape.iter().product();
        if offset + count * 4 > data.len() {
            return Err(bad(&format!("entry {name} overruns data section")));
        }
        Ok(data[*offset..offset + count * 4]
            .chunks_exact(4)
            .map(|c| S::from_f64(f32::from_le_bytes(c.try_into().unwrap()) as f64))
            .collect())
    };

    let norm = read_values(&entries, "norm", &[2])?;
    Ok(DecoderModel {
        conv1_w: read_values(&entries, "conv1.weight", &[128, 7, 4])?,
        conv1_b: read_values(&entries, "conv1.bias", &[128])?,
        conv2_w: read_values(&entries, "conv2.weight", &[256, 7, 128])?,
        conv2_b: read_values(&entries, "conv2.bias", &[256])?,
        dense_w: read_values(&entries, "dense.weight", &[3, 256])?,
        dense_b: read_values(&entries, "dense.bias", &[3])?,
        norm_min: norm[0].to_f64(),
        norm_max: norm[1].to_f64(),
    })
}
