use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Deserialize;

use super::{ModelError, ModelParams, ModelVariant};
use crate::autodiff::Tensor;
use crate::layers::LayerDims;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Deserialize)]
struct StoredTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredModel {
    format_version: u32,
    dims: LayerDims,
    variant: ModelVariant,
    seed: u64,
    params: BTreeMap<String, StoredTensor>,
}

/// Serializes with sorted keys and 17 significant digits per float.
pub fn checkpoint_json(params: &ModelParams) -> Result<String, ModelError> {
    let dims = serde_json::to_value(params.dims)?;
    let mut out = String::new();
    write!(
        out,
        "{{\"dims\":{dims},\"format_version\":{CHECKPOINT_VERSION},\"params\":{{"
    )
    .expect("writing to a String");
    for (i, (name, t)) in params.tensors().iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write!(out, "{}:{{\"data\":[", serde_json::to_string(name)?).expect("writing to a String");
        for (j, v) in t.data().iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v:.16e}").expect("writing to a String");
        }
        write!(out, "],\"shape\":{}}}", serde_json::to_string(t.shape())?).expect("writing to a String");
    }
    write!(
        out,
        "}},\"seed\":{},\"variant\":{}}}",
        params.seed,
        serde_json::to_string(&params.variant)?
    )
    .expect("writing to a String");
    Ok(out)
}

/// Writes to a sibling temporary file, then renames over `path`.
pub(crate) fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), ModelError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| ModelError::Input(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn save_checkpoint(path: &Path, params: &ModelParams) -> Result<(), ModelError> {
    write_atomic(path, checkpoint_json(params)?.as_bytes())
}

/// Parses a checkpoint and checks it against the registry that
/// `(dims, variant)` would build.
pub fn parse_checkpoint(text: &str) -> Result<ModelParams, ModelError> {
    let stored: StoredModel = serde_json::from_str(text)?;
    if stored.format_version != CHECKPOINT_VERSION {
        return Err(ModelError::Checkpoint(format!(
            "unsupported format_version {}",
            stored.format_version
        )));
    }
    let mut params = ModelParams::build(stored.dims, stored.variant, stored.seed)?;
    let expected: Vec<String> = params.names().map(String::from).collect();
    let found: Vec<&String> = stored.params.keys().collect();
    if found.len() != expected.len() || found.iter().zip(&expected).any(|(a, b)| *a != b) {
        return Err(ModelError::Checkpoint("parameter names do not match the model registry".into()));
    }
    for (name, t) in stored.params {
        let tensor = Tensor::new(t.shape, t.data)
            .map_err(|e| ModelError::Checkpoint(format!("parameter `{name}`: {e}")))?;
        params
            .set(&name, tensor)
            .map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    }
    Ok(params)
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams, ModelError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ModelError::Checkpoint(format!("cannot read {}: {e}", path.display())))?;
    parse_checkpoint(&text)
}
