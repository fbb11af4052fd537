//! On-disk formats: `SCAM` models, `SCTN` raw tensors, binary PNM images,
//! tab-separated manifests, and input preprocessing.

mod bytes;
pub mod manifest;
pub mod model_file;
pub mod pnm;
pub mod preprocess;
pub mod tensor_file;

use std::path::Path;

pub use manifest::{load_manifest, parse_manifest, BBox, ImageRecord, ManifestEntry};
pub use model_file::{decode_model, encode_model, load_model, save_model};
pub use pnm::{colormap, load_image, overlay, quantize, read_pnm, tensor_to_pnm, write_heatmap, write_overlay, Pnm};
pub use preprocess::{preprocess, PreprocessConfig};
pub use tensor_file::{decode_tensor, encode_tensor, load_tensor, save_tensor};

use crate::error::{Error, Result};

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
