use std::io::{Read, Write};

use super::{ModelError, Result, TrainedModel};

const MODEL_MAGIC: &[u8; 8] = b"FSEGMDL1";
const FORMAT_VERSION: u32 = 1;

/// Writes a model as magic, format version and a bincode payload. Floats are
/// stored as raw IEEE bits, so a save/load cycle is bitwise exact.
pub fn save_model(model: &TrainedModel, mut writer: impl Write) -> Result<()> {
    writer.write_all(MODEL_MAGIC)?;
    writer.write_all(&FORMAT_VERSION.to_le_bytes())?;
    bincode::serialize_into(&mut writer, model)?;
    writer.flush()?;
    Ok(())
}

pub fn load_model(mut reader: impl Read) -> Result<TrainedModel> {
    let mut magic = [0u8; 8];
    reader.read_exact(&mut magic)?;
    if &magic != MODEL_MAGIC {
        return Err(ModelError::BadMagic);
    }
    let mut version = [0u8; 4];
    reader.read_exact(&mut version)?;
    let version = u32::from_le_bytes(version);
    if version != FORMAT_VERSION {
        return Err(ModelError::UnsupportedVersion(version));
    }
    Ok(bincode::deserialize_from(reader)?)
}
