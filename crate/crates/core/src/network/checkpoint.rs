//! Parameter checkpoint files: little-endian layer widths, then the flat
//! f64 parameter array. Hands the warm-start parameters from the init stage
//! to the main stage and survives process boundaries.

use super::{LayerSpec, NetworkError, ParameterVector};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub fn save_checkpoint(
    path: &Path,
    spec: &LayerSpec,
    params: &ParameterVector,
) -> Result<(), NetworkError> {
    assert_eq!(params.len(), spec.param_len());
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&(spec.sizes().len() as u32).to_le_bytes())?;
    for &width in spec.sizes() {
        w.write_all(&(width as u32).to_le_bytes())?;
    }
    for &v in &params.values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(LayerSpec, ParameterVector), NetworkError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let n_widths = u32::from_le_bytes(u32buf) as usize;
    if n_widths < 2 || n_widths > 64 {
        return Err(NetworkError::CheckpointFormat(format!(
            "implausible width count {n_widths}"
        )));
    }
    let mut sizes = Vec::with_capacity(n_widths);
    for _ in 0..n_widths {
        r.read_exact(&mut u32buf)?;
        sizes.push(u32::from_le_bytes(u32buf) as usize);
    }
    let spec = LayerSpec::new(sizes)
        .map_err(|e| NetworkError::CheckpointFormat(format!("bad widths: {e}")))?;
    let mut values = vec![0.0f64; spec.param_len()];
    let mut f64buf = [0u8; 8];
    for v in &mut values {
        r.read_exact(&mut f64buf)?;
        *v = f64::from_le_bytes(f64buf);
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(NetworkError::CheckpointFormat(
            "trailing bytes after parameter array".into(),
        ));
    }
    Ok((spec, ParameterVector { values }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::init_xavier;

    #[test]
    fn roundtrip() {
        let dir = std::env::temp_dir().join(format!("ckpt_test_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("theta0.ckpt");
        let spec = LayerSpec::new(vec![2, 20, 20, 1]).unwrap();
        let params = init_xavier(&spec, 123);
        save_checkpoint(&path, &spec, &params).unwrap();
        let (spec2, params2) = load_checkpoint(&path).unwrap();
        assert_eq!(spec, spec2);
        assert_eq!(params.values, params2.values);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn rejects_truncated_file() {
        let dir = std::env::temp_dir().join(format!("ckpt_trunc_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.ckpt");
        let spec = LayerSpec::new(vec![2, 4, 1]).unwrap();
        let params = init_xavier(&spec, 1);
        save_checkpoint(&path, &spec, &params).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(load_checkpoint(&path).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }
}
