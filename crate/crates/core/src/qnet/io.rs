//! Parameter file.
//!
//! ```text
//! magic    [u8; 4] = "XQNT"
//! version  u32     = 1
//! n_dims   u32            (layers + 1)
//! dims     n_dims × u32   (input, hidden..., actions)
//! per layer: weights out×in f64 row-major, then biases out × f64
//! ```
//! All integers and floats little endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{Layer, QNetwork};
use crate::error::{Error, Result};

pub const QNET_MAGIC: &[u8; 4] = b"XQNT";
pub const QNET_VERSION: u32 = 1;

impl QNetwork {
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(QNET_MAGIC)?;
        w.write_u32::<LittleEndian>(QNET_VERSION)?;
        let dims = self.architecture();
        w.write_u32::<LittleEndian>(dims.len() as u32)?;
        for d in dims {
            w.write_u32::<LittleEndian>(d as u32)?;
        }
        for l in &self.layers {
            for &x in l.weights.iter().chain(&l.biases) {
                w.write_f64::<LittleEndian>(x)?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| Error::Format("truncated network header".into()))?;
        if &magic != QNET_MAGIC {
            return Err(Error::Format("not a Q-network file (bad magic)".into()));
        }
        let truncated = |_| Error::Format("truncated network file".into());
        let version = r.read_u32::<LittleEndian>().map_err(truncated)?;
        if version != QNET_VERSION {
            return Err(Error::Version {
                found: version,
                expected: QNET_VERSION,
            });
        }
        let n_dims = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
        if !(2..=64).contains(&n_dims) {
            return Err(Error::Format(format!("implausible layer count {n_dims}")));
        }
        let mut dims = Vec::with_capacity(n_dims);
        for _ in 0..n_dims {
            dims.push(r.read_u32::<LittleEndian>().map_err(truncated)? as usize);
        }
        let mut layers = Vec::with_capacity(n_dims - 1);
        for w in dims.windows(2) {
            let mut weights = vec![0.0; w[0] * w[1]];
            let mut biases = vec![0.0; w[1]];
            r.read_f64_into::<LittleEndian>(&mut weights).map_err(truncated)?;
            r.read_f64_into::<LittleEndian>(&mut biases).map_err(truncated)?;
            layers.push(Layer {
                in_dim: w[0],
                out_dim: w[1],
                weights,
                biases,
            });
        }
        QNetwork::from_layers(layers)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }

    /// Loads and checks the stored architecture against `expected` widths.
    pub fn load_checked(path: &Path, expected: &[usize]) -> Result<Self> {
        let net = Self::load(path)?;
        if net.architecture() != expected {
            return Err(Error::Format(format!(
                "architecture {:?} does not match configured {:?}",
                net.architecture(),
                expected
            )));
        }
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;

    #[test]
    fn round_trip_preserves_outputs() {
        let net = QNetwork::new(4, &[7, 5], 3, &mut seeded_rng(11));
        let mut buf = Vec::new();
        net.write_to(&mut buf).unwrap();
        let back = QNetwork::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back.params(), net.params());
        assert_eq!(back.architecture(), vec![4, 7, 5, 3]);
    }

    #[test]
    fn architecture_mismatch_rejected() {
        let net = QNetwork::new(2, &[3], 2, &mut seeded_rng(1));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("q.bin");
        net.save(&p).unwrap();
        assert!(QNetwork::load_checked(&p, &[2, 3, 2]).is_ok());
        assert!(QNetwork::load_checked(&p, &[2, 4, 2]).is_err());
    }

    #[test]
    fn truncated_file_rejected() {
        let net = QNetwork::new(2, &[3], 2, &mut seeded_rng(1));
        let mut buf = Vec::new();
        net.write_to(&mut buf).unwrap();
        buf.truncate(buf.len() - 4);
        assert!(matches!(
            QNetwork::read_from(&mut buf.as_slice()),
            Err(Error::Format(_))
        ));
    }
}
