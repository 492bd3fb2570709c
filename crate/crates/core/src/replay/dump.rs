//! Flat binary dump of buffer contents, for debugging.
//!
//! Layout (little endian):
//!
//! ```text
//! magic    [u8; 4] = "XRPB"
//! version  u32     = 1
//! dim      u32
//! count    u64
//! count × record:
//!     stored_at  u64
//!     action     u32
//!     terminal   u8
//!     reward     f64
//!     state      dim × f64
//!     next_state dim × f64
//! ```
//! Records are written oldest first.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::ReplayBuffer;
use crate::error::{Error, Result};
use crate::transition::Transition;

pub const DUMP_MAGIC: &[u8; 4] = b"XRPB";
pub const DUMP_VERSION: u32 = 1;

pub fn write_dump(buffer: &ReplayBuffer, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(DUMP_MAGIC)?;
    w.write_u32::<LittleEndian>(DUMP_VERSION)?;
    w.write_u32::<LittleEndian>(buffer.dim() as u32)?;
    w.write_u64::<LittleEndian>(buffer.len() as u64)?;
    for t in buffer.iter() {
        w.write_u64::<LittleEndian>(t.stored_at)?;
        w.write_u32::<LittleEndian>(t.action as u32)?;
        w.write_u8(t.terminal as u8)?;
        w.write_f64::<LittleEndian>(t.reward)?;
        for &x in t.state.iter().chain(&t.next_state) {
            w.write_f64::<LittleEndian>(x)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a dump back as `(dim, transitions)`.
pub fn read_dump(path: &Path) -> Result<(usize, Vec<Transition>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("truncated replay dump header".into()))?;
    if &magic != DUMP_MAGIC {
        return Err(Error::Format("not a replay dump (bad magic)".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != DUMP_VERSION {
        return Err(Error::Version {
            found: version,
            expected: DUMP_VERSION,
        });
    }
    let dim = r.read_u32::<LittleEndian>()? as usize;
    let count = r.read_u64::<LittleEndian>()?;
    let truncated = |_| Error::Format("truncated replay dump record".into());
    let mut out = Vec::new();
    for _ in 0..count {
        let stored_at = r.read_u64::<LittleEndian>().map_err(truncated)?;
        let action = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
        let terminal = r.read_u8().map_err(truncated)? != 0;
        let reward = r.read_f64::<LittleEndian>().map_err(truncated)?;
        let mut vals = vec![0.0; 2 * dim];
        r.read_f64_into::<LittleEndian>(&mut vals).map_err(truncated)?;
        let next_state = vals.split_off(dim);
        out.push(Transition {
            state: vals,
            action,
            reward,
            next_state,
            terminal,
            stored_at,
        });
    }
    Ok((dim, out))
}
