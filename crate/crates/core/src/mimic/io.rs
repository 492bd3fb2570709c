//! Ensemble file.
//!
//! ```text
//! magic      [u8; 4] = "XMIM"
//! version    u32     = 1
//! actions    u32
//! n_stages   u32     (largest tree count of any action)
//! dim        u32
//! shrinkage  f64
//! fitted_at  u64
//! per action:
//!     base      f64
//!     fallback  u8
//!     n_trees   u32
//!     per tree, nodes in preorder (node, left subtree, right subtree):
//!         tag      u8   0 = leaf, 1 = split
//!         value    f64
//!         samples  u64
//!         feature  u32  (split only)
//!         threshold f64 (split only)
//! ```
//! Little endian throughout. Loading either yields a complete ensemble or an
//! error.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{ActionForest, MimicEnsemble, Node, RegressionTree, Split};
use crate::error::{Error, Result};

pub const MIMIC_MAGIC: &[u8; 4] = b"XMIM";
pub const MIMIC_VERSION: u32 = 1;

const MAX_DEPTH_ON_LOAD: usize = 4096;

fn write_tree<W: Write>(t: &RegressionTree, i: usize, w: &mut W) -> Result<()> {
    let n = &t.nodes()[i];
    match n.split {
        None => {
            w.write_u8(0)?;
            w.write_f64::<LittleEndian>(n.value)?;
            w.write_u64::<LittleEndian>(n.samples as u64)?;
        }
        Some(s) => {
            w.write_u8(1)?;
            w.write_f64::<LittleEndian>(n.value)?;
            w.write_u64::<LittleEndian>(n.samples as u64)?;
            w.write_u32::<LittleEndian>(s.feature as u32)?;
            w.write_f64::<LittleEndian>(s.threshold)?;
            write_tree(t, s.left, w)?;
            write_tree(t, s.right, w)?;
        }
    }
    Ok(())
}

fn read_node<R: Read>(r: &mut R, nodes: &mut Vec<Node>, depth: usize) -> Result<usize> {
    if depth > MAX_DEPTH_ON_LOAD {
        return Err(Error::Format("tree deeper than supported".into()));
    }
    let truncated = |_| Error::Format("truncated ensemble file".into());
    let tag = r.read_u8().map_err(truncated)?;
    let value = r.read_f64::<LittleEndian>().map_err(truncated)?;
    let samples = r.read_u64::<LittleEndian>().map_err(truncated)? as usize;
    let id = nodes.len();
    nodes.push(Node::leaf(value, samples));
    match tag {
        0 => {}
        1 => {
            let feature = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
            let threshold = r.read_f64::<LittleEndian>().map_err(truncated)?;
            let left = read_node(r, nodes, depth + 1)?;
            let right = read_node(r, nodes, depth + 1)?;
            nodes[id].split = Some(Split {
                feature,
                threshold,
                left,
                right,
            });
        }
        other => return Err(Error::Format(format!("unknown node tag {other}"))),
    }
    Ok(id)
}

impl MimicEnsemble {
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MIMIC_MAGIC)?;
        w.write_u32::<LittleEndian>(MIMIC_VERSION)?;
        w.write_u32::<LittleEndian>(self.action_count() as u32)?;
        let stages = self.forests.iter().map(|f| f.trees.len()).max().unwrap_or(0);
        w.write_u32::<LittleEndian>(stages as u32)?;
        w.write_u32::<LittleEndian>(self.dim as u32)?;
        w.write_f64::<LittleEndian>(self.shrinkage)?;
        w.write_u64::<LittleEndian>(self.fitted_at)?;
        for f in &self.forests {
            w.write_f64::<LittleEndian>(f.base)?;
            w.write_u8(f.fallback as u8)?;
            w.write_u32::<LittleEndian>(f.trees.len() as u32)?;
            for t in &f.trees {
                write_tree(t, 0, w)?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| Error::Format("truncated ensemble header".into()))?;
        if &magic != MIMIC_MAGIC {
            return Err(Error::Format("not an ensemble file (bad magic)".into()));
        }
        let truncated = |_| Error::Format("truncated ensemble header".into());
        let version = r.read_u32::<LittleEndian>().map_err(truncated)?;
        if version != MIMIC_VERSION {
            return Err(Error::Version {
                found: version,
                expected: MIMIC_VERSION,
            });
        }
        let actions = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
        let stages = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
        let dim = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
        let shrinkage = r.read_f64::<LittleEndian>().map_err(truncated)?;
        let fitted_at = r.read_u64::<LittleEndian>().map_err(truncated)?;
        if actions == 0 || !(shrinkage > 0.0 && shrinkage <= 1.0) {
            return Err(Error::Format("corrupted ensemble header".into()));
        }
        let mut forests = Vec::with_capacity(actions.min(4096));
        for _ in 0..actions {
            let truncated = |_| Error::Format("truncated ensemble file".into());
            let base = r.read_f64::<LittleEndian>().map_err(truncated)?;
            let fallback = r.read_u8().map_err(truncated)? != 0;
            let n_trees = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
            if n_trees > stages {
                return Err(Error::Format("forest larger than declared stage count".into()));
            }
            let mut trees = Vec::with_capacity(n_trees);
            for _ in 0..n_trees {
                let mut nodes = Vec::new();
                read_node(r, &mut nodes, 0)?;
                trees.push(RegressionTree::from_nodes(nodes)?);
            }
            forests.push(ActionForest {
                base,
                trees,
                fallback,
            });
        }
        MimicEnsemble::from_parts(dim, shrinkage, forests, fitted_at)
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
}
