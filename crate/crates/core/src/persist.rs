//! Embedding persistence: a small binary header (magic, endianness, K, M, N)
//! followed by the P then Q entries as row-major little-endian f64, plus an
//! optional plain-text export.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::EmbeddingTable;

const MAGIC: &[u8; 4] = b"CSRE";
const LITTLE_ENDIAN: u8 = 1;

pub fn write_embeddings(emb: &EmbeddingTable, path: &Path) -> Result<()> {
    let io = |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    file.write_all(MAGIC).map_err(io)?;
    file.write_all(&[LITTLE_ENDIAN]).map_err(io)?;
    for dim in [emb.k as u64, emb.num_users as u64, emb.num_items as u64] {
        file.write_all(&dim.to_le_bytes()).map_err(io)?;
    }
    for value in emb.p.iter().chain(emb.q.iter()) {
        file.write_all(&value.to_le_bytes()).map_err(io)?;
    }
    file.flush().map_err(io)?;
    Ok(())
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let io = |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let mut file = std::io::BufReader::new(std::fs::File::open(path).map_err(io)?);
    let mut magic = [0u8; 4];
    file.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(Error::Parse {
            line: 0,
            msg: "not an embedding file (bad magic)".into(),
        });
    }
    let mut endian = [0u8; 1];
    file.read_exact(&mut endian).map_err(io)?;
    if endian[0] != LITTLE_ENDIAN {
        return Err(Error::Parse {
            line: 0,
            msg: "unsupported endianness flag".into(),
        });
    }
    let read_u64 = |file: &mut dyn Read| -> Result<u64> {
        let mut buf = [0u8; 8];
        file.read_exact(&mut buf).map_err(io)?;
        Ok(u64::from_le_bytes(buf))
    };
    let k = read_u64(&mut file)? as usize;
    let num_users = read_u64(&mut file)? as usize;
    let num_items = read_u64(&mut file)? as usize;
    let mut emb = EmbeddingTable::zeros(num_users, num_items, k);
    let mut buf = [0u8; 8];
    for value in emb.p.iter_mut().chain(emb.q.iter_mut()) {
        file.read_exact(&mut buf).map_err(io)?;
        *value = f64::from_le_bytes(buf);
    }
    Ok(emb)
}

/// Plain-text export: one line per vector, `P u <values...>` / `Q i <values...>`.
pub fn export_embeddings_text(emb: &EmbeddingTable, path: &Path) -> Result<()> {
    let io = |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for u in 0..emb.num_users as u32 {
        let values: Vec<String> = emb.user_vec(u).iter().map(|v| v.to_string()).collect();
        writeln!(file, "P {u} {}", values.join(" ")).map_err(io)?;
    }
    for i in 0..emb.num_items as u32 {
        let values: Vec<String> = emb.item_vec(i).iter().map(|v| v.to_string()).collect();
        writeln!(file, "Q {i} {}", values.join(" ")).map_err(io)?;
    }
    file.flush().map_err(io)?;
    Ok(())
}
