//! On-disk distance-matrix cache, one file per (dataset id, params).
//!
//! File layout, all integers little-endian:
//!
//! ```text
//! magic      b"RSDM"
//! version    u32            (1)
//! n          u64
//! segments   u64
//! window     u64            (u64::MAX = unconstrained)
//! normalize  u8
//! dataset_id u32 len + utf-8 bytes
//! order      n x (u32 len + utf-8 bytes)
//! d          n*n f64, row-major
//! checksum   u32            CRC-32 of every preceding byte
//! ```

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::dtw::{DistanceMatrix, MatrixParams};
use crate::model::DatasetId;

const MAGIC: &[u8; 4] = b"RSDM";
const VERSION: u32 = 1;
const NO_WINDOW: u64 = u64::MAX;

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("cache I/O: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt cache entry: {0}")]
    CorruptCacheEntry(String),
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

pub fn encode_matrix(m: &DistanceMatrix) -> Vec<u8> {
    let n = m.n();
    let mut buf = Vec::with_capacity(64 + n * 16 + n * n * 8);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    let p = m.params();
    buf.extend_from_slice(&(p.segments as u64).to_le_bytes());
    buf.extend_from_slice(&p.dtw_window.map_or(NO_WINDOW, |w| w as u64).to_le_bytes());
    buf.push(p.normalize as u8);
    put_str(&mut buf, m.dataset_id().as_str());
    for name in m.order() {
        put_str(&mut buf, name);
    }
    for v in m.as_flat() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8], CacheError> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| CacheError::CorruptCacheEntry("truncated".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, CacheError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CacheError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, CacheError> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| CacheError::CorruptCacheEntry("invalid utf-8".into()))
    }
}

pub fn decode_matrix(bytes: &[u8]) -> Result<DistanceMatrix, CacheError> {
    let corrupt = |msg: &str| CacheError::CorruptCacheEntry(msg.to_string());
    if bytes.len() < MAGIC.len() + 4 {
        return Err(corrupt("truncated"));
    }
    let (body, crc) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(crc.try_into().unwrap()) {
        return Err(corrupt("checksum mismatch"));
    }
    let mut r = Reader { buf: body, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(corrupt("bad magic"));
    }
    if r.u32()? != VERSION {
        return Err(corrupt("unsupported version"));
    }
    let n = usize::try_from(r.u64()?).map_err(|_| corrupt("n overflows"))?;
    let segments = r.u64()? as usize;
    let window = match r.u64()? {
        NO_WINDOW => None,
        w => Some(w as usize),
    };
    let normalize = match r.take(1)?[0] {
        0 => false,
        1 => true,
        _ => return Err(corrupt("bad normalize flag")),
    };
    let dataset_id = DatasetId(r.string()?);
    // Each name needs at least its 4-byte length prefix.
    if n > body.len() / 4 {
        return Err(corrupt("n exceeds file size"));
    }
    let order = (0..n).map(|_| r.string()).collect::<Result<Vec<_>, _>>()?;
    let cells = n.checked_mul(n).ok_or_else(|| corrupt("n overflows"))?;
    let raw = r.take(cells.checked_mul(8).ok_or_else(|| corrupt("n overflows"))?)?;
    if r.pos != body.len() {
        return Err(corrupt("trailing bytes"));
    }
    let d = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let params = MatrixParams {
        segments,
        dtw_window: window,
        normalize,
    };
    DistanceMatrix::from_flat(dataset_id, params, order, d)
        .map_err(|e| CacheError::CorruptCacheEntry(e.to_string()))
}

/// Directory of cached matrices shared by the CLI and the service.
#[derive(Debug, Clone)]
pub struct MatrixCache {
    dir: PathBuf,
}

impl MatrixCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, dataset_id: &DatasetId, params: &MatrixParams) -> PathBuf {
        self.dir
            .join(format!("{}-{}.dsm", dataset_id, params.fingerprint()))
    }

    /// Writes atomically: readers never observe a partial file.
    pub fn put(&self, matrix: &DistanceMatrix) -> Result<PathBuf, CacheError> {
        fs::create_dir_all(&self.dir)?;
        let path = self.path_for(matrix.dataset_id(), matrix.params());
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&encode_matrix(matrix))?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(path)
    }

    /// Returns the cached matrix for exactly these keys, or `None`.
    /// Corrupt or mismatched entries are evicted and reported as absent.
    pub fn get(
        &self,
        dataset_id: &DatasetId,
        params: &MatrixParams,
    ) -> Result<Option<DistanceMatrix>, CacheError> {
        let path = self.path_for(dataset_id, params);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let reason = match decode_matrix(&bytes) {
            Ok(m) if m.dataset_id() == dataset_id && m.params() == params => return Ok(Some(m)),
            Ok(_) => "keys do not match file name".to_string(),
            Err(e) => e.to_string(),
        };
        tracing::warn!(path = %path.display(), %reason, "evicting cache entry");
        match fs::remove_file(&path) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(e.into()),
        }
        Ok(None)
    }
}
