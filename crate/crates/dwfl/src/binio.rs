//! Little-endian read helpers shared by the binary container formats.

use std::fs::File;
use std::io::{BufReader, Read};

use crate::error::{DwflError, Result};

pub(crate) struct Reader {
    inner: BufReader<File>,
    pub(crate) path: String,
}

impl Reader {
    pub(crate) fn open(path: &std::path::Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| DwflError::io(path.display().to_string(), e))?;
        Ok(Reader {
            inner: BufReader::new(file),
            path: path.display().to_string(),
        })
    }

    pub(crate) fn read_exact(&mut self, buf: &mut [u8]) -> Result<()> {
        self.inner
            .read_exact(buf)
            .map_err(|e| DwflError::io(self.path.clone(), e))
    }

    pub(crate) fn read_u8(&mut self) -> Result<u8> {
        let mut b = [0u8; 1];
        self.read_exact(&mut b)?;
        Ok(b[0])
    }

    pub(crate) fn read_u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    pub(crate) fn read_u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    pub(crate) fn read_f64(&mut self) -> Result<f64> {
        let mut b = [0u8; 8];
        self.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }

    pub(crate) fn read_string(&mut self) -> Result<String> {
        let len = self.read_u64()? as usize;
        let mut buf = vec![0u8; len];
        self.read_exact(&mut buf)?;
        String::from_utf8(buf)
            .map_err(|_| DwflError::Format(format!("{}: invalid UTF-8 string", self.path)))
    }
}
