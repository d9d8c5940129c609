use std::collections::BTreeMap;
use std::io::{Read, Write};

use sha2::{Digest, Sha256};

use super::MockError;
use crate::audio::{encode_window_wav, AudioStore};
use crate::timeline::ExampleSpec;

const MAGIC: &[u8; 8] = b"HDMREG1\n";

pub type AudioHash = [u8; 32];

pub fn audio_hash(wav_bytes: &[u8]) -> AudioHash {
    Sha256::digest(wav_bytes).into()
}

/// Where a registered window sits in its conversation.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowKey {
    pub conversation_id: String,
    pub start_s: f64,
    pub end_s: f64,
}

/// Fingerprint of canonical window audio to window location.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Registry {
    entries: BTreeMap<AudioHash, WindowKey>,
    conflicts: usize,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a window by its encoded audio. A second, different window
    /// with identical audio is counted as a conflict and ignored.
    pub fn insert(&mut self, wav_bytes: &[u8], key: WindowKey) {
        let hash = audio_hash(wav_bytes);
        match self.entries.get(&hash) {
            Some(existing) if *existing != key => self.conflicts += 1,
            Some(_) => {}
            None => {
                self.entries.insert(hash, key);
            }
        }
    }

    /// Register every example's context window.
    pub fn register_examples<'a, I>(&mut self, store: &AudioStore, examples: I) -> Result<(), MockError>
    where
        I: IntoIterator<Item = &'a ExampleSpec>,
    {
        for ex in examples {
            let w = store
                .window(ex)
                .map_err(|e| MockError::BadRequest(format!("cannot register window: {e}")))?;
            self.insert(
                &encode_window_wav(&w),
                WindowKey {
                    conversation_id: ex.conversation_id.clone(),
                    start_s: ex.context_start_s,
                    end_s: ex.context_end_s,
                },
            );
        }
        Ok(())
    }

    pub fn lookup(&self, wav_bytes: &[u8]) -> Option<&WindowKey> {
        self.entries.get(&audio_hash(wav_bytes))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn conflicts(&self) -> usize {
        self.conflicts
    }

    /// Layout: magic, u64 entry count, then per entry the 32-byte hash,
    /// u16 id length, id bytes, f64 start and f64 end. Little endian.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&(self.entries.len() as u64).to_le_bytes())?;
        for (hash, key) in &self.entries {
            out.write_all(hash)?;
            let id = key.conversation_id.as_bytes();
            let len = u16::try_from(id.len())
                .map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidInput, "conversation id too long"))?;
            out.write_all(&len.to_le_bytes())?;
            out.write_all(id)?;
            out.write_all(&key.start_s.to_le_bytes())?;
            out.write_all(&key.end_s.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec");
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, MockError> {
        let bad = |m: &str| MockError::Registry(m.to_string());
        let mut r = bytes;
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| bad("too short"))?;
        if &magic != MAGIC {
            return Err(bad("bad magic"));
        }
        let mut u64_buf = [0u8; 8];
        r.read_exact(&mut u64_buf).map_err(|_| bad("missing count"))?;
        let count = u64::from_le_bytes(u64_buf);
        let mut entries = BTreeMap::new();
        for _ in 0..count {
            let mut hash = [0u8; 32];
            r.read_exact(&mut hash).map_err(|_| bad("truncated entry"))?;
            let mut len = [0u8; 2];
            r.read_exact(&mut len).map_err(|_| bad("truncated entry"))?;
            let mut id = vec![0u8; usize::from(u16::from_le_bytes(len))];
            r.read_exact(&mut id).map_err(|_| bad("truncated entry"))?;
            let conversation_id = String::from_utf8(id).map_err(|_| bad("conversation id is not UTF-8"))?;
            r.read_exact(&mut u64_buf).map_err(|_| bad("truncated entry"))?;
            let start_s = f64::from_le_bytes(u64_buf);
            r.read_exact(&mut u64_buf).map_err(|_| bad("truncated entry"))?;
            let end_s = f64::from_le_bytes(u64_buf);
            entries.insert(
                hash,
                WindowKey {
                    conversation_id,
                    start_s,
                    end_s,
                },
            );
        }
        if !r.is_empty() {
            return Err(bad("trailing bytes"));
        }
        Ok(Self { entries, conflicts: 0 })
    }
}
