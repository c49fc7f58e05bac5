//! Append-only JSON-lines store of registered watermarks.
//!
//! Writers take an exclusive lock on `<store>.lock`, rewrite the full store
//! into a temporary sibling and rename it over the original, so readers never
//! observe a partial line and concurrent registrations are serialized.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use mimicguard_core::verify::ArtistRecord;
use mimicguard_core::watermark::{CodecConfig, Method, PayloadRole, SecretKey, WatermarkPayload};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("record for artist '{artist}' with role {role} already exists ({existing}); pass --allow-duplicate to add another")]
    DuplicateRecord { artist: String, role: String, existing: String },
    #[error("record id '{0}' already exists")]
    DuplicateId(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("{path}:{line}: corrupted record: {message}")]
    Corrupt { path: String, line: usize, message: String },
    #[error("invalid record: {0}")]
    Invalid(String),
    #[error("key: {0}")]
    Key(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RegistryError + '_ {
    move |source| RegistryError::Io { path: path.display().to_string(), source }
}

/// Where the secret key lives. File references are resolved relative to the store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KeyRef {
    File(PathBuf),
    InsecureInline(String),
}

/// Codec parameters with the key held by reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodecSpec {
    pub method: Method,
    pub strength: f64,
    pub payload_length: usize,
    pub redundancy: usize,
    pub key: KeyRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryRecord {
    pub record_id: String,
    pub artist_id: String,
    pub payload: WatermarkPayload,
    pub role: PayloadRole,
    pub codec: CodecSpec,
    pub created_at: String,
    #[serde(default)]
    pub notes: String,
    /// Reserved for a future signing scheme.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signature: Option<String>,
}

/// Reads a 16-byte key stored as 32 hex characters.
pub fn read_key_file(path: &Path) -> Result<SecretKey, RegistryError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    SecretKey::from_hex(text.trim()).map_err(|e| RegistryError::Key(format!("{}: {e}", path.display())))
}

pub fn write_key_file(path: &Path, key: &SecretKey) -> Result<(), RegistryError> {
    fs::write(path, format!("{}\n", key.to_hex())).map_err(io_err(path))
}

impl RegistryRecord {
    pub fn validate(&self) -> Result<(), RegistryError> {
        if self.record_id.trim().is_empty() || self.artist_id.trim().is_empty() {
            return Err(RegistryError::Invalid("record_id and artist_id must be nonempty".into()));
        }
        if self.payload.len() != self.codec.payload_length {
            return Err(RegistryError::Invalid(format!(
                "payload has {} bits but codec expects {}",
                self.payload.len(),
                self.codec.payload_length
            )));
        }
        Ok(())
    }

    /// Resolves the key and builds the codec configuration.
    pub fn codec_config(&self, store: &Path) -> Result<CodecConfig, RegistryError> {
        let key = match &self.codec.key {
            KeyRef::InsecureInline(hex) => SecretKey::from_hex(hex).map_err(|e| RegistryError::Key(e.to_string()))?,
            KeyRef::File(p) => {
                let base = store.parent().unwrap_or(Path::new("."));
                read_key_file(&if p.is_absolute() { p.clone() } else { base.join(p) })?
            }
        };
        let config = CodecConfig::new(self.codec.method, key)
            .with_strength(self.codec.strength)
            .with_payload_length(self.codec.payload_length)
            .with_redundancy(self.codec.redundancy);
        config.validate().map_err(|e| RegistryError::Invalid(e.to_string()))?;
        Ok(config)
    }

    pub fn artist_record(&self, store: &Path) -> Result<ArtistRecord, RegistryError> {
        Ok(ArtistRecord {
            id: self.record_id.clone(),
            config: self.codec_config(store)?,
            payload: self.payload.clone(),
            group: None,
        })
    }
}

/// Content-derived record id, salted with the creation time and process id.
pub fn new_record_id(artist_id: &str, role: PayloadRole, payload: &WatermarkPayload, created_at: &str) -> String {
    let mut h = Sha256::new();
    for part in [artist_id, &role.to_string(), &payload.to_hex(), created_at, &std::process::id().to_string()] {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    format!("rec-{}", &hex::encode(h.finalize())[..12])
}

/// All records in file order.
pub fn load(store: &Path) -> Result<Vec<RegistryRecord>, RegistryError> {
    if !store.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(store).map_err(io_err(store))?;
    parse(&text, store)
}

fn parse(text: &str, store: &Path) -> Result<Vec<RegistryRecord>, RegistryError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let corrupt = |message: String| RegistryError::Corrupt { path: store.display().to_string(), line: i + 1, message };
            let record: RegistryRecord = serde_json::from_str(l).map_err(|e| corrupt(e.to_string()))?;
            record.validate().map_err(|e| corrupt(e.to_string()))?;
            Ok(record)
        })
        .collect()
}

struct StoreLock {
    file: File,
}

impl StoreLock {
    fn acquire(store: &Path) -> Result<Self, RegistryError> {
        let path = lock_path(store);
        let file = OpenOptions::new().create(true).truncate(false).write(true).open(&path).map_err(io_err(&path))?;
        file.lock().map_err(io_err(&path))?;
        Ok(Self { file })
    }
}

impl Drop for StoreLock {
    fn drop(&mut self) {
        let _ = self.file.unlock();
    }
}

fn lock_path(store: &Path) -> PathBuf {
    let mut name = store.file_name().unwrap_or_default().to_os_string();
    name.push(".lock");
    store.with_file_name(name)
}

/// Appends `record`, rejecting a repeated id and, unless `allow_duplicate`,
/// a second record for the same `(artist_id, role)`.
pub fn register(store: &Path, record: &RegistryRecord, allow_duplicate: bool) -> Result<String, RegistryError> {
    record.validate()?;
    if let Some(dir) = store.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let _lock = StoreLock::acquire(store)?;
    let existing_text = if store.exists() { fs::read_to_string(store).map_err(io_err(store))? } else { String::new() };
    let existing = parse(&existing_text, store)?;
    if existing.iter().any(|r| r.record_id == record.record_id) {
        return Err(RegistryError::DuplicateId(record.record_id.clone()));
    }
    if !allow_duplicate {
        if let Some(r) = existing.iter().find(|r| r.artist_id == record.artist_id && r.role == record.role) {
            return Err(RegistryError::DuplicateRecord {
                artist: record.artist_id.clone(),
                role: record.role.to_string(),
                existing: r.record_id.clone(),
            });
        }
    }
    let line = serde_json::to_string(record).map_err(|e| RegistryError::Invalid(e.to_string()))?;
    let mut content = existing_text;
    if !content.is_empty() && !content.ends_with('\n') {
        content.push('\n');
    }
    content.push_str(&line);
    content.push('\n');

    let mut tmp_name = store.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(format!(".tmp-{}", std::process::id()));
    let tmp = store.with_file_name(tmp_name);
    {
        let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(content.as_bytes()).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, store).map_err(io_err(store))?;
    Ok(record.record_id.clone())
}

/// Records for `artist_id`, newest first.
pub fn lookup(store: &Path, artist_id: &str) -> Result<Vec<RegistryRecord>, RegistryError> {
    let mut found: Vec<RegistryRecord> = load(store)?.into_iter().filter(|r| r.artist_id == artist_id).collect();
    if found.is_empty() {
        return Err(RegistryError::NotFound(format!("artist '{artist_id}'")));
    }
    found.reverse();
    Ok(found)
}

pub fn get(store: &Path, record_id: &str) -> Result<RegistryRecord, RegistryError> {
    load(store)?
        .into_iter()
        .find(|r| r.record_id == record_id)
        .ok_or_else(|| RegistryError::NotFound(format!("record '{record_id}'")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn record(id: &str, artist: &str, role: PayloadRole, seed: u64) -> RegistryRecord {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RegistryRecord {
            record_id: id.into(),
            artist_id: artist.into(),
            payload: WatermarkPayload::random(32, role, &mut rng).unwrap(),
            role,
            codec: CodecSpec {
                method: Method::DwtDct,
                strength: Method::DwtDct.default_strength(),
                payload_length: 32,
                redundancy: 5,
                key: KeyRef::File("artist.key".into()),
            },
            created_at: "2026-01-01T00:00:00Z".into(),
            notes: String::new(),
            signature: None,
        }
    }

    #[test]
    fn register_and_lookup() {
        let dir = tempfile::tempdir().unwrap();
        let store = dir.path().join("registry.jsonl");
        assert_eq!(register(&store, &record("r1", "a", PayloadRole::Unauthorized, 1), false).unwrap(), "r1");
        assert_eq!(fs::read_to_string(&store).unwrap().lines().count(), 1);
        register(&store, &record("r2", "a", PayloadRole::Authorized, 2), false).unwrap();
        let found = lookup(&store, "a").unwrap();
        assert_eq!(found.iter().map(|r| r.record_id.as_str()).collect::<Vec<_>>(), ["r2", "r1"]);
        assert_eq!(get(&store, "r1").unwrap().artist_id, "a");
    }

    #[test]
    fn duplicates_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let store = dir.path().join("registry.jsonl");
        register(&store, &record("r1", "a", PayloadRole::Unauthorized, 1), false).unwrap();
        let dup = record("r2", "a", PayloadRole::Unauthorized, 2);
        assert!(matches!(register(&store, &dup, false), Err(RegistryError::DuplicateRecord { .. })));
        assert!(register(&store, &dup, true).is_ok());
        assert!(matches!(register(&store, &dup, true), Err(RegistryError::DuplicateId(_))));
    }

    #[test]
    fn unknown_artist_and_record() {
        let dir = tempfile::tempdir().unwrap();
        let store = dir.path().join("registry.jsonl");
        assert!(matches!(lookup(&store, "nobody"), Err(RegistryError::NotFound(_))));
        register(&store, &record("r1", "a", PayloadRole::Unauthorized, 1), false).unwrap();
        assert!(matches!(get(&store, "zzz"), Err(RegistryError::NotFound(_))));
    }

    #[test]
    fn corrupted_line_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let store = dir.path().join("registry.jsonl");
        register(&store, &record("r1", "a", PayloadRole::Unauthorized, 1), false).unwrap();
        let mut text = fs::read_to_string(&store).unwrap();
        text.push_str("{\"record_id\": \"broken\"\n");
        fs::write(&store, text).unwrap();
        match lookup(&store, "a") {
            Err(RegistryError::Corrupt { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        // writers refuse to extend a corrupted store
        assert!(matches!(register(&store, &record("r3", "b", PayloadRole::Unauthorized, 3), false), Err(RegistryError::Corrupt { .. })));
    }

    #[test]
    fn concurrent_writers_all_land() {
        let dir = tempfile::tempdir().unwrap();
        let store = dir.path().join("registry.jsonl");
        std::thread::scope(|s| {
            for i in 0..8u64 {
                let store = store.clone();
                s.spawn(move || register(&store, &record(&format!("r{i}"), &format!("artist{i}"), PayloadRole::Unauthorized, i), false).unwrap());
            }
        });
        assert_eq!(load(&store).unwrap().len(), 8);
    }

    #[test]
    fn key_file_resolution() {
        let dir = tempfile::tempdir().unwrap();
        let store = dir.path().join("registry.jsonl");
        let key = SecretKey::random(&mut ChaCha8Rng::seed_from_u64(9));
        write_key_file(&dir.path().join("artist.key"), &key).unwrap();
        let rec = record("r1", "a", PayloadRole::Unauthorized, 1);
        assert_eq!(rec.codec_config(&store).unwrap().key, key);
        let mut inline = rec.clone();
        inline.codec.key = KeyRef::InsecureInline(key.to_hex());
        assert_eq!(inline.codec_config(&store).unwrap().key, key);
        let mut missing = rec;
        missing.codec.key = KeyRef::File("nope.key".into());
        assert!(missing.codec_config(&store).is_err());
    }
}
