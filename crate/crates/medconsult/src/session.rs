//! Session identifiers, the on-disk snapshot store and the transcript
//! document shared by the CLI and the HTTP service.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use medconsult_core::canonical::to_canonical_json;
use medconsult_core::crm::{ConsultationPhase, SessionId};
use medconsult_core::dialogue::{Consultation, Speaker, Utterance};
use medconsult_core::kg::KnowledgeGraph;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Draws UUID-formatted session ids from a ChaCha stream. A fixed seed gives
/// a reproducible id sequence, which makes records comparable across runs.
#[derive(Debug, Clone)]
pub struct SessionIdGenerator {
    rng: ChaCha8Rng,
}

impl SessionIdGenerator {
    pub fn new(seed: Option<u64>) -> Self {
        let rng = match seed {
            Some(seed) => ChaCha8Rng::seed_from_u64(seed),
            None => ChaCha8Rng::from_os_rng(),
        };
        Self { rng }
    }

    pub fn next_id(&mut self) -> SessionId {
        let mut bytes = [0u8; 16];
        self.rng.fill_bytes(&mut bytes);
        SessionId::new(uuid::Builder::from_random_bytes(bytes).into_uuid().to_string())
    }
}

/// Ids are generated by us, so anything outside `[A-Za-z0-9_-]` is foreign
/// and must never reach the file system.
pub fn is_valid_session_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Persisted form of one session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionDocument {
    pub created_at: u64,
    pub consultation: Consultation,
}

impl SessionDocument {
    pub fn new(kg: &KnowledgeGraph, id: SessionId) -> Self {
        Self { created_at: unix_now(), consultation: Consultation::new(kg, id) }
    }

    pub fn session_id(&self) -> &SessionId {
        &self.consultation.state.session_id
    }

    pub fn handle(&self) -> SessionHandle {
        SessionHandle {
            session_id: self.session_id().clone(),
            created_at: self.created_at,
            phase: self.consultation.state.phase,
            turn: self.consultation.state.turn,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionHandle {
    pub session_id: SessionId,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub phase: ConsultationPhase,
    pub turn: u32,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("session store unavailable at {path}: {source}")]
    Unavailable { path: PathBuf, source: io::Error },
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("corrupt session document {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
}

/// One canonical-JSON document per session, `<dir>/<session_id>.json`,
/// replaced atomically on every save.
#[derive(Debug, Clone)]
pub struct SnapshotStore {
    dir: PathBuf,
}

impl SnapshotStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|source| StoreError::Unavailable { path: dir.clone(), source })?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_of(&self, id: &str) -> Result<PathBuf, StoreError> {
        if !is_valid_session_id(id) {
            return Err(StoreError::UnknownSession(id.to_string()));
        }
        Ok(self.dir.join(format!("{id}.json")))
    }

    pub fn exists(&self, id: &str) -> bool {
        self.path_of(id).map(|p| p.is_file()).unwrap_or(false)
    }

    pub fn save(&self, doc: &SessionDocument) -> Result<(), StoreError> {
        let path = self.path_of(doc.session_id().as_str())?;
        let unavailable = |source| StoreError::Unavailable { path: self.dir.clone(), source };
        let mut file = tempfile::NamedTempFile::new_in(&self.dir).map_err(unavailable)?;
        file.write_all(to_canonical_json(doc).as_bytes()).map_err(unavailable)?;
        file.as_file().sync_all().map_err(unavailable)?;
        file.persist(&path).map_err(|e| unavailable(e.error))?;
        Ok(())
    }

    pub fn load(&self, id: &str) -> Result<SessionDocument, StoreError> {
        let path = self.path_of(id)?;
        let text = match fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StoreError::UnknownSession(id.to_string())),
            Err(source) => return Err(StoreError::Unavailable { path, source }),
        };
        let doc: SessionDocument =
            serde_json::from_str(&text).map_err(|e| StoreError::Corrupt { path: path.clone(), message: e.to_string() })?;
        doc.consultation
            .state
            .check_invariants()
            .map_err(|m| StoreError::Corrupt { path: path.clone(), message: m.to_string() })?;
        if doc.session_id().as_str() != id {
            return Err(StoreError::Corrupt { path, message: "session id does not match file name".into() });
        }
        Ok(doc)
    }

    /// Stored session ids, sorted.
    pub fn ids(&self) -> Result<Vec<String>, StoreError> {
        let entries = fs::read_dir(&self.dir).map_err(|source| StoreError::Unavailable { path: self.dir.clone(), source })?;
        let mut ids: Vec<String> = entries
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix(".json")).map(str::to_string))
            .filter(|id| is_valid_session_id(id))
            .collect();
        ids.sort();
        Ok(ids)
    }
}

/// An attachment as exposed to clients: the image is fetched through
/// `/v1/images/{image}`; `source` is the locator from the graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttachmentView {
    pub drug: String,
    pub drug_name: String,
    pub image: String,
    pub url: String,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtteranceView {
    pub speaker: Speaker,
    pub text: String,
    pub turn: u32,
    pub attachments: Vec<AttachmentView>,
}

pub fn image_url(image: &str) -> String {
    format!("/v1/images/{image}")
}

pub fn utterance_view(kg: &KnowledgeGraph, u: &Utterance) -> UtteranceView {
    UtteranceView {
        speaker: u.speaker,
        text: u.text.clone(),
        turn: u.turn,
        attachments: u
            .attachments
            .iter()
            .map(|a| AttachmentView {
                drug: a.drug.as_str().to_string(),
                drug_name: kg.name_of(&a.drug).to_string(),
                image: a.image.as_str().to_string(),
                url: image_url(a.image.as_str()),
                source: a.image_uri.clone(),
            })
            .collect(),
    }
}

pub fn transcript_view(kg: &KnowledgeGraph, consultation: &Consultation) -> Vec<UtteranceView> {
    consultation.transcript.iter().map(|u| utterance_view(kg, u)).collect()
}

/// Canonical JSON transcript; identical bytes for identical sessions no
/// matter which interface drove them.
pub fn transcript_json(kg: &KnowledgeGraph, consultation: &Consultation) -> String {
    to_canonical_json(&transcript_view(kg, consultation))
}
