//! Two-tower protocol: on-prem enrollment, public-key similarity service and
//! on-prem verification.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arithmetic::RandomSource;
use crate::encoding::{check_capacity, prepare, Precision};
use crate::error::{Error, Result};
use crate::phe::{KeyPair, PublicKey};
use crate::tensor::{
    decrypt_similarity, dot_encrypted_plain, encrypt_vector, parse_ciphertexts, similarity_to_hex,
    EncryptedSimilarity, EncryptedVector, Encryptor,
};

pub const NOT_FOUND: &str = "not found";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingRecord {
    pub id: String,
    pub vector: Vec<f64>,
    #[serde(default)]
    pub model_tag: String,
}

pub fn parse_embeddings(text: &str) -> Result<Vec<EmbeddingRecord>> {
    let mut records: Vec<EmbeddingRecord> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (index, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: EmbeddingRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: index + 1,
            message: e.to_string(),
        })?;
        if record.vector.is_empty() {
            return Err(Error::Record {
                id: record.id,
                message: "empty vector".into(),
            });
        }
        if let Some(first) = records.first() {
            if first.vector.len() != record.vector.len() {
                return Err(Error::Record {
                    id: record.id.clone(),
                    message: format!("dimension {} differs from {}", record.vector.len(), first.vector.len()),
                });
            }
        }
        if !seen.insert(record.id.clone()) {
            return Err(Error::Record {
                id: record.id,
                message: "duplicate id".into(),
            });
        }
        records.push(record);
    }
    Ok(records)
}

pub fn ingest_embeddings(path: impl AsRef<Path>) -> Result<Vec<EmbeddingRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(&text)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DbHeader {
    pub dim: usize,
    pub key_fingerprint: String,
    pub precision: Precision,
    pub records: usize,
    pub scheme: String,
    pub security_bits: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DbRecordLine {
    ciphertexts: Vec<String>,
    id: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncryptedDb {
    pk: PublicKey,
    fingerprint: String,
    precision: Precision,
    dim: usize,
    records: BTreeMap<String, EncryptedVector>,
}

impl EncryptedDb {
    /// An empty database; `dim` is fixed by the first inserted record.
    pub fn new(pk: PublicKey, precision: Precision) -> Self {
        EncryptedDb {
            fingerprint: pk.fingerprint(),
            pk,
            precision,
            dim: 0,
            records: BTreeMap::new(),
        }
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.pk
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&EncryptedVector> {
        self.records.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.keys().map(String::as_str)
    }

    pub fn header(&self) -> DbHeader {
        DbHeader {
            dim: self.dim,
            key_fingerprint: self.fingerprint.clone(),
            precision: self.precision,
            records: self.records.len(),
            scheme: self.pk.scheme().name().into(),
            security_bits: self.pk.security_bits(),
        }
    }

    /// Inserts or replaces a record.
    pub fn upsert(&mut self, id: impl Into<String>, ev: EncryptedVector) -> Result<()> {
        if ev.key_fingerprint() != self.fingerprint {
            return Err(Error::KeyMismatch);
        }
        if ev.precision() != self.precision {
            return Err(Error::InvalidArgument(format!(
                "record precision {} differs from database precision {}",
                ev.precision().digits(),
                self.precision.digits()
            )));
        }
        if self.records.is_empty() {
            self.dim = ev.dim();
        } else if ev.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: ev.dim(),
            });
        }
        self.records.insert(id.into(), ev);
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header()).expect("header serializes");
        out.push('\n');
        for (id, ev) in &self.records {
            let line = DbRecordLine {
                ciphertexts: ev.ciphertexts().iter().map(|c| c.to_hex()).collect(),
                id: id.clone(),
            };
            out.push_str(&serde_json::to_string(&line).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str, pk: &PublicKey) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        let header: DbHeader = serde_json::from_str(first).map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?;
        if header.scheme != pk.scheme().name() {
            return Err(Error::SchemeMismatch(format!(
                "database is {} but key is {}",
                header.scheme,
                pk.scheme().name()
            )));
        }
        if header.key_fingerprint != pk.fingerprint() {
            return Err(Error::KeyMismatch);
        }
        let mut db = EncryptedDb::new(pk.clone(), header.precision);
        for (index, line) in lines {
            let record: DbRecordLine = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: index + 1,
                message: e.to_string(),
            })?;
            if record.ciphertexts.len() != header.dim {
                return Err(Error::Record {
                    id: record.id,
                    message: format!("{} ciphertexts, header says {}", record.ciphertexts.len(), header.dim),
                });
            }
            let ciphertexts = parse_ciphertexts(pk, &record.ciphertexts).map_err(|e| Error::Record {
                id: record.id.clone(),
                message: e.to_string(),
            })?;
            let ev = EncryptedVector::from_parts(pk, ciphertexts, header.precision, 1.0)?;
            if db.records.contains_key(&record.id) {
                return Err(Error::Record {
                    id: record.id,
                    message: "duplicate id".into(),
                });
            }
            db.upsert(record.id, ev)?;
        }
        if db.len() != header.records {
            return Err(Error::Integrity(format!(
                "header announces {} records, found {}",
                header.records,
                db.len()
            )));
        }
        Ok(db)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>, pk: &PublicKey) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_jsonl(&text, pk)
    }
}

#[derive(Debug)]
pub struct EnrollFailure {
    pub id: String,
    pub error: Error,
}

#[derive(Debug)]
pub struct EnrollOutcome {
    pub enrolled: usize,
    pub failures: Vec<EnrollFailure>,
}

/// Prepares and encrypts every record into `db`. A bad record is reported in
/// the outcome and does not stop the run.
pub fn enroll_into<E: Encryptor, R: RandomSource + ?Sized>(
    db: &mut EncryptedDb,
    records: &[EmbeddingRecord],
    encryptor: &E,
    rng: &mut R,
) -> Result<EnrollOutcome> {
    if encryptor.public_key().fingerprint() != db.fingerprint {
        return Err(Error::KeyMismatch);
    }
    if let Some(first) = records.first() {
        let report = check_capacity(encryptor.public_key(), db.precision, first.vector.len());
        if !report.passes {
            return Err(Error::OverflowRisk(format!(
                "{} dimensions at {} digits need {:.1} bits, plaintext space has {}",
                report.dim, report.digits, report.required_bits, report.available_bits
            )));
        }
    }
    let mut outcome = EnrollOutcome {
        enrolled: 0,
        failures: Vec::new(),
    };
    for record in records {
        let result = prepare(&record.vector)
            .and_then(|v| encrypt_vector(encryptor, &v, db.precision, rng))
            .and_then(|ev| db.upsert(record.id.clone(), ev));
        match result {
            Ok(()) => outcome.enrolled += 1,
            Err(error) => outcome.failures.push(EnrollFailure {
                id: record.id.clone(),
                error,
            }),
        }
    }
    Ok(outcome)
}

pub fn enroll<E: Encryptor, R: RandomSource + ?Sized>(
    records: &[EmbeddingRecord],
    encryptor: &E,
    precision: Precision,
    rng: &mut R,
) -> Result<(EncryptedDb, EnrollOutcome)> {
    let mut db = EncryptedDb::new(encryptor.public_key().clone(), precision);
    let outcome = enroll_into(&mut db, records, encryptor, rng)?;
    Ok((db, outcome))
}

#[derive(Clone, Debug, PartialEq)]
pub enum QueryOutcome {
    Found(EncryptedSimilarity),
    NotFound,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryResult {
    pub id: String,
    pub outcome: QueryOutcome,
}

/// Encrypted similarities between `query` and the requested records, in
/// request order (all records by id when `ids` is `None`).
pub fn similarity_query<R: RandomSource + ?Sized>(
    db: &EncryptedDb,
    pk: &PublicKey,
    query: &[f64],
    ids: Option<&[String]>,
    rng: &mut R,
) -> Result<Vec<QueryResult>> {
    if !db.is_empty() && query.len() != db.dim {
        return Err(Error::DimensionMismatch {
            expected: db.dim,
            found: query.len(),
        });
    }
    let prepared = prepare(query)?;
    let requested: Vec<String> = match ids {
        Some(ids) => ids.to_vec(),
        None => db.records.keys().cloned().collect(),
    };
    requested
        .into_iter()
        .map(|id| {
            let outcome = match db.records.get(&id) {
                Some(ev) => QueryOutcome::Found(dot_encrypted_plain(pk, ev, prepared.components(), rng)?),
                None => QueryOutcome::NotFound,
            };
            Ok(QueryResult { id, outcome })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationDecision {
    pub id: String,
    pub similarity: f64,
    pub threshold: f64,
    pub same_person: bool,
}

/// Decrypts each similarity and thresholds it. Decisions are sorted by
/// similarity descending, ties by id ascending. Not-found entries are skipped.
pub fn verify(kp: &KeyPair, results: &[QueryResult], threshold: f64) -> Result<Vec<VerificationDecision>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} must lie in (0, 1)")));
    }
    let mut decisions = Vec::with_capacity(results.len());
    for result in results {
        let QueryOutcome::Found(es) = &result.outcome else { continue };
        let similarity = decrypt_similarity(kp, es)?;
        decisions.push(VerificationDecision {
            id: result.id.clone(),
            similarity,
            threshold,
            same_person: similarity >= threshold,
        });
    }
    decisions.sort_by(|a, b| b.similarity.total_cmp(&a.similarity).then_with(|| a.id.cmp(&b.id)));
    Ok(decisions)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub scheme: String,
    pub dim: usize,
    pub records: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimilarityRequest {
    pub vector: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ids: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WireResult {
    Found { id: String, ciphertext: String, precision: Precision },
    Missing { id: String, error: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityResponse {
    pub key_fingerprint: String,
    pub results: Vec<WireResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: String,
}

impl SimilarityResponse {
    pub fn from_results(fingerprint: String, results: &[QueryResult]) -> Self {
        let results = results
            .iter()
            .map(|r| match &r.outcome {
                QueryOutcome::Found(es) => WireResult::Found {
                    id: r.id.clone(),
                    ciphertext: similarity_to_hex(es),
                    precision: es.precision(),
                },
                QueryOutcome::NotFound => WireResult::Missing {
                    id: r.id.clone(),
                    error: NOT_FOUND.into(),
                },
            })
            .collect();
        SimilarityResponse {
            key_fingerprint: fingerprint,
            results,
        }
    }

    /// Rebuilds typed results, checking that they were produced under `pk`.
    pub fn into_results(self, pk: &PublicKey) -> Result<Vec<QueryResult>> {
        if self.key_fingerprint != pk.fingerprint() {
            return Err(Error::KeyMismatch);
        }
        self.results
            .into_iter()
            .map(|r| match r {
                WireResult::Found { id, ciphertext, precision } => {
                    let c = parse_ciphertexts(pk, std::slice::from_ref(&ciphertext))?.remove(0);
                    Ok(QueryResult {
                        id,
                        outcome: QueryOutcome::Found(EncryptedSimilarity::new(c, precision, self.key_fingerprint.clone())),
                    })
                }
                WireResult::Missing { id, .. } => Ok(QueryResult {
                    id,
                    outcome: QueryOutcome::NotFound,
                }),
            })
            .collect()
    }
}

/// The cloud tower: a read-only database and the public key, nothing else.
#[derive(Clone, Debug)]
pub struct SimilarityService {
    pk: PublicKey,
    db: EncryptedDb,
}

impl SimilarityService {
    pub fn new(pk: PublicKey, db: EncryptedDb) -> Result<Self> {
        if db.fingerprint != pk.fingerprint() {
            return Err(Error::KeyMismatch);
        }
        Ok(SimilarityService { pk, db })
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.pk
    }

    pub fn db(&self) -> &EncryptedDb {
        &self.db
    }

    pub fn health(&self) -> HealthResponse {
        HealthResponse {
            status: "ok".into(),
            scheme: self.pk.scheme().name().into(),
            dim: self.db.dim,
            records: self.db.len(),
        }
    }

    pub fn handle<R: RandomSource + ?Sized>(&self, request: &SimilarityRequest, rng: &mut R) -> Result<SimilarityResponse> {
        let results = similarity_query(&self.db, &self.pk, &request.vector, request.ids.as_deref(), rng)?;
        Ok(SimilarityResponse::from_results(self.db.fingerprint.clone(), &results))
    }
}
