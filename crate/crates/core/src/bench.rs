//! Benchmark harness: throughput, loss and size metrics per
//! (scheme, security, dim) cell, plus report emission.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::arithmetic::seeded_rng;
use crate::encoding::{check_capacity, prepare, NormalizedVector, Precision};
use crate::error::{Error, Result};
use crate::keystore::{public_to_string, secret_to_string};
use crate::phe::{KeyPair, SchemeId, DEFAULT_DJ_S};
use crate::tensor::{decrypt_similarity, dot_encrypted_plain, encrypt_vector};

pub const MIN_TRIALS: usize = 3;

pub const HEADER: [&str; 11] = [
    "scheme",
    "security_bits",
    "dim",
    "encrypt_ips",
    "homomorphic_ips",
    "decrypt_ips",
    "loss",
    "secret_bytes",
    "public_bytes",
    "embedding_bytes",
    "similarity_bytes",
];

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub schemes: Vec<SchemeId>,
    pub security_levels: Vec<u32>,
    pub dims: Vec<usize>,
    pub precision: Precision,
    pub trials: usize,
    pub warmup: usize,
    pub seed: Option<u64>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            schemes: vec![
                SchemeId::Paillier,
                SchemeId::DamgardJurik { s: DEFAULT_DJ_S },
                SchemeId::OkamotoUchiyama,
            ],
            security_levels: vec![80, 112],
            dims: vec![128, 512, 4096],
            precision: Precision::DEFAULT,
            trials: 5,
            warmup: 2,
            seed: None,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials < MIN_TRIALS {
            return Err(Error::InvalidArgument(format!("trials must be at least {MIN_TRIALS}")));
        }
        if self.schemes.is_empty() || self.security_levels.is_empty() || self.dims.is_empty() {
            return Err(Error::InvalidArgument("schemes, security levels and dims must be nonempty".into()));
        }
        if self.dims.contains(&0) {
            return Err(Error::InvalidArgument("dims must be at least 1".into()));
        }
        for &bits in &self.security_levels {
            crate::phe::prime_bits_for_security(bits)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RowStatus {
    Measured,
    Skipped(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub scheme: String,
    pub security_bits: u32,
    pub dim: usize,
    pub encrypt_ips: f64,
    pub homomorphic_ips: f64,
    pub decrypt_ips: f64,
    pub loss: f64,
    pub secret_bytes: u64,
    pub public_bytes: u64,
    pub embedding_bytes: u64,
    pub similarity_bytes: u64,
    pub status: RowStatus,
}

impl MetricsRow {
    fn skipped(scheme: SchemeId, security_bits: u32, dim: usize, reason: String) -> Self {
        MetricsRow {
            scheme: scheme.name().into(),
            security_bits,
            dim,
            encrypt_ips: 0.0,
            homomorphic_ips: 0.0,
            decrypt_ips: 0.0,
            loss: 0.0,
            secret_bytes: 0,
            public_bytes: 0,
            embedding_bytes: 0,
            similarity_bytes: 0,
            status: RowStatus::Skipped(reason),
        }
    }

    pub fn is_measured(&self) -> bool {
        self.status == RowStatus::Measured
    }

    fn fields(&self) -> Vec<String> {
        let throughput = |x: f64| match &self.status {
            RowStatus::Measured => x.to_string(),
            RowStatus::Skipped(reason) => format!("SKIPPED:{reason}"),
        };
        vec![
            self.scheme.clone(),
            self.security_bits.to_string(),
            self.dim.to_string(),
            throughput(self.encrypt_ips),
            throughput(self.homomorphic_ips),
            throughput(self.decrypt_ips),
            self.loss.to_string(),
            self.secret_bytes.to_string(),
            self.public_bytes.to_string(),
            self.embedding_bytes.to_string(),
            self.similarity_bytes.to_string(),
        ]
    }

    fn from_fields(fields: &[&str]) -> Result<Self> {
        let bad = |name: &str, value: &str| Error::Report(format!("invalid {name} `{value}`"));
        let int = |i: usize| fields[i].parse::<u64>().map_err(|_| bad(HEADER[i], fields[i]));
        let float = |i: usize| fields[i].parse::<f64>().map_err(|_| bad(HEADER[i], fields[i]));
        let skipped = fields[3..6].iter().find_map(|f| f.strip_prefix("SKIPPED:"));
        let (status, throughputs) = match skipped {
            Some(reason) => (RowStatus::Skipped(reason.to_string()), [0.0; 3]),
            None => (RowStatus::Measured, [float(3)?, float(4)?, float(5)?]),
        };
        Ok(MetricsRow {
            scheme: fields[0].to_string(),
            security_bits: int(1)? as u32,
            dim: int(2)? as usize,
            encrypt_ips: throughputs[0],
            homomorphic_ips: throughputs[1],
            decrypt_ips: throughputs[2],
            loss: float(6)?,
            secret_bytes: int(7)?,
            public_bytes: int(8)?,
            embedding_bytes: int(9)?,
            similarity_bytes: int(10)?,
            status,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Progress<'a> {
    KeyGenerated { scheme: SchemeId, security_bits: u32 },
    Row(&'a MetricsRow),
}

fn median(mut samples: Vec<Duration>) -> Duration {
    samples.sort();
    let mid = samples.len() / 2;
    if samples.len() % 2 == 1 {
        samples[mid]
    } else {
        (samples[mid - 1] + samples[mid]) / 2
    }
}

fn per_second(d: Duration) -> f64 {
    1.0 / d.as_secs_f64().max(1e-9)
}

fn random_prepared<R: Rng>(dim: usize, rng: &mut R) -> Result<NormalizedVector> {
    loop {
        let raw: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        match prepare(&raw) {
            Err(Error::DegenerateVector) => continue,
            other => return other,
        }
    }
}

/// Vector pairs depend only on `(seed, dim)`, so every scheme sees identical
/// inputs and loss can be compared across schemes.
fn pairs(seed: u64, dim: usize, count: usize) -> Result<Vec<(NormalizedVector, NormalizedVector)>> {
    let mut rng = seeded_rng(seed ^ (dim as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    (0..count)
        .map(|_| Ok((random_prepared(dim, &mut rng)?, random_prepared(dim, &mut rng)?)))
        .collect()
}

/// Runs the full matrix. Encryption is timed with the key-pair holder's CRT
/// path; dot products use the public key only.
pub fn measure(config: &BenchConfig, mut progress: impl FnMut(Progress<'_>)) -> Result<Vec<MetricsRow>> {
    config.validate()?;
    let seed = config.seed.unwrap_or_else(|| rand::rngs::OsRng.next_u64());
    let mut rows = Vec::new();
    for &security_bits in &config.security_levels {
        for &scheme in &config.schemes {
            let mut key_rng = seeded_rng(seed ^ (u64::from(security_bits) << 32) ^ scheme_tag(scheme));
            let kp = KeyPair::keygen(scheme, security_bits, &mut key_rng)?;
            progress(Progress::KeyGenerated { scheme, security_bits });
            for &dim in &config.dims {
                let row = measure_cell(&kp, dim, config, seed, &mut key_rng)?;
                progress(Progress::Row(&row));
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

fn scheme_tag(scheme: SchemeId) -> u64 {
    match scheme {
        SchemeId::Paillier => 1,
        SchemeId::DamgardJurik { s } => 2 + (u64::from(s) << 8),
        SchemeId::OkamotoUchiyama => 3,
    }
}

fn measure_cell(kp: &KeyPair, dim: usize, config: &BenchConfig, seed: u64, rng: &mut ChaCha20Rng) -> Result<MetricsRow> {
    let pk = kp.public();
    let scheme = pk.scheme();
    let security_bits = pk.security_bits();
    let report = check_capacity(pk, config.precision, dim);
    if !report.passes {
        let reason = format!("capacity needs {:.0} bits of {}", report.required_bits.ceil(), report.available_bits);
        return Ok(MetricsRow::skipped(scheme, security_bits, dim, reason));
    }
    let inputs = pairs(seed, dim, config.trials)?;
    let mut rng = ChaCha20Rng::seed_from_u64(rng.next_u64());

    let (a, b) = &inputs[0];
    for _ in 0..config.warmup {
        let ev = encrypt_vector(kp, a, config.precision, &mut rng)?;
        let es = dot_encrypted_plain(pk, &ev, b.components(), &mut rng)?;
        decrypt_similarity(kp, &es)?;
    }

    let (mut enc, mut hom, mut dec) = (Vec::new(), Vec::new(), Vec::new());
    let mut loss: f64 = 0.0;
    let mut sizes = (0, 0);
    for (a, b) in &inputs {
        let start = Instant::now();
        let ev = encrypt_vector(kp, a, config.precision, &mut rng)?;
        enc.push(start.elapsed());

        let start = Instant::now();
        let es = dot_encrypted_plain(pk, &ev, b.components(), &mut rng)?;
        hom.push(start.elapsed());

        let start = Instant::now();
        let similarity = decrypt_similarity(kp, &es)?;
        dec.push(start.elapsed());

        loss = loss.max((similarity - a.dot(b)).abs());
        sizes = (ev.to_bytes().len() as u64, es.ciphertext().to_bytes().len() as u64);
    }

    Ok(MetricsRow {
        scheme: scheme.name().into(),
        security_bits,
        dim,
        encrypt_ips: per_second(median(enc)),
        homomorphic_ips: per_second(median(hom)),
        decrypt_ips: per_second(median(dec)),
        loss,
        secret_bytes: secret_to_string(kp).len() as u64,
        public_bytes: public_to_string(pk).len() as u64,
        embedding_bytes: sizes.0,
        similarity_bytes: sizes.1,
        status: RowStatus::Measured,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    TableText,
}

fn render(header: &[&str], records: &[Vec<String>], format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Csv => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            writer.write_record(header).map_err(|e| Error::Report(e.to_string()))?;
            for record in records {
                writer.write_record(record).map_err(|e| Error::Report(e.to_string()))?;
            }
            let bytes = writer.into_inner().map_err(|e| Error::Report(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        ReportFormat::TableText => {
            let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
            for record in records {
                for (w, field) in widths.iter_mut().zip(record) {
                    *w = (*w).max(field.len());
                }
            }
            let mut out = String::new();
            let mut line = |fields: Vec<&str>| {
                let cells: Vec<String> = fields.iter().zip(&widths).map(|(f, w)| format!("{f:<w$}")).collect();
                let _ = writeln!(out, "{}", cells.join("  ").trim_end());
            };
            line(header.to_vec());
            line(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect());
            for record in records {
                line(record.iter().map(String::as_str).collect());
            }
            Ok(out)
        }
    }
}

pub fn emit_report(rows: &[MetricsRow], format: ReportFormat) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Report("no rows to report".into()));
    }
    let records: Vec<Vec<String>> = rows.iter().map(MetricsRow::fields).collect();
    render(&HEADER, &records, format)
}

pub fn write_report(rows: &[MetricsRow], format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, emit_report(rows, format)?).map_err(|e| Error::io(path, e))
}

pub fn parse_report(text: &str) -> Result<Vec<MetricsRow>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::Report(e.to_string()))?;
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(Error::Report(format!(
            "header `{}` does not match `{}`",
            header.iter().collect::<Vec<_>>().join(","),
            HEADER.join(",")
        )));
    }
    reader
        .records()
        .map(|record| {
            let record = record.map_err(|e| Error::Report(e.to_string()))?;
            MetricsRow::from_fields(&record.iter().collect::<Vec<_>>())
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Measured,
    External,
}

impl Source {
    fn name(self) -> &'static str {
        match self {
            Source::Measured => "measured",
            Source::External => "external",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SourcedRow {
    pub source: Source,
    pub row: MetricsRow,
}

/// Appends externally measured rows (same CSV header) to the measured ones.
pub fn compare_external(rows: &[MetricsRow], external_csv: &str) -> Result<Vec<SourcedRow>> {
    let measured = rows.iter().map(|row| SourcedRow {
        source: Source::Measured,
        row: row.clone(),
    });
    let external = parse_report(external_csv)?.into_iter().map(|row| SourcedRow {
        source: Source::External,
        row,
    });
    Ok(measured.chain(external).collect())
}

pub fn emit_merged(rows: &[SourcedRow], format: ReportFormat) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Report("no rows to report".into()));
    }
    let header: Vec<&str> = std::iter::once("source").chain(HEADER).collect();
    let records: Vec<Vec<String>> = rows
        .iter()
        .map(|r| std::iter::once(r.source.name().to_string()).chain(r.row.fields()).collect())
        .collect();
    render(&header, &records, format)
}

fn find<'a>(rows: &'a [MetricsRow], scheme: &str, security_bits: u32, dim: usize) -> Option<&'a MetricsRow> {
    rows.iter()
        .find(|r| r.is_measured() && r.scheme == scheme && r.security_bits == security_bits && r.dim == dim)
}

/// Every throughput must drop when moving from 80- to 112-bit keys.
pub fn monotonicity_violations(rows: &[MetricsRow]) -> Vec<String> {
    let mut violations = Vec::new();
    for low in rows.iter().filter(|r| r.is_measured() && r.security_bits == 80) {
        let Some(high) = find(rows, &low.scheme, 112, low.dim) else { continue };
        let metrics = [
            ("encrypt", low.encrypt_ips, high.encrypt_ips),
            ("homomorphic", low.homomorphic_ips, high.homomorphic_ips),
            ("decrypt", low.decrypt_ips, high.decrypt_ips),
        ];
        for (name, at80, at112) in metrics {
            if at112 >= at80 {
                violations.push(format!(
                    "{} dim {}: {name} {at112:.4} it/s at 112 bits is not below {at80:.4} at 80 bits",
                    low.scheme, low.dim
                ));
            }
        }
    }
    violations
}

/// Hardware-dependent ordering expectations: Okamoto-Uchiyama decrypts
/// fastest, Damgård-Jurik encrypts and operates slowest.
pub fn ordering_warnings(rows: &[MetricsRow]) -> Vec<String> {
    let mut warnings = Vec::new();
    let ou = SchemeId::OkamotoUchiyama.name();
    let dj = SchemeId::DamgardJurik { s: DEFAULT_DJ_S }.name();
    for r in rows.iter().filter(|r| r.is_measured() && r.scheme == ou) {
        let peers: Vec<&MetricsRow> = rows
            .iter()
            .filter(|p| p.is_measured() && p.scheme != ou && p.security_bits == r.security_bits && p.dim == r.dim)
            .collect();
        if let Some(p) = peers.iter().find(|p| p.decrypt_ips >= r.decrypt_ips) {
            warnings.push(format!(
                "{} bits dim {}: {} decrypts at {:.2} it/s, not slower than {ou} at {:.2}",
                r.security_bits, r.dim, p.scheme, p.decrypt_ips, r.decrypt_ips
            ));
        }
    }
    for r in rows.iter().filter(|r| r.is_measured() && r.scheme == dj) {
        for p in rows
            .iter()
            .filter(|p| p.is_measured() && p.scheme != dj && p.security_bits == r.security_bits && p.dim == r.dim)
        {
            if p.encrypt_ips <= r.encrypt_ips {
                warnings.push(format!(
                    "{} bits dim {}: {} encrypts no faster than {dj}",
                    r.security_bits, r.dim, p.scheme
                ));
            }
            if p.homomorphic_ips <= r.homomorphic_ips {
                warnings.push(format!(
                    "{} bits dim {}: {} dot products no faster than {dj}",
                    r.security_bits, r.dim, p.scheme
                ));
            }
        }
    }
    warnings
}

/// Rows whose loss exceeds `dim * 10^-digits`.
pub fn loss_violations(rows: &[MetricsRow], precision: Precision) -> Vec<String> {
    rows.iter()
        .filter(|r| r.is_measured())
        .filter(|r| r.loss > r.dim as f64 * 10f64.powi(-(precision.digits() as i32)) + f64::EPSILON * r.dim as f64)
        .map(|r| format!("{} {} bits dim {}: loss {:e}", r.scheme, r.security_bits, r.dim, r.loss))
        .collect()
}
