use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use phesim::bench::{self, BenchConfig, Progress, ReportFormat};
use phesim::keystore::{self, LoadedKey};
use phesim::phe::DEFAULT_DJ_S;
use phesim::tensor::Encryptor;
use phesim::twotower::{self, EncryptedDb, SimilarityRequest, SimilarityResponse};
use phesim::{KeyPair, Precision, PublicKey, SchemeId};

mod serve;

const SEED_VAR: &str = "PHE_SEED";

type CliResult<T = ()> = Result<T, String>;

#[derive(Parser)]
#[command(name = "phesim", version, about = "Encrypted vector similarity with additively homomorphic encryption")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Paillier,
    DamgardJurik,
    OkamotoUchiyama,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Table,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a key pair and write secret.txt and public.txt
    Keygen {
        #[arg(long, value_enum)]
        scheme: SchemeArg,
        #[arg(long, value_parser = ["80", "112"])]
        security: String,
        /// Damgård-Jurik exponent s
        #[arg(long, default_value_t = DEFAULT_DJ_S)]
        dj_s: u32,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Prepare and encrypt an embedding file into an encrypted database
    EncryptDb {
        /// Public key file (a secret key file also works and enables faster encryption)
        #[arg(long)]
        public: PathBuf,
        #[arg(long, default_value_t = Precision::DEFAULT.digits())]
        precision: u32,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve encrypted similarities over HTTP using the public key only
    Serve {
        #[arg(long)]
        public: PathBuf,
        #[arg(long)]
        db: PathBuf,
        /// 0 picks a free port
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Send a plaintext query vector to a similarity service
    Query {
        #[arg(long)]
        url: String,
        /// JSON array of numbers, or an object with a "vector" field
        #[arg(long)]
        vector: PathBuf,
        #[arg(long, value_delimiter = ',')]
        ids: Option<Vec<String>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decrypt a similarity response and threshold each score
    Decrypt {
        #[arg(long)]
        secret: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        threshold: f64,
    },
    /// Measure throughput, loss and sizes across schemes, security levels and dims
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "paillier,damgard-jurik,okamoto-uchiyama")]
        schemes: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "80,112")]
        security: Vec<u32>,
        #[arg(long, value_delimiter = ',', default_value = "128,512,4096")]
        dims: Vec<usize>,
        /// Replace 512 with 256 in --dims for slow machines
        #[arg(long)]
        fast_dims: bool,
        #[arg(long, default_value_t = DEFAULT_DJ_S)]
        dj_s: u32,
        #[arg(long, default_value_t = Precision::DEFAULT.digits())]
        precision: u32,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long, default_value_t = 2)]
        warmup: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
        /// CSV with the same header, merged into the report with a source column
        #[arg(long)]
        external: Option<PathBuf>,
    },
}

fn env_seed() -> CliResult<Option<u64>> {
    match std::env::var(SEED_VAR) {
        Ok(value) => value
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| format!("{SEED_VAR} must be an unsigned integer, got `{value}`")),
        Err(_) => Ok(None),
    }
}

/// Deterministic when `PHE_SEED` is set; that mode refuses 112-bit keys.
fn make_rng(security_bits: &[u32]) -> CliResult<ChaCha20Rng> {
    match env_seed()? {
        Some(seed) => {
            if security_bits.iter().any(|&b| b >= 112) {
                return Err(format!("{SEED_VAR} is for testing only and refuses 112-bit security"));
            }
            Ok(ChaCha20Rng::seed_from_u64(seed))
        }
        None => Ok(ChaCha20Rng::from_entropy()),
    }
}

fn describe(e: phesim::Error) -> String {
    e.to_string()
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn write(path: &Path, contents: &str) -> CliResult {
    fs::write(path, contents).map_err(|e| format!("{}: {e}", path.display()))
}

fn keygen(scheme: SchemeArg, security: &str, dj_s: u32, out_dir: &Path) -> CliResult {
    let security: u32 = security.parse().map_err(|_| format!("invalid security `{security}`"))?;
    let scheme = match scheme {
        SchemeArg::Paillier => SchemeId::Paillier,
        SchemeArg::DamgardJurik => SchemeId::damgard_jurik(dj_s).map_err(describe)?,
        SchemeArg::OkamotoUchiyama => SchemeId::OkamotoUchiyama,
    };
    let mut rng = make_rng(&[security])?;
    let kp = KeyPair::keygen(scheme, security, &mut rng).map_err(describe)?;
    fs::create_dir_all(out_dir).map_err(|e| format!("{}: {e}", out_dir.display()))?;
    keystore::export_secret(&kp, out_dir.join("secret.txt")).map_err(describe)?;
    keystore::export_public(kp.public(), out_dir.join("public.txt")).map_err(describe)?;
    println!("{} {}-bit key written to {}", scheme, security, out_dir.display());
    println!("fingerprint {}", kp.public().fingerprint());
    Ok(())
}

fn enroll_with<E: Encryptor>(encryptor: &E, precision: Precision, input: &Path, out: &Path) -> CliResult {
    let records = twotower::ingest_embeddings(input).map_err(describe)?;
    let mut rng = make_rng(&[encryptor.public_key().security_bits()])?;
    let (db, outcome) = twotower::enroll(&records, encryptor, precision, &mut rng).map_err(describe)?;
    db.save(out).map_err(describe)?;
    for failure in &outcome.failures {
        eprintln!("skipped {}: {}", failure.id, failure.error);
    }
    println!(
        "enrolled {} of {} records ({} dims) into {}",
        outcome.enrolled,
        records.len(),
        db.dim(),
        out.display()
    );
    Ok(())
}

fn encrypt_db(key: &Path, precision: u32, input: &Path, out: &Path) -> CliResult {
    let precision = Precision::new(precision).map_err(describe)?;
    match keystore::load(key).map_err(describe)? {
        LoadedKey::Public(pk) => enroll_with(&pk, precision, input, out),
        LoadedKey::Pair(kp) => enroll_with(&kp, precision, input, out),
    }
}

fn load_public(path: &Path) -> CliResult<PublicKey> {
    Ok(keystore::load(path).map_err(describe)?.public().clone())
}

fn serve(public: &Path, db: &Path, host: &str, port: u16) -> CliResult {
    let pk = load_public(public)?;
    let db = EncryptedDb::load(db, &pk).map_err(describe)?;
    let rng = make_rng(&[pk.security_bits()])?;
    let service = twotower::SimilarityService::new(pk, db).map_err(describe)?;
    serve::run(service, rng, host, port)
}

fn parse_query_vector(text: &str) -> CliResult<Vec<f64>> {
    #[derive(serde::Deserialize)]
    #[serde(untagged)]
    enum QueryFile {
        Plain(Vec<f64>),
        Record { vector: Vec<f64> },
    }
    match serde_json::from_str::<QueryFile>(text.trim()) {
        Ok(QueryFile::Plain(v)) | Ok(QueryFile::Record { vector: v }) => Ok(v),
        Err(_) => Err("query vector must be a JSON array of numbers or an object with a \"vector\" field".into()),
    }
}

fn query(url: &str, vector: &Path, ids: Option<Vec<String>>, out: &Path) -> CliResult {
    let request = SimilarityRequest {
        vector: parse_query_vector(&read(vector)?)?,
        ids,
    };
    let endpoint = format!("{}/similarity", url.trim_end_matches('/'));
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let mut response = agent.post(&endpoint).send_json(&request).map_err(|e| format!("{endpoint}: {e}"))?;
    let status = response.status();
    let body = response.body_mut().read_to_string().map_err(|e| format!("{endpoint}: {e}"))?;
    if !status.is_success() {
        let message = serde_json::from_str::<twotower::ErrorResponse>(&body)
            .map(|e| e.error)
            .unwrap_or(body);
        return Err(format!("{endpoint}: {status}: {message}"));
    }
    let parsed: SimilarityResponse =
        serde_json::from_str(&body).map_err(|e| format!("{endpoint}: malformed response: {e}"))?;
    write(out, &(serde_json::to_string(&parsed).expect("response serializes") + "\n"))?;
    println!("{} results written to {}", parsed.results.len(), out.display());
    Ok(())
}

fn decrypt(secret: &Path, input: &Path, threshold: f64) -> CliResult {
    let key = keystore::load(secret).map_err(describe)?;
    let kp = key.keypair().map_err(describe)?;
    let response: SimilarityResponse =
        serde_json::from_str(&read(input)?).map_err(|e| format!("{}: {e}", input.display()))?;
    let results = response.into_results(kp.public()).map_err(describe)?;
    for r in &results {
        if r.outcome == twotower::QueryOutcome::NotFound {
            eprintln!("{}: {}", r.id, twotower::NOT_FOUND);
        }
    }
    let decisions = twotower::verify(kp, &results, threshold).map_err(describe)?;
    let mut stdout = std::io::stdout().lock();
    for d in &decisions {
        let line = serde_json::to_string(d).expect("decision serializes");
        writeln!(stdout, "{line}").map_err(|e| e.to_string())?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_bench(
    schemes: &[String],
    security: Vec<u32>,
    mut dims: Vec<usize>,
    fast_dims: bool,
    dj_s: u32,
    precision: u32,
    trials: usize,
    warmup: usize,
    seed: Option<u64>,
    out: &Path,
    format: FormatArg,
    external: Option<&Path>,
) -> CliResult {
    let schemes = schemes
        .iter()
        .map(|name| SchemeId::from_name(name.trim(), Some(dj_s)).map_err(describe))
        .collect::<CliResult<Vec<_>>>()?;
    if fast_dims {
        for d in &mut dims {
            if *d == 512 {
                *d = 256;
            }
        }
    }
    let seed = match seed {
        Some(seed) => Some(seed),
        None => {
            make_rng(&security)?;
            env_seed()?
        }
    };
    let config = BenchConfig {
        schemes,
        security_levels: security,
        dims,
        precision: Precision::new(precision).map_err(describe)?,
        trials,
        warmup,
        seed,
    };
    let rows = bench::measure(&config, |p| match p {
        Progress::KeyGenerated { scheme, security_bits } => eprintln!("{scheme} {security_bits}-bit key ready"),
        Progress::Row(r) => eprintln!(
            "{} {} bits {} dims: encrypt {:.4} it/s, dot {:.4} it/s, decrypt {:.4} it/s, loss {:e}",
            r.scheme, r.security_bits, r.dim, r.encrypt_ips, r.homomorphic_ips, r.decrypt_ips, r.loss
        ),
    })
    .map_err(describe)?;
    let format = match format {
        FormatArg::Csv => ReportFormat::Csv,
        FormatArg::Table => ReportFormat::TableText,
    };
    let report = match external {
        Some(path) => {
            let merged = bench::compare_external(&rows, &read(path)?).map_err(describe)?;
            bench::emit_merged(&merged, format).map_err(describe)?
        }
        None => bench::emit_report(&rows, format).map_err(describe)?,
    };
    write(out, &report)?;
    for v in bench::monotonicity_violations(&rows) {
        eprintln!("warning: {v}");
    }
    for w in bench::ordering_warnings(&rows) {
        eprintln!("warning: {w}");
    }
    println!("{} rows written to {}", rows.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Keygen {
            scheme,
            security,
            dj_s,
            out_dir,
        } => keygen(scheme, &security, dj_s, &out_dir),
        Command::EncryptDb {
            public,
            precision,
            input,
            out,
        } => encrypt_db(&public, precision, &input, &out),
        Command::Serve { public, db, port, host } => serve(&public, &db, &host, port),
        Command::Query { url, vector, ids, out } => query(&url, &vector, ids, &out),
        Command::Decrypt {
            secret,
            input,
            threshold,
        } => decrypt(&secret, &input, threshold),
        Command::Bench {
            schemes,
            security,
            dims,
            fast_dims,
            dj_s,
            precision,
            trials,
            warmup,
            seed,
            out,
            format,
            external,
        } => run_bench(
            &schemes,
            security,
            dims,
            fast_dims,
            dj_s,
            precision,
            trials,
            warmup,
            seed,
            &out,
            format,
            external.as_deref(),
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
