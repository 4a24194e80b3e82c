//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Positional arguments select criteria by number; `--fast-dims` runs the
//! bench matrix with 256 in place of 512 dimensions.

use std::process::ExitCode;
use std::time::Instant;

use num_bigint::BigUint;
use rand::Rng;

use phesim::arithmetic::{random_below, seeded_rng, Integer};
use phesim::bench::{self, BenchConfig, Progress, ReportFormat};
use phesim::encoding::{decode_similarity, encode, prepare, NormalizedVector, Precision};
use phesim::keystore::{self, LoadedKey};
use phesim::tensor::{
    decrypt_similarity, decrypt_similarity_integer, dot_encrypted_plain, dot_encrypted_plain_unguarded, encrypt_values,
    encrypt_values_unguarded, encrypt_vector,
};
use phesim::twotower::{self, EmbeddingRecord, EncryptedDb, QueryOutcome, SimilarityRequest, SimilarityService};
use phesim::{Error, KeyPair, SchemeId};

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, Box<dyn Fn() -> Outcome>);

const SCHEMES: [SchemeId; 3] = [SchemeId::Paillier, SchemeId::DamgardJurik { s: 2 }, SchemeId::OkamotoUchiyama];

fn ensure(condition: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if condition {
        Ok(())
    } else {
        Err(message())
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Key pairs whose moduli are close to 512 bits: `pq` with 256-bit primes,
/// `p^2 q` with 171-bit primes.
fn toy_keypair(scheme: SchemeId, seed: u64) -> Result<KeyPair, String> {
    let prime_bits = match scheme {
        SchemeId::OkamotoUchiyama => 171,
        _ => 256,
    };
    KeyPair::keygen_with_prime_bits(scheme, prime_bits, 0, &mut seeded_rng(seed)).map_err(fail)
}

fn random_prepared<R: Rng>(dim: usize, rng: &mut R) -> NormalizedVector {
    loop {
        let raw: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if let Ok(v) = prepare(&raw) {
            return v;
        }
    }
}

fn plain_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn encoded_dot(a: &[f64], b: &[f64], precision: Precision) -> Integer {
    let mut total = BigUint::from(0u32);
    for (x, y) in a.iter().zip(b) {
        total += encode(*x, precision).unwrap() * encode(*y, precision).unwrap();
    }
    total
}

fn additive_law() -> Outcome {
    let mut rng = seeded_rng(101);
    for (i, scheme) in SCHEMES.into_iter().enumerate() {
        let kp = toy_keypair(scheme, 1 + i as u64)?;
        let pk = kp.public();
        let modulus = kp.secret().message_modulus().clone();
        for _ in 0..1000 {
            let m1 = random_below(pk.plaintext_space(), &mut rng).map_err(fail)?;
            let m2 = random_below(pk.plaintext_space(), &mut rng).map_err(fail)?;
            let c1 = pk.encrypt(&m1, &mut rng).map_err(fail)?;
            let c2 = kp.encrypt(&m2, &mut rng).map_err(fail)?;
            let got = kp.decrypt(&pk.add(&c1, &c2).map_err(fail)?).map_err(fail)?;
            let expected = (&m1 + &m2) % &modulus;
            ensure(got == expected, || format!("{scheme}: D(E({m1}) + E({m2})) = {got}, expected {expected}"))?;
        }
    }
    Ok("1000 pairs per scheme, exact".into())
}

fn scalar_law() -> Outcome {
    let mut rng = seeded_rng(202);
    for (i, scheme) in SCHEMES.into_iter().enumerate() {
        let kp = toy_keypair(scheme, 11 + i as u64)?;
        let pk = kp.public();
        let modulus = kp.secret().message_modulus().clone();
        for _ in 0..1000 {
            let m = random_below(pk.plaintext_space(), &mut rng).map_err(fail)?;
            let k = random_below(pk.plaintext_space(), &mut rng).map_err(fail)?;
            let c = pk.encrypt(&m, &mut rng).map_err(fail)?;
            let got = kp.decrypt(&pk.scalar_mul(&c, &k).map_err(fail)?).map_err(fail)?;
            let expected = (&k * &m) % &modulus;
            ensure(got == expected, || format!("{scheme}: D({k} x E({m})) = {got}, expected {expected}"))?;
        }
    }
    Ok("1000 (m, k) per scheme, exact".into())
}

fn oracle_equivalence() -> Outcome {
    let precision = Precision::DEFAULT;
    let mut worst: f64 = 0.0;
    for (i, scheme) in SCHEMES.into_iter().enumerate() {
        let kp = KeyPair::keygen(scheme, 80, &mut seeded_rng(30 + i as u64)).map_err(fail)?;
        for dim in [8, 128] {
            let mut rng = seeded_rng(300 + dim as u64);
            for pair in 0..200 {
                let (a, b) = (random_prepared(dim, &mut rng), random_prepared(dim, &mut rng));
                let ev = encrypt_vector(&kp, &a, precision, &mut rng).map_err(fail)?;
                let es = dot_encrypted_plain(kp.public(), &ev, b.components(), &mut rng).map_err(fail)?;
                let got = decrypt_similarity_integer(&kp, &es).map_err(fail)?;
                let oracle = encoded_dot(a.components(), b.components(), precision);
                ensure(got == oracle, || format!("{scheme} dim {dim} pair {pair}: {got} != oracle {oracle}"))?;
                let loss = (decode_similarity(&got, precision) - plain_dot(a.components(), b.components())).abs();
                ensure(loss <= 1e-10, || format!("{scheme} dim {dim} pair {pair}: loss {loss:e}"))?;
                worst = worst.max(loss);
            }
        }
    }
    Ok(format!("1200 exact matches, max loss {worst:.3e}"))
}

fn listing_reproduction() -> Outcome {
    let source = [7.11, 5.22, 5.33, 2.44, 3.55, 4.66];
    let target = [5.66, 3.77, 2.88, 4.0, 0.0, 5.99];
    let dir = tempfile::tempdir().map_err(fail)?;
    let (secret_path, public_path) = (dir.path().join("secret.txt"), dir.path().join("public.txt"));

    // on-prem: generate keys, export both files, encrypt the source
    let mut rng = seeded_rng(404);
    let kp = KeyPair::keygen(SchemeId::Paillier, 80, &mut rng).map_err(fail)?;
    keystore::export_secret(&kp, &secret_path).map_err(fail)?;
    keystore::export_public(kp.public(), &public_path).map_err(fail)?;
    let encrypted = encrypt_values(&kp, &source, Precision::DEFAULT, &mut rng).map_err(fail)?;

    // cloud: public key only
    let cloud = keystore::load(&public_path).map_err(fail)?;
    let es = dot_encrypted_plain(cloud.public(), &encrypted, &target, &mut rng).map_err(fail)?;

    // proof of work: secret key restores the similarity
    let owner = keystore::load(&secret_path).map_err(fail)?;
    let restored = decrypt_similarity(owner.keypair().map_err(fail)?, &es).map_err(fail)?;
    let expected = plain_dot(&source, &target);
    let diff = (restored - expected).abs();
    ensure(diff < 0.01, || format!("restored {restored}, brute force {expected}"))?;
    Ok(format!("restored {restored:.6}, brute force {expected:.6}, |diff| {diff:.2e}"))
}

fn role_separation() -> Outcome {
    let dir = tempfile::tempdir().map_err(fail)?;
    let (public_path, db_path) = (dir.path().join("public.txt"), dir.path().join("db.jsonl"));
    let mut rng = seeded_rng(505);
    let kp = KeyPair::keygen(SchemeId::Paillier, 80, &mut rng).map_err(fail)?;
    keystore::export_public(kp.public(), &public_path).map_err(fail)?;
    let records: Vec<EmbeddingRecord> = (0..4)
        .map(|i| EmbeddingRecord {
            id: format!("id-{i}"),
            vector: (0..32).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            model_tag: "random-32d".into(),
        })
        .collect();
    let (db, _) = twotower::enroll(&records, &kp, Precision::DEFAULT, &mut rng).map_err(fail)?;
    db.save(&db_path).map_err(fail)?;
    drop(kp);

    let loaded = keystore::load(&public_path).map_err(fail)?;
    ensure(matches!(loaded, LoadedKey::Public(_)), || "public file loaded as a key pair".into())?;
    let service_db = EncryptedDb::load(&db_path, loaded.public()).map_err(fail)?;
    let service = SimilarityService::new(loaded.public().clone(), service_db).map_err(fail)?;
    let request = SimilarityRequest {
        vector: records[2].vector.clone(),
        ids: None,
    };
    let response = service.handle(&request, &mut rng).map_err(fail)?;
    let results = response.into_results(loaded.public()).map_err(fail)?;
    ensure(results.len() == 4, || format!("{} results", results.len()))?;
    let QueryOutcome::Found(es) = &results[0].outcome else {
        return Err("missing similarity".into());
    };
    match loaded.decrypt(es.ciphertext()) {
        Err(e @ Error::MissingPrivateKey) if e.to_string().contains("must have private key") => {
            Ok(format!("4 encrypted similarities, decrypt refused: \"{e}\""))
        }
        other => Err(format!("decrypt with public key returned {other:?}")),
    }
}

fn size_ratios() -> Outcome {
    let mut summary = Vec::new();
    for security in [80u32, 112] {
        let mut embedding = Vec::new();
        let mut json = Vec::new();
        let mut similarity = Vec::new();
        for (i, scheme) in SCHEMES.into_iter().enumerate() {
            let mut rng = seeded_rng(600 + u64::from(security) + i as u64);
            let kp = KeyPair::keygen(scheme, security, &mut rng).map_err(fail)?;
            let (a, b) = (random_prepared(128, &mut rng), random_prepared(128, &mut rng));
            let ev = encrypt_vector(&kp, &a, Precision::DEFAULT, &mut rng).map_err(fail)?;
            let es = dot_encrypted_plain(kp.public(), &ev, b.components(), &mut rng).map_err(fail)?;
            embedding.push(ev.to_bytes().len() as f64);
            json.push(ev.to_json().len() as f64);
            similarity.push(es.ciphertext().to_bytes().len() as f64);
        }
        for (label, sizes) in [("embedding", &embedding), ("embedding json", &json), ("similarity", &similarity)] {
            let dj = sizes[1] / sizes[0];
            let ou = sizes[2] / sizes[0];
            ensure((dj - 1.5).abs() <= 0.15, || format!("{security}-bit {label} DJ/Paillier = {dj:.4}"))?;
            ensure((ou - 0.75).abs() <= 0.075, || format!("{security}-bit {label} OU/Paillier = {ou:.4}"))?;
            summary.push(format!("{security}/{label} {dj:.3},{ou:.3}"));
        }
    }
    Ok(format!("DJ/P, OU/P: {}", summary.join("; ")))
}

fn dj_s1_equivalence() -> Outcome {
    let kp = toy_keypair(SchemeId::Paillier, 707)?;
    let (p, q) = (kp.secret().p().clone(), kp.secret().q().clone());
    let g = kp.public().g().clone();
    let dj = KeyPair::from_parts(SchemeId::DamgardJurik { s: 1 }, p, q, g, 0).map_err(fail)?;
    let n = kp.public().n().clone();
    let mut rng = seeded_rng(708);
    for _ in 0..100 {
        let m = random_below(&n, &mut rng).map_err(fail)?;
        let r = loop {
            let r = random_below(&n, &mut rng).map_err(fail)?;
            if num_integer::Integer::gcd(&r, &n) == BigUint::from(1u32) {
                break r;
            }
        };
        let cp = kp.public().encrypt_with_randomness(&m, &r).map_err(fail)?;
        let cd = dj.public().encrypt_with_randomness(&m, &r).map_err(fail)?;
        ensure(cp.value() == cd.value(), || format!("ciphertexts differ for m = {m}"))?;
        let (dp, dd) = (kp.decrypt(&cp).map_err(fail)?, dj.decrypt(&cd).map_err(fail)?);
        ensure(dp == dd && dp == m, || format!("decryptions {dp} / {dd} for m = {m}"))?;
    }
    Ok("100 messages: identical ciphertexts and decryptions".into())
}

fn capacity_guard() -> Outcome {
    let toy = KeyPair::from_parts(
        SchemeId::Paillier,
        Integer::from(11u32),
        Integer::from(13u32),
        Integer::from(144u32),
        0,
    )
    .map_err(fail)?;
    let precision = Precision::new(1).map_err(fail)?;
    let values = [1.0, 1.0];
    let mut rng = seeded_rng(808);

    let guarded = encrypt_vector(&toy, &NormalizedVector::new(vec![0.6, 0.8]).map_err(fail)?, precision, &mut rng);
    ensure(matches!(guarded, Err(Error::OverflowRisk(_))), || format!("normalized vector accepted: {guarded:?}"))?;
    let raw = encrypt_values(&toy, &values, precision, &mut rng);
    ensure(matches!(raw, Err(Error::OverflowRisk(_))), || format!("raw vector accepted: {raw:?}"))?;

    let ev = encrypt_values_unguarded(&toy, &values, precision, &mut rng).map_err(fail)?;
    let es = dot_encrypted_plain_unguarded(toy.public(), &ev, &values, &mut rng).map_err(fail)?;
    let got = decrypt_similarity_integer(&toy, &es).map_err(fail)?;
    let true_sum = encoded_dot(&values, &values, precision);
    let wrapped = &true_sum % toy.public().n();
    ensure(got == wrapped && got != true_sum, || format!("decrypted {got}, true sum {true_sum}"))?;
    Ok(format!("guard rejects n = 143 at 2 dims x 1 digit; unguarded sum {true_sum} decrypts to {got}"))
}

fn loss_independence() -> Outcome {
    let precision = Precision::DEFAULT;
    let keys: Vec<KeyPair> = SCHEMES
        .into_iter()
        .enumerate()
        .map(|(i, s)| KeyPair::keygen(s, 80, &mut seeded_rng(90 + i as u64)).map_err(fail))
        .collect::<Result<_, _>>()?;
    let mut losses = Vec::new();
    for kp in &keys {
        let mut inputs = seeded_rng(909);
        let mut rng = seeded_rng(910);
        let mut loss: f64 = 0.0;
        for _ in 0..20 {
            let (a, b) = (random_prepared(128, &mut inputs), random_prepared(128, &mut inputs));
            let ev = encrypt_vector(kp, &a, precision, &mut rng).map_err(fail)?;
            let es = dot_encrypted_plain(kp.public(), &ev, b.components(), &mut rng).map_err(fail)?;
            let restored = decrypt_similarity(kp, &es).map_err(fail)?;
            loss = loss.max((restored - plain_dot(a.components(), b.components())).abs());
        }
        losses.push(loss);
    }
    ensure(losses.iter().all(|l| l.to_bits() == losses[0].to_bits()), || format!("losses differ: {losses:?}"))?;
    Ok(format!("max loss {:.3e} for all three schemes at 128 dims", losses[0]))
}

fn bench_report(fast_dims: bool) -> Outcome {
    let config = BenchConfig {
        dims: if fast_dims { vec![128, 256, 4096] } else { vec![128, 512, 4096] },
        trials: 3,
        warmup: 0,
        seed: Some(2024),
        ..BenchConfig::default()
    };
    let started = Instant::now();
    let rows = bench::measure(&config, |p| {
        if let Progress::Row(r) = p {
            eprintln!(
                "  bench {:>16} {:>3} bits {:>4} dims: {:.4} / {:.4} / {:.4} it/s ({:.0}s)",
                r.scheme,
                r.security_bits,
                r.dim,
                r.encrypt_ips,
                r.homomorphic_ips,
                r.decrypt_ips,
                started.elapsed().as_secs_f64()
            );
        }
    })
    .map_err(fail)?;
    let report = bench::emit_report(&rows, ReportFormat::TableText).map_err(fail)?;
    eprint!("{report}");
    ensure(rows.len() == 18, || format!("{} rows", rows.len()))?;
    for r in &rows {
        ensure(r.is_measured(), || format!("{} {} {} skipped", r.scheme, r.security_bits, r.dim))?;
        ensure(r.encrypt_ips > 0.0 && r.homomorphic_ips > 0.0 && r.decrypt_ips > 0.0, || {
            format!("{} {} {}: nonpositive throughput", r.scheme, r.security_bits, r.dim)
        })?;
    }
    let violations = bench::monotonicity_violations(&rows);
    ensure(violations.is_empty(), || violations.join("; "))?;
    let losses = bench::loss_violations(&rows, config.precision);
    ensure(losses.is_empty(), || losses.join("; "))?;
    let warnings = bench::ordering_warnings(&rows);
    for w in &warnings {
        println!("WARN  10  {w}");
    }
    Ok(format!("18 rows, monotonic 80 -> 112, {} ordering warnings", warnings.len()))
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let fast_dims = args.iter().any(|a| a == "--fast-dims");
    let selected: Vec<u32> = args.iter().filter_map(|a| a.parse().ok()).collect();

    let criteria: Vec<Criterion> = vec![
        (1, "homomorphic addition law", Box::new(additive_law)),
        (2, "scalar multiplication law", Box::new(scalar_law)),
        (3, "dot product oracle equivalence", Box::new(oracle_equivalence)),
        (4, "listing reproduction", Box::new(listing_reproduction)),
        (5, "role separation", Box::new(role_separation)),
        (6, "ciphertext size ratios", Box::new(size_ratios)),
        (7, "paillier equals damgard-jurik s=1", Box::new(dj_s1_equivalence)),
        (8, "capacity guard", Box::new(capacity_guard)),
        (9, "scheme-independent loss", Box::new(loss_independence)),
        (10, "bench report", Box::new(move || bench_report(fast_dims))),
    ];

    let mut failed = 0;
    for (number, name, run) in &criteria {
        if !selected.is_empty() && !selected.contains(number) {
            continue;
        }
        let started = Instant::now();
        let outcome = run();
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {number:>2}  {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {number:>2}  {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
