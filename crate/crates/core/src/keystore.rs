//! Canonical key files.
//!
//! A key file is a single line of UTF-8 JSON with lexicographically sorted
//! keys, no insignificant whitespace and a trailing LF:
//!
//! ```text
//! {"format_version":1,"material":{"g":"..","n":".."},"role":"public","scheme":"paillier","security_bits":80}
//! ```
//!
//! Big integers are lowercase hex without prefix. Secret files carry the
//! public material plus `p`, `q` and the precomputed decryption constants,
//! all of which are re-derived and compared on load.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arithmetic::Integer;
use crate::error::{Error, Result};
use crate::phe::{Ciphertext, KeyPair, PublicKey, SchemeId};

pub const FORMAT_VERSION: u64 = 1;

const SECRET_FIELDS: [&str; 5] = ["p", "q", "lambda", "mu", "gp_inv_l"];

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeyFile {
    format_version: u64,
    material: BTreeMap<String, String>,
    role: String,
    scheme: String,
    security_bits: u32,
}

/// Result of loading a key file.
#[derive(Clone, Debug, PartialEq, Eq)]
#[allow(clippy::large_enum_variant)]
pub enum LoadedKey {
    Public(PublicKey),
    Pair(KeyPair),
}

impl LoadedKey {
    pub fn public(&self) -> &PublicKey {
        match self {
            LoadedKey::Public(pk) => pk,
            LoadedKey::Pair(kp) => kp.public(),
        }
    }

    pub fn keypair(&self) -> Result<&KeyPair> {
        match self {
            LoadedKey::Public(_) => Err(Error::MissingPrivateKey),
            LoadedKey::Pair(kp) => Ok(kp),
        }
    }

    pub fn decrypt(&self, c: &Ciphertext) -> Result<Integer> {
        self.keypair()?.decrypt(c)
    }
}

pub(crate) fn to_hex(x: &Integer) -> String {
    x.to_str_radix(16)
}

/// Strict lowercase hex without prefix.
pub(crate) fn parse_hex(s: &str) -> Option<Integer> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
        return None;
    }
    Integer::parse_bytes(s.as_bytes(), 16)
}

fn public_material(pk: &PublicKey) -> BTreeMap<String, String> {
    let mut material = BTreeMap::new();
    material.insert("n".to_string(), to_hex(pk.n()));
    material.insert("g".to_string(), to_hex(pk.g()));
    if let Some(h) = pk.h() {
        material.insert("h".to_string(), to_hex(h));
    }
    if let SchemeId::DamgardJurik { s } = pk.scheme() {
        material.insert("s".to_string(), format!("{s:x}"));
    }
    material
}

fn render(file: &KeyFile) -> String {
    let mut text = serde_json::to_string(file).expect("key files always serialize");
    text.push('\n');
    text
}

pub fn public_to_string(pk: &PublicKey) -> String {
    render(&KeyFile {
        format_version: FORMAT_VERSION,
        material: public_material(pk),
        role: "public".into(),
        scheme: pk.scheme().name().into(),
        security_bits: pk.security_bits(),
    })
}

pub fn secret_to_string(kp: &KeyPair) -> String {
    let mut material = public_material(kp.public());
    let sk = kp.secret();
    material.insert("p".into(), to_hex(sk.p()));
    material.insert("q".into(), to_hex(sk.q()));
    for (name, value) in [("lambda", sk.lambda()), ("mu", sk.mu()), ("gp_inv_l", sk.gp_inv_l())] {
        if let Some(v) = value {
            material.insert(name.into(), to_hex(v));
        }
    }
    render(&KeyFile {
        format_version: FORMAT_VERSION,
        material,
        role: "secret".into(),
        scheme: kp.public().scheme().name().into(),
        security_bits: kp.public().security_bits(),
    })
}

/// Hex SHA-256 of [`public_to_string`].
pub fn public_fingerprint(pk: &PublicKey) -> String {
    hex::encode(Sha256::digest(public_to_string(pk).as_bytes()))
}

struct Material(BTreeMap<String, String>);

impl Material {
    fn take(&mut self, name: &str) -> Result<Option<Integer>> {
        match self.0.remove(name) {
            None => Ok(None),
            Some(text) => parse_hex(&text)
                .map(Some)
                .ok_or_else(|| Error::KeyFormat(format!("field `{name}` is not lowercase hex"))),
        }
    }

    fn require(&mut self, name: &str) -> Result<Integer> {
        self.take(name)?
            .ok_or_else(|| Error::KeyFormat(format!("missing field `{name}`")))
    }

    fn finish(self) -> Result<()> {
        match self.0.keys().next() {
            Some(extra) => Err(Error::KeyFormat(format!("unexpected field `{extra}`"))),
            None => Ok(()),
        }
    }
}

fn verify_field(name: &str, stored: Option<Integer>, derived: Option<&Integer>) -> Result<()> {
    if stored.as_ref() != derived {
        return Err(Error::Integrity(format!("`{name}` does not match the key material")));
    }
    Ok(())
}

pub fn parse(text: &str) -> Result<LoadedKey> {
    let file: KeyFile = serde_json::from_str(text).map_err(|e| Error::KeyFormat(e.to_string()))?;
    if file.format_version != FORMAT_VERSION {
        return Err(Error::UnknownVersion(file.format_version));
    }
    let mut material = Material(file.material);
    let s = match material.take("s")? {
        Some(s) => Some(u32::try_from(s).map_err(|_| Error::KeyFormat("`s` out of range".into()))?),
        None => None,
    };
    let scheme = SchemeId::from_name(&file.scheme, s)?;
    if s.is_some() && !matches!(scheme, SchemeId::DamgardJurik { .. }) {
        return Err(Error::KeyFormat(format!("{} keys carry no `s`", scheme.name())));
    }
    if s.is_none() && matches!(scheme, SchemeId::DamgardJurik { .. }) {
        return Err(Error::KeyFormat("missing field `s`".into()));
    }
    let n = material.require("n")?;
    let g = material.require("g")?;
    let h = material.take("h")?;

    match file.role.as_str() {
        "public" => {
            if let Some(field) = SECRET_FIELDS.iter().find(|f| material.0.contains_key(**f)) {
                return Err(Error::KeyFormat(format!("public key file contains secret field `{field}`")));
            }
            material.finish()?;
            Ok(LoadedKey::Public(PublicKey::new(scheme, n, g, h, file.security_bits)?))
        }
        "secret" => {
            let p = material.require("p")?;
            let q = material.require("q")?;
            let lambda = material.take("lambda")?;
            let mu = material.take("mu")?;
            let gp_inv_l = material.take("gp_inv_l")?;
            material.finish()?;
            let kp = KeyPair::from_parts(scheme, p, q, g, file.security_bits)?;
            let (pk, sk) = (kp.public(), kp.secret());
            verify_field("n", Some(n), Some(pk.n()))?;
            verify_field("h", h, pk.h())?;
            verify_field("lambda", lambda, sk.lambda())?;
            verify_field("mu", mu, sk.mu())?;
            verify_field("gp_inv_l", gp_inv_l, sk.gp_inv_l())?;
            Ok(LoadedKey::Pair(kp))
        }
        other => Err(Error::KeyFormat(format!("unknown role `{other}`"))),
    }
}

fn write_file(path: &Path, contents: &str, owner_only: bool) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))?;
    #[cfg(unix)]
    if owner_only {
        use std::os::unix::fs::PermissionsExt;
        fs::set_permissions(path, fs::Permissions::from_mode(0o600)).map_err(|e| Error::io(path, e))?;
    }
    #[cfg(not(unix))]
    let _ = owner_only;
    Ok(())
}

pub fn export_public(pk: &PublicKey, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &public_to_string(pk), false)
}

/// Writes the full key pair; the file is restricted to its owner on Unix.
pub fn export_secret(kp: &KeyPair, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &secret_to_string(kp), true)
}

pub fn load(path: impl AsRef<Path>) -> Result<LoadedKey> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text)
}
