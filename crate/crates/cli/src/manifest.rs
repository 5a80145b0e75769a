use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Provenance of one command run. `hash` covers every field except the
/// wall-clock ones, so reruns with equal inputs share it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub hash: String,
    pub command: String,
    pub recipe_path: PathBuf,
    pub recipe_sha256: String,
    pub parameters: Value,
    pub seed: u64,
    pub tool_version: String,
    pub outputs: Vec<PathBuf>,
    pub started_unix: f64,
    pub wall_clock_s: f64,
}

#[derive(Serialize)]
struct Hashed<'a> {
    command: &'a str,
    recipe_sha256: &'a str,
    parameters: &'a Value,
    seed: u64,
    tool_version: &'a str,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(SystemTime::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl RunManifest {
    pub fn new(command: &str, recipe_path: &Path, parameters: Value, seed: u64) -> Result<Self> {
        let bytes = fs::read(recipe_path).with_context(|| format!("reading {}", recipe_path.display()))?;
        let recipe_sha256 = sha256_hex(&bytes);
        let tool_version = env!("CARGO_PKG_VERSION").to_string();
        let hashed = Hashed {
            command,
            recipe_sha256: &recipe_sha256,
            parameters: &parameters,
            seed,
            tool_version: &tool_version,
        };
        let hash = sha256_hex(&serde_json::to_vec(&hashed)?);
        Ok(Self {
            hash,
            command: command.to_string(),
            recipe_path: recipe_path.to_path_buf(),
            recipe_sha256,
            parameters,
            seed,
            tool_version,
            outputs: Vec::new(),
            started_unix: unix_now(),
            wall_clock_s: 0.0,
        })
    }

    /// Writes `bytes` to `dir/name` atomically and records the path.
    pub fn emit(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = dir.join(name);
        write_atomic(&path, bytes)?;
        self.outputs.push(path.clone());
        Ok(path)
    }

    /// Serializes `value` under a `manifest` key next to its own fields.
    pub fn emit_json<T: Serialize>(&mut self, dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
        let mut v = serde_json::to_value(value)?;
        match &mut v {
            Value::Object(map) => {
                map.insert("manifest".into(), Value::String(self.hash.clone()));
            }
            other => {
                v = serde_json::json!({ "manifest": self.hash, "data": other.take() });
            }
        }
        let text = serde_json::to_string_pretty(&v)? + "\n";
        self.emit(dir, name, text.as_bytes())
    }

    /// Writes a CSV whose first line is `# manifest: <hash>`.
    pub fn emit_csv(&mut self, dir: &Path, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<PathBuf> {
        let mut out = format!("# manifest: {}\n{}\n", self.hash, header.join(","));
        for r in rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        self.emit(dir, name, out.as_bytes())
    }

    pub fn finish(mut self, dir: &Path) -> Result<PathBuf> {
        self.wall_clock_s = unix_now() - self.started_unix;
        let text = serde_json::to_string_pretty(&self)? + "\n";
        let path = dir.join("manifest.json");
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}

/// Temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("renaming onto {}", path.display()))?;
    Ok(())
}
