use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::Context;

/// Replaces `path` with `bytes` via a sibling temp file and a rename, so
/// readers never see a partial file. Returns `false` without touching the
/// file when it already holds exactly these bytes.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<bool> {
    if fs::read(path).is_ok_and(|old| old == bytes) {
        return Ok(false);
    }
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map(|()| true)
}

/// Sends a document to `--out` when given, else to stdout.
pub fn emit(out: Option<&Path>, bytes: &[u8], stdout: &mut dyn Write) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            let written = write_atomic(path, bytes)
                .with_context(|| format!("writing {}", path.display()))?;
            if written {
                log::info!("wrote {}", path.display());
            } else {
                log::info!("{} unchanged", path.display());
            }
        }
        None => stdout.write_all(bytes).context("writing to stdout")?,
    }
    Ok(())
}

pub fn json_bytes<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("document serializes");
    out.push(b'\n');
    out
}
