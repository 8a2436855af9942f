//! Append-only command log with periodic snapshots.
//!
//! Layout inside the state directory:
//! `log.ndjson` holds one `{"seq":N,"command":{..}}` line per accepted
//! command; `snapshot.json` holds `{"seq":N,"engine":{..}}`. Recovery loads
//! the snapshot and replays every logged command with a higher sequence
//! number. A torn final line (crash mid-append) is discarded.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use tvws_core::engine::{Command, Engine};

use crate::error::{AppError, Result};

const LOG_FILE: &str = "log.ndjson";
const SNAPSHOT_FILE: &str = "snapshot.json";

#[derive(Serialize, Deserialize)]
struct LogLine {
    seq: u64,
    command: Command,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    seq: u64,
    engine: Engine,
}

/// Hex SHA-256 of the engine's canonical JSON form.
pub fn state_digest(engine: &Engine) -> String {
    let bytes = serde_json::to_vec(engine).expect("engine serializes");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    log: File,
    seq: u64,
    since_snapshot: u64,
    snapshot_every: u64,
    fsync: bool,
}

impl Store {
    /// Opens (or creates) the state directory and rebuilds the engine. The
    /// `fresh` engine is used when no snapshot exists.
    pub fn open(dir: &Path, snapshot_every: u64, fsync: bool, fresh: Engine) -> Result<(Store, Engine)> {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
        let snap_path = dir.join(SNAPSHOT_FILE);
        let (mut seq, mut engine) = match fs::read(&snap_path) {
            Ok(bytes) => {
                let s: Snapshot = serde_json::from_slice(&bytes).map_err(|e| AppError::Format {
                    path: snap_path.clone(),
                    line: 1,
                    message: e.to_string(),
                })?;
                (s.seq, s.engine)
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => (0, fresh),
            Err(e) => return Err(AppError::io(&snap_path, e)),
        };

        let log_path = dir.join(LOG_FILE);
        let mut replayed = 0;
        let mut good_len = 0u64;
        if log_path.exists() {
            let f = File::open(&log_path).map_err(|e| AppError::io(&log_path, e))?;
            let mut reader = BufReader::new(f);
            let mut line = String::new();
            let mut lineno = 0;
            loop {
                line.clear();
                let n = reader.read_line(&mut line).map_err(|e| AppError::io(&log_path, e))?;
                if n == 0 {
                    break;
                }
                lineno += 1;
                if !line.ends_with('\n') {
                    break;
                }
                let entry: LogLine = serde_json::from_str(line.trim_end()).map_err(|e| AppError::Format {
                    path: log_path.clone(),
                    line: lineno,
                    message: e.to_string(),
                })?;
                good_len += n as u64;
                if entry.seq > seq {
                    // Logged commands were accepted once; a replay error
                    // means the log and snapshot disagree.
                    engine.apply(entry.command).map_err(|e| AppError::Format {
                        path: log_path.clone(),
                        line: lineno,
                        message: format!("replay failed: {e}"),
                    })?;
                    seq = entry.seq;
                    replayed += 1;
                }
            }
        }
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(|e| AppError::io(&log_path, e))?;
        // Drop a torn tail so the next append starts on a fresh line.
        if log.metadata().map_err(|e| AppError::io(&log_path, e))?.len() != good_len {
            log.set_len(good_len).map_err(|e| AppError::io(&log_path, e))?;
        }
        Ok((
            Store {
                dir: dir.to_path_buf(),
                log,
                seq,
                since_snapshot: replayed,
                snapshot_every: snapshot_every.max(1),
                fsync,
            },
            engine,
        ))
    }

    pub fn seq(&self) -> u64 {
        self.seq
    }

    /// Appends an accepted command; takes a snapshot when due.
    pub fn append(&mut self, command: &Command, engine: &Engine) -> Result<()> {
        let line = LogLine {
            seq: self.seq + 1,
            command: command.clone(),
        };
        let mut bytes = serde_json::to_vec(&line).expect("commands serialize");
        bytes.push(b'\n');
        let path = self.dir.join(LOG_FILE);
        self.log.write_all(&bytes).map_err(|e| AppError::io(&path, e))?;
        if self.fsync {
            self.log.sync_data().map_err(|e| AppError::io(&path, e))?;
        }
        self.seq += 1;
        self.since_snapshot += 1;
        if self.since_snapshot >= self.snapshot_every {
            self.snapshot(engine)?;
        }
        Ok(())
    }

    /// Writes a snapshot of `engine` at the current sequence number and
    /// empties the log.
    pub fn snapshot(&mut self, engine: &Engine) -> Result<()> {
        let tmp = self.dir.join("snapshot.json.tmp");
        let snap = serde_json::to_vec(&SnapshotRef {
            seq: self.seq,
            engine,
        })
        .expect("engine serializes");
        let mut f = File::create(&tmp).map_err(|e| AppError::io(&tmp, e))?;
        f.write_all(&snap).map_err(|e| AppError::io(&tmp, e))?;
        f.sync_all().map_err(|e| AppError::io(&tmp, e))?;
        let dest = self.dir.join(SNAPSHOT_FILE);
        fs::rename(&tmp, &dest).map_err(|e| AppError::io(&dest, e))?;
        let log = self.dir.join(LOG_FILE);
        self.log.set_len(0).map_err(|e| AppError::io(&log, e))?;
        self.since_snapshot = 0;
        Ok(())
    }
}

#[derive(Serialize)]
struct SnapshotRef<'a> {
    seq: u64,
    engine: &'a Engine,
}
