//! Append-only JSONL records keyed by content hashes, and CSV tables.

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::error::{Error, Result};

/// Lowercase hex SHA-256.
pub fn digest(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Key of one sweep point: the config hash, a study label and the coordinates' bit patterns.
pub fn point_key(config_hash: &str, label: &str, coords: &[f64]) -> String {
    let mut text = format!("{config_hash}/{label}");
    for c in coords {
        text.push_str(&format!("/{:016x}", c.to_bits()));
    }
    digest(text.as_bytes())
}

/// Seed for one point, derived from the run seed and the point key.
pub fn point_seed(seed: u64, key: &str) -> u64 {
    let h = Sha256::digest(format!("{seed}/{key}").as_bytes());
    u64::from_le_bytes(h[..8].try_into().unwrap_or([0; 8]))
}

#[derive(Debug, Serialize, Deserialize)]
struct Line<T> {
    key: String,
    record: T,
}

/// Completed records of one table, backed by an append-only JSONL file.
///
/// Lines that fail to parse (a partial write from an interrupted run) are skipped.
#[derive(Debug)]
pub struct RecordStore {
    path: PathBuf,
    done: HashMap<String, serde_json::Value>,
    file: Mutex<File>,
}

impl RecordStore {
    pub fn open(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut done = HashMap::new();
        if path.exists() {
            for line in BufReader::new(File::open(path)?).lines() {
                if let Ok(l) = serde_json::from_str::<Line<serde_json::Value>>(&line?) {
                    done.insert(l.key, l.record);
                }
            }
        }
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        // terminate a torn last line so the next record starts cleanly
        if std::fs::metadata(path)?.len() > 0 && !std::fs::read(path)?.ends_with(b"\n") {
            file.write_all(b"\n")?;
        }
        Ok(RecordStore { path: path.to_path_buf(), done, file: Mutex::new(file) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.done.len()
    }

    pub fn is_empty(&self) -> bool {
        self.done.is_empty()
    }

    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Option<T> {
        self.done.get(key).and_then(|v| serde_json::from_value(v.clone()).ok())
    }

    pub fn append<T: Serialize>(&self, key: &str, record: &T) -> Result<()> {
        let mut text = serde_json::to_string(&Line { key: key.to_string(), record })?;
        text.push('\n');
        let mut f = self.file.lock().map_err(|_| Error::Config("record store lock poisoned".into()))?;
        f.write_all(text.as_bytes())?;
        f.flush()?;
        Ok(())
    }
}

/// Evaluates `f` in parallel at every point missing from `store`.
///
/// Results come back in point order; new ones are appended as they finish.
pub fn run_points<P, R, F>(store: Option<&RecordStore>, points: &[(String, P)], f: F) -> Result<Vec<R>>
where
    P: Sync,
    R: Serialize + DeserializeOwned + Send,
    F: Fn(&str, &P) -> Result<R> + Sync,
{
    points
        .par_iter()
        .map(|(key, p)| {
            if let Some(r) = store.and_then(|s| s.get::<R>(key)) {
                return Ok(r);
            }
            let r = f(key, p)?;
            if let Some(s) = store {
                s.append(key, &r)?;
            }
            Ok(r)
        })
        .collect()
}

/// Runs `f` on a pool of `workers` threads.
pub fn with_workers<T: Send, F: FnOnce() -> T + Send>(workers: usize, f: F) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Writes a CSV table with rows sorted lexicographically by their numeric leading columns.
pub fn write_csv(path: &Path, header: &[&str], mut rows: Vec<Vec<f64>>, sort_columns: usize) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    rows.sort_by(|a, b| {
        a.iter()
            .take(sort_columns)
            .zip(b.iter().take(sort_columns))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out = std::io::BufWriter::new(File::create(path)?);
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.10e}")).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn keys_depend_on_every_input() {
        let k = point_key("abc", "sweep", &[30.0, 1.0]);
        assert_eq!(k.len(), 64);
        assert_ne!(k, point_key("abd", "sweep", &[30.0, 1.0]));
        assert_ne!(k, point_key("abc", "other", &[30.0, 1.0]));
        assert_ne!(k, point_key("abc", "sweep", &[30.0, 1.0 + 1e-15]));
        assert_ne!(point_seed(1, &k), point_seed(2, &k));
    }

    #[test]
    fn interrupted_sweep_resumes_without_recomputing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let points: Vec<(String, f64)> = (0..6).map(|i| (format!("k{i}"), i as f64)).collect();
        let calls = AtomicUsize::new(0);
        let f = |_: &str, x: &f64| {
            calls.fetch_add(1, Ordering::SeqCst);
            Ok(x * x)
        };
        {
            let store = RecordStore::open(&path).unwrap();
            with_workers(2, || run_points(Some(&store), &points[..3], f)).unwrap().unwrap();
        }
        let mut text = std::fs::read_to_string(&path).unwrap();
        text.push_str("{\"key\":\"k5\",\"rec");
        std::fs::write(&path, text).unwrap();
        let store = RecordStore::open(&path).unwrap();
        assert_eq!(store.len(), 3);
        let out: Vec<f64> = with_workers(2, || run_points(Some(&store), &points, f)).unwrap().unwrap();
        assert_eq!(out, vec![0.0, 1.0, 4.0, 9.0, 16.0, 25.0]);
        assert_eq!(calls.load(Ordering::SeqCst), 6);
        assert_eq!(RecordStore::open(&path).unwrap().len(), 6);
    }

    #[test]
    fn csv_rows_are_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        write_csv(&path, &["x", "y"], vec![vec![2.0, 0.0], vec![1.0, 5.0], vec![1.0, 3.0]], 2).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let first: Vec<&str> = text.lines().map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(first[0], "x");
        assert!(text.lines().nth(1).unwrap().ends_with("3.0000000000e0"));
        assert!(first[3].starts_with("2.0"));
    }
}
