use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{search_minimal, DifferenceSet};
use crate::error::{Error, Result};

/// Persistent store of searched difference sets, one record per line:
///
/// ```text
/// p k a_1,a_2,...,a_k
/// ```
///
/// Records are written sorted by `p`. The file is read on first use and every
/// record is re-verified; a record that fails to parse or to verify is an
/// error rather than a cache miss.
#[derive(Debug)]
pub struct DiffsetCache {
    path: PathBuf,
    entries: Option<BTreeMap<usize, DifferenceSet>>,
}

impl DiffsetCache {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            entries: None,
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn loaded(&mut self) -> Result<&mut BTreeMap<usize, DifferenceSet>> {
        if self.entries.is_none() {
            let entries = if self.path.exists() {
                parse(&self.path, &fs::read_to_string(&self.path)?)?
            } else {
                BTreeMap::new()
            };
            self.entries = Some(entries);
        }
        Ok(self.entries.as_mut().expect("just loaded"))
    }

    pub fn get(&mut self, p: usize) -> Result<Option<DifferenceSet>> {
        Ok(self.loaded()?.get(&p).cloned())
    }

    /// Returns the cached set for `p`, searching and persisting it on a miss.
    pub fn get_or_search(&mut self, p: usize, budget: Option<u64>) -> Result<DifferenceSet> {
        if let Some(hit) = self.get(p)? {
            return Ok(hit);
        }
        let found = search_minimal(p, budget)?;
        self.insert(found.clone())?;
        Ok(found)
    }

    /// Adds a verified set and rewrites the file.
    pub fn insert(&mut self, set: DifferenceSet) -> Result<()> {
        if !set.verify() {
            return Err(Error::InvalidInput(format!(
                "refusing to cache {set} mod {}: not a difference set",
                set.p()
            )));
        }
        self.loaded()?.insert(set.p(), set);
        self.save()
    }

    fn save(&self) -> Result<()> {
        let Some(entries) = &self.entries else {
            return Ok(());
        };
        if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let tmp = self.path.with_extension("tmp");
        {
            let mut out = fs::File::create(&tmp)?;
            out.write_all(render(entries.values()).as_bytes())?;
        }
        fs::rename(tmp, &self.path)?;
        Ok(())
    }
}

fn render<'a>(sets: impl Iterator<Item = &'a DifferenceSet>) -> String {
    let mut s = String::new();
    for set in sets {
        let elems: Vec<String> = set.elements().iter().map(ToString::to_string).collect();
        s.push_str(&format!("{} {} {}\n", set.p(), set.k(), elems.join(",")));
    }
    s
}

fn parse(path: &Path, text: &str) -> Result<BTreeMap<usize, DifferenceSet>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Cache {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [p, k, elems] = fields[..] else {
            return Err(err(format!("expected 3 fields, found {}", fields.len())));
        };
        let p: usize = p.parse().map_err(|_| err(format!("bad p {p:?}")))?;
        let k: usize = k.parse().map_err(|_| err(format!("bad k {k:?}")))?;
        let elems = elems
            .split(',')
            .map(|a| a.parse::<usize>().map_err(|_| err(format!("bad element {a:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if elems.len() != k {
            return Err(err(format!("k={k} but {} elements listed", elems.len())));
        }
        let set = DifferenceSet::new(p, elems).map_err(|e| err(e.to_string()))?;
        if !set.verify() {
            return Err(err(format!("{set} does not cover every difference mod {p}")));
        }
        if out.insert(p, set).is_some() {
            return Err(err(format!("duplicate record for p={p}")));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn search_then_hit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sets.txt");
        let mut cache = DiffsetCache::new(&path);
        assert_eq!(cache.get_or_search(13, None).unwrap().k(), 4);
        cache.get_or_search(7, None).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "7 3 0,1,3\n13 4 0,1,3,9\n");

        let mut reopened = DiffsetCache::new(&path);
        assert_eq!(reopened.get(7).unwrap().unwrap().elements(), &[0, 1, 3]);
        assert!(reopened.get(8).unwrap().is_none());
    }

    #[test]
    fn corrupt_records_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        for bad in [
            "7 3 0,1,2\n",   // fails coverage
            "7 2 0,1,3\n",   // wrong k
            "7 3 0,1,9\n",   // out of range
            "7 3 0,1\n3\n",  // field count
            "7 x 0,1,3\n",   // not a number
            "7 3 0,1,3\n7 3 0,1,3\n",
        ] {
            let path = dir.path().join("bad.txt");
            fs::write(&path, bad).unwrap();
            let mut cache = DiffsetCache::new(&path);
            assert!(matches!(cache.get(7), Err(Error::Cache { .. })), "{bad:?}");
        }
    }

    #[test]
    fn rejects_invalid_insert() {
        let dir = tempfile::tempdir().unwrap();
        let mut cache = DiffsetCache::new(dir.path().join("c.txt"));
        let bad = DifferenceSet::new(5, vec![0, 1]).unwrap();
        assert!(cache.insert(bad).is_err());
    }
}
