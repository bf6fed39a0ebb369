use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::rng::SeededRng;

const MANIFEST_VERSION: u32 = 1;

/// Ordered genre names; a genre's index is its position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenreRegistry {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl GenreRegistry {
    pub fn new(names: Vec<String>) -> Result<Self, DatasetError> {
        if names.len() < 2 {
            return Err(DatasetError::InvalidManifest("at least two genres required".into()));
        }
        let mut index = HashMap::new();
        for (i, n) in names.iter().enumerate() {
            if index.insert(n.clone(), i as u32).is_some() {
                return Err(DatasetError::InvalidManifest(format!("duplicate genre {n:?}")));
            }
        }
        Ok(Self { names, index })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, index: u32) -> Option<&str> {
        self.names.get(index as usize).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub genre: u32,
    pub source_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub registry: GenreRegistry,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Serialize, Deserialize)]
struct ManifestJson {
    version: u32,
    genres: Vec<String>,
    entries: Vec<EntryJson>,
}

#[derive(Serialize, Deserialize)]
struct EntryJson {
    path: String,
    genre: String,
    source_id: String,
}

impl Manifest {
    pub fn new(registry: GenreRegistry, entries: Vec<ManifestEntry>) -> Result<Self, DatasetError> {
        let mut seen = std::collections::HashSet::new();
        for e in &entries {
            if e.genre as usize >= registry.len() {
                return Err(DatasetError::InvalidManifest(format!(
                    "entry {:?} has genre index {}",
                    e.path, e.genre
                )));
            }
            if !seen.insert(&e.path) {
                return Err(DatasetError::InvalidManifest(format!("duplicate path {:?}", e.path)));
            }
        }
        Ok(Self { registry, entries })
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.registry.len()];
        for e in &self.entries {
            c[e.genre as usize] += 1;
        }
        c
    }

    pub fn to_json(&self) -> Result<String, DatasetError> {
        let doc = ManifestJson {
            version: MANIFEST_VERSION,
            genres: self.registry.names().to_vec(),
            entries: self
                .entries
                .iter()
                .map(|e| EntryJson {
                    path: e.path.to_string_lossy().into_owned(),
                    genre: self.registry.names()[e.genre as usize].clone(),
                    source_id: e.source_id.clone(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Parses manifest JSON; relative entry paths are joined onto `base_dir`.
    pub fn from_json(text: &str, base_dir: Option<&Path>) -> Result<Self, DatasetError> {
        let doc: ManifestJson = serde_json::from_str(text)?;
        if doc.version != MANIFEST_VERSION {
            return Err(DatasetError::InvalidManifest(format!(
                "unsupported manifest version {}",
                doc.version
            )));
        }
        let registry = GenreRegistry::new(doc.genres)?;
        let entries = doc
            .entries
            .into_iter()
            .map(|e| {
                let genre = registry
                    .index_of(&e.genre)
                    .ok_or_else(|| DatasetError::InvalidManifest(format!("unknown genre {:?}", e.genre)))?;
                let mut path = PathBuf::from(e.path);
                if let (false, Some(base)) = (path.is_absolute(), base_dir) {
                    path = base.join(path);
                }
                Ok(ManifestEntry {
                    path,
                    genre,
                    source_id: e.source_id,
                })
            })
            .collect::<Result<Vec<_>, DatasetError>>()?;
        Manifest::new(registry, entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let path = path.as_ref();
        Self::from_json(&fs::read_to_string(path)?, path.parent())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DatasetError> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// Keeps exactly `per_genre` clips from each genre, chosen uniformly without
/// replacement. Survivors keep their original manifest order.
pub fn balance(manifest: &Manifest, per_genre: usize, seed: u64) -> Result<Manifest, DatasetError> {
    let mut rng = SeededRng::new(seed);
    let mut keep = vec![false; manifest.entries.len()];
    for (g, name) in manifest.registry.names().iter().enumerate() {
        let mut members: Vec<usize> = manifest
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.genre as usize == g)
            .map(|(i, _)| i)
            .collect();
        if members.len() < per_genre {
            return Err(DatasetError::DeficientGenre {
                genre: name.clone(),
                count: members.len(),
                required: per_genre,
            });
        }
        rng.shuffle(&mut members);
        for &i in &members[..per_genre] {
            keep[i] = true;
        }
    }
    let entries = manifest
        .entries
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(e, _)| e.clone())
        .collect();
    Manifest::new(manifest.registry.clone(), entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn registry(n: usize) -> GenreRegistry {
        GenreRegistry::new((0..n).map(|i| format!("g{i}")).collect()).unwrap()
    }

    fn manifest(counts: &[usize]) -> Manifest {
        let mut entries = Vec::new();
        for (g, &c) in counts.iter().enumerate() {
            for i in 0..c {
                entries.push(ManifestEntry {
                    path: PathBuf::from(format!("g{g}/{i}.wav")),
                    genre: g as u32,
                    source_id: format!("g{g}-{i}"),
                });
            }
        }
        Manifest::new(registry(counts.len()), entries).unwrap()
    }

    #[test]
    fn registry_rejects_duplicates_and_singletons() {
        assert!(GenreRegistry::new(vec!["a".into(), "a".into()]).is_err());
        assert!(GenreRegistry::new(vec!["a".into()]).is_err());
        let r = registry(3);
        assert_eq!(r.index_of("g2"), Some(2));
        assert_eq!(r.name(1), Some("g1"));
    }

    #[test]
    fn balance_at_full_corpus_scale() {
        let m = manifest(&[300, 150, 120, 110, 200, 115, 500, 130]);
        let b = balance(&m, 110, 1).unwrap();
        assert_eq!(b.entries.len(), 880);
        assert!(b.counts().iter().all(|&c| c == 110));
    }

    #[test]
    fn balance_keeps_all_of_minimum_genre() {
        let m = manifest(&[5, 3]);
        let b = balance(&m, 3, 9).unwrap();
        let g1: Vec<_> = b.entries.iter().filter(|e| e.genre == 1).collect();
        assert_eq!(g1.len(), 3);
    }

    #[test]
    fn balance_is_deterministic_and_reports_deficit() {
        let m = manifest(&[20, 20, 20]);
        assert_eq!(balance(&m, 7, 4).unwrap(), balance(&m, 7, 4).unwrap());
        assert_ne!(balance(&m, 7, 4).unwrap(), balance(&m, 7, 5).unwrap());
        match balance(&manifest(&[4, 2]), 3, 0) {
            Err(DatasetError::DeficientGenre { genre, count, .. }) => {
                assert_eq!((genre.as_str(), count), ("g1", 2));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn json_round_trip_resolves_relative_paths() {
        let m = manifest(&[2, 1]);
        let text = m.to_json().unwrap();
        assert!(text.contains("\"version\": 1"));
        let back = Manifest::from_json(&text, Some(Path::new("/data"))).unwrap();
        assert_eq!(back.entries[0].path, PathBuf::from("/data/g0/0.wav"));
        assert_eq!(back.registry, m.registry);
        let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        doc["entries"][0]["genre"] = "zz".into();
        assert!(Manifest::from_json(&doc.to_string(), None).is_err());
    }

    #[test]
    fn manifest_rejects_duplicate_paths() {
        let e = ManifestEntry {
            path: "a.wav".into(),
            genre: 0,
            source_id: "a".into(),
        };
        assert!(Manifest::new(registry(2), vec![e.clone(), e]).is_err());
    }
}
