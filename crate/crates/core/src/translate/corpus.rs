//! Bilingual corpus preparation: load line-aligned parallel files,
//! drop exact duplicates, shuffle with a documented PRNG, and split into
//! train/valid/test deterministically.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// One aligned sentence pair with its source-file tag.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CorpusPair {
    pub source: String,
    pub target: String,
    /// File stem the pair came from, e.g. `identic` or `opensubtitles`.
    pub origin: String,
}

/// Train/valid/test fractions; must be positive and sum to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn new(train: f64, valid: f64, test: f64) -> Result<Self, CorpusError> {
        let ratios = Self { train, valid, test };
        if [train, valid, test].iter().any(|r| *r <= 0.0) {
            return Err(CorpusError::BadRatios(
                "every ratio must be positive".into(),
            ));
        }
        if (train + valid + test - 1.0).abs() > 1e-9 {
            return Err(CorpusError::BadRatios(format!(
                "ratios sum to {}, expected 1",
                train + valid + test
            )));
        }
        Ok(ratios)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSplits {
    pub train: Vec<CorpusPair>,
    pub valid: Vec<CorpusPair>,
    pub test: Vec<CorpusPair>,
}

/// SplitMix64: the documented PRNG behind the corpus shuffle, so splits
/// are reproducible from the seed alone in any implementation.
///
/// state += 0x9E3779B97F4A7C15; z = state;
/// z = (z ^ z>>30) * 0xBF58476D1CE4E5B9;
/// z = (z ^ z>>27) * 0x94D049BB133111EB;
/// output z ^ z>>31.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

/// Fisher-Yates with `j = next_u64() mod (i+1)`, iterating i downward.
pub fn shuffle<T>(items: &mut [T], rng: &mut SplitMix64) {
    for i in (1..items.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        items.swap(i, j);
    }
}

/// Merge, dedupe, shuffle and split.
///
/// Exact `(source, target)` duplicates collapse to their first
/// occurrence. Valid and test take `floor(ratio * N)` pairs each; the
/// remainder stays in train. Fully deterministic given the seed.
pub fn prepare_corpus(pairs: Vec<CorpusPair>, seed: u64, ratios: SplitRatios) -> CorpusSplits {
    let mut seen: HashSet<(String, String)> = HashSet::new();
    let mut unique: Vec<CorpusPair> = Vec::with_capacity(pairs.len());
    for pair in pairs {
        if seen.insert((pair.source.clone(), pair.target.clone())) {
            unique.push(pair);
        }
    }

    let mut rng = SplitMix64::new(seed);
    shuffle(&mut unique, &mut rng);

    let n = unique.len();
    let n_valid = (ratios.valid * n as f64).floor() as usize;
    let n_test = (ratios.test * n as f64).floor() as usize;
    let n_train = n - n_valid - n_test;

    let mut iter = unique.into_iter();
    let train: Vec<CorpusPair> = iter.by_ref().take(n_train).collect();
    let valid: Vec<CorpusPair> = iter.by_ref().take(n_valid).collect();
    let test: Vec<CorpusPair> = iter.collect();
    CorpusSplits { train, valid, test }
}

/// Load parallel corpus inputs.
///
/// Files ending in `.tsv` hold `source<TAB>target` lines; anything else
/// must come as consecutive (source, target) file pairs, line-aligned.
/// Pairs with an empty side after trimming are dropped. Unequal line
/// counts are an error naming both files.
pub fn load_corpus_inputs(inputs: &[PathBuf]) -> Result<Vec<CorpusPair>, CorpusError> {
    let mut pairs = Vec::new();
    let mut queue: Vec<&PathBuf> = inputs.iter().collect();
    queue.reverse();
    while let Some(path) = queue.pop() {
        if path.extension().is_some_and(|e| e == "tsv") {
            load_tsv(path, &mut pairs)?;
        } else {
            let target = queue.pop().ok_or_else(|| {
                CorpusError::BadInputs(format!(
                    "{} has no matching target file (non-TSV inputs come in source/target pairs)",
                    path.display()
                ))
            })?;
            load_file_pair(path, target, &mut pairs)?;
        }
    }
    Ok(pairs)
}

fn origin_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn load_tsv(path: &Path, pairs: &mut Vec<CorpusPair>) -> Result<(), CorpusError> {
    let origin = origin_of(path);
    let text = std::fs::read_to_string(path)?;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (src, tgt) = line.split_once('\t').ok_or_else(|| {
            CorpusError::BadInputs(format!(
                "{}:{}: expected 'source<TAB>target'",
                path.display(),
                lineno + 1
            ))
        })?;
        push_pair(pairs, src, tgt, &origin);
    }
    Ok(())
}

fn load_file_pair(
    source_path: &Path,
    target_path: &Path,
    pairs: &mut Vec<CorpusPair>,
) -> Result<(), CorpusError> {
    let src_text = std::fs::read_to_string(source_path)?;
    let tgt_text = std::fs::read_to_string(target_path)?;
    let src_lines: Vec<&str> = src_text.lines().collect();
    let tgt_lines: Vec<&str> = tgt_text.lines().collect();
    if src_lines.len() != tgt_lines.len() {
        return Err(CorpusError::Misaligned {
            left: format!("{} ({} lines)", source_path.display(), src_lines.len()),
            right: format!("{} ({} lines)", target_path.display(), tgt_lines.len()),
        });
    }
    let origin = origin_of(source_path);
    for (src, tgt) in src_lines.iter().zip(&tgt_lines) {
        push_pair(pairs, src, tgt, &origin);
    }
    Ok(())
}

fn push_pair(pairs: &mut Vec<CorpusPair>, src: &str, tgt: &str, origin: &str) {
    let source = src.trim();
    let target = tgt.trim();
    if source.is_empty() || target.is_empty() {
        return; // both sides must be non-empty after trimming
    }
    pairs.push(CorpusPair {
        source: source.to_string(),
        target: target.to_string(),
        origin: origin.to_string(),
    });
}

/// Write `train.id/train.en/valid.id/valid.en/test.id/test.en`.
pub fn write_splits(dir: &Path, splits: &CorpusSplits) -> Result<(), CorpusError> {
    std::fs::create_dir_all(dir)?;
    for (name, split) in [
        ("train", &splits.train),
        ("valid", &splits.valid),
        ("test", &splits.test),
    ] {
        let mut src = String::new();
        let mut tgt = String::new();
        for pair in split {
            src.push_str(&pair.source);
            src.push('\n');
            tgt.push_str(&pair.target);
            tgt.push('\n');
        }
        std::fs::write(dir.join(format!("{name}.id")), src)?;
        std::fs::write(dir.join(format!("{name}.en")), tgt)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(s: &str, t: &str) -> CorpusPair {
        CorpusPair {
            source: s.to_string(),
            target: t.to_string(),
            origin: "test".into(),
        }
    }

    fn numbered(n: usize) -> Vec<CorpusPair> {
        (0..n)
            .map(|i| pair(&format!("src {i}"), &format!("tgt {i}")))
            .collect()
    }

    #[test]
    fn ratios_validated() {
        assert!(SplitRatios::new(0.8, 0.1, 0.1).is_ok());
        assert!(SplitRatios::new(0.8, 0.2, 0.1).is_err());
        assert!(SplitRatios::new(1.0, 0.0, 0.0).is_err());
        assert!(SplitRatios::new(0.5, 0.6, -0.1).is_err());
    }

    #[test]
    fn ten_pairs_split_eight_one_one() {
        let ratios = SplitRatios::new(0.8, 0.1, 0.1).unwrap();
        for seed in [0u64, 1, 42, u64::MAX] {
            let splits = prepare_corpus(numbered(10), seed, ratios);
            assert_eq!(splits.train.len(), 8);
            assert_eq!(splits.valid.len(), 1);
            assert_eq!(splits.test.len(), 1);
        }
    }

    #[test]
    fn same_seed_same_split() {
        let ratios = SplitRatios::new(0.8, 0.1, 0.1).unwrap();
        let a = prepare_corpus(numbered(50), 7, ratios);
        let b = prepare_corpus(numbered(50), 7, ratios);
        assert_eq!(a, b);
        let c = prepare_corpus(numbered(50), 8, ratios);
        assert_ne!(a, c, "a different seed should reshuffle 50 pairs");
    }

    #[test]
    fn duplicates_collapse_before_split() {
        // 12 pairs, 2 exact duplicates -> 10 unique -> 8/1/1.
        let mut pairs = numbered(10);
        pairs.push(pair("src 3", "tgt 3"));
        pairs.push(pair("src 7", "tgt 7"));
        assert_eq!(pairs.len(), 12);
        let splits = prepare_corpus(pairs, 5, SplitRatios::new(0.8, 0.1, 0.1).unwrap());
        assert_eq!(
            splits.train.len() + splits.valid.len() + splits.test.len(),
            10
        );
        assert_eq!(splits.train.len(), 8);
    }

    #[test]
    fn splits_are_disjoint_and_union_complete() {
        let input = numbered(100);
        let splits = prepare_corpus(input.clone(), 11, SplitRatios::new(0.8, 0.1, 0.1).unwrap());
        let mut all: Vec<&CorpusPair> = splits
            .train
            .iter()
            .chain(&splits.valid)
            .chain(&splits.test)
            .collect();
        assert_eq!(all.len(), 100);
        all.sort_by_key(|p| p.source.clone());
        all.dedup_by_key(|p| p.source.clone());
        assert_eq!(all.len(), 100, "no pair may appear in two splits");
        let sources: HashSet<&str> = all.iter().map(|p| p.source.as_str()).collect();
        for p in &input {
            assert!(sources.contains(p.source.as_str()));
        }
    }

    #[test]
    fn parallel_file_loading_and_misalignment() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("identic.id");
        let tgt = dir.path().join("identic.en");
        std::fs::write(&src, "halo\n\nselamat pagi\n").unwrap();
        std::fs::write(&tgt, "hello\n\ngood morning\n").unwrap();
        let pairs = load_corpus_inputs(&[src.clone(), tgt.clone()]).unwrap();
        // The blank line drops out.
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].origin, "identic");

        std::fs::write(&tgt, "hello\n").unwrap();
        let err = load_corpus_inputs(&[src, tgt]).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("identic.id") && msg.contains("identic.en"),
            "{msg}"
        );
    }

    #[test]
    fn tsv_loading() {
        let dir = tempfile::tempdir().unwrap();
        let tsv = dir.path().join("opensubtitles.tsv");
        std::fs::write(&tsv, "halo\thello\napa kabar\thow are you\n").unwrap();
        let pairs = load_corpus_inputs(&[tsv]).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[1].target, "how are you");
        assert_eq!(pairs[0].origin, "opensubtitles");
    }

    #[test]
    fn write_splits_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let splits = prepare_corpus(numbered(10), 3, SplitRatios::new(0.8, 0.1, 0.1).unwrap());
        write_splits(dir.path(), &splits).unwrap();
        let train_src = std::fs::read_to_string(dir.path().join("train.id")).unwrap();
        let train_tgt = std::fs::read_to_string(dir.path().join("train.en")).unwrap();
        assert_eq!(train_src.lines().count(), 8);
        assert_eq!(train_tgt.lines().count(), 8);
        for (line, pair) in train_src.lines().zip(&splits.train) {
            assert_eq!(line, pair.source);
        }
    }
}
