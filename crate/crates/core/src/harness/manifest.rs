//! Line-oriented corpus manifest.
//!
//! Each non-blank line is `<path>\t<keyword|->\t<train|test>`. Lines
//! starting with `#` are comments, except `# keywords: a b c`, which
//! declares the keyword list and its order. Without the directive the
//! keywords are the train labels in order of first appearance.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    /// `None` for negative clips.
    pub keyword: Option<String>,
    pub split: Split,
    pub line: usize,
}

impl ManifestEntry {
    pub fn label(&self) -> &str {
        self.keyword.as_deref().unwrap_or(NEGATIVE_LABEL)
    }
}

pub const NEGATIVE_LABEL: &str = "-";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub keywords: Vec<String>,
    pub entries: Vec<ManifestEntry>,
}

const DIRECTIVE: &str = "keywords:";

impl Manifest {
    /// Parses manifest text; relative paths are resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut declared: Option<Vec<String>> = None;
        let mut entries = Vec::new();
        let mut seen_paths = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |detail: String| Error::Manifest { line, detail };
            let trimmed = raw.trim_end_matches('\r');
            if trimmed.trim().is_empty() {
                continue;
            }
            if let Some(comment) = trimmed.trim_start().strip_prefix('#') {
                if let Some(list) = comment.trim().strip_prefix(DIRECTIVE) {
                    if declared.is_some() {
                        return Err(err("keyword list declared twice".into()));
                    }
                    let words: Vec<String> = list.split_whitespace().map(str::to_string).collect();
                    if words.is_empty() {
                        return Err(err("empty keyword list".into()));
                    }
                    let mut uniq = HashSet::new();
                    if let Some(dup) = words.iter().find(|w| !uniq.insert(w.as_str())) {
                        return Err(err(format!("keyword `{dup}` declared twice")));
                    }
                    if words.iter().any(|w| w == NEGATIVE_LABEL) {
                        return Err(err("`-` is reserved for negative clips".into()));
                    }
                    declared = Some(words);
                }
                continue;
            }
            let fields: Vec<&str> = trimmed.split('\t').collect();
            if fields.len() != 3 {
                return Err(err(format!("expected 3 tab-separated fields, got {}", fields.len())));
            }
            let (path, label, split) = (fields[0].trim(), fields[1].trim(), fields[2].trim());
            if path.is_empty() {
                return Err(err("empty path".into()));
            }
            if label.is_empty() {
                return Err(err("empty label (use `-` for negative clips)".into()));
            }
            let split = match split {
                "train" => Split::Train,
                "test" => Split::Test,
                other => return Err(err(format!("split must be `train` or `test`, got `{other}`"))),
            };
            let path = base_dir.join(path);
            if !seen_paths.insert(path.clone()) {
                return Err(err(format!("duplicate path {}", path.display())));
            }
            entries.push(ManifestEntry {
                path,
                keyword: (label != NEGATIVE_LABEL).then(|| label.to_string()),
                split,
                line,
            });
        }

        let keywords = match declared {
            Some(words) => {
                if let Some(e) = entries
                    .iter()
                    .find(|e| e.keyword.as_ref().is_some_and(|k| !words.contains(k)))
                {
                    return Err(Error::Manifest {
                        line: e.line,
                        detail: format!("keyword `{}` is not in the declared list", e.label()),
                    });
                }
                words
            }
            None => {
                let mut words: Vec<String> = Vec::new();
                for e in &entries {
                    if let (Some(k), Split::Train) = (&e.keyword, e.split) {
                        if !words.contains(k) {
                            words.push(k.clone());
                        }
                    }
                }
                if let Some(e) = entries
                    .iter()
                    .find(|e| e.keyword.as_ref().is_some_and(|k| !words.contains(k)))
                {
                    return Err(Error::Manifest {
                        line: e.line,
                        detail: format!("keyword `{}` has no train clips", e.label()),
                    });
                }
                words
            }
        };
        Ok(Manifest { keywords, entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Manifest::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// Checks that every keyword has at least one train clip.
    pub fn check_trainable(&self) -> Result<()> {
        if self.keywords.is_empty() {
            return Err(Error::usage("manifest declares no keywords"));
        }
        for k in &self.keywords {
            if !self.split(Split::Train).any(|e| e.keyword.as_ref() == Some(k)) {
                return Err(Error::usage(format!("keyword `{k}` has no train clips")));
            }
        }
        Ok(())
    }

    /// Writes the manifest back out with paths relative to `base_dir` where possible.
    pub fn to_text(&self, base_dir: &Path) -> String {
        let mut out = String::new();
        if !self.keywords.is_empty() {
            out = format!("# {DIRECTIVE} {}\n", self.keywords.join(" "));
        }
        for e in &self.entries {
            let p = e.path.strip_prefix(base_dir).unwrap_or(&e.path);
            out.push_str(&format!("{}\t{}\t{}\n", p.display(), e.label(), e.split.name()));
        }
        out
    }
}
