//! Class registry, manifest handling and count bookkeeping for the football
//! keyword corpus.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One registry entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ClassInfo {
    pub name: &'static str,
    /// ASCII directory name.
    pub slug: &'static str,
    pub ipa: &'static str,
    /// Reference counts per split; `None` where the class has no samples in
    /// that split.
    pub train: Option<u32>,
    pub test: u32,
    pub css: u32,
}

const fn kw(name: &'static str, slug: &'static str, ipa: &'static str, train: u32, css: u32) -> ClassInfo {
    ClassInfo {
        name,
        slug,
        ipa,
        train: Some(train),
        test: 300,
        css,
    }
}

/// The 18 keywords followed by `Silence` and `Unknown`.
pub const CLASSES: [ClassInfo; 20] = [
    kw("Corner", "corner", "/korner/", 1322, 22),
    kw("Foul", "foul", "/xatâ/", 1369, 3),
    kw("Free kick", "free_kick", "/kâʃteh/", 1506, 80),
    kw("Goal", "goal", "/gol/", 1370, 53),
    kw("Goalposts", "goalposts", "/tirak/", 1376, 91),
    kw("Hand", "hand", "/hand/", 1588, 53),
    kw("Laying off", "laying_off", "/exrâj/", 1354, 72),
    kw("Mulct", "mulct", "/jarimeh/", 1533, 12),
    kw("Notice", "notice", "/extâr/", 1311, 39),
    kw("Offside", "offside", "/âfsajd/", 1268, 56),
    kw("Out", "out", "/ot/", 1323, 56),
    kw("Penalty", "penalty", "/penâlti/", 1375, 91),
    kw("Red card", "red_card", "/kârte qermez/", 1219, 30),
    kw("Strike", "strike", "/zarbeh/", 1358, 93),
    kw("Substitute", "substitute", "/ta?viz/", 1298, 81),
    kw("Tackle", "tackle", "/takl/", 1245, 34),
    kw("Throw-in", "throw_in", "/partâb/", 1331, 73),
    kw("Yellow card", "yellow_card", "/kârte zard/", 1289, 23),
    ClassInfo {
        name: "Silence",
        slug: "silence",
        ipa: "-",
        train: None,
        test: 300,
        css: 20,
    },
    ClassInfo {
        name: "Unknown",
        slug: "unknown",
        ipa: "-",
        train: None,
        test: 300,
        css: 20,
    },
];

pub const NUM_KEYWORDS: usize = 18;
pub const SILENCE: ClassId = ClassId(18);
pub const UNKNOWN: ClassId = ClassId(19);

/// Index into [`CLASSES`]. Only constructible for the 20 registered classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ClassId(usize);

impl ClassId {
    pub fn new(index: usize) -> Result<Self> {
        if index < CLASSES.len() {
            Ok(Self(index))
        } else {
            Err(Error::UnknownClass(index.to_string()))
        }
    }

    pub fn index(self) -> usize {
        self.0
    }

    pub fn info(self) -> &'static ClassInfo {
        &CLASSES[self.0]
    }

    pub fn is_keyword(self) -> bool {
        self.0 < NUM_KEYWORDS
    }

    pub fn all() -> impl Iterator<Item = ClassId> {
        (0..CLASSES.len()).map(ClassId)
    }
}

impl FromStr for ClassId {
    type Err = Error;

    /// Accepts the display name or the directory slug, case-insensitively.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        CLASSES
            .iter()
            .position(|c| c.name.eq_ignore_ascii_case(t) || c.slug.eq_ignore_ascii_case(t))
            .map(ClassId)
            .ok_or_else(|| Error::UnknownClass(t.to_string()))
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.info().name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    Css,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Test, Split::Css];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Css => "css",
        }
    }

    /// Reference count for `class` in this split (0 where none exist).
    pub fn reference_count(self, class: ClassId) -> u32 {
        let c = class.info();
        match self {
            Split::Train => c.train.unwrap_or(0),
            Split::Test => c.test,
            Split::Css => c.css,
        }
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "css" => Ok(Split::Css),
            other => Err(format!("invalid split '{other}'")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestRow {
    pub path: String,
    pub class: ClassId,
    pub split: Split,
    pub speaker: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
    /// Whether the source carried a speaker column.
    pub has_speaker: bool,
}

impl Manifest {
    /// Parses CSV text with header `path,class,split[,speaker]`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let headers = rdr.headers()?.clone();
        let cols: Vec<&str> = headers.iter().map(str::trim).collect();
        let has_speaker = match cols.as_slice() {
            ["path", "class", "split"] => false,
            ["path", "class", "split", "speaker"] => true,
            _ => {
                return Err(Error::Manifest {
                    row: 1,
                    msg: format!("header must be path,class,split[,speaker], found {}", cols.join(",")),
                })
            }
        };
        let mut rows = Vec::new();
        let mut seen = HashSet::new();
        for (i, rec) in rdr.records().enumerate() {
            // header is line 1
            let line = i + 2;
            let rec = rec.map_err(|e| Error::Manifest {
                row: line,
                msg: e.to_string(),
            })?;
            let err = |msg: String| Error::Manifest { row: line, msg };
            let path = rec.get(0).unwrap_or("").trim().to_string();
            if path.is_empty() {
                return Err(err("empty path".into()));
            }
            let class: ClassId = rec
                .get(1)
                .unwrap_or("")
                .parse()
                .map_err(|e: Error| err(e.to_string()))?;
            let split: Split = rec.get(2).unwrap_or("").parse().map_err(err)?;
            let speaker = if has_speaker {
                rec.get(3).map(str::trim).filter(|s| !s.is_empty()).map(String::from)
            } else {
                None
            };
            if !seen.insert(path.clone()) {
                return Err(err(format!("duplicate path {path}")));
            }
            rows.push(ManifestRow {
                path,
                class,
                split,
                speaker,
            });
        }
        Ok(Self { rows, has_speaker })
    }

    /// Canonical CSV text.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let header: &[&str] = if self.has_speaker {
            &["path", "class", "split", "speaker"]
        } else {
            &["path", "class", "split"]
        };
        w.write_record(header).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![r.path.as_str(), r.class.info().name, r.split.as_str()];
            if self.has_speaker {
                rec.push(r.speaker.as_deref().unwrap_or(""));
            }
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Paths under `root` that do not exist.
    pub fn missing_files(&self, root: &Path) -> Vec<String> {
        self.rows
            .iter()
            .filter(|r| !root.join(&r.path).exists())
            .map(|r| r.path.clone())
            .collect()
    }

    /// A manifest with exactly the reference counts, laid out as
    /// `<split>/<class slug>/<index>.wav`.
    pub fn from_reference() -> Self {
        let mut rows = Vec::new();
        for split in Split::ALL {
            for class in ClassId::all() {
                for i in 0..split.reference_count(class) {
                    rows.push(ManifestRow {
                        path: format!("{}/{}/{:05}.wav", split.as_str(), class.info().slug, i),
                        class,
                        split,
                        speaker: None,
                    });
                }
            }
        }
        Self { rows, has_speaker: false }
    }

    /// Per-class counts for one split, indexed like [`CLASSES`].
    pub fn counts(&self, split: Split) -> [u32; 20] {
        let mut c = [0u32; 20];
        for r in self.rows.iter().filter(|r| r.split == split) {
            c[r.class.index()] += 1;
        }
        c
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Manifest::parse(&text)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassCount {
    pub class: &'static str,
    pub actual: u32,
    pub reference: u32,
    /// `reference − actual`.
    pub delta: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplitCounts {
    pub split: Split,
    pub total: u32,
    pub reference_total: u32,
    pub delta: i64,
    pub classes: Vec<ClassCount>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountReport {
    pub splits: Vec<SplitCounts>,
}

impl CountReport {
    pub fn all_zero(&self) -> bool {
        self.splits.iter().all(|s| s.delta == 0 && s.classes.iter().all(|c| c.delta == 0))
    }

    pub fn split(&self, split: Split) -> &SplitCounts {
        self.splits.iter().find(|s| s.split == split).expect("every split reported")
    }
}

/// Counts per class and split against the reference table. Never fails.
pub fn validate_counts(manifest: &Manifest) -> CountReport {
    let splits = Split::ALL
        .iter()
        .map(|&split| {
            let actual = manifest.counts(split);
            let classes: Vec<ClassCount> = ClassId::all()
                .map(|c| {
                    let reference = split.reference_count(c);
                    ClassCount {
                        class: c.info().name,
                        actual: actual[c.index()],
                        reference,
                        delta: i64::from(reference) - i64::from(actual[c.index()]),
                    }
                })
                .collect();
            let total = classes.iter().map(|c| c.actual).sum();
            let reference_total = classes.iter().map(|c| c.reference).sum();
            SplitCounts {
                split,
                total,
                reference_total,
                delta: i64::from(reference_total) - i64::from(total),
                classes,
            }
        })
        .collect();
    CountReport { splits }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpeakerClassReport {
    pub class: &'static str,
    pub test_samples: u32,
    /// Test samples whose speaker never appears in train.
    pub unseen_speaker_samples: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SpeakerReport {
    NotEvaluable { reason: String },
    Evaluated { classes: Vec<SpeakerClassReport> },
}

/// Per class, how many test samples come from speakers absent from train.
pub fn speaker_disjointness(manifest: &Manifest) -> SpeakerReport {
    if !manifest.has_speaker {
        return SpeakerReport::NotEvaluable {
            reason: "manifest has no speaker column".into(),
        };
    }
    let train: BTreeSet<&str> = manifest
        .rows
        .iter()
        .filter(|r| r.split == Split::Train)
        .filter_map(|r| r.speaker.as_deref())
        .collect();
    let mut per: BTreeMap<ClassId, (u32, u32)> = ClassId::all().map(|c| (c, (0, 0))).collect();
    for r in manifest.rows.iter().filter(|r| r.split == Split::Test) {
        let e = per.get_mut(&r.class).expect("registered class");
        e.0 += 1;
        // rows without a speaker id cannot be shown to be unseen
        if r.speaker.as_deref().is_some_and(|s| !train.contains(s)) {
            e.1 += 1;
        }
    }
    SpeakerReport::Evaluated {
        classes: per
            .into_iter()
            .map(|(c, (t, u))| SpeakerClassReport {
                class: c.info().name,
                test_samples: t,
                unseen_speaker_samples: u,
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_shape() {
        assert_eq!(CLASSES.len(), 20);
        let names: HashSet<_> = CLASSES.iter().map(|c| c.name).collect();
        assert_eq!(names.len(), 20);
        assert_eq!(SILENCE.info().name, "Silence");
        assert_eq!(UNKNOWN.info().name, "Unknown");
        assert!(ClassId::new(20).is_err());
    }

    #[test]
    fn reference_totals() {
        let sum = |s: Split| ClassId::all().map(|c| s.reference_count(c)).sum::<u32>();
        assert_eq!(sum(Split::Train), 24_435);
        assert_eq!(sum(Split::Test), 6_000);
        assert_eq!(sum(Split::Css), 1_002);
    }

    #[test]
    fn parse_rows() {
        let m = Manifest::parse("path,class,split\ncorner/0001.wav,Corner,train\n").unwrap();
        assert_eq!(m.rows[0].class, "Corner".parse().unwrap());
        assert_eq!(m.rows[0].split, Split::Train);
        assert!(!m.has_speaker);
    }

    #[test]
    fn unknown_class_names_row() {
        let e = Manifest::parse("path,class,split\na.wav,Corner,train\nb.wav,Referee,test\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("row 3") && msg.contains("Referee"), "{msg}");
    }

    #[test]
    fn duplicate_path_rejected() {
        let e = Manifest::parse("path,class,split\na.wav,Corner,train\na.wav,Corner,test\n");
        assert!(matches!(e, Err(Error::Manifest { row: 3, .. })));
    }

    #[test]
    fn bad_header_and_split() {
        assert!(Manifest::parse("file,label\n").is_err());
        assert!(Manifest::parse("path,class,split\na.wav,Goal,dev\n").is_err());
    }

    #[test]
    fn reference_manifest_validates_clean() {
        let r = validate_counts(&Manifest::from_reference());
        assert!(r.all_zero());
        assert_eq!(r.split(Split::Train).total, 24_435);
        assert!(r.split(Split::Test).classes.iter().all(|c| c.actual == 300));
    }

    #[test]
    fn empty_manifest_deltas_equal_reference() {
        let r = validate_counts(&Manifest::default());
        for s in &r.splits {
            assert!(s.classes.iter().all(|c| c.delta == i64::from(c.reference)));
        }
    }

    #[test]
    fn speaker_report() {
        let m = Manifest::parse(
            "path,class,split,speaker\n\
             a.wav,Goal,train,s1\n\
             b.wav,Goal,test,s1\n\
             c.wav,Goal,test,s2\n",
        )
        .unwrap();
        match speaker_disjointness(&m) {
            SpeakerReport::Evaluated { classes } => {
                let goal = classes.iter().find(|c| c.class == "Goal").unwrap();
                assert_eq!((goal.test_samples, goal.unseen_speaker_samples), (2, 1));
            }
            other => panic!("{other:?}"),
        }
        let no = Manifest::parse("path,class,split\na.wav,Goal,test\n").unwrap();
        assert!(matches!(speaker_disjointness(&no), SpeakerReport::NotEvaluable { .. }));
    }
}
