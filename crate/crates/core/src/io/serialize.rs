//! Line-oriented text format for trained classifiers and cascades.
//!
//! Each line is a keyword followed by space-separated values. Floats are
//! written with 17 significant digits, so `f64` values round-trip exactly.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::cascade::{Cascade, Stage, StageGoal, StageReport};
use crate::gslda::{LinearModel, ScatterState};
use crate::linalg::SymMat;
use crate::ogslda::{OnlineClassifier, ThresholdCriterion};
use crate::scalar::Real;
use crate::weak::{HaarFeature, HaarKind, Polarity, Stump};

use super::IoError;

pub const FORMAT_VERSION: u32 = 1;
const MODEL_MAGIC: &str = "ogslda-model";
const CASCADE_MAGIC: &str = "ogslda-cascade";

/// Anything a model file can hold.
#[derive(Debug, Clone, PartialEq)]
pub enum Artifact<T> {
    Classifier(OnlineClassifier<T>),
    Cascade(Cascade<T>),
}

fn num<T: Real>(out: &mut String, v: T) {
    let _ = write!(out, " {:.16e}", v.as_f64());
}

fn line<T: Real>(out: &mut String, key: &str, values: &[T]) {
    out.push_str(key);
    for &v in values {
        num(out, v);
    }
    out.push('\n');
}

fn write_classifier_body<T: Real>(out: &mut String, clf: &OnlineClassifier<T>) {
    let m = &clf.model;
    let s = &clf.state;
    let _ = writeln!(out, "criterion {}", m.criterion);
    let _ = writeln!(out, "learners {}", m.dim());
    for l in &m.learners {
        let _ = write!(out, "stump {}", l.feature_id);
        num(out, l.threshold);
        let _ = writeln!(out, " {}", l.polarity.sign());
    }
    line(out, "weights", &m.weights);
    line(out, "threshold", &[m.threshold]);
    line(out, "offset", &[clf.threshold_offset]);
    let _ = writeln!(out, "counts {} {}", s.n1, s.n2);
    line(out, "m1", &s.m1);
    line(out, "m2", &s.m2);
    line(out, "ridge", &s.ridge);
    line(out, "sigma1", s.sigma1.as_row_major());
    line(out, "sigma2", s.sigma2.as_row_major());
    line(out, "sb", s.sb.as_row_major());
    line(out, "sw_inv", s.sw_inv.as_row_major());
    let _ = writeln!(
        out,
        "online {} {} {} {}",
        clf.insert_count, clf.refresh_interval, clf.updates_since_refresh, clf.fallback_count
    );
}

pub fn write_classifier<T: Real>(clf: &OnlineClassifier<T>) -> String {
    let mut out = format!("{MODEL_MAGIC} {FORMAT_VERSION}\nscalar {}\n", T::type_name());
    write_classifier_body(&mut out, clf);
    out
}

/// Writes the cascade with unused features dropped.
pub fn write_cascade<T: Real>(cascade: &Cascade<T>) -> String {
    let c = cascade.compact();
    let mut out = format!("{CASCADE_MAGIC} {FORMAT_VERSION}\nscalar {}\n", T::type_name());
    let _ = writeln!(out, "features {}", c.features.len());
    for f in &c.features {
        let (x, y) = f.anchor();
        let (bw, bh) = f.block();
        let _ = writeln!(out, "haar {} {x} {y} {bw} {bh}", f.kind());
    }
    let _ = writeln!(out, "stages {}", c.stages.len());
    for (i, st) in c.stages.iter().enumerate() {
        let g = st.goal;
        let r = st.report;
        let _ = writeln!(out, "stage {i}");
        let _ = writeln!(out, "goal {:.16e} {:.16e} {}", g.min_detection, g.max_false_positive, g.max_learners);
        let _ = writeln!(
            out,
            "report {} {} {} {:.16e} {:.16e}",
            r.learners, r.positives, r.negatives, r.detection_rate, r.false_positive_rate
        );
        write_classifier_body(&mut out, &st.classifier);
    }
    out
}

/// Tokenized lines with their numbers, blank lines skipped.
struct Lines<'a> {
    source: &'a str,
    lines: Vec<(usize, Vec<&'a str>)>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str, source: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split_whitespace().collect::<Vec<_>>()))
            .filter(|(_, t)| !t.is_empty())
            .collect();
        Self { source, lines, pos: 0 }
    }

    fn err(&self, line: usize, message: impl Into<String>) -> IoError {
        IoError::parse(format!("{}: line {line}", self.source), message)
    }

    /// Values of the next line, which must start with `key`.
    fn expect(&mut self, key: &str) -> Result<(usize, Vec<&'a str>), IoError> {
        let Some((n, tokens)) = self.lines.get(self.pos).cloned() else {
            let last = self.lines.last().map_or(0, |l| l.0);
            return Err(self.err(last + 1, format!("unexpected end of file, expected {key:?}")));
        };
        if tokens[0] != key {
            return Err(self.err(n, format!("expected {key:?}, found {:?}", tokens[0])));
        }
        self.pos += 1;
        Ok((n, tokens[1..].to_vec()))
    }

    fn parse<V: FromStr>(&self, n: usize, token: &str) -> Result<V, IoError> {
        token.parse().map_err(|_| self.err(n, format!("bad value {token:?}")))
    }

    fn scalar<V: FromStr>(&mut self, key: &str) -> Result<V, IoError> {
        let (n, v) = self.expect(key)?;
        if v.len() != 1 {
            return Err(self.err(n, format!("{key} takes one value, found {}", v.len())));
        }
        self.parse(n, v[0])
    }

    fn reals<T: Real>(&mut self, key: &str, len: usize) -> Result<Vec<T>, IoError> {
        let (n, v) = self.expect(key)?;
        if v.len() != len {
            return Err(self.err(n, format!("{key} needs {len} values, found {}", v.len())));
        }
        v.iter().map(|t| self.parse::<f64>(n, t).map(T::lit)).collect()
    }

    fn matrix<T: Real>(&mut self, key: &str, k: usize) -> Result<SymMat<T>, IoError> {
        // Stored entries may differ from their mirror in the last bit; keep them exactly.
        Ok(SymMat::from_raw(k, self.reals(key, k * k)?))
    }

    fn finished(&self) -> Result<(), IoError> {
        match self.lines.get(self.pos) {
            Some((n, t)) => Err(self.err(*n, format!("trailing content {:?}", t[0]))),
            None => Ok(()),
        }
    }
}

fn read_header(lines: &mut Lines<'_>, magic: &str) -> Result<(), IoError> {
    let Some((n, tokens)) = lines.lines.first().cloned() else {
        return Err(lines.err(1, "empty file"));
    };
    if tokens[0] != magic {
        return Err(lines.err(n, format!("not a {magic} file")));
    }
    let found = tokens.get(1).copied().unwrap_or("");
    if found != FORMAT_VERSION.to_string() {
        return Err(IoError::VersionMismatch { expected: FORMAT_VERSION.to_string(), found: found.to_string() });
    }
    lines.pos = 1;
    // The stored precision is informational: values are parsed as f64 first.
    lines.scalar::<String>("scalar")?;
    Ok(())
}

fn read_classifier_body<T: Real>(lines: &mut Lines<'_>) -> Result<OnlineClassifier<T>, IoError> {
    let (n, v) = lines.expect("criterion")?;
    let criterion: ThresholdCriterion = match v.as_slice() {
        [c] => c.parse().map_err(|e: crate::ogslda::ThresholdError| lines.err(n, e.to_string()))?,
        _ => return Err(lines.err(n, "criterion takes one value")),
    };
    let k: usize = lines.scalar("learners")?;
    let mut learners = Vec::with_capacity(k);
    for _ in 0..k {
        let (n, v) = lines.expect("stump")?;
        if v.len() != 3 {
            return Err(lines.err(n, "stump needs feature, threshold and polarity"));
        }
        let polarity =
            Polarity::from_sign(lines.parse(n, v[2])?).ok_or_else(|| lines.err(n, "polarity must be 1 or -1"))?;
        learners.push(Stump::new(lines.parse(n, v[0])?, T::lit(lines.parse(n, v[1])?), polarity));
    }
    let weights = lines.reals("weights", k)?;
    let threshold = lines.reals::<T>("threshold", 1)?[0];
    let offset = lines.reals::<T>("offset", 1)?[0];
    let (n, v) = lines.expect("counts")?;
    if v.len() != 2 {
        return Err(lines.err(n, "counts needs two values"));
    }
    let (n1, n2) = (lines.parse(n, v[0])?, lines.parse(n, v[1])?);
    let state = ScatterState {
        n1,
        n2,
        m1: lines.reals("m1", k)?,
        m2: lines.reals("m2", k)?,
        ridge: lines.reals("ridge", k)?,
        sigma1: lines.matrix("sigma1", k)?,
        sigma2: lines.matrix("sigma2", k)?,
        sb: lines.matrix("sb", k)?,
        sw_inv: lines.matrix("sw_inv", k)?,
    };
    let (n, v) = lines.expect("online")?;
    if v.len() != 4 {
        return Err(lines.err(n, "online needs four counters"));
    }
    let model = LinearModel { learners, weights, threshold, criterion };
    let mut clf = OnlineClassifier::new(model, state).map_err(|e| lines.err(n, e.to_string()))?;
    clf.threshold_offset = offset;
    clf.insert_count = lines.parse(n, v[0])?;
    clf.refresh_interval = lines.parse(n, v[1])?;
    clf.updates_since_refresh = lines.parse(n, v[2])?;
    clf.fallback_count = lines.parse(n, v[3])?;
    Ok(clf)
}

pub fn read_classifier<T: Real>(text: &str, source: &str) -> Result<OnlineClassifier<T>, IoError> {
    let mut lines = Lines::new(text, source);
    read_header(&mut lines, MODEL_MAGIC)?;
    let clf = read_classifier_body(&mut lines)?;
    lines.finished()?;
    Ok(clf)
}

pub fn read_cascade<T: Real>(text: &str, source: &str) -> Result<Cascade<T>, IoError> {
    let mut lines = Lines::new(text, source);
    read_header(&mut lines, CASCADE_MAGIC)?;
    let nf: usize = lines.scalar("features")?;
    let mut features = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (n, v) = lines.expect("haar")?;
        if v.len() != 5 {
            return Err(lines.err(n, "haar needs kind, x, y, block width and block height"));
        }
        let kind = HaarKind::from_str(v[0]).map_err(|e| lines.err(n, e))?;
        let f = HaarFeature::new(
            kind,
            lines.parse(n, v[1])?,
            lines.parse(n, v[2])?,
            lines.parse(n, v[3])?,
            lines.parse(n, v[4])?,
        )
        .map_err(|e| lines.err(n, e.to_string()))?;
        features.push(f);
    }
    let ns: usize = lines.scalar("stages")?;
    let mut stages = Vec::with_capacity(ns);
    for i in 0..ns {
        let idx: usize = lines.scalar("stage")?;
        if idx != i {
            return Err(lines.err(lines.lines[lines.pos - 1].0, format!("expected stage {i}, found {idx}")));
        }
        let (n, g) = lines.expect("goal")?;
        if g.len() != 3 {
            return Err(lines.err(n, "goal needs three values"));
        }
        let goal = StageGoal {
            min_detection: lines.parse(n, g[0])?,
            max_false_positive: lines.parse(n, g[1])?,
            max_learners: lines.parse(n, g[2])?,
        };
        let (n, r) = lines.expect("report")?;
        if r.len() != 5 {
            return Err(lines.err(n, "report needs five values"));
        }
        let report = StageReport {
            learners: lines.parse(n, r[0])?,
            positives: lines.parse(n, r[1])?,
            negatives: lines.parse(n, r[2])?,
            detection_rate: lines.parse(n, r[3])?,
            false_positive_rate: lines.parse(n, r[4])?,
        };
        let classifier = read_classifier_body(&mut lines)?;
        if let Some(l) = classifier.model.learners.iter().find(|l| l.feature_id >= nf) {
            return Err(lines.err(n, format!("stage {i} uses feature {} of {nf}", l.feature_id)));
        }
        stages.push(Stage { classifier, goal, report });
    }
    lines.finished()?;
    Ok(Cascade { features, stages })
}

/// Reads either kind of model file, telling them apart by the header.
pub fn read_artifact<T: Real>(text: &str, source: &str) -> Result<Artifact<T>, IoError> {
    match text.split_whitespace().next() {
        Some(CASCADE_MAGIC) => read_cascade(text, source).map(Artifact::Cascade),
        Some(MODEL_MAGIC) => read_classifier(text, source).map(Artifact::Classifier),
        _ => Err(IoError::parse(format!("{source}: line 1"), "not a model file")),
    }
}

pub fn serialize_model<T: Real>(artifact: &Artifact<T>, path: &Path) -> Result<(), IoError> {
    let text = match artifact {
        Artifact::Classifier(c) => write_classifier(c),
        Artifact::Cascade(c) => write_cascade(c),
    };
    std::fs::write(path, text).map_err(|e| IoError::file(path, e))
}

pub fn deserialize_model<T: Real>(path: &Path) -> Result<Artifact<T>, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    read_artifact(&text, &path.display().to_string())
}
