use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// LSD of one evaluated direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionLsd {
    pub subject: String,
    pub index: usize,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub lsd: f64,
    /// VBAP fell back to the nearest neighbour for this direction.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fallback: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectLsd {
    pub subject: String,
    pub count: usize,
    pub mean_lsd: f64,
}

/// Evaluation result of one method on one split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub split: String,
    pub config_hash: String,
    pub tool_version: String,
    pub mean_lsd: f64,
    pub subjects: Vec<SubjectLsd>,
    pub directions: Vec<DirectionLsd>,
}

#[derive(Serialize)]
struct SummaryLine<'a> {
    record: &'static str,
    method: &'a str,
    split: &'a str,
    config_hash: &'a str,
    tool_version: &'a str,
    count: usize,
    mean_lsd: f64,
}

#[derive(Serialize)]
struct Tagged<'a, T: Serialize> {
    record: &'static str,
    #[serde(flatten)]
    inner: &'a T,
}

impl EvalReport {
    /// Builds a report; the mean is over all directions, the per-subject means over each
    /// subject's directions (subjects in first-appearance order).
    pub fn new(
        method: impl Into<String>,
        split: impl Into<String>,
        config_hash: impl Into<String>,
        directions: Vec<DirectionLsd>,
    ) -> Self {
        let mean_lsd = mean(directions.iter().map(|d| d.lsd));
        let mut subjects: Vec<SubjectLsd> = Vec::new();
        for d in &directions {
            if !subjects.iter().any(|s| s.subject == d.subject) {
                let vals: Vec<f64> = directions
                    .iter()
                    .filter(|x| x.subject == d.subject)
                    .map(|x| x.lsd)
                    .collect();
                subjects.push(SubjectLsd {
                    subject: d.subject.clone(),
                    count: vals.len(),
                    mean_lsd: mean(vals.into_iter()),
                });
            }
        }
        Self {
            method: method.into(),
            split: split.into(),
            config_hash: config_hash.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            mean_lsd,
            subjects,
            directions,
        }
    }

    pub fn fallback_count(&self) -> usize {
        self.directions.iter().filter(|d| d.fallback).count()
    }

    /// One summary line, then one line per subject, then one line per direction.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let summary = SummaryLine {
            record: "summary",
            method: &self.method,
            split: &self.split,
            config_hash: &self.config_hash,
            tool_version: &self.tool_version,
            count: self.directions.len(),
            mean_lsd: self.mean_lsd,
        };
        writeln!(out, "{}", line(&summary)).unwrap();
        for s in &self.subjects {
            writeln!(
                out,
                "{}",
                line(&Tagged {
                    record: "subject",
                    inner: s
                })
            )
            .unwrap();
        }
        for d in &self.directions {
            writeln!(
                out,
                "{}",
                line(&Tagged {
                    record: "direction",
                    inner: d
                })
            )
            .unwrap();
        }
        out
    }

    /// Parses the output of [`Self::to_jsonl`].
    pub fn from_jsonl(text: &str) -> Option<Self> {
        let mut lines = text.lines().map(serde_json::from_str::<serde_json::Value>);
        let summary = lines.next()?.ok()?;
        let field = |k: &str| summary.get(k).and_then(|v| v.as_str()).map(str::to_string);
        let mut directions = Vec::new();
        for v in lines {
            let v = v.ok()?;
            if v.get("record")?.as_str()? == "direction" {
                directions.push(serde_json::from_value(v).ok()?);
            }
        }
        let mut r = Self::new(
            field("method")?,
            field("split")?,
            field("config_hash")?,
            directions,
        );
        r.tool_version = field("tool_version")?;
        Some(r)
    }

    /// Header plus one row per subject and an `ALL` row.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "method",
            "split",
            "subject",
            "count",
            "mean_lsd_db",
            "config_hash",
        ])
        .expect("in-memory write");
        let rows = self
            .subjects
            .iter()
            .map(|s| (s.subject.as_str(), s.count, s.mean_lsd))
            .chain(std::iter::once(("ALL", self.directions.len(), self.mean_lsd)));
        for (subject, count, mean) in rows {
            w.write_record([
                self.method.as_str(),
                self.split.as_str(),
                subject,
                &count.to_string(),
                &format!("{mean:.6}"),
                self.config_hash.as_str(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

fn line<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("report serializes")
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> EvalReport {
        let d = |s: &str, i, lsd| DirectionLsd {
            subject: s.into(),
            index: i,
            azimuth_deg: 10.0,
            elevation_deg: -5.0,
            lsd,
            fallback: i == 2,
        };
        EvalReport::new(
            "vbap",
            "eval",
            "abc",
            vec![d("a", 0, 1.0), d("b", 1, 2.0), d("a", 2, 4.0)],
        )
    }

    #[test]
    fn means_match_directions() {
        let r = report();
        assert!((r.mean_lsd - 7.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.subjects[0].mean_lsd, 2.5);
        assert_eq!(r.subjects[1].count, 1);
        assert_eq!(r.fallback_count(), 1);
    }

    #[test]
    fn jsonl_round_trip() {
        let r = report();
        let text = r.to_jsonl();
        assert_eq!(text.lines().count(), 1 + 2 + 3);
        assert_eq!(EvalReport::from_jsonl(&text).unwrap(), r);
    }

    #[test]
    fn csv_has_all_row() {
        let csv = report().to_csv();
        assert!(csv
            .lines()
            .last()
            .unwrap()
            .starts_with("vbap,eval,ALL,3,2.333333,abc"));
    }
}
