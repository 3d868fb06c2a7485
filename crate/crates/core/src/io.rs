//! File formats: logits CSV, calibration-map JSON, reliability-report CSV,
//! applied-prediction CSV and plain-text ID lists.

use std::io::{BufRead, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binning::{BinMethod, BinSpec};
use crate::map::AppliedPrediction;
use crate::{CalibError, CalibrationMap, FitConfig, LogitDataset, MethodTag, ReliabilityReport, Result};

pub const MAP_FORMAT_VERSION: u32 = 1;

fn parse_error(source_name: &str, line: usize, msg: impl Into<String>) -> CalibError {
    CalibError::Parse {
        source_name: source_name.to_string(),
        line,
        msg: msg.into(),
    }
}

fn csv_error(source_name: &str, e: csv::Error) -> CalibError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    parse_error(source_name, line, e.to_string())
}

/// Reads `[id,]label,z0,…,z{C−1}`. The header decides whether IDs are present.
pub fn read_logits<R: Read>(reader: R, source_name: &str) -> Result<LogitDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(source_name, e))?.clone();
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    let has_id = cols.first() == Some(&"id");
    let offset = usize::from(has_id);
    if cols.get(offset) != Some(&"label") {
        return Err(parse_error(
            source_name,
            1,
            "header must be `id,label,z0,z1,…` or `label,z0,z1,…`",
        ));
    }
    let num_classes = cols.len() - offset - 1;
    if num_classes < 2 {
        return Err(parse_error(source_name, 1, "need at least two logit columns z0,z1"));
    }
    for (k, name) in cols[offset + 1..].iter().enumerate() {
        if *name != format!("z{k}") {
            return Err(parse_error(
                source_name,
                1,
                format!("logit column {k} is named {name:?}, expected \"z{k}\""),
            ));
        }
    }

    let mut ids = has_id.then(Vec::new);
    let mut labels = Vec::new();
    let mut logits = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(source_name, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != cols.len() {
            return Err(parse_error(
                source_name,
                line,
                format!("{} fields, header has {}", rec.len(), cols.len()),
            ));
        }
        if let Some(ids) = &mut ids {
            let id = rec[0].trim();
            if id.is_empty() {
                return Err(parse_error(source_name, line, "empty id"));
            }
            ids.push(id.to_string());
        }
        let label: usize = rec[offset]
            .trim()
            .parse()
            .map_err(|_| parse_error(source_name, line, format!("label {:?} is not a non-negative integer", &rec[offset])))?;
        if label >= num_classes {
            return Err(parse_error(
                source_name,
                line,
                format!("label {label} is not below the class count {num_classes}"),
            ));
        }
        labels.push(label);
        for field in rec.iter().skip(offset + 1) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_error(source_name, line, format!("logit {field:?} is not a number")))?;
            if !v.is_finite() {
                return Err(parse_error(source_name, line, format!("logit {field:?} is not finite")));
            }
            logits.push(v);
        }
    }
    LogitDataset::new(num_classes, logits, labels, ids).map_err(|e| parse_error(source_name, 0, e.to_string()))
}

/// Writes logits with shortest round-trip decimal formatting.
pub fn write_logits<W: Write>(writer: W, data: &LogitDataset) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    let mut header: Vec<String> = Vec::with_capacity(data.num_classes() + 2);
    if data.has_ids() {
        header.push("id".into());
    }
    header.push("label".into());
    header.extend((0..data.num_classes()).map(|k| format!("z{k}")));
    w.write_record(&header).map_err(|e| csv_error("output", e))?;
    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for r in data.iter() {
        row.clear();
        if let Some(id) = r.id {
            row.push(id.to_string());
        }
        row.push(r.label.to_string());
        row.extend(r.logits.iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(|e| csv_error("output", e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_logits(path: &Path) -> Result<LogitDataset> {
    let f = std::fs::File::open(path)?;
    read_logits(std::io::BufReader::new(f), &path.display().to_string())
}

pub fn save_logits(path: &Path, data: &LogitDataset) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_logits(&mut w, data)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

/// Where a map came from: enough to refit it from the same files.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub num_classes: usize,
    pub inputs: Vec<InputDigest>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MapDocument {
    format_version: u32,
    method_tag: MethodTag,
    binning: BinMethod,
    edges: Vec<f64>,
    temperatures: Vec<f64>,
    fallback_temperature: f64,
    per_bin_counts: Vec<usize>,
    fit_config: FitConfig,
    provenance: Provenance,
}

/// A calibration map together with its provenance, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct MapFile {
    pub map: CalibrationMap,
    pub provenance: Provenance,
}

impl MapFile {
    pub fn to_json(&self) -> Result<String> {
        self.map.validate()?;
        let doc = MapDocument {
            format_version: MAP_FORMAT_VERSION,
            method_tag: self.map.method,
            binning: self.map.spec.method(),
            edges: self.map.spec.edges().to_vec(),
            temperatures: self.map.temperatures.clone(),
            fallback_temperature: self.map.fallback_temperature,
            per_bin_counts: self.map.per_bin_counts.clone(),
            fit_config: self.map.config,
            provenance: self.provenance.clone(),
        };
        let mut s = serde_json::to_string_pretty(&doc)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MapDocument = serde_json::from_str(text)?;
        if doc.format_version != MAP_FORMAT_VERSION {
            return Err(CalibError::invalid(format!(
                "unsupported map format version {} (expected {MAP_FORMAT_VERSION})",
                doc.format_version
            )));
        }
        let map = CalibrationMap {
            method: doc.method_tag,
            spec: BinSpec::new(doc.edges, doc.binning)?,
            temperatures: doc.temperatures,
            fallback_temperature: doc.fallback_temperature,
            per_bin_counts: doc.per_bin_counts,
            config: doc.fit_config,
        };
        map.validate()?;
        Ok(Self {
            map,
            provenance: doc.provenance,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `lower,upper,count,accuracy,avg_confidence`; empty bins leave the last two fields blank.
pub fn write_report<W: Write>(mut w: W, report: &ReliabilityReport) -> Result<()> {
    writeln!(w, "lower,upper,count,accuracy,avg_confidence")?;
    for b in &report.bins {
        writeln!(
            w,
            "{},{},{},{},{}",
            b.lower,
            b.upper,
            b.count,
            opt(b.accuracy),
            opt(b.avg_confidence)
        )?;
    }
    Ok(())
}

pub fn read_report<R: Read>(reader: R, source_name: &str) -> Result<ReliabilityReport> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(source_name, e))?;
    if header.iter().collect::<Vec<_>>() != ["lower", "upper", "count", "accuracy", "avg_confidence"] {
        return Err(parse_error(source_name, 1, "unexpected reliability report header"));
    }
    let mut bins = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(source_name, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let num = |i: usize| -> Result<Option<f64>> {
            let s = rec[i].trim();
            if s.is_empty() {
                return Ok(None);
            }
            s.parse()
                .map(Some)
                .map_err(|_| parse_error(source_name, line, format!("bad number {s:?}")))
        };
        let req = |i: usize| num(i)?.ok_or_else(|| parse_error(source_name, line, "missing value"));
        bins.push(crate::ReliabilityBin {
            lower: req(0)?,
            upper: req(1)?,
            count: rec[2]
                .trim()
                .parse()
                .map_err(|_| parse_error(source_name, line, "bad count"))?,
            accuracy: num(3)?,
            avg_confidence: num(4)?,
        });
    }
    let total_samples = bins.iter().map(|b| b.count).sum();
    Ok(ReliabilityReport { bins, total_samples })
}

/// `id,label,predicted,confidence_raw,confidence_calibrated,bin_index`.
pub fn write_applied<W: Write>(writer: W, data: &LogitDataset, applied: &[AppliedPrediction]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(["id", "label", "predicted", "confidence_raw", "confidence_calibrated", "bin_index"])
        .map_err(|e| csv_error("output", e))?;
    for (r, a) in data.iter().zip(applied) {
        w.write_record([
            r.id.unwrap_or("").to_string(),
            r.label.to_string(),
            a.calibrated.predicted_class.to_string(),
            a.raw.confidence.to_string(),
            a.calibrated.confidence.to_string(),
            a.bin.to_string(),
        ])
        .map_err(|e| csv_error("output", e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_id_list<R: BufRead>(reader: R) -> Result<Vec<String>> {
    let mut ids = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let id = line.trim();
        if !id.is_empty() {
            ids.push(id.to_string());
        }
    }
    Ok(ids)
}

pub fn write_id_list<W: Write>(mut w: W, ids: &[String]) -> Result<()> {
    for id in ids {
        writeln!(w, "{id}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binning::bins_by_count;
    use crate::metrics::reliability;
    use crate::synth::{generate, SynthConfig, TemperatureProfile};

    fn synth(n: usize) -> LogitDataset {
        generate(&SynthConfig::new(n, 4, TemperatureProfile::Constant { temperature: 2.0 }, 3)).unwrap()
    }

    #[test]
    fn logits_round_trip_is_byte_stable() {
        let d = synth(50);
        let mut first = Vec::new();
        write_logits(&mut first, &d).unwrap();
        let back = read_logits(first.as_slice(), "mem").unwrap();
        assert_eq!(back, d);
        let mut second = Vec::new();
        write_logits(&mut second, &back).unwrap();
        assert_eq!(first, second);
        assert!(first.starts_with(b"id,label,z0,z1,z2,z3\n"));
    }

    #[test]
    fn logits_without_ids() {
        let text = "label,z0,z1,z2\n2,0.5,-1,3e2\n0,1,1,1\n";
        let d = read_logits(text.as_bytes(), "mem").unwrap();
        assert!(!d.has_ids());
        assert_eq!(d.num_classes(), 3);
        assert_eq!(d.logits(0), &[0.5, -1.0, 300.0]);
    }

    #[test]
    fn logits_errors_name_the_line() {
        let cases = [
            ("label,z0,z1\n0,1,2\n5,1,2\n", 3, "label 5"),
            ("label,z0,z1\n0,1\n", 2, "fields"),
            ("id,label,z0,z1\na,0,x,1\n", 2, "not a number"),
            ("id,label,z0,z1\na,0,inf,1\n", 2, "finite"),
            ("id,label,z0,z1\na,-1,0,1\n", 2, "non-negative"),
        ];
        for (text, line, needle) in cases {
            match read_logits(text.as_bytes(), "f.csv") {
                Err(CalibError::Parse { line: l, msg, .. }) => {
                    assert_eq!(l, line, "{text}: {msg}");
                    assert!(msg.contains(needle), "{msg}");
                }
                other => panic!("{text}: {other:?}"),
            }
        }
        for header in ["z0,z1\n", "label,z0\n", "label,z1,z0\n", "id,z0,z1\n"] {
            assert!(read_logits(header.as_bytes(), "f").is_err(), "{header}");
        }
        assert!(read_logits("id,label,z0,z1\na,0,1,2\na,1,0,0\n".as_bytes(), "f").is_err());
    }

    #[test]
    fn map_file_round_trips_exactly() {
        let d = synth(400);
        let spec = bins_by_count(&d.raw_confidences(), 5).unwrap();
        let map = crate::fit_bts(&d, &spec, &FitConfig::default()).unwrap();
        let file = MapFile {
            map,
            provenance: Provenance {
                num_classes: 4,
                inputs: vec![InputDigest {
                    role: "validation".into(),
                    path: "v.csv".into(),
                    sha256: "ab".repeat(32),
                }],
                seed: Some(9),
            },
        };
        let json = file.to_json().unwrap();
        let back = MapFile::from_json(&json).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.to_json().unwrap(), json);
        assert!(json.contains("\"format_version\": 1"));
        assert!(json.contains("\"method_tag\": \"bts\""));
    }

    #[test]
    fn map_file_rejects_invalid_documents() {
        let map = CalibrationMap::identity_with_temperature(1.5, FitConfig::default()).unwrap();
        let json = MapFile { map, provenance: Provenance::default() }.to_json().unwrap();
        let bumped = json.replace("\"format_version\": 1", "\"format_version\": 2");
        assert!(MapFile::from_json(&bumped).is_err());
        let broken = json.replace("1.5", "-1.5");
        assert!(MapFile::from_json(&broken).is_err());
        assert!(MapFile::from_json("{}").is_err());
    }

    #[test]
    fn report_csv() {
        let r = reliability(&[(0.6, true), (0.8, false), (0.9, true), (0.3, false)], 4).unwrap();
        let mut out = Vec::new();
        write_report(&mut out, &r).unwrap();
        let text = String::from_utf8(out.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), "lower,upper,count,accuracy,avg_confidence");
        assert_eq!(text.lines().nth(1).unwrap(), "0,0.25,0,,");
        assert_eq!(read_report(out.as_slice(), "mem").unwrap(), r);
    }

    #[test]
    fn id_lists() {
        let ids = vec!["a".to_string(), "b c".to_string()];
        let mut out = Vec::new();
        write_id_list(&mut out, &ids).unwrap();
        assert_eq!(out, b"a\nb c\n");
        assert_eq!(read_id_list("a\n\nb c\n".as_bytes()).unwrap(), ids);
    }
}
