//! CSV files: pose series, the video manifest and per-video features.
//!
//! Pose CSV: `frame,timestamp_s,joint,x_m,y_m,z_m`, one row per joint per
//! frame, joint names from [`joints::VOCABULARY`].
//! Manifest CSV: `video_id,subject_id,tug_s`.
//! Feature CSV: `subject_id,video_id,tug_s` followed by one column per feature.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use thiserror::Error;

use crate::gaitfeat::{joints, FeatureVector, PoseFrame, PoseSeries};
use crate::pipeline::{Dataset, GaitSample};

pub const POSE_HEADER: [&str; 6] = ["frame", "timestamp_s", "joint", "x_m", "y_m", "z_m"];
pub const MANIFEST_HEADER: [&str; 3] = ["video_id", "subject_id", "tug_s"];
pub const FEATURE_META: [&str; 3] = ["subject_id", "video_id", "tug_s"];

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{source_name}: line {line}, column {column}: {message}")]
    Parse {
        source_name: String,
        line: u64,
        column: usize,
        message: String,
    },
    #[error("{source_name}: {message}")]
    Content { source_name: String, message: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

fn parse_error(source_name: &str, line: u64, column: usize, message: impl Into<String>) -> FormatError {
    FormatError::Parse {
        source_name: source_name.to_string(),
        line,
        column,
        message: message.into(),
    }
}

fn content_error(source_name: &str, message: impl Into<String>) -> FormatError {
    FormatError::Content {
        source_name: source_name.to_string(),
        message: message.into(),
    }
}

/// Header-checked record iterator that reports 1-based line and column numbers.
/// A data record with its 1-based line number.
type NumberedRecord = (u64, csv::StringRecord);

fn records<R: Read>(
    reader: R,
    expected: &[&str],
    exact: bool,
    source_name: &str,
) -> Result<(Vec<String>, Vec<NumberedRecord>), FormatError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_error(source_name, 1, 1, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let prefix_ok = header.len() >= expected.len()
        && header.iter().zip(expected).all(|(h, e)| h == e)
        && (!exact || header.len() == expected.len());
    if !prefix_ok {
        let column = header
            .iter()
            .zip(expected)
            .position(|(h, e)| h != e)
            .unwrap_or(header.len().min(expected.len()))
            + 1;
        return Err(parse_error(
            source_name,
            1,
            column,
            format!("expected header {}, got {}", expected.join(","), header.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_error(source_name, line, 1, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != header.len() {
            return Err(parse_error(
                source_name,
                line,
                rec.len().min(header.len()) + 1,
                format!("expected {} fields, got {}", header.len(), rec.len()),
            ));
        }
        rows.push((line, rec));
    }
    Ok((header, rows))
}

fn number(rec: &csv::StringRecord, i: usize, line: u64, source_name: &str) -> Result<f64, FormatError> {
    let raw = rec[i].trim();
    let v: f64 = raw
        .parse()
        .map_err(|_| parse_error(source_name, line, i + 1, format!("not a number: {raw:?}")))?;
    if !v.is_finite() {
        return Err(parse_error(
            source_name,
            line,
            i + 1,
            format!("non-finite value {raw:?}"),
        ));
    }
    Ok(v)
}

/// Reads a pose CSV. The frame rate is the reciprocal of the median frame interval.
pub fn read_pose_csv<R: Read>(reader: R, subject_id: &str, source_name: &str) -> Result<PoseSeries, FormatError> {
    let (_, rows) = records(reader, &POSE_HEADER, true, source_name)?;
    let mut frames: BTreeMap<u64, PoseFrame> = BTreeMap::new();
    for (line, rec) in rows {
        let frame_raw = rec[0].trim();
        let frame: u64 = frame_raw
            .parse()
            .map_err(|_| parse_error(source_name, line, 1, format!("not a frame index: {frame_raw:?}")))?;
        let t = number(&rec, 1, line, source_name)?;
        let joint = rec[2].trim();
        if !joints::is_known(joint) {
            return Err(parse_error(source_name, line, 3, format!("unknown joint {joint:?}")));
        }
        let p = [
            number(&rec, 3, line, source_name)?,
            number(&rec, 4, line, source_name)?,
            number(&rec, 5, line, source_name)?,
        ];
        let entry = frames.entry(frame).or_insert_with(|| PoseFrame {
            timestamp_s: t,
            joints: BTreeMap::new(),
        });
        if entry.timestamp_s != t {
            return Err(parse_error(
                source_name,
                line,
                2,
                format!("frame {frame} has timestamps {} and {t}", entry.timestamp_s),
            ));
        }
        if entry.joints.insert(joint.to_string(), p).is_some() {
            return Err(parse_error(
                source_name,
                line,
                3,
                format!("joint {joint} repeated in frame {frame}"),
            ));
        }
    }
    let frames: Vec<PoseFrame> = frames.into_values().collect();
    if frames.len() < 2 {
        return Err(content_error(
            source_name,
            format!("{} frames, at least 2 needed", frames.len()),
        ));
    }
    let mut dt: Vec<f64> = frames.windows(2).map(|w| w[1].timestamp_s - w[0].timestamp_s).collect();
    dt.sort_by(f64::total_cmp);
    let mid = dt.len() / 2;
    let median = if dt.len() % 2 == 1 {
        dt[mid]
    } else {
        0.5 * (dt[mid - 1] + dt[mid])
    };
    if !(median > 0.0) {
        return Err(content_error(source_name, "timestamps do not increase"));
    }
    PoseSeries::new(frames, 1.0 / median, subject_id).map_err(|e| content_error(source_name, e.to_string()))
}

pub fn write_pose_csv<W: Write>(series: &PoseSeries, writer: W) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| FormatError::Io(e.into());
    w.write_record(POSE_HEADER).map_err(io)?;
    for (i, frame) in series.frames().iter().enumerate() {
        for (joint, p) in &frame.joints {
            w.write_record([
                i.to_string(),
                frame.timestamp_s.to_string(),
                joint.clone(),
                p[0].to_string(),
                p[1].to_string(),
                p[2].to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub video_id: String,
    pub subject_id: String,
    pub tug_s: f64,
}

pub fn read_manifest<R: Read>(reader: R, source_name: &str) -> Result<Vec<ManifestEntry>, FormatError> {
    let (_, rows) = records(reader, &MANIFEST_HEADER, true, source_name)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(rows.len());
    for (line, rec) in rows {
        let video_id = rec[0].trim().to_string();
        if video_id.is_empty() {
            return Err(parse_error(source_name, line, 1, "empty video_id"));
        }
        if !seen.insert(video_id.clone()) {
            return Err(parse_error(
                source_name,
                line,
                1,
                format!("duplicate video_id {video_id}"),
            ));
        }
        let tug_s = number(&rec, 2, line, source_name)?;
        if tug_s <= 0.0 {
            return Err(parse_error(
                source_name,
                line,
                3,
                format!("TUG score must be positive, got {tug_s}"),
            ));
        }
        out.push(ManifestEntry {
            video_id,
            subject_id: rec[1].trim().to_string(),
            tug_s,
        });
    }
    Ok(out)
}

pub fn write_manifest<W: Write>(entries: &[ManifestEntry], writer: W) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| FormatError::Io(e.into());
    w.write_record(MANIFEST_HEADER).map_err(io)?;
    for e in entries {
        w.write_record([e.video_id.clone(), e.subject_id.clone(), e.tug_s.to_string()])
            .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_csv<R: Read>(reader: R, source_name: &str) -> Result<Dataset, FormatError> {
    let (header, rows) = records(reader, &FEATURE_META, false, source_name)?;
    let names: Vec<String> = header[FEATURE_META.len()..].to_vec();
    if names.is_empty() {
        return Err(parse_error(
            source_name,
            1,
            FEATURE_META.len() + 1,
            "no feature columns",
        ));
    }
    let mut samples = Vec::with_capacity(rows.len());
    for (line, rec) in rows {
        let tug_s = number(&rec, 2, line, source_name)?;
        let values = (FEATURE_META.len()..header.len())
            .map(|i| number(&rec, i, line, source_name))
            .collect::<Result<Vec<_>, _>>()?;
        let features =
            FeatureVector::new(names.clone(), values).map_err(|e| parse_error(source_name, line, 1, e.to_string()))?;
        samples.push(GaitSample {
            features,
            tug_s,
            subject_id: rec[0].trim().to_string(),
            video_id: rec[1].trim().to_string(),
        });
    }
    if samples.is_empty() {
        return Err(content_error(source_name, "no data rows"));
    }
    Dataset::new(samples).map_err(|e| content_error(source_name, e.to_string()))
}

pub fn write_feature_csv<W: Write>(samples: &[GaitSample], writer: W) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| FormatError::Io(e.into());
    let names: &[String] = samples.first().map(|s| s.features.names()).unwrap_or(&[]);
    let header: Vec<&str> = FEATURE_META
        .iter()
        .copied()
        .chain(names.iter().map(String::as_str))
        .collect();
    w.write_record(&header).map_err(io)?;
    for s in samples {
        let mut row = vec![s.subject_id.clone(), s.video_id.clone(), s.tug_s.to_string()];
        row.extend(s.features.values().iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgait::{generate_walker, WalkerParams};

    #[test]
    fn pose_roundtrip() {
        let p = WalkerParams {
            duration_s: 2.0,
            sensor_noise_m: 0.003,
            ..Default::default()
        };
        let series = generate_walker(&p).unwrap();
        let mut buf = Vec::new();
        write_pose_csv(&series, &mut buf).unwrap();
        let back = read_pose_csv(buf.as_slice(), series.subject_id(), "mem").unwrap();
        assert_eq!(back.frames(), series.frames());
        assert!((back.frame_rate_hz() - 30.0).abs() < 1e-9);
    }

    #[test]
    fn pose_errors_are_located() {
        let text = "frame,timestamp_s,joint,x_m,y_m,z_m\n0,0,left_hip,0,0.1,1\n0,0,right_hip,0,abc,1\n";
        match read_pose_csv(text.as_bytes(), "s", "walk.csv") {
            Err(FormatError::Parse {
                line,
                column,
                source_name,
                ..
            }) => {
                assert_eq!((line, column), (3, 5));
                assert_eq!(source_name, "walk.csv");
            }
            other => panic!("{other:?}"),
        }
        let text = "frame,timestamp_s,joint,x_m,y_m,z_m\n0,0,tail,0,0,1\n";
        assert!(matches!(
            read_pose_csv(text.as_bytes(), "s", "x"),
            Err(FormatError::Parse { column: 3, .. })
        ));
        let text = "frame,time,joint,x_m,y_m,z_m\n";
        assert!(matches!(
            read_pose_csv(text.as_bytes(), "s", "x"),
            Err(FormatError::Parse { line: 1, column: 2, .. })
        ));
        let text = "frame,timestamp_s,joint,x_m,y_m,z_m\n0,0,left_hip,0,0\n";
        assert!(matches!(
            read_pose_csv(text.as_bytes(), "s", "x"),
            Err(FormatError::Parse { line: 2, .. })
        ));
        let text = "frame,timestamp_s,joint,x_m,y_m,z_m\n0,0,left_hip,0,0.1,1\n0,0,right_hip,0,-0.1,1\n";
        assert!(matches!(
            read_pose_csv(text.as_bytes(), "s", "x"),
            Err(FormatError::Content { .. })
        ));
    }

    #[test]
    fn manifest_roundtrip_and_checks() {
        let entries = vec![
            ManifestEntry {
                video_id: "a".into(),
                subject_id: "s1".into(),
                tug_s: 8.25,
            },
            ManifestEntry {
                video_id: "b".into(),
                subject_id: "s1".into(),
                tug_s: 31.0,
            },
        ];
        let mut buf = Vec::new();
        write_manifest(&entries, &mut buf).unwrap();
        assert_eq!(read_manifest(buf.as_slice(), "m").unwrap(), entries);
        let dup = "video_id,subject_id,tug_s\na,s,9\na,s,10\n";
        assert!(matches!(
            read_manifest(dup.as_bytes(), "m"),
            Err(FormatError::Parse { line: 3, column: 1, .. })
        ));
        let neg = "video_id,subject_id,tug_s\na,s,-1\n";
        assert!(matches!(
            read_manifest(neg.as_bytes(), "m"),
            Err(FormatError::Parse { line: 2, column: 3, .. })
        ));
    }

    #[test]
    fn feature_roundtrip() {
        let data = Dataset::from_rows(
            &["f.mean", "f.var"],
            &[vec![0.1, 1e-12], vec![2.0 / 3.0, 5.0]],
            &[9.0, 14.5],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_feature_csv(data.samples(), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("subject_id,video_id,tug_s,f.mean,f.var\n"));
        assert_eq!(read_feature_csv(buf.as_slice(), "f").unwrap(), data);
        let bad = "subject_id,video_id,tug_s,f\ns,v,9,x\n";
        assert!(matches!(
            read_feature_csv(bad.as_bytes(), "f"),
            Err(FormatError::Parse { line: 2, column: 4, .. })
        ));
        assert!(read_feature_csv("subject_id,video_id,tug_s,f\n".as_bytes(), "f").is_err());
    }
}
