//! Canonical on-disk dataset layout: loading, writing, validation helpers.
//!
//! Layout: `root/subjectNN/sessionMM/{silhouettes/, accel.csv, calories.csv,
//! labels.csv, meta.csv}`. Silhouettes are one P4 bitmap per frame, file name
//! a zero-padded frame index. All CSVs are comma-separated, UTF-8, `\n` line
//! endings, reals with 6 decimal places.

use std::path::{Path, PathBuf};

use crate::core::pbm;
use crate::core::types::*;
use crate::error::{Error, Result};

fn parse_error(file: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        file: file.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn read_csv(path: &Path, expected_header: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == expected_header => {}
        Some((_, header)) => {
            return Err(parse_error(
                path,
                1,
                format!("expected header '{expected_header}', got '{header}'"),
            ))
        }
        None => return Err(parse_error(path, 1, "empty file")),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        rows.push((i + 1, line.split(',').map(|s| s.trim().to_string()).collect()));
    }
    Ok(rows)
}

fn parse_f64(path: &Path, line: usize, s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| parse_error(path, line, format!("invalid number '{s}'")))
}

fn parse_u64(path: &Path, line: usize, s: &str) -> Result<u64> {
    s.parse::<u64>()
        .map_err(|_| parse_error(path, line, format!("invalid frame index '{s}'")))
}

/// Loads the canonical layout into a validated [`Dataset`].
///
/// Accelerometer rows are resampled onto the canonical frame clock by linear
/// interpolation; calorie rows are expanded to per-frame values by zero-order
/// hold, with `NA` rows preserved as MISSING. Loading fails on the first
/// invariant violation; no partially valid dataset is returned.
pub fn load_dataset(root: &Path) -> Result<Dataset> {
    let mut subject_dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|e| Error::io(root.display().to_string(), e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .map(|n| n.starts_with("subject"))
                    .unwrap_or(false)
        })
        .collect();
    subject_dirs.sort();

    let mut subjects = Vec::new();
    for dir in subject_dirs {
        subjects.push(load_subject(&dir)?);
    }
    Ok(Dataset { subjects })
}

fn load_subject(dir: &Path) -> Result<SubjectRecord> {
    let id = dir
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or_default()
        .to_string();

    let mut session_dirs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir.display().to_string(), e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .map(|n| n.starts_with("session"))
                    .unwrap_or(false)
        })
        .collect();
    session_dirs.sort();

    let mut weight_kg = 0.0;
    let mut height_cm = 0.0;
    let mut sessions = Vec::new();
    for sdir in &session_dirs {
        let meta_path = sdir.join("meta.csv");
        let rows = read_csv(&meta_path, "weight_kg,height_cm")?;
        let (line, row) = rows
            .first()
            .ok_or_else(|| parse_error(&meta_path, 2, "missing metadata row"))?;
        if row.len() != 2 {
            return Err(parse_error(&meta_path, *line, "expected 2 fields"));
        }
        weight_kg = parse_f64(&meta_path, *line, &row[0])?;
        height_cm = parse_f64(&meta_path, *line, &row[1])?;
        sessions.push(load_session(sdir, &id)?);
    }

    if !sessions.is_empty() && (weight_kg <= 0.0 || height_cm <= 0.0) {
        return Err(Error::Validation {
            subject: id,
            session: String::new(),
            msg: format!("weight and height must be positive, got {weight_kg} kg, {height_cm} cm"),
        });
    }

    Ok(SubjectRecord {
        id,
        weight_kg,
        height_cm,
        sessions,
    })
}

fn load_session(dir: &Path, subject_id: &str) -> Result<Session> {
    let session_id = dir
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or_default()
        .to_string();
    let validation = |msg: String| Error::Validation {
        subject: subject_id.to_string(),
        session: session_id.clone(),
        msg,
    };

    // Silhouettes: one P4 file per frame, ordered by the numeric file stem.
    let sil_dir = dir.join("silhouettes");
    let mut frames: Vec<(u64, PathBuf)> = Vec::new();
    if sil_dir.is_dir() {
        for entry in
            std::fs::read_dir(&sil_dir).map_err(|e| Error::io(sil_dir.display().to_string(), e))?
        {
            let path = entry
                .map_err(|e| Error::io(sil_dir.display().to_string(), e))?
                .path();
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let ts: u64 = stem
                .parse()
                .map_err(|_| parse_error(&path, 0, "silhouette file name is not a frame index"))?;
            frames.push((ts, path));
        }
    }
    frames.sort_by_key(|(ts, _)| *ts);
    let mut silhouettes = Vec::with_capacity(frames.len());
    let mut dims: Option<(usize, usize)> = None;
    for (ts, path) in frames {
        let (w, h, mask) = pbm::read_pbm(&path)?;
        match dims {
            None => dims = Some((w, h)),
            Some(d) if d != (w, h) => {
                return Err(validation(format!(
                    "silhouette dimensions changed from {}x{} to {w}x{h} at frame {ts}",
                    d.0, d.1
                )))
            }
            _ => {}
        }
        silhouettes.push(
            SilhouetteFrame::new(ts, w, h, mask).map_err(|e| validation(e.to_string()))?,
        );
    }

    // Accelerometer: parse, check ordering, resample onto the frame clock.
    let accel_path = dir.join("accel.csv");
    let mut raw_accel: Vec<(f64, [f64; 6])> = Vec::new();
    if accel_path.is_file() {
        for (line, row) in read_csv(&accel_path, "frame,wx,wy,wz,ax,ay,az")? {
            if row.len() != 7 {
                return Err(parse_error(&accel_path, line, "expected 7 fields"));
            }
            let t = parse_f64(&accel_path, line, &row[0])?;
            let mut ch = [0.0; 6];
            for (k, v) in ch.iter_mut().enumerate() {
                *v = parse_f64(&accel_path, line, &row[k + 1])?;
            }
            if ch.iter().any(|v| !v.is_finite()) {
                return Err(validation(format!("non-finite accel value at line {line}")));
            }
            raw_accel.push((t, ch));
        }
        for pair in raw_accel.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(validation(format!(
                    "accel timestamps not strictly increasing at frame {}",
                    pair[1].0
                )));
            }
        }
    }
    let accel = resample_accel(&raw_accel);

    // Calories: sparse rows expanded by zero-order hold.
    let cal_path = dir.join("calories.csv");
    let mut raw_cal: Vec<(u64, Option<f64>)> = Vec::new();
    if cal_path.is_file() {
        for (line, row) in read_csv(&cal_path, "frame,kcal_per_min")? {
            if row.len() != 2 {
                return Err(parse_error(&cal_path, line, "expected 2 fields"));
            }
            let t = parse_u64(&cal_path, line, &row[0])?;
            let v = if row[1] == "NA" {
                None
            } else {
                let v = parse_f64(&cal_path, line, &row[1])?;
                if !v.is_finite() || v < 0.0 {
                    return Err(validation(format!(
                        "calorie value at line {line} must be finite and >= 0"
                    )));
                }
                Some(v)
            };
            raw_cal.push((t, v));
        }
        for pair in raw_cal.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(validation(format!(
                    "calorie timestamps not strictly increasing at frame {}",
                    pair[1].0
                )));
            }
        }
    }

    // Labels.
    let labels_path = dir.join("labels.csv");
    let mut labels = Vec::new();
    if labels_path.is_file() {
        for (line, row) in read_csv(&labels_path, "start,end,activity")? {
            if row.len() != 3 {
                return Err(parse_error(&labels_path, line, "expected 3 fields"));
            }
            let start = parse_u64(&labels_path, line, &row[0])?;
            let end = parse_u64(&labels_path, line, &row[1])?;
            let activity = Activity::parse(&row[2])
                .ok_or_else(|| parse_error(&labels_path, line, format!("unknown activity '{}'", row[2])))?;
            labels.push(ActivityLabel::new(start, end, activity).map_err(|e| validation(e.to_string()))?);
        }
        labels.sort_by_key(|l| l.start);
        for pair in labels.windows(2) {
            if pair[1].start <= pair[0].end {
                return Err(validation(format!(
                    "label intervals overlap at frame {}",
                    pair[1].start
                )));
            }
        }
    }

    let last_frame = {
        let s = silhouettes.last().map(|f| f.timestamp).unwrap_or(0);
        let a = accel.last().map(|f| f.timestamp).unwrap_or(0);
        let c = raw_cal.last().map(|(t, _)| *t).unwrap_or(0);
        s.max(a).max(c)
    };
    let calories = expand_calories(&raw_cal, last_frame);

    Ok(Session {
        id: session_id,
        silhouettes,
        accel,
        calories,
        labels,
    })
}

/// Linear interpolation of possibly non-integer accel timestamps onto the
/// integer frame clock over the span covered by the input.
fn resample_accel(raw: &[(f64, [f64; 6])]) -> Vec<AccelSample> {
    if raw.is_empty() {
        return Vec::new();
    }
    if raw.len() == 1 {
        return vec![AccelSample {
            timestamp: raw[0].0.round().max(0.0) as u64,
            channels: raw[0].1,
        }];
    }
    let first = raw[0].0.ceil().max(0.0) as u64;
    let last = raw[raw.len() - 1].0.floor() as u64;
    let mut out = Vec::with_capacity((last.saturating_sub(first) + 1) as usize);
    let mut seg = 0usize;
    for frame in first..=last {
        let t = frame as f64;
        while seg + 2 < raw.len() && raw[seg + 1].0 < t {
            seg += 1;
        }
        let (t0, a) = raw[seg];
        let (t1, b) = raw[seg + 1];
        // Exact pass-through at knots keeps already-on-clock data unchanged.
        let ch = if t == t0 {
            a
        } else if t == t1 {
            b
        } else {
            let alpha = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
            let mut ch = [0.0; 6];
            for k in 0..6 {
                ch[k] = a[k] + alpha * (b[k] - a[k]);
            }
            ch
        };
        out.push(AccelSample {
            timestamp: frame,
            channels: ch,
        });
    }
    out
}

/// Zero-order-hold expansion of sparse calorie rows to per-frame samples.
fn expand_calories(raw: &[(u64, Option<f64>)], last_frame: u64) -> Vec<CalorieSample> {
    if raw.is_empty() {
        return Vec::new();
    }
    let first = raw[0].0;
    let mut out = Vec::with_capacity((last_frame - first + 1) as usize);
    let mut idx = 0usize;
    for frame in first..=last_frame {
        while idx + 1 < raw.len() && raw[idx + 1].0 <= frame {
            idx += 1;
        }
        out.push(CalorieSample {
            timestamp: frame,
            value: raw[idx].1,
        });
    }
    out
}

/// Writes a dataset back in the canonical layout.
///
/// Inverse of [`load_dataset`] for datasets already on the frame clock:
/// write-then-load round-trips value-identically at the format's 6-decimal
/// precision.
pub fn write_dataset(dataset: &Dataset, root: &Path) -> Result<()> {
    let io_err = |p: &Path, e: std::io::Error| Error::io(p.display().to_string(), e);
    std::fs::create_dir_all(root).map_err(|e| io_err(root, e))?;
    for subject in &dataset.subjects {
        let sdir = root.join(&subject.id);
        for session in &subject.sessions {
            let dir = sdir.join(&session.id);
            let sil_dir = dir.join("silhouettes");
            std::fs::create_dir_all(&sil_dir).map_err(|e| io_err(&sil_dir, e))?;
            for frame in &session.silhouettes {
                let path = sil_dir.join(format!("{:06}.pbm", frame.timestamp));
                pbm::write_pbm(&path, frame.width, frame.height, &frame.mask)?;
            }

            let mut accel = String::from("frame,wx,wy,wz,ax,ay,az\n");
            for s in &session.accel {
                accel.push_str(&format!(
                    "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                    s.timestamp,
                    s.channels[0],
                    s.channels[1],
                    s.channels[2],
                    s.channels[3],
                    s.channels[4],
                    s.channels[5]
                ));
            }
            let p = dir.join("accel.csv");
            std::fs::write(&p, accel).map_err(|e| io_err(&p, e))?;

            let mut cal = String::from("frame,kcal_per_min\n");
            for c in &session.calories {
                match c.value {
                    Some(v) => cal.push_str(&format!("{},{:.6}\n", c.timestamp, v)),
                    None => cal.push_str(&format!("{},NA\n", c.timestamp)),
                }
            }
            let p = dir.join("calories.csv");
            std::fs::write(&p, cal).map_err(|e| io_err(&p, e))?;

            let mut lab = String::from("start,end,activity\n");
            for l in &session.labels {
                lab.push_str(&format!("{},{},{}\n", l.start, l.end, l.activity));
            }
            let p = dir.join("labels.csv");
            std::fs::write(&p, lab).map_err(|e| io_err(&p, e))?;

            let meta = format!(
                "weight_kg,height_cm\n{:.6},{:.6}\n",
                subject.weight_kg, subject.height_cm
            );
            let p = dir.join("meta.csv");
            std::fs::write(&p, meta).map_err(|e| io_err(&p, e))?;
        }
    }
    Ok(())
}
