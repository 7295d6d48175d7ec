//! JSON Lines part-sequence files.
//!
//! Line 1 is a header object, every further line is one frame:
//!
//! ```text
//! {"version":1,"feature_dim":F,"canvas":[w,h],"init_box":[cx,cy,w,h],"superpixel_range":[lo,hi]}
//! {"index":0,"parts":[{"id":0,"cx":..,"cy":..,"area":..,"fg":..,"feat":[..]}],"gt_box":[cx,cy,w,h]}
//! ```
//!
//! Reals are written in shortest round-trip form, so a write/read cycle is exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::part::{BoundingBox, Frame, Part, PartId, Point};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub feature_dim: usize,
    pub canvas: (u32, u32),
    pub init_box: BoundingBox,
    pub superpixel_range: (u32, u32),
    pub frames: Vec<Frame>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderRecord {
    version: u32,
    feature_dim: usize,
    canvas: [u32; 2],
    init_box: [f64; 4],
    #[serde(default)]
    superpixel_range: [u32; 2],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartRecord {
    id: PartId,
    cx: f64,
    cy: f64,
    area: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fg: Option<f64>,
    feat: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRecord {
    index: u32,
    parts: Vec<PartRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gt_box: Option<[f64; 4]>,
}

impl From<&Part> for PartRecord {
    fn from(p: &Part) -> Self {
        Self {
            id: p.id,
            cx: p.center.x,
            cy: p.center.y,
            area: p.area,
            fg: p.fg_prob,
            feat: p.feature.clone(),
        }
    }
}

impl From<PartRecord> for Part {
    fn from(r: PartRecord) -> Self {
        Self {
            id: r.id,
            center: Point::new(r.cx, r.cy),
            area: r.area,
            fg_prob: r.fg,
            feature: r.feat,
        }
    }
}

impl Sequence {
    pub fn validate(&self) -> Result<()> {
        if self.canvas.0 == 0 || self.canvas.1 == 0 {
            return Err(Error::InvalidSequence("canvas must be non-empty".into()));
        }
        let b = &self.init_box;
        if !(b.w > 0.0 && b.h > 0.0 && b.cx.is_finite() && b.cy.is_finite()) {
            return Err(Error::InvalidSequence(
                "init box must have a finite center and positive size".into(),
            ));
        }
        for pair in self.frames.windows(2) {
            if pair[1].index <= pair[0].index {
                return Err(Error::InvalidSequence(format!(
                    "frame index {} does not follow {}",
                    pair[1].index, pair[0].index
                )));
            }
        }
        for frame in &self.frames {
            frame.validate(self.feature_dim)?;
        }
        Ok(())
    }
}

pub fn read_sequence(path: impl AsRef<Path>) -> Result<Sequence> {
    let file = File::open(path)?;
    parse_sequence(BufReader::new(file))
}

pub fn parse_sequence(reader: impl BufRead) -> Result<Sequence> {
    let mut lines = reader.lines().enumerate();
    let parse_err = |line: usize, e: serde_json::Error| Error::Parse {
        line,
        message: e.to_string(),
    };

    let header: HeaderRecord = loop {
        match lines.next() {
            None => {
                return Err(Error::Parse {
                    line: 1,
                    message: "missing header line".into(),
                })
            }
            Some((i, line)) => {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                break serde_json::from_str(&line).map_err(|e| parse_err(i + 1, e))?;
            }
        }
    };
    if header.version != FORMAT_VERSION {
        return Err(Error::InvalidSequence(format!(
            "unsupported format version {}",
            header.version
        )));
    }

    let mut frames = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: FrameRecord = serde_json::from_str(&line).map_err(|e| parse_err(i + 1, e))?;
        frames.push(Frame {
            index: record.index,
            parts: record.parts.into_iter().map(Part::from).collect(),
            gt_box: record.gt_box.map(BoundingBox::from_array),
        });
    }
    frames.sort_by_key(|f| f.index);

    let seq = Sequence {
        feature_dim: header.feature_dim,
        canvas: (header.canvas[0], header.canvas[1]),
        init_box: BoundingBox::from_array(header.init_box),
        superpixel_range: (header.superpixel_range[0], header.superpixel_range[1]),
        frames,
    };
    seq.validate()?;
    Ok(seq)
}

pub fn write_sequence(seq: &Sequence, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    encode_sequence(seq, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn encode_sequence(seq: &Sequence, out: &mut impl Write) -> Result<()> {
    let header = HeaderRecord {
        version: FORMAT_VERSION,
        feature_dim: seq.feature_dim,
        canvas: [seq.canvas.0, seq.canvas.1],
        init_box: seq.init_box.to_array(),
        superpixel_range: [seq.superpixel_range.0, seq.superpixel_range.1],
    };
    serde_json::to_writer(&mut *out, &header)?;
    out.write_all(b"\n")?;
    for frame in &seq.frames {
        let record = FrameRecord {
            index: frame.index,
            parts: frame.parts.iter().map(PartRecord::from).collect(),
            gt_box: frame.gt_box.map(BoundingBox::to_array),
        };
        serde_json::to_writer(&mut *out, &record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
