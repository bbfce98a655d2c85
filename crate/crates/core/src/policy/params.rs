//! Flat parameter vector with a named segment table, plus the binary
//! checkpoint codec.
//!
//! Checkpoint layout, all integers little-endian:
//!
//! ```text
//! b"SEAF1"
//! u64            dim
//! u32            segment count
//! per segment:   u16 name length, name bytes (UTF-8), u64 start, u64 len
//! dim x f64      values
//! ```

use std::fmt;

pub const MAGIC: &[u8; 5] = b"SEAF1";
pub const DEFAULT_DIM: usize = 64;

/// Raw feature widths of each head; a layout of exactly these sizes stores
/// features without folding.
pub const SHARED_WIDTH: usize = 8;
pub const THOUGHT_WIDTH: usize = 20;
pub const ACTION_WIDTH: usize = 20;
pub const GROUNDING_WIDTH: usize = 16;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ParamError {
    #[error("dimension {0} too small for four segments")]
    DimTooSmall(usize),
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("non-finite parameter at index {0}")]
    NonFinite(usize),
    #[error("checkpoint: {0}")]
    Decode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SegmentKind {
    SharedFeatures,
    ThoughtHead,
    ActionHead,
    GroundingHead,
}

impl SegmentKind {
    pub const ALL: [SegmentKind; 4] = [
        SegmentKind::SharedFeatures,
        SegmentKind::ThoughtHead,
        SegmentKind::ActionHead,
        SegmentKind::GroundingHead,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SegmentKind::SharedFeatures => "shared_features",
            SegmentKind::ThoughtHead => "thought_head",
            SegmentKind::ActionHead => "action_head",
            SegmentKind::GroundingHead => "grounding_head",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        SegmentKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl fmt::Display for SegmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Segment {
    pub kind: SegmentKind,
    pub start: usize,
    pub len: usize,
}

impl Segment {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

/// Segment table. Segments appear in ascending `start` order and partition
/// `[0, dim)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Layout {
    segments: Vec<Segment>,
    dim: usize,
}

impl Layout {
    pub fn for_dim(dim: usize) -> Result<Layout, ParamError> {
        if dim < 4 {
            return Err(ParamError::DimTooSmall(dim));
        }
        let total = SHARED_WIDTH + THOUGHT_WIDTH + ACTION_WIDTH + GROUNDING_WIDTH;
        let shared = (dim * SHARED_WIDTH / total).max(1);
        let thought = (dim * THOUGHT_WIDTH / total).max(1);
        let action = (dim * ACTION_WIDTH / total).max(1);
        let grounding = dim - shared - thought - action;
        if grounding == 0 {
            return Err(ParamError::DimTooSmall(dim));
        }
        let mut start = 0;
        let segments = [
            (SegmentKind::SharedFeatures, shared),
            (SegmentKind::ThoughtHead, thought),
            (SegmentKind::ActionHead, action),
            (SegmentKind::GroundingHead, grounding),
        ]
        .into_iter()
        .map(|(kind, len)| {
            let s = Segment { kind, start, len };
            start += len;
            s
        })
        .collect();
        Ok(Layout { segments, dim })
    }

    fn from_segments(dim: usize, mut segments: Vec<Segment>) -> Result<Layout, ParamError> {
        segments.sort_by_key(|s| s.start);
        let mut cursor = 0;
        for s in &segments {
            if s.start != cursor || s.len == 0 {
                return Err(ParamError::Decode("segments do not partition the vector".into()));
            }
            cursor += s.len;
        }
        if cursor != dim {
            return Err(ParamError::Decode("segments do not cover the vector".into()));
        }
        for kind in SegmentKind::ALL {
            if segments.iter().filter(|s| s.kind == kind).count() != 1 {
                return Err(ParamError::Decode(format!("segment `{kind}` must appear once")));
            }
        }
        Ok(Layout { segments, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, kind: SegmentKind) -> Segment {
        *self
            .segments
            .iter()
            .find(|s| s.kind == kind)
            .expect("layout holds every segment kind")
    }

    /// Absolute index of raw feature `raw` of a head. Raw indices beyond the
    /// segment length fold back modulo the length.
    pub fn slot(&self, kind: SegmentKind, raw: usize) -> usize {
        let s = self.segment(kind);
        s.start + raw % s.len
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
    layout: Layout,
}

impl ParamVector {
    pub fn zeros(dim: usize) -> Result<ParamVector, ParamError> {
        let layout = Layout::for_dim(dim)?;
        Ok(ParamVector {
            values: vec![0.0; dim],
            layout,
        })
    }

    pub fn from_values(layout: Layout, values: Vec<f64>) -> Result<ParamVector, ParamError> {
        if values.len() != layout.dim() {
            return Err(ParamError::DimMismatch {
                left: values.len(),
                right: layout.dim(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(ParamError::NonFinite(i));
        }
        Ok(ParamVector { values, layout })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn dot(&self, features: &[(usize, f64)]) -> f64 {
        features.iter().map(|&(i, v)| self.values[i] * v).sum()
    }

    pub fn scaled(&self, c: f64) -> ParamVector {
        ParamVector {
            values: self.values.iter().map(|v| v * c).collect(),
            layout: self.layout.clone(),
        }
    }

    /// Bit-exact encoding.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 8 * self.dim());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.dim() as u64).to_le_bytes());
        out.extend_from_slice(&(self.layout.segments.len() as u32).to_le_bytes());
        for s in &self.layout.segments {
            let name = s.kind.name().as_bytes();
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name);
            out.extend_from_slice(&(s.start as u64).to_le_bytes());
            out.extend_from_slice(&(s.len as u64).to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<ParamVector, ParamError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(ParamError::Decode("bad magic".into()));
        }
        let dim = usize::try_from(r.u64()?).map_err(|_| ParamError::Decode("dim overflow".into()))?;
        let count = r.u32()? as usize;
        if count != SegmentKind::ALL.len() {
            return Err(ParamError::Decode(format!("expected 4 segments, found {count}")));
        }
        let mut segments = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| ParamError::Decode("segment name is not UTF-8".into()))?;
            let kind = SegmentKind::from_name(name)
                .ok_or_else(|| ParamError::Decode(format!("unknown segment `{name}`")))?;
            let start = usize::try_from(r.u64()?).map_err(|_| ParamError::Decode("start overflow".into()))?;
            let len = usize::try_from(r.u64()?).map_err(|_| ParamError::Decode("len overflow".into()))?;
            if start.checked_add(len).is_none() {
                return Err(ParamError::Decode("segment overflow".into()));
            }
            segments.push(Segment { kind, start, len });
        }
        let layout = Layout::from_segments(dim, segments)?;
        let remaining = bytes.len() - r.pos;
        if remaining != dim.checked_mul(8).ok_or_else(|| ParamError::Decode("dim overflow".into()))? {
            return Err(ParamError::Decode(format!(
                "expected {} value bytes, found {remaining}",
                dim * 8
            )));
        }
        let values = (0..dim).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        ParamVector::from_values(layout, values)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ParamError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| ParamError::Decode("truncated".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16, ParamError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32, ParamError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, ParamError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, ParamError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
