//! Temporal history compression.
//!
//! Of `n` history frames the most recent `k` are kept at full fidelity.
//! Older frames are resized to `(id, kind)` records and padded or truncated
//! to exactly `c` records.

use crate::env::{Observation, WidgetKind};
use serde::{Deserialize, Serialize};

pub const PAD_ID: &str = "∅";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CompressedRecord {
    pub id: String,
    pub kind: Option<WidgetKind>,
}

impl CompressedRecord {
    pub fn pad() -> Self {
        CompressedRecord {
            id: PAD_ID.to_string(),
            kind: None,
        }
    }

    pub fn is_pad(&self) -> bool {
        self.kind.is_none() && self.id == PAD_ID
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TcsmConfig {
    pub k: usize,
    pub c: usize,
}

impl Default for TcsmConfig {
    fn default() -> Self {
        TcsmConfig { k: 2, c: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressedContext {
    /// Oldest first.
    pub compressed_frames: Vec<Vec<CompressedRecord>>,
    /// Oldest first; the last entry is the current screen.
    pub full_frames: Vec<Observation>,
    pub k: usize,
    pub c: usize,
}

impl CompressedContext {
    pub fn current(&self) -> Option<&Observation> {
        self.full_frames.last()
    }

    pub fn previous(&self) -> Option<&Observation> {
        self.full_frames.len().checked_sub(2).map(|i| &self.full_frames[i])
    }

    /// Total number of history frames `n`.
    pub fn frames(&self) -> usize {
        self.full_frames.len() + self.compressed_frames.len()
    }

    pub fn record_count(&self) -> usize {
        self.full_frames.iter().map(|f| f.widgets.len()).sum::<usize>()
            + self.compressed_frames.iter().map(Vec::len).sum::<usize>()
    }
}

fn resize_and_pad(frame: &Observation, c: usize) -> Vec<CompressedRecord> {
    let mut out: Vec<CompressedRecord> = frame
        .widgets
        .iter()
        .take(c)
        .map(|w| CompressedRecord {
            id: w.id.clone(),
            kind: Some(w.kind),
        })
        .collect();
    out.resize(c, CompressedRecord::pad());
    out
}

/// Frames with 1-based index `i >= n - k + 1` stay full.
pub fn compress_history(history: &[Observation], k: usize, c: usize) -> CompressedContext {
    let k = k.max(1);
    let split = history.len().saturating_sub(k);
    CompressedContext {
        compressed_frames: history[..split].iter().map(|f| resize_and_pad(f, c)).collect(),
        full_frames: history[split..].to_vec(),
        k,
        c,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{spawn, Action};

    fn history(n: usize) -> Vec<Observation> {
        let mut s = spawn("editor", 3).unwrap();
        let mut out = vec![s.observe()];
        let clicks = ["file", "file", "edit", "title", "edit", "format", "format", "author", "body"];
        for id in clicks.iter().cycle().take(n.saturating_sub(1)) {
            let rect = s.widget(id).unwrap().rect;
            s = s.apply(&Action::click_at(&rect));
            out.push(s.observe());
        }
        out
    }

    #[test]
    fn five_frames_keep_last_two() {
        let h = history(5);
        let ctx = compress_history(&h, 2, 16);
        assert_eq!(ctx.full_frames, h[3..].to_vec());
        assert_eq!(ctx.compressed_frames.len(), 3);
        for (frame, raw) in ctx.compressed_frames.iter().zip(&h[..3]) {
            assert_eq!(frame.len(), 16);
            for (rec, w) in frame.iter().zip(&raw.widgets) {
                assert_eq!(rec.id, w.id);
                assert_eq!(rec.kind, Some(w.kind));
            }
        }
        assert_eq!(ctx.frames(), 5);
    }

    #[test]
    fn short_history_stays_full() {
        let h = history(2);
        let ctx = compress_history(&h, 8, 16);
        assert_eq!(ctx.full_frames.len(), 2);
        assert!(ctx.compressed_frames.is_empty());
    }

    #[test]
    fn padding_and_truncation() {
        let mut frame = spawn("settings", 0).unwrap().observe();
        frame.widgets.truncate(3);
        let ctx = compress_history(&[frame.clone(), frame.clone()], 1, 8);
        let c = &ctx.compressed_frames[0];
        assert_eq!(c.len(), 8);
        assert_eq!(c.iter().filter(|r| r.is_pad()).count(), 5);
        let ctx = compress_history(&[frame.clone(), frame], 1, 2);
        assert_eq!(ctx.compressed_frames[0].len(), 2);
        assert!(ctx.compressed_frames[0].iter().all(|r| !r.is_pad()));
    }

    #[test]
    fn budget_bound_over_grid() {
        for n in 1..=10 {
            let h = history(n);
            let f_max = h.iter().map(|f| f.widgets.len()).max().unwrap();
            for k in 1..=10 {
                let c = 16;
                let ctx = compress_history(&h, k, c);
                assert_eq!(ctx.full_frames.len(), k.min(n));
                let bound = k * f_max + n.saturating_sub(k) * c;
                assert!(ctx.record_count() <= bound, "n={n} k={k}");
                assert_eq!(ctx.full_frames[..], h[n - k.min(n)..]);
            }
        }
    }
}
