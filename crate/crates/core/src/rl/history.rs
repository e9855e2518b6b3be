//! History windows of (observation, previous action) frames.
//!
//! Frames form a persistent list: each step's window points at its parent, so
//! consecutive transitions share storage and an episode start is simply a
//! frame without a parent.

use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowLayout {
    pub history: usize,
    pub obs_width: usize,
    pub action_width: usize,
}

impl WindowLayout {
    pub fn new(history: usize, obs_width: usize, action_width: usize) -> Self {
        assert!(history >= 1, "history length must be at least 1");
        Self {
            history,
            obs_width,
            action_width,
        }
    }

    pub fn frame_width(&self) -> usize {
        self.obs_width + self.action_width
    }

    pub fn width(&self) -> usize {
        self.history * self.frame_width()
    }

    /// Expands per-frame multipliers to the whole window; actions pass unscaled.
    pub fn scale(&self, obs_scale: &[f64]) -> Vec<f64> {
        assert_eq!(obs_scale.len(), self.obs_width);
        let mut frame = obs_scale.to_vec();
        frame.extend(std::iter::repeat(1.0).take(self.action_width));
        frame.repeat(self.history)
    }
}

#[derive(Debug, PartialEq)]
pub struct Frame {
    /// Observation features followed by the action that led to them.
    data: Box<[f64]>,
    parent: Option<Window>,
}

pub type Window = Arc<Frame>;

impl Frame {
    /// First frame of an episode; the previous action is zero.
    pub fn root(features: Vec<f64>, action_width: usize) -> Window {
        let mut data = features;
        data.extend(std::iter::repeat(0.0).take(action_width));
        Arc::new(Frame {
            data: data.into_boxed_slice(),
            parent: None,
        })
    }

    pub fn child(parent: &Window, features: Vec<f64>, action: &[f64]) -> Window {
        let mut data = features;
        data.extend_from_slice(action);
        Arc::new(Frame {
            data: data.into_boxed_slice(),
            parent: Some(Arc::clone(parent)),
        })
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn parent(&self) -> Option<&Window> {
        self.parent.as_ref()
    }

    pub fn features(&self, layout: &WindowLayout) -> &[f64] {
        &self.data[..layout.obs_width]
    }

    pub fn action(&self, layout: &WindowLayout) -> &[f64] {
        &self.data[layout.obs_width..]
    }

    /// Frames of this episode available to the window (at most `history`).
    pub fn depth(&self, history: usize) -> usize {
        let mut n = 1;
        let mut cur = self.parent.as_ref();
        while let Some(p) = cur {
            if n == history {
                break;
            }
            n += 1;
            cur = p.parent.as_ref();
        }
        n
    }

    /// Flattened window, oldest frame first, zero-padded at the front.
    pub fn write_window(&self, layout: &WindowLayout, out: &mut [f64]) {
        let fw = layout.frame_width();
        assert_eq!(out.len(), layout.width());
        let mut slot = layout.history;
        let mut cur: Option<&Frame> = Some(self);
        while slot > 0 {
            slot -= 1;
            let dst = &mut out[slot * fw..(slot + 1) * fw];
            match cur {
                Some(f) => {
                    dst.copy_from_slice(&f.data);
                    cur = f.parent.as_deref();
                }
                None => dst.fill(0.0),
            }
        }
    }

    pub fn window(&self, layout: &WindowLayout) -> Vec<f64> {
        let mut out = vec![0.0; layout.width()];
        self.write_window(layout, &mut out);
        out
    }
}

/// The running window of one episode.
#[derive(Debug, Clone)]
pub struct HistoryWindow {
    layout: WindowLayout,
    head: Option<Window>,
}

impl HistoryWindow {
    pub fn new(layout: WindowLayout) -> Self {
        Self { layout, head: None }
    }

    pub fn layout(&self) -> &WindowLayout {
        &self.layout
    }

    pub fn reset(&mut self, features: Vec<f64>) -> Window {
        let w = Frame::root(features, self.layout.action_width);
        self.head = Some(Arc::clone(&w));
        w
    }

    pub fn push(&mut self, features: Vec<f64>, action: &[f64]) -> Window {
        let parent = self.head.as_ref().expect("window reset before push");
        let w = Frame::child(parent, features, action);
        self.head = Some(Arc::clone(&w));
        w
    }

    pub fn current(&self) -> Option<&Window> {
        self.head.as_ref()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.head.as_ref().expect("window reset").window(&self.layout)
    }

    /// Zero-padded slots in the current window.
    pub fn padded_slots(&self) -> usize {
        self.layout.history - self.head.as_ref().map_or(0, |h| h.depth(self.layout.history))
    }
}
