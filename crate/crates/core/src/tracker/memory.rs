//! Bounded per-frame sample memory for online updates.

use std::collections::VecDeque;
use std::sync::Arc;

use super::model::FrameMaps;
use crate::bbox::BBox;

#[derive(Debug, Clone)]
pub struct FrameSamples<T> {
    pub frame: usize,
    pub maps: Arc<FrameMaps<T>>,
    pub boxes: Vec<BBox>,
}

/// Positives and negatives grouped by frame; the oldest frame is evicted
/// once a side exceeds its frame capacity.
#[derive(Debug, Clone)]
pub struct SampleMemory<T> {
    pos: VecDeque<FrameSamples<T>>,
    neg: VecDeque<FrameSamples<T>>,
    pos_frames: usize,
    neg_frames: usize,
}

fn push_bounded<T>(q: &mut VecDeque<FrameSamples<T>>, cap: usize, item: FrameSamples<T>) {
    q.push_back(item);
    while q.len() > cap {
        q.pop_front();
    }
}

fn gather<T>(q: &VecDeque<FrameSamples<T>>, last: usize) -> Vec<(&FrameMaps<T>, BBox)> {
    q.iter()
        .skip(q.len().saturating_sub(last))
        .flat_map(|f| f.boxes.iter().map(move |b| (f.maps.as_ref(), *b)))
        .collect()
}

impl<T> SampleMemory<T> {
    pub fn new(pos_frames: usize, neg_frames: usize) -> Self {
        Self { pos: VecDeque::new(), neg: VecDeque::new(), pos_frames, neg_frames }
    }

    pub fn push_positives(&mut self, frame: usize, maps: Arc<FrameMaps<T>>, boxes: Vec<BBox>) {
        push_bounded(&mut self.pos, self.pos_frames, FrameSamples { frame, maps, boxes });
    }

    pub fn push_negatives(&mut self, frame: usize, maps: Arc<FrameMaps<T>>, boxes: Vec<BBox>) {
        push_bounded(&mut self.neg, self.neg_frames, FrameSamples { frame, maps, boxes });
    }

    pub fn positive_frames(&self) -> impl Iterator<Item = &FrameSamples<T>> {
        self.pos.iter()
    }

    pub fn negative_frames(&self) -> impl Iterator<Item = &FrameSamples<T>> {
        self.neg.iter()
    }

    pub fn num_positives(&self) -> usize {
        self.pos.iter().map(|f| f.boxes.len()).sum()
    }

    pub fn num_negatives(&self) -> usize {
        self.neg.iter().map(|f| f.boxes.len()).sum()
    }

    /// Positive samples from the most recent `last` stored frames.
    pub fn positives(&self, last: usize) -> Vec<(&FrameMaps<T>, BBox)> {
        gather(&self.pos, last)
    }

    pub fn negatives(&self, last: usize) -> Vec<(&FrameMaps<T>, BBox)> {
        gather(&self.neg, last)
    }
}
