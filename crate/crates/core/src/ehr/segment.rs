use std::collections::BTreeSet;

use super::Admission;

/// Width of one segment: 24 hours in minutes.
pub const SEGMENT_MINUTES: u32 = 1440;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub start_minute: u32,
    /// Exclusive.
    pub end_minute: u32,
    pub code_indices: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentedAdmission {
    pub admission_id: String,
    pub segments: Vec<Segment>,
}

/// Tiles the admission into half-open 1440-minute windows; an event at
/// minute `t` lands in segment `t / 1440`.
pub fn segment_admission(a: &Admission) -> SegmentedAdmission {
    let duration = a.duration_minutes.max(1);
    let count = duration.div_ceil(SEGMENT_MINUTES) as usize;
    let mut segments: Vec<Segment> = (0..count as u32)
        .map(|k| Segment {
            start_minute: k * SEGMENT_MINUTES,
            end_minute: ((k + 1) * SEGMENT_MINUTES).min(duration),
            code_indices: BTreeSet::new(),
        })
        .collect();
    for e in &a.events {
        let k = (e.time / SEGMENT_MINUTES) as usize;
        // events past the declared duration violate the admission invariant;
        // clamp instead of panicking
        let k = k.min(count - 1);
        segments[k].code_indices.insert(e.code);
    }
    SegmentedAdmission {
        admission_id: a.admission_id.clone(),
        segments,
    }
}
