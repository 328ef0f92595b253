use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::AttributionError;
use crate::trace::{Segment, TokenRecord};

/// Ordered, non-overlapping document-token ranges (document-local positions)
/// that together cover the whole document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceSegmentation {
    ranges: Vec<Range<usize>>,
}

impl EvidenceSegmentation {
    pub fn new(ranges: Vec<Range<usize>>, document_len: usize) -> Result<Self, AttributionError> {
        let mut expect = 0;
        for (i, r) in ranges.iter().enumerate() {
            if r.start != expect || r.end <= r.start {
                return Err(AttributionError::Segmentation(format!(
                    "evidence {i} is [{}, {}) but must start at {expect} and be non-empty",
                    r.start, r.end
                )));
            }
            expect = r.end;
        }
        if expect != document_len {
            return Err(AttributionError::Segmentation(format!(
                "evidence ranges cover {expect} of {document_len} document tokens"
            )));
        }
        Ok(Self { ranges })
    }

    /// Builds the segmentation from `passage_index` on document tokens;
    /// `None` when the document carries no passage indices.
    pub fn from_tokens(tokens: &[TokenRecord]) -> Option<Self> {
        let passages: Vec<Option<usize>> = tokens
            .iter()
            .filter(|t| t.segment == Segment::Document)
            .map(|t| t.passage_index)
            .collect();
        if passages.is_empty() || passages.iter().any(Option::is_none) {
            return None;
        }
        let mut ranges: Vec<Range<usize>> = Vec::new();
        for (pos, p) in passages.iter().enumerate() {
            let p = p.unwrap_or_default();
            if p < ranges.len() {
                ranges[p].end = pos + 1;
            } else {
                ranges.push(pos..pos + 1);
            }
        }
        Self::new(ranges, passages.len()).ok()
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    /// Index of the evidence span containing document position `pos`.
    pub fn evidence_of(&self, pos: usize) -> Option<usize> {
        let i = self.ranges.partition_point(|r| r.end <= pos);
        (i < self.ranges.len() && self.ranges[i].contains(&pos)).then_some(i)
    }
}

#[cfg(test)]
#[allow(clippy::single_range_in_vec_init)]
mod tests {
    use super::*;

    #[test]
    fn tiling_is_enforced() {
        assert!(EvidenceSegmentation::new(vec![0..3, 3..5], 5).is_ok());
        assert!(EvidenceSegmentation::new(vec![0..3, 4..5], 5).is_err());
        assert!(EvidenceSegmentation::new(vec![0..3, 2..5], 5).is_err());
        assert!(EvidenceSegmentation::new(vec![0..3], 5).is_err());
        assert!(EvidenceSegmentation::new(vec![0..0, 0..5], 5).is_err());
    }

    #[test]
    fn evidence_lookup() {
        let s = EvidenceSegmentation::new(vec![0..3, 3..4, 4..9], 9).unwrap();
        assert_eq!(s.evidence_of(0), Some(0));
        assert_eq!(s.evidence_of(3), Some(1));
        assert_eq!(s.evidence_of(8), Some(2));
        assert_eq!(s.evidence_of(9), None);
    }
}
