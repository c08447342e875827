use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A named `rows × cols` row-major block of a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
    pub bias: bool,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Ordered, contiguous segment table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Layout {
    segments: Vec<Segment>,
}

impl Layout {
    pub(crate) fn builder() -> LayoutBuilder {
        LayoutBuilder { segments: Vec::new(), offset: 0 }
    }

    /// Validates contiguity of an externally supplied table.
    pub fn from_segments(segments: Vec<Segment>) -> Result<Self> {
        let mut expect = 0;
        for s in &segments {
            if s.offset != expect {
                return Err(Error::config("layout segments must be contiguous and ordered"));
            }
            expect += s.len();
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total(&self) -> usize {
        self.segments.last().map_or(0, |s| s.offset + s.len())
    }

    pub fn get(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }

    pub(crate) fn range_of(&self, name: &str) -> Range<usize> {
        self.get(name)
            .unwrap_or_else(|| panic!("layout has no segment `{name}`"))
            .range()
    }

    /// Splits a flat vector into per-segment slices.
    pub fn decode<'a>(&self, flat: &'a [f64]) -> Result<Vec<(&str, &'a [f64])>> {
        if flat.len() != self.total() {
            return Err(Error::DimensionMismatch {
                what: "flat parameter vector",
                expected: self.total(),
                found: flat.len(),
            });
        }
        Ok(self
            .segments
            .iter()
            .map(|s| (s.name.as_str(), &flat[s.range()]))
            .collect())
    }

    pub fn encode(&self, blocks: &[(&str, &[f64])]) -> Result<Vec<f64>> {
        let mut out = alloc::vec![0.0; self.total()];
        for (name, values) in blocks {
            let seg = self
                .get(name)
                .ok_or_else(|| Error::config(alloc::format!("unknown segment {name}")))?;
            if values.len() != seg.len() {
                return Err(Error::DimensionMismatch {
                    what: "segment",
                    expected: seg.len(),
                    found: values.len(),
                });
            }
            out[seg.range()].copy_from_slice(values);
        }
        Ok(out)
    }
}

pub(crate) struct LayoutBuilder {
    segments: Vec<Segment>,
    offset: usize,
}

impl LayoutBuilder {
    pub(crate) fn weight(self, name: &str, rows: usize, cols: usize) -> Self {
        self.push(name, rows, cols, false)
    }

    pub(crate) fn bias(self, name: &str, len: usize) -> Self {
        self.push(name, len, 1, true)
    }

    fn push(mut self, name: &str, rows: usize, cols: usize, bias: bool) -> Self {
        self.segments.push(Segment {
            name: name.into(),
            offset: self.offset,
            rows,
            cols,
            bias,
        });
        self.offset += rows * cols;
        self
    }

    pub(crate) fn build(self) -> Layout {
        Layout { segments: self.segments }
    }
}
