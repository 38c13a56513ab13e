use alloc::vec;
use alloc::vec::Vec;

/// Lengths of the sequences packed into the rows of a matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segments {
    starts: Vec<usize>,
    total: usize,
}

impl Segments {
    pub fn new(lengths: &[usize]) -> Self {
        let mut starts = Vec::with_capacity(lengths.len());
        let mut total = 0;
        for &len in lengths {
            starts.push(total);
            total += len;
        }
        Self { starts, total }
    }

    pub fn single(n: usize) -> Self {
        Self {
            starts: vec![0],
            total: n,
        }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn count(&self) -> usize {
        self.starts.len()
    }

    /// Row range of segment `i`.
    pub fn range(&self, i: usize) -> core::ops::Range<usize> {
        let end = self.starts.get(i + 1).copied().unwrap_or(self.total);
        self.starts[i]..end
    }

    pub fn ranges(&self) -> impl Iterator<Item = core::ops::Range<usize>> + '_ {
        (0..self.count()).map(|i| self.range(i))
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.ranges().map(|r| r.len()).collect()
    }
}
