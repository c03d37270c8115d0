use crate::error::{Error, Result};

/// A single-channel record of detection timestamps in picoseconds.
///
/// Tags are strictly increasing. Construct through [`TimeTagStream::new`] to
/// have that checked, or [`TimeTagStream::from_sorted_unchecked`] when the
/// producer already guarantees it.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TimeTagStream {
    pub channel: u16,
    tags: Vec<u64>,
}

impl TimeTagStream {
    pub fn new(channel: u16, tags: Vec<u64>) -> Result<Self> {
        check_strictly_increasing(&tags)?;
        Ok(Self { channel, tags })
    }

    pub fn from_sorted_unchecked(channel: u16, tags: Vec<u64>) -> Self {
        debug_assert!(tags.windows(2).all(|w| w[0] < w[1]));
        Self { channel, tags }
    }

    pub fn tags(&self) -> &[u64] {
        &self.tags
    }

    pub fn into_tags(self) -> Vec<u64> {
        self.tags
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }
}

/// Checks for strict ordering, reporting the first violation.
pub fn check_strictly_increasing(tags: &[u64]) -> Result<()> {
    match tags.windows(2).position(|w| w[1] <= w[0]) {
        None => Ok(()),
        Some(i) => Err(Error::Unsorted { index: i + 1, previous: tags[i], value: tags[i + 1] }),
    }
}

/// Checks for non-decreasing order (ties allowed), reporting the first violation.
pub fn check_sorted(tags: &[u64]) -> Result<()> {
    match tags.windows(2).position(|w| w[1] < w[0]) {
        None => Ok(()),
        Some(i) => Err(Error::Unsorted { index: i + 1, previous: tags[i], value: tags[i + 1] }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicates_and_reports_offset() {
        let err = TimeTagStream::new(0, vec![1, 5, 5, 7]).unwrap_err();
        assert_eq!(err, Error::Unsorted { index: 2, previous: 5, value: 5 });
        assert!(check_sorted(&[1, 5, 5, 7]).is_ok());
        assert!(matches!(check_sorted(&[3, 2]), Err(Error::Unsorted { index: 1, .. })));
    }
}
