use std::collections::BTreeMap;
use std::fmt;

use super::{Label, Sample};
use crate::frontend::Granularity;

/// Per-class counts, one row per granularity present.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetStats {
    pub counts: BTreeMap<Granularity, [usize; 4]>,
}

impl DatasetStats {
    pub fn from_labels<'a>(g: Granularity, labels: impl IntoIterator<Item = &'a Label>) -> Self {
        let mut st = DatasetStats::default();
        for l in labels {
            st.counts.entry(g).or_default()[l.index()] += 1;
        }
        st
    }

    pub fn count(&self, g: Granularity, label: Label) -> usize {
        self.counts.get(&g).map_or(0, |c| c[label.index()])
    }

    /// Counts summed over granularities.
    pub fn totals(&self) -> [usize; 4] {
        let mut t = [0; 4];
        for c in self.counts.values() {
            for k in 0..4 {
                t[k] += c[k];
            }
        }
        t
    }
}

pub fn dataset_stats(samples: &[Sample]) -> DatasetStats {
    let mut st = DatasetStats::default();
    for s in samples {
        st.counts.entry(s.granularity).or_default()[s.label.index()] += 1;
    }
    st
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<10}", "")?;
        for l in Label::ALL {
            write!(f, "{:>8}", l.as_str())?;
        }
        writeln!(f)?;
        let rows: Vec<(String, [usize; 4])> = if self.counts.is_empty() {
            vec![("total".into(), [0; 4])]
        } else {
            self.counts.iter().map(|(g, c)| (g.as_str().to_string(), *c)).collect()
        };
        for (name, c) in rows {
            write!(f, "{name:<10}")?;
            for n in c {
                write!(f, "{n:>8}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
