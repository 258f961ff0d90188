use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, Label, Sample};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub fractions: [f64; 3],
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(fractions: [f64; 3], seed: u64) -> Result<Self, CorpusError> {
        let sum: f64 = fractions.iter().sum();
        if fractions.iter().any(|&f| f.is_nan() || f <= 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(CorpusError::BadFractions(fractions));
        }
        Ok(SplitSpec { fractions, seed })
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { fractions: [0.8, 0.1, 0.1], seed: 0 }
    }
}

/// Largest-remainder apportionment of `n` items. Ties go to the earlier part.
pub fn apportion(n: usize, fractions: &[f64; 3]) -> [usize; 3] {
    let ideal = fractions.map(|f| n as f64 * f);
    let mut sizes = ideal.map(|x| x.floor() as usize);
    let mut left = n - sizes.iter().sum::<usize>();
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| (ideal[b] - ideal[b].floor()).total_cmp(&(ideal[a] - ideal[a].floor())).then(a.cmp(&b)));
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[k] += 1;
        left -= 1;
    }
    sizes
}

pub type Splits = (Vec<Sample>, Vec<Sample>, Vec<Sample>);

/// Stratified train/validation/test partition.
pub fn split(samples: &[Sample], spec: &SplitSpec) -> Result<Splits, CorpusError> {
    SplitSpec::new(spec.fractions, spec.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut parts: [Vec<Sample>; 3] = Default::default();
    for label in Label::ALL {
        let mut class: Vec<&Sample> = samples.iter().filter(|s| s.label == label).collect();
        if class.is_empty() {
            continue;
        }
        if class.len() < 3 {
            return Err(CorpusError::ClassTooSmall { label, count: class.len() });
        }
        class.shuffle(&mut rng);
        let sizes = apportion(class.len(), &spec.fractions);
        let mut it = class.into_iter();
        for (k, &n) in sizes.iter().enumerate() {
            parts[k].extend(it.by_ref().take(n).cloned());
        }
    }
    let [a, b, c] = parts;
    Ok((a, b, c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apportion_examples() {
        assert_eq!(apportion(100, &[0.8, 0.1, 0.1]), [80, 10, 10]);
        assert_eq!(apportion(29, &[0.8, 0.1, 0.1]), [23, 3, 3]);
        assert_eq!(apportion(3, &[0.8, 0.1, 0.1]), [3, 0, 0]);
        assert_eq!(apportion(0, &[0.8, 0.1, 0.1]), [0, 0, 0]);
    }

    #[test]
    fn bad_fractions() {
        assert!(SplitSpec::new([0.8, 0.2, 0.0], 1).is_err());
        assert!(SplitSpec::new([0.5, 0.2, 0.2], 1).is_err());
        assert!(SplitSpec::new([0.8, 0.1, 0.1], 1).is_ok());
    }
}
