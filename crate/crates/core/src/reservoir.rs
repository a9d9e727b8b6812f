//! Fixed-capacity uniform reservoir sampling (Algorithm R).

use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct Reservoir<T> {
    capacity: usize,
    seen: u64,
    items: Vec<T>,
    rng: ChaCha8Rng,
}

impl<T> Reservoir<T> {
    pub fn new(capacity: usize, rng: ChaCha8Rng) -> Self {
        assert!(capacity > 0, "reservoir capacity must be positive");
        Reservoir { capacity, seen: 0, items: Vec::new(), rng }
    }

    /// Offers an item. After `k` offers every offered item is retained with
    /// probability `min(1, capacity / k)`.
    pub fn insert(&mut self, item: T) {
        self.seen += 1;
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            let j = self.rng.random_range(0..self.seen);
            if (j as usize) < self.capacity {
                self.items[j as usize] = item;
            }
        }
    }

    pub fn items(&self) -> &[T] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::trace_rng;

    #[test]
    fn keeps_everything_below_capacity() {
        let mut r = Reservoir::new(4, trace_rng(0, 0));
        for i in 0..3 {
            r.insert(i);
        }
        assert_eq!(r.items(), &[0, 1, 2]);
        assert_eq!(r.seen(), 3);
    }

    /// 10^4 tagged insertions into a 256-slot reservoir, repeated; tag
    /// retention counts grouped into 100 bins of 100 consecutive tags must
    /// pass a chi-square test at p > 0.01.
    #[test]
    fn retention_is_uniform() {
        let bins = 100usize;
        let mut counts = vec![0u64; bins];
        let reps = 200;
        for rep in 0..reps {
            let mut r = Reservoir::new(256, trace_rng(17, rep));
            for tag in 0..10_000usize {
                r.insert(tag);
            }
            for &tag in r.items() {
                counts[tag / 100] += 1;
            }
        }
        let expected = (reps * 256) as f64 / bins as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // Upper 1% point of chi-square with 99 degrees of freedom.
        assert!(chi2 < 134.64, "chi2 = {chi2}");
    }
}
