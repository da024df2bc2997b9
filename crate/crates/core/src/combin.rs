//! Lexicographic k-subset enumeration.

/// Iterator over all size-`k` subsets of `0..n` in lexicographic order.
pub(crate) struct Combinations {
    n: usize,
    k: usize,
    state: Option<Vec<usize>>,
}

impl Combinations {
    pub(crate) fn new(n: usize, k: usize) -> Combinations {
        let state = if k <= n {
            Some((0..k).collect())
        } else {
            None
        };
        Combinations { n, k, state }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.state.clone()?;
        // advance: find the rightmost index that can still move up
        let next = {
            let mut idx = current.clone();
            let mut i = self.k;
            loop {
                if i == 0 {
                    break None;
                }
                i -= 1;
                if idx[i] < self.n - (self.k - i) {
                    idx[i] += 1;
                    for j in (i + 1)..self.k {
                        idx[j] = idx[j - 1] + 1;
                    }
                    break Some(idx);
                }
            }
        };
        self.state = next;
        Some(current)
    }
}

/// Binomial coefficient, saturating at `u128::MAX` to keep cap checks safe.
pub(crate) fn count_combinations(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerates_in_lexicographic_order() {
        let all: Vec<Vec<usize>> = Combinations::new(4, 2).collect();
        assert_eq!(
            all,
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
    }

    #[test]
    fn counts_are_consistent() {
        for n in 0..10 {
            for k in 0..=n {
                let listed = Combinations::new(n, k).count() as u128;
                assert_eq!(listed, count_combinations(n, k));
            }
        }
        assert_eq!(count_combinations(100, 2), 4950);
        assert_eq!(count_combinations(5, 0), 1);
    }

    #[test]
    fn empty_subset_yields_single_empty() {
        let all: Vec<Vec<usize>> = Combinations::new(3, 0).collect();
        assert_eq!(all, vec![Vec::<usize>::new()]);
    }
}
