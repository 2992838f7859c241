//! Execution policy for the data-parallel kernels.
//!
//! Both policies produce bit-identical results: parallel work is split over
//! independent outputs only and every reduction runs sequentially in a fixed
//! order. Without the `parallel` feature, `Exec::Parallel` runs sequentially.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// Whether this policy actually runs on the rayon pool in this build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Apply `f(index, chunk)` to consecutive chunks of `width` values.
    pub fn for_each_chunk<F>(self, data: &mut [f64], width: usize, f: F)
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            data.par_chunks_mut(width)
                .enumerate()
                .for_each(|(i, c)| f(i, c));
            return;
        }
        data.chunks_mut(width).enumerate().for_each(|(i, c)| f(i, c));
    }

    /// Map `f` over `items`, preserving order.
    pub fn map<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree() {
        let mut a: Vec<f64> = (0..120).map(|i| i as f64 * 0.1).collect();
        let mut b = a.clone();
        let op = |i: usize, c: &mut [f64]| c.iter_mut().for_each(|v| *v = v.sin() + i as f64);
        Exec::Sequential.for_each_chunk(&mut a, 7, op);
        Exec::Parallel.for_each_chunk(&mut b, 7, op);
        assert_eq!(a, b);

        let xs = [1.0, 2.0, 3.0];
        assert_eq!(Exec::Parallel.map(&xs, |x| x * 2.0), vec![2.0, 4.0, 6.0]);
    }
}
