use rayon::prelude::*;
use spingate_core::Executor;

use crate::error::{CliError, Result};

/// Executor backed by a dedicated rayon pool. Results keep index order, so
/// output does not depend on the thread count.
#[derive(Debug)]
pub struct Rayon {
    pool: rayon::ThreadPool,
}

impl Rayon {
    /// `None` uses rayon's default thread count.
    pub fn new(threads: Option<usize>) -> Result<Self> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(t) = threads {
            if t == 0 {
                return Err(CliError::validation("--threads", "must be at least 1"));
            }
            builder = builder.num_threads(t);
        }
        let pool = builder.build().map_err(|e| CliError::Runtime(e.to_string()))?;
        Ok(Self { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Rayon {
    fn map<T: Send, F: Fn(usize) -> T + Sync + Send>(&self, count: usize, f: F) -> Vec<T> {
        self.pool.install(|| (0..count).into_par_iter().map(f).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use spingate_core::Sequential;

    #[test]
    fn matches_sequential_order() {
        let pool = Rayon::new(Some(3)).unwrap();
        let f = |i: usize| (i * i) as f64 / 7.0;
        assert_eq!(pool.map(100, f), Sequential.map(100, f));
        assert_eq!(pool.threads(), 3);
        assert!(Rayon::new(Some(0)).is_err());
    }
}
