use alloc::vec::Vec;

/// Evaluates `count` independent jobs and returns their results in index
/// order.
///
/// Implementations may run jobs concurrently but must return `f(0), f(1), ...`
/// in that order, so results never depend on scheduling.
pub trait Executor: Sync {
    fn map<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs every job on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..count).map(f).collect()
    }
}
