//! Multiply-accumulate bookkeeping used by the complexity probe.
//!
//! Kernels call [`record`] with the number of complex MACs they perform.
//! The counter is thread local so concurrent runs do not interfere.

use std::cell::Cell;

thread_local! {
    static MACS: Cell<u64> = const { Cell::new(0) };
}

#[inline]
pub fn record(macs: usize) {
    MACS.with(|c| c.set(c.get().wrapping_add(macs as u64)));
}

/// Current value of this thread's counter.
pub fn total() -> u64 {
    MACS.with(Cell::get)
}

/// Runs `f` and returns its result together with the MACs it recorded.
pub fn measure<R>(f: impl FnOnce() -> R) -> (R, u64) {
    let start = total();
    let out = f();
    (out, total().wrapping_sub(start))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_measurements_compose() {
        let ((_, inner), outer) = measure(|| {
            record(3);
            measure(|| record(5))
        });
        assert_eq!(inner, 5);
        assert_eq!(outer, 8);
    }
}
