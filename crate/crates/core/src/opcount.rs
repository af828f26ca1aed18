//! Floating-point operation counters.
//!
//! Every dense product and every pass over the sampled entries reports its
//! multiply-add count here. Counting is compiled in only with debug
//! assertions; release builds see no-ops and [`read`] returns zero.

#[cfg(debug_assertions)]
thread_local! {
    static FLOPS: std::cell::Cell<u64> = const { std::cell::Cell::new(0) };
    static DENSE_AMBIENT: std::cell::Cell<u64> = const { std::cell::Cell::new(0) };
}

#[inline]
pub fn add(_n: usize) {
    #[cfg(debug_assertions)]
    FLOPS.with(|c| c.set(c.get() + _n as u64));
}

/// Records that a full `d1 × d2` matrix was materialized.
#[inline]
pub fn note_ambient_dense() {
    #[cfg(debug_assertions)]
    DENSE_AMBIENT.with(|c| c.set(c.get() + 1));
}

pub fn reset() {
    #[cfg(debug_assertions)]
    {
        FLOPS.with(|c| c.set(0));
        DENSE_AMBIENT.with(|c| c.set(0));
    }
}

pub fn read() -> u64 {
    #[cfg(debug_assertions)]
    {
        FLOPS.with(|c| c.get())
    }
    #[cfg(not(debug_assertions))]
    {
        0
    }
}

pub fn ambient_dense_count() -> u64 {
    #[cfg(debug_assertions)]
    {
        DENSE_AMBIENT.with(|c| c.get())
    }
    #[cfg(not(debug_assertions))]
    {
        0
    }
}

pub const fn enabled() -> bool {
    cfg!(debug_assertions)
}

/// Runs `f` and returns its result together with the operations it counted.
pub fn measure<T>(f: impl FnOnce() -> T) -> (T, u64) {
    let before = read();
    let out = f();
    (out, read() - before)
}
