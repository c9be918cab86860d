//! Scoped worker helpers.
//!
//! Every parallel pass in the pipeline partitions its input into contiguous
//! chunks, one per worker. Outputs are pure functions of element index, so
//! the produced bytes are identical for any worker count.

use std::ops::Range;

/// Contiguous index ranges covering `0..len`, at most `workers` of them.
pub fn chunk_ranges(len: usize, workers: usize) -> Vec<Range<usize>> {
    let workers = workers.max(1).min(len.max(1));
    let base = len / workers;
    let extra = len % workers;
    let mut out = Vec::with_capacity(workers);
    let mut start = 0;
    for i in 0..workers {
        let sz = base + usize::from(i < extra);
        out.push(start..start + sz);
        start += sz;
    }
    out
}

/// Runs `f` on each range of `0..len`, one scoped thread per range, and
/// returns the per-range results in range order.
pub fn map_ranges<R, F>(len: usize, workers: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(Range<usize>) -> R + Sync,
{
    let ranges = chunk_ranges(len, workers);
    if ranges.len() <= 1 {
        return ranges.into_iter().map(&f).collect();
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = ranges
            .into_iter()
            .map(|r| scope.spawn(|| f(r)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}

/// Elementwise map from `input` into `out`, split across workers.
/// `f` receives the absolute element index.
pub fn map_into<A, B, F>(input: &[A], out: &mut [B], workers: usize, f: F)
where
    A: Sync,
    B: Send,
    F: Fn(usize, &A) -> B + Sync,
{
    assert_eq!(input.len(), out.len());
    let ranges = chunk_ranges(input.len(), workers);
    if ranges.len() <= 1 {
        for (i, (a, b)) in input.iter().zip(out.iter_mut()).enumerate() {
            *b = f(i, a);
        }
        return;
    }
    std::thread::scope(|scope| {
        let mut rest = out;
        for r in ranges {
            let (chunk, tail) = rest.split_at_mut(r.len());
            rest = tail;
            let input = &input[r.clone()];
            let f = &f;
            scope.spawn(move || {
                for (off, (a, b)) in input.iter().zip(chunk.iter_mut()).enumerate() {
                    *b = f(r.start + off, a);
                }
            });
        }
    });
}

/// Like [`map_into`] but each worker also folds a summary value; summaries
/// are returned in range order so reductions stay deterministic.
pub fn map_into_with<A, B, S, F>(input: &[A], out: &mut [B], workers: usize, f: F) -> Vec<S>
where
    A: Sync,
    B: Send,
    S: Send + Default,
    F: Fn(usize, &A, &mut S) -> B + Sync,
{
    assert_eq!(input.len(), out.len());
    let ranges = chunk_ranges(input.len(), workers);
    if ranges.len() <= 1 {
        let mut s = S::default();
        for (i, (a, b)) in input.iter().zip(out.iter_mut()).enumerate() {
            *b = f(i, a, &mut s);
        }
        return vec![s];
    }
    std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(ranges.len());
        let mut rest = out;
        for r in ranges {
            let (chunk, tail) = rest.split_at_mut(r.len());
            rest = tail;
            let input = &input[r.clone()];
            let f = &f;
            handles.push(scope.spawn(move || {
                let mut s = S::default();
                for (off, (a, b)) in input.iter().zip(chunk.iter_mut()).enumerate() {
                    *b = f(r.start + off, a, &mut s);
                }
                s
            }));
        }
        handles
            .into_iter()
            .map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_cover_everything() {
        for len in [0usize, 1, 7, 64, 1000] {
            for workers in [1usize, 2, 3, 8, 40] {
                let rs = chunk_ranges(len, workers);
                let total: usize = rs.iter().map(|r| r.len()).sum();
                assert_eq!(total, len);
                let mut next = 0;
                for r in &rs {
                    assert_eq!(r.start, next);
                    next = r.end;
                }
            }
        }
    }

    #[test]
    fn map_into_matches_sequential() {
        let input: Vec<u32> = (0..1000).collect();
        let mut a = vec![0u64; 1000];
        let mut b = vec![0u64; 1000];
        map_into(&input, &mut a, 1, |i, v| i as u64 + *v as u64);
        map_into(&input, &mut b, 7, |i, v| i as u64 + *v as u64);
        assert_eq!(a, b);
    }

    #[test]
    fn summaries_in_range_order() {
        let input: Vec<u32> = (0..100).collect();
        let mut out = vec![0u32; 100];
        let sums: Vec<u64> = map_into_with(&input, &mut out, 4, |_, v, s: &mut u64| {
            *s += *v as u64;
            *v
        });
        assert_eq!(sums.iter().sum::<u64>(), 4950);
        assert_eq!(sums.len(), 4);
    }
}
