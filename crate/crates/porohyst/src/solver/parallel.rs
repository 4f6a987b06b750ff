//! Deterministic chunked parallelism for per-quadrature-point work.
//!
//! Work is split into fixed 64-point chunks assigned round-robin to workers
//! by chunk index, and the per-chunk results are merged back in chunk order.
//! Every ledger reduction over the merged vectors happens serially in index
//! order, so all outputs are bitwise identical for every thread count.

const CHUNK: usize = 64;

/// Map `f` over `0..n`, collecting results in index order.
pub fn map_indexed<R: Send>(n: usize, threads: usize, f: impl Fn(usize) -> R + Sync) -> Vec<R> {
    if threads <= 1 || n <= CHUNK {
        return (0..n).map(f).collect();
    }
    let n_chunks = n.div_ceil(CHUNK);
    let workers = threads.min(n_chunks);
    let mut slots: Vec<Option<Vec<R>>> = (0..n_chunks).map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(workers);
        for wid in 0..workers {
            let f = &f;
            handles.push(scope.spawn(move || {
                let mut out = Vec::new();
                let mut c = wid;
                while c < n_chunks {
                    let lo = c * CHUNK;
                    let hi = ((c + 1) * CHUNK).min(n);
                    out.push((c, (lo..hi).map(f).collect::<Vec<R>>()));
                    c += workers;
                }
                out
            }));
        }
        for h in handles {
            for (c, v) in h.join().expect("quadrature worker panicked") {
                slots[c] = Some(v);
            }
        }
    });
    let mut merged = Vec::with_capacity(n);
    for s in slots {
        merged.extend(s.expect("chunk not produced"));
    }
    merged
}

/// Apply `f` to every element of `data` (with its global index), collecting
/// the per-element results in index order. Mutation-friendly counterpart of
/// [`map_indexed`] used for ledger commits.
pub fn map_slice_mut<T: Send, R: Send>(
    data: &mut [T],
    threads: usize,
    f: impl Fn(usize, &mut T) -> R + Sync,
) -> Vec<R> {
    let n = data.len();
    if threads <= 1 || n <= CHUNK {
        return data.iter_mut().enumerate().map(|(i, x)| f(i, x)).collect();
    }
    let n_chunks = n.div_ceil(CHUNK);
    let workers = threads.min(n_chunks);
    let mut slots: Vec<Option<Vec<R>>> = (0..n_chunks).map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(workers);
        let mut work: Vec<Vec<(usize, &mut [T])>> = (0..workers).map(|_| Vec::new()).collect();
        for (c, chunk) in data.chunks_mut(CHUNK).enumerate() {
            work[c % workers].push((c, chunk));
        }
        for batch in work {
            let f = &f;
            handles.push(scope.spawn(move || {
                let mut out = Vec::new();
                for (c, chunk) in batch {
                    let base = c * CHUNK;
                    let vals = chunk
                        .iter_mut()
                        .enumerate()
                        .map(|(i, x)| f(base + i, x))
                        .collect::<Vec<R>>();
                    out.push((c, vals));
                }
                out
            }));
        }
        for h in handles {
            for (c, v) in h.join().expect("quadrature worker panicked") {
                slots[c] = Some(v);
            }
        }
    });
    let mut merged = Vec::with_capacity(n);
    for s in slots {
        merged.extend(s.expect("chunk not produced"));
    }
    merged
}
