//! Minimal dynamic work queue on scoped threads.

use std::sync::atomic::{AtomicUsize, Ordering};

/// Runs `body(state, task)` for every task in `order`, handing tasks out in
/// that order to `workers` threads. Each worker owns one state created by
/// `init`; the states are returned in worker order.
pub fn for_each_dynamic<S, I, B>(workers: usize, order: &[usize], init: I, body: B) -> Vec<S>
where
    S: Send,
    I: Fn() -> S + Sync,
    B: Fn(&mut S, usize) + Sync,
{
    let workers = workers.max(1).min(order.len().max(1));
    if workers == 1 {
        let mut state = init();
        for &t in order {
            body(&mut state, t);
        }
        return vec![state];
    }
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut state = init();
                    loop {
                        let k = next.fetch_add(1, Ordering::Relaxed);
                        let Some(&t) = order.get(k) else { break };
                        body(&mut state, t);
                    }
                    state
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|e| std::panic::resume_unwind(e)))
            .collect()
    })
}

/// Maps every task in `order` through `f` on a dynamic queue; results are
/// returned indexed by position in `order`.
pub fn map_dynamic<T, F>(workers: usize, order: &[usize], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let parts = for_each_dynamic(workers, order, Vec::new, |acc: &mut Vec<(usize, T)>, t| {
        acc.push((t, f(t)))
    });
    let pos: std::collections::HashMap<usize, usize> =
        order.iter().enumerate().map(|(p, &t)| (t, p)).collect();
    let mut out: Vec<Option<T>> = (0..order.len()).map(|_| None).collect();
    for (t, v) in parts.into_iter().flatten() {
        out[pos[&t]] = Some(v);
    }
    out.into_iter()
        .map(|v| v.expect("task not executed"))
        .collect()
}

/// Hardware parallelism, at least 1.
pub fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

/// Task ids sorted by `key` descending, ties by id ascending.
pub fn largest_first(ids: &[usize], key: impl Fn(usize) -> usize) -> Vec<usize> {
    let mut v = ids.to_vec();
    v.sort_by(|&a, &b| key(b).cmp(&key(a)).then(a.cmp(&b)));
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_task_runs_once() {
        for workers in [1, 2, 8] {
            let order: Vec<usize> = (0..100).rev().collect();
            let states =
                for_each_dynamic(workers, &order, Vec::new, |v: &mut Vec<usize>, t| v.push(t));
            let mut all: Vec<usize> = states.into_iter().flatten().collect();
            all.sort();
            assert_eq!(all, (0..100).collect::<Vec<_>>());
        }
    }

    #[test]
    fn map_keeps_positions() {
        let order = vec![5, 3, 9];
        assert_eq!(map_dynamic(4, &order, |t| t * 2), vec![10, 6, 18]);
        assert!(map_dynamic(4, &[], |t: usize| t).is_empty());
    }

    #[test]
    fn ordering_helper() {
        let sizes = [3, 7, 7, 1];
        assert_eq!(largest_first(&[0, 1, 2, 3], |i| sizes[i]), vec![1, 2, 0, 3]);
    }
}
