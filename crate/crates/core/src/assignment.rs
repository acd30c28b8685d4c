//! Dense linear sum assignment by successive shortest augmenting paths with
//! Dijkstra on reduced costs (Jonker-Volgenant style). Costs are supplied by a
//! closure so large geometric problems never materialize the cost matrix.

/// Returns `col_for_row` minimizing `sum cost(i, col_for_row[i])`.
pub fn solve<F>(n: usize, cost: F) -> Vec<usize>
where
    F: Fn(usize, usize) -> f64,
{
    const NONE: usize = usize::MAX;
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut col_for_row = vec![NONE; n];
    let mut row_for_col = vec![NONE; n];
    let mut shortest = vec![f64::INFINITY; n];
    let mut path = vec![NONE; n];
    let mut remaining: Vec<usize> = Vec::with_capacity(n);
    let mut seen_row = vec![false; n];
    let mut seen_col = vec![false; n];

    for cur_row in 0..n {
        remaining.clear();
        remaining.extend((0..n).rev());
        seen_row.iter_mut().for_each(|s| *s = false);
        seen_col.iter_mut().for_each(|s| *s = false);
        shortest.iter_mut().for_each(|s| *s = f64::INFINITY);

        let mut min_val = 0.0;
        let mut i = cur_row;
        let sink = loop {
            seen_row[i] = true;
            let mut best = usize::MAX;
            let mut lowest = f64::INFINITY;
            for (slot, &j) in remaining.iter().enumerate() {
                let reduced = min_val + cost(i, j) - u[i] - v[j];
                if reduced < shortest[j] {
                    path[j] = i;
                    shortest[j] = reduced;
                }
                if shortest[j] < lowest || (shortest[j] == lowest && row_for_col[j] == NONE) {
                    lowest = shortest[j];
                    best = slot;
                }
            }
            assert!(lowest.is_finite(), "assignment costs must be finite");
            min_val = lowest;
            let j = remaining.swap_remove(best);
            seen_col[j] = true;
            if row_for_col[j] == NONE {
                break j;
            }
            i = row_for_col[j];
        };

        u[cur_row] += min_val;
        for r in 0..n {
            if seen_row[r] && r != cur_row {
                u[r] += min_val - shortest[col_for_row[r]];
            }
        }
        for c in 0..n {
            if seen_col[c] {
                v[c] -= min_val - shortest[c];
            }
        }

        let mut j = sink;
        loop {
            let r = path[j];
            row_for_col[j] = r;
            std::mem::swap(&mut col_for_row[r], &mut j);
            if r == cur_row {
                break;
            }
        }
    }
    col_for_row
}
