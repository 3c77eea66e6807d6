/// Compressed sparse rows from a list of arcs. Rows come out sorted and deduplicated.
pub(crate) fn from_arcs(n: usize, arcs: &[(u32, u32)]) -> (Vec<usize>, Vec<u32>) {
    let mut offsets = vec![0usize; n + 1];
    for &(u, _) in arcs {
        offsets[u as usize + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let mut fill = offsets.clone();
    let mut targets = vec![0u32; arcs.len()];
    for &(u, v) in arcs {
        targets[fill[u as usize]] = v;
        fill[u as usize] += 1;
    }
    // sort rows, then squeeze out duplicates in place
    let mut write = 0usize;
    let mut start = 0usize;
    for i in 0..n {
        let end = offsets[i + 1];
        targets[start..end].sort_unstable();
        let row_begin = write;
        for r in start..end {
            if write == row_begin || targets[write - 1] != targets[r] {
                targets[write] = targets[r];
                write += 1;
            }
        }
        start = end;
        offsets[i + 1] = write;
    }
    targets.truncate(write);
    (offsets, targets)
}
