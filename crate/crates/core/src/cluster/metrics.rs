use std::collections::BTreeMap;

fn comb2(n: u64) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index between two labelings; NOISE counts as its own label.
pub fn adjusted_rand_index(a: &[Option<usize>], b: &[Option<usize>]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as u64;
    let mut table: BTreeMap<(Option<usize>, Option<usize>), u64> = BTreeMap::new();
    let mut rows: BTreeMap<Option<usize>, u64> = BTreeMap::new();
    let mut cols: BTreeMap<Option<usize>, u64> = BTreeMap::new();
    for (x, y) in a.iter().zip(b) {
        *table.entry((*x, *y)).or_insert(0) += 1;
        *rows.entry(*x).or_insert(0) += 1;
        *cols.entry(*y).or_insert(0) += 1;
    }
    let index: f64 = table.values().map(|&v| comb2(v)).sum();
    let sa: f64 = rows.values().map(|&v| comb2(v)).sum();
    let sb: f64 = cols.values().map(|&v| comb2(v)).sum();
    let total = comb2(n);
    if total == 0.0 {
        return 1.0;
    }
    let expected = sa * sb / total;
    let max = 0.5 * (sa + sb);
    if (max - expected).abs() < 1e-12 {
        return 1.0;
    }
    (index - expected) / (max - expected)
}
