//! Character-level alignment via the Myers O(ND) shortest edit script.

/// Matched character pairs between `a` and `b`, as increasing
/// `(byte offset in a, byte offset in b)`. The number of pairs is the
/// length of a longest common subsequence of the two char sequences.
pub fn align_chars(a: &str, b: &str) -> Vec<(usize, usize)> {
    let ca: Vec<(usize, char)> = a.char_indices().collect();
    let cb: Vec<(usize, char)> = b.char_indices().collect();
    let xa: Vec<char> = ca.iter().map(|&(_, c)| c).collect();
    let xb: Vec<char> = cb.iter().map(|&(_, c)| c).collect();
    myers_pairs(&xa, &xb)
        .into_iter()
        .map(|(i, j)| (ca[i].0, cb[j].0))
        .collect()
}

/// Matched index pairs between two sequences.
pub fn myers_pairs<T: PartialEq>(a: &[T], b: &[T]) -> Vec<(usize, usize)> {
    let prefix = a.iter().zip(b).take_while(|(x, y)| x == y).count();
    let suffix = a[prefix..]
        .iter()
        .rev()
        .zip(b[prefix..].iter().rev())
        .take_while(|(x, y)| x == y)
        .count();
    let (ma, mb) = (&a[prefix..a.len() - suffix], &b[prefix..b.len() - suffix]);

    let mut pairs: Vec<(usize, usize)> = (0..prefix).map(|i| (i, i)).collect();
    pairs.extend(middle_snake_free(ma, mb).into_iter().map(|(i, j)| (i + prefix, j + prefix)));
    let (ta, tb) = (a.len() - suffix, b.len() - suffix);
    pairs.extend((0..suffix).map(|k| (ta + k, tb + k)));
    pairs
}

fn middle_snake_free<T: PartialEq>(a: &[T], b: &[T]) -> Vec<(usize, usize)> {
    let (n, m) = (a.len() as isize, b.len() as isize);
    if n == 0 || m == 0 {
        return Vec::new();
    }
    let max = n + m;
    let off = max + 1;
    let mut v = vec![0isize; (2 * max + 3) as usize];
    // trace[d] holds v[-d..=d] as it was before round d
    let mut trace: Vec<Vec<isize>> = Vec::new();
    let mut final_d = None;
    'outer: for d in 0..=max {
        trace.push(v[(off - d) as usize..=(off + d) as usize].to_vec());
        let mut k = -d;
        while k <= d {
            let down = k == -d || (k != d && v[(off + k - 1) as usize] < v[(off + k + 1) as usize]);
            let mut x = if down { v[(off + k + 1) as usize] } else { v[(off + k - 1) as usize] + 1 };
            let mut y = x - k;
            while x < n && y < m && a[x as usize] == b[y as usize] {
                x += 1;
                y += 1;
            }
            v[(off + k) as usize] = x;
            if x >= n && y >= m {
                final_d = Some(d);
                break 'outer;
            }
            k += 2;
        }
    }
    let final_d = final_d.expect("edit script length is bounded by n + m");

    let mut pairs = Vec::new();
    let (mut x, mut y) = (n, m);
    for d in (0..=final_d).rev() {
        let snap = &trace[d as usize];
        let get = |k: isize| if k.abs() <= d { snap[(k + d) as usize] } else { 0 };
        let k = x - y;
        let prev_k = if k == -d || (k != d && get(k - 1) < get(k + 1)) { k + 1 } else { k - 1 };
        let (prev_x, prev_y) = if d == 0 {
            (0, 0)
        } else {
            let px = get(prev_k);
            (px, px - prev_k)
        };
        let (sx, sy) = if d == 0 {
            (0, 0)
        } else if prev_k == k + 1 {
            (prev_x, prev_y + 1)
        } else {
            (prev_x + 1, prev_y)
        };
        while x > sx && y > sy {
            x -= 1;
            y -= 1;
            pairs.push((x as usize, y as usize));
        }
        x = prev_x;
        y = prev_y;
    }
    pairs.reverse();
    pairs
}

/// Per-byte view of which statement characters were matched in the source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharMatchSet {
    /// For each statement byte, the source byte offset of the matched
    /// character's first byte.
    source: Vec<Option<usize>>,
}

impl CharMatchSet {
    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn is_matched(&self, byte: usize) -> bool {
        self.source.get(byte).is_some_and(Option::is_some)
    }

    pub fn source_of(&self, byte: usize) -> Option<usize> {
        self.source.get(byte).copied().flatten()
    }
}

/// Aligns `statement` against `source`.
pub fn char_diff_align(statement: &str, source: &str) -> CharMatchSet {
    let mut map = vec![None; statement.len()];
    for (i, j) in align_chars(statement, source) {
        let w = statement[i..].chars().next().map_or(1, char::len_utf8);
        for slot in &mut map[i..i + w] {
            *slot = Some(j);
        }
    }
    CharMatchSet { source: map }
}
