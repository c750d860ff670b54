//! Index bookkeeping for strictly increasing multi-indices.
//!
//! A multi-index is stored as a bitmask over `0..d`. Within one degree the
//! masks are enumerated in lexicographic order of their sorted index lists,
//! which is the component order used everywhere in the crate.

use std::sync::OnceLock;

/// Largest fiber dimension supported by the lookup tables.
pub const MAX_DIM: usize = 8;

struct DimTables {
    /// `subsets[k]` lists the k-subsets in lex order.
    subsets: Vec<Vec<u16>>,
    /// position of a mask inside its own degree class.
    rank: Vec<usize>,
}

fn build(d: usize) -> DimTables {
    let mut subsets = vec![Vec::new(); d + 1];
    fn rec(d: usize, start: usize, k: usize, mask: u16, out: &mut Vec<u16>) {
        if k == 0 {
            out.push(mask);
            return;
        }
        for i in start..d {
            if d - i < k {
                break;
            }
            rec(d, i + 1, k - 1, mask | (1 << i), out);
        }
    }
    for (k, s) in subsets.iter_mut().enumerate() {
        rec(d, 0, k, 0, s);
    }
    let mut rank = vec![0; 1 << d];
    for s in &subsets {
        for (r, &m) in s.iter().enumerate() {
            rank[m as usize] = r;
        }
    }
    DimTables { subsets, rank }
}

fn tables(d: usize) -> &'static DimTables {
    static CACHE: OnceLock<Vec<DimTables>> = OnceLock::new();
    assert!(d <= MAX_DIM, "dimension {d} exceeds MAX_DIM");
    &CACHE.get_or_init(|| (0..=MAX_DIM).map(build).collect())[d]
}

/// k-subsets of `0..d` in lex order.
pub fn subsets(d: usize, k: usize) -> &'static [u16] {
    &tables(d).subsets[k]
}

/// Position of `mask` among the subsets of the same size.
#[inline]
pub fn rank(d: usize, mask: u16) -> usize {
    tables(d).rank[mask as usize]
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r = 1usize;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

#[inline]
pub fn parity(n: u32) -> f64 {
    if n & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Sign picked up when index `a` is moved from the front of the list `mask`
/// to its sorted position (number of members below `a`).
#[inline]
pub fn insert_sign(mask: u16, a: usize) -> f64 {
    parity((mask & ((1u16 << a) - 1)).count_ones())
}

/// Sign of the shuffle sorting the concatenation `a ++ b`; zero on overlap.
#[inline]
pub fn merge_sign(a: u16, b: u16) -> f64 {
    if a & b != 0 {
        return 0.0;
    }
    let mut inv = 0u32;
    let mut rest = b;
    while rest != 0 {
        let j = rest.trailing_zeros();
        inv += (a >> (j + 1)).count_ones();
        rest &= rest - 1;
    }
    parity(inv)
}

/// Indices of a mask in increasing order.
pub fn indices(mask: u16) -> impl Iterator<Item = usize> {
    let mut rest = mask;
    std::iter::from_fn(move || {
        if rest == 0 {
            None
        } else {
            let j = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            Some(j)
        }
    })
}

/// Determinant of the minor `(rows, cols)` of a dense d×d matrix.
pub fn minor_det(mat: &[f64], d: usize, rows: u16, cols: u16) -> f64 {
    let r: Vec<usize> = indices(rows).collect();
    let c: Vec<usize> = indices(cols).collect();
    let n = r.len();
    match n {
        0 => 1.0,
        1 => mat[r[0] * d + c[0]],
        2 => mat[r[0] * d + c[0]] * mat[r[1] * d + c[1]] - mat[r[0] * d + c[1]] * mat[r[1] * d + c[0]],
        _ => {
            let mut a: Vec<f64> = Vec::with_capacity(n * n);
            for &i in &r {
                for &j in &c {
                    a.push(mat[i * d + j]);
                }
            }
            lu_det(&mut a, n)
        }
    }
}

fn lu_det(a: &mut [f64], n: usize) -> f64 {
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs()))
            .unwrap();
        if a[piv * n + col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            for j in 0..n {
                a.swap(piv * n + j, col * n + j);
            }
            det = -det;
        }
        let p = a[col * n + col];
        det *= p;
        for i in col + 1..n {
            let f = a[i * n + col] / p;
            for j in col..n {
                a[i * n + j] -= f * a[col * n + j];
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lex_order_for_pairs_in_three_dims() {
        let s: Vec<Vec<usize>> = subsets(3, 2).iter().map(|&m| indices(m).collect()).collect();
        assert_eq!(s, vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert_eq!(subsets(4, 0), &[0]);
        assert_eq!(subsets(4, 4).len(), 1);
    }

    #[test]
    fn counts_match_binomials() {
        for d in 0..=MAX_DIM {
            for k in 0..=d {
                assert_eq!(subsets(d, k).len(), binomial(d, k));
                for (r, &m) in subsets(d, k).iter().enumerate() {
                    assert_eq!(rank(d, m), r);
                }
            }
        }
    }

    #[test]
    fn merge_sign_brute_force() {
        // compare against counting inversions of the explicit sequence
        for a in 0u16..16 {
            for b in 0u16..16 {
                let want = if a & b != 0 {
                    0.0
                } else {
                    let seq: Vec<usize> = indices(a).chain(indices(b)).collect();
                    let mut inv = 0;
                    for i in 0..seq.len() {
                        for j in i + 1..seq.len() {
                            if seq[i] > seq[j] {
                                inv += 1;
                            }
                        }
                    }
                    parity(inv)
                };
                assert_eq!(merge_sign(a, b), want);
            }
        }
    }

    #[test]
    fn minor_det_of_identity_block() {
        let id = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        assert_eq!(minor_det(&id, 3, 0b101, 0b101), 1.0);
        assert_eq!(minor_det(&id, 3, 0b101, 0b011), 0.0);
        let m = [2.0, 1.0, 0.5, 1.0, 3.0, 0.25, 0.5, 0.25, 4.0];
        let full = minor_det(&m, 3, 0b111, 0b111);
        let want = 2.0 * (12.0 - 0.0625) - 1.0 * (4.0 - 0.125) + 0.5 * (0.25 - 1.5);
        assert!((full - want).abs() < 1e-12);
    }
}
