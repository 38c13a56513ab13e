//! Register-blocked matrix products over gathered rows.
//!
//! Every output element starts from its current value and adds its `k`
//! products one at a time in ascending `p`, with separate multiply and add.
//! Blocking only changes which elements are computed together, never the
//! order within an element, so results equal the naive triple loop bit for
//! bit.

const MR: usize = 8;
const NR: usize = 16;
/// Rows per outer block, so a block of `x` stays cache resident while the
/// weight columns stream past it.
const MC: usize = 64;

/// `y[out[r]] += x[inp[r]] · w` for every `r`. Rows of `x` have `k` entries,
/// `w` is `k × n` row-major and rows of `y` have `n` entries. Entries of
/// `out` must be distinct.
pub(crate) fn gather_gemm(out: &[usize], inp: &[usize], x: &[f64], k: usize, w: &[f64], n: usize, y: &mut [f64]) {
    debug_assert_eq!(out.len(), inp.len());
    debug_assert_eq!(w.len(), k * n);
    let n_full = n - n % NR;
    for (out_block, inp_block) in out.chunks(MC).zip(inp.chunks(MC)) {
        let m = out_block.len();
        let m_full = m - m % MR;
        for j0 in (0..n_full).step_by(NR) {
            for r0 in (0..m_full).step_by(MR) {
                let o: [usize; MR] = core::array::from_fn(|r| out_block[r0 + r] * n + j0);
                let a: [&[f64]; MR] = core::array::from_fn(|r| &x[inp_block[r0 + r] * k..][..k]);
                let mut acc = [[0.0; NR]; MR];
                for r in 0..MR {
                    acc[r].copy_from_slice(&y[o[r]..o[r] + NR]);
                }
                for p in 0..k {
                    let b: &[f64; NR] = w[p * n + j0..p * n + j0 + NR].try_into().unwrap();
                    for r in 0..MR {
                        let av = a[r][p];
                        for j in 0..NR {
                            acc[r][j] += av * b[j];
                        }
                    }
                }
                for r in 0..MR {
                    y[o[r]..o[r] + NR].copy_from_slice(&acc[r]);
                }
            }
            for r in m_full..m {
                let o = out_block[r] * n + j0;
                let a = &x[inp_block[r] * k..][..k];
                let mut acc = [0.0; NR];
                acc.copy_from_slice(&y[o..o + NR]);
                for p in 0..k {
                    let b = &w[p * n + j0..p * n + j0 + NR];
                    for j in 0..NR {
                        acc[j] += a[p] * b[j];
                    }
                }
                y[o..o + NR].copy_from_slice(&acc);
            }
        }
        for j in n_full..n {
            for r in 0..m {
                let a = &x[inp_block[r] * k..][..k];
                let mut acc = y[out_block[r] * n + j];
                for p in 0..k {
                    acc += a[p] * w[p * n + j];
                }
                y[out_block[r] * n + j] = acc;
            }
        }
    }
}
