//! Kernels of the binary fast path.

/// Adds `popcount(a[i] & b)` into `lanes[i]`.
#[inline]
pub(super) fn and_popcount_into(lanes: &mut [u32], a: &[u64], b: u64) {
    for (lane, &w) in lanes.iter_mut().zip(a) {
        *lane += (w & b).count_ones();
    }
}

/// Sets bit `bit` of `cols[k]` for every set pixel `k` of a packed frame.
#[inline]
pub(super) fn scatter_bits(cols: &mut [u64], packed: &[u8], width: usize, height: usize, bit: u32) {
    let rb = width.div_ceil(8);
    let m = 1u64 << bit;
    for j in 0..height {
        let row = &packed[j * rb..(j + 1) * rb];
        let base = j * width;
        for (bx, &byte) in row.iter().enumerate() {
            let mut v = byte;
            while v != 0 {
                let t = v.trailing_zeros() as usize;
                cols[base + bx * 8 + t] |= m;
                v &= v - 1;
            }
        }
    }
}
