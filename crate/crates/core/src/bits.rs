//! Bit-string and setting-vector encodings.
//!
//! An `n`-bit string `x₁…xₙ` is packed as the integer `Σ xᵢ·2^{n−i}`, so `x₁`
//! is the most significant bit. Positions are 1-based throughout the public
//! API, matching how strings are written.

/// Bit `x_pos` (1-based) of a packed `n`-bit string.
#[inline]
pub fn bit(x: usize, pos: usize, n: usize) -> usize {
    (x >> (n - pos)) & 1
}

/// `x` with bit `pos` (1-based) flipped.
#[inline]
pub fn flip(x: usize, pos: usize, n: usize) -> usize {
    x ^ (1 << (n - pos))
}

/// Prefix `x₁…x_len` as an integer.
#[inline]
pub fn prefix(x: usize, len: usize, n: usize) -> usize {
    x >> (n - len)
}

pub fn pack(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | (b as usize & 1))
}

pub fn unpack(x: usize, n: usize) -> Vec<u8> {
    (1..=n).map(|pos| bit(x, pos, n) as u8).collect()
}

pub fn to_string(x: usize, n: usize) -> String {
    (1..=n).map(|pos| if bit(x, pos, n) == 1 { '1' } else { '0' }).collect()
}

/// Mask with bit `pos` set for every 1-based position in `positions`.
pub fn mask_of(positions: &[usize], n: usize) -> usize {
    positions.iter().fold(0, |m, &p| m | (1 << (n - p)))
}

/// Decodes a mixed-radix setting code into per-position indices, position 1
/// being the most significant digit.
pub fn settings_of(code: usize, n: usize, radix: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    let mut c = code;
    for slot in out.iter_mut().rev() {
        *slot = c % radix;
        c /= radix;
    }
    out
}

pub fn settings_code(settings: &[usize], radix: usize) -> usize {
    settings.iter().fold(0, |acc, &s| acc * radix + s)
}
